use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::builtin_chain;
use crate::cost::Newsvendor;
use crate::demand::{generate_batch, Ar1Params, DemandGenerator, SemiconductorAr1};
use crate::engine::{simulate_batch, simulate_paths_serial, EngineOptions};
use crate::error::{Error, Result};
use crate::forecast::{Forecaster, Naive};
use crate::policy::OrderUpTo;

pub const SCALING_HEADER: &str = "axis,value,serial_s,batch_s,speedup,cells";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingAxes {
    pub n: Vec<usize>,
    pub t: Vec<usize>,
    pub k: Vec<usize>,
}

/// The point the axes vary around, one axis at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingBase {
    pub n: usize,
    pub t: usize,
    pub k: usize,
    pub seed: u64,
    /// Each engine is timed this many times; the fastest run counts.
    pub repeats: usize,
    /// Skip the serial engine (its columns are then NaN).
    pub batch_only: bool,
}

impl Default for ScalingBase {
    fn default() -> Self {
        ScalingBase {
            n: 1000,
            t: 156,
            k: 4,
            seed: 42,
            repeats: 3,
            batch_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub axis: String,
    pub value: usize,
    pub serial_s: f64,
    pub batch_s: f64,
    pub speedup: f64,
    pub cells: usize,
    /// Bytes held by the inputs and the three output tensors.
    pub bytes_estimate: usize,
}

impl ScalingRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.3},{}",
            self.axis, self.value, self.serial_s, self.batch_s, self.speedup, self.cells
        )
    }
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from(SCALING_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Time both engines on identical inputs at each axis point. The chain is
/// the semiconductor chain cycled to `K` tiers; demand is the default AR(1).
pub fn run_scaling_harness(axes: &ScalingAxes, base: &ScalingBase) -> Result<Vec<ScalingRow>> {
    if axes.n.is_empty() && axes.t.is_empty() && axes.k.is_empty() {
        return Err(Error::Empty("scaling axes"));
    }
    let mut rows = Vec::new();
    let points = axes
        .n
        .iter()
        .map(|&v| ("N", v, (v, base.t, base.k)))
        .chain(axes.t.iter().map(|&v| ("T", v, (base.n, v, base.k))))
        .chain(axes.k.iter().map(|&v| ("K", v, (base.n, base.t, v))));
    for (axis, value, (n, t, k)) in points {
        let (serial_s, batch_s, bytes) = time_point(n, t, k, base)?;
        rows.push(ScalingRow {
            axis: axis.to_string(),
            value,
            serial_s,
            batch_s,
            speedup: serial_s / batch_s,
            cells: n * t * k,
            bytes_estimate: bytes,
        });
    }
    Ok(rows)
}

fn time_point(n: usize, t: usize, k: usize, base: &ScalingBase) -> Result<(f64, f64, usize)> {
    let chain = builtin_chain("semiconductor_4tier")?.cycled(k)?;
    let gen = SemiconductorAr1::new(Ar1Params::default())?;
    let demand = generate_batch(&gen, t, n, base.seed)?;
    let fc = Naive.generate_forecasts(&demand, gen.prior())?;
    let opts = EngineOptions::default();
    let repeats = base.repeats.max(1);

    let mut batch_s = f64::INFINITY;
    let mut batch = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let r = simulate_batch(&chain, &demand, &fc, &OrderUpTo, &Newsvendor, &opts)?;
        batch_s = batch_s.min(start.elapsed().as_secs_f64());
        batch = Some(r);
    }
    let batch = batch.expect("at least one repeat");

    let mut serial_s = f64::NAN;
    if !base.batch_only {
        serial_s = f64::INFINITY;
        for _ in 0..repeats {
            let start = Instant::now();
            let r = simulate_paths_serial(&chain, &demand, &fc, &OrderUpTo, &Newsvendor, &opts)?;
            serial_s = serial_s.min(start.elapsed().as_secs_f64());
            if r.orders != batch.orders {
                return Err(Error::ShapeMismatch(format!(
                    "engines disagree at N={n}, T={t}, K={k}"
                )));
            }
        }
    }
    let f = std::mem::size_of::<f64>();
    let bytes = (3 * n * t) * f + 3 * n * k * t * f;
    Ok((serial_s, batch_s, bytes))
}
