//! Resolved run configurations. Each one is what a manifest records and
//! what `rerun` executes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bullwhip_core::analysis::{cumulative_concentration_report, filtering_report};
use bullwhip_core::benchmark::{
    format_sig, render_table, run_benchmark, run_scaling_harness, scaling_csv, sweep_parameter, BenchmarkSpec, ChainRef,
    ComponentSpec, ScalingAxes, ScalingBase, SweepTarget, TableFormat, ERROR_METRIC,
};
use bullwhip_core::demand::generate_batch;
use bullwhip_core::engine::{simulate_batch, simulate_paths_serial, EngineOptions, IpTiming, SimulationResult};
use bullwhip_core::io::write_atomic;
use bullwhip_core::metrics::{Scope, Statistic};
use bullwhip_core::protocols::{chen_csv, validate_chen, ChenSettings};
use bullwhip_core::registry::{catalog, Registry};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Chain, components and horizon of a direct simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSetup {
    pub chain: ChainRef,
    pub demand: ComponentSpec,
    pub forecaster: ComponentSpec,
    pub policy: ComponentSpec,
    pub cost: ComponentSpec,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub ip_timing: IpTiming,
    #[serde(default)]
    pub burn_in: usize,
}

impl SimulationSetup {
    /// Defaults made explicit so the manifest alone reproduces the run.
    pub fn resolved(&self, reg: &Registry) -> Result<Self> {
        use bullwhip_core::registry::Category as C;
        let fill = |cat: C, c: &ComponentSpec| -> Result<ComponentSpec> {
            Ok(ComponentSpec {
                name: c.name.clone(),
                params: reg.resolve_params(cat, &c.name, &c.params)?,
                label: c.label.clone(),
            })
        };
        Ok(SimulationSetup {
            chain: ChainRef::Inline(self.chain.resolve()?),
            demand: fill(C::Demand, &self.demand)?,
            forecaster: fill(C::Forecaster, &self.forecaster)?,
            policy: fill(C::Policy, &self.policy)?,
            cost: fill(C::Cost, &self.cost)?,
            ..self.clone()
        })
    }

    fn run(&self, reg: &Registry, paths: usize, serial: bool) -> Result<SimulationResult> {
        let chain = self.chain.resolve()?;
        let gen = reg.demand(&self.demand.name, &self.demand.params)?;
        let fc = reg.forecaster(&self.forecaster.name, &self.forecaster.params)?;
        let policy = reg.policy(&self.policy.name, &self.policy.params)?;
        let cost = reg.cost(&self.cost.name, &self.cost.params)?;
        let demand = generate_batch(gen.as_ref(), self.horizon, paths, self.seed)?;
        let forecasts = fc.generate_forecasts(&demand, gen.prior())?;
        let opts = EngineOptions {
            ip_timing: self.ip_timing,
            burn_in: self.burn_in,
            ..EngineOptions::default()
        };
        let res = if serial {
            simulate_paths_serial(&chain, &demand, &forecasts, policy.as_ref(), cost.as_ref(), &opts)?
        } else {
            simulate_batch(&chain, &demand, &forecasts, policy.as_ref(), cost.as_ref(), &opts)?
        };
        Ok(res)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloRun {
    pub setup: SimulationSetup,
    pub paths: usize,
    #[serde(default)]
    pub trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRunConfig {
    pub spec: BenchmarkSpec,
    #[serde(default)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub spec: BenchmarkSpec,
    pub target: SweepTarget,
    pub param: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChenRun {
    pub pairs: Vec<(usize, usize)>,
    pub settings: ChenSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilteringRun {
    pub setup: SimulationSetup,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRun {
    pub axes: ScalingAxes,
    pub base: ScalingBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Simulate(SimulationSetup),
    Montecarlo(MonteCarloRun),
    Benchmark(BenchmarkRunConfig),
    Sweep(SweepRun),
    ValidateChen(ChenRun),
    ValidateFiltering(FilteringRun),
    Scale(ScaleRun),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub toolkit_version: String,
    /// Worker cap the run was started with (0 = all cores); results do not depend on it.
    #[serde(default)]
    pub threads: usize,
    pub run: RunConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Manifest = toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        if m.toolkit_version != VERSION {
            log::warn!("manifest was written by version {}, running {VERSION}", m.toolkit_version);
        }
        Ok(m)
    }
}

/// Files written by a run, plus a human-readable summary.
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write(out: &Path, name: &str, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    write_atomic(&path, text.as_bytes())?;
    files.push(path);
    Ok(())
}

/// Execute a resolved run and write its outputs and manifest into `out`.
pub fn execute(run: &RunConfig, threads: usize, out: &Path) -> Result<Outcome> {
    let reg = catalog();
    let mut files = Vec::new();
    let mut summary = String::new();
    match run {
        RunConfig::Simulate(setup) => {
            let res = setup.run(reg, 1, true)?;
            let mut traj = Vec::new();
            res.write_trajectories_csv(&mut traj)?;
            write(out, "trajectories.csv", std::str::from_utf8(&traj)?, &mut files)?;
            let (csv, text) = metrics_tables(&res, false)?;
            write(out, "metrics.csv", &csv, &mut files)?;
            summary = text;
        }
        RunConfig::Montecarlo(mc) => {
            if mc.paths == 0 {
                bail!("--N must be at least 1");
            }
            let res = mc.setup.run(reg, mc.paths, false)?;
            if mc.trajectories {
                let mut traj = Vec::new();
                res.write_trajectories_csv(&mut traj)?;
                write(out, "trajectories.csv", std::str::from_utf8(&traj)?, &mut files)?;
            }
            let (csv, text) = metrics_tables(&res, true)?;
            write(out, "summary.csv", &csv, &mut files)?;
            summary = text;
        }
        RunConfig::Benchmark(b) => {
            let result = run_benchmark(&b.spec, reg)?;
            let csv = render_table(&result.records, TableFormat::Csv, 4)?;
            write(out, "benchmark.csv", &csv, &mut files)?;
            match b.format {
                TableFormat::Csv => {}
                TableFormat::Latex => write(out, "benchmark.tex", &render_table(&result.records, b.format, 4)?, &mut files)?,
                TableFormat::Markdown => {
                    write(out, "benchmark.md", &render_table(&result.records, b.format, 4)?, &mut files)?
                }
            }
            summary = render_table(&result.records, TableFormat::Markdown, 4)?;
            let _ = writeln!(summary, "demand digest {}", result.demand_digest);
            for f in &result.failures {
                let _ = writeln!(summary, "FAILED {}", f.message);
            }
        }
        RunConfig::Sweep(s) => {
            let values: Vec<serde_json::Value> = s
                .values
                .iter()
                .map(|v| serde_json::to_value(v).context("sweep value"))
                .collect::<Result<_>>()?;
            let points = sweep_parameter(&s.spec, reg, &s.target, &s.param, &values)?;
            let mut csv = String::from("param_value,policy,forecaster,echelon,metric,value\n");
            let mut failures = 0;
            for pt in &points {
                let v = match &pt.value {
                    serde_json::Value::String(x) => x.clone(),
                    other => other.to_string(),
                };
                for r in &pt.run.records {
                    failures += usize::from(r.metric == ERROR_METRIC);
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        csv_field(&v),
                        csv_field(&r.policy),
                        csv_field(&r.forecaster),
                        r.echelon,
                        r.metric,
                        format_sig(r.value, 4)
                    );
                }
            }
            write(out, "sweep.csv", &csv, &mut files)?;
            let _ = writeln!(summary, "{} sweep points of `{}`, {failures} failed combinations", points.len(), s.param);
        }
        RunConfig::ValidateChen(c) => {
            let rows = validate_chen(&c.pairs, &c.settings)?;
            let csv = chen_csv(&rows);
            write(out, "chen.csv", &csv, &mut files)?;
            summary.push_str(&csv);
        }
        RunConfig::ValidateFiltering(f) => {
            let res = f.setup.run(reg, f.paths, false)?;
            let report = filtering_report(&res)?;
            write(out, "filtering.csv", &report.to_csv(), &mut files)?;
            let conc = cumulative_concentration_report(&res)?;
            let mut csv = String::from("quantity,value\n");
            let _ = writeln!(csv, "predicted_cv,{}", conc.predicted_cv);
            let _ = writeln!(csv, "naive_cv,{}", conc.naive_cv);
            let _ = writeln!(csv, "empirical_cv,{}", conc.empirical_cv);
            for (i, row) in conc.corr.iter().enumerate() {
                for (j, v) in row.iter().enumerate().skip(i + 1) {
                    let _ = writeln!(csv, "rho_{}{},{}", i + 1, j + 1, v);
                }
            }
            write(out, "concentration.csv", &csv, &mut files)?;
            summary.push_str(&report.to_csv());
            summary.push_str(&csv);
        }
        RunConfig::Scale(s) => {
            let rows = run_scaling_harness(&s.axes, &s.base)?;
            let csv = scaling_csv(&rows);
            write(out, "scaling.csv", &csv, &mut files)?;
            summary.push_str(&csv);
        }
    }
    let manifest = Manifest {
        toolkit_version: VERSION.to_string(),
        threads,
        run: run.clone(),
    };
    let text = toml::to_string(&manifest).context("serializing manifest")?;
    write(out, MANIFEST_FILE, &text, &mut files)?;
    Ok(Outcome { files, summary })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const SUMMARY_METRICS: [&str; 6] = ["bwr", "cum_bwr", "nsamp", "fill_rate", "tc", "chen_lower_bound"];

/// Per-echelon metric table: `echelon,metric,mean,median,std,cv` for Monte
/// Carlo runs, `echelon,metric,value` for a single path.
fn metrics_tables(res: &SimulationResult, full: bool) -> Result<(String, String)> {
    let reg = catalog();
    let mut csv = String::from(if full {
        "echelon,metric,mean,median,std,cv\n"
    } else {
        "echelon,metric,value\n"
    });
    let mut text = String::new();
    let _ = writeln!(text, "{:<8} {:<18} {:>12} {:>12} {:>12} {:>8}", "echelon", "metric", "mean", "median", "std", "cv");
    for name in SUMMARY_METRICS {
        let m = reg.metric(name, &Default::default())?;
        for k in 0..res.echelons {
            let v = m.compute(res, k)?;
            let e = Scope::Echelon(k);
            if full {
                let _ = writeln!(csv, "{e},{name},{},{},{},{}", v.mean, v.median, v.std, v.cv);
            } else {
                let _ = writeln!(csv, "{e},{name},{}", v.stat(Statistic::Mean));
            }
            let _ = writeln!(
                text,
                "{:<8} {:<18} {:>12} {:>12} {:>12} {:>8}",
                e.to_string(),
                name,
                format_sig(v.mean, 4),
                format_sig(v.median, 4),
                format_sig(v.std, 4),
                format_sig(v.cv, 3)
            );
            if v.degenerate_paths > 0 {
                log::warn!("{name} at {e}: {} paths had zero demand variance", v.degenerate_paths);
            }
        }
    }
    Ok((csv, text))
}
