//! Lockstep engine.
//!
//! Paths are processed in chunks laid out structure-of-arrays: for each
//! echelon, every state variable is a contiguous vector over the chunk's
//! paths. All paths advance together, so one pointer per echelon indexes
//! the circular pipeline and the rolling order-history buffers. Per-path
//! arithmetic follows the serial engine operation for operation, so the
//! trajectories are bit-identical to it.

use rayon::prelude::*;

use super::serial::run_path;
use super::state::initial_on_hand;
use super::{check_inputs, plan, EchelonPlan, EngineOptions, IpTiming, SimulationResult};
use crate::config::ChainConfig;
use crate::cost::{newsvendor_cost, BuiltinCost, CostFunction, NewsvendorParams};
use crate::demand::DemandBatch;
use crate::error::{Error, Result};
use crate::forecast::{floor_std, ForecastBatch, ForecastPair, SIGMA_FLOOR};
use crate::policy::{BuiltinPolicy, OrderContext, OrderingPolicy};

const CHUNK: usize = 64;

pub fn simulate_batch(
    config: &ChainConfig,
    demand: &DemandBatch,
    fc: &ForecastBatch,
    policy: &dyn OrderingPolicy,
    cost: &dyn CostFunction,
    opts: &EngineOptions,
) -> Result<SimulationResult> {
    if fc.paths != demand.paths || fc.horizon != demand.horizon {
        return Err(Error::ShapeMismatch(format!(
            "demand is {}x{} but forecasts are {}x{}",
            demand.paths, demand.horizon, fc.paths, fc.horizon
        )));
    }
    if demand.paths == 0 {
        return Err(Error::Empty("demand batch"));
    }
    if demand.horizon == 0 {
        return Err(Error::Empty("demand series"));
    }
    if demand.values.len() != demand.paths * demand.horizon {
        return Err(Error::ShapeMismatch("demand buffer does not match its shape".into()));
    }
    for i in 0..demand.paths {
        check_inputs(demand.row(i), fc.mean_row(i), fc.std_row(i), i)?;
    }
    let plans = plan(config, opts)?;
    let block = plans.len() * demand.horizon;
    let cells = demand.paths * block;
    let mut orders = vec![0.0; cells];
    let mut inventory = vec![0.0; cells];
    let mut costs = vec![0.0; cells];

    let input = Input {
        plans: &plans,
        demand,
        fc,
        opts,
    };
    let mut suspects: Vec<usize> = orders
        .par_chunks_mut(CHUNK * block)
        .zip(inventory.par_chunks_mut(CHUNK * block))
        .zip(costs.par_chunks_mut(CHUNK * block))
        .enumerate()
        .flat_map_iter(|(c, ((o, inv), cs))| {
            let out = Output {
                orders: o,
                inventory: inv,
                costs: cs,
            };
            dispatch(&input, c * CHUNK, out, policy, cost)
        })
        .collect();

    // Non-finite values were flagged per path; the serial engine pinpoints them.
    suspects.sort_unstable();
    for i in suspects {
        run_path(config, demand.row(i), fc.mean_row(i), fc.std_row(i), policy, cost, opts, i)?;
    }

    Ok(SimulationResult {
        paths: demand.paths,
        echelons: plans.len(),
        horizon: demand.horizon,
        orders,
        inventory,
        costs,
        demand: demand.values.clone(),
        config: config.clone(),
        seed: demand.base_seed,
        burn_in: opts.burn_in,
    })
}

struct Input<'a> {
    plans: &'a [EchelonPlan],
    demand: &'a DemandBatch,
    fc: &'a ForecastBatch,
    opts: &'a EngineOptions,
}

struct Output<'a> {
    orders: &'a mut [f64],
    inventory: &'a mut [f64],
    costs: &'a mut [f64],
}

fn dispatch(input: &Input, first: usize, out: Output, policy: &dyn OrderingPolicy, cost: &dyn CostFunction) -> Vec<usize> {
    match policy.builtin() {
        Some(BuiltinPolicy::OrderUpTo) => with_cost(input, first, out, cost, |c: &OrderContext, ip, fm, fs, pv| {
            BuiltinPolicy::OrderUpTo.order(c, ip, fm, fs, pv)
        }),
        Some(BuiltinPolicy::Proportional { alpha }) => {
            with_cost(input, first, out, cost, move |c: &OrderContext, ip, fm, fs, pv| {
                BuiltinPolicy::Proportional { alpha }.order(c, ip, fm, fs, pv)
            })
        }
        Some(BuiltinPolicy::Smoothing { beta }) => {
            with_cost(input, first, out, cost, move |c: &OrderContext, ip, fm, fs, pv| {
                BuiltinPolicy::Smoothing { beta }.order(c, ip, fm, fs, pv)
            })
        }
        Some(BuiltinPolicy::Constant { quantity }) => {
            with_cost(input, first, out, cost, move |c: &OrderContext, ip, fm, fs, pv| {
                BuiltinPolicy::Constant { quantity }.order(c, ip, fm, fs, pv)
            })
        }
        None => with_cost(input, first, out, cost, |c: &OrderContext, ip, fm, fs, pv| {
            policy.compute_order(c, ip, fm, fs, pv)
        }),
    }
}

fn with_cost<P>(input: &Input, first: usize, out: Output, cost: &dyn CostFunction, pf: P) -> Vec<usize>
where
    P: Fn(&OrderContext, f64, f64, f64, f64) -> f64,
{
    match cost.builtin() {
        Some(BuiltinCost::Newsvendor) => run_chunk(input, first, out, pf, |p: &NewsvendorParams, i| newsvendor_cost(p, i)),
        Some(BuiltinCost::Perishable { gamma, buffer }) => {
            run_chunk(input, first, out, pf, move |p: &NewsvendorParams, i| {
                BuiltinCost::Perishable { gamma, buffer }.cost(p, i)
            })
        }
        None => run_chunk(input, first, out, pf, |p: &NewsvendorParams, i| cost.compute(p, i)),
    }
}

type Lane = [f64; CHUNK];

#[inline(always)]
fn add_into(acc: &mut Lane, row: &Lane) {
    for (a, &x) in acc.iter_mut().zip(row) {
        *a += x;
    }
}

/// Simulate paths `first..first + m`; returns the paths that produced a
/// non-finite value. Lanes past `m` replay the first path and are dropped.
fn run_chunk<P, C>(input: &Input, first: usize, out: Output, pf: P, cf: C) -> Vec<usize>
where
    P: Fn(&OrderContext, f64, f64, f64, f64) -> f64,
    C: Fn(&NewsvendorParams, f64) -> f64,
{
    let plans = input.plans;
    let horizon = input.demand.horizon;
    let kc = plans.len();
    let m = out.orders.len() / (kc * horizon);
    let window = input.opts.upstream_window;
    let timing = input.opts.ip_timing;
    let dem = &input.demand.values;
    let (fcm, fcs) = (&input.fc.means, &input.fc.stds);
    let path_of = |j: usize| first + if j < m { j } else { 0 };

    let mut pm: Lane = [0.0; CHUNK];
    let mut ps: Lane = [0.0; CHUNK];
    for j in 0..CHUNK {
        pm[j] = fcm[path_of(j) * horizon];
        ps[j] = fcs[path_of(j) * horizon];
    }

    let mut on_hand: Vec<Lane> = vec![[0.0; CHUNK]; kc];
    let mut prev: Vec<Lane> = vec![pm; kc];
    let mut pipes: Vec<Vec<Lane>> = Vec::with_capacity(kc);
    for (k, p) in plans.iter().enumerate() {
        for j in 0..CHUNK {
            let prior = ForecastPair { mean: pm[j], std: ps[j] };
            on_hand[k][j] = initial_on_hand(p, prior, timing);
        }
        pipes.push(vec![pm; p.lead_time]);
    }
    let mut ptr = vec![0usize; kc];
    let mut hist: Vec<Vec<Lane>> = vec![vec![[0.0; CHUNK]; window]; kc];
    let mut head = vec![0usize; kc];
    let mut hlen = vec![0usize; kc];

    let mut d: Lane = [0.0; CHUNK];
    let mut o: Lane = [0.0; CHUNK];
    let mut fm: Lane = [0.0; CHUNK];
    let mut fs: Lane = [0.0; CHUNK];
    let mut acc: Lane;
    let mut ip: Lane = [0.0; CHUNK];
    let mut chk: Lane = [0.0; CHUNK];

    for t in 0..horizon {
        for j in 0..CHUNK {
            d[j] = dem[path_of(j) * horizon + t];
        }
        for k in 0..kc {
            let p = &plans[k];
            let oh = &mut on_hand[k];
            let pv = &mut prev[k];

            // forecasts
            if k == 0 {
                for j in 0..CHUNK {
                    let cell = path_of(j) * horizon + t;
                    fm[j] = fcm[cell];
                    fs[j] = fcs[cell];
                }
            } else if hlen[k] == 0 {
                fm = pm;
                fs = ps;
            } else {
                let n = hlen[k];
                let h = &hist[k];
                acc = [0.0; CHUNK];
                for s in 0..n {
                    add_into(&mut acc, &h[(head[k] + s) % window]);
                }
                let nf = n as f64;
                for j in 0..CHUNK {
                    fm[j] = acc[j] / nf;
                }
                if n < 2 {
                    fs = [SIGMA_FLOOR; CHUNK];
                } else {
                    acc = [0.0; CHUNK];
                    for s in 0..n {
                        let row = &h[(head[k] + s) % window];
                        for j in 0..CHUNK {
                            let dx = row[j] - fm[j];
                            acc[j] += dx * dx;
                        }
                    }
                    let df = (n - 1) as f64;
                    for j in 0..CHUNK {
                        fs[j] = floor_std((acc[j] / df).sqrt());
                    }
                }
            }

            // inventory position, order, receipt
            let l = p.lead_time;
            let base = ptr[k];
            let pipe = &mut pipes[k];
            match timing {
                IpTiming::PreReceipt => {
                    acc = [0.0; CHUNK];
                    for s in 0..l {
                        add_into(&mut acc, &pipe[(base + s) % l]);
                    }
                    for j in 0..CHUNK {
                        ip[j] = oh[j] + acc[j];
                        o[j] = pf(&p.ctx, ip[j], fm[j], fs[j], pv[j]);
                    }
                    let slot = &mut pipe[base];
                    for j in 0..CHUNK {
                        oh[j] = (oh[j] + slot[j]) - d[j];
                    }
                    *slot = o;
                }
                IpTiming::PostReceipt => {
                    let slot = &pipe[base];
                    for j in 0..CHUNK {
                        oh[j] = (oh[j] + slot[j]) - d[j];
                    }
                    acc = [0.0; CHUNK];
                    for s in 1..l {
                        add_into(&mut acc, &pipe[(base + s) % l]);
                    }
                    for j in 0..CHUNK {
                        ip[j] = oh[j] + acc[j];
                        o[j] = pf(&p.ctx, ip[j], fm[j], fs[j], pv[j]);
                    }
                    pipe[base] = o;
                }
            }
            ptr[k] = (base + 1) % l;

            // cost, bookkeeping, output
            let mut c: Lane = [0.0; CHUNK];
            for j in 0..CHUNK {
                c[j] = cf(&p.costs, oh[j]);
                chk[j] += 0.0 * (ip[j] + o[j] + oh[j] + c[j]);
            }
            *pv = o;
            for j in 0..m {
                let cell = (j * kc + k) * horizon + t;
                out.orders[cell] = o[j];
                out.inventory[cell] = oh[j];
                out.costs[cell] = c[j];
            }

            if k > 0 {
                let slot = if hlen[k] < window {
                    hlen[k] += 1;
                    (head[k] + hlen[k] - 1) % window
                } else {
                    let s = head[k];
                    head[k] = (head[k] + 1) % window;
                    s
                };
                hist[k][slot] = d;
            }

            // this echelon's orders are the next echelon's demand
            d = o;
        }
    }

    (0..m).filter(|&j| !chk[j].is_finite()).map(|j| first + j).collect()
}
