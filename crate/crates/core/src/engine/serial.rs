use super::state::initial_states;
use super::{check_inputs, plan, EngineOptions, IpTiming, SimulationResult};
use crate::config::ChainConfig;
use crate::cost::CostFunction;
use crate::demand::{DemandBatch, DemandSeries};
use crate::error::{Error, Result};
use crate::forecast::{rolling_upstream_estimate, ForecastBatch, ForecastPair};
use crate::policy::OrderingPolicy;

/// Reference engine: one path, one echelon object at a time.
///
/// E1 uses the supplied forecasts; entry 0 of the forecast arrays is also
/// the prior used to initialise every echelon.
pub fn simulate_serial(
    config: &ChainConfig,
    demand: &DemandSeries,
    fc_means: &[f64],
    fc_stds: &[f64],
    policy: &dyn OrderingPolicy,
    cost: &dyn CostFunction,
    opts: &EngineOptions,
) -> Result<SimulationResult> {
    let (orders, inventory, costs) = run_path(config, &demand.values, fc_means, fc_stds, policy, cost, opts, 0)?;
    Ok(SimulationResult {
        paths: 1,
        echelons: config.len(),
        horizon: demand.values.len(),
        orders,
        inventory,
        costs,
        demand: demand.values.clone(),
        config: config.clone(),
        seed: demand.seed,
        burn_in: opts.burn_in,
    })
}

/// The serial engine applied to each path of a batch in turn.
pub fn simulate_paths_serial(
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
    let cells = demand.paths * config.len() * demand.horizon;
    let mut orders = Vec::with_capacity(cells);
    let mut inventory = Vec::with_capacity(cells);
    let mut costs = Vec::with_capacity(cells);
    for i in 0..demand.paths {
        let (o, inv, c) = run_path(config, demand.row(i), fc.mean_row(i), fc.std_row(i), policy, cost, opts, i)?;
        orders.extend(o);
        inventory.extend(inv);
        costs.extend(c);
    }
    Ok(SimulationResult {
        paths: demand.paths,
        echelons: config.len(),
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

type Tensors = (Vec<f64>, Vec<f64>, Vec<f64>);

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_path(
    config: &ChainConfig,
    demand: &[f64],
    fc_means: &[f64],
    fc_stds: &[f64],
    policy: &dyn OrderingPolicy,
    cost: &dyn CostFunction,
    opts: &EngineOptions,
    path: usize,
) -> Result<Tensors> {
    check_inputs(demand, fc_means, fc_stds, path)?;
    let plans = plan(config, opts)?;
    let horizon = demand.len();
    let k_count = plans.len();
    let prior = ForecastPair {
        mean: fc_means[0],
        std: fc_stds[0],
    };
    let mut states = initial_states(&plans, prior, opts.ip_timing);
    let mut orders = vec![0.0; k_count * horizon];
    let mut inventory = vec![0.0; k_count * horizon];
    let mut costs = vec![0.0; k_count * horizon];

    for t in 0..horizon {
        let mut incoming = demand[t];
        for (k, (p, st)) in plans.iter().zip(states.iter_mut()).enumerate() {
            let d = incoming;
            let f = if k == 0 {
                ForecastPair {
                    mean: fc_means[t],
                    std: fc_stds[t],
                }
            } else {
                rolling_upstream_estimate(st.order_history.make_contiguous(), opts.upstream_window, prior)
            };

            let (ip, order) = match opts.ip_timing {
                IpTiming::PreReceipt => {
                    let ip = st.inventory_position();
                    let order = policy.compute_order(&p.ctx, ip, f.mean, f.std, st.previous_order);
                    let receipt = st.pipeline.pop_front().expect("pipeline length is L >= 1");
                    st.pipeline.push_back(order);
                    st.on_hand = (st.on_hand + receipt) - d;
                    (ip, order)
                }
                IpTiming::PostReceipt => {
                    let receipt = st.pipeline.pop_front().expect("pipeline length is L >= 1");
                    st.on_hand = (st.on_hand + receipt) - d;
                    let ip = st.inventory_position();
                    let order = policy.compute_order(&p.ctx, ip, f.mean, f.std, st.previous_order);
                    st.pipeline.push_back(order);
                    (ip, order)
                }
            };
            let c = cost.compute(&p.costs, st.on_hand);

            if k > 0 {
                st.order_history.push_back(d);
                if st.order_history.len() > opts.upstream_window {
                    st.order_history.pop_front();
                }
            }
            st.previous_order = order;

            for (quantity, v) in [
                ("inventory position", ip),
                ("order", order),
                ("inventory", st.on_hand),
                ("cost", c),
            ] {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        quantity,
                        path,
                        echelon: k + 1,
                        period: t + 1,
                    });
                }
            }

            let cell = k * horizon + t;
            orders[cell] = order;
            inventory[cell] = st.on_hand;
            costs[cell] = c;
            incoming = order;
        }
    }
    Ok((orders, inventory, costs))
}
