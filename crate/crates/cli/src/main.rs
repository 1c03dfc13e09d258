mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use bullwhip_core::benchmark::{BenchmarkSpec, ChainRef, ComponentSpec, ScalingAxes, ScalingBase, SweepTarget, TableFormat};
use bullwhip_core::engine::IpTiming;
use bullwhip_core::metrics::Statistic;
use bullwhip_core::protocols::{ChenSettings, CHEN_GRID};
use bullwhip_core::registry::{catalog, Category, ParamMap};

use run::{
    execute, BenchmarkRunConfig, ChenRun, FilteringRun, Manifest, MonteCarloRun, RunConfig, ScaleRun, SimulationSetup,
    SweepRun,
};

#[derive(Parser, Debug)]
#[command(name = "bullwhip", version, about = "Serial supply chain simulation and bullwhip benchmarking")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory.
    #[arg(long, global = true, env = "BULLWHIP_OUT_DIR", default_value = "bullwhip_out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one demand path with the reference engine.
    Simulate(SimArgs),
    /// Simulate many paths in lockstep and summarise each metric across paths.
    Montecarlo {
        #[command(flatten)]
        sim: SimArgs,
        /// Number of paths.
        #[arg(long = "N", visible_alias = "paths", default_value_t = 1000)]
        n: usize,
        /// Also write every path's trajectories.
        #[arg(long)]
        trajectories: bool,
    },
    /// Run a benchmark spec: every policy x forecaster on shared demand.
    Benchmark {
        #[arg(long)]
        spec: PathBuf,
        /// Summary statistic over paths (overrides the spec).
        #[arg(long)]
        stat: Option<Statistic>,
        /// Extra table format written next to the CSV.
        #[arg(long, default_value = "csv")]
        format: TableFormat,
    },
    /// Re-run a benchmark spec once per value of one parameter.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Component to vary, as `category:name` (e.g. policy:proportional_out).
        #[arg(long, conflicts_with = "cost_ratio", required_unless_present = "cost_ratio")]
        component: Option<String>,
        /// Parameter of the component.
        #[arg(long, requires = "component")]
        param: Option<String>,
        /// Sweep the backorder/holding ratio with normalised costs instead.
        #[arg(long)]
        cost_ratio: bool,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        stat: Option<Statistic>,
    },
    /// Compare simulated single-echelon ratios with the analytical bound.
    ValidateChen {
        /// Comma-separated `L:p` pairs; the standard eight-pair grid by default.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        #[arg(long = "N", default_value_t = 2000)]
        n: usize,
        #[arg(long = "T", default_value_t = 520)]
        t: usize,
        #[arg(long, default_value_t = 100.0)]
        mu: f64,
        #[arg(long, default_value_t = 10.0)]
        sigma: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Delta-method predictions of cross-path ratio variability vs the empirical values.
    ValidateFiltering {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long = "N", default_value_t = 1000)]
        n: usize,
    },
    /// Time the serial and lockstep engines along N, T and K.
    Scale {
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        t: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Time only the lockstep engine.
        #[arg(long)]
        batch_only: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// List registered components.
    List {
        /// demand, policy, cost, forecaster or metric; all when omitted.
        #[arg(long)]
        category: Option<Category>,
    },
    /// Execute the run recorded in a manifest.
    Rerun { manifest: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Builtin chain name or path to a chain TOML file.
    #[arg(long, default_value = "semiconductor_4tier")]
    chain: String,
    #[arg(long, default_value = "semiconductor_ar1")]
    demand: String,
    /// Demand parameter override, `key=value` (repeatable).
    #[arg(long = "demand-param", value_name = "KEY=VALUE")]
    demand_params: Vec<String>,
    /// Forecaster for the first echelon.
    #[arg(long)]
    forecaster: Option<String>,
    #[arg(long = "forecaster-param", value_name = "KEY=VALUE")]
    forecaster_params: Vec<String>,
    #[arg(long, default_value = "order_up_to")]
    policy: String,
    #[arg(long = "policy-param", value_name = "KEY=VALUE")]
    policy_params: Vec<String>,
    #[arg(long, default_value = "newsvendor")]
    cost: String,
    #[arg(long = "cost-param", value_name = "KEY=VALUE")]
    cost_params: Vec<String>,
    /// Horizon in periods.
    #[arg(long = "T", visible_alias = "horizon", default_value_t = 156)]
    t: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "pre_receipt")]
    ip_timing: IpTiming,
    /// Leading periods excluded from metrics.
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
}

impl SimArgs {
    fn setup(&self, default_forecaster: &str) -> Result<SimulationSetup> {
        let comp = |name: &str, raw: &[String]| -> Result<ComponentSpec> {
            Ok(ComponentSpec {
                name: name.to_string(),
                params: parse_params(raw)?,
                label: None,
            })
        };
        let setup = SimulationSetup {
            chain: ChainRef::Named(self.chain.clone()),
            demand: comp(&self.demand, &self.demand_params)?,
            forecaster: comp(self.forecaster.as_deref().unwrap_or(default_forecaster), &self.forecaster_params)?,
            policy: comp(&self.policy, &self.policy_params)?,
            cost: comp(&self.cost, &self.cost_params)?,
            horizon: self.t,
            seed: self.seed,
            ip_timing: self.ip_timing,
            burn_in: self.burn_in,
        };
        setup.resolved(catalog())
    }
}

/// `key=value` pairs; values are read as TOML literals, falling back to strings.
fn parse_params(raw: &[String]) -> Result<ParamMap> {
    let mut map = ParamMap::new();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("parameter `{item}` is not of the form key=value"))?;
        map.insert(k.trim().to_string(), parse_literal(v.trim())?);
    }
    Ok(map)
}

fn parse_literal(v: &str) -> Result<Value> {
    match toml::from_str::<toml::Table>(&format!("v = {v}")) {
        Ok(mut t) => Ok(serde_json::to_value(t.remove("v").expect("key present"))?),
        Err(_) => Ok(Value::String(v.to_string())),
    }
}

fn load_spec(path: &PathBuf, stat: Option<Statistic>) -> Result<BenchmarkSpec> {
    let mut spec = BenchmarkSpec::load(path)?;
    if let Some(s) = stat {
        spec.statistic = s;
    }
    Ok(spec.resolved(catalog())?)
}

fn build(command: Command) -> Result<Option<RunConfig>> {
    let run = match command {
        Command::Simulate(sim) => RunConfig::Simulate(sim.setup("naive")?),
        Command::Montecarlo { sim, n, trajectories } => RunConfig::Montecarlo(MonteCarloRun {
            setup: sim.setup("naive")?,
            paths: n,
            trajectories,
        }),
        Command::Benchmark { spec, stat, format } => RunConfig::Benchmark(BenchmarkRunConfig {
            spec: load_spec(&spec, stat)?,
            format,
        }),
        Command::Sweep {
            spec,
            component,
            param,
            cost_ratio,
            values,
            stat,
        } => {
            let (target, param) = if cost_ratio {
                (SweepTarget::CostRatio, "b_over_h".to_string())
            } else {
                let c = component.expect("clap enforces --component or --cost-ratio");
                let (cat, name) = c
                    .split_once(':')
                    .with_context(|| format!("--component `{c}` must be category:name"))?;
                let param = param.context("--param is required with --component")?;
                let target = SweepTarget::Component {
                    category: cat.parse()?,
                    name: name.to_string(),
                };
                (target, param)
            };
            let values = values
                .iter()
                .map(|v| toml::from_str::<toml::Table>(&format!("v = {v}")).map(|mut t| t.remove("v").unwrap()))
                .collect::<Result<Vec<_>, _>>()
                .context("sweep values must be TOML literals")?;
            RunConfig::Sweep(SweepRun {
                spec: load_spec(&spec, stat)?,
                target,
                param,
                values,
            })
        }
        Command::ValidateChen {
            pairs,
            n,
            t,
            mu,
            sigma,
            seed,
        } => {
            let pairs = if pairs.is_empty() {
                CHEN_GRID.to_vec()
            } else {
                pairs
                    .iter()
                    .map(|p| {
                        let (l, w) = p.split_once(':').with_context(|| format!("pair `{p}` must be L:p"))?;
                        Ok((l.trim().parse()?, w.trim().parse()?))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            RunConfig::ValidateChen(ChenRun {
                pairs,
                settings: ChenSettings {
                    paths: n,
                    horizon: t,
                    mu,
                    sigma,
                    seed,
                },
            })
        }
        Command::ValidateFiltering { sim, n } => RunConfig::ValidateFiltering(FilteringRun {
            setup: sim.setup("global_constant")?,
            paths: n,
        }),
        Command::Scale {
            n,
            t,
            k,
            repeats,
            batch_only,
            seed,
        } => {
            let axes = if n.is_empty() && t.is_empty() && k.is_empty() {
                ScalingAxes {
                    n: vec![10, 100, 1000],
                    t: vec![52, 156, 520],
                    k: vec![2, 4, 8],
                }
            } else {
                ScalingAxes { n, t, k }
            };
            RunConfig::Scale(ScaleRun {
                axes,
                base: ScalingBase {
                    seed,
                    repeats,
                    batch_only,
                    ..ScalingBase::default()
                },
            })
        }
        Command::List { category } => {
            list(category);
            return Ok(None);
        }
        Command::Rerun { manifest } => Manifest::load(&manifest)?.run,
    };
    Ok(Some(run))
}

fn list(category: Option<Category>) {
    let reg = catalog();
    let cats = match category {
        Some(c) => vec![c],
        None => Category::ALL.to_vec(),
    };
    for c in cats {
        println!("[{c}]");
        for name in reg.list(c) {
            let e = reg.entry(c, &name).expect("listed names resolve");
            println!("  {name:<24} {}", e.metadata.description);
        }
    }
}

fn real_main(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let Some(run) = build(cli.command)? else {
        return Ok(());
    };
    if cli.out.exists() && !cli.out.is_dir() {
        bail!("output path {} is not a directory", cli.out.display());
    }
    let outcome = execute(&run, cli.threads, &cli.out)?;
    print!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
