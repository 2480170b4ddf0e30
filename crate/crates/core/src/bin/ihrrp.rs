use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ihrrp::determinizer::{schedule_stats, SampleConfig};
use ihrrp::harness::{run_restarts, summarize, sweep_csv, sweep_memory, trace_csv};
use ihrrp::instances::{self, CruavInstance, GridOptions};
use ihrrp::optimizer::{AdamConfig, OptimizeConfig};
use ihrrp::oracle::{brute_force_optimal_cycle, product_graph_value};
use ihrrp::strategy::{RfmStrategy, StrategyCheckpoint};
use ihrrp::{rng, sample_periodic_schedule, AugmentedGraph, Error, PeriodicSchedule};

#[derive(Parser)]
#[command(name = "ihrrp", version, about = "Recurrent routing schedules: generate, optimize, determinize, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum Family {
    Grid,
    Fig1,
    Cruav,
}

#[derive(Copy, Clone, ValueEnum)]
enum Method {
    Brute,
    Ratio,
}

#[derive(clap::Args)]
struct Parallel {
    /// Worker threads for restarts
    #[arg(long, env = "IHRRP_JOBS", default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        /// Number of long-maintenance nodes (grid)
        #[arg(long, required_if_eq("family", "grid"), value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disallow waiting on grid moves
        #[arg(long)]
        no_waits: bool,
        /// cr-UAV input: {"names", "times", "deadlines"}
        #[arg(long, required_if_eq("family", "cruav"))]
        cruav: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize RFM strategies over several restarts
    Optimize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
        restarts: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        memory: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long)]
        determinize_each_step: bool,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 300)]
        max_cycle: usize,
        /// Trace CSV (stdout if omitted)
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Checkpoint of the best strategy
        #[arg(long)]
        out_strategy: Option<PathBuf>,
        /// Best periodic schedule found
        #[arg(long)]
        out_schedule: Option<PathBuf>,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Sample a periodic schedule from a strategy checkpoint
    Determinize {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
        max_cycle: u64,
        /// Start at the depot in memory state 0 (the default)
        #[arg(long, default_value_t = true, conflicts_with = "start")]
        start_depot: bool,
        /// Explicit standard augmented start node
        #[arg(long)]
        start: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Schedule JSON (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize for several memory sizes
    SweepMemory {
        #[arg(long)]
        instance: PathBuf,
        /// Range `a..b` (inclusive) or list `1,2,3`
        #[arg(long, default_value = "1..7", value_parser = parse_memories)]
        memories: Memories,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
        restarts: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long)]
        determinize_each_step: bool,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 300)]
        max_cycle: usize,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        parallel: Parallel,
    },
    /// Exact optimal periodic schedule of a tiny instance
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_cycle: usize,
        /// Wait bound on prolongable moves (default: largest k)
        #[arg(long)]
        max_wait: Option<u64>,
        #[arg(long, value_enum, default_value = "brute")]
        method: Method,
    },
    /// Length and time statistics of schedule files
    Stats {
        /// Directory of schedule JSON files
        #[arg(long)]
        schedules: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Memory sizes parsed from one argument; a newtype so clap takes a single value.
#[derive(Clone, Debug)]
struct Memories(Vec<usize>);

fn parse_memories(s: &str) -> Result<Memories, String> {
    let parsed: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|e| format!("{e}")))
            .collect::<Result<_, _>>()?
    };
    if parsed.is_empty() || parsed.contains(&0) {
        return Err("memory sizes must be a nonempty set of positive integers".into());
    }
    Ok(Memories(parsed))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SizeCap(_) => 3,
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn emit(path: Option<&Path>, text: &str) -> ihrrp::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn optimize_config(
    steps: u64,
    memory: usize,
    seed: u64,
    lr: f64,
    determinize: bool,
    samples: usize,
    max_cycle: usize,
) -> OptimizeConfig {
    OptimizeConfig {
        memory_size: memory,
        steps: steps as usize,
        seed,
        adam: AdamConfig { lr, ..AdamConfig::default() },
        determinize_each_step: determinize,
        sample: SampleConfig {
            samples,
            max_cycle,
            start: None,
        },
        ..OptimizeConfig::default()
    }
}

fn run(cli: Cli) -> ihrrp::Result<()> {
    match cli.command {
        Command::Gen {
            family,
            k,
            seed,
            no_waits,
            cruav,
            kappa,
            out,
        } => {
            let spec = match family {
                Family::Grid => {
                    eprintln!("master seed: {seed}");
                    let k = k.expect("clap enforces --k for grid");
                    instances::generate_grid_instance(k as usize, seed, &GridOptions { waits: !no_waits })?
                }
                Family::Fig1 => instances::fig1_instance(),
                Family::Cruav => {
                    let path = cruav.expect("clap enforces --cruav");
                    let input: CruavInstance = instances::parse_with_path(&std::fs::read_to_string(path)?)?;
                    instances::cruav_reduction(&input, kappa)?
                }
            };
            instances::write_instance(&spec, &out)?;
            eprintln!("wrote {} nodes to {}", spec.node_count(), out.display());
        }
        Command::Optimize {
            instance,
            steps,
            restarts,
            memory,
            seed,
            lr,
            determinize_each_step,
            samples,
            max_cycle,
            out_csv,
            out_strategy,
            out_schedule,
            parallel,
        } => {
            let spec = instances::read_instance(&instance)?;
            eprintln!("master seed: {seed}");
            let cfg = optimize_config(steps, memory as usize, seed, lr, determinize_each_step, samples, max_cycle);
            let traces = run_restarts(&spec, &cfg, restarts as usize, parallel.jobs)?;
            let summary = summarize(&traces);
            emit(out_csv.as_deref(), &trace_csv(&traces, &summary))?;
            eprintln!(
                "max rfm {:.6} (per-restart max {:.6} +- {:.6})",
                summary.max_rfm, summary.mean_max_rfm, summary.std_max_rfm
            );
            if let (Some(m), Some(mean), Some(std)) = (summary.max_periodic, summary.mean_max_periodic, summary.std_max_periodic) {
                eprintln!("max periodic {m:.6} (per-restart max {mean:.6} +- {std:.6})");
            }
            let best = traces
                .iter()
                .reduce(|a, b| if b.best_value > a.best_value { b } else { a })
                .expect("at least one restart");
            if let Some(path) = out_strategy {
                let graph = AugmentedGraph::build(&spec, memory as usize)?;
                std::fs::write(path, StrategyCheckpoint::from_params(&best.best_params, &graph).to_json()?)?;
            }
            if let Some(path) = out_schedule {
                let sched = traces
                    .iter()
                    .filter_map(|t| t.best_schedule.as_ref())
                    .reduce(|a, b| if b.value > a.value { b } else { a })
                    .ok_or(Error::NoCycleFound)?;
                std::fs::write(path, sched.to_json()?)?;
            }
        }
        Command::Determinize {
            instance,
            strategy,
            samples,
            max_cycle,
            start_depot: _,
            start,
            seed,
            out,
        } => {
            let spec = instances::read_instance(&instance)?;
            let ckpt = StrategyCheckpoint::from_json(&std::fs::read_to_string(strategy)?)?;
            let graph = AugmentedGraph::build(&spec, ckpt.memory_size)?;
            let params = ckpt.to_params(&graph)?;
            let sigma = RfmStrategy::from_params(&params, &graph)?;
            eprintln!("master seed: {seed}");
            let cfg = SampleConfig {
                samples: samples as usize,
                max_cycle: max_cycle as usize,
                start,
            };
            let sched = sample_periodic_schedule(&sigma, &graph, &spec, &cfg, &mut rng::stream(seed, &[]))?;
            emit(out.as_deref(), &(sched.to_json()? + "\n"))?;
            eprintln!("value {} length {} time {}", sched.value, sched.length, sched.total_time);
        }
        Command::SweepMemory {
            instance,
            memories,
            steps,
            restarts,
            seed,
            lr,
            determinize_each_step,
            samples,
            max_cycle,
            out_csv,
            parallel,
        } => {
            let spec = instances::read_instance(&instance)?;
            eprintln!("master seed: {seed}");
            let cfg = optimize_config(steps, 1, seed, lr, determinize_each_step, samples, max_cycle);
            let rows = sweep_memory(&spec, &cfg, &memories.0, restarts as usize, parallel.jobs)?;
            emit(out_csv.as_deref(), &sweep_csv(&rows))?;
        }
        Command::Oracle {
            instance,
            max_cycle,
            max_wait,
            method,
        } => {
            let spec = instances::read_instance(&instance)?;
            let wait = max_wait.unwrap_or_else(|| spec.k_max());
            let json = match method {
                Method::Brute => serde_json::to_string_pretty(&brute_force_optimal_cycle(&spec, max_cycle, wait)?)?,
                Method::Ratio => serde_json::to_string_pretty(&product_graph_value(&spec, wait)?)?,
            };
            println!("{json}");
        }
        Command::Stats { schedules, out } => {
            let mut list = Vec::new();
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&schedules)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for p in paths {
                list.push(PeriodicSchedule::from_json(&std::fs::read_to_string(&p)?)?);
            }
            if list.is_empty() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("no schedule files in {}", schedules.display()),
                )));
            }
            let mut text = String::from("group,count,length_mean,length_std,time_mean,time_std\n");
            for s in schedule_stats(&list)? {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.group, s.count, s.length_mean, s.length_std, s.time_mean, s.time_std
                ));
            }
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
