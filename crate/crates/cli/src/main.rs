use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mtrl_core::evaluation::{evaluate_policy, OraclePolicy};
use mtrl_core::exec::with_workers;
use mtrl_core::experiment::{
    pretrain, run_alignment_study, run_efficiency_study, run_kappa_study, write_outputs, ExperimentConfig,
};
use mtrl_core::representation::SamplePlan;
use mtrl_core::transfer::{transfer, transfer_with_bases, TransferConfig, TransferResult};
use mtrl_core::{persist, seed, Error, Execution, Result};

#[derive(Parser)]
#[command(
    name = "mtrl",
    version,
    about = "Multitask representation learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain a representation on the config's task family.
    Train {
        #[command(flatten)]
        common: Common,
        /// Samples per task and level; defaults to the first `pretrain_n`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Transfer a representation bundle to the evaluation task.
    Transfer {
        #[command(flatten)]
        common: Common,
        /// Representation bundle directory; omit to use the ground-truth basis.
        #[arg(long)]
        rep: Option<PathBuf>,
        /// Samples per level; defaults to the largest `n_sweep` entry.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Evaluate a transferred policy, or the oracle, on the evaluation task.
    Eval {
        #[command(flatten)]
        common: Common,
        /// `transfer.json` written by the transfer subcommand.
        #[arg(long, conflicts_with = "oracle")]
        policy: Option<PathBuf>,
        /// Evaluate the optimal policy from dynamic programming instead.
        #[arg(long)]
        oracle: bool,
    },
    /// Scratch vs transfer over the n-sweep.
    Efficiency {
        #[command(flatten)]
        common: Common,
    },
    /// Ground-truth basis under balanced and unbalanced sampling.
    Kappa {
        #[command(flatten)]
        common: Common,
    },
    /// Per-coordinate projected norms of a learned basis.
    Alignment {
        #[command(flatten)]
        common: Common,
        /// Representation bundle directory; omit to pretrain one per seed.
        #[arg(long)]
        rep: Option<PathBuf>,
        /// Level to inspect; defaults to `alignment_level`, else the middle of the horizon.
        #[arg(long)]
        level: Option<usize>,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig::load(&self.config)?;
        Ok(match self.seed {
            Some(s) => cfg.with_seed(s),
            None => cfg,
        })
    }

    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }

    fn create_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::Io {
            path: self.out.display().to_string(),
            source: e,
        })
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train { common, n } => {
            let cfg = common.load()?;
            let exec = Execution::from_workers(common.workers());
            let n = n.unwrap_or(cfg.pretrain_n[0]);
            let setup = cfg.setup()?;
            let p = with_workers(common.workers(), || pretrain(&cfg, &setup, cfg.seeds[0], n, exec))?;
            common.create_out()?;
            let dir = persist::save_representation(&p.rep, &common.out)?;
            println!("{}", dir.display());
        }
        Command::Transfer { common, rep, n } => {
            let cfg = common.load()?;
            let setup = cfg.setup()?;
            let n = n.unwrap_or(*cfg.n_sweep.last().expect("validated non-empty"));
            let tc = TransferConfig {
                samples: SamplePlan::Iid(n),
                ridge_lambda: cfg.ridge_lambda,
                seed: seed::child(cfg.seeds[0], &[seed::tag::TRANSFER, n as u64]),
            };
            let result = match rep {
                Some(dir) => transfer(
                    &persist::load_representation(&dir)?,
                    &setup.eval_world,
                    &setup.dist,
                    &tc,
                )?,
                None => {
                    let b = setup.eval_world.ground_truth_representation();
                    transfer_with_bases(&vec![b; cfg.horizon], &setup.eval_world, &setup.dist, &tc)?
                }
            };
            common.create_out()?;
            let path = common.out.join("transfer.json");
            persist::write_json(&path, &result)?;
            println!("{}", path.display());
        }
        Command::Eval {
            common,
            policy,
            oracle,
        } => {
            let cfg = common.load()?;
            let setup = cfg.setup()?;
            let exec = Execution::from_workers(common.workers());
            let seed = seed::child(cfg.seeds[0], &[seed::tag::EVAL]);
            let world = &setup.eval_world;
            let report = with_workers(common.workers(), || match (&policy, oracle) {
                (Some(path), _) => {
                    let t: TransferResult = persist::read_json(path)?;
                    evaluate_policy(&t.policy, world, cfg.episodes, seed, exec)
                }
                (None, true) => evaluate_policy(&OraclePolicy::new(world)?, world, cfg.episodes, seed, exec),
                (None, false) => Err(Error::Config("pass --policy <transfer.json> or --oracle".into())),
            })?;
            common.create_out()?;
            let path = common.out.join("eval.json");
            persist::write_json(&path, &report)?;
            println!("{}", path.display());
        }
        Command::Efficiency { common } => study(&common, |cfg, exec| run_efficiency_study(cfg, exec))?,
        Command::Kappa { common } => study(&common, |cfg, exec| run_kappa_study(cfg, exec))?,
        Command::Alignment { common, rep, level } => study(&common, |cfg, exec| {
            run_alignment_study(cfg, rep.as_deref(), level, exec)
        })?,
    }
    Ok(())
}

fn study(
    common: &Common,
    f: impl FnOnce(&ExperimentConfig, Execution) -> Result<mtrl_core::experiment::StudyOutput> + Send,
) -> Result<()> {
    let cfg = common.load()?;
    let workers = common.workers();
    let exec = Execution::from_workers(workers);
    let output = with_workers(workers, || f(&cfg, exec))?;
    write_outputs(&common.out, &cfg, &output)?;
    for c in &output.summary.curves {
        let reach = c.n_reach.map_or("-".to_string(), |n| n.to_string());
        println!("{} N={} n_reach={}", c.method, c.pretrain_n, reach);
    }
    println!("{}", Path::new(&common.out).join("results.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
