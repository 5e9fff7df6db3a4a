//! Argument parsing and dispatch for the `divnet` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "divnet", version, about = "Diverse-prediction experiments: data, training, oracle evaluation")]
pub struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the model, train and eval seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and ablations.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train and test dataset files.
    GenData,
    /// Train a model and write it with its training report.
    Train {
        /// Dataset file or directory holding train.data; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Oracle curve, variance and degeneracy of a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Dataset file or directory holding test.data.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Train and evaluate once per beta value.
    SweepBeta {
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,5")]
        betas: Vec<f64>,
    },
    /// Run the architecture × catchup × pretraining grid.
    Ablate,
    /// Finite-difference check of the training gradients.
    GradCheck,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let out: &Path = &cli.out;
    match &cli.command {
        Command::GenData => {
            let (tr, te) = commands::cmd_gen_data(&cfg, out)?;
            eprintln!("wrote {} train and {} test items to {}", tr.len(), te.len(), out.display());
        }
        Command::Train { data } => {
            let o = commands::cmd_train(&cfg, data.as_deref(), out)?;
            let last = o.report.epochs.last().map_or(f64::NAN, |e| e.loss);
            eprintln!(
                "trained {} epochs in {:.2}s, final loss {last}",
                o.report.epochs.len(),
                o.report.wall_time_secs
            );
        }
        Command::Eval { model, data, k_max } => {
            let explicit = cli.config.is_some() || cli.seed.is_some();
            let s = commands::cmd_eval(explicit.then_some(&cfg), model, data, *k_max, out)?;
            let (k1, _) = s.k1();
            let (km, kme) = s.kmax();
            eprintln!("k=1 error {k1}, k={km} error {kme}, degenerate slots {}", s.degenerate);
        }
        Command::SweepBeta { betas } => {
            let rows = commands::cmd_sweep_beta(&cfg, betas, out, cli.jobs)?;
            eprintln!("swept {} beta values", rows.len());
        }
        Command::Ablate => {
            let rows = commands::cmd_ablate(&cfg, out, cli.jobs)?;
            eprintln!("ran {} ablation cells", rows.len());
        }
        Command::GradCheck => {
            let r = commands::cmd_grad_check(&cfg, out)?;
            eprintln!("gradient check passed, worst relative error {}", r.worst());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
