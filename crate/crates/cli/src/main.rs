use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recdrop_cli::commands::{self, CliError, GradCheckArgs};
use recdrop_cli::config::{parse_override, RunConfig};
use recdrop_core::tasks::TemporalOrderMode;
use recdrop_core::{Arch, SamplingMode, Scaling, Variant};

#[derive(Parser)]
#[command(name = "recdrop", version, about = "Recurrent dropout experiments: data, training, evaluation and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Temporal Order dataset as `SEQUENCE<TAB>LABEL` lines.
    GenData {
        #[arg(long, default_value = "short")]
        mode: TemporalOrderMode,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes run_log.csv, model.json and config.ini to the output directory.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Inference-phase metrics of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Data to evaluate; defaults to the splits named by the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Tabulate the weight of h_0 in h_t under hidden-state and update dropout.
    Decay {
        /// Comma-separated keep probabilities in (0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        p: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        t_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare backpropagated gradients against central differences.
    Gradcheck {
        #[arg(long, default_value = "lstm")]
        arch: Arch,
        #[arg(long, default_value = "update-drop")]
        variant: Variant,
        #[arg(long, default_value = "per-step")]
        mode: SamplingMode,
        #[arg(long, default_value = "test-scale")]
        scaling: Scaling,
        #[arg(long, default_value_t = 0.5)]
        rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = recdrop_core::bptt::GRADCHECK_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 240)]
        samples: usize,
        /// Check all architecture × variant × mode combinations.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (`[section]` / `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set dropout.rate=0.25`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut overrides = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("run.task", self.task.clone());
        push("run.arch", self.arch.clone());
        push("run.seed", self.seed.map(|v| v.to_string()));
        push("run.out", self.out.as_ref().map(|p| p.display().to_string()));
        push("dropout.variant", self.variant.clone());
        push("dropout.rate", self.rate.map(|v| v.to_string()));
        push("dropout.mode", self.mode.clone());
        push("model.hidden", self.hidden.map(|v| v.to_string()));
        push("train.epochs", self.epochs.map(|v| v.to_string()));
        push("train.lr", self.lr.map(|v| v.to_string()));
        for s in &self.set {
            overrides.push(parse_override(s).map_err(CliError::Usage)?);
        }
        match &self.config {
            Some(path) => RunConfig::load(path, &overrides),
            None => RunConfig::parse("", &overrides),
        }
        .map_err(CliError::Usage)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { mode, n, seed, out } => commands::gen_data(mode, n, seed, &out),
        Command::Train { run, quiet } => {
            let cfg = run.resolve()?;
            let log = commands::train(&cfg, quiet)?;
            if let Some(last) = log.rows.last() {
                eprintln!(
                    "done: {} {} = {} (artifacts in {})",
                    last.split.name(),
                    log.metric.map_or("metric", |m| m.name()),
                    last.metric,
                    cfg.out.display()
                );
            }
            Ok(())
        }
        Command::Eval { checkpoint, data, run } => {
            let cfg = run.resolve()?;
            let csv = commands::eval(&checkpoint, &cfg, data.as_deref())?;
            commands::emit_to(run.out.as_ref().map(|d| d.join("eval.csv")).as_ref(), &csv)
        }
        Command::Decay { p, t_max, out } => commands::decay(&p, t_max, out.as_deref()),
        Command::Gradcheck {
            arch,
            variant,
            mode,
            scaling,
            rate,
            seed,
            eps,
            samples,
            sweep,
            out,
        } => {
            let args = GradCheckArgs {
                arch,
                variant,
                mode,
                scaling,
                rate,
                seed,
                eps,
                samples,
            };
            let (csv, passed) = commands::gradcheck(&args, sweep)?;
            commands::emit_to(out.as_ref(), &csv)?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Runtime(anyhow::anyhow!("gradient check failed")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
