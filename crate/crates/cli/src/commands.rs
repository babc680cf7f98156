//! Implementations of the `recdrop` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use recdrop_core::bptt::{grad_check, gradcheck_problem, GradCheckReport};
use recdrop_core::decay::{decay_csv, decay_report};
use recdrop_core::math::rng::streams;
use recdrop_core::model::write_atomic;
use recdrop_core::optim::{evaluate, train_with, MetricKind, RunLog, TrainData};
use recdrop_core::tasks::{
    batch_lm, gen_temporal_order, load_split_corpus, load_text_corpus, Corpus, LabeledDataset, TemporalOrderMode, Unit,
    TEMPORAL_ORDER_CLASSES, TEMPORAL_ORDER_VOCAB,
};
use recdrop_core::{Activation, Arch, DropoutConfig, DropoutSpec, Model, ModelSizes, Rng, SamplingMode, Scaling, SequenceBatch, Variant};

use crate::config::{RunConfig, Task};

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1).
    Usage(String),
    /// Anything that went wrong while doing the work (exit 2).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

pub fn gen_data(mode: TemporalOrderMode, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let ds = gen_temporal_order(mode, n, &mut Rng::stream(seed, streams::DATA));
    write_file(out, &ds.to_text())?;
    Ok(())
}

/// Data and model shape for a configured run.
struct Prepared {
    data: TrainData,
    sizes: ModelSizes,
}

fn read_labeled(path: &Path) -> anyhow::Result<LabeledDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LabeledDataset::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_corpus(cfg: &RunConfig) -> anyhow::Result<Corpus> {
    let unit = if cfg.task == Task::WordLm { Unit::Word } else { Unit::Char };
    let cap = (cfg.task == Task::WordLm).then_some(cfg.vocab_cap);
    let train = cfg.train_path.as_deref().ok_or_else(|| anyhow!("data.train is required"))?;
    let corpus = match (&cfg.valid_path, &cfg.test_path) {
        (Some(v), Some(t)) => load_split_corpus(train, v, t, unit, cap),
        (None, None) => load_text_corpus(train, unit, cap).and_then(|c| c.with_split(cfg.train_frac, cfg.valid_frac)),
        _ => bail!("give both data.valid and data.test, or neither"),
    }
    .with_context(|| format!("loading corpus {}", train.display()))?;
    Ok(corpus)
}

/// Windows of `split` with as many rows as fit, up to `rows`.
fn lm_batches(split: &[usize], vocab: usize, rows: usize, seq_len: usize) -> anyhow::Result<Vec<SequenceBatch>> {
    let fit = rows.min(split.len() / (seq_len + 1));
    if fit == 0 {
        return Ok(Vec::new());
    }
    Ok(batch_lm(split, vocab, fit, seq_len)?)
}

fn prepare(cfg: &RunConfig) -> anyhow::Result<Prepared> {
    match cfg.task {
        Task::TemporalOrder => {
            let (train, valid, test) = match &cfg.train_path {
                Some(path) => {
                    let train = read_labeled(path)?;
                    let valid = cfg.valid_path.as_deref().map(read_labeled).transpose()?;
                    let test = cfg.test_path.as_deref().map(read_labeled).transpose()?;
                    (train, valid, test)
                }
                None => {
                    let mut rng = Rng::stream(cfg.train.seed, streams::DATA);
                    let train = gen_temporal_order(cfg.to_mode, cfg.train_size, &mut rng);
                    let test = gen_temporal_order(cfg.to_mode, cfg.test_size, &mut rng);
                    (train, None, Some(test))
                }
            };
            let batches = |d: &Option<LabeledDataset>| d.as_ref().map(|d| d.batches(cfg.eval_batch, None)).unwrap_or_default();
            Ok(Prepared {
                data: TrainData {
                    train: train.batches(cfg.train.batch, None),
                    valid: batches(&valid),
                    test: batches(&test),
                    metric: MetricKind::Accuracy,
                },
                sizes: ModelSizes {
                    vocab: TEMPORAL_ORDER_VOCAB,
                    embed: cfg.embed,
                    hidden: cfg.hidden,
                    outputs: TEMPORAL_ORDER_CLASSES,
                },
            })
        }
        Task::CharLm | Task::WordLm => {
            let corpus = load_corpus(cfg)?;
            let v = corpus.vocab.len();
            let rows = cfg.train.batch;
            Ok(Prepared {
                data: TrainData {
                    train: batch_lm(corpus.train(), v, rows, cfg.seq_len).context("batching training split")?,
                    valid: lm_batches(corpus.valid(), v, rows, cfg.seq_len)?,
                    test: lm_batches(corpus.test(), v, rows, cfg.seq_len)?,
                    metric: if cfg.task == Task::CharLm { MetricKind::Bpc } else { MetricKind::Perplexity },
                },
                sizes: ModelSizes {
                    vocab: v,
                    embed: cfg.embed,
                    hidden: cfg.hidden,
                    outputs: v,
                },
            })
        }
    }
}

pub const RUN_LOG: &str = "run_log.csv";
pub const CHECKPOINT: &str = "model.json";
pub const RESOLVED_CONFIG: &str = "config.ini";

/// Trains per `cfg` and writes the run log, checkpoint and resolved config
/// into `cfg.out`. Nothing is written unless training succeeds.
pub fn train(cfg: &RunConfig, quiet: bool) -> CliResult<RunLog> {
    let drop = cfg.dropout().map_err(usage)?;
    let prepared = prepare(cfg)?;
    let mut model = cfg.train.init_model(cfg.arch, prepared.sizes, cfg.activation);
    let log = train_with(&mut model, &prepared.data, &cfg.train, &drop, |r| {
        if !quiet {
            eprintln!("epoch {:>4}  {:<5}  loss {:.5}  metric {:.5}  lr {}", r.epoch, r.split.name(), r.loss, r.metric, r.lr);
        }
    })
    .context("training failed")?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let json = model.to_checkpoint_json().context("serialising checkpoint")?;
    write_file(&cfg.out.join(CHECKPOINT), &json)?;
    write_file(&cfg.out.join(RESOLVED_CONFIG), &cfg.render())?;
    write_file(&cfg.out.join(RUN_LOG), &log.to_csv())?;
    Ok(log)
}

/// Inference-phase metrics of a checkpoint on the data named by `cfg`
/// (or on `data` when given).
pub fn eval(checkpoint: &Path, cfg: &RunConfig, data: Option<&Path>) -> CliResult<String> {
    let drop = cfg.dropout().map_err(usage)?;
    let model = Model::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let sizes = model.sizes();
    let mut splits: Vec<(String, Vec<SequenceBatch>)> = Vec::new();
    let metric;
    match cfg.task {
        Task::TemporalOrder => {
            metric = MetricKind::Accuracy;
            if (sizes.vocab, sizes.outputs) != (TEMPORAL_ORDER_VOCAB, TEMPORAL_ORDER_CLASSES) {
                return Err(anyhow!(
                    "checkpoint has vocab {} / outputs {}, temporal-order needs {} / {}",
                    sizes.vocab,
                    sizes.outputs,
                    TEMPORAL_ORDER_VOCAB,
                    TEMPORAL_ORDER_CLASSES
                )
                .into());
            }
            let path = data
                .map(Path::to_path_buf)
                .or_else(|| cfg.test_path.clone())
                .ok_or_else(|| usage("temporal-order evaluation needs --data or data.test"))?;
            splits.push(("data".into(), read_labeled(&path)?.batches(cfg.eval_batch, None)));
        }
        Task::CharLm | Task::WordLm => {
            metric = if cfg.task == Task::CharLm { MetricKind::Bpc } else { MetricKind::Perplexity };
            let corpus = load_corpus(cfg)?;
            let v = corpus.vocab.len();
            if sizes.vocab != v || sizes.outputs != v {
                return Err(anyhow!("checkpoint vocabulary {} does not match corpus vocabulary {v}", sizes.vocab).into());
            }
            let rows = cfg.train.batch;
            match data {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let ids = encode(&corpus, &text)?;
                    splits.push(("data".into(), lm_batches(&ids, v, rows, cfg.seq_len)?));
                }
                None => {
                    splits.push(("valid".into(), lm_batches(corpus.valid(), v, rows, cfg.seq_len)?));
                    splits.push(("test".into(), lm_batches(corpus.test(), v, rows, cfg.seq_len)?));
                }
            }
        }
    }
    let mut csv = String::from("split,positions,loss,metric,value\n");
    for (name, batches) in splits {
        if batches.is_empty() {
            continue;
        }
        let e = evaluate(&model, &batches, &drop, cfg.train.carry_state).with_context(|| format!("evaluating {name}"))?;
        let loss = e.mean_loss().context("empty evaluation")?;
        let value = e.metric(metric).context("empty evaluation")?;
        let _ = writeln!(csv, "{name},{},{loss},{},{value}", e.positions, metric.name());
    }
    if csv.lines().count() == 1 {
        return Err(anyhow!("no evaluation data large enough for one window").into());
    }
    Ok(csv)
}

/// Maps raw text to ids with the corpus vocabulary.
fn encode(corpus: &Corpus, text: &str) -> anyhow::Result<Vec<usize>> {
    let unk = corpus.vocab.id(recdrop_core::tasks::UNK);
    let units: Vec<String> = match corpus.unit {
        Unit::Char => text.chars().map(String::from).collect(),
        Unit::Word => text.split_whitespace().map(String::from).collect(),
    };
    units
        .iter()
        .map(|u| {
            corpus
                .vocab
                .id(u)
                .or(unk)
                .ok_or_else(|| anyhow!("`{u}` is not in the training vocabulary"))
        })
        .collect()
}

pub fn decay(p_values: &[f64], t_max: usize, out: Option<&Path>) -> CliResult<()> {
    if let Some(bad) = p_values.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(usage(format!("keep probability {bad} is outside (0, 1]")));
    }
    let rows = decay_report(p_values, t_max).map_err(|e| usage(e.to_string()))?;
    emit(out, &decay_csv(&rows))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GradCheckArgs {
    pub arch: Arch,
    pub variant: Variant,
    pub mode: SamplingMode,
    pub scaling: Scaling,
    pub rate: f64,
    pub seed: u64,
    pub eps: f64,
    pub samples: usize,
}

fn run_gradcheck(a: &GradCheckArgs) -> CliResult<GradCheckReport> {
    if a.variant == Variant::Forward {
        return Err(usage("gradcheck takes a recurrent variant: none, moon, gal or update-drop"));
    }
    let spec = DropoutSpec::new(a.variant, a.rate, a.mode, a.scaling).map_err(|e| usage(e.to_string()))?;
    let (model, batch) = gradcheck_problem(a.arch, Activation::Tanh, a.seed);
    Ok(grad_check(&model, &batch, &DropoutConfig::recurrent(spec), a.seed, a.eps, a.samples).context("grad check")?)
}

/// Returns the CSV to emit and whether every check passed.
pub fn gradcheck(a: &GradCheckArgs, sweep: bool) -> CliResult<(String, bool)> {
    let tol = GradCheckReport::DEFAULT_TOLERANCE;
    if !sweep {
        let r = run_gradcheck(a)?;
        eprintln!(
            "{}/{}/{}/{}: max relative error {:e} over {} coordinates: {}",
            a.arch,
            a.variant,
            a.mode,
            a.scaling,
            r.max_relative_error,
            r.rows.len(),
            if r.passed(tol) { "PASS" } else { "FAIL" }
        );
        return Ok((r.to_csv(), r.passed(tol)));
    }
    let mut csv = String::from("arch,variant,mode,scaling,coordinates,max_relative_error,passed\n");
    let mut all = true;
    for arch in Arch::ALL {
        for variant in Variant::RECURRENT {
            for mode in [SamplingMode::PerStep, SamplingMode::PerSequence] {
                let args = GradCheckArgs {
                    arch,
                    variant,
                    mode,
                    ..a.clone()
                };
                let r = run_gradcheck(&args)?;
                let ok = r.passed(tol);
                all &= ok;
                let _ = writeln!(
                    csv,
                    "{arch},{variant},{mode},{},{},{:e},{ok}",
                    a.scaling,
                    r.rows.len(),
                    r.max_relative_error
                );
            }
        }
    }
    Ok((csv, all))
}

pub fn emit_to(out: Option<&PathBuf>, contents: &str) -> CliResult<()> {
    emit(out.map(PathBuf::as_path), contents)?;
    Ok(())
}
