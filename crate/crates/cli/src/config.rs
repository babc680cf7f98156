//! Run configuration: a line-oriented `key = value` file with `[sections]`.
//!
//! ```text
//! # comments start with '#'
//! [run]
//! task = temporal-order
//! seed = 1
//!
//! [dropout]
//! variant = update-drop
//! rate = 0.5
//! ```
//!
//! Keys are addressed as `section.key`. Unknown sections or keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use recdrop_core::optim::{DecayRule, OptimizerKind, TrainConfig};
use recdrop_core::tasks::TemporalOrderMode;
use recdrop_core::{Activation, Arch, DropoutConfig, DropoutSpec, SamplingMode, Scaling, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    TemporalOrder,
    CharLm,
    WordLm,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::TemporalOrder => "temporal-order",
            Task::CharLm => "char-lm",
            Task::WordLm => "word-lm",
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "temporal-order" => Ok(Task::TemporalOrder),
            "char-lm" => Ok(Task::CharLm),
            "word-lm" => Ok(Task::WordLm),
            other => Err(format!("unknown task `{other}` (expected temporal-order, char-lm or word-lm)")),
        }
    }
}

/// Every setting of a run. Defaults depend on the task and are applied by
/// [`RunConfig::for_task`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub arch: Arch,
    pub out: PathBuf,

    // [data]
    pub to_mode: TemporalOrderMode,
    pub train_size: usize,
    pub test_size: usize,
    pub train_path: Option<PathBuf>,
    pub valid_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub vocab_cap: usize,
    pub train_frac: f64,
    pub valid_frac: f64,
    pub seq_len: usize,

    // [model]
    pub hidden: usize,
    pub embed: usize,
    pub activation: Activation,

    // [dropout]
    pub variant: Variant,
    pub rate: f64,
    pub mode: SamplingMode,
    pub scaling: Scaling,
    pub per_gate_masks: bool,
    pub input_rate: f64,
    pub output_rate: f64,

    // [train]
    pub train: TrainConfig,
    pub eval_batch: usize,
}

/// `(section, key, help)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("run", "task", "temporal-order | char-lm | word-lm"),
    ("run", "arch", "rnn | lstm | gru"),
    ("run", "seed", "64-bit seed for every random stream"),
    ("run", "out", "output directory"),
    ("data", "mode", "temporal-order length: short | medium"),
    ("data", "train_size", "generated training sequences (temporal-order)"),
    ("data", "test_size", "generated test sequences (temporal-order)"),
    ("data", "train", "training file (text corpus or temporal-order export)"),
    ("data", "valid", "validation file"),
    ("data", "test", "test file"),
    ("data", "vocab_cap", "word-lm vocabulary size before <unk>"),
    ("data", "train_frac", "train share when only one text file is given"),
    ("data", "valid_frac", "validation share when only one text file is given"),
    ("data", "seq_len", "language-model window length"),
    ("model", "hidden", "hidden units"),
    ("model", "embed", "embedding width"),
    ("model", "activation", "tanh | relu | sigmoid"),
    ("dropout", "variant", "none | moon | gal | update-drop"),
    ("dropout", "rate", "recurrent drop rate in [0, 1)"),
    ("dropout", "mode", "per-step | per-sequence"),
    ("dropout", "scaling", "test-scale | train-scale"),
    ("dropout", "per_gate_masks", "gal only: independent mask per gate"),
    ("dropout", "input_rate", "forward dropout on embeddings"),
    ("dropout", "output_rate", "forward dropout before the read-out"),
    ("train", "optimizer", "sgd | adam"),
    ("train", "lr", "initial learning rate"),
    ("train", "clip", "max-norm clip threshold, 0 disables"),
    ("train", "batch", "sequences per minibatch"),
    ("train", "bptt_len", "truncation window, 0 for full unroll"),
    ("train", "epochs", "training epochs"),
    ("train", "decay", "plateau-div-1.5 | exp-0.97-after-epoch-10 | none"),
    ("train", "init_scale", "uniform init half-width"),
    ("train", "forget_bias", "added to the LSTM forget-gate bias at init"),
    ("train", "carry_state", "carry hidden state between batches"),
    ("train", "shuffle", "shuffle batch order every epoch"),
    ("train", "eval_batch", "batch size for evaluation"),
];

impl RunConfig {
    pub fn for_task(task: Task) -> Self {
        let (train, hidden, embed, seq_len) = match task {
            Task::TemporalOrder => (TrainConfig::temporal_order(), 64, 4, 0),
            Task::CharLm => (TrainConfig::char_lm(), 128, 32, 100),
            Task::WordLm => (TrainConfig::word_lm(), 200, 200, 35),
        };
        RunConfig {
            task,
            arch: Arch::Lstm,
            out: PathBuf::from("runs"),
            to_mode: TemporalOrderMode::Short,
            train_size: 6400,
            test_size: 10_000,
            train_path: None,
            valid_path: None,
            test_path: None,
            vocab_cap: 10_000,
            train_frac: 0.9,
            valid_frac: 0.05,
            seq_len,
            hidden,
            embed,
            activation: Activation::Tanh,
            variant: Variant::None,
            rate: 0.0,
            mode: SamplingMode::PerStep,
            scaling: Scaling::TestScale,
            per_gate_masks: false,
            input_rate: 0.0,
            output_rate: 0.0,
            train,
            eval_batch: 500,
        }
    }

    /// Parses a config file body, applying `overrides` (`section.key=value`) last.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, String> {
        let entries = parse_entries(text)?;
        let task_of = |e: &[(String, String, usize)]| {
            e.iter()
                .rev()
                .find(|(k, _, _)| k == "run.task")
                .map(|(_, v, _)| v.clone())
        };
        let task_str = overrides
            .iter()
            .rev()
            .find(|(k, _)| k == "run.task")
            .map(|(_, v)| v.clone())
            .or_else(|| task_of(&entries))
            .unwrap_or_else(|| "temporal-order".to_string());
        let mut cfg = RunConfig::for_task(task_str.parse()?);
        for (key, value, line) in &entries {
            cfg.set(key, value).map_err(|e| format!("line {line}: {e}"))?;
        }
        for (key, value) in overrides {
            cfg.set(key, value).map_err(|e| format!("override `{key}`: {e}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        RunConfig::parse(&text, overrides)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "run.task" => self.task = v.parse()?,
            "run.arch" => self.arch = v.parse().map_err(err)?,
            "run.seed" => self.train.seed = num(v)?,
            "run.out" => self.out = PathBuf::from(v),
            "data.mode" => self.to_mode = v.parse().map_err(err)?,
            "data.train_size" => self.train_size = num(v)?,
            "data.test_size" => self.test_size = num(v)?,
            "data.train" => self.train_path = path(v),
            "data.valid" => self.valid_path = path(v),
            "data.test" => self.test_path = path(v),
            "data.vocab_cap" => self.vocab_cap = num(v)?,
            "data.train_frac" => self.train_frac = num(v)?,
            "data.valid_frac" => self.valid_frac = num(v)?,
            "data.seq_len" => self.seq_len = num(v)?,
            "model.hidden" => self.hidden = num(v)?,
            "model.embed" => self.embed = num(v)?,
            "model.activation" => self.activation = v.parse().map_err(err)?,
            "dropout.variant" => self.variant = v.parse().map_err(err)?,
            "dropout.rate" => self.rate = num(v)?,
            "dropout.mode" => self.mode = v.parse().map_err(err)?,
            "dropout.scaling" => self.scaling = v.parse().map_err(err)?,
            "dropout.per_gate_masks" => self.per_gate_masks = boolean(v)?,
            "dropout.input_rate" => self.input_rate = num(v)?,
            "dropout.output_rate" => self.output_rate = num(v)?,
            "train.optimizer" => self.train.optimizer = v.parse::<OptimizerKind>().map_err(err)?,
            "train.lr" => self.train.lr = num(v)?,
            "train.clip" => {
                let c: f64 = num(v)?;
                self.train.clip = (c != 0.0).then_some(c);
            }
            "train.batch" => self.train.batch = num(v)?,
            "train.bptt_len" => {
                let n: usize = num(v)?;
                self.train.bptt_len = (n != 0).then_some(n);
            }
            "train.epochs" => self.train.epochs = num(v)?,
            "train.decay" => self.train.decay_rule = v.parse::<DecayRule>().map_err(err)?,
            "train.init_scale" => self.train.init_scale = num(v)?,
            "train.forget_bias" => self.train.forget_bias = num(v)?,
            "train.carry_state" => self.train.carry_state = boolean(v)?,
            "train.shuffle" => self.train.shuffle = boolean(v)?,
            "train.eval_batch" => self.eval_batch = num(v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Checks everything that can be checked without touching data files.
    pub fn validate(&self) -> Result<(), String> {
        self.train.validate().map_err(err)?;
        self.dropout()?;
        if self.hidden == 0 || self.embed == 0 {
            return Err("model.hidden and model.embed must be positive".into());
        }
        if self.eval_batch == 0 {
            return Err("train.eval_batch must be positive".into());
        }
        match self.task {
            Task::TemporalOrder => {
                if self.train_path.is_none() && (self.train_size == 0 || self.test_size == 0) {
                    return Err("data.train_size and data.test_size must be positive".into());
                }
            }
            Task::CharLm | Task::WordLm => {
                if self.train_path.is_none() {
                    return Err(format!("task {} needs data.train", self.task.name()));
                }
                if self.seq_len == 0 {
                    return Err("data.seq_len must be positive".into());
                }
                let fracs_ok = self.train_frac > 0.0 && self.valid_frac >= 0.0 && self.train_frac + self.valid_frac <= 1.0;
                if !fracs_ok {
                    return Err("data.train_frac/valid_frac must be non-negative and sum to at most 1".into());
                }
                if self.task == Task::WordLm && self.vocab_cap == 0 {
                    return Err("data.vocab_cap must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn recurrent_spec(&self) -> Result<DropoutSpec, String> {
        if self.variant == Variant::Forward {
            return Err("dropout.variant names a recurrent placement; use input_rate/output_rate for forward dropout".into());
        }
        if self.variant == Variant::None {
            return Ok(DropoutSpec::none());
        }
        Ok(DropoutSpec::new(self.variant, self.rate, self.mode, self.scaling)
            .map_err(err)?
            .with_per_gate_masks(self.per_gate_masks))
    }

    pub fn dropout(&self) -> Result<DropoutConfig, String> {
        let forward = |rate: f64| -> Result<DropoutSpec, String> {
            if rate == 0.0 {
                Ok(DropoutSpec::none())
            } else {
                DropoutSpec::forward(rate, self.scaling).map_err(err)
            }
        };
        Ok(DropoutConfig {
            recurrent: self.recurrent_spec()?,
            input: forward(self.input_rate)?,
            output: forward(self.output_rate)?,
        })
    }

    /// The resolved configuration in the file format, every key present.
    pub fn render(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values: Vec<(&str, String)> = vec![
            ("run.task", self.task.name().into()),
            ("run.arch", self.arch.name().into()),
            ("run.seed", self.train.seed.to_string()),
            ("run.out", self.out.display().to_string()),
            ("data.mode", self.to_mode.name().into()),
            ("data.train_size", self.train_size.to_string()),
            ("data.test_size", self.test_size.to_string()),
            ("data.train", opt(&self.train_path)),
            ("data.valid", opt(&self.valid_path)),
            ("data.test", opt(&self.test_path)),
            ("data.vocab_cap", self.vocab_cap.to_string()),
            ("data.train_frac", self.train_frac.to_string()),
            ("data.valid_frac", self.valid_frac.to_string()),
            ("data.seq_len", self.seq_len.to_string()),
            ("model.hidden", self.hidden.to_string()),
            ("model.embed", self.embed.to_string()),
            ("model.activation", self.activation.name().into()),
            ("dropout.variant", self.variant.name().into()),
            ("dropout.rate", self.rate.to_string()),
            ("dropout.mode", self.mode.name().into()),
            ("dropout.scaling", self.scaling.name().into()),
            ("dropout.per_gate_masks", self.per_gate_masks.to_string()),
            ("dropout.input_rate", self.input_rate.to_string()),
            ("dropout.output_rate", self.output_rate.to_string()),
            ("train.optimizer", self.train.optimizer.to_string()),
            ("train.lr", self.train.lr.to_string()),
            ("train.clip", self.train.clip.unwrap_or(0.0).to_string()),
            ("train.batch", self.train.batch.to_string()),
            ("train.bptt_len", self.train.bptt_len.unwrap_or(0).to_string()),
            ("train.epochs", self.train.epochs.to_string()),
            ("train.decay", self.train.decay_rule.to_string()),
            ("train.init_scale", self.train.init_scale.to_string()),
            ("train.forget_bias", self.train.forget_bias.to_string()),
            ("train.carry_state", self.train.carry_state.to_string()),
            ("train.shuffle", self.train.shuffle.to_string()),
            ("train.eval_batch", self.eval_batch.to_string()),
        ];
        let mut out = String::new();
        let mut section = "";
        for (key, value) in values {
            let (s, k) = key.split_once('.').expect("qualified key");
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                section = s;
            }
            let _ = writeln!(out, "{k} = {value}");
        }
        out
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("`{other}` is not a boolean")),
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

/// `(section.key, value, line)` triples in file order.
fn parse_entries(text: &str) -> Result<Vec<(String, String, usize)>, String> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| format!("line {line_no}: malformed section header"))?
                .trim();
            if !KEYS.iter().any(|(s, _, _)| *s == name) {
                return Err(format!("line {line_no}: unknown section `[{name}]`"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {line_no}: expected `key = value`"))?;
        let sec = section
            .as_deref()
            .ok_or_else(|| format!("line {line_no}: key outside of a [section]"))?;
        out.push((format!("{sec}.{}", k.trim()), v.trim().to_string(), line_no));
    }
    Ok(out)
}

/// Splits `section.key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("override `{s}` must look like section.key=value"))?;
    let k = k.trim();
    if !KEYS.iter().any(|(sec, key, _)| format!("{sec}.{key}") == k) {
        return Err(format!("unknown key `{k}`"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}
