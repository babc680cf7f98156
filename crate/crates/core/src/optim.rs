//! Optimizers, learning-rate schedules, metrics and the training loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bptt::{clip_gradients, forward_with_carry, truncated_gradients, Carry, DropoutConfig, Gradients};
use crate::dropout::Phase;
use crate::error::{check_dim, Error, Result};
use crate::math::rng::streams;
use crate::math::Rng;
use crate::cells::Arch;
use crate::math::Activation;
use crate::model::{Model, ModelSizes};
use crate::tasks::SequenceBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayRule {
    /// Divide by 1.5 whenever validation loss fails to strictly decrease.
    #[serde(rename = "plateau-div-1.5")]
    PlateauDiv15,
    /// Multiply by 0.97 after every epoch from epoch 10 on.
    #[serde(rename = "exp-0.97-after-epoch-10")]
    Exp097After10,
    #[serde(rename = "none")]
    None,
}

impl DecayRule {
    pub fn name(self) -> &'static str {
        match self {
            DecayRule::PlateauDiv15 => "plateau-div-1.5",
            DecayRule::Exp097After10 => "exp-0.97-after-epoch-10",
            DecayRule::None => "none",
        }
    }
}

impl FromStr for DecayRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plateau-div-1.5" | "plateau" => Ok(DecayRule::PlateauDiv15),
            "exp-0.97-after-epoch-10" | "exp" => Ok(DecayRule::Exp097After10),
            "none" => Ok(DecayRule::None),
            other => Err(Error::Config(format!("unknown decay rule `{other}`"))),
        }
    }
}

impl fmt::Display for DecayRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Max-norm clipping threshold; `None` disables clipping.
    pub clip: Option<f64>,
    pub batch: usize,
    /// Truncation window; `None` unrolls each batch fully.
    pub bptt_len: Option<usize>,
    pub epochs: usize,
    pub decay_rule: DecayRule,
    pub seed: u64,
    /// Parameters start in `U[-init_scale, init_scale)`.
    pub init_scale: f64,
    /// Added to the LSTM forget-gate bias after initialisation.
    pub forget_bias: f64,
    /// Carry hidden state from one batch to the next (contiguous LM batches).
    pub carry_state: bool,
    /// Reshuffle batch order every epoch.
    pub shuffle: bool,
}

impl TrainConfig {
    /// Temporal Order defaults: SGD, lr 0.1, clip 10, batch 32. The inputs are
    /// only four symbols, so the init is wider than for the LM tasks.
    pub fn temporal_order() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 0.1,
            clip: Some(10.0),
            batch: 32,
            bptt_len: None,
            epochs: 30,
            decay_rule: DecayRule::None,
            seed: 1,
            init_scale: 0.3,
            forget_bias: 1.0,
            carry_state: false,
            shuffle: true,
        }
    }

    /// Word-level LM defaults: SGD, lr 1, clip 10, 35-step windows, plateau decay.
    pub fn word_lm() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 1.0,
            clip: Some(10.0),
            batch: 32,
            bptt_len: Some(35),
            epochs: 13,
            decay_rule: DecayRule::PlateauDiv15,
            seed: 1,
            init_scale: 0.05,
            forget_bias: 0.0,
            carry_state: true,
            shuffle: false,
        }
    }

    /// Character-level LM defaults: Adam, lr 0.001, 100-step windows, exponential decay.
    pub fn char_lm() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            lr: 0.001,
            clip: Some(10.0),
            batch: 32,
            bptt_len: Some(100),
            epochs: 20,
            decay_rule: DecayRule::Exp097After10,
            seed: 1,
            init_scale: 0.01,
            forget_bias: 0.0,
            carry_state: true,
            shuffle: false,
        }
    }

    /// Fresh model drawn from the INIT stream of `self.seed`.
    pub fn init_model(&self, arch: Arch, sizes: ModelSizes, activation: Activation) -> Model {
        let mut rng = Rng::stream(self.seed, streams::INIT);
        let mut model = Model::new(arch, sizes, activation, self.init_scale, &mut rng);
        model.shift_forget_bias(self.forget_bias);
        model
    }

    pub fn validate(&self) -> Result<()> {
        if !self.forget_bias.is_finite() {
            return Err(Error::Config(format!("forget_bias must be finite, got {}", self.forget_bias)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip must be positive, got {c}")));
            }
        }
        if self.bptt_len == Some(0) {
            return Err(Error::Config("bptt_len must be at least 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!("init_scale must be non-negative, got {}", self.init_scale)));
        }
        Ok(())
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Model,
    pub v: Model,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &Model) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd,
    Adam(AdamState),
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &Model) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam(AdamState::new(params)),
        }
    }

    pub fn step(&mut self, params: &mut Model, grads: &Gradients, lr: f64) -> Result<()> {
        match self {
            OptimizerState::Sgd => sgd_step(params, grads, lr),
            OptimizerState::Adam(s) => adam_step(params, grads, s, lr),
        }
    }
}

fn check_shapes(a: &Model, b: &Model) -> Result<()> {
    let ta = a.tensors();
    let tb = b.tensors();
    check_dim("parameter tensor count", ta.len(), tb.len())?;
    for ((name, x), (_, y)) in ta.iter().zip(&tb) {
        check_dim(name, x.len(), y.len())?;
    }
    if a.sizes() != b.sizes() || a.arch() != b.arch() {
        return Err(Error::Config("gradient shapes do not match parameters".into()));
    }
    Ok(())
}

/// `θ ← θ − lr·g`.
pub fn sgd_step(params: &mut Model, grads: &Gradients, lr: f64) -> Result<()> {
    check_shapes(params, &grads.params)?;
    for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (p, g) in p.iter_mut().zip(g) {
            *p -= lr * g;
        }
    }
    Ok(())
}

/// Bias-corrected Adam.
pub fn adam_step(params: &mut Model, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    check_shapes(params, &grads.params)?;
    check_shapes(params, &state.m)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
        for i in 0..p.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Learning rate for the epoch after `epoch` (1-based).
///
/// `val_history` holds validation losses of epochs `1..=epoch`.
pub fn schedule(rule: DecayRule, epoch: usize, val_history: &[f64], lr: f64) -> f64 {
    match rule {
        DecayRule::None => lr,
        DecayRule::Exp097After10 if epoch >= 10 => lr * 0.97,
        DecayRule::Exp097After10 => lr,
        DecayRule::PlateauDiv15 => match val_history {
            [.., prev, last] if !(last < prev) => lr / 1.5,
            _ => lr,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Perplexity,
    Bpc,
    Accuracy,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Perplexity => "perplexity",
            MetricKind::Bpc => "bpc",
            MetricKind::Accuracy => "accuracy",
        }
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perplexity" => Ok(MetricKind::Perplexity),
            "bpc" => Ok(MetricKind::Bpc),
            "accuracy" => Ok(MetricKind::Accuracy),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

pub fn perplexity(mean_nll: f64) -> f64 {
    mean_nll.exp()
}

pub fn bpc(mean_nll: f64) -> f64 {
    mean_nll / std::f64::consts::LN_2
}

/// Aggregate loss and hit count over a set of predicted positions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Evaluation {
    pub nll_sum: f64,
    pub correct: usize,
    pub positions: usize,
}

impl Evaluation {
    fn add(&mut self, mean_loss: f64, correct: usize, positions: usize) {
        self.nll_sum += mean_loss * positions as f64;
        self.correct += correct;
        self.positions += positions;
    }

    pub fn mean_loss(&self) -> Result<f64> {
        if self.positions == 0 {
            return Err(Error::Empty("evaluation set has no predicted positions"));
        }
        Ok(self.nll_sum / self.positions as f64)
    }

    pub fn accuracy(&self) -> Result<f64> {
        if self.positions == 0 {
            return Err(Error::Empty("evaluation set has no predicted positions"));
        }
        Ok(self.correct as f64 / self.positions as f64)
    }

    pub fn metric(&self, kind: MetricKind) -> Result<f64> {
        Ok(match kind {
            MetricKind::Perplexity => perplexity(self.mean_loss()?),
            MetricKind::Bpc => bpc(self.mean_loss()?),
            MetricKind::Accuracy => self.accuracy()?,
        })
    }
}

/// Inference-phase loss over `batches`; state flows between consecutive
/// batches when `carry_state` is set.
pub fn evaluate(model: &Model, batches: &[SequenceBatch], drop: &DropoutConfig, carry_state: bool) -> Result<Evaluation> {
    // Inference draws no random numbers; the generator only satisfies the signature.
    let mut rng = Rng::new(0);
    let mut eval = Evaluation::default();
    let mut carry: Option<Carry> = None;
    for b in batches {
        let start = if carry_state { compatible(carry.take(), b) } else { None };
        let tape = forward_with_carry(model, b, drop, &mut rng, Phase::Infer, start)?;
        eval.add(tape.loss(), tape.correct(), tape.predictions());
        if carry_state {
            carry = Some(tape.carry());
        }
    }
    if eval.positions == 0 {
        return Err(Error::Empty("evaluation set has no predicted positions"));
    }
    Ok(eval)
}

/// Drops a carry whose batch size does not fit the next batch.
fn compatible(carry: Option<Carry>, batch: &SequenceBatch) -> Option<Carry> {
    carry.filter(|c| c.state.h.rows() == batch.batch_size())
}

/// Data for [`train`]: batches are used as given (see [`crate::tasks`]).
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Vec<SequenceBatch>,
    pub valid: Vec<SequenceBatch>,
    pub test: Vec<SequenceBatch>,
    pub metric: MetricKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub metric: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub metric: Option<MetricKind>,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    /// CSV with header `epoch,split,loss,metric,lr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,split,loss,metric,lr\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.split.name(), r.loss, r.metric, r.lr));
        }
        s
    }

    pub fn last(&self, split: Split) -> Option<&LogRow> {
        self.rows.iter().rev().find(|r| r.split == split)
    }

    pub fn split_rows(&self, split: Split) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }
}

/// Minibatch training with per-epoch validation and learning-rate decay.
///
/// Train rows report the running loss and metric of the epoch's updates
/// (train phase, dropout active). Valid and test rows are inference-phase
/// evaluations. The test split, when present, is evaluated once after the
/// last epoch.
pub fn train(model: &mut Model, data: &TrainData, cfg: &TrainConfig, drop: &DropoutConfig) -> Result<RunLog> {
    train_with(model, data, cfg, drop, |_| {})
}

/// [`train`] with a callback invoked for every log row as it is produced.
pub fn train_with(
    model: &mut Model,
    data: &TrainData,
    cfg: &TrainConfig,
    drop: &DropoutConfig,
    mut on_row: impl FnMut(&LogRow),
) -> Result<RunLog> {
    cfg.validate()?;
    model.validate()?;
    if data.train.is_empty() || data.train.iter().all(|b| b.predicted_positions() == 0) {
        return Err(Error::Empty("training data yields no parameter updates"));
    }
    let sizes = model.sizes();
    for b in data.train.iter().chain(&data.valid).chain(&data.test) {
        b.validate(sizes.vocab, sizes.outputs)?;
    }

    let mut opt = OptimizerState::new(cfg.optimizer, model);
    let mut masks = Rng::stream(cfg.seed, streams::MASKS);
    let mut shuffler = Rng::stream(cfg.seed, streams::SHUFFLE);
    let mut lr = cfg.lr;
    let mut val_history = Vec::new();
    let mut log = RunLog {
        metric: Some(data.metric),
        rows: Vec::new(),
    };
    let mut emit = |log: &mut RunLog, row: LogRow| {
        on_row(&row);
        log.rows.push(row);
    };

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            shuffler.shuffle(&mut order);
        }
        let mut running = Evaluation::default();
        let mut carry: Option<Carry> = None;
        for (bi, &idx) in order.iter().enumerate() {
            let batch = &data.train[idx];
            if batch.predicted_positions() == 0 {
                continue;
            }
            let start = if cfg.carry_state { compatible(carry.take(), batch) } else { None };
            let window = cfg.bptt_len.unwrap_or(batch.seq_len()).max(1);
            let (loss, grads, next, correct) = step_batch(model, batch, drop, &mut masks, window, start)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bi + 1,
                    loss,
                });
            }
            running.add(loss, correct, batch.predicted_positions());
            if cfg.carry_state {
                carry = Some(next);
            }
            let grads = match cfg.clip {
                Some(c) => clip_gradients(grads, c),
                None => grads,
            };
            opt.step(model, &grads, lr)?;
        }
        let train_loss = running.mean_loss()?;
        let train_metric = running.metric(data.metric)?;
        emit(
            &mut log,
            LogRow {
                epoch,
                split: Split::Train,
                loss: train_loss,
                metric: train_metric,
                lr,
            },
        );
        if !data.valid.is_empty() {
            let v = evaluate(model, &data.valid, drop, cfg.carry_state)?;
            let vl = v.mean_loss()?;
            if !vl.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: 0,
                    loss: vl,
                });
            }
            emit(
                &mut log,
                LogRow {
                    epoch,
                    split: Split::Valid,
                    loss: vl,
                    metric: v.metric(data.metric)?,
                    lr,
                },
            );
            val_history.push(vl);
        }
        lr = schedule(cfg.decay_rule, epoch, &val_history, lr);
    }
    if !data.test.is_empty() {
        let t = evaluate(model, &data.test, drop, cfg.carry_state)?;
        emit(
            &mut log,
            LogRow {
                epoch: cfg.epochs,
                split: Split::Test,
                loss: t.mean_loss()?,
                metric: t.metric(data.metric)?,
                lr,
            },
        );
    }
    Ok(log)
}

/// One batch of gradients plus the number of correct final-step predictions.
fn step_batch(
    model: &Model,
    batch: &SequenceBatch,
    drop: &DropoutConfig,
    rng: &mut Rng,
    window: usize,
    carry: Option<Carry>,
) -> Result<(f64, Gradients, Carry, usize)> {
    if window >= batch.seq_len() {
        let tape = forward_with_carry(model, batch, drop, rng, Phase::Train, carry)?;
        let (loss, correct, next) = (tape.loss(), tape.correct(), tape.carry());
        let g = crate::bptt::backward_sequence(tape)?;
        return Ok((loss, g, next, correct));
    }
    // Accuracy is only tracked for whole-sequence batches; truncated
    // windows are used for language modelling where it is not reported.
    let (loss, g, next) = truncated_gradients(model, batch, drop, rng, window, carry)?;
    Ok((loss, g, next, 0))
}
