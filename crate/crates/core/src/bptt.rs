//! Unrolled forward pass, exact reverse-mode gradients, finite-difference
//! checking and max-norm clipping.
//!
//! Dropout masks are sampled during the forward pass and stored on the
//! [`Tape`]; the backward pass treats them as constants.

use serde::{Deserialize, Serialize};

use crate::cells::{BatchState, StepCache};
use crate::dropout::{sample_factor_matrix, DropoutSpec, Phase, SamplingMode, Variant};
use crate::error::{Error, Result};
use crate::math::{rng::streams, Matrix, Rng};
use crate::model::Model;
use crate::tasks::{SequenceBatch, Targets};

/// Dropout placement for a whole network.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DropoutConfig {
    /// Recurrent dropout (`moon`, `gal`, `update-drop`) inside the cell.
    pub recurrent: DropoutSpec,
    /// Forward dropout on the embedded input.
    pub input: DropoutSpec,
    /// Forward dropout on the hidden-to-output connection.
    pub output: DropoutSpec,
}

impl DropoutConfig {
    pub fn none() -> Self {
        DropoutConfig::default()
    }

    pub fn recurrent(spec: DropoutSpec) -> Self {
        DropoutConfig {
            recurrent: spec,
            ..DropoutConfig::default()
        }
    }
}

/// State handed from one truncation window to the next.
#[derive(Debug, Clone)]
pub struct Carry {
    pub state: BatchState,
    /// Per-sequence recurrent keep factors, reused until the sequence ends.
    pub sequence_factors: Option<Vec<Matrix>>,
}

#[derive(Debug, Clone)]
struct OutputRecord {
    hout: Matrix,
    out_factor: Option<Matrix>,
    probs: Matrix,
    targets: Vec<usize>,
}

#[derive(Debug, Clone)]
struct StepRecord {
    x_factor: Option<Matrix>,
    cache: StepCache,
    output: Option<OutputRecord>,
}

/// Forward intermediates of one unrolled pass.
#[derive(Debug, Clone)]
pub struct Tape<'m> {
    model: &'m Model,
    tokens: Vec<Vec<usize>>,
    steps: Vec<StepRecord>,
    predictions: usize,
    loss: f64,
    position_losses: Vec<f64>,
    correct: usize,
    final_state: BatchState,
    sequence_factors: Option<Vec<Matrix>>,
}

impl<'m> Tape<'m> {
    /// Mean cross-entropy (nats) over all predicted positions.
    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Number of (sequence, step) positions that contributed to the loss.
    /// Cross-entropy of every predicted position, in step-major order.
    pub fn position_losses(&self) -> &[f64] {
        &self.position_losses
    }

    pub fn predictions(&self) -> usize {
        self.predictions
    }

    /// Positions whose arg-max prediction equals the target.
    pub fn correct(&self) -> usize {
        self.correct
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Detached state for continuing the same sequences in a later window.
    pub fn carry(&self) -> Carry {
        Carry {
            state: self.final_state.clone(),
            sequence_factors: self.sequence_factors.clone(),
        }
    }
}

/// Parameter gradients; shapes mirror [`Model`] exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Model,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            params: model.zeros_like(),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        self.params.tensors()
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.params.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += weight * other`.
    pub fn add_scaled(&mut self, other: &Gradients, weight: f64) {
        for ((_, a), (_, b)) in self.params.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += weight * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.is_finite()
    }
}

fn recurrent_factor_count(model: &Model, spec: &DropoutSpec) -> usize {
    if !spec.variant.is_recurrent() {
        0
    } else if spec.variant == Variant::Gal && spec.per_gate_masks {
        model.arch().gate_count()
    } else {
        1
    }
}

fn constant_factors(count: usize, batch: usize, width: usize, value: f64) -> Vec<Matrix> {
    let mut m = Matrix::zeros(batch, width);
    m.fill(value);
    vec![m; count]
}

fn sample_factors(spec: &DropoutSpec, count: usize, batch: usize, width: usize, rng: &mut Rng) -> Vec<Matrix> {
    (0..count)
        .map(|_| sample_factor_matrix(spec, batch, width, rng))
        .collect()
}

/// Forward dropout factors for one step, or `None` when the site is off.
fn forward_factor(spec: &DropoutSpec, phase: Phase, batch: usize, width: usize, rng: &mut Rng) -> Option<Matrix> {
    if spec.variant == Variant::None {
        return None;
    }
    Some(match phase {
        Phase::Train => sample_factor_matrix(spec, batch, width, rng),
        Phase::Infer => constant_factors(1, batch, width, spec.infer_factor()).remove(0),
    })
}

/// Unrolls `model` over `batch` from a zero state.
pub fn forward_sequence<'m>(
    model: &'m Model,
    batch: &SequenceBatch,
    drop: &DropoutConfig,
    rng: &mut Rng,
    phase: Phase,
) -> Result<Tape<'m>> {
    forward_with_carry(model, batch, drop, rng, phase, None)
}

/// Unrolls `model` over `batch`, optionally continuing from a previous window.
pub fn forward_with_carry<'m>(
    model: &'m Model,
    batch: &SequenceBatch,
    drop: &DropoutConfig,
    rng: &mut Rng,
    phase: Phase,
    carry: Option<Carry>,
) -> Result<Tape<'m>> {
    model.validate()?;
    let sizes = model.sizes();
    batch.validate(sizes.vocab, sizes.outputs)?;
    let b = batch.batch_size();
    let steps = batch.seq_len();
    let hidden = sizes.hidden;

    let rec = &drop.recurrent;
    let n_factors = recurrent_factor_count(model, rec);

    let (mut state, mut sequence_factors) = match carry {
        Some(c) => {
            if c.state.h.shape() != (b, hidden) {
                return Err(Error::dim("carried state rows", b, c.state.h.rows()));
            }
            (c.state, c.sequence_factors)
        }
        None => (model.cell.initial_state(b), None),
    };
    if phase == Phase::Train && rec.mode == SamplingMode::PerSequence && n_factors > 0 && sequence_factors.is_none() {
        sequence_factors = Some(sample_factors(rec, n_factors, b, hidden, rng));
    }
    let infer_factors = (phase == Phase::Infer && n_factors > 0)
        .then(|| constant_factors(n_factors, b, hidden, rec.infer_factor()));

    let mut records = Vec::with_capacity(steps);
    let mut position_losses = Vec::new();
    let mut predictions = 0;
    let mut correct = 0;

    for t in 0..steps {
        let mut x = Matrix::zeros(b, sizes.embed);
        for (r, seq) in batch.tokens.iter().enumerate() {
            x.row_mut(r).copy_from_slice(model.embedding.row(seq[t]));
        }
        let x_factor = forward_factor(&drop.input, phase, b, sizes.embed, rng);
        if let Some(k) = &x_factor {
            x = x.zip_map(k, |a, k| a * k);
        }

        let step_factors: Vec<Matrix> = match (phase, rec.mode) {
            _ if n_factors == 0 => Vec::new(),
            (Phase::Infer, _) => infer_factors.clone().unwrap_or_default(),
            (Phase::Train, SamplingMode::PerSequence) => sequence_factors.clone().unwrap_or_default(),
            (Phase::Train, SamplingMode::PerStep) => sample_factors(rec, n_factors, b, hidden, rng),
        };
        let (next, cache) = model.cell.forward_batch(&x, &state, rec.variant, &step_factors);
        state = next;

        let targets: Option<Vec<usize>> = match &batch.targets {
            Targets::NextToken(tg) => Some(tg.iter().map(|row| row[t]).collect()),
            Targets::Class(labels) if t + 1 == steps => Some(labels.clone()),
            Targets::Class(_) | Targets::None => None,
        };
        let output = match targets {
            None => None,
            Some(targets) => {
                let out_factor = forward_factor(&drop.output, phase, b, hidden, rng);
                let hout = match &out_factor {
                    Some(k) => state.h.zip_map(k, |a, k| a * k),
                    None => state.h.clone(),
                };
                let mut logits = Matrix::matmul_nt(&hout, &model.out_w);
                logits.add_row_vector(&model.out_b);
                let probs = softmax_rows(&logits);
                for (r, &tg) in targets.iter().enumerate() {
                    let row = logits.row(r);
                    position_losses.push(crate::math::log_sum_exp(row) - row[tg]);
                    if argmax(row) == tg {
                        correct += 1;
                    }
                }
                predictions += b;
                Some(OutputRecord {
                    hout,
                    out_factor,
                    probs,
                    targets,
                })
            }
        };
        records.push(StepRecord {
            x_factor,
            cache,
            output,
        });
    }

    Ok(Tape {
        model,
        tokens: batch.tokens.clone(),
        steps: records,
        predictions,
        loss: if predictions == 0 {
            0.0
        } else {
            position_losses.iter().sum::<f64>() / predictions as f64
        },
        position_losses,
        correct,
        final_state: state,
        sequence_factors,
    })
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let lse = crate::math::log_sum_exp(row);
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    out
}

/// Gradient of the tape's mean loss with respect to every parameter.
pub fn backward_sequence(tape: Tape<'_>) -> Result<Gradients> {
    backward_scaled(tape, 1.0)
}

/// Gradient of `scale × loss`.
pub fn backward_scaled(tape: Tape<'_>, scale: f64) -> Result<Gradients> {
    let model = tape.model;
    if tape.steps.is_empty() || tape.predictions == 0 {
        return Err(Error::Tape("tape records no steps or no predictions".into()));
    }
    if tape.tokens.iter().any(|row| row.len() != tape.steps.len()) {
        return Err(Error::Tape("token rows do not match recorded steps".into()));
    }
    let mut grads = Gradients::zeros_like(model);
    let b = tape.tokens.len();
    let hidden = model.cell.hidden_size();
    let norm = scale / tape.predictions as f64;

    let mut dh_next = Matrix::zeros(b, hidden);
    let mut dc_next: Option<Matrix> = None;

    for (t, rec) in tape.steps.iter().enumerate().rev() {
        let mut dh = dh_next;
        if let Some(out) = &rec.output {
            let mut dlogits = out.probs.clone();
            for (r, &tg) in out.targets.iter().enumerate() {
                dlogits.row_mut(r)[tg] -= 1.0;
            }
            dlogits.as_mut_slice().iter_mut().for_each(|v| *v *= norm);
            Matrix::acc_tn(&mut grads.params.out_w, &dlogits, &out.hout);
            dlogits.sum_rows_into(&mut grads.params.out_b);
            let mut dhout = Matrix::zeros(b, hidden);
            Matrix::acc_nn(&mut dhout, &dlogits, &model.out_w);
            if let Some(k) = &out.out_factor {
                dhout = dhout.zip_map(k, |a, k| a * k);
            }
            dh.add_assign(&dhout);
        }
        let sg = model
            .cell
            .backward_batch(&rec.cache, &dh, dc_next.as_ref(), &mut grads.params.cell)?;
        let dx = match &rec.x_factor {
            Some(k) => sg.dx.zip_map(k, |a, k| a * k),
            None => sg.dx,
        };
        for (r, seq) in tape.tokens.iter().enumerate() {
            let row = grads.params.embedding.row_mut(seq[t]);
            for (g, d) in row.iter_mut().zip(dx.row(r)) {
                *g += d;
            }
        }
        dh_next = sg.dh_prev;
        dc_next = sg.dc_prev;
    }
    Ok(grads)
}

/// Loss and gradients over `batch` split into windows of `bptt_len` steps.
///
/// State (and per-sequence masks) cross window boundaries; gradients do not.
/// Each window's gradient is weighted by its share of predicted positions so
/// the result is the gradient of the mean loss when `bptt_len` covers the
/// whole sequence.
pub fn truncated_gradients(
    model: &Model,
    batch: &SequenceBatch,
    drop: &DropoutConfig,
    rng: &mut Rng,
    bptt_len: usize,
    carry: Option<Carry>,
) -> Result<(f64, Gradients, Carry)> {
    if bptt_len == 0 {
        return Err(Error::Config("bptt_len must be at least 1".into()));
    }
    let windows = batch.split_time(bptt_len)?;
    let total: usize = windows.iter().map(|w| w.predicted_positions()).sum();
    if total == 0 {
        return Err(Error::Empty("batch has no predicted positions"));
    }
    let mut carry = carry;
    let mut loss = 0.0;
    let mut grads: Option<Gradients> = None;
    for w in &windows {
        let n = w.predicted_positions();
        if n == 0 {
            // Classification prefix: advance the state, nothing to predict.
            let tape = forward_with_carry(model, w, drop, rng, Phase::Train, carry.take())?;
            carry = Some(tape.carry());
            continue;
        }
        let tape = forward_with_carry(model, w, drop, rng, Phase::Train, carry.take())?;
        let share = n as f64 / total as f64;
        loss += share * tape.loss();
        carry = Some(tape.carry());
        let g = backward_sequence(tape)?;
        match grads.as_mut() {
            None if windows.len() == 1 => grads = Some(g),
            None => {
                let mut acc = Gradients::zeros_like(model);
                acc.add_scaled(&g, share);
                grads = Some(acc);
            }
            Some(acc) => acc.add_scaled(&g, share),
        }
    }
    let carry = carry.expect("at least one window");
    Ok((loss, grads.expect("at least one predicting window"), carry))
}

/// Rescales `g` so its global L2 norm is at most `threshold`.
pub fn clip_gradients(mut g: Gradients, threshold: f64) -> Gradients {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let n = g.norm();
    if n > threshold {
        g.scale(threshold / n);
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub coordinate: String,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub max_relative_error: f64,
}

impl GradCheckReport {
    pub const DEFAULT_TOLERANCE: f64 = 1e-4;

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }

    /// CSV with header `coordinate,analytic,numeric,relative_error`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coordinate,analytic,numeric,relative_error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                r.coordinate, r.analytic, r.numeric, r.relative_error
            ));
        }
        s
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Central difference of `Σ_k f_k` at `x`: `Σ_k (f_k(x + eps) − f_k(x − eps)) / (2·eps)`.
///
/// Differencing term by term before summing keeps the rounding error of a
/// large sum out of the tiny difference.
pub fn central_difference<E>(mut f: impl FnMut(f64) -> Result<Vec<f64>, E>, x: f64, eps: f64) -> Result<f64, E> {
    let plus = f(x + eps)?;
    let minus = f(x - eps)?;
    debug_assert_eq!(plus.len(), minus.len());
    let diff: f64 = plus.iter().zip(&minus).map(|(a, b)| a - b).sum();
    Ok(diff / (2.0 * eps))
}

/// Shape of the standard gradient-check problem.
pub const GRADCHECK_HIDDEN: usize = 16;
pub const GRADCHECK_SEQ_LEN: usize = 12;
pub const GRADCHECK_BATCH: usize = 4;
/// Weight half-width of the standard problem.
pub const GRADCHECK_INIT: f64 = 0.3;
/// Default central-difference step. Smaller steps lose the smallest
/// gradients to rounding; larger ones lose the most curved coordinates to
/// truncation error.
pub const GRADCHECK_EPS: f64 = 3e-5;

/// A small random next-token problem for [`grad_check`]: vocabulary 6,
/// embedding 5, hidden 16, 4 sequences of 12 steps, weights in `U[-0.3, 0.3)`.
pub fn gradcheck_problem(arch: crate::cells::Arch, activation: crate::math::Activation, seed: u64) -> (Model, SequenceBatch) {
    let sizes = crate::model::ModelSizes {
        vocab: 6,
        embed: 5,
        hidden: GRADCHECK_HIDDEN,
        outputs: 6,
    };
    let model = Model::new(arch, sizes, activation, GRADCHECK_INIT, &mut Rng::stream(seed, streams::INIT));
    let mut data = Rng::stream(seed, streams::DATA);
    let rows: Vec<Vec<usize>> = (0..GRADCHECK_BATCH)
        .map(|_| (0..=GRADCHECK_SEQ_LEN).map(|_| data.below(sizes.vocab)).collect())
        .collect();
    let batch = SequenceBatch {
        tokens: rows.iter().map(|r| r[..GRADCHECK_SEQ_LEN].to_vec()).collect(),
        targets: Targets::NextToken(rows.iter().map(|r| r[1..].to_vec()).collect()),
        vocab_size: sizes.vocab,
    };
    (model, batch)
}

/// Central-difference check of [`backward_sequence`] on sampled coordinates.
///
/// The loss is evaluated in the train phase with masks drawn from a fresh
/// generator seeded by `seed`, so every evaluation sees the same masks.
/// Roughly `samples` coordinates are checked, at least 8 per tensor (or the
/// whole tensor when smaller).
pub fn grad_check(
    model: &Model,
    batch: &SequenceBatch,
    drop: &DropoutConfig,
    seed: u64,
    eps: f64,
    samples: usize,
) -> Result<GradCheckReport> {
    let losses_at = |m: &Model| -> Result<Vec<f64>> {
        let mut rng = Rng::stream(seed, streams::MASKS);
        Ok(forward_sequence(m, batch, drop, &mut rng, Phase::Train)?.position_losses.clone())
    };
    let (analytic, positions) = {
        let mut rng = Rng::stream(seed, streams::MASKS);
        let tape = forward_sequence(model, batch, drop, &mut rng, Phase::Train)?;
        let n = tape.predictions() as f64;
        (backward_sequence(tape)?, n)
    };

    let total = model.num_params();
    let mut pick = Rng::stream(seed, streams::GRADCHECK);
    let mut coords: Vec<(usize, &'static str, usize)> = Vec::new();
    for (ti, (name, t)) in model.tensors().iter().enumerate() {
        let want = ((samples * t.len()).div_ceil(total)).max(8).min(t.len());
        let mut idx: Vec<usize> = (0..t.len()).collect();
        pick.shuffle(&mut idx);
        coords.extend(idx[..want].iter().map(|&i| (ti, *name, i)));
    }

    let mut probe = model.clone();
    let mut rows = Vec::with_capacity(coords.len());
    let mut max_rel: f64 = 0.0;
    for (ti, name, i) in coords {
        let orig = probe.tensors()[ti].1[i];
        let numeric = central_difference(
            |v| {
                probe.tensors_mut()[ti].1[i] = v;
                losses_at(&probe)
            },
            orig,
            eps,
        )? / positions;
        probe.tensors_mut()[ti].1[i] = orig;
        let a = analytic.tensors()[ti].1[i];
        let rel = relative_error(a, numeric);
        max_rel = max_rel.max(rel);
        rows.push(GradCheckRow {
            coordinate: format!("{name}[{i}]"),
            analytic: a,
            numeric,
            relative_error: rel,
        });
    }
    Ok(GradCheckReport {
        rows,
        max_relative_error: max_rel,
    })
}

#[cfg(test)]
mod tests;
