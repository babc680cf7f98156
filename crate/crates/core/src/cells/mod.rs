//! Vanilla RNN, LSTM and GRU cells with recurrent dropout.
//!
//! The per-vector step functions (`rnn_step`, `lstm_step`, `gru_step`) are
//! thin wrappers around batched kernels that work on `[batch × width]`
//! matrices; the same kernels drive training in [`crate::bptt`].
//!
//! Recurrent dropout placement by [`Variant`]:
//!
//! * `Gal`: `h_{t-1}` is dropped wherever it enters a gate or the candidate.
//! * `Moon`: the new memory is dropped (LSTM `c_t`, GRU `h_t`).
//! * `UpdateDrop`: the candidate `g_t` is dropped before it is written.
//! * vanilla RNN: all three drop `h_{t-1}`.

pub mod gru;
pub mod lstm;
pub mod rnn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gru::GruParams;
pub use lstm::LstmParams;
pub use rnn::RnnParams;

use crate::dropout::{DropoutSpec, Mask, Phase, Variant};
use crate::error::{check_dim, Error, Result};
use crate::math::{affine, Activation, Matrix, Rng, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Rnn,
    Lstm,
    Gru,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Rnn, Arch::Lstm, Arch::Gru];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Rnn => "rnn",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
        }
    }

    /// Number of weight matrices that read `[x_t, h_{t-1}]`.
    pub fn gate_count(self) -> usize {
        match self {
            Arch::Rnn => 1,
            Arch::Lstm => lstm::GATES,
            Arch::Gru => gru::GATES,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(Arch::Rnn),
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", content = "params", rename_all = "lowercase")]
pub enum CellParams {
    Rnn(RnnParams),
    Lstm(LstmParams),
    Gru(GruParams),
}

impl CellParams {
    pub fn zeros(arch: Arch, input: usize, hidden: usize, activation: Activation) -> Self {
        match arch {
            Arch::Rnn => CellParams::Rnn(RnnParams::zeros(input, hidden, activation)),
            Arch::Lstm => CellParams::Lstm(LstmParams::zeros(input, hidden, activation)),
            Arch::Gru => CellParams::Gru(GruParams::zeros(input, hidden, activation)),
        }
    }

    /// Every weight and bias drawn from `U[-scale, scale)`.
    pub fn uniform(arch: Arch, input: usize, hidden: usize, activation: Activation, scale: f64, rng: &mut Rng) -> Self {
        match arch {
            Arch::Rnn => CellParams::Rnn(RnnParams::uniform(input, hidden, activation, scale, rng)),
            Arch::Lstm => CellParams::Lstm(LstmParams::uniform(input, hidden, activation, scale, rng)),
            Arch::Gru => CellParams::Gru(GruParams::uniform(input, hidden, activation, scale, rng)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        CellParams::zeros(self.arch(), self.input_size(), self.hidden_size(), self.activation())
    }

    pub fn arch(&self) -> Arch {
        match self {
            CellParams::Rnn(_) => Arch::Rnn,
            CellParams::Lstm(_) => Arch::Lstm,
            CellParams::Gru(_) => Arch::Gru,
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            CellParams::Rnn(p) => p.activation,
            CellParams::Lstm(p) => p.activation,
            CellParams::Gru(p) => p.activation,
        }
    }

    pub fn input_size(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.input_size(),
            CellParams::Lstm(p) => p.input_size(),
            CellParams::Gru(p) => p.input_size(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.hidden_size(),
            CellParams::Lstm(p) => p.hidden_size(),
            CellParams::Gru(p) => p.hidden_size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CellParams::Rnn(p) => p.validate(),
            CellParams::Lstm(p) => p.validate(),
            CellParams::Gru(p) => p.validate(),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            CellParams::Rnn(p) => p.tensors(),
            CellParams::Lstm(p) => p.tensors(),
            CellParams::Gru(p) => p.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            CellParams::Rnn(p) => p.tensors_mut(),
            CellParams::Lstm(p) => p.tensors_mut(),
            CellParams::Gru(p) => p.tensors_mut(),
        }
    }

    /// All-zero initial state for `batch` sequences.
    pub fn initial_state(&self, batch: usize) -> BatchState {
        let h = Matrix::zeros(batch, self.hidden_size());
        let c = matches!(self, CellParams::Lstm(_)).then(|| h.clone());
        BatchState { h, c }
    }

    /// One batched step. `factors` are keep-factor matrices `[batch × hidden]`:
    /// empty for no recurrent dropout, one for a shared mask, or one per gate
    /// for per-gate Gal masks.
    pub fn forward_batch(
        &self,
        x: &Matrix,
        state: &BatchState,
        variant: Variant,
        factors: &[Matrix],
    ) -> (BatchState, StepCache) {
        match self {
            CellParams::Rnn(p) => {
                let (s, c) = rnn::forward(p, x, state, variant, factors);
                (s, StepCache::Rnn(c))
            }
            CellParams::Lstm(p) => {
                let (s, c) = lstm::forward(p, x, state, variant, factors);
                (s, StepCache::Lstm(c))
            }
            CellParams::Gru(p) => {
                let (s, c) = gru::forward(p, x, state, variant, factors);
                (s, StepCache::Gru(c))
            }
        }
    }

    /// Reverse of [`forward_batch`](Self::forward_batch), accumulating parameter
    /// gradients into `grads` (which must be the same architecture).
    pub(crate) fn backward_batch(
        &self,
        cache: &StepCache,
        dh: &Matrix,
        dc: Option<&Matrix>,
        grads: &mut CellParams,
    ) -> Result<StepGrads> {
        match (self, cache, grads) {
            (CellParams::Rnn(p), StepCache::Rnn(c), CellParams::Rnn(g)) => Ok(rnn::backward(p, c, dh, g)),
            (CellParams::Lstm(p), StepCache::Lstm(c), CellParams::Lstm(g)) => {
                let zero;
                let dc = match dc {
                    Some(d) => d,
                    None => {
                        zero = Matrix::zeros(dh.rows(), dh.cols());
                        &zero
                    }
                };
                Ok(lstm::backward(p, c, dh, dc, g))
            }
            (CellParams::Gru(p), StepCache::Gru(c), CellParams::Gru(g)) => Ok(gru::backward(p, c, dh, g)),
            _ => Err(Error::Tape("cache or gradient architecture does not match parameters".into())),
        }
    }
}

/// Recurrent state for a batch of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchState {
    pub h: Matrix,
    /// LSTM cell vector; `None` for RNN and GRU.
    pub c: Option<Matrix>,
}

/// Forward intermediates of one step, consumed by the reverse pass.
#[derive(Debug, Clone)]
pub enum StepCache {
    Rnn(rnn::RnnCache),
    Lstm(lstm::LstmCache),
    Gru(gru::GruCache),
}

pub(crate) struct StepGrads {
    pub dx: Matrix,
    pub dh_prev: Matrix,
    pub dc_prev: Option<Matrix>,
}

/// Hidden (and LSTM cell) state of a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vector,
    pub c: Option<Vector>,
}

impl CellState {
    pub fn zeros(arch: Arch, hidden: usize) -> Self {
        CellState {
            h: Vector::zeros(hidden),
            c: (arch == Arch::Lstm).then(|| Vector::zeros(hidden)),
        }
    }

    fn to_batch(&self) -> BatchState {
        BatchState {
            h: row_matrix(&self.h),
            c: self.c.as_ref().map(|c| row_matrix(c)),
        }
    }

    fn from_batch(b: BatchState) -> Self {
        CellState {
            h: b.h.as_slice().to_vec().into(),
            c: b.c.map(|c| c.as_slice().to_vec().into()),
        }
    }
}

fn row_matrix(v: &[f64]) -> Matrix {
    Matrix::from_vec(1, v.len(), v.to_vec()).expect("row matrix")
}

#[inline]
pub(crate) fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    a.zip_map(b, |x, y| x * y)
}

/// Factor for gate `k`: the shared one when only one is supplied.
pub(crate) fn gate_factor(factors: &[Matrix], k: usize) -> &Matrix {
    if factors.len() == 1 {
        &factors[0]
    } else {
        &factors[k]
    }
}

pub(crate) fn check_shape(operand: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    check_dim(operand, expected.0, actual.0)?;
    check_dim(operand, expected.1, actual.1)
}

/// Converts per-step masks into keep-factor rows for a single sequence.
fn step_factors(spec: &DropoutSpec, masks: &[Mask], arch: Arch, width: usize, phase: Phase) -> Result<Vec<Matrix>> {
    if !spec.variant.is_recurrent() {
        return Ok(Vec::new());
    }
    let gates = arch.gate_count();
    match phase {
        Phase::Infer => Ok(vec![Matrix::from_vec(1, width, vec![spec.infer_factor(); width])?]),
        Phase::Train => {
            let allowed = masks.len() == 1 || (spec.variant == Variant::Gal && masks.len() == gates);
            if !allowed {
                return Err(Error::dim("masks (count)", 1, masks.len()));
            }
            masks
                .iter()
                .map(|m| {
                    check_dim("mask", width, m.len())?;
                    let k: Vec<f64> = m.values().iter().map(|&b| spec.train_factor(b)).collect();
                    Matrix::from_vec(1, width, k)
                })
                .collect()
        }
    }
}

fn check_step_inputs(params: &CellParams, x: &[f64], state: &CellState) -> Result<()> {
    params.validate()?;
    check_dim("x", params.input_size(), x.len())?;
    check_dim("state.h", params.hidden_size(), state.h.len())?;
    if params.arch() == Arch::Lstm {
        let c = state.c.as_ref().ok_or(Error::Empty("LSTM state requires a cell vector"))?;
        check_dim("state.c", params.hidden_size(), c.len())?;
    }
    Ok(())
}

/// One step of any cell on a single sequence.
pub fn cell_step(
    params: &CellParams,
    x: &[f64],
    state: &CellState,
    drop: &DropoutSpec,
    masks: &[Mask],
    phase: Phase,
) -> Result<CellState> {
    check_step_inputs(params, x, state)?;
    let factors = step_factors(drop, masks, params.arch(), params.hidden_size(), phase)?;
    let (next, _) = params.forward_batch(&row_matrix(x), &state.to_batch(), drop.variant, &factors);
    Ok(CellState::from_batch(next))
}

/// `h_t = f(W_h [x_t, d(h_{t-1})] + b_h)`.
pub fn rnn_step(
    params: &RnnParams,
    x: &[f64],
    state: &CellState,
    drop: &DropoutSpec,
    masks: &[Mask],
    phase: Phase,
) -> Result<CellState> {
    cell_step(&CellParams::Rnn(params.clone()), x, state, drop, masks, phase)
}

pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    state: &CellState,
    drop: &DropoutSpec,
    masks: &[Mask],
    phase: Phase,
) -> Result<CellState> {
    cell_step(&CellParams::Lstm(params.clone()), x, state, drop, masks, phase)
}

pub fn gru_step(
    params: &GruParams,
    x: &[f64],
    state: &CellState,
    drop: &DropoutSpec,
    masks: &[Mask],
    phase: Phase,
) -> Result<CellState> {
    cell_step(&CellParams::Gru(params.clone()), x, state, drop, masks, phase)
}

/// Row `token` of an embedding table.
pub fn embed(table: &Matrix, token: usize) -> Result<Vector> {
    if token >= table.rows() {
        return Err(Error::OutOfVocab {
            token,
            vocab: table.rows(),
        });
    }
    Ok(table.row(token).to_vec().into())
}

/// `W · d(h) + b` with forward dropout `d` on the hidden-to-output connection.
pub fn output_layer(
    w: &Matrix,
    b: &[f64],
    h: &[f64],
    forward_drop: &DropoutSpec,
    mask: Option<&Mask>,
    phase: Phase,
) -> Result<Vector> {
    check_dim("h", w.cols(), h.len())?;
    if forward_drop.variant == Variant::None {
        return affine(w, &[h], b);
    }
    let dropped: Vec<f64> = match phase {
        Phase::Infer => h.iter().map(|v| v * forward_drop.infer_factor()).collect(),
        Phase::Train => {
            let mask = mask.ok_or(Error::Empty("train-phase output dropout requires a mask"))?;
            check_dim("mask", h.len(), mask.len())?;
            h.iter()
                .zip(mask.values())
                .map(|(v, &bit)| v * forward_drop.train_factor(bit))
                .collect()
        }
    };
    affine(w, &[&dropped], b)
}

#[cfg(test)]
mod tests;
