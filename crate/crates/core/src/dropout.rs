//! Bernoulli masks and the two dropout scaling conventions.
//!
//! Throughout the crate `rate` is the probability of *dropping* a unit; a
//! mask entry is 1 with probability `1 - rate`.
//!
//! Dropout is always realised as an elementwise multiplier ("keep factor")
//! so forward and backward passes share one code path:
//!
//! | scaling      | train phase        | infer phase |
//! |--------------|--------------------|-------------|
//! | `TestScale`  | `mask`             | `1 - rate`  |
//! | `TrainScale` | `mask / (1 - rate)`| `1`         |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::math::{Matrix, Rng, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SamplingMode {
    #[default]
    PerStep,
    PerSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Scaling {
    /// Multiply by the keep probability at inference.
    #[default]
    TestScale,
    /// Divide by the keep probability during training (inverted dropout).
    TrainScale,
}

/// Where the dropout function sits in a recurrent cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    None,
    /// Drop the cell state itself (LSTM `c_t`, GRU `h_t`).
    Moon,
    /// Drop `h_{t-1}` wherever it feeds a gate or the candidate.
    Gal,
    /// Drop the candidate update vector `g_t`.
    UpdateDrop,
    /// Plain dropout on a non-recurrent connection.
    Forward,
}

impl Variant {
    pub const RECURRENT: [Variant; 4] = [
        Variant::None,
        Variant::Moon,
        Variant::Gal,
        Variant::UpdateDrop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::Moon => "moon",
            Variant::Gal => "gal",
            Variant::UpdateDrop => "update-drop",
            Variant::Forward => "forward",
        }
    }

    /// True when the variant touches a recurrent connection.
    pub fn is_recurrent(self) -> bool {
        matches!(self, Variant::Moon | Variant::Gal | Variant::UpdateDrop)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Variant::None),
            "moon" => Ok(Variant::Moon),
            "gal" => Ok(Variant::Gal),
            "update-drop" | "update" => Ok(Variant::UpdateDrop),
            "forward" => Ok(Variant::Forward),
            other => Err(Error::Config(format!("unknown dropout variant `{other}`"))),
        }
    }
}

impl SamplingMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::PerStep => "per-step",
            SamplingMode::PerSequence => "per-sequence",
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-step" | "step" => Ok(SamplingMode::PerStep),
            "per-sequence" | "sequence" => Ok(SamplingMode::PerSequence),
            other => Err(Error::Config(format!("unknown sampling mode `{other}`"))),
        }
    }
}

impl Scaling {
    pub fn name(self) -> &'static str {
        match self {
            Scaling::TestScale => "test-scale",
            Scaling::TrainScale => "train-scale",
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test-scale" | "test" => Ok(Scaling::TestScale),
            "train-scale" | "train" => Ok(Scaling::TrainScale),
            other => Err(Error::Config(format!("unknown scaling `{other}`"))),
        }
    }
}

/// Complete description of one dropout site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    rate: f64,
    pub mode: SamplingMode,
    pub scaling: Scaling,
    pub variant: Variant,
    /// Gal variant only: draw an independent mask for every gate instead of
    /// sharing one mask across all of them.
    pub per_gate_masks: bool,
}

impl Default for DropoutSpec {
    fn default() -> Self {
        DropoutSpec::none()
    }
}

impl DropoutSpec {
    pub fn new(variant: Variant, rate: f64, mode: SamplingMode, scaling: Scaling) -> Result<Self> {
        validate_rate(rate)?;
        Ok(DropoutSpec {
            rate,
            mode,
            scaling,
            variant,
            per_gate_masks: false,
        })
    }

    pub fn none() -> Self {
        DropoutSpec {
            rate: 0.0,
            mode: SamplingMode::PerStep,
            scaling: Scaling::TestScale,
            variant: Variant::None,
            per_gate_masks: false,
        }
    }

    /// Forward (non-recurrent) dropout with per-step masks.
    pub fn forward(rate: f64, scaling: Scaling) -> Result<Self> {
        DropoutSpec::new(Variant::Forward, rate, SamplingMode::PerStep, scaling)
    }

    pub fn with_per_gate_masks(mut self, on: bool) -> Self {
        self.per_gate_masks = on;
        self
    }

    /// Configured drop rate; meaningless when the variant is `None`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Drop rate actually in force: 0 for `Variant::None`.
    pub fn effective_rate(&self) -> f64 {
        if self.variant == Variant::None {
            0.0
        } else {
            self.rate
        }
    }

    pub fn keep_prob(&self) -> f64 {
        1.0 - self.effective_rate()
    }

    /// Keep factor applied to every unit in the inference phase.
    pub fn infer_factor(&self) -> f64 {
        match self.scaling {
            Scaling::TestScale => self.keep_prob(),
            Scaling::TrainScale => 1.0,
        }
    }

    /// Keep factor for a unit whose mask entry is `bit` in the train phase.
    pub fn train_factor(&self, bit: f64) -> f64 {
        match self.scaling {
            Scaling::TestScale => bit,
            Scaling::TrainScale => bit / self.keep_prob(),
        }
    }
}

pub(crate) fn validate_rate(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Rate(p))
    }
}

/// When a mask was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskOrigin {
    Step(usize),
    Sequence,
}

/// Binary dropout mask; every entry is exactly 0.0 or 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    values: Vector,
    pub born_at: MaskOrigin,
}

impl Mask {
    pub fn ones(len: usize) -> Self {
        Mask {
            values: Vector::filled(len, 1.0),
            born_at: MaskOrigin::Sequence,
        }
    }

    /// Builds a mask from explicit bits; any nonzero entry counts as kept.
    pub fn from_bits(bits: &[f64]) -> Self {
        Mask {
            values: bits.iter().map(|&b| if b != 0.0 { 1.0 } else { 0.0 }).collect(),
            born_at: MaskOrigin::Sequence,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1.0).count()
    }
}

/// Draws `len` independent Bernoulli(1 - p) entries.
pub fn sample_mask(len: usize, p: f64, rng: &mut Rng) -> Result<Mask> {
    validate_rate(p)?;
    let keep = 1.0 - p;
    let values = (0..len)
        .map(|_| if rng.bernoulli(keep) { 1.0 } else { 0.0 })
        .collect();
    Ok(Mask {
        values,
        born_at: MaskOrigin::Sequence,
    })
}

/// Keep factors `k` such that the dropout output equals `k * x`.
pub fn keep_factors(mask: Option<&Mask>, len: usize, p: f64, phase: Phase, scaling: Scaling) -> Result<Vector> {
    validate_rate(p)?;
    let spec = DropoutSpec::new(Variant::Forward, p, SamplingMode::PerStep, scaling)?;
    match phase {
        Phase::Infer => Ok(Vector::filled(len, spec.infer_factor())),
        Phase::Train => {
            let mask = mask.ok_or(Error::Empty("train-phase dropout requires a mask"))?;
            check_dim("mask", len, mask.len())?;
            Ok(mask.values().iter().map(|&b| spec.train_factor(b)).collect())
        }
    }
}

/// Applies dropout with drop rate `p` to `x`.
///
/// The mask is only consulted in the train phase.
pub fn apply_dropout(x: &[f64], mask: &Mask, p: f64, phase: Phase, scaling: Scaling) -> Result<Vector> {
    check_dim("mask", x.len(), mask.len())?;
    let k = keep_factors(Some(mask), x.len(), p, phase, scaling)?;
    Ok(x.iter().zip(k.iter()).map(|(a, b)| a * b).collect())
}

/// Masks for one sequence of `seq_len` steps.
///
/// Per-sequence sampling returns the same mask at every step; per-step
/// sampling draws `seq_len` independent masks. `Variant::None` yields
/// all-ones masks without touching the generator.
pub fn mask_plan(spec: &DropoutSpec, seq_len: usize, width: usize, rng: &mut Rng) -> Result<Vec<Mask>> {
    if seq_len == 0 {
        return Err(Error::Empty("mask plan needs at least one step"));
    }
    if spec.variant == Variant::None {
        return Ok(vec![Mask::ones(width); seq_len]);
    }
    let p = spec.rate();
    match spec.mode {
        SamplingMode::PerSequence => {
            let mask = sample_mask(width, p, rng)?;
            Ok(vec![mask; seq_len])
        }
        SamplingMode::PerStep => (0..seq_len)
            .map(|t| {
                let mut m = sample_mask(width, p, rng)?;
                m.born_at = MaskOrigin::Step(t);
                Ok(m)
            })
            .collect(),
    }
}

/// Per-gate mask plans for the Gal variant: `result[gate][step]`.
///
/// With `per_gate_masks` off, every gate receives the same plan.
pub fn gate_mask_plan(
    spec: &DropoutSpec,
    gates: usize,
    seq_len: usize,
    width: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<Mask>>> {
    if spec.per_gate_masks {
        (0..gates).map(|_| mask_plan(spec, seq_len, width, rng)).collect()
    } else {
        let plan = mask_plan(spec, seq_len, width, rng)?;
        Ok(vec![plan; gates])
    }
}

/// Keep-factor matrix `[batch × width]` with an independent mask per row.
pub(crate) fn sample_factor_matrix(
    spec: &DropoutSpec,
    batch: usize,
    width: usize,
    rng: &mut Rng,
) -> Matrix {
    let keep = spec.keep_prob();
    let mut m = Matrix::zeros(batch, width);
    for v in m.as_mut_slice() {
        let bit = if rng.bernoulli(keep) { 1.0 } else { 0.0 };
        *v = spec.train_factor(bit);
    }
    m
}
