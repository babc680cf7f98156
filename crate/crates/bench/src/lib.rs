//! Fixtures shared by the criterion benchmarks in `benches/`.

use recdrop_core::tasks::{SequenceBatch, Targets};
use recdrop_core::{Activation, Arch, Matrix, Model, ModelSizes, Rng};

/// Random `[rows × cols]` matrix in `U[-1, 1)`.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    Matrix::uniform(rows, cols, 1.0, &mut Rng::new(seed))
}

/// A language-model shaped problem: `batch` rows of `seq_len` tokens.
pub struct LmFixture {
    pub model: Model,
    pub batch: SequenceBatch,
}

pub fn lm_fixture(arch: Arch, hidden: usize, batch: usize, seq_len: usize) -> LmFixture {
    let vocab = 50;
    let sizes = ModelSizes {
        vocab,
        embed: 32,
        hidden,
        outputs: vocab,
    };
    let mut rng = Rng::new(7);
    let model = Model::new(arch, sizes, Activation::Tanh, 0.1, &mut rng);
    let rows: Vec<Vec<usize>> = (0..batch)
        .map(|_| (0..=seq_len).map(|_| rng.below(vocab)).collect())
        .collect();
    let batch = SequenceBatch {
        tokens: rows.iter().map(|r| r[..seq_len].to_vec()).collect(),
        targets: Targets::NextToken(rows.iter().map(|r| r[1..].to_vec()).collect()),
        vocab_size: vocab,
    };
    LmFixture { model, batch }
}
