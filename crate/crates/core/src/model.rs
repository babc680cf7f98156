//! Embedding → recurrent cell → linear read-out, plus the checkpoint format.
//!
//! # Checkpoint layout
//!
//! A checkpoint is a single UTF-8 JSON object:
//!
//! ```json
//! {
//!   "format": "recdrop-checkpoint",
//!   "version": 1,
//!   "arch": "lstm",
//!   "sizes": { "vocab": 50, "embed": 32, "hidden": 128, "outputs": 50 },
//!   "model": {
//!     "embedding": { "rows": 50, "cols": 32, "data": [ ... ] },
//!     "cell": { "arch": "lstm", "params": { "w_i": {..}, ..., "activation": "tanh" } },
//!     "out_w": { "rows": 50, "cols": 128, "data": [ ... ] },
//!     "out_b": [ ... ]
//!   }
//! }
//! ```
//!
//! Matrices are row-major. Floats are written with round-trip precision, so
//! a save/load cycle reproduces every parameter bit-for-bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::{Arch, CellParams};
use crate::error::{check_dim, Error, Result};
use crate::math::{Activation, Matrix, Rng, Vector};

pub const CHECKPOINT_FORMAT: &str = "recdrop-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSizes {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    /// `[vocab × embed]` lookup table.
    pub embedding: Matrix,
    pub cell: CellParams,
    /// `[outputs × hidden]`.
    pub out_w: Matrix,
    pub out_b: Vector,
}

impl Model {
    /// Every parameter drawn from `U[-init_scale, init_scale)`.
    pub fn new(arch: Arch, sizes: ModelSizes, activation: Activation, init_scale: f64, rng: &mut Rng) -> Self {
        let embedding = Matrix::uniform(sizes.vocab, sizes.embed, init_scale, rng);
        let cell = CellParams::uniform(arch, sizes.embed, sizes.hidden, activation, init_scale, rng);
        let out_w = Matrix::uniform(sizes.outputs, sizes.hidden, init_scale, rng);
        let out_b = (0..sizes.outputs).map(|_| rng.uniform(-init_scale, init_scale)).collect();
        Model {
            embedding,
            cell,
            out_w,
            out_b,
        }
    }

    /// Adds `offset` to every LSTM forget-gate bias. Other cells are unchanged.
    pub fn shift_forget_bias(&mut self, offset: f64) {
        if let CellParams::Lstm(p) = &mut self.cell {
            p.b_f.iter_mut().for_each(|b| *b += offset);
        }
    }

    pub fn zeros(arch: Arch, sizes: ModelSizes, activation: Activation) -> Self {
        Model {
            embedding: Matrix::zeros(sizes.vocab, sizes.embed),
            cell: CellParams::zeros(arch, sizes.embed, sizes.hidden, activation),
            out_w: Matrix::zeros(sizes.outputs, sizes.hidden),
            out_b: Vector::zeros(sizes.outputs),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Model::zeros(self.arch(), self.sizes(), self.cell.activation())
    }

    pub fn arch(&self) -> Arch {
        self.cell.arch()
    }

    pub fn sizes(&self) -> ModelSizes {
        ModelSizes {
            vocab: self.embedding.rows(),
            embed: self.embedding.cols(),
            hidden: self.cell.hidden_size(),
            outputs: self.out_w.rows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        check_dim("cell input size vs embedding width", self.embedding.cols(), self.cell.input_size())?;
        check_dim("out_w columns vs hidden size", self.cell.hidden_size(), self.out_w.cols())?;
        check_dim("out_b", self.out_w.rows(), self.out_b.len())
    }

    /// Named flat views of every parameter tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut v = vec![("embedding", self.embedding.as_slice())];
        v.extend(self.cell.tensors());
        v.push(("out_w", self.out_w.as_slice()));
        v.push(("out_b", &self.out_b));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut v = vec![("embedding", self.embedding.as_mut_slice())];
        v.extend(self.cell.tensors_mut());
        v.push(("out_w", self.out_w.as_mut_slice()));
        v.push(("out_b", &mut self.out_b[..]));
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            arch: self.arch(),
            sizes: self.sizes(),
            model: self.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_checkpoint_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.model.validate()?;
        if ck.model.arch() != ck.arch {
            return Err(Error::Checkpoint(format!(
                "header says {} but parameters are {}",
                ck.arch,
                ck.model.arch()
            )));
        }
        if ck.model.sizes() != ck.sizes {
            return Err(Error::Checkpoint("header sizes disagree with parameter shapes".into()));
        }
        Ok(ck.model)
    }

    /// Writes atomically: a sibling temp file is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_checkpoint_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Model::from_checkpoint_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    arch: Arch,
    sizes: ModelSizes,
    model: Model,
}

/// Write-to-temp then rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
