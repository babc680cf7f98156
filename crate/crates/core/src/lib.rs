//! Recurrent networks (vanilla RNN, LSTM, GRU) with several recurrent
//! dropout placements, exact backpropagation through time, and the training
//! and analysis utilities around them.
//!
//! ```
//! use recdrop_core::{Arch, Activation, DropoutConfig, DropoutSpec, Model, ModelSizes, Phase, Rng};
//! use recdrop_core::{SamplingMode, Scaling, Variant};
//! use recdrop_core::tasks::{gen_temporal_order, TemporalOrderMode};
//!
//! let mut rng = Rng::new(7);
//! let sizes = ModelSizes { vocab: 4, embed: 4, hidden: 8, outputs: 4 };
//! let model = Model::new(Arch::Lstm, sizes, Activation::Tanh, 0.05, &mut rng);
//! let data = gen_temporal_order(TemporalOrderMode::Short, 8, &mut rng);
//! let batch = &data.batches(8, None)[0];
//! let spec = DropoutSpec::new(Variant::UpdateDrop, 0.5, SamplingMode::PerStep, Scaling::TestScale).unwrap();
//! let tape = recdrop_core::bptt::forward_sequence(&model, batch, &DropoutConfig::recurrent(spec), &mut rng, Phase::Train).unwrap();
//! assert!(tape.loss() > 0.0);
//! ```

pub mod bptt;
pub mod cells;
pub mod decay;
pub mod dropout;
pub mod error;
pub mod math;
pub mod model;
pub mod optim;
pub mod tasks;

pub use bptt::{DropoutConfig, Gradients};
pub use cells::{Arch, CellParams, CellState};
pub use dropout::{DropoutSpec, Mask, Phase, SamplingMode, Scaling, Variant};
pub use error::{Error, Result};
pub use math::{Activation, Matrix, Rng, Vector};
pub use model::{Model, ModelSizes};
pub use optim::{TrainConfig, TrainData};
pub use tasks::{SequenceBatch, Targets};
