//! Character-level language model on a text file, with and without
//! update dropout.
//!
//! Usage: `cargo run --release --example char_lm -- <text> [rate] [epochs] [hidden] [seed] [lr] [batch] [decay]`

use std::path::PathBuf;

use recdrop_core::optim::{train_with, DecayRule, MetricKind, TrainConfig, TrainData};
use recdrop_core::tasks::{batch_lm, load_text_corpus, Unit};
use recdrop_core::{Activation, Arch, DropoutConfig, DropoutSpec, ModelSizes, SamplingMode, Scaling, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = PathBuf::from(args.first().ok_or("missing text path")?);
    let rate: f64 = args.get(1).map_or(Ok(0.25), |s| s.parse())?;
    let epochs: usize = args.get(2).map_or(Ok(10), |s| s.parse())?;
    let hidden: usize = args.get(3).map_or(Ok(128), |s| s.parse())?;
    let seed: u64 = args.get(4).map_or(Ok(1), |s| s.parse())?;
    let lr: f64 = args.get(5).map_or(Ok(0.002), |s| s.parse())?;
    let batch: usize = args.get(6).map_or(Ok(32), |s| s.parse())?;
    let decay: DecayRule = args.get(7).map_or(Ok(DecayRule::Exp097After10), |s| s.parse())?;

    let corpus = load_text_corpus(&path, Unit::Char, None)?.with_split(0.9, 0.1)?;
    let v = corpus.vocab.len();
    let mut cfg = TrainConfig::char_lm();
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.lr = lr;
    cfg.batch = batch;
    cfg.decay_rule = decay;
    let seq = 100;
    let data = TrainData {
        train: batch_lm(corpus.train(), v, cfg.batch, seq)?,
        valid: batch_lm(corpus.valid(), v, 8, seq)?,
        test: Vec::new(),
        metric: MetricKind::Bpc,
    };
    let sizes = ModelSizes { vocab: v, embed: 32, hidden, outputs: v };
    let mut model = cfg.init_model(Arch::Lstm, sizes, Activation::Tanh);
    let drop = if rate > 0.0 {
        DropoutConfig::recurrent(DropoutSpec::new(Variant::UpdateDrop, rate, SamplingMode::PerStep, Scaling::TestScale)?)
    } else {
        DropoutConfig::none()
    };
    let start = std::time::Instant::now();
    train_with(&mut model, &data, &cfg, &drop, |r| {
        println!("{:>3} {:<6} bpc {:.4} lr {:.5} [{:.0}s]", r.epoch, r.split.name(), r.metric, r.lr, start.elapsed().as_secs_f64());
    })?;
    Ok(())
}
