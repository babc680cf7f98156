//! Trains an LSTM on the Temporal Order task and prints the run log.
//!
//! Usage: `cargo run --release --example temporal_order -- [short|medium] [variant] [mode] [epochs] [seed] [hidden]`

use recdrop_core::optim::{train_with, MetricKind, TrainConfig, TrainData};
use recdrop_core::tasks::{gen_temporal_order, TemporalOrderMode, TEMPORAL_ORDER_CLASSES, TEMPORAL_ORDER_VOCAB};
use recdrop_core::{Activation, Arch, DropoutConfig, DropoutSpec, ModelSizes, Rng, SamplingMode, Scaling, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode: TemporalOrderMode = args.first().map_or("short", String::as_str).parse()?;
    let variant: Variant = args.get(1).map_or("update-drop", String::as_str).parse()?;
    let sampling: SamplingMode = args.get(2).map_or("per-step", String::as_str).parse()?;
    let epochs: usize = args.get(3).map_or(Ok(30), |s| s.parse())?;
    let seed: u64 = args.get(4).map_or(Ok(1), |s| s.parse())?;
    let hidden: usize = args.get(5).map_or(Ok(64), |s| s.parse())?;

    let mut data_rng = Rng::stream(seed, recdrop_core::math::rng::streams::DATA);
    let train = gen_temporal_order(mode, 6400, &mut data_rng);
    let test = gen_temporal_order(mode, 10_000, &mut data_rng);
    let mut cfg = TrainConfig::temporal_order();
    cfg.epochs = epochs;
    cfg.seed = seed;
    let data = TrainData {
        train: train.batches(cfg.batch, None),
        valid: test.batches(500, None),
        test: Vec::new(),
        metric: MetricKind::Accuracy,
    };
    let sizes = ModelSizes {
        vocab: TEMPORAL_ORDER_VOCAB,
        embed: TEMPORAL_ORDER_VOCAB,
        hidden,
        outputs: TEMPORAL_ORDER_CLASSES,
    };
    let mut model = cfg.init_model(Arch::Lstm, sizes, Activation::Tanh);
    let spec = if variant == Variant::None {
        DropoutSpec::none()
    } else {
        DropoutSpec::new(variant, 0.5, sampling, Scaling::TestScale)?
    };
    let start = std::time::Instant::now();
    train_with(&mut model, &data, &cfg, &DropoutConfig::recurrent(spec), |r| {
        println!("{:>4} {:<6} loss {:.4} metric {:.4} lr {} [{:.1}s]", r.epoch, r.split.name(), r.loss, r.metric, r.lr, start.elapsed().as_secs_f64());
    })?;
    Ok(())
}
