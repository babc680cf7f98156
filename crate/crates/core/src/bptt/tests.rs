use super::*;
use crate::cells::Arch;
use crate::dropout::Scaling;
use crate::math::Activation;
use crate::model::ModelSizes;
use crate::math::Rng;
use proptest::prelude::*;

const VARIANTS: [Variant; 4] = [Variant::None, Variant::Moon, Variant::Gal, Variant::UpdateDrop];
const MODES: [SamplingMode; 2] = [SamplingMode::PerStep, SamplingMode::PerSequence];

fn sizes(hidden: usize) -> ModelSizes {
    ModelSizes {
        vocab: 6,
        embed: 5,
        hidden,
        outputs: 6,
    }
}

fn lm_batch(batch: usize, len: usize, vocab: usize, rng: &mut Rng) -> SequenceBatch {
    let stream: Vec<Vec<usize>> = (0..batch).map(|_| (0..=len).map(|_| rng.below(vocab)).collect()).collect();
    SequenceBatch {
        tokens: stream.iter().map(|r| r[..len].to_vec()).collect(),
        targets: Targets::NextToken(stream.iter().map(|r| r[1..].to_vec()).collect()),
        vocab_size: vocab,
    }
}

fn class_batch(batch: usize, len: usize, vocab: usize, classes: usize, rng: &mut Rng) -> SequenceBatch {
    SequenceBatch {
        tokens: (0..batch).map(|_| (0..len).map(|_| rng.below(vocab)).collect()).collect(),
        targets: Targets::Class((0..batch).map(|_| rng.below(classes)).collect()),
        vocab_size: vocab,
    }
}

fn recurrent(variant: Variant, p: f64, mode: SamplingMode, scaling: Scaling) -> DropoutConfig {
    DropoutConfig::recurrent(DropoutSpec::new(variant, p, mode, scaling).unwrap())
}

fn assert_same_grads(a: &Gradients, b: &Gradients) {
    for ((name, x), (_, y)) in a.tensors().iter().zip(b.tensors()) {
        assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), "{name}");
    }
}

#[test]
fn uniform_logits_give_log_vocab() {
    for arch in Arch::ALL {
        let m = Model::zeros(arch, sizes(4), Activation::Tanh);
        let b = lm_batch(3, 5, 6, &mut Rng::new(1));
        let tape = forward_sequence(&m, &b, &DropoutConfig::none(), &mut Rng::new(0), Phase::Infer).unwrap();
        assert!((tape.loss() - 6f64.ln()).abs() < 1e-12);
        assert_eq!(tape.predictions(), 15);
    }
}

#[test]
fn single_step_cross_entropy_by_hand() {
    // Vanilla RNN, embed 1, hidden 1, two outputs.
    let mut m = Model::zeros(
        Arch::Rnn,
        ModelSizes {
            vocab: 2,
            embed: 1,
            hidden: 1,
            outputs: 2,
        },
        Activation::Tanh,
    );
    m.embedding.set(1, 0, 0.7);
    {
        let crate::cells::CellParams::Rnn(p) = &mut m.cell else { unreachable!() };
        p.w_h.set(0, 0, 1.3);
        p.w_h.set(0, 1, -0.4);
        p.b_h[0] = 0.1;
    }
    m.out_w.set(0, 0, 2.0);
    m.out_w.set(1, 0, -1.0);
    m.out_b[0] = 0.05;
    m.out_b[1] = 0.2;
    let b = SequenceBatch {
        tokens: vec![vec![1]],
        targets: Targets::NextToken(vec![vec![1]]),
        vocab_size: 2,
    };
    let h = (1.3f64 * 0.7 + 0.1).tanh();
    let z0 = 2.0 * h + 0.05;
    let z1 = -h + 0.2;
    let want = -(z1.exp() / (z0.exp() + z1.exp())).ln();
    let tape = forward_sequence(&m, &b, &DropoutConfig::none(), &mut Rng::new(0), Phase::Train).unwrap();
    assert!((tape.loss() - want).abs() < 1e-12);
}

#[test]
fn inference_is_deterministic() {
    let mut rng = Rng::new(4);
    let m = Model::new(Arch::Lstm, sizes(8), Activation::Tanh, 0.3, &mut rng);
    let b = lm_batch(2, 7, 6, &mut rng);
    let drop = recurrent(Variant::UpdateDrop, 0.5, SamplingMode::PerStep, Scaling::TestScale);
    let a = forward_sequence(&m, &b, &drop, &mut Rng::new(1), Phase::Infer).unwrap().loss();
    let c = forward_sequence(&m, &b, &drop, &mut Rng::new(2), Phase::Infer).unwrap().loss();
    assert_eq!(a.to_bits(), c.to_bits());
}

#[test]
fn replaying_with_same_masks_reproduces_loss() {
    let mut rng = Rng::new(5);
    let m = Model::new(Arch::Gru, sizes(8), Activation::Tanh, 0.3, &mut rng);
    let b = lm_batch(3, 9, 6, &mut rng);
    let drop = recurrent(Variant::Gal, 0.4, SamplingMode::PerStep, Scaling::TrainScale);
    let a = forward_sequence(&m, &b, &drop, &mut Rng::new(9), Phase::Train).unwrap().loss();
    let c = forward_sequence(&m, &b, &drop, &mut Rng::new(9), Phase::Train).unwrap().loss();
    assert_eq!(a.to_bits(), c.to_bits());
}

#[test]
fn rejects_empty_and_out_of_vocab() {
    let m = Model::zeros(Arch::Rnn, sizes(3), Activation::Tanh);
    let empty = SequenceBatch {
        tokens: vec![],
        targets: Targets::Class(vec![]),
        vocab_size: 6,
    };
    assert!(forward_sequence(&m, &empty, &DropoutConfig::none(), &mut Rng::new(0), Phase::Train).is_err());
    let oov = SequenceBatch {
        tokens: vec![vec![0, 9]],
        targets: Targets::Class(vec![0]),
        vocab_size: 6,
    };
    assert!(matches!(
        forward_sequence(&m, &oov, &DropoutConfig::none(), &mut Rng::new(0), Phase::Train),
        Err(Error::OutOfVocab { .. })
    ));
}

#[test]
fn backward_rejects_tape_without_predictions() {
    let m = Model::zeros(Arch::Lstm, sizes(3), Activation::Tanh);
    let b = SequenceBatch {
        tokens: vec![vec![0, 1]],
        targets: Targets::None,
        vocab_size: 6,
    };
    let tape = forward_sequence(&m, &b, &DropoutConfig::none(), &mut Rng::new(0), Phase::Train).unwrap();
    assert!(matches!(backward_sequence(tape), Err(Error::Tape(_))));
}

#[test]
fn unused_tokens_get_zero_embedding_gradient() {
    for arch in Arch::ALL {
        let m = Model::zeros(arch, sizes(4), Activation::Tanh);
        let b = SequenceBatch {
            tokens: vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]],
            targets: Targets::NextToken(vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]]),
            vocab_size: 6,
        };
        let tape = forward_sequence(&m, &b, &DropoutConfig::none(), &mut Rng::new(0), Phase::Train).unwrap();
        let g = backward_sequence(tape).unwrap();
        for tok in 2..6 {
            assert!(g.params.embedding.row(tok).iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn scaled_loss_scales_gradients() {
    let mut rng = Rng::new(6);
    let m = Model::new(Arch::Lstm, sizes(6), Activation::Tanh, 0.3, &mut rng);
    let b = lm_batch(2, 5, 6, &mut rng);
    let drop = recurrent(Variant::UpdateDrop, 0.5, SamplingMode::PerStep, Scaling::TestScale);
    let g1 = backward_sequence(forward_sequence(&m, &b, &drop, &mut Rng::new(3), Phase::Train).unwrap()).unwrap();
    let g2 = backward_scaled(forward_sequence(&m, &b, &drop, &mut Rng::new(3), Phase::Train).unwrap(), 2.0).unwrap();
    for ((_, a), (_, c)) in g1.tensors().iter().zip(g2.tensors()) {
        for (a, c) in a.iter().zip(c) {
            assert_eq!(2.0 * a, *c);
        }
    }
}

#[test]
fn same_seed_gives_bit_identical_gradients() {
    for mode in MODES {
        let mut rng = Rng::new(8);
        let m = Model::new(Arch::Gru, sizes(6), Activation::Tanh, 0.3, &mut rng);
        let b = lm_batch(3, 6, 6, &mut rng);
        let drop = recurrent(Variant::Moon, 0.3, mode, Scaling::TrainScale);
        let g = |seed| backward_sequence(forward_sequence(&m, &b, &drop, &mut Rng::new(seed), Phase::Train).unwrap()).unwrap();
        assert_same_grads(&g(11), &g(11));
    }
}

#[test]
fn full_window_truncation_equals_full_unroll() {
    for arch in Arch::ALL {
        for mode in MODES {
            let mut rng = Rng::new(12);
            let m = Model::new(arch, sizes(5), Activation::Tanh, 0.3, &mut rng);
            let drop = recurrent(Variant::UpdateDrop, 0.5, mode, Scaling::TestScale);
            for b in [lm_batch(3, 8, 6, &mut rng), class_batch(3, 8, 6, 6, &mut rng)] {
                let full = backward_sequence(forward_sequence(&m, &b, &drop, &mut Rng::new(2), Phase::Train).unwrap()).unwrap();
                for window in [8, 20] {
                    let (_, g, _) = truncated_gradients(&m, &b, &drop, &mut Rng::new(2), window, None).unwrap();
                    assert_same_grads(&full, &g);
                }
            }
        }
    }
}

#[test]
fn truncated_windows_see_the_same_forward_pass() {
    for mode in MODES {
        let mut rng = Rng::new(13);
        let m = Model::new(Arch::Lstm, sizes(5), Activation::Tanh, 0.3, &mut rng);
        let drop = recurrent(Variant::Gal, 0.5, mode, Scaling::TestScale);
        for b in [lm_batch(2, 10, 6, &mut rng), class_batch(2, 10, 6, 6, &mut rng)] {
            let full = forward_sequence(&m, &b, &drop, &mut Rng::new(4), Phase::Train).unwrap().loss();
            let (loss, g, carry) = truncated_gradients(&m, &b, &drop, &mut Rng::new(4), 3, None).unwrap();
            assert!((loss - full).abs() < 1e-12, "{loss} vs {full}");
            assert!(g.is_finite());
            assert_eq!(carry.state.h.rows(), 2);
            assert_eq!(carry.sequence_factors.is_some(), mode == SamplingMode::PerSequence);
        }
    }
}

#[test]
fn per_sequence_masks_persist_through_carry() {
    let mut rng = Rng::new(14);
    let m = Model::new(Arch::Lstm, sizes(5), Activation::Tanh, 0.3, &mut rng);
    let drop = recurrent(Variant::UpdateDrop, 0.5, SamplingMode::PerSequence, Scaling::TestScale);
    let b = lm_batch(2, 4, 6, &mut rng);
    let first = forward_sequence(&m, &b, &drop, &mut Rng::new(1), Phase::Train).unwrap().carry();
    let second = forward_with_carry(&m, &b, &drop, &mut Rng::new(99), Phase::Train, Some(first.clone()))
        .unwrap()
        .carry();
    assert_eq!(first.sequence_factors, second.sequence_factors);
}

#[test]
fn central_difference_self_test() {
    let n = central_difference(|x| Ok::<_, Error>(vec![x * x]), 3.0, 1e-5).unwrap();
    assert!((n - 6.0).abs() < 1e-8);
    assert!(relative_error(6.0, n) < 1e-8);
}

#[test]
fn clip_examples() {
    let m = Model::zeros(Arch::Rnn, sizes(2), Activation::Tanh);
    let mut g = Gradients::zeros_like(&m);
    let n = g.params.num_params() as f64;
    // Every entry equal to 20/sqrt(n) gives norm 20.
    let v = 20.0 / n.sqrt();
    for (_, t) in g.params.tensors_mut() {
        t.fill(v);
    }
    let halved = clip_gradients(g.clone(), 10.0);
    for (_, t) in halved.tensors() {
        for x in t {
            assert!((x - v / 2.0).abs() < 1e-15);
        }
    }
    assert!((halved.norm() - 10.0).abs() < 1e-12);
    let mut small = g.clone();
    small.scale(0.25);
    let kept = clip_gradients(small.clone(), 10.0);
    assert_eq!(kept, small);
    assert!((kept.norm() - 5.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn clipped_norm_is_min_of_norm_and_threshold(scale in 0.01f64..100.0, threshold in 0.1f64..50.0, seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let m = Model::new(Arch::Gru, sizes(3), Activation::Tanh, 1.0, &mut rng);
        let mut g = Gradients { params: m };
        g.scale(scale);
        let n = g.norm();
        let c = clip_gradients(g, threshold);
        prop_assert!((c.norm() - n.min(threshold)).abs() <= 1e-12 * n.max(1.0));
    }
}

fn check(arch: Arch, variant: Variant, mode: SamplingMode, scaling: Scaling, per_gate: bool, seed: u64) -> GradCheckReport {
    let (model, batch) = gradcheck_problem(arch, Activation::Tanh, seed);
    let spec = DropoutSpec::new(variant, 0.5, mode, scaling).unwrap().with_per_gate_masks(per_gate);
    grad_check(&model, &batch, &DropoutConfig::recurrent(spec), seed, GRADCHECK_EPS, 240).unwrap()
}

#[test]
fn gradients_match_finite_differences_for_every_combination() {
    let mut worst: f64 = 0.0;
    for arch in Arch::ALL {
        for variant in VARIANTS {
            for mode in MODES {
                for scaling in [Scaling::TestScale, Scaling::TrainScale] {
                    let r = check(arch, variant, mode, scaling, false, 21);
                    assert!(r.rows.len() >= 200, "only {} coordinates", r.rows.len());
                    assert!(
                        r.passed(GradCheckReport::DEFAULT_TOLERANCE),
                        "{arch}/{variant}/{mode}/{scaling}: {:e}",
                        r.max_relative_error
                    );
                    worst = worst.max(r.max_relative_error);
                }
            }
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn gal_per_gate_masks_pass_grad_check() {
    for arch in Arch::ALL {
        for mode in MODES {
            let r = check(arch, Variant::Gal, mode, Scaling::TestScale, true, 22);
            assert!(r.passed(1e-4), "{arch}/{mode}: {:e}", r.max_relative_error);
        }
    }
}

#[test]
fn forward_dropout_sites_pass_grad_check() {
    let mut rng = Rng::new(23);
    let model = Model::new(Arch::Lstm, sizes(16), Activation::Tanh, 0.5, &mut rng);
    let batch = class_batch(4, 12, 6, 6, &mut rng);
    let drop = DropoutConfig {
        recurrent: DropoutSpec::new(Variant::UpdateDrop, 0.25, SamplingMode::PerStep, Scaling::TrainScale).unwrap(),
        input: DropoutSpec::forward(0.3, Scaling::TrainScale).unwrap(),
        output: DropoutSpec::forward(0.2, Scaling::TestScale).unwrap(),
    };
    let r = grad_check(&model, &batch, &drop, 5, 1e-5, 240).unwrap();
    assert!(r.passed(1e-4), "{:e}", r.max_relative_error);
    let csv = r.to_csv();
    assert!(csv.starts_with("coordinate,analytic,numeric,relative_error\n"));
    assert_eq!(csv.lines().count(), r.rows.len() + 1);
}

#[test]
fn relu_cells_pass_grad_check() {
    let mut rng = Rng::new(24);
    for arch in Arch::ALL {
        let model = Model::new(arch, sizes(16), Activation::Relu, 0.5, &mut rng);
        let batch = lm_batch(4, 12, 6, &mut rng);
        let r = grad_check(&model, &batch, &DropoutConfig::none(), 6, 1e-5, 240).unwrap();
        assert!(r.passed(1e-4), "{arch}: {:e}", r.max_relative_error);
    }
}

