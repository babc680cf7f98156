use super::*;
use crate::dropout::{sample_mask, SamplingMode, Scaling};
use crate::math::{activation, elementwise, sigmoid, Elementwise};

fn spec(variant: Variant, p: f64) -> DropoutSpec {
    DropoutSpec::new(variant, p, SamplingMode::PerStep, Scaling::TestScale).unwrap()
}

fn rand_vec(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn d(x: &[f64], mask: &Mask, s: &DropoutSpec, phase: Phase) -> Vec<f64> {
    crate::dropout::apply_dropout(x, mask, s.effective_rate(), phase, s.scaling)
        .unwrap()
        .into_inner()
}

/// Direct transcription of the LSTM equations with one shared mask.
fn lstm_reference(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64], s: &DropoutSpec, mask: &Mask, phase: Phase) -> (Vec<f64>, Vec<f64>) {
    let hin: Vec<f64> = if s.variant == Variant::Gal { d(h, mask, s, phase) } else { h.to_vec() };
    let gate = |w: &Matrix, b: &[f64], kind: Activation| activation(kind, &affine(w, &[x, &hin], b).unwrap()).into_inner();
    let i = gate(&p.w_i, &p.b_i, Activation::Sigmoid);
    let f = gate(&p.w_f, &p.b_f, Activation::Sigmoid);
    let o = gate(&p.w_o, &p.b_o, Activation::Sigmoid);
    let g = gate(&p.w_g, &p.b_g, p.activation);
    let g = if s.variant == Variant::UpdateDrop { d(&g, mask, s, phase) } else { g };
    let fc = elementwise(Elementwise::Mul, &f, c).unwrap();
    let ig = elementwise(Elementwise::Mul, &i, &g).unwrap();
    let mut c_new = elementwise(Elementwise::Add, &fc, &ig).unwrap().into_inner();
    if s.variant == Variant::Moon {
        c_new = d(&c_new, mask, s, phase);
    }
    let h_new = elementwise(Elementwise::Mul, &o, &activation(p.activation, &c_new)).unwrap();
    (h_new.into_inner(), c_new)
}

fn gru_reference(p: &GruParams, x: &[f64], h: &[f64], s: &DropoutSpec, mask: &Mask, phase: Phase) -> Vec<f64> {
    let hin: Vec<f64> = if s.variant == Variant::Gal { d(h, mask, s, phase) } else { h.to_vec() };
    let z = activation(Activation::Sigmoid, &affine(&p.w_z, &[x, &hin], &p.b_z).unwrap());
    let r = activation(Activation::Sigmoid, &affine(&p.w_r, &[x, &hin], &p.b_r).unwrap());
    let rh = elementwise(Elementwise::Mul, &r, &hin).unwrap();
    let g = activation(p.activation, &affine(&p.w_g, &[x, &rh], &p.b_g).unwrap()).into_inner();
    let g = if s.variant == Variant::UpdateDrop { d(&g, mask, s, phase) } else { g };
    let out: Vec<f64> = (0..h.len()).map(|k| (1.0 - z[k]) * h[k] + z[k] * g[k]).collect();
    if s.variant == Variant::Moon {
        d(&out, mask, s, phase)
    } else {
        out
    }
}

#[test]
fn rnn_zero_weights_give_zero_state() {
    let p = RnnParams::zeros(3, 4, Activation::Tanh);
    let st = CellState { h: vec![0.3, -0.2, 0.9, 1.0].into(), c: None };
    let out = rnn_step(&p, &[1.0, 2.0, 3.0], &st, &DropoutSpec::none(), &[], Phase::Train).unwrap();
    assert!(out.h.iter().all(|&v| v == 0.0));
}

#[test]
fn rnn_without_dropout_is_plain_recurrence() {
    let mut rng = Rng::new(1);
    let p = RnnParams::uniform(3, 5, Activation::Tanh, 0.5, &mut rng);
    let x = rand_vec(3, &mut rng);
    let h = rand_vec(5, &mut rng);
    let st = CellState { h: h.clone().into(), c: None };
    let out = rnn_step(&p, &x, &st, &DropoutSpec::none(), &[], Phase::Train).unwrap();
    let oracle = activation(Activation::Tanh, &affine(&p.w_h, &[&x, &h], &p.b_h).unwrap());
    assert_eq!(out.h, oracle);
}

#[test]
fn rnn_zero_mask_severs_history() {
    let mut rng = Rng::new(2);
    let p = RnnParams::uniform(2, 3, Activation::Tanh, 0.5, &mut rng);
    let x = rand_vec(2, &mut rng);
    let st = CellState { h: rand_vec(3, &mut rng).into(), c: None };
    let mask = Mask::from_bits(&[0.0; 3]);
    for v in [Variant::Moon, Variant::Gal, Variant::UpdateDrop] {
        let out = rnn_step(&p, &x, &st, &spec(v, 0.5), &[mask.clone()], Phase::Train).unwrap();
        let oracle = activation(Activation::Tanh, &affine(&p.w_h, &[&x, &[0.0; 3]], &p.b_h).unwrap());
        assert_eq!(out.h, oracle, "{v}");
    }
}

#[test]
fn lstm_zero_weights_halve_memory() {
    let p = LstmParams::zeros(2, 3, Activation::Tanh);
    let c_prev = [0.8, -0.4, 2.0];
    let st = CellState { h: Vector::zeros(3), c: Some(c_prev.into()) };
    let out = lstm_step(&p, &[1.0, -1.0], &st, &DropoutSpec::none(), &[], Phase::Train).unwrap();
    let c = out.c.unwrap();
    for k in 0..3 {
        assert_eq!(c[k], 0.5 * c_prev[k]);
        assert_eq!(out.h[k], 0.5 * (0.5 * c_prev[k]).tanh());
    }
}

#[test]
fn lstm_update_drop_zero_mask_keeps_old_memory() {
    let mut rng = Rng::new(3);
    let p = LstmParams::uniform(2, 4, Activation::Tanh, 1.0, &mut rng);
    let x = rand_vec(2, &mut rng);
    let h = rand_vec(4, &mut rng);
    let c_prev = rand_vec(4, &mut rng);
    let st = CellState { h: h.clone().into(), c: Some(c_prev.clone().into()) };
    let out = lstm_step(&p, &x, &st, &spec(Variant::UpdateDrop, 0.5), &[Mask::from_bits(&[0.0; 4])], Phase::Train).unwrap();
    let f = activation(Activation::Sigmoid, &affine(&p.w_f, &[&x, &h], &p.b_f).unwrap());
    let c = out.c.unwrap();
    for k in 0..4 {
        assert_eq!(c[k], f[k] * c_prev[k]);
    }
}

#[test]
fn lstm_moon_zero_mask_erases_memory() {
    let mut rng = Rng::new(4);
    let p = LstmParams::uniform(2, 4, Activation::Tanh, 1.0, &mut rng);
    let st = CellState { h: rand_vec(4, &mut rng).into(), c: Some(rand_vec(4, &mut rng).into()) };
    let out = lstm_step(&p, &[0.5, 0.5], &st, &spec(Variant::Moon, 0.5), &[Mask::from_bits(&[0.0; 4])], Phase::Train).unwrap();
    assert!(out.c.unwrap().iter().all(|&v| v == 0.0));
    assert!(out.h.iter().all(|&v| v == 0.0));
}

#[test]
fn gru_closed_update_gate_copies_state() {
    let mut rng = Rng::new(5);
    let mut p = GruParams::uniform(2, 3, Activation::Tanh, 1.0, &mut rng);
    p.w_z.fill(0.0);
    p.b_z = Vector::filled(3, -1e4); // sigmoid(-1e4) == 0 exactly in f64
    let h = rand_vec(3, &mut rng);
    let st = CellState { h: h.clone().into(), c: None };
    for v in [Variant::None, Variant::UpdateDrop] {
        let mask = sample_mask(3, 0.5, &mut rng).unwrap();
        let out = gru_step(&p, &[0.3, 0.1], &st, &spec(v, 0.5), &[mask], Phase::Train).unwrap();
        assert_eq!(&*out.h, &h[..]);
    }
}

#[test]
fn gru_zero_weights_halve_state() {
    let p = GruParams::zeros(2, 3, Activation::Tanh);
    let h = [1.0, -2.0, 0.5];
    let st = CellState { h: h.into(), c: None };
    let out = gru_step(&p, &[1.0, 1.0], &st, &DropoutSpec::none(), &[], Phase::Train).unwrap();
    for k in 0..3 {
        assert_eq!(out.h[k], 0.5 * h[k]);
    }
}

#[test]
fn gru_update_drop_zero_mask() {
    let mut rng = Rng::new(6);
    let p = GruParams::uniform(2, 3, Activation::Tanh, 1.0, &mut rng);
    let x = rand_vec(2, &mut rng);
    let h = rand_vec(3, &mut rng);
    let st = CellState { h: h.clone().into(), c: None };
    let out = gru_step(&p, &x, &st, &spec(Variant::UpdateDrop, 0.5), &[Mask::from_bits(&[0.0; 3])], Phase::Train).unwrap();
    let z = activation(Activation::Sigmoid, &affine(&p.w_z, &[&x, &h], &p.b_z).unwrap());
    for k in 0..3 {
        assert_eq!(out.h[k], (1.0 - z[k]) * h[k]);
    }
}

#[test]
fn steps_match_equation_transcription() {
    let mut rng = Rng::new(7);
    for variant in Variant::RECURRENT {
        for phase in [Phase::Train, Phase::Infer] {
            for scaling in [Scaling::TestScale, Scaling::TrainScale] {
                let s = DropoutSpec::new(variant, 0.4, SamplingMode::PerStep, scaling).unwrap();
                let mask = sample_mask(5, 0.4, &mut rng).unwrap();
                let x = rand_vec(3, &mut rng);
                let h = rand_vec(5, &mut rng);
                let c = rand_vec(5, &mut rng);

                let lp = LstmParams::uniform(3, 5, Activation::Tanh, 0.7, &mut rng);
                let st = CellState { h: h.clone().into(), c: Some(c.clone().into()) };
                let got = lstm_step(&lp, &x, &st, &s, &[mask.clone()], phase).unwrap();
                let (eh, ec) = lstm_reference(&lp, &x, &h, &c, &s, &mask, phase);
                for k in 0..5 {
                    assert!((got.h[k] - eh[k]).abs() < 1e-12, "lstm {variant} {phase:?}");
                    assert!((got.c.as_ref().unwrap()[k] - ec[k]).abs() < 1e-12);
                }

                let gp = GruParams::uniform(3, 5, Activation::Tanh, 0.7, &mut rng);
                let st = CellState { h: h.clone().into(), c: None };
                let got = gru_step(&gp, &x, &st, &s, &[mask.clone()], phase).unwrap();
                let eh = gru_reference(&gp, &x, &h, &s, &mask, phase);
                for k in 0..5 {
                    assert!((got.h[k] - eh[k]).abs() < 1e-12, "gru {variant} {phase:?}");
                }
            }
        }
    }
}

#[test]
fn zero_rate_matches_no_dropout_bitwise() {
    let mut rng = Rng::new(8);
    for arch in Arch::ALL {
        let p = CellParams::uniform(arch, 3, 6, Activation::Tanh, 0.5, &mut rng);
        let x = rand_vec(3, &mut rng);
        let mut st = CellState::zeros(arch, 6);
        st.h = rand_vec(6, &mut rng).into();
        if let Some(c) = st.c.as_mut() {
            *c = rand_vec(6, &mut rng).into();
        }
        let base = cell_step(&p, &x, &st, &DropoutSpec::none(), &[], Phase::Train).unwrap();
        for variant in Variant::RECURRENT {
            for scaling in [Scaling::TestScale, Scaling::TrainScale] {
                let s = DropoutSpec::new(variant, 0.0, SamplingMode::PerStep, scaling).unwrap();
                for phase in [Phase::Train, Phase::Infer] {
                    let got = cell_step(&p, &x, &st, &s, &[Mask::ones(6)], phase).unwrap();
                    assert_eq!(got, base, "{arch} {variant} {scaling} {phase:?}");
                }
            }
        }
    }
}

#[test]
fn gates_stay_in_open_unit_interval() {
    let mut rng = Rng::new(9);
    for _ in 0..50 {
        let p = LstmParams::uniform(4, 8, Activation::Tanh, 3.0, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let st = CellState::zeros(Arch::Lstm, 8);
        let (_, cache) = CellParams::Lstm(p).forward_batch(
            &Matrix::from_vec(1, 4, x).unwrap(),
            &BatchState { h: row_matrix(&st.h), c: Some(row_matrix(st.c.as_ref().unwrap())) },
            Variant::None,
            &[],
        );
        let StepCache::Lstm(cache) = cache else { unreachable!() };
        for gate in &cache.gates()[..3] {
            assert!(gate.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}

#[test]
fn saturated_gates_contrast_moon_and_update_drop() {
    // Biases of +40 push i, f, o to 1 - 4e-18, i.e. exactly 1.0 in f64.
    let hidden = 4;
    let mut p = LstmParams::zeros(1, hidden, Activation::Tanh);
    p.b_i = Vector::filled(hidden, 40.0);
    p.b_f = Vector::filled(hidden, 40.0);
    p.b_o = Vector::filled(hidden, 40.0);
    p.b_g = Vector::filled(hidden, 0.3);
    let c_prev = vec![0.7, -1.1, 0.2, 3.0];
    let st = CellState { h: Vector::zeros(hidden), c: Some(c_prev.clone().into()) };
    let mask = Mask::from_bits(&[1.0, 0.0, 1.0, 0.0]);

    let up = lstm_step(&p, &[1.0], &st, &spec(Variant::UpdateDrop, 0.5), &[mask.clone()], Phase::Train).unwrap();
    let moon = lstm_step(&p, &[1.0], &st, &spec(Variant::Moon, 0.5), &[mask.clone()], Phase::Train).unwrap();
    let g = 0.3f64.tanh();
    let up_c = up.c.unwrap();
    let moon_c = moon.c.unwrap();
    for k in 0..hidden {
        let kept = mask.values()[k] == 1.0;
        // f * c_prev survives unscaled whatever the mask.
        let expected = c_prev[k] + if kept { g } else { 0.0 };
        assert_eq!(up_c[k], expected);
        if !kept {
            assert_eq!(moon_c[k], 0.0);
        }
    }
}

#[test]
fn update_drop_inference_is_the_mask_expectation() {
    let mut rng = Rng::new(10);
    let p = LstmParams::uniform(3, 6, Activation::Tanh, 0.8, &mut rng);
    let x = rand_vec(3, &mut rng);
    let st = CellState { h: rand_vec(6, &mut rng).into(), c: Some(rand_vec(6, &mut rng).into()) };
    let s = spec(Variant::UpdateDrop, 0.25);
    let infer = lstm_step(&p, &x, &st, &s, &[], Phase::Infer).unwrap();
    let draws = 100_000;
    let mut mean = vec![0.0; 6];
    let mut mask_rng = Rng::new(11);
    for _ in 0..draws {
        let m = sample_mask(6, 0.25, &mut mask_rng).unwrap();
        let out = lstm_step(&p, &x, &st, &s, &[m], Phase::Train).unwrap();
        for (a, v) in mean.iter_mut().zip(out.c.unwrap().iter()) {
            *a += v / draws as f64;
        }
    }
    let ic = infer.c.unwrap();
    for k in 0..6 {
        let rel = (mean[k] - ic[k]).abs() / ic[k].abs().max(1e-3);
        assert!(rel < 0.01, "unit {k}: mean {} vs infer {}", mean[k], ic[k]);
    }
}

#[test]
fn gal_per_gate_masks_are_accepted() {
    let mut rng = Rng::new(12);
    let p = LstmParams::uniform(2, 3, Activation::Tanh, 0.5, &mut rng);
    let st = CellState { h: rand_vec(3, &mut rng).into(), c: Some(Vector::zeros(3)) };
    let s = spec(Variant::Gal, 0.5).with_per_gate_masks(true);
    let masks: Vec<Mask> = (0..4).map(|_| sample_mask(3, 0.5, &mut rng).unwrap()).collect();
    assert!(lstm_step(&p, &[0.1, 0.2], &st, &s, &masks, Phase::Train).is_ok());
    assert!(lstm_step(&p, &[0.1, 0.2], &st, &s, &masks[..2], Phase::Train).is_err());
}

#[test]
fn step_rejects_bad_dimensions() {
    let p = LstmParams::zeros(2, 3, Activation::Tanh);
    let st = CellState::zeros(Arch::Lstm, 3);
    let err = lstm_step(&p, &[1.0], &st, &DropoutSpec::none(), &[], Phase::Train).unwrap_err();
    assert!(err.to_string().contains("`x`"));
    let bad = CellState::zeros(Arch::Lstm, 4);
    assert!(lstm_step(&p, &[1.0, 2.0], &bad, &DropoutSpec::none(), &[], Phase::Train).is_err());
}

#[test]
fn relu_activation_is_selectable() {
    let mut p = RnnParams::zeros(1, 2, Activation::Relu);
    p.b_h = vec![-1.0, 2.0].into();
    let out = rnn_step(&p, &[0.0], &CellState::zeros(Arch::Rnn, 2), &DropoutSpec::none(), &[], Phase::Infer).unwrap();
    assert_eq!(&*out.h, &[0.0, 2.0]);
}

#[test]
fn embed_returns_rows() {
    let eye = Matrix::identity(4);
    assert_eq!(&*embed(&eye, 2).unwrap(), &[0.0, 0.0, 1.0, 0.0]);
    let mut rng = Rng::new(13);
    let t = Matrix::uniform(50, 8, 1.0, &mut rng);
    assert_eq!(&*embed(&t, 0).unwrap(), t.row(0));
    assert!(matches!(embed(&t, 50), Err(Error::OutOfVocab { token: 50, vocab: 50 })));
}

#[test]
fn output_layer_dropout() {
    let mut rng = Rng::new(14);
    let w = Matrix::uniform(5, 4, 1.0, &mut rng);
    let b = rand_vec(5, &mut rng);
    let h = rand_vec(4, &mut rng);
    let plain = affine(&w, &[&h], &b).unwrap();
    let off = DropoutSpec::forward(0.0, Scaling::TestScale).unwrap();
    assert_eq!(output_layer(&w, &b, &h, &off, Some(&Mask::ones(4)), Phase::Train).unwrap(), plain);
    assert_eq!(output_layer(&w, &b, &h, &DropoutSpec::none(), None, Phase::Train).unwrap(), plain);

    let half = DropoutSpec::forward(0.5, Scaling::TestScale).unwrap();
    let halved: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
    assert_eq!(
        output_layer(&w, &b, &h, &half, None, Phase::Infer).unwrap(),
        affine(&w, &[&halved], &b).unwrap()
    );

    let mask = sample_mask(4, 0.5, &mut rng).unwrap();
    let dropped = crate::dropout::apply_dropout(&h, &mask, 0.5, Phase::Train, Scaling::TestScale).unwrap();
    assert_eq!(
        output_layer(&w, &b, &h, &half, Some(&mask), Phase::Train).unwrap(),
        affine(&w, &[&dropped], &b).unwrap()
    );
    assert!(output_layer(&w, &b, &h[..3], &half, None, Phase::Infer).is_err());
}

#[test]
fn sigmoid_helper_matches_activation() {
    assert_eq!(sigmoid(0.3), Activation::Sigmoid.apply(0.3));
}
