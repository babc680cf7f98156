use serde::{Deserialize, Serialize};

use super::{check_shape, gate_factor, mul, BatchState, StepGrads};
use crate::dropout::Variant;
use crate::error::{check_dim, Result};
use crate::math::{sigmoid, Activation, Matrix, Rng, Vector};

/// Gate order used wherever gates are indexed: input, forget, output, update.
pub const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_g: Matrix,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_o: Vector,
    pub b_g: Vector,
    pub activation: Activation,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize, activation: Activation) -> Self {
        let w = Matrix::zeros(hidden, input + hidden);
        LstmParams {
            w_i: w.clone(),
            w_f: w.clone(),
            w_o: w.clone(),
            w_g: w,
            b_i: Vector::zeros(hidden),
            b_f: Vector::zeros(hidden),
            b_o: Vector::zeros(hidden),
            b_g: Vector::zeros(hidden),
            activation,
        }
    }

    pub fn uniform(input: usize, hidden: usize, activation: Activation, scale: f64, rng: &mut Rng) -> Self {
        let k = input + hidden;
        let mut bias = || (0..hidden).map(|_| rng.uniform(-scale, scale)).collect::<Vector>();
        let (b_i, b_f, b_o, b_g) = (bias(), bias(), bias(), bias());
        LstmParams {
            w_i: Matrix::uniform(hidden, k, scale, rng),
            w_f: Matrix::uniform(hidden, k, scale, rng),
            w_o: Matrix::uniform(hidden, k, scale, rng),
            w_g: Matrix::uniform(hidden, k, scale, rng),
            b_i,
            b_f,
            b_o,
            b_g,
            activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.w_i.shape();
        if shape.1 < shape.0 {
            return Err(crate::Error::dim("w_i columns", shape.0, shape.1));
        }
        for (name, w) in [("w_f", &self.w_f), ("w_o", &self.w_o), ("w_g", &self.w_g)] {
            check_shape(name, shape, w.shape())?;
        }
        for (name, b) in [("b_i", &self.b_i), ("b_f", &self.b_f), ("b_o", &self.b_o), ("b_g", &self.b_g)] {
            check_dim(name, shape.0, b.len())?;
        }
        Ok(())
    }

    fn weights(&self) -> [&Matrix; GATES] {
        [&self.w_i, &self.w_f, &self.w_o, &self.w_g]
    }

    fn biases(&self) -> [&Vector; GATES] {
        [&self.b_i, &self.b_f, &self.b_o, &self.b_g]
    }

    pub(crate) fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("lstm.w_i", self.w_i.as_slice()),
            ("lstm.w_f", self.w_f.as_slice()),
            ("lstm.w_o", self.w_o.as_slice()),
            ("lstm.w_g", self.w_g.as_slice()),
            ("lstm.b_i", &self.b_i),
            ("lstm.b_f", &self.b_f),
            ("lstm.b_o", &self.b_o),
            ("lstm.b_g", &self.b_g),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("lstm.w_i", self.w_i.as_mut_slice()),
            ("lstm.w_f", self.w_f.as_mut_slice()),
            ("lstm.w_o", self.w_o.as_mut_slice()),
            ("lstm.w_g", self.w_g.as_mut_slice()),
            ("lstm.b_i", &mut self.b_i),
            ("lstm.b_f", &mut self.b_f),
            ("lstm.b_o", &mut self.b_o),
            ("lstm.b_g", &mut self.b_g),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `[x, d(h_{t-1})]` per distinct hidden-input factor (1, or 4 for per-gate Gal).
    xin: Vec<Matrix>,
    gal_k: Vec<Matrix>,
    c_prev: Matrix,
    i: Matrix,
    f: Matrix,
    o: Matrix,
    g: Matrix,
    gd: Matrix,
    act_c: Matrix,
    update_k: Option<Matrix>,
    moon_k: Option<Matrix>,
}

impl LstmCache {
    pub fn gates(&self) -> [&Matrix; GATES] {
        [&self.i, &self.f, &self.o, &self.g]
    }
}

pub(crate) fn forward(
    p: &LstmParams,
    x: &Matrix,
    state: &BatchState,
    variant: Variant,
    factors: &[Matrix],
) -> (BatchState, LstmCache) {
    let act = p.activation;
    let h_prev = &state.h;
    let c_prev = state.c.as_ref().expect("LSTM state carries a cell vector");

    let (xin, gal_k): (Vec<Matrix>, Vec<Matrix>) = if variant == Variant::Gal && !factors.is_empty() {
        factors
            .iter()
            .map(|k| (Matrix::hcat(x, &mul(h_prev, k)), k.clone()))
            .unzip()
    } else {
        (vec![Matrix::hcat(x, h_prev)], Vec::new())
    };

    let weights = p.weights();
    let biases = p.biases();
    let pre = |k: usize| {
        let src = &xin[if xin.len() == 1 { 0 } else { k }];
        let mut a = Matrix::matmul_nt(src, weights[k]);
        a.add_row_vector(biases[k]);
        a
    };
    let i = pre(0).map(sigmoid);
    let f = pre(1).map(sigmoid);
    let o = pre(2).map(sigmoid);
    let g = pre(3).map(|v| act.apply(v));

    let update_k = (variant == Variant::UpdateDrop).then(|| gate_factor(factors, 0).clone());
    let moon_k = (variant == Variant::Moon).then(|| gate_factor(factors, 0).clone());

    let gd = match &update_k {
        Some(k) => mul(&g, k),
        None => g.clone(),
    };
    let s = {
        let mut s = mul(&f, c_prev);
        s.add_assign(&mul(&i, &gd));
        s
    };
    let c = match &moon_k {
        Some(k) => mul(&s, k),
        None => s,
    };
    let act_c = c.map(|v| act.apply(v));
    let h = mul(&o, &act_c);

    let cache = LstmCache {
        xin,
        gal_k,
        c_prev: c_prev.clone(),
        i,
        f,
        o,
        g,
        gd,
        act_c,
        update_k,
        moon_k,
    };
    (BatchState { h, c: Some(c) }, cache)
}

/// Reverse step. `dc_next` is the gradient flowing into `c_t` from step t+1.
pub(crate) fn backward(
    p: &LstmParams,
    cache: &LstmCache,
    dh: &Matrix,
    dc_next: &Matrix,
    grads: &mut LstmParams,
) -> StepGrads {
    let act = p.activation;
    let input = p.input_size();

    let d_o = mul(dh, &cache.act_c);
    let mut dc = dh.zip_map(&cache.o, |a, b| a * b);
    dc = dc.zip_map(&cache.act_c, |a, y| a * act.derivative_from_output(y));
    dc.add_assign(dc_next);

    let ds = match &cache.moon_k {
        Some(k) => mul(&dc, k),
        None => dc,
    };
    let df = mul(&ds, &cache.c_prev);
    let dc_prev = mul(&ds, &cache.f);
    let di = mul(&ds, &cache.gd);
    let dgd = mul(&ds, &cache.i);
    let dg = match &cache.update_k {
        Some(k) => mul(&dgd, k),
        None => dgd,
    };

    let sig_grad = |d: &Matrix, y: &Matrix| d.zip_map(y, |a, y| a * y * (1.0 - y));
    let da = [
        sig_grad(&di, &cache.i),
        sig_grad(&df, &cache.f),
        sig_grad(&d_o, &cache.o),
        dg.zip_map(&cache.g, |a, y| a * act.derivative_from_output(y)),
    ];

    let batch = dh.rows();
    let mut dxin: Vec<Matrix> = cache
        .xin
        .iter()
        .map(|m| Matrix::zeros(batch, m.cols()))
        .collect();
    let weights = p.weights();
    {
        let gw = [
            &mut grads.w_i,
            &mut grads.w_f,
            &mut grads.w_o,
            &mut grads.w_g,
        ];
        for k in 0..GATES {
            let idx = if cache.xin.len() == 1 { 0 } else { k };
            Matrix::acc_tn(gw[k], &da[k], &cache.xin[idx]);
            Matrix::acc_nn(&mut dxin[idx], &da[k], weights[k]);
        }
    }
    for (gb, d) in [
        &mut grads.b_i,
        &mut grads.b_f,
        &mut grads.b_o,
        &mut grads.b_g,
    ]
    .into_iter()
    .zip(&da)
    {
        d.sum_rows_into(gb);
    }

    let mut dx = Matrix::zeros(batch, input);
    let mut dh_prev = Matrix::zeros(batch, p.hidden_size());
    for (idx, d) in dxin.iter().enumerate() {
        let (dxp, dhin) = d.hsplit(input);
        dx.add_assign(&dxp);
        match cache.gal_k.get(idx) {
            Some(k) => dh_prev.add_assign(&mul(&dhin, k)),
            None => dh_prev.add_assign(&dhin),
        }
    }
    StepGrads {
        dx,
        dh_prev,
        dc_prev: Some(dc_prev),
    }
}
