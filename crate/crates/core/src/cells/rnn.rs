use serde::{Deserialize, Serialize};

use super::{mul, BatchState, StepGrads};
use crate::dropout::Variant;
use crate::error::{check_dim, Result};
use crate::math::{Activation, Matrix, Rng, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub w_h: Matrix,
    pub b_h: Vector,
    pub activation: Activation,
}

impl RnnParams {
    pub fn zeros(input: usize, hidden: usize, activation: Activation) -> Self {
        RnnParams {
            w_h: Matrix::zeros(hidden, input + hidden),
            b_h: Vector::zeros(hidden),
            activation,
        }
    }

    pub fn uniform(input: usize, hidden: usize, activation: Activation, scale: f64, rng: &mut Rng) -> Self {
        let b_h = (0..hidden).map(|_| rng.uniform(-scale, scale)).collect();
        RnnParams {
            w_h: Matrix::uniform(hidden, input + hidden, scale, rng),
            b_h,
            activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w_h.cols() - self.w_h.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_h.cols() < self.w_h.rows() {
            return Err(crate::Error::dim("w_h columns", self.w_h.rows(), self.w_h.cols()));
        }
        check_dim("b_h", self.w_h.rows(), self.b_h.len())
    }

    pub(crate) fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![("rnn.w_h", self.w_h.as_slice()), ("rnn.b_h", &self.b_h)]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![("rnn.w_h", self.w_h.as_mut_slice()), ("rnn.b_h", &mut self.b_h)]
    }
}

#[derive(Debug, Clone)]
pub struct RnnCache {
    xin: Matrix,
    hidden_k: Option<Matrix>,
    h: Matrix,
}

/// Every recurrent variant reduces to dropping `h_{t-1}` here: a vanilla
/// cell has no gates or separate memory to distinguish them.
pub(crate) fn forward(
    p: &RnnParams,
    x: &Matrix,
    state: &BatchState,
    variant: Variant,
    factors: &[Matrix],
) -> (BatchState, RnnCache) {
    let hidden_k = (variant.is_recurrent() && !factors.is_empty()).then(|| factors[0].clone());
    let hin = match &hidden_k {
        Some(k) => mul(&state.h, k),
        None => state.h.clone(),
    };
    let xin = Matrix::hcat(x, &hin);
    let mut a = Matrix::matmul_nt(&xin, &p.w_h);
    a.add_row_vector(&p.b_h);
    let act = p.activation;
    let h = a.map(|v| act.apply(v));
    let cache = RnnCache {
        xin,
        hidden_k,
        h: h.clone(),
    };
    (BatchState { h, c: None }, cache)
}

pub(crate) fn backward(p: &RnnParams, cache: &RnnCache, dh: &Matrix, grads: &mut RnnParams) -> StepGrads {
    let act = p.activation;
    let da = dh.zip_map(&cache.h, |d, y| d * act.derivative_from_output(y));
    Matrix::acc_tn(&mut grads.w_h, &da, &cache.xin);
    da.sum_rows_into(&mut grads.b_h);
    let mut dxin = Matrix::zeros(dh.rows(), cache.xin.cols());
    Matrix::acc_nn(&mut dxin, &da, &p.w_h);
    let (dx, dhin) = dxin.hsplit(p.input_size());
    let dh_prev = match &cache.hidden_k {
        Some(k) => mul(&dhin, k),
        None => dhin,
    };
    StepGrads {
        dx,
        dh_prev,
        dc_prev: None,
    }
}
