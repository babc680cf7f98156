use serde::{Deserialize, Serialize};

use super::{check_shape, gate_factor, mul, BatchState, StepGrads};
use crate::dropout::Variant;
use crate::error::{check_dim, Result};
use crate::math::{sigmoid, Activation, Matrix, Rng, Vector};

/// Gate order: update `z`, reset `r`, candidate `g`.
pub const GATES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_g: Matrix,
    pub b_z: Vector,
    pub b_r: Vector,
    pub b_g: Vector,
    pub activation: Activation,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize, activation: Activation) -> Self {
        let w = Matrix::zeros(hidden, input + hidden);
        GruParams {
            w_z: w.clone(),
            w_r: w.clone(),
            w_g: w,
            b_z: Vector::zeros(hidden),
            b_r: Vector::zeros(hidden),
            b_g: Vector::zeros(hidden),
            activation,
        }
    }

    pub fn uniform(input: usize, hidden: usize, activation: Activation, scale: f64, rng: &mut Rng) -> Self {
        let k = input + hidden;
        let mut bias = || (0..hidden).map(|_| rng.uniform(-scale, scale)).collect::<Vector>();
        let (b_z, b_r, b_g) = (bias(), bias(), bias());
        GruParams {
            w_z: Matrix::uniform(hidden, k, scale, rng),
            w_r: Matrix::uniform(hidden, k, scale, rng),
            w_g: Matrix::uniform(hidden, k, scale, rng),
            b_z,
            b_r,
            b_g,
            activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_z.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols() - self.w_z.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.w_z.shape();
        if shape.1 < shape.0 {
            return Err(crate::Error::dim("w_z columns", shape.0, shape.1));
        }
        check_shape("w_r", shape, self.w_r.shape())?;
        check_shape("w_g", shape, self.w_g.shape())?;
        for (name, b) in [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_g", &self.b_g)] {
            check_dim(name, shape.0, b.len())?;
        }
        Ok(())
    }

    pub(crate) fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("gru.w_z", self.w_z.as_slice()),
            ("gru.w_r", self.w_r.as_slice()),
            ("gru.w_g", self.w_g.as_slice()),
            ("gru.b_z", &self.b_z),
            ("gru.b_r", &self.b_r),
            ("gru.b_g", &self.b_g),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("gru.w_z", self.w_z.as_mut_slice()),
            ("gru.w_r", self.w_r.as_mut_slice()),
            ("gru.w_g", self.w_g.as_mut_slice()),
            ("gru.b_z", &mut self.b_z),
            ("gru.b_r", &mut self.b_r),
            ("gru.b_g", &mut self.b_g),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct GruCache {
    /// `[x, d(h_{t-1})]` feeding z and r: one shared, or two for per-gate Gal.
    xin_zr: Vec<Matrix>,
    /// Gal factors matching `xin_zr`.
    gal_zr: Vec<Matrix>,
    gal_g: Option<Matrix>,
    xin_g: Matrix,
    hin_g: Matrix,
    h_prev: Matrix,
    z: Matrix,
    r: Matrix,
    g: Matrix,
    gd: Matrix,
    update_k: Option<Matrix>,
    moon_k: Option<Matrix>,
}

impl GruCache {
    pub fn gates(&self) -> [&Matrix; GATES] {
        [&self.z, &self.r, &self.g]
    }
}

pub(crate) fn forward(
    p: &GruParams,
    x: &Matrix,
    state: &BatchState,
    variant: Variant,
    factors: &[Matrix],
) -> (BatchState, GruCache) {
    let act = p.activation;
    let h_prev = &state.h;
    let gal = variant == Variant::Gal && !factors.is_empty();

    let (xin_zr, gal_zr): (Vec<Matrix>, Vec<Matrix>) = if gal {
        if factors.len() == 1 {
            let k = &factors[0];
            (vec![Matrix::hcat(x, &mul(h_prev, k))], vec![k.clone()])
        } else {
            factors[..2]
                .iter()
                .map(|k| (Matrix::hcat(x, &mul(h_prev, k)), k.clone()))
                .unzip()
        }
    } else {
        (vec![Matrix::hcat(x, h_prev)], Vec::new())
    };
    let gal_g = gal.then(|| gate_factor(factors, 2).clone());

    let pre = |src: &Matrix, w: &Matrix, b: &Vector| {
        let mut a = Matrix::matmul_nt(src, w);
        a.add_row_vector(b);
        a
    };
    let z = pre(&xin_zr[0], &p.w_z, &p.b_z).map(sigmoid);
    let r = pre(xin_zr.last().unwrap(), &p.w_r, &p.b_r).map(sigmoid);

    let hin_g = match &gal_g {
        Some(k) => mul(h_prev, k),
        None => h_prev.clone(),
    };
    let xin_g = Matrix::hcat(x, &mul(&r, &hin_g));
    let g = pre(&xin_g, &p.w_g, &p.b_g).map(|v| act.apply(v));

    let update_k = (variant == Variant::UpdateDrop).then(|| gate_factor(factors, 0).clone());
    let moon_k = (variant == Variant::Moon).then(|| gate_factor(factors, 0).clone());

    let gd = match &update_k {
        Some(k) => mul(&g, k),
        None => g.clone(),
    };
    let mut s = h_prev.zip_map(&z, |h, z| (1.0 - z) * h);
    s.add_assign(&mul(&z, &gd));
    let h = match &moon_k {
        Some(k) => mul(&s, k),
        None => s,
    };

    let cache = GruCache {
        xin_zr,
        gal_zr,
        gal_g,
        xin_g,
        hin_g,
        h_prev: h_prev.clone(),
        z,
        r,
        g,
        gd,
        update_k,
        moon_k,
    };
    (BatchState { h, c: None }, cache)
}

pub(crate) fn backward(p: &GruParams, cache: &GruCache, dh: &Matrix, grads: &mut GruParams) -> StepGrads {
    let act = p.activation;
    let input = p.input_size();
    let batch = dh.rows();

    let ds = match &cache.moon_k {
        Some(k) => mul(dh, k),
        None => dh.clone(),
    };
    let dz = {
        let diff = cache.gd.zip_map(&cache.h_prev, |g, h| g - h);
        mul(&ds, &diff)
    };
    let mut dh_prev = ds.zip_map(&cache.z, |d, z| d * (1.0 - z));
    let dgd = mul(&ds, &cache.z);
    let dg = match &cache.update_k {
        Some(k) => mul(&dgd, k),
        None => dgd,
    };
    let da_g = dg.zip_map(&cache.g, |d, y| d * act.derivative_from_output(y));

    Matrix::acc_tn(&mut grads.w_g, &da_g, &cache.xin_g);
    da_g.sum_rows_into(&mut grads.b_g);
    let mut dxin_g = Matrix::zeros(batch, cache.xin_g.cols());
    Matrix::acc_nn(&mut dxin_g, &da_g, &p.w_g);
    let (mut dx, drh) = dxin_g.hsplit(input);
    let dr = mul(&drh, &cache.hin_g);
    let dhin_g = mul(&drh, &cache.r);
    match &cache.gal_g {
        Some(k) => dh_prev.add_assign(&mul(&dhin_g, k)),
        None => dh_prev.add_assign(&dhin_g),
    }

    let da_z = dz.zip_map(&cache.z, |d, y| d * y * (1.0 - y));
    let da_r = dr.zip_map(&cache.r, |d, y| d * y * (1.0 - y));
    let last = cache.xin_zr.len() - 1;
    Matrix::acc_tn(&mut grads.w_z, &da_z, &cache.xin_zr[0]);
    Matrix::acc_tn(&mut grads.w_r, &da_r, &cache.xin_zr[last]);
    da_z.sum_rows_into(&mut grads.b_z);
    da_r.sum_rows_into(&mut grads.b_r);

    let mut dxin: Vec<Matrix> = cache
        .xin_zr
        .iter()
        .map(|m| Matrix::zeros(batch, m.cols()))
        .collect();
    Matrix::acc_nn(&mut dxin[0], &da_z, &p.w_z);
    Matrix::acc_nn(&mut dxin[last], &da_r, &p.w_r);
    for (idx, d) in dxin.iter().enumerate() {
        let (dxp, dhin) = d.hsplit(input);
        dx.add_assign(&dxp);
        match cache.gal_zr.get(idx) {
            Some(k) => dh_prev.add_assign(&mul(&dhin, k)),
            None => dh_prev.add_assign(&dhin),
        }
    }
    StepGrads {
        dx,
        dh_prev,
        dc_prev: None,
    }
}
