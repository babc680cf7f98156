//! Inference-time memory decay of an LSTM with all gates fixed at 1.
//!
//! Here `p` is the keep probability. Dropping the cell state multiplies the
//! whole memory by `p` at every step, so the initial state's weight decays as
//! `p^{t+1}`. Dropping only the update vectors leaves the accumulated memory
//! alone and the weight of `h_0` stays at `p`.
//!
//! The simulation swaps `tanh` for the identity so the linear closed forms
//! hold exactly; it is an analysis device, not a model of training.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dropout::DropoutSpec;
use crate::error::{check_dim, Error, Result};
use crate::math::{elementwise, Elementwise, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Dropout on the state itself (`h_t = (h_{t-1} + g_t)·p`).
    #[serde(rename = "hidden-drop")]
    HiddenDrop,
    /// Dropout on the update vector only.
    #[serde(rename = "update-drop")]
    UpdateDrop,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::HiddenDrop, Scheme::UpdateDrop];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::HiddenDrop => "hidden-drop",
            Scheme::UpdateDrop => "update-drop",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hidden-drop" => Ok(Scheme::HiddenDrop),
            "update-drop" => Ok(Scheme::UpdateDrop),
            other => Err(Error::Config(format!("unknown decay scheme `{other}`"))),
        }
    }
}

/// Keep probability for a dropout configuration (`1 − rate`).
pub fn keep_prob(spec: &DropoutSpec) -> f64 {
    1.0 - spec.rate()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayScenario {
    pub keep_prob: f64,
    pub h0: Vector,
    /// `g_0 ..= g_t`.
    pub updates: Vec<Vector>,
    pub scheme: Scheme,
}

impl DecayScenario {
    pub fn validate(&self) -> Result<()> {
        check_keep(self.keep_prob)?;
        if self.updates.is_empty() {
            return Err(Error::Empty("scenario needs at least one update vector"));
        }
        for g in &self.updates {
            check_dim("update vector", self.h0.len(), g.len())?;
        }
        Ok(())
    }

    /// Index of the last update.
    pub fn t(&self) -> usize {
        self.updates.len() - 1
    }
}

fn check_keep(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("keep probability must lie in (0, 1], got {p}")))
    }
}

/// Weight of `h_0` in `h_t`.
pub fn h0_coefficient(scheme: Scheme, p: f64, t: usize) -> f64 {
    match scheme {
        Scheme::HiddenDrop => p.powi(t as i32 + 1),
        Scheme::UpdateDrop => p,
    }
}

/// `h_t` from the summed expansion of the recurrence.
///
/// Hidden-drop: `p^{t+1}·h_0 + Σ_i p^{t−i+1}·g_i`.
/// Update-drop: `p·h_0 + p·Σ_i g_i`.
pub fn closed_form(s: &DecayScenario) -> Result<Vector> {
    s.validate()?;
    let p = s.keep_prob;
    let t = s.t();
    let mut h: Vec<f64> = s.h0.iter().map(|v| h0_coefficient(s.scheme, p, t) * v).collect();
    for (i, g) in s.updates.iter().enumerate() {
        let w = match s.scheme {
            Scheme::HiddenDrop => p.powi((t - i + 1) as i32),
            Scheme::UpdateDrop => p,
        };
        for (h, g) in h.iter_mut().zip(g.iter()) {
            *h += w * g;
        }
    }
    Ok(Vector::from(h))
}

/// Steps an LSTM whose input and forget gates are pinned to 1 and whose
/// output path is the identity, with inference-phase dropout scaling by `p`.
///
/// Hidden-drop scales the new cell state: `c_t = (f·c_{t−1} + i·g_t)·p`.
/// Update-drop scales only the update: `c_t = f·c_{t−1} + i·(g_t·p)`.
/// Under update-drop the initial state enters the cell as the first update,
/// so it is scaled once like every other update.
pub fn simulate_forced_gates(s: &DecayScenario) -> Result<Vector> {
    s.validate()?;
    let width = s.h0.len();
    let ones = vec![1.0; width];
    let keep = vec![s.keep_prob; width];
    let step = |c: &[f64], g: &[f64]| -> Result<Vec<f64>> {
        let f_c = elementwise(Elementwise::Mul, &ones, c)?;
        match s.scheme {
            Scheme::HiddenDrop => {
                let i_g = elementwise(Elementwise::Mul, &ones, g)?;
                Ok(elementwise(Elementwise::Mul, &elementwise(Elementwise::Add, &f_c, &i_g)?, &keep)?.into_inner())
            }
            Scheme::UpdateDrop => {
                let dropped = elementwise(Elementwise::Mul, g, &keep)?;
                let i_g = elementwise(Elementwise::Mul, &ones, &dropped)?;
                Ok(elementwise(Elementwise::Add, &f_c, &i_g)?.into_inner())
            }
        }
    };
    let mut c = match s.scheme {
        Scheme::HiddenDrop => s.h0.to_vec(),
        Scheme::UpdateDrop => step(&vec![0.0; width], &s.h0)?,
    };
    for g in &s.updates {
        c = step(&c, g)?;
    }
    Ok(Vector::from(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub scheme: Scheme,
    pub p: f64,
    pub t: usize,
    pub h0_coefficient: f64,
}

/// `h_0` coefficients for `t = 0..=t_max`, every scheme and keep probability.
pub fn decay_report(p_values: &[f64], t_max: usize) -> Result<Vec<DecayRow>> {
    if p_values.is_empty() {
        return Err(Error::Empty("no keep probabilities given"));
    }
    for &p in p_values {
        check_keep(p)?;
    }
    let mut rows = Vec::with_capacity(2 * p_values.len() * (t_max + 1));
    for scheme in Scheme::ALL {
        for &p in p_values {
            for t in 0..=t_max {
                rows.push(DecayRow {
                    scheme,
                    p,
                    t,
                    h0_coefficient: h0_coefficient(scheme, p, t),
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with header `scheme,p,t,h0_coefficient`.
pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from("scheme,p,t,h0_coefficient\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{:e}\n", r.scheme, r.p, r.t, r.h0_coefficient));
    }
    s
}
