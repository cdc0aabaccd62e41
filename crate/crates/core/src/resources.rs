//! Step and query counts of the LCHS solver with the penalized generator.
//! All asymptotic formulas are evaluated with unit constant factors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{smoothness_factors, PenaltyInputs, Regime};

pub const DEFAULT_BETA: f64 = 0.9;

pub const CONSTANT_NOTE: &str = "all asymptotic formulas evaluated with constant factor 1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LchsInputs {
    /// Block-encoding normalization of the penalized generator.
    pub alpha_a: f64,
    /// Same for the unpenalized generator; query counts use this one.
    pub alpha_a0: f64,
    pub t: f64,
    pub v0_norm: f64,
    pub b_l1: f64,
    pub vt_norm: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub lambda_i: f64,
    pub xi_i: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub inputs: LchsInputs,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_prime")]
    pub m_prime: f64,
    pub hamt_queries: f64,
    pub stateprep_queries: f64,
    /// `log₂ M′`
    pub overhead_log2: f64,
    pub note: &'static str,
}

impl ResourceEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidBeta(beta));
    }
    Ok(())
}

pub fn lchs_steps(inputs: &LchsInputs) -> Result<ResourceEstimate> {
    let p = inputs;
    check_beta(p.beta)?;
    for (name, x) in [
        ("v0_norm", p.v0_norm),
        ("vt_norm", p.vt_norm),
        ("epsilon", p.epsilon),
        ("t", p.t),
    ] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {x}"
            )));
        }
    }
    if !(p.b_l1 >= 0.0
        && p.alpha_a >= 0.0
        && p.alpha_a0 >= 0.0
        && p.lambda_i >= 0.0
        && p.xi_i >= 0.0)
    {
        return Err(Error::InvalidArgument(
            "norms and smoothness factors must be non-negative".into(),
        ));
    }
    let pw = 1.0 + 1.0 / p.beta;
    let m = p.alpha_a
        * p.t
        * ((p.v0_norm + p.b_l1) / (p.vt_norm * p.epsilon))
            .ln()
            .powf(pw);
    let m_prime =
        p.t * (p.lambda_i + p.xi_i) * ((1.0 + p.b_l1) / (p.vt_norm * p.epsilon)).ln().powf(pw);
    let stateprep = (p.v0_norm + p.b_l1) / p.vt_norm;
    let hamt = stateprep * p.alpha_a0 * p.t * (1.0 / p.epsilon).ln().powf(pw);
    Ok(ResourceEstimate {
        inputs: *p,
        m,
        m_prime,
        hamt_queries: hamt,
        stateprep_queries: stateprep,
        overhead_log2: m_prime.log2(),
        note: CONSTANT_NOTE,
    })
}

/// Inputs of the discrete heat-equation example: `v_max = B = n^{d/2}`,
/// `B_L1 = t n^{d/2}`, `‖A0‖ = 4d n^{2d}`, `ε = n^{-d/2}`, `‖v(T)‖ = v_max`.
pub fn heat_example(n: usize, d: usize, t: f64, beta: f64) -> Result<LchsInputs> {
    check_beta(beta)?;
    if n < 2 || d == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2, d >= 1, t > 0; got n={n}, d={d}, t={t}"
        )));
    }
    let nf = n as f64;
    let half = nf.powf(d as f64 / 2.0);
    let a0 = 4.0 * d as f64 * nf.powf(2.0 * d as f64);
    let pen = PenaltyInputs {
        v_max: half,
        a0_norm: a0,
        b: half,
        b_l1: t * half,
        t,
        epsilon: 1.0 / half,
        ..Default::default()
    };
    let (lambda_i, xi_i) = smoothness_factors(Regime::StableInhomogeneous, &pen, 0.0, None)?;
    Ok(LchsInputs {
        alpha_a: a0,
        alpha_a0: a0,
        t,
        v0_norm: half,
        b_l1: pen.b_l1,
        vt_norm: half,
        epsilon: pen.epsilon,
        beta,
        lambda_i,
        xi_i,
    })
}

/// `ln M′` for the heat example.
pub fn heat_overhead(n: usize, d: usize, t: f64, beta: f64) -> Result<f64> {
    Ok(lchs_steps(&heat_example(n, d, t, beta)?)?.m_prime.ln())
}

/// `2 e^{D μ_min t} ‖v(0)‖ ‖b‖_{L1[0,t]}`, a lower bound on `‖v(t)‖²` for
/// unpenalized heat flow with non-negative data and forcing.
pub fn norm_lower_bound(v0_norm: f64, b_l1: f64, mu_min: f64, diffusion: f64, t: f64) -> f64 {
    2.0 * (diffusion * mu_min * t).exp() * v0_norm * b_l1
}
