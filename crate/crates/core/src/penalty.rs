//! Penalty strengths that guarantee a squared constraint error `≤ ε`, and
//! the smoothness factors entering the resource estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    StableHomogeneous,
    StableInhomogeneous,
    NonStable,
    TimeDependent,
    TimeDependentInhomogeneous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PenaltyInputs {
    pub v_max: f64,
    pub a0_norm: f64,
    /// `max_t ‖b(t)‖`
    pub b: f64,
    /// `∫₀ᵗ ‖b(s)‖ ds`
    pub b_l1: f64,
    pub t: f64,
    pub mu_r_max: f64,
    /// `max_t ‖P A0(t) + A0(t)† P‖`
    pub anticomm_norm: f64,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub regime: Regime,
    pub inputs: PenaltyInputs,
}

/// Spectral data of a time-dependent generator needed for `Λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeDependentSpectra {
    /// `max_t ‖A0(t)‖_F`
    pub frobenius_max: f64,
    /// `|μ_max(Im A0)|`
    pub im_max: f64,
    /// `|μ_min(Re A0)|`
    pub re_min: f64,
}

fn check(inputs: &PenaltyInputs) -> Result<()> {
    let p = inputs;
    if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
        return Err(Error::InvalidRegimeInputs(format!(
            "epsilon must be positive, got {}",
            p.epsilon
        )));
    }
    for (name, x) in [
        ("v_max", p.v_max),
        ("a0_norm", p.a0_norm),
        ("b", p.b),
        ("b_l1", p.b_l1),
        ("t", p.t),
        ("anticomm_norm", p.anticomm_norm),
    ] {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::InvalidRegimeInputs(format!(
                "{name} must be finite and >= 0, got {x}"
            )));
        }
    }
    Ok(())
}

/// `λ·ε`, i.e. the penalty for `ε = 1`. Both `lambda_for` and `error_bound`
/// are derived from it.
fn prefactor(regime: Regime, p: &PenaltyInputs) -> Result<f64> {
    check(p)?;
    let v = p.v_max;
    Ok(match regime {
        Regime::StableHomogeneous => 2.0 * v * v * p.a0_norm,
        Regime::StableInhomogeneous => {
            2.0 * p.a0_norm * (v * v + 2.0 * v * p.t * p.b + p.t * p.t * p.b * p.b)
        }
        Regime::NonStable => {
            if !(p.mu_r_max > 0.0 && p.mu_r_max.is_finite()) {
                return Err(Error::InvalidRegimeInputs(format!(
                    "non-stable regime needs finite mu_r_max > 0, got {}",
                    p.mu_r_max
                )));
            }
            v * v * p.a0_norm * (1.0 + (2.0 * p.mu_r_max * p.t).exp())
        }
        Regime::TimeDependent => p.t * v * v * p.anticomm_norm,
        Regime::TimeDependentInhomogeneous => {
            let s = v * v + 2.0 * v * p.b_l1 + p.b_l1 * p.b_l1;
            0.5 * p.t * p.t * s * p.anticomm_norm
        }
    })
}

pub fn lambda_for(regime: Regime, inputs: &PenaltyInputs) -> Result<PenaltySpec> {
    let lambda = prefactor(regime, inputs)? / inputs.epsilon;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidRegimeInputs(format!(
            "penalty evaluates to {lambda}"
        )));
    }
    Ok(PenaltySpec {
        lambda,
        regime,
        inputs: *inputs,
    })
}

/// Guaranteed squared constraint error at penalty `lambda`; the inverse of
/// [`lambda_for`] in `ε`. `inputs.epsilon` is ignored.
pub fn error_bound(regime: Regime, inputs: &PenaltyInputs, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let p = PenaltyInputs {
        epsilon: 1.0,
        ..*inputs
    };
    Ok(prefactor(regime, &p)? / lambda)
}

/// `(Λ, Ξ)` with unit constants. `spectra` is required for the
/// time-dependent regimes; `omega_max > 0` marks a time-dependent forcing.
pub fn smoothness_factors(
    regime: Regime,
    inputs: &PenaltyInputs,
    omega_max: f64,
    spectra: Option<&TimeDependentSpectra>,
) -> Result<(f64, f64)> {
    check(inputs)?;
    let p = inputs;
    let v2 = p.v_max * p.v_max;
    let base = v2 * p.a0_norm / p.epsilon;
    let lambda_i = match regime {
        Regime::TimeDependent | Regime::TimeDependentInhomogeneous => {
            let s = spectra.ok_or_else(|| {
                Error::InvalidRegimeInputs("time-dependent regimes need generator spectra".into())
            })?;
            if s.re_min == 0.0 {
                return Err(Error::DivisionByZero("|mu_min(Re A0)| = 0".into()));
            }
            s.frobenius_max * (p.t * v2 / p.epsilon + s.im_max.abs() / s.re_min.abs())
        }
        _ => base,
    };
    let bracket = if p.b == 0.0 {
        1.0
    } else if p.v_max == 0.0 {
        return Err(Error::DivisionByZero(
            "v_max = 0 with nonzero forcing".into(),
        ));
    } else {
        let r = p.b / p.v_max;
        1.0 + 2.0 * r + r * r
    };
    let xi_i = base * bracket + omega_max.max(0.0);
    Ok((lambda_i, xi_i))
}
