//! Bogacki–Shampine 3(2) time stepping of the penalized system, directly or
//! in the interaction frame of the penalty projector.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenize::ConstrainedProblem;
use crate::linalg::{self, C64, ONE, ZERO};

/// Samples per penalty period enforced on the step size.
pub const SAMPLES_PER_PERIOD: f64 = 20.0;

/// Fixed steps are also capped at `STABILITY_FACTOR / ‖A0‖`, inside the
/// real-axis stability interval of the explicit 3-stage scheme.
pub const STABILITY_FACTOR: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Direct,
    InteractionPicture,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepping {
    Fixed { dt: f64 },
    Adaptive { atol: f64, rtol: f64, dt0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub stepping: Stepping,
    pub mode: Mode,
    /// Keep every k-th accepted state (0 keeps only the endpoints).
    pub save_every: usize,
}

impl StepperConfig {
    pub fn fixed(dt: f64, mode: Mode) -> Self {
        Self {
            stepping: Stepping::Fixed { dt },
            mode,
            save_every: 0,
        }
    }

    pub fn adaptive(atol: f64, rtol: f64, mode: Mode) -> Self {
        Self {
            stepping: Stepping::Adaptive {
                atol,
                rtol,
                dt0: 1e-4,
            },
            mode,
            save_every: 0,
        }
    }

    pub fn save_every(mut self, k: usize) -> Self {
        self.save_every = k;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub rejected: usize,
    pub max_err_est: f64,
    /// Step actually used in fixed mode after the caps.
    pub dt_used: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &[C64] {
        self.states
            .last()
            .expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least the initial time")
    }
}

struct Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
    y1: Vec<C64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![ZERO; n];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z.clone(),
            y1: z,
        }
    }

    /// One step from `(t, y)` given `k1 = f(t, y)`. Leaves the third-order
    /// solution in `y1` and `f(t+dt, y1)` in `k4`; returns the difference
    /// to the embedded second-order solution in `tmp`.
    fn step<F>(&mut self, f: &mut F, t: f64, y: &[C64], dt: f64)
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        f(t + 0.5 * dt, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.75 * dt * self.k2[i];
        }
        f(t + 0.75 * dt, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.y1[i] = y[i]
                + dt * (2.0 / 9.0 * self.k1[i] + 1.0 / 3.0 * self.k2[i] + 4.0 / 9.0 * self.k3[i]);
        }
        f(t + dt, &self.y1, &mut self.k4);
        for i in 0..n {
            // y1 − z with z the embedded 2nd-order solution
            self.tmp[i] = dt
                * (-5.0 / 72.0 * self.k1[i] + 1.0 / 12.0 * self.k2[i] + 1.0 / 9.0 * self.k3[i]
                    - 1.0 / 8.0 * self.k4[i]);
        }
    }
}

/// One embedded Bogacki–Shampine step. Returns the third-order solution and
/// the 2-norm of its difference to the embedded second-order solution.
pub fn rk23_step<F>(mut f: F, t: f64, v: &[C64], dt: f64) -> Result<(Vec<C64>, f64)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let mut ws = Workspace::new(v.len());
    f(t, v, &mut ws.k1);
    ws.step(&mut f, t, v, dt);
    if !linalg::is_finite(&ws.y1) {
        return Err(Error::NonFinite(t + dt));
    }
    let err = linalg::norm(&ws.tmp);
    Ok((ws.y1, err))
}

/// Largest step allowed by the penalty frequency, `(2π/λ)/20`.
pub fn alias_cap(lambda: f64) -> f64 {
    if lambda > 0.0 {
        2.0 * PI / lambda / SAMPLES_PER_PERIOD
    } else {
        f64::INFINITY
    }
}

/// Integrates `v' = A0(t) v − iλ P v + b(t)` over the problem horizon.
pub fn evolve(
    problem: &ConstrainedProblem,
    lambda: f64,
    cfg: &StepperConfig,
) -> Result<Trajectory> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let n = problem.dim();
    if problem.initial.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: problem.initial.len(),
        });
    }
    let p = &problem.projector;
    let a0 = &problem.generator;
    let b = &problem.forcing;
    if cfg.mode == Mode::InteractionPicture && lambda > 0.0 {
        p.check_exp()?;
    }
    let minus_il = C64::new(0.0, -lambda);
    let mut bbuf = vec![ZERO; n];
    let mut xbuf = vec![ZERO; n];

    let interaction = cfg.mode == Mode::InteractionPicture && lambda > 0.0;
    let mut rhs = |t: f64, x: &[C64], out: &mut [C64]| {
        if interaction {
            xbuf.copy_from_slice(x);
            p.exp_apply_fast(minus_il * t, &mut xbuf);
            a0.apply(t, &xbuf, out);
            if !b.is_zero() {
                b.eval(t, &mut bbuf);
                linalg::axpy(ONE, &bbuf, out);
            }
            p.exp_apply_fast(-minus_il * t, out);
        } else {
            a0.apply(t, x, out);
            if lambda > 0.0 {
                p.apply_into(minus_il, x, out).expect("dimension checked");
            }
            if !b.is_zero() {
                b.eval(t, &mut bbuf);
                linalg::axpy(ONE, &bbuf, out);
            }
        }
    };
    let to_lab = |t: f64, y: &[C64]| -> Vec<C64> {
        let mut v = y.to_vec();
        if interaction {
            p.exp_apply_fast(minus_il * t, &mut v);
        }
        v
    };

    let horizon = problem.horizon;
    let mut y = problem.initial.clone();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y.clone()],
        stats: StepStats::default(),
    };
    if horizon == 0.0 {
        return Ok(traj);
    }
    let mut ws = Workspace::new(n);
    let mut t = 0.0;
    rhs(t, &y, &mut ws.k1);

    match cfg.stepping {
        Stepping::Fixed { dt } => {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "dt must be positive, got {dt}"
                )));
            }
            let cap = alias_cap(lambda).min(STABILITY_FACTOR / a0.norm_bound());
            let steps = (horizon / dt.min(cap)).ceil().max(1.0) as usize;
            let h = horizon / steps as f64;
            traj.stats.dt_used = h;
            for s in 1..=steps {
                ws.step(&mut rhs, t, &y, h);
                t = if s == steps { horizon } else { s as f64 * h };
                std::mem::swap(&mut y, &mut ws.y1);
                std::mem::swap(&mut ws.k1, &mut ws.k4);
                if !linalg::is_finite(&y) {
                    return Err(Error::NonFinite(t));
                }
                traj.stats.steps += 1;
                traj.stats.max_err_est = traj.stats.max_err_est.max(linalg::norm(&ws.tmp));
                if s == steps || (cfg.save_every > 0 && s % cfg.save_every == 0) {
                    traj.times.push(t);
                    traj.states.push(to_lab(t, &y));
                }
            }
        }
        Stepping::Adaptive { atol, rtol, dt0 } => {
            if !(atol > 0.0 && rtol >= 0.0 && dt0 > 0.0) {
                return Err(Error::InvalidArgument(
                    "adaptive stepping needs atol > 0, rtol >= 0, dt0 > 0".into(),
                ));
            }
            let cap = alias_cap(lambda);
            let mut h = dt0.min(cap).min(horizon);
            let mut accepted = 0usize;
            while t < horizon {
                let last = t + h >= horizon * (1.0 - 1e-14);
                if last {
                    h = horizon - t;
                }
                ws.step(&mut rhs, t, &y, h);
                let err = (ws
                    .tmp
                    .iter()
                    .zip(y.iter().zip(&ws.y1))
                    .map(|(e, (a, b))| {
                        let sc = atol + rtol * a.norm().max(b.norm());
                        (e.norm() / sc).powi(2)
                    })
                    .sum::<f64>()
                    / n.max(1) as f64)
                    .sqrt();
                if !err.is_finite() {
                    return Err(Error::NonFinite(t + h));
                }
                if err <= 1.0 {
                    t = if last { horizon } else { t + h };
                    std::mem::swap(&mut y, &mut ws.y1);
                    std::mem::swap(&mut ws.k1, &mut ws.k4);
                    accepted += 1;
                    traj.stats.steps += 1;
                    traj.stats.max_err_est = traj.stats.max_err_est.max(linalg::norm(&ws.tmp));
                    if t >= horizon || (cfg.save_every > 0 && accepted % cfg.save_every == 0) {
                        traj.times.push(t);
                        traj.states.push(to_lab(t, &y));
                    }
                } else {
                    traj.stats.rejected += 1;
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
                };
                h = (h * fac).min(cap);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t, dt: h });
                }
            }
        }
    }
    Ok(traj)
}
