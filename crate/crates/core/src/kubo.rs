//! Numerical check of the first-order (linear response) shift of a quadratic
//! observable under a perturbation `ζV` of non-Hermitian dynamics
//! `v' = (H + ζV) v + b`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE};
use crate::operators::{Forcing, Generator};
use crate::projectors::Projector;

/// Dense propagators are limited to this dimension.
pub const MAX_DENSE_DIM: usize = 64;

/// RK substeps per quadrature interval for time-dependent generators.
const SUBSTEPS: usize = 64;

#[derive(Clone, Debug)]
pub struct KuboSetup {
    pub h: Generator,
    pub v: Generator,
    pub zeta: f64,
    pub b: Forcing,
    pub observable: Projector,
    pub v0: Vec<C64>,
    pub t: f64,
    /// Number of quadrature intervals; `None` picks the minimum resolving grid.
    pub grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KuboPrediction {
    /// The anticommutator formula `ζ∫ tr[{P, V̄σ}~]/tr σ`.
    pub anticommutator: f64,
    /// Same integrand with the modified commutator `PQ − Q†P`; the trace is
    /// purely imaginary and its imaginary part is reported.
    pub commutator_im: f64,
    /// Exact first-order term from the Duhamel expansion (constant `H` only).
    pub duhamel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KuboRow {
    pub zeta: f64,
    pub exact: f64,
    pub predicted: f64,
    pub residual: f64,
    pub ratio: Option<f64>,
    pub duhamel: Option<f64>,
    pub duhamel_residual: Option<f64>,
    pub duhamel_ratio: Option<f64>,
    pub commutator_im: f64,
}

impl KuboSetup {
    fn dim(&self) -> usize {
        self.v0.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n > MAX_DENSE_DIM {
            return Err(Error::InvalidArgument(format!(
                "dense Kubo path limited to N <= {MAX_DENSE_DIM}"
            )));
        }
        for got in [
            self.h.dim(),
            self.v.dim(),
            self.b.dim(),
            self.observable.dim(),
        ] {
            if got != n {
                return Err(Error::DimMismatch { expected: n, got });
            }
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.t
            )));
        }
        Ok(())
    }

    fn is_constant(&self) -> bool {
        !self.h.is_time_dependent() && !self.v.is_time_dependent()
    }

    /// Smallest admissible grid: 64 intervals, or 20 per period of the
    /// fastest unperturbed oscillation.
    pub fn min_grid(&self) -> usize {
        let m = (20.0 * self.h.norm_bound() * self.t / (2.0 * PI))
            .ceil()
            .max(64.0) as usize;
        m + m % 2
    }

    fn grid_size(&self) -> Result<usize> {
        let need = self.min_grid();
        match self.grid {
            Some(m) if m < need => Err(Error::QuadratureUnderResolved(format!(
                "{m} intervals given, at least {need} needed"
            ))),
            Some(m) => Ok(m + m % 2),
            None => Ok(need),
        }
    }

    fn with_zeta(&self, zeta: f64) -> Self {
        Self {
            zeta,
            ..self.clone()
        }
    }
}

fn to_dvec(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

fn expectation(p: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    (v.adjoint() * p * v)[(0, 0)].re / v.norm_squared()
}

/// Solution of `v' = A(t) v + b(t)` at `steps + 1` uniform nodes of `[0, t]`.
fn solve_nodes(
    a: &dyn Fn(f64) -> DMatrix<C64>,
    constant: bool,
    b: &Forcing,
    v0: &[C64],
    t: f64,
    steps: usize,
) -> Result<Vec<DVector<C64>>> {
    let n = v0.len();
    let dt = t / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(to_dvec(v0));
    if constant && (b.is_zero() || b.constant_value().is_some()) {
        // augmented generator [[A, b], [0, 0]] makes the affine flow linear
        let mut m = DMatrix::<C64>::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&a(0.0));
        if let Some(c) = b.constant_value() {
            for i in 0..n {
                m[(i, n)] = c[i];
            }
        }
        let e = (m * C64::new(dt, 0.0)).exp();
        let mut x = DVector::<C64>::zeros(n + 1);
        x.rows_mut(0, n).copy_from(&out[0]);
        x[n] = ONE;
        for _ in 0..steps {
            x = &e * x;
            out.push(x.rows(0, n).into_owned());
        }
    } else {
        let h = dt / SUBSTEPS as f64;
        let f = |s: f64, y: &DVector<C64>| -> DVector<C64> { a(s) * y + to_dvec(&b.eval_vec(s)) };
        let mut y = out[0].clone();
        let mut s = 0.0;
        for _ in 0..steps {
            for _ in 0..SUBSTEPS {
                // classical RK4 on the dense system
                let k1 = f(s, &y);
                let k2 = f(s + 0.5 * h, &(&y + &k1 * C64::new(0.5 * h, 0.0)));
                let k3 = f(s + 0.5 * h, &(&y + &k2 * C64::new(0.5 * h, 0.0)));
                let k4 = f(s + h, &(&y + &k3 * C64::new(h, 0.0)));
                y += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
                    * C64::new(h / 6.0, 0.0);
                s += h;
            }
            if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite(s));
            }
            out.push(y.clone());
        }
    }
    Ok(out)
}

fn final_state(setup: &KuboSetup, zeta: f64) -> Result<DVector<C64>> {
    let (h, v) = (&setup.h, &setup.v);
    let a = |s: f64| h.dense(s) + v.dense(s) * C64::new(zeta, 0.0);
    let steps = if setup.is_constant() {
        1
    } else {
        setup.grid_size()?
    };
    let nodes = solve_nodes(&a, setup.is_constant(), &setup.b, &setup.v0, setup.t, steps)?;
    Ok(nodes.into_iter().last().unwrap())
}

/// `⟨P⟩_ζ(t) − ⟨P⟩_0(t)`, each expectation normalized by its own solution.
pub fn exact_delta(setup: &KuboSetup) -> Result<f64> {
    setup.validate()?;
    let p = setup.observable.to_dense()?;
    let vz = final_state(setup, setup.zeta)?;
    let v0 = final_state(setup, 0.0)?;
    let d = expectation(&p, &vz) - expectation(&p, &v0);
    if !d.is_finite() {
        return Err(Error::NonFinite(setup.t));
    }
    Ok(d)
}

/// Composite Simpson weights on an even number of intervals.
fn simpson(m: usize, dt: f64) -> Vec<f64> {
    (0..=m)
        .map(|k| {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * dt / 3.0
        })
        .collect()
}

/// First-order prediction of the observable shift.
pub fn kubo_first_order(setup: &KuboSetup) -> Result<KuboPrediction> {
    setup.validate()?;
    let m = setup.grid_size()?;
    let t = setup.t;
    let dt = t / m as f64;
    let p = setup.observable.to_dense()?;
    let hgen = &setup.h;
    let a = |s: f64| hgen.dense(s);
    let u = solve_nodes(&a, !hgen.is_time_dependent(), &setup.b, &setup.v0, t, m)?;
    let ut = &u[m];
    let norm2 = ut.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::DegenerateInput(
            "unperturbed solution vanishes at t".into(),
        ));
    }
    let pu = &p * ut;

    // V̄(t, t_k) = ∫_{t_k}^t V, trapezoid for time-dependent V
    let vbar: Vec<DMatrix<C64>> = if setup.v.is_time_dependent() {
        let vs: Vec<DMatrix<C64>> = (0..=m).map(|k| setup.v.dense(k as f64 * dt)).collect();
        let mut acc = vec![DMatrix::<C64>::zeros(ut.len(), ut.len()); m + 1];
        for k in (0..m).rev() {
            acc[k] = &acc[k + 1] + (&vs[k] + &vs[k + 1]) * C64::new(0.5 * dt, 0.0);
        }
        acc
    } else {
        let v = setup.v.dense(0.0);
        (0..=m)
            .map(|k| &v * C64::new(t - k as f64 * dt, 0.0))
            .collect()
    };

    let w = simpson(m, dt);
    let mut anti = 0.0;
    let mut comm = 0.0;
    for k in 0..=m {
        let z = pu.dotc(&(&vbar[k] * &u[k]));
        anti += w[k] * 2.0 * z.re;
        comm += w[k] * 2.0 * z.im;
    }
    let scale = setup.zeta / norm2;

    let duhamel = if !hgen.is_time_dependent() && !setup.v.is_time_dependent() {
        let e = (hgen.dense(0.0) * C64::new(dt, 0.0)).exp();
        let v = setup.v.dense(0.0);
        // δu(t) = ∫ U(t,s) V u(s) ds with U(t, t_k) = e^{H(t − t_k)}
        let mut g = DMatrix::<C64>::identity(ut.len(), ut.len());
        let mut du = DVector::<C64>::zeros(ut.len());
        for k in (0..=m).rev() {
            du += (&g * (&v * &u[k])) * C64::new(w[k], 0.0);
            g = &g * &e;
        }
        let p0 = expectation(&p, ut);
        let first = 2.0 * pu.dotc(&du).re - p0 * 2.0 * ut.dotc(&du).re;
        Some(setup.zeta * first / norm2)
    } else {
        None
    };

    Ok(KuboPrediction {
        anticommutator: scale * anti,
        commutator_im: scale * comm,
        duhamel,
    })
}

/// Residuals `|exact − predicted|` over a geometric ζ sequence, with the
/// ratios of successive residuals.
pub fn order_study(setup: &KuboSetup, zetas: &[f64]) -> Result<Vec<KuboRow>> {
    if zetas.len() < 2 {
        return Err(Error::InvalidArgument(
            "order study needs at least 2 zetas".into(),
        ));
    }
    if zetas.iter().any(|&z| !(z > 0.0 && z.is_finite())) {
        return Err(Error::InvalidArgument("zetas must be positive".into()));
    }
    let q = zetas[1] / zetas[0];
    if zetas
        .windows(2)
        .any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9)
    {
        return Err(Error::InvalidArgument(
            "zetas must form a geometric progression".into(),
        ));
    }
    let mut rows: Vec<KuboRow> = Vec::with_capacity(zetas.len());
    for &z in zetas {
        let s = setup.with_zeta(z);
        let exact = exact_delta(&s)?;
        let pred = kubo_first_order(&s)?;
        let residual = (exact - pred.anticommutator).abs();
        let duhamel_residual = pred.duhamel.map(|d| (exact - d).abs());
        let (ratio, duhamel_ratio) = match rows.last() {
            Some(prev) => (
                Some(prev.residual / residual),
                prev.duhamel_residual
                    .zip(duhamel_residual)
                    .map(|(a, b)| a / b),
            ),
            None => (None, None),
        };
        rows.push(KuboRow {
            zeta: z,
            exact,
            predicted: pred.anticommutator,
            residual,
            ratio,
            duhamel: pred.duhamel,
            duhamel_residual,
            duhamel_ratio,
            commutator_im: pred.commutator_im,
        });
    }
    Ok(rows)
}

pub const KUBO_HEADER: &str =
    "zeta,exact,predicted,residual,ratio,duhamel,duhamel_residual,duhamel_ratio,commutator_im";

pub fn write_kubo_csv(rows: &[KuboRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KUBO_HEADER.split(','))?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            format!("{:e}", r.zeta),
            format!("{:e}", r.exact),
            format!("{:e}", r.predicted),
            format!("{:e}", r.residual),
            opt(r.ratio),
            opt(r.duhamel),
            opt(r.duhamel_residual),
            opt(r.duhamel_ratio),
            format!("{:e}", r.commutator_im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `H = −iP` as a constant generator.
pub fn penalty_generator(p: &Projector) -> Result<Generator> {
    let m = p.to_csr().scaled(C64::new(0.0, -1.0));
    Ok(Generator::from_matrix(m)?.with_mu_r_max(0.0))
}
