//! Reduction of nonzero boundary data to homogeneous constraints.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Domain, Region};
use crate::linalg::{self, C64, ONE, ZERO};
use crate::operators::{Forcing, Generator, VecFn};
use crate::projectors::{Projector, ProjectorKind};

/// Boundary values `g(t)` together with their time derivative.
#[derive(Clone)]
pub struct BoundaryData {
    dim: usize,
    value: VecFn,
    rate: VecFn,
    constant: bool,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("dim", &self.dim)
            .field("constant", &self.constant)
            .finish()
    }
}

impl BoundaryData {
    pub fn constant(g: Vec<C64>) -> Self {
        let dim = g.len();
        Self {
            dim,
            value: Arc::new(move |_, out: &mut [C64]| out.copy_from_slice(&g)),
            rate: Arc::new(|_, out: &mut [C64]| out.iter_mut().for_each(|z| *z = ZERO)),
            constant: true,
        }
    }

    /// `g(t) = t·g0`, `ġ = g0`.
    pub fn linear_in_time(g0: Vec<C64>) -> Self {
        let dim = g0.len();
        let g1 = g0.clone();
        Self {
            dim,
            value: Arc::new(move |t, out: &mut [C64]| {
                out.iter_mut().zip(&g0).for_each(|(o, g)| *o = t * g);
            }),
            rate: Arc::new(move |_, out: &mut [C64]| out.copy_from_slice(&g1)),
            constant: false,
        }
    }

    pub fn from_fns(dim: usize, value: VecFn, rate: VecFn) -> Self {
        Self {
            dim,
            value,
            rate,
            constant: false,
        }
    }

    /// Tent profile `(1 − y)·min(x, 1 − x)` on the Dirichlet points of a
    /// `d ≤ 2` domain (the `y` factor is dropped in 1-D), zero elsewhere.
    pub fn tent(domain: &Domain) -> Result<Self> {
        if domain.d() > 2 {
            return Err(Error::InvalidArgument(
                "tent data is defined for d <= 2".into(),
            ));
        }
        let g = (0..domain.size())
            .map(|i| {
                if domain.region(i) != Region::Dirichlet {
                    return ZERO;
                }
                let x = domain.unit_coords(&domain.multi(i));
                let tent = if x[0] <= 0.5 { x[0] } else { 1.0 - x[0] };
                let fy = if domain.d() == 2 { 1.0 - x[1] } else { 1.0 };
                C64::new(fy * tent, 0.0)
            })
            .collect();
        Ok(Self::constant(g))
    }

    /// Values given at listed points, zero elsewhere (the JSON data form).
    pub fn from_points(domain: &Domain, indices: &[Vec<usize>], values: &[f64]) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimMismatch {
                expected: indices.len(),
                got: values.len(),
            });
        }
        let mut g = vec![ZERO; domain.size()];
        for (j, &val) in indices.iter().zip(values) {
            g[domain.linear(j)?] = C64::new(val, 0.0);
        }
        Ok(Self::constant(g))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn value(&self, t: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        (self.value)(t, &mut out);
        out
    }

    pub fn rate(&self, t: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        (self.rate)(t, &mut out);
        out
    }

    pub fn negated(&self) -> Self {
        let (v, r) = (self.value.clone(), self.rate.clone());
        Self {
            dim: self.dim,
            value: Arc::new(move |t, out: &mut [C64]| {
                v(t, out);
                out.iter_mut().for_each(|z| *z = -*z);
            }),
            rate: Arc::new(move |t, out: &mut [C64]| {
                r(t, out);
                out.iter_mut().for_each(|z| *z = -*z);
            }),
            constant: self.constant,
        }
    }

    fn plus(&self, other: &Self) -> Self {
        let (v1, r1, v2, r2) = (
            self.value.clone(),
            self.rate.clone(),
            other.value.clone(),
            other.rate.clone(),
        );
        let n = self.dim;
        Self {
            dim: n,
            value: Arc::new(move |t, out: &mut [C64]| {
                let mut tmp = vec![ZERO; n];
                v1(t, out);
                v2(t, &mut tmp);
                linalg::axpy(ONE, &tmp, out);
            }),
            rate: Arc::new(move |t, out: &mut [C64]| {
                let mut tmp = vec![ZERO; n];
                r1(t, out);
                r2(t, &mut tmp);
                linalg::axpy(ONE, &tmp, out);
            }),
            constant: self.constant && other.constant,
        }
    }
}

/// `v' = A0(t) v + b(t)` on `[0, horizon]` with constraint projector `P`.
#[derive(Clone, Debug)]
pub struct ConstrainedProblem {
    pub generator: Generator,
    pub forcing: Forcing,
    pub projector: Projector,
    pub initial: Vec<C64>,
    pub horizon: f64,
    /// Shift subtracted from the original unknown, `v' = v − g`.
    pub shift: Option<BoundaryData>,
    /// Leading coordinates that belong to the physical problem.
    pub physical_dim: usize,
}

impl ConstrainedProblem {
    pub fn new(
        generator: Generator,
        forcing: Forcing,
        projector: Projector,
        initial: Vec<C64>,
        horizon: f64,
    ) -> Result<Self> {
        let n = generator.dim();
        for got in [forcing.dim(), projector.dim(), initial.len()] {
            if got != n {
                return Err(Error::DimMismatch { expected: n, got });
            }
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be finite and >= 0, got {horizon}"
            )));
        }
        Ok(Self {
            generator,
            forcing,
            projector,
            initial,
            horizon,
            shift: None,
            physical_dim: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// Maps a solution of the transformed problem back to the original
    /// unknown: adds the shift and drops auxiliary coordinates.
    pub fn unshift(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let mut out = v[..self.physical_dim].to_vec();
        if let Some(g) = &self.shift {
            linalg::axpy(ONE, &g.value(t)[..self.physical_dim], &mut out);
        }
        out
    }

    /// Squared constraint error of the initial state.
    pub fn initial_violation(&self) -> Result<f64> {
        self.projector.quadratic_form(&self.initial)
    }
}

fn sample_times(horizon: f64) -> [f64; 3] {
    [0.0, 0.5 * horizon, horizon]
}

/// Substitutes `v' = v − g`: zero boundary data and forcing
/// `b'(t) = A0(t) g(t) − ġ(t) + b(t)`.
pub fn shift_dirichlet(
    p: &ConstrainedProblem,
    g: &BoundaryData,
    domain: &Domain,
) -> Result<ConstrainedProblem> {
    let n = p.physical_dim;
    if g.dim() != n || domain.size() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: g.dim(),
        });
    }
    for t in sample_times(p.horizon) {
        let gv = g.value(t);
        if let Some(i) = (0..n).find(|&i| gv[i] != ZERO && domain.region(i) != Region::Dirichlet) {
            return Err(Error::UnsupportedSupport(i));
        }
        // central difference check of the declared derivative
        let h = 1e-5 * (1.0 + t.abs());
        let fd: Vec<C64> = linalg::sub(&g.value(t + h), &g.value(t - h))
            .into_iter()
            .map(|z| z / (2.0 * h))
            .collect();
        let rate = g.rate(t);
        let dev = linalg::norm(&linalg::sub(&fd, &rate));
        let scale = 1.0 + linalg::norm(&rate) + linalg::norm(&gv);
        if dev > 1e-4 * scale {
            return Err(Error::InvalidArgument(format!(
                "boundary derivative inconsistent with data at t={t} (deviation {dev:e})"
            )));
        }
    }

    let a0 = p.generator.clone();
    let b = p.forcing.clone();
    let forcing = if g.is_constant()
        && !a0.is_time_dependent()
        && (b.is_zero() || b.constant_value().is_some())
    {
        let mut val = a0.apply_vec(0.0, &g.value(0.0));
        if let Some(c) = b.constant_value() {
            linalg::axpy(ONE, c, &mut val);
        }
        Forcing::constant(val, p.horizon)
    } else {
        let gc = g.clone();
        let dim = p.dim();
        let f: VecFn = Arc::new(move |t, out: &mut [C64]| {
            let mut gv = vec![ZERO; dim];
            (gc.value)(t, &mut gv[..n]);
            b.eval(t, out);
            a0.apply_acc(t, ONE, &gv, out);
            let mut gd = vec![ZERO; n];
            (gc.rate)(t, &mut gd);
            linalg::axpy(-ONE, &gd, &mut out[..n]);
        });
        Forcing::from_fn(dim, f, p.horizon, 256)
    };

    let mut initial = p.initial.clone();
    linalg::axpy(-ONE, &g.value(0.0), &mut initial[..n]);
    let shift = match &p.shift {
        Some(prev) => prev.plus(g),
        None => g.clone(),
    };
    Ok(ConstrainedProblem {
        generator: p.generator.clone(),
        forcing,
        projector: p.projector.clone(),
        initial,
        horizon: p.horizon,
        shift: Some(shift),
        physical_dim: n,
    })
}

/// Dummy-variable form of a constant Dirichlet constraint: every Dirichlet
/// point is paired with a decoupled copy holding its prescribed value, and
/// the value constraint becomes a swap (difference) constraint. Solutions of
/// the augmented system restricted to the first `N` coordinates approximate
/// the constrained solution.
pub fn ghost_points(
    p: &ConstrainedProblem,
    g: &BoundaryData,
    domain: &Domain,
) -> Result<ConstrainedProblem> {
    if !g.is_constant() {
        return Err(Error::InvalidArgument(
            "ghost points need time-independent data".into(),
        ));
    }
    let n = p.dim();
    if g.dim() != n || domain.size() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: g.dim(),
        });
    }
    let gd = domain.indices_of(Region::Dirichlet);
    let m = gd.len();
    let total = n + m;
    let gv = g.value(0.0);
    let mut initial = p.initial.clone();
    initial.extend(gd.iter().map(|&j| gv[j]));

    let pairs: Vec<(usize, usize)> = gd.iter().enumerate().map(|(k, &j)| (j, n + k)).collect();
    let mut parts = vec![Projector::swap_network(total, pairs)?];
    let kept: Vec<&Projector> = match p.projector.kind() {
        ProjectorKind::PointSet(_) => vec![],
        ProjectorKind::Sum(ps) => ps
            .iter()
            .filter(|q| !matches!(q.kind(), ProjectorKind::PointSet(_)))
            .collect(),
        _ => vec![&p.projector],
    };
    for q in kept {
        parts.push(q.embed(0, total)?);
    }
    let projector = if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        Projector::sum(total, parts)?
    };

    Ok(ConstrainedProblem {
        generator: p.generator.padded(m),
        forcing: p.forcing.padded(m),
        projector,
        initial,
        horizon: p.horizon,
        shift: p.shift.clone(),
        physical_dim: n,
    })
}

/// Discrete solvability condition of the pure-Neumann problem: the surface
/// sum of the flux data `h` (over Neumann points, weighted by `h^{d-1}`)
/// must match the volume integral of `Δv`.
pub fn neumann_consistency_check(domain: &Domain, h_data: &[f64], laplacian_integral: f64) -> bool {
    if h_data.len() != domain.size() {
        return false;
    }
    let w = domain.spacing().powi(domain.d() as i32 - 1);
    let surface: f64 = domain
        .indices_of(Region::Neumann)
        .iter()
        .map(|&j| h_data[j] * w)
        .sum();
    (surface - laplacian_integral).abs() <= 1e-8
}
