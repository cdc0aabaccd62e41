//! Sparse linear generators `A0(t)` and forcing terms `b(t)`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{flatten, Domain};
use crate::linalg::{self, CsrMatrix, C64, ONE, ZERO};
use crate::projectors::Projector;

pub type ScalarFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum Coeff {
    Const(C64),
    Time(ScalarFn),
}

impl Coeff {
    pub fn at(&self, t: f64) -> C64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Time(f) => f(t),
        }
    }
}

/// `A0(t) = Σ_k c_k(t) M_k` with sparse `M_k`.
#[derive(Clone)]
pub struct Generator {
    dim: usize,
    terms: Vec<(Coeff, CsrMatrix)>,
    norm_bound: f64,
    mu_r_max: f64,
    mu_min: Option<f64>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("dim", &self.dim)
            .field("terms", &self.terms.len())
            .field("time_dependent", &self.is_time_dependent())
            .field("norm_bound", &self.norm_bound)
            .field("mu_r_max", &self.mu_r_max)
            .field("mu_min", &self.mu_min)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    ThreePointPeriodic,
}

/// Relative tolerance used when metadata has to be estimated.
const META_TOL: f64 = 1e-8;

impl Generator {
    /// Constant generator. `norm_bound` is estimated by power iteration;
    /// `mu_r_max` is left at `+inf` (unknown) until set.
    pub fn from_matrix(m: CsrMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let mut g = Self {
            dim: m.nrows(),
            terms: vec![(Coeff::Const(ONE), m)],
            norm_bound: f64::INFINITY,
            mu_r_max: f64::INFINITY,
            mu_min: None,
        };
        g.norm_bound = spectral_norm(&g, 0.0, META_TOL)? * (1.0 + 1e-6);
        Ok(g)
    }

    /// Time-dependent generator from terms. Norm metadata is the sampled
    /// maximum over `samples` uniform times in `[0, horizon]` with a 10%
    /// safety factor.
    pub fn from_terms(
        terms: Vec<(Coeff, CsrMatrix)>,
        horizon: f64,
        samples: usize,
    ) -> Result<Self> {
        let dim = terms.first().map(|t| t.1.nrows()).unwrap_or(0);
        for (_, m) in &terms {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: m.nrows().max(m.ncols()),
                });
            }
        }
        let mut g = Self {
            dim,
            terms,
            norm_bound: f64::INFINITY,
            mu_r_max: f64::INFINITY,
            mu_min: None,
        };
        let samples = samples.max(1);
        let mut max = 0.0f64;
        for k in 0..=samples {
            let t = horizon * k as f64 / samples as f64;
            max = max.max(spectral_norm(&g, t, META_TOL)?);
        }
        g.norm_bound = 1.1 * max;
        Ok(g)
    }

    pub fn with_norm_bound(mut self, b: f64) -> Self {
        self.norm_bound = b;
        self
    }

    pub fn with_mu_r_max(mut self, mu: f64) -> Self {
        self.mu_r_max = mu;
        self
    }

    pub fn with_mu_min(mut self, mu: f64) -> Self {
        self.mu_min = Some(mu);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn mu_r_max(&self) -> f64 {
        self.mu_r_max
    }

    pub fn mu_min(&self) -> Option<f64> {
        self.mu_min
    }

    pub fn is_stable(&self) -> bool {
        self.mu_r_max <= 0.0
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|(c, _)| matches!(c, Coeff::Time(_)))
    }

    pub fn terms(&self) -> &[(Coeff, CsrMatrix)] {
        &self.terms
    }

    /// `out += a · A0(t) v`
    pub fn apply_acc(&self, t: f64, a: C64, v: &[C64], out: &mut [C64]) {
        for (c, m) in &self.terms {
            let ct = a * c.at(t);
            if ct != ZERO {
                m.mul_acc(ct, v, out);
            }
        }
    }

    /// `out = A0(t) v`
    pub fn apply(&self, t: f64, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        self.apply_acc(t, ONE, v, out);
    }

    pub fn apply_vec(&self, t: f64, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.apply(t, v, &mut out);
        out
    }

    /// `out += a · A0(t)† v`
    pub fn adjoint_apply_acc(&self, t: f64, a: C64, v: &[C64], out: &mut [C64]) {
        for (c, m) in &self.terms {
            let ct = a * c.at(t).conj();
            if ct != ZERO {
                m.adjoint_mul_acc(ct, v, out);
            }
        }
    }

    /// `diag(A0(t), 0)` with `extra` decoupled coordinates appended.
    pub fn padded(&self, extra: usize) -> Self {
        let dim = self.dim + extra;
        let terms = self
            .terms
            .iter()
            .map(|(c, m)| {
                (
                    c.clone(),
                    CsrMatrix::from_triplets(dim, dim, m.triplets().collect()),
                )
            })
            .collect();
        Self {
            dim,
            terms,
            norm_bound: self.norm_bound,
            mu_r_max: self.mu_r_max.max(0.0),
            mu_min: self.mu_min.map(|m| m.min(0.0)),
        }
    }

    /// Explicit sparse matrix of `A0(t)`.
    pub fn csr_at(&self, t: f64) -> CsrMatrix {
        let trip = self
            .terms
            .iter()
            .flat_map(|(c, m)| {
                let ct = c.at(t);
                m.triplets()
                    .map(move |(r, k, v)| (r, k, ct * v))
                    .collect::<Vec<_>>()
            })
            .collect();
        CsrMatrix::from_triplets(self.dim, self.dim, trip)
    }

    pub fn dense(&self, t: f64) -> DMatrix<C64> {
        self.csr_at(t).to_dense()
    }

    /// Writes `A0(t)` in coordinate matrix-market text form.
    pub fn export_matrix_market(&self, t: f64, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_market(&self.csr_at(t), path)
    }
}

pub fn write_matrix_market(m: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(f, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (r, c, v) in m.triplets() {
        writeln!(f, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
    }
    Ok(())
}

/// Periodic finite-difference Laplacian `D·L_h` on the full grid of `domain`.
/// Boundary behavior is left entirely to the penalty projector.
pub fn laplacian_fd(
    domain: &Domain,
    diffusion: f64,
    h: f64,
    stencil: Stencil,
) -> Result<Generator> {
    if !(diffusion > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need D > 0 and h > 0, got D={diffusion}, h={h}"
        )));
    }
    let Stencil::ThreePointPeriodic = stencil;
    let (d, n) = (domain.d(), domain.n());
    let s = diffusion / (h * h);
    let mut trip = Vec::with_capacity(domain.size() * (2 * d + 1));
    for idx in 0..domain.size() {
        let j = domain.multi(idx);
        trip.push((idx, idx, C64::new(-2.0 * d as f64 * s, 0.0)));
        for axis in 0..d {
            for step in [1, n - 1] {
                let mut k = j.clone();
                k[axis] = (j[axis] + step) % n;
                trip.push((idx, flatten(&k, n), C64::new(s, 0.0)));
            }
        }
    }
    let bound = 4.0 * d as f64 * s;
    Ok(Generator {
        dim: domain.size(),
        terms: vec![(
            Coeff::Const(ONE),
            CsrMatrix::from_triplets(domain.size(), domain.size(), trip),
        )],
        norm_bound: bound,
        mu_r_max: 0.0,
        mu_min: Some(-bound),
    })
}

/// First-order form `[[0, I], [c²L, 0]]` of `u'' = c² L u`.
pub fn wave_block(l: &Generator, c2: f64) -> Result<Generator> {
    if l.is_time_dependent() {
        return Err(Error::InvalidArgument(
            "wave_block needs a constant generator".into(),
        ));
    }
    if !(c2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "c2 must be positive, got {c2}"
        )));
    }
    let n = l.dim;
    let eye = CsrMatrix::identity(n);
    let lower = l.csr_at(0.0).scaled(C64::new(c2, 0.0));
    let m = CsrMatrix::block(&[vec![None, Some(&eye)], vec![Some(&lower), None]], &[n, n]);
    Ok(Generator {
        dim: 2 * n,
        terms: vec![(Coeff::Const(ONE), m)],
        norm_bound: (c2 * l.norm_bound).max(1.0),
        mu_r_max: 0.0,
        mu_min: None,
    })
}

/// Power-iteration estimate of `‖A0(t)‖₂` with relative tolerance `tol`.
pub fn spectral_norm(g: &Generator, t: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let fwd = |x: &[C64], out: &mut [C64]| g.apply_acc(t, ONE, x, out);
    let adj = |x: &[C64], out: &mut [C64]| g.adjoint_apply_acc(t, ONE, x, out);
    linalg::power_norm(g.dim, &fwd, &adj, tol)
}

/// `max_t ‖P A0(t) + A0(t)† P‖₂` over the sampled times.
pub fn anticommutator_norm(g: &Generator, p: &Projector, times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::InvalidArgument(
            "anticommutator_norm needs at least one time".into(),
        ));
    }
    if p.dim() != g.dim {
        return Err(Error::DimMismatch {
            expected: g.dim,
            got: p.dim(),
        });
    }
    let mut best = 0.0f64;
    for &t in times {
        let x = |v: &[C64], out: &mut [C64]| {
            let av = g.apply_vec(t, v);
            let pav = p.apply(&av).expect("dimension checked");
            linalg::axpy(ONE, &pav, out);
            let pv = p.apply(v).expect("dimension checked");
            g.adjoint_apply_acc(t, ONE, &pv, out);
        };
        best = best.max(linalg::power_norm(g.dim, &x, &x, META_TOL)?);
    }
    Ok(best)
}

pub type VecFn = Arc<dyn Fn(f64, &mut [C64]) + Send + Sync>;

/// Inhomogeneity `b(t)` with declared bounds `B ≥ max‖b‖` and
/// `B_L1 ≥ ∫‖b‖` over the horizon.
#[derive(Clone)]
pub struct Forcing {
    dim: usize,
    eval: Option<VecFn>,
    constant: Option<Vec<C64>>,
    sup_norm: f64,
    l1_norm: f64,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing")
            .field("dim", &self.dim)
            .field("constant", &self.constant.is_some())
            .field("sup_norm", &self.sup_norm)
            .field("l1_norm", &self.l1_norm)
            .finish()
    }
}

impl Forcing {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            eval: None,
            constant: None,
            sup_norm: 0.0,
            l1_norm: 0.0,
        }
    }

    pub fn constant(b: Vec<C64>, horizon: f64) -> Self {
        let nb = linalg::norm(&b);
        if nb == 0.0 {
            return Self::zero(b.len());
        }
        Self {
            dim: b.len(),
            eval: None,
            sup_norm: nb,
            l1_norm: nb * horizon,
            constant: Some(b),
        }
    }

    /// Time-dependent forcing. Bounds are the sampled maximum and trapezoid
    /// integral over `samples` intervals, each inflated by 10%.
    pub fn from_fn(dim: usize, f: VecFn, horizon: f64, samples: usize) -> Self {
        let samples = samples.max(1);
        let mut buf = vec![ZERO; dim];
        let norms: Vec<f64> = (0..=samples)
            .map(|k| {
                f(horizon * k as f64 / samples as f64, &mut buf);
                linalg::norm(&buf)
            })
            .collect();
        let sup = norms.iter().cloned().fold(0.0, f64::max);
        let dt = horizon / samples as f64;
        let trap: f64 = norms.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
        Self {
            dim,
            eval: Some(f),
            constant: None,
            sup_norm: 1.1 * sup,
            l1_norm: 1.1 * trap,
        }
    }

    pub fn with_bounds(mut self, sup_norm: f64, l1_norm: f64) -> Self {
        self.sup_norm = sup_norm;
        self.l1_norm = l1_norm;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same forcing with `extra` zero coordinates appended.
    pub fn padded(&self, extra: usize) -> Self {
        let dim = self.dim + extra;
        let constant = self.constant.as_ref().map(|c| {
            let mut c = c.clone();
            c.resize(dim, ZERO);
            c
        });
        let eval = self.eval.as_ref().map(|f| {
            let f = f.clone();
            let n = self.dim;
            Arc::new(move |t: f64, out: &mut [C64]| {
                f(t, &mut out[..n]);
                out[n..].iter_mut().for_each(|z| *z = ZERO);
            }) as VecFn
        });
        Self {
            dim,
            eval,
            constant,
            sup_norm: self.sup_norm,
            l1_norm: self.l1_norm,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    pub fn is_zero(&self) -> bool {
        self.eval.is_none() && self.constant.is_none()
    }

    pub fn constant_value(&self) -> Option<&[C64]> {
        self.constant.as_deref()
    }

    /// `out = b(t)`
    pub fn eval(&self, t: f64, out: &mut [C64]) {
        match (&self.eval, &self.constant) {
            (Some(f), _) => f(t, out),
            (None, Some(c)) => out.copy_from_slice(c),
            (None, None) => out.iter_mut().for_each(|z| *z = ZERO),
        }
    }

    pub fn eval_vec(&self, t: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.eval(t, &mut out);
        out
    }
}
