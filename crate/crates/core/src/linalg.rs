//! Small complex linear-algebra toolkit: vector helpers, a compressed-row
//! sparse matrix, and a seeded power iteration for spectral norms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Seed used by every randomized routine in the crate.
pub const DEFAULT_SEED: u64 = 0x5eed_cafe;

/// Maximum number of power-iteration sweeps.
pub const MAX_POWER_ITERS: usize = 10_000;

/// `⟨u, v⟩`, conjugate-linear in the first argument.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sqr(v).sqrt()
}

/// `y += a·x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: C64, v: &mut [C64]) {
    for z in v.iter_mut() {
        *z *= a;
    }
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

pub fn add(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a + b).collect()
}

pub fn is_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn real_vec(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// Complex standard-normal vector from a seeded generator.
pub fn random_vector(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let (c, d): (f64, f64) = (rng.gen(), rng.gen());
            // Box-Muller, one complex sample from two uniform pairs
            let r = (-2.0 * (1.0 - a).ln()).sqrt();
            let s = (-2.0 * (1.0 - c).ln()).sqrt();
            C64::new(
                r * (2.0 * std::f64::consts::PI * b).cos(),
                s * (2.0 * std::f64::consts::PI * d).cos(),
            )
        })
        .collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Compressed sparse row matrix with complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets; duplicate entries are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != ZERO) {
            return;
        }
        let mut trip = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != ZERO {
                    trip.push((r, self.col_idx[k], self.values[k]));
                }
            }
        }
        let mut row_ptr = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &trip {
            row_ptr[r + 1] += 1;
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        self.col_idx = trip.iter().map(|t| t.1).collect();
        self.values = trip.iter().map(|t| t.2).collect();
        self.row_ptr = row_ptr;
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, ONE)).collect())
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// `out += a · M x`
    pub fn mul_acc(&self, a: C64, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o += a * acc;
        }
    }

    /// `out += a · M† x`
    pub fn adjoint_mul_acc(&self, a: C64, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        for (r, xr) in x.iter().enumerate() {
            let ax = a * xr;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += self.values[k].conj() * ax;
            }
        }
    }

    pub fn mul(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.nrows];
        self.mul_acc(ONE, x, &mut out);
        out
    }

    pub fn scaled(&self, a: C64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m.prune();
        m
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// Places `blocks[i][j]` at block position (i, j); `None` is a zero block.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>], sizes: &[usize]) -> Self {
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let total: usize = sizes.iter().sum();
        let mut trip = Vec::new();
        for (bi, row) in blocks.iter().enumerate() {
            for (bj, b) in row.iter().enumerate() {
                if let Some(m) = b {
                    assert_eq!(m.nrows, sizes[bi]);
                    assert_eq!(m.ncols, sizes[bj]);
                    trip.extend(
                        m.triplets()
                            .map(|(r, c, v)| (r + offsets[bi], c + offsets[bj], v)),
                    );
                }
            }
        }
        Self::from_triplets(total, total, trip)
    }
}

/// Estimates `‖A‖₂` by power iteration on `A†A` from a seeded random start.
///
/// Stops once the eigen-residual `‖A†A x − ρx‖` falls below `tol·ρ`.
pub fn power_norm(
    dim: usize,
    apply: &dyn Fn(&[C64], &mut [C64]),
    apply_adjoint: &dyn Fn(&[C64], &mut [C64]),
    tol: f64,
) -> Result<f64> {
    if dim == 0 {
        return Ok(0.0);
    }
    let mut rng = seeded_rng(DEFAULT_SEED);
    let mut x = random_vector(dim, &mut rng);
    let nx = norm(&x);
    scale(C64::new(1.0 / nx, 0.0), &mut x);
    let mut ax = vec![ZERO; dim];
    let mut bx = vec![ZERO; dim];
    for _ in 0..MAX_POWER_ITERS {
        ax.iter_mut().for_each(|z| *z = ZERO);
        apply(&x, &mut ax);
        bx.iter_mut().for_each(|z| *z = ZERO);
        apply_adjoint(&ax, &mut bx);
        let rho = dot(&x, &bx).re;
        if rho <= f64::MIN_POSITIVE {
            return Ok(0.0);
        }
        let resid: f64 = bx
            .iter()
            .zip(&x)
            .map(|(b, xi)| (b - rho * xi).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid <= tol * rho {
            return Ok(rho.sqrt());
        }
        let nb = norm(&bx);
        for (xi, bi) in x.iter_mut().zip(&bx) {
            *xi = bi / nb;
        }
    }
    Err(Error::NoConvergence(MAX_POWER_ITERS))
}
