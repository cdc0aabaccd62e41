//! Constraint projectors and their closed-form exponentials.
//!
//! Every idempotent kind satisfies `e^{ξP} = (I − P) + e^ξ P`, so the
//! exponential costs one pass over the support regardless of `ξ`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{validate_neighbor_sets, Domain, Region};
use crate::linalg::{self, CsrMatrix, C64, ONE, ZERO};

/// Largest dimension for which a dense export is allowed.
pub const DENSE_GUARD: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum ProjectorKind {
    /// Orthogonal projection onto the listed coordinates.
    PointSet(Vec<usize>),
    /// `½(I − S)` with `S` the product of the disjoint transpositions.
    SwapNetwork(Vec<(usize, usize)>),
    /// `α P_V + β ½(I − S)`. Hermitian, but idempotent only in special cases.
    Robin {
        alpha: f64,
        beta: f64,
        value_support: Vec<usize>,
        pairs: Vec<(usize, usize)>,
    },
    /// Sum of parts with pairwise disjoint supports.
    Sum(Vec<Projector>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    dim: usize,
    kind: ProjectorKind,
}

fn check_indices(dim: usize, idx: impl IntoIterator<Item = usize>) -> Result<()> {
    for i in idx {
        if i >= dim {
            return Err(Error::InvalidArgument(format!(
                "index {i} out of range for dimension {dim}"
            )));
        }
    }
    Ok(())
}

fn check_pairs(dim: usize, pairs: &[(usize, usize)]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &(j, k) in pairs {
        if j >= dim || k >= dim {
            return Err(Error::InvalidPairs(format!(
                "pair ({j},{k}) out of range for dimension {dim}"
            )));
        }
        if j == k || !seen.insert(j) || !seen.insert(k) {
            return Err(Error::InvalidPairs(format!(
                "pair ({j},{k}) overlaps another pair"
            )));
        }
    }
    Ok(())
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

#[inline]
fn swap_exp(e: C64, v: &mut [C64], j: usize, k: usize) {
    let s = 0.5 * (v[j] + v[k]);
    let d = 0.5 * (v[j] - v[k]);
    v[j] = s + e * d;
    v[k] = s - e * d;
}

impl Projector {
    pub fn point_set(dim: usize, indices: Vec<usize>) -> Result<Self> {
        check_indices(dim, indices.iter().copied())?;
        Ok(Self {
            dim,
            kind: ProjectorKind::PointSet(sorted(indices)),
        })
    }

    pub fn swap_network(dim: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        check_pairs(dim, &pairs)?;
        Ok(Self {
            dim,
            kind: ProjectorKind::SwapNetwork(pairs),
        })
    }

    pub fn robin(
        dim: usize,
        alpha: f64,
        beta: f64,
        value_support: Vec<usize>,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Robin coefficients must be finite, got ({alpha}, {beta})"
            )));
        }
        check_indices(dim, value_support.iter().copied())?;
        check_pairs(dim, &pairs)?;
        Ok(Self {
            dim,
            kind: ProjectorKind::Robin {
                alpha,
                beta,
                value_support: sorted(value_support),
                pairs,
            },
        })
    }

    /// Sum of parts acting on disjoint coordinates (nested sums are flattened).
    pub fn sum(dim: usize, parts: Vec<Projector>) -> Result<Self> {
        let mut flat = Vec::new();
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: p.dim,
                });
            }
            match p.kind {
                ProjectorKind::Sum(inner) => flat.extend(inner),
                _ => flat.push(p),
            }
        }
        let mut seen = BTreeSet::new();
        for p in &flat {
            for i in p.support() {
                if !seen.insert(i) {
                    return Err(Error::NonIdempotent(format!(
                        "summands overlap at coordinate {i}"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            kind: ProjectorKind::Sum(flat),
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            kind: ProjectorKind::PointSet(Vec::new()),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            kind: ProjectorKind::PointSet((0..dim).collect()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ProjectorKind {
        &self.kind
    }

    /// Coordinates on which the projector acts nontrivially.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = match &self.kind {
            ProjectorKind::PointSet(ix) => ix.clone(),
            ProjectorKind::SwapNetwork(pairs) => pairs.iter().flat_map(|&(j, k)| [j, k]).collect(),
            ProjectorKind::Robin {
                value_support,
                pairs,
                ..
            } => value_support
                .iter()
                .copied()
                .chain(pairs.iter().flat_map(|&(j, k)| [j, k]))
                .collect(),
            ProjectorKind::Sum(parts) => parts.iter().flat_map(|p| p.support()).collect(),
        };
        s.sort_unstable();
        s.dedup();
        s
    }

    /// True for the kinds that are orthogonal projections by construction.
    pub fn is_orthogonal_projection(&self) -> bool {
        match &self.kind {
            ProjectorKind::PointSet(_) | ProjectorKind::SwapNetwork(_) => true,
            ProjectorKind::Robin { alpha, beta, .. } => {
                (*alpha == 0.0 && (*beta == 0.0 || *beta == 1.0)) || (*beta == 0.0 && *alpha == 1.0)
            }
            ProjectorKind::Sum(parts) => parts.iter().all(Projector::is_orthogonal_projection),
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// `out += a · P v`
    fn apply_acc(&self, a: C64, v: &[C64], out: &mut [C64]) {
        match &self.kind {
            ProjectorKind::PointSet(ix) => {
                for &i in ix {
                    out[i] += a * v[i];
                }
            }
            ProjectorKind::SwapNetwork(pairs) => {
                for &(j, k) in pairs {
                    let d = 0.5 * a * (v[j] - v[k]);
                    out[j] += d;
                    out[k] -= d;
                }
            }
            ProjectorKind::Robin {
                alpha,
                beta,
                value_support,
                pairs,
            } => {
                let aa = a * alpha;
                for &i in value_support {
                    out[i] += aa * v[i];
                }
                let ab = a * beta;
                for &(j, k) in pairs {
                    let d = 0.5 * ab * (v[j] - v[k]);
                    out[j] += d;
                    out[k] -= d;
                }
            }
            ProjectorKind::Sum(parts) => parts.iter().for_each(|p| p.apply_acc(a, v, out)),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(v.len())?;
        let mut out = vec![ZERO; self.dim];
        self.apply_acc(ONE, v, &mut out);
        Ok(out)
    }

    /// `out += a · P v` with the dimension checked.
    pub fn apply_into(&self, a: C64, v: &[C64], out: &mut [C64]) -> Result<()> {
        self.check_dim(v.len())?;
        self.check_dim(out.len())?;
        self.apply_acc(a, v, out);
        Ok(())
    }

    /// `(I − P) v`
    pub fn complement_apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(v.len())?;
        let mut out = v.to_vec();
        self.apply_acc(-ONE, v, &mut out);
        Ok(out)
    }

    /// Errors unless `e^{ξP}` has an exact product form for this projector.
    pub fn check_exp(&self) -> Result<()> {
        match &self.kind {
            ProjectorKind::Robin {
                alpha,
                beta,
                value_support,
                pairs,
            } if *alpha != 0.0 && *beta != 0.0 => {
                let vs: BTreeSet<usize> = value_support.iter().copied().collect();
                for &(j, k) in pairs {
                    if vs.contains(&j) != vs.contains(&k) {
                        return Err(Error::NonIdempotent(format!(
                            "value support is not invariant under the swap ({j},{k}); \
                             include the swap targets (ghost construction)"
                        )));
                    }
                }
                Ok(())
            }
            ProjectorKind::Sum(parts) => parts.iter().try_for_each(Projector::check_exp),
            _ => Ok(()),
        }
    }

    fn exp_in_place_unchecked(&self, xi: C64, v: &mut [C64]) {
        match &self.kind {
            ProjectorKind::PointSet(ix) => {
                let e = xi.exp();
                for &i in ix {
                    v[i] *= e;
                }
            }
            ProjectorKind::SwapNetwork(pairs) => {
                let e = xi.exp();
                for &(j, k) in pairs {
                    swap_exp(e, v, j, k);
                }
            }
            ProjectorKind::Robin {
                alpha,
                beta,
                value_support,
                pairs,
            } => {
                // the two factors commute (checked), so the product is exact
                let ea = (xi * alpha).exp();
                for &i in value_support {
                    v[i] *= ea;
                }
                let eb = (xi * beta).exp();
                for &(j, k) in pairs {
                    swap_exp(eb, v, j, k);
                }
            }
            ProjectorKind::Sum(parts) => parts.iter().for_each(|p| p.exp_in_place_unchecked(xi, v)),
        }
    }

    /// `v ← e^{ξP} v`
    pub fn exp_apply_in_place(&self, xi: C64, v: &mut [C64]) -> Result<()> {
        self.check_dim(v.len())?;
        self.check_exp()?;
        self.exp_in_place_unchecked(xi, v);
        Ok(())
    }

    pub fn exp_apply(&self, xi: C64, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = v.to_vec();
        self.exp_apply_in_place(xi, &mut out)?;
        Ok(out)
    }

    /// Hot-loop variant; the caller must have run [`Projector::check_exp`].
    pub(crate) fn exp_apply_fast(&self, xi: C64, v: &mut [C64]) {
        debug_assert_eq!(v.len(), self.dim);
        self.exp_in_place_unchecked(xi, v);
    }

    /// `⟨v, P v⟩`, the squared constraint norm (real for Hermitian `P`).
    pub fn quadratic_form(&self, v: &[C64]) -> Result<f64> {
        let pv = self.apply(v)?;
        Ok(linalg::dot(v, &pv).re)
    }

    /// `‖v‖_{S_c} = sqrt⟨v, P v⟩`
    pub fn constraint_norm(&self, v: &[C64]) -> Result<f64> {
        Ok(self.quadratic_form(v)?.max(0.0).sqrt())
    }

    /// `S v` for a swap network (or the swap part of a Robin projector).
    pub fn swap_apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(v.len())?;
        let pairs = match &self.kind {
            ProjectorKind::SwapNetwork(p) => p,
            ProjectorKind::Robin { pairs, .. } => pairs,
            _ => {
                return Err(Error::InvalidArgument(
                    "projector has no swap network".into(),
                ))
            }
        };
        let mut out = v.to_vec();
        for &(j, k) in pairs {
            out.swap(j, k);
        }
        Ok(out)
    }

    /// The same projector acting on coordinates `offset..offset+dim` of a
    /// larger space of dimension `total`.
    pub fn embed(&self, offset: usize, total: usize) -> Result<Self> {
        if offset + self.dim > total {
            return Err(Error::DimMismatch {
                expected: total,
                got: offset + self.dim,
            });
        }
        let sh = |ix: &[usize]| ix.iter().map(|i| i + offset).collect::<Vec<_>>();
        let shp = |p: &[(usize, usize)]| {
            p.iter()
                .map(|&(j, k)| (j + offset, k + offset))
                .collect::<Vec<_>>()
        };
        let kind = match &self.kind {
            ProjectorKind::PointSet(ix) => ProjectorKind::PointSet(sh(ix)),
            ProjectorKind::SwapNetwork(p) => ProjectorKind::SwapNetwork(shp(p)),
            ProjectorKind::Robin {
                alpha,
                beta,
                value_support,
                pairs,
            } => ProjectorKind::Robin {
                alpha: *alpha,
                beta: *beta,
                value_support: sh(value_support),
                pairs: shp(pairs),
            },
            ProjectorKind::Sum(parts) => ProjectorKind::Sum(
                parts
                    .iter()
                    .map(|p| p.embed(offset, total))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self { dim: total, kind })
    }

    /// `diag(P, P)` on a doubled space.
    pub fn doubled(&self) -> Result<Self> {
        Projector::sum(
            2 * self.dim,
            vec![
                self.embed(0, 2 * self.dim)?,
                self.embed(self.dim, 2 * self.dim)?,
            ],
        )
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut trip = Vec::new();
        self.push_triplets(&mut trip);
        CsrMatrix::from_triplets(self.dim, self.dim, trip)
    }

    fn push_triplets(&self, trip: &mut Vec<(usize, usize, C64)>) {
        let half = C64::new(0.5, 0.0);
        let swap = |trip: &mut Vec<_>, pairs: &[(usize, usize)], w: C64| {
            for &(j, k) in pairs {
                trip.extend([
                    (j, j, w * half),
                    (k, k, w * half),
                    (j, k, -w * half),
                    (k, j, -w * half),
                ]);
            }
        };
        match &self.kind {
            ProjectorKind::PointSet(ix) => trip.extend(ix.iter().map(|&i| (i, i, ONE))),
            ProjectorKind::SwapNetwork(pairs) => swap(trip, pairs, ONE),
            ProjectorKind::Robin {
                alpha,
                beta,
                value_support,
                pairs,
            } => {
                trip.extend(value_support.iter().map(|&i| (i, i, C64::new(*alpha, 0.0))));
                swap(trip, pairs, C64::new(*beta, 0.0));
            }
            ProjectorKind::Sum(parts) => parts.iter().for_each(|p| p.push_triplets(trip)),
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        if self.dim > DENSE_GUARD {
            return Err(Error::InvalidArgument(format!(
                "dense export limited to N <= {DENSE_GUARD}, got {}",
                self.dim
            )));
        }
        Ok(self.to_csr().to_dense())
    }
}

fn derivative_pairs(domain: &Domain, region: Region) -> Result<Vec<(usize, usize)>> {
    let report = validate_neighbor_sets(domain);
    if !report.is_empty() {
        let msgs: Vec<_> = report.violations.into_iter().map(|v| v.message).collect();
        return Err(Error::InvalidNeighborSets(msgs.join("; ")));
    }
    let mut pairs = Vec::new();
    for j in domain.indices_of(region) {
        match domain.neighbors_of(j) {
            [k] => {
                if domain.region(*k) == Region::Dirichlet {
                    return Err(Error::InvalidNeighborSets(format!(
                        "neighbor of {:?} is a Dirichlet point",
                        domain.multi(j)
                    )));
                }
                pairs.push((j, *k));
            }
            nbs => {
                return Err(Error::InvalidNeighborSets(format!(
                    "point {:?} has {} neighbors; only two-point differences are supported",
                    domain.multi(j),
                    nbs.len()
                )))
            }
        }
    }
    Ok(pairs)
}

pub fn dirichlet_projector(domain: &Domain) -> Result<Projector> {
    let ix = domain.indices_of(Region::Dirichlet);
    if ix.is_empty() {
        return Err(Error::EmptyRegion("Dirichlet"));
    }
    Projector::point_set(domain.size(), ix)
}

/// `½(I − S)` pairing each Neumann point with its single neighbor.
pub fn neumann_projector(domain: &Domain) -> Result<Projector> {
    let pairs = derivative_pairs(domain, Region::Neumann)?;
    if pairs.is_empty() {
        return Err(Error::EmptyRegion("Neumann"));
    }
    Projector::swap_network(domain.size(), pairs)
}

/// `α Σ_{j∈Γ_R} |j⟩⟨j| + β ½(I − S_R)`. Its exponential is exact only when
/// `α = 0` or `β = 0`; see [`robin_projector_ghost`] for the commuting form.
pub fn robin_projector(domain: &Domain, alpha: f64, beta: f64) -> Result<Projector> {
    let pairs = derivative_pairs(domain, Region::Robin)?;
    if pairs.is_empty() {
        return Err(Error::EmptyRegion("Robin"));
    }
    let vs = domain.indices_of(Region::Robin);
    Projector::robin(domain.size(), alpha, beta, vs, pairs)
}

/// Robin projector whose value part also covers the swap targets, which
/// makes the two parts commute and the product exponential exact.
pub fn robin_projector_ghost(domain: &Domain, alpha: f64, beta: f64) -> Result<Projector> {
    let pairs = derivative_pairs(domain, Region::Robin)?;
    if pairs.is_empty() {
        return Err(Error::EmptyRegion("Robin"));
    }
    let vs = pairs.iter().flat_map(|&(j, k)| [j, k]).collect();
    Projector::robin(domain.size(), alpha, beta, vs, pairs)
}

/// `½(I − S)` over cross-interface pairs, enforcing `u_k = γ u_l` with γ = 1.
pub fn interface_projector(dim: usize, pairs: &[(usize, usize)], gamma: f64) -> Result<Projector> {
    if gamma != 1.0 {
        return Err(Error::InvalidPairs(format!(
            "only gamma = 1 keeps the projector Hermitian, got {gamma}"
        )));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidPairs("no interface pairs".into()));
    }
    Projector::swap_network(dim, pairs.to_vec())
}

/// All constraints of the domain: Dirichlet points, Neumann pairs and (when
/// present) the literal Robin combination with the domain's coefficients.
pub fn constraint_projector(domain: &Domain) -> Result<Projector> {
    let mut parts = Vec::new();
    if !domain.indices_of(Region::Dirichlet).is_empty() {
        parts.push(dirichlet_projector(domain)?);
    }
    if !domain.indices_of(Region::Neumann).is_empty() {
        parts.push(neumann_projector(domain)?);
    }
    if !domain.indices_of(Region::Robin).is_empty() {
        let c = domain
            .robin()
            .ok_or_else(|| Error::InvalidSpec("Robin points need (alpha, beta)".into()))?;
        parts.push(robin_projector(domain, c.alpha, c.beta)?);
    }
    match parts.len() {
        0 => Ok(Projector::zero(domain.size())),
        1 => Ok(parts.pop().unwrap()),
        _ => Projector::sum(domain.size(), parts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundarySpec};

    #[test]
    fn line_dirichlet() {
        let dom = build_grid(1, 4, &BoundarySpec::WallDirichlet).unwrap();
        let p = dirichlet_projector(&dom).unwrap();
        let v: Vec<C64> = (1..=4).map(|k| C64::new(k as f64, 0.0)).collect();
        let pv = p.apply(&v).unwrap();
        assert_eq!(pv, vec![v[0], ZERO, ZERO, v[3]]);
    }

    #[test]
    fn swap_exp_inverse() {
        let p = Projector::swap_network(4, vec![(0, 3), (1, 2)]).unwrap();
        let v: Vec<C64> = (0..4).map(|k| C64::new(k as f64, 1.0 - k as f64)).collect();
        let xi = C64::new(0.3, -2.0);
        let w = p.exp_apply(-xi, &p.exp_apply(xi, &v).unwrap()).unwrap();
        for (a, b) in w.iter().zip(&v) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn overlapping_pairs_rejected() {
        assert!(matches!(
            Projector::swap_network(4, vec![(0, 1), (1, 2)]),
            Err(Error::InvalidPairs(_))
        ));
        assert!(interface_projector(4, &[(0, 1)], 0.5).is_err());
    }
}
