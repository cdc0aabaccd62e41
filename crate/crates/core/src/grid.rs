//! Tensor-product grids on the unit box and their constraint regions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-point constraint flag. The numeric values match the boundary oracle's
/// two-qubit register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Interior,
    Dirichlet,
    Neumann,
    Robin,
}

impl Region {
    pub fn flag(self) -> u8 {
        match self {
            Region::Interior => 0,
            Region::Dirichlet => 1,
            Region::Neumann => 2,
            Region::Robin => 3,
        }
    }

    pub fn from_flag(f: u8) -> Option<Self> {
        match f {
            0 => Some(Region::Interior),
            1 => Some(Region::Dirichlet),
            2 => Some(Region::Neumann),
            3 => Some(Region::Robin),
            _ => None,
        }
    }

    fn is_derivative(self) -> bool {
        matches!(self, Region::Neumann | Region::Robin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobinCoeffs {
    pub alpha: f64,
    pub beta: f64,
}

/// One explicitly listed point of a custom domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub index: Vec<usize>,
    pub region: Region,
    #[serde(default)]
    pub neighbors: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundarySpec {
    /// Every index with a coordinate in `{0, n-1}` is Dirichlet.
    WallDirichlet,
    /// Wall points paired with their inward neighbor. Corners, and the
    /// adjacent wall point that would share a neighbor with another wall
    /// point, are left unconstrained.
    WallNeumannInward,
    /// Dirichlet outside a ball of the given radius around the box centre.
    CircleDirichlet(f64),
    Custom {
        entries: Vec<RegionEntry>,
        robin: Option<RobinCoeffs>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    d: usize,
    n: usize,
    regions: Vec<Region>,
    neighbors: BTreeMap<usize, Vec<usize>>,
    robin: Option<RobinCoeffs>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// A derivative point lists another derivative point as neighbor.
    NeighborIsConstrained,
    /// Two derivative points share a neighbor.
    SharedNeighbor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub points: Vec<usize>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

pub fn flatten(j: &[usize], n: usize) -> usize {
    j.iter().fold(0, |acc, &c| acc * n + c)
}

pub fn unflatten(mut idx: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; d];
    for k in (0..d).rev() {
        out[k] = idx % n;
        idx /= n;
    }
    out
}

fn on_wall(c: usize, n: usize) -> bool {
    c == 0 || c == n - 1
}

pub fn build_grid(d: usize, n: usize, spec: &BoundarySpec) -> Result<Domain> {
    if d == 0 || n < 2 {
        return Err(Error::InvalidSpec(format!(
            "need d >= 1 and n >= 2, got d={d}, n={n}"
        )));
    }
    let size = n
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidSpec(format!("n^d overflows for d={d}, n={n}")))?;
    let mut dom = Domain {
        d,
        n,
        regions: vec![Region::Interior; size],
        neighbors: BTreeMap::new(),
        robin: None,
    };
    match spec {
        BoundarySpec::WallDirichlet => {
            for idx in 0..size {
                if unflatten(idx, d, n).iter().any(|&c| on_wall(c, n)) {
                    dom.regions[idx] = Region::Dirichlet;
                }
            }
        }
        BoundarySpec::CircleDirichlet(r) => {
            for idx in 0..size {
                let j = unflatten(idx, d, n);
                let dist2: f64 = dom.unit_coords(&j).iter().map(|x| (x - 0.5).powi(2)).sum();
                if dist2.sqrt() >= *r {
                    dom.regions[idx] = Region::Dirichlet;
                }
            }
        }
        BoundarySpec::WallNeumannInward => {
            for idx in 0..size {
                let j = unflatten(idx, d, n);
                let walls: Vec<usize> = (0..d).filter(|&k| on_wall(j[k], n)).collect();
                if walls.len() != 1 {
                    continue;
                }
                let a = walls[0];
                // lowest-axis rule: drop the wall point whose neighbor is
                // also claimed by a wall point on a lower axis
                if (0..a).any(|b| j[b] == 1 || j[b] == n - 2) {
                    continue;
                }
                let mut nb = j.clone();
                nb[a] = if j[a] == 0 { 1 } else { n - 2 };
                dom.regions[idx] = Region::Neumann;
                dom.neighbors.insert(idx, vec![flatten(&nb, n)]);
            }
        }
        BoundarySpec::Custom { entries, robin } => {
            fill_custom(&mut dom, entries, *robin)?;
            let report = validate_neighbor_sets(&dom);
            if !report.is_empty() {
                let msgs: Vec<_> = report
                    .violations
                    .iter()
                    .map(|v| v.message.clone())
                    .collect();
                return Err(Error::InvalidSpec(msgs.join("; ")));
            }
        }
    }
    Ok(dom)
}

/// Builds a custom domain without enforcing the neighbor-set rules, so that
/// conflicting layouts can be inspected with [`validate_neighbor_sets`].
pub fn build_custom_unchecked(
    d: usize,
    n: usize,
    entries: &[RegionEntry],
    robin: Option<RobinCoeffs>,
) -> Result<Domain> {
    let mut dom = build_grid(d, n, &BoundarySpec::WallDirichlet)?;
    dom.regions.iter_mut().for_each(|r| *r = Region::Interior);
    fill_custom(&mut dom, entries, robin)?;
    Ok(dom)
}

fn fill_custom(
    dom: &mut Domain,
    entries: &[RegionEntry],
    robin: Option<RobinCoeffs>,
) -> Result<()> {
    let mut seen = BTreeSet::new();
    for e in entries {
        let idx = dom.linear(&e.index)?;
        if !seen.insert(idx) {
            return Err(Error::InvalidSpec(format!(
                "index {:?} listed twice",
                e.index
            )));
        }
        dom.regions[idx] = e.region;
        if e.region.is_derivative() {
            if e.neighbors.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "{:?} point {:?} has no neighbors",
                    e.region, e.index
                )));
            }
            let mut nbs = Vec::with_capacity(e.neighbors.len());
            for nb in &e.neighbors {
                let k = dom.linear(nb)?;
                let close = e.index.iter().zip(nb).all(|(&a, &b)| a.abs_diff(b) <= 1);
                if !close || k == idx {
                    return Err(Error::InvalidSpec(format!(
                        "neighbor {nb:?} of {:?} is not an adjacent point",
                        e.index
                    )));
                }
                nbs.push(k);
            }
            nbs.sort_unstable();
            nbs.dedup();
            dom.neighbors.insert(idx, nbs);
        } else if !e.neighbors.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "{:?} point {:?} cannot carry neighbors",
                e.region, e.index
            )));
        }
    }
    let has_robin = dom.regions.contains(&Region::Robin);
    match (has_robin, robin) {
        (true, None) => return Err(Error::InvalidSpec("Robin points need (alpha, beta)".into())),
        (true, Some(c)) if !(c.alpha.is_finite() && c.beta.is_finite()) => {
            return Err(Error::InvalidSpec(
                "Robin coefficients must be finite".into(),
            ))
        }
        _ => dom.robin = if has_robin { robin } else { None },
    }
    Ok(())
}

/// Lists every violation of the two fast-forwarding rules: neighbors of a
/// derivative point must not be derivative points themselves, and no two
/// derivative points may share a neighbor. Conflicts are resolved by local
/// refinement, which this crate does not attempt.
pub fn validate_neighbor_sets(domain: &Domain) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut reported_pairs = BTreeSet::new();
    let mut claimants: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&j, nbs) in &domain.neighbors {
        for &k in nbs {
            claimants.entry(k).or_default().push(j);
            if domain.regions[k].is_derivative() && reported_pairs.insert((j.min(k), j.max(k))) {
                report.violations.push(Violation {
                    rule: Rule::NeighborIsConstrained,
                    points: vec![j.min(k), j.max(k)],
                    message: format!(
                        "neighbor {:?} of {:?} is itself a derivative point; refine locally",
                        domain.multi(k),
                        domain.multi(j)
                    ),
                });
            }
        }
    }
    for (k, owners) in claimants {
        if owners.len() > 1 {
            report.violations.push(Violation {
                rule: Rule::SharedNeighbor,
                points: owners.clone(),
                message: format!(
                    "{} derivative points share neighbor {:?}; refine locally",
                    owners.len(),
                    domain.multi(k)
                ),
            });
        }
    }
    report
}

pub fn classify(domain: &Domain, j: &[usize]) -> Result<Region> {
    Ok(domain.regions[domain.linear(j)?])
}

impl Domain {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points, `n^d`.
    pub fn size(&self) -> usize {
        self.regions.len()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn robin(&self) -> Option<RobinCoeffs> {
        self.robin
    }

    pub fn region(&self, idx: usize) -> Region {
        self.regions[idx]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Neighbor sets keyed by linear index (derivative points only).
    pub fn neighbor_sets(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.neighbors
    }

    pub fn neighbors_of(&self, idx: usize) -> &[usize] {
        self.neighbors.get(&idx).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn indices_of(&self, region: Region) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| self.regions[i] == region)
            .collect()
    }

    pub fn linear(&self, j: &[usize]) -> Result<usize> {
        if j.len() != self.d || j.iter().any(|&c| c >= self.n) {
            return Err(Error::OutOfBounds {
                index: j.to_vec(),
                d: self.d,
                n: self.n,
            });
        }
        Ok(flatten(j, self.n))
    }

    pub fn multi(&self, idx: usize) -> Vec<usize> {
        unflatten(idx, self.d, self.n)
    }

    /// Position of a grid point in the unit box.
    pub fn unit_coords(&self, j: &[usize]) -> Vec<f64> {
        let h = self.spacing();
        j.iter().map(|&c| c as f64 * h).collect()
    }

    /// Same geometry and regions with the Robin coefficients replaced.
    pub fn with_robin(mut self, coeffs: RobinCoeffs) -> Self {
        self.robin = Some(coeffs);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DomainJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let dj: DomainJson = serde_json::from_str(s)?;
        build_grid(
            dj.d,
            dj.n,
            &BoundarySpec::Custom {
                entries: dj.regions,
                robin: dj.robin,
            },
        )
    }
}

/// Serialized form. Points not listed are interior.
#[derive(Serialize, Deserialize)]
struct DomainJson {
    d: usize,
    n: usize,
    regions: Vec<RegionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robin: Option<RobinCoeffs>,
}

impl From<&Domain> for DomainJson {
    fn from(dom: &Domain) -> Self {
        let regions = (0..dom.size())
            .filter(|&i| dom.regions[i] != Region::Interior)
            .map(|i| RegionEntry {
                index: dom.multi(i),
                region: dom.regions[i],
                neighbors: dom.neighbors_of(i).iter().map(|&k| dom.multi(k)).collect(),
            })
            .collect();
        DomainJson {
            d: dom.d,
            n: dom.n,
            regions,
            robin: dom.robin,
        }
    }
}
