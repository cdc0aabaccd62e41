//! Statevector emulation of the fast-forwarded projector circuits.
//!
//! Qubits are little-endian within the amplitude index and laid out as
//! `state | bdry (2) | zeta (2 per axis) | ancilla`. Oracles are classical
//! lookup tables over the state register, so every gate is either a basis
//! permutation, a diagonal phase or a Hadamard.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Region};
use crate::linalg::{self, C64, ZERO};
use crate::projectors::{self, Projector};

/// Emulator guard on the total qubit count.
pub const QUBIT_GUARD: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub d: usize,
    pub n: usize,
    pub axis_bits: usize,
    pub state_qubits: usize,
    pub bdry_qubits: usize,
    pub zeta_qubits: usize,
    pub ancilla: usize,
}

impl RegisterLayout {
    pub fn for_domain(domain: &Domain) -> Result<Self> {
        let axis_bits = (usize::BITS - (domain.n() - 1).leading_zeros()) as usize;
        let d = domain.d();
        let l = Self {
            d,
            n: domain.n(),
            axis_bits,
            state_qubits: d * axis_bits,
            bdry_qubits: 2,
            zeta_qubits: 2 * d,
            ancilla: 1,
        };
        l.check_guard(QUBIT_GUARD)?;
        Ok(l)
    }

    pub fn total(&self) -> usize {
        self.state_qubits + self.bdry_qubits + self.zeta_qubits + self.ancilla
    }

    pub fn check_guard(&self, guard: usize) -> Result<()> {
        if self.total() > guard {
            return Err(Error::TooManyQubits {
                needed: self.total(),
                guard,
            });
        }
        Ok(())
    }

    pub fn bdry_offset(&self) -> usize {
        self.state_qubits
    }

    pub fn zeta_offset(&self) -> usize {
        self.state_qubits + self.bdry_qubits
    }

    pub fn ancilla_qubit(&self) -> usize {
        self.zeta_offset() + self.zeta_qubits
    }

    fn axis_shift(&self, a: usize) -> usize {
        self.axis_bits * (self.d - 1 - a)
    }

    /// State-register value of a grid point.
    pub fn encode_point(&self, j: &[usize]) -> usize {
        j.iter()
            .enumerate()
            .fold(0, |acc, (a, &c)| acc | (c << self.axis_shift(a)))
    }

    /// Grid coordinates of a state-register value, if they lie on the grid.
    pub fn decode_point(&self, s: usize) -> Option<Vec<usize>> {
        let mask = (1 << self.axis_bits) - 1;
        let j: Vec<usize> = (0..self.d)
            .map(|a| (s >> self.axis_shift(a)) & mask)
            .collect();
        j.iter().all(|&c| c < self.n).then_some(j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSet {
    Neumann,
    Robin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    X(usize),
    /// `e^{iθ}` on `|1⟩` of the target.
    Phase {
        target: usize,
        theta: f64,
    },
    /// `e^{iθ}` where the bdry register holds `value`.
    FlagPhase {
        value: u8,
        theta: f64,
    },
    /// `bdry ^= flag(state)`.
    BoundaryOracle,
    /// `zeta ^= enc(±(partner(s) − s))` for points of the given pair set.
    NeighborOracle {
        set: PairSet,
        negate: bool,
        control: Option<usize>,
    },
    /// `state_a += zeta_a (mod 2^bits)` on every axis.
    Cadd {
        control: Option<usize>,
    },
}

/// One entry of the exported gate list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub gate: String,
    pub targets: Vec<usize>,
    pub controls: Vec<usize>,
    pub param: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amps: Vec<C64>,
}

impl StateVector {
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Loads a grid vector into the state register with all other registers
    /// in `|0⟩`.
    pub fn from_grid(layout: &RegisterLayout, v: &[C64]) -> Result<Self> {
        let size = layout.n.pow(layout.d as u32);
        if v.len() != size {
            return Err(Error::DimMismatch {
                expected: size,
                got: v.len(),
            });
        }
        let mut amps = vec![ZERO; 1 << layout.total()];
        for (k, &x) in v.iter().enumerate() {
            let j = crate::grid::unflatten(k, layout.d, layout.n);
            amps[layout.encode_point(&j)] = x;
        }
        Ok(Self {
            n_qubits: layout.total(),
            amps,
        })
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    /// Probability of measuring `|1⟩` on qubit `q`.
    pub fn prob_one(&self, q: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i >> q & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Circuit {
    layout: RegisterLayout,
    flags: Vec<u8>,
    neumann: Vec<Option<Vec<i64>>>,
    robin: Vec<Option<Vec<i64>>>,
    gates: Vec<Gate>,
}

/// Outcome of running a circuit on a grid vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Emulated {
    pub output: Vec<C64>,
    /// Probability of the discarded ancilla reading `|1⟩`.
    pub ancilla_one_prob: f64,
    /// Squared norm left outside `bdry = zeta = ancilla = 0`.
    pub leakage: f64,
}

fn offset_table(
    layout: &RegisterLayout,
    domain: &Domain,
    pairs: &[(usize, usize)],
) -> Result<Vec<Option<Vec<i64>>>> {
    let mut table = vec![None; 1 << layout.state_qubits];
    for &(j, k) in pairs {
        let (mj, mk) = (domain.multi(j), domain.multi(k));
        let delta: Vec<i64> = mk
            .iter()
            .zip(&mj)
            .map(|(&b, &a)| b as i64 - a as i64)
            .collect();
        if delta.iter().any(|x| x.abs() > 1) {
            return Err(Error::InvalidNeighborSets(format!(
                "offset {delta:?} between {mj:?} and {mk:?} exceeds the unit zeta register"
            )));
        }
        table[layout.encode_point(&mj)] = Some(delta.clone());
        table[layout.encode_point(&mk)] = Some(delta.iter().map(|x| -x).collect());
    }
    Ok(table)
}

fn pairs_of(p: &Projector) -> Vec<(usize, usize)> {
    match p.kind() {
        projectors::ProjectorKind::SwapNetwork(pairs) => pairs.clone(),
        projectors::ProjectorKind::Robin { pairs, .. } => pairs.clone(),
        _ => Vec::new(),
    }
}

impl Circuit {
    /// Empty circuit carrying the domain's oracle tables.
    pub fn new(domain: &Domain) -> Result<Self> {
        let layout = RegisterLayout::for_domain(domain)?;
        let mut flags = vec![0u8; 1 << layout.state_qubits];
        for (k, r) in domain.regions().iter().enumerate() {
            flags[layout.encode_point(&domain.multi(k))] = r.flag();
        }
        let neumann = if domain.indices_of(Region::Neumann).is_empty() {
            vec![None; flags.len()]
        } else {
            offset_table(
                &layout,
                domain,
                &pairs_of(&projectors::neumann_projector(domain)?),
            )?
        };
        let robin = if domain.indices_of(Region::Robin).is_empty() {
            vec![None; flags.len()]
        } else {
            offset_table(
                &layout,
                domain,
                &pairs_of(&projectors::robin_projector(domain, 1.0, 1.0)?),
            )?
        };
        Ok(Self {
            layout,
            flags,
            neumann,
            robin,
            gates: Vec::new(),
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn push(&mut self, g: Gate) -> &mut Self {
        self.gates.push(g);
        self
    }

    /// Appends the swap `S` over one pair set, optionally controlled.
    pub fn push_swap(&mut self, set: PairSet, control: Option<usize>) -> &mut Self {
        self.push(Gate::NeighborOracle {
            set,
            negate: false,
            control,
        });
        self.push(Gate::Cadd { control });
        self.push(Gate::NeighborOracle {
            set,
            negate: true,
            control,
        })
    }

    fn push_flag_phase(&mut self, value: u8, theta: f64) {
        self.push(Gate::BoundaryOracle);
        self.push(Gate::FlagPhase { value, theta });
        self.push(Gate::BoundaryOracle);
    }

    /// `½(I + S) + e^{−iφ}·½(I − S)` via Hadamard/controlled-S on the
    /// ancilla, uncomputed so the ancilla ends in `|0⟩`.
    fn push_swap_phase(&mut self, set: PairSet, phi: f64) {
        let a = self.layout.ancilla_qubit();
        for half in 0..2 {
            self.push(Gate::H(a));
            self.push_swap(set, Some(a));
            self.push(Gate::H(a));
            if half == 0 {
                self.push(Gate::Phase {
                    target: a,
                    theta: -phi,
                });
            }
        }
    }

    pub fn to_records(&self) -> Vec<GateRecord> {
        let l = &self.layout;
        let state: Vec<usize> = (0..l.state_qubits).collect();
        let bdry: Vec<usize> = (l.bdry_offset()..l.zeta_offset()).collect();
        let zeta: Vec<usize> = (l.zeta_offset()..l.ancilla_qubit()).collect();
        let ctl = |c: &Option<usize>| c.iter().copied().collect::<Vec<_>>();
        self.gates
            .iter()
            .map(|g| {
                let (gate, targets, controls, param) = match g {
                    Gate::H(q) => ("h".to_string(), vec![*q], vec![], None),
                    Gate::X(q) => ("x".to_string(), vec![*q], vec![], None),
                    Gate::Phase { target, theta } => {
                        ("phase".to_string(), vec![*target], vec![], Some(*theta))
                    }
                    Gate::FlagPhase { value, theta } => (
                        format!("flag_phase_{value}"),
                        bdry.clone(),
                        vec![],
                        Some(*theta),
                    ),
                    Gate::BoundaryOracle => {
                        ("o_bdry".to_string(), bdry.clone(), state.clone(), None)
                    }
                    Gate::NeighborOracle {
                        set,
                        negate,
                        control,
                    } => {
                        let name = format!(
                            "o_zeta_{}{}",
                            if *set == PairSet::Neumann { "n" } else { "r" },
                            if *negate { "_dg" } else { "" }
                        );
                        let mut c = state.clone();
                        c.extend(ctl(control));
                        (name, zeta.clone(), c, None)
                    }
                    Gate::Cadd { control } => {
                        let mut c = zeta.clone();
                        c.extend(ctl(control));
                        ("cadd".to_string(), state.clone(), c, None)
                    }
                };
                GateRecord {
                    gate,
                    targets,
                    controls,
                    param,
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records())?)
    }

    fn permute(sv: &mut StateVector, f: impl Fn(usize) -> usize) {
        let mut out = vec![ZERO; sv.amps.len()];
        for (i, &a) in sv.amps.iter().enumerate() {
            if a != ZERO {
                out[f(i)] = a;
            }
        }
        sv.amps = out;
    }

    fn apply_gate(&self, g: &Gate, sv: &mut StateVector) {
        let l = &self.layout;
        let smask = (1usize << l.state_qubits) - 1;
        let zoff = l.zeta_offset();
        let zmask = ((1usize << l.zeta_qubits) - 1) << zoff;
        let on = |i: usize, c: &Option<usize>| c.map_or(true, |q| i >> q & 1 == 1);
        match g {
            Gate::H(q) => {
                let bit = 1 << q;
                for i in 0..sv.amps.len() {
                    if i & bit == 0 {
                        let (a, b) = (sv.amps[i], sv.amps[i | bit]);
                        sv.amps[i] = (a + b) * FRAC_1_SQRT_2;
                        sv.amps[i | bit] = (a - b) * FRAC_1_SQRT_2;
                    }
                }
            }
            Gate::X(q) => Self::permute(sv, |i| i ^ (1 << q)),
            Gate::Phase { target, theta } => {
                let ph = C64::from_polar(1.0, *theta);
                for (i, a) in sv.amps.iter_mut().enumerate() {
                    if i >> target & 1 == 1 {
                        *a *= ph;
                    }
                }
            }
            Gate::FlagPhase { value, theta } => {
                let ph = C64::from_polar(1.0, *theta);
                for (i, a) in sv.amps.iter_mut().enumerate() {
                    if (i >> l.bdry_offset()) & 3 == *value as usize {
                        *a *= ph;
                    }
                }
            }
            Gate::BoundaryOracle => {
                Self::permute(sv, |i| {
                    i ^ ((self.flags[i & smask] as usize) << l.bdry_offset())
                });
            }
            Gate::NeighborOracle {
                set,
                negate,
                control,
            } => {
                let table = match set {
                    PairSet::Neumann => &self.neumann,
                    PairSet::Robin => &self.robin,
                };
                Self::permute(sv, |i| {
                    if !on(i, control) {
                        return i;
                    }
                    match &table[i & smask] {
                        Some(delta) => {
                            let enc = delta.iter().enumerate().fold(0usize, |acc, (a, &x)| {
                                let x = if *negate { -x } else { x };
                                acc | (((x & 3) as usize) << (2 * a))
                            });
                            i ^ (enc << zoff)
                        }
                        None => i,
                    }
                });
            }
            Gate::Cadd { control } => {
                let amask = (1usize << l.axis_bits) - 1;
                Self::permute(sv, |i| {
                    if !on(i, control) {
                        return i;
                    }
                    let z = (i & zmask) >> zoff;
                    let mut s = i & smask;
                    for a in 0..l.d {
                        let raw = (z >> (2 * a)) & 3;
                        let delta: i64 = if raw >= 2 { raw as i64 - 4 } else { raw as i64 };
                        let sh = l.axis_shift(a);
                        let c = (s >> sh) & amask;
                        let c2 = ((c as i64 + delta).rem_euclid(1 << l.axis_bits)) as usize;
                        s = (s & !(amask << sh)) | (c2 << sh);
                    }
                    (i & !smask) | s
                });
            }
        }
    }

    pub fn apply(&self, sv: &mut StateVector) -> Result<()> {
        if sv.n_qubits != self.layout.total() {
            return Err(Error::DimMismatch {
                expected: self.layout.total(),
                got: sv.n_qubits,
            });
        }
        for g in &self.gates {
            self.apply_gate(g, sv);
        }
        Ok(())
    }

    /// Runs the circuit on a grid vector, measures and discards the ancilla,
    /// and reads back the state register. Both ancilla branches must agree;
    /// in these constructions the `|1⟩` branch is empty.
    pub fn run(&self, v: &[C64]) -> Result<Emulated> {
        let l = &self.layout;
        let mut sv = StateVector::from_grid(l, v)?;
        self.apply(&mut sv)?;
        let ancilla_one_prob = sv.prob_one(l.ancilla_qubit());
        let size = l.n.pow(l.d as u32);
        let mut output = vec![ZERO; size];
        let mut kept = 0.0;
        for (k, o) in output.iter_mut().enumerate() {
            *o = sv.amps[l.encode_point(&crate::grid::unflatten(k, l.d, l.n))];
            kept += o.norm_sqr();
        }
        let leakage = (sv.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() - kept).max(0.0);
        Ok(Emulated {
            output,
            ancilla_one_prob,
            leakage,
        })
    }

    /// Induced matrix on the grid points of the state register.
    pub fn state_matrix(&self) -> Result<DMatrix<C64>> {
        let size = self.layout.n.pow(self.layout.d as u32);
        let mut m = DMatrix::<C64>::zeros(size, size);
        let mut e = vec![ZERO; size];
        for k in 0..size {
            e[k] = C64::new(1.0, 0.0);
            let out = self.run(&e)?.output;
            m.set_column(k, &nalgebra::DVector::from_vec(out));
            e[k] = ZERO;
        }
        Ok(m)
    }
}

/// The boundary oracle alone.
pub fn boundary_oracle(domain: &Domain) -> Result<Circuit> {
    let mut c = Circuit::new(domain)?;
    c.push(Gate::BoundaryOracle);
    Ok(c)
}

/// The swap `S` over all Neumann and Robin pairs.
pub fn swap_unitary(domain: &Domain) -> Result<Circuit> {
    let mut c = Circuit::new(domain)?;
    let has_n = !domain.indices_of(Region::Neumann).is_empty();
    let has_r = !domain.indices_of(Region::Robin).is_empty();
    if !has_n && !has_r {
        return Err(Error::InvalidNeighborSets(
            "domain has no derivative points".into(),
        ));
    }
    if has_n {
        c.push_swap(PairSet::Neumann, None);
    }
    if has_r {
        c.push_swap(PairSet::Robin, None);
    }
    Ok(c)
}

/// `e^{−iθ P_D}` as oracle, flag phase, oracle.
pub fn hamsim_dirichlet(domain: &Domain, theta: f64) -> Result<Circuit> {
    if domain.indices_of(Region::Dirichlet).is_empty() {
        return Err(Error::EmptyRegion("Dirichlet"));
    }
    let mut c = Circuit::new(domain)?;
    c.push_flag_phase(Region::Dirichlet.flag(), -theta);
    Ok(c)
}

/// `e^{−iθ P_N} = ½(I + S) + e^{−iθ}·½(I − S)`.
pub fn hamsim_neumann(domain: &Domain, theta: f64) -> Result<Circuit> {
    if domain.indices_of(Region::Neumann).is_empty() {
        return Err(Error::EmptyRegion("Neumann"));
    }
    let mut c = Circuit::new(domain)?;
    c.push_swap_phase(PairSet::Neumann, theta);
    Ok(c)
}

/// Value support of the Robin part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RobinForm {
    /// Value phase on the Robin points only; exact only when `αβ = 0`.
    Literal,
    /// Value phase on the Robin points and their swap partners.
    Ghost,
}

/// Product of the Dirichlet phase, the Neumann channel and the Robin
/// value/derivative pair.
pub fn hamsim_combined(
    domain: &Domain,
    theta: f64,
    alpha: f64,
    beta: f64,
    form: RobinForm,
) -> Result<Circuit> {
    let mut c = Circuit::new(domain)?;
    if !domain.indices_of(Region::Dirichlet).is_empty() {
        c.push_flag_phase(Region::Dirichlet.flag(), -theta);
    }
    if !domain.indices_of(Region::Neumann).is_empty() {
        c.push_swap_phase(PairSet::Neumann, theta);
    }
    if !domain.indices_of(Region::Robin).is_empty() {
        if form == RobinForm::Literal && alpha != 0.0 && beta != 0.0 {
            return Err(Error::NonCommutingRobin(format!(
                "alpha={alpha}, beta={beta}: value and derivative parts do not commute on the Robin points alone"
            )));
        }
        if alpha != 0.0 {
            c.push_flag_phase(Region::Robin.flag(), -alpha * theta);
            if form == RobinForm::Ghost {
                c.push_swap(PairSet::Robin, None);
                c.push_flag_phase(Region::Robin.flag(), -alpha * theta);
                c.push_swap(PairSet::Robin, None);
            }
        }
        if beta != 0.0 {
            c.push_swap_phase(PairSet::Robin, beta * theta);
        }
    }
    Ok(c)
}

/// The projector whose exponential `hamsim_combined` implements.
pub fn combined_projector(
    domain: &Domain,
    alpha: f64,
    beta: f64,
    form: RobinForm,
) -> Result<Projector> {
    let mut parts = Vec::new();
    if !domain.indices_of(Region::Dirichlet).is_empty() {
        parts.push(projectors::dirichlet_projector(domain)?);
    }
    if !domain.indices_of(Region::Neumann).is_empty() {
        parts.push(projectors::neumann_projector(domain)?);
    }
    if !domain.indices_of(Region::Robin).is_empty() {
        parts.push(match form {
            RobinForm::Literal => projectors::robin_projector(domain, alpha, beta)?,
            RobinForm::Ghost => projectors::robin_projector_ghost(domain, alpha, beta)?,
        });
    }
    match parts.len() {
        0 => Ok(Projector::zero(domain.size())),
        1 => Ok(parts.pop().unwrap()),
        _ => Projector::sum(domain.size(), parts),
    }
}

/// Largest entrywise deviation of the circuit's induced map from the
/// projector exponential `e^{−iθP}`.
pub fn max_deviation(circuit: &Circuit, p: &Projector, theta: f64) -> Result<f64> {
    let m = circuit.state_matrix()?;
    let n = p.dim();
    let mut worst: f64 = 0.0;
    let mut e = vec![ZERO; n];
    for k in 0..n {
        e[k] = C64::new(1.0, 0.0);
        let col = p.exp_apply(C64::new(0.0, -theta), &e)?;
        for (i, c) in col.iter().enumerate() {
            worst = worst.max((m[(i, k)] - c).norm());
        }
        e[k] = ZERO;
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    ConstrainedSubspace,
    FeasibleSubspace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Enforced {
    pub state: Vec<C64>,
    pub success_prob: f64,
    /// Amplitude-amplification rounds, `⌈1/√prob⌉`.
    pub repetitions: usize,
}

/// Hadamard, controlled `U_P = e^{iπP} = I − 2P`, Hadamard on an ancilla,
/// post-selected on `|1⟩` (constrained part) or `|0⟩` (feasible part).
pub fn enforce_input(state: &[C64], p: &Projector, target: Target) -> Result<Enforced> {
    if state.len() != p.dim() {
        return Err(Error::DimMismatch {
            expected: p.dim(),
            got: state.len(),
        });
    }
    if !p.is_orthogonal_projection() {
        return Err(Error::NonIdempotent(
            "enforce_input needs an orthogonal projector".into(),
        ));
    }
    let nrm = linalg::norm(state);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "input state must be normalized, norm = {nrm}"
        )));
    }
    let u = p.exp_apply(C64::new(0.0, std::f64::consts::PI), state)?;
    let branch: Vec<C64> = match target {
        Target::FeasibleSubspace => state.iter().zip(&u).map(|(a, b)| (a + b) * 0.5).collect(),
        Target::ConstrainedSubspace => state.iter().zip(&u).map(|(a, b)| (a - b) * 0.5).collect(),
    };
    let amp = linalg::norm(&branch);
    if amp < 1e-14 {
        return Err(Error::ZeroOverlap(amp));
    }
    let success_prob = amp * amp;
    let mut out = branch;
    linalg::scale(C64::new(1.0 / amp, 0.0), &mut out);
    Ok(Enforced {
        state: out,
        success_prob,
        repetitions: (1.0 / amp - 1e-9).ceil().max(1.0) as usize,
    })
}
