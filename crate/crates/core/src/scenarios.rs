//! Ready-made heat and wave setups on the unit box.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::SweepSetup;
use crate::error::{Error, Result};
use crate::grid::{build_grid, BoundarySpec, Domain};
use crate::homogenize::{shift_dirichlet, BoundaryData, ConstrainedProblem};
use crate::linalg::{self, C64, ZERO};
use crate::operators::{laplacian_fd, wave_block, Forcing, Stencil};
use crate::penalty::{PenaltyInputs, Regime};
use crate::projectors::{dirichlet_projector, neumann_projector, Projector};

pub const POINT_SOURCE: f64 = 298.0;
/// Gaussian width as a fraction of the box.
pub const GAUSSIAN_SIGMA: f64 = 0.125;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    HeatDirichletZero,
    HeatDirichletNonzero,
    HeatCircle,
    HeatNeumann,
    WaveCircle,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::HeatDirichletZero,
        ScenarioName::HeatDirichletNonzero,
        ScenarioName::HeatCircle,
        ScenarioName::HeatNeumann,
        ScenarioName::WaveCircle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::HeatDirichletZero => "heat-dirichlet-zero",
            ScenarioName::HeatDirichletNonzero => "heat-dirichlet-nonzero",
            ScenarioName::HeatCircle => "heat-circle",
            ScenarioName::HeatNeumann => "heat-neumann",
            ScenarioName::WaveCircle => "wave-circle",
        }
    }

    pub fn is_wave(self) -> bool {
        self == ScenarioName::WaveCircle
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub name: ScenarioName,
    pub d: usize,
    pub n: usize,
    /// Diffusion constant `D` for heat, `c²` for the wave scenario.
    pub coeff: f64,
    pub t: f64,
    pub dt: f64,
    /// Radius of the circle boundary, when there is one.
    pub radius: f64,
}

impl ScenarioParams {
    pub fn defaults(name: ScenarioName) -> Self {
        let base = Self {
            name,
            d: 2,
            n: 32,
            coeff: 4.0,
            t: 1.0,
            dt: 1e-5,
            radius: 0.5,
        };
        match name {
            ScenarioName::HeatNeumann => Self {
                n: 16,
                t: 2.0,
                dt: 1e-3,
                ..base
            },
            ScenarioName::WaveCircle => Self {
                coeff: 1.0,
                dt: 1e-4,
                ..base
            },
            _ => base,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub domain: Domain,
    pub setup: SweepSetup,
}

/// Isotropic Gaussian of height 1 centred in the box, zeroed on `zero_on`.
pub fn gaussian(domain: &Domain, sigma: f64, zero_on: &[usize]) -> Vec<C64> {
    let mut v: Vec<C64> = (0..domain.size())
        .map(|k| {
            let x = domain.unit_coords(&domain.multi(k));
            let r2: f64 = x.iter().map(|c| (c - 0.5).powi(2)).sum();
            C64::new((-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
        })
        .collect();
    for &k in zero_on {
        v[k] = ZERO;
    }
    v
}

/// Constant source at the centre element (index `n/2` on every axis).
pub fn point_source(domain: &Domain, value: f64) -> Result<Vec<C64>> {
    let mut b = vec![ZERO; domain.size()];
    let centre = vec![domain.n() / 2; domain.d()];
    b[domain.linear(&centre)?] = C64::new(value, 0.0);
    Ok(b)
}

/// `(0.001 sin x sin y, 0.01 cos x cos y)` for `x² + y² ≤ 0.1` in
/// coordinates centred on the box, zero elsewhere and on `zero_on`.
pub fn wave_initial(domain: &Domain, zero_on: &[usize]) -> Result<Vec<C64>> {
    if domain.d() != 2 {
        return Err(Error::InvalidArgument(
            "wave initial data is two-dimensional".into(),
        ));
    }
    let n = domain.size();
    let mut v = vec![ZERO; 2 * n];
    for k in 0..n {
        let c = domain.unit_coords(&domain.multi(k));
        let (x, y) = (c[0] - 0.5, c[1] - 0.5);
        if x * x + y * y <= 0.1 {
            v[k] = C64::new(0.001 * x.sin() * y.sin(), 0.0);
            v[n + k] = C64::new(0.01 * x.cos() * y.cos(), 0.0);
        }
    }
    for &k in zero_on {
        v[k] = ZERO;
        v[n + k] = ZERO;
    }
    Ok(v)
}

fn heat_inputs(p: &ConstrainedProblem) -> PenaltyInputs {
    let v = linalg::norm(&p.initial);
    let b = p.forcing.sup_norm();
    PenaltyInputs {
        v_max: v,
        a0_norm: p.generator.norm_bound(),
        b,
        b_l1: p.forcing.l1_norm(),
        t: p.horizon,
        // target error at which the asymptotic regime is assumed to start
        epsilon: (v + p.horizon * b).powi(2).max(f64::MIN_POSITIVE),
        ..Default::default()
    }
}

fn heat_setup(
    params: &ScenarioParams,
    spec: &BoundarySpec,
    neumann: bool,
    nonzero: bool,
) -> Result<Scenario> {
    let domain = build_grid(params.d, params.n, spec)?;
    let h = domain.spacing();
    let a0 = laplacian_fd(&domain, params.coeff, h, Stencil::ThreePointPeriodic)?;
    let proj = if neumann {
        neumann_projector(&domain)?
    } else {
        dirichlet_projector(&domain)?
    };
    let mut v0 = gaussian(&domain, GAUSSIAN_SIGMA, &proj.support());
    let b = Forcing::constant(point_source(&domain, POINT_SOURCE)?, params.t);
    let problem = if nonzero {
        let g = BoundaryData::tent(&domain)?;
        linalg::axpy(C64::new(1.0, 0.0), &g.value(0.0), &mut v0);
        let p = ConstrainedProblem::new(a0, b, proj, v0, params.t)?;
        shift_dirichlet(&p, &g, &domain)?
    } else {
        ConstrainedProblem::new(a0, b, proj, v0, params.t)?
    };
    let inputs = heat_inputs(&problem);
    let measure = problem.projector.clone();
    Ok(Scenario {
        params: *params,
        domain,
        setup: SweepSetup {
            problem,
            measure,
            regime: Regime::StableInhomogeneous,
            inputs,
        },
    })
}

fn wave_setup(params: &ScenarioParams) -> Result<Scenario> {
    let domain = build_grid(
        params.d,
        params.n,
        &BoundarySpec::CircleDirichlet(params.radius),
    )?;
    let n = domain.size();
    let l = laplacian_fd(&domain, 1.0, domain.spacing(), Stencil::ThreePointPeriodic)?;
    let a0 = wave_block(&l, params.coeff)?;
    let pd = dirichlet_projector(&domain)?;
    let v0 = wave_initial(&domain, &pd.support())?;
    let v = linalg::norm(&v0);
    let inputs = PenaltyInputs {
        v_max: v,
        a0_norm: a0.norm_bound(),
        t: params.t,
        epsilon: (v * v).max(f64::MIN_POSITIVE),
        ..Default::default()
    };
    let problem = ConstrainedProblem::new(a0, Forcing::zero(2 * n), pd.doubled()?, v0, params.t)?;
    // error is measured on the displacement block only
    let measure = pd.embed(0, 2 * n)?;
    Ok(Scenario {
        params: *params,
        domain,
        setup: SweepSetup {
            problem,
            measure,
            regime: Regime::StableHomogeneous,
            inputs,
        },
    })
}

pub fn build(params: &ScenarioParams) -> Result<Scenario> {
    if !(params.t > 0.0 && params.dt > 0.0 && params.coeff > 0.0) {
        return Err(Error::InvalidArgument(
            "t, dt and the coefficient must be positive".into(),
        ));
    }
    match params.name {
        ScenarioName::HeatDirichletZero => {
            heat_setup(params, &BoundarySpec::WallDirichlet, false, false)
        }
        ScenarioName::HeatDirichletNonzero => {
            heat_setup(params, &BoundarySpec::WallDirichlet, false, true)
        }
        ScenarioName::HeatCircle => heat_setup(
            params,
            &BoundarySpec::CircleDirichlet(params.radius),
            false,
            false,
        ),
        ScenarioName::HeatNeumann => {
            heat_setup(params, &BoundarySpec::WallNeumannInward, true, false)
        }
        ScenarioName::WaveCircle => wave_setup(params),
    }
}

/// The penalty projector of a scenario paired with its error measure.
pub fn projectors(s: &Scenario) -> (&Projector, &Projector) {
    (&s.setup.problem.projector, &s.setup.measure)
}
