//! Constraint-error measurements, penalty sweeps and convergence slopes.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenize::ConstrainedProblem;
use crate::integrator::{evolve, StepperConfig, Trajectory};
use crate::linalg::{self, C64};
use crate::penalty::{error_bound, lambda_for, PenaltyInputs, Regime};
use crate::projectors::Projector;

/// Everything a sweep needs: the problem, the error measure, and the
/// regime/inputs used for the bound column.
#[derive(Clone, Debug)]
pub struct SweepSetup {
    pub problem: ConstrainedProblem,
    pub measure: Projector,
    pub regime: Regime,
    /// `epsilon` here is the target used to locate the pre-asymptotic range.
    pub inputs: PenaltyInputs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub measured_err_sq: f64,
    pub bound: f64,
    pub slope_window: bool,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    pub fn new(lambda: f64, measured_err_sq: f64, bound: f64) -> Self {
        Self {
            lambda,
            measured_err_sq,
            bound,
            slope_window: true,
            wall_time_s: 0.0,
            error: None,
        }
    }
}

/// `⟨v, P v⟩` at every saved time.
pub fn constraint_error(traj: &Trajectory, measure: &Projector) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|v| Ok(measure.quadratic_form(v)?.max(0.0)))
        .collect()
}

/// One evolve per λ (in parallel on `jobs` threads) with the analytic bound
/// alongside. Rows are returned in λ order; a failed run is reported in its
/// row rather than aborting the sweep.
pub fn lambda_sweep(
    setup: &SweepSetup,
    lambdas: &[f64],
    cfg: &StepperConfig,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda list".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(
            "lambdas must be positive and finite".into(),
        ));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "lambdas must be strictly increasing".into(),
        ));
    }
    let run = |&lambda: &f64| -> SweepRow {
        let start = Instant::now();
        let bound = error_bound(setup.regime, &setup.inputs, lambda).unwrap_or(f64::NAN);
        let measured = evolve(&setup.problem, lambda, cfg).and_then(|tr| {
            setup
                .measure
                .quadratic_form(tr.final_state())
                .map(|e| e.max(0.0))
        });
        let mut row = SweepRow::new(lambda, f64::NAN, bound);
        match measured {
            Ok(e) => row.measured_err_sq = e,
            Err(e) => row.error = Some(format!("lambda={lambda:e}: {e}")),
        }
        row.wall_time_s = start.elapsed().as_secs_f64();
        row
    };
    let mut rows: Vec<SweepRow> = if jobs <= 1 {
        lambdas.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| lambdas.par_iter().map(run).collect())
    };
    let threshold = lambda_for(setup.regime, &setup.inputs)
        .map(|s| s.lambda / 10.0)
        .unwrap_or(0.0);
    mark_window(&mut rows, threshold);
    Ok(rows)
}

/// Drops the smallest λ from the fit window when it lies below `threshold`
/// (pre-asymptotic), provided two rows remain.
pub fn mark_window(rows: &mut [SweepRow], threshold: f64) {
    for r in rows.iter_mut() {
        r.slope_window = r.error.is_none();
    }
    let in_window = rows.iter().filter(|r| r.slope_window).count();
    if in_window > 2 {
        if let Some(first) = rows.iter_mut().find(|r| r.slope_window) {
            if first.lambda < threshold {
                first.slope_window = false;
            }
        }
    }
}

/// Least-squares slope of `log(measured_err_sq)` against `log(λ)` over the
/// rows marked as in the fit window.
pub fn fit_slope(rows: &[SweepRow]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.slope_window)
        .map(|r| (r.lambda.ln(), r.measured_err_sq.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 rows, got {}",
            pts.len()
        )));
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateInput(
            "non-positive lambda or error in fit window".into(),
        ));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("all lambdas coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// `‖(I − P)(v_pen − v_ref)‖` at each saved time.
pub fn feasible_deviation(
    pen: &Trajectory,
    reference: &Trajectory,
    p: &Projector,
) -> Result<Vec<f64>> {
    if pen.times.len() != reference.times.len()
        || pen
            .times
            .iter()
            .zip(&reference.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(Error::GridMismatch(format!(
            "{} vs {} saved times",
            pen.times.len(),
            reference.times.len()
        )));
    }
    pen.states
        .iter()
        .zip(&reference.states)
        .map(|(a, b)| {
            let diff: Vec<C64> = linalg::sub(a, b);
            Ok(linalg::norm(&p.complement_apply(&diff)?))
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "lambda,measured_err_sq,bound,slope_window,wall_time_s";

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            format!("{:e}", r.lambda),
            format!("{:e}", r.measured_err_sq),
            format!("{:e}", r.bound),
            r.slope_window.to_string(),
            format!("{:.6}", r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(input: impl std::io::Read) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != SWEEP_HEADER {
        return Err(Error::InvalidArgument(format!(
            "unexpected sweep header: {headers:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("column {i}: {e}")))
        };
        rows.push(SweepRow {
            lambda: num(0)?,
            measured_err_sq: num(1)?,
            bound: num(2)?,
            slope_window: &rec[3] == "true",
            wall_time_s: num(4)?,
            error: None,
        });
    }
    Ok(rows)
}
