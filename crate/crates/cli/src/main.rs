use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::json;

use penproj::circuits::{self, RobinForm};
use penproj::diagnostics::{fit_slope, lambda_sweep, write_sweep_csv, SweepRow};
use penproj::grid::{
    build_custom_unchecked, build_grid, BoundarySpec, Domain, Region, RegionEntry, RobinCoeffs,
};
use penproj::integrator::{alias_cap, evolve, Mode, StepperConfig, STABILITY_FACTOR};
use penproj::io::write_trajectory_csv;
use penproj::kubo::{order_study, penalty_generator, write_kubo_csv, KuboSetup};
use penproj::linalg::seeded_rng;
use penproj::operators::{laplacian_fd, Forcing, Stencil};
use penproj::penalty::{error_bound, lambda_for};
use penproj::projectors::{dirichlet_projector, neumann_projector};
use penproj::resources::{heat_example, heat_overhead, lchs_steps, DEFAULT_BETA};
use penproj::scenarios::{self, ScenarioName, ScenarioParams};

/// Above this the penalty period is poorly resolved by any practical step.
const LAMBDA_WARN: f64 = 1e6;
const EMULATION_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(
    name = "penproj",
    version,
    about = "Penalty-projection constrained ODE experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (and a sweep when --lambdas is given).
    Run(RunArgs),
    /// Penalty sweep over --lambdas with the fitted slope in the manifest.
    Sweep(RunArgs),
    /// Emulate the projector circuits and compare against exact exponentials.
    Emulate(EmulateArgs),
    /// Residuals of the first-order response prediction under halving zeta.
    KuboStudy(KuboArgs),
    /// Resource report for a named example.
    Estimate(EstimateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Interaction,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Direct => Mode::Direct,
            ModeArg::Interaction => Mode::InteractionPicture,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (positional form of --scenario).
    #[arg(value_parser = parse_scenario)]
    name: Option<ScenarioName>,
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<ScenarioName>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Diffusion constant (heat) or c² (wave).
    #[arg(long)]
    coeff: Option<f64>,
    #[arg(long, conflicts_with = "lambdas")]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "direct")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory rows to keep (approximately).
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Write zero wall times so repeated runs give identical files.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Wall,
    Neumann,
    Circle,
    Mixed,
    Robin,
}

#[derive(Args)]
struct EmulateArgs {
    #[arg(long, value_enum, default_value = "wall")]
    domain: DomainArg,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = circuits::QUBIT_GUARD)]
    qubits_guard: usize,
    #[arg(long, default_value_t = 10)]
    thetas: usize,
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    #[arg(long, default_value_t = 1.3)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the gate list of the combined circuit as JSON.
    #[arg(long)]
    gates_out: Option<PathBuf>,
}

#[derive(Args)]
struct KuboArgs {
    #[arg(long, value_delimiter = ',', default_value = "1e-2,5e-3,2.5e-3")]
    zetas: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Heat,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(value_enum)]
    example: ExampleArg,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
}

fn parse_scenario(s: &str) -> Result<ScenarioName, String> {
    s.parse().map_err(|e: penproj::Error| e.to_string())
}

/// Exit code 2 for bad input, 3 for solver failures, 1 for failed checks.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn usage(err: anyhow::Error) -> Failure {
    Failure { code: 2, err }
}

fn solver(err: anyhow::Error) -> Failure {
    Failure { code: 3, err }
}

fn check_failed(err: anyhow::Error) -> Failure {
    Failure { code: 1, err }
}

fn resolve(args: &RunArgs) -> Result<ScenarioParams, Failure> {
    let name = match (args.name, args.scenario) {
        (Some(a), Some(b)) if a != b => {
            return Err(usage(anyhow!("conflicting scenario names {a} and {b}")))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(usage(anyhow!("a scenario name is required"))),
    };
    let mut p = ScenarioParams::defaults(name);
    if let Some(n) = args.n {
        p.n = n;
    }
    if let Some(t) = args.t {
        p.t = t;
    }
    if let Some(dt) = args.dt {
        p.dt = dt;
    }
    if let Some(c) = args.coeff {
        p.coeff = c;
    }
    if args.jobs == 0 {
        return Err(usage(anyhow!("--jobs must be at least 1")));
    }
    Ok(p)
}

fn check_lambdas(lambdas: &[f64], need_two: bool) -> Result<Vec<f64>, Failure> {
    if need_two && lambdas.len() < 2 {
        return Err(usage(anyhow!("a sweep needs at least 2 lambda values")));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(usage(anyhow!(
            "lambda values must be finite and non-negative"
        )));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage(anyhow!("duplicate lambda values in {lambdas:?}")));
    }
    for &l in &sorted {
        if l > LAMBDA_WARN {
            eprintln!("warning: lambda = {l:e} exceeds {LAMBDA_WARN:e}; expect aliasing-limited step sizes");
        }
    }
    Ok(sorted)
}

fn create(path: &PathBuf) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(args: RunArgs, sweep: bool) -> Result<(), Failure> {
    let params = resolve(&args)?;
    let lambdas = match (&args.lambdas, args.lambda) {
        (Some(ls), _) => Some(check_lambdas(ls, true)?),
        (None, _) if sweep => return Err(usage(anyhow!("sweep needs --lambdas"))),
        (None, Some(l)) => {
            check_lambdas(&[l], false)?;
            None
        }
        (None, None) => None,
    };
    let scenario = scenarios::build(&params).map_err(|e| usage(e.into()))?;
    let setup = &scenario.setup;
    let mode: Mode = args.mode.into();
    let lambda = args
        .lambda
        .or(lambdas.as_ref().map(|ls| *ls.last().unwrap()))
        .unwrap_or(1e4);

    fs::create_dir_all(&args.out)
        .map_err(|e| usage(anyhow!("creating {}: {e}", args.out.display())))?;
    let norm = setup.problem.generator.norm_bound();
    let cap = alias_cap(lambda).min(STABILITY_FACTOR / norm);
    let steps = (params.t / params.dt.min(cap)).ceil().max(1.0);
    let save_every = (steps / args.samples.max(1) as f64).ceil().max(1.0) as usize;
    let cfg = StepperConfig::fixed(params.dt, mode).save_every(save_every);

    let traj = evolve(&setup.problem, lambda, &cfg)
        .map_err(|e| solver(anyhow!("lambda={lambda:e}: {e}")))?;
    let traj_path = args.out.join("trajectory.csv");
    let mut w = create(&traj_path).map_err(solver)?;
    write_trajectory_csv(&traj, &setup.measure, &mut w).map_err(|e| solver(e.into()))?;
    let final_err = setup
        .measure
        .quadratic_form(traj.final_state())
        .map_err(|e| solver(e.into()))?;

    let mut manifest = json!({
        "scenario": params.name.as_str(),
        "params": params,
        "mode": mode,
        "jobs": args.jobs,
        "seed": args.seed,
        "deterministic": args.deterministic,
        "lambda": lambda,
        "dt_requested": params.dt,
        "dt_used": traj.stats.dt_used,
        "save_every": save_every,
        "regime": setup.regime,
        "penalty_inputs": setup.inputs,
        "lambda_for": lambda_for(setup.regime, &setup.inputs).ok().map(|s| s.lambda),
        "final_constraint_error_sq": final_err,
        "final_bound": error_bound(setup.regime, &setup.inputs, lambda).ok(),
        "trajectory_csv": "trajectory.csv",
    });

    if let Some(ls) = lambdas {
        let ls: Vec<f64> = ls.into_iter().filter(|&l| l > 0.0).collect();
        let sweep_cfg = StepperConfig::fixed(params.dt, mode);
        let mut rows: Vec<SweepRow> =
            lambda_sweep(setup, &ls, &sweep_cfg, args.jobs).map_err(|e| usage(e.into()))?;
        if let Some(failed) = rows.iter().find_map(|r| r.error.clone()) {
            return Err(solver(anyhow!("sweep failed: {failed}")));
        }
        if args.deterministic {
            rows.iter_mut().for_each(|r| r.wall_time_s = 0.0);
        }
        let mut w = create(&args.out.join("sweep.csv")).map_err(solver)?;
        write_sweep_csv(&rows, &mut w).map_err(|e| solver(e.into()))?;
        let slope = fit_slope(&rows).ok();
        manifest["lambdas"] = json!(ls);
        manifest["sweep_csv"] = json!("sweep.csv");
        manifest["slope"] = json!(slope);
        manifest["rows"] = json!(rows);
        println!(
            "slope {}",
            slope.map_or("n/a".to_string(), |s| format!("{s:.4}"))
        );
    }
    let mpath = args.out.join("manifest.json");
    fs::write(
        &mpath,
        serde_json::to_string_pretty(&manifest).unwrap() + "\n",
    )
    .map_err(|e| solver(anyhow!("writing manifest: {e}")))?;
    println!(
        "final constraint error {final_err:.6e} at lambda {lambda:e}; wrote {}",
        args.out.display()
    );
    Ok(())
}

fn emulation_domain(args: &EmulateArgs) -> penproj::Result<Domain> {
    let (d, n) = (args.d, args.n);
    match args.domain {
        DomainArg::Wall => build_grid(d, n, &BoundarySpec::WallDirichlet),
        DomainArg::Neumann => build_grid(d, n, &BoundarySpec::WallNeumannInward),
        DomainArg::Circle => build_grid(d, n, &BoundarySpec::CircleDirichlet(0.5)),
        DomainArg::Mixed | DomainArg::Robin => {
            if d != 1 {
                return Err(penproj::Error::InvalidArgument(
                    "mixed and robin domains are one-dimensional".into(),
                ));
            }
            let robin = matches!(args.domain, DomainArg::Robin);
            let (left, right) = if robin {
                (Region::Robin, Region::Robin)
            } else {
                (Region::Dirichlet, Region::Neumann)
            };
            let entry = |i: usize, r: Region, nb: Option<usize>| RegionEntry {
                index: vec![i],
                region: r,
                neighbors: nb.map(|k| vec![vec![k]]).unwrap_or_default(),
            };
            let entries = vec![
                entry(0, left, robin.then_some(1)),
                entry(n - 1, right, Some(n - 2)),
            ];
            let coeffs = robin.then_some(RobinCoeffs {
                alpha: args.alpha,
                beta: args.beta,
            });
            build_custom_unchecked(1, n, &entries, coeffs)
        }
    }
}

fn emulate(args: EmulateArgs) -> Result<(), Failure> {
    let dom = emulation_domain(&args).map_err(|e| usage(e.into()))?;
    let layout = circuits::RegisterLayout::for_domain(&dom).map_err(|e| usage(e.into()))?;
    layout
        .check_guard(args.qubits_guard)
        .map_err(|e| usage(e.into()))?;
    let has = |r: Region| !dom.indices_of(r).is_empty();
    let form = if has(Region::Robin) {
        RobinForm::Ghost
    } else {
        RobinForm::Literal
    };
    let mut rng = seeded_rng(args.seed);
    let mut worst: f64 = 0.0;
    let mut count_ok = true;
    let run = |name: &str, theta: f64| -> penproj::Result<(f64, usize, usize)> {
        let (c, big, p) = match name {
            "dirichlet" => (
                circuits::hamsim_dirichlet(&dom, theta)?,
                circuits::hamsim_dirichlet(&dom, 1000.0 * theta)?,
                dirichlet_projector(&dom)?,
            ),
            "neumann" => (
                circuits::hamsim_neumann(&dom, theta)?,
                circuits::hamsim_neumann(&dom, 1000.0 * theta)?,
                neumann_projector(&dom)?,
            ),
            _ => (
                circuits::hamsim_combined(&dom, theta, args.alpha, args.beta, form)?,
                circuits::hamsim_combined(&dom, 1000.0 * theta, args.alpha, args.beta, form)?,
                circuits::combined_projector(&dom, args.alpha, args.beta, form)?,
            ),
        };
        Ok((
            circuits::max_deviation(&c, &p, theta)?,
            c.gate_count(),
            big.gate_count(),
        ))
    };
    let mut kinds = Vec::new();
    if has(Region::Dirichlet) {
        kinds.push("dirichlet");
    }
    if has(Region::Neumann) {
        kinds.push("neumann");
    }
    kinds.push("combined");
    println!("qubits {} (guard {})", layout.total(), args.qubits_guard);
    for kind in kinds {
        let mut kind_worst: f64 = 0.0;
        let mut gates = 0;
        for _ in 0..args.thetas {
            let theta = rng.gen_range(0.0..4.0 * std::f64::consts::PI);
            let (dev, g, g_big) = run(kind, theta).map_err(|e| usage(e.into()))?;
            kind_worst = kind_worst.max(dev);
            count_ok &= g == g_big;
            gates = g;
        }
        println!("{kind}: max deviation vs expm {kind_worst:.3e}, {gates} gates");
        worst = worst.max(kind_worst);
    }
    if let Some(path) = &args.gates_out {
        let c = circuits::hamsim_combined(&dom, 1.0, args.alpha, args.beta, form)
            .map_err(|e| usage(e.into()))?;
        fs::write(path, c.to_json().map_err(|e| solver(e.into()))?)
            .map_err(|e| solver(e.into()))?;
    }
    println!("max deviation {worst:.3e}");
    if worst > EMULATION_TOL || !count_ok {
        return Err(check_failed(anyhow!(
            "emulation check failed: deviation {worst:.3e}, theta-independent gate count {count_ok}"
        )));
    }
    Ok(())
}

fn kubo_study(args: KuboArgs) -> Result<(), Failure> {
    let setup = (|| -> penproj::Result<KuboSetup> {
        let dom = build_grid(1, args.n, &BoundarySpec::WallDirichlet)?;
        let pc = dirichlet_projector(&dom)?;
        let v = laplacian_fd(&dom, 1.0, 1.0, Stencil::ThreePointPeriodic)?;
        let v0 = scenarios::gaussian(&dom, scenarios::GAUSSIAN_SIGMA, &pc.support());
        Ok(KuboSetup {
            h: penalty_generator(&pc)?,
            v,
            zeta: args.zetas[0],
            b: Forcing::zero(dom.size()),
            observable: pc,
            v0,
            t: args.t,
            grid: None,
        })
    })()
    .map_err(|e| usage(e.into()))?;
    let rows = order_study(&setup, &args.zetas).map_err(|e| usage(e.into()))?;
    match &args.out {
        Some(p) => {
            let mut w = create(p).map_err(solver)?;
            write_kubo_csv(&rows, &mut w).map_err(|e| solver(e.into()))?;
        }
        None => write_kubo_csv(&rows, io::stdout().lock()).map_err(|e| solver(e.into()))?,
    }
    let bad: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.ratio)
        .filter(|r| !(3.0..=5.0).contains(r))
        .collect();
    if !bad.is_empty() {
        return Err(check_failed(anyhow!(
            "residual ratios {bad:?} outside [3, 5]"
        )));
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    let ExampleArg::Heat = args.example;
    let inputs = heat_example(args.n, args.d, args.t, args.beta).map_err(|e| usage(e.into()))?;
    let est = lchs_steps(&inputs).map_err(|e| usage(e.into()))?;
    let overhead = heat_overhead(args.n, args.d, args.t, args.beta).map_err(|e| usage(e.into()))?;
    let mut report = serde_json::to_value(est).unwrap();
    report["example"] = json!("heat");
    report["n"] = json!(args.n);
    report["d"] = json!(args.d);
    report["heat_overhead_ln"] = json!(overhead);
    let mut out = io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap())
        .map_err(|e| solver(e.into()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::Emulate(a) => emulate(a),
        Command::KuboStudy(a) => kubo_study(a),
        Command::Estimate(a) => estimate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
