//! Subcommand implementations.

use std::fs;
use std::path::Path;

use balanced_core::continuation::{continue_in_alpha, make_manufactured, ManufacturedProblem, PathReport, Step};
use balanced_core::hermitian::{balanced_form, sqrt_positive_22, HermitianMetric};
use balanced_core::linearized::{apply_block, apply_block_inverse, apply_l1, apply_l2, Background, BlockTarget, BlockVector};
use balanced_core::system::{ellipticity_monitor, eval_f, eval_f_coupled, positivity, Geometry, SystemState};

use crate::config::RunConfig;
use crate::container::{Container, Kind};
use crate::report::{self, LatticeInfo, SCHEMA_VERSION};
use crate::rng::Uniform;
use crate::verify::{self, Row, Status};
use crate::{exit, Cli, CliError, Command};

/// Stream offsets for command-level randomness, disjoint from the battery's.
const LINEARIZE_STREAM: u64 = 1 << 20;
const SOLVE_STREAM: u64 = 2 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    SuiteFailed,
    /// Outputs were written but the solve did not reach its target.
    Incomplete,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => exit::OK,
            Outcome::SuiteFailed => exit::SUITE_FAILED,
            Outcome::Incomplete => exit::NUMERICAL,
        }
    }

    fn from_rows(rows: &[Row]) -> Outcome {
        if rows.iter().any(|r| r.status == Status::Fail) {
            Outcome::SuiteFailed
        } else {
            Outcome::Pass
        }
    }
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    fs::create_dir_all(&cli.out).map_err(|e| CliError::Output(format!("{}: {e}", cli.out.display())))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Verify => cmd_verify(&cfg, out, cli.threads),
        Command::Linearize => cmd_linearize(&cfg, out),
        Command::Residual => cmd_residual(&cfg, out),
        Command::Squareroot => cmd_squareroot(&cfg, out),
        Command::Solve => cmd_solve(&cfg, out, false),
        Command::SolveCoupled => cmd_solve(&cfg, out, true),
    }
}

fn lattice_info(cfg: &RunConfig) -> LatticeInfo {
    LatticeInfo { points: cfg.lattice.points, axes: cfg.lattice.axes.clone() }
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path, threads: usize) -> Result<Outcome, CliError> {
    let rows = verify::run_battery(cfg, cfg.seed, threads.max(1)).map_err(CliError::Usage)?;
    report::print_rows(&rows);
    for r in rows.iter().filter(|r| r.status == Status::Fail) {
        eprintln!("failed: {}", r.id);
    }
    let outcome = Outcome::from_rows(&rows);
    let r = report::VerifyReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        lattice: lattice_info(cfg),
        passed: outcome == Outcome::Pass,
        rows,
    };
    report::write_json(&out.join("report.json"), &r)?;
    Ok(outcome)
}

fn row(id: &'static str, measured: f64, tolerance: f64) -> Row {
    let status = if measured <= tolerance { Status::Pass } else { Status::Fail };
    Row { id, measured: Some(measured), tolerance, status, note: None }
}

pub fn cmd_linearize(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let bg = cfg.background(cfg.seed)?;
    let l = *bg.lattice();
    let mut u = Uniform::derived(cfg.seed, LINEARIZE_STREAM);
    let steps = &cfg.linearize.steps;
    let dir = BlockVector {
        u: verify::random_h0(l, bg.rank(), 1.0, &mut u).map_err(CliError::Usage)?,
        theta: verify::random_closed(l, 1.0, &mut u).map_err(CliError::Usage)?,
    };
    let base = SystemState::base(&bg, 0.0);
    let exact = BlockTarget { hym: apply_l1(&bg, &dir.u)?, anomaly: apply_l2(&bg, &dir.theta)? };
    let split = verify::gateaux_split(&bg, &base, &dir, &exact, steps).map_err(CliError::Usage)?;
    let errors: Vec<f64> = split.iter().map(|(a, b)| a.max(*b)).collect();
    let anomaly_errors: Vec<f64> = split.iter().map(|s| s.1).collect();
    let orders = verify::observed_orders(&errors, steps);

    // the anomaly component does not see u at α′ = 0
    let pure_u = BlockVector { u: dir.u.clone(), theta: BlockVector::zeros(&bg).theta };
    let h = steps[0];
    let anomaly_at = |t: f64| -> Result<_, CliError> { Ok(eval_f(&bg, &base.step(&bg, t, &pure_u)?)?.anomaly) };
    let block21 = anomaly_at(h)?.sub(&anomaly_at(-h)?)?.max_abs() / (2.0 * h);

    let mut round_trip: f64 = 0.0;
    for _ in 0..cfg.linearize.samples {
        let x = BlockVector {
            u: verify::random_h0(l, bg.rank(), 1.0, &mut u).map_err(CliError::Usage)?,
            theta: verify::random_closed(l, 1.0, &mut u).map_err(CliError::Usage)?,
        };
        let y = apply_block_inverse(&bg, &apply_block(&bg, &x)?)?;
        round_trip = round_trip.max(y.sub(&x)?.max_abs() / x.max_abs());
    }

    let tol = cfg.verify.tolerance;
    let scale = exact.max_abs().max(1.0);
    let rows = vec![
        row("linearize.gateaux_order", orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max), 0.1),
        row("linearize.anomaly_exact", anomaly_errors.iter().fold(0.0, |a: f64, b| a.max(*b)) / scale, tol),
        row("linearize.block21_zero", block21, tol),
        row("linearize.block_round_trip", round_trip, tol),
    ];
    report::print_rows(&rows);
    let outcome = Outcome::from_rows(&rows);
    let r = report::LinearizeReport {
        schema_version: SCHEMA_VERSION,
        steps: steps.clone(),
        errors,
        orders,
        anomaly_errors,
        block21,
        round_trip,
        samples: cfg.linearize.samples,
        passed: outcome == Outcome::Pass,
        rows,
    };
    report::write_json(&out.join("linearize.json"), &r)?;
    Ok(outcome)
}

/// Read a state written by `solve`, checking it lives on the background lattice.
pub fn read_state(bg: &Background, path: &Path, alpha: Option<f64>) -> Result<SystemState, CliError> {
    let c = Container::read(path)?;
    let alpha = match (alpha, c.metadata.get("alpha")) {
        (Some(a), _) | (None, Some(&a)) => a,
        (None, None) => return Err(CliError::Usage(format!("{}: no alpha in metadata or config", path.display()))),
    };
    let u = c.end("u")?;
    let beta = c.form("beta")?;
    if u.lattice() != bg.lattice() || beta.lattice() != bg.lattice() {
        return Err(CliError::Usage(format!("{}: lattice differs from the configured one", path.display())));
    }
    if u.rank() != bg.rank() {
        return Err(CliError::Usage(format!("{}: rank {} but configured rank {}", path.display(), u.rank(), bg.rank())));
    }
    let mut state = SystemState::new(alpha, u, beta)?;
    if c.record("tangent").is_ok() {
        state = state.with_tangent(c.end("tangent")?);
    }
    Ok(state)
}

pub fn write_state(bg: &Background, state: &SystemState, path: &Path) -> Result<(), CliError> {
    let mut c = Container::new().meta("alpha", state.alpha).meta("rank", bg.rank() as f64);
    c.push_end("u", &state.u);
    c.push_form("beta", &state.beta);
    c.push_form("theta", &state.theta);
    if let Some(t) = &state.tangent {
        c.push_end("tangent", t);
    }
    c.push_metric("metric", Geometry::new(bg, state)?.metric());
    c.write(path)?;
    Ok(())
}

fn class_factor(bg: &Background, alpha: f64) -> Option<f64> {
    (alpha > 0.0).then(|| bg.flat().dilaton() / alpha.sqrt())
}

pub fn cmd_residual(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let bg = cfg.background(cfg.seed)?;
    let state = match &cfg.residual.state {
        Some(p) => read_state(&bg, p, cfg.residual.alpha)?,
        None => SystemState::base(&bg, cfg.residual.alpha.unwrap_or(0.0)),
    };
    let r = if state.tangent.is_some() { eval_f_coupled(&bg, &state)? } else { eval_f(&bg, &state)? };
    let rep = report::ResidualReport {
        schema_version: SCHEMA_VERSION,
        alpha: state.alpha,
        hym_l2: r.hym_l2,
        hym_max: r.hym_max,
        anomaly_l2: r.anomaly_l2,
        anomaly_max: r.anomaly_max,
        tangent_l2: r.tangent_hym.as_ref().map(|_| r.tangent_l2),
        ellipticity: ellipticity_monitor(&bg, &state)?,
        class_factor: class_factor(&bg, state.alpha),
        positivity: positivity(&bg, &state)?,
    };
    println!("hym_l2 {:.3e}  anomaly_l2 {:.3e}  ellipticity {:.3e}", rep.hym_l2, rep.anomaly_l2, rep.ellipticity);
    report::write_json(&out.join("residual.json"), &rep)?;
    Ok(Outcome::Pass)
}

fn relative_distance(a: &HermitianMetric, b: &HermitianMetric) -> f64 {
    (0..a.lattice().len()).map(|s| (a.at(s) - b.at(s)).norm() / b.at(s).norm()).fold(0.0, f64::max)
}

pub fn cmd_squareroot(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let bg = cfg.background(cfg.seed)?;
    let omega = *bg.flat().omega();
    let (psi, reference) = match &cfg.squareroot.input {
        Some(p) => {
            let c = Container::read(p)?;
            let rec = c.record(&cfg.squareroot.record)?;
            if rec.kind != Kind::Form || (rec.p, rec.q) != (2, 2) {
                return Err(CliError::Usage(format!(
                    "{}: record {:?} must be a (2,2)-form",
                    p.display(),
                    cfg.squareroot.record
                )));
            }
            (c.form(&cfg.squareroot.record)?, None)
        }
        None => (balanced_form(bg.flat().metric(), &omega)?, Some(bg.flat().metric())),
    };
    let g = sqrt_positive_22(&psi, &omega)?;
    let residual = balanced_form(&g, &omega)?.sub(&psi)?.max_abs() / psi.max_abs();
    let rep = report::SquareRootReport {
        schema_version: SCHEMA_VERSION,
        residual,
        min_eigenvalue: g.min_eigenvalue().0,
        reference_error: reference.map(|r| relative_distance(&g, r)),
    };
    let mut c = Container::new();
    c.push_metric("metric", &g);
    c.write(&out.join("metric.strm"))?;
    println!("residual {:.3e}  min eigenvalue {:.6}", rep.residual, rep.min_eigenvalue);
    report::write_json(&out.join("squareroot.json"), &rep)?;
    Ok(Outcome::Pass)
}

/// The manufactured problem of a solve run, drawn from the seed.
pub fn manufactured_problem(cfg: &RunConfig, bg: &Background, coupled: bool) -> Result<ManufacturedProblem, CliError> {
    let l = *bg.lattice();
    let mut u = Uniform::derived(cfg.seed, SOLVE_STREAM);
    let su = verify::random_h0(l, bg.rank(), 1.0, &mut u).map_err(CliError::Usage)?;
    let sb = balanced_core::sample::real_11(l, 1.0, &mut u.source());
    let st = if coupled { Some(verify::random_h0(l, 3, 1.0, &mut u).map_err(CliError::Usage)?) } else { None };
    Ok(make_manufactured(bg, cfg.solve.amplitude, &su, &sb, st.as_ref(), cfg.solve.alpha_target)?)
}

pub fn solve_path(cfg: &RunConfig, coupled: bool) -> Result<(Background, PathReport), CliError> {
    let bg = cfg.background(cfg.seed)?;
    let ccfg = cfg.solve.continuation();
    let alpha0 = cfg.solve.alpha_start;
    let problem = if cfg.solve.manufactured { Some(manufactured_problem(cfg, &bg, coupled)?) } else { None };
    let start = match &problem {
        Some(p) => p.solution(alpha0),
        None => {
            let s = SystemState::base(&bg, alpha0);
            match Step::zeros(&bg, coupled).tangent {
                Some(t) => s.with_tangent(t),
                None => s,
            }
        }
    };
    let path = continue_in_alpha(&bg, &ccfg, &start, problem.as_ref())?;
    Ok((bg, path))
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, coupled: bool) -> Result<Outcome, CliError> {
    let (bg, path) = solve_path(cfg, coupled)?;
    report::write_path_csv(&out.join("path.csv"), &path.records)?;
    write_state(&bg, &path.state, &out.join("state.strm"))?;
    let rep = report::SolveReport::new(&path, coupled, cfg.solve.manufactured, cfg.solve.amplitude);
    report::write_json(&out.join("report.json"), &rep)?;
    println!(
        "alpha {:.6e}  steps {}  residual {:.3e}{}",
        rep.alpha_reached,
        rep.accepted_steps,
        rep.final_residual,
        rep.recovery_error.map_or_else(String::new, |e| format!("  recovery {e:.3e}"))
    );
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(reason) = &rep.stop_reason {
        eprintln!("stopped: {reason}");
    }
    Ok(if path.completed { Outcome::Pass } else { Outcome::Incomplete })
}
