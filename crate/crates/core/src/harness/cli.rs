//! `xdiff` command line.
//!
//! Exit status: 0 success, 1 configuration error, 2 solver failure,
//! 3 failed check in `verify`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{entropy_report, record_trajectory, ENTROPY_SLACK, MAX_ENTROPY_SPACING};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::config::{load_config, ScenarioConfig, SourceKind};
use crate::harness::csv;
use crate::harness::scenarios::{run_scenario, scenario};
use crate::harness::studies::{
    mms_space_sweep, mms_time_sweep, pair_config, refinement_config, weak_sweep, Sweep,
};
use crate::harness::verify::{invariant_suite, scenario_suite};
use crate::model::EPSILON_REG_MAX;
use crate::pairlab::{energy_identity_residual, gronwall_experiment, uniqueness_refinement_study};
use crate::timestepper::Trajectory;
use crate::transform::antiderivative;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Caps the worker threads used by sweeps.
pub const THREADS_ENV: &str = "XDIFF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "xdiff", version, about = "Cross-diffusion nutrient-taxis solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trajectory and write its diagnostics.
    Simulate(CommonArgs),
    /// Twin runs from perturbed initial data; energy and Grönwall ratio.
    Pair(CommonArgs),
    /// Convergence study (manufactured solution, or n/2n/4n self-convergence).
    Converge(CommonArgs),
    /// Weak-form residuals under refinement.
    Weakcheck(CommonArgs),
    /// Scenario checks and randomized invariants; exit 3 on any failure.
    Verify(CommonArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Scenario file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in scenario: logistic, bump-taxis, degenerate-dip or mms.
    #[arg(long, value_name = "NAME", conflicts_with = "config")]
    pub scenario: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Perturbation size for `pair`, overriding the config.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Also write cell values of u, v and face values of w per snapshot.
    #[arg(long)]
    pub dump_fields: bool,
    /// Regularization in the 1/(u + eps) monitor, overriding the config.
    #[arg(long, value_name = "FLOAT", allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

/// What a subcommand produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub exit_code: i32,
    pub csv_paths: Vec<PathBuf>,
    pub scalars: Vec<(String, String)>,
    /// Free-form report lines printed before the scalars.
    pub lines: Vec<String>,
}

impl RunSummary {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.scalars.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for line in &self.lines {
            let _ = writeln!(s, "{line}");
        }
        for (k, v) in &self.scalars {
            let _ = writeln!(s, "{k} = {v}");
        }
        for p in &self.csv_paths {
            let _ = writeln!(s, "wrote {}", p.display());
        }
        s
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::Io(_) => EXIT_CONFIG,
        Error::Contract(_)
        | Error::InvalidState { .. }
        | Error::NewtonDivergence { .. }
        | Error::StepTooSmall { .. } => EXIT_SOLVER,
    }
}

/// Parses arguments, runs the subcommand and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let quiet = match &cli.command {
        Command::Simulate(a)
        | Command::Pair(a)
        | Command::Converge(a)
        | Command::Weakcheck(a)
        | Command::Verify(a) => a.quiet,
    };
    match execute(&cli.command) {
        Ok(summary) => {
            if !quiet {
                print!("{}", summary.render());
            }
            summary.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the global rayon pool from `XDIFF_THREADS` when set.
pub fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a pool built earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

pub fn execute(cmd: &Command) -> Result<RunSummary> {
    match cmd {
        Command::Simulate(a) => simulate(&load(a)?, a),
        Command::Pair(a) => pair(&load(a)?, a),
        Command::Converge(a) => converge(&load(a)?, a),
        Command::Weakcheck(a) => weakcheck(&load(a)?, a),
        Command::Verify(a) => verify(a),
    }
}

fn load(a: &CommonArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&a.config, &a.scenario) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => scenario(name)?,
        (None, None) => {
            return Err(Error::Config(
                "one of --config PATH or --scenario NAME is required".into(),
            ))
        }
    };
    if let Some(eps) = a.epsilon {
        if !(0.0..=EPSILON_REG_MAX).contains(&eps) {
            return Err(Error::Config(format!(
                "--epsilon must lie in [0, {EPSILON_REG_MAX}], got {eps}"
            )));
        }
        cfg.params.epsilon_reg = eps;
    }
    if let Some(delta) = a.delta {
        if !delta.is_finite() {
            return Err(Error::Config(format!("--delta must be finite, got {delta}")));
        }
        cfg.delta = delta;
    }
    Ok(cfg)
}

fn out_dir(a: &CommonArgs) -> Result<&Path> {
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", a.out.display())))?;
    Ok(&a.out)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_string(), |v| format!("{v:e}"))
}

fn dump_fields(dir: &Path, stem: &str, traj: &Trajectory, grid: &Grid) -> Result<Vec<PathBuf>> {
    let cells = dir.join(format!("{stem}.csv"));
    let mut w = csv::create(&cells, &["t", "x", "u", "v"])?;
    for s in &traj.states {
        for (i, &x) in grid.centers().iter().enumerate() {
            w.row(&[s.t, x, s.u[i], s.v[i]])?;
        }
    }
    w.finish()?;
    let faces = dir.join(format!("{stem}_w.csv"));
    let mut w = csv::create(&faces, &["t", "x", "w"])?;
    for s in &traj.states {
        let wf = antiderivative(s, grid)?;
        for (j, &x) in grid.faces().iter().enumerate() {
            w.row(&[s.t, x, wf[j]])?;
        }
    }
    w.finish()?;
    Ok(vec![cells, faces])
}

fn simulate(cfg: &ScenarioConfig, a: &CommonArgs) -> Result<RunSummary> {
    let dir = out_dir(a)?;
    let started = Instant::now();
    let (grid, traj) = run_scenario(cfg)?;
    let eps = cfg.params.epsilon_reg;
    let recs = record_trajectory(&traj, &grid, eps)?;
    let mut summary = RunSummary::default();
    let path = dir.join("diagnostics.csv");
    csv::write_diagnostics(&path, &recs)?;
    summary.csv_paths.push(path);
    if a.dump_fields {
        summary.csv_paths.extend(dump_fields(dir, "fields", &traj, &grid)?);
    }
    let first = &recs[0];
    let last = recs.last().unwrap_or(first);
    summary.push("steps", traj.steps_taken);
    summary.push("rejections", traj.rejections);
    summary.push("final_mass", format!("{:e}", last.mass_total));
    summary.push(
        "mass_drift",
        format!(
            "{:e}",
            recs.iter()
                .map(|r| (r.mass_total - first.mass_total).abs())
                .fold(0.0, f64::max)
        ),
    );
    summary.push(
        "min_u",
        format!("{:e}", recs.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min)),
    );
    summary.push(
        "min_v",
        format!("{:e}", recs.iter().map(|r| r.min_v).fold(f64::INFINITY, f64::min)),
    );
    let dense = traj.states.len() >= 2
        && traj
            .states
            .windows(2)
            .all(|w| w[1].t - w[0].t <= MAX_ENTROPY_SPACING * (1.0 + 1e-9));
    if dense {
        let e = entropy_report(&traj, &grid, eps, ENTROPY_SLACK)?;
        summary.push("worst_entropy_violation", format!("{:e}", e.worst_rate_violation));
        summary.push("entropy_margin", format!("{:e}", e.integrated_margin));
    } else {
        summary.push("worst_entropy_violation", "skipped (snapshots sparser than 1e-2)");
    }
    summary.push("elapsed_s", format!("{:.3}", started.elapsed().as_secs_f64()));
    Ok(summary)
}

fn pair(cfg: &ScenarioConfig, a: &CommonArgs) -> Result<RunSummary> {
    let dir = out_dir(a)?;
    let pc = pair_config(cfg, cfg.delta);
    let run = gronwall_experiment(&pc)?;
    let grid = Grid::new(cfg.n_cells)?;
    let residual = energy_identity_residual(&run.base, &run.perturbed, &grid, &cfg.params)?;
    let mut summary = RunSummary::default();
    let path = dir.join("pair.csv");
    csv::write_pair(&path, &run.samples)?;
    summary.csv_paths.push(path);
    if a.dump_fields {
        summary.csv_paths.extend(dump_fields(dir, "fields_base", &run.base, &grid)?);
        summary.csv_paths.extend(dump_fields(dir, "fields_perturbed", &run.perturbed, &grid)?);
    }
    let r = &run.report;
    summary.push("delta", format!("{:e}", r.perturbation_size));
    summary.push("C_fit", fmt_opt(r.c_fit));
    summary.push("max_ratio", format!("{:e}", r.max_ratio));
    summary.push("sup_E", format!("{:e}", r.sup_energy));
    summary.push("E0", format!("{:e}", r.initial_energy));
    summary.push("growth_factor", fmt_opt(r.growth_factor));
    summary.push("c_obs", format!("{:e}", r.c_obs));
    summary.push("identity_residual", format!("{residual:e}"));
    Ok(summary)
}

fn write_sweep(path: &Path, s: &Sweep) -> Result<()> {
    let mut w = csv::create(path, &["n", "dt", "error", "order"])?;
    for k in 0..s.n.len() {
        let order = if k == 0 { f64::NAN } else { s.order[k - 1] };
        w.row(&[s.n[k] as f64, s.dt[k], s.error[k], order])?;
    }
    w.finish()?;
    Ok(())
}

fn orders_text(s: &Sweep) -> String {
    s.order
        .iter()
        .map(|o| format!("{o:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn converge(cfg: &ScenarioConfig, a: &CommonArgs) -> Result<RunSummary> {
    let dir = out_dir(a)?;
    let n = cfg.n_cells;
    let mut summary = RunSummary::default();
    match cfg.source {
        SourceKind::Mms => {
            let c = cfg.control.dt_init * (n * n) as f64;
            let space = mms_space_sweep(&[n, 2 * n, 4 * n], c, cfg.t_end)?;
            let dt0 = cfg.t_end / 10.0;
            let time = mms_time_sweep(8 * n, &[dt0, dt0 / 2.0, dt0 / 4.0, dt0 / 8.0], cfg.t_end)?;
            let (ps, pt) = (dir.join("mms_space.csv"), dir.join("mms_time.csv"));
            write_sweep(&ps, &space)?;
            write_sweep(&pt, &time)?;
            summary.csv_paths.extend([ps, pt]);
            summary.push("space_orders", orders_text(&space));
            summary.push("time_orders", orders_text(&time));
        }
        SourceKind::None => {
            let study = uniqueness_refinement_study(&refinement_config(cfg, n, cfg.t_end))?;
            let path = dir.join("refinement.csv");
            let mut w = csv::create(&path, &["n_a", "n_b", "dist_uv", "dist_wv"])?;
            for r in &study.rows {
                w.row(&[r.n_a as f64, r.n_b as f64, r.dist_uv, r.dist_wv])?;
            }
            w.finish()?;
            summary.csv_paths.push(path);
            summary.push("contraction_uv", format!("{:.3}", study.contraction_uv));
            summary.push("contraction_wv", format!("{:.3}", study.contraction_wv));
        }
    }
    Ok(summary)
}

pub const WEAK_LEVEL: u32 = 2;

fn weakcheck(cfg: &ScenarioConfig, a: &CommonArgs) -> Result<RunSummary> {
    let dir = out_dir(a)?;
    let n = cfg.n_cells;
    let coarse = (n / 4).max(1 << WEAK_LEVEL);
    let ns = [coarse, 2 * coarse, 4 * coarse];
    let (su, sv) = weak_sweep(cfg, &ns, cfg.control.dt_init, 2, WEAK_LEVEL)?;
    let path = dir.join("weak.csv");
    let mut w = csv::create(
        &path,
        &["n", "dt", "residual_u", "residual_v", "order_u", "order_v"],
    )?;
    for k in 0..ns.len() {
        let (ou, ov) = if k == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (su.order[k - 1], sv.order[k - 1])
        };
        w.row(&[ns[k] as f64, su.dt[k], su.error[k], sv.error[k], ou, ov])?;
    }
    w.finish()?;
    let mut summary = RunSummary::default();
    summary.csv_paths.push(path);
    summary.push("level", WEAK_LEVEL);
    summary.push("orders_u", orders_text(&su));
    summary.push("orders_v", orders_text(&sv));
    Ok(summary)
}

pub const VERIFY_TRIALS: usize = 50;

fn verify(a: &CommonArgs) -> Result<RunSummary> {
    let seed = if a.config.is_some() || a.scenario.is_some() {
        load(a)?.seed
    } else {
        0
    };
    let started = Instant::now();
    let mut checks = scenario_suite()?;
    checks.extend(invariant_suite(seed, VERIFY_TRIALS)?);
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut summary = RunSummary::default();
    summary.lines = checks.iter().map(|c| c.to_string()).collect();
    summary.push("checks", checks.len());
    summary.push("failed", failed);
    summary.push("elapsed_s", format!("{:.3}", started.elapsed().as_secs_f64()));
    if failed > 0 {
        summary.exit_code = EXIT_INVARIANT;
    }
    Ok(summary)
}
