//! Convergence and invariant studies shared by the CLI and the test suites.

use rayon::prelude::*;

use crate::diagnostics::{
    entropy_report, nutrient_lower_bound, record_trajectory, weak_residual, EntropyReport,
    ENTROPY_SLACK,
};
use crate::error::Result;
use crate::grid::Grid;
use crate::harness::config::ScenarioConfig;
use crate::harness::scenarios::{initial_state, run_scenario, scenario};
use crate::mms::Manufactured;
use crate::pairlab::{energy_identity_residual, gronwall_experiment, PairConfig, RefinementConfig};
use crate::timestepper::{uniform_times, Integrator, StepControl, Trajectory};
use crate::transform::w_endpoint_drift;

/// `log2(e_k / e_{k+1})` for successive halvings.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub n: Vec<usize>,
    pub dt: Vec<f64>,
    pub error: Vec<f64>,
    pub order: Vec<f64>,
}

fn sweep(n: Vec<usize>, dt: Vec<f64>, error: Vec<f64>) -> Sweep {
    let order = orders(&error);
    Sweep {
        n,
        dt,
        error,
        order,
    }
}

/// Max over snapshots and cells of `|u - 1/(1 + 4 e^-t)|` on the logistic
/// scenario, for each step size.
pub fn logistic_sweep(dts: &[f64]) -> Result<Sweep> {
    let base = scenario("logistic")?;
    let errors = dts
        .par_iter()
        .map(|&dt| -> Result<f64> {
            let cfg = ScenarioConfig {
                control: StepControl::fixed(dt),
                ..base.clone()
            };
            let (_, traj) = run_scenario(&cfg)?;
            Ok(traj
                .states
                .iter()
                .map(|s| {
                    let exact = 1.0 / (1.0 + 4.0 * (-s.t).exp());
                    s.u.iter().map(|u| (u - exact).abs()).fold(0.0, f64::max)
                })
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sweep(vec![base.n_cells; dts.len()], dts.to_vec(), errors))
}

/// Single-trajectory invariants of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioChecks {
    pub name: String,
    pub mass_drift: f64,
    pub w_drift: f64,
    pub min_u: f64,
    pub min_v: f64,
    /// `(min v0) exp(-max_u T)`
    pub v_bound: f64,
    pub entropy: Vec<EntropyReport>,
}

pub const ENTROPY_EPSILONS: [f64; 2] = [1e-6, 1e-8];

pub fn scenario_checks_for(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioChecks> {
    let (grid, traj) = run_scenario(cfg)?;
    checks_on(name, &grid, &traj)
}

pub fn scenario_checks(name: &str) -> Result<ScenarioChecks> {
    scenario_checks_for(name, &scenario(name)?)
}

fn checks_on(name: &str, grid: &Grid, traj: &Trajectory) -> Result<ScenarioChecks> {
    let recs = record_trajectory(traj, grid, ENTROPY_EPSILONS[0])?;
    let m0 = recs[0].mass_total;
    let (min_v, v_bound) = nutrient_lower_bound(traj);
    let entropy = ENTROPY_EPSILONS
        .iter()
        .map(|&eps| entropy_report(traj, grid, eps, ENTROPY_SLACK))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioChecks {
        name: name.to_string(),
        mass_drift: recs
            .iter()
            .map(|r| (r.mass_total - m0).abs())
            .fold(0.0, f64::max),
        w_drift: w_endpoint_drift(traj, grid)?,
        min_u: recs.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min),
        min_v,
        v_bound,
        entropy,
    })
}

fn mms_error(n: usize, dt: f64, t_end: f64) -> Result<f64> {
    let grid = Grid::new(n)?;
    let m = Manufactured::default();
    let s0 = m.exact_state(&grid, 0.0);
    let traj = Integrator::new(&grid, Default::default(), StepControl::fixed(dt))
        .with_source(&m)
        .run(&s0, t_end, &[])?;
    let exact = m.exact_state(&grid, t_end);
    let last = traj.last();
    let sq: f64 = (0..n)
        .map(|i| (last.u[i] - exact.u[i]).powi(2) + (last.v[i] - exact.v[i]).powi(2))
        .sum();
    Ok((sq * grid.h()).sqrt())
}

/// Discrete L2 error against the manufactured solution with `dt = c h^2`.
pub fn mms_space_sweep(ns: &[usize], c: f64, t_end: f64) -> Result<Sweep> {
    let dts: Vec<f64> = ns.iter().map(|&n| c / (n * n) as f64).collect();
    let errors = ns
        .par_iter()
        .zip(&dts)
        .map(|(&n, &dt)| mms_error(n, dt, t_end))
        .collect::<Result<Vec<_>>>()?;
    Ok(sweep(ns.to_vec(), dts, errors))
}

/// Same error on a fixed grid over a list of step sizes.
pub fn mms_time_sweep(n: usize, dts: &[f64], t_end: f64) -> Result<Sweep> {
    let errors = dts
        .par_iter()
        .map(|&dt| mms_error(n, dt, t_end))
        .collect::<Result<Vec<_>>>()?;
    Ok(sweep(vec![n; dts.len()], dts.to_vec(), errors))
}

/// Twin-run settings taken from a scenario.
pub fn pair_config(cfg: &ScenarioConfig, delta: f64) -> PairConfig {
    PairConfig {
        n_cells: cfg.n_cells,
        horizon: cfg.t_end,
        output_count: cfg.output_count,
        u0: cfg.u0.clone(),
        v0: cfg.v0.clone(),
        params: cfg.params,
        control: cfg.control,
        delta,
        shape: cfg.pert_shape,
        perturb_v: cfg.pert_v,
    }
}

pub fn refinement_config(cfg: &ScenarioConfig, n_cells: usize, horizon: f64) -> RefinementConfig {
    RefinementConfig {
        n_cells,
        horizon,
        u0: cfg.u0.clone(),
        v0: cfg.v0.clone(),
        params: cfg.params,
        control: cfg.control,
    }
}

/// Energy-identity residual on grids `ns` with `dt = dt0 * (ns[0]/n)^power`
/// and a snapshot after every step.
pub fn identity_sweep(
    cfg: &ScenarioConfig,
    delta: f64,
    ns: &[usize],
    dt0: f64,
    power: i32,
    horizon: f64,
) -> Result<Sweep> {
    let dts = scaled_steps(ns, dt0, power);
    let errors = ns
        .par_iter()
        .zip(&dts)
        .map(|(&n, &dt)| -> Result<f64> {
            let pc = PairConfig {
                n_cells: n,
                horizon,
                output_count: steps_for(horizon, dt),
                control: StepControl::fixed(dt),
                ..pair_config(cfg, delta)
            };
            let run = gronwall_experiment(&pc)?;
            energy_identity_residual(&run.base, &run.perturbed, &Grid::new(n)?, &cfg.params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sweep(ns.to_vec(), dts, errors))
}

fn scaled_steps(ns: &[usize], dt0: f64, power: i32) -> Vec<f64> {
    ns.iter()
        .map(|&n| dt0 * (ns[0] as f64 / n as f64).powi(power))
        .collect()
}

fn steps_for(horizon: f64, dt: f64) -> usize {
    ((horizon / dt).round() as usize).max(1)
}

/// Weak residuals on grids `ns`, `dt = dt0 * (ns[0]/n)^power`, one snapshot per step.
/// Each step is shrunk so the step count is a multiple of `2^level` and every
/// time node of the test basis is a snapshot.
pub fn weak_sweep(
    cfg: &ScenarioConfig,
    ns: &[usize],
    dt0: f64,
    power: i32,
    level: u32,
) -> Result<(Sweep, Sweep)> {
    let nodes = 1usize << level.min(20);
    let dts: Vec<f64> = scaled_steps(ns, dt0, power)
        .into_iter()
        .map(|dt| {
            let steps = ((cfg.t_end / dt - 1e-9).ceil() as usize).div_ceil(nodes).max(1) * nodes;
            cfg.t_end / steps as f64
        })
        .collect();
    let residuals = ns
        .par_iter()
        .zip(&dts)
        .map(|(&n, &dt)| -> Result<(f64, f64)> {
            let grid = Grid::new(n)?;
            let s0 = initial_state(cfg, &grid)?;
            let times = uniform_times(cfg.t_end, steps_for(cfg.t_end, dt));
            let traj =
                Integrator::new(&grid, cfg.params, StepControl::fixed(dt)).run(&s0, cfg.t_end, &times)?;
            let r = weak_residual(&traj, &grid, level)?;
            Ok((r.residual_u, r.residual_v))
        })
        .collect::<Result<Vec<_>>>()?;
    let (ru, rv): (Vec<f64>, Vec<f64>) = residuals.into_iter().unzip();
    Ok((sweep(ns.to_vec(), dts.clone(), ru), sweep(ns.to_vec(), dts, rv)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_halving_errors() {
        assert_eq!(orders(&[4.0, 2.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(orders(&[16.0, 4.0]), vec![2.0]);
    }

    #[test]
    fn logistic_error_is_small_and_first_order() {
        let s = logistic_sweep(&[2e-3, 1e-3]).unwrap();
        assert!(s.error[1] < 1e-4);
        assert!((s.order[0] - 1.0).abs() < 0.15);
    }
}
