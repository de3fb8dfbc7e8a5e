//! Shipped scenarios, stored as config text.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::config::{parse_config, ScenarioConfig, SourceKind};
use crate::mms::Manufactured;
use crate::timestepper::{uniform_times, Integrator, SourceTerm, State, Trajectory};

pub const LOGISTIC: &str = "\
# spatially uniform: u' = u v, v' = -u v, so u(t) = 1/(1 + 4 e^-t)
n_cells = 64
t_end = 2.0
output_count = 200
dt_init = 1e-3
dt_max = 1e-3
u0 = constant 0.2
v0 = constant 0.8
";

pub const BUMP_TAXIS: &str = "\
# population bump in a nutrient gradient
n_cells = 256
t_end = 1.0
output_count = 100
dt_init = 1e-3
dt_max = 1e-3
u0 = bump 0.5 0.1 0.2 1.0
v0 = cosine 1.0 0.5 1
";

pub const DEGENERATE_DIP: &str = "\
# u0 dips to 1e-4 at the center; 1/u0 stays integrable
n_cells = 256
t_end = 1.0
output_count = 100
dt_init = 1e-3
dt_max = 1e-3
u0 = bump 0.5 0.1 1.0 -0.9999
v0 = cosine 1.0 0.5 1
";

pub const MMS: &str = "\
# manufactured solution u = 0.5 + 0.25 cos(pi x) e^-t, v = 1 + 0.25 cos(pi x) e^-t
n_cells = 32
t_end = 0.5
output_count = 50
dt_init = 9.765625e-4
dt_max = 9.765625e-4
u0 = cosine 0.5 0.25 1
v0 = cosine 1.0 0.25 1
kind = converge
source = mms
";

pub const SCENARIOS: [(&str, &str); 4] = [
    ("logistic", LOGISTIC),
    ("bump-taxis", BUMP_TAXIS),
    ("degenerate-dip", DEGENERATE_DIP),
    ("mms", MMS),
];

pub fn scenario_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(name, _)| *name).collect()
}

pub fn scenario(name: &str) -> Result<ScenarioConfig> {
    let text = SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario `{name}` (available: {})",
                scenario_names().join(", ")
            ))
        })?;
    Ok(parse_config(text)?)
}

pub fn initial_state(cfg: &ScenarioConfig, grid: &Grid) -> Result<State> {
    State::new(cfg.u0.sample(grid)?, cfg.v0.sample(grid)?, 0.0)
}

pub fn source_term(cfg: &ScenarioConfig) -> Option<Manufactured> {
    match cfg.source {
        SourceKind::None => None,
        SourceKind::Mms => Some(Manufactured::default()),
    }
}

/// Runs the configured problem with `output_count` evenly spaced snapshots.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Grid, Trajectory)> {
    let grid = Grid::new(cfg.n_cells)?;
    let s0 = initial_state(cfg, &grid)?;
    let source = source_term(cfg);
    let mut integ = Integrator::new(&grid, cfg.params, cfg.control);
    if let Some(m) = &source {
        integ = integ.with_source(m as &dyn SourceTerm);
    }
    let traj = integ.run(&s0, cfg.t_end, &uniform_times(cfg.t_end, cfg.output_count))?;
    Ok((grid, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::serialize;

    #[test]
    fn all_scenarios_parse_and_round_trip() {
        for name in scenario_names() {
            let cfg = scenario(name).unwrap();
            assert_eq!(parse_config(&serialize(&cfg)).unwrap(), cfg, "{name}");
        }
        assert!(scenario("nope").is_err());
    }

    #[test]
    fn mms_initial_data_matches_the_exact_solution() {
        let cfg = scenario("mms").unwrap();
        let g = Grid::new(cfg.n_cells).unwrap();
        let s0 = initial_state(&cfg, &g).unwrap();
        let exact = Manufactured::default().exact_state(&g, 0.0);
        for i in 0..g.n_cells() {
            assert!((s0.u[i] - exact.u[i]).abs() < 1e-15);
            assert!((s0.v[i] - exact.v[i]).abs() < 1e-15);
        }
    }
}
