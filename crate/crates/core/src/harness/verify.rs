//! The `verify` suite: logistic oracle, conservation, positivity, entropy
//! bound, and randomized invariants of every module.

use std::fmt;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::blocktri::BlockTridiag;
use crate::diagnostics::{record_with_epsilon, weak_residual};
use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::harness::config::{parse_config, serialize};
use crate::harness::scenarios::{scenario, scenario_names};
use crate::harness::studies::{logistic_sweep, scenario_checks, ScenarioChecks};
use crate::model::{rhs, FluxMean, ModelParams, TaxisScheme};
use crate::pairlab::pair_energy;
use crate::timestepper::{assemble_jacobian, implicit_residual, State, Trajectory};
use crate::transform::{antiderivative, w_gradient_identity_check};

pub const LOGISTIC_TOL: f64 = 1e-4;
pub const ORDER_TOL: f64 = 0.15;
pub const DRIFT_TOL: f64 = 1e-11;
pub const V_BOUND_FACTOR: f64 = 0.999;

/// Scenarios without a source term.
pub const CONSERVATIVE_SCENARIOS: [&str; 3] = ["logistic", "bump-taxis", "degenerate-dip"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub fn logistic_checks() -> Result<Vec<Check>> {
    let s = logistic_sweep(&[1e-3, 5e-4])?;
    Ok(vec![
        Check::new(
            "logistic oracle",
            s.error[0] <= LOGISTIC_TOL,
            format!("max error {:.3e} at dt = 1e-3 (tol {LOGISTIC_TOL:e})", s.error[0]),
        ),
        Check::new(
            "logistic order",
            (s.order[0] - 1.0).abs() <= ORDER_TOL,
            format!("order {:.3} under dt halving (1 ± {ORDER_TOL})", s.order[0]),
        ),
    ])
}

pub fn conservation_check(c: &ScenarioChecks) -> Check {
    Check::new(
        format!("conservation {}", c.name),
        c.mass_drift <= DRIFT_TOL && c.w_drift <= DRIFT_TOL,
        format!(
            "mass drift {:.2e}, w(1) drift {:.2e} (tol {DRIFT_TOL:e})",
            c.mass_drift, c.w_drift
        ),
    )
}

pub fn positivity_check(c: &ScenarioChecks, with_bound: bool) -> Check {
    let signs = c.min_u >= 0.0 && c.min_v > 0.0;
    let bound = !with_bound || c.min_v >= c.v_bound * V_BOUND_FACTOR;
    let mut detail = format!("min u {:.3e}, min v {:.4}", c.min_u, c.min_v);
    if with_bound {
        detail += &format!(
            ", bound {:.4} x {V_BOUND_FACTOR}",
            c.v_bound
        );
    }
    Check::new(format!("positivity {}", c.name), signs && bound, detail)
}

pub fn entropy_checks(c: &ScenarioChecks) -> Vec<Check> {
    c.entropy
        .iter()
        .map(|e| {
            Check::new(
                format!("entropy {} eps={:e}", c.name, e.epsilon),
                e.integrated_margin <= 0.0,
                format!(
                    "margin {:.4e}, sup {:.6} vs initial {:.6}",
                    e.integrated_margin, e.sup_entropy, e.initial_entropy
                ),
            )
        })
        .collect()
}

/// Criteria on the shipped scenarios: logistic oracle and order, then
/// conservation, positivity and the entropy bound.
pub fn scenario_suite() -> Result<Vec<Check>> {
    let (logistic, runs) = rayon::join(logistic_checks, || {
        CONSERVATIVE_SCENARIOS
            .par_iter()
            .map(|name| scenario_checks(name))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = logistic?;
    let runs = runs?;
    out.extend(runs.iter().map(conservation_check));
    out.extend(
        runs.iter()
            .map(|c| positivity_check(c, c.name == "bump-taxis")),
    );
    for c in runs.iter().filter(|c| c.name != "logistic") {
        out.extend(entropy_checks(c));
    }
    Ok(out)
}

fn random_state(rng: &mut ChaCha8Rng, n: usize, u_min: f64) -> State {
    State {
        u: Field((0..n).map(|_| rng.gen_range(u_min..2.0)).collect()),
        v: Field((0..n).map(|_| rng.gen_range(0.05..2.0)).collect()),
        t: 0.0,
    }
}

const PARAM_SETS: [ModelParams; 4] = [
    ModelParams {
        epsilon_reg: 1e-8,
        flux_mean: FluxMean::Arithmetic,
        taxis_scheme: TaxisScheme::Centered,
    },
    ModelParams {
        epsilon_reg: 1e-8,
        flux_mean: FluxMean::Harmonic,
        taxis_scheme: TaxisScheme::Centered,
    },
    ModelParams {
        epsilon_reg: 1e-8,
        flux_mean: FluxMean::Arithmetic,
        taxis_scheme: TaxisScheme::Upwind,
    },
    ModelParams {
        epsilon_reg: 1e-8,
        flux_mean: FluxMean::Harmonic,
        taxis_scheme: TaxisScheme::Upwind,
    },
];

/// Randomized per-module invariants; deterministic for a given seed.
pub fn invariant_suite(seed: u64, trials: usize) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // grid: integrate is linear, divergence of any face field vanishing on
    // the boundary integrates to zero
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let n = rng.gen_range(2..64);
        let g = Grid::new(n)?;
        let a = Field((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let b = Field((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let lin = g.integrate(&a.axpby(2.0, &b, -3.0))? - (2.0 * g.integrate(&a)? - 3.0 * g.integrate(&b)?);
        let div = g.integrate(&g.divergence(&g.face_gradient(&a)?)?)?;
        worst = worst.max(lin.abs()).max(div.abs());
    }
    out.push(Check::new(
        "grid linearity and telescoping",
        worst <= 1e-12,
        format!("worst {worst:.2e}"),
    ));

    // model: the right-hand side conserves u + v for every flux variant
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let n = rng.gen_range(2..48);
        let g = Grid::new(n)?;
        let s = random_state(&mut rng, n, 0.0);
        for p in &PARAM_SETS {
            let r = rhs(&s.u, &s.v, &g, p)?;
            let scale = r.du_dt.iter().chain(r.dv_dt.iter()).fold(1.0_f64, |m, x| m.max(x.abs()));
            let total = g.integrate(&r.du_dt)? + g.integrate(&r.dv_dt)?;
            worst = worst.max(total.abs() / scale);
        }
    }
    out.push(Check::new(
        "model conservation",
        worst <= 1e-13,
        format!("worst relative total rate {worst:.2e}"),
    ));

    // timestepper: analytic Jacobian against central differences
    let mut worst = 0.0_f64;
    for _ in 0..trials.min(8) {
        let n = rng.gen_range(3..10);
        let g = Grid::new(n)?;
        let prev = random_state(&mut rng, n, 0.1);
        let guess = random_state(&mut rng, n, 0.1);
        let dt = 10f64.powf(rng.gen_range(-4.0..-1.0));
        for p in &PARAM_SETS[..2] {
            worst = worst.max(jacobian_mismatch(&guess, &prev, dt, &g, p)?);
        }
    }
    out.push(Check::new(
        "timestepper Jacobian",
        worst <= 1e-6,
        format!("worst relative mismatch {worst:.2e}"),
    ));

    // block solver residual
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let n = rng.gen_range(1..40);
        let mut a = BlockTridiag::zeros(n);
        for i in 0..n {
            for r in 0..2 {
                for c in 0..2 {
                    if i > 0 {
                        a.lower[i][(r, c)] = rng.gen_range(-1.0..1.0);
                    }
                    if i + 1 < n {
                        a.upper[i][(r, c)] = rng.gen_range(-1.0..1.0);
                    }
                    a.diag[i][(r, c)] = rng.gen_range(-1.0..1.0);
                }
                a.diag[i][(r, r)] += 8.0;
            }
        }
        let x: Vec<Vector2<f64>> = (0..n)
            .map(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut b = a.apply(&x);
        a.solve(&mut b)?;
        for (xi, yi) in x.iter().zip(&b) {
            worst = worst.max((xi - yi).amax());
        }
    }
    out.push(Check::new(
        "block tridiagonal solve",
        worst <= 1e-12,
        format!("worst error {worst:.2e}"),
    ));

    // transform: derivative identity and bitwise endpoint
    let mut worst = 0.0_f64;
    let mut endpoint_ok = true;
    for _ in 0..trials {
        let n = rng.gen_range(2..128);
        let g = Grid::new(n)?;
        let s = random_state(&mut rng, n, 0.0);
        worst = worst.max(w_gradient_identity_check(&s, &g)?);
        let w = antiderivative(&s, &g)?;
        endpoint_ok &= w[0] == 0.0 && w.total_mass() == g.integrate(&s.u.axpby(1.0, &s.v, 1.0))?;
    }
    out.push(Check::new(
        "transform identities",
        worst <= 4.0 * 4.0 * f64::EPSILON && endpoint_ok,
        format!("worst derivative defect {worst:.2e}, endpoints exact: {endpoint_ok}"),
    ));

    // diagnostics: mass split and stationary weak residual
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let n = rng.gen_range(2..64);
        let g = Grid::new(n)?;
        let s = random_state(&mut rng, n, 0.0);
        let r = record_with_epsilon(&s, &g, 1e-8)?;
        worst = worst.max((r.mass_total - (r.mass_u + r.mass_v)).abs() / r.mass_total);
    }
    let g = Grid::new(16)?;
    let still = Trajectory {
        states: (0..=8)
            .map(|k| State {
                u: Field::zeros(16),
                v: Field::constant(16, 1.0),
                t: k as f64 / 8.0,
            })
            .collect(),
        steps_taken: 8,
        rejections: 0,
    };
    let wr = weak_residual(&still, &g, 2)?;
    out.push(Check::new(
        "diagnostics mass split and stationary weak residual",
        worst <= 4.0 * f64::EPSILON && wr.residual_u <= 1e-13 && wr.residual_v <= 1e-13,
        format!(
            "mass split {worst:.2e}, weak residuals {:.1e} / {:.1e}",
            wr.residual_u, wr.residual_v
        ),
    ));

    // pairlab: zero on identical pairs, exact symmetry
    let mut ok = true;
    for _ in 0..trials {
        let n = rng.gen_range(2..64);
        let g = Grid::new(n)?;
        let a = random_state(&mut rng, n, 0.0);
        let b = random_state(&mut rng, n, 0.0);
        let same = pair_energy(&a, &a, &g)?;
        ok &= same.e_w == 0.0 && same.e_v == 0.0 && same.d_u == 0.0 && same.d_v == 0.0;
        ok &= pair_energy(&a, &b, &g)? == pair_energy(&b, &a, &g)?;
    }
    out.push(Check::new(
        "pair energy symmetry",
        ok,
        if ok { "exact" } else { "asymmetric or nonzero self-energy" },
    ));

    // harness: every scenario survives a serialize/parse round trip
    let mut ok = true;
    for name in scenario_names() {
        let cfg = scenario(name)?;
        ok &= parse_config(&serialize(&cfg)).ok().as_ref() == Some(&cfg);
    }
    out.push(Check::new(
        "config round trip",
        ok,
        format!("{} scenarios", scenario_names().len()),
    ));
    Ok(out)
}

/// Largest entrywise relative gap between the assembled Jacobian and central
/// differences of the implicit residual.
fn jacobian_mismatch(
    guess: &State,
    prev: &State,
    dt: f64,
    grid: &Grid,
    p: &ModelParams,
) -> Result<f64> {
    let n = guess.n_cells();
    let dense = assemble_jacobian(guess, prev, dt, grid, p)?.to_dense();
    let scale = dense.iter().flatten().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0_f64;
    for col in 0..2 * n {
        let (cell, comp) = (col / 2, col % 2);
        let e = 1e-6 * if comp == 0 { guess.u[cell] } else { guess.v[cell] }.max(1e-3);
        let shifted = |sign: f64| -> Result<Vec<Vector2<f64>>> {
            let mut s = guess.clone();
            if comp == 0 {
                s.u.0[cell] += sign * e;
            } else {
                s.v.0[cell] += sign * e;
            }
            implicit_residual(&s, prev, dt, grid, p)
        };
        let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
        for row in 0..2 * n {
            let fd = (plus[row / 2][row % 2] - minus[row / 2][row % 2]) / (2.0 * e);
            let an = dense[row][col];
            worst = worst.max((fd - an).abs() / scale);
        }
    }
    Ok(worst)
}
