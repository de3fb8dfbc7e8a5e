//! Twin-run experiments.
//!
//! Two solutions on one grid are compared through the anti-derivative
//! difference `w_1 - w_2` and the nutrient difference `v_1 - v_2`:
//!
//! * `E_w = 1/2 ∫ (w_1 - w_2)^2`, `E_v = 1/2 ∫ (v_1 - v_2)^2`
//! * `D_u = ∫ (u_1 + u_2)(w_1x - w_2x)^2`, `D_v = ∫ (v_1x - v_2x)^2`
//!
//! A Grönwall-type bound `E(t) + (c/32) ∫D_u + (1/8) ∫D_v <= E(0) + C ∫E`
//! with `c` the observed lower bound of the nutrient is checked on the
//! computed pair, and the constant `C` it needs is reported.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::initial::Profile;
use crate::model::ModelParams;
use crate::timestepper::{uniform_times, Integrator, State, StepControl, Trajectory};
use crate::transform::antiderivative;

/// Weight of `∫D_u` relative to the observed nutrient minimum.
pub const DU_WEIGHT_DIVISOR: f64 = 32.0;
/// Weight of `∫D_v`.
pub const DV_WEIGHT: f64 = 1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEnergy {
    pub t: f64,
    pub e_w: f64,
    pub e_v: f64,
    pub d_u: f64,
    pub d_v: f64,
}

impl PairEnergy {
    pub fn total(&self) -> f64 {
        self.e_w + self.e_v
    }
}

fn check_pair(a: &State, b: &State, grid: &Grid) -> Result<()> {
    a.validate(grid)?;
    b.validate(grid)?;
    if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
        return Err(Error::Contract(format!(
            "states at different times: {} vs {}",
            a.t, b.t
        )));
    }
    Ok(())
}

/// Trapezoid rule over faces for `∫ f^2` with `f` given on faces.
fn face_l2_sq(diff: impl Iterator<Item = f64>, n_faces: usize, h: f64) -> f64 {
    h * diff
        .enumerate()
        .map(|(j, d)| {
            let w = if j == 0 || j + 1 == n_faces { 0.5 } else { 1.0 };
            w * d * d
        })
        .sum::<f64>()
}

pub fn pair_energy(a: &State, b: &State, grid: &Grid) -> Result<PairEnergy> {
    check_pair(a, b, grid)?;
    let h = grid.h();
    let n = grid.n_cells();
    let (wa, wb) = (antiderivative(a, grid)?, antiderivative(b, grid)?);
    let e_w = 0.5
        * face_l2_sq(
            wa.values().iter().zip(wb.values()).map(|(x, y)| x - y),
            n + 1,
            h,
        );
    let e_v = 0.5 * h * (0..n).map(|i| (a.v[i] - b.v[i]).powi(2)).sum::<f64>();
    let (dwa, dwb) = (wa.cell_derivative(grid), wb.cell_derivative(grid));
    let d_u = h * (0..n)
        .map(|i| (a.u[i] + b.u[i]) * (dwa[i] - dwb[i]).powi(2))
        .sum::<f64>();
    let d_v = h * (1..n)
        .map(|j| {
            let ga = (a.v[j] - a.v[j - 1]) / h;
            let gb = (b.v[j] - b.v[j - 1]) / h;
            (ga - gb).powi(2)
        })
        .sum::<f64>();
    Ok(PairEnergy {
        t: a.t,
        e_w,
        e_v,
        d_u,
        d_v,
    })
}

fn check_synchronized(ta: &Trajectory, tb: &Trajectory) -> Result<()> {
    if ta.states.len() != tb.states.len() {
        return Err(Error::Config(format!(
            "trajectories hold {} and {} snapshots",
            ta.states.len(),
            tb.states.len()
        )));
    }
    for (a, b) in ta.states.iter().zip(&tb.states) {
        if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
            return Err(Error::Config(format!(
                "asynchronous snapshots: t = {} vs {}",
                a.t, b.t
            )));
        }
    }
    if ta.states.is_empty() {
        return Err(Error::Config("empty trajectories".into()));
    }
    Ok(())
}

/// One point of the energy identity: `lhs = E_w(t) - E_w(t0)` and
/// `rhs = ∫_{t0}^t ∫ (f_1 - f_2 + g_1 - g_2)(w_1 - w_2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityPoint {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Spatial integrand `∫ (f_1 - f_2 + g_1 - g_2)(w_1 - w_2) dx` with
/// `f = 1/2 v (u^2)_x - u^2 v v_x` and `g = v_x` evaluated on interior faces.
fn identity_integrand(a: &State, b: &State, grid: &Grid, p: &ModelParams) -> Result<f64> {
    let h = grid.h();
    let n = grid.n_cells();
    let (wa, wb) = (antiderivative(a, grid)?, antiderivative(b, grid)?);
    let face_terms = |s: &State, j: usize| -> f64 {
        let (l, r) = (j - 1, j);
        let (ul, ur, vl, vr) = (s.u[l], s.u[r], s.v[l], s.v[r]);
        let v_face = p.flux_mean.apply(vl, vr).0;
        let b_face = p.flux_mean.apply(ul * ul * vl, ur * ur * vr).0;
        let du2 = (ur * ur - ul * ul) / h;
        let dv = (vr - vl) / h;
        0.5 * v_face * du2 - b_face * dv + dv
    };
    Ok(h * (1..n)
        .map(|j| (face_terms(a, j) - face_terms(b, j)) * (wa[j] - wb[j]))
        .sum::<f64>())
}

pub fn energy_identity_series(
    ta: &Trajectory,
    tb: &Trajectory,
    grid: &Grid,
    p: &ModelParams,
) -> Result<Vec<IdentityPoint>> {
    check_synchronized(ta, tb)?;
    let e0 = pair_energy(&ta.states[0], &tb.states[0], grid)?.e_w;
    let mut out = Vec::with_capacity(ta.states.len());
    let mut rhs = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (a, b) in ta.states.iter().zip(&tb.states) {
        let integrand = identity_integrand(a, b, grid, p)?;
        if let Some((t_prev, i_prev)) = prev {
            rhs += 0.5 * (a.t - t_prev) * (integrand + i_prev);
        }
        prev = Some((a.t, integrand));
        out.push(IdentityPoint {
            t: a.t,
            lhs: pair_energy(a, b, grid)?.e_w - e0,
            rhs,
        });
    }
    Ok(out)
}

/// `max_t |lhs - rhs| / max(1, |lhs|)` over the shared snapshots.
pub fn energy_identity_residual(
    ta: &Trajectory,
    tb: &Trajectory,
    grid: &Grid,
    p: &ModelParams,
) -> Result<f64> {
    Ok(energy_identity_series(ta, tb, grid, p)?
        .iter()
        .map(|pt| (pt.lhs - pt.rhs).abs() / pt.lhs.abs().max(1.0))
        .fold(0.0, f64::max))
}

/// Shape of the initial perturbation `phi_pert`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Perturbation {
    /// `exp(-((x - 0.5)/0.1)^2)`
    #[default]
    Bump,
    /// The bump minus its discrete mean, so both runs carry the same mass.
    BalancedBump,
    /// `cos(pi x)`, zero mean.
    Cosine,
}

impl Perturbation {
    pub fn sample(&self, grid: &Grid) -> Field {
        let bump = grid.sample(|x| (-((x - 0.5) / 0.1).powi(2)).exp());
        match self {
            Perturbation::Bump => bump,
            Perturbation::BalancedBump => {
                let mean = grid.integrate(&bump).expect("sampled on the same grid");
                bump.map(|b| b - mean)
            }
            Perturbation::Cosine => grid.sample(|x| (std::f64::consts::PI * x).cos()),
        }
    }
}

impl std::fmt::Display for Perturbation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Perturbation::Bump => "bump",
            Perturbation::BalancedBump => "balanced-bump",
            Perturbation::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for Perturbation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bump" => Ok(Perturbation::Bump),
            "balanced-bump" => Ok(Perturbation::BalancedBump),
            "cosine" => Ok(Perturbation::Cosine),
            other => Err(format!(
                "expected `bump`, `balanced-bump` or `cosine`, got `{other}`"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairConfig {
    pub n_cells: usize,
    pub horizon: f64,
    pub output_count: usize,
    pub u0: Profile,
    pub v0: Profile,
    pub params: ModelParams,
    pub control: StepControl,
    pub delta: f64,
    pub shape: Perturbation,
    /// Perturb `v0` instead of `u0`.
    pub perturb_v: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub energy: PairEnergy,
    /// `(c/32) ∫_0^t D_u + (1/8) ∫_0^t D_v`
    pub weighted_dissipation: f64,
    /// `∫_0^t E`
    pub energy_integral: f64,
    /// `(E(t) + weighted_dissipation - E(0)) / ∫_0^t E`, zero at t0
    pub gronwall_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallReport {
    /// Least-squares slope of `E(t) + dissipation - E(0)` against `∫_0^t E`;
    /// `None` when the runs never separate.
    pub c_fit: Option<f64>,
    pub max_ratio: f64,
    pub horizon: f64,
    pub grid_n: usize,
    pub perturbation_size: f64,
    pub sup_energy: f64,
    pub initial_energy: f64,
    /// `sup_t E(t) / E(0)`; `None` when `E(0) = 0`.
    pub growth_factor: Option<f64>,
    /// Observed lower bound of both nutrients, standing in for `c(T)`.
    pub c_obs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallRun {
    pub report: GronwallReport,
    pub samples: Vec<PairSample>,
    pub base: Trajectory,
    pub perturbed: Trajectory,
}

/// Initial states `(base, perturbed)` of a twin run.
pub fn twin_initial_states(cfg: &PairConfig, grid: &Grid) -> Result<(State, State)> {
    let u0 = cfg.u0.sample(grid)?;
    let v0 = cfg.v0.sample(grid)?;
    let phi = cfg.shape.sample(grid);
    let base = State::new(u0.clone(), v0.clone(), 0.0)?;
    let (pu, pv) = if cfg.perturb_v {
        (u0, v0.axpby(1.0, &phi, cfg.delta))
    } else {
        (u0.axpby(1.0, &phi, cfg.delta), v0)
    };
    if let Some((i, x)) = pu.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::Config(format!(
            "perturbed u0 is negative at cell {i} ({x:e}); reduce delta"
        )));
    }
    if let Some((i, x)) = pv.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(Error::Config(format!(
            "perturbed v0 is nonpositive at cell {i} ({x:e}); reduce delta"
        )));
    }
    Ok((base, State::new(pu, pv, 0.0)?))
}

/// Evaluates the Grönwall functionals over two synchronized trajectories.
pub fn gronwall_analysis(
    base: &Trajectory,
    perturbed: &Trajectory,
    grid: &Grid,
) -> Result<(GronwallReport, Vec<PairSample>)> {
    check_synchronized(base, perturbed)?;
    let c_obs = base
        .states
        .iter()
        .chain(&perturbed.states)
        .map(|s| s.v.min())
        .fold(f64::INFINITY, f64::min);
    let energies = base
        .states
        .iter()
        .zip(&perturbed.states)
        .map(|(a, b)| pair_energy(a, b, grid))
        .collect::<Result<Vec<_>>>()?;
    let e0 = energies[0].total();
    let mut samples = Vec::with_capacity(energies.len());
    let (mut int_e, mut int_du, mut int_dv) = (0.0, 0.0, 0.0);
    for (k, en) in energies.iter().enumerate() {
        if k > 0 {
            let prev = &energies[k - 1];
            let dt = en.t - prev.t;
            int_e += 0.5 * dt * (en.total() + prev.total());
            int_du += 0.5 * dt * (en.d_u + prev.d_u);
            int_dv += 0.5 * dt * (en.d_v + prev.d_v);
        }
        let weighted = c_obs / DU_WEIGHT_DIVISOR * int_du + DV_WEIGHT * int_dv;
        let ratio = if int_e > 0.0 {
            (en.total() + weighted - e0) / int_e
        } else {
            0.0
        };
        samples.push(PairSample {
            energy: *en,
            weighted_dissipation: weighted,
            energy_integral: int_e,
            gronwall_ratio: ratio,
        });
    }
    let max_ratio = samples
        .iter()
        .skip(1)
        .map(|s| s.gronwall_ratio)
        .fold(0.0, f64::max);
    let (sxy, sxx) = samples.iter().skip(1).fold((0.0, 0.0), |(sxy, sxx), s| {
        let x = s.energy_integral;
        let y = s.energy.total() + s.weighted_dissipation - e0;
        (sxy + x * y, sxx + x * x)
    });
    let c_fit = (sxx > 0.0).then(|| sxy / sxx);
    let sup_energy = energies.iter().map(|e| e.total()).fold(0.0, f64::max);
    let report = GronwallReport {
        c_fit,
        max_ratio,
        horizon: base.last().t - base.states[0].t,
        grid_n: grid.n_cells(),
        perturbation_size: 0.0,
        sup_energy,
        initial_energy: e0,
        growth_factor: (e0 > 0.0).then(|| sup_energy / e0),
        c_obs,
    };
    Ok((report, samples))
}

/// Runs the twin trajectories and evaluates the Grönwall functionals.
pub fn gronwall_experiment(cfg: &PairConfig) -> Result<GronwallRun> {
    let grid = Grid::new(cfg.n_cells)?;
    let (s_base, s_pert) = twin_initial_states(cfg, &grid)?;
    let times = uniform_times(cfg.horizon, cfg.output_count);
    let integ = Integrator::new(&grid, cfg.params, cfg.control);
    let (base, perturbed) = rayon::join(
        || integ.run(&s_base, cfg.horizon, &times),
        || integ.run(&s_pert, cfg.horizon, &times),
    );
    let (base, perturbed) = (base?, perturbed?);
    let (mut report, samples) = gronwall_analysis(&base, &perturbed, &grid)?;
    report.perturbation_size = cfg.delta;
    Ok(GronwallRun {
        report,
        samples,
        base,
        perturbed,
    })
}

/// Cell averages of a fine field over groups of `factor` cells.
pub fn restrict(fine: &Field, factor: usize) -> Result<Field> {
    if factor == 0 || fine.len() % factor != 0 {
        return Err(Error::Contract(format!(
            "cannot restrict {} cells by a factor of {factor}",
            fine.len()
        )));
    }
    Field::from_vec(
        fine.as_slice()
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    /// Coarsest grid; the study also runs `2n` and `4n`.
    pub n_cells: usize,
    pub horizon: f64,
    pub u0: Profile,
    pub v0: Profile,
    pub params: ModelParams,
    /// Base control; `dt_init`/`dt_max` are scaled by `h / h_coarse`.
    pub control: StepControl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub n_a: usize,
    pub n_b: usize,
    /// L2 distance of `(u, v)` on the coarse grid at the final time.
    pub dist_uv: f64,
    /// L2 distance of `(w, v)`, `w` on coarse faces.
    pub dist_wv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub rows: [RefinementRow; 2],
    pub contraction_uv: f64,
    pub contraction_wv: f64,
}

fn scaled_control(c: &StepControl, factor: f64) -> StepControl {
    StepControl {
        dt_init: c.dt_init * factor,
        dt_max: c.dt_max * factor,
        dt_min: c.dt_min.min(c.dt_init * factor),
        ..*c
    }
}

/// Solves one problem on `n`, `2n`, `4n` cells with `dt ∝ h` and compares
/// the final states on the coarse grid.
pub fn uniqueness_refinement_study(cfg: &RefinementConfig) -> Result<RefinementStudy> {
    let levels = [cfg.n_cells, 2 * cfg.n_cells, 4 * cfg.n_cells];
    let finals = levels
        .par_iter()
        .map(|&n| -> Result<State> {
            let grid = Grid::new(n)?;
            let s0 = State::new(cfg.u0.sample(&grid)?, cfg.v0.sample(&grid)?, 0.0)?;
            let control = scaled_control(&cfg.control, cfg.n_cells as f64 / n as f64);
            let traj = Integrator::new(&grid, cfg.params, control).run(&s0, cfg.horizon, &[])?;
            let last = traj.last();
            let factor = n / cfg.n_cells;
            Ok(State {
                u: restrict(&last.u, factor)?,
                v: restrict(&last.v, factor)?,
                t: last.t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let coarse = Grid::new(cfg.n_cells)?;
    let dist = |a: &State, b: &State| -> Result<(f64, f64)> {
        let h = coarse.h();
        let du: f64 = (0..a.n_cells()).map(|i| (a.u[i] - b.u[i]).powi(2)).sum::<f64>() * h;
        let dv: f64 = (0..a.n_cells()).map(|i| (a.v[i] - b.v[i]).powi(2)).sum::<f64>() * h;
        let (wa, wb) = (antiderivative(a, &coarse)?, antiderivative(b, &coarse)?);
        let dw = face_l2_sq(
            wa.values().iter().zip(wb.values()).map(|(x, y)| x - y),
            coarse.n_cells() + 1,
            h,
        );
        Ok(((du + dv).sqrt(), (dw + dv).sqrt()))
    };
    let (uv1, wv1) = dist(&finals[0], &finals[1])?;
    let (uv2, wv2) = dist(&finals[1], &finals[2])?;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else if a == 0.0 { f64::INFINITY } else { 0.0 };
    Ok(RefinementStudy {
        rows: [
            RefinementRow {
                n_a: levels[0],
                n_b: levels[1],
                dist_uv: uv1,
                dist_wv: wv1,
            },
            RefinementRow {
                n_a: levels[1],
                n_b: levels[2],
                dist_uv: uv2,
                dist_wv: wv2,
            },
        ],
        contraction_uv: ratio(uv1, uv2),
        contraction_wv: ratio(wv1, wv2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> State {
        State::new(
            Field((0..n).map(|_| rng.gen_range(0.0..2.0)).collect()),
            Field((0..n).map(|_| rng.gen_range(0.1..2.0)).collect()),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn identical_states_have_zero_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid::new(16).unwrap();
        let s = random_state(&mut rng, 16);
        let e = pair_energy(&s, &s, &g).unwrap();
        assert_eq!((e.e_w, e.e_v, e.d_u, e.d_v), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_nutrient_shift() {
        let g = Grid::new(400).unwrap();
        let delta = 0.01;
        let a = State::new(g.sample(|x| 1.0 + x), g.sample(|x| 1.0 + x * x), 0.0).unwrap();
        let b = State {
            v: a.v.map(|v| v + delta),
            ..a.clone()
        };
        let e = pair_energy(&a, &b, &g).unwrap();
        assert!((e.e_v - delta * delta / 2.0).abs() < 1e-15);
        assert!(e.d_v < 1e-24);
        // w difference is delta * x on faces
        assert!((e.e_w - delta * delta / 6.0).abs() < 1e-4 * delta * delta);
    }

    #[test]
    fn matches_brute_force_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 8;
        let g = Grid::new(n).unwrap();
        let h = 1.0 / n as f64;
        let a = random_state(&mut rng, n);
        let b = random_state(&mut rng, n);
        let e = pair_energy(&a, &b, &g).unwrap();
        let cum = |s: &State| {
            let mut w = vec![0.0; n + 1];
            for j in 0..n {
                w[j + 1] = w[j] + h * (s.u[j] + s.v[j]);
            }
            w
        };
        let (wa, wb) = (cum(&a), cum(&b));
        let mut ew = 0.0;
        for j in 0..=n {
            let wt = if j == 0 || j == n { 0.5 } else { 1.0 };
            ew += wt * h * (wa[j] - wb[j]).powi(2);
        }
        let mut ev = 0.0;
        let mut du = 0.0;
        for i in 0..n {
            ev += h * (a.v[i] - b.v[i]).powi(2);
            let dw = (a.u[i] + a.v[i]) - (b.u[i] + b.v[i]);
            du += h * (a.u[i] + b.u[i]) * dw * dw;
        }
        let mut dv = 0.0;
        for j in 1..n {
            let d = (a.v[j] - a.v[j - 1]) / h - (b.v[j] - b.v[j - 1]) / h;
            dv += h * d * d;
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
        assert!(close(e.e_w, ew / 2.0));
        assert!(close(e.e_v, ev / 2.0));
        assert!(close(e.d_u, du));
        assert!(close(e.d_v, dv));
    }

    #[test]
    fn pair_energy_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = Grid::new(32).unwrap();
        for _ in 0..10 {
            let a = random_state(&mut rng, 32);
            let b = random_state(&mut rng, 32);
            assert_eq!(pair_energy(&a, &b, &g).unwrap(), pair_energy(&b, &a, &g).unwrap());
        }
    }

    #[test]
    fn rejects_mismatched_times() {
        let g = Grid::new(4).unwrap();
        let a = State::new(Field::constant(4, 1.0), Field::constant(4, 1.0), 0.0).unwrap();
        let b = State {
            t: 0.5,
            ..a.clone()
        };
        assert!(matches!(pair_energy(&a, &b, &g), Err(Error::Contract(_))));
    }

    #[test]
    fn restriction_preserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fine = Field((0..64).map(|_| rng.gen_range(0.0..1.0)).collect());
        let coarse = restrict(&fine, 4).unwrap();
        let gf = Grid::new(64).unwrap();
        let gc = Grid::new(16).unwrap();
        assert!((gf.integrate(&fine).unwrap() - gc.integrate(&coarse).unwrap()).abs() < 1e-14);
        assert!(restrict(&fine, 5).is_err());
    }

    #[test]
    fn balanced_perturbation_has_zero_mass() {
        let g = Grid::new(128).unwrap();
        let m = g.integrate(&Perturbation::BalancedBump.sample(&g)).unwrap();
        assert!(m.abs() < 1e-15);
        let c = g.integrate(&Perturbation::Cosine.sample(&g)).unwrap();
        assert!(c.abs() < 1e-15);
    }

    fn small_pair(delta: f64) -> PairConfig {
        PairConfig {
            n_cells: 32,
            horizon: 0.1,
            output_count: 10,
            u0: Profile::Bump {
                center: 0.5,
                width: 0.1,
                base: 0.2,
                amp: 0.8,
            },
            v0: Profile::Cosine {
                base: 1.0,
                amp: 0.5,
                modes: 1,
            },
            params: ModelParams::default(),
            control: StepControl::fixed(1e-3),
            delta,
            shape: Perturbation::BalancedBump,
            perturb_v: false,
        }
    }

    #[test]
    fn zero_perturbation_gives_identical_runs() {
        let run = gronwall_experiment(&small_pair(0.0)).unwrap();
        assert_eq!(run.base, run.perturbed);
        assert!(run.samples.iter().all(|s| s.energy.total() == 0.0));
        assert_eq!(run.report.c_fit, None);
        assert_eq!(run.report.max_ratio, 0.0);
        assert_eq!(run.report.growth_factor, None);
        let r = energy_identity_residual(&run.base, &run.perturbed, &Grid::new(32).unwrap(), &ModelParams::default())
            .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn negative_perturbed_density_is_rejected() {
        let mut cfg = small_pair(-2.0);
        cfg.shape = Perturbation::Bump;
        assert!(matches!(gronwall_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn asynchronous_trajectories_are_rejected() {
        let run = gronwall_experiment(&small_pair(1e-3)).unwrap();
        let mut other = run.perturbed.clone();
        other.states.pop();
        let g = Grid::new(32).unwrap();
        assert!(matches!(
            energy_identity_residual(&run.base, &other, &g, &ModelParams::default()),
            Err(Error::Config(_))
        ));
    }
}
