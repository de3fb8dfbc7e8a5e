//! Backward-Euler time integration.
//!
//! Each step solves `(s' - s)/dt = rhs(s') + source(t + dt)` by damped Newton
//! iteration. Unknowns are interleaved per cell as `(u_i, v_i)`, so the
//! Jacobian is block tridiagonal with 2x2 blocks and is factored directly.
//! Newton starts from the previous state; every Newton update preserves
//! `sum(u + v)` up to rounding because the flux part of the Jacobian has zero
//! column sums and the exchange terms cancel, so conservation does not depend
//! on how tightly the iteration converges.

use nalgebra::{Matrix2, Vector2};

use crate::blocktri::BlockTridiag;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{check_admissible, face_flux_u, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    /// Checked constructor: `u >= 0`, `v > 0`, finite entries, `t >= 0`.
    pub fn new(u: Field, v: Field, t: f64) -> Result<Self> {
        let s = State { u, v, t };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if self.u.len() != self.v.len() {
            return Err(Error::Contract(format!(
                "u has {} entries but v has {}",
                self.u.len(),
                self.v.len()
            )));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Contract(format!("invalid time {}", self.t)));
        }
        let g = Grid::new(self.u.len().max(2))?;
        if self.u.len() < 2 {
            return Err(Error::Contract("state needs at least 2 cells".into()));
        }
        check_admissible(&g, &self.u, &self.v)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        grid.check_field(&self.u)?;
        grid.check_field(&self.v)?;
        self.check()
    }

    pub fn n_cells(&self) -> usize {
        self.u.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Sup-norm tolerance on the rate-form residual `(s' - s)/dt - rhs(s')`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Damps step growth, in (0, 1].
    pub safety: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_init: 1e-3,
            dt_min: 1e-10,
            dt_max: 1e-2,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            safety: 0.9,
        }
    }
}

impl StepControl {
    /// Constant step `dt` unless Newton forces a reduction.
    pub fn fixed(dt: f64) -> Self {
        StepControl {
            dt_init: dt,
            dt_max: dt,
            dt_min: (dt * 1e-6).min(1e-10),
            ..StepControl::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("dt_init", self.dt_init)?;
        positive("dt_min", self.dt_min)?;
        positive("dt_max", self.dt_max)?;
        positive("newton_tol", self.newton_tol)?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Config(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Config("newton_max_iter must be at least 1".into()));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::Config(format!(
                "safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        Ok(())
    }
}

/// Whether the nutrient evolves. `Frozen` holds `v` fixed and drops the
/// exchange term `u v`, leaving pure cross-diffusion of `u` in a static
/// nutrient landscape (the population mass is then conserved on its own).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NutrientMode {
    #[default]
    Dynamic,
    Frozen,
}

/// Time-dependent source added to the right-hand side.
pub trait SourceTerm: Sync {
    fn eval(&self, t: f64, grid: &Grid) -> (Field, Field);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub steps_taken: usize,
    pub rejections: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepStats {
    pub newton_iterations: usize,
}

const TARGET_NEWTON_ITERS: f64 = 4.0;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// The nonlinear system of one backward-Euler step.
struct ImplicitSystem<'a> {
    grid: &'a Grid,
    params: &'a ModelParams,
    prev_u: &'a [f64],
    prev_v: &'a [f64],
    dt: f64,
    source: Option<(&'a [f64], &'a [f64])>,
    nutrient: NutrientMode,
}

impl ImplicitSystem<'_> {
    fn exchange(&self) -> f64 {
        match self.nutrient {
            NutrientMode::Dynamic => 1.0,
            NutrientMode::Frozen => 0.0,
        }
    }

    fn residual(&self, u: &[f64], v: &[f64], out: &mut [Vector2<f64>]) {
        let n = u.len();
        let h = self.grid.h();
        let r = self.exchange();
        for i in 0..n {
            let uv = u[i] * v[i];
            out[i] = Vector2::new(
                (u[i] - self.prev_u[i]) / self.dt - r * uv,
                (v[i] - self.prev_v[i]) / self.dt + r * uv,
            );
        }
        for j in 1..n {
            let fu = face_flux_u(u[j - 1], v[j - 1], u[j], v[j], h, self.params).0 / h;
            out[j - 1][0] -= fu;
            out[j][0] += fu;
            if self.nutrient == NutrientMode::Dynamic {
                let fv = (v[j] - v[j - 1]) / h / h;
                out[j - 1][1] -= fv;
                out[j][1] += fv;
            }
        }
        if let Some((su, sv)) = self.source {
            for i in 0..n {
                out[i][0] -= su[i];
                if self.nutrient == NutrientMode::Dynamic {
                    out[i][1] -= sv[i];
                }
            }
        }
    }

    fn jacobian(&self, u: &[f64], v: &[f64]) -> BlockTridiag {
        let n = u.len();
        let h = self.grid.h();
        let idt = 1.0 / self.dt;
        let r = self.exchange();
        let mut jac = BlockTridiag::zeros(n);
        for i in 0..n {
            jac.diag[i] = match self.nutrient {
                NutrientMode::Dynamic => {
                    Matrix2::new(idt - r * v[i], -r * u[i], v[i], idt + u[i])
                }
                NutrientMode::Frozen => Matrix2::new(idt, 0.0, 0.0, idt),
            };
        }
        let ih2 = 1.0 / (h * h);
        for j in 1..n {
            let (l, rt) = (j - 1, j);
            let (_, d) = face_flux_u(u[l], v[l], u[rt], v[rt], h, self.params);
            let dl = [d[0] / h, d[1] / h];
            let dr = [d[2] / h, d[3] / h];
            // left cell sees -F/h, right cell +F/h
            jac.diag[l][(0, 0)] -= dl[0];
            jac.diag[l][(0, 1)] -= dl[1];
            jac.upper[l][(0, 0)] -= dr[0];
            jac.upper[l][(0, 1)] -= dr[1];
            jac.lower[rt][(0, 0)] += dl[0];
            jac.lower[rt][(0, 1)] += dl[1];
            jac.diag[rt][(0, 0)] += dr[0];
            jac.diag[rt][(0, 1)] += dr[1];
            if self.nutrient == NutrientMode::Dynamic {
                jac.diag[l][(1, 1)] += ih2;
                jac.upper[l][(1, 1)] -= ih2;
                jac.lower[rt][(1, 1)] -= ih2;
                jac.diag[rt][(1, 1)] += ih2;
            }
        }
        jac
    }

    fn solve(&self, tol: f64, max_iter: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let n = self.prev_u.len();
        let mut u = self.prev_u.to_vec();
        let mut v = self.prev_v.to_vec();
        let mut res = vec![Vector2::zeros(); n];
        let mut trial_res = vec![Vector2::zeros(); n];
        let (mut tu, mut tv) = (vec![0.0; n], vec![0.0; n]);
        self.residual(&u, &v, &mut res);
        let mut norm = sup_norm(&res);
        let diverged = |residual: f64, iterations: usize| Error::NewtonDivergence {
            dt: self.dt,
            residual,
            iterations,
        };
        for iter in 0..max_iter {
            if norm <= tol {
                return Ok((u, v, iter));
            }
            let jac = self.jacobian(&u, &v);
            // the residual cannot be resolved below the rounding of the
            // operator applied to s, roughly eps * |J| * |s|
            let scale = u.iter().chain(&v).fold(1.0_f64, |m, x| m.max(x.abs()));
            let floor = 8.0 * f64::EPSILON * scale * row_sum_norm(&jac);
            if norm <= floor {
                return Ok((u, v, iter));
            }
            let mut delta: Vec<Vector2<f64>> = res.iter().map(|r| -r).collect();
            jac.solve(&mut delta).map_err(|_| diverged(norm, iter))?;
            let step_norm = sup_norm(&delta);
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda >= MIN_DAMPING {
                for i in 0..n {
                    tu[i] = u[i] + lambda * delta[i][0];
                    tv[i] = v[i] + lambda * delta[i][1];
                }
                if tu.iter().chain(&tv).all(|x| x.is_finite()) {
                    self.residual(&tu, &tv, &mut trial_res);
                    let trial_norm = sup_norm(&trial_res);
                    if trial_norm <= (1.0 - 1e-4 * lambda) * norm {
                        std::mem::swap(&mut u, &mut tu);
                        std::mem::swap(&mut v, &mut tv);
                        std::mem::swap(&mut res, &mut trial_res);
                        norm = trial_norm;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                // residual stuck at the rounding floor of the update
                if step_norm <= 1e-13 * scale {
                    return Ok((u, v, iter + 1));
                }
                return Err(diverged(norm, iter + 1));
            }
        }
        if norm <= tol {
            Ok((u, v, max_iter))
        } else {
            Err(diverged(norm, max_iter))
        }
    }
}

fn row_sum_norm(jac: &BlockTridiag) -> f64 {
    (0..jac.len())
        .flat_map(|i| {
            (0..2).map(move |r| {
                (0..2)
                    .map(|c| {
                        jac.lower[i][(r, c)].abs() + jac.diag[i][(r, c)].abs() + jac.upper[i][(r, c)].abs()
                    })
                    .sum::<f64>()
            })
        })
        .fold(0.0, f64::max)
}

fn sup_norm(r: &[Vector2<f64>]) -> f64 {
    r.iter().fold(0.0_f64, |m, x| m.max(x[0].abs()).max(x[1].abs()))
}

/// Drives steps and runs for one grid and parameter set.
#[derive(Clone, Copy)]
pub struct Integrator<'a> {
    pub grid: &'a Grid,
    pub params: ModelParams,
    pub control: StepControl,
    pub source: Option<&'a dyn SourceTerm>,
    pub nutrient: NutrientMode,
}

impl<'a> Integrator<'a> {
    pub fn new(grid: &'a Grid, params: ModelParams, control: StepControl) -> Self {
        Integrator {
            grid,
            params,
            control,
            source: None,
            nutrient: NutrientMode::Dynamic,
        }
    }

    pub fn with_source(mut self, source: &'a dyn SourceTerm) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_nutrient(mut self, mode: NutrientMode) -> Self {
        self.nutrient = mode;
        self
    }

    /// One backward-Euler step of size `dt`, with the source (if any)
    /// evaluated at the new time.
    pub fn step(&self, s: &State, dt: f64) -> Result<(State, StepStats)> {
        match self.source {
            Some(src) => {
                let (su, sv) = src.eval(s.t + dt, self.grid);
                self.step_with_fields(s, dt, Some((&su, &sv)))
            }
            None => self.step_with_fields(s, dt, None),
        }
    }

    fn step_with_fields(
        &self,
        s: &State,
        dt: f64,
        source: Option<(&Field, &Field)>,
    ) -> Result<(State, StepStats)> {
        if !(dt > 0.0 && dt.is_finite()) || dt > self.control.dt_max * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "step size {dt:e} outside (0, dt_max = {:e}]",
                self.control.dt_max
            )));
        }
        let sys = ImplicitSystem {
            grid: self.grid,
            params: &self.params,
            prev_u: s.u.as_slice(),
            prev_v: s.v.as_slice(),
            dt,
            source: source.map(|(a, b)| (a.as_slice(), b.as_slice())),
            nutrient: self.nutrient,
        };
        let tol = self.control.newton_tol;
        let (mut u, v, iterations) = sys.solve(tol, self.control.newton_max_iter)?;
        for (i, x) in u.iter_mut().enumerate() {
            if *x < 0.0 {
                if -*x <= tol {
                    *x = 0.0;
                } else {
                    return Err(Error::InvalidState {
                        field: "u",
                        index: i,
                        value: *x,
                        reason: "negative density after Newton solve",
                    });
                }
            }
        }
        if let Some((i, &x)) = v.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::InvalidState {
                field: "v",
                index: i,
                value: x,
                reason: "nonpositive nutrient after Newton solve",
            });
        }
        Ok((
            State {
                u: Field(u),
                v: Field(v),
                t: s.t + dt,
            },
            StepStats {
                newton_iterations: iterations,
            },
        ))
    }

    /// Integrates from `s0` to `t_end`, recording `s0`, every requested output
    /// time, and `t_end`. Steps are truncated to land on output times exactly.
    pub fn run(&self, s0: &State, t_end: f64, output_times: &[f64]) -> Result<Trajectory> {
        s0.validate(self.grid)?;
        self.params.validate()?;
        self.control.validate()?;
        if !(t_end >= s0.t && t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end = {t_end} precedes initial time {}",
                s0.t
            )));
        }
        if output_times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("output times must be sorted".into()));
        }
        if let Some(&bad) = output_times.iter().find(|&&t| t < s0.t || t > t_end) {
            return Err(Error::Config(format!(
                "output time {bad} outside [{}, {t_end}]",
                s0.t
            )));
        }
        let mut targets: Vec<f64> = output_times.iter().copied().filter(|&t| t > s0.t).collect();
        if t_end > s0.t && targets.last() != Some(&t_end) {
            targets.push(t_end);
        }
        targets.dedup();

        let c = &self.control;
        let mut traj = Trajectory {
            states: vec![s0.clone()],
            steps_taken: 0,
            rejections: 0,
        };
        let mut cur = s0.clone();
        let mut dt = c.dt_init;
        for &target in &targets {
            while cur.t < target {
                let remaining = target - cur.t;
                let (dt_try, lands) = if remaining <= dt * (1.0 + 1e-10) {
                    (remaining, true)
                } else if remaining < dt + c.dt_min {
                    (0.5 * remaining, false)
                } else {
                    (dt, false)
                };
                match self.step(&cur, dt_try) {
                    Ok((mut next, stats)) => {
                        traj.steps_taken += 1;
                        if lands {
                            next.t = target;
                        }
                        cur = next;
                        if dt_try >= dt {
                            let iters = stats.newton_iterations.max(1) as f64;
                            let growth = (c.safety * TARGET_NEWTON_ITERS / iters).clamp(1.0, 2.0);
                            dt = (dt * growth).min(c.dt_max);
                        }
                    }
                    Err(Error::NewtonDivergence { .. }) | Err(Error::InvalidState { .. }) => {
                        traj.rejections += 1;
                        dt = 0.5 * dt.min(dt_try);
                        if dt < c.dt_min {
                            return Err(Error::StepTooSmall {
                                t: cur.t,
                                dt,
                                dump: state_dump(&cur, self.grid),
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            traj.states.push(cur.clone());
        }
        Ok(traj)
    }
}

fn state_dump(s: &State, grid: &Grid) -> String {
    let mass = grid.integrate(&s.u).unwrap_or(f64::NAN) + grid.integrate(&s.v).unwrap_or(f64::NAN);
    format!(
        "state at t = {}: min u = {:e}, max u = {:e}, min v = {:e}, max v = {:e}, mass = {}",
        s.t,
        s.u.min(),
        s.u.max(),
        s.v.min(),
        s.v.max(),
        mass
    )
}

/// One backward-Euler step with an optional source pair evaluated by the caller.
pub fn step(
    s: &State,
    dt: f64,
    grid: &Grid,
    p: &ModelParams,
    c: &StepControl,
    source: Option<(&Field, &Field)>,
) -> Result<State> {
    s.validate(grid)?;
    if dt < c.dt_min * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "step size {dt:e} below dt_min = {:e}",
            c.dt_min
        )));
    }
    if let Some((su, sv)) = source {
        grid.check_field(su)?;
        grid.check_field(sv)?;
    }
    Integrator::new(grid, *p, *c)
        .step_with_fields(s, dt, source)
        .map(|(s, _)| s)
}

pub fn run(
    s0: &State,
    t_end: f64,
    output_times: &[f64],
    grid: &Grid,
    p: &ModelParams,
    c: &StepControl,
    source: Option<&dyn SourceTerm>,
) -> Result<Trajectory> {
    let mut integ = Integrator::new(grid, *p, *c);
    integ.source = source;
    integ.run(s0, t_end, output_times)
}

/// Exact Jacobian of the backward-Euler residual at `s_guess`.
pub fn assemble_jacobian(
    s_guess: &State,
    s_prev: &State,
    dt: f64,
    grid: &Grid,
    p: &ModelParams,
) -> Result<BlockTridiag> {
    grid.check_field(&s_guess.u)?;
    grid.check_field(&s_guess.v)?;
    grid.check_field(&s_prev.u)?;
    grid.check_field(&s_prev.v)?;
    let sys = ImplicitSystem {
        grid,
        params: p,
        prev_u: s_prev.u.as_slice(),
        prev_v: s_prev.v.as_slice(),
        dt,
        source: None,
        nutrient: NutrientMode::Dynamic,
    };
    Ok(sys.jacobian(s_guess.u.as_slice(), s_guess.v.as_slice()))
}

/// Backward-Euler residual in rate form, interleaved per cell.
pub fn implicit_residual(
    s_guess: &State,
    s_prev: &State,
    dt: f64,
    grid: &Grid,
    p: &ModelParams,
) -> Result<Vec<Vector2<f64>>> {
    grid.check_field(&s_guess.u)?;
    grid.check_field(&s_prev.u)?;
    let sys = ImplicitSystem {
        grid,
        params: p,
        prev_u: s_prev.u.as_slice(),
        prev_v: s_prev.v.as_slice(),
        dt,
        source: None,
        nutrient: NutrientMode::Dynamic,
    };
    let mut out = vec![Vector2::zeros(); grid.n_cells()];
    sys.residual(s_guess.u.as_slice(), s_guess.v.as_slice(), &mut out);
    Ok(out)
}

/// `count + 1` equally spaced times on `[0, t_end]`, the last one exactly `t_end`.
pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    if count == 0 {
        return vec![0.0, t_end];
    }
    let mut times: Vec<f64> = (0..=count)
        .map(|k| t_end * k as f64 / count as f64)
        .collect();
    times[count] = t_end;
    times
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FluxMean, TaxisScheme};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mass(g: &Grid, s: &State) -> f64 {
        g.integrate(&s.u).unwrap() + g.integrate(&s.v).unwrap()
    }

    fn smooth_state(g: &Grid) -> State {
        State::new(
            g.sample(|x| 0.3 + 0.8 * (-((x - 0.4) / 0.15).powi(2)).exp()),
            g.sample(|x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos()),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn extinct_population_with_flat_nutrient_is_stationary() {
        let g = Grid::new(10).unwrap();
        let s = State::new(Field::zeros(10), Field::constant(10, 1.0), 0.0).unwrap();
        let c = StepControl {
            dt_max: 0.1,
            ..StepControl::default()
        };
        let next = step(&s, 0.1, &g, &ModelParams::default(), &c, None).unwrap();
        assert!(next.u.iter().all(|&x| x == 0.0));
        assert!(next.v.iter().all(|&x| x == 1.0));
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    /// Scalar Newton on u' = u + dt u' v', v' = v - dt u' v'.
    fn scalar_oracle(a: f64, b: f64, dt: f64) -> (f64, f64) {
        // v' = b - (u' - a), so g(u') = u' - a - dt u' (a + b - u') = 0
        let s = a + b;
        let mut x = a;
        for _ in 0..50 {
            let g = x - a - dt * x * (s - x);
            let dg = 1.0 - dt * (s - 2.0 * x);
            x -= g / dg;
        }
        (x, s - x)
    }

    #[test]
    fn uniform_state_matches_scalar_implicit_step() {
        let g = Grid::new(7).unwrap();
        let (a, b, dt) = (0.2, 0.8, 0.05);
        let s = State::new(Field::constant(7, a), Field::constant(7, b), 0.0).unwrap();
        let c = StepControl {
            dt_max: 0.1,
            newton_tol: 1e-13,
            ..StepControl::default()
        };
        let next = step(&s, dt, &g, &ModelParams::default(), &c, None).unwrap();
        let (uo, vo) = scalar_oracle(a, b, dt);
        for i in 0..7 {
            assert!((next.u[i] - uo).abs() < 1e-13);
            assert!((next.v[i] - vo).abs() < 1e-13);
            assert_eq!(next.u[i], next.u[0]);
        }
    }

    #[test]
    fn single_step_conserves_mass() {
        let g = Grid::new(40).unwrap();
        let s = smooth_state(&g);
        let c = StepControl {
            dt_max: 0.05,
            ..StepControl::default()
        };
        for p in [
            ModelParams::default(),
            ModelParams {
                flux_mean: FluxMean::Harmonic,
                taxis_scheme: TaxisScheme::Upwind,
                ..ModelParams::default()
            },
        ] {
            for dt in [1e-4, 1e-3, 0.05] {
                let next = step(&s, dt, &g, &p, &c, None).unwrap();
                assert!((mass(&g, &next) - mass(&g, &s)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 6;
        let g = Grid::new(n).unwrap();
        let dt = 0.01;
        for p in [
            ModelParams::default(),
            ModelParams {
                flux_mean: FluxMean::Harmonic,
                ..ModelParams::default()
            },
        ] {
            let prev = State::new(
                Field((0..n).map(|_| rng.gen_range(0.1..1.0)).collect()),
                Field((0..n).map(|_| rng.gen_range(0.5..1.5)).collect()),
                0.0,
            )
            .unwrap();
            let guess = State::new(
                Field((0..n).map(|_| rng.gen_range(0.1..1.0)).collect()),
                Field((0..n).map(|_| rng.gen_range(0.5..1.5)).collect()),
                0.0,
            )
            .unwrap();
            let dense = assemble_jacobian(&guess, &prev, dt, &g, &p).unwrap().to_dense();
            let eps = 1e-6;
            for col in 0..2 * n {
                let perturb = |sign: f64| {
                    let mut s = guess.clone();
                    if col % 2 == 0 {
                        s.u.0[col / 2] += sign * eps;
                    } else {
                        s.v.0[col / 2] += sign * eps;
                    }
                    implicit_residual(&s, &prev, dt, &g, &p).unwrap()
                };
                let (rp, rm) = (perturb(1.0), perturb(-1.0));
                for row in 0..2 * n {
                    let fd = (rp[row / 2][row % 2] - rm[row / 2][row % 2]) / (2.0 * eps);
                    let exact = dense[row][col];
                    let scale = exact.abs().max(1.0);
                    assert!((fd - exact).abs() <= 1e-6 * scale, "({row},{col}): {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn degenerate_jacobian_reduces_to_identity_plus_reaction() {
        let g = Grid::new(5).unwrap();
        let s = State::new(Field::zeros(5), Field::constant(5, 1.0), 0.0).unwrap();
        let dt = 0.1;
        let jac = assemble_jacobian(&s, &s, dt, &g, &ModelParams::default()).unwrap();
        for i in 0..5 {
            // u-row: 1/dt - v on the diagonal, no u-coupling to neighbours
            assert_eq!(jac.diag[i][(0, 0)], 1.0 / dt - 1.0);
            assert_eq!(jac.diag[i][(0, 1)], 0.0);
            assert_eq!(jac.lower[i][(0, 0)], 0.0);
            assert_eq!(jac.upper[i][(0, 0)], 0.0);
            assert_eq!(jac.lower[i][(0, 1)], 0.0);
            assert_eq!(jac.upper[i][(0, 1)], 0.0);
            assert_eq!(jac.diag[i][(1, 0)], 1.0);
        }
    }

    #[test]
    fn tiny_steps_converge_in_one_newton_iteration() {
        let g = Grid::new(32).unwrap();
        let s = smooth_state(&g);
        let c = StepControl {
            dt_min: 1e-14,
            dt_init: 1e-12,
            ..StepControl::default()
        };
        let integ = Integrator::new(&g, ModelParams::default(), c);
        let (_, stats) = integ.step(&s, 1e-12).unwrap();
        assert_eq!(stats.newton_iterations, 1);
    }

    #[test]
    fn run_with_zero_horizon_returns_initial_state() {
        let g = Grid::new(8).unwrap();
        let s = smooth_state(&g);
        let traj = run(&s, 0.0, &[0.0], &g, &ModelParams::default(), &StepControl::default(), None)
            .unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0], s);
    }

    #[test]
    fn run_lands_on_output_times() {
        let g = Grid::new(16).unwrap();
        let s = smooth_state(&g);
        let times = [0.0, 0.013, 0.1, 0.25];
        let traj = run(&s, 0.25, &times, &g, &ModelParams::default(), &StepControl::default(), None)
            .unwrap();
        assert_eq!(traj.times(), times.to_vec());
        for w in traj.states.windows(2) {
            assert!((mass(&g, &w[1]) - mass(&g, &w[0])).abs() <= 1e-12);
            assert!(g.integrate(&w[1].u).unwrap() >= g.integrate(&w[0].u).unwrap() - 1e-12);
        }
    }

    #[test]
    fn run_is_deterministic() {
        let g = Grid::new(32).unwrap();
        let s = smooth_state(&g);
        let times = uniform_times(0.2, 4);
        let p = ModelParams::default();
        let c = StepControl::default();
        let a = run(&s, 0.2, &times, &g, &p, &c, None).unwrap();
        let b = run(&s, 0.2, &times, &g, &p, &c, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::new(8).unwrap();
        let s = smooth_state(&g);
        let p = ModelParams::default();
        let c = StepControl::default();
        assert!(run(&s, 1.0, &[0.5, 0.2], &g, &p, &c, None).is_err());
        assert!(run(&s, 1.0, &[2.0], &g, &p, &c, None).is_err());
        let bad = StepControl {
            dt_min: 1.0,
            ..c
        };
        assert!(run(&s, 1.0, &[], &g, &p, &bad, None).is_err());
        assert!(State::new(Field::constant(3, -0.1), Field::constant(3, 1.0), 0.0).is_err());
        assert!(State::new(Field::constant(3, 0.1), Field::constant(3, 0.0), 0.0).is_err());
    }

    #[test]
    fn frozen_nutrient_holds_v_and_conserves_population() {
        let g = Grid::new(32).unwrap();
        let s = smooth_state(&g);
        let integ = Integrator::new(&g, ModelParams::default(), StepControl::default())
            .with_nutrient(NutrientMode::Frozen);
        let traj = integ.run(&s, 0.1, &uniform_times(0.1, 5)).unwrap();
        let m0 = g.integrate(&s.u).unwrap();
        for st in &traj.states {
            assert_eq!(st.v, s.v);
            assert!((g.integrate(&st.u).unwrap() - m0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_times_end_exactly() {
        let t = uniform_times(1.3863, 7);
        assert_eq!(t.len(), 8);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[7], 1.3863);
    }
}
