//! Single-trajectory monitors: mass ledger, bounds, the `∫ 1/(u + eps)`
//! entropy and its differential inequality, and weak-form residuals.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::timestepper::{State, Trajectory};

/// Default slack on the entropy inequality `d/dt ∫1/(u+eps) <= C ∫ v v_x^2`.
/// The continuous constant is 1; the remaining 0.2 absorbs discretization error.
pub const ENTROPY_SLACK: f64 = 1.2;

/// Largest snapshot spacing accepted by the entropy checks.
pub const MAX_ENTROPY_SPACING: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_total: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub max_v: f64,
    /// `h * sum 1/(u_i + eps)`
    pub inv_u_entropy: f64,
    /// `h * sum over interior faces of vbar (dv/dx)^2`
    pub v_dissipation: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: [&'static str; 10] = [
        "t",
        "mass_total",
        "mass_u",
        "mass_v",
        "min_u",
        "min_v",
        "max_u",
        "max_v",
        "inv_u_entropy",
        "v_dissipation",
    ];

    pub fn csv_fields(&self) -> [f64; 10] {
        [
            self.t,
            self.mass_total,
            self.mass_u,
            self.mass_v,
            self.min_u,
            self.min_v,
            self.max_u,
            self.max_v,
            self.inv_u_entropy,
            self.v_dissipation,
        ]
    }
}

pub fn record(s: &State, grid: &Grid, p: &ModelParams) -> Result<DiagnosticsRecord> {
    record_with_epsilon(s, grid, p.epsilon_reg)
}

pub fn record_with_epsilon(s: &State, grid: &Grid, epsilon: f64) -> Result<DiagnosticsRecord> {
    s.validate(grid)?;
    let h = grid.h();
    let mass_u = grid.integrate(&s.u)?;
    let mass_v = grid.integrate(&s.v)?;
    let inv_u_entropy = h * s.u.iter().map(|&u| 1.0 / (u + epsilon)).sum::<f64>();
    let v_dissipation = h * s
        .v
        .as_slice()
        .windows(2)
        .map(|w| {
            let dv = (w[1] - w[0]) / h;
            0.5 * (w[0] + w[1]) * dv * dv
        })
        .sum::<f64>();
    Ok(DiagnosticsRecord {
        t: s.t,
        mass_total: mass_u + mass_v,
        mass_u,
        mass_v,
        min_u: s.u.min(),
        min_v: s.v.min(),
        max_u: s.u.max(),
        max_v: s.v.max(),
        inv_u_entropy,
        v_dissipation,
    })
}

pub fn record_trajectory(
    traj: &Trajectory,
    grid: &Grid,
    epsilon: f64,
) -> Result<Vec<DiagnosticsRecord>> {
    traj.states
        .iter()
        .map(|s| record_with_epsilon(s, grid, epsilon))
        .collect()
}

/// Both forms of the entropy inequality over one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub epsilon: f64,
    /// max over snapshot intervals of `dE/dt - C * mean(v_dissipation)`
    pub worst_rate_violation: f64,
    /// sup_t of `E(t) - E(0) - C ∫_0^t v_dissipation`; the bound holds iff `<= 0`
    pub integrated_margin: f64,
    pub max_v_dissipation: f64,
    pub sup_entropy: f64,
    pub initial_entropy: f64,
}

/// Worst violation of the rate form with the default slack.
pub fn entropy_inequality_check(traj: &Trajectory, grid: &Grid, p: &ModelParams) -> Result<f64> {
    Ok(entropy_report(traj, grid, p.epsilon_reg, ENTROPY_SLACK)?.worst_rate_violation)
}

pub fn entropy_report(
    traj: &Trajectory,
    grid: &Grid,
    epsilon: f64,
    slack: f64,
) -> Result<EntropyReport> {
    if traj.states.len() < 2 {
        return Err(Error::Config(
            "entropy check needs at least two snapshots".into(),
        ));
    }
    let recs = record_trajectory(traj, grid, epsilon)?;
    if let Some(w) = recs
        .windows(2)
        .find(|w| w[1].t - w[0].t > MAX_ENTROPY_SPACING * (1.0 + 1e-9))
    {
        return Err(Error::Config(format!(
            "snapshots too sparse for the entropy check: gap {} > {MAX_ENTROPY_SPACING} at t = {}",
            w[1].t - w[0].t,
            w[0].t
        )));
    }
    let e0 = recs[0].inv_u_entropy;
    let mut worst_rate = f64::NEG_INFINITY;
    let mut margin = f64::NEG_INFINITY;
    let mut integral = 0.0;
    for w in recs.windows(2) {
        let dt = w[1].t - w[0].t;
        let mean_diss = 0.5 * (w[0].v_dissipation + w[1].v_dissipation);
        let rate = (w[1].inv_u_entropy - w[0].inv_u_entropy) / dt;
        worst_rate = worst_rate.max(rate - slack * mean_diss);
        integral += dt * mean_diss;
        margin = margin.max(w[1].inv_u_entropy - e0 - slack * integral);
    }
    Ok(EntropyReport {
        epsilon,
        worst_rate_violation: worst_rate,
        integrated_margin: margin,
        max_v_dissipation: recs.iter().map(|r| r.v_dissipation).fold(0.0, f64::max),
        sup_entropy: recs.iter().map(|r| r.inv_u_entropy).fold(f64::NEG_INFINITY, f64::max),
        initial_entropy: e0,
    })
}

/// Smallest `v` over the trajectory against `min v0 * exp(-max_u * T)`.
/// Returns `(observed_min_v, comparison_bound)`.
pub fn nutrient_lower_bound(traj: &Trajectory) -> (f64, f64) {
    let first = &traj.states[0];
    let horizon = traj.last().t - first.t;
    let max_u = traj.states.iter().map(|s| s.u.max()).fold(0.0, f64::max);
    let min_v = traj.states.iter().map(|s| s.v.min()).fold(f64::INFINITY, f64::min);
    (min_v, first.v.min() * (-max_u * horizon).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidualReport {
    pub residual_u: f64,
    pub residual_v: f64,
    pub test_basis_size: usize,
    pub refinement_level: u32,
}

/// Defects of the weak formulations against tensor-product hat functions.
///
/// Space hats sit on `2^level + 1` equally spaced nodes of [0, 1]; time hats
/// on `2^level + 1` equally spaced nodes of [t0, T], excluding the one at `T`
/// so every test function vanishes at the final time. Time nodes must be
/// snapshot times and space nodes must be faces. Each defect is divided by the
/// `L^1` norm of its test function.
pub fn weak_residual(traj: &Trajectory, grid: &Grid, level: u32) -> Result<WeakResidualReport> {
    let n = grid.n_cells();
    let h = grid.h();
    if level == 0 || level > 20 {
        return Err(Error::Config(format!("weak residual level {level} must be in 1..=20")));
    }
    let nodes = 1usize << level;
    if nodes > n || n % nodes != 0 {
        return Err(Error::Config(format!(
            "level {level} too fine for {n} cells: need 2^level to divide the cell count"
        )));
    }
    let states = &traj.states;
    if states.len() < 2 {
        return Err(Error::Config("weak residual needs at least two snapshots".into()));
    }
    for s in states {
        s.validate(grid)?;
    }
    let t0 = states[0].t;
    let t_end = states.last().unwrap().t;
    let span = t_end - t0;
    if !(span > 0.0) {
        return Err(Error::Config("weak residual needs a positive time span".into()));
    }
    // snapshot index of every time node
    let mut node_idx = Vec::with_capacity(nodes + 1);
    for m in 0..=nodes {
        let tau = t0 + span * m as f64 / nodes as f64;
        let k = states
            .iter()
            .position(|s| (s.t - tau).abs() <= 1e-9 * span.max(1.0))
            .ok_or_else(|| {
                Error::Config(format!(
                    "level {level} too fine for snapshot density: no snapshot at t = {tau}"
                ))
            })?;
        node_idx.push(k);
    }
    if node_idx.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "level {level} too fine for snapshot density"
        )));
    }

    let cells_per_node = n / nodes;
    let dy = 1.0 / nodes as f64;
    // hat j evaluated at cell center i: only hats j0 = i / cells_per_node and j0 + 1 are nonzero
    let hat_weights = |i: usize| -> (usize, f64, f64) {
        let j0 = i / cells_per_node;
        let x = grid.centers()[i];
        let r = (x - j0 as f64 * dy) / dy;
        (j0, 1.0 - r, r)
    };

    // spatial functionals per snapshot, per hat: [A_u, B_u, C, A_v, B_v]
    let spatial: Vec<Vec<[f64; 5]>> = states
        .iter()
        .map(|s| {
            let (u, v) = (s.u.as_slice(), s.v.as_slice());
            let mut acc = vec![[0.0; 5]; nodes + 1];
            let mut hat_at = vec![(0usize, 0.0, 0.0); n];
            for i in 0..n {
                let (j0, wl, wr) = hat_weights(i);
                hat_at[i] = (j0, wl, wr);
                let uv = u[i] * v[i];
                for (j, w) in [(j0, wl), (j0 + 1, wr)] {
                    acc[j][0] += h * u[i] * w;
                    acc[j][2] += h * uv * w;
                    acc[j][3] += h * v[i] * w;
                }
            }
            for f in 1..n {
                let (l, r) = (f - 1, f);
                let du = (u[r] - u[l]) / h;
                let dv = (v[r] - v[l]) / h;
                let m = 0.5 * (u[l] * v[l] + u[r] * v[r]);
                let nn = 0.5 * (u[l] * u[l] * v[l] + u[r] * u[r] * v[r]);
                let flux_u = m * du - nn * dv;
                // b(x_r) - b(x_l) for every hat touching either center
                let (jl, wll, wlr) = hat_at[l];
                let (jr, wrl, wrr) = hat_at[r];
                let mut diffs = [(jl, -wll), (jl + 1, -wlr), (jr, wrl), (jr + 1, wrr)];
                diffs.sort_by_key(|d| d.0);
                let mut k = 0;
                while k < diffs.len() {
                    let j = diffs[k].0;
                    let mut db = 0.0;
                    while k < diffs.len() && diffs[k].0 == j {
                        db += diffs[k].1;
                        k += 1;
                    }
                    acc[j][1] += flux_u * db;
                    acc[j][4] += dv * db;
                }
            }
            acc
        })
        .collect();

    let mut worst_u = 0.0_f64;
    let mut worst_v = 0.0_f64;
    let dtau = span / nodes as f64;
    for m in 0..nodes {
        // time hat a_m: rises on [tau_{m-1}, tau_m], falls on [tau_m, tau_{m+1}];
        // the m = 0 hat is the falling half only and equals 1 at t0
        let k_mid = node_idx[m];
        let k_lo = if m == 0 { k_mid } else { node_idx[m - 1] };
        let k_hi = node_idx[m + 1];
        let t_lo = states[k_lo].t;
        let t_mid = states[k_mid].t;
        let t_hi = states[k_hi].t;
        let a_at = |k: usize| -> f64 {
            let t = states[k].t;
            if k == k_mid {
                1.0
            } else if k < k_mid {
                (t - t_lo) / (t_mid - t_lo)
            } else {
                (t_hi - t) / (t_hi - t_mid)
            }
        };
        let time_norm = if m == 0 { 0.5 * dtau } else { dtau };
        for j in 0..=nodes {
            let space_norm = if j == 0 || j == nodes { 0.5 * dy } else { dy };
            let mut du_def = 0.0;
            let mut dv_def = 0.0;
            if m == 0 {
                du_def -= spatial[k_mid][j][0];
                dv_def -= spatial[k_mid][j][3];
            }
            for k in k_lo..k_hi {
                let dt = states[k + 1].t - states[k].t;
                let slope = if k < k_mid {
                    1.0 / (t_mid - t_lo)
                } else {
                    -1.0 / (t_hi - t_mid)
                };
                let (sa, sb) = (&spatial[k][j], &spatial[k + 1][j]);
                let (a0, a1) = (a_at(k), a_at(k + 1));
                // -∫ A a' dt, exact for A linear between snapshots
                du_def -= slope * 0.5 * (sa[0] + sb[0]) * dt;
                dv_def -= slope * 0.5 * (sa[3] + sb[3]) * dt;
                // ∫ (B ∓ C) a dt by trapezoid
                du_def += 0.5 * dt * ((sa[1] - sa[2]) * a0 + (sb[1] - sb[2]) * a1);
                dv_def += 0.5 * dt * ((sa[4] + sa[2]) * a0 + (sb[4] + sb[2]) * a1);
            }
            let norm = time_norm * space_norm;
            worst_u = worst_u.max(du_def.abs() / norm);
            worst_v = worst_v.max(dv_def.abs() / norm);
        }
    }
    Ok(WeakResidualReport {
        residual_u: worst_u,
        residual_v: worst_v,
        test_basis_size: nodes * (nodes + 1),
        refinement_level: level,
    })
}
