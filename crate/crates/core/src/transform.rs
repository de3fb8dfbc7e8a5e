//! The anti-derivative `w(t, x) = ∫_0^x (u + v) dy`, stored on faces.
//!
//! With `w` on faces the discrete derivative across cell `i` is exactly
//! `u_i + v_i`, `w(0) = 0` by construction and `w(1)` is the total mass.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::grid::{compensated_prefix, Grid};
use crate::timestepper::{State, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct WField {
    values: Vec<f64>,
    total_mass: f64,
    /// Unscaled running sums `sum_{i<j} (u_i + v_i)` as `(hi, lo)` pairs.
    parts: Vec<(f64, f64)>,
}

impl WField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cell-wise difference quotient `(w_{i+1} - w_i) / h`, taken on the
    /// compensated sums so it reproduces `u_i + v_i` to a few ulp.
    pub fn cell_derivative(&self, grid: &Grid) -> Vec<f64> {
        debug_assert_eq!(self.values.len(), grid.n_cells() + 1);
        self.parts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) + (w[1].1 - w[0].1))
            .collect()
    }
}

impl Index<usize> for WField {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.values[j]
    }
}

/// Left-anchored cumulative sum `w_j = h * sum_{i<j} (u_i + v_i)`.
///
/// The sum is compensated exactly as in `Grid::integrate`, so `w(1)` equals
/// `integrate(u + v)` bitwise.
pub fn antiderivative(s: &State, grid: &Grid) -> Result<WField> {
    grid.check_field(&s.u)?;
    grid.check_field(&s.v)?;
    Ok(antiderivative_unchecked(s.u.as_slice(), s.v.as_slice()))
}

pub(crate) fn antiderivative_unchecked(u: &[f64], v: &[f64]) -> WField {
    let n = u.len() as f64;
    let parts = compensated_prefix(u.iter().zip(v).map(|(a, b)| a + b));
    let values: Vec<f64> = parts.iter().map(|(hi, lo)| (hi + lo) / n).collect();
    let total_mass = values[u.len()];
    WField {
        values,
        total_mass,
        parts,
    }
}

/// Largest deviation of `w(1)` from its initial value over the trajectory.
pub fn w_endpoint_drift(traj: &Trajectory, grid: &Grid) -> Result<f64> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| Error::Contract("empty trajectory".into()))?;
    let w0 = antiderivative(first, grid)?.total_mass;
    traj.states.iter().try_fold(0.0_f64, |worst, s| {
        Ok(worst.max((antiderivative(s, grid)?.total_mass - w0).abs()))
    })
}

/// Sup-norm of `(w_{i+1} - w_i)/h - (u_i + v_i)`.
pub fn w_gradient_identity_check(s: &State, grid: &Grid) -> Result<f64> {
    let w = antiderivative(s, grid)?;
    Ok(w
        .cell_derivative(grid)
        .iter()
        .enumerate()
        .map(|(i, d)| (d - (s.u[i] + s.v[i])).abs())
        .fold(0.0, f64::max))
}
