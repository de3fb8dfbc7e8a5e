//! Discrete operators of the nutrient-taxis system
//!
//! ```text
//! u_t = (u v u_x)_x - (u^2 v v_x)_x + u v
//! v_t = v_xx - u v
//! ```
//!
//! in flux form on a [`Grid`]. The population flux on an interior face is
//! `M (u_{i+1} - u_i)/h - N (v_{i+1} - v_i)/h` with `M` the face value of
//! `u v` and `N` the face value of `u^2 v`. Boundary fluxes are zero.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{FaceField, Field, Grid};

/// Face averaging for the mobility coefficients `u v` and `u^2 v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxMean {
    #[default]
    Arithmetic,
    Harmonic,
}

impl FluxMean {
    /// Returns the mean and its partial derivatives in each argument.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> (f64, f64, f64) {
        match self {
            FluxMean::Arithmetic => (0.5 * (a + b), 0.5, 0.5),
            FluxMean::Harmonic => {
                if a == b {
                    // 2a^2/(2a) rounds away from a for some inputs
                    (a, 0.5, 0.5)
                } else if a >= 0.0 && b >= 0.0 {
                    let s = a + b;
                    let s2 = s * s;
                    (2.0 * a * b / s, 2.0 * b * b / s2, 2.0 * a * a / s2)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }
}

/// Discretization of the `u^2 v v_x` taxis term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaxisScheme {
    #[default]
    Centered,
    /// Takes `u^2 v` from the cell the taxis velocity `-u v v_x` comes from.
    Upwind,
}

impl fmt::Display for FluxMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FluxMean::Arithmetic => "arithmetic",
            FluxMean::Harmonic => "harmonic",
        })
    }
}

impl FromStr for FluxMean {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "arithmetic" => Ok(FluxMean::Arithmetic),
            "harmonic" => Ok(FluxMean::Harmonic),
            other => Err(format!("expected `arithmetic` or `harmonic`, got `{other}`")),
        }
    }
}

impl fmt::Display for TaxisScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaxisScheme::Centered => "centered",
            TaxisScheme::Upwind => "upwind",
        })
    }
}

impl FromStr for TaxisScheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "centered" => Ok(TaxisScheme::Centered),
            "upwind" => Ok(TaxisScheme::Upwind),
            other => Err(format!("expected `centered` or `upwind`, got `{other}`")),
        }
    }
}

pub const EPSILON_REG_MAX: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Regularization `eps` in the `1/(u + eps)` diagnostics.
    pub epsilon_reg: f64,
    pub flux_mean: FluxMean,
    pub taxis_scheme: TaxisScheme,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon_reg: 1e-8,
            flux_mean: FluxMean::Arithmetic,
            taxis_scheme: TaxisScheme::Centered,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=EPSILON_REG_MAX).contains(&self.epsilon_reg) {
            return Err(Error::Config(format!(
                "epsilon_reg must lie in [0, {EPSILON_REG_MAX}], got {}",
                self.epsilon_reg
            )));
        }
        Ok(())
    }
}

/// Time derivatives of both species.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub du_dt: Field,
    pub dv_dt: Field,
}

/// Population flux through the face between a left cell `(ul, vl)` and a right
/// cell `(ur, vr)`, together with `dF/d(ul, vl, ur, vr)`.
#[inline]
pub(crate) fn face_flux_u(
    ul: f64,
    vl: f64,
    ur: f64,
    vr: f64,
    h: f64,
    p: &ModelParams,
) -> (f64, [f64; 4]) {
    let du = (ur - ul) / h;
    let dv = (vr - vl) / h;
    let (m, dm_l, dm_r) = p.flux_mean.apply(ul * vl, ur * vr);
    let (bl, br) = (ul * ul * vl, ur * ur * vr);
    let (n, dn_l, dn_r) = match p.taxis_scheme {
        TaxisScheme::Centered => p.flux_mean.apply(bl, br),
        TaxisScheme::Upwind => {
            if dv > 0.0 {
                (br, 0.0, 1.0)
            } else {
                (bl, 1.0, 0.0)
            }
        }
    };
    let flux = m * du - n * dv;
    let d_ul = dm_l * vl * du - m / h - dn_l * 2.0 * ul * vl * dv;
    let d_vl = dm_l * ul * du - dn_l * ul * ul * dv + n / h;
    let d_ur = dm_r * vr * du + m / h - dn_r * 2.0 * ur * vr * dv;
    let d_vr = dm_r * ur * du - dn_r * ur * ur * dv - n / h;
    (flux, [d_ul, d_vl, d_ur, d_vr])
}

/// Fills `out` (length n+1) with population fluxes; no validation.
pub(crate) fn flux_u_into(u: &[f64], v: &[f64], h: f64, p: &ModelParams, out: &mut [f64]) {
    let n = u.len();
    out[0] = 0.0;
    out[n] = 0.0;
    for j in 1..n {
        out[j] = face_flux_u(u[j - 1], v[j - 1], u[j], v[j], h, p).0;
    }
}

pub(crate) fn check_admissible(grid: &Grid, u: &Field, v: &Field) -> Result<()> {
    grid.check_field(u)?;
    grid.check_field(v)?;
    for (i, &x) in u.iter().enumerate() {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::InvalidState {
                field: "u",
                index: i,
                value: x,
                reason: "population density must be finite and nonnegative",
            });
        }
    }
    for (i, &x) in v.iter().enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidState {
                field: "v",
                index: i,
                value: x,
                reason: "nutrient concentration must be finite and positive",
            });
        }
    }
    Ok(())
}

/// Population flux `u v u_x - u^2 v v_x` on faces.
pub fn flux_u(u: &Field, v: &Field, grid: &Grid, p: &ModelParams) -> Result<FaceField> {
    check_admissible(grid, u, v)?;
    let mut out = vec![0.0; grid.n_cells() + 1];
    flux_u_into(u.as_slice(), v.as_slice(), grid.h(), p, &mut out);
    FaceField::from_vec(out)
}

/// Nutrient flux `v_x` on faces.
pub fn flux_v(v: &Field, grid: &Grid) -> Result<FaceField> {
    grid.face_gradient(v)
}

pub fn rhs(u: &Field, v: &Field, grid: &Grid, p: &ModelParams) -> Result<Rhs> {
    let fu = flux_u(u, v, grid, p)?;
    let fv = flux_v(v, grid)?;
    let div_u = grid.divergence(&fu)?;
    let div_v = grid.divergence(&fv)?;
    let du_dt = (0..grid.n_cells())
        .map(|i| div_u[i] + u[i] * v[i])
        .collect();
    let dv_dt = (0..grid.n_cells())
        .map(|i| div_v[i] - u[i] * v[i])
        .collect();
    Ok(Rhs {
        du_dt: Field::from_vec(du_dt)?,
        dv_dt: Field::from_vec(dv_dt)?,
    })
}
