//! Manufactured solution
//!
//! ```text
//! u* = u_base + amp cos(pi x) e^{-t}
//! v* = v_base + amp cos(pi x) e^{-t}
//! ```
//!
//! Both satisfy the no-flux conditions. The source is the residual of the
//! system evaluated on `(u*, v*)` and is sampled at cell centers.

use std::f64::consts::PI;

use crate::grid::{Field, Grid};
use crate::timestepper::{SourceTerm, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub u_base: f64,
    pub v_base: f64,
    pub amp: f64,
}

impl Default for Manufactured {
    fn default() -> Self {
        Manufactured {
            u_base: 0.5,
            v_base: 1.0,
            amp: 0.25,
        }
    }
}

impl Manufactured {
    pub fn exact(&self, t: f64, x: f64) -> (f64, f64) {
        let a = self.amp * (-t).exp() * (PI * x).cos();
        (self.u_base + a, self.v_base + a)
    }

    pub fn exact_state(&self, grid: &Grid, t: f64) -> State {
        State {
            u: grid.sample(|x| self.exact(t, x).0),
            v: grid.sample(|x| self.exact(t, x).1),
            t,
        }
    }

    /// Pointwise source `(S_u, S_v)`.
    pub fn source_at(&self, t: f64, x: f64) -> (f64, f64) {
        let a = self.amp * (-t).exp();
        let (c, s) = ((PI * x).cos(), (PI * x).sin());
        let u = self.u_base + a * c;
        let v = self.v_base + a * c;
        let u_x = -a * PI * s;
        let v_x = u_x;
        let u_xx = -a * PI * PI * c;
        let v_xx = u_xx;
        let u_t = -a * c;
        let v_t = u_t;
        // F = u v u_x - u^2 v v_x
        let uv_x = u_x * v + u * v_x;
        let u2v_x = 2.0 * u * u_x * v + u * u * v_x;
        let flux_x = uv_x * u_x + u * v * u_xx - u2v_x * v_x - u * u * v * v_xx;
        (u_t - flux_x - u * v, v_t - v_xx + u * v)
    }
}

impl SourceTerm for Manufactured {
    fn eval(&self, t: f64, grid: &Grid) -> (Field, Field) {
        (
            grid.sample(|x| self.source_at(t, x).0),
            grid.sample(|x| self.source_at(t, x).1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Residual of the PDE on the exact solution by nested central differences.
    fn fd_source(m: &Manufactured, t: f64, x: f64) -> (f64, f64) {
        let e = 1e-4;
        let u = |t: f64, x: f64| m.exact(t, x).0;
        let v = |t: f64, x: f64| m.exact(t, x).1;
        let d = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + e) - f(x - e)) / (2.0 * e);
        let flux = |x: f64| {
            let ux = d(&|y| u(t, y), x);
            let vx = d(&|y| v(t, y), x);
            u(t, x) * v(t, x) * ux - u(t, x).powi(2) * v(t, x) * vx
        };
        let vflux = |x: f64| d(&|y| v(t, y), x);
        let ut = d(&|s| u(s, x), t);
        let vt = d(&|s| v(s, x), t);
        let uv = u(t, x) * v(t, x);
        (ut - d(&flux, x) - uv, vt - d(&vflux, x) + uv)
    }

    #[test]
    fn source_matches_finite_differences() {
        let m = Manufactured::default();
        for &t in &[0.0, 0.3, 1.0] {
            for k in 1..10 {
                let x = k as f64 / 10.0;
                let (su, sv) = m.source_at(t, x);
                let (fu, fv) = fd_source(&m, t, x);
                assert!((su - fu).abs() < 1e-6, "t={t} x={x}: {su} vs {fu}");
                assert!((sv - fv).abs() < 1e-6, "t={t} x={x}: {sv} vs {fv}");
            }
        }
    }

    #[test]
    fn exact_solution_is_admissible() {
        let m = Manufactured::default();
        let g = Grid::new(32).unwrap();
        let s = m.exact_state(&g, 0.0);
        assert!(s.u.min() > 0.0 && s.v.min() > 0.0);
    }
}
