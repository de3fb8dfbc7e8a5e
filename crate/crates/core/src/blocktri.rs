//! Block-tridiagonal systems with 2x2 blocks, solved by block Thomas elimination.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]`.
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiag {
    pub lower: Vec<Matrix2<f64>>,
    pub diag: Vec<Matrix2<f64>>,
    pub upper: Vec<Matrix2<f64>>,
}

impl BlockTridiag {
    pub fn zeros(n: usize) -> Self {
        BlockTridiag {
            lower: vec![Matrix2::zeros(); n],
            diag: vec![Matrix2::zeros(); n],
            upper: vec![Matrix2::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Dense `2n x 2n` copy, unknowns interleaved per cell.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; 2 * n]; 2 * n];
        let mut put = |i: usize, j: usize, m: &Matrix2<f64>| {
            for r in 0..2 {
                for c in 0..2 {
                    a[2 * i + r][2 * j + c] = m[(r, c)];
                }
            }
        };
        for i in 0..n {
            put(i, i, &self.diag[i]);
            if i > 0 {
                put(i, i - 1, &self.lower[i]);
            }
            if i + 1 < n {
                put(i, i + 1, &self.upper[i]);
            }
        }
        a
    }

    /// Solves in place. A numerically singular pivot block is reported as a
    /// Newton failure so the caller can retry with a smaller step.
    pub fn solve(&self, rhs: &mut [Vector2<f64>]) -> Result<()> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let mut c_prime = Vec::with_capacity(n);
        let mut prev_c = Matrix2::zeros();
        let mut prev_d = Vector2::zeros();
        for i in 0..n {
            let (s, r) = if i == 0 {
                (self.diag[0], rhs[0])
            } else {
                (
                    self.diag[i] - self.lower[i] * prev_c,
                    rhs[i] - self.lower[i] * prev_d,
                )
            };
            let inv = invert(&s)?;
            prev_c = inv * self.upper[i];
            prev_d = inv * r;
            c_prime.push(prev_c);
            rhs[i] = prev_d;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = rhs[i + 1];
            rhs[i] -= c_prime[i] * next;
        }
        Ok(())
    }
}

fn invert(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale = m.abs().max();
    if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
        return Err(Error::NewtonDivergence {
            dt: f64::NAN,
            residual: f64::NAN,
            iterations: 0,
        });
    }
    Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut ChaCha8Rng, shift: f64) -> Matrix2<f64> {
        Matrix2::from_fn(|r, c| rng.gen_range(-1.0..1.0) + if r == c { shift } else { 0.0 })
    }

    #[test]
    fn solves_diagonally_dominant_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 3, 10, 57] {
            let mut a = BlockTridiag::zeros(n);
            for i in 0..n {
                a.lower[i] = random_block(&mut rng, 0.0);
                a.upper[i] = random_block(&mut rng, 0.0);
                a.diag[i] = random_block(&mut rng, 6.0);
            }
            let x: Vec<Vector2<f64>> = (0..n)
                .map(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut b = a.apply(&x);
            a.solve(&mut b).unwrap();
            for i in 0..n {
                assert!((b[i] - x[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_pivot_is_reported() {
        let mut a = BlockTridiag::zeros(3);
        for i in 0..3 {
            a.diag[i] = Matrix2::identity();
        }
        a.diag[1] = Matrix2::new(1.0, 2.0, 2.0, 4.0);
        let mut b = vec![Vector2::new(1.0, 1.0); 3];
        assert!(matches!(a.solve(&mut b), Err(Error::NewtonDivergence { .. })));
    }

    #[test]
    fn dense_layout_matches_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4;
        let mut a = BlockTridiag::zeros(n);
        for i in 0..n {
            a.lower[i] = random_block(&mut rng, 0.0);
            a.upper[i] = random_block(&mut rng, 0.0);
            a.diag[i] = random_block(&mut rng, 3.0);
        }
        let x: Vec<Vector2<f64>> = (0..n).map(|i| Vector2::new(i as f64, 1.0 - i as f64)).collect();
        let y = a.apply(&x);
        let d = a.to_dense();
        for r in 0..2 * n {
            let s: f64 = (0..2 * n).map(|c| d[r][c] * x[c / 2][c % 2]).sum();
            assert!((s - y[r / 2][r % 2]).abs() < 1e-12);
        }
    }
}
