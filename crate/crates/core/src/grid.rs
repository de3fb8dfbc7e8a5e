//! Uniform cell-centered discretization of the unit interval.
//!
//! Cell `i` occupies `[i h, (i+1) h]` with center `(i + 1/2) h`. Cell fields
//! hold one value per cell, face fields one value per face (`n + 1` entries).
//! Gradients on the two boundary faces are zero, which is how the no-flux
//! boundary conditions enter every operator built on top of this module.

use std::ops::Index;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_cells: usize,
    h: f64,
    centers: Vec<f64>,
    faces: Vec<f64>,
}

/// Builds the uniform grid with `n_cells` cells on (0,1).
pub fn build_grid(n_cells: usize) -> Result<Grid> {
    Grid::new(n_cells)
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        let n = n_cells as f64;
        let centers = (0..n_cells).map(|i| (i as f64 + 0.5) / n).collect();
        let mut faces: Vec<f64> = (0..=n_cells).map(|i| i as f64 / n).collect();
        faces[n_cells] = 1.0;
        Ok(Grid {
            n_cells,
            h: 1.0 / n,
            centers,
            faces,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Samples `f` at the cell centers.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.centers.iter().map(|&x| f(x)).collect())
    }

    pub fn check_field(&self, f: &Field) -> Result<()> {
        if f.len() != self.n_cells {
            return Err(Error::Contract(format!(
                "field has {} entries, grid has {} cells",
                f.len(),
                self.n_cells
            )));
        }
        Ok(())
    }

    /// Midpoint rule `h * sum(f_i)`, summed with compensation.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check_field(f)?;
        let (hi, lo) = compensated_prefix(f.0.iter().copied())
            .last()
            .copied()
            .unwrap_or((0.0, 0.0));
        Ok((hi + lo) / self.n_cells as f64)
    }

    /// Difference quotients on interior faces, zero on the two boundary faces.
    pub fn face_gradient(&self, f: &Field) -> Result<FaceField> {
        self.check_field(f)?;
        let mut out = vec![0.0; self.n_cells + 1];
        for (j, pair) in f.0.windows(2).enumerate() {
            out[j + 1] = (pair[1] - pair[0]) / self.h;
        }
        Ok(FaceField(out))
    }

    /// Cell-wise divergence `(F_{i+1/2} - F_{i-1/2}) / h` of a face field.
    pub fn divergence(&self, flux: &FaceField) -> Result<Field> {
        if flux.len() != self.n_cells + 1 {
            return Err(Error::Contract(format!(
                "face field has {} entries, grid has {} faces",
                flux.len(),
                self.n_cells + 1
            )));
        }
        Ok(Field(
            flux.0.windows(2).map(|w| (w[1] - w[0]) / self.h).collect(),
        ))
    }
}

/// `s + e == a + b` exactly (Knuth's two-sum).
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Prefix sums as `(hi, lo)` pairs, `hi + lo` carrying the running total to
/// about twice working precision. Entry `k` sums the first `k` terms.
pub(crate) fn compensated_prefix(xs: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(xs.size_hint().0 + 1);
    let (mut hi, mut lo) = (0.0, 0.0);
    out.push((hi, lo));
    for x in xs {
        let (s, e) = two_sum(hi, x);
        hi = s;
        lo += e;
        out.push((hi, lo));
    }
    out
}

/// Cell-centered values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub(crate) Vec<f64>);

impl Field {
    /// Wraps `values`, rejecting NaN and infinities.
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidState {
                field: "field",
                index: i,
                value: *v,
                reason: "non-finite entry",
            });
        }
        Ok(Field(values))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Field(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Field::constant(n, 0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entry-wise combination `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Field {
        Field(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&x| f(x)).collect())
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Face-attached values, `n_cells + 1` entries including both boundary faces.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField(pub(crate) Vec<f64>);

impl FaceField {
    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidState {
                field: "face field",
                index: i,
                value: *v,
                reason: "non-finite entry",
            });
        }
        Ok(FaceField(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl Index<usize> for FaceField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
