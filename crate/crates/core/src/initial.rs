//! Initial-data profiles sampled at cell centers.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `base + amp * exp(-((x - center)/width)^2)`
    Bump {
        center: f64,
        width: f64,
        base: f64,
        amp: f64,
    },
    /// `base + amp * cos(modes * pi * x)`
    Cosine { base: f64, amp: f64, modes: u32 },
    /// Cell values read from a whitespace-separated file.
    File { path: PathBuf, values: Vec<f64> },
}

impl Profile {
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        let field = match self {
            Profile::Constant(c) => Field::constant(grid.n_cells(), *c),
            Profile::Bump {
                center,
                width,
                base,
                amp,
            } => grid.sample(|x| base + amp * (-((x - center) / width).powi(2)).exp()),
            Profile::Cosine { base, amp, modes } => {
                grid.sample(|x| base + amp * (*modes as f64 * PI * x).cos())
            }
            Profile::File { path, values } => {
                if values.len() != grid.n_cells() {
                    return Err(Error::Config(format!(
                        "{} holds {} values but the grid has {} cells",
                        path.display(),
                        values.len(),
                        grid.n_cells()
                    )));
                }
                Field(values.clone())
            }
        };
        Field::from_vec(field.into_vec())
    }

    /// Parses the config syntax, e.g. `bump 0.5 0.1 0.2 1.0`.
    pub fn parse(text: &str) -> std::result::Result<Profile, String> {
        let mut parts = text.split_whitespace();
        let kind = parts.next().ok_or("empty profile")?;
        let rest: Vec<&str> = parts.collect();
        let nums = |expected: usize| -> std::result::Result<Vec<f64>, String> {
            if rest.len() != expected {
                return Err(format!(
                    "`{kind}` takes {expected} numbers, got {}",
                    rest.len()
                ));
            }
            rest.iter()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| format!("`{s}` is not a finite number"))
                })
                .collect()
        };
        match kind {
            "constant" => Ok(Profile::Constant(nums(1)?[0])),
            "bump" => {
                let p = nums(4)?;
                if p[1] <= 0.0 {
                    return Err("bump width must be positive".into());
                }
                Ok(Profile::Bump {
                    center: p[0],
                    width: p[1],
                    base: p[2],
                    amp: p[3],
                })
            }
            "cosine" => {
                if rest.len() != 3 {
                    return Err(format!("`cosine` takes 3 values, got {}", rest.len()));
                }
                let base = nums_at(&rest, 0)?;
                let amp = nums_at(&rest, 1)?;
                let modes = rest[2]
                    .parse::<u32>()
                    .map_err(|_| format!("`{}` is not a nonnegative integer mode count", rest[2]))?;
                Ok(Profile::Cosine { base, amp, modes })
            }
            "file" => {
                if rest.len() != 1 {
                    return Err("`file` takes exactly one path".into());
                }
                let path = PathBuf::from(rest[0]);
                let values = read_values(&path)?;
                Ok(Profile::File { path, values })
            }
            other => Err(format!(
                "unknown profile `{other}` (expected constant, bump, cosine or file)"
            )),
        }
    }
}

fn nums_at(rest: &[&str], i: usize) -> std::result::Result<f64, String> {
    rest[i]
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{}` is not a finite number", rest[i]))
}

fn read_values(path: &Path) -> std::result::Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("{}: `{s}` is not a finite number", path.display()))
        })
        .collect()
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "constant {c:?}"),
            Profile::Bump {
                center,
                width,
                base,
                amp,
            } => write!(f, "bump {center:?} {width:?} {base:?} {amp:?}"),
            Profile::Cosine { base, amp, modes } => write!(f, "cosine {base:?} {amp:?} {modes}"),
            Profile::File { path, .. } => write!(f, "file {}", path.display()),
        }
    }
}
