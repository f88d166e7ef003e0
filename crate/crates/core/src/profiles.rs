//! Analytic initial data: constants, indicator-built vacuum regions, smooth
//! bumps and cosine modes.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fields::{Grid, Point, ScalarField};

/// Anything that can be evaluated at a point: analytic profiles exactly,
/// grid fields by interpolation.
pub trait Sample: Sync {
    fn sample(&self, x: &Point) -> f64;
}

impl Sample for ScalarField {
    fn sample(&self, x: &Point) -> f64 {
        self.interpolate(x)
    }
}

impl<F: Fn(&Point) -> f64 + Sync> Sample for F {
    fn sample(&self, x: &Point) -> f64 {
        self(x)
    }
}

fn default_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `value` outside the closed ball, exactly `0` inside.
    VacuumBall {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_one")]
        value: f64,
    },
    /// `value` inside the closed ball, `0` outside.
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_one")]
        value: f64,
    },
    /// `value` outside the closed box (an interval in 1D), exactly `0` inside.
    VacuumBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default = "default_one")]
        value: f64,
    },
    /// `value` inside the closed box, `0` outside.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default = "default_one")]
        value: f64,
    },
    /// `base + amplitude · exp(1 − 1/(1 − |x−c|²/r²))` inside the ball, `base` outside.
    SmoothBump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default)]
        base: f64,
    },
    /// `base + amplitude · Π cos(2π k x_i)`.
    Cosine {
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default)]
        base: f64,
        #[serde(default = "default_one")]
        wavenumber: f64,
    },
}

fn dist2(x: &Point, c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(i, ci)| (x[i] - ci).powi(2)).sum()
}

fn in_box(x: &Point, lo: &[f64], hi: &[f64]) -> bool {
    lo.iter().zip(hi).enumerate().all(|(i, (l, u))| x[i] >= *l && x[i] <= *u)
}

impl Profile {
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::VacuumBall { center, radius, value } => {
                if dist2(x, center) <= radius * radius {
                    0.0
                } else {
                    *value
                }
            }
            Profile::Ball { center, radius, value } => {
                if dist2(x, center) <= radius * radius {
                    *value
                } else {
                    0.0
                }
            }
            Profile::VacuumBox { lower, upper, value } => {
                if in_box(x, lower, upper) {
                    0.0
                } else {
                    *value
                }
            }
            Profile::Box { lower, upper, value } => {
                if in_box(x, lower, upper) {
                    *value
                } else {
                    0.0
                }
            }
            Profile::SmoothBump { center, radius, amplitude, base } => {
                let q = dist2(x, center) / (radius * radius);
                if q < 1.0 {
                    base + amplitude * (1.0 - 1.0 / (1.0 - q)).exp()
                } else {
                    *base
                }
            }
            Profile::Cosine { amplitude, base, wavenumber } => {
                // Only the leading coordinates that are actually used by the grid
                // matter; trailing coordinates are zero and contribute cos(0) = 1.
                base + amplitude * x.iter().map(|xi| (2.0 * PI * wavenumber * xi).cos()).product::<f64>()
            }
        }
    }

    /// Dimension fixed by the profile's geometry, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Profile::VacuumBall { center, .. } | Profile::Ball { center, .. } | Profile::SmoothBump { center, .. } => {
                Some(center.len())
            }
            Profile::VacuumBox { lower, .. } | Profile::Box { lower, .. } => Some(lower.len()),
            _ => None,
        }
    }

    /// Checks geometric parameters against the grid dimension.
    pub fn validate(&self, dim: usize) -> Result<(), String> {
        if let Some(d) = self.dim() {
            if d != dim {
                return Err(format!("profile has {d} coordinate(s), grid has {dim}"));
            }
        }
        match self {
            Profile::VacuumBall { radius, .. } | Profile::Ball { radius, .. } | Profile::SmoothBump { radius, .. }
                if !(*radius > 0.0) =>
            {
                Err("radius must be positive".into())
            }
            Profile::VacuumBox { lower, upper, .. } | Profile::Box { lower, upper, .. }
                if lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(b > a)) =>
            {
                Err("box bounds must satisfy lower < upper on every axis".into())
            }
            _ => Ok(()),
        }
    }

    /// Cell-center samples; flagged nonnegative when every sample is `≥ 0`.
    pub fn sample_grid(&self, grid: Arc<Grid>) -> ScalarField {
        let mut f = ScalarField::from_fn(grid, 0.0, |x| self.eval(x));
        let _ = f.mark_nonnegative();
        f
    }
}

impl Sample for Profile {
    fn sample(&self, x: &Point) -> f64 {
        self.eval(x)
    }
}
