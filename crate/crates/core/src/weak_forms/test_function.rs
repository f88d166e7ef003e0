use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::WeakFormError;
use crate::fields::{Domain, Point};

/// Temporal factor `ψ(t)` of a separable test function `φ = ψ(t) η(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    /// `ψ ≡ 1`.
    ConstantOne,
    /// `ψ(t) = a + b t`.
    Affine { a: f64, b: f64 },
    /// Smooth bump supported in `(start, end)`.
    SmoothBump { start: f64, end: f64 },
    /// Ramp up on `[0, h]`, 1 on `[h, τ]`, ramp down on `[τ, τ+h]`, 0 after.
    HatPlus { tau: f64, h: f64 },
    /// Ramp up on `[0, h]`, 1 on `[h, τ−h]`, ramp down on `[τ−h, τ]`, 0 after.
    HatMinus { tau: f64, h: f64 },
}

fn smooth_bump(t: f64, start: f64, end: f64) -> (f64, f64) {
    if t <= start || t >= end {
        return (0.0, 0.0);
    }
    let half = 0.5 * (end - start);
    let z = (t - 0.5 * (start + end)) / half;
    let q = 1.0 - z * z;
    let v = (1.0 - 1.0 / q).exp();
    // d/dt exp(1 − 1/q) = v · q'/q², q' = −2z/half
    (v, v * (-2.0 * z / half) / (q * q))
}

fn ramp(t: f64, up_start: f64, up_end: f64, down_start: f64, down_end: f64) -> (f64, f64) {
    let w_up = up_end - up_start;
    let w_down = down_end - down_start;
    // Derivatives are right-sided at the four kinks.
    if t < up_start || t >= down_end {
        (0.0, 0.0)
    } else if t < up_end {
        ((t - up_start) / w_up, 1.0 / w_up)
    } else if t < down_start {
        (1.0, 0.0)
    } else {
        (1.0 - (t - down_start) / w_down, -1.0 / w_down)
    }
}

impl TimeProfile {
    pub fn validate(&self) -> Result<(), WeakFormError> {
        let bad = |m: &str| Err(WeakFormError::BadTestFunction(m.into()));
        match *self {
            TimeProfile::SmoothBump { start, end } if !(end > start) => bad("smooth_bump needs start < end"),
            TimeProfile::HatPlus { tau, h } if !(h > 0.0 && tau >= h) => bad("hat_plus needs 0 < h ≤ τ"),
            TimeProfile::HatMinus { tau, h } if !(h > 0.0 && tau >= 2.0 * h) => bad("hat_minus needs 0 < 2h ≤ τ"),
            _ => Ok(()),
        }
    }

    /// `(ψ(t), ψ'(t))`; at kinks of the hat profiles the one-sided derivative
    /// from the right is returned.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            TimeProfile::ConstantOne => (1.0, 0.0),
            TimeProfile::Affine { a, b } => (a + b * t, b),
            TimeProfile::SmoothBump { start, end } => smooth_bump(t, start, end),
            TimeProfile::HatPlus { tau, h } => ramp(t, 0.0, h, tau, tau + h),
            TimeProfile::HatMinus { tau, h } => ramp(t, 0.0, h, tau - h, tau),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// `ψ'` on `[a, b]` just left of `b`. Differs from [`Self::derivative`]
    /// only when `b` is a kink.
    pub fn derivative_left(&self, a: f64, b: f64) -> f64 {
        let tol = 1e-12 * b.abs().max(1.0);
        if self.kinks().iter().any(|k| (k - b).abs() <= tol) {
            self.derivative(0.5 * (a + b))
        } else {
            self.derivative(b)
        }
    }

    /// Points where `ψ'` jumps.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            TimeProfile::HatPlus { tau, h } => vec![0.0, h, tau, tau + h],
            TimeProfile::HatMinus { tau, h } => vec![0.0, h, tau - h, tau],
            _ => vec![],
        }
    }
}

/// Spatial factor `η(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceProfile {
    /// `η ≡ 1`; not compactly supported.
    One,
    /// `exp(1 − 1/(1 − |x−c|²/r²))` inside `B(c, r)`, 0 outside.
    Bump { center: Vec<f64>, radius: f64 },
    /// `1 + A Π_i cos(2π k x_i + φ₀)`; smooth up to the boundary, not compact.
    Wave { amplitude: f64, wavenumber: f64, phase: f64 },
}

impl SpaceProfile {
    pub fn eval(&self, x: &Point, d: usize) -> (f64, Point) {
        match self {
            SpaceProfile::One => (1.0, [0.0; 3]),
            SpaceProfile::Bump { center, radius } => {
                let r2 = radius * radius;
                let q: f64 = (0..d).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>() / r2;
                if q >= 1.0 {
                    return (0.0, [0.0; 3]);
                }
                let s = 1.0 - q;
                let v = (1.0 - 1.0 / s).exp();
                // ∂_i v = v · (−1/s²) · (2(x_i − c_i)/r²)
                let mut g = [0.0; 3];
                for i in 0..d {
                    g[i] = -v / (s * s) * 2.0 * (x[i] - center[i]) / r2;
                }
                (v, g)
            }
            SpaceProfile::Wave { amplitude, wavenumber, phase } => {
                let arg: Vec<f64> = (0..d).map(|i| 2.0 * PI * wavenumber * x[i] + phase).collect();
                let c: Vec<f64> = arg.iter().map(|a| a.cos()).collect();
                let s: Vec<f64> = arg.iter().map(|a| a.sin()).collect();
                let mut g = [0.0; 3];
                for i in 0..d {
                    let others: f64 = (0..d).filter(|&j| j != i).map(|j| c[j]).product();
                    g[i] = -amplitude * 2.0 * PI * wavenumber * s[i] * others;
                }
                (1.0 + amplitude * c.iter().product::<f64>(), g)
            }
        }
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, SpaceProfile::Bump { .. })
    }
}

/// `φ(t, x) = ψ(t) η(x)` with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub space: SpaceProfile,
    pub time: TimeProfile,
}

impl TestFunction {
    /// Checks parameters and, for compact bumps, that the support stays
    /// inside the domain with at least `margin` to spare.
    pub fn new(
        id: impl Into<String>,
        space: SpaceProfile,
        time: TimeProfile,
        domain: &Domain,
        margin: f64,
    ) -> Result<Self, WeakFormError> {
        time.validate()?;
        if let SpaceProfile::Bump { center, radius } = &space {
            if center.len() != domain.dim() || !(*radius > 0.0) {
                return Err(WeakFormError::BadTestFunction("bump center/radius do not fit the domain".into()));
            }
            if !domain.is_periodic() {
                let mut c = [0.0; 3];
                c[..center.len()].copy_from_slice(center);
                if !domain.contains(&c) || domain.dist_boundary_unchecked(&c) < radius + margin {
                    return Err(WeakFormError::BadTestFunction(format!(
                        "bump B({center:?}, {radius}) is not compactly contained in the domain"
                    )));
                }
            }
        }
        Ok(Self { id: id.into(), space, time })
    }

    /// `φ`, `∂tφ`, `∇φ` at `(t, x)`.
    pub fn eval(&self, t: f64, x: &Point, d: usize) -> (f64, f64, Point) {
        let (psi, dpsi) = self.time.eval(t);
        let (eta, grad) = self.space.eval(x, d);
        let mut g = [0.0; 3];
        for i in 0..d {
            g[i] = psi * grad[i];
        }
        (psi * eta, dpsi * eta, g)
    }

    pub fn compact_in_space(&self) -> bool {
        self.space.is_compact()
    }
}
