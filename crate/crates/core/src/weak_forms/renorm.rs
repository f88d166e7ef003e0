use serde::{Deserialize, Serialize};

use super::WeakFormError;
use crate::exponents::{Exponent, Growth, GrowthProfile, Rational};

/// Renormalizing nonlinearities `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RenormKind {
    /// `b(z) = 1 − (1 − z/L)³` on `[0, L]`, `1` beyond: `b' ∈ C_c([0, ∞))`.
    RenGeneric { scale: f64 },
    /// `T_k(z) = k T(z/k)`: identity up to `k`, `2k` from `3k` on, C¹ in between.
    TruncK { k: f64 },
    /// `b_δ(z) = δ/(δ + z)`.
    Bdelta { delta: f64 },
    /// `b(z) = z^θ`, `θ ≥ 1`.
    Power { theta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenormFunction {
    pub kind: RenormKind,
    pub growth: GrowthProfile,
}

/// `T(s)`: `s` on `[0,1]`, `1 + 2t − t²` with `t = (s−1)/2` on `[1,3]`, `2` after.
fn unit_truncation(s: f64) -> (f64, f64) {
    if s <= 1.0 {
        (s, 1.0)
    } else if s >= 3.0 {
        (2.0, 0.0)
    } else {
        let t = 0.5 * (s - 1.0);
        (1.0 + 2.0 * t - t * t, 1.0 - t)
    }
}

pub fn make_renorm(kind: RenormKind) -> Result<RenormFunction, WeakFormError> {
    let bad = |m: String| Err(WeakFormError::BadRenorm(m));
    let growth = match kind {
        RenormKind::RenGeneric { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return bad(format!("scale = {scale} must be positive"));
            }
            GrowthProfile { value: Growth::Bounded, defect: Growth::Bounded, compact_derivative: true }
        }
        RenormKind::TruncK { k } => {
            if !(k > 1.0 && k.is_finite()) {
                return bad(format!("k = {k} must exceed 1"));
            }
            GrowthProfile { value: Growth::Bounded, defect: Growth::Bounded, compact_derivative: true }
        }
        RenormKind::Bdelta { delta } => {
            if !(delta > 0.0 && delta.is_finite()) {
                return bad(format!("δ = {delta} must be positive"));
            }
            // z b' − b = −δz/(δ+z)² − δ/(δ+z) ≤ 0: its positive part is bounded.
            GrowthProfile { value: Growth::Bounded, defect: Growth::Bounded, compact_derivative: false }
        }
        RenormKind::Power { theta } => {
            if !(theta >= 1.0 && theta.is_finite()) {
                return bad(format!("θ = {theta} must be at least 1"));
            }
            let r = match Exponent::from_f64(theta) {
                Ok(Exponent::Finite(r)) => r,
                _ => return bad(format!("θ = {theta} has no rational representation")),
            };
            let defect = if theta == 1.0 { Growth::Bounded } else { Growth::Power(r) };
            GrowthProfile { value: Growth::Power(r), defect, compact_derivative: false }
        }
    };
    Ok(RenormFunction { kind, growth })
}

impl RenormFunction {
    /// `(b(z), b'(z))` for `z ≥ 0`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        match self.kind {
            RenormKind::RenGeneric { scale } => {
                let z = z.max(0.0);
                if z >= scale {
                    (1.0, 0.0)
                } else {
                    let w = 1.0 - z / scale;
                    (1.0 - w * w * w, 3.0 * w * w / scale)
                }
            }
            RenormKind::TruncK { k } => {
                if z <= k {
                    // exact identity branch
                    (z, 1.0)
                } else {
                    let (v, d) = unit_truncation(z / k);
                    (k * v, d)
                }
            }
            RenormKind::Bdelta { delta } => {
                let z = z.max(0.0);
                let den = delta + z;
                (delta / den, -delta / (den * den))
            }
            RenormKind::Power { theta } => {
                let z = z.max(0.0);
                if theta == 1.0 {
                    (z, 1.0)
                } else {
                    (z.powf(theta), theta * z.powf(theta - 1.0))
                }
            }
        }
    }

    pub fn b(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    pub fn db(&self, z: f64) -> f64 {
        self.eval(z).1
    }

    /// `z b'(z) − b(z)`.
    pub fn defect(&self, z: f64) -> f64 {
        let (b, db) = self.eval(z);
        z * db - b
    }

    pub fn label(&self) -> String {
        match self.kind {
            RenormKind::RenGeneric { scale } => format!("ren(L={scale})"),
            RenormKind::TruncK { k } => format!("T_k(k={k})"),
            RenormKind::Bdelta { delta } => format!("b_delta(δ={delta})"),
            RenormKind::Power { theta } => format!("power(θ={theta})"),
        }
    }

    /// Growth metadata, for the exponent-class checks.
    pub fn growth(&self) -> GrowthProfile {
        self.growth
    }
}

/// Exact rational form of a growth bound, for reporting.
pub fn growth_exponent(g: Growth) -> Option<Rational> {
    match g {
        Growth::Bounded => None,
        Growth::Power(r) => Some(r),
    }
}
