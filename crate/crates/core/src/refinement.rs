//! Helpers for grid-refinement studies.

use serde::Serialize;

/// A quantity that "halves" under refinement may shrink by at most this
/// factor per level: `1/2` with a 30% allowance.
pub const HALVING_RATIO: f64 = 0.65;

/// Per-level verdict of a refinement sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalvingCheck {
    /// `|v_{k+1}| / |v_k|` for consecutive levels.
    pub ratios: Vec<f64>,
    pub floor: f64,
    pub pass: bool,
}

/// Checks that `|v|` shrinks by at least [`HALVING_RATIO`] per level. A level
/// whose value is already below `floor` passes regardless of the ratio.
pub fn halving_check(values: &[f64], floor: f64) -> HalvingCheck {
    let ratios: Vec<f64> = values.windows(2).map(|w| w[1].abs() / w[0].abs()).collect();
    let pass =
        values.len() >= 2 && values.windows(2).all(|w| w[1].abs() <= floor || w[1].abs() <= HALVING_RATIO * w[0].abs());
    HalvingCheck { ratios, floor, pass }
}

/// `log(e_k/e_{k+1}) / log(h_k/h_{k+1})` for consecutive levels.
pub fn empirical_orders(hs: &[f64], errors: &[f64]) -> Vec<f64> {
    hs.windows(2).zip(errors.windows(2)).map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

/// Least-squares slope of `log y` against `log x`, ignoring nonpositive entries.
/// `NaN` if fewer than two points remain.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
