//! Vacuum sets `{ρ = 0}`: indicator fields, their measure over time, the
//! inclusion of one vacuum set in another, the conserved integral `∫ s_ρ R`,
//! products `ρ·s`, and the `b_δ → s_ρ` limit.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{compensated_sum, FieldError, ScalarField, Trajectory};
use crate::refinement::loglog_slope;
use crate::velocity::VelocityField;
use crate::weak_forms::{
    make_renorm, residual, Notion, Problem, RenormFunction, RenormKind, TestFunction, WeakFormError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VacuumError {
    #[error("vacuum threshold must be a nonnegative number, got {0}")]
    BadThreshold(f64),
    #[error("δ values must be positive and strictly decreasing")]
    BadDeltas,
    #[error("trajectory has no snapshots")]
    EmptyTrajectory,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    WeakForm(#[from] WeakFormError),
}

fn check_threshold(threshold: f64) -> Result<(), VacuumError> {
    if threshold >= 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(VacuumError::BadThreshold(threshold))
    }
}

fn is_vacuum(v: f64, threshold: f64) -> bool {
    v <= threshold
}

/// `s_ρ`: `1` where `ρ ≤ threshold`, `0` elsewhere. With threshold `0` this is
/// the exact-zero test. Masked cells stay masked.
pub fn vacuum_indicator(rho: &ScalarField, threshold: f64) -> Result<ScalarField, VacuumError> {
    check_threshold(threshold)?;
    Ok(rho.map(|v| if is_vacuum(v, threshold) { 1.0 } else { 0.0 }))
}

/// `|{ρ ≤ threshold}|` over valid cells.
pub fn vacuum_measure(rho: &ScalarField, threshold: f64) -> Result<f64, VacuumError> {
    check_threshold(threshold)?;
    let vol = rho.grid().cell_volume();
    let count = (0..rho.len()).filter(|&i| rho.is_valid(i) && is_vacuum(rho.values()[i], threshold)).count();
    Ok(count as f64 * vol)
}

/// Cells of the vacuum set with a non-vacuum neighbour along some axis.
fn interface_cells(rho: &ScalarField, threshold: f64) -> usize {
    let grid = rho.grid();
    let vals = rho.values();
    (0..grid.len())
        .filter(|&i| {
            if !rho.is_valid(i) || !is_vacuum(vals[i], threshold) {
                return false;
            }
            let ijk = grid.multi_index(i);
            (0..grid.dim()).any(|a| {
                [-1isize, 1].iter().any(|&o| {
                    grid.shift(ijk, a, o).is_some_and(|n| {
                        let j = grid.linear_index(n);
                        rho.is_valid(j) && !is_vacuum(vals[j], threshold)
                    })
                })
            })
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusRow {
    /// Number of output steps spanned.
    pub stride: usize,
    pub gap: f64,
    /// `max_t |V(t + gap) − V(t)|`.
    pub max_jump: f64,
    /// Jump well above the one-cell-per-interface measurement resolution.
    pub resolved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureSeries {
    pub threshold: f64,
    pub times: Vec<f64>,
    pub measures: Vec<f64>,
    /// Largest possible change of a measurement from interface cells alone:
    /// cell volume times the largest interface cell count over time.
    pub resolution: f64,
    pub modulus: Vec<ModulusRow>,
    /// Log-log slope of the modulus over the smallest resolved gaps.
    pub fitted_exponent: Option<f64>,
    /// The modulus is either below resolution at every gap or fits a positive exponent.
    pub continuous: bool,
}

/// Resolved gaps must exceed the interface resolution by this factor.
pub const RESOLVED_FACTOR: f64 = 4.0;
/// Number of smallest resolved gaps used for the exponent fit.
pub const FIT_GAPS: usize = 4;

/// Vacuum measure at every output time, and the modulus of continuity over
/// gaps of 1, 2, 4, ... output steps. Output times are assumed uniform; the
/// gap of a stride is its mean time span.
pub fn vacuum_measure_series(traj: &Trajectory, threshold: f64) -> Result<MeasureSeries, VacuumError> {
    check_threshold(threshold)?;
    if traj.is_empty() {
        return Err(VacuumError::EmptyTrajectory);
    }
    let snaps = traj.snapshots();
    let measures: Vec<f64> = snaps.par_iter().map(|s| vacuum_measure(s, threshold)).collect::<Result<_, _>>()?;
    let times = traj.times();
    let vol = traj.grid().cell_volume();
    let resolution = snaps.par_iter().map(|s| interface_cells(s, threshold)).max().unwrap_or(0) as f64 * vol;
    let mut modulus = Vec::new();
    let mut stride = 1;
    while stride < times.len() {
        let pairs = times.len() - stride;
        let gap = (0..pairs).map(|i| times[i + stride] - times[i]).sum::<f64>() / pairs as f64;
        let max_jump = (0..pairs).map(|i| (measures[i + stride] - measures[i]).abs()).fold(0.0, f64::max);
        let resolved = max_jump > RESOLVED_FACTOR * resolution.max(vol);
        modulus.push(ModulusRow { stride, gap, max_jump, resolved });
        stride *= 2;
    }
    let fit: Vec<&ModulusRow> = modulus.iter().filter(|r| r.resolved).take(FIT_GAPS).collect();
    let fitted_exponent = if fit.len() >= 2 {
        let xs: Vec<f64> = fit.iter().map(|r| r.gap).collect();
        let ys: Vec<f64> = fit.iter().map(|r| r.max_jump).collect();
        Some(loglog_slope(&xs, &ys))
    } else {
        None
    };
    let continuous = match fitted_exponent {
        Some(s) => s > 0.0,
        None => modulus.iter().all(|r| !r.resolved),
    };
    Ok(MeasureSeries { threshold, times, measures, resolution, modulus, fitted_exponent, continuous })
}

fn check_pair(a: &Trajectory, b: &Trajectory) -> Result<(), VacuumError> {
    if a.grid() != b.grid() || a.len() != b.len() {
        return Err(FieldError::GridMismatch.into());
    }
    for (x, y) in a.snapshots().iter().zip(b.snapshots()) {
        if (x.time() - y.time()).abs() > 1e-12 * x.time().abs().max(1.0) {
            return Err(FieldError::MissingTime(y.time()).into());
        }
    }
    if a.is_empty() {
        return Err(VacuumError::EmptyTrajectory);
    }
    Ok(())
}

/// `(t, |{ρ(t) ≤ thr} ∩ {R(t) > thr}|)` per output time.
pub fn inclusion_defect(rho: &Trajectory, r: &Trajectory, threshold: f64) -> Result<Vec<(f64, f64)>, VacuumError> {
    check_threshold(threshold)?;
    check_pair(rho, r)?;
    let vol = rho.grid().cell_volume();
    Ok(rho
        .snapshots()
        .par_iter()
        .zip(r.snapshots())
        .map(|(a, b)| {
            let n = (0..a.len())
                .filter(|&i| {
                    a.is_valid(i)
                        && b.is_valid(i)
                        && is_vacuum(a.values()[i], threshold)
                        && !is_vacuum(b.values()[i], threshold)
                })
                .count();
            (a.time(), n as f64 * vol)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductSeries {
    pub times: Vec<f64>,
    /// `I(t) = ∫ s_ρ(t) R(t) dx`.
    pub values: Vec<f64>,
    /// `∫ s_ρ(0) R(t) dx`, for diagnostics.
    pub values_initial_indicator: Vec<f64>,
    /// `max_t |I(t) − I(0)|`.
    pub max_deviation: f64,
}

fn indicator_integral(indicator_of: &ScalarField, weight: &ScalarField, threshold: f64) -> f64 {
    let vol = weight.grid().cell_volume();
    compensated_sum(
        (0..weight.len())
            .filter(|&i| {
                indicator_of.is_valid(i) && weight.is_valid(i) && is_vacuum(indicator_of.values()[i], threshold)
            })
            .map(|i| weight.values()[i]),
    ) * vol
}

/// The integral of `R` over the vacuum set of `ρ`, at every output time.
pub fn conserved_product_deviation(
    rho: &Trajectory,
    r: &Trajectory,
    threshold: f64,
) -> Result<ProductSeries, VacuumError> {
    check_threshold(threshold)?;
    check_pair(rho, r)?;
    let rho0 = &rho.snapshots()[0];
    let (values, values_initial_indicator): (Vec<f64>, Vec<f64>) = rho
        .snapshots()
        .par_iter()
        .zip(r.snapshots())
        .map(|(a, b)| (indicator_integral(a, b, threshold), indicator_integral(rho0, b, threshold)))
        .unzip();
    let max_deviation = values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max);
    Ok(ProductSeries { times: rho.times(), values, values_initial_indicator, max_deviation })
}

/// Continuity residual of the pointwise product `ρ·s`, for any notion (with
/// `b` for the renormalized ones).
#[allow(clippy::too_many_arguments)]
pub fn product_residual(
    rho: &Trajectory,
    s: &Trajectory,
    u: &VelocityField,
    notion: Notion,
    b: Option<&RenormFunction>,
    phi: &TestFunction,
    tau: f64,
) -> Result<f64, VacuumError> {
    check_pair(rho, s)?;
    let prod = rho.zip_map(s, |a, b| a * b)?;
    Ok(residual(Problem::Continuity, notion, &prod, u, b, phi, tau)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BdeltaRow {
    pub delta: f64,
    /// `‖b_δ(ρ) − s_ρ‖_{L¹}`.
    pub gap: f64,
    /// `δ/(δ + m)·|Ω|` with `m` the smallest non-vacuum value, when the vacuum
    /// set is exact (threshold 0).
    pub bound: Option<f64>,
}

/// `L¹` distance between `b_δ(ρ)` and the vacuum indicator for each δ.
pub fn bdelta_limit_error(rho: &ScalarField, deltas: &[f64], threshold: f64) -> Result<Vec<BdeltaRow>, VacuumError> {
    check_threshold(threshold)?;
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VacuumError::BadDeltas);
    }
    let vol = rho.grid().cell_volume();
    let valid: Vec<usize> = (0..rho.len()).filter(|&i| rho.is_valid(i)).collect();
    let m = valid.iter().map(|&i| rho.values()[i]).filter(|v| !is_vacuum(*v, threshold)).fold(f64::INFINITY, f64::min);
    let omega = valid.len() as f64 * vol;
    deltas
        .iter()
        .map(|&delta| {
            let b = make_renorm(RenormKind::Bdelta { delta })?;
            let gap = compensated_sum(valid.iter().map(|&i| {
                let v = rho.values()[i];
                let s = if is_vacuum(v, threshold) { 1.0 } else { 0.0 };
                (b.b(v) - s).abs()
            })) * vol;
            let bound = (threshold == 0.0 && m.is_finite()).then(|| delta / (delta + m) * omega);
            Ok(BdeltaRow { delta, gap, bound })
        })
        .collect()
}

/// Everything measured about one `(ρ, R)` pair, for JSON export.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VacuumReport {
    pub threshold: f64,
    pub measure_series: Vec<(f64, f64)>,
    pub modulus: Vec<ModulusRow>,
    pub modulus_exponent: Option<f64>,
    pub measure_resolution: f64,
    pub inclusion_defects: Option<Vec<(f64, f64)>>,
    pub product_integral_series: Option<Vec<(f64, f64)>>,
    pub product_integral_initial_indicator: Option<Vec<(f64, f64)>>,
    pub max_product_deviation: Option<f64>,
    pub flags: Vec<(String, bool)>,
}

/// Builds a report for `ρ` and, if given, a companion continuity solution `R`.
/// Flags: `measure_continuous`, and with `R` present `inclusion_holds`
/// (largest defect at most `inclusion_tol`) and `product_conserved`
/// (deviation at most `product_tol`).
pub fn vacuum_report(
    rho: &Trajectory,
    r: Option<&Trajectory>,
    threshold: f64,
    inclusion_tol: f64,
    product_tol: f64,
) -> Result<VacuumReport, VacuumError> {
    let series = vacuum_measure_series(rho, threshold)?;
    let mut flags = vec![("measure_continuous".to_string(), series.continuous)];
    let (mut inc, mut prod, mut prod0, mut dev) = (None, None, None, None);
    if let Some(r) = r {
        let d = inclusion_defect(rho, r, threshold)?;
        let worst = d.iter().map(|p| p.1).fold(0.0, f64::max);
        flags.push(("inclusion_holds".into(), worst <= inclusion_tol));
        inc = Some(d);
        let p = conserved_product_deviation(rho, r, threshold)?;
        flags.push(("product_conserved".into(), p.max_deviation <= product_tol));
        prod = Some(p.times.iter().copied().zip(p.values.iter().copied()).collect());
        prod0 = Some(p.times.iter().copied().zip(p.values_initial_indicator.iter().copied()).collect());
        dev = Some(p.max_deviation);
    }
    Ok(VacuumReport {
        threshold,
        measure_series: series.times.iter().copied().zip(series.measures.iter().copied()).collect(),
        modulus: series.modulus,
        modulus_exponent: series.fitted_exponent,
        measure_resolution: series.resolution,
        inclusion_defects: inc,
        product_integral_series: prod,
        product_integral_initial_indicator: prod0,
        max_product_deviation: dev,
        flags,
    })
}

impl VacuumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `t,measure[,inclusion_defect,product,product_initial_indicator]` rows.
    pub fn series_csv(&self) -> String {
        let with_r = self.inclusion_defects.is_some();
        let mut s = String::from(if with_r {
            "t,measure,inclusion_defect,product,product_initial_indicator\n"
        } else {
            "t,measure\n"
        });
        for (k, (t, m)) in self.measure_series.iter().enumerate() {
            s.push_str(&format!("{t:.17e},{m:.17e}"));
            if let (Some(i), Some(p), Some(p0)) =
                (&self.inclusion_defects, &self.product_integral_series, &self.product_integral_initial_indicator)
            {
                s.push_str(&format!(",{:.17e},{:.17e},{:.17e}", i[k].1, p[k].1, p0[k].1));
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain, DomainKind, Grid, TrajectoryMeta};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid1(n: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(Domain::new(DomainKind::LipschitzBox, vec![0.0], vec![1.0]).unwrap(), n, 1.0).unwrap())
    }

    fn traj(fields: Vec<ScalarField>) -> Trajectory {
        let g = fields[0].grid().clone();
        Trajectory::from_snapshots(g, fields, TrajectoryMeta::default()).unwrap()
    }

    #[test]
    fn indicator_examples() {
        let g = grid1(10);
        let one = ScalarField::constant(g.clone(), 0.0, 1.0);
        assert_eq!(vacuum_measure(&one, 0.0).unwrap(), 0.0);
        let holed = ScalarField::from_fn(g.clone(), 0.0, |x| if (x[0] - 0.5).abs() < 0.2 { 0.0 } else { 2.0 });
        let s = vacuum_indicator(&holed, 0.0).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((s.integrate() - vacuum_measure(&holed, 0.0).unwrap()).abs() < 1e-15);
        // thresholding an indicator at 1/2 gives its complement
        let c = vacuum_indicator(&s, 0.5).unwrap();
        assert!(c.values().iter().zip(s.values()).all(|(a, b)| a + b == 1.0));
        assert!(vacuum_indicator(&holed, -1.0).is_err());
    }

    #[test]
    fn series_of_linearly_growing_hole() {
        let g = grid1(200);
        let snaps: Vec<ScalarField> = (0..=16)
            .map(|k| {
                let t = k as f64 / 16.0;
                let w = 0.1 + 0.3 * t;
                ScalarField::from_fn(g.clone(), t, move |x| if (x[0] - 0.5).abs() < w { 0.0 } else { 1.0 })
            })
            .collect();
        let s = vacuum_measure_series(&traj(snaps), 0.0).unwrap();
        assert_eq!(s.measures.len(), 17);
        assert!((s.resolution - 2.0 / 200.0).abs() < 1e-15);
        let e = s.fitted_exponent.unwrap();
        assert!((e - 1.0).abs() < 0.05, "{e}");
        assert!(s.continuous);
    }

    #[test]
    fn constant_series_has_no_resolved_gap() {
        let g = grid1(50);
        let f = ScalarField::from_fn(g.clone(), 0.0, |x| if x[0] < 0.3 { 0.0 } else { 1.0 });
        let s = vacuum_measure_series(&traj(vec![f.clone(), f.clone().with_time(0.5), f.with_time(1.0)]), 0.0).unwrap();
        assert!(s.fitted_exponent.is_none() && s.continuous);
        assert!(s.modulus.iter().all(|r| r.max_jump == 0.0));
    }

    #[test]
    fn inclusion_and_product() {
        let g = grid1(20);
        let rho = traj(vec![
            ScalarField::from_fn(g.clone(), 0.0, |x| if x[0] < 0.25 { 0.0 } else { 1.0 }),
            ScalarField::from_fn(g.clone(), 1.0, |x| if x[0] < 0.5 { 0.0 } else { 1.0 }),
        ]);
        assert!(inclusion_defect(&rho, &rho, 0.0).unwrap().iter().all(|p| p.1 == 0.0));
        let r = traj(vec![ScalarField::constant(g.clone(), 0.0, 2.0), ScalarField::constant(g.clone(), 1.0, 1.0)]);
        let d = inclusion_defect(&rho, &r, 0.0).unwrap();
        assert!((d[1].1 - 0.5).abs() < 1e-15);
        let p = conserved_product_deviation(&rho, &r, 0.0).unwrap();
        // I(0) = 2·0.25, I(1) = 1·0.5
        assert!((p.values[0] - 0.5).abs() < 1e-15 && (p.values[1] - 0.5).abs() < 1e-15);
        assert!(p.max_deviation < 1e-15);
        assert!((p.values_initial_indicator[1] - 0.25).abs() < 1e-15);
        let short = traj(vec![ScalarField::constant(g, 0.0, 1.0)]);
        assert!(inclusion_defect(&rho, &short, 0.0).is_err());
    }

    #[test]
    fn bdelta_two_valued_closed_form() {
        let g = grid1(64);
        let rho = ScalarField::from_fn(g, 0.0, |x| if x[0] < 0.375 { 0.0 } else { 1.0 });
        let rows = bdelta_limit_error(&rho, &[0.1, 0.01, 1e-4], 0.0).unwrap();
        for r in &rows {
            let exact = r.delta / (r.delta + 1.0) * 0.625;
            assert!((r.gap - exact).abs() < 1e-12);
            assert!(r.gap <= r.bound.unwrap() + 1e-15);
        }
        assert!(bdelta_limit_error(&rho, &[0.1, 0.2], 0.0).is_err());
        assert!(bdelta_limit_error(&rho, &[], 0.0).is_err());
    }

    #[test]
    fn report_json_round_trip_fields() {
        let g = grid1(8);
        let rho = traj(vec![ScalarField::constant(g.clone(), 0.0, 1.0), ScalarField::constant(g.clone(), 1.0, 1.0)]);
        let rep = vacuum_report(&rho, Some(&rho), 0.0, 0.0, 0.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["measure_series"][1][1], 0.0);
        assert_eq!(rep.series_csv().lines().count(), 3);
        assert!(rep.flags.iter().all(|f| f.1));
    }

    proptest! {
        #[test]
        fn raising_threshold_grows_vacuum(vals in prop::collection::vec(0.0..1.0f64, 16), a in 0.0..0.5f64, b in 0.0..0.5f64) {
            let g = grid1(16);
            let f = ScalarField::new(g, vals, 0.0).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let s_lo = vacuum_indicator(&f, lo).unwrap();
            let s_hi = vacuum_indicator(&f, hi).unwrap();
            prop_assert!(s_lo.values().iter().zip(s_hi.values()).all(|(x, y)| x <= y));
            let m = vacuum_measure(&f, hi).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
        }

        #[test]
        fn bdelta_gaps_decrease(vals in prop::collection::vec(0.0..3.0f64, 12)) {
            let g = grid1(12);
            let f = ScalarField::new(g, vals, 0.0).unwrap();
            let rows = bdelta_limit_error(&f, &[1.0, 0.1, 0.01, 0.001], 0.0).unwrap();
            prop_assert!(rows.windows(2).all(|w| w[1].gap <= w[0].gap));
        }
    }
}
