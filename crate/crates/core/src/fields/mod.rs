//! Grids, sampled scalar fields, trajectories and their discrete Lebesgue /
//! Bochner norms.

mod grid;
pub mod io;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::exponents::Exponent;

pub use grid::{Domain, DomainKind, Grid, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("unsupported dimension {0} (1, 2 or 3 axes required)")]
    Dimension(usize),
    #[error("domain bounds must describe a box of positive volume")]
    DegenerateDomain,
    #[error("invalid time {0}")]
    BadTime(f64),
    #[error("periodic domains have no boundary")]
    NoBoundary,
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("field flagged nonnegative has minimum {0}")]
    Negative(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("snapshot times must start at 0 and increase strictly (got {0} after {1})")]
    TimeOrder(f64, f64),
    #[error("trajectory has no snapshots")]
    EmptyTrajectory,
    #[error("no snapshot at time {0}")]
    MissingTime(f64),
    #[error("malformed field dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] IoErrorString),
}

/// `std::io::Error` is not `Clone`; keep its message.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct IoErrorString(pub String);

impl From<std::io::Error> for FieldError {
    fn from(e: std::io::Error) -> Self {
        FieldError::Io(IoErrorString(e.to_string()))
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Cell-centered samples of a scalar on a grid at one instant.
///
/// Cells may be marked invalid (e.g. characteristics that left the domain);
/// invalid cells are skipped by every quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    time: f64,
    valid: Option<Arc<Vec<bool>>>,
    nonnegative: bool,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::Length { expected: grid.len(), got: values.len() });
        }
        if !time.is_finite() {
            return Err(FieldError::BadTime(time));
        }
        Ok(Self { grid, values, time, valid: None, nonnegative: false })
    }

    /// A field that must stay `≥ 0` (densities, vacuum indicators).
    pub fn nonnegative(grid: Arc<Grid>, values: Vec<f64>, time: f64) -> Result<Self, FieldError> {
        let mut f = Self::new(grid, values, time)?;
        f.mark_nonnegative()?;
        Ok(f)
    }

    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn(&Point) -> f64) -> Self {
        let values = grid.centers().map(|x| f(&x)).collect();
        Self { grid, values, time, valid: None, nonnegative: false }
    }

    pub fn constant(grid: Arc<Grid>, time: f64, c: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![c; n], time, valid: None, nonnegative: false }
    }

    pub fn mark_nonnegative(&mut self) -> Result<(), FieldError> {
        let m = self.min();
        if m < 0.0 {
            return Err(FieldError::Negative(m));
        }
        self.nonnegative = true;
        Ok(())
    }

    pub fn with_mask(mut self, valid: Vec<bool>) -> Result<Self, FieldError> {
        if valid.len() != self.values.len() {
            return Err(FieldError::Length { expected: self.values.len(), got: valid.len() });
        }
        self.valid = if valid.iter().all(|&v| v) { None } else { Some(Arc::new(valid)) };
        Ok(self)
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.valid.as_deref().map(|v| v.as_slice())
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid.as_ref().is_none_or(|m| m[idx])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_ref().map_or(self.values.len(), |m| m.iter().filter(|&&v| v).count())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Minimum over valid cells.
    pub fn min(&self) -> f64 {
        self.valid_values().fold(f64::INFINITY, f64::min)
    }

    /// Maximum over valid cells.
    pub fn max(&self) -> f64 {
        self.valid_values().fold(f64::NEG_INFINITY, f64::max)
    }

    fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().enumerate().filter(|(i, _)| self.is_valid(*i)).map(|(_, &v)| v)
    }

    /// Pointwise image; validity mask is kept, the nonnegativity flag is not.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
            valid: self.valid.clone(),
            nonnegative: false,
        }
    }

    /// Pointwise combination of two fields on the same grid; masks are intersected.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        let valid = match (&self.valid, &other.valid) {
            (None, None) => None,
            (Some(m), None) | (None, Some(m)) => Some(m.clone()),
            (Some(a), Some(b)) => Some(Arc::new(a.iter().zip(b.iter()).map(|(&x, &y)| x && y).collect())),
        };
        Ok(ScalarField { grid: self.grid.clone(), values, time: self.time, valid, nonnegative: false })
    }

    /// Midpoint rule for `∫_Ω f dx` with compensated summation.
    pub fn integrate(&self) -> f64 {
        compensated_sum(self.valid_values()) * self.grid.cell_volume()
    }

    /// Discrete `‖f‖_{L^r(Ω)}`; max-abs for `r = ∞`.
    pub fn lp_norm(&self, r: Exponent) -> f64 {
        match r {
            Exponent::Infinite => self.valid_values().fold(0.0, |m, v| m.max(v.abs())),
            Exponent::Finite(_) => {
                let rf = r.as_f64();
                let s = compensated_sum(self.valid_values().map(|v| v.abs().powf(rf)));
                (s * self.grid.cell_volume()).powf(1.0 / rf)
            }
        }
    }

    /// `‖f − g‖_{L^r}` over cells valid in both.
    pub fn distance(&self, other: &ScalarField, r: Exponent) -> Result<f64, FieldError> {
        Ok(self.zip_map(other, |a, b| a - b)?.lp_norm(r))
    }

    /// Multilinear interpolation between cell centers. Periodic grids wrap;
    /// on boxes the point is clamped to the hull of the cell centers, so the
    /// result is always a convex combination of stored values.
    pub fn interpolate(&self, x: &Point) -> f64 {
        let g = &*self.grid;
        let d = g.dim();
        let mut base = [0usize; 3];
        let mut w = [0.0; 3];
        let mut next = [0usize; 3];
        for a in 0..d {
            let n = g.cells[a];
            let s = (x[a] - g.domain.lower[a]) / g.h[a] - 0.5;
            if g.domain.is_periodic() {
                let i0 = s.floor();
                let frac = s - i0;
                let i0 = (i0 as i64).rem_euclid(n as i64) as usize;
                base[a] = i0;
                next[a] = (i0 + 1) % n;
                w[a] = frac;
            } else if n == 1 {
                base[a] = 0;
                next[a] = 0;
                w[a] = 0.0;
            } else {
                let s = s.clamp(0.0, (n - 1) as f64);
                let i0 = (s.floor() as usize).min(n - 2);
                base[a] = i0;
                next[a] = i0 + 1;
                w[a] = s - i0 as f64;
            }
        }
        // Successive lerps `a + w (b − a)` keep constant data exactly constant.
        let mut corners = [0.0; 8];
        for (corner, slot) in corners.iter_mut().enumerate().take(1usize << d) {
            let mut ijk = [0usize; 3];
            for a in 0..d {
                ijk[a] = if corner >> a & 1 == 1 { next[a] } else { base[a] };
            }
            *slot = self.values[g.linear_index(ijk)];
        }
        let mut len = 1usize << d;
        for a in 0..d {
            len /= 2;
            for j in 0..len {
                let (lo, hi) = (corners[2 * j], corners[2 * j + 1]);
                corners[j] = (lo + w[a] * (hi - lo)).clamp(lo.min(hi), lo.max(hi));
            }
        }
        corners[0]
    }
}

/// `∫_Ω f dx`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.integrate()
}

/// `‖f‖_{L^r(Ω)}`.
pub fn lp_norm(f: &ScalarField, r: Exponent) -> f64 {
    f.lp_norm(r)
}

/// Provenance of a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub scheme: String,
    pub cfl: Option<f64>,
    pub velocity: String,
}

/// Time-stamped snapshots on a single grid, starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: Arc<Grid>,
    snapshots: Vec<ScalarField>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(grid: Arc<Grid>, meta: TrajectoryMeta) -> Self {
        Self { grid, snapshots: Vec::new(), meta }
    }

    pub fn from_snapshots(
        grid: Arc<Grid>,
        snapshots: Vec<ScalarField>,
        meta: TrajectoryMeta,
    ) -> Result<Self, FieldError> {
        let mut t = Self::new(grid, meta);
        for s in snapshots {
            t.push(s)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, field: ScalarField) -> Result<(), FieldError> {
        if *field.grid() != self.grid {
            return Err(FieldError::GridMismatch);
        }
        match self.snapshots.last() {
            None if field.time() != 0.0 => return Err(FieldError::TimeOrder(field.time(), 0.0)),
            Some(last) if field.time() <= last.time() => return Err(FieldError::TimeOrder(field.time(), last.time())),
            _ => {}
        }
        self.snapshots.push(field);
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn snapshots(&self) -> &[ScalarField] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn first(&self) -> Option<&ScalarField> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&ScalarField> {
        self.snapshots.last()
    }

    /// Snapshot whose time matches `t` to within `1e-12·max(1,t)`.
    pub fn at_time(&self, t: f64) -> Result<&ScalarField, FieldError> {
        self.index_of_time(t).map(|i| &self.snapshots[i])
    }

    pub fn index_of_time(&self, t: f64) -> Result<usize, FieldError> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.snapshots.iter().position(|s| (s.time() - t).abs() <= tol).ok_or(FieldError::MissingTime(t))
    }

    /// Pointwise image of every snapshot.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Trajectory {
        Trajectory {
            grid: self.grid.clone(),
            snapshots: self.snapshots.iter().map(|s| s.map(f)).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Snapshot-wise combination of two trajectories with identical times.
    pub fn zip_map(&self, other: &Trajectory, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Trajectory, FieldError> {
        if self.grid != other.grid || self.len() != other.len() {
            return Err(FieldError::GridMismatch);
        }
        let mut snaps = Vec::with_capacity(self.len());
        for (a, b) in self.snapshots.iter().zip(&other.snapshots) {
            if (a.time() - b.time()).abs() > 1e-12 * a.time().abs().max(1.0) {
                return Err(FieldError::MissingTime(b.time()));
            }
            snaps.push(a.zip_map(b, f)?);
        }
        Ok(Trajectory { grid: self.grid.clone(), snapshots: snaps, meta: self.meta.clone() })
    }
}

/// Trapezoid rule for samples `(t_i, y_i)`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    compensated_sum(times.windows(2).zip(values.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])))
}

/// Discrete `‖f‖_{L^p(0,T; L^r(Ω))}`: `lp_norm` per snapshot, trapezoid in time,
/// maximum over snapshots when `p = ∞`. A single snapshot is treated as
/// constant over `[0, T]` of the grid.
pub fn bochner_norm(traj: &Trajectory, p: Exponent, r: Exponent) -> Result<f64, FieldError> {
    if traj.is_empty() {
        return Err(FieldError::EmptyTrajectory);
    }
    let norms: Vec<f64> = traj.snapshots().iter().map(|s| s.lp_norm(r)).collect();
    Ok(match p {
        Exponent::Infinite => norms.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(_) => {
            let pf = p.as_f64();
            let powered: Vec<f64> = norms.iter().map(|n| n.powf(pf)).collect();
            let integral =
                if traj.len() == 1 { powered[0] * traj.grid().t_final } else { trapezoid(&traj.times(), &powered) };
            integral.powf(1.0 / pf)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn line(n: usize, lo: f64, hi: f64) -> Arc<Grid> {
        Arc::new(Grid::uniform(Domain::new(DomainKind::LipschitzBox, vec![lo], vec![hi]).unwrap(), n, 1.0).unwrap())
    }

    #[test]
    fn integrate_examples() {
        let g = Arc::new(Grid::uniform(Domain::unit(DomainKind::PeriodicBox, 2).unwrap(), 16, 1.0).unwrap());
        assert!((ScalarField::constant(g.clone(), 0.0, 1.0).integrate() - 1.0).abs() < 1e-15);
        assert_eq!(ScalarField::constant(g, 0.0, 0.0).integrate(), 0.0);
        // ∫_0^1 sin²(πx) dx = 1/2
        let f = ScalarField::from_fn(line(256, 0.0, 1.0), 0.0, |x| (PI * x[0]).sin().powi(2));
        assert!((f.integrate() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn lp_norm_examples() {
        let g = line(256, 0.0, 2.0);
        let c = ScalarField::constant(g.clone(), 0.0, -3.0);
        assert!((c.lp_norm(Exponent::int(2)) - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.lp_norm(Exponent::INF), 3.0);
        // ‖x‖_{L²(0,1)} = 1/√3
        let f = ScalarField::from_fn(line(256, 0.0, 1.0), 0.0, |x| x[0]);
        assert!((f.lp_norm(Exponent::int(2)) - 1.0 / 3f64.sqrt()).abs() < 1e-4);
        assert!((f.lp_norm(Exponent::INF) - (1.0 - 0.5 / 256.0)).abs() < 1e-15);
    }

    #[test]
    fn masked_cells_are_skipped() {
        let g = line(4, 0.0, 1.0);
        let f = ScalarField::constant(g, 0.0, 1.0).with_mask(vec![true, false, true, false]).unwrap();
        assert!((f.integrate() - 0.5).abs() < 1e-15);
        assert_eq!(f.valid_count(), 2);
    }

    #[test]
    fn nonnegative_flag_is_enforced() {
        let g = line(2, 0.0, 1.0);
        assert!(matches!(ScalarField::nonnegative(g.clone(), vec![0.0, -1e-3], 0.0), Err(FieldError::Negative(_))));
        assert!(ScalarField::nonnegative(g, vec![0.0, 2.0], 0.0).is_ok());
    }

    #[test]
    fn trajectory_ordering() {
        let g = line(4, 0.0, 1.0);
        let mut t = Trajectory::new(g.clone(), TrajectoryMeta::default());
        assert!(t.push(ScalarField::constant(g.clone(), 0.5, 1.0)).is_err());
        t.push(ScalarField::constant(g.clone(), 0.0, 1.0)).unwrap();
        t.push(ScalarField::constant(g.clone(), 0.5, 1.0)).unwrap();
        assert!(t.push(ScalarField::constant(g.clone(), 0.5, 1.0)).is_err());
        let other = line(8, 0.0, 1.0);
        assert!(matches!(t.push(ScalarField::constant(other, 0.7, 1.0)), Err(FieldError::GridMismatch)));
    }

    #[test]
    fn bochner_examples() {
        let g = Arc::new(Grid::uniform(Domain::unit(DomainKind::PeriodicBox, 1).unwrap(), 64, 2.0).unwrap());
        let times: Vec<f64> = (0..=100).map(|k| 2.0 * k as f64 / 100.0).collect();
        let snaps: Vec<_> = times.iter().map(|&t| ScalarField::constant(g.clone(), t, 3.0)).collect();
        let traj = Trajectory::from_snapshots(g.clone(), snaps, TrajectoryMeta::default()).unwrap();
        let two = Exponent::int(2);
        assert!((bochner_norm(&traj, two, two).unwrap() - 2f64.sqrt() * 3.0).abs() < 1e-12);
        assert_eq!(bochner_norm(&traj, Exponent::INF, two).unwrap(), 3.0);

        // f(t,x) = t on (0,1)×(0,1): ‖f‖_{L²L²} = 1/√3
        let g1 = Arc::new(Grid::uniform(Domain::unit(DomainKind::PeriodicBox, 1).unwrap(), 64, 1.0).unwrap());
        let snaps: Vec<_> = (0..=100)
            .map(|k| {
                let t = k as f64 / 100.0;
                ScalarField::constant(g1.clone(), t, t)
            })
            .collect();
        let traj = Trajectory::from_snapshots(g1, snaps, TrajectoryMeta::default()).unwrap();
        assert!((bochner_norm(&traj, two, two).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn interpolation_reproduces_affine_data() {
        let g = Arc::new(Grid::new(Domain::unit(DomainKind::LipschitzBox, 2).unwrap(), vec![8, 6], 1.0).unwrap());
        let f = ScalarField::from_fn(g.clone(), 0.0, |x| 2.0 * x[0] - x[1] + 0.5);
        for x in [[0.3, 0.41, 0.0], [0.5, 0.5, 0.0], [0.0625, 0.7, 0.0]] {
            assert!((f.interpolate(&x) - (2.0 * x[0] - x[1] + 0.5)).abs() < 1e-14);
        }
        for i in 0..g.len() {
            assert!((f.interpolate(&g.center(i)) - f.values()[i]).abs() < 1e-14);
        }
        let p = Arc::new(Grid::uniform(Domain::unit(DomainKind::PeriodicBox, 1).unwrap(), 4, 1.0).unwrap());
        let f = ScalarField::new(p, vec![0.0, 1.0, 2.0, 3.0], 0.0).unwrap();
        assert!((f.interpolate(&[0.0, 0.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((f.interpolate(&[1.125, 0.0, 0.0]) - 0.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn interpolation_is_convex(vals in proptest::collection::vec(-5.0..5.0f64, 16), x in -0.2..1.2f64, y in -0.2..1.2f64) {
            for kind in [DomainKind::LipschitzBox, DomainKind::PeriodicBox] {
                let g = Arc::new(Grid::uniform(Domain::unit(kind, 2).unwrap(), 4, 1.0).unwrap());
                let f = ScalarField::new(g, vals.clone(), 0.0).unwrap();
                let v = f.interpolate(&[x, y, 0.0]);
                prop_assert!(v >= f.min() - 1e-12 && v <= f.max() + 1e-12);
            }
        }

        #[test]
        fn integrate_is_additive(vals in proptest::collection::vec(-1e3..1e3f64, 64), other in proptest::collection::vec(-1e3..1e3f64, 64)) {
            let g = line(64, 0.0, 1.0);
            let f = ScalarField::new(g.clone(), vals, 0.0).unwrap();
            let h = ScalarField::new(g, other, 0.0).unwrap();
            let sum = f.zip_map(&h, |a, b| a + b).unwrap();
            let lhs = sum.integrate();
            let rhs = f.integrate() + h.integrate();
            let scale = f.lp_norm(Exponent::ONE) + h.lp_norm(Exponent::ONE) + 1e-300;
            prop_assert!((lhs - rhs).abs() / scale < 1e-13);
        }

        #[test]
        fn lp_norm_is_homogeneous(vals in proptest::collection::vec(-10.0..10.0f64, 32), c in -5.0..5.0f64) {
            let g = line(32, 0.0, 1.0);
            let f = ScalarField::new(g, vals, 0.0).unwrap();
            for r in [Exponent::ONE, Exponent::int(2), Exponent::ratio(7, 2), Exponent::INF] {
                let lhs = f.map(|v| c * v).lp_norm(r);
                let rhs = c.abs() * f.lp_norm(r);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 1e-300);
            }
        }
    }
}
