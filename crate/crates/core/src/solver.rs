//! First-order solvers: conservative upwind finite volumes for
//! `∂t ρ + div(ρu) = 0` and semi-Lagrangian advection for `∂t s + u·∇s = 0`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, Grid, Point, ScalarField, Trajectory, TrajectoryMeta};
use crate::velocity::{VelocityError, VelocityField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Continuity equation, conservative upwind fluxes.
    UpwindFv,
    /// Transport equation, RK2 backtrace and multilinear interpolation.
    SemiLagrangian,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::UpwindFv => "upwind_fv",
            Scheme::SemiLagrangian => "semi_lagrangian",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("CFL number {0} outside (0, 1]")]
    BadCfl(f64),
    #[error("time step {dt} violates the positivity bound: outflow fraction {fraction} > 1 in cell {cell}")]
    CflViolation { dt: f64, fraction: f64, cell: usize },
    #[error("invalid time step {0}")]
    BadStep(f64),
    #[error("output times must lie in (0, t_final] and increase strictly")]
    BadOutputTimes,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Velocity(#[from] VelocityError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    /// Snapshot times after `t = 0`.
    pub output_times: Vec<f64>,
}

impl SolverConfig {
    /// `outputs` equally spaced snapshot times `T·k/outputs`, `k = 1..=outputs`.
    pub fn uniform(scheme: Scheme, cfl: f64, t_final: f64, outputs: usize) -> Result<Self, SolverError> {
        let output_times =
            if t_final == 0.0 { vec![] } else { (1..=outputs).map(|k| t_final * k as f64 / outputs as f64).collect() };
        let cfg = Self { cfl, scheme, t_final, output_times };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::BadCfl(self.cfl));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(SolverError::BadStep(self.t_final));
        }
        let ok_range = self.output_times.iter().all(|&t| t > 0.0 && t <= self.t_final);
        let ok_order = self.output_times.windows(2).all(|w| w[1] > w[0]);
        if !ok_range || !ok_order {
            return Err(SolverError::BadOutputTimes);
        }
        Ok(())
    }
}

/// `Δt = cfl / max Σ_a |u_a|/h_a` over grid points and sample times, capped
/// at `T`; for a single active axis this is `cfl·h / max|u|`.
pub fn cfl_dt(u: &VelocityField, grid: &Grid, cfl: f64) -> f64 {
    let d = grid.dim();
    let mut rate: f64 = 0.0;
    for t in u.sample_times(grid.t_final) {
        for idx in 0..grid.len() {
            let c = grid.center(idx);
            let mut pts = vec![c];
            for a in 0..d {
                let mut f = c;
                f[a] -= 0.5 * grid.h[a];
                pts.push(f);
                f[a] += grid.h[a];
                pts.push(f);
            }
            for p in pts {
                let v = u.eval(t, &p);
                rate = rate.max((0..d).map(|a| v[a].abs() / grid.h[a]).sum());
            }
        }
    }
    if rate == 0.0 {
        grid.t_final
    } else {
        (cfl / rate).min(grid.t_final)
    }
}

/// Coordinate of face `j` (between cells `j−1` and `j`) along `axis`, with the
/// other coordinates taken from `center`. Computed from the face index alone so
/// both adjacent cells see bit-identical face velocities.
fn face_point(grid: &Grid, center: &Point, axis: usize, j: usize) -> Point {
    let mut x = *center;
    x[axis] = grid.domain.lower[axis] + j as f64 * grid.h[axis];
    x
}

/// One forward-Euler upwind step of the continuity equation from
/// `rho.time()` to `rho.time() + dt`. Face velocities are sampled at face
/// centers and mid-step time. On boxes, boundary faces carry zero flux for
/// zero-trace fields; otherwise outflow is upwinded and inflow brings zero
/// density.
pub fn step_continuity(rho: &ScalarField, u: &VelocityField, dt: f64) -> Result<ScalarField, SolverError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SolverError::BadStep(dt));
    }
    let grid = rho.grid().clone();
    u.check_grid(&grid)?;
    let d = grid.dim();
    let t_mid = rho.time() + 0.5 * dt;
    let periodic = grid.domain.is_periodic();
    let closed = !periodic && u.zero_trace();
    let vals = rho.values();

    let updated: Vec<Result<f64, SolverError>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let ijk = grid.multi_index(idx);
            let c = grid.center_of(ijk);
            // ρ_new = ρ (1 − Δt·outflow) + Δt·inflow: both parts are ≥ 0 under CFL.
            let mut inflow = 0.0;
            let mut outflow = 0.0;
            for a in 0..d {
                let n = grid.cells[a];
                let inv_h = 1.0 / grid.h[a];
                let left_face = ijk[a];
                let right_face = if periodic { (ijk[a] + 1) % n } else { ijk[a] + 1 };
                let a_l = u.eval(t_mid, &face_point(&grid, &c, a, left_face))[a];
                let a_r = u.eval(t_mid, &face_point(&grid, &c, a, right_face))[a];
                match grid.shift(ijk, a, -1) {
                    Some(k) => {
                        inflow += a_l.max(0.0) * vals[grid.linear_index(k)] * inv_h;
                        outflow += (-a_l).max(0.0) * inv_h;
                    }
                    None if closed => {}
                    None => outflow += (-a_l).max(0.0) * inv_h,
                }
                match grid.shift(ijk, a, 1) {
                    Some(k) => {
                        inflow += (-a_r).max(0.0) * vals[grid.linear_index(k)] * inv_h;
                        outflow += a_r.max(0.0) * inv_h;
                    }
                    None if closed => {}
                    None => outflow += a_r.max(0.0) * inv_h,
                }
            }
            let fraction = dt * outflow;
            if fraction > 1.0 + 1e-12 {
                return Err(SolverError::CflViolation { dt, fraction, cell: idx });
            }
            Ok(vals[idx] * (1.0 - fraction).max(0.0) + dt * inflow)
        })
        .collect();
    let values = updated.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let mut out = ScalarField::new(grid, values, rho.time() + dt)?;
    if rho.is_nonnegative() {
        out.mark_nonnegative()?;
    }
    Ok(out)
}

/// Result of a semi-Lagrangian step.
#[derive(Clone, Debug)]
pub struct TransportStep {
    pub field: ScalarField,
    /// Cells whose backtraced foot left a box domain; their value is the
    /// boundary extension of the interpolant.
    pub exited: usize,
}

/// One semi-Lagrangian step of the transport equation. Feet are found by the
/// midpoint rule backward in time, `y* = y − Δt/2·u(t+Δt, y)`,
/// `foot = y − Δt·u(t+Δt/2, y*)`, and the old field is interpolated there.
pub fn step_transport(s: &ScalarField, u: &VelocityField, dt: f64) -> Result<TransportStep, SolverError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SolverError::BadStep(dt));
    }
    let grid = s.grid().clone();
    u.check_grid(&grid)?;
    let d = grid.dim();
    let t_new = s.time() + dt;
    let t_mid = s.time() + 0.5 * dt;
    let dom = &grid.domain;
    let feet: Vec<(f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let y = grid.center(idx);
            let v1 = u.eval(t_new, &y);
            let mut mid = y;
            for a in 0..d {
                mid[a] -= 0.5 * dt * v1[a];
            }
            dom.wrap(&mut mid);
            let v2 = u.eval(t_mid, &mid);
            let mut foot = y;
            for a in 0..d {
                foot[a] -= dt * v2[a];
            }
            let exited = if dom.is_periodic() {
                dom.wrap(&mut foot);
                false
            } else {
                !dom.contains(&foot)
            };
            (s.interpolate(&foot), exited)
        })
        .collect();
    let exited = feet.iter().filter(|f| f.1).count();
    let mut field = ScalarField::new(grid, feet.into_iter().map(|f| f.0).collect(), t_new)?;
    if s.is_nonnegative() {
        field.mark_nonnegative()?;
    }
    Ok(TransportStep { field, exited })
}

/// A failed run: the snapshots completed before the error, and the error.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub partial: Trajectory,
    pub error: SolverError,
}

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver aborted after {} snapshot(s): {}", self.partial.len(), self.error)
    }
}

impl std::error::Error for SolveFailure {}

/// Statistics gathered while solving.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub steps: usize,
    pub dt_nominal: f64,
    pub exited_feet: usize,
}

/// Advances `initial` (taken at `t = 0`) to every output time. Steps are
/// shortened so each output time is hit exactly.
pub fn solve(initial: &ScalarField, u: &VelocityField, cfg: &SolverConfig) -> Result<Trajectory, SolveFailure> {
    solve_with_stats(initial, u, cfg).map(|(t, _)| t)
}

pub fn solve_with_stats(
    initial: &ScalarField,
    u: &VelocityField,
    cfg: &SolverConfig,
) -> Result<(Trajectory, SolveStats), SolveFailure> {
    let grid: Arc<Grid> = initial.grid().clone();
    let meta = TrajectoryMeta { scheme: cfg.scheme.name().into(), cfl: Some(cfg.cfl), velocity: u.id().into() };
    let mut traj = Trajectory::new(grid.clone(), meta);
    let fail = |traj: &Trajectory, error: SolverError| SolveFailure { partial: traj.clone(), error };
    if let Err(e) = cfg.validate().and_then(|_| u.check_grid(&grid).map_err(SolverError::from)) {
        return Err(fail(&traj, e));
    }
    let start = initial.clone().with_time(0.0);
    if let Err(e) = traj.push(start.clone()) {
        return Err(fail(&traj, e.into()));
    }
    let timing_grid = grid.with_t_final(cfg.t_final).map_err(|e| fail(&traj, e.into()))?;
    let dt_nom = cfl_dt(u, &timing_grid, cfg.cfl);
    let mut stats = SolveStats { dt_nominal: dt_nom, ..Default::default() };
    let mut current = start;
    let mut t = 0.0;
    for &target in &cfg.output_times {
        while t < target {
            let remaining = target - t;
            let last = remaining <= dt_nom * (1.0 + 1e-9);
            let dt = if last { remaining } else { dt_nom };
            let next = match cfg.scheme {
                Scheme::UpwindFv => step_continuity(&current, u, dt),
                Scheme::SemiLagrangian => step_transport(&current, u, dt).map(|s| {
                    stats.exited_feet += s.exited;
                    s.field
                }),
            };
            current = next.map_err(|e| fail(&traj, e))?;
            stats.steps += 1;
            t = if last { target } else { t + dt };
        }
        current = current.with_time(target);
        traj.push(current.clone()).map_err(|e| fail(&traj, e.into()))?;
    }
    Ok((traj, stats))
}
