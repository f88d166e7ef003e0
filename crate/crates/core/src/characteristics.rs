//! Reference solutions from the flow of `u`.
//!
//! Along `dX/dt = u(t, X)` the log-Jacobian `L(t; x) = ∫₀ᵗ div u(σ, X(σ; x)) dσ`
//! gives `ρ(t, X(t; x)) = ρ₀(x) e^{−L(t; x)}` for the continuity equation and
//! `s(t, X(t; x)) = s₀(x)` for pure transport. Values at grid points are
//! obtained by integrating characteristics backward from each cell center.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::fields::{Grid, Point, ScalarField};
use crate::profiles::Sample;
use crate::velocity::VelocityField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("output times must be finite, nonnegative and nondecreasing")]
    BadTimes,
    #[error("time {0} is not among the flow's output times")]
    MissingTime(f64),
    #[error("rk_steps must be positive")]
    NoSteps,
    #[error(transparent)]
    Velocity(#[from] crate::velocity::VelocityError),
}

/// State of one characteristic: position, accumulated `∫ div u`, and whether
/// it is still inside the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Characteristic {
    pub x: Point,
    pub log_jac: f64,
    pub inside: bool,
}

/// Classical RK4 for `(X, ℓ)` with `X' = dir·u(t₀ + dir·s, X)`,
/// `ℓ' = div u(t₀ + dir·s, X)` over `s ∈ [0, span]`, `dir = ±1`.
///
/// Positions are wrapped on periodic domains; on boxes a characteristic that
/// leaves the closure is marked outside and frozen.
pub fn integrate_characteristic(
    u: &VelocityField,
    grid: &Grid,
    start: Characteristic,
    t0: f64,
    span: f64,
    backward: bool,
    steps: usize,
) -> Characteristic {
    let dir = if backward { -1.0 } else { 1.0 };
    let d = grid.dim();
    let dom = &grid.domain;
    let mut st = start;
    if !st.inside || span == 0.0 || steps == 0 {
        return st;
    }
    let ds = span / steps as f64;
    let rhs = |s: f64, x: &Point| -> (Point, f64) {
        let t = t0 + dir * s;
        let mut v = u.eval(t, x);
        for c in v.iter_mut().take(d) {
            *c *= dir;
        }
        (v, u.div(t, x))
    };
    let offset = |x: &Point, k: &Point, a: f64| -> Point {
        let mut y = *x;
        for i in 0..d {
            y[i] += a * k[i];
        }
        y
    };
    for n in 0..steps {
        let s = n as f64 * ds;
        let (k1, l1) = rhs(s, &st.x);
        let (k2, l2) = rhs(s + 0.5 * ds, &offset(&st.x, &k1, 0.5 * ds));
        let (k3, l3) = rhs(s + 0.5 * ds, &offset(&st.x, &k2, 0.5 * ds));
        let (k4, l4) = rhs(s + ds, &offset(&st.x, &k3, ds));
        for i in 0..d {
            st.x[i] += ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        st.log_jac += ds / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        if dom.is_periodic() {
            dom.wrap(&mut st.x);
        } else if !dom.contains(&st.x) {
            st.inside = false;
            return st;
        }
    }
    st
}

/// Characteristics through every cell center, sampled at the output times.
#[derive(Clone, Debug)]
pub struct FlowMap {
    grid: Arc<Grid>,
    times: Vec<f64>,
    rk_steps: usize,
    /// `backward[k][i]`: foot point `X⁻¹(t_k; y_i)` and `L(t_k; foot)`.
    backward: Vec<Vec<Characteristic>>,
    /// `forward[k][i]`: `X(t_k; x_i)` and `L(t_k; x_i)`.
    forward: Vec<Vec<Characteristic>>,
}

fn steps_for(gap: f64, t_ref: f64, rk_steps: usize) -> usize {
    if gap <= 0.0 {
        0
    } else {
        ((rk_steps as f64 * gap / t_ref).ceil() as usize).max(1)
    }
}

/// Integrates the flow from every cell center with classical RK4.
///
/// `rk_steps` is the number of steps spent on `[0, max(times)]`; intervals
/// between output times get a proportional share (at least one step).
pub fn compute_flow(u: &VelocityField, grid: Arc<Grid>, times: &[f64], rk_steps: usize) -> Result<FlowMap, FlowError> {
    u.check_grid(&grid)?;
    if rk_steps == 0 {
        return Err(FlowError::NoSteps);
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(FlowError::BadTimes);
    }
    let t_ref = times.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let seeds: Vec<Characteristic> = grid.centers().map(|x| Characteristic { x, log_jac: 0.0, inside: true }).collect();

    // Forward: one sweep through all output times.
    let fwd_cells: Vec<Vec<Characteristic>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut out = Vec::with_capacity(times.len());
            let mut st = seed;
            let mut t = 0.0;
            for &tk in times {
                st = integrate_characteristic(u, &grid, st, t, tk - t, false, steps_for(tk - t, t_ref, rk_steps));
                t = tk;
                out.push(st);
            }
            out
        })
        .collect();

    // Backward: time-independent fields reuse one sweep of the reversed flow;
    // otherwise each output time needs its own integration from t_k down to 0.
    let bwd_cells: Vec<Vec<Characteristic>> = if u.time_independent() {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut out = Vec::with_capacity(times.len());
                let mut st = seed;
                let mut s = 0.0;
                for &tk in times {
                    st = integrate_characteristic(u, &grid, st, 0.0, tk - s, true, steps_for(tk - s, t_ref, rk_steps));
                    s = tk;
                    out.push(st);
                }
                out
            })
            .collect()
    } else {
        seeds
            .par_iter()
            .map(|&seed| {
                times
                    .iter()
                    .map(|&tk| integrate_characteristic(u, &grid, seed, tk, tk, true, steps_for(tk, t_ref, rk_steps)))
                    .collect()
            })
            .collect()
    };

    let transpose = |cells: Vec<Vec<Characteristic>>| -> Vec<Vec<Characteristic>> {
        (0..times.len()).map(|k| cells.iter().map(|c| c[k]).collect()).collect()
    };
    Ok(FlowMap { grid, times: times.to_vec(), rk_steps, backward: transpose(bwd_cells), forward: transpose(fwd_cells) })
}

impl FlowMap {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rk_steps(&self) -> usize {
        self.rk_steps
    }

    /// RK4 step length on `[0, max(times)]`.
    pub fn step_size(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) / self.rk_steps as f64
    }

    pub fn order(&self) -> usize {
        4
    }

    pub fn time_index(&self, t: f64) -> Result<usize, FlowError> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|s| (s - t).abs() <= tol).ok_or(FlowError::MissingTime(t))
    }

    /// `X(t; x_i)` and `L(t; x_i)` for every cell center `x_i`.
    pub fn forward(&self, t: f64) -> Result<&[Characteristic], FlowError> {
        Ok(&self.forward[self.time_index(t)?])
    }

    /// Foot points `X⁻¹(t; y_i)` with `L(t; foot)`, for every cell center `y_i`.
    pub fn backward(&self, t: f64) -> Result<&[Characteristic], FlowError> {
        Ok(&self.backward[self.time_index(t)?])
    }

    fn pull_back(&self, t: f64, value: impl Fn(&Characteristic) -> f64 + Sync) -> Result<ScalarField, FlowError> {
        let feet = self.backward(t)?;
        let vals: Vec<f64> = feet.par_iter().map(|c| if c.inside { value(c) } else { 0.0 }).collect();
        let mask: Vec<bool> = feet.iter().map(|c| c.inside).collect();
        let f = ScalarField::new(self.grid.clone(), vals, t).expect("one value per cell");
        Ok(f.with_mask(mask).expect("one flag per cell"))
    }
}

/// `ρ(t, y) = ρ₀(X⁻¹(t; y)) · e^{−L(t; X⁻¹(t; y))}`; escaped cells are masked.
pub fn exact_continuity(rho0: &dyn Sample, flow: &FlowMap, t: f64) -> Result<ScalarField, FlowError> {
    let mut f = flow.pull_back(t, |c| rho0.sample(&c.x) * (-c.log_jac).exp())?;
    let _ = f.mark_nonnegative();
    Ok(f)
}

/// `s(t, y) = s₀(X⁻¹(t; y))`; escaped cells are masked.
pub fn exact_transport(s0: &dyn Sample, flow: &FlowMap, t: f64) -> Result<ScalarField, FlowError> {
    let mut f = flow.pull_back(t, |c| s0.sample(&c.x))?;
    let _ = f.mark_nonnegative();
    Ok(f)
}

/// `|X(t; {ρ₀ = 0})| = ∫_{ρ₀=0} e^{L(t;x)} dx`, by midpoint quadrature over the
/// cells where the sampled `ρ₀` is exactly zero.
pub fn exact_vacuum_measure(rho0: &ScalarField, flow: &FlowMap, t: f64) -> Result<f64, FlowError> {
    let fwd = flow.forward(t)?;
    let vol = flow.grid.cell_volume();
    Ok(crate::fields::compensated_sum(
        rho0.values().iter().zip(fwd).filter(|(&r, _)| r == 0.0).map(|(_, c)| c.log_jac.exp()),
    ) * vol)
}

/// Which equation an oracle trajectory solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleEquation {
    Continuity,
    Transport,
}

/// Oracle snapshots at every flow time (the first must be 0).
pub fn oracle_trajectory(
    initial: &dyn Sample,
    flow: &FlowMap,
    equation: OracleEquation,
    velocity_id: &str,
) -> Result<crate::fields::Trajectory, FlowError> {
    let meta =
        crate::fields::TrajectoryMeta { scheme: "characteristics_rk4".into(), cfl: None, velocity: velocity_id.into() };
    let mut traj = crate::fields::Trajectory::new(flow.grid.clone(), meta);
    for &t in &flow.times {
        let snap = match equation {
            OracleEquation::Continuity => exact_continuity(initial, flow, t)?,
            OracleEquation::Transport => exact_transport(initial, flow, t)?,
        };
        traj.push(snap).map_err(|_| FlowError::BadTimes)?;
    }
    Ok(traj)
}
