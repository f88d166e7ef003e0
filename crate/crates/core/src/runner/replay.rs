//! Time-shift replay: cover `[0, T]` by windows of length `τ` and restart a
//! shifted copy of `R` at each window start. Valid only for time-independent
//! velocities, where every time shift of a solution is again a solution.

use serde::Serialize;

use super::pipeline::compute_trajectories;
use super::{ConfigError, RunError, Scenario};
use crate::fields::{ScalarField, Trajectory};
use crate::vacuum::{conserved_product_deviation, inclusion_defect};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplaySegment {
    pub start: f64,
    pub end: f64,
    /// `max_t |I(t) − I(start)|` with `R̃(t) = R(t − start + τ − t0)`.
    pub max_product_deviation: f64,
    pub max_inclusion_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub t0: f64,
    pub tau: f64,
    pub threshold: f64,
    pub segments: Vec<ReplaySegment>,
    /// Sum of the segment deviations.
    pub stitched_deviation: f64,
    pub max_segment_deviation: f64,
    pub max_inclusion_defect: f64,
}

fn lattice_steps(t: f64, dt: f64, what: &str) -> Result<usize, ConfigError> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * dt.max(t) {
        return Err(ConfigError::at(what, format!("{t} is not a multiple of the output spacing {dt}")));
    }
    Ok(k as usize)
}

/// Moves `f` onto the base grid at time `t`.
fn rebase(f: &ScalarField, like: &ScalarField, t: f64) -> Result<ScalarField, RunError> {
    let err = |e: crate::fields::FieldError| RunError::Analysis(e.to_string());
    let mut out = ScalarField::new(like.grid().clone(), f.values().to_vec(), t).map_err(err)?;
    if let Some(m) = f.mask() {
        out = out.with_mask(m.to_vec()).map_err(err)?;
    }
    if f.is_nonnegative() {
        out.mark_nonnegative().map_err(err)?;
    }
    Ok(out)
}

/// Replays the conserved product and the inclusion defect over `[0, T]` in
/// windows of length `tau`, with `R` shifted by `tau − t0`.
pub fn time_shift_replay(s: &Scenario, t0: f64, tau: f64, threshold: f64) -> Result<ReplayReport, RunError> {
    let u = s.build_velocity()?;
    if !u.time_independent() {
        return Err(ConfigError::at(
            "analysis.time_shift_replay",
            format!("velocity `{}` is time dependent; the time shift needs a time-independent field", u.id()),
        )
        .into());
    }
    if s.initial.r.is_none() {
        return Err(ConfigError::at("initial.R", "time-shift replay needs R").into());
    }
    if !(t0 > 0.0 && t0 <= tau) {
        return Err(ConfigError::at("analysis.time_shift_replay", "need 0 < t0 <= tau").into());
    }
    let t_final = s.grid.t_final;
    let outputs = s.solver.outputs;
    let dt = t_final / outputs as f64;
    let window = lattice_steps(tau, dt, "analysis.time_shift_replay.tau")?.min(outputs);
    let shift = lattice_steps(tau - t0, dt, "analysis.time_shift_replay.t0")?;
    if window == 0 {
        return Err(ConfigError::at("analysis.time_shift_replay.tau", "tau is shorter than one output step").into());
    }

    let grid = s.build_grid()?;
    let (base, _) = compute_trajectories(s, grid.clone(), &u, outputs)?;

    // R on [0, window + shift] output steps, same spacing.
    let mut ext = s.clone();
    ext.initial.s = None;
    ext.grid.t_final = dt * (window + shift) as f64;
    ext.solver.outputs = window + shift;
    let ext_grid = ext.build_grid()?;
    let (ext_tr, _) = compute_trajectories(&ext, ext_grid, &u, window + shift)?;
    let r_ext = ext_tr.r.expect("R requested");

    let rho = &base.rho;
    let like = rho.first().expect("nonempty");
    let times = rho.times();
    let mut segments = Vec::new();
    let mut start = 0;
    while start < outputs {
        let end = (start + window).min(outputs);
        let rho_seg = Trajectory::from_snapshots(
            grid.clone(),
            (start..=end)
                .map(|k| rebase(&rho.snapshots()[k], like, times[k] - times[start]))
                .collect::<Result<_, _>>()?,
            rho.meta.clone(),
        )
        .map_err(|e| RunError::Analysis(e.to_string()))?;
        let r_seg = Trajectory::from_snapshots(
            grid.clone(),
            (start..=end)
                .map(|k| rebase(&r_ext.snapshots()[k - start + shift], like, times[k] - times[start]))
                .collect::<Result<_, _>>()?,
            r_ext.meta.clone(),
        )
        .map_err(|e| RunError::Analysis(e.to_string()))?;
        let prod =
            conserved_product_deviation(&rho_seg, &r_seg, threshold).map_err(|e| RunError::Analysis(e.to_string()))?;
        let incl = inclusion_defect(&rho_seg, &r_seg, threshold).map_err(|e| RunError::Analysis(e.to_string()))?;
        segments.push(ReplaySegment {
            start: times[start],
            end: times[end],
            max_product_deviation: prod.max_deviation,
            max_inclusion_defect: incl.iter().map(|p| p.1).fold(0.0, f64::max),
        });
        start = end;
    }
    let stitched_deviation = segments.iter().map(|g| g.max_product_deviation).sum();
    let max_segment_deviation = segments.iter().map(|g| g.max_product_deviation).fold(0.0, f64::max);
    let max_inclusion_defect = segments.iter().map(|g| g.max_inclusion_defect).fold(0.0, f64::max);
    Ok(ReplayReport {
        scenario: s.name.clone(),
        t0,
        tau,
        threshold,
        segments,
        stitched_deviation,
        max_segment_deviation,
        max_inclusion_defect,
    })
}
