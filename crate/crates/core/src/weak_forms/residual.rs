use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RenormFunction, TestFunction, WeakFormError};
use crate::fields::{compensated_sum, trapezoid, ScalarField, Trajectory};
use crate::velocity::VelocityField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// `∂t ρ + div(ρu) = 0`.
    Continuity,
    /// `∂t s + u·∇s = 0`.
    Transport,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Continuity => "continuity",
            Problem::Transport => "transport",
        }
    }
}

/// The eight solution notions: {distributional, weak} × {plain, time-integrated}
/// × {plain, renormalized}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Distributional,
    Weak,
    TimeIntegratedDistributional,
    TimeIntegratedWeak,
    RenormalizedDistributional,
    RenormalizedWeak,
    RenormalizedTimeIntegratedDistributional,
    RenormalizedTimeIntegratedWeak,
}

impl Notion {
    pub const ALL: [Notion; 8] = [
        Notion::Distributional,
        Notion::Weak,
        Notion::TimeIntegratedDistributional,
        Notion::TimeIntegratedWeak,
        Notion::RenormalizedDistributional,
        Notion::RenormalizedWeak,
        Notion::RenormalizedTimeIntegratedDistributional,
        Notion::RenormalizedTimeIntegratedWeak,
    ];

    pub fn renormalized(self) -> bool {
        matches!(
            self,
            Notion::RenormalizedDistributional
                | Notion::RenormalizedWeak
                | Notion::RenormalizedTimeIntegratedDistributional
                | Notion::RenormalizedTimeIntegratedWeak
        )
    }

    pub fn time_integrated(self) -> bool {
        matches!(
            self,
            Notion::TimeIntegratedDistributional
                | Notion::TimeIntegratedWeak
                | Notion::RenormalizedTimeIntegratedDistributional
                | Notion::RenormalizedTimeIntegratedWeak
        )
    }

    /// Test functions may be nonzero up to the boundary.
    pub fn weak(self) -> bool {
        matches!(
            self,
            Notion::Weak
                | Notion::TimeIntegratedWeak
                | Notion::RenormalizedWeak
                | Notion::RenormalizedTimeIntegratedWeak
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Notion::Distributional => "distributional",
            Notion::Weak => "weak",
            Notion::TimeIntegratedDistributional => "time_integrated_distributional",
            Notion::TimeIntegratedWeak => "time_integrated_weak",
            Notion::RenormalizedDistributional => "renormalized_distributional",
            Notion::RenormalizedWeak => "renormalized_weak",
            Notion::RenormalizedTimeIntegratedDistributional => "renormalized_time_integrated_distributional",
            Notion::RenormalizedTimeIntegratedWeak => "renormalized_time_integrated_weak",
        }
    }
}

/// Tolerance for "ψ vanishes at the interval ends".
const END_TOL: f64 = 1e-14;

/// Checks that `(notion, b, φ, τ)` fit together.
pub fn check_compatibility(
    notion: Notion,
    b: Option<&RenormFunction>,
    phi: &TestFunction,
    tau: f64,
) -> Result<(), WeakFormError> {
    if notion.renormalized() && b.is_none() {
        return Err(WeakFormError::MissingRenorm(notion.name()));
    }
    if !notion.weak() && !phi.compact_in_space() {
        return Err(WeakFormError::Incompatible(format!(
            "{} notions need a compactly supported spatial factor; `{}` is not",
            notion.name(),
            phi.id
        )));
    }
    if !notion.time_integrated() {
        let (a, z) = (phi.time.value(0.0), phi.time.value(tau));
        if a.abs() > END_TOL || z.abs() > END_TOL {
            return Err(WeakFormError::Incompatible(format!(
                "{} needs ψ(0) = ψ(τ) = 0, got ψ(0) = {a}, ψ({tau}) = {z}",
                notion.name()
            )));
        }
    }
    Ok(())
}

/// `(∫_Ω B η dx, ∫_Ω [B u·∇φ + D div u φ](t, x) dx)` for one snapshot, with
/// `B = b(f)` and `D = −(f b'(f) − b(f))` (continuity) or `D = B` (transport).
/// The first entry is the coefficient of `ψ'(t)`.
fn space_integrand(
    problem: Problem,
    snap: &ScalarField,
    u: &VelocityField,
    b: Option<&RenormFunction>,
    phi: &TestFunction,
) -> (f64, f64) {
    let grid = snap.grid();
    let d = grid.dim();
    let t = snap.time();
    let vals = snap.values();
    let mass = compensated_sum((0..grid.len()).filter(|&i| snap.is_valid(i)).map(|i| {
        let f = vals[i];
        let bf = b.map_or(f, |r| r.b(f));
        bf * phi.space.eval(&grid.center(i), d).0
    }));
    let sum = compensated_sum((0..grid.len()).filter(|&i| snap.is_valid(i)).map(|i| {
        let x = grid.center(i);
        let f = vals[i];
        let (bf, defect) = match b {
            Some(r) => {
                let (bv, db) = r.eval(f);
                (bv, f * db - bv)
            }
            None => (f, 0.0),
        };
        let (phi_v, _, phi_g) = phi.eval(t, &x, d);
        let vel = u.eval(t, &x);
        let transport: f64 = (0..d).map(|a| vel[a] * phi_g[a]).sum();
        let zeroth = match problem {
            Problem::Continuity => -defect,
            Problem::Transport => bf,
        };
        bf * transport + zeroth * u.div(t, &x) * phi_v
    }));
    (mass * grid.cell_volume(), sum * grid.cell_volume())
}

/// `∫_Ω b(f) φ(t, ·) dx` for one snapshot.
fn boundary_integral(snap: &ScalarField, b: Option<&RenormFunction>, phi: &TestFunction) -> f64 {
    let grid = snap.grid();
    let d = grid.dim();
    let t = snap.time();
    let sum = compensated_sum((0..grid.len()).filter(|&i| snap.is_valid(i)).map(|i| {
        let f = snap.values()[i];
        let bf = b.map_or(f, |r| r.b(f));
        bf * phi.eval(t, &grid.center(i), d).0
    }));
    sum * grid.cell_volume()
}

/// Left-minus-right side of the defining identity of `notion` on `[0, τ]`,
/// by midpoint quadrature in space and trapezoid in time over the stored
/// snapshots. `τ` must be a snapshot time.
///
/// Plain notions: `∫₀^τ∫_Ω [B ∂tφ + B u·∇φ + D div u φ]`.
/// Time-integrated notions: `∫B(τ)φ(τ) − ∫B(0)φ(0) − ∫₀^τ∫_Ω [...]`.
pub fn residual(
    problem: Problem,
    notion: Notion,
    traj: &Trajectory,
    u: &VelocityField,
    b: Option<&RenormFunction>,
    phi: &TestFunction,
    tau: f64,
) -> Result<f64, WeakFormError> {
    check_compatibility(notion, b, phi, tau)?;
    u.check_grid(traj.grid())?;
    let end = traj.index_of_time(tau)?;
    let b = if notion.renormalized() { b } else { None };
    let snaps = &traj.snapshots()[..=end];
    let parts: Vec<(f64, f64)> = snaps.par_iter().map(|s| space_integrand(problem, s, u, b, phi)).collect();
    let times: Vec<f64> = snaps.iter().map(|s| s.time()).collect();
    let volume = if snaps.len() == 1 {
        0.0
    } else {
        let rest: Vec<f64> = parts.iter().map(|p| p.1).collect();
        // Trapezoid per interval with one-sided ψ' so hat kinks on snapshot
        // times are integrated exactly.
        let dt_part = compensated_sum(times.windows(2).zip(parts.windows(2)).map(|(t, p)| {
            let left = phi.time.derivative(t[0]) * p[0].0;
            let right = phi.time.derivative_left(t[0], t[1]) * p[1].0;
            0.5 * (t[1] - t[0]) * (left + right)
        }));
        dt_part + trapezoid(&times, &rest)
    };
    if notion.time_integrated() {
        let at_tau = boundary_integral(&snaps[end], b, phi);
        let at_zero = boundary_integral(&snaps[0], b, phi);
        Ok(at_tau - at_zero - volume)
    } else {
        Ok(volume)
    }
}

/// One entry of a residual matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    pub problem: Problem,
    pub notion: Notion,
    pub b: String,
    pub phi: String,
    pub tau: f64,
    pub value: f64,
}

/// Residuals for every compatible `(notion, b, φ)` combination. Renormalized
/// notions are paired with each `b`; plain notions use `b = "-"`.
/// Incompatible combinations are skipped.
pub fn residual_matrix(
    problem: Problem,
    traj: &Trajectory,
    u: &VelocityField,
    renorms: &[RenormFunction],
    phis: &[TestFunction],
    tau: f64,
) -> Result<Vec<ResidualRow>, WeakFormError> {
    let mut jobs: Vec<(Notion, Option<&RenormFunction>, &TestFunction)> = Vec::new();
    for notion in Notion::ALL {
        for phi in phis {
            if notion.renormalized() {
                for r in renorms {
                    jobs.push((notion, Some(r), phi));
                }
            } else {
                jobs.push((notion, None, phi));
            }
        }
    }
    jobs.retain(|(n, b, phi)| check_compatibility(*n, *b, phi, tau).is_ok());
    jobs.into_par_iter()
        .map(|(notion, b, phi)| {
            let value = residual(problem, notion, traj, u, b, phi, tau)?;
            Ok(ResidualRow {
                problem,
                notion,
                b: b.map_or_else(|| "-".to_string(), |r| r.label()),
                phi: phi.id.clone(),
                tau,
                value,
            })
        })
        .collect()
}

pub fn residual_rows_to_csv(rows: &[ResidualRow]) -> String {
    let mut s = String::from("problem,notion,b,phi,tau,value\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.17e},{:.17e}\n",
            r.problem.name(),
            r.notion.name(),
            r.b,
            r.phi,
            r.tau,
            r.value
        ));
    }
    s
}
