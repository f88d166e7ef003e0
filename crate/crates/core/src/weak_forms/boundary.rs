use serde::Serialize;

use super::{TestFunction, WeakFormError};
use crate::exponents::Exponent;
use crate::fields::{compensated_sum, trapezoid, Grid, Point, Trajectory};
use crate::velocity::VelocityField;

fn expm(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step `χ`: 0 on `[0, 1/4]`, 1 on `[1/2, ∞)`; returns `(χ, χ')`.
pub fn smooth_step(s: f64) -> (f64, f64) {
    if s <= 0.25 {
        return (0.0, 0.0);
    }
    if s >= 0.5 {
        return (1.0, 0.0);
    }
    let y = 4.0 * (s - 0.25);
    let (a, b) = (expm(y), expm(1.0 - y));
    let (da, db) = (a / (y * y), -b / ((1.0 - y) * (1.0 - y)));
    let den = a + b;
    // d/dy a/(a+b) = (da·b − a·db)/(a+b)²
    (a / den, 4.0 * (da * b - a * db) / (den * den))
}

/// Bound on `|χ'|` (attained near the middle of the ramp); `|∇ξ_n| ≤ C n`.
pub fn smooth_step_slope_bound() -> f64 {
    (0..=1000).map(|k| smooth_step(0.25 + 0.25 * k as f64 / 1000.0).1.abs()).fold(0.0, f64::max) * 1.01
}

/// `ξ_n(x) = χ(n · dist(x, ∂Ω))`, vanishing on `{dist ≤ 1/(4n)}` and equal to
/// 1 off the strip `A_n = {dist ≤ 1/(2n)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryCutoff {
    pub n: usize,
}

impl BoundaryCutoff {
    pub fn new(n: usize) -> Result<Self, WeakFormError> {
        if n == 0 {
            return Err(WeakFormError::BadTestFunction("cutoff index n must be positive".into()));
        }
        Ok(Self { n })
    }

    /// `(ξ_n(x), ∇ξ_n(x))` on a box.
    pub fn eval(&self, grid: &Grid, x: &Point) -> (f64, Point) {
        let dom = &grid.domain;
        let dist = dom.dist_boundary_unchecked(x);
        let n = self.n as f64;
        let (chi, dchi) = smooth_step(n * dist);
        let g_dist = dom.dist_gradient(x);
        let mut g = [0.0; 3];
        for a in 0..grid.dim() {
            g[a] = n * dchi * g_dist[a];
        }
        (chi, g)
    }

    /// `|A_n|` for a box: `|Ω| − Π (L_a − 1/n)⁺`.
    pub fn strip_measure(&self, grid: &Grid) -> f64 {
        let w = 1.0 / self.n as f64;
        let inner: f64 = (0..grid.dim()).map(|a| (grid.domain.length(a) - w).max(0.0)).product();
        grid.domain.volume() - inner
    }
}

/// The four remainder integrals produced by `η(1 − ξ_n)` on `[0, τ]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryTermRow {
    pub n: usize,
    pub strip_measure: f64,
    /// `∫ ρ(τ) ψ(τ) η (1−ξ_n)`.
    pub t1: f64,
    /// `−∫ ρ(0) ψ(0) η (1−ξ_n)`.
    pub t2: f64,
    /// `−∫₀^τ∫ ρ ∂tψ η (1−ξ_n)`.
    pub t3: f64,
    /// `−∫₀^τ∫ ψ ρ u·∇(η (1−ξ_n))`.
    pub t4: f64,
}

impl BoundaryTermRow {
    pub fn terms(&self) -> [f64; 4] {
        [self.t1, self.t2, self.t3, self.t4]
    }
}

fn sub_samples(d: usize) -> usize {
    match d {
        1 => 32,
        2 => 8,
        _ => 4,
    }
}

/// Remainder terms for each `n`, with `τ` the last snapshot time. The density
/// is piecewise constant per cell; the cutoff, `φ` and `u` are sampled on a
/// sub-cell lattice so that strips thinner than a cell are still resolved.
pub fn boundary_term_decay(
    traj: &Trajectory,
    u: &VelocityField,
    phi: &TestFunction,
    n_list: &[usize],
) -> Result<Vec<BoundaryTermRow>, WeakFormError> {
    let grid = traj.grid();
    if grid.domain.is_periodic() {
        return Err(WeakFormError::NoBoundary);
    }
    u.check_grid(grid)?;
    let first = traj.first().ok_or(WeakFormError::EmptyTrajectory)?;
    let last = traj.last().expect("nonempty");
    let tau = last.time();
    let d = grid.dim();
    let m = sub_samples(d);
    let sub_count = m.pow(d as u32);
    let sub_vol = grid.cell_volume() / sub_count as f64;
    let offsets: Vec<Point> = (0..sub_count)
        .map(|k| {
            let mut o = [0.0; 3];
            let mut rest = k;
            for a in 0..d {
                let j = rest % m;
                rest /= m;
                o[a] = ((j as f64 + 0.5) / m as f64 - 0.5) * grid.h[a];
            }
            o
        })
        .collect();

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let cut = BoundaryCutoff::new(n)?;
        // Per cell: ∫_cell η(1−ξ) and ∫_cell u(t)·∇(η(1−ξ)) at each snapshot time.
        let weight_cell = |t: f64, with_u: bool| -> Vec<f64> {
            (0..grid.len())
                .map(|i| {
                    let c = grid.center(i);
                    if grid.domain.dist_boundary_unchecked(&c) > 0.5 / n as f64 + grid.h_max() {
                        return 0.0;
                    }
                    compensated_sum(offsets.iter().map(|o| {
                        let mut x = c;
                        for a in 0..d {
                            x[a] += o[a];
                        }
                        let (xi, gxi) = cut.eval(grid, &x);
                        let (eta, geta) = phi.space.eval(&x, d);
                        if !with_u {
                            return eta * (1.0 - xi);
                        }
                        let vel = u.eval(t, &x);
                        (0..d).map(|a| vel[a] * (geta[a] * (1.0 - xi) - eta * gxi[a])).sum::<f64>()
                    })) * sub_vol
                })
                .collect()
        };
        let dot = |rho: &[f64], w: &[f64]| compensated_sum(rho.iter().zip(w).map(|(r, w)| r * w));

        let w0 = weight_cell(0.0, false);
        let w_tau = if u.time_independent() { w0.clone() } else { weight_cell(tau, false) };
        let t1 = phi.time.value(tau) * dot(last.values(), &w_tau);
        let t2 = -phi.time.value(0.0) * dot(first.values(), &w0);
        let times = traj.times();
        let mut g3 = Vec::with_capacity(traj.len());
        let mut g4 = Vec::with_capacity(traj.len());
        let wu_static = if u.time_independent() { Some(weight_cell(0.0, true)) } else { None };
        for s in traj.snapshots() {
            let t = s.time();
            let (psi, dpsi) = phi.time.eval(t);
            g3.push(dpsi * dot(s.values(), &w0));
            let wu = match &wu_static {
                Some(w) => dot(s.values(), w),
                None => dot(s.values(), &weight_cell(t, true)),
            };
            g4.push(psi * wu);
        }
        let (t3, t4) = if traj.len() > 1 { (-trapezoid(&times, &g3), -trapezoid(&times, &g4)) } else { (0.0, 0.0) };
        rows.push(BoundaryTermRow { n, strip_measure: cut.strip_measure(grid), t1, t2, t3, t4 });
    }
    Ok(rows)
}

/// `‖u/dist(·,∂Ω)‖_{L^q}` and `‖∇u‖_{L^q}` at `t = 0` on the grid refined to
/// `n` cells per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HardyQuotient {
    pub n: usize,
    pub quotient_norm: f64,
    pub gradient_norm: f64,
    /// `quotient_norm / gradient_norm`; 0 when both vanish, `∞` when only the
    /// gradient does.
    pub ratio: f64,
}

pub fn hardy_quotient(u: &VelocityField, grid: &Grid, q: Exponent, n: usize) -> Result<HardyQuotient, WeakFormError> {
    if grid.domain.is_periodic() {
        return Err(WeakFormError::NoBoundary);
    }
    u.check_grid(grid)?;
    let g = grid.refined(n);
    let d = g.dim();
    let pairs: Vec<(f64, f64)> = g
        .centers()
        .map(|x| {
            let v = u.eval(0.0, &x);
            let speed = (0..d).map(|a| v[a] * v[a]).sum::<f64>().sqrt();
            let dist = g.domain.dist_boundary_unchecked(&x);
            let gr = u.grad(0.0, &x);
            let gn =
                (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| gr[i][j] * gr[i][j]).sum::<f64>().sqrt();
            (speed / dist, gn)
        })
        .collect();
    let norm = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        match q {
            Exponent::Infinite => vals.fold(0.0, f64::max),
            Exponent::Finite(_) => {
                let qf = q.as_f64();
                (compensated_sum(vals.map(|v| v.powf(qf))) * g.cell_volume()).powf(1.0 / qf)
            }
        }
    };
    let quotient_norm = norm(&mut pairs.iter().map(|p| p.0));
    let gradient_norm = norm(&mut pairs.iter().map(|p| p.1));
    let ratio = if quotient_norm == 0.0 {
        0.0
    } else if gradient_norm == 0.0 {
        f64::INFINITY
    } else {
        quotient_norm / gradient_norm
    };
    Ok(HardyQuotient { n, quotient_norm, gradient_norm, ratio })
}

/// Refinement study of [`hardy_quotient`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardyStudy {
    pub rows: Vec<HardyQuotient>,
    /// Quotient norm grows by more than 5% between the last two levels, or is
    /// positive while the gradient vanishes.
    pub divergent: bool,
    /// `max ratio / min ratio − 1` over the levels.
    pub ratio_spread: f64,
}

pub fn hardy_study(u: &VelocityField, grid: &Grid, q: Exponent, n_list: &[usize]) -> Result<HardyStudy, WeakFormError> {
    let rows = n_list.iter().map(|&n| hardy_quotient(u, grid, q, n)).collect::<Result<Vec<_>, _>>()?;
    let growth = rows.windows(2).last().is_some_and(|w| w[1].quotient_norm > 1.05 * w[0].quotient_norm);
    let degenerate = rows.iter().any(|r| r.ratio.is_infinite());
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
    let ratio_spread = if lo > 0.0 && lo.is_finite() {
        hi / lo - 1.0
    } else if hi == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(HardyStudy { rows, divergent: growth || degenerate, ratio_spread })
}
