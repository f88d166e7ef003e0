//! Standard mollifier, discrete convolution and the Friedrichs commutator
//! `r_ε = [u·∇f]_ε − u·∇[f]_ε`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exponents::Exponent;
use crate::fields::{compensated_sum, trapezoid, Grid, ScalarField, Trajectory};
pub use crate::refinement::loglog_slope;
use crate::velocity::{VelocityError, VelocityField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MollifyError {
    #[error("ε = {eps} is under-resolved: at least 2h = {min} required")]
    UnderResolved { eps: f64, min: f64 },
    #[error("interior region {{dist > ε + h}} is empty for ε = {0}")]
    EmptyInterior(f64),
    #[error("ε list must be strictly decreasing and nonempty")]
    BadEpsList,
    #[error("trajectory has no snapshots")]
    EmptyTrajectory,
    #[error(transparent)]
    Velocity(#[from] VelocityError),
}

/// `j(z) = exp(−1/(1 − |z|²))` for `|z| < 1`, else 0 (unnormalized).
pub fn bump(z2: f64) -> f64 {
    if z2 < 1.0 {
        (-1.0 / (1.0 - z2)).exp()
    } else {
        0.0
    }
}

/// `j_ε` sampled on the grid offsets strictly inside the ball of radius `ε`,
/// renormalized so that `Σ weights = 1` (weights already include the cell
/// volume, i.e. `weight = j_ε(o·h)·|cell|`).
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierKernel {
    epsilon: f64,
    dim: usize,
    offsets: Vec<[isize; 3]>,
    weights: Vec<f64>,
    cell_volume: f64,
}

pub fn make_kernel(epsilon: f64, grid: &Grid) -> Result<MollifierKernel, MollifyError> {
    let min = 2.0 * grid.h_max();
    if !(epsilon >= min * (1.0 - 1e-12)) || !epsilon.is_finite() {
        return Err(MollifyError::UnderResolved { eps: epsilon, min });
    }
    let d = grid.dim();
    let reach: Vec<isize> = (0..d).map(|a| (epsilon / grid.h[a]).ceil() as isize).collect();
    let mut offsets = Vec::new();
    let mut raw = Vec::new();
    let mut o = [0isize; 3];
    let ranges: Vec<std::ops::RangeInclusive<isize>> =
        (0..3).map(|a| if a < d { -reach[a]..=reach[a] } else { 0..=0 }).collect();
    for k in ranges[2].clone() {
        o[2] = k;
        for j in ranges[1].clone() {
            o[1] = j;
            for i in ranges[0].clone() {
                o[0] = i;
                let z2: f64 = (0..d).map(|a| (o[a] as f64 * grid.h[a] / epsilon).powi(2)).sum();
                let w = bump(z2);
                if w > 0.0 {
                    offsets.push(o);
                    raw.push(w);
                }
            }
        }
    }
    let total = compensated_sum(raw.iter().copied());
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(MollifierKernel { epsilon, dim: d, offsets, weights, cell_volume: grid.cell_volume() })
}

impl MollifierKernel {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn offsets(&self) -> &[[isize; 3]] {
        &self.offsets
    }

    /// Discrete weights `j_ε(o·h)·|cell|`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `j_ε` at the stencil offsets (weights divided by the cell volume).
    pub fn values(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w / self.cell_volume).collect()
    }

    /// `Σ j_ε(o·h)·|cell|`.
    pub fn mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn weight_at(&self, o: [isize; 3]) -> Option<f64> {
        self.offsets.iter().position(|&p| p == o).map(|i| self.weights[i])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `[f]_ε(x_i) = Σ_o j_ε(o·h) f(x_i − o·h) |cell|`, with `f` extended by zero
/// outside a box and periodically on a torus.
pub fn mollify(f: &ScalarField, k: &MollifierKernel) -> ScalarField {
    let grid = f.grid().clone();
    let vals = f.values();
    let periodic = grid.domain.is_periodic();
    let d = grid.dim();
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let ijk = grid.multi_index(idx);
            let mut acc = 0.0;
            'offsets: for (o, w) in k.offsets.iter().zip(&k.weights) {
                let mut src = [0usize; 3];
                for a in 0..d {
                    let n = grid.cells[a] as isize;
                    let j = ijk[a] as isize - o[a];
                    src[a] = if periodic {
                        j.rem_euclid(n) as usize
                    } else if j < 0 || j >= n {
                        continue 'offsets;
                    } else {
                        j as usize
                    };
                }
                acc += w * vals[grid.linear_index(src)];
            }
            acc
        })
        .collect();
    ScalarField::new(grid, out, f.time()).expect("one value per cell")
}

/// Cells where commutators are evaluated: all cells on a torus, cells with
/// `dist(x, ∂Ω) > ε + h` on a box (the interior region plus one cell for the
/// central differences).
pub fn interior_mask(grid: &Grid, epsilon: f64) -> Vec<bool> {
    if grid.domain.is_periodic() {
        return vec![true; grid.len()];
    }
    let margin = epsilon + grid.h_max();
    grid.centers().map(|x| grid.domain.dist_boundary_unchecked(&x) > margin).collect()
}

/// Central difference of `g` along `axis` (periodic wrap; one-sided at box
/// edges, which are outside every interior mask anyway).
fn central_diff(grid: &Grid, g: &[f64], axis: usize, idx: usize) -> f64 {
    let ijk = grid.multi_index(idx);
    match (grid.shift(ijk, axis, 1), grid.shift(ijk, axis, -1)) {
        (Some(p), Some(m)) => (g[grid.linear_index(p)] - g[grid.linear_index(m)]) / (2.0 * grid.h[axis]),
        (Some(p), None) => (g[grid.linear_index(p)] - g[idx]) / grid.h[axis],
        (None, Some(m)) => (g[idx] - g[grid.linear_index(m)]) / grid.h[axis],
        (None, None) => 0.0,
    }
}

/// `r_ε = div([f u]_ε) − div([f]_ε u) − ([f div u]_ε − [f]_ε div u)` at the
/// time of `f`, with central-difference divergences. Cells outside
/// [`interior_mask`] are masked out.
pub fn friedrichs_commutator(
    f: &ScalarField,
    u: &VelocityField,
    k: &MollifierKernel,
) -> Result<ScalarField, MollifyError> {
    let grid = f.grid().clone();
    u.check_grid(&grid)?;
    let mask = interior_mask(&grid, k.epsilon);
    if !mask.iter().any(|&m| m) {
        return Err(MollifyError::EmptyInterior(k.epsilon));
    }
    let d = grid.dim();
    let t = f.time();
    let vel: Vec<[f64; 3]> = grid.centers().map(|x| u.eval(t, &x)).collect();
    let div: Vec<f64> = grid.centers().map(|x| u.div(t, &x)).collect();
    let fm = mollify(f, k);

    let mut result = vec![0.0; grid.len()];
    for a in 0..d {
        let fu = ScalarField::new(grid.clone(), f.values().iter().zip(&vel).map(|(v, w)| v * w[a]).collect(), t)
            .expect("one value per cell");
        let fu_m = mollify(&fu, k);
        let fm_u: Vec<f64> = fm.values().iter().zip(&vel).map(|(v, w)| v * w[a]).collect();
        let diff: Vec<f64> = fu_m.values().iter().zip(&fm_u).map(|(p, q)| p - q).collect();
        for (idx, r) in result.iter_mut().enumerate() {
            if mask[idx] {
                *r += central_diff(&grid, &diff, a, idx);
            }
        }
    }
    let fdiv = ScalarField::new(grid.clone(), f.values().iter().zip(&div).map(|(v, w)| v * w).collect(), t)
        .expect("one value per cell");
    let fdiv_m = mollify(&fdiv, k);
    for (idx, r) in result.iter_mut().enumerate() {
        if mask[idx] {
            *r -= fdiv_m.values()[idx] - fm.values()[idx] * div[idx];
        } else {
            *r = 0.0;
        }
    }
    Ok(ScalarField::new(grid, result, t).expect("one value per cell").with_mask(mask).expect("one flag per cell"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub epsilon: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log norm` against `log ε`.
    pub slope: f64,
}

impl DecayTable {
    /// Norms nonincreasing as ε decreases, up to relative slack `tol`.
    pub fn monotone(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].norm <= w[0].norm * (1.0 + tol))
    }

    pub fn strictly_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].norm < w[0].norm)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,norm\n");
        for r in &self.rows {
            s.push_str(&format!("{:.17e},{:.17e}\n", r.epsilon, r.norm));
        }
        s
    }
}
/// `‖r_ε‖_{L^t(0,T; L^r(K))}` for each ε, where the compact set `K` is the
/// interior region of the largest ε so every row integrates over the same set.
pub fn decay_study(
    f: &Trajectory,
    u: &VelocityField,
    eps_list: &[f64],
    t_exp: Exponent,
    r_exp: Exponent,
) -> Result<DecayTable, MollifyError> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MollifyError::BadEpsList);
    }
    if f.is_empty() {
        return Err(MollifyError::EmptyTrajectory);
    }
    let grid = f.grid();
    let region = interior_mask(grid, eps_list[0]);
    if !region.iter().any(|&m| m) {
        return Err(MollifyError::EmptyInterior(eps_list[0]));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let k = make_kernel(eps, grid)?;
        let mut norms = Vec::with_capacity(f.len());
        for snap in f.snapshots() {
            let r = friedrichs_commutator(snap, u, &k)?;
            let r = r.with_mask(region.clone()).expect("one flag per cell");
            norms.push(r.lp_norm(r_exp));
        }
        let norm = match t_exp {
            // A single snapshot is a spatial study; no time integration.
            _ if f.len() == 1 => norms[0],
            Exponent::Infinite => norms.iter().copied().fold(0.0, f64::max),
            Exponent::Finite(_) => {
                let tf = t_exp.as_f64();
                let p: Vec<f64> = norms.iter().map(|n| n.powf(tf)).collect();
                trapezoid(&f.times(), &p).powf(1.0 / tf)
            }
        };
        rows.push(DecayRow { epsilon: eps, norm });
    }
    let slope = loglog_slope(
        &rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.norm).collect::<Vec<_>>(),
    );
    Ok(DecayTable { rows, slope })
}
