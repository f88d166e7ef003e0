//! Analytic velocity fields with closed-form gradients and divergences.
//!
//! The catalog is a set of hand-picked constructions: uniform drift, rigid
//! rotation, a (possibly oscillating) shear, a sine field vanishing on the
//! boundary of integer boxes, a divergence-free stream field on the unit
//! square, and a radial power field whose divergence blows up at the origin.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::Exponent;
use crate::fields::{compensated_sum, Grid, Point};

/// `grad[i][j] = ∂_j u_i`.
pub type Gradient = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VelocityError {
    #[error("unknown velocity id `{0}` (expected one of uniform, solid_rotation, shear, sine_zero_trace, divfree_stream, radial_power)")]
    UnknownId(String),
    #[error("velocity `{id}`: missing parameter `{param}`")]
    MissingParam { id: String, param: String },
    #[error("velocity `{id}`: parameter `{param}` {reason}")]
    BadParam { id: String, param: String, reason: String },
    #[error("velocity `{id}` is defined in {expected} dimension(s), grid has {got}")]
    Dimension { id: String, expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Uniform { v: Point },
    SolidRotation { omega: f64, center: [f64; 2] },
    Shear { amplitude: f64, omega: f64 },
    SineZeroTrace { amplitude: f64, k: f64 },
    DivfreeStream { amplitude: f64 },
    RadialPower { amplitude: f64, a: f64 },
}

/// A prescribed velocity `u(t, x)` on `R^d`, `d ∈ {1, 2, 3}`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    id: String,
    dim: usize,
    kind: Kind,
    zero_trace: bool,
    lipschitz: f64,
    declared_class: (Exponent, Exponent),
}

fn norm(x: &Point, d: usize) -> f64 {
    x[..d].iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct ParamReader<'a> {
    id: &'a str,
    params: &'a Params,
}

impl ParamReader<'_> {
    fn bad(&self, param: &str, reason: impl Into<String>) -> VelocityError {
        VelocityError::BadParam { id: self.id.into(), param: param.into(), reason: reason.into() }
    }

    fn scalar(&self, name: &str, default: Option<f64>) -> Result<f64, VelocityError> {
        match self.params.get(name) {
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(ParamValue::Scalar(_)) => Err(self.bad(name, "must be finite")),
            Some(ParamValue::Vector(_)) => Err(self.bad(name, "must be a number")),
            None => default.ok_or_else(|| VelocityError::MissingParam { id: self.id.into(), param: name.into() }),
        }
    }

    fn vector(&self, name: &str, default: Option<Vec<f64>>) -> Result<Vec<f64>, VelocityError> {
        match self.params.get(name) {
            Some(ParamValue::Vector(v)) if v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
            Some(ParamValue::Vector(_)) => Err(self.bad(name, "must have finite entries")),
            Some(ParamValue::Scalar(_)) => Err(self.bad(name, "must be an array")),
            None => default.ok_or_else(|| VelocityError::MissingParam { id: self.id.into(), param: name.into() }),
        }
    }

    fn dim(&self, default: usize) -> Result<usize, VelocityError> {
        let d = self.scalar("dim", Some(default as f64))?;
        if d.fract() != 0.0 || !(1.0..=3.0).contains(&d) {
            return Err(self.bad("dim", "must be 1, 2 or 3"));
        }
        Ok(d as usize)
    }

    fn only(&self, allowed: &[&str]) -> Result<(), VelocityError> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.bad(k, "is not recognized")),
            None => Ok(()),
        }
    }
}

/// Builds a catalog field from its id and parameters.
///
/// | id | parameters (defaults) |
/// |----|----|
/// | `uniform` | `v` (required; its length fixes `d`) |
/// | `solid_rotation` | `omega` (1), `center` (`[0, 0]`); `d = 2` |
/// | `shear` | `amplitude` (1), `omega` (0); `u = (A sin 2πy · cos ωt, 0)`, `d = 2` |
/// | `sine_zero_trace` | `amplitude` (1), `k` (1, integer), `dim` (1) |
/// | `divfree_stream` | `amplitude` (1); `d = 2` |
/// | `radial_power` | `a` (required, in `(0,1)`), `amplitude` (1), `dim` (2) |
pub fn make_velocity(id: &str, params: &Params) -> Result<VelocityField, VelocityError> {
    let r = ParamReader { id, params };
    let smooth = (Exponent::INF, Exponent::INF);
    let field = |dim, kind, zero_trace, lipschitz, declared_class| VelocityField {
        id: id.to_string(),
        dim,
        kind,
        zero_trace,
        lipschitz,
        declared_class,
    };
    match id {
        "uniform" => {
            r.only(&["v"])?;
            let v = r.vector("v", None)?;
            if v.is_empty() || v.len() > 3 {
                return Err(r.bad("v", "must have 1 to 3 components"));
            }
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(&v);
            let zero = v.iter().all(|&c| c == 0.0);
            Ok(field(v.len(), Kind::Uniform { v: p }, zero, 0.0, smooth))
        }
        "solid_rotation" => {
            r.only(&["omega", "center"])?;
            let omega = r.scalar("omega", Some(1.0))?;
            let c = r.vector("center", Some(vec![0.0, 0.0]))?;
            if c.len() != 2 {
                return Err(r.bad("center", "must have 2 components"));
            }
            Ok(field(2, Kind::SolidRotation { omega, center: [c[0], c[1]] }, omega == 0.0, omega.abs(), smooth))
        }
        "shear" => {
            r.only(&["amplitude", "omega"])?;
            let amplitude = r.scalar("amplitude", Some(1.0))?;
            let omega = r.scalar("omega", Some(0.0))?;
            Ok(field(2, Kind::Shear { amplitude, omega }, amplitude == 0.0, 2.0 * PI * amplitude.abs(), smooth))
        }
        "sine_zero_trace" => {
            r.only(&["amplitude", "k", "dim"])?;
            let amplitude = r.scalar("amplitude", Some(1.0))?;
            let k = r.scalar("k", Some(1.0))?;
            if k.fract() != 0.0 || k < 1.0 {
                return Err(r.bad("k", "must be a positive integer"));
            }
            let dim = r.dim(1)?;
            let lip = amplitude.abs() * k * PI * dim as f64;
            Ok(field(dim, Kind::SineZeroTrace { amplitude, k }, true, lip, smooth))
        }
        "divfree_stream" => {
            r.only(&["amplitude"])?;
            let amplitude = r.scalar("amplitude", Some(1.0))?;
            Ok(field(2, Kind::DivfreeStream { amplitude }, true, 10f64.sqrt() * PI * amplitude.abs(), smooth))
        }
        "radial_power" => {
            r.only(&["a", "amplitude", "dim"])?;
            let a = r.scalar("a", None)?;
            if !(a > 0.0 && a < 1.0) {
                return Err(r.bad("a", format!("= {a} must lie in (0, 1)")));
            }
            let amplitude = r.scalar("amplitude", Some(1.0))?;
            let dim = r.dim(2)?;
            // ∇u ~ |x|^{a-1} lies in L^q near 0 iff q(1 − a) < d; q = d always qualifies.
            let declared = (Exponent::INF, Exponent::int(dim as i64));
            Ok(field(dim, Kind::RadialPower { amplitude, a }, false, f64::INFINITY, declared))
        }
        other => Err(VelocityError::UnknownId(other.to_string())),
    }
}

impl VelocityField {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared to vanish on the boundary of the boxes it is meant for.
    pub fn zero_trace(&self) -> bool {
        self.zero_trace
    }

    pub fn time_independent(&self) -> bool {
        !matches!(self.kind, Kind::Shear { omega, .. } if omega != 0.0)
    }

    /// Upper bound for the spatial Lipschitz constant (`∞` if none).
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    /// `(p, q)` such that `u ∈ L^p(I; W^{1,q})` on bounded domains.
    pub fn declared_class(&self) -> (Exponent, Exponent) {
        self.declared_class
    }

    /// Whether `div u` is known to be bounded.
    pub fn bounded_divergence(&self) -> bool {
        !matches!(self.kind, Kind::RadialPower { .. })
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<(), VelocityError> {
        if grid.dim() != self.dim {
            return Err(VelocityError::Dimension { id: self.id.clone(), expected: self.dim, got: grid.dim() });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: &Point) -> Point {
        let mut u = [0.0; 3];
        match self.kind {
            Kind::Uniform { v } => u = v,
            Kind::SolidRotation { omega, center } => {
                u[0] = -omega * (x[1] - center[1]);
                u[1] = omega * (x[0] - center[0]);
            }
            Kind::Shear { amplitude, omega } => {
                u[0] = amplitude * (2.0 * PI * x[1]).sin() * (omega * t).cos();
            }
            Kind::SineZeroTrace { amplitude, k } => {
                let s: Vec<f64> = (0..self.dim).map(|j| (k * PI * x[j]).sin()).collect();
                for i in 0..self.dim {
                    u[i] = amplitude * (0..self.dim).map(|j| s[j]).product::<f64>();
                }
            }
            Kind::DivfreeStream { amplitude } => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                u[0] = amplitude * sx * sx * (2.0 * PI * x[1]).sin();
                u[1] = -amplitude * (2.0 * PI * x[0]).sin() * sy * sy;
            }
            Kind::RadialPower { amplitude, a } => {
                let r = norm(x, self.dim);
                if r > 0.0 {
                    let f = amplitude * r.powf(a - 1.0);
                    for i in 0..self.dim {
                        u[i] = f * x[i];
                    }
                }
            }
        }
        u
    }

    pub fn grad(&self, t: f64, x: &Point) -> Gradient {
        let mut g = [[0.0; 3]; 3];
        match self.kind {
            Kind::Uniform { .. } => {}
            Kind::SolidRotation { omega, .. } => {
                g[0][1] = -omega;
                g[1][0] = omega;
            }
            Kind::Shear { amplitude, omega } => {
                g[0][1] = amplitude * 2.0 * PI * (2.0 * PI * x[1]).cos() * (omega * t).cos();
            }
            Kind::SineZeroTrace { amplitude, k } => {
                let s: Vec<f64> = (0..self.dim).map(|j| (k * PI * x[j]).sin()).collect();
                let c: Vec<f64> = (0..self.dim).map(|j| k * PI * (k * PI * x[j]).cos()).collect();
                for j in 0..self.dim {
                    let d = (0..self.dim).map(|m| if m == j { c[m] } else { s[m] }).product::<f64>();
                    for row in g.iter_mut().take(self.dim) {
                        row[j] = amplitude * d;
                    }
                }
            }
            Kind::DivfreeStream { amplitude } => {
                let (sx, cx) = ((PI * x[0]).sin(), (PI * x[0]).cos());
                let (sy, cy) = ((PI * x[1]).sin(), (PI * x[1]).cos());
                g[0][0] = amplitude * 2.0 * PI * sx * cx * (2.0 * PI * x[1]).sin();
                g[0][1] = amplitude * sx * sx * 2.0 * PI * (2.0 * PI * x[1]).cos();
                g[1][0] = -amplitude * 2.0 * PI * (2.0 * PI * x[0]).cos() * sy * sy;
                g[1][1] = -amplitude * (2.0 * PI * x[0]).sin() * 2.0 * PI * sy * cy;
            }
            Kind::RadialPower { amplitude, a } => {
                // Undefined at the origin (a null set); reported as 0 there.
                let r = norm(x, self.dim);
                if r > 0.0 {
                    let f = amplitude * r.powf(a - 1.0);
                    for i in 0..self.dim {
                        for j in 0..self.dim {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            g[i][j] = f * (delta + (a - 1.0) * x[i] * x[j] / (r * r));
                        }
                    }
                }
            }
        }
        g
    }

    pub fn div(&self, t: f64, x: &Point) -> f64 {
        match self.kind {
            Kind::Uniform { .. } | Kind::SolidRotation { .. } | Kind::Shear { .. } | Kind::DivfreeStream { .. } => 0.0,
            Kind::SineZeroTrace { .. } => {
                let g = self.grad(t, x);
                (0..self.dim).map(|i| g[i][i]).sum()
            }
            Kind::RadialPower { amplitude, a } => {
                let r = norm(x, self.dim);
                if r > 0.0 {
                    amplitude * (self.dim as f64 + a - 1.0) * r.powf(a - 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn speed(&self, t: f64, x: &Point) -> f64 {
        norm(&self.eval(t, x), self.dim)
    }

    /// Time samples used when a quantity must be maximized over `[0, T]`.
    pub fn sample_times(&self, t_final: f64) -> Vec<f64> {
        if self.time_independent() || t_final == 0.0 {
            vec![0.0]
        } else {
            (0..=32).map(|k| t_final * k as f64 / 32.0).collect()
        }
    }

    /// `max |u|` over cell centers and face centers of the grid, and over
    /// sample times in `[0, T]`.
    pub fn max_speed(&self, grid: &Grid) -> f64 {
        let d = grid.dim();
        let mut m: f64 = 0.0;
        for t in self.sample_times(grid.t_final) {
            for idx in 0..grid.len() {
                let c = grid.center(idx);
                m = m.max(self.speed(t, &c));
                for a in 0..d {
                    let mut f = c;
                    f[a] -= 0.5 * grid.h[a];
                    m = m.max(self.speed(t, &f));
                    if grid.multi_index(idx)[a] + 1 == grid.cells[a] {
                        f[a] += grid.h[a];
                        m = m.max(self.speed(t, &f));
                    }
                }
            }
        }
        m
    }
}

/// Discrete `‖u‖_{L^p(0,T; W^{1,q}(Ω))}` with pointwise density
/// `(|u|^q + |∇u|^q)^{1/q}` (Euclidean / Frobenius norms), midpoint rule in
/// space and trapezoid rule in time. For `q = ∞` the spatial part is
/// `max(|u|, |∇u|)`.
pub fn sobolev_norm_estimate(u: &VelocityField, grid: &Grid, p: Exponent, q: Exponent) -> f64 {
    let d = grid.dim();
    let spatial = |t: f64| -> f64 {
        let vals = grid.centers().map(|x| {
            let v = norm(&u.eval(t, &x), d);
            let g = u.grad(t, &x);
            let gn =
                (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| g[i][j] * g[i][j]).sum::<f64>().sqrt();
            (v, gn)
        });
        match q {
            Exponent::Infinite => vals.fold(0.0, |m, (v, g)| m.max(v).max(g)),
            Exponent::Finite(_) => {
                let qf = q.as_f64();
                let s = compensated_sum(vals.map(|(v, g)| v.powf(qf) + g.powf(qf)));
                (s * grid.cell_volume()).powf(1.0 / qf)
            }
        }
    };
    let times = u.sample_times(grid.t_final);
    let norms: Vec<f64> = times.iter().map(|&t| spatial(t)).collect();
    match p {
        Exponent::Infinite => norms.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(_) => {
            let pf = p.as_f64();
            let integral = if times.len() == 1 {
                norms[0].powf(pf) * grid.t_final
            } else {
                let powered: Vec<f64> = norms.iter().map(|n| n.powf(pf)).collect();
                crate::fields::trapezoid(&times, &powered)
            };
            integral.powf(1.0 / pf)
        }
    }
}

/// Zero-trace test on a Lipschitz box: `max |u|` over boundary-adjacent cell
/// centers (and sample times) must not exceed `L·h_max`, `L` the field's
/// Lipschitz bound. Periodic domains pass vacuously.
pub fn trace_check(u: &VelocityField, grid: &Grid) -> bool {
    if grid.domain.is_periodic() {
        return true;
    }
    let mut m: f64 = 0.0;
    for t in u.sample_times(grid.t_final) {
        for idx in (0..grid.len()).filter(|&i| grid.is_boundary_cell(i)) {
            m = m.max(u.speed(t, &grid.center(idx)));
        }
    }
    if m == 0.0 {
        return true;
    }
    let lip = u.lipschitz_bound();
    lip.is_finite() && m <= lip * grid.h_max()
}
