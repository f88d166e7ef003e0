use serde::{Deserialize, Serialize};

use super::FieldError;

/// A point in up to three dimensions; unused trailing coordinates are zero.
pub type Point = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Flat torus: opposite faces identified, no boundary.
    PeriodicBox,
    /// Axis-aligned box with a genuine (Lipschitz) boundary.
    LipschitzBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(kind: DomainKind, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, FieldError> {
        if lower.is_empty() || lower.len() > 3 || lower.len() != upper.len() {
            return Err(FieldError::Dimension(lower.len()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(FieldError::DegenerateDomain);
        }
        Ok(Self { kind, lower, upper })
    }

    pub fn unit(kind: DomainKind, dim: usize) -> Result<Self, FieldError> {
        Self::new(kind, vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.length(a)).product()
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == DomainKind::PeriodicBox
    }

    /// Closure membership, with a relative slack of one rounding unit per axis.
    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim()).all(|a| {
            let slack = 4.0 * f64::EPSILON * self.length(a).max(1.0);
            x[a] >= self.lower[a] - slack && x[a] <= self.upper[a] + slack
        })
    }

    /// Distance to `∂Ω` for a point in the closure of a Lipschitz box.
    pub fn dist_boundary(&self, x: &Point) -> Result<f64, FieldError> {
        if self.is_periodic() {
            return Err(FieldError::NoBoundary);
        }
        Ok(self.dist_boundary_unchecked(x))
    }

    pub(crate) fn dist_boundary_unchecked(&self, x: &Point) -> f64 {
        (0..self.dim()).map(|a| (x[a] - self.lower[a]).min(self.upper[a] - x[a])).fold(f64::INFINITY, f64::min).max(0.0)
    }

    /// Unit vector `∇ dist(x, ∂Ω)` (a.e.), pointing into the domain from the nearest face.
    pub(crate) fn dist_gradient(&self, x: &Point) -> Point {
        let mut best = f64::INFINITY;
        let mut g = [0.0; 3];
        for a in 0..self.dim() {
            let lo = x[a] - self.lower[a];
            let hi = self.upper[a] - x[a];
            if lo < best {
                best = lo;
                g = [0.0; 3];
                g[a] = 1.0;
            }
            if hi < best {
                best = hi;
                g = [0.0; 3];
                g[a] = -1.0;
            }
        }
        g
    }

    /// Maps a coordinate back into the fundamental cell of a periodic box.
    pub fn wrap(&self, x: &mut Point) {
        if !self.is_periodic() {
            return;
        }
        for a in 0..self.dim() {
            let len = self.length(a);
            let mut v = (x[a] - self.lower[a]).rem_euclid(len);
            if v >= len {
                v = 0.0;
            }
            x[a] = self.lower[a] + v;
        }
    }
}

/// Uniform cell-centered grid over a box domain plus the time interval `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: Domain,
    pub cells: Vec<usize>,
    pub h: Vec<f64>,
    pub t_final: f64,
}

impl Grid {
    pub fn new(domain: Domain, cells: Vec<usize>, t_final: f64) -> Result<Self, FieldError> {
        if cells.len() != domain.dim() || cells.contains(&0) {
            return Err(FieldError::Dimension(cells.len()));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(FieldError::BadTime(t_final));
        }
        let h = (0..domain.dim()).map(|a| domain.length(a) / cells[a] as f64).collect();
        Ok(Self { domain, cells, h, t_final })
    }

    /// Same number of cells along every axis.
    pub fn uniform(domain: Domain, n: usize, t_final: f64) -> Result<Self, FieldError> {
        let d = domain.dim();
        Self::new(domain, vec![n; d], t_final)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = idx;
        for (a, &n) in self.cells.iter().enumerate() {
            out[a] = rest % n;
            rest /= n;
        }
        out
    }

    pub fn linear_index(&self, ijk: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim()).rev() {
            idx = idx * self.cells[a] + ijk[a];
        }
        idx
    }

    pub fn center(&self, idx: usize) -> Point {
        self.center_of(self.multi_index(idx))
    }

    pub fn center_of(&self, ijk: [usize; 3]) -> Point {
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = self.domain.lower[a] + (ijk[a] as f64 + 0.5) * self.h[a];
        }
        x
    }

    /// Neighbor along `axis` by `offset` cells; wraps on periodic domains,
    /// `None` past the boundary of a Lipschitz box.
    pub fn shift(&self, ijk: [usize; 3], axis: usize, offset: isize) -> Option<[usize; 3]> {
        let n = self.cells[axis] as isize;
        let mut j = ijk[axis] as isize + offset;
        if self.domain.is_periodic() {
            j = j.rem_euclid(n);
        } else if j < 0 || j >= n {
            return None;
        }
        let mut out = ijk;
        out[axis] = j as usize;
        Some(out)
    }

    /// Same domain and time interval with `n` cells per axis.
    pub fn refined(&self, n: usize) -> Self {
        Self::uniform(self.domain.clone(), n, self.t_final).expect("refinement of a valid grid")
    }

    pub fn with_t_final(&self, t_final: f64) -> Result<Self, FieldError> {
        Self::new(self.domain.clone(), self.cells.clone(), t_final)
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }

    /// Whether the cell touches the boundary of a Lipschitz box.
    pub fn is_boundary_cell(&self, idx: usize) -> bool {
        if self.domain.is_periodic() {
            return false;
        }
        let ijk = self.multi_index(idx);
        (0..self.dim()).any(|a| ijk[a] == 0 || ijk[a] + 1 == self.cells[a])
    }
}
