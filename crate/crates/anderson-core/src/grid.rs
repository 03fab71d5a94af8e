//! Uniform lattices on `(-L, L)^d`.
//!
//! Dirichlet grids store the `N - 1` interior nodes per axis, so a field is
//! implicitly zero on the boundary. Periodic grids store `N` nodes per axis,
//! starting at `-L`, and identify opposite faces.
//!
//! Flat indices are row-major with axis 0 slowest.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Dirichlet,
    Periodic,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Periodic => "periodic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGrid {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
    bc: BoundaryCondition,
}

impl LatticeGrid {
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize, bc: BoundaryCondition) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if points_per_axis < 2 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points_per_axis} must be even and at least 2"
            )));
        }
        Ok(Self { dim, half_width, points_per_axis, bc })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Cells per axis `N`; the mesh is `2L/N`.
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn mesh(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.mesh().powi(self.dim as i32)
    }

    pub fn cell_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Stored nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        match self.bc {
            BoundaryCondition::Dirichlet => self.points_per_axis - 1,
            BoundaryCondition::Periodic => self.points_per_axis,
        }
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of node `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        let offset = match self.bc {
            BoundaryCondition::Dirichlet => i + 1,
            BoundaryCondition::Periodic => i,
        };
        -self.half_width + offset as f64 * self.mesh()
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.nodes_per_axis();
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.nodes_per_axis();
        idx[..self.dim].iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Position of a node; unused trailing coordinates are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Same lattice on `(-λL, λL)^d`, keeping `N`.
    pub fn dilate(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.half_width * factor, self.points_per_axis, self.bc)
    }

    /// Sup-norm distance from a point to the boundary of the box.
    pub fn distance_to_boundary(&self, x: &[f64; 3]) -> f64 {
        x[..self.dim]
            .iter()
            .map(|&xi| self.half_width - xi.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn same_lattice(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points_per_axis == other.points_per_axis
            && self.bc == other.bc
            && self.half_width.to_bits() == other.half_width.to_bits()
    }
}
