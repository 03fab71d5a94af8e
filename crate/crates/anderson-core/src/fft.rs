//! Multi-dimensional FFTs on row-major arrays and the spectral inverse of the
//! shifted lattice Laplacian (`-Δ_h + c`). Periodic grids diagonalise in the
//! Fourier basis, Dirichlet grids in the type-I sine basis.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{BoundaryCondition, LatticeGrid};

/// Calls `f` on every 1-D line of `data` along `axis`, gathering into and
/// scattering from `line`.
fn for_each_line<T: Copy>(dims: &[usize], axis: usize, data: &mut [T], line: &mut Vec<T>, mut f: impl FnMut(&mut [T])) {
    let n = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    line.clear();
    line.extend(std::iter::repeat_n(data[0], n));
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * n * stride + inner;
            for j in 0..n {
                line[j] = data[base + j * stride];
            }
            f(line);
            for j in 0..n {
                data[base + j * stride] = line[j];
            }
        }
    }
}

pub struct NdFft {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims: dims.to_vec(),
            forward: dims.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/len` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let mut line = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            if self.dims.len() == 1 {
                plan.process(data);
            } else {
                for_each_line(&self.dims, axis, data, &mut line, |l| plan.process(l));
            }
        }
    }
}

/// Type-I discrete sine transform `y_k = Σ_j x_j sin(π j k / (n+1))`,
/// `j, k = 1..=n`, computed through a complex FFT of length `2(n+1)`.
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fft: planner.plan_fft_forward(2 * (n + 1)) }
    }

    pub fn apply_line(&self, line: &mut [f64], scratch: &mut [Complex64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        scratch[0] = Complex64::new(0.0, 0.0);
        scratch[n + 1] = Complex64::new(0.0, 0.0);
        for j in 1..=n {
            scratch[j] = Complex64::new(line[j - 1], 0.0);
            scratch[m - j] = Complex64::new(-line[j - 1], 0.0);
        }
        self.fft.process(scratch);
        for k in 1..=n {
            line[k - 1] = -0.5 * scratch[k].im;
        }
    }

    /// Applies the transform along every axis of a `dims`-shaped array.
    pub fn apply_nd(&self, dims: &[usize], data: &mut [f64]) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); 2 * (self.n + 1)];
        let mut line = Vec::new();
        for axis in 0..dims.len() {
            assert_eq!(dims[axis], self.n);
            for_each_line(dims, axis, data, &mut line, |l| self.apply_line(l, &mut scratch));
        }
    }
}

enum SpectralBasis {
    Fourier(NdFft),
    Sine(SineTransform),
}

/// Exact inverse of `-Δ_h + c` on a lattice (second-order stencil).
pub struct SpectralSolver {
    grid: LatticeGrid,
    dims: Vec<usize>,
    axis_eigenvalues: Vec<f64>,
    basis: SpectralBasis,
}

impl SpectralSolver {
    pub fn new(grid: &LatticeGrid) -> Self {
        let n = grid.nodes_per_axis();
        let big_n = grid.points_per_axis() as f64;
        let h2 = grid.mesh() * grid.mesh();
        let (axis_eigenvalues, basis) = match grid.bc() {
            BoundaryCondition::Periodic => (
                (0..n).map(|k| 4.0 / h2 * (PI * k as f64 / big_n).sin().powi(2)).collect(),
                SpectralBasis::Fourier(NdFft::new(&vec![n; grid.dim()])),
            ),
            BoundaryCondition::Dirichlet => (
                (1..=n).map(|k| 4.0 / h2 * (PI * k as f64 / (2.0 * big_n)).sin().powi(2)).collect(),
                SpectralBasis::Sine(SineTransform::new(n)),
            ),
        };
        Self { grid: *grid, dims: vec![n; grid.dim()], axis_eigenvalues, basis }
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    /// Eigenvalue of `-Δ_h` for the mode with flat index `flat`.
    pub fn laplacian_eigenvalue(&self, flat: usize) -> f64 {
        let idx = self.grid.multi_index(flat);
        (0..self.grid.dim()).map(|a| self.axis_eigenvalues[idx[a]]).sum()
    }

    /// Smallest eigenvalue of `-Δ_h`.
    pub fn lowest_laplacian_eigenvalue(&self) -> f64 {
        self.axis_eigenvalues[0] * self.grid.dim() as f64
    }

    /// Solves `(-Δ_h + shift) u = rhs`; `shift` must keep the operator
    /// invertible (`shift > 0` on periodic grids).
    pub fn solve(&self, rhs: &[f64], shift: f64) -> Vec<f64> {
        assert_eq!(rhs.len(), self.grid.len());
        match &self.basis {
            SpectralBasis::Fourier(fft) => {
                assert!(shift > 0.0, "periodic spectral solve needs a positive shift");
                let mut buf: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.forward(&mut buf);
                for (flat, z) in buf.iter_mut().enumerate() {
                    *z /= self.laplacian_eigenvalue(flat) + shift;
                }
                fft.inverse(&mut buf);
                buf.iter().map(|z| z.re).collect()
            }
            SpectralBasis::Sine(dst) => {
                let mut buf = rhs.to_vec();
                dst.apply_nd(&self.dims, &mut buf);
                let scale = (2.0 / self.grid.points_per_axis() as f64).powi(self.grid.dim() as i32);
                for (flat, v) in buf.iter_mut().enumerate() {
                    *v *= scale / (self.laplacian_eigenvalue(flat) + shift);
                }
                dst.apply_nd(&self.dims, &mut buf);
                buf
            }
        }
    }
}

/// Smallest length `>= n` whose prime factors are 2, 3 and 5.
pub fn fast_length(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}
