//! Lattice Hamiltonian `-Δ_h + ξ_ε + C` and its resolvents.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fft::SpectralSolver;
use crate::grid::{BoundaryCondition, LatticeGrid};
use crate::noise::NoiseField;
use crate::sparse::{pcg, BandedLdl, CsrMatrix};
use crate::spectra::{lowest_eigenpairs_with, SpectrumOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    grid: LatticeGrid,
    potential: NoiseField,
    shift: f64,
    matrix: CsrMatrix,
}

/// Assembles `-Δ_h + diag(ξ + C)`. Only the lower triangle is generated;
/// the upper one is its mirror, so the matrix is symmetric bit for bit.
pub fn assemble(grid: &LatticeGrid, noise: &NoiseField, c: f64) -> Result<HamiltonianMatrix> {
    if !grid.same_lattice(&noise.grid) || noise.values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "noise on N={} L={} {} does not match N={} L={} {}",
            noise.grid.points_per_axis(),
            noise.grid.half_width(),
            noise.grid.bc().as_str(),
            grid.points_per_axis(),
            grid.half_width(),
            grid.bc().as_str()
        )));
    }
    let d = grid.dim();
    let n = grid.nodes_per_axis();
    let h2 = grid.mesh() * grid.mesh();
    let off = -1.0 / h2;
    let centre = 2.0 * d as f64 / h2;
    let mut lower = Vec::with_capacity(grid.len() * (d + 1));
    for flat in 0..grid.len() {
        lower.push((flat, flat, centre + noise.values[flat] + c));
        let idx = grid.multi_index(flat);
        for axis in 0..d {
            let mut nb = idx;
            match (idx[axis], grid.bc()) {
                (0, BoundaryCondition::Dirichlet) => continue,
                (0, BoundaryCondition::Periodic) => nb[axis] = n - 1,
                (i, _) => nb[axis] = i - 1,
            }
            let j = grid.flat_index(&nb);
            lower.push((flat.max(j), flat.min(j), off));
        }
    }
    let matrix = CsrMatrix::from_lower_triplets(grid.len(), &lower)?;
    Ok(HamiltonianMatrix { grid: *grid, potential: noise.clone(), shift: c, matrix })
}

impl HamiltonianMatrix {
    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn potential(&self) -> &NoiseField {
        &self.potential
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `ξ + C` at every node.
    pub fn diagonal_potential(&self) -> Vec<f64> {
        self.potential.values.iter().map(|v| v + self.shift).collect()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul(v)
    }

    /// Coordinate triplets `i j value`, one per stored entry, 0-based.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.len(), self.len(), self.matrix.nnz())?;
        for i in 0..self.len() {
            for (j, v) in self.matrix.row(i) {
                writeln!(out, "{i} {j} {v:e}")?;
            }
        }
        Ok(())
    }
}

/// `(H + a)^{-1}`, valid once `H + a` is positive definite.
pub struct ResolventHandle<'a> {
    base: &'a HamiltonianMatrix,
    shift: f64,
    settings: SolverSettings,
    lowest: f64,
    preconditioner: SpectralSolver,
    preconditioner_shift: f64,
}

impl<'a> ResolventHandle<'a> {
    /// Probes the smallest eigenvalue of `H` and refuses shifts that do not
    /// make `H + a` positive definite.
    pub fn new(base: &'a HamiltonianMatrix, a: f64, settings: SolverSettings) -> Result<Self> {
        let probe = lowest_eigenpairs_with(base.matrix(), Some(base.grid()), 1, &SpectrumOptions { residual_tol: 1e-10, ..Default::default() })?
            .require_complete()?;
        let lowest = probe.eigenvalues[0];
        if !(lowest + a > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("lowest eigenvalue {lowest} with shift {a}")));
        }
        let pot = base.diagonal_potential();
        let mean = pot.iter().sum::<f64>() / pot.len() as f64;
        Ok(Self {
            base,
            shift: a,
            settings,
            lowest,
            preconditioner: SpectralSolver::new(base.grid()),
            preconditioner_shift: (mean + a).max(lowest + a),
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn lowest_eigenvalue(&self) -> f64 {
        self.lowest
    }

    pub fn settings(&self) -> SolverSettings {
        self.settings
    }

    pub fn base(&self) -> &HamiltonianMatrix {
        self.base
    }
}

/// `f = (H + a)^{-1} g` by conjugate gradients preconditioned with the
/// spectral inverse of `-Δ_h + c`, `c` the mean potential plus `a`.
pub fn resolvent_apply(handle: &ResolventHandle, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != handle.base.len() {
        return Err(Error::GridMismatch(format!("{} values for {} nodes", g.len(), handle.base.len())));
    }
    let m = handle.base.matrix();
    let a = handle.shift;
    let out = pcg(
        |x, y| {
            m.mul_into(x, y);
            y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
        },
        |r, z| z.copy_from_slice(&handle.preconditioner.solve(r, handle.preconditioner_shift)),
        g,
        handle.settings.tol,
        handle.settings.max_iter,
    )?;
    Ok(out.solution)
}

/// `(H + s) f = g` by a banded factorisation when affordable, else by
/// tightly converged CG.
pub fn direct_solve(h: &HamiltonianMatrix, s: f64, g: &[f64]) -> Result<Vec<f64>> {
    let m = h.matrix();
    if BandedLdl::cost(m) <= 6e9 {
        let f = BandedLdl::new(m, -s)?;
        if f.negative_pivots() > 0 {
            return Err(Error::NotPositiveDefinite(format!("H + {s} has {} negative pivots", f.negative_pivots())));
        }
        return Ok(f.solve(g));
    }
    let diag = m.diagonal();
    let out = pcg(
        |x, y| {
            m.mul_into(x, y);
            y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += s * xi);
        },
        |r, z| z.iter_mut().zip(r.iter().zip(&diag)).for_each(|(zi, (ri, di))| *zi = ri / (di + s)),
        g,
        1e-14,
        50 * m.dim(),
    )?;
    Ok(out.solution)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    /// `‖f_{k+1} - f_k‖₂` per step.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.increments.len()
    }

    /// Geometric mean of the ratios after the first two steps, a stable
    /// summary of the contraction factor.
    pub fn contraction(&self) -> f64 {
        let tail: Vec<f64> = self.ratios.iter().skip(2).copied().filter(|r| *r > 0.0).collect();
        let used = if tail.is_empty() { self.ratios.iter().copied().filter(|r| *r > 0.0).collect() } else { tail };
        if used.is_empty() {
            return 0.0;
        }
        (used.iter().map(|r| r.ln()).sum::<f64>() / used.len() as f64).exp()
    }
}

/// Consecutive non-contracting steps that count as divergence.
pub const DIVERGENCE_STREAK: usize = 5;

/// Fixed point of `f ↦ (-Δ_h + a)^{-1}(g - (ξ + C + b) f)`, which solves
/// `(H + a + b) f = g`. Iteration starts from `(-Δ_h + a)^{-1} g` and stops
/// once `‖f_{k+1} - f_k‖ ≤ tol ‖f_{k+1}‖`.
pub fn fixed_point_resolvent(
    grid: &LatticeGrid,
    noise: &NoiseField,
    c: f64,
    a: f64,
    b: f64,
    g: &[f64],
    settings: SolverSettings,
) -> Result<(Vec<f64>, IterationTrace)> {
    if !(b > -2.0 && b < 2.0) {
        return Err(Error::InvalidArgument(format!("b = {b} outside (-2, 2)")));
    }
    if !(a >= 1.0) {
        return Err(Error::InvalidArgument(format!("a = {a} below 1")));
    }
    if !grid.same_lattice(&noise.grid) || g.len() != grid.len() {
        return Err(Error::GridMismatch("fixed point inputs live on different grids".into()));
    }
    let solver = SpectralSolver::new(grid);
    let weight: Vec<f64> = noise.values.iter().map(|v| v + c + b).collect();
    let mut f = solver.solve(g, a);
    let mut trace = IterationTrace::default();
    let mut streak = 0;
    let mut rhs = vec![0.0; g.len()];
    for _ in 0..settings.max_iter {
        for i in 0..g.len() {
            rhs[i] = g[i] - weight[i] * f[i];
        }
        let next = solver.solve(&rhs, a);
        let inc = next.iter().zip(&f).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let size = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if let Some(&prev) = trace.increments.last() {
            let ratio = if prev > 0.0 { inc / prev } else { 0.0 };
            trace.ratios.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
        }
        trace.increments.push(inc);
        f = next;
        if !inc.is_finite() || streak >= DIVERGENCE_STREAK {
            let ratio = trace.ratios.last().copied().unwrap_or(f64::INFINITY);
            return Err(Error::Diverged { iterations: trace.iterations(), ratio });
        }
        if inc <= settings.tol * size {
            trace.converged = true;
            return Ok((f, trace));
        }
    }
    let residual = trace.increments.last().copied().unwrap_or(f64::NAN);
    Err(Error::MaxIterations { iterations: trace.iterations(), residual })
}
