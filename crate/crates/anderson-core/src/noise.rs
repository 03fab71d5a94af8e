//! White-noise sampling, mollification and the dilation coupling between
//! the unit box and the `L`-box.

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fast_length, NdFft};
use crate::grid::{BoundaryCondition, LatticeGrid};
use crate::mollifier::{DiscreteKernel, Mollifier};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    White,
    Mollified { epsilon: f64, profile: String },
    Deterministic,
}

impl NoiseKind {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Mollified { .. } => "mollified",
            NoiseKind::Deterministic => "deterministic",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            NoiseKind::Mollified { epsilon, .. } => Some(*epsilon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub grid: LatticeGrid,
    pub values: Vec<f64>,
    pub kind: NoiseKind,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseField {
    pub fn deterministic(grid: &LatticeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid: *grid, values, kind: NoiseKind::Deterministic, seed: 0, stream: 0 })
    }

    pub fn zeros(grid: &LatticeGrid) -> Self {
        Self { grid: *grid, values: vec![0.0; grid.len()], kind: NoiseKind::Deterministic, seed: 0, stream: 0 }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// White noise with cell variance `h^{-d}`, stream 0 of `seed`.
pub fn sample_white(grid: &LatticeGrid, seed: u64) -> NoiseField {
    sample_white_replica(grid, seed, 0)
}

/// White noise for replica `replica`, reproducible in isolation.
pub fn sample_white_replica(grid: &LatticeGrid, seed: u64, replica: u64) -> NoiseField {
    let mut r = rng::stream(seed, replica);
    let sd = grid.cell_volume().sqrt().recip();
    let values = (0..grid.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            z * sd
        })
        .collect();
    NoiseField { grid: *grid, values, kind: NoiseKind::White, seed, stream: replica }
}

/// Discrete convolution with the sampled `ϱ_ε`, with zero extension on
/// Dirichlet grids and wraparound on periodic grids. Accepts white and
/// deterministic inputs.
pub fn mollify(noise: &NoiseField, mol: &Mollifier) -> Result<NoiseField> {
    if noise.kind.epsilon().is_some() {
        return Err(Error::InvalidArgument("field is already mollified".into()));
    }
    let kernel = mol.discrete_kernel(&noise.grid)?;
    let values = convolve(&noise.grid, &noise.values, &kernel);
    Ok(NoiseField {
        grid: noise.grid,
        values,
        kind: NoiseKind::Mollified { epsilon: mol.epsilon(), profile: mol.id() },
        seed: noise.seed,
        stream: noise.stream,
    })
}

const DIRECT_KERNEL_LIMIT: usize = 125;

pub fn convolve(grid: &LatticeGrid, values: &[f64], kernel: &DiscreteKernel) -> Vec<f64> {
    if kernel.weights.len() <= DIRECT_KERNEL_LIMIT {
        convolve_direct(grid, values, kernel)
    } else {
        convolve_fft(grid, values, kernel)
    }
}

/// Direct summation; shift-equivariant bit for bit on periodic grids.
pub fn convolve_direct(grid: &LatticeGrid, values: &[f64], kernel: &DiscreteKernel) -> Vec<f64> {
    let n = grid.nodes_per_axis() as isize;
    let d = grid.dim();
    let vol = grid.cell_volume();
    let taps: Vec<([isize; 3], f64)> = (0..kernel.weights.len())
        .filter(|&k| kernel.weights[k] != 0.0)
        .map(|k| (kernel.offset(k), kernel.weights[k] * vol))
        .collect();
    (0..grid.len())
        .map(|flat| {
            let idx = grid.multi_index(flat);
            let mut acc = 0.0;
            'tap: for (off, w) in &taps {
                let mut j = [0usize; 3];
                for a in 0..d {
                    let k = idx[a] as isize - off[a];
                    j[a] = match grid.bc() {
                        BoundaryCondition::Periodic => k.rem_euclid(n) as usize,
                        BoundaryCondition::Dirichlet => {
                            if k < 0 || k >= n {
                                continue 'tap;
                            }
                            k as usize
                        }
                    };
                }
                acc += w * values[grid.flat_index(&j)];
            }
            acc
        })
        .collect()
}

/// FFT convolution on a padded (Dirichlet) or wrapped (periodic) buffer.
pub fn convolve_fft(grid: &LatticeGrid, values: &[f64], kernel: &DiscreteKernel) -> Vec<f64> {
    let n = grid.nodes_per_axis();
    let d = grid.dim();
    let m = kernel.radius;
    let size = match grid.bc() {
        BoundaryCondition::Periodic => n,
        BoundaryCondition::Dirichlet => fast_length(n + 2 * m),
    };
    let dims = vec![size; d];
    let len = size.pow(d as u32);
    let flat_of = |idx: &[usize]| idx[..d].iter().fold(0, |acc, &i| acc * size + i);
    let mut data = vec![Complex64::new(0.0, 0.0); len];
    for (flat, &v) in values.iter().enumerate() {
        data[flat_of(&grid.multi_index(flat))] = Complex64::new(v, 0.0);
    }
    let mut ker = vec![Complex64::new(0.0, 0.0); len];
    let vol = grid.cell_volume();
    for (k, &w) in kernel.weights.iter().enumerate() {
        let off = kernel.offset(k);
        let mut idx = [0usize; 3];
        for a in 0..d {
            idx[a] = off[a].rem_euclid(size as isize) as usize;
        }
        ker[flat_of(&idx)] += Complex64::new(w * vol, 0.0);
    }
    let fft = NdFft::new(&dims);
    fft.forward(&mut data);
    fft.forward(&mut ker);
    data.iter_mut().zip(&ker).for_each(|(a, b)| *a *= b);
    fft.inverse(&mut data);
    (0..grid.len()).map(|flat| data[flat_of(&grid.multi_index(flat))].re).collect()
}

/// Dilation coupling: the field on `(-1,1)^d` becomes `x ↦ L^{-2} ξ(x/L)`
/// on `(-L,L)^d` with the same number of nodes.
pub fn rescale_noise(noise: &NoiseField, factor: f64) -> Result<NoiseField> {
    let grid = noise.grid.dilate(factor)?;
    let scale = factor.powi(-2);
    let kind = match &noise.kind {
        NoiseKind::Mollified { epsilon, profile } => NoiseKind::Mollified { epsilon: epsilon * factor, profile: profile.clone() },
        k => k.clone(),
    };
    Ok(NoiseField {
        grid,
        values: noise.values.iter().map(|v| v * scale).collect(),
        kind,
        seed: noise.seed,
        stream: noise.stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(d: usize, n: usize) -> LatticeGrid {
        LatticeGrid::new(d, 1.0, n, BoundaryCondition::Periodic).unwrap()
    }

    #[test]
    fn white_is_deterministic() {
        let g = periodic(2, 16);
        assert_eq!(sample_white(&g, 5), sample_white(&g, 5));
        assert_ne!(sample_white(&g, 5).values, sample_white(&g, 6).values);
    }

    #[test]
    fn spike_reproduces_kernel() {
        for bc in [BoundaryCondition::Periodic, BoundaryCondition::Dirichlet] {
            let g = LatticeGrid::new(2, 1.0, 32, bc).unwrap();
            let mut v = vec![0.0; g.len()];
            let centre = g.flat_index(&[15, 15]);
            v[centre] = 1.0 / g.cell_volume();
            let f = NoiseField::deterministic(&g, v).unwrap();
            for eps in [0.15, 0.5] {
                let mol = Mollifier::standard(2, eps).unwrap();
                let out = mollify(&f, &mol).unwrap();
                let mass: f64 = out.values.iter().sum::<f64>() * g.cell_volume();
                assert!((mass - 1.0).abs() < 1e-10, "eps={eps} mass={mass}");
                let ker = mol.discrete_kernel(&g).unwrap();
                let at_centre = out.values[centre];
                assert!((at_centre - ker.weights[ker.weights.len() / 2]).abs() < 1e-10 * at_centre);
            }
        }
    }

    #[test]
    fn fft_and_direct_agree() {
        for bc in [BoundaryCondition::Periodic, BoundaryCondition::Dirichlet] {
            let g = LatticeGrid::new(2, 1.0, 24, bc).unwrap();
            let w = sample_white(&g, 1);
            let ker = Mollifier::standard(2, 0.3).unwrap().discrete_kernel(&g).unwrap();
            let a = convolve_direct(&g, &w.values, &ker);
            let b = convolve_fft(&g, &w.values, &ker);
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{bc:?} {err}");
        }
    }

    #[test]
    fn rescale_identity_and_sup() {
        let g = periodic(1, 64);
        let w = sample_white(&g, 3);
        assert_eq!(rescale_noise(&w, 1.0).unwrap(), w);
        let r = rescale_noise(&w, 3.0).unwrap();
        assert_eq!(r.max_abs(), w.max_abs() * 3f64.powi(-2));
        assert_eq!(r.grid.half_width(), 3.0);
    }
}
