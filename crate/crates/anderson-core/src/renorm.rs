//! Renormalisation constants
//!
//! ```text
//! c1  = ∫ P_+(x) ϱ_ε^{*2}(x) dx
//! c11 = ∫∫∫ P_+(x1) P_+(x2) P_+(x3) ϱ_ε^{*2}(x1+x2) ϱ_ε^{*2}(x2+x3)
//! c12 = ∫∫∫ P_+(x1) P_+(x2) (P_+(x3) ϱ_ε^{*2}(x3) - c1 δ_0(x3)) ϱ_ε^{*2}(x1+x2+x3)
//! ```
//!
//! All integrands are radial, so the continuum route reduces them to
//! one-dimensional integrals: with `Q = P_+ * ϱ_ε^{*2}` and `S = P_+ * Q`,
//! `c11 = ∫ P_+ Q²` and `c12 = ∫ P_+ ϱ_ε^{*2} (S - S(0))`. Radial
//! convolutions in `R^3` use
//! `(f*g)(s) = (2π/s) ∫_0^∞ t f(t) [G(s+t) - G(|s-t|)] dt`, `G(u) = ∫_0^u v g(v) dv`.
//!
//! The Monte-Carlo route samples the defining integrals directly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fast_length, NdFft, SpectralSolver};
use crate::greens::{DyadicDecomposition, GreensKernel, ReflectedKernel, REFLECTION_TAIL_TOL};
use crate::grid::{BoundaryCondition, LatticeGrid};
use crate::mollifier::{Mollifier, SelfConvolution};
use crate::quadrature::{integrate_with_breaks, GaussRule};
use crate::rng;
use crate::special::sphere_area;

/// Polynomial annihilation order used for every constant.
pub const ANNIHILATION_ORDER: usize = 4;

/// Relative accuracy a quadrature constant must reach.
pub const TARGET_RELATIVE_ERROR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstantsMethod {
    ContinuumQuadrature,
    LatticeSelfEnergy,
    MonteCarloOracle,
}

impl ConstantsMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstantsMethod::ContinuumQuadrature => "continuum",
            ConstantsMethod::LatticeSelfEnergy => "lattice",
            ConstantsMethod::MonteCarloOracle => "monte-carlo",
        }
    }
}

/// Value with an absolute error estimate (one standard error for
/// Monte-Carlo values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenormConstants {
    pub dim: usize,
    pub mass: f64,
    pub cutoff_index: i32,
    pub epsilon: f64,
    pub mollifier: String,
    pub c1: f64,
    pub c11: f64,
    pub c12: f64,
    pub total: f64,
    pub method: ConstantsMethod,
    pub error_estimate: f64,
    /// Set when `ε > 2^{-n_a}`, outside the range where the split of the
    /// kernel at scale `2^{-n_a}` leaves the mollifier inside `P_+`.
    pub cutoff_sensitive: bool,
}

impl RenormConstants {
    fn assemble(
        kernel: &GreensKernel,
        mol: &Mollifier,
        c1: Estimate,
        c11: Estimate,
        c12: Estimate,
        method: ConstantsMethod,
    ) -> Self {
        let dim = kernel.dim();
        let total = match dim {
            1 => 0.0,
            2 => c1.value,
            _ => c1.value + c11.value + c12.value,
        };
        let error_estimate = match dim {
            1 => 0.0,
            2 => c1.error,
            _ => (c1.error.powi(2) + c11.error.powi(2) + c12.error.powi(2)).sqrt(),
        };
        Self {
            dim,
            mass: kernel.mass(),
            cutoff_index: kernel.cutoff_index(),
            epsilon: mol.epsilon(),
            mollifier: mol.id(),
            c1: c1.value,
            c11: c11.value,
            c12: c12.value,
            total,
            method,
            error_estimate,
            cutoff_sensitive: mol.epsilon() > 2f64.powi(-kernel.cutoff_index()),
        }
    }
}

type DecompositionCache = Mutex<HashMap<(usize, u64), std::sync::Arc<DyadicDecomposition>>>;

/// Shared decomposition per `(d, a)`.
pub fn decomposition(dim: usize, mass: f64) -> Result<std::sync::Arc<DyadicDecomposition>> {
    static CACHE: OnceLock<DecompositionCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (dim, mass.to_bits());
    if let Some(d) = cache.lock().unwrap().get(&key) {
        return Ok(d.clone());
    }
    let dec = std::sync::Arc::new(GreensKernel::new(dim, mass)?.decompose(ANNIHILATION_ORDER)?);
    Ok(cache.lock().unwrap().entry(key).or_insert(dec).clone())
}

fn radial_breaks(eps: f64, support: f64, upper: f64) -> Vec<f64> {
    let mut b = vec![0.0, upper];
    let mut x = eps / 64.0;
    while x < upper {
        b.push(x);
        x *= 2.0;
    }
    for f in [0.25, 0.5, 0.75, 1.0] {
        b.push(f * support);
    }
    for f in [0.5, 1.0, 1.5, 2.0] {
        b.push(f * eps);
    }
    b.retain(|&v| v >= 0.0 && v <= upper);
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * upper);
    b
}

/// `c1 = ∫ P_+ ϱ_ε^{*2}` by adaptive radial quadrature.
pub fn compute_c1(mass: f64, mol: &Mollifier) -> Result<Estimate> {
    let dim = mol.dim();
    let dec = decomposition(dim, mass)?;
    let g = mol.self_convolution();
    let area = sphere_area(dim);
    let upper = g.support();
    let breaks = radial_breaks(mol.epsilon(), dec.plus_support(), upper);
    let r = integrate_with_breaks(
        |r| {
            if r == 0.0 {
                return 0.0;
            }
            area * r.powi(dim as i32 - 1) * dec.plus_radial(r) * g.eval(r)
        },
        &breaks,
        0.0,
        1e-10,
    );
    let est = Estimate { value: r.value, error: r.error };
    if !(r.relative_error() <= TARGET_RELATIVE_ERROR) {
        return Err(Error::QuadratureFailure { estimate: r.relative_error() });
    }
    Ok(est)
}

/// Uniformly spaced samples on consecutive regions with local cubic
/// interpolation.
struct PiecewiseTable {
    regions: Vec<(f64, f64, Vec<f64>)>,
    end: f64,
    tail: f64,
}

impl PiecewiseTable {
    fn build<F: Fn(f64) -> f64 + Sync>(f: F, breaks: &[f64], intervals: usize, tail: f64) -> Self {
        let regions = breaks
            .windows(2)
            .map(|w| {
                let step = (w[1] - w[0]) / intervals as f64;
                let values: Vec<f64> = (0..=intervals).into_par_iter().map(|j| f(w[0] + j as f64 * step)).collect();
                (w[0], step, values)
            })
            .collect();
        Self { regions, end: *breaks.last().unwrap(), tail }
    }

    fn eval(&self, x: f64) -> f64 {
        if x >= self.end {
            return self.tail;
        }
        let region = self
            .regions
            .iter()
            .find(|(start, step, values)| x < start + step * (values.len() - 1) as f64)
            .unwrap_or_else(|| self.regions.last().unwrap());
        let (start, step, values) = region;
        let n = values.len();
        let t = (x - start) / step;
        let i0 = ((t.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
        let u = t - i0 as f64;
        let l = |k: usize| -> f64 {
            let mut p = 1.0;
            for j in 0..4 {
                if j != k {
                    p *= (u - j as f64) / (k as f64 - j as f64);
                }
            }
            p
        };
        (0..4).map(|k| values[i0 + k] * l(k)).sum()
    }
}

/// `G(u) = ∫_0^u v f(v) dv` tabulated with Hermite interpolation (the
/// derivative `u f(u)` is known exactly).
struct Cumulative {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    end: f64,
}

impl Cumulative {
    fn new<F: Fn(f64) -> f64 + Sync>(f: &F, end: f64, intervals: usize) -> Self {
        let step = end / intervals as f64;
        let rule = GaussRule::new(10);
        let pieces: Vec<f64> = (0..intervals)
            .into_par_iter()
            .map(|j| {
                let a = j as f64 * step;
                rule.integrate(|v| v * f(v), a, a + step)
            })
            .collect();
        let mut values = Vec::with_capacity(intervals + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for p in pieces {
            acc += p;
            values.push(acc);
        }
        // `u f(u)` at 0 is taken just off the origin, where `f` may be singular.
        let slopes = (0..=intervals)
            .into_par_iter()
            .map(|j| {
                let u = (j as f64 * step).max(1e-9 * step);
                u * f(u) * step
            })
            .collect();
        Self { step, values, slopes, end }
    }

    fn eval(&self, u: f64) -> f64 {
        if u >= self.end {
            return *self.values.last().unwrap();
        }
        if u <= 0.0 {
            return 0.0;
        }
        let t = u / self.step;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let s = t - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    }
}

/// 3-D radial convolution `(f*g)(s)` given `t ↦ t f(t)` on `[0, f_end]`
/// and the cumulative `G` of `g`.
fn radial_convolution_3d(
    s: f64,
    t_f: &dyn Fn(f64) -> f64,
    f_breaks: &[f64],
    cumulative: &dyn Fn(f64) -> f64,
    rule: &GaussRule,
) -> f64 {
    let mut breaks: Vec<f64> = f_breaks.to_vec();
    let end = *breaks.last().unwrap();
    if s > 0.0 && s < end {
        breaks.push(s);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let integral = rule.integrate_panels(|t| t_f(t) * (cumulative(s + t) - cumulative((s - t).abs())), &breaks);
    2.0 * PI / s * integral
}

/// `(c11, c12)` in `d = 3`.
pub fn compute_c11_c12(mass: f64, mol: &Mollifier) -> Result<(Estimate, Estimate)> {
    if mol.dim() != 3 {
        return Err(Error::InvalidArgument("c11 and c12 are defined in d = 3".into()));
    }
    let fine = c11_c12_with_rule(mass, mol, 24)?;
    let coarse = c11_c12_with_rule(mass, mol, 16)?;
    let e11 = (fine.0 - coarse.0).abs() + 1e-13 * fine.0.abs();
    let e12 = (fine.1 - coarse.1).abs() + 1e-13 * fine.1.abs();
    let scale = fine.0.abs().max(fine.1.abs());
    if !(e11.max(e12) <= TARGET_RELATIVE_ERROR * scale) {
        return Err(Error::QuadratureFailure { estimate: e11.max(e12) / scale });
    }
    Ok((Estimate { value: fine.0, error: e11 }, Estimate { value: fine.1, error: e12 }))
}

fn c11_c12_with_rule(mass: f64, mol: &Mollifier, nodes: usize) -> Result<(f64, f64)> {
    let dec = decomposition(3, mass)?;
    let g: SelfConvolution = mol.self_convolution();
    let eps = mol.epsilon();
    let big_r = dec.plus_support();
    let rule = GaussRule::new(nodes);
    let p = |r: f64| dec.plus_radial(r);
    let gp = Cumulative::new(&p, big_r, 8192);
    let gp_eval = |u: f64| gp.eval(u);

    let g_breaks = radial_breaks(eps, 2.0 * eps, 2.0 * eps);
    let t_g = |t: f64| t * g.eval(t);
    let q_at = |s: f64| -> f64 {
        if s < 1e-9 * eps {
            4.0 * PI * rule.integrate_panels(|t| t * t * g.eval(t) * p(t), &g_breaks)
        } else {
            radial_convolution_3d(s, &t_g, &g_breaks, &gp_eval, &rule)
        }
    };
    let q_end = big_r + 2.0 * eps;
    let q_breaks = [0.0, 4.0 * eps, q_end];
    // Tabulate s·Q(s), which stays bounded.
    let sq = PiecewiseTable::build(|s| s * q_at(s), &q_breaks, 2048, 0.0);
    let q = |s: f64| if s < 1e-9 * eps { q_at(s) } else { sq.eval(s) / s };
    let q0 = q_at(0.0);

    let wide = radial_breaks(eps, big_r, big_r);
    let c11 = 4.0 * PI * rule.integrate_panels(|r| r * r * p(r) * q(r) * q(r), &wide);

    let t_q = |t: f64| sq.eval(t);
    let q_wide = radial_breaks(eps, big_r, q_end);
    let s_at = |r: f64| -> f64 {
        if r == 0.0 {
            4.0 * PI * rule.integrate_panels(|t| t * t * p(t) * q(t), &wide)
        } else {
            radial_convolution_3d(r, &t_q, &q_wide, &gp_eval, &rule)
        }
    };
    let _ = q0;
    let s0 = s_at(0.0);
    let c12 = 4.0 * PI * rule.integrate_panels(|r| r * r * p(r) * g.eval(r) * (s_at(r) - s0), &g_breaks);
    Ok((c11, c12))
}

type ConstantsCache = Mutex<HashMap<(usize, u64, u64, String), RenormConstants>>;

/// Continuum constants for `(d, a, ε, profile)`, cached process-wide.
pub fn continuum_constants(mass: f64, mol: &Mollifier) -> Result<RenormConstants> {
    static CACHE: OnceLock<ConstantsCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (mol.dim(), mass.to_bits(), mol.epsilon().to_bits(), mol.id());
    if let Some(c) = cache.lock().unwrap().get(&key) {
        return Ok(c.clone());
    }
    let kernel = GreensKernel::new(mol.dim(), mass)?;
    let c1 = compute_c1(mass, mol)?;
    let zero = Estimate { value: 0.0, error: 0.0 };
    let (c11, c12) = if mol.dim() == 3 { compute_c11_c12(mass, mol)? } else { (zero, zero) };
    let out = RenormConstants::assemble(&kernel, mol, c1, c11, c12, ConstantsMethod::ContinuumQuadrature);
    cache.lock().unwrap().insert(key, out.clone());
    Ok(out)
}

/// Discrete counterpart of `c1`: `Σ_y G̃_h(y) Cov(y) h^d`, where `Cov` is
/// the exact covariance of the discrete mollified noise and `G̃_h` is the
/// periodic lattice Green's function of `-Δ_h + a` with its smooth
/// long-range part `P_- + Σ_{m≠0} P(· + 2Lm)` replaced by the continuum
/// one, so that the value converges to `c1` as `h → 0`.
pub fn lattice_self_energy(grid: &LatticeGrid, mass: f64, mol: &Mollifier) -> Result<f64> {
    let dim = grid.dim();
    let kernel = mol.discrete_kernel(grid)?;
    let dec = decomposition(dim, mass)?;
    let periodic = LatticeGrid::new(dim, grid.half_width(), grid.points_per_axis(), BoundaryCondition::Periodic)?;
    let n = periodic.nodes_per_axis();
    let h = grid.mesh();
    let vol = grid.cell_volume();

    // Autocorrelation of the kernel on a padded cube.
    let m = kernel.radius;
    let side = fast_length(4 * m + 1);
    let dims = vec![side; dim];
    let len = side.pow(dim as u32);
    let flat_of = |idx: &[isize]| -> usize {
        idx[..dim].iter().fold(0usize, |acc, &i| acc * side + i.rem_euclid(side as isize) as usize)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (k, &w) in kernel.weights.iter().enumerate() {
        buf[flat_of(&kernel.offset(k))] = Complex64::new(w, 0.0);
    }
    let fft = NdFft::new(&dims);
    fft.forward(&mut buf);
    buf.iter_mut().for_each(|z| *z = Complex64::new(z.norm_sqr(), 0.0));
    fft.inverse(&mut buf);

    // Lattice Green's function column at the origin.
    let mut delta = vec![0.0; periodic.len()];
    delta[0] = 1.0;
    let column = SpectralSolver::new(&periodic).solve(&delta, mass);

    let images = ReflectedKernel::new(*dec.kernel(), grid.half_width(), BoundaryCondition::Dirichlet)?;
    let range = images.truncation() as i64;
    let span = 2 * m as isize;
    let count = (2 * span + 1).pow(dim as u32) as usize;
    let mut total = 0.0;
    for flat in 0..count {
        let mut off = [0isize; 3];
        let mut rest = flat;
        for a in (0..dim).rev() {
            off[a] = (rest % (2 * span as usize + 1)) as isize - span;
            rest /= 2 * span as usize + 1;
        }
        let cov = vol * buf[flat_of(&off)].re;
        if cov.abs() < 1e-300 {
            continue;
        }
        let mut idx = [0usize; 3];
        let mut y = [0.0; 3];
        for a in 0..dim {
            idx[a] = off[a].rem_euclid(n as isize) as usize;
            y[a] = off[a] as f64 * h;
        }
        let g_h = column[periodic.flat_index(&idx)] / vol;
        let mut smooth = dec.minus(&y);
        let side_m = (2 * range + 1) as usize;
        for mf in 0..side_m.pow(dim as u32) {
            let mut rest = mf;
            let mut shifted = y;
            let mut origin = true;
            for s in shifted.iter_mut().take(dim) {
                let mi = (rest % side_m) as i64 - range;
                rest /= side_m;
                origin &= mi == 0;
                *s += 2.0 * grid.half_width() * mi as f64;
            }
            if !origin {
                smooth += dec.kernel().radial(shifted[..dim].iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
        total += (g_h - smooth) * cov * vol;
    }
    let _ = REFLECTION_TAIL_TOL;
    Ok(total)
}

/// Constants with `c1` from the lattice self energy and, in `d = 3`, the
/// continuum `c11`, `c12`.
pub fn lattice_constants(grid: &LatticeGrid, mass: f64, mol: &Mollifier) -> Result<RenormConstants> {
    let kernel = GreensKernel::new(mol.dim(), mass)?;
    let c1 = Estimate { value: lattice_self_energy(grid, mass, mol)?, error: 0.0 };
    let zero = Estimate { value: 0.0, error: 0.0 };
    let (c11, c12) = if mol.dim() == 3 { compute_c11_c12(mass, mol)? } else { (zero, zero) };
    Ok(RenormConstants::assemble(&kernel, mol, c1, c11, c12, ConstantsMethod::LatticeSelfEnergy))
}

fn sample_self_convolution(mol: &Mollifier, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let a = mol.sample(rng);
    let b = mol.sample(rng);
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Point in `B(0, R) ⊂ R^3` with density `1/(2πR²|x|)`.
fn sample_inverse_radius(rng: &mut ChaCha8Rng, big_r: f64) -> ([f64; 3], f64) {
    let r = big_r * rng.random::<f64>().sqrt();
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    let density = 1.0 / (2.0 * PI * big_r * big_r * r);
    ([r * s * phi.cos(), r * s * phi.sin(), r * z], density)
}

fn norm3(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Mean and standard error of i.i.d. draws, split into a fixed number of
/// independently seeded chunks so the result does not depend on threading.
fn monte_carlo<F>(samples: usize, seed: u64, tag: u64, draw: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    const CHUNKS: usize = 64;
    let per = samples.div_ceil(CHUNKS);
    let sums: Vec<(f64, f64, usize)> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::auxiliary_stream(seed, (tag << 16) | c as u64);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..per {
                let v = draw(&mut r);
                s += v;
                s2 += v * v;
            }
            (s, s2, per)
        })
        .collect();
    let (s, s2, n) = sums.iter().fold((0.0, 0.0, 0usize), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2));
    let nf = n as f64;
    let mean = s / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Estimate { value: mean, error: (var / nf).sqrt() }
}

/// Monte-Carlo estimate of `c1 = E[P_+(Y - Z)]`, `Y, Z ~ ϱ_ε`.
pub fn monte_carlo_c1(mass: f64, mol: &Mollifier, samples: usize, seed: u64) -> Result<Estimate> {
    let dec = decomposition(mol.dim(), mass)?;
    Ok(monte_carlo(samples, seed, 1, |r| {
        let y = mol.sample(r);
        let z = mol.sample(r);
        dec.plus(&sub(&y, &z)).unwrap_or(0.0)
    }))
}

/// Monte-Carlo estimates of `c11` and `c12` (d = 3).
pub fn monte_carlo_c11_c12(mass: f64, mol: &Mollifier, samples: usize, seed: u64) -> Result<(Estimate, Estimate)> {
    if mol.dim() != 3 {
        return Err(Error::InvalidArgument("c11 and c12 are defined in d = 3".into()));
    }
    let dec = decomposition(3, mass)?;
    let big_r = dec.plus_support();
    let plus = |x: &[f64; 3]| dec.plus(x).unwrap_or(0.0);
    // c11 = E[P_+(u - x) P_+(x) P_+(w - x) / q(x)], u, w ~ ϱ^{*2}, x ~ q.
    let c11 = monte_carlo(samples, seed, 2, |r| {
        let u = sample_self_convolution(mol, r);
        let w = sample_self_convolution(mol, r);
        let (x, q) = sample_inverse_radius(r, big_r);
        plus(&sub(&u, &x)) * plus(&x) * plus(&sub(&w, &x)) / q
    });
    // c12 = E[P_+(y) P_+(x)/q(x) (P_+(x + y - v) - P_+(x - v))], y, v ~ ϱ^{*2}, x ~ q.
    let c12 = monte_carlo(samples, seed, 3, |r| {
        let y = sample_self_convolution(mol, r);
        let v = sample_self_convolution(mol, r);
        let (x, q) = sample_inverse_radius(r, big_r);
        if norm3(&y) == 0.0 {
            return 0.0;
        }
        plus(&y) * plus(&x) / q * (plus(&sub(&add(&x, &y), &v)) - plus(&sub(&x, &v)))
    });
    Ok((c11, c12))
}

pub fn monte_carlo_constants(mass: f64, mol: &Mollifier, samples: usize, seed: u64) -> Result<RenormConstants> {
    let kernel = GreensKernel::new(mol.dim(), mass)?;
    let c1 = monte_carlo_c1(mass, mol, samples, seed)?;
    let zero = Estimate { value: 0.0, error: 0.0 };
    let (c11, c12) = if mol.dim() == 3 { monte_carlo_c11_c12(mass, mol, samples, seed)? } else { (zero, zero) };
    Ok(RenormConstants::assemble(&kernel, mol, c1, c11, c12, ConstantsMethod::MonteCarloOracle))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledConstants {
    pub factor: f64,
    pub epsilon: f64,
    pub base: RenormConstants,
    /// Constants evaluated at `εL`.
    pub dilated: RenormConstants,
    pub c1: f64,
    pub c11: f64,
    pub c12: f64,
    pub total: f64,
    /// `L^{-2} C_ε - C̃_ε`.
    pub delta_l: f64,
    /// `delta_l` at `ε/2` minus `delta_l` at `ε`.
    pub delta_sensitivity: f64,
}

fn tilde_values(dim: usize, factor: f64, dilated: &RenormConstants) -> (f64, f64, f64, f64) {
    let l2 = factor.powi(-2);
    match dim {
        1 => (0.0, 0.0, 0.0, 0.0),
        2 => {
            let c1 = l2 * dilated.c1;
            (c1, 0.0, 0.0, c1)
        }
        _ => {
            let c1 = dilated.c1 / factor;
            let c11 = l2 * dilated.c11;
            let c12 = l2 * dilated.c12;
            (c1, c11, c12, c1 + c11 + c12)
        }
    }
}

/// Constants of the dilated problem on `(-L, L)^d` with noise
/// `L^{d/2-2} ζ_{εL}`, from continuum constants at `εL`.
pub fn scaled_constants(base: &RenormConstants, factor: f64, mol: &Mollifier) -> Result<ScaledConstants> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidArgument(format!("dilation factor {factor}")));
    }
    if mol.epsilon() != base.epsilon || mol.dim() != base.dim {
        return Err(Error::InvalidArgument("mollifier does not match the base constants".into()));
    }
    let dim = base.dim;
    let dilated = if factor == 1.0 { base.clone() } else { continuum_constants(base.mass, &mol.with_epsilon(base.epsilon * factor)?)? };
    let (c1, c11, c12, total) = tilde_values(dim, factor, &dilated);
    let delta_l = factor.powi(-2) * base.total - total;
    let delta_sensitivity = if factor == 1.0 || dim == 1 {
        0.0
    } else {
        let half = mol.with_epsilon(0.5 * base.epsilon)?;
        let base_half = continuum_constants(base.mass, &half)?;
        let dil_half = continuum_constants(base.mass, &mol.with_epsilon(0.5 * base.epsilon * factor)?)?;
        let (_, _, _, t_half) = tilde_values(dim, factor, &dil_half);
        (factor.powi(-2) * base_half.total - t_half) - delta_l
    };
    Ok(ScaledConstants {
        factor,
        epsilon: base.epsilon,
        base: base.clone(),
        dilated,
        c1,
        c11,
        c12,
        total,
        delta_l,
        delta_sensitivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d1_total_is_zero() {
        let mol = Mollifier::standard(1, 0.1).unwrap();
        let c = continuum_constants(1.0, &mol).unwrap();
        assert_eq!(c.total, 0.0);
        assert!(c.c1 > 0.0);
    }

    #[test]
    fn piecewise_table_interpolates_cubics_exactly() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let t = PiecewiseTable::build(f, &[0.0, 0.3, 1.0], 16, 0.0);
        for &x in &[0.0, 0.01, 0.29, 0.31, 0.77, 0.999] {
            assert!((t.eval(x) - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_table_matches_closed_form() {
        let f = |v: f64| (-v).exp();
        let c = Cumulative::new(&f, 2.0, 512);
        for &u in &[0.0, 0.1, 0.77, 1.5, 2.0] {
            let exact = 1.0 - (1.0 + u) * (-u as f64).exp();
            assert!((c.eval(u) - exact).abs() < 1e-11, "{u}");
        }
    }
}
