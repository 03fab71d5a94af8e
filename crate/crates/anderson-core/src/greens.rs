//! The whole-space Green's function `P` of `-Δ + a`, its dyadic
//! decomposition into compactly supported layers, and the reflected kernel
//! on the box.
//!
//! With `θ` the smooth step (`1` on `[0, 1/4]`, `0` on `[1/2, ∞)`) the
//! partition function is `φ(r) = θ(r/2) - θ(r)`, supported in `[1/4, 1]`,
//! and `Σ_{ℓ ≥ n} φ(2^ℓ r) = θ(2^{n-1} r)`. The layers are
//!
//! ```text
//! P̄_n = φ(2^n |x|) P                                   (d = 3)
//! P̄_n = (1/2π) ∫_{|x|}^∞ √a K1(√a t) φ(2^n t) dt        (d = 2)
//! P̄_{n_a} = θ(2^{n_a - 1}|x|) P,  P̄_n = 0 for n > n_a  (d = 1)
//! P_n = P̄_n + Σ_{|k|<r} (I_{k,n+1} η_{k,n+1} - I_{k,n} η_{k,n})
//! ```
//!
//! where `I_{k,n} = Σ_{ℓ ≥ n} ∫ x^k P̄_ℓ` and `η_{k,n} = 2^{n(d+|k|)} η_k(2^n ·)`
//! is the dual basis of the monomials against a bump supported in
//! `B(0, 1/2)`. `P_- = P - Σ_{n ≥ n_a} P_n` and `P_+ = P - P_-`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::BoundaryCondition;
use crate::quadrature::{integrate_with_breaks, GaussRule};
use crate::special::{bessel_k0, bessel_k1, sphere_moment};

fn shoulder_rule() -> &'static GaussRule {
    static RULE: std::sync::OnceLock<GaussRule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussRule::new(40))
}

/// `C^∞` step: `0` for `t ≤ 0`, `1` for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// `1` on `[0, 1/4]`, `0` on `[1/2, ∞)`.
pub fn theta(r: f64) -> f64 {
    1.0 - smooth_step(4.0 * r - 1.0)
}

/// Partition function supported in `[1/4, 1]` with `Σ_n φ(2^n r) = 1`.
pub fn partition(r: f64) -> f64 {
    theta(0.5 * r) - theta(r)
}

/// Bump supported in `[0, 1/2)` used for the polynomial corrections.
fn correction_bump(rho: f64) -> f64 {
    let s = 2.0 * rho;
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn pow2(n: i32) -> f64 {
    2f64.powi(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensKernel {
    dim: usize,
    mass: f64,
    root: f64,
    cutoff_index: i32,
}

impl GreensKernel {
    pub fn new(dim: usize, mass: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("kernel dimension {dim}")));
        }
        if !(mass.is_finite() && mass >= 1.0) {
            return Err(Error::InvalidArgument(format!("kernel mass {mass} must be at least 1")));
        }
        let root = mass.sqrt();
        let mut n = root.log2().ceil() as i32;
        while pow2(n) < root {
            n += 1;
        }
        while pow2(n - 1) >= root {
            n -= 1;
        }
        Ok(Self { dim, mass, root, cutoff_index: n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `n_a`, the smallest `n` with `2^{-n} ≤ 1/√a`.
    pub fn cutoff_index(&self) -> i32 {
        self.cutoff_index
    }

    /// `P` as a function of `r = |x|`; infinite at `r = 0` for `d ≥ 2`.
    pub fn radial(&self, r: f64) -> f64 {
        let r = r.abs();
        match self.dim {
            1 => (-self.root * r).exp() / (2.0 * self.root),
            2 => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    bessel_k0(self.root * r) / (2.0 * PI)
                }
            }
            _ => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    (-self.root * r).exp() / (4.0 * PI * r)
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = norm(&x[..self.dim]);
        if r == 0.0 && self.dim >= 2 {
            return Err(Error::SingularPoint);
        }
        Ok(self.radial(r))
    }

    /// `∫ P(z) f(x + z) dz` over `|z| ≤ radius`, in spherical coordinates
    /// around `x` (adaptive in the radius, product rules on the sphere).
    pub fn convolve_at<F: Fn(&[f64; 3]) -> f64>(&self, x: &[f64; 3], f: F, radius: f64) -> f64 {
        let directions = sphere_rule(self.dim);
        let average = |r: f64| -> f64 {
            directions
                .iter()
                .map(|(w, dir)| {
                    let mut p = *x;
                    for a in 0..self.dim {
                        p[a] += r * dir[a];
                    }
                    w * f(&p)
                })
                .sum()
        };
        let integrand = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            r.powi(self.dim as i32 - 1) * self.radial(r) * average(r)
        };
        let scale = 1.0 / self.root;
        let mut breaks = vec![0.0];
        let mut b = scale * 1e-3;
        while b < radius {
            breaks.push(b);
            b *= 4.0;
        }
        breaks.push(radius);
        integrate_with_breaks(integrand, &breaks, 1e-13, 1e-11).value
    }

    pub fn decompose(&self, order: usize) -> Result<DyadicDecomposition> {
        DyadicDecomposition::new(*self, order)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Weighted unit directions whose weights sum to the sphere area.
fn sphere_rule(dim: usize) -> Vec<(f64, [f64; 3])> {
    match dim {
        1 => vec![(1.0, [1.0, 0.0, 0.0]), (1.0, [-1.0, 0.0, 0.0])],
        2 => {
            let m = 64;
            (0..m)
                .map(|j| {
                    let t = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                    (2.0 * PI / m as f64, [t.cos(), t.sin(), 0.0])
                })
                .collect()
        }
        _ => {
            let (nodes, weights) = crate::quadrature::gauss_legendre(24);
            let m = 48;
            let mut out = Vec::with_capacity(nodes.len() * m);
            for (c, w) in nodes.iter().zip(&weights) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..m {
                    let p = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                    out.push((w * 2.0 * PI / m as f64, [s * p.cos(), s * p.sin(), *c]));
                }
            }
            out
        }
    }
}

fn multi_indices(dim: usize, order: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    let o = order as u32;
    for total in 0..o {
        for i in 0..=total {
            for j in 0..=(total - i) {
                let k = total - i - j;
                let idx = [i, j, k];
                if idx[dim..].iter().all(|&v| v == 0) {
                    out.push(idx);
                }
            }
        }
    }
    out.sort_by_key(|k| (k.iter().sum::<u32>(), std::cmp::Reverse(*k)));
    out.dedup();
    out
}

fn degree(k: &[u32; 3]) -> u32 {
    k.iter().sum()
}

fn monomial(x: &[f64; 3], k: &[u32; 3]) -> f64 {
    x[0].powi(k[0] as i32) * x[1].powi(k[1] as i32) * x[2].powi(k[2] as i32)
}

/// How many dyadic levels above `n_a` carry precomputed corrections.
pub const DYADIC_DEPTH: i32 = 40;

#[derive(Debug, Clone)]
pub struct DyadicDecomposition {
    kernel: GreensKernel,
    order: usize,
    indices: Vec<[u32; 3]>,
    /// `moments[n - n_a][k] = I_{k,n}`.
    moments: Vec<Vec<f64>>,
    /// Per level: coefficients of `Σ_k I_{k,n} η_{k,n}` as a polynomial in
    /// `2^n x` multiplying the bump.
    corrections: Vec<Vec<f64>>,
    /// Per level: `(1/2π) ∫_{R/2}^{R} √a K1(√a t)(1 - θ(2^{n-1} t)) dt`
    /// with `R = 2^{-n}` (d = 2 only).
    shoulders: Vec<f64>,
}

impl DyadicDecomposition {
    pub fn new(kernel: GreensKernel, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!("annihilation order {order} must be at least 2")));
        }
        let d = kernel.dim;
        let indices = multi_indices(d, order);
        let m = indices.len();
        let mut gram = DMatrix::zeros(m, m);
        for (i, ki) in indices.iter().enumerate() {
            for (j, kj) in indices.iter().enumerate() {
                let sum = [ki[0] + kj[0], ki[1] + kj[1], ki[2] + kj[2]];
                let angular = sphere_moment(&sum[..d]);
                if angular == 0.0 {
                    continue;
                }
                let p = d as i32 - 1 + degree(&sum) as i32;
                let radial = integrate_with_breaks(
                    |rho| rho.powi(p) * correction_bump(rho),
                    &[0.0, 0.25, 0.5],
                    1e-18,
                    1e-14,
                );
                gram[(i, j)] = angular * radial.value;
            }
        }
        // Rows of the inverse are the dual coefficients c_{k,·}.
        let dual = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("singular moment matrix".into()))?
            .inverse();
        let mut this = Self { kernel, order, indices, moments: Vec::new(), corrections: Vec::new(), shoulders: Vec::new() };
        let n_a = kernel.cutoff_index;
        if d == 2 {
            this.shoulders = (0..=DYADIC_DEPTH + 1)
                .map(|level| this.shoulder_integral(n_a + level, 0.5 * pow2(-(n_a + level))))
                .collect();
        }
        for level in 0..=DYADIC_DEPTH + 1 {
            let n = n_a + level;
            let moments: Vec<f64> = this.indices.iter().map(|k| this.compute_moment(k, n)).collect();
            let mut coeffs = vec![0.0; m];
            for (ki, k) in this.indices.iter().enumerate() {
                if moments[ki] == 0.0 {
                    continue;
                }
                let scale = moments[ki] * pow2(n * (d as i32 + degree(k) as i32));
                for (mi, c) in coeffs.iter_mut().enumerate() {
                    *c += scale * dual[(ki, mi)];
                }
            }
            this.moments.push(moments);
            this.corrections.push(coeffs);
        }
        Ok(this)
    }

    pub fn kernel(&self) -> &GreensKernel {
        &self.kernel
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn multi_indices(&self) -> &[[u32; 3]] {
        &self.indices
    }

    pub fn lowest_level(&self) -> i32 {
        self.kernel.cutoff_index
    }

    pub fn highest_level(&self) -> i32 {
        self.kernel.cutoff_index + DYADIC_DEPTH
    }

    fn level_slot(&self, n: i32) -> usize {
        let slot = n - self.kernel.cutoff_index;
        assert!(
            (0..=DYADIC_DEPTH + 1).contains(&slot),
            "dyadic level {n} outside the precomputed range"
        );
        slot as usize
    }

    /// `I_{k,n}`; `k` indexes [`Self::multi_indices`].
    pub fn moment(&self, k: usize, n: i32) -> f64 {
        self.moments[self.level_slot(n)][k]
    }

    fn compute_moment(&self, k: &[u32; 3], n: i32) -> f64 {
        let d = self.kernel.dim;
        let angular = sphere_moment(&k[..d]);
        if angular == 0.0 {
            return 0.0;
        }
        let big_r = pow2(-n);
        let p = d as i32 - 1 + degree(k) as i32;
        let breaks = [0.0, 0.25 * big_r, 0.5 * big_r, big_r];
        let radial = match d {
            1 => {
                if n > self.kernel.cutoff_index {
                    return 0.0;
                }
                integrate_with_breaks(|r| r.powi(p) * self.tail_cut(n, r), &breaks, 0.0, 1e-14).value
            }
            2 => {
                // ∫_0^R r^p W_n(r) dr with the order of integration swapped.
                let root = self.kernel.root;
                integrate_with_breaks(
                    |t| {
                        if t == 0.0 {
                            return 0.0;
                        }
                        root * bessel_k1(root * t) * theta(pow2(n - 1) * t) * t.powi(p + 1) / (p as f64 + 1.0)
                    },
                    &breaks,
                    0.0,
                    1e-14,
                )
                .value
                    / (2.0 * PI)
            }
            _ => integrate_with_breaks(
                |r| {
                    if r == 0.0 {
                        return 0.0;
                    }
                    r.powi(p) * self.tail_cut(n, r)
                },
                &breaks,
                0.0,
                1e-14,
            )
            .value,
        };
        angular * radial
    }

    /// `(1/2π) ∫_s^R √a K1(√a t)(1 - θ(2^{n-1} t)) dt`, `R = 2^{-n}`, `s ≥ R/2`.
    fn shoulder_integral(&self, n: i32, s: f64) -> f64 {
        let big_r = pow2(-n);
        if s >= big_r {
            return 0.0;
        }
        if s <= 0.5 * big_r && !self.shoulders.is_empty() {
            return self.shoulders[self.level_slot(n)];
        }
        let root = self.kernel.root;
        let rule = shoulder_rule();
        let f = |t: f64| root * bessel_k1(root * t) * (1.0 - theta(pow2(n - 1) * t));
        let mid = 0.75 * big_r;
        let value = if s < mid {
            rule.integrate(f, s, mid) + rule.integrate(f, mid, big_r)
        } else {
            rule.integrate(f, s, big_r)
        };
        value / (2.0 * PI)
    }

    /// `Σ_{ℓ ≥ n} P̄_ℓ` at radius `r`.
    pub fn tail_cut(&self, n: i32, r: f64) -> f64 {
        let big_r = pow2(-n);
        if r >= big_r {
            return 0.0;
        }
        match self.kernel.dim {
            1 => {
                if n > self.kernel.cutoff_index {
                    0.0
                } else {
                    theta(pow2(n - 1) * r) * self.kernel.radial(r)
                }
            }
            2 => {
                let root = self.kernel.root;
                (bessel_k0(root * r) - bessel_k0(root * big_r)) / (2.0 * PI)
                    - self.shoulder_integral(n, r.max(0.5 * big_r))
            }
            _ => theta(pow2(n - 1) * r) * self.kernel.radial(r),
        }
    }

    /// Uncorrected layer `P̄_n` at radius `r`.
    pub fn bar_layer(&self, n: i32, r: f64) -> f64 {
        let big_r = pow2(-n);
        match self.kernel.dim {
            1 => {
                if n == self.kernel.cutoff_index {
                    theta(pow2(n - 1) * r) * self.kernel.radial(r)
                } else {
                    0.0
                }
            }
            2 => {
                if r >= big_r {
                    return 0.0;
                }
                let root = self.kernel.root;
                let lo = r.max(0.25 * big_r);
                let f = |t: f64| root * bessel_k1(root * t) * partition(pow2(n) * t);
                let mut breaks = vec![lo];
                for b in [0.5 * big_r, big_r] {
                    if b > lo {
                        breaks.push(b);
                    }
                }
                integrate_with_breaks(f, &breaks, 0.0, 1e-14).value / (2.0 * PI)
            }
            _ => {
                let phi = partition(pow2(n) * r);
                if phi == 0.0 {
                    0.0
                } else {
                    phi * self.kernel.radial(r)
                }
            }
        }
    }

    /// `Σ_k I_{k,n} η_{k,n}(x)`.
    pub fn correction(&self, n: i32, x: &[f64; 3]) -> f64 {
        let scale = pow2(n);
        let r = norm(&x[..self.kernel.dim]);
        let w = correction_bump(scale * r);
        if w == 0.0 {
            return 0.0;
        }
        let y = [x[0] * scale, x[1] * scale, x[2] * scale];
        let coeffs = &self.corrections[self.level_slot(n)];
        let poly: f64 = self.indices.iter().zip(coeffs).map(|(k, c)| c * monomial(&y, k)).sum();
        w * poly
    }

    /// Layer `P_n(x)`.
    pub fn layer(&self, n: i32, x: &[f64; 3]) -> f64 {
        let r = norm(&x[..self.kernel.dim]);
        self.bar_layer(n, r) + self.correction(n + 1, x) - self.correction(n, x)
    }

    /// Smooth remainder `P_-(x)`, finite everywhere.
    pub fn minus(&self, x: &[f64; 3]) -> f64 {
        let n = self.kernel.cutoff_index;
        let r = norm(&x[..self.kernel.dim]);
        let big_r = pow2(-n);
        let singular_free = if r >= big_r {
            self.kernel.radial(r)
        } else {
            match self.kernel.dim {
                2 => bessel_k0(self.kernel.root * big_r) / (2.0 * PI) + self.shoulder_integral(n, r.max(0.5 * big_r)),
                _ => {
                    let cut = 1.0 - theta(pow2(n - 1) * r);
                    if cut == 0.0 {
                        0.0
                    } else {
                        cut * self.kernel.radial(r)
                    }
                }
            }
        };
        singular_free + self.correction(n, x)
    }

    /// Singular part `P_+(x) = Σ_{n ≥ n_a} P_n(x)`.
    pub fn plus(&self, x: &[f64; 3]) -> Result<f64> {
        let r = norm(&x[..self.kernel.dim]);
        if r == 0.0 && self.kernel.dim >= 2 {
            return Err(Error::SingularPoint);
        }
        let n = self.kernel.cutoff_index;
        Ok(self.tail_cut(n, r) - self.correction(n, x))
    }

    /// `P_+` along the first axis; `P_+` is radial because the corrections
    /// are invariant under coordinate permutations and reflections.
    pub fn plus_radial(&self, r: f64) -> f64 {
        let n = self.kernel.cutoff_index;
        self.tail_cut(n, r) - self.correction(n, &[r, 0.0, 0.0])
    }

    pub fn minus_radial(&self, r: f64) -> f64 {
        self.minus(&[r, 0.0, 0.0])
    }

    /// Support radius of `P_+`.
    pub fn plus_support(&self) -> f64 {
        pow2(-self.kernel.cutoff_index)
    }

    pub fn layer_view(&self, n: i32) -> DyadicLayer<'_> {
        assert!(n >= self.lowest_level() && n <= self.highest_level());
        DyadicLayer { decomposition: self, index: n }
    }
}

/// One dyadic layer `P_n`.
#[derive(Debug, Clone, Copy)]
pub struct DyadicLayer<'a> {
    decomposition: &'a DyadicDecomposition,
    index: i32,
}

impl DyadicLayer<'_> {
    pub fn index(&self) -> i32 {
        self.index
    }

    pub fn support_radius(&self) -> f64 {
        pow2(-self.index)
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        self.decomposition.layer(self.index, x)
    }

    /// `(k, I_{k,n})` pairs.
    pub fn coefficients(&self) -> Vec<([u32; 3], f64)> {
        self.decomposition
            .indices
            .iter()
            .enumerate()
            .map(|(i, k)| (*k, self.decomposition.moment(i, self.index)))
            .collect()
    }
}

/// Default reflection-series tail tolerance.
pub const REFLECTION_TAIL_TOL: f64 = 1e-12;

/// `K(x, y) = Σ_m ε_m P(x - π_m(y))` on `[-L, L]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectedKernel {
    base: GreensKernel,
    half_width: f64,
    bc: BoundaryCondition,
    truncation: usize,
}

impl ReflectedKernel {
    pub fn new(base: GreensKernel, half_width: f64, bc: BoundaryCondition) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!("half width {half_width}")));
        }
        let m = (1.0 + REFLECTION_TAIL_TOL.ln() / (-2.0 * half_width * base.root)).ceil() as usize;
        Ok(Self { base, half_width, bc, truncation: m.max(1) })
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation.max(1);
        self
    }

    pub fn base(&self) -> &GreensKernel {
        &self.base
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `ε_m = (-1)^{|m|}`.
    pub fn sign(m: &[i64]) -> f64 {
        if m.iter().map(|v| v.unsigned_abs()).sum::<u64>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `(π_m(y))_i = (-1)^{m_i} y_i + 2 L m_i`.
    pub fn reflect(&self, m: &[i64], y: &[f64; 3]) -> [f64; 3] {
        let mut out = *y;
        for (a, &mi) in m.iter().enumerate() {
            let s = if mi.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            out[a] = s * y[a] + 2.0 * self.half_width * mi as f64;
        }
        out
    }

    /// Evaluates the truncated series with `f` in place of `P`.
    pub fn sum_images<F: Fn(&[f64; 3]) -> f64>(&self, x: &[f64; 3], y: &[f64; 3], range: i64, f: F) -> f64 {
        let d = self.base.dim;
        let side = (2 * range + 1) as usize;
        let count = side.pow(d as u32);
        let mut m = [0i64; 3];
        let mut total = 0.0;
        for flat in 0..count {
            let mut rest = flat;
            for mi in m.iter_mut().take(d) {
                *mi = (rest % side) as i64 - range;
                rest /= side;
            }
            let image = self.reflect(&m[..d], y);
            let diff = [x[0] - image[0], x[1] - image[1], x[2] - image[2]];
            total += Self::sign(&m[..d]) * f(&diff);
        }
        total
    }

    pub fn eval_k(&self, x: &[f64; 3], y: &[f64; 3]) -> Result<f64> {
        let d = self.base.dim;
        match self.bc {
            BoundaryCondition::Periodic => {
                let diff = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                self.base.eval(&diff[..d])
            }
            BoundaryCondition::Dirichlet => {
                if d >= 2 && (0..d).all(|a| x[a] == y[a]) {
                    return Err(Error::SingularPoint);
                }
                Ok(self.sum_images(x, y, self.truncation as i64, |z| self.base.radial(norm(&z[..d]))))
            }
        }
    }

    /// Bound on the terms dropped by truncating at `|m_i| ≤ M`: every image
    /// with `max_i |m_i| = j` lies at distance at least `2L(j - 1)`.
    pub fn tail_bound(&self) -> f64 {
        if self.bc == BoundaryCondition::Periodic {
            return 0.0;
        }
        let d = self.base.dim as i32;
        let mut total = 0.0;
        for j in (self.truncation + 1)..(self.truncation + 10_000) {
            let jf = j as f64;
            let shell = (2.0 * jf + 1.0).powi(d) - (2.0 * jf - 1.0).powi(d);
            let term = shell * self.base.radial(2.0 * self.half_width * (jf - 1.0));
            total += term;
            if term < 1e-300 || term < 1e-6 * total {
                break;
            }
        }
        total
    }

    /// Smooth box cutoff `χ_n(y)`: one on `[-L - 2^{-n}, L + 2^{-n}]^d`,
    /// zero outside `[-L - 2·2^{-n}, L + 2·2^{-n}]^d`.
    pub fn cutoff(&self, n: i32, y: &[f64; 3]) -> f64 {
        let w = pow2(-n);
        (0..self.base.dim)
            .map(|a| 1.0 - smooth_step((y[a].abs() - self.half_width - w) / w))
            .product()
    }

    /// `K_n(x, y) = χ_n(y) Σ_m ε_m P_n(x - π_m(y))`; only images with
    /// `|m_i| ≤ 1` can reach the support of `P_n` when `2^{-n} ≤ L`.
    pub fn eval_layer(&self, dec: &DyadicDecomposition, n: i32, x: &[f64; 3], y: &[f64; 3]) -> f64 {
        let chi = self.cutoff(n, y);
        if chi == 0.0 {
            return 0.0;
        }
        let support = pow2(-n);
        let range = match self.bc {
            BoundaryCondition::Periodic => 0,
            BoundaryCondition::Dirichlet => (support / (2.0 * self.half_width)).ceil() as i64 + 1,
        };
        chi * self.sum_images(x, y, range, |z| {
            if norm(&z[..self.base.dim]) >= support {
                0.0
            } else {
                dec.layer(n, z)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDecaySample {
    pub level: i32,
    pub distance: f64,
    pub sup: f64,
    /// `sup / (2^{n(d-1)} · distance)`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryDecayReport {
    NotApplicable,
    Checked {
        samples: Vec<BoundaryDecaySample>,
        /// Largest scaled ratio: the fitted constant of the bound.
        constant: f64,
        /// Least-squares slope of `sup` against distance over the samples
        /// of this level, divided by `2^{n(d-1)}`.
        normalised_slope: f64,
    },
}

/// Samples `sup_y |K_n(x, y)|` for `x = (L - δ, 0, …)` at the given
/// distances `δ` (each at most `3·2^{-n}`), with `y` on a grid of
/// `resolution` points per axis covering `[-L, L]^d ∩ B_∞(x, 2^{-n})`.
pub fn boundary_decay_check(
    refl: &ReflectedKernel,
    dec: &DyadicDecomposition,
    n: i32,
    distances: &[f64],
    resolution: usize,
) -> Result<BoundaryDecayReport> {
    if refl.bc == BoundaryCondition::Periodic {
        return Ok(BoundaryDecayReport::NotApplicable);
    }
    let d = refl.base.dim;
    let width = pow2(-n);
    let l = refl.half_width;
    if width > l {
        return Err(Error::InvalidArgument(format!("level {n} is coarser than the box")));
    }
    let mut samples = Vec::new();
    for &delta in distances {
        if !(0.0..=3.0 * width * (1.0 + 1e-12)).contains(&delta) {
            return Err(Error::InvalidArgument(format!("distance {delta} outside [0, 3·2^-n]")));
        }
        let x = [l - delta, 0.0, 0.0];
        let lo = [(x[0] - width).max(-l), -width, -width];
        let hi = [(x[0] + width).min(l), width, width];
        let count = resolution.pow(d as u32);
        let mut sup: f64 = 0.0;
        for flat in 0..count {
            let mut rest = flat;
            let mut y = [0.0; 3];
            for a in 0..d {
                let i = rest % resolution;
                rest /= resolution;
                y[a] = lo[a] + (hi[a] - lo[a]) * i as f64 / (resolution - 1) as f64;
            }
            sup = sup.max(refl.eval_layer(dec, n, &x, &y).abs());
        }
        let norm_factor = pow2(n * (d as i32 - 1));
        let scaled = if delta > 0.0 { sup / (norm_factor * delta) } else { 0.0 };
        samples.push(BoundaryDecaySample { level: n, distance: delta, sup, scaled });
    }
    let constant = samples.iter().map(|s| s.scaled).fold(0.0, f64::max);
    let (sxy, sxx) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), s| (a + s.distance * s.sup, b + s.distance * s.distance));
    let normalised_slope = if sxx > 0.0 { sxy / sxx / pow2(n * (d as i32 - 1)) } else { 0.0 };
    Ok(BoundaryDecayReport::Checked { samples, constant, normalised_slope })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerBound {
    pub level: i32,
    pub sup: f64,
    /// `sup / 2^{n(d-2)}`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckReport {
    pub dim: usize,
    pub mass: f64,
    /// Largest `|P - P_- - Σ_n P_n|` over the sample points.
    pub telescoping_error: f64,
    /// Largest `|∫ x^k P_n|` over the checked levels and `|k| < r`.
    pub moment_error: f64,
    pub layer_bounds: Vec<LayerBound>,
    /// Single constant `C` with `sup |P_n| ≤ C 2^{n(d-2)}` on the checked levels.
    pub bound_constant: f64,
}

fn random_direction<R: rand::Rng>(rng: &mut R, d: usize) -> [f64; 3] {
    loop {
        let mut v = [0.0f64; 3];
        for c in v.iter_mut().take(d) {
            *c = rng.random_range(-1.0..1.0);
        }
        let r = norm(&v[..d]);
        if r > 0.1 && r <= 1.0 {
            return v.map(|c| c / r);
        }
    }
}

/// `∫ x^k P_n` for every multi-index, in polar coordinates: Gauss panels
/// in the radius, a trapezoid rule in the angle (d = 2) or Gauss in
/// `cos ϑ` times a trapezoid in `φ` (d = 3). The angular rules are exact
/// for the polynomial corrections and `P̄_n` is radial.
fn layer_moments(dec: &DyadicDecomposition, n: i32) -> Vec<f64> {
    let d = dec.kernel.dim;
    let big_r = pow2(-n);
    let (gx, gw) = crate::quadrature::gauss_legendre(20);
    let mut directions: Vec<([f64; 3], f64)> = Vec::new();
    match d {
        1 => directions.extend([([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)]),
        2 => {
            let m = 24;
            for j in 0..m {
                let phi = 2.0 * PI * j as f64 / m as f64;
                directions.push(([phi.cos(), phi.sin(), 0.0], 2.0 * PI / m as f64));
            }
        }
        _ => {
            let (nodes, weights) = crate::quadrature::gauss_legendre(12);
            let m = 24;
            for (c, w) in nodes.iter().zip(&weights) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..m {
                    let phi = 2.0 * PI * j as f64 / m as f64;
                    directions.push(([s * phi.cos(), s * phi.sin(), *c], w * 2.0 * PI / m as f64));
                }
            }
        }
    }
    let mut out = vec![0.0; dec.indices.len()];
    for i in 0..8 {
        let (lo, hi) = (big_r * i as f64 / 8.0, big_r * (i + 1) as f64 / 8.0);
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (x, w) in gx.iter().zip(&gw) {
            let r = c + h * x;
            let radial = dec.bar_layer(n, r);
            for (u, wu) in &directions {
                let p = u.map(|c| c * r);
                let v = radial + dec.correction(n + 1, &p) - dec.correction(n, &p);
                for (slot, k) in out.iter_mut().zip(&dec.indices) {
                    let deg = d as i32 - 1 + degree(k) as i32;
                    *slot += h * w * wu * r.powi(deg) * monomial(u, k) * v;
                }
            }
        }
    }
    out
}

/// Telescoping at `points` random points, moment annihilation and layer
/// sup-bounds over `levels` consecutive levels from `n_a`.
pub fn kernel_check(dec: &DyadicDecomposition, points: usize, levels: usize, seed: u64) -> Result<KernelCheckReport> {
    let kernel = dec.kernel;
    let d = kernel.dim;
    let n_a = kernel.cutoff_index;
    if levels == 0 || levels as i32 > DYADIC_DEPTH - 2 {
        return Err(Error::InvalidArgument(format!("{levels} levels requested")));
    }
    let mut rng = crate::rng::auxiliary_stream(seed, 0x6b65_726e);
    let mut telescoping_error: f64 = 0.0;
    for _ in 0..points {
        let r = 10f64.powf(rng.random_range(-3.0..0.3));
        let x = random_direction(&mut rng, d).map(|c| c * r);
        let top = ((1.0 / r).log2().ceil() as i32 + 2).clamp(n_a, dec.highest_level() - 1);
        let layers: f64 = (n_a..=top).map(|n| dec.layer(n, &x)).sum();
        let residual = kernel.eval(&x[..d])? - dec.minus(&x) - layers;
        telescoping_error = telescoping_error.max(residual.abs());
    }
    let mut moment_error: f64 = 0.0;
    let mut layer_bounds = Vec::with_capacity(levels);
    for n in n_a..n_a + levels as i32 {
        moment_error = layer_moments(dec, n).into_iter().fold(moment_error, |m, v| m.max(v.abs()));
        let big_r = pow2(-n);
        let mut sup: f64 = 0.0;
        let mut dirs = vec![[1.0, 0.0, 0.0]];
        dirs.extend((0..3).map(|_| random_direction(&mut rng, d)));
        for u in &dirs {
            for i in 1..=256 {
                let r = big_r * i as f64 / 256.0;
                sup = sup.max(dec.layer(n, &u.map(|c| c * r)).abs());
            }
        }
        layer_bounds.push(LayerBound { level: n, sup, scaled: sup / pow2(n * (d as i32 - 2)) });
    }
    let bound_constant = layer_bounds.iter().map(|b| b.scaled).fold(0.0, f64::max);
    Ok(KernelCheckReport { dim: d, mass: kernel.mass, telescoping_error, moment_error, layer_bounds, bound_constant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        for &r in &[1e-3, 0.01, 0.1, 0.3, 0.77, 1.0, 3.7] {
            let s: f64 = (-20..40).map(|n| partition(pow2(n) * r)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(partition(0.2), 0.0);
        assert_eq!(partition(1.0), 0.0);
    }

    #[test]
    fn cutoff_index() {
        for (a, n) in [(1.0, 0), (4.0, 1), (9.0, 2), (16.0, 2), (17.0, 3), (160.0, 4)] {
            let k = GreensKernel::new(3, a).unwrap();
            assert_eq!(k.cutoff_index(), n, "a={a}");
            let root = a.sqrt();
            assert!(pow2(-n) <= 1.0 / root && 1.0 / root < pow2(-n + 1));
        }
    }

    #[test]
    fn reference_values() {
        let k1 = GreensKernel::new(1, 1.0).unwrap();
        assert_eq!(k1.eval(&[0.0]).unwrap(), 0.5);
        let k3 = GreensKernel::new(3, 4.0).unwrap();
        let v = k3.eval(&[1.0, 0.0, 0.0]).unwrap();
        assert!((v - (-2f64).exp() / (4.0 * PI)).abs() < 1e-16);
        assert!((v - 1.07698e-2).abs() < 1e-6);
        let k2 = GreensKernel::new(2, 1.0).unwrap();
        assert!((k2.eval(&[0.1, 0.0]).unwrap() - 2.427_069_024_702_016_6 / (2.0 * PI)).abs() < 1e-12);
        assert_eq!(k2.eval(&[0.0, 0.0]), Err(Error::SingularPoint));
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 4).len(), 4);
        assert_eq!(multi_indices(2, 4).len(), 10);
        assert_eq!(multi_indices(3, 4).len(), 20);
    }

    #[test]
    fn reflection_signs() {
        assert_eq!(ReflectedKernel::sign(&[1, 0]), -1.0);
        assert_eq!(ReflectedKernel::sign(&[1, -1]), 1.0);
        let k = ReflectedKernel::new(GreensKernel::new(2, 1.0).unwrap(), 1.0, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(k.reflect(&[1, 0], &[0.25, 0.5, 0.0]), [1.75, 0.5, 0.0]);
    }
}
