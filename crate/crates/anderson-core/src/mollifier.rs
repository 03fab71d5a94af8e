//! Radial mollifiers `ϱ_ε(x) = ε^{-d} ϱ(x/ε)` and the radial profile of the
//! self-convolution `ϱ*ϱ`, tabulated once per (profile, d) at unit scale.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::LatticeGrid;
use crate::quadrature::integrate_with_breaks;
use crate::special::sphere_area;

/// Unnormalised radial shape supported in the closed unit ball.
pub trait RadialProfile: Debug + Send + Sync {
    fn id(&self) -> String;
    fn shape(&self, r: f64) -> f64;
}

/// `exp(-s/(1 - r²))` on `r < 1`; `s = 1` is the standard bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub sharpness: f64,
}

impl Bump {
    pub const STANDARD: Bump = Bump { sharpness: 1.0 };
}

impl RadialProfile for Bump {
    fn id(&self) -> String {
        if self.sharpness == 1.0 {
            "bump".to_string()
        } else {
            format!("bump-s{}", self.sharpness)
        }
    }

    fn shape(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            0.0
        } else {
            (-self.sharpness / (1.0 - r * r)).exp()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mollifier {
    profile: Arc<dyn RadialProfile>,
    dim: usize,
    epsilon: f64,
    norm: f64,
}

impl Mollifier {
    pub fn new(profile: Arc<dyn RadialProfile>, dim: usize, epsilon: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("mollifier dimension {dim}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("mollifier width {epsilon}")));
        }
        let norm = profile_norm(profile.as_ref(), dim);
        Ok(Self { profile, dim, epsilon, norm })
    }

    pub fn standard(dim: usize, epsilon: f64) -> Result<Self> {
        Self::new(Arc::new(Bump::STANDARD), dim, epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.profile.clone(), self.dim, epsilon)
    }

    pub fn id(&self) -> String {
        self.profile.id()
    }

    pub fn profile(&self) -> &Arc<dyn RadialProfile> {
        &self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Unit-scale density `ϱ(r)`.
    pub fn unit_density(&self, r: f64) -> f64 {
        self.profile.shape(r) / self.norm
    }

    /// `ϱ_ε(r)`.
    pub fn density(&self, r: f64) -> f64 {
        self.unit_density(r / self.epsilon) / self.epsilon.powi(self.dim as i32)
    }

    /// Grid-sampled `ϱ_ε`, normalised to unit discrete mass.
    pub fn discrete_kernel(&self, grid: &LatticeGrid) -> Result<DiscreteKernel> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "mollifier in d={} applied on d={} grid",
                self.dim,
                grid.dim()
            )));
        }
        let h = grid.mesh();
        if self.epsilon < 2.0 * h * (1.0 - 1e-12) {
            return Err(Error::UnresolvedMollifier { epsilon: self.epsilon, mesh: h });
        }
        let radius = (self.epsilon / h).floor() as usize;
        let side = 2 * radius + 1;
        let len = side.pow(self.dim as u32);
        let mut weights = vec![0.0; len];
        for (flat, w) in weights.iter_mut().enumerate() {
            let off = kernel_offset(flat, side, self.dim, radius);
            let r2: f64 = off[..self.dim].iter().map(|&o| (o as f64 * h).powi(2)).sum();
            *w = self.profile.shape(r2.sqrt() / self.epsilon);
        }
        let mass: f64 = weights.iter().sum::<f64>() * grid.cell_volume();
        weights.iter_mut().for_each(|w| *w /= mass);
        Ok(DiscreteKernel { dim: self.dim, radius, weights })
    }

    /// Radial profile of `ϱ_ε * ϱ_ε`.
    pub fn self_convolution(&self) -> SelfConvolution {
        SelfConvolution {
            table: unit_self_convolution(self.profile.clone(), self.dim),
            epsilon: self.epsilon,
        }
    }

    /// Draws a point with density `ϱ_ε` by rejection from the unit ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        let peak = self.profile.shape(0.0);
        loop {
            let mut x = [0.0f64; 3];
            let mut r2 = 0.0f64;
            for xi in x.iter_mut().take(self.dim) {
                *xi = rng.random_range(-1.0..1.0);
                r2 += *xi * *xi;
            }
            if r2 >= 1.0 {
                continue;
            }
            if rng.random::<f64>() * peak < self.profile.shape(r2.sqrt()) {
                x.iter_mut().for_each(|xi| *xi *= self.epsilon);
                return x;
            }
        }
    }
}

fn profile_norm(profile: &dyn RadialProfile, dim: usize) -> f64 {
    let p = dim as i32 - 1;
    let r = integrate_with_breaks(|r| r.powi(p) * profile.shape(r), &[0.0, 0.5, 0.9, 1.0], 1e-16, 1e-14);
    sphere_area(dim) * r.value
}

/// Offset (in lattice units) of flat position `flat` in a centred cube of
/// side `2·radius + 1`.
pub fn kernel_offset(flat: usize, side: usize, dim: usize, radius: usize) -> [isize; 3] {
    let mut off = [0isize; 3];
    let mut rest = flat;
    for axis in (0..dim).rev() {
        off[axis] = (rest % side) as isize - radius as isize;
        rest /= side;
    }
    off
}

/// Sampled mollifier on a centred cube of side `2·radius + 1` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub dim: usize,
    pub radius: usize,
    pub weights: Vec<f64>,
}

impl DiscreteKernel {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn offset(&self, flat: usize) -> [isize; 3] {
        kernel_offset(flat, self.side(), self.dim, self.radius)
    }
}

/// `ϱ_ε^{*2}(s) = ε^{-d} g(s/ε)` with `g` the unit-scale table.
#[derive(Debug, Clone)]
pub struct SelfConvolution {
    table: Arc<UnitTable>,
    epsilon: f64,
}

impl SelfConvolution {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Support radius `2ε`.
    pub fn support(&self) -> f64 {
        2.0 * self.epsilon
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.table.eval(s / self.epsilon) / self.epsilon.powi(self.table.dim as i32)
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }
}

#[derive(Debug)]
struct UnitTable {
    dim: usize,
    step: f64,
    values: Vec<f64>,
}

const TABLE_INTERVALS: usize = 4096;

impl UnitTable {
    /// Cubic Lagrange interpolation on the four nearest nodes; the table is
    /// extended evenly through `s = 0`.
    fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        if s >= 2.0 {
            return 0.0;
        }
        let t = s / self.step;
        let i = (t.floor() as isize).min(TABLE_INTERVALS as isize - 1);
        let u = t - i as f64;
        let at = |j: isize| -> f64 {
            let j = j.unsigned_abs();
            if j > TABLE_INTERVALS {
                0.0
            } else {
                self.values[j]
            }
        };
        let (f0, f1, f2, f3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let l0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let l1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let l2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let l3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
    }
}

type TableCache = Mutex<HashMap<(String, usize), Arc<UnitTable>>>;

fn unit_self_convolution(profile: Arc<dyn RadialProfile>, dim: usize) -> Arc<UnitTable> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (profile.id(), dim);
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return t.clone();
    }
    let table = Arc::new(build_unit_table(profile.as_ref(), dim));
    cache.lock().unwrap().entry(key).or_insert(table).clone()
}

fn build_unit_table(profile: &dyn RadialProfile, dim: usize) -> UnitTable {
    let norm = profile_norm(profile, dim);
    let rho = |r: f64| profile.shape(r) / norm;
    let step = 2.0 / TABLE_INTERVALS as f64;
    let tol = 1e-13;
    let values = (0..=TABLE_INTERVALS)
        .map(|j| {
            let s = j as f64 * step;
            if s >= 2.0 {
                return 0.0;
            }
            match dim {
                1 => integrate_with_breaks(|t| rho(t) * rho(s - t), &[s - 1.0, 0.5 * s, 1.0], 1e-15, tol).value,
                2 => {
                    // ∫_0^1 r ϱ(r) ∫_0^{2π} ϱ(|s e_1 - r ω(θ)|) dθ dr
                    let inner = |r: f64| -> f64 {
                        let c0 = if s * r > 0.0 { (s * s + r * r - 1.0) / (2.0 * s * r) } else { -2.0 };
                        if c0 >= 1.0 {
                            return 0.0;
                        }
                        let theta_max = if c0 <= -1.0 { PI } else { c0.acos() };
                        let f = |th: f64| rho((s * s + r * r - 2.0 * s * r * th.cos()).max(0.0).sqrt());
                        2.0 * integrate_with_breaks(f, &[0.0, theta_max], 1e-15, tol).value
                    };
                    let mut breaks = vec![0.0, 1.0];
                    if s < 1.0 {
                        breaks.insert(1, 1.0 - s);
                    }
                    if s > 0.0 && s <= 1.0 {
                        breaks.push(s);
                    }
                    breaks.sort_by(f64::total_cmp);
                    breaks.dedup();
                    integrate_with_breaks(|r| r * rho(r) * inner(r), &breaks, 1e-15, tol).value
                }
                _ => {
                    if j == 0 {
                        let r = integrate_with_breaks(|r| r * r * rho(r) * rho(r), &[0.0, 0.5, 1.0], 1e-15, tol);
                        return 4.0 * PI * r.value;
                    }
                    let cumulative = |t: f64| -> f64 {
                        let t = t.min(1.0);
                        if t <= 0.0 {
                            0.0
                        } else {
                            integrate_with_breaks(|u| u * rho(u), &[0.0, t], 1e-16, 1e-14).value
                        }
                    };
                    let mut breaks = vec![0.0, s.min(1.0), 1.0];
                    if s < 1.0 {
                        breaks.insert(2, 1.0 - s);
                    }
                    breaks.sort_by(f64::total_cmp);
                    breaks.dedup();
                    let r = integrate_with_breaks(
                        |r| r * rho(r) * (cumulative(s + r) - cumulative((s - r).abs())),
                        &breaks,
                        1e-15,
                        tol,
                    );
                    2.0 * PI / s * r.value
                }
            }
        })
        .collect();
    UnitTable { dim, step, values }
}
