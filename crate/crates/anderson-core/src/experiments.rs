//! Replica experiments: ε-convergence with coupled noise, the dilation
//! identity, lower-tail exponents and the bump-well lower bound.
//!
//! Replica `r` always draws its white field from stream `r` of the base
//! seed, so every row can be regenerated from `(config, seed, r)` alone.
//! Replicas run on the rayon pool; results are collected in replica order.

use std::f64::consts::PI;

use rayon::prelude::*;
use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::greens::smooth_step;
use crate::grid::{BoundaryCondition, LatticeGrid};
use crate::mollifier::Mollifier;
use crate::noise::{mollify, rescale_noise, sample_white_replica, NoiseField};
use crate::operator::assemble;
use crate::quadrature::integrate;
use crate::renorm::{continuum_constants, lattice_constants, monte_carlo_constants, scaled_constants, ConstantsMethod, RenormConstants, ScaledConstants};
use crate::special::sphere_area;
use crate::spectra::{lowest_eigenpairs_with, SpectrumOptions, SpectrumResult};

/// Minimum exceedances for a threshold to enter the tail fit.
pub const TAIL_MIN_EXCEEDANCES: usize = 30;
/// Replica resamples behind the tail slope interval.
pub const TAIL_BOOTSTRAP: usize = 400;
const MONTE_CARLO_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub bc: BoundaryCondition,
    /// Strictly decreasing. Empty means unmollified white noise (tails only).
    pub epsilons: Vec<f64>,
    pub mass: f64,
    pub b: f64,
    pub replicas: usize,
    pub seed: u64,
    pub method: ConstantsMethod,
    pub eigenpairs: usize,
    pub residual_tol: f64,
    /// `L` of the dilated box in the scaling check.
    pub dilation: f64,
    pub tail_x_min: f64,
    pub tail_thresholds: usize,
}

impl ExperimentConfig {
    pub fn new(id: &str, dim: usize, half_width: f64, points_per_axis: usize) -> Self {
        Self {
            id: id.to_string(),
            dim,
            half_width,
            points_per_axis,
            bc: BoundaryCondition::Dirichlet,
            epsilons: Vec::new(),
            mass: 1.0,
            b: 0.0,
            replicas: 1,
            seed: 0,
            method: ConstantsMethod::ContinuumQuadrature,
            eigenpairs: 1,
            residual_tol: 1e-9,
            dilation: 1.0,
            tail_x_min: 0.5,
            tail_thresholds: 80,
        }
    }

    pub fn grid(&self) -> Result<LatticeGrid> {
        LatticeGrid::new(self.dim, self.half_width, self.points_per_axis, self.bc)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("replica count must be at least 1".into()));
        }
        if self.eigenpairs == 0 {
            return Err(Error::InvalidArgument("at least one eigenpair is needed".into()));
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("ε schedule must be strictly decreasing".into()));
        }
        for &eps in &self.epsilons {
            if !(eps >= 2.0 * grid.mesh() * (1.0 - 1e-12)) {
                return Err(Error::UnresolvedMollifier { epsilon: eps, mesh: grid.mesh() });
            }
        }
        if !(self.mass >= 1.0) {
            return Err(Error::InvalidArgument(format!("a = {} below 1", self.mass)));
        }
        Ok(())
    }

    fn spectrum_options(&self, replica: usize) -> SpectrumOptions {
        SpectrumOptions { residual_tol: self.residual_tol, seed: self.seed ^ (replica as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), ..Default::default() }
    }
}

/// Constants for one ε level by the configured method.
pub fn constants_for(config: &ExperimentConfig, grid: &LatticeGrid, mol: &Mollifier) -> Result<RenormConstants> {
    match config.method {
        ConstantsMethod::ContinuumQuadrature => continuum_constants(config.mass, mol),
        ConstantsMethod::LatticeSelfEnergy => lattice_constants(grid, config.mass, mol),
        ConstantsMethod::MonteCarloOracle => monte_carlo_constants(config.mass, mol, MONTE_CARLO_SAMPLES, config.seed),
    }
}

fn solve(grid: &LatticeGrid, potential: &NoiseField, c: f64, k: usize, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let h = assemble(grid, potential, c)?;
    lowest_eigenpairs_with(h.matrix(), Some(grid), k, opts)?.require_complete()
}

/// Replica seed table entry `(replica, seed, stream)`.
pub fn replica_seeds(config: &ExperimentConfig) -> Vec<(usize, u64, u64)> {
    (0..config.replicas).map(|r| (r, config.seed, r as u64)).collect()
}

/// Ordinary least squares `y = intercept + slope x` with the slope's
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LinearFit { slope, intercept, slope_stderr, points: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub replica: usize,
    pub level: usize,
    pub epsilon: f64,
    pub constant: f64,
    pub eigenvalues: Vec<f64>,
    /// `λ_1` of the same operator without the counterterm (d ≥ 2).
    pub control: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub constants: Vec<RenormConstants>,
    pub rows: Vec<ConvergenceRow>,
    /// Per replica, `|λ_{1,ε_{j+1}} - λ_{1,ε_j}|`.
    pub differences: Vec<(usize, Vec<f64>)>,
    /// Per replica, whether the differences strictly decrease.
    pub cauchy: Vec<(usize, bool)>,
    pub cauchy_fraction: f64,
    /// Slope of the mean control `λ_1` against `|ln ε|` (d ≥ 2).
    pub control_slope: Option<LinearFit>,
    /// Correlation of finest-level `λ_1` between replicas `2i` and `2i+1`.
    pub cross_seed_correlation: Option<f64>,
    pub failures: Vec<(usize, String)>,
}

impl ConvergenceReport {
    /// Expected magnitude of the control drift per unit of `|ln ε|`.
    pub fn control_target(&self) -> f64 {
        1.0 / (2.0 * PI)
    }
}

/// Eigenvalues across the ε schedule with one white field per replica.
/// The control twin is exact: dropping `C` shifts every eigenvalue by `-C`.
pub fn convergence_in_epsilon(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    if config.epsilons.len() < 4 {
        return Err(Error::InvalidArgument("ε-convergence needs at least 4 levels".into()));
    }
    let grid = config.grid()?;
    let mollifiers: Vec<Mollifier> = config.epsilons.iter().map(|&e| Mollifier::standard(config.dim, e)).collect::<Result<_>>()?;
    let constants: Vec<RenormConstants> = mollifiers.iter().map(|m| constants_for(config, &grid, m)).collect::<Result<_>>()?;
    let outcomes: Vec<(usize, Result<Vec<ConvergenceRow>>)> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<ConvergenceRow>> {
                let white = sample_white_replica(&grid, config.seed, r as u64);
                let opts = config.spectrum_options(r);
                let mut rows = Vec::with_capacity(mollifiers.len());
                for (level, (mol, c)) in mollifiers.iter().zip(&constants).enumerate() {
                    let xi = mollify(&white, mol)?;
                    let s = solve(&grid, &xi, c.total, config.eigenpairs, &opts)?;
                    let control = (config.dim >= 2).then(|| s.eigenvalues[0] - c.total);
                    rows.push(ConvergenceRow { replica: r, level, epsilon: mol.epsilon(), constant: c.total, eigenvalues: s.eigenvalues, control });
                }
                Ok(rows)
            };
            (r, run())
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut differences = Vec::new();
    let mut cauchy = Vec::new();
    let mut finest = Vec::new();
    for (r, out) in outcomes {
        match out {
            Ok(rs) => {
                let l1: Vec<f64> = rs.iter().map(|row| row.eigenvalues[0]).collect();
                let diffs: Vec<f64> = l1.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
                cauchy.push((r, diffs.windows(2).all(|w| w[1] < w[0])));
                differences.push((r, diffs));
                finest.push((r, *l1.last().unwrap()));
                rows.extend(rs);
            }
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let ok = cauchy.len();
    let cauchy_fraction = if ok == 0 { 0.0 } else { cauchy.iter().filter(|c| c.1).count() as f64 / ok as f64 };
    let control_slope = if config.dim >= 2 && ok > 0 {
        let levels = config.epsilons.len();
        let mut means = vec![0.0; levels];
        for row in &rows {
            means[row.level] += row.control.unwrap_or(0.0) / ok as f64;
        }
        let x: Vec<f64> = config.epsilons.iter().map(|e| e.ln().abs()).collect();
        linear_fit(&x, &means)
    } else {
        None
    };
    let pairs: Vec<(f64, f64)> = finest.chunks(2).filter(|c| c.len() == 2 && c[1].0 == c[0].0 + 1).map(|c| (c[0].1, c[1].1)).collect();
    let cross_seed_correlation = correlation(&pairs);
    Ok(ConvergenceReport { epsilons: config.epsilons.clone(), constants, rows, differences, cauchy, cauchy_fraction, control_slope, cross_seed_correlation, failures })
}

fn correlation(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 3 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub replica: usize,
    pub n: usize,
    pub lambda_unit: f64,
    pub lambda_dilated: f64,
    /// `L^{-2} λ - λ̃`.
    pub lhs: f64,
    /// `L^{-2} C - C̃`.
    pub rhs: f64,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub factor: f64,
    pub epsilon: f64,
    pub base: RenormConstants,
    pub scaled: ScaledConstants,
    pub rows: Vec<ScalingRow>,
    pub all_hold: bool,
    /// Mean over replicas of `L^{-2} λ_1` minus mean of `λ̃_1`.
    pub mean_gap: f64,
    pub mean_gap_stderr: f64,
    pub failures: Vec<(usize, String)>,
}

/// `O(h²)` eigenvalue error scale of the five-point stencil.
pub fn stencil_error_bound(lambda: f64, mesh: f64) -> f64 {
    lambda * lambda * mesh * mesh / 12.0
}

/// Per-realisation dilation identity between `(-1,1)^d` and `(-L,L)^d`
/// on lattices with the same `N`, the dilated field being `rescale_noise`
/// of the unit one.
pub fn scaling_identity_check(config: &ExperimentConfig) -> Result<ScalingReport> {
    config.validate()?;
    if config.half_width != 1.0 {
        return Err(Error::InvalidArgument("scaling check runs on the unit box (-1, 1)^d".into()));
    }
    let eps = *config.epsilons.first().ok_or_else(|| Error::InvalidArgument("scaling check needs an ε".into()))?;
    let factor = config.dilation;
    let grid = config.grid()?;
    let big = grid.dilate(factor)?;
    let mol = Mollifier::standard(config.dim, eps)?;
    let base = constants_for(config, &grid, &mol)?;
    let scaled = scaled_constants(&base, factor, &mol)?;
    let rhs = factor.powi(-2) * base.total - scaled.total;
    let k = config.eigenpairs;
    let outcomes: Vec<(usize, Result<Vec<ScalingRow>>)> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<ScalingRow>> {
                let white = sample_white_replica(&grid, config.seed, r as u64);
                let xi = mollify(&white, &mol)?;
                let xi_big = rescale_noise(&xi, factor)?;
                let opts = config.spectrum_options(r);
                let unit = solve(&grid, &xi, base.total, k, &opts)?;
                let dilated = solve(&big, &xi_big, scaled.total, k, &opts)?;
                Ok((0..k)
                    .map(|n| {
                        let (l, lt) = (unit.eigenvalues[n], dilated.eigenvalues[n]);
                        let lhs = factor.powi(-2) * l - lt;
                        let tolerance = 5.0
                            * (factor.powi(-2) * stencil_error_bound(l, grid.mesh()) + stencil_error_bound(lt, big.mesh()))
                                .max(1e-9 * (lt.abs() + 1.0));
                        ScalingRow { replica: r, n: n + 1, lambda_unit: l, lambda_dilated: lt, lhs, rhs, tolerance, holds: (lhs - rhs).abs() <= tolerance }
                    })
                    .collect())
            };
            (r, run())
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outcomes {
        match out {
            Ok(rs) => rows.extend(rs),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let firsts: Vec<&ScalingRow> = rows.iter().filter(|row| row.n == 1).collect();
    let m = firsts.len().max(1) as f64;
    let gaps: Vec<f64> = firsts.iter().map(|row| row.lhs).collect();
    let mean_gap = gaps.iter().sum::<f64>() / m;
    let var = gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let all_hold = failures.is_empty() && rows.iter().all(|row| row.holds);
    Ok(ScalingReport { factor, epsilon: eps, base, scaled, rows, all_hold, mean_gap, mean_gap_stderr: (var / m).sqrt(), failures })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailRecord {
    pub dim: usize,
    /// Index `n` (1-based) of the eigenvalue whose tail is fitted.
    pub level: usize,
    pub epsilon: Option<f64>,
    pub constant: f64,
    pub replica_seeds: Vec<(usize, u64, u64)>,
    /// Per replica `λ_1 … λ_k`.
    pub eigenvalues: Vec<(usize, Vec<f64>)>,
    pub thresholds: Vec<f64>,
    pub exceedances: Vec<usize>,
    pub probabilities: Vec<f64>,
    /// 95% Clopper–Pearson intervals for the probabilities.
    pub intervals: Vec<(f64, f64)>,
    /// Whether each threshold entered the fit.
    pub fitted: Vec<bool>,
    pub fit: Option<LinearFit>,
    pub slope_ci: Option<(f64, f64)>,
    pub target: f64,
    pub trend_only: bool,
    /// Slopes over consecutive thirds of the fitted thresholds.
    pub window_slopes: Vec<f64>,
    pub failures: Vec<(usize, String)>,
}

impl TailRecord {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// Window slopes move monotonically towards the target.
    pub fn trend_monotone(&self) -> Option<bool> {
        if self.window_slopes.len() < 2 {
            return None;
        }
        let dist: Vec<f64> = self.window_slopes.iter().map(|s| (s - self.target).abs()).collect();
        Some(dist.windows(2).all(|w| w[1] <= w[0]))
    }
}

pub fn clopper_pearson(successes: usize, trials: usize, level: f64) -> (f64, f64) {
    let alpha = 1.0 - level;
    let (k, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 { 0.0 } else { Beta::new(k, n - k + 1.0).map(|b| b.inverse_cdf(alpha / 2.0)).unwrap_or(0.0) };
    let upper = if successes == trials { 1.0 } else { Beta::new(k + 1.0, n - k).map(|b| b.inverse_cdf(1.0 - alpha / 2.0)).unwrap_or(1.0) };
    (lower, upper)
}

/// Empirical `P(λ_n < -x)` over a linear threshold grid and the slope of
/// `log(-log P)` against `log x` on thresholds with enough exceedances.
pub fn tail_from_samples(values: &[f64], x_min: f64, count: usize) -> Result<(Vec<f64>, Vec<usize>, Vec<bool>, Option<LinearFit>)> {
    let r = values.len();
    let lowest = values.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = (-lowest).max(x_min + 1.0);
    let count = count.max(2);
    let thresholds: Vec<f64> = (0..count).map(|j| x_min + (x_max - x_min) * j as f64 / (count - 1) as f64).collect();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let exceedances: Vec<usize> = thresholds.iter().map(|&x| sorted.partition_point(|&v| v < -x)).collect();
    let fitted: Vec<bool> = exceedances.iter().map(|&e| e >= TAIL_MIN_EXCEEDANCES && e < r).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = thresholds
        .iter()
        .zip(&exceedances)
        .zip(&fitted)
        .filter(|(_, f)| **f)
        .map(|((x, e), _)| (x.ln(), (-(*e as f64 / r as f64).ln()).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientTailMass { exceedances: exceedances[0] });
    }
    let fit = linear_fit(&xs, &ys);
    Ok((thresholds, exceedances, fitted, fit))
}

/// Percentile interval of the tail slope over replica resamples. The
/// threshold points share one empirical distribution, so the regression
/// standard error understates the spread between seeds.
fn bootstrap_slope_ci(firsts: &[f64], config: &ExperimentConfig) -> Option<(f64, f64)> {
    let mut rng = crate::rng::auxiliary_stream(config.seed, 0x7461_696c);
    let mut slopes: Vec<f64> = (0..TAIL_BOOTSTRAP)
        .filter_map(|_| {
            let resample: Vec<f64> = (0..firsts.len()).map(|_| firsts[rng.random_range(0..firsts.len())]).collect();
            tail_from_samples(&resample, config.tail_x_min, config.tail_thresholds).ok()?.3.map(|f| f.slope)
        })
        .collect();
    if slopes.len() < TAIL_BOOTSTRAP / 2 {
        return None;
    }
    slopes.sort_by(f64::total_cmp);
    let at = |q: f64| slopes[((q * (slopes.len() - 1) as f64).round()) as usize];
    Some((at(0.025), at(0.975)))
}

/// Lower tail of `λ_1` over `R` replicas at the first ε of the schedule
/// (raw white noise when the schedule is empty).
pub fn tail_exponent(config: &ExperimentConfig) -> Result<TailRecord> {
    config.validate()?;
    let grid = config.grid()?;
    let mol = config.epsilons.first().map(|&e| Mollifier::standard(config.dim, e)).transpose()?;
    let constant = match &mol {
        Some(m) if config.dim >= 2 => constants_for(config, &grid, m)?.total,
        _ => 0.0,
    };
    let k = config.eigenpairs;
    let outcomes: Vec<(usize, Result<Vec<f64>>)> = (0..config.replicas)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<f64>> {
                let white = sample_white_replica(&grid, config.seed, r as u64);
                let xi = match &mol {
                    Some(m) => mollify(&white, m)?,
                    None => white,
                };
                Ok(solve(&grid, &xi, constant, k, &config.spectrum_options(r))?.eigenvalues)
            };
            (r, run())
        })
        .collect();
    let mut eigenvalues = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outcomes {
        match out {
            Ok(v) => eigenvalues.push((r, v)),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let firsts: Vec<f64> = eigenvalues.iter().map(|(_, v)| v[0]).collect();
    let (thresholds, exceedances, fitted, fit) = tail_from_samples(&firsts, config.tail_x_min, config.tail_thresholds)?;
    let total = firsts.len();
    let probabilities = exceedances.iter().map(|&e| e as f64 / total as f64).collect();
    let intervals = exceedances.iter().map(|&e| clopper_pearson(e, total, 0.95)).collect();
    let slope_ci = fit.and_then(|_| bootstrap_slope_ci(&firsts, config));
    let window_slopes = {
        let pts: Vec<(f64, f64)> = thresholds
            .iter()
            .zip(&exceedances)
            .zip(&fitted)
            .filter(|(_, f)| **f)
            .map(|((x, e), _)| (x.ln(), (-(*e as f64 / total as f64).ln()).ln()))
            .collect();
        let w = pts.len() / 3;
        if w >= 2 {
            pts.chunks(w).filter(|c| c.len() >= 2).take(3).filter_map(|c| {
                let (x, y): (Vec<f64>, Vec<f64>) = c.iter().copied().unzip();
                linear_fit(&x, &y).map(|f| f.slope)
            }).collect()
        } else {
            Vec::new()
        }
    };
    Ok(TailRecord {
        dim: config.dim,
        level: 1,
        epsilon: config.epsilons.first().copied(),
        constant,
        replica_seeds: replica_seeds(config),
        eigenvalues,
        thresholds,
        exceedances,
        probabilities,
        intervals,
        fitted,
        fit,
        slope_ci,
        target: 2.0 - config.dim as f64 / 2.0,
        trend_only: config.dim == 3,
        window_slopes,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub wells: usize,
    /// Target level `c > 0`; the construction pushes `λ̄_n` below `-3c`.
    pub depth: f64,
    /// Well centres; laid out along the first axis when `None`.
    pub centres: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpReport {
    pub centres: Vec<[f64; 3]>,
    /// Plateau value of every well.
    pub b: f64,
    pub gradient_energy: f64,
    pub lattice_gradient_energy: f64,
    pub eigenvalues: Vec<f64>,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// `ψ(ρ) = exp(-1/(1-ρ²))` on `ρ < 1`.
fn well_profile(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - rho * rho)).exp()
    }
}

fn well_profile_derivative(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        let q = 1.0 - rho * rho;
        -2.0 * rho / (q * q) * well_profile(rho)
    }
}

/// Non-positive well equal to `b` on `B(0,1/2)`, above `b` outside and
/// vanishing outside `B(0,1)`.
pub fn well(b: f64, r: f64) -> f64 {
    b * (1.0 - smooth_step(2.0 * r - 1.0))
}

fn distance(x: &[f64; 3], y: &[f64; 3], d: usize) -> f64 {
    (0..d).map(|i| (x[i] - y[i]).powi(2)).sum::<f64>().sqrt()
}

/// Disjoint wells `χ_k` and test functions `f_k = ψ(2|x - x_k|)`
/// normalised in `L²`: the min-max principle gives `λ̄_n ≤ -3c` once
/// `b = -3c - ‖∇f‖²`, and `λ̄_n ≥ b` because the potential is at least
/// `b`. The lattice version uses the lattice Dirichlet energy of `f_k`,
/// so the upper bound holds exactly for the discrete operator.
pub fn bump_lower_bound(config: &BumpConfig) -> Result<BumpReport> {
    let d = config.dim;
    let grid = LatticeGrid::new(d, config.half_width, config.points_per_axis, BoundaryCondition::Dirichlet)?;
    if config.wells == 0 {
        return Err(Error::InvalidArgument("at least one well is needed".into()));
    }
    if !(config.depth > 0.0) {
        return Err(Error::InvalidArgument(format!("depth {} must be positive", config.depth)));
    }
    let centres = match &config.centres {
        Some(c) => c.clone(),
        None => {
            // Centres on lattice nodes, two units apart along axis 0.
            let h = grid.mesh();
            (0..config.wells)
                .map(|k| {
                    let target = -(config.wells as f64 - 1.0) + 2.0 * k as f64;
                    let mut x = [0.0; 3];
                    let i = ((target + config.half_width) / h).round();
                    x[0] = -config.half_width + i * h;
                    for xa in x.iter_mut().take(d).skip(1) {
                        *xa = -config.half_width + (config.half_width / h).round() * h;
                    }
                    x
                })
                .collect()
        }
    };
    if centres.len() != config.wells {
        return Err(Error::GeometryError(format!("{} centres for {} wells", centres.len(), config.wells)));
    }
    for (i, c) in centres.iter().enumerate() {
        if grid.distance_to_boundary(c) < 1.0 {
            return Err(Error::GeometryError(format!("well {i} at {:?} leaves the box", &c[..d])));
        }
        for (j, e) in centres.iter().enumerate().take(i) {
            if distance(c, e, d) < 2.0 {
                return Err(Error::GeometryError(format!("wells {j} and {i} overlap")));
            }
        }
    }
    let area = sphere_area(d);
    let norm = integrate(|r| area * r.powi(d as i32 - 1) * well_profile(2.0 * r).powi(2), 0.0, 0.5, 0.0, 1e-12).value;
    let grad = integrate(|r| area * r.powi(d as i32 - 1) * (2.0 * well_profile_derivative(2.0 * r)).powi(2), 0.0, 0.5, 0.0, 1e-12).value;
    let gradient_energy = grad / norm;

    let h = grid.mesh();
    let vol = grid.cell_volume();
    let n_axis = grid.nodes_per_axis();
    let mut lattice_gradient_energy: f64 = 0.0;
    for c in &centres {
        let f: Vec<f64> = (0..grid.len()).map(|i| well_profile(2.0 * distance(&grid.point(i), c, d))).collect();
        let mut energy = 0.0;
        let mut mass = 0.0;
        for i in 0..grid.len() {
            mass += f[i] * f[i] * vol;
            let idx = grid.multi_index(i);
            for a in 0..d {
                let fwd = if idx[a] + 1 < n_axis {
                    let mut j = idx;
                    j[a] += 1;
                    f[grid.flat_index(&j)]
                } else {
                    0.0
                };
                energy += (fwd - f[i]).powi(2) / (h * h) * vol;
                if idx[a] == 0 {
                    energy += f[i] * f[i] / (h * h) * vol;
                }
            }
        }
        lattice_gradient_energy = lattice_gradient_energy.max(energy / mass);
    }
    let b = -3.0 * config.depth - lattice_gradient_energy;
    let potential: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            centres.iter().map(|c| well(b, distance(&x, c, d))).sum()
        })
        .collect();
    let field = NoiseField::deterministic(&grid, potential)?;
    let s = solve(&grid, &field, 0.0, config.wells, &SpectrumOptions { residual_tol: 1e-11, ..Default::default() })?;
    let top = *s.eigenvalues.last().unwrap();
    let slack = 1e-9 * (b.abs() + 1.0);
    Ok(BumpReport {
        centres,
        b,
        gradient_energy,
        lattice_gradient_energy,
        lower_holds: s.eigenvalues[0] >= b - slack,
        upper_holds: top <= -3.0 * config.depth + slack,
        eigenvalues: s.eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_brackets() {
        let (lo, hi) = clopper_pearson(30, 100, 0.95);
        assert!(lo < 0.3 && hi > 0.3);
        assert!((lo - 0.2124).abs() < 1e-3 && (hi - 0.3998).abs() < 1e-3);
        assert_eq!(clopper_pearson(0, 10, 0.95).0, 0.0);
    }

    #[test]
    fn tail_fit_recovers_weibull_exponent() {
        // P(λ < -x) = exp(-x^{3/2}) sampled by inversion on a fine grid.
        let r = 20000;
        let values: Vec<f64> = (0..r).map(|i| -(-((i as f64 + 0.5) / r as f64).ln()).powf(2.0 / 3.0)).collect();
        let (_, ex, _, fit) = tail_from_samples(&values, 0.3, 60).unwrap();
        assert!(ex.windows(2).all(|w| w[1] <= w[0]));
        assert!((fit.unwrap().slope - 1.5).abs() < 0.02);
    }

    #[test]
    fn well_shape() {
        assert_eq!(well(-4.0, 0.3), -4.0);
        assert_eq!(well(-4.0, 1.2), 0.0);
        assert!(well(-4.0, 0.7) > -4.0 && well(-4.0, 0.7) < 0.0);
    }

    #[test]
    fn schedule_validation() {
        let mut c = ExperimentConfig::new("t", 1, 1.0, 64);
        c.epsilons = vec![0.25, 0.5];
        assert!(c.validate().is_err());
        c.epsilons = vec![0.5, 0.25, 0.01];
        assert!(matches!(c.validate(), Err(Error::UnresolvedMollifier { .. })));
    }
}
