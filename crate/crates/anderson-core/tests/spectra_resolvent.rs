use std::f64::consts::PI;

use anderson_core::mollifier::Mollifier;
use anderson_core::noise::{mollify, sample_white_replica, NoiseField};
use anderson_core::operator::{assemble, direct_solve, fixed_point_resolvent, resolvent_apply, ResolventHandle, SolverSettings};
use anderson_core::rng::auxiliary_stream;
use anderson_core::sparse::CsrMatrix;
use anderson_core::spectra::{eigenvalue_continuity_check, lowest_eigenpairs_with, EigenMethod, SpectrumOptions};
use anderson_core::{BoundaryCondition, LatticeGrid};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[test]
fn free_dirichlet_spectrum_matches_lattice_formula() {
    // Interior nodes of N cells: λ = (4/h²) Σ_axes sin²(k π / 2N).
    let n = 32;
    let grid = LatticeGrid::new(2, 1.0, n, BoundaryCondition::Dirichlet).unwrap();
    let h = grid.mesh();
    let mut exact: Vec<f64> = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let s = |k: usize| (k as f64 * PI / (2.0 * n as f64)).sin().powi(2);
            exact.push(4.0 / (h * h) * (s(i) + s(j)));
        }
    }
    exact.sort_by(f64::total_cmp);
    let hm = assemble(&grid, &NoiseField::zeros(&grid), 0.0).unwrap();
    let opts = SpectrumOptions { method: EigenMethod::Lanczos, ..Default::default() };
    let res = lowest_eigenpairs_with(hm.matrix(), Some(&grid), 8, &opts).unwrap().require_complete().unwrap();
    for (got, want) in res.eigenvalues.iter().zip(&exact) {
        assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
    }
    // Continuum limit (kπ/2)² for the first mode.
    assert!((res.eigenvalues[0] - 2.0 * (PI / 2.0).powi(2)).abs() < 0.01);
}

#[test]
fn lanczos_matches_dense_on_random_sparse() {
    let n = 200;
    let mut rng = auxiliary_stream(99, 1);
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, rng.random_range(-3.0..3.0)));
        for _ in 0..3 {
            let j = rng.random_range(0..n);
            if j < i {
                trip.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let m = CsrMatrix::from_lower_triplets(n, &trip).unwrap();
    let dense: DMatrix<f64> = m.to_dense();
    let mut oracle: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
    oracle.sort_by(f64::total_cmp);
    for method in [EigenMethod::Lanczos, EigenMethod::Dense] {
        let opts = SpectrumOptions { method, residual_tol: 1e-11, ..Default::default() };
        let res = lowest_eigenpairs_with(&m, None, 10, &opts).unwrap().require_complete().unwrap();
        for (got, want) in res.eigenvalues.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-9, "{method:?}: {got} vs {want}");
        }
        assert!(res.max_orthogonality_defect() < 1e-8);
    }
}

fn noisy_operator(n: usize, eps: f64, seed: u64) -> anderson_core::operator::HamiltonianMatrix {
    let grid = LatticeGrid::new(2, 1.0, n, BoundaryCondition::Dirichlet).unwrap();
    let xi = mollify(&sample_white_replica(&grid, seed, 0), &Mollifier::standard(2, eps).unwrap()).unwrap();
    assemble(&grid, &xi, 0.0).unwrap()
}

#[test]
fn resolvent_identity_and_symmetry() {
    let h = noisy_operator(32, 0.125, 4);
    let settings = SolverSettings::default();
    let (a, a2) = (30.0, 45.0);
    let g1 = ResolventHandle::new(&h, a, settings).unwrap();
    let g2 = ResolventHandle::new(&h, a2, settings).unwrap();
    let mut rng = auxiliary_stream(4, 2);
    for _ in 0..5 {
        let f: Vec<f64> = (0..h.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..h.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = resolvent_apply(&g1, &f).unwrap();
        // (H + a) u = f
        let back: Vec<f64> = h.apply(&u).iter().zip(&u).map(|(x, y)| x + a * y).collect();
        let resid: Vec<f64> = back.iter().zip(&f).map(|(x, y)| x - y).collect();
        assert!(norm(&resid) <= 10.0 * settings.tol * norm(&f));
        // G^a - G^{a'} = (a' - a) G^{a'} G^a
        let v = resolvent_apply(&g2, &f).unwrap();
        let w = resolvent_apply(&g2, &u).unwrap();
        let diff: Vec<f64> = u.iter().zip(&v).zip(&w).map(|((x, y), z)| x - y - (a2 - a) * z).collect();
        assert!(norm(&diff) <= 10.0 * settings.tol * norm(&u), "{}", norm(&diff) / norm(&u));
        // <G f, g> = <f, G g>
        let ug = resolvent_apply(&g1, &g).unwrap();
        let pair = (dot(&u, &g) - dot(&f, &ug)).abs();
        assert!(pair <= 10.0 * settings.tol * norm(&u) * norm(&g));
    }
}

#[test]
fn fixed_point_agrees_with_direct_solve() {
    let grid = LatticeGrid::new(2, 1.0, 32, BoundaryCondition::Dirichlet).unwrap();
    let xi = mollify(&sample_white_replica(&grid, 8, 0), &Mollifier::standard(2, 0.125).unwrap()).unwrap();
    let g: Vec<f64> = (0..grid.len()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
    let settings = SolverSettings::default();
    let a = 80.0;
    let (f, trace) = fixed_point_resolvent(&grid, &xi, 0.0, a, 0.0, &g, settings).unwrap();
    assert!(trace.converged && trace.contraction() < 1.0);
    let h = assemble(&grid, &xi, 0.0).unwrap();
    let direct = direct_solve(&h, a, &g).unwrap();
    let err: Vec<f64> = f.iter().zip(&direct).map(|(x, y)| x - y).collect();
    // Stopping on the increment bounds the error by tol · q/(1-q).
    let q = trace.contraction();
    assert!(norm(&err) <= 10.0 * settings.tol * norm(&direct) * (1.0 + q / (1.0 - q)), "{}", norm(&err) / norm(&direct));
}

#[test]
fn weyl_bound_under_diagonal_perturbation() {
    let grid = LatticeGrid::new(1, 1.0, 256, BoundaryCondition::Dirichlet).unwrap();
    let base = sample_white_replica(&grid, 3, 0);
    let h1 = assemble(&grid, &base, 0.0).unwrap();
    let mut rng = auxiliary_stream(3, 9);
    for _ in 0..10 {
        let scale = rng.random_range(0.01..5.0);
        let values: Vec<f64> = base.values.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
        let h2 = assemble(&grid, &NoiseField::deterministic(&grid, values).unwrap(), 0.0).unwrap();
        let rep = eigenvalue_continuity_check(&h1, &h2, 10).unwrap();
        assert!(rep.diagonal_perturbation && rep.holds, "{rep:?}");
    }
}
