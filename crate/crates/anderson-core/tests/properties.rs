use anderson_core::experiments::clopper_pearson;
use anderson_core::greens::{partition, theta};
use anderson_core::mollifier::Mollifier;
use anderson_core::noise::{mollify, sample_white_replica, NoiseField};
use anderson_core::operator::assemble;
use anderson_core::spectra::lowest_eigenpairs_with;
use anderson_core::spectra::SpectrumOptions;
use anderson_core::{BoundaryCondition, LatticeGrid};
use proptest::prelude::*;

fn bc() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![Just(BoundaryCondition::Dirichlet), Just(BoundaryCondition::Periodic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_operator_is_symmetric(d in 1usize..=3, m in 2usize..5, bc in bc(), seed in any::<u64>()) {
        let n = 2 * m;
        let grid = LatticeGrid::new(d, 1.0, n, bc).unwrap();
        let h = assemble(&grid, &sample_white_replica(&grid, seed, 0), 0.3).unwrap();
        prop_assert!(h.matrix().is_symmetric());
    }

    #[test]
    fn dyadic_partition_sums_to_one(r in 1e-6f64..10.0) {
        let s: f64 = (-10..40).map(|n| partition(2f64.powi(n) * r)).sum();
        prop_assert!((s - 1.0).abs() < 1e-13);
        // Tail sums telescope to θ(2^{n-1} r).
        let n = 3;
        let tail: f64 = (n..60).map(|l| partition(2f64.powi(l) * r)).sum();
        prop_assert!((tail - theta(2f64.powi(n - 1) * r)).abs() < 1e-13);
    }

    #[test]
    fn constant_shift_moves_every_eigenvalue(shift in -20.0f64..20.0, seed in any::<u64>()) {
        let grid = LatticeGrid::new(2, 1.0, 12, BoundaryCondition::Dirichlet).unwrap();
        let xi = sample_white_replica(&grid, seed, 1);
        let opts = SpectrumOptions::default();
        let a = lowest_eigenpairs_with(assemble(&grid, &xi, 0.0).unwrap().matrix(), Some(&grid), 4, &opts).unwrap();
        let b = lowest_eigenpairs_with(assemble(&grid, &xi, shift).unwrap().matrix(), Some(&grid), 4, &opts).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((y - x - shift).abs() < 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn weyl_for_random_diagonals(seed in any::<u64>(), scale in 0.0f64..10.0, bump in prop::collection::vec(-1.0f64..1.0, 63)) {
        let grid = LatticeGrid::new(1, 1.0, 64, BoundaryCondition::Dirichlet).unwrap();
        let base = sample_white_replica(&grid, seed, 0);
        let moved: Vec<f64> = base.values.iter().zip(&bump).map(|(v, b)| v + scale * b).collect();
        let sup = bump.iter().fold(0.0f64, |m, b| m.max((scale * b).abs()));
        let opts = SpectrumOptions::default();
        let a = lowest_eigenpairs_with(assemble(&grid, &base, 0.0).unwrap().matrix(), Some(&grid), 10, &opts).unwrap();
        let field = NoiseField::deterministic(&grid, moved).unwrap();
        let b = lowest_eigenpairs_with(assemble(&grid, &field, 0.0).unwrap().matrix(), Some(&grid), 10, &opts).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() <= sup + 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn periodic_mollification_preserves_mass(seed in any::<u64>(), k in 2usize..5) {
        let grid = LatticeGrid::new(2, 1.0, 32, BoundaryCondition::Periodic).unwrap();
        let white = sample_white_replica(&grid, seed, 0);
        let eps = k as f64 * grid.mesh();
        let smooth = mollify(&white, &Mollifier::standard(2, eps).unwrap()).unwrap();
        let m0: f64 = white.values.iter().sum();
        let m1: f64 = smooth.values.iter().sum();
        prop_assert!((m0 - m1).abs() < 1e-9 * (1.0 + m0.abs()) * grid.len() as f64);
    }

    #[test]
    fn clopper_pearson_brackets_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = clopper_pearson(k, n, 0.95);
        let p = k as f64 / n as f64;
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }
}
