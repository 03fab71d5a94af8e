use std::f64::consts::PI;

use anderson_core::mollifier::Mollifier;
use anderson_core::renorm::{compute_c1, compute_c11_c12, continuum_constants, lattice_self_energy, monte_carlo_c1, monte_carlo_c11_c12, scaled_constants};
use anderson_core::{BoundaryCondition, LatticeGrid};

#[test]
fn planar_c1_tracks_log_divergence() {
    // c1(ε/2) - c1(ε) → ln 2 / (2π) as ε → 0, with an O(ε²) correction.
    let c: Vec<f64> = [0.03125, 0.015625, 0.0078125]
        .iter()
        .map(|&e| compute_c1(1.0, &Mollifier::standard(2, e).unwrap()).unwrap().value)
        .collect();
    let target = 2f64.ln() / (2.0 * PI);
    let dev: Vec<f64> = c.windows(2).map(|w| (w[1] - w[0]) - target).collect();
    assert!(dev[1].abs() < 0.02 * target, "{c:?}");
    assert!(dev[1].abs() < 0.5 * dev[0].abs(), "{dev:?}");
}

#[test]
fn quadrature_agrees_with_monte_carlo() {
    let mol = Mollifier::standard(2, 0.1).unwrap();
    let q = compute_c1(4.0, &mol).unwrap();
    let mc = monte_carlo_c1(4.0, &mol, 400_000, 5).unwrap();
    assert!((q.value - mc.value).abs() <= 3.0 * mc.error + q.error, "{q:?} vs {mc:?}");

    let mol3 = Mollifier::standard(3, 0.1).unwrap();
    let q1 = compute_c1(4.0, &mol3).unwrap();
    let mc1 = monte_carlo_c1(4.0, &mol3, 400_000, 6).unwrap();
    assert!((q1.value - mc1.value).abs() <= 3.0 * mc1.error + q1.error, "{q1:?} vs {mc1:?}");
    let (c11, c12) = compute_c11_c12(4.0, &mol3).unwrap();
    let (m11, m12) = monte_carlo_c11_c12(4.0, &mol3, 60_000, 7).unwrap();
    assert!((c11.value - m11.value).abs() <= 3.0 * m11.error + c11.error, "{c11:?} vs {m11:?}");
    assert!((c12.value - m12.value).abs() <= 3.0 * m12.error + c12.error, "{c12:?} vs {m12:?}");
}

#[test]
fn lattice_self_energy_approaches_continuum() {
    let mol = Mollifier::standard(2, 0.0625).unwrap();
    let grid = LatticeGrid::new(2, 1.0, 512, BoundaryCondition::Periodic).unwrap();
    let lat = lattice_self_energy(&grid, 1.0, &mol).unwrap();
    let cont = compute_c1(1.0, &mol).unwrap().value;
    assert!((lat - cont).abs() < 0.05 * cont.abs(), "lattice {lat} continuum {cont}");
}

#[test]
fn three_dimensional_total_combines_parts() {
    let mol = Mollifier::standard(3, 0.1).unwrap();
    let c = continuum_constants(4.0, &mol).unwrap();
    assert!((c.total - (c.c1 + c.c11 + c.c12)).abs() < 1e-12 * c.c1.abs());
    assert!(c.error_estimate < 1e-5 * c.c1.abs());
    assert!(c.c1 > 0.0);
}

#[test]
fn dilation_of_unit_mass_shifts_by_known_amount() {
    let mol = Mollifier::standard(2, 0.1).unwrap();
    let base = continuum_constants(1.0, &mol).unwrap();
    let s = scaled_constants(&base, 1.0, &mol).unwrap();
    assert!((s.total - base.total).abs() < 1e-9, "{} vs {}", s.total, base.total);
}
