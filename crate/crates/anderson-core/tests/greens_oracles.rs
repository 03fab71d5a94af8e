use std::f64::consts::PI;

use anderson_core::greens::{boundary_decay_check, kernel_check, BoundaryDecayReport, GreensKernel, ReflectedKernel};
use anderson_core::quadrature::gauss_legendre;
use anderson_core::special::{bessel_k0, bessel_k1};
use anderson_core::BoundaryCondition;

/// `K_ν(z) = ∫_0^∞ e^{-z cosh t} cosh(ν t) dt` by the trapezoid rule, which
/// converges geometrically for this analytic, doubly decaying integrand.
fn bessel_k_oracle(nu: f64, z: f64) -> f64 {
    let h = 1e-3f64;
    let mut sum = 0.5 * (-z).exp();
    let mut t = h;
    loop {
        let term = (-z * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-300 || t > 40.0 {
            break;
        }
        t += h;
    }
    sum * h
}

#[test]
fn bessel_against_integral_representation() {
    for &z in &[1e-4, 0.01, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 5.0, 12.0, 24.9, 25.1, 40.0] {
        let (k0, k1) = (bessel_k_oracle(0.0, z), bessel_k_oracle(1.0, z));
        assert!((bessel_k0(z) - k0).abs() <= 1e-12 * k0, "K0({z}) {} vs {k0}", bessel_k0(z));
        assert!((bessel_k1(z) - k1).abs() <= 1e-12 * k1, "K1({z}) {} vs {k1}", bessel_k1(z));
    }
}

#[test]
fn kernel_reference_values() {
    let k1 = GreensKernel::new(1, 1.0).unwrap();
    assert!((k1.eval(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
    let k3 = GreensKernel::new(3, 4.0).unwrap();
    assert!((k3.eval(&[0.6, 0.8, 0.0]).unwrap() - (-2f64).exp() / (4.0 * PI)).abs() < 1e-15);
    let k2 = GreensKernel::new(2, 1.0).unwrap();
    let oracle = bessel_k_oracle(0.0, 0.1) / (2.0 * PI);
    assert!((k2.eval(&[0.0, 0.1]).unwrap() - oracle).abs() < 1e-12 * oracle);
}

#[test]
fn planar_log_singularity_is_bounded() {
    let k = GreensKernel::new(2, 1.0).unwrap();
    let vals: Vec<f64> = (0..=40)
        .map(|i| 10f64.powf(-6.0 + 4.0 * i as f64 / 40.0))
        .map(|r| 2.0 * PI * k.eval(&[r, 0.0]).unwrap() + r.ln())
        .collect();
    let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    // K0(r) + ln r → ln 2 - γ with corrections O(r² ln r).
    assert!(spread < 1e-3, "{spread}");
    assert!((vals[0] - (2f64.ln() - 0.577_215_664_901_532_9)).abs() < 1e-9);
}

#[test]
fn telescoping_in_one_dimension() {
    let dec = GreensKernel::new(1, 1.0).unwrap().decompose(4).unwrap();
    let rep = kernel_check(&dec, 100, 3, 11).unwrap();
    assert!(rep.telescoping_error < 1e-8, "{}", rep.telescoping_error);
}

/// `∫ P_n` over the cube `[-R, R]^3` by a tensor Gauss rule split at the
/// layer's radial breakpoints along each axis. Independent of the polar
/// rule inside the library.
#[test]
fn layer_mass_vanishes_in_three_dimensions() {
    let dec = GreensKernel::new(3, 1.0).unwrap().decompose(4).unwrap();
    let n = dec.lowest_level() + 2;
    let big_r = 2f64.powi(-n);
    let (x, w) = gauss_legendre(40);
    let cuts = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0].map(|c| c * big_r);
    let mut nodes = Vec::new();
    for p in cuts.windows(2) {
        let (c, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push((c + h * xi, h * wi));
        }
    }
    let mut total = 0.0;
    let mut scale = 0.0;
    for &(a, wa) in &nodes {
        for &(b, wb) in &nodes {
            for &(c, wc) in &nodes {
                let v = dec.layer(n, &[a, b, c]);
                total += wa * wb * wc * v;
                scale += wa * wb * wc * v.abs();
            }
        }
    }
    assert!(scale > 1e-6, "layer should not vanish identically");
    assert!(total.abs() < 1e-8, "∫P_n = {total} (∫|P_n| = {scale})");
}

#[test]
fn decomposition_suite_all_dimensions() {
    for d in 1..=3 {
        for a in [1.0, 4.0] {
            let dec = GreensKernel::new(d, a).unwrap().decompose(4).unwrap();
            let rep = kernel_check(&dec, 40, 7, 3).unwrap();
            assert!(rep.telescoping_error < 1e-8, "d={d} a={a}: {}", rep.telescoping_error);
            assert!(rep.moment_error < 1e-8, "d={d} a={a}: {}", rep.moment_error);
            assert!(rep.bound_constant.is_finite());
        }
    }
}

#[test]
fn dirichlet_kernel_vanishes_on_boundary() {
    let refl = ReflectedKernel::new(GreensKernel::new(2, 1.0).unwrap(), 1.0, BoundaryCondition::Dirichlet).unwrap();
    for y in [[0.3, 0.1, 0.0], [-0.7, 0.5, 0.0], [0.95, -0.2, 0.0]] {
        let v = refl.eval_k(&[1.0, 0.25, 0.0], &y).unwrap();
        assert!(v.abs() <= refl.tail_bound() + 1e-14, "{v}");
    }
}

#[test]
fn periodic_reports_not_applicable() {
    let base = GreensKernel::new(2, 1.0).unwrap();
    let dec = base.decompose(4).unwrap();
    let refl = ReflectedKernel::new(base, 1.0, BoundaryCondition::Periodic).unwrap();
    let rep = boundary_decay_check(&refl, &dec, 2, &[0.0, 0.1], 5).unwrap();
    assert_eq!(rep, BoundaryDecayReport::NotApplicable);
}

#[test]
fn boundary_point_has_zero_sup() {
    let base = GreensKernel::new(2, 1.0).unwrap();
    let dec = base.decompose(4).unwrap();
    let refl = ReflectedKernel::new(base, 1.0, BoundaryCondition::Dirichlet).unwrap();
    match boundary_decay_check(&refl, &dec, 2, &[0.0], 21).unwrap() {
        BoundaryDecayReport::Checked { samples, .. } => assert!(samples[0].sup <= 1e-10, "{}", samples[0].sup),
        BoundaryDecayReport::NotApplicable => panic!("Dirichlet must be checked"),
    }
}
