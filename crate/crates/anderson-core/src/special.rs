//! Modified Bessel functions of the second kind, orders 0 and 1, for real
//! positive arguments, plus the Gamma values at half-integers needed for
//! sphere moments.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `K0(z)` for `z > 0`.
pub fn bessel_k0(z: f64) -> f64 {
    assert!(z > 0.0, "K0 needs a positive argument");
    if z <= SERIES_LIMIT {
        k0_series(z)
    } else if z <= ASYMPTOTIC_LIMIT {
        steed_k01(z).0
    } else {
        k_asymptotic(0.0, z)
    }
}

/// `K1(z)` for `z > 0`.
pub fn bessel_k1(z: f64) -> f64 {
    assert!(z > 0.0, "K1 needs a positive argument");
    if z <= SERIES_LIMIT {
        k1_series(z)
    } else if z <= ASYMPTOTIC_LIMIT {
        steed_k01(z).1
    } else {
        k_asymptotic(1.0, z)
    }
}

fn k0_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let log_term = (0.5 * z).ln() + EULER_GAMMA;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -log_term * i0 + tail
}

fn k1_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    // term_k = q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut h_k = 0.0;
    let mut i1_sum = 1.0;
    let mut psi_sum = (-2.0 * EULER_GAMMA + 1.0) * term;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        h_k += 1.0 / kf;
        let h_k1 = h_k + 1.0 / (kf + 1.0);
        i1_sum += term;
        psi_sum += (-2.0 * EULER_GAMMA + h_k + h_k1) * term;
        if term < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = 0.5 * z * i1_sum;
    1.0 / z + (0.5 * z).ln() * i1 - 0.25 * z * psi_sum
}

/// Steed's continued fraction (Temme's CF2) for `K0` and `K1`, `z >= 2`.
fn steed_k01(z: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * z)).sqrt() * (-z).exp() / s;
    let k1 = k0 * (z + 0.5 - h) / z;
    (k0, k1)
}

fn k_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * z);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * z)).sqrt() * (-z).exp() * sum
}

/// `Γ(m/2)` for a positive integer `m`.
pub fn gamma_half(m: u32) -> f64 {
    assert!(m > 0);
    let (mut value, mut arg) = if m.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = m as f64 / 2.0;
    while arg < target {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// Surface measure of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d as u32)
}

/// `∫_{S^{d-1}} ω^α dσ(ω)` for a multi-index `α`; zero unless every entry is even.
pub fn sphere_moment(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|&a| a % 2 == 1) {
        return 0.0;
    }
    let d = alpha.len() as u32;
    let total: u32 = alpha.iter().sum();
    let num: f64 = alpha.iter().map(|&a| gamma_half(a + 1)).product();
    2.0 * num / gamma_half(total + d)
}
