//! Acceptance criteria AC1–AC14. Prints one PASS/FAIL line per criterion
//! and exits non-zero when any fails. Pass criterion ids (`AC5 AC12`) after
//! `--` to run a subset.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use anderson_core::experiments::{bump_lower_bound, convergence_in_epsilon, scaling_identity_check, tail_exponent, BumpConfig, ExperimentConfig};
use anderson_core::greens::{boundary_decay_check, kernel_check, BoundaryDecayReport, GreensKernel, ReflectedKernel};
use anderson_core::mollifier::Mollifier;
use anderson_core::noise::{mollify, sample_white_replica, NoiseField};
use anderson_core::operator::{assemble, direct_solve, fixed_point_resolvent, resolvent_apply, ResolventHandle, SolverSettings};
use anderson_core::renorm::{compute_c1, compute_c11_c12, continuum_constants, monte_carlo_c1, monte_carlo_c11_c12, ConstantsMethod};
use anderson_core::rng::auxiliary_stream;
use anderson_core::spectra::{eigenvalue_continuity_check, lowest_eigenpairs_with, SpectrumOptions};
use anderson_core::{BoundaryCondition, LatticeGrid};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn anderson(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_anderson")).args(args).env("ANDERSON_THREADS", "1").output().expect("run anderson")
}

/// Data rows of a CSV written by the CLI, keyed by header name.
fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema: "), "missing schema line in {}", path.display());
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect()).collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ac1(dir: &Path) -> Verdict {
    let out = dir.join("ac1");
    let t = Instant::now();
    let o = anderson(&["run", "spectrum", "--d", "1", "--L", "1", "--N", "2048", "--noise", "off", "--k", "5", "--out", out.to_str().unwrap()]);
    let elapsed = t.elapsed();
    if !o.status.success() {
        return verdict(false, format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    let rows = read_csv(&out.join("spectrum.csv"));
    let worst = rows
        .iter()
        .map(|r| {
            let k = num(r, "n");
            let exact = (k * PI / 2.0).powi(2);
            (num(r, "eigenvalue") - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    verdict(
        rows.len() == 5 && worst <= 1e-3 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.2e} (≤ 1e-3) over {} eigenvalues, {:.2}s (< 5s)", rows.len(), elapsed.as_secs_f64()),
    )
}

fn ac2() -> Verdict {
    let s = 0.3f64;
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        for a in [1.0, 4.0] {
            let k = GreensKernel::new(d, a).unwrap();
            let u = |y: &[f64; 3]| (-(y[..d].iter().map(|v| v * v).sum::<f64>()) / (2.0 * s * s)).exp();
            let lu = |y: &[f64; 3]| {
                let r2: f64 = y[..d].iter().map(|v| v * v).sum();
                (a + d as f64 / (s * s) - r2 / s.powi(4)) * u(y)
            };
            for x in [[0.0, 0.0, 0.0], [0.2, -0.1, 0.05], [0.5, 0.3, -0.2]] {
                let radius = norm(&x[..d]) + 12.0 * s;
                let got = k.convolve_at(&x, lu, radius);
                worst = worst.max((got - u(&x)).abs());
            }
        }
    }
    verdict(worst < 1e-3, format!("max |∫P(x−y)(−Δ+a)u(y)dy − u(x)| = {worst:.2e} (< 1e-3), d ∈ 1..3, a ∈ {{1,4}}"))
}

fn ac3() -> Verdict {
    let mut tele: f64 = 0.0;
    let mut moment: f64 = 0.0;
    let mut spread: f64 = 0.0;
    let mut constants = Vec::new();
    for d in 1..=3 {
        for a in [1.0, 4.0] {
            let dec = GreensKernel::new(d, a).unwrap().decompose(4).unwrap();
            let rep = kernel_check(&dec, 100, 7, 17).unwrap();
            tele = tele.max(rep.telescoping_error);
            moment = moment.max(rep.moment_error);
            let scaled: Vec<f64> = rep.layer_bounds.iter().map(|b| b.scaled).filter(|s| *s > 0.0).collect();
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scaled.iter().cloned().fold(0.0, f64::max);
            if d > 1 {
                spread = spread.max(hi / lo);
            }
            constants.push(format!("d{d}a{a}:{:.3}", rep.bound_constant));
        }
    }
    // One constant serves all 7 levels when the scaled sups stay within a
    // fixed factor instead of drifting with n.
    verdict(
        tele < 1e-8 && moment < 1e-8 && spread < 2.0,
        format!("telescoping {tele:.1e} (< 1e-8), moments {moment:.1e} (< 1e-8), scaled sup spread ×{spread:.3} (< 2), C = [{}]", constants.join(" ")),
    )
}

fn ac4() -> Verdict {
    let base = GreensKernel::new(2, 1.0).unwrap();
    let dec = base.decompose(4).unwrap();
    let refl = ReflectedKernel::new(base, 1.0, BoundaryCondition::Dirichlet).unwrap();
    let mut slopes = Vec::new();
    for n in [2, 3] {
        let w = 2f64.powi(-n);
        let distances: Vec<f64> = (0..=6).map(|i| 0.25 * w * i as f64).collect();
        match boundary_decay_check(&refl, &dec, n, &distances, 41).unwrap() {
            BoundaryDecayReport::Checked { normalised_slope, samples, .. } => {
                let zero = samples[0].sup;
                slopes.push((n, normalised_slope, zero));
            }
            BoundaryDecayReport::NotApplicable => return verdict(false, "Dirichlet reported not applicable".into()),
        }
    }
    let (s1, s2) = (slopes[0].1, slopes[1].1);
    let rel = (s1 - s2).abs() / s1.abs().max(s2.abs());
    verdict(
        rel <= 0.2 && s1 > 0.0 && s2 > 0.0,
        format!("normalised slopes n=2: {s1:.4}, n=3: {s2:.4}, relative gap {rel:.3} (≤ 0.2); sup at δ=0: {:.1e}, {:.1e}", slopes[0].2, slopes[1].2),
    )
}

fn ac5(dir: &Path) -> Verdict {
    let out = dir.join("ac5");
    let o = anderson(&["run", "renorm", "--d", "2", "--a", "1", "--eps-levels", "6", "--out", out.to_str().unwrap()]);
    if !o.status.success() {
        return verdict(false, format!("renorm exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    let rows = read_csv(&out.join("constants.csv"));
    let stdout = String::from_utf8_lossy(&o.stdout).to_string();
    let slope: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("c1_slope_vs_ln_eps = "))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(f64::NAN);
    let target = -1.0 / (2.0 * PI);
    let eps_ok = rows.first().map(|r| num(r, "eps")) == Some(0.0625) && rows.last().map(|r| num(r, "eps")) == Some(2f64.powi(-9));
    let d2 = rows.len() == 6 && eps_ok && ((slope - target) / target).abs() <= 0.1;

    let scaled: Vec<f64> = (4..=9)
        .map(|j| {
            let e = 2f64.powi(-j);
            e * compute_c1(1.0, &Mollifier::standard(3, e).unwrap()).unwrap().value
        })
        .collect();
    let n = scaled.len();
    let drift = ((scaled[n - 1] - scaled[n - 2]) / scaled[n - 1]).abs();
    let d3 = drift <= 0.1;

    let mut mc = Vec::new();
    let mut mc_ok = true;
    let mol2 = Mollifier::standard(2, 0.0625).unwrap();
    let q = compute_c1(1.0, &mol2).unwrap();
    let m = monte_carlo_c1(1.0, &mol2, 1_000_000, 21).unwrap();
    let z = (q.value - m.value).abs() / m.error;
    mc_ok &= z <= 3.0;
    mc.push(format!("d2 c1 {z:.2}σ"));
    let mol3 = Mollifier::standard(3, 0.1).unwrap();
    let q1 = compute_c1(4.0, &mol3).unwrap();
    let m1 = monte_carlo_c1(4.0, &mol3, 1_000_000, 22).unwrap();
    let (q11, q12) = compute_c11_c12(4.0, &mol3).unwrap();
    let (m11, m12) = monte_carlo_c11_c12(4.0, &mol3, 100_000, 23).unwrap();
    for (name, qv, mv) in [("c1", q1, m1), ("c11", q11, m11), ("c12", q12, m12)] {
        let z = (qv.value - mv.value).abs() / mv.error;
        mc_ok &= z <= 3.0;
        mc.push(format!("d3 {name} {z:.2}σ"));
    }
    verdict(
        d2 && d3 && mc_ok,
        format!(
            "d=2: {} rows, slope {slope:.5} vs {target:.5} ({:+.1}%, ≤ 10%); d=3: ε·c1 = {:.4} → {:.4}, last change {:.1}% (≤ 10%); MC: {}",
            rows.len(),
            100.0 * (slope - target) / target.abs(),
            scaled[0],
            scaled[n - 1],
            100.0 * drift,
            mc.join(", ")
        ),
    )
}

fn ac6() -> Verdict {
    let masses = [1.0f64, 4.0, 9.0, 16.0];
    let mut kappas = Vec::new();
    for d in [2usize, 3] {
        // First two levels with √a·ε ≤ 2^-4 for every a: the Lipschitz bound
        // is asymptotic in ε and coarser levels sit in the transient.
        for e in [0.015625, 0.0078125] {
            let mol = Mollifier::standard(d, e).unwrap();
            let c: Vec<f64> = masses.iter().map(|&a| continuum_constants(a, &mol).unwrap().total).collect();
            let mut k: f64 = 0.0;
            for i in 0..4 {
                for j in 0..i {
                    k = k.max((c[i] - c[j]).abs() / (masses[i].sqrt() - masses[j].sqrt()).abs());
                }
            }
            kappas.push((d, e, k));
        }
    }
    // One κ serves both levels when the per-level fits agree within 25%.
    let ok = kappas.chunks(2).all(|p| p[0].2.is_finite() && p[1].2.is_finite() && (p[0].2 - p[1].2).abs() <= 0.25 * p[0].2.max(p[1].2));
    let list: Vec<String> = kappas.iter().map(|(d, e, k)| format!("d{d} ε={e}: κ={k:.4}")).collect();
    verdict(ok, format!("{} (per-level κ within 25%)", list.join(", ")))
}

fn ac7() -> Verdict {
    let grid = LatticeGrid::new(2, 1.0, 128, BoundaryCondition::Dirichlet).unwrap();
    let mol = Mollifier::standard(2, 0.0625).unwrap();
    let xi = mollify(&sample_white_replica(&grid, 70, 0), &mol).unwrap();
    let c = continuum_constants(1.0, &mol).unwrap().total;
    let h = assemble(&grid, &xi, c).unwrap();
    let settings = SolverSettings::default();
    let lowest = lowest_eigenpairs_with(h.matrix(), Some(&grid), 1, &SpectrumOptions::default()).unwrap().eigenvalues[0];
    let a = (1.0 - lowest).max(1.0);
    let a2 = a + 5.0;
    let g1 = ResolventHandle::new(&h, a, settings).unwrap();
    let g2 = ResolventHandle::new(&h, a2, settings).unwrap();
    let mut rng = auxiliary_stream(70, 1);
    let (mut inv, mut ident, mut sym): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let f: Vec<f64> = (0..h.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..h.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = resolvent_apply(&g1, &f).unwrap();
        let back: Vec<f64> = h.apply(&u).iter().zip(&u).zip(&f).map(|((x, y), z)| x + a * y - z).collect();
        inv = inv.max(norm(&back) / norm(&f));
        let v = resolvent_apply(&g2, &f).unwrap();
        let w = resolvent_apply(&g2, &u).unwrap();
        let diff: Vec<f64> = u.iter().zip(&v).zip(&w).map(|((x, y), z)| x - y - (a2 - a) * z).collect();
        ident = ident.max(norm(&diff) / norm(&u));
        let ug = resolvent_apply(&g1, &g).unwrap();
        sym = sym.max((dot(&u, &g) - dot(&f, &ug)).abs() / (norm(&u) * norm(&g)));
    }
    let bound = 10.0 * settings.tol;
    verdict(
        inv <= bound && ident <= bound && sym <= bound,
        format!("a = {a:.3}, a' = {a2:.3}: inverse {inv:.1e}, resolvent identity {ident:.1e}, symmetry {sym:.1e} (each ≤ {bound:.0e})"),
    )
}

fn ac8() -> Verdict {
    let grid = LatticeGrid::new(2, 1.0, 64, BoundaryCondition::Dirichlet).unwrap();
    let mol = Mollifier::standard(2, 0.0625).unwrap();
    let c = continuum_constants(1.0, &mol).unwrap().total;
    let settings = SolverSettings::default();
    let replicas = 50;
    let mut report = Vec::new();
    let mut ok = true;
    let mut means = Vec::new();
    for a in [40.0, 160.0] {
        let mut converged = 0;
        let mut ratios = Vec::new();
        let mut worst: f64 = 0.0;
        for r in 0..replicas {
            let xi = mollify(&sample_white_replica(&grid, 80, r), &mol).unwrap();
            let mut rng = auxiliary_stream(80, r);
            let g: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let Ok((f, trace)) = fixed_point_resolvent(&grid, &xi, c, a, 0.0, &g, settings) {
                converged += 1;
                ratios.push(trace.contraction());
                let h = assemble(&grid, &xi, c).unwrap();
                let direct = direct_solve(&h, a, &g).unwrap();
                let err: Vec<f64> = f.iter().zip(&direct).map(|(x, y)| x - y).collect();
                worst = worst.max(norm(&err) / norm(&direct));
            }
        }
        let frac = converged as f64 / replicas as f64;
        let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
        ok &= frac >= 0.95 && worst <= 10.0 * settings.tol;
        means.push(mean);
        report.push(format!("a={a}: converged {:.0}%, mean contraction {mean:.4}, max |f − direct|/|direct| {worst:.1e}", 100.0 * frac));
    }
    ok &= means[1] < means[0];
    verdict(ok, format!("{} (≥ 95%, decreasing in a, ≤ 10·tol)", report.join("; ")))
}

fn ac9() -> Verdict {
    let grid = LatticeGrid::new(2, 1.0, 32, BoundaryCondition::Dirichlet).unwrap();
    let mol = Mollifier::standard(2, 0.125).unwrap();
    let xi = mollify(&sample_white_replica(&grid, 90, 0), &mol).unwrap();
    let h1 = assemble(&grid, &xi, 0.0).unwrap();
    let mut rng = auxiliary_stream(90, 1);
    let mut violations = 0;
    let mut tightest: f64 = 0.0;
    for _ in 0..200 {
        let scale = 10f64.powf(rng.random_range(-3.0..1.5));
        let values: Vec<f64> = xi.values.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
        let h2 = assemble(&grid, &NoiseField::deterministic(&grid, values).unwrap(), 0.0).unwrap();
        let rep = eigenvalue_continuity_check(&h1, &h2, 10).unwrap();
        if !rep.holds {
            violations += 1;
        }
        let worst = rep.differences.iter().cloned().fold(0.0, f64::max);
        tightest = tightest.max(worst / rep.bound);
    }
    verdict(violations == 0, format!("{violations} violations in 200 perturbations, n ≤ 10; max |Δλ|/max|ΔV| = {tightest:.4}"))
}

fn ac10() -> Verdict {
    let mut c1 = ExperimentConfig::new("ac10-d1", 1, 1.0, 4096);
    c1.epsilons = (0..4).map(|i| 0.125 * 2f64.powi(-i)).collect();
    c1.replicas = 50;
    c1.seed = 100;
    let r1 = convergence_in_epsilon(&c1).unwrap();

    let mut c2 = ExperimentConfig::new("ac10-d2", 2, 0.5, 256);
    c2.epsilons = (0..4).map(|j| 0.25 * 2f64.powf(-5.0 / 3.0 * j as f64)).collect();
    c2.replicas = 50;
    c2.seed = 101;
    c2.method = ConstantsMethod::LatticeSelfEnergy;
    let r2 = convergence_in_epsilon(&c2).unwrap();
    let target = r2.control_target();
    let slope = r2.control_slope.map(|f| f.slope.abs()).unwrap_or(f64::NAN);
    let ctrl = ((slope - target) / target).abs();
    verdict(
        r1.cauchy_fraction >= 0.8 && r2.cauchy_fraction >= 0.8 && ctrl <= 0.25 && r1.failures.is_empty() && r2.failures.is_empty(),
        format!(
            "d=1 decreasing differences {:.0}%, d=2 {:.0}% (≥ 80%); d=2 control |slope| {slope:.4} vs 1/(2π) = {target:.4} ({:.1}%, ≤ 25%)",
            100.0 * r1.cauchy_fraction,
            100.0 * r2.cauchy_fraction,
            100.0 * ctrl
        ),
    )
}

fn ac11() -> Verdict {
    let mut c = ExperimentConfig::new("ac11", 2, 1.0, 64);
    c.epsilons = vec![0.0625];
    c.replicas = 20;
    c.seed = 110;
    c.dilation = 2.0;
    c.eigenpairs = 3;
    let rep = scaling_identity_check(&c).unwrap();
    let worst = rep.rows.iter().map(|r| (r.lhs - r.rhs).abs() / r.tolerance).fold(0.0, f64::max);
    let held = rep.rows.iter().filter(|r| r.holds).count();
    verdict(
        rep.all_hold && rep.rows.len() == 60,
        format!("{held}/{} (replica, n) pairs hold; worst |lhs − rhs| / (5 × stencil bound) = {worst:.2e}; δ_L = {:.4}", rep.rows.len(), rep.scaled.delta_l),
    )
}

fn ac12() -> Verdict {
    let mut c1 = ExperimentConfig::new("ac12-d1", 1, 5.0, 4096);
    c1.epsilons = vec![2.0 * 10.0 / 4096.0];
    c1.replicas = 10_000;
    c1.seed = 120;
    c1.tail_x_min = 0.5;
    let t1 = tail_exponent(&c1).unwrap();

    let mut c2 = ExperimentConfig::new("ac12-d2", 2, 6.0, 96);
    c2.epsilons = vec![0.25];
    c2.replicas = 1000;
    c2.seed = 121;
    c2.tail_x_min = 0.25;
    let t2 = tail_exponent(&c2);

    // Dirichlet confinement keeps λ1 positive at every affordable d=3 size;
    // periodic boxes are the only ones with lower-tail mass.
    let mut c3 = ExperimentConfig::new("ac12-d3", 3, 2.0, 16);
    c3.bc = BoundaryCondition::Periodic;
    c3.epsilons = vec![0.5];
    c3.replicas = 1000;
    c3.seed = 122;
    c3.tail_x_min = 0.02;
    let t3 = tail_exponent(&c3);

    let s1 = t1.slope().unwrap_or(f64::NAN);
    let ok1 = (1.2..=1.8).contains(&s1);
    let (ok2, d2) = match &t2 {
        Ok(t) => {
            let s = t.slope().unwrap_or(f64::NAN);
            ((0.7..=1.3).contains(&s), format!("d=2 slope {s:.3} CI {} (gate [0.7, 1.3])", ci(t.slope_ci)))
        }
        Err(e) => (false, format!("d=2 failed: {e}")),
    };
    let d3 = match &t3 {
        Ok(t) => format!("d=3 trend-only: window slopes {:?}, moving monotonically towards 1/2: {:?}", t.window_slopes.iter().map(|s| round3(*s)).collect::<Vec<_>>(), t.trend_monotone()),
        Err(e) => format!("d=3 trend-only: no statistic ({e})"),
    };
    verdict(
        ok1 && ok2,
        format!("d=1 slope {s1:.3} CI {} (gate [1.2, 1.8]); {d2}; {d3}", ci(t1.slope_ci)),
    )
}

fn ci(c: Option<(f64, f64)>) -> String {
    c.map_or("n/a".into(), |(lo, hi)| format!("[{lo:.3}, {hi:.3}]"))
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn ac13() -> Verdict {
    let cfg = BumpConfig { dim: 2, half_width: 3.5, points_per_axis: 112, wells: 3, depth: 1.0, centres: None };
    let rep = bump_lower_bound(&cfg).unwrap();
    let upper = -3.0 * cfg.depth;
    let checks: Vec<(usize, f64, bool)> = [1usize, 3].iter().map(|&n| (n, rep.eigenvalues[n - 1], rep.b <= rep.eigenvalues[n - 1] && rep.eigenvalues[n - 1] <= upper)).collect();
    verdict(
        checks.iter().all(|c| c.2),
        format!("b = {:.4}; {} (b ≤ λ̄_n ≤ −3c = {upper})", rep.b, checks.iter().map(|(n, l, _)| format!("λ̄_{n} = {l:.4}")).collect::<Vec<_>>().join(", ")),
    )
}

fn ac14(dir: &Path) -> Verdict {
    let run = |name: &str| {
        let out = dir.join(name);
        let o = anderson(&[
            "run", "converge", "--d", "1", "--L", "1", "--N", "512", "--eps", "0.125,0.0625,0.03125,0.015625", "--replicas", "4", "--seed", "7", "--k", "2", "--out",
            out.to_str().unwrap(),
        ]);
        (o.status.success(), out)
    };
    let (ok_a, a) = run("ac14a");
    let (ok_b, b) = run("ac14b");
    if !(ok_a && ok_b) {
        return verdict(false, "converge run failed".into());
    }
    let mut compared = 0;
    let mut same = true;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        let (pa, pb) = (a.join(&name), b.join(&name));
        if name == "manifest.json" {
            let strip = |p: &Path| {
                let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
                let m = v.as_object_mut().unwrap();
                m.remove("timestamp");
                if let Some(c) = m.get_mut("config").and_then(|c| c.as_object_mut()) {
                    c.remove("output");
                }
                v
            };
            same &= strip(&pa) == strip(&pb);
        } else {
            same &= fs::read(&pa).unwrap() == fs::read(&pb).unwrap();
        }
        compared += 1;
    }
    verdict(same && compared >= 3, format!("{compared} files compared byte for byte (manifest modulo timestamp): identical = {same}"))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let scratch = tempfile::tempdir().unwrap();
    let dir = scratch.path().to_path_buf();
    type Check<'a> = (&'static str, &'static str, u64, Box<dyn Fn() -> Verdict + 'a>);
    let checks: Vec<Check> = vec![
        ("AC1", "free spectrum", 5, Box::new(|| ac1(&dir))),
        ("AC2", "Green's identity", 10, Box::new(ac2)),
        ("AC3", "kernel decomposition", 30, Box::new(ac3)),
        ("AC4", "Dirichlet kernel vanishing", 30, Box::new(ac4)),
        ("AC5", "renormalisation asymptotics", 600, Box::new(|| ac5(&dir))),
        ("AC6", "a-Lipschitz constants", 300, Box::new(ac6)),
        ("AC7", "resolvent suite", 120, Box::new(ac7)),
        ("AC8", "fixed-point contraction", 300, Box::new(ac8)),
        ("AC9", "Weyl perturbation", 120, Box::new(ac9)),
        ("AC10", "ε-convergence with coupling", 1200, Box::new(ac10)),
        ("AC11", "scaling identity", 600, Box::new(ac11)),
        ("AC12", "tail exponent", 7200, Box::new(ac12)),
        ("AC13", "bump lower-bound sandwich", 60, Box::new(ac13)),
        ("AC14", "reproducibility", u64::MAX, Box::new(|| ac14(&dir))),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, check) in &checks {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && secs <= *budget as f64, v.detail),
            Err(e) => (false, format!("panicked: {}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())),
        };
        let budget_text = if *budget == u64::MAX { String::new() } else { format!(" / {budget}s") };
        println!("{id} {} {name}: {detail} [{secs:.1}s{budget_text}]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria pass");
    } else {
        println!("acceptance: failing {}", failed.join(", "));
        std::process::exit(1);
    }
}
