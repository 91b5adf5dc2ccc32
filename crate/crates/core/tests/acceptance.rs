//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptlstep::analysis::{
    amplification, convergence_study, count_sign_changes, heat1d_problem, speedup_estimate,
    theta_grid, AmpScheme,
};
use ptlstep::operators::estimate_euler_dt;
use ptlstep::ptl::{compute_ptl, cycle_operator, orthogonal_neighbors};
use ptlstep::schemes::{euler_step, rkg2_coefficients, step_backward_euler};
use ptlstep::{
    BoundaryCondition, DiffusionOperator, Face, Field, Grid, PreconditionerKind, Ptl, PtlConfig, Rhs,
    ScalarDiffusionConfig, SchemeConfig, SchemeKind, SolverConfig,
};

/// Significant-difference threshold for the oscillation count, relative to the field range.
const OSC_THRESHOLD: f64 = 1e-6;

fn report(n: u32, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let ok = pass && within;
    println!(
        "criterion {n}: {} {detail} ({:.2?} of {:?})",
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        budget
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its runtime budget");
}

#[test]
fn criterion_01_amplification_at_r500() {
    let t = Instant::now();
    let r = 500.0;
    let thetas = theta_grid(512);
    let be: Vec<f64> = thetas
        .iter()
        .map(|&th| amplification(AmpScheme::BackwardEuler, r, th).unwrap())
        .collect();
    let be_monotone = be.windows(2).all(|w| w[1] < w[0]);
    let be_pi = *be.last().unwrap();
    let a_ok = be_monotone && (be_pi - 1.0 / (1.0 + 2.0 * r)).abs() <= 1e-6;

    let upper: Vec<f64> = thetas.iter().copied().filter(|&th| th >= PI / 2.0).collect();
    let max_over = |s: AmpScheme| {
        upper
            .iter()
            .map(|&th| amplification(s, r, th).unwrap())
            .fold(0.0, f64::max)
    };
    let (g_max, l_max) = (max_over(AmpScheme::Rkg2), max_over(AmpScheme::Rkl2));
    let b_ok = g_max < l_max;

    let odd = amplification(AmpScheme::Rkg2, r, PI).unwrap();
    let even = amplification(AmpScheme::Rkg2Even, r, PI).unwrap();
    let c_ok = even >= 2.0 * odd;

    report(
        1,
        a_ok && b_ok && c_ok,
        format!(
            "(a) BE(pi)={be_pi:.6e} monotone={be_monotone}; (b) max[pi/2,pi] rkg2={g_max:.4} rkl2={l_max:.4}; \
             (c) |R(pi)| even={even:.4} odd={odd:.4} ratio={:.3} (need >= 2)",
            even / odd
        ),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_02_speedup() {
    let t = Instant::now();
    let s500 = speedup_estimate(SchemeKind::Rkg2, 500.0).unwrap();
    let exact = (s500 - 500.0 / 55.0).abs() <= 1e-12;
    let mut first_drop = None;
    let mut prev = speedup_estimate(SchemeKind::Rkg2, 10.0).unwrap();
    let mut drops = 0;
    for r in 11..=2000 {
        let s = speedup_estimate(SchemeKind::Rkg2, r as f64).unwrap();
        if s <= prev {
            drops += 1;
            first_drop.get_or_insert((r - 1, prev, r, s));
        }
        prev = s;
    }
    let detail = match first_drop {
        None => format!("rkg2(500)={s500:.12}; monotone on r=10..2000"),
        Some((r0, a, r1, b)) => format!(
            "rkg2(500)={s500:.12}; not monotone: {drops} decreases on r=10..2000, first {r0}->{r1}: {a:.4} -> {b:.4}"
        ),
    };
    report(
        2,
        exact && first_drop.is_none(),
        detail,
        t.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_03_convergence_orders() {
    let t = Instant::now();
    let problem = heat1d_problem().unwrap();
    let steps: Vec<usize> = vec![64, 128, 256, 512];
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, lo, hi) in [
        (SchemeKind::BackwardEuler, 0.9, 1.1),
        (SchemeKind::Rkl2, 1.9, 2.1),
        (SchemeKind::Rkg2, 1.9, 2.1),
    ] {
        let res = convergence_study(&SchemeConfig::new(kind), &problem, &steps).unwrap();
        ok &= (lo..=hi).contains(&res.order);
        parts.push(format!("{kind}={:.3}", res.order));
    }
    report(3, ok, format!("orders {}", parts.join(" ")), t.elapsed(), Duration::from_secs(30));
}

fn neumann_unit_grid(shape: &[usize]) -> (Arc<Grid>, BoundaryCondition) {
    let extents: Vec<(f64, f64)> = shape.iter().map(|&n| (0.0, (n - 1) as f64)).collect();
    let grid = Arc::new(Grid::uniform(shape, &extents).unwrap());
    let bc = BoundaryCondition::uniform(shape.len(), Face::NeumannZeroFlux).unwrap();
    (grid, bc)
}

/// 1D: step in the middle of 64 nodes. 2D: diagonal step on 32², so the
/// discontinuity is not aligned with either grid direction.
fn step_problems() -> Vec<(&'static str, DiffusionOperator, Field)> {
    let (g1, bc1) = neumann_unit_grid(&[64]);
    let u1 = Field::from_fn(g1.clone(), 1, |x, _| if x[0] >= 32.0 { 1.0 } else { 0.0 });
    let op1 = DiffusionOperator::scalar(ScalarDiffusionConfig::uniform(g1, 1.0, 1.0, bc1), 1).unwrap();
    let (g2, bc2) = neumann_unit_grid(&[32, 32]);
    let u2 = Field::from_fn(g2.clone(), 1, |x, _| if x[0] + x[1] >= 32.0 { 1.0 } else { 0.0 });
    let op2 = DiffusionOperator::scalar(ScalarDiffusionConfig::uniform(g2, 1.0, 1.0, bc2), 1).unwrap();
    vec![("1d", op1, u1), ("2d", op2, u2)]
}

fn outer_run(
    op: &DiffusionOperator,
    u: &Field,
    kind: SchemeKind,
    ptl: Option<&PtlConfig>,
) -> (Field, usize) {
    let dt_e = estimate_euler_dt(op, u).unwrap();
    let (v, r) = cycle_operator(op, &SchemeConfig::new(kind), u, 500.0 * dt_e, ptl).unwrap();
    (v, r.n_cycles())
}

#[test]
fn criterion_04_oscillation_suppression() {
    let t = Instant::now();
    let cfg = PtlConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, op, u) in step_problems() {
        let init = count_sign_changes(&u, OSC_THRESHOLD);
        let count = |kind, ptl| count_sign_changes(&outer_run(&op, &u, kind, ptl).0, OSC_THRESHOLD);
        let g_raw = count(SchemeKind::Rkg2, None);
        let g_ptl = count(SchemeKind::Rkg2, Some(&cfg));
        let b_raw = count(SchemeKind::BackwardEuler, None);
        let b_ptl = count(SchemeKind::BackwardEuler, Some(&cfg));
        ok &= g_raw > init && g_ptl <= init && b_ptl <= b_raw;
        parts.push(format!(
            "{name}: init={init} rkg2 no-ptl={g_raw} ptl={g_ptl}; be no-ptl={b_raw} ptl={b_ptl}"
        ));
    }
    report(4, ok, parts.join("; "), t.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_05_euler_sign_condition() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let cfg = PtlConfig::default();
    let mut checked_pairs = 0usize;
    let mut limited = 0usize;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let dims = rng.gen_range(1..=2);
        let shape: Vec<usize> = (0..dims).map(|_| rng.gen_range(3..=12)).collect();
        let coords: Vec<Vec<f64>> = shape
            .iter()
            .map(|&n| {
                let mut x = 0.0;
                (0..n)
                    .map(|_| {
                        let v = x;
                        x += rng.gen_range(0.2..1.5);
                        v
                    })
                    .collect()
            })
            .collect();
        let grid = Arc::new(Grid::from_coords(coords).unwrap());
        let faces = (0..dims)
            .map(|_| match rng.gen_range(0..3) {
                0 => [Face::NeumannZeroFlux; 2],
                1 => [Face::Periodic; 2],
                _ => [Face::Dirichlet(rng.gen_range(-1.0..1.0)), Face::NeumannZeroFlux],
            })
            .collect();
        let bc = BoundaryCondition::new(faces).unwrap();
        let nc = rng.gen_range(1..=2);
        let np = grid.n_points();
        let nu = Field::from_values(grid.clone(), 1, (0..np).map(|_| rng.gen_range(0.1..2.0)).collect()).unwrap();
        let rho = Field::from_values(grid.clone(), 1, (0..np).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap();
        let op = DiffusionOperator::scalar(ScalarDiffusionConfig::new(nu, rho, bc.clone()), nc).unwrap();
        let mut u = Field::from_values(grid.clone(), nc, (0..np * nc).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        u.impose_dirichlet(&bc).unwrap();
        let f = op.apply(&u).unwrap();
        let Ptl::Limited(dt) = compute_ptl(&u, &f, &bc, &cfg).unwrap() else {
            continue;
        };
        limited += 1;
        let v = u.with_values(euler_step(&op, u.values(), dt).unwrap()).unwrap();
        let k = ptlstep::ptl::argmax_abs(&f).unwrap();
        let scale = u.max_abs().powi(2);
        let n = grid.n_points();
        for q in orthogonal_neighbors(&grid, &bc, k) {
            for c in 0..nc {
                let (i, j) = (c * n + k, c * n + q);
                let before = u.values()[j] - u.values()[i];
                let after = v.values()[j] - v.values()[i];
                let prod = before * after / scale;
                worst = worst.min(prod);
                checked_pairs += 1;
            }
        }
    }
    let ok = worst >= -1e-14 && limited > 0;
    report(
        5,
        ok,
        format!("{limited} limited fields, {checked_pairs} pairs, min scaled product {worst:.3e}"),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_06_dynamic_vs_static() {
    let t = Instant::now();
    let dynamic = PtlConfig::default();
    let fixed = PtlConfig {
        reevaluate: false,
        ..PtlConfig::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, op, u) in step_problems() {
        let (_, d) = outer_run(&op, &u, SchemeKind::Rkg2, Some(&dynamic));
        let (_, s) = outer_run(&op, &u, SchemeKind::Rkg2, Some(&fixed));
        ok &= d <= s;
        if name == "2d" {
            ok &= d < s;
        }
        parts.push(format!("{name}: dynamic={d} static={s}"));
    }
    report(6, ok, parts.join("; "), t.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_07_preconditioners() {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [16, 32] {
        let grid = Arc::new(Grid::uniform(&[n, n], &[(0.0, 1.0), (0.0, 1.0)]).unwrap());
        let bc = BoundaryCondition::uniform(2, Face::Dirichlet(0.0)).unwrap();
        let op = DiffusionOperator::scalar(ScalarDiffusionConfig::uniform(grid.clone(), 1.0, 1.0, bc), 1)
            .unwrap();
        let u = Field::from_fn(grid, 1, |x, _| {
            (PI * x[0]).sin() * (PI * x[1]).sin() + 0.3 * (7.0 * x[0] + 3.0 * x[1]).cos()
        });
        let dt = 10.0 * estimate_euler_dt(&op, &u).unwrap();
        let iters = |pc| {
            let solver = SolverConfig {
                tol: 1e-10,
                max_iter: 10_000,
                preconditioner: pc,
            };
            step_backward_euler(&op, &u, dt, &solver).unwrap().1.iterations
        };
        let (j, i) = (iters(PreconditionerKind::Jacobi), iters(PreconditionerKind::Ilu0));
        ok &= i < j;
        parts.push(format!("{n}x{n}: jacobi={j} ilu0={i}"));
    }
    report(7, ok, parts.join("; "), t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_08_oracle_equivalence() {
    let t = Instant::now();
    let preset = ptlstep::analysis::ConvergencePreset::Aniso2d;
    let problem = preset.build().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in SchemeKind::ALL {
        let res = convergence_study(&SchemeConfig::new(kind), &problem, &preset.default_steps(kind)).unwrap();
        let finest = *res.errors.last().unwrap();
        ok &= res.monotone && finest < 1e-6;
        parts.push(format!(
            "{kind}: errors [{}]",
            res.errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ));
    }
    report(8, ok, parts.join("; "), t.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_09_conservation() {
    let t = Instant::now();
    let x0: Vec<f64> = (0..14).map(|i| (i as f64 * 0.37).powf(1.3)).collect();
    let x1: Vec<f64> = (0..11).map(|i| i as f64 * 0.4 + 0.05 * (i as f64).sin()).collect();
    let grid = Arc::new(Grid::from_coords(vec![x0, x1]).unwrap());
    let bc = BoundaryCondition::uniform(2, Face::NeumannZeroFlux).unwrap();
    let nu = Field::from_fn(grid.clone(), 1, |x, _| 0.5 + 0.4 * (x[0] - x[1]).sin());
    let rho = Field::from_fn(grid.clone(), 1, |x, _| 1.0 + 0.5 * x[0] / (1.0 + x[1]));
    let op = DiffusionOperator::scalar(ScalarDiffusionConfig::new(nu, rho, bc), 1).unwrap();
    let u0 = Field::from_fn(grid, 1, |x, _| if x[0] > 2.0 && x[1] < 2.5 { 3.0 } else { 0.5 * x[1] });
    let w = op.weights().into_owned();
    let total = |u: &Field| u.values().iter().zip(&w).map(|(u, w)| u * w).sum::<f64>();
    let m0 = total(&u0);
    let dt_e = estimate_euler_dt(&op, &u0).unwrap();
    let ptl = PtlConfig::default();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for kind in SchemeKind::ALL {
        for use_ptl in [false, true] {
            let outer = if kind == SchemeKind::Euler && !use_ptl { dt_e } else { 20.0 * dt_e };
            let mut u = u0.clone();
            for _ in 0..100 {
                u = cycle_operator(&op, &SchemeConfig::new(kind), &u, outer, use_ptl.then_some(&ptl))
                    .unwrap()
                    .0;
            }
            let rel = ((total(&u) - m0) / m0).abs();
            worst = worst.max(rel);
            parts.push(format!("{kind}{}={rel:.1e}", if use_ptl { "+ptl" } else { "" }));
        }
    }
    report(
        9,
        worst <= 1e-12,
        format!("relative drift {}", parts.join(" ")),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

/// `b_k` as an exact ratio of integers, independent of the library's table.
fn b_exact(k: i128) -> f64 {
    match k {
        0 => 1.0,
        1 => 1.0 / 3.0,
        2 => 1.0 / 15.0,
        _ => (4 * (k - 1) * (k + 4)) as f64 / (3 * k * (k + 1) * (k + 2) * (k + 3)) as f64,
    }
}

#[test]
fn criterion_10_coefficient_table() {
    let t = Instant::now();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * b.abs().max(1.0);
    let mut failures = Vec::new();
    for s in (3..=201).step_by(2) {
        let c = rkg2_coefficients(s).unwrap();
        let sf = s as f64;
        let mut check = |name: &str, k: usize, got: f64, want: f64| {
            if !close(got, want) {
                failures.push(format!("s={s} {name}_{k}: {got} vs {want}"));
            }
        };
        check("w", 0, c.w, 6.0 / ((sf + 4.0) * (sf - 1.0)));
        check("mu_tilde", 1, c.mu_tilde[1], c.w);
        check("gamma", 2, c.gamma[2], 0.0);
        check("mu", 2, c.mu[2], 0.5);
        check("nu", 2, c.nu[2], -0.1);
        for k in 0..=s {
            check("b", k, c.b[k], b_exact(k as i128));
        }
        for k in 2..=s {
            let kf = k as f64;
            let bk = b_exact(k as i128);
            let (b1, b2) = (b_exact(k as i128 - 1), b_exact(k as i128 - 2));
            let mu = (2.0 + 1.0 / kf) * bk / b1;
            check("mu", k, c.mu[k], mu);
            check("nu", k, c.nu[k], -(1.0 + 1.0 / kf) * bk / b2);
            check("mu_tilde", k, c.mu_tilde[k], mu * c.w);
            check("gamma", k, c.gamma[k], (kf * (kf + 1.0) / 2.0 * b1 - 1.0) * mu * c.w);
        }
    }
    let detail = if failures.is_empty() {
        "all identities hold for odd s in 3..=201".to_string()
    } else {
        format!("{} mismatches, first: {}", failures.len(), failures[0])
    };
    report(10, failures.is_empty(), detail, t.elapsed(), Duration::from_secs(1));
}
