//! Time integrators: explicit Euler, backward Euler with PCG, and the two
//! second-order super time-stepping schemes RKL2 (Legendre) and RKG2
//! (Gegenbauer, α = 3/2).
//!
//! Both STS schemes share the stage recurrence
//!
//! ```text
//! u_1 = u_0 + μ̃_1 Δt F(u_0)
//! u_k = μ_k u_{k−1} + ν_k u_{k−2} + (1 − μ_k − ν_k) u_0 + μ̃_k Δt F(u_{k−1}) + γ_k Δt F(u_0)
//! ```
//!
//! and differ only in their coefficient tables.
//!
//! RKG2: `w = 6/((s+4)(s−1))`, `b_0 = 1`, `b_1 = 1/3`, `b_2 = 1/15`,
//! `b_k = 4(k−1)(k+4) / (3k(k+1)(k+2)(k+3))`, `μ_k = (2 + 1/k) b_k/b_{k−1}`,
//! `ν_k = −(1 + 1/k) b_k/b_{k−2}`, `μ̃_k = w μ_k`,
//! `γ_k = (k(k+1)/2 · b_{k−1} − 1) μ̃_k`, `μ̃_1 = w`. Stable for
//! `Δt/Δt_Euler ≤ (s+4)(s−1)/6`.
//!
//! RKL2: `b_j = (j² + j − 2) / (2j(j+1))` with `b_0 = b_1 = b_2 = 1/3`,
//! `a_j = 1 − b_j`, `w_1 = 4/(s² + s − 2)`, `μ̃_1 = b_1 w_1`,
//! `μ_j = (2j−1)/j · b_j/b_{j−1}`, `ν_j = −(j−1)/j · b_j/b_{j−2}`,
//! `μ̃_j = w_1 μ_j`, `γ_j = −a_{j−1} μ̃_j`. Stable for
//! `Δt/Δt_Euler ≤ (s² + s − 2)/4`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linsolve::{
    build_ilu0_weighted, build_jacobi, pcg_solve, CsrMatrix, FnOperator, MatrixOperator,
    Preconditioner, SolveStats,
};
use crate::mesh::Field;
use crate::operators::{DiffusionOperator, Rhs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StsFamily {
    Rkl2,
    Rkg2,
}

/// Stage coefficients; vectors are indexed by stage `k` (entry 0 unused except `b`).
#[derive(Debug, Clone, PartialEq)]
pub struct StsCoefficients {
    pub family: StsFamily,
    pub s: usize,
    /// `w` for RKG2, `w_1` for RKL2.
    pub w: f64,
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl StsCoefficients {
    /// Largest `Δt/Δt_Euler` this table is stable for.
    pub fn max_ratio(&self) -> f64 {
        let s = self.s as f64;
        match self.family {
            StsFamily::Rkg2 => (s + 4.0) * (s - 1.0) / 6.0,
            StsFamily::Rkl2 => (s * s + s - 2.0) / 4.0,
        }
    }
}

/// Raw RKG2 stage count `⌈½√(25 + 24r) − 3/2⌉`, before the odd adjustment.
pub fn rkg2_raw_count(r: f64) -> usize {
    let s = (0.5 * (25.0 + 24.0 * r).sqrt() - 1.5).ceil();
    s.max(1.0) as usize
}

/// RKG2 stage count for `Δt/Δt_Euler`: odd and at least 3. Even counts lose
/// damping of the highest modes.
pub fn rkg2_iteration_count(dt: f64, dt_euler: f64) -> usize {
    let s = rkg2_raw_count(dt / dt_euler);
    let s = if s % 2 == 0 { s + 1 } else { s };
    s.max(3)
}

/// RKL2 stage count `⌈(√(9 + 16r) − 1)/2⌉`, at least 2.
pub fn rkl2_iteration_count(dt: f64, dt_euler: f64) -> usize {
    let r = dt / dt_euler;
    let s = (0.5 * ((9.0 + 16.0 * r).sqrt() - 1.0)).ceil();
    (s.max(2.0)) as usize
}

pub fn rkg2_coefficients(s: usize) -> Result<StsCoefficients> {
    if s < 3 || s % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "RKG2 needs an odd stage count of at least 3, got {s}"
        )));
    }
    Ok(rkg2_table(s))
}

/// RKG2 table without the odd-count check, for studying even counts.
pub fn rkg2_table(s: usize) -> StsCoefficients {
    assert!(s >= 2, "RKG2 needs at least 2 stages");
    let sf = s as f64;
    let w = 6.0 / ((sf + 4.0) * (sf - 1.0));
    let mut b = vec![0.0; s + 1];
    b[0] = 1.0;
    b[1] = 1.0 / 3.0;
    b[2] = 1.0 / 15.0;
    for (k, bk) in b.iter_mut().enumerate().skip(3) {
        let k = k as f64;
        *bk = 4.0 * (k - 1.0) * (k + 4.0) / (3.0 * k * (k + 1.0) * (k + 2.0) * (k + 3.0));
    }
    let mut mu = vec![0.0; s + 1];
    let mut nu = vec![0.0; s + 1];
    let mut mu_tilde = vec![0.0; s + 1];
    let mut gamma = vec![0.0; s + 1];
    mu[1] = 1.0;
    mu_tilde[1] = w;
    for k in 2..=s {
        let kf = k as f64;
        mu[k] = (2.0 + 1.0 / kf) * b[k] / b[k - 1];
        nu[k] = -(1.0 + 1.0 / kf) * b[k] / b[k - 2];
        mu_tilde[k] = mu[k] * w;
        gamma[k] = (kf * (kf + 1.0) / 2.0 * b[k - 1] - 1.0) * mu_tilde[k];
    }
    StsCoefficients {
        family: StsFamily::Rkg2,
        s,
        w,
        b,
        mu,
        nu,
        mu_tilde,
        gamma,
    }
}

pub fn rkl2_coefficients(s: usize) -> Result<StsCoefficients> {
    if s < 2 {
        return Err(Error::InvalidArgument(format!(
            "RKL2 needs at least 2 stages, got {s}"
        )));
    }
    let sf = s as f64;
    let w1 = 4.0 / (sf * sf + sf - 2.0);
    let mut b = vec![1.0 / 3.0; s + 1];
    for (j, bj) in b.iter_mut().enumerate().skip(3) {
        let j = j as f64;
        *bj = (j * j + j - 2.0) / (2.0 * j * (j + 1.0));
    }
    let mut mu = vec![0.0; s + 1];
    let mut nu = vec![0.0; s + 1];
    let mut mu_tilde = vec![0.0; s + 1];
    let mut gamma = vec![0.0; s + 1];
    mu[1] = 1.0;
    mu_tilde[1] = b[1] * w1;
    for j in 2..=s {
        let jf = j as f64;
        mu[j] = (2.0 * jf - 1.0) / jf * b[j] / b[j - 1];
        nu[j] = -(jf - 1.0) / jf * b[j] / b[j - 2];
        mu_tilde[j] = mu[j] * w1;
        gamma[j] = -(1.0 - b[j - 1]) * mu_tilde[j];
    }
    Ok(StsCoefficients {
        family: StsFamily::Rkl2,
        s,
        w: w1,
        b,
        mu,
        nu,
        mu_tilde,
        gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    None,
    #[default]
    Jacobi,
    Ilu0,
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "jacobi" => Ok(Self::Jacobi),
            "ilu0" => Ok(Self::Ilu0),
            _ => Err(Error::Parse(format!("unknown preconditioner `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            preconditioner: PreconditionerKind::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Euler,
    BackwardEuler,
    Rkl2,
    Rkg2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Euler,
        SchemeKind::BackwardEuler,
        SchemeKind::Rkl2,
        SchemeKind::Rkg2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Euler => "euler",
            SchemeKind::BackwardEuler => "be",
            SchemeKind::Rkl2 => "rkl2",
            SchemeKind::Rkg2 => "rkg2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "be" | "backward_euler" | "backward-euler" => Ok(Self::BackwardEuler),
            "rkl2" => Ok(Self::Rkl2),
            "rkg2" => Ok(Self::Rkg2),
            _ => Err(Error::Parse(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Multiplies the Euler limit wherever a scheme or controller consults it.
    pub safety_factor: f64,
    pub solver: SolverConfig,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            safety_factor: 1.0,
            solver: SolverConfig::default(),
        }
    }

    pub fn backward_euler(solver: SolverConfig) -> Self {
        Self {
            solver,
            ..Self::new(SchemeKind::BackwardEuler)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.safety_factor > 0.0 && self.safety_factor.is_finite()) {
            return Err(Error::InvalidArgument("safety_factor must be positive".into()));
        }
        if self.kind == SchemeKind::BackwardEuler {
            if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "solver tolerance {} not in (0, 1)",
                    self.solver.tol
                )));
            }
            if self.solver.max_iter == 0 {
                return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Work done by one step: STS stage count (1 for Euler and BE) and, for BE,
/// the linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub stages: usize,
    pub solve: Option<SolveStats>,
}

impl StepStats {
    /// Stage count, or PCG iterations for backward Euler.
    pub fn work(&self) -> usize {
        self.solve.map_or(self.stages, |s| s.iterations)
    }
}

/// Reusable pieces of the backward Euler system for a fixed linear operator.
#[derive(Debug, Default, Clone)]
pub struct BackwardEulerCache {
    jacobian: Option<CsrMatrix>,
    diagonal: Option<Vec<f64>>,
}

impl BackwardEulerCache {
    pub fn clear(&mut self) {
        self.jacobian = None;
        self.diagonal = None;
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    Ok(())
}

fn check_len<R: Rhs + ?Sized>(rhs: &R, u: &[f64]) -> Result<()> {
    if u.len() != rhs.len() {
        return Err(Error::ShapeMismatch(format!(
            "state has {} unknowns, operator {}",
            u.len(),
            rhs.len()
        )));
    }
    Ok(())
}

fn check_finite(u: &[f64], scheme: &'static str, stage: usize) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { scheme, stage })
    }
}

pub fn euler_step<R: Rhs + ?Sized>(rhs: &R, u: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_len(rhs, u)?;
    let mut f = vec![0.0; u.len()];
    rhs.eval(u, &mut f);
    let out: Vec<f64> = u.iter().zip(&f).map(|(u, f)| u + dt * f).collect();
    check_finite(&out, "euler", 1)?;
    Ok(out)
}

/// Runs the shared STS stage recurrence with the given table.
pub fn sts_step<R: Rhs + ?Sized>(
    rhs: &R,
    u0: &[f64],
    dt: f64,
    c: &StsCoefficients,
) -> Result<Vec<f64>> {
    check_len(rhs, u0)?;
    let name = match c.family {
        StsFamily::Rkg2 => "rkg2",
        StsFamily::Rkl2 => "rkl2",
    };
    let n = u0.len();
    let mut y0 = vec![0.0; n];
    rhs.eval(u0, &mut y0);
    let mut prev2 = u0.to_vec();
    let mut prev: Vec<f64> = u0
        .iter()
        .zip(&y0)
        .map(|(u, f)| u + c.mu_tilde[1] * dt * f)
        .collect();
    check_finite(&prev, name, 1)?;
    let mut f = vec![0.0; n];
    let mut next = vec![0.0; n];
    for k in 2..=c.s {
        rhs.eval(&prev, &mut f);
        let (mu, nu) = (c.mu[k], c.nu[k]);
        let rest = 1.0 - mu - nu;
        let (mt, g) = (c.mu_tilde[k] * dt, c.gamma[k] * dt);
        for i in 0..n {
            next[i] = mu * prev[i] + nu * prev2[i] + rest * u0[i] + mt * f[i] + g * y0[i];
        }
        check_finite(&next, name, k)?;
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(prev)
}

pub fn rkg2_step<R: Rhs + ?Sized>(
    rhs: &R,
    u: &[f64],
    dt: f64,
    dt_euler: f64,
) -> Result<(Vec<f64>, usize)> {
    check_dt(dt)?;
    let s = rkg2_iteration_count(dt, dt_euler);
    Ok((sts_step(rhs, u, dt, &rkg2_coefficients(s)?)?, s))
}

pub fn rkl2_step<R: Rhs + ?Sized>(
    rhs: &R,
    u: &[f64],
    dt: f64,
    dt_euler: f64,
) -> Result<(Vec<f64>, usize)> {
    check_dt(dt)?;
    let s = rkl2_iteration_count(dt, dt_euler);
    Ok((sts_step(rhs, u, dt, &rkl2_coefficients(s)?)?, s))
}

/// Backward Euler for an affine `F`: solves `x − Δt F(x) = u` with PCG in the
/// operator's weighted inner product, starting from `u`.
///
/// The returned state is `u + Δt F(x)`, which equals `x` up to the solver
/// tolerance but keeps the update in flux form, so conservation does not
/// depend on how tightly the system is solved.
pub fn backward_euler_step<R: Rhs + ?Sized>(
    rhs: &R,
    u: &[f64],
    dt: f64,
    solver: &SolverConfig,
    cache: &mut BackwardEulerCache,
) -> Result<(Vec<f64>, SolveStats)> {
    check_dt(dt)?;
    check_len(rhs, u)?;
    if !rhs.is_linear() {
        return Err(Error::InvalidArgument(
            "backward Euler needs a linear operator; freeze the lagged state first".into(),
        ));
    }
    let n = u.len();
    let weights = rhs.weights().into_owned();
    let mut f = vec![0.0; n];
    let mut fh = vec![0.0; n];
    rhs.eval(u, &mut f);
    rhs.eval_homogeneous(u, &mut fh);
    let b: Vec<f64> = (0..n).map(|i| u[i] + dt * (f[i] - fh[i])).collect();

    let pc = match solver.preconditioner {
        PreconditionerKind::None => Preconditioner::Identity,
        PreconditionerKind::Jacobi => {
            let d = cache.diagonal.get_or_insert_with(|| rhs.diagonal());
            let a_diag: Vec<f64> = d.iter().map(|d| 1.0 - dt * d).collect();
            build_jacobi(&MatrixOperator::new(
                CsrMatrix::from_diagonal(&a_diag),
                weights.clone(),
            ))?
        }
        PreconditionerKind::Ilu0 => {
            let j = cache.jacobian.get_or_insert_with(|| rhs.assemble());
            let a = CsrMatrix::identity(n).add_scaled(-dt, j);
            build_ilu0_weighted(&a, &weights)?
        }
    };
    let op = FnOperator::new(weights, |x: &[f64], y: &mut [f64]| {
        rhs.eval_homogeneous(x, y);
        for (y, x) in y.iter_mut().zip(x) {
            *y = x - dt * *y;
        }
    });
    let (x, stats) = pcg_solve(&op, &b, &pc, u, solver.tol, solver.max_iter)?;
    if !stats.converged {
        return Err(Error::NotConverged(stats));
    }
    rhs.eval(&x, &mut f);
    let out: Vec<f64> = u.iter().zip(&f).map(|(u, f)| u + dt * f).collect();
    check_finite(&out, "be", 1)?;
    Ok((out, stats))
}

/// One step of `cfg.kind`; `dt_euler` is scaled by the safety factor.
pub fn step<R: Rhs + ?Sized>(
    rhs: &R,
    u: &[f64],
    dt: f64,
    dt_euler: f64,
    cfg: &SchemeConfig,
    cache: &mut BackwardEulerCache,
) -> Result<(Vec<f64>, StepStats)> {
    cfg.validate()?;
    check_dt(dt)?;
    let dt_e = dt_euler * cfg.safety_factor;
    match cfg.kind {
        SchemeKind::Euler => Ok((
            euler_step(rhs, u, dt)?,
            StepStats {
                stages: 1,
                solve: None,
            },
        )),
        SchemeKind::Rkg2 => {
            let (v, s) = rkg2_step(rhs, u, dt, dt_e)?;
            Ok((v, StepStats { stages: s, solve: None }))
        }
        SchemeKind::Rkl2 => {
            let (v, s) = rkl2_step(rhs, u, dt, dt_e)?;
            Ok((v, StepStats { stages: s, solve: None }))
        }
        SchemeKind::BackwardEuler => {
            let (v, st) = backward_euler_step(rhs, u, dt, &cfg.solver, cache)?;
            Ok((
                v,
                StepStats {
                    stages: 1,
                    solve: Some(st),
                },
            ))
        }
    }
}

pub fn step_euler(op: &DiffusionOperator, u: &Field, dt: f64) -> Result<Field> {
    op.check_field(u)?;
    check_dt(dt)?;
    u.with_values(euler_step(op, u.values(), dt)?)
}

pub fn step_rkg2(op: &DiffusionOperator, u: &Field, dt: f64, dt_euler: f64) -> Result<Field> {
    op.check_field(u)?;
    u.with_values(rkg2_step(op, u.values(), dt, dt_euler)?.0)
}

pub fn step_rkl2(op: &DiffusionOperator, u: &Field, dt: f64, dt_euler: f64) -> Result<Field> {
    op.check_field(u)?;
    u.with_values(rkl2_step(op, u.values(), dt, dt_euler)?.0)
}

pub fn step_backward_euler(
    op: &DiffusionOperator,
    u: &Field,
    dt: f64,
    solver: &SolverConfig,
) -> Result<(Field, SolveStats)> {
    op.check_field(u)?;
    let (v, st) = backward_euler_step(op, u.values(), dt, solver, &mut BackwardEulerCache::default())?;
    Ok((u.with_values(v)?, st))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);

    impl Rhs for Decay {
        fn len(&self) -> usize {
            1
        }
        fn eval(&self, u: &[f64], out: &mut [f64]) {
            out[0] = -self.0 * u[0];
        }
    }

    #[test]
    fn iteration_counts() {
        assert_eq!(rkg2_iteration_count(1.0, 1.0), 3);
        assert_eq!(rkg2_iteration_count(500.0, 1.0), 55);
        assert_eq!(rkg2_raw_count(500.0), 54);
        assert_eq!(rkg2_iteration_count(1e-9, 1.0), 3);
        assert_eq!(rkl2_iteration_count(500.0, 1.0), 45);
        assert_eq!(rkl2_iteration_count(1e-9, 1.0), 2);
    }

    #[test]
    fn rkg2_hand_values() {
        let c = rkg2_coefficients(5).unwrap();
        assert!((c.w - 1.0 / 6.0).abs() < 1e-16);
        let c = rkg2_coefficients(7).unwrap();
        assert!((c.b[3] - 7.0 / 135.0).abs() < 1e-16);
        assert!((c.mu[3] - 49.0 / 27.0).abs() < 1e-14);
        assert_eq!(c.gamma[2], 0.0);
        assert!((c.mu[2] - 0.5).abs() < 1e-16);
        assert!((c.nu[2] + 0.1).abs() < 1e-16);
        assert!(rkg2_coefficients(4).is_err());
        assert!(rkg2_coefficients(1).is_err());
    }

    #[test]
    fn zero_operator_is_identity() {
        let u = [2.5];
        for kind in SchemeKind::ALL {
            let (v, _) = step(
                &Decay(0.0),
                &u,
                3.0,
                1.0,
                &SchemeConfig::new(kind),
                &mut BackwardEulerCache::default(),
            )
            .unwrap();
            assert_eq!(v, u, "{kind}");
        }
    }

    #[test]
    fn small_step_accuracy() {
        let (v, _) = rkg2_step(&Decay(1.0), &[1.0], 1e-3, 1.0).unwrap();
        assert!((v[0] - (-1e-3f64).exp()).abs() <= 1e-9);
        let (v, _) = rkl2_step(&Decay(1.0), &[1.0], 1e-3, 1.0).unwrap();
        assert!((v[0] - (-1e-3f64).exp()).abs() <= 1e-9);
        assert!((euler_step(&Decay(1.0), &[1.0], 0.1).unwrap()[0] - 0.9).abs() < 1e-16);
    }

    #[test]
    fn backward_euler_closed_form() {
        let (v, st) = backward_euler_step(
            &Decay(1000.0),
            &[1.0],
            1.0,
            &SolverConfig::default(),
            &mut BackwardEulerCache::default(),
        )
        .unwrap();
        assert!(st.converged);
        assert!((v[0] - 1.0 / 1001.0).abs() < 1e-12);
    }

    #[test]
    fn blow_up_names_stage() {
        let err = rkg2_step(&Decay(f64::INFINITY), &[1.0], 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::BlowUp { scheme: "rkg2", stage: 1 }));
    }
}
