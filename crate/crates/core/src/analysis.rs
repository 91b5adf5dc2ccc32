//! Von Neumann amplification factors, STS speedup estimates, convergence
//! studies and the fine-step explicit Euler reference.
//!
//! Mode convention: the 1D heat equation with a second-order central
//! difference on a uniform grid has eigenvalues `λ(θ) = (4/Δx²) sin²(θ/2)` for
//! mode angle `θ = kΔx ∈ (0, π]`, and `Δt_Euler = Δx²/2`. With `r = Δt/Δt_Euler`
//! this gives `z = −Δt λ = −2r sin²(θ/2)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, Face, Field, Grid};
use crate::operators::{
    estimate_euler_dt, AlignedConductionConfig, DiffusionOperator, Rhs, ScalarDiffusionConfig,
};
use crate::schemes::{
    backward_euler_step, euler_step, rkg2_raw_count, rkg2_step, rkg2_table, rkl2_iteration_count,
    rkl2_step, step, sts_step, BackwardEulerCache, SchemeConfig, SchemeKind, SolverConfig,
};

/// `du/dt = −λ u` for a single unknown.
#[derive(Debug, Clone, Copy)]
pub struct ScalarDecay {
    pub lambda: f64,
}

impl Rhs for ScalarDecay {
    fn len(&self) -> usize {
        1
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -self.lambda * u[0];
    }
}

/// Schemes whose amplification factor can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmpScheme {
    Euler,
    BackwardEuler,
    Rkl2,
    /// RKG2 with the odd stage count.
    Rkg2,
    /// RKG2 with the smallest even stage count covering `r`.
    Rkg2Even,
    Exact,
}

impl AmpScheme {
    pub fn name(self) -> &'static str {
        match self {
            AmpScheme::Euler => "euler",
            AmpScheme::BackwardEuler => "be",
            AmpScheme::Rkl2 => "rkl2",
            AmpScheme::Rkg2 => "rkg2",
            AmpScheme::Rkg2Even => "rkg2-even",
            AmpScheme::Exact => "exact",
        }
    }
}

impl fmt::Display for AmpScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AmpScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euler" => Ok(Self::Euler),
            "be" | "backward_euler" => Ok(Self::BackwardEuler),
            "rkl2" => Ok(Self::Rkl2),
            "rkg2" => Ok(Self::Rkg2),
            "rkg2-even" => Ok(Self::Rkg2Even),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// `Δt λ(θ)` for ratio `r`.
pub fn dt_lambda(r: f64, theta: f64) -> f64 {
    2.0 * r * (theta / 2.0).sin().powi(2)
}

fn check_request(r: f64, theta: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio {r} must be positive")));
    }
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::InvalidArgument(format!("theta {theta} not in (0, pi]")));
    }
    Ok(())
}

/// Smallest even RKG2 stage count whose stability interval covers `r`.
pub fn rkg2_even_count(r: f64) -> usize {
    let s = rkg2_raw_count(r).max(2);
    if s % 2 == 0 {
        s
    } else {
        s + 1
    }
}

/// Signed one-step growth factor `u^{n+1}/u^n`, obtained by running the
/// scheme on `u' = −λ(θ) u` with `Δt_Euler = 1`.
pub fn growth_factor(scheme: AmpScheme, r: f64, theta: f64) -> Result<f64> {
    check_request(r, theta)?;
    let rhs = ScalarDecay {
        lambda: dt_lambda(r, theta) / r,
    };
    let u = [1.0];
    let v = match scheme {
        AmpScheme::Exact => return Ok(exact_amplification(r, theta)),
        AmpScheme::Euler => euler_step(&rhs, &u, r)?[0],
        AmpScheme::BackwardEuler => {
            let solver = SolverConfig {
                tol: 1e-14,
                ..SolverConfig::default()
            };
            backward_euler_step(&rhs, &u, r, &solver, &mut BackwardEulerCache::default())?.0[0]
        }
        AmpScheme::Rkl2 => rkl2_step(&rhs, &u, r, 1.0)?.0[0],
        AmpScheme::Rkg2 => rkg2_step(&rhs, &u, r, 1.0)?.0[0],
        AmpScheme::Rkg2Even => sts_step(&rhs, &u, r, &rkg2_table(rkg2_even_count(r)))?[0],
    };
    Ok(v)
}

/// `|u^{n+1}/u^n|` for mode `θ` at ratio `r`.
pub fn amplification(scheme: AmpScheme, r: f64, theta: f64) -> Result<f64> {
    Ok(growth_factor(scheme, r, theta)?.abs())
}

/// `e^{−Δtλ(θ)}`.
pub fn exact_amplification(r: f64, theta: f64) -> f64 {
    (-dt_lambda(r, theta)).exp()
}

/// Gegenbauer polynomial `C_n^{(3/2)}(x)`.
pub fn gegenbauer_3_2(n: usize, x: f64) -> f64 {
    let alpha = 1.5;
    let (mut c0, mut c1) = (1.0, 2.0 * alpha * x);
    if n == 0 {
        return c0;
    }
    for k in 2..=n {
        let kf = k as f64;
        let c2 = (2.0 * x * (kf + alpha - 1.0) * c1 - (kf + 2.0 * alpha - 2.0) * c0) / kf;
        c0 = c1;
        c1 = c2;
    }
    c1
}

pub fn legendre(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Closed-form signed stability polynomial `R(z)` of a scheme at `z = −Δtλ`
/// with the stage count the scheme would choose for ratio `r`.
///
/// RKG2: `R = 1 − b_s C_s(1) + b_s C_s(1 + wz)`; RKL2: `R = 1 − b_s + b_s P_s(1 + w_1 z)`.
pub fn closed_form(scheme: AmpScheme, r: f64, z: f64) -> f64 {
    match scheme {
        AmpScheme::Exact => z.exp(),
        AmpScheme::Euler => 1.0 + z,
        AmpScheme::BackwardEuler => 1.0 / (1.0 - z),
        AmpScheme::Rkg2 | AmpScheme::Rkg2Even => {
            let s = match scheme {
                AmpScheme::Rkg2 => crate::schemes::rkg2_iteration_count(r, 1.0),
                _ => rkg2_even_count(r),
            };
            let c = rkg2_table(s);
            let cs1 = ((s + 1) * (s + 2)) as f64 / 2.0;
            1.0 - c.b[s] * cs1 + c.b[s] * gegenbauer_3_2(s, 1.0 + c.w * z)
        }
        AmpScheme::Rkl2 => {
            let s = rkl2_iteration_count(r, 1.0);
            let sf = s as f64;
            let bs = (sf * sf + sf - 2.0) / (2.0 * sf * (sf + 1.0));
            let bs = if s <= 2 { 1.0 / 3.0 } else { bs };
            let w1 = 4.0 / (sf * sf + sf - 2.0);
            1.0 - bs + bs * legendre(s, 1.0 + w1 * z)
        }
    }
}

/// `θ_j = π j / n` for `j = 1..=n`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| PI * j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationRow {
    pub scheme: AmpScheme,
    pub r: f64,
    pub theta: f64,
    pub amplification: f64,
}

/// Sweep every scheme over `n_theta` mode angles at ratio `r`.
pub fn amplification_sweep(
    schemes: &[AmpScheme],
    r: f64,
    n_theta: usize,
) -> Result<Vec<AmplificationRow>> {
    if schemes.is_empty() {
        return Err(Error::InvalidArgument("no schemes requested".into()));
    }
    if n_theta == 0 {
        return Err(Error::InvalidArgument("need at least one mode angle".into()));
    }
    let thetas = theta_grid(n_theta);
    let jobs: Vec<(AmpScheme, f64)> = schemes
        .iter()
        .flat_map(|&s| thetas.iter().map(move |&t| (s, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(scheme, theta)| {
            Ok(AmplificationRow {
                scheme,
                r,
                theta,
                amplification: amplification(scheme, r, theta)?,
            })
        })
        .collect()
}

/// STS stage count at ratio `r` (odd-adjusted for RKG2).
pub fn sts_stage_count(scheme: SchemeKind, r: f64) -> Result<usize> {
    match scheme {
        SchemeKind::Rkg2 => Ok(crate::schemes::rkg2_iteration_count(r, 1.0)),
        SchemeKind::Rkl2 => Ok(rkl2_iteration_count(r, 1.0)),
        other => Err(Error::InvalidArgument(format!(
            "speedup is defined for rkl2 and rkg2, not {other}"
        ))),
    }
}

/// `r / s(r)`: Euler steps replaced per STS stage.
pub fn speedup_estimate(scheme: SchemeKind, r: f64) -> Result<f64> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio {r} must be at least 1")));
    }
    Ok(r / sts_stage_count(scheme, r)? as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupRow {
    pub scheme: SchemeKind,
    pub r: f64,
    pub s: usize,
    pub speedup: f64,
}

/// Speedup for every integer ratio in `rmin..=rmax`.
pub fn speedup_table(schemes: &[SchemeKind], rmin: u64, rmax: u64) -> Result<Vec<SpeedupRow>> {
    if rmin < 1 || rmin > rmax {
        return Err(Error::InvalidArgument(format!(
            "empty ratio range {rmin}..={rmax}"
        )));
    }
    let mut rows = Vec::new();
    for &scheme in schemes {
        for r in rmin..=rmax {
            let r = r as f64;
            rows.push(SpeedupRow {
                scheme,
                r,
                s: sts_stage_count(scheme, r)?,
                speedup: speedup_estimate(scheme, r)?,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> Result<f64> {
    if dts.len() != errors.len() || dts.len() < 2 {
        return Err(Error::InvalidArgument("need at least two (dt, error) pairs".into()));
    }
    if dts.iter().chain(errors).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("dt and error values must be positive".into()));
    }
    let x: Vec<f64> = dts.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// `n_sub` explicit Euler steps of `total_dt / n_sub`.
pub fn oracle_fine_euler<R: Rhs + ?Sized>(
    op: &R,
    u: &[f64],
    total_dt: f64,
    n_sub: usize,
    dt_euler: f64,
) -> Result<Vec<f64>> {
    if n_sub == 0 {
        return Err(Error::InvalidArgument("n_sub must be at least 1".into()));
    }
    let h = total_dt / n_sub as f64;
    if h > dt_euler * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "substep {h:e} exceeds the Euler limit {dt_euler:e}"
        )));
    }
    let mut v = u.to_vec();
    for _ in 0..n_sub {
        v = euler_step(op, &v, h)?;
    }
    Ok(v)
}

/// Two fine Euler runs combined by Richardson extrapolation (`2 E_{2n} − E_n`),
/// second-order accurate in the substep.
pub fn oracle_richardson<R: Rhs + ?Sized>(
    op: &R,
    u: &[f64],
    total_dt: f64,
    n_sub: usize,
    dt_euler: f64,
) -> Result<Vec<f64>> {
    let coarse = oracle_fine_euler(op, u, total_dt, n_sub, dt_euler)?;
    let fine = oracle_fine_euler(op, u, total_dt, 2 * n_sub, dt_euler)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| 2.0 * f - c).collect())
}

/// Largest `|λ|` of the homogeneous Jacobian by power iteration; the
/// independent check on the Gershgorin bound.
pub fn power_iteration<R: Rhs + ?Sized>(op: &R, max_iter: usize, tol: f64) -> f64 {
    let n = op.len();
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 7919 + 13) % 101) as f64 / 101.0 * if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let mut y = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..max_iter {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        op.eval_homogeneous(&x, &mut y);
        let next = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        std::mem::swap(&mut x, &mut y);
        if (next - est).abs() <= tol * next {
            return next;
        }
        est = next;
    }
    est
}

/// Problems with an exact or oracle reference for convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergencePreset {
    /// 1D heat equation, Dirichlet zero ends, two discrete sine modes; the
    /// reference is the exact decay of each discrete eigenmode.
    Heat1d,
    /// 2D field-aligned conduction with a frozen lagged state and Dirichlet
    /// walls; the reference is a Richardson-extrapolated fine Euler run.
    Aniso2d,
}

impl FromStr for ConvergencePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat1d" => Ok(Self::Heat1d),
            "aniso2d" => Ok(Self::Aniso2d),
            other => Err(Error::Parse(format!("unknown problem preset `{other}`"))),
        }
    }
}

impl fmt::Display for ConvergencePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Heat1d => "heat1d",
            Self::Aniso2d => "aniso2d",
        })
    }
}

/// A linear problem with its initial state, end time and reference solution.
pub struct Problem {
    pub op: DiffusionOperator,
    pub u0: Field,
    pub t_end: f64,
    pub dt_euler: f64,
    pub reference: Vec<f64>,
}

pub fn heat1d_problem() -> Result<Problem> {
    let n = 9;
    let h = 1.0 / (n - 1) as f64;
    let grid = Arc::new(Grid::uniform(&[n], &[(0.0, 1.0)])?);
    let bc = BoundaryCondition::uniform(1, Face::Dirichlet(0.0))?;
    let op = DiffusionOperator::scalar(ScalarDiffusionConfig::uniform(grid.clone(), 1.0, 1.0, bc), 1)?;
    let modes = [(1.0, 1.0), (3.0, 0.5)];
    let u0 = Field::from_fn(grid.clone(), 1, |x, _| {
        modes.iter().map(|(k, a)| a * (k * PI * x[0]).sin()).sum()
    });
    let t_end = 0.25;
    let reference = Field::from_fn(grid, 1, |x, _| {
        modes
            .iter()
            .map(|(k, a)| {
                let lam = 4.0 / (h * h) * (k * PI * h / 2.0).sin().powi(2);
                a * (k * PI * x[0]).sin() * (-lam * t_end).exp()
            })
            .sum()
    })
    .into_values();
    let dt_euler = estimate_euler_dt(&op, &u0)?;
    Ok(Problem {
        op,
        u0,
        t_end,
        dt_euler,
        reference,
    })
}

/// Build the anisotropic 2D problem; the reference is computed with
/// `oracle_substeps` Euler substeps (and twice that) per unit of `t_end`.
pub fn aniso2d_problem(oracle_substeps: usize) -> Result<Problem> {
    let n = 17;
    let grid = Arc::new(Grid::uniform(&[n, n], &[(0.0, 1.0), (0.0, 1.0)])?);
    let bc = BoundaryCondition::uniform(2, Face::Dirichlet(1.0))?;
    let angle = PI / 6.0;
    let b = Field::from_fn(grid.clone(), 2, |_, c| if c == 0 { angle.cos() } else { angle.sin() });
    let rho = Field::from_fn(grid.clone(), 1, |x, _| 1.0 + 0.25 * x[0] * x[1]);
    let u0 = Field::from_fn(grid.clone(), 1, |x, _| {
        1.0 + 0.5 * (PI * x[0]).sin() * (PI * x[1]).sin()
            + 0.2 * (2.0 * PI * x[0]).sin() * (3.0 * PI * x[1]).sin()
    });
    let cfg = AlignedConductionConfig::new(b, rho, bc);
    let op = DiffusionOperator::aligned(cfg, Some(&u0))?;
    let dt_euler = estimate_euler_dt(&op, &u0)?;
    let t_end = 8.0 * dt_euler;
    let reference = oracle_richardson(&op, u0.values(), t_end, oracle_substeps, dt_euler)?;
    Ok(Problem {
        op,
        u0,
        t_end,
        dt_euler,
        reference,
    })
}

impl ConvergencePreset {
    pub fn build(self) -> Result<Problem> {
        match self {
            Self::Heat1d => heat1d_problem(),
            Self::Aniso2d => aniso2d_problem(65536),
        }
    }

    /// Step counts that keep every scheme in its asymptotic regime.
    pub fn default_steps(self, scheme: SchemeKind) -> Vec<usize> {
        let base = match (self, scheme) {
            (Self::Heat1d, _) => 64,
            (Self::Aniso2d, SchemeKind::BackwardEuler) => 4096,
            (Self::Aniso2d, SchemeKind::Euler) => 4096,
            (Self::Aniso2d, _) => 16,
        };
        (0..4).map(|k| base << k).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
    /// Whether the error decreased at every refinement.
    pub monotone: bool,
}

/// Max-norm error at `t_end` for each step count, and the fitted order.
pub fn convergence_study(
    scheme: &SchemeConfig,
    problem: &Problem,
    steps: &[usize],
) -> Result<ConvergenceResult> {
    let mut dts = Vec::new();
    let mut errors = Vec::new();
    for &n in steps {
        if n == 0 {
            return Err(Error::InvalidArgument("step counts must be positive".into()));
        }
        let dt = problem.t_end / n as f64;
        let mut u = problem.u0.values().to_vec();
        let mut cache = BackwardEulerCache::default();
        for _ in 0..n {
            u = step(&problem.op, &u, dt, problem.dt_euler, scheme, &mut cache)?.0;
        }
        let err = u
            .iter()
            .zip(&problem.reference)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        dts.push(dt);
        errors.push(err);
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let order = fit_order(&dts, &errors)?;
    Ok(ConvergenceResult {
        dts,
        errors,
        order,
        monotone,
    })
}

/// Number of sign changes between successive significant differences along
/// every grid line. Differences no larger than `rel_threshold` times the
/// field's range are ignored, so round-off does not count as oscillation.
pub fn count_sign_changes(field: &Field, rel_threshold: f64) -> usize {
    let grid = field.grid();
    let mut total = 0;
    for c in 0..field.n_components() {
        let v = field.component(c);
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        let eps = rel_threshold * (hi - lo);
        for d in 0..grid.dims() {
            let n = grid.shape()[d];
            let stride = grid.stride(d);
            // every point with index 0 along d starts a line
            for start in (0..grid.n_points()).filter(|&p| grid.multi_index(p)[d] == 0) {
                let mut last_sign = 0.0;
                for i in 1..n {
                    let diff = v[start + i * stride] - v[start + (i - 1) * stride];
                    if diff.abs() <= eps {
                        continue;
                    }
                    let sign = diff.signum();
                    if last_sign != 0.0 && sign != last_sign {
                        total += 1;
                    }
                    last_sign = sign;
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn be_at_pi() {
        let a = amplification(AmpScheme::BackwardEuler, 500.0, PI).unwrap();
        assert!((a - 1.0 / 1001.0).abs() < 1e-12);
        assert!((exact_amplification(0.5, PI) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(exact_amplification(500.0, PI), 0.0);
    }

    #[test]
    fn running_matches_closed_form() {
        for scheme in [AmpScheme::Rkg2, AmpScheme::Rkg2Even, AmpScheme::Rkl2, AmpScheme::Euler] {
            for r in [0.7, 3.0, 37.0, 500.0] {
                for theta in theta_grid(16) {
                    let run = growth_factor(scheme, r, theta).unwrap();
                    let cf = closed_form(scheme, r, -dt_lambda(r, theta));
                    assert!((run - cf).abs() < 1e-12, "{scheme} r={r} θ={theta}: {run} vs {cf}");
                }
            }
        }
    }

    #[test]
    fn speedups() {
        assert!((speedup_estimate(SchemeKind::Rkg2, 500.0).unwrap() - 500.0 / 55.0).abs() < 1e-12);
        assert!((speedup_estimate(SchemeKind::Rkg2, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(speedup_estimate(SchemeKind::Rkg2, 0.5).is_err());
        assert!(speedup_table(&[SchemeKind::Rkg2], 5, 4).is_err());
    }

    #[test]
    fn order_fit_recovers_slope() {
        let dts = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = dts.iter().map(|d| 3.0 * d * d).collect();
        assert!((fit_order(&dts, &errs).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_unstable_substep() {
        let op = ScalarDecay { lambda: 1.0 };
        assert!(oracle_fine_euler(&op, &[1.0], 10.0, 2, 2.0).is_err());
        assert_eq!(oracle_fine_euler(&ScalarDecay { lambda: 0.0 }, &[3.0], 1.0, 7, 1.0).unwrap(), vec![3.0]);
    }

    #[test]
    fn sign_changes() {
        let g = Arc::new(Grid::uniform(&[6], &[(0.0, 1.0)]).unwrap());
        let f = Field::from_values(g.clone(), 1, vec![0.0, 1.0, 0.5, 0.5, 2.0, 1.0]).unwrap();
        assert_eq!(count_sign_changes(&f, 1e-6), 3);
        let mono = Field::from_fn(g, 1, |x, _| x[0]);
        assert_eq!(count_sign_changes(&mono, 1e-6), 0);
    }

    #[test]
    fn polynomials() {
        for s in 1..20 {
            assert!((gegenbauer_3_2(s, 1.0) - ((s + 1) * (s + 2)) as f64 / 2.0).abs() < 1e-9);
            assert!((legendre(s, 1.0) - 1.0).abs() < 1e-12);
        }
    }
}
