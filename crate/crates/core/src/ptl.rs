//! Practical time-step limit and the cycling controller.
//!
//! For an explicit first-order update the difference between neighbors `i`
//! and `j` keeps its sign when `Δt ≤ −Δu/ΔF` wherever `Δu ΔF < 0` (with
//! `Δu = u_j − u_i`, `ΔF = F_j − F_i`). The limit is evaluated only around the
//! point of largest `|F|` unless every point is requested. An outer step is
//! then subdivided into cycles at (or above a floor of) that limit, optionally
//! re-evaluating it after every cycle.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, Field, Grid, MAX_DIMS};
use crate::operators::{estimate_euler_dt, DiffusionOperator, OperatorKind, Rhs};
use crate::schemes::{step, BackwardEulerCache, SchemeConfig, SchemeKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ptl {
    Limited(f64),
    Unlimited,
}

impl Ptl {
    pub fn value(self) -> Option<f64> {
        match self {
            Ptl::Limited(v) => Some(v),
            Ptl::Unlimited => None,
        }
    }

    fn min(self, other: Ptl) -> Ptl {
        match (self, other) {
            (Ptl::Limited(a), Ptl::Limited(b)) => Ptl::Limited(a.min(b)),
            (Ptl::Unlimited, x) | (x, Ptl::Unlimited) => x,
        }
    }
}

impl fmt::Display for Ptl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ptl::Limited(v) => write!(f, "{v:?}"),
            Ptl::Unlimited => f.write_str("inf"),
        }
    }
}

/// Lower bound applied to a limited cycle step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FloorMode {
    /// Never step below the (safety-scaled) explicit Euler limit.
    ClampToEuler,
    /// Never step below this fraction of the Euler limit.
    ClampToFraction(f64),
}

/// When the lagged state of a conduction operator is refreshed during cycling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagRefresh {
    #[default]
    PerOuterStep,
    PerCycle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtlConfig {
    /// Pairs with `|ΔF| ≤ eps_rel · max|F|` are skipped.
    pub eps_rel: f64,
    pub floor: FloorMode,
    pub max_cycles: usize,
    pub check_all_points: bool,
    /// Re-evaluate the limit after every cycle; otherwise reuse the first one.
    pub reevaluate: bool,
    pub lag_refresh: LagRefresh,
}

impl Default for PtlConfig {
    fn default() -> Self {
        Self {
            eps_rel: 1e-12,
            floor: FloorMode::ClampToEuler,
            max_cycles: 1_000_000,
            check_all_points: false,
            reevaluate: true,
            lag_refresh: LagRefresh::PerOuterStep,
        }
    }
}

impl PtlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_rel > 0.0 && self.eps_rel.is_finite()) {
            return Err(Error::InvalidArgument("eps_rel must be positive".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidArgument("max_cycles must be at least 1".into()));
        }
        if let FloorMode::ClampToFraction(f) = self.floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidArgument(format!("floor fraction {f} must be positive")));
            }
        }
        Ok(())
    }
}

fn neighbor(grid: &Grid, bc: &BoundaryCondition, p: usize, d: usize, dir: isize) -> Option<usize> {
    let idx = grid.multi_index(p);
    let n = grid.shape()[d] as isize;
    let i = idx[d] as isize + dir;
    let j = if (0..n).contains(&i) {
        i
    } else if bc.is_periodic(d) {
        i.rem_euclid(n)
    } else {
        return None;
    };
    Some((p as isize + (j - idx[d] as isize) * grid.stride(d) as isize) as usize)
}

fn ptl_at(
    grid: &Grid,
    bc: &BoundaryCondition,
    n_components: usize,
    u: &[f64],
    f: &[f64],
    threshold: f64,
    p: usize,
) -> Ptl {
    let n = grid.n_points();
    let mut best = Ptl::Unlimited;
    for d in 0..grid.dims() {
        for dir in [-1isize, 1] {
            let Some(q) = neighbor(grid, bc, p, d, dir) else {
                continue;
            };
            for c in 0..n_components {
                let (i, j) = (c * n + p, c * n + q);
                let du = u[j] - u[i];
                let df = f[j] - f[i];
                if du != 0.0 && df.abs() > threshold && du * df < 0.0 {
                    best = best.min(Ptl::Limited(-du / df));
                }
            }
        }
    }
    best
}

/// Point with the largest `|F|` over all components; ties go to the lowest
/// linear point index (then component).
pub fn argmax_abs(f: &Field) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for c in 0..f.n_components() {
        for (p, v) in f.component(c).iter().enumerate() {
            let a = v.abs();
            match best {
                Some((b, bp)) if a < b || (a == b && p >= bp) => {}
                _ => best = Some((a, p)),
            }
        }
    }
    best.filter(|(a, _)| *a > 0.0).map(|(_, p)| p)
}

/// Raw practical time-step limit for the state `u` with `F = F(u)`.
pub fn compute_ptl(u: &Field, f: &Field, bc: &BoundaryCondition, cfg: &PtlConfig) -> Result<Ptl> {
    if !u.same_shape(f) {
        return Err(Error::ShapeMismatch("u and F must have the same shape".into()));
    }
    bc.check_grid(u.grid())?;
    cfg.validate()?;
    let grid = u.grid();
    let max_f = f.max_abs();
    let Some(k) = argmax_abs(f) else {
        return Ok(Ptl::Unlimited);
    };
    let threshold = cfg.eps_rel * max_f;
    let nc = u.n_components();
    if cfg.check_all_points {
        let best = (0..grid.n_points())
            .into_par_iter()
            .map(|p| ptl_at(grid, bc, nc, u.values(), f.values(), threshold, p))
            .reduce(|| Ptl::Unlimited, Ptl::min);
        Ok(best)
    } else {
        Ok(ptl_at(grid, bc, nc, u.values(), f.values(), threshold, k))
    }
}

/// One inner step of the cycling controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub outer_step: usize,
    /// Index of the split stage that produced the cycle.
    pub stage: usize,
    pub cycle: usize,
    pub dt: f64,
    pub ptl_raw: Ptl,
    /// Whether a finite limit was in force for this cycle.
    pub limited: bool,
    /// STS stage count, or PCG iterations for backward Euler.
    pub iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleReport {
    pub records: Vec<CycleRecord>,
    pub dt_euler: f64,
}

impl CycleReport {
    pub fn n_cycles(&self) -> usize {
        self.records.len()
    }

    pub fn total_dt(&self) -> f64 {
        self.records.iter().map(|r| r.dt).sum()
    }

    pub fn total_iters(&self) -> usize {
        self.records.iter().map(|r| r.iters).sum()
    }

    pub fn extend(&mut self, other: CycleReport) {
        self.records.extend(other.records);
    }

    pub const CSV_HEADER: [&'static str; 7] =
        ["outer_step", "stage", "cycle", "dt", "ptl_raw", "limited", "iters"];

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            wr.write_record([
                r.outer_step.to_string(),
                r.stage.to_string(),
                r.cycle.to_string(),
                format!("{:?}", r.dt),
                r.ptl_raw.to_string(),
                r.limited.to_string(),
                r.iters.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn floor_dt(p: f64, dt_euler: f64, floor: FloorMode) -> f64 {
    match floor {
        FloorMode::ClampToEuler => p.max(dt_euler),
        FloorMode::ClampToFraction(f) => p.max(f * dt_euler),
    }
}

fn refreeze(op: &mut DiffusionOperator, u: &Field) -> Result<bool> {
    if matches!(op.kind(), OperatorKind::Aligned(_)) {
        op.freeze(u)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Advance `u` by `outer_dt` with `op`, subdividing into PTL-limited cycles.
///
/// Without a PTL configuration the whole outer step is a single step. A
/// conduction operator without a lagged state is linearized about `u` first.
/// Explicit Euler cycles are additionally capped at the Euler limit.
pub fn cycle_operator(
    op: &DiffusionOperator,
    scheme: &SchemeConfig,
    u: &Field,
    outer_dt: f64,
    ptl: Option<&PtlConfig>,
) -> Result<(Field, CycleReport)> {
    scheme.validate()?;
    op.check_field(u)?;
    if !(outer_dt > 0.0 && outer_dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("outer_dt {outer_dt} must be positive")));
    }
    if let Some(cfg) = ptl {
        cfg.validate()?;
    }
    let mut op = op.clone();
    if !op.is_linear() {
        refreeze(&mut op, u)?;
    }
    let mut dt_euler = estimate_euler_dt(&op, u)?;
    let mut report = CycleReport {
        records: Vec::new(),
        dt_euler,
    };
    let mut cache = BackwardEulerCache::default();
    let mut state = u.values().to_vec();

    let Some(cfg) = ptl else {
        let (v, st) = step(&op, &state, outer_dt, dt_euler, scheme, &mut cache)?;
        report.records.push(CycleRecord {
            outer_step: 0,
            stage: 0,
            cycle: 0,
            dt: outer_dt,
            ptl_raw: Ptl::Unlimited,
            limited: false,
            iters: st.work(),
        });
        return Ok((u.with_values(v)?, report));
    };

    let bc = op.bc().clone();
    let mut remaining = outer_dt;
    let mut first: Option<Ptl> = None;
    let mut f = vec![0.0; state.len()];
    let mut cycle = 0;
    while remaining > 0.0 {
        if cycle == cfg.max_cycles {
            return Err(Error::CycleCap {
                max_cycles: cfg.max_cycles,
                remaining,
                report: Box::new(report),
            });
        }
        let current = u.with_values(state.clone())?;
        if cycle > 0 && cfg.lag_refresh == LagRefresh::PerCycle && refreeze(&mut op, &current)? {
            dt_euler = estimate_euler_dt(&op, &current)?;
            cache.clear();
        }
        let dt_e = dt_euler * scheme.safety_factor;
        let raw = match first {
            Some(p) if !cfg.reevaluate => p,
            _ => {
                op.eval(&state, &mut f);
                let p = compute_ptl(&current, &u.with_values(f.clone())?, &bc, cfg)?;
                first.get_or_insert(p);
                p
            }
        };
        let mut dt_c = match raw {
            Ptl::Limited(p) => floor_dt(p, dt_e, cfg.floor),
            Ptl::Unlimited => remaining,
        };
        if scheme.kind == SchemeKind::Euler {
            dt_c = dt_c.min(dt_e);
        }
        let last = dt_c >= remaining || remaining - dt_c <= 1e-14 * outer_dt;
        if last {
            dt_c = remaining;
        }
        let (v, st) = step(&op, &state, dt_c, dt_euler, scheme, &mut cache)?;
        state = v;
        report.records.push(CycleRecord {
            outer_step: 0,
            stage: 0,
            cycle,
            dt: dt_c,
            ptl_raw: raw,
            limited: raw != Ptl::Unlimited,
            iters: st.work(),
        });
        remaining = if last { 0.0 } else { remaining - dt_c };
        cycle += 1;
    }
    Ok((u.with_values(state)?, report))
}

/// One operator of a split outer step, acting on the named field.
#[derive(Debug, Clone)]
pub struct SplitStage {
    pub field: String,
    pub op: DiffusionOperator,
    pub scheme: SchemeConfig,
    pub ptl: Option<PtlConfig>,
}

/// Named fields advanced by the split operators.
pub type State = BTreeMap<String, Field>;

/// First-order sequential splitting: each stage cycles its operator over the
/// full `outer_dt`, starting from the output of the stages before it.
/// Conduction operators are re-linearized about their field's current value
/// before their cycling starts.
pub fn split_advance(
    stages: &[SplitStage],
    state: &mut State,
    outer_dt: f64,
    outer_step: usize,
) -> Result<CycleReport> {
    let mut report = CycleReport::default();
    for (i, stage) in stages.iter().enumerate() {
        let u = state.get(&stage.field).ok_or_else(|| {
            Error::InvalidArgument(format!("state has no field `{}`", stage.field))
        })?;
        let mut op = stage.op.clone();
        refreeze(&mut op, u)?;
        let (v, mut r) = cycle_operator(&op, &stage.scheme, u, outer_dt, stage.ptl.as_ref())?;
        for rec in &mut r.records {
            rec.outer_step = outer_step;
            rec.stage = i;
        }
        if i == 0 {
            report.dt_euler = r.dt_euler;
        }
        report.extend(r);
        state.insert(stage.field.clone(), v);
    }
    Ok(report)
}

/// The up to `2·dims` orthogonal neighbors of point `p`, wrapping periodic dimensions.
pub fn orthogonal_neighbors(grid: &Grid, bc: &BoundaryCondition, p: usize) -> Vec<usize> {
    (0..grid.dims().min(MAX_DIMS))
        .flat_map(|d| [(d, -1isize), (d, 1)])
        .filter_map(|(d, dir)| neighbor(grid, bc, p, d, dir))
        .collect()
}
