//! Build the grid, fields and split operators a config describes, and run it.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptlstep::io::save_field;
use ptlstep::operators::estimate_euler_dt;
use ptlstep::ptl::{split_advance, SplitStage, State};
use ptlstep::{
    AlignedConductionConfig, BoundaryCondition, CycleReport, DiffusionOperator, Field, FloorMode,
    Grid, PtlConfig, ScalarDiffusionConfig, SchemeConfig, SolverConfig,
};

use crate::config::{ExperimentConfig, InitialSpec, OperatorKindSpec, OperatorSpec, Source};
use crate::CliError;

pub struct Experiment {
    pub state: State,
    pub stages: Vec<SplitStage>,
    pub outer_dt: f64,
    pub n_outer_steps: usize,
    pub out_dir: PathBuf,
    pub snapshot_every: usize,
    pub report_path: PathBuf,
}

pub struct Summary {
    pub report: CycleReport,
    pub written: Vec<PathBuf>,
}

fn initial_value(spec: &InitialSpec, grid: &Grid, x: [f64; 3], rng: &mut ChaCha8Rng) -> f64 {
    let dims = grid.dims();
    match spec {
        InitialSpec::Constant { value } => *value,
        InitialSpec::Step { normal, at, low, high } => {
            let proj: f64 = match normal {
                Some(n) => (0..dims).map(|d| n[d] * x[d]).sum(),
                None => x[0],
            };
            if proj >= *at {
                *high
            } else {
                *low
            }
        }
        InitialSpec::Gaussian { center, width, amplitude, base } => {
            let r2: f64 = (0..dims).map(|d| (x[d] - center[d]).powi(2)).sum();
            base + amplitude * (-r2 / (width * width)).exp()
        }
        InitialSpec::Sinusoid { modes, amplitude, base } => {
            let prod: f64 = (0..dims)
                .map(|d| {
                    let c = grid.coords(d);
                    let (a, b) = (c[0], c[c.len() - 1]);
                    (PI * modes[d] * (x[d] - a) / (b - a)).sin()
                })
                .product();
            base + amplitude * prod
        }
        InitialSpec::Random { low, high } => rng.gen_range(*low..*high),
    }
}

fn build_operator(
    spec: &OperatorSpec,
    grid: &Arc<Grid>,
    u: &Field,
    src: &Source,
) -> Result<DiffusionOperator, CliError> {
    let anchor = |e: ptlstep::Error| CliError::Config(src.error(Some(spec.field.span()), e.to_string()));
    let bc = BoundaryCondition::new(spec.bc.get_ref().iter().map(|b| b.0).collect())
        .map_err(|e| CliError::Config(src.error(Some(spec.bc.span()), e.to_string())))?;
    let rho = Field::constant(grid.clone(), 1, spec.rho);
    match spec.kind {
        OperatorKindSpec::Scalar => {
            let mut cfg = ScalarDiffusionConfig::new(
                Field::constant(grid.clone(), 1, spec.nu.unwrap_or_default()),
                rho,
                bc,
            );
            if let Some(a) = spec.averaging {
                cfg.averaging = a.0;
            }
            DiffusionOperator::scalar(cfg, u.n_components()).map_err(anchor)
        }
        OperatorKindSpec::Aligned => {
            let dims = grid.dims();
            let dir: Vec<f64> = match (&spec.b, spec.b_angle) {
                (Some(b), _) => b.clone(),
                (None, Some(deg)) => vec![deg.to_radians().cos(), deg.to_radians().sin()],
                (None, None) => unreachable!("validated"),
            };
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(CliError::Config(
                    src.error(Some(spec.field.span()), "field direction must be a nonzero vector"),
                ));
            }
            let b_hat = Field::from_fn(grid.clone(), dims, |_, c| dir[c] / norm);
            let mut cfg = AlignedConductionConfig::new(b_hat, rho, bc);
            if let Some(v) = spec.kappa0 {
                cfg.kappa0 = v;
            }
            if let Some(v) = spec.gamma {
                cfg.gamma = v;
            }
            if let Some(v) = spec.m_p {
                cfg.m_p = v;
            }
            if let Some(v) = spec.k_b {
                cfg.k_b = v;
            }
            if let Some(p) = spec.f_c {
                cfg.f_c = p;
            }
            if let Some(p) = spec.f_m {
                cfg.f_m = p;
            }
            if let Some(v) = spec.t_floor {
                cfg.t_floor = v;
            }
            DiffusionOperator::aligned(cfg, Some(u)).map_err(anchor)
        }
    }
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig, src: &Source) -> Result<Self, CliError> {
        let gspec = cfg.grid.get_ref();
        let grid = Arc::new(
            Grid::uniform(&gspec.sizes, &gspec.extents)
                .map_err(|e| CliError::Config(src.error(Some(cfg.grid.span()), e.to_string())))?,
        );

        let mut state = State::new();
        for (k, f) in cfg.fields.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
            rng.set_stream(k as u64);
            let n = grid.n_points();
            let mut values = Vec::with_capacity(n * f.components);
            for _ in 0..f.components {
                for p in 0..n {
                    values.push(initial_value(f.initial.get_ref(), &grid, grid.position(p), &mut rng));
                }
            }
            let field = Field::from_values(grid.clone(), f.components, values)
                .map_err(|e| CliError::Config(src.error(Some(f.initial.span()), e.to_string())))?;
            state.insert(f.name.get_ref().clone(), field);
        }

        let mut stages = Vec::new();
        for spec in &cfg.operators {
            let u = state.get_mut(spec.field.get_ref()).expect("validated");
            let op = build_operator(spec, &grid, u, src)?;
            u.impose_dirichlet(op.bc())
                .map_err(|e| CliError::Config(src.error(Some(spec.bc.span()), e.to_string())))?;
            let mut scheme = SchemeConfig::new(spec.scheme.unwrap_or(cfg.scheme.kind));
            scheme.safety_factor = cfg.scheme.safety_factor;
            let defaults = SolverConfig::default();
            scheme.solver = SolverConfig {
                tol: cfg.scheme.tol.unwrap_or(defaults.tol),
                max_iter: cfg.scheme.max_iter.unwrap_or(defaults.max_iter),
                preconditioner: cfg.scheme.preconditioner.unwrap_or(defaults.preconditioner),
            };
            scheme.validate().map_err(|e| CliError::Config(src.error(None, format!("[scheme]: {e}"))))?;
            let ptl = match &cfg.ptl {
                Some(p) if p.enabled && spec.ptl => {
                    let d = PtlConfig::default();
                    let c = PtlConfig {
                        eps_rel: p.eps_rel.unwrap_or(d.eps_rel),
                        floor: p.floor_fraction.map_or(FloorMode::ClampToEuler, FloorMode::ClampToFraction),
                        max_cycles: p.max_cycles.unwrap_or(d.max_cycles),
                        check_all_points: p.check_all_points,
                        reevaluate: p.reevaluate,
                        lag_refresh: p.lag_refresh.map_or(d.lag_refresh, |r| r.0),
                    };
                    c.validate().map_err(|e| CliError::Config(src.error(None, format!("[ptl]: {e}"))))?;
                    Some(c)
                }
                _ => None,
            };
            stages.push(SplitStage {
                field: spec.field.get_ref().clone(),
                op,
                scheme,
                ptl,
            });
        }

        let outer_dt = match (&cfg.outer_dt, &cfg.outer_dt_euler) {
            (Some(dt), _) => *dt.get_ref(),
            (None, Some(m)) => {
                let first = &stages[0];
                let dt_e = estimate_euler_dt(&first.op, &state[&first.field])?;
                if !dt_e.is_finite() {
                    return Err(CliError::Config(
                        src.error(Some(m.span()), "first operator has no Euler limit to scale"),
                    ));
                }
                m.get_ref() * dt_e
            }
            (None, None) => unreachable!("validated"),
        };

        let base = src.path.parent().unwrap_or(Path::new("."));
        let out_dir = base.join(&cfg.output.dir);
        Ok(Self {
            state,
            stages,
            outer_dt,
            n_outer_steps: cfg.n_outer_steps,
            report_path: out_dir.join(&cfg.output.report),
            out_dir,
            snapshot_every: cfg.output.snapshot_every,
        })
    }

    fn snapshot(&self, suffix: Option<usize>, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
        for (name, field) in &self.state {
            let file = match suffix {
                Some(k) => format!("{name}_step{k:04}.csv"),
                None => format!("{name}.csv"),
            };
            let path = self.out_dir.join(file);
            save_field(field, &path)?;
            written.push(path);
        }
        Ok(())
    }

    pub fn run(mut self, mut progress: impl FnMut(usize, &CycleReport)) -> Result<Summary, CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let mut written = Vec::new();
        let mut report = CycleReport::default();
        if self.snapshot_every > 0 {
            self.snapshot(Some(0), &mut written)?;
        }
        for k in 1..=self.n_outer_steps {
            let r = split_advance(&self.stages, &mut self.state, self.outer_dt, k)?;
            progress(k, &r);
            if k == 1 {
                report.dt_euler = r.dt_euler;
            }
            report.extend(r);
            if self.snapshot_every > 0 && k % self.snapshot_every == 0 {
                self.snapshot(Some(k), &mut written)?;
            }
        }
        self.snapshot(None, &mut written)?;
        report.write_csv(fs::File::create(&self.report_path)?)?;
        written.push(self.report_path.clone());
        Ok(Summary { report, written })
    }
}
