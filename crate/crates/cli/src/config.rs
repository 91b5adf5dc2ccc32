//! Experiment configuration: a TOML document, parsed with spans so that
//! every validation error can point at the offending line.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;
use toml::Spanned;

use ptlstep::{Face, FaceAverage, LagRefresh, PreconditionerKind, Profile, SchemeKind};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required when any initial condition is random.
    pub seed: Option<u64>,
    /// Absolute outer step.
    pub outer_dt: Option<Spanned<f64>>,
    /// Outer step as a multiple of the first operator's Euler limit.
    pub outer_dt_euler: Option<Spanned<f64>>,
    #[serde(default = "one")]
    pub n_outer_steps: usize,
    pub grid: Spanned<GridSpec>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub operators: Vec<OperatorSpec>,
    #[serde(default)]
    pub scheme: SchemeSpec,
    pub ptl: Option<PtlSpec>,
    pub output: OutputSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub extents: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: Spanned<String>,
    #[serde(default = "one")]
    pub components: usize,
    pub initial: Spanned<InitialSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// `high` where `normal · x ≥ at`, `low` elsewhere.
    Step {
        normal: Option<Vec<f64>>,
        at: f64,
        low: f64,
        high: f64,
    },
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        base: f64,
    },
    /// `base + amplitude · Π_d sin(π k_d (x_d − a_d) / L_d)`.
    Sinusoid {
        modes: Vec<f64>,
        amplitude: f64,
        #[serde(default)]
        base: f64,
    },
    /// Independent uniform values in `[low, high)`.
    Random {
        low: f64,
        high: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKindSpec {
    Scalar,
    Aligned,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub field: Spanned<String>,
    pub kind: OperatorKindSpec,
    pub bc: Spanned<Vec<DimBc>>,
    #[serde(default = "unit")]
    pub rho: f64,

    // scalar diffusion
    pub nu: Option<f64>,
    #[serde(default, deserialize_with = "opt_parsed")]
    pub averaging: Option<Averaging>,

    // field-aligned conduction
    pub b: Option<Vec<f64>>,
    /// Direction in the (x, y) plane, degrees from the x axis.
    pub b_angle: Option<f64>,
    pub kappa0: Option<f64>,
    pub gamma: Option<f64>,
    pub m_p: Option<f64>,
    pub k_b: Option<f64>,
    #[serde(default, deserialize_with = "opt_parsed")]
    pub f_c: Option<Profile>,
    #[serde(default, deserialize_with = "opt_parsed")]
    pub f_m: Option<Profile>,
    pub t_floor: Option<f64>,

    /// Overrides the `[scheme]` kind for this operator.
    #[serde(default, deserialize_with = "opt_parsed")]
    pub scheme: Option<SchemeKind>,
    /// Set to false to step this operator without PTL cycling.
    #[serde(default = "yes")]
    pub ptl: bool,
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy)]
pub struct Averaging(pub FaceAverage);

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "arithmetic" => Ok(Self(FaceAverage::Arithmetic)),
            "harmonic" => Ok(Self(FaceAverage::Harmonic)),
            _ => Err(format!("unknown face averaging `{s}`, expected arithmetic or harmonic")),
        }
    }
}

/// Faces of one dimension: a single face kind for both ends, or `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
pub struct DimBc(pub [Face; 2]);

pub fn parse_face(s: &str) -> Result<Face, String> {
    let s = s.trim();
    match s {
        "neumann" => return Ok(Face::NeumannZeroFlux),
        "periodic" => return Ok(Face::Periodic),
        _ => {}
    }
    let v = s
        .strip_prefix("dirichlet(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("unknown face `{s}`, expected neumann, periodic or dirichlet(value)"))?;
    v.trim()
        .parse()
        .map(Face::Dirichlet)
        .map_err(|e| format!("bad dirichlet value in `{s}`: {e}"))
}

impl<'de> Deserialize<'de> for DimBc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = DimBc;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a face string or a [lo, hi] pair of face strings")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<DimBc, E> {
                let f = parse_face(s).map_err(E::custom)?;
                Ok(DimBc([f, f]))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<DimBc, A::Error> {
                let mut faces = Vec::new();
                while let Some(s) = seq.next_element::<String>()? {
                    faces.push(parse_face(&s).map_err(de::Error::custom)?);
                }
                match faces[..] {
                    [lo, hi] => Ok(DimBc([lo, hi])),
                    _ => Err(de::Error::invalid_length(faces.len(), &"exactly two faces")),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(deserialize_with = "parsed")]
    pub kind: SchemeKind,
    #[serde(default = "unit")]
    pub safety_factor: f64,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default, deserialize_with = "opt_parsed")]
    pub preconditioner: Option<PreconditionerKind>,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        Self {
            kind: SchemeKind::Rkg2,
            safety_factor: 1.0,
            tol: None,
            max_iter: None,
            preconditioner: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtlSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    pub eps_rel: Option<f64>,
    /// Floor cycles at this fraction of the Euler limit instead of the limit itself.
    pub floor_fraction: Option<f64>,
    pub max_cycles: Option<usize>,
    #[serde(default)]
    pub check_all_points: bool,
    #[serde(default = "yes")]
    pub reevaluate: bool,
    #[serde(default, deserialize_with = "opt_parsed")]
    pub lag_refresh: Option<Refresh>,
}

#[derive(Debug, Clone, Copy)]
pub struct Refresh(pub LagRefresh);

impl FromStr for Refresh {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "outer-step" => Ok(Self(LagRefresh::PerOuterStep)),
            "cycle" => Ok(Self(LagRefresh::PerCycle)),
            _ => Err(format!("unknown lag refresh `{s}`, expected outer-step or cycle")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Relative paths resolve against the config file's directory.
    pub dir: PathBuf,
    /// Also write every field after each multiple of this many outer steps (0: final only).
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "report_name")]
    pub report: String,
}

fn report_name() -> String {
    "report.csv".into()
}

fn parsed<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: fmt::Display,
{
    String::deserialize(d)?.parse().map_err(de::Error::custom)
}

fn opt_parsed<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: fmt::Display,
{
    parsed(d).map(Some)
}

/// A config error located in the source text.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// The source text of a config, used to turn byte spans into line numbers.
pub struct Source {
    pub path: PathBuf,
    pub text: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_owned(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Ok(Self {
            path: path.to_owned(),
            text,
        })
    }

    pub fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    pub fn error(&self, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.path.clone(),
            line: span.map(|s| self.line_of(s.start)),
            message: message.into(),
        }
    }

    pub fn parse(&self) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(&self.text).map_err(|e| {
            self.error(e.span(), e.message().trim_end().to_string())
        })?;
        self.validate(&cfg)?;
        Ok(cfg)
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), ConfigError> {
        let grid = cfg.grid.get_ref();
        let dims = grid.sizes.len();
        if dims == 0 || dims > 3 {
            return Err(self.error(Some(cfg.grid.span()), format!("grid must have 1 to 3 dimensions, not {dims}")));
        }
        if grid.extents.len() != dims {
            return Err(self.error(
                Some(cfg.grid.span()),
                format!("{} extents for {dims} sizes", grid.extents.len()),
            ));
        }
        match (&cfg.outer_dt, &cfg.outer_dt_euler) {
            (Some(_), Some(b)) => {
                return Err(self.error(Some(b.span()), "set only one of outer_dt and outer_dt_euler"));
            }
            (None, None) => return Err(self.error(None, "missing outer_dt or outer_dt_euler")),
            (Some(v), None) | (None, Some(v)) if !(*v.get_ref() > 0.0 && v.get_ref().is_finite()) => {
                return Err(self.error(Some(v.span()), "outer step must be positive"));
            }
            (None, Some(v)) if cfg.operators.is_empty() => {
                return Err(self.error(Some(v.span()), "outer_dt_euler needs at least one operator"));
            }
            _ => {}
        }
        if cfg.n_outer_steps == 0 {
            return Err(self.error(None, "n_outer_steps must be at least 1"));
        }

        for (i, f) in cfg.fields.iter().enumerate() {
            if cfg.fields[..i].iter().any(|g| g.name.get_ref() == f.name.get_ref()) {
                return Err(self.error(Some(f.name.span()), format!("duplicate field `{}`", f.name.get_ref())));
            }
            if f.components == 0 {
                return Err(self.error(Some(f.name.span()), "a field needs at least one component"));
            }
            let span = Some(f.initial.span());
            match f.initial.get_ref() {
                InitialSpec::Random { low, high } => {
                    if cfg.seed.is_none() {
                        return Err(self.error(span, "random initial condition needs a top-level `seed`"));
                    }
                    if !(low < high) {
                        return Err(self.error(span, "random range needs low < high"));
                    }
                }
                InitialSpec::Step { normal: Some(n), .. } if n.len() != dims => {
                    return Err(self.error(span, format!("step normal has {} entries for {dims} dimensions", n.len())));
                }
                InitialSpec::Gaussian { center, width, .. } => {
                    if center.len() != dims {
                        return Err(self.error(span, format!("gaussian center has {} entries for {dims} dimensions", center.len())));
                    }
                    if !(*width > 0.0) {
                        return Err(self.error(span, "gaussian width must be positive"));
                    }
                }
                InitialSpec::Sinusoid { modes, .. } if modes.len() != dims => {
                    return Err(self.error(span, format!("sinusoid has {} modes for {dims} dimensions", modes.len())));
                }
                _ => {}
            }
        }

        for op in &cfg.operators {
            let name = op.field.get_ref();
            let Some(field) = cfg.fields.iter().find(|f| f.name.get_ref() == name) else {
                return Err(self.error(Some(op.field.span()), format!("operator acts on unknown field `{name}`")));
            };
            if op.bc.get_ref().len() != dims {
                return Err(self.error(
                    Some(op.bc.span()),
                    format!("{} boundary entries for {dims} dimensions", op.bc.get_ref().len()),
                ));
            }
            let span = Some(op.field.span());
            match op.kind {
                OperatorKindSpec::Scalar => {
                    let stray = [
                        ("b", op.b.is_some()),
                        ("b_angle", op.b_angle.is_some()),
                        ("kappa0", op.kappa0.is_some()),
                        ("gamma", op.gamma.is_some()),
                        ("m_p", op.m_p.is_some()),
                        ("k_b", op.k_b.is_some()),
                        ("f_c", op.f_c.is_some()),
                        ("f_m", op.f_m.is_some()),
                        ("t_floor", op.t_floor.is_some()),
                    ];
                    if let Some((k, _)) = stray.iter().find(|(_, set)| *set) {
                        return Err(self.error(span, format!("`{k}` only applies to aligned operators")));
                    }
                    if op.nu.is_none() {
                        return Err(self.error(span, "scalar operator needs `nu`"));
                    }
                }
                OperatorKindSpec::Aligned => {
                    if op.nu.is_some() || op.averaging.is_some() {
                        return Err(self.error(span, "`nu` and `averaging` only apply to scalar operators"));
                    }
                    if field.components != 1 {
                        return Err(self.error(span, "aligned conduction acts on a single-component field"));
                    }
                    match (&op.b, op.b_angle) {
                        (Some(b), None) if b.len() == dims => {}
                        (Some(b), None) => {
                            return Err(self.error(span, format!("`b` has {} entries for {dims} dimensions", b.len())));
                        }
                        (None, Some(_)) if dims == 2 => {}
                        (None, Some(_)) => return Err(self.error(span, "`b_angle` needs a 2D grid")),
                        _ => return Err(self.error(span, "aligned operator needs exactly one of `b` or `b_angle`")),
                    }
                }
            }
        }
        Ok(())
    }
}
