//! Matrix-free right-hand sides `F(u)` for the two parabolic operator families:
//! density-weighted scalar diffusion (artificial viscosity) and field-aligned
//! thermal conduction with lagged diffusivity.
//!
//! Both are discretized in flux form on the dual cells of a node-centered grid,
//! so `Σ ρ V F = 0` under zero-flux or periodic boundaries and the Jacobian is
//! symmetric in the `ρV`-weighted inner product. Nodes on Dirichlet faces are
//! held: `F = 0` there.
//!
//! The conduction stencil is built from a per-cell energy
//!
//! ```text
//! E_c = ½ vol_c [ Σ_d D_dd mean_edges(a²) + Σ_{d≠e} D_de g_d g_e ]
//! ```
//!
//! where `a` are the edge differences of the cell along `d` and `g_d` their mean.
//! `F = -(P / ρV) ∂E/∂u` gives a 9-point stencil in 2D and 27 points in 3D that
//! is symmetric and negative semi-definite for any unit direction field.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::mesh::{BoundaryCondition, Field, Geometry, Grid, MAX_DIMS};

/// A right-hand side `du/dt = F(u)` acting on a flat vector of unknowns.
pub trait Rhs {
    /// Number of unknowns.
    fn len(&self) -> usize;

    fn eval(&self, u: &[f64], out: &mut [f64]);

    /// Whether `F` is affine in `u`; implicit steps require it.
    fn is_linear(&self) -> bool {
        true
    }

    /// `F` with held (Dirichlet) unknowns read as zero. For a linear operator
    /// this is the part of `F` that acts on the free unknowns.
    fn eval_homogeneous(&self, u: &[f64], out: &mut [f64]) {
        self.eval(u, out)
    }

    /// Weights of the inner product in which the Jacobian is self-adjoint.
    fn weights(&self) -> Cow<'_, [f64]> {
        Cow::Owned(vec![1.0; self.len()])
    }

    /// Unknowns held fixed by boundary conditions.
    fn held(&self) -> Cow<'_, [bool]> {
        Cow::Owned(vec![false; self.len()])
    }

    /// Jacobian of [`eval_homogeneous`](Self::eval_homogeneous). The default
    /// probes one basis vector at a time.
    fn assemble(&self) -> CsrMatrix {
        let n = self.len();
        let mut rows = vec![Vec::new(); n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.eval_homogeneous(&e, &mut col);
            e[j] = 0.0;
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 || i == j {
                    rows[i].push((j, v));
                }
            }
        }
        CsrMatrix::from_rows(rows)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.assemble().diagonal()
    }
}

/// Named profile functions for the conduction coefficient.
///
/// * `one`: `f = 1`
/// * `tanh-cutoff(r0, width)`: `f(x) = ½ (1 − tanh((x − r0) / width))`
/// * `broaden(T_c, exponent)`: `f(x) = (T_c / x)^exponent` below `T_c`, `1` above
///
/// `f_c` is evaluated at the distance of a node from the origin, `f_m` at the
/// lagged temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    One,
    TanhCutoff { r0: f64, width: f64 },
    Broaden { t_c: f64, exponent: f64 },
}

impl Default for Profile {
    fn default() -> Self {
        Profile::One
    }
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::One => 1.0,
            Profile::TanhCutoff { r0, width } => 0.5 * (1.0 - ((x - r0) / width).tanh()),
            Profile::Broaden { t_c, exponent } => {
                if x >= t_c {
                    1.0
                } else {
                    (t_c / x).powf(exponent)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Profile::One => Ok(()),
            Profile::TanhCutoff { r0, width } if r0.is_finite() && width > 0.0 => Ok(()),
            Profile::Broaden { t_c, exponent } if t_c > 0.0 && exponent >= 0.0 => Ok(()),
            p => Err(Error::InvalidArgument(format!("invalid profile parameters: {p}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::One => write!(f, "one"),
            Profile::TanhCutoff { r0, width } => write!(f, "tanh-cutoff({r0}, {width})"),
            Profile::Broaden { t_c, exponent } => write!(f, "broaden({t_c}, {exponent})"),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "one" {
            return Ok(Profile::One);
        }
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::Parse(format!("unknown profile `{s}`")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::Parse(format!("missing `)` in profile `{s}`")))?;
        let args: Vec<f64> = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("profile `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let p = match (name.trim(), args.as_slice()) {
            ("tanh-cutoff", &[r0, width]) => Profile::TanhCutoff { r0, width },
            ("broaden", &[t_c, exponent]) => Profile::Broaden { t_c, exponent },
            _ => return Err(Error::Parse(format!("unknown profile `{s}`"))),
        };
        p.validate()?;
        Ok(p)
    }
}

/// How nodal coefficients are averaged onto the face between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceAverage {
    #[default]
    Arithmetic,
    Harmonic,
}

impl FaceAverage {
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            FaceAverage::Arithmetic => 0.5 * (a + b),
            FaceAverage::Harmonic => {
                if a + b == 0.0 {
                    0.0
                } else {
                    2.0 * a * b / (a + b)
                }
            }
        }
    }
}

/// `F(v) = (1/ρ) ∇·(ν ρ ∇v)`, applied component-wise.
#[derive(Debug, Clone)]
pub struct ScalarDiffusionConfig {
    pub nu: Field,
    pub rho: Field,
    pub bc: BoundaryCondition,
    pub averaging: FaceAverage,
}

impl ScalarDiffusionConfig {
    pub fn new(nu: Field, rho: Field, bc: BoundaryCondition) -> Self {
        Self {
            nu,
            rho,
            bc,
            averaging: FaceAverage::Arithmetic,
        }
    }

    /// Constant `ν` and `ρ` on `grid`.
    pub fn uniform(grid: Arc<Grid>, nu: f64, rho: f64, bc: BoundaryCondition) -> Self {
        Self::new(
            Field::constant(grid.clone(), 1, nu),
            Field::constant(grid, 1, rho),
            bc,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.nu.n_components() != 1 || self.rho.n_components() != 1 {
            return Err(Error::ShapeMismatch("nu and rho must be scalar fields".into()));
        }
        if self.nu.grid() != self.rho.grid() {
            return Err(Error::ShapeMismatch("nu and rho live on different grids".into()));
        }
        self.bc.check_grid(self.nu.grid())?;
        if self.nu.values().iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("nu must be non-negative".into()));
        }
        check_positive(&self.rho, "rho")
    }
}

/// `F(T) = ((γ−1) m_p / (2 k ρ)) ∇·(f_c f_m(T₀) κ₀ T₀^{5/2} b̂ b̂·∇T)`.
#[derive(Debug, Clone)]
pub struct AlignedConductionConfig {
    /// Unit direction field with one component per grid dimension; zero vectors
    /// mark field-free points.
    pub b_hat: Field,
    pub kappa0: f64,
    pub gamma: f64,
    pub m_p: f64,
    pub k_b: f64,
    pub f_c: Profile,
    pub f_m: Profile,
    pub rho: Field,
    pub bc: BoundaryCondition,
    /// Lagged temperatures below this are raised to it before the 5/2 power.
    pub t_floor: f64,
}

impl AlignedConductionConfig {
    /// Unit constants chosen so the prefactor `(γ−1) m_p / (2 k)` is 1.
    pub fn new(b_hat: Field, rho: Field, bc: BoundaryCondition) -> Self {
        Self {
            b_hat,
            kappa0: 1.0,
            gamma: 5.0 / 3.0,
            m_p: 3.0,
            k_b: 1.0,
            f_c: Profile::One,
            f_m: Profile::One,
            rho,
            bc,
            t_floor: 1e-10,
        }
    }

    /// `(γ−1) m_p / (2 k)`; the `1/ρ` factor is applied per node.
    pub fn prefactor(&self) -> f64 {
        (self.gamma - 1.0) * self.m_p / (2.0 * self.k_b)
    }

    fn validate(&self) -> Result<()> {
        let grid = self.rho.grid();
        if self.rho.n_components() != 1 {
            return Err(Error::ShapeMismatch("rho must be a scalar field".into()));
        }
        if self.b_hat.grid() != grid || self.b_hat.n_components() != grid.dims() {
            return Err(Error::ShapeMismatch(format!(
                "b_hat needs {} components on the rho grid",
                grid.dims()
            )));
        }
        self.bc.check_grid(grid)?;
        check_positive(&self.rho, "rho")?;
        let n = grid.n_points();
        for p in 0..n {
            let norm2: f64 = (0..grid.dims())
                .map(|c| self.b_hat.component(c)[p].powi(2))
                .sum();
            if norm2 != 0.0 && (norm2.sqrt() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "b_hat at point {p} has norm {}",
                    norm2.sqrt()
                )));
            }
        }
        for (name, v) in [
            ("kappa0", self.kappa0),
            ("gamma", self.gamma),
            ("m_p", self.m_p),
            ("k_b", self.k_b),
            ("t_floor", self.t_floor),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if self.kappa0 < 0.0 || self.m_p <= 0.0 || self.k_b <= 0.0 || self.t_floor <= 0.0 {
            return Err(Error::InvalidArgument(
                "kappa0 must be non-negative; m_p, k_b and t_floor positive".into(),
            ));
        }
        self.f_c.validate()?;
        self.f_m.validate()
    }

    /// Nodal diffusivity tensor `f_c f_m κ₀ T₀^{5/2} b̂ b̂ᵀ`.
    fn node_tensors(&self, t0: &[f64], strict: bool) -> Result<Vec<Tensor>> {
        let grid = self.rho.grid();
        let dims = grid.dims();
        t0.iter()
            .enumerate()
            .map(|(p, &t)| {
                if strict && !(t > 0.0) {
                    return Err(Error::Domain(format!(
                        "lagged temperature {t:e} at point {p} is not positive"
                    )));
                }
                let t = if t > self.t_floor { t } else { self.t_floor };
                let x = grid.position(p);
                let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
                let c = self.f_c.eval(r) * self.f_m.eval(t) * self.kappa0 * t.powf(2.5);
                let mut d = [[0.0; MAX_DIMS]; MAX_DIMS];
                for i in 0..dims {
                    let bi = self.b_hat.component(i)[p];
                    for j in 0..dims {
                        d[i][j] = c * bi * self.b_hat.component(j)[p];
                    }
                }
                Ok(d)
            })
            .collect()
    }
}

fn check_positive(f: &Field, name: &str) -> Result<()> {
    if f.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("{name} must be positive")));
    }
    Ok(())
}

type Tensor = [[f64; MAX_DIMS]; MAX_DIMS];

#[derive(Debug, Clone)]
pub enum OperatorKind {
    Scalar(ScalarDiffusionConfig),
    Aligned(AlignedConductionConfig),
}

/// Nearest-neighbor flux stencil: `F_p = Σ coef (u_q − u_p)`.
#[derive(Debug, Clone)]
struct FluxStencil {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    coefs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Cell {
    corners: [usize; 1 << MAX_DIMS],
    width: [f64; MAX_DIMS],
    volume: f64,
}

#[derive(Debug, Clone)]
enum Discretization {
    Flux(FluxStencil),
    Cells {
        cells: Vec<Cell>,
        /// Cell-averaged tensors for the frozen state; `None` evaluates them
        /// from the current argument (nonlinear mode).
        frozen: Option<Vec<Tensor>>,
        prefactor: f64,
    },
}

/// A discretized parabolic operator on a fixed grid and boundary condition.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    kind: OperatorKind,
    geometry: Geometry,
    n_components: usize,
    /// `ρ V` per point.
    node_weights: Vec<f64>,
    /// `ρ V` per unknown (repeated for each component).
    weights: Vec<f64>,
    held: Vec<bool>,
    frozen_state: Option<Field>,
    disc: Discretization,
}

impl DiffusionOperator {
    pub fn scalar(cfg: ScalarDiffusionConfig, n_components: usize) -> Result<Self> {
        cfg.validate()?;
        if n_components == 0 {
            return Err(Error::InvalidArgument("n_components must be at least 1".into()));
        }
        let geometry = Geometry::new(cfg.nu.grid().clone(), cfg.bc.clone())?;
        let grid = geometry.grid().clone();
        let n = grid.n_points();
        let nu_rho: Vec<f64> = cfg
            .nu
            .values()
            .iter()
            .zip(cfg.rho.values())
            .map(|(a, b)| a * b)
            .collect();
        let rho = cfg.rho.values();
        let mut st = FluxStencil {
            offsets: Vec::with_capacity(n + 1),
            neighbors: Vec::new(),
            coefs: Vec::new(),
        };
        st.offsets.push(0);
        for p in 0..n {
            let idx = grid.multi_index(p);
            if !geometry.held()[p] {
                for d in 0..grid.dims() {
                    let i = idx[d];
                    let nd = grid.shape()[d];
                    for dir in [-1isize, 1] {
                        let Some(q) = geometry.neighbor(&idx, d, dir) else {
                            continue;
                        };
                        let h = if dir > 0 {
                            geometry.face_spacing(d, i)
                        } else {
                            geometry.face_spacing(d, (i + nd - 1) % nd)
                        };
                        let c = cfg.averaging.combine(nu_rho[p], nu_rho[q]);
                        st.neighbors.push(q);
                        st.coefs.push(c / (h * geometry.dual_width(d, i) * rho[p]));
                    }
                }
            }
            st.offsets.push(st.neighbors.len());
        }
        Ok(Self::finish(
            OperatorKind::Scalar(cfg),
            geometry,
            n_components,
            Discretization::Flux(st),
        ))
    }

    /// Field-aligned conduction. With `t0` the operator is linear (lagged
    /// diffusivity); without it the diffusivity follows the argument.
    pub fn aligned(cfg: AlignedConductionConfig, t0: Option<&Field>) -> Result<Self> {
        cfg.validate()?;
        let geometry = Geometry::new(cfg.rho.grid().clone(), cfg.bc.clone())?;
        let grid = geometry.grid().clone();
        let dims = grid.dims();
        let mut cells = Vec::new();
        let counts: Vec<usize> = (0..dims).map(|d| geometry.n_faces(d)).collect();
        let n_cells: usize = counts.iter().product();
        for cidx in 0..n_cells {
            let mut rem = cidx;
            let mut lo = [0usize; MAX_DIMS];
            for d in 0..dims {
                lo[d] = rem % counts[d];
                rem /= counts[d];
            }
            let mut corners = [0usize; 1 << MAX_DIMS];
            for (k, corner) in corners.iter_mut().enumerate().take(1 << dims) {
                *corner = (0..dims)
                    .map(|d| ((lo[d] + ((k >> d) & 1)) % grid.shape()[d]) * grid.stride(d))
                    .sum();
            }
            let mut width = [0.0; MAX_DIMS];
            for d in 0..dims {
                width[d] = geometry.face_spacing(d, lo[d]);
            }
            cells.push(Cell {
                corners,
                width,
                volume: width[..dims].iter().product(),
            });
        }
        let prefactor = cfg.prefactor();
        let mut op = Self::finish(
            OperatorKind::Aligned(cfg),
            geometry,
            1,
            Discretization::Cells {
                cells,
                frozen: None,
                prefactor,
            },
        );
        if let Some(t0) = t0 {
            op.freeze(t0)?;
        }
        Ok(op)
    }

    fn finish(
        kind: OperatorKind,
        geometry: Geometry,
        n_components: usize,
        disc: Discretization,
    ) -> Self {
        let rho = match &kind {
            OperatorKind::Scalar(c) => c.rho.values(),
            OperatorKind::Aligned(c) => c.rho.values(),
        };
        let node_weights: Vec<f64> = rho
            .iter()
            .zip(geometry.volumes())
            .map(|(r, v)| r * v)
            .collect();
        let weights = node_weights.repeat(n_components);
        let held = geometry.held().repeat(n_components);
        Self {
            kind,
            geometry,
            n_components,
            node_weights,
            weights,
            held,
            frozen_state: None,
            disc,
        }
    }

    /// Fix the lagged state `T₀`; a no-op apart from bookkeeping for scalar diffusion.
    pub fn freeze(&mut self, t0: &Field) -> Result<()> {
        if t0.grid() != self.geometry.grid() || t0.n_components() != 1 {
            return Err(Error::ShapeMismatch(
                "lagged state must be a scalar field on the operator grid".into(),
            ));
        }
        if let (OperatorKind::Aligned(cfg), Discretization::Cells { cells, frozen, .. }) =
            (&self.kind, &mut self.disc)
        {
            let nodes = cfg.node_tensors(t0.values(), true)?;
            *frozen = Some(cell_tensors(cells, &nodes, self.geometry.dims()));
        }
        self.frozen_state = Some(t0.clone());
        Ok(())
    }

    pub fn frozen_state(&self) -> Option<&Field> {
        self.frozen_state.as_ref()
    }

    /// Linear over a step: scalar diffusion always, conduction once frozen.
    pub fn is_linear(&self) -> bool {
        match &self.disc {
            Discretization::Flux(_) => true,
            Discretization::Cells { frozen, .. } => frozen.is_some(),
        }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.geometry.grid()
    }

    pub fn bc(&self) -> &BoundaryCondition {
        self.geometry.bc()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_points(&self) -> usize {
        self.geometry.grid().n_points()
    }

    /// `ρ V` at every point.
    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    pub fn check_field(&self, u: &Field) -> Result<()> {
        if u.grid() != self.grid() || u.n_components() != self.n_components {
            return Err(Error::ShapeMismatch(format!(
                "operator expects {} component(s) on its grid, got {}",
                self.n_components,
                u.n_components()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.check_field(u)?;
        let mut out = vec![0.0; u.values().len()];
        self.eval(u.values(), &mut out);
        Field::from_values(u.grid().clone(), u.n_components(), out)
    }

    fn apply_component(&self, u: &[f64], out: &mut [f64], homogeneous: bool) {
        let held = self.geometry.held();
        match &self.disc {
            Discretization::Flux(st) => {
                for p in 0..u.len() {
                    let r = st.offsets[p]..st.offsets[p + 1];
                    let up = u[p];
                    out[p] = st.neighbors[r.clone()]
                        .iter()
                        .zip(&st.coefs[r])
                        .map(|(&q, &c)| {
                            let uq = if homogeneous && held[q] { 0.0 } else { u[q] };
                            c * (uq - up)
                        })
                        .sum();
                }
            }
            Discretization::Cells {
                cells,
                frozen,
                prefactor,
            } => {
                let dims = self.geometry.dims();
                let owned;
                let tensors = match frozen {
                    Some(t) => t,
                    None => {
                        let OperatorKind::Aligned(cfg) = &self.kind else {
                            unreachable!()
                        };
                        // nonlinear mode: non-positive temperatures fall to the floor
                        let nodes = cfg
                            .node_tensors(u, false)
                            .expect("non-strict tensor evaluation is infallible");
                        owned = cell_tensors(cells, &nodes, dims);
                        &owned
                    }
                };
                out.fill(0.0);
                let read = |q: usize| if homogeneous && held[q] { 0.0 } else { u[q] };
                let n_corners = 1usize << dims;
                let per_dir = (n_corners / 2) as f64;
                for (cell, d_tensor) in cells.iter().zip(tensors) {
                    let mut vals = [0.0; 1 << MAX_DIMS];
                    for k in 0..n_corners {
                        vals[k] = read(cell.corners[k]);
                    }
                    let mut g = [0.0; MAX_DIMS];
                    for d in 0..dims {
                        let bit = 1 << d;
                        let mut s = 0.0;
                        for k in (0..n_corners).filter(|k| k & bit == 0) {
                            s += vals[k | bit] - vals[k];
                        }
                        g[d] = s / (per_dir * cell.width[d]);
                    }
                    for d in 0..dims {
                        let bit = 1 << d;
                        let cross: f64 = (0..dims)
                            .filter(|&e| e != d)
                            .map(|e| d_tensor[d][e] * g[e])
                            .sum();
                        let scale = cell.volume / (per_dir * cell.width[d]);
                        for k in (0..n_corners).filter(|k| k & bit == 0) {
                            let a = (vals[k | bit] - vals[k]) / cell.width[d];
                            let q = scale * (d_tensor[d][d] * a + cross);
                            out[cell.corners[k | bit]] -= q;
                            out[cell.corners[k]] += q;
                        }
                    }
                }
                for (p, o) in out.iter_mut().enumerate() {
                    *o = if held[p] {
                        0.0
                    } else {
                        prefactor * *o / self.node_weights[p]
                    };
                }
            }
        }
    }

    fn probe_colors(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let grid = self.grid();
        let mut colors = Vec::new();
        let mut counts = Vec::new();
        for d in 0..grid.dims() {
            let n = grid.shape()[d];
            let (c, k) = if self.bc().is_periodic(d) && n % 3 != 0 {
                // leftover indices get their own colors so wrap-around windows stay distinct
                let full = 3 * (n / 3);
                let c = (0..n)
                    .map(|i| if i < full { i % 3 } else { 3 + i - full })
                    .collect();
                (c, 3 + n - full)
            } else {
                ((0..n).map(|i| i % 3).collect(), 3)
            };
            colors.push(c);
            counts.push(k);
        }
        (colors, counts)
    }

    /// Jacobian of one component block via colored probing: nodes whose indices
    /// agree modulo 3 never share a stencil, so `3^dims` applications suffice.
    pub fn assemble_component(&self) -> CsrMatrix {
        self.probe(false)
    }

    fn probe(&self, diagonal_only: bool) -> CsrMatrix {
        let grid = self.grid().clone();
        let dims = grid.dims();
        let n = grid.n_points();
        let (colors, counts) = self.probe_colors();
        let n_probes: usize = counts.iter().product();
        let color_of = |idx: &[usize; MAX_DIMS]| -> usize {
            let mut c = 0;
            let mut m = 1;
            for d in 0..dims {
                c += colors[d][idx[d]] * m;
                m *= counts[d];
            }
            c
        };
        let point_color: Vec<usize> = (0..n).map(|p| color_of(&grid.multi_index(p))).collect();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut e = vec![0.0; n];
        let mut out = vec![0.0; n];
        let offsets: Vec<[isize; MAX_DIMS]> = (0..3usize.pow(dims as u32))
            .map(|k| {
                let mut o = [0isize; MAX_DIMS];
                let mut rem = k;
                for od in o.iter_mut().take(dims) {
                    *od = (rem % 3) as isize - 1;
                    rem /= 3;
                }
                o
            })
            .collect();
        for color in 0..n_probes {
            for p in 0..n {
                e[p] = if point_color[p] == color { 1.0 } else { 0.0 };
            }
            self.apply_component(&e, &mut out, true);
            for p in 0..n {
                let idx = grid.multi_index(p);
                for o in &offsets {
                    if diagonal_only && o.iter().any(|&x| x != 0) {
                        continue;
                    }
                    let mut q_idx = [0usize; MAX_DIMS];
                    let mut ok = true;
                    for d in 0..dims {
                        let nd = grid.shape()[d] as isize;
                        let i = idx[d] as isize + o[d];
                        if i < 0 || i >= nd {
                            if self.bc().is_periodic(d) {
                                q_idx[d] = i.rem_euclid(nd) as usize;
                            } else {
                                ok = false;
                                break;
                            }
                        } else {
                            q_idx[d] = i as usize;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let q = grid.linear_index(&q_idx[..dims]);
                    if point_color[q] == color && (out[p] != 0.0 || q == p) {
                        rows[p].push((q, out[p]));
                    }
                }
            }
        }
        CsrMatrix::from_rows(rows)
    }
}

fn cell_tensors(cells: &[Cell], nodes: &[Tensor], dims: usize) -> Vec<Tensor> {
    let k = 1usize << dims;
    cells
        .iter()
        .map(|c| {
            let mut t = [[0.0; MAX_DIMS]; MAX_DIMS];
            for corner in &c.corners[..k] {
                for i in 0..dims {
                    for j in 0..dims {
                        t[i][j] += nodes[*corner][i][j];
                    }
                }
            }
            for row in t.iter_mut() {
                for v in row.iter_mut() {
                    *v /= k as f64;
                }
            }
            t
        })
        .collect()
}

impl Rhs for DiffusionOperator {
    fn len(&self) -> usize {
        self.n_points() * self.n_components
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n_points();
        for (uc, oc) in u.chunks(n).zip(out.chunks_mut(n)) {
            self.apply_component(uc, oc, false);
        }
    }

    fn is_linear(&self) -> bool {
        DiffusionOperator::is_linear(self)
    }

    fn eval_homogeneous(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n_points();
        for (uc, oc) in u.chunks(n).zip(out.chunks_mut(n)) {
            self.apply_component(uc, oc, true);
        }
    }

    fn weights(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.weights)
    }

    fn held(&self) -> Cow<'_, [bool]> {
        Cow::Borrowed(&self.held)
    }

    fn assemble(&self) -> CsrMatrix {
        let block = self.assemble_component();
        if self.n_components == 1 {
            return block;
        }
        let n = block.n();
        let rows = (0..self.n_components)
            .flat_map(|c| {
                let block = &block;
                (0..n).map(move |i| {
                    let (cols, vals) = block.row(i);
                    cols.iter().zip(vals).map(|(&j, &v)| (c * n + j, v)).collect()
                })
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    fn diagonal(&self) -> Vec<f64> {
        self.probe(true).diagonal().repeat(self.n_components)
    }
}

pub fn apply_scalar_diffusion(u: &Field, cfg: &ScalarDiffusionConfig) -> Result<Field> {
    let op = DiffusionOperator::scalar(cfg.clone(), u.n_components())?;
    op.apply(u)
}

pub fn apply_aligned_conduction(
    t: &Field,
    cfg: &AlignedConductionConfig,
    t0: &Field,
) -> Result<Field> {
    let op = DiffusionOperator::aligned(cfg.clone(), Some(t0))?;
    op.apply(t)
}

/// Gershgorin bound on the spectral radius of the Jacobian: the largest
/// absolute row sum over free rows.
pub fn gershgorin_bound<R: Rhs + ?Sized>(op: &R) -> f64 {
    let a = op.assemble();
    (0..a.n())
        .map(|i| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Explicit Euler stable step `2 / ρ_bound`, or `+∞` for a zero operator.
///
/// A nonlinear conduction operator is linearized about `probe` first.
pub fn estimate_euler_dt(op: &DiffusionOperator, probe: &Field) -> Result<f64> {
    let frozen;
    let op = if op.is_linear() {
        op
    } else {
        let mut o = op.clone();
        o.freeze(probe)?;
        frozen = o;
        &frozen
    };
    Ok(euler_dt_from_bound(gershgorin_bound(op)))
}

pub fn euler_dt_from_bound(bound: f64) -> f64 {
    if bound > 0.0 {
        2.0 / bound
    } else {
        f64::INFINITY
    }
}
