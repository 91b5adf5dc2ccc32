//! Node-centered tensor-product grids, fields on them, and boundary handling.
//!
//! Boundary nodes sit on the domain boundary. Points are numbered in natural
//! lexicographic order with dimension 0 varying fastest.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest supported dimensionality.
pub const MAX_DIMS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    coords: Vec<Vec<f64>>,
    spacings: Vec<Vec<f64>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    /// Uniform partition of `[lo, hi]` in each dimension.
    pub fn uniform(counts: &[usize], extents: &[(f64, f64)]) -> Result<Self> {
        if counts.len() != extents.len() {
            return Err(Error::InvalidGrid(format!(
                "{} point counts but {} extents",
                counts.len(),
                extents.len()
            )));
        }
        let coords = counts
            .iter()
            .zip(extents)
            .map(|(&n, &(lo, hi))| {
                if n < 2 {
                    return Vec::new();
                }
                let h = (hi - lo) / (n - 1) as f64;
                // pin the last node to `hi` exactly
                (0..n)
                    .map(|i| if i + 1 == n { hi } else { lo + h * i as f64 })
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        for (d, &n) in counts.iter().enumerate() {
            if n < 3 {
                return Err(Error::InvalidGrid(format!(
                    "dimension {d} has {n} points, need at least 3"
                )));
            }
        }
        Self::from_coords(coords)
    }

    pub fn from_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIMS {
            return Err(Error::InvalidGrid(format!(
                "grid must have 1 to {MAX_DIMS} dimensions, got {}",
                coords.len()
            )));
        }
        let mut spacings = Vec::with_capacity(coords.len());
        for (d, c) in coords.iter().enumerate() {
            if c.len() < 3 {
                return Err(Error::InvalidGrid(format!(
                    "dimension {d} has {} points, need at least 3",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "dimension {d} has non-finite coordinates"
                )));
            }
            let h: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
            if let Some(i) = h.iter().position(|&x| x <= 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "dimension {d} coordinates not strictly increasing at index {}",
                    i + 1
                )));
            }
            spacings.push(h);
        }
        let shape: Vec<usize> = coords.iter().map(Vec::len).collect();
        let mut strides = Vec::with_capacity(shape.len());
        let mut acc = 1;
        for &n in &shape {
            strides.push(acc);
            acc *= n;
        }
        Ok(Self {
            coords,
            spacings,
            shape,
            strides,
        })
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn coords(&self, dim: usize) -> &[f64] {
        &self.coords[dim]
    }

    /// Differences of consecutive coordinates along `dim` (length `n - 1`).
    pub fn spacings(&self, dim: usize) -> &[f64] {
        &self.spacings[dim]
    }

    pub fn stride(&self, dim: usize) -> usize {
        self.strides[dim]
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Per-dimension index of a point; unused trailing dimensions are zero.
    pub fn multi_index(&self, mut p: usize) -> [usize; MAX_DIMS] {
        let mut out = [0; MAX_DIMS];
        for (d, &n) in self.shape.iter().enumerate() {
            out[d] = p % n;
            p /= n;
        }
        out
    }

    /// Physical position of a point; unused trailing coordinates are zero.
    pub fn position(&self, p: usize) -> [f64; MAX_DIMS] {
        let idx = self.multi_index(p);
        let mut x = [0.0; MAX_DIMS];
        for d in 0..self.dims() {
            x[d] = self.coords[d][idx[d]];
        }
        x
    }
}

/// Boundary treatment on one face of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Face {
    /// Boundary nodes hold this value.
    Dirichlet(f64),
    NeumannZeroFlux,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    faces: Vec<[Face; 2]>,
}

impl BoundaryCondition {
    /// `faces[d] = [lower, upper]`.
    pub fn new(faces: Vec<[Face; 2]>) -> Result<Self> {
        if faces.is_empty() || faces.len() > MAX_DIMS {
            return Err(Error::InvalidBoundary(format!(
                "need 1 to {MAX_DIMS} dimensions, got {}",
                faces.len()
            )));
        }
        for (d, [lo, hi]) in faces.iter().enumerate() {
            let lo_p = matches!(lo, Face::Periodic);
            let hi_p = matches!(hi, Face::Periodic);
            if lo_p != hi_p {
                return Err(Error::InvalidBoundary(format!(
                    "dimension {d}: periodic must be set on both faces or neither"
                )));
            }
            for f in [lo, hi] {
                if let Face::Dirichlet(v) = f {
                    if !v.is_finite() {
                        return Err(Error::InvalidBoundary(format!(
                            "dimension {d}: non-finite Dirichlet value"
                        )));
                    }
                }
            }
        }
        Ok(Self { faces })
    }

    /// Same face kind on every face of a `dims`-dimensional box.
    pub fn uniform(dims: usize, face: Face) -> Result<Self> {
        Self::new(vec![[face, face]; dims])
    }

    pub fn dims(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self, dim: usize) -> [Face; 2] {
        self.faces[dim]
    }

    pub fn is_periodic(&self, dim: usize) -> bool {
        matches!(self.faces[dim][0], Face::Periodic)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.dims() != grid.dims() {
            return Err(Error::ShapeMismatch(format!(
                "boundary condition has {} dimensions, grid has {}",
                self.dims(),
                grid.dims()
            )));
        }
        Ok(())
    }

    /// Dirichlet value imposed at point `idx`, if it lies on a Dirichlet face.
    /// Where two Dirichlet faces meet the lower dimension's face wins.
    pub fn dirichlet_value(&self, grid: &Grid, idx: &[usize]) -> Option<f64> {
        for d in 0..self.dims() {
            let n = grid.shape()[d];
            if idx[d] == 0 {
                if let Face::Dirichlet(v) = self.faces[d][0] {
                    return Some(v);
                }
            }
            if idx[d] == n - 1 {
                if let Face::Dirichlet(v) = self.faces[d][1] {
                    return Some(v);
                }
            }
        }
        None
    }
}

/// Values of one or more components on every grid point.
///
/// Storage is component-major: component `c` occupies
/// `values[c * n_points .. (c + 1) * n_points]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    n_components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>, n_components: usize) -> Self {
        let n = grid.n_points() * n_components.max(1);
        Self {
            grid,
            n_components: n_components.max(1),
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, n_components: usize, value: f64) -> Self {
        let mut f = Self::zeros(grid, n_components);
        f.values.fill(value);
        f
    }

    pub fn from_values(grid: Arc<Grid>, n_components: usize, values: Vec<f64>) -> Result<Self> {
        if n_components == 0 {
            return Err(Error::ShapeMismatch("field needs at least one component".into()));
        }
        if values.len() != grid.n_points() * n_components {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} points x {} components",
                values.len(),
                grid.n_points(),
                n_components
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        Ok(Self {
            grid,
            n_components,
            values,
        })
    }

    /// Evaluate `f(position, component)` at every point.
    pub fn from_fn(
        grid: Arc<Grid>,
        n_components: usize,
        f: impl Fn([f64; MAX_DIMS], usize) -> f64,
    ) -> Self {
        let n = grid.n_points();
        let mut values = Vec::with_capacity(n * n_components);
        for c in 0..n_components {
            values.extend((0..n).map(|p| f(grid.position(p), c)));
        }
        Self {
            grid,
            n_components,
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.n_points();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.n_points();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Same grid and layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(self.grid.clone(), self.n_components, values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.n_components == other.n_components && self.grid == other.grid
    }

    /// Overwrite boundary nodes on Dirichlet faces with the prescribed value.
    pub fn impose_dirichlet(&mut self, bc: &BoundaryCondition) -> Result<()> {
        bc.check_grid(&self.grid)?;
        let n = self.n_points();
        for p in 0..n {
            let idx = self.grid.multi_index(p);
            if let Some(v) = bc.dirichlet_value(&self.grid, &idx) {
                for c in 0..self.n_components {
                    self.values[c * n + p] = v;
                }
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A field padded with one ghost layer in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloField {
    shape: Vec<usize>,
    n_components: usize,
    values: Vec<f64>,
}

impl HaloField {
    /// Padded shape (`n + 2` per dimension).
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn offset(&self, idx: &[isize]) -> usize {
        let mut off = 0;
        let mut stride = 1;
        for (d, &n) in self.shape.iter().enumerate() {
            let i = (idx[d] + 1) as usize;
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    /// Value at an interior index shifted by up to one cell; `-1` and `n` address ghosts.
    pub fn get(&self, component: usize, idx: &[isize]) -> f64 {
        let per = self.shape.iter().product::<usize>();
        self.values[component * per + self.offset(idx)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }
}

/// Populate one ghost layer around `field`.
///
/// Dirichlet ghosts take the prescribed value (the boundary node itself carries
/// it too), zero-flux ghosts copy the boundary node and periodic ghosts wrap.
/// Dimensions are filled in order so corner ghosts are consistent.
pub fn fill_ghost(field: &Field, bc: &BoundaryCondition) -> Result<HaloField> {
    let grid = field.grid();
    bc.check_grid(grid)?;
    let dims = grid.dims();
    let shape: Vec<usize> = grid.shape().iter().map(|n| n + 2).collect();
    let per: usize = shape.iter().product();
    let mut values = vec![0.0; per * field.n_components()];
    let mut halo_strides = Vec::with_capacity(dims);
    let mut acc = 1;
    for &n in &shape {
        halo_strides.push(acc);
        acc *= n;
    }

    for c in 0..field.n_components() {
        let src = field.component(c);
        let dst = &mut values[c * per..(c + 1) * per];
        for (p, &v) in src.iter().enumerate() {
            let idx = grid.multi_index(p);
            let off: usize = (0..dims).map(|d| (idx[d] + 1) * halo_strides[d]).sum();
            dst[off] = v;
        }
        for d in 0..dims {
            let n = grid.shape()[d];
            let [lo, hi] = bc.faces(d);
            // walk every padded index whose coordinate in `d` is a ghost
            for h in 0..per {
                let mut rem = h;
                let mut hidx = [0usize; MAX_DIMS];
                for (k, &m) in shape.iter().enumerate() {
                    hidx[k] = rem % m;
                    rem /= m;
                }
                let i = hidx[d];
                if i != 0 && i != n + 1 {
                    continue;
                }
                let (face, inner, wrap) = if i == 0 {
                    (lo, 1, n)
                } else {
                    (hi, n, 1)
                };
                let inner_off = h - i * halo_strides[d] + inner * halo_strides[d];
                let wrap_off = h - i * halo_strides[d] + wrap * halo_strides[d];
                dst[h] = match face {
                    Face::Dirichlet(v) => v,
                    Face::NeumannZeroFlux => dst[inner_off],
                    Face::Periodic => dst[wrap_off],
                };
            }
        }
    }
    Ok(HaloField {
        shape,
        n_components: field.n_components(),
        values,
    })
}

/// Dual-cell metrics and neighbor topology for a grid under a boundary condition.
///
/// For periodic dimensions the wrap-around spacing is the mean of the first and
/// last spacings, so a uniform periodic grid of `n` points has period `n h`.
#[derive(Debug, Clone)]
pub struct Geometry {
    grid: Arc<Grid>,
    bc: BoundaryCondition,
    /// `face_h[d][i]`: distance from node `i` to node `i + 1` (wrapping when periodic).
    face_h: Vec<Vec<f64>>,
    /// Dual-cell width of each node along each dimension.
    dual: Vec<Vec<f64>>,
    volumes: Vec<f64>,
    held: Vec<bool>,
}

impl Geometry {
    pub fn new(grid: Arc<Grid>, bc: BoundaryCondition) -> Result<Self> {
        bc.check_grid(&grid)?;
        let dims = grid.dims();
        let mut face_h = Vec::with_capacity(dims);
        let mut dual = Vec::with_capacity(dims);
        for d in 0..dims {
            let h = grid.spacings(d);
            let n = grid.shape()[d];
            let mut fh = h.to_vec();
            let mut v = vec![0.0; n];
            if bc.is_periodic(d) {
                fh.push(0.5 * (h[0] + h[n - 2]));
                for i in 0..n {
                    let left = fh[(i + n - 1) % n];
                    v[i] = 0.5 * (left + fh[i]);
                }
            } else {
                v[0] = 0.5 * h[0];
                v[n - 1] = 0.5 * h[n - 2];
                for i in 1..n - 1 {
                    v[i] = 0.5 * (h[i - 1] + h[i]);
                }
            }
            face_h.push(fh);
            dual.push(v);
        }
        let n = grid.n_points();
        let mut volumes = Vec::with_capacity(n);
        let mut held = Vec::with_capacity(n);
        for p in 0..n {
            let idx = grid.multi_index(p);
            volumes.push((0..dims).map(|d| dual[d][idx[d]]).product());
            held.push(bc.dirichlet_value(&grid, &idx).is_some());
        }
        Ok(Self {
            grid,
            bc,
            face_h,
            dual,
            volumes,
            held,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn dims(&self) -> usize {
        self.grid.dims()
    }

    /// Spacing between node `i` and its upper neighbor along `dim`.
    pub fn face_spacing(&self, dim: usize, i: usize) -> f64 {
        self.face_h[dim][i]
    }

    /// Number of faces (cells) along `dim`: `n` when periodic, `n - 1` otherwise.
    pub fn n_faces(&self, dim: usize) -> usize {
        self.face_h[dim].len()
    }

    pub fn dual_width(&self, dim: usize, i: usize) -> f64 {
        self.dual[dim][i]
    }

    /// Dual-cell volume of every point.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// `true` at nodes held fixed by a Dirichlet face.
    pub fn held(&self) -> &[bool] {
        &self.held
    }

    /// Index of the node one step along `dim` (`+1` or `-1`), if it exists.
    pub fn neighbor(&self, idx: &[usize], dim: usize, dir: isize) -> Option<usize> {
        let n = self.grid.shape()[dim];
        let i = idx[dim] as isize + dir;
        let j = if i < 0 || i >= n as isize {
            if !self.bc.is_periodic(dim) {
                return None;
            }
            i.rem_euclid(n as isize) as usize
        } else {
            i as usize
        };
        let mut out = 0;
        for d in 0..self.dims() {
            let k = if d == dim { j } else { idx[d] };
            out += k * self.grid.stride(d);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> Field {
        let g = Arc::new(Grid::uniform(&[values.len()], &[(0.0, 1.0)]).unwrap());
        Field::from_values(g, 1, values.to_vec()).unwrap()
    }

    fn ghosts(h: &HaloField, n: isize) -> (f64, f64) {
        (h.get(0, &[-1]), h.get(0, &[n]))
    }

    #[test]
    fn uniform_grid_coordinates() {
        let g = Grid::uniform(&[5], &[(0.0, 1.0)]).unwrap();
        assert_eq!(g.coords(0), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = Grid::uniform(&[4, 4], &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_eq!(g.n_points(), 16);
        for d in 0..2 {
            for h in g.spacings(d) {
                assert!((h - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn explicit_coordinates() {
        let g = Grid::from_coords(vec![vec![0.0, 1.0, 10.0]]).unwrap();
        assert_eq!(g.spacings(0), &[1.0, 9.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            Grid::from_coords(vec![vec![0.0, 2.0, 1.0]]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid::from_coords(vec![vec![0.0, 0.0, 1.0]]).is_err());
        assert!(Grid::uniform(&[2], &[(0.0, 1.0)]).is_err());
        assert!(Grid::from_coords(vec![]).is_err());
        assert!(Grid::from_coords(vec![vec![0.0, 1.0, 2.0]; 4]).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::uniform(&[3, 4, 5], &[(0.0, 1.0); 3]).unwrap();
        for p in 0..g.n_points() {
            let idx = g.multi_index(p);
            assert_eq!(g.linear_index(&idx[..3]), p);
        }
        assert_eq!(g.multi_index(1), [1, 0, 0]);
    }

    #[test]
    fn periodic_pairing_enforced() {
        let err = BoundaryCondition::new(vec![[Face::Periodic, Face::NeumannZeroFlux]]);
        assert!(matches!(err, Err(Error::InvalidBoundary(_))));
        assert!(BoundaryCondition::new(vec![[Face::Periodic, Face::Periodic]]).is_ok());
    }

    #[test]
    fn ghost_conventions() {
        let f = line(&[1.0, 2.0, 3.0]);
        let bc = BoundaryCondition::uniform(1, Face::NeumannZeroFlux).unwrap();
        assert_eq!(ghosts(&fill_ghost(&f, &bc).unwrap(), 3), (1.0, 3.0));
        let bc = BoundaryCondition::uniform(1, Face::Periodic).unwrap();
        assert_eq!(ghosts(&fill_ghost(&f, &bc).unwrap(), 3), (3.0, 1.0));
        let bc = BoundaryCondition::uniform(1, Face::Dirichlet(0.0)).unwrap();
        assert_eq!(ghosts(&fill_ghost(&f, &bc).unwrap(), 3), (0.0, 0.0));
    }

    #[test]
    fn ghost_fill_idempotent_2d() {
        let g = Arc::new(Grid::uniform(&[4, 3], &[(0.0, 1.0); 2]).unwrap());
        let f = Field::from_fn(g, 2, |x, c| x[0] * 3.0 + x[1] + c as f64);
        let bc = BoundaryCondition::new(vec![
            [Face::Periodic, Face::Periodic],
            [Face::Dirichlet(2.0), Face::NeumannZeroFlux],
        ])
        .unwrap();
        let h1 = fill_ghost(&f, &bc).unwrap();
        let h2 = fill_ghost(&f, &bc).unwrap();
        assert_eq!(h1, h2);
        // corner ghost: periodic in x applied first, then Dirichlet in y
        assert_eq!(h1.get(0, &[-1, -1]), 2.0);
        assert_eq!(h1.get(1, &[-1, 0]), f.component(1)[3]);
    }

    #[test]
    fn periodic_ghosts_commute_with_shift() {
        let vals = [4.0, -1.0, 2.5, 7.0, 0.5];
        let bc = BoundaryCondition::uniform(1, Face::Periodic).unwrap();
        let n = vals.len();
        let h = fill_ghost(&line(&vals), &bc).unwrap();
        let shifted: Vec<f64> = (0..n).map(|i| vals[(i + 1) % n]).collect();
        let hs = fill_ghost(&line(&shifted), &bc).unwrap();
        for i in -1..n as isize {
            assert_eq!(hs.get(0, &[i]), h.get(0, &[i + 1]));
        }
    }

    #[test]
    fn dual_volumes() {
        let g = Arc::new(Grid::uniform(&[5], &[(0.0, 4.0)]).unwrap());
        let bc = BoundaryCondition::uniform(1, Face::NeumannZeroFlux).unwrap();
        let geo = Geometry::new(g.clone(), bc).unwrap();
        assert_eq!(geo.volumes(), &[0.5, 1.0, 1.0, 1.0, 0.5]);
        let bc = BoundaryCondition::uniform(1, Face::Periodic).unwrap();
        let geo = Geometry::new(g, bc).unwrap();
        assert_eq!(geo.volumes(), &[1.0; 5]);
        assert_eq!(geo.neighbor(&[0], 0, -1), Some(4));
        assert_eq!(geo.neighbor(&[4], 0, 1), Some(0));
    }

    #[test]
    fn impose_dirichlet_marks_faces() {
        let g = Arc::new(Grid::uniform(&[3, 3], &[(0.0, 1.0); 2]).unwrap());
        let bc = BoundaryCondition::new(vec![
            [Face::Dirichlet(1.0), Face::NeumannZeroFlux],
            [Face::NeumannZeroFlux, Face::Dirichlet(5.0)],
        ])
        .unwrap();
        let mut f = Field::zeros(g.clone(), 1);
        f.impose_dirichlet(&bc).unwrap();
        assert_eq!(f.values(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0]);
        let geo = Geometry::new(g, bc).unwrap();
        assert_eq!(geo.held().iter().filter(|h| **h).count(), 5);
    }
}
