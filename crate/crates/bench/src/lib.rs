//! Problem builders shared by the benchmarks in `benches/`.

use std::sync::Arc;

use ptlstep::{
    AlignedConductionConfig, BoundaryCondition, DiffusionOperator, Face, Field, Grid,
    ScalarDiffusionConfig,
};

/// Unit-spaced `n × n` grid with zero-flux walls.
pub fn square(n: usize) -> (Arc<Grid>, BoundaryCondition) {
    let grid = Arc::new(Grid::uniform(&[n, n], &[(0.0, (n - 1) as f64); 2]).unwrap());
    (grid, BoundaryCondition::uniform(2, Face::NeumannZeroFlux).unwrap())
}

/// Scalar diffusion with smoothly varying ν and ρ, and a diagonal step.
pub fn scalar_problem(n: usize) -> (DiffusionOperator, Field) {
    let (grid, bc) = square(n);
    let h = (n - 1) as f64;
    let nu = Field::from_fn(grid.clone(), 1, |x, _| 1.0 + 0.5 * (x[0] / h).sin());
    let rho = Field::from_fn(grid.clone(), 1, |x, _| 1.0 + 0.25 * x[1] / h);
    let op = DiffusionOperator::scalar(ScalarDiffusionConfig::new(nu, rho, bc), 1).unwrap();
    let u = Field::from_fn(grid, 1, |x, _| if x[0] + x[1] >= h { 1.0 } else { 0.0 });
    (op, u)
}

/// Field-aligned conduction along a 30° field, linearized about a hot spot.
pub fn aligned_problem(n: usize) -> (DiffusionOperator, Field) {
    let (grid, bc) = square(n);
    let c = 0.5 * (n - 1) as f64;
    let dir = [30f64.to_radians().cos(), 30f64.to_radians().sin()];
    let b = Field::from_fn(grid.clone(), 2, |_, k| dir[k]);
    let t = Field::from_fn(grid.clone(), 1, |x, _| {
        1.0 + (-((x[0] - c).powi(2) + (x[1] - c).powi(2)) / (0.1 * c * c)).exp()
    });
    let cfg = AlignedConductionConfig::new(b, Field::constant(grid, 1, 1.0), bc);
    (DiffusionOperator::aligned(cfg, Some(&t)).unwrap(), t)
}
