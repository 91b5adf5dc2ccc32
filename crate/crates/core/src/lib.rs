//! Stiff parabolic operators on structured grids, advanced with explicit Euler,
//! backward Euler + PCG, and the second-order super time-stepping schemes RKL2
//! and RKG2, under a practical time-step limit that cycles each split operator
//! inside a large outer step.

pub mod analysis;
pub mod error;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod operators;
pub mod ptl;
pub mod schemes;

pub use error::{Error, Result};
pub use linsolve::{CsrMatrix, Preconditioner, SolveStats};
pub use mesh::{BoundaryCondition, Face, Field, Geometry, Grid};
pub use operators::{
    AlignedConductionConfig, DiffusionOperator, FaceAverage, Profile, Rhs, ScalarDiffusionConfig,
};
pub use ptl::{CycleRecord, CycleReport, FloorMode, LagRefresh, Ptl, PtlConfig};
pub use schemes::{PreconditionerKind, SchemeConfig, SchemeKind, SolverConfig, StsCoefficients};
