//! Shape optimization of 2D cellular composites.
//!
//! The domain is a unit square of bulk material containing polygonal cell
//! inclusions. The optimization moves the interior material interfaces to
//! minimize a weighted sum of elastic compliance, bulk volume, and interface
//! perimeter. Descent directions are computed in an elasticity-type metric
//! augmented by a penalty on the deformation gradient, which keeps the moving
//! finite element mesh usable over many optimization steps.
//!
//! Module layout:
//! - [`mesh`]: multi-material triangle meshes, domain generator, uniform
//!   refinement hierarchy, deformation, quality metrics, file formats.
//! - [`fem`]: P1 linear elasticity assembly and the objective terms.
//! - [`shapegrad`]: nodal shape-derivative assembly and the interface-support
//!   reset.
//! - [`descent`]: the gradient-penalized descent problem and its semi-smooth
//!   Newton solver.
//! - [`mgsolve`]: BiCGStab/CG with a geometric multigrid V-cycle
//!   preconditioner on the mesh hierarchy.
//! - [`driver`]: the optimization loop, configuration, and output files.

// Index loops over co-indexed arrays dominate the assembly and solver code;
// iterator rewrites obscure the matrix arithmetic.
#![allow(clippy::needless_range_loop)]

pub mod descent;
pub mod driver;
mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod mgsolve;
pub mod parallel;
pub mod shapegrad;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
