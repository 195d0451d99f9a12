//! Transport of a level-set interface by a velocity field that is only
//! meaningful on the interface itself.
//!
//! The central object is a Hamilton-Jacobi equation whose Hamiltonian
//! evaluates the physical velocity at the metric projection of each point
//! onto the moving zero set. Away from the zero set the equation extends the
//! interface motion along normals, which keeps the magnitude of the spatial
//! gradient constant along characteristics; in particular a signed-distance
//! profile stays a signed distance for as long as the characteristic flow
//! stays injective.
//!
//! Two solvers are provided. [`tube::solve_tube`] integrates the
//! characteristic system of ordinary differential equations on a narrow band
//! of seeds around the interface, restarting legs at a computable safe
//! duration so that injectivity of the seed-to-position map can be verified.
//! [`hj::solve_viscosity`] discretizes a regularized form of the same
//! equation with a monotone local Lax-Friedrichs scheme on the full grid.
//! The [`baselines`] module carries the classical alternatives (plain linear
//! transport and normal-motion source terms) used for comparison, and
//! [`analysis`] holds the a priori checks the construction is supposed to
//! satisfy: comparison envelopes, monotonicity of the stabilized
//! Hamiltonian, and tube error norms.
//!
//! Two-dimensional problems are embedded in the plane `z = 0`; every vector
//! quantity is three-component in both dimensions.

pub mod analysis;
pub mod baselines;
pub mod characteristics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod hj;
pub mod interface;
pub mod io;
pub mod tube;
pub mod velocity;

pub use analysis::DiagnosticsReport;
pub use characteristics::{CharState, CharacteristicBounds};
pub use error::{Error, Result};
pub use field::{PhaseLabel, PhaseMask, ScalarField, Scheme};
pub use geometry::{AnalyticSurface, LevelSetData};
pub use grid::{Box3, Grid};
pub use hj::Regularizer;
pub use interface::InterfaceMesh;
pub use tube::{solve_tube, TubeOptions, TubeSolution};
pub use velocity::{AnalyticField, FieldKind, FieldSpec, VelocityField};

/// Column vector in the embedding space. In 2D the `z` component is zero.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Jacobian-sized matrix; entry `(i, j)` holds a derivative of component `i`
/// along axis `j`.
pub type Mat3 = nalgebra::Matrix3<f64>;
