//! Elliptic-regularization minimizers for wave maps into spheres and `SO(m)`.
//!
//! Wave maps are approximated by minimizers of the exponentially weighted
//! space-time functional `∬ e^{-t}(|∂_t²u|² + ε²|∇u|²)` with the Cauchy data
//! as boundary condition at `t = 0`. The crate discretizes the functional on a
//! periodic torus, minimizes it over target-valued fields, and checks the
//! energy identities, a-priori bounds and the `ε → 0` limit against exact
//! geodesic wave maps.

pub mod diagnostics;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod oracle;
mod precond;
pub mod presets;
pub mod variational;

pub use diagnostics::{BoundConstants, BoundReport, EnergyTrace};
pub use geometry::{CauchyData, GeometryError, TargetManifold};
pub use mesh::{Grid, SpaceTimeField, TimeScale, Torus};
pub use variational::{minimize, MinimizeOptions, MinimizeReport, Termination};
