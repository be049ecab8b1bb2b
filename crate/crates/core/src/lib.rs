//! Monte Carlo laboratory for long-range percolation on `Z^d` with connection
//! probabilities decaying like `β / |u - v|^{2d}`.
//!
//! Nearest neighbours in the `∞`-norm are always connected; longer edges are
//! open independently. The crate samples such configurations on boxes (also
//! through the continuum Poisson cloud that couples all scales), measures
//! graph distances and diameters, and estimates how distances grow.

pub mod error;
pub mod estimators;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod structure;

pub use error::{Error, Result};
pub use graph::{Diameter, DiameterMode, LatticeGraph};
pub use kernel::{KernelFamily, KernelSpec};
pub use lattice::{BoxSpec, Displacement};
pub use sampler::{BoxSampler, Configuration, PoissonCloud};
pub use stats::EstimateCI;
