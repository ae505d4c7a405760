//! Discretized Kähler calculus on the model backends.

pub mod backend;
pub mod cp1;
pub mod forms;
pub mod lobatto;
pub mod spectral;
pub mod torus;

pub use backend::{top_monomial_factor, GeometryBackend, HamiltonianAction};
pub use cp1::Cp1Geometry;
pub use forms::{EndoShape, TensorField};
pub use lobatto::ChebyshevGrid;
pub use spectral::SpectralGrid;
pub use torus::{FourierMode, TorusGeometry};
