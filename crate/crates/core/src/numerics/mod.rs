//! Quadrature, dense linear algebra and panel kernel integrals.

pub mod kernels;
pub mod linalg;
pub mod quadrature;

pub use kernels::{panel_layer_derivatives, panel_log_integrals, LayerDerivatives, LayerIntegrals};
pub use linalg::{solve_dense, DenseSystem, LuFactors};
pub use quadrature::{gauss_legendre, QuadratureRule};
