pub mod domain;
pub mod error;
pub mod field;
pub mod harmonic;
pub mod linalg;
pub mod minimize;
pub mod quadrature;
pub mod testmaps;
pub mod topology;

pub use domain::{capacity, solve_v, Annulus, Contour, Grid, Mesh, ScalarField};
pub use error::{Error, Result};
pub use field::{energy, gl_gradient, renormalize_boundary, ComplexField, EnergyReport};
