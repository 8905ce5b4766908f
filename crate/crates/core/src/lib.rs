pub mod circle;
pub mod cli;
pub mod error;
pub mod integrals;
pub mod matrix;
pub mod pipeline;
pub mod random;
pub mod scalar;
pub mod schur;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{Matrix, MatrixJson, Schatten};
pub use scalar::{Real, C};
pub use spectral::SpectralDecomposition;

pub type ComplexMatrix = Matrix<f64>;
pub type ComplexMatrix32 = Matrix<f32>;
