pub mod analyzer;
pub mod calibration;
pub mod error;
pub mod families;
pub mod heisenberg;
pub mod laminate;
pub mod mat;
pub mod synth;
pub mod tn;

pub use error::{Error, Result};
pub use mat::{BlockMat, Mat2, SplitClass, SplitTarget};
