//! Simulation and decoding toolkit for heterogeneous rotated surface codes.
//!
//! The crate builds rotated surface codes (CSS or XY-deformed), assigns
//! biased Pauli channels to two strategically placed qubit types, decodes
//! with an exact or tensor-network maximum-likelihood decoder, and estimates
//! logical failure rates, improvement ratios, logical bias, and thresholds.

pub mod code;
pub mod decoder;
pub mod noise;
pub mod tensor;
pub mod pauli;

pub use code::{build_css, stabilizer_ratio, CodeError, CodeInstance, Deformation, Region};
pub use pauli::{Letter, PauliError, PauliOp};
