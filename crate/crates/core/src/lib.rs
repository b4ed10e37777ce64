//! Numerics for N-functions, fractional Orlicz–Sobolev energies and the
//! singular problem (−Δ_Φ)^s u = u^{−γ} on a bounded grid domain.
//!
//! Everything is generic over the scalar type; the aliases below fix `f64`.

pub mod error;
pub mod frac;
pub mod linalg;
pub mod nfunc;
pub mod psi;
pub mod quad;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use nfunc::{NFunction, NFunctionKind, NFunctionSpec, SampledFunction, YoungFunction};
pub use scalar::Scalar;

pub type NFunction64 = NFunction<f64>;
pub type NFunction32 = NFunction<f32>;
pub type SampledFunction64 = SampledFunction<f64>;
