//! Periodic traveling waves of `u_t + (f(u))_x - (M u)_x = 0` and of its
//! regularized counterpart: construction by Newton iteration or closed form,
//! spectral checks on the linearized operator, constrained-energy stability
//! criteria, and direct time evolution as a falsification test.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod linop;
pub mod output;
pub mod spectral;
pub mod stability;
pub mod waves;

pub use elliptic::EllipticModulus;
pub use error::{Error, Result};
pub use evolution::{EvolutionConfig, EvolutionTrace, Integrator, LyapunovParams};
pub use linop::{LinearizedOperator, SpectralReport};
pub use spectral::{DispersionSymbol, Field, PeriodicGrid, SymbolKind};
pub use stability::{Certification, Conclusion, StabilityVerdict, SurfaceDerivatives};
pub use waves::{Constraint, Equation, Nonlinearity, SolveOptions, TravelingWave, Variant, WaveFamily};
