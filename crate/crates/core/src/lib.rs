//! Simulation and numerical analysis of stick-fragmentation processes and
//! their first-digit (Benford) behaviour.
//!
//! * [`significand`]: significands, the Benford law, `P_N(s)` and digit histograms
//! * [`density`], [`mellin`]: cut densities, Mellin transforms and convergence bounds
//! * [`frag`]: the continuous fragmentation models and the fixed-proportion spectrum
//! * [`discrete`]: integer-length fragmentation with stopping sequences
//! * [`determinant`]: determinant-expansion terms and fixed-point statistics
//! * [`stats`]: goodness-of-fit and equidistribution measurements

pub mod density;
pub mod determinant;
pub mod discrete;
pub mod error;
pub mod frag;
pub mod mellin;
pub mod quadrature;
pub mod rng;
pub mod significand;
pub mod special;
pub mod stats;

pub use density::{CutDensity, DensitySpec, LevelDensities};
pub use error::{Error, Result};
pub use significand::{BenfordReference, DigitHistogram, LogLength};
