//! Fractional Brownian motion with `H <= 1/2`: Volterra synthesis,
//! fractional calculus, the Girsanov coupling of two solutions of
//! `dX = b(t, X) dt + dB^H`, Monte Carlo checks of the resulting Harnack
//! inequalities and the Bismut-type derivative weight.

pub mod bismut;
pub mod error;
pub mod fbm;
pub mod fraccalc;
pub mod girsanov;
pub mod harnack;
pub mod mc;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod specialfn;

pub use error::{Error, Result};
pub use fbm::{FbmPath, HurstParam, TimeGrid, WienerIncrements};
pub use fraccalc::{SampledPath, Sampling};
pub use bismut::{BismutWeight, DerivativeEstimate, DerivativeQuery};
pub use girsanov::GirsanovWeight;
pub use harnack::{ConstantVariant, HarnackQuery, HarnackReport, TestFunction, Verdict};
pub use mc::Estimate;
pub use sde::{CoupledPaths, CouplingVariant, DriftFamily, DriftSpec, SolutionPath};
pub use rng::NoiseStream;
pub use specialfn::AccuracyBudget;
