//! Contrast analysis of speckled imagery under the G⁰ law.
//!
//! The crate is organized bottom-up:
//!
//! - [`specfun`]: log-gamma, digamma, ₂F₁, the Kolmogorov law, χ² tail.
//! - [`quadrature`]: adaptive Gauss–Kronrod on finite intervals and `(0, ∞)`.
//! - [`g0`]: the G⁰ law itself (density, distribution, moments, sampling).
//! - [`estimation`]: maximum-likelihood fitting with known looks.
//! - [`divergence`]: (h,φ)-divergences, their tests, and the analytic KS distance.
//! - [`kstest`]: the two-sample Kolmogorov–Smirnov test on raw data.
//! - [`montecarlo`]: contamination, scenario grids, size/power/estimator studies.
//!
//! ```
//! use speckle::g0::G0Params;
//!
//! let law = G0Params::new(-2.0, 1.0, 1.0)?;
//! assert!((law.cdf(1.0)? - 0.75).abs() < 1e-12);
//! # Ok::<(), speckle::Error>(())
//! ```

pub mod divergence;
pub mod error;
pub mod estimation;
pub mod g0;
pub mod kstest;
pub mod montecarlo;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};

pub use divergence::{DistanceKind, ReferenceLaw, TestResult};
pub use estimation::{FitOptions, FitResult, StartingPoint};
pub use g0::{ExtendedReal, FisherParams, G0Params, LogCumulants, Sample};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/contrast.md")]
    mod contrast {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
