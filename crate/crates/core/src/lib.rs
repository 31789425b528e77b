//! Monte Carlo laboratory for a diffusion in a drifted Brownian potential and
//! for the two-dimensional stable Lévy process describing its local-time
//! limits.
//!
//! The crate is organised bottom-up:
//!
//! * [`specialfn`]: analytic oracles (Γ, I_ν, the Laplace transform of R_κ,
//!   Mittag-Leffler and arcsine laws, the stable tail ν).
//! * [`stats`]: ECDFs, KS and chi-square tests, reproducible RNG streams.
//! * [`environment`]: the potential W_κ and its functionals A(r), A_∞.
//! * [`extrema`]: h-extrema and the h_t-valleys.
//! * [`diffusion`]: the diffusion in the potential and its local-time field.
//! * [`renewal`]: Bessel-process functionals and the renewal tuples.
//! * [`levy`]: the limiting Lévy process and its passage functionals.
//! * [`experiment`]: JSON configs, the runner, manifests and comparison.
//! * [`verify`]: the acceptance checks.
//!
//! The [`guide`] module carries the book chapters from `book/`.

pub mod diffusion;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod extrema;
pub mod levy;
pub mod renewal;
pub mod specialfn;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

/// The guide from `book/`, compiled here so its examples run as doc-tests.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/environment.md")]
    pub mod environment {}
    #[doc = include_str!("../../../book/src/valleys.md")]
    pub mod valleys {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    pub mod diffusion {}
    #[doc = include_str!("../../../book/src/renewal.md")]
    pub mod renewal {}
    #[doc = include_str!("../../../book/src/levy.md")]
    pub mod levy {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
}
