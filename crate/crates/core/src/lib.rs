//! Numerical laboratory for reconstruction-based self-supervised learning.
//!
//! The crate models the two-view setting where an auxiliary view decomposes as
//! `X2 = C(X1) Y + N` for an encoding function `C`, a one-hot style label
//! vector `Y` and conditionally mean-zero noise `N`. On top of that generative
//! family it provides
//!
//! * exact-matching checks: whether a linear map of the pretext optimum
//!   `psi(x) = C(x) E[Y | X1 = x]` can reproduce the posterior exactly,
//! * low-rank redundancy estimation: the spectral tail `eps_s` measuring how
//!   well the centered encoding acting on the posterior is captured by `s`
//!   shared directions, with an ALS cross-check and a Gaussian closed form,
//! * downstream ridge / min-norm regression with risk reports, effective
//!   dimension and cross-validated shrinkage,
//! * a small deterministic MLP for learned pretext representations,
//! * diagnostics tying the empirical covariances of the ideal and low-rank
//!   features back to the redundancy level, plus risk-vs-sample-size sweeps,
//! * a seeded experiment harness comparing SSL pipelines against supervised
//!   baselines, with CSV/JSON export.
//!
//! Everything is deterministic given explicit seeds; all randomness flows
//! through ChaCha generators seeded per trial.

pub mod experiment;
pub mod genmodel;
pub mod linalg;
pub mod lowrank;
pub mod matching;
pub mod mlp;
pub mod regress;
pub mod seeding;
pub mod theory;

mod error;

pub use error::{Error, Result};
pub use linalg::{Matrix, SpectralSummary};
