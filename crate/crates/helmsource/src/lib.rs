//! Reconstruction of compactly supported source terms of the Helmholtz
//! equation from multi-frequency boundary measurements.
//!
//! The forward map is the radiating-field integral
//!
//! ```text
//! u_k(x) = ∫ Φ_k(x, y) S(y) dy,
//! ```
//!
//! where `Φ_k` is the free-space fundamental solution. Sampling `u_k` (and
//! its normal derivative) at boundary points for a sweep of wavenumbers
//! turns source recovery into a linear least-squares problem over a frozen
//! feature basis, stabilized by Tikhonov regularization. Two adaptive
//! layers sit on top:
//!
//! * an iteratively refined quadrature mesh that concentrates integration
//!   points where the current reconstruction is large or steep (`ia_rfm`),
//! * a morphology-driven basis enhancement that injects shape-aware
//!   features (sigmoid discs, boxes, Gaussian bumps, offset contours, ...)
//!   in detected critical regions (`ma_rfm`).
//!
//! Module map:
//!
//! * [`specfun`] — Bessel/Hankel functions and the Helmholtz kernels.
//! * [`quadmesh`] — Gauss–Legendre rules on a hierarchy of boxes.
//! * [`basis`] — random features, partitions of unity, morphology bases.
//! * [`assembly`] — the stacked real measurement matrix and data vector.
//! * [`solver`] — SVD-based Tikhonov solves, L-curve, error bounds.
//! * [`pipeline`] — the two-phase adaptive reconstruction loops.
//! * [`harness`] — synthetic data, reference sources, experiment driver.
//!
//! The user guide under `book/` walks through the same material chapter by
//! chapter; its code snippets compile and run as doc-tests via [`guide`].

pub mod assembly;
pub mod basis;
pub mod guide;
pub mod harness;
pub mod pipeline;
pub mod quadmesh;
pub mod solver;
pub mod specfun;

mod point;

pub use point::{Dim, Point};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a special function.
    #[error("domain error in {what}: {msg}")]
    Domain { what: &'static str, msg: String },

    /// Kernel evaluated closer to its singularity than the configured clip.
    #[error("kernel singularity: |x - y| = {r:.3e} <= r_min = {r_min:.3e}")]
    Singularity { r: f64, r_min: f64 },

    /// Invalid mesh construction or refinement request.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// Invalid basis construction (empty detection region, bad windows, ...).
    #[error("basis error: {0}")]
    Basis(String),

    /// Offset contour failed a geometric sanity check.
    #[error("contour error: {0}")]
    Contour(String),

    /// Matrix/vector shape or data-coverage mismatch during assembly.
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Least-squares or regularization failure.
    #[error("solver error: {0}")]
    Solver(String),

    /// Posterior detection produced no usable region.
    #[error("detection error: {0}")]
    Detection(String),

    /// Experiment configuration rejected, with the offending field path.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// Data generation failure.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
