//! Construction, exact sampling, and Monte Carlo verification of Gaussian
//! adjusted projected (GAP) measures — also known as Scrooge measures — over
//! quantum state vectors.
//!
//! For a density operator `rho` (positive, unit trace), `GAP(rho)` is the
//! distribution on the unit sphere obtained from the mean-zero Gaussian
//! measure with covariance `rho` by reweighting with `||psi||^2` and
//! projecting to the sphere. It is the unique such measure whose density
//! operator is `rho`, which makes it the natural thermal-equilibrium
//! distribution of wave functions when `rho` is a Gibbs state.
//!
//! The crate is organized around that pipeline:
//!
//! * [`spectral`] — complex Hermitian linear algebra: validation, a Jacobi
//!   eigensolver, thermal states, trace norms, support restriction.
//! * [`measure`] — Gaussian and GAP sampling (an exact size-biased mixture
//!   sampler plus an independent importance-reweighting sampler), closed-form
//!   densities and characteristic functions, covariance-spectrum truncation.
//! * [`estimator`] — mergeable streaming estimators for empirical means,
//!   covariances, density operators, and characteristic functions.
//! * [`convergence`] — continuity experiments for `rho -> GAP(rho)` in trace
//!   norm, closed-form characteristic-function gaps, tail compactness, and an
//!   exact counterexample for the adjustment map.
//! * [`io`] — the on-disk formats (matrix JSON, batch files, reports).
//!
//! Every random draw is addressed by a `(seed, index)` sub-stream, so any
//! batch is bit-reproducible regardless of scheduling.

pub mod convergence;
pub mod estimator;
pub mod io;
pub mod measure;
pub mod spectral;

pub use estimator::{accumulate, accumulate_weighted, Accumulator, EstimatorReport};
pub use measure::{
    sample_g, sample_g_batch, sample_gap_mixture, sample_gap_mixture_batch,
    sample_gap_reweight, GaussianMeasureSpec, RandomStream, WeightedSample,
};
pub use spectral::{
    eigh, trace_norm, ComplexMatrix, DensityOperator, HermitianOperator,
    SpectralDecomposition, StateVector, SupportRestriction,
};
