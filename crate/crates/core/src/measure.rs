//! Gaussian measures on `C^d` and their adjusted/projected relatives.
//!
//! `G(rho)` is the mean-zero Gaussian measure with covariance `rho`; the
//! adjusted measure reweights by `||psi||^2` and projecting to the unit sphere
//! yields the GAP measure. Two independent sampling routes are provided:
//!
//! * an exact size-biased mixture sampler (pick eigenindex `n` with
//!   probability `p_n`, give that coordinate a shape-2 Gamma squared radius,
//!   all others plain complex Gaussians, project), and
//! * a self-normalized importance reweighting sampler (draw from `G(rho)`,
//!   project, keep `||psi||^2` as the weight).
//!
//! All draws consume counter-based sub-streams `(seed, index)`, so batches are
//! reproducible independent of execution order.

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spectral::{
    DensityOperator, SpectralDecomposition, SpectralError, StateVector, SupportRestriction,
    TRACE_TOL,
};

/// Norm below which a vector cannot be projected to the sphere.
pub const PROJECT_MIN_NORM: f64 = 1e-300;
/// Largest orthogonal component tolerated when evaluating a density on the
/// support subspace.
pub const SUPPORT_RESIDUAL_TOL: f64 = 1e-8;
/// Default cap on the truncation dimension search.
pub const DEFAULT_TRUNCATION_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("covariance eigenvalue {value:e} is negative")]
    NegativeVariance { value: f64 },
    #[error("vector has orthogonal component {residual:e} outside the support")]
    OffSupport { residual: f64 },
    #[error("cannot project the zero vector to the unit sphere")]
    ZeroVector,
    #[error("tail bound never reached {epsilon:e} within {cap} terms")]
    TailBoundTooLoose { epsilon: f64, cap: usize },
    #[error("Gaussian spec has nonzero mean (norm {norm:e}); GAP requires mean zero")]
    NonzeroMean { norm: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Handle to one reproducible random sub-stream.
///
/// A `(seed, index)` pair names a ChaCha8 keystream: the seed keys the cipher
/// and the index selects the stream, so distinct pairs are statistically
/// independent and any pair can be reopened at will. Batch samplers give
/// sample `i` the sub-stream `(seed, i)`, which fixes batch contents no matter
/// how the work is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    index: u64,
}

impl RandomStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// Mix a purpose tag into a seed so that different parts of an experiment
/// (reference batch, per-leg batches, panels) use unrelated streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A Gaussian measure identified by its mean and covariance spectral data.
#[derive(Clone, Debug)]
pub struct GaussianMeasureSpec {
    mean: StateVector,
    covariance: SpectralDecomposition,
}

impl GaussianMeasureSpec {
    pub fn new(
        mean: StateVector,
        covariance: SpectralDecomposition,
    ) -> Result<Self, MeasureError> {
        if mean.dim() != covariance.dim() {
            return Err(MeasureError::DimMismatch {
                expected: covariance.dim(),
                got: mean.dim(),
            });
        }
        if let Some(&value) = covariance.eigenvalues().iter().find(|&&p| p < 0.0) {
            return Err(MeasureError::NegativeVariance { value });
        }
        Ok(Self { mean, covariance })
    }

    /// The mean-zero Gaussian `G(rho)` whose covariance is a density operator.
    pub fn centered(rho: &DensityOperator) -> Self {
        Self {
            mean: StateVector::zero(rho.dim()),
            covariance: rho.spectral().clone(),
        }
    }

    pub fn mean(&self) -> &StateVector {
        &self.mean
    }

    pub fn covariance(&self) -> &SpectralDecomposition {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }
}

/// Recover the GAP base density operator from a Gaussian spec.
///
/// GAP measures arise only from mean-zero Gaussians with unit-trace
/// covariance; anything else is rejected.
pub fn gap_base_from_gaussian(spec: &GaussianMeasureSpec) -> Result<DensityOperator, MeasureError> {
    let norm = spec.mean().norm();
    if norm > 0.0 {
        return Err(MeasureError::NonzeroMean { norm });
    }
    let trace = spec.covariance().trace();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(MeasureError::Spectral(SpectralError::TraceNotOne { trace }));
    }
    Ok(DensityOperator::from_spectral(spec.covariance().clone())?)
}

/// A unit vector together with its importance weight `||psi||^2`.
#[derive(Clone, Debug)]
pub struct WeightedSample {
    pub vector: StateVector,
    pub weight: f64,
}

/// One complex Gaussian of the given variance: real and imaginary parts are
/// independent normals of variance `variance/2`.
///
/// Drawn in polar form from two uniforms — the squared radius is exponential
/// with mean `variance`, the phase uniform — so the draw is branch-free and
/// consumes a fixed amount of the stream. Variance zero yields exactly zero.
pub fn sample_complex_gaussian(stream: &RandomStream, variance: f64) -> Complex64 {
    assert!(variance.is_finite() && variance >= 0.0, "variance must be finite and nonnegative");
    draw_complex_gaussian(&mut stream.rng(), variance)
}

pub(crate) fn draw_complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let radius = (-variance * (1.0 - u1).ln()).sqrt();
    Complex64::from_polar(radius, std::f64::consts::TAU * u2)
}

/// The `|z|^2`-size-biased complex Gaussian: squared radius Gamma(shape 2,
/// scale `variance`) as a sum of two inverse-CDF exponentials, phase uniform.
fn draw_size_biased_coordinate(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let radius_sq = variance * (-(1.0 - u1).ln() - (1.0 - u2).ln());
    Complex64::from_polar(radius_sq.sqrt(), std::f64::consts::TAU * u3)
}

fn assemble_in_eigenbasis(
    mean: Option<&StateVector>,
    covariance: &SpectralDecomposition,
    coordinates: impl Iterator<Item = Complex64>,
) -> StateVector {
    let d = covariance.dim();
    let mut psi: Array1<Complex64> = match mean {
        Some(m) => m.components().clone(),
        None => Array1::zeros(d),
    };
    for (z, (_, phi)) in coordinates.zip(covariance.pairs()) {
        if z != Complex64::ZERO {
            psi.iter_mut().zip(phi.components().iter()).for_each(|(a, &b)| *a += z * b);
        }
    }
    StateVector::from_array_unchecked(psi)
}

/// One draw of `Psi^G = psi_0 + sum_n Z_n phi_n` with independent `Z_n` of
/// variance `p_n`. Coordinates with `p_n = 0` contribute exactly zero and
/// consume nothing from the stream.
pub fn sample_g(spec: &GaussianMeasureSpec, stream: &RandomStream) -> StateVector {
    let mut rng = stream.rng();
    draw_g(spec, &mut rng)
}

fn draw_g(spec: &GaussianMeasureSpec, rng: &mut ChaCha8Rng) -> StateVector {
    let coords: Vec<Complex64> = spec
        .covariance()
        .eigenvalues()
        .iter()
        .map(|&p| if p == 0.0 { Complex64::ZERO } else { draw_complex_gaussian(rng, p) })
        .collect();
    assemble_in_eigenbasis(Some(spec.mean()), spec.covariance(), coords.into_iter())
}

/// Projection `P(psi) = psi/||psi||` to the unit sphere.
pub fn project(psi: &StateVector) -> Result<StateVector, MeasureError> {
    let norm = psi.norm();
    if norm < PROJECT_MIN_NORM {
        return Err(MeasureError::ZeroVector);
    }
    Ok(StateVector::from_array_unchecked(psi.components().mapv(|z| z / norm)))
}

/// One exact draw from `GAP(rho)` by the size-biased mixture.
///
/// Select eigenindex `n` with probability `p_n`, replace that coordinate's
/// law by the `|z|^2`-biased Gaussian, keep every other coordinate plain, and
/// project. The stream is consumed in a fixed order (mixture index first,
/// then coordinates in eigenbasis order), so draws are reproducible.
pub fn sample_gap_mixture(rho: &DensityOperator, stream: &RandomStream) -> StateVector {
    let mut rng = stream.rng();
    draw_gap_mixture(rho, &mut rng)
}

fn draw_gap_mixture(rho: &DensityOperator, rng: &mut ChaCha8Rng) -> StateVector {
    let probabilities = rho.eigenvalues();
    let u: f64 = rng.random();
    let mut selected = None;
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (n, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            last_positive = n;
            cumulative += p;
            if u < cumulative {
                selected = Some(n);
                break;
            }
        }
    }
    // Rounding can leave the cumulative sum a hair below 1.
    let selected = selected.unwrap_or(last_positive);

    let coords: Vec<Complex64> = probabilities
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            if p == 0.0 {
                Complex64::ZERO
            } else if m == selected {
                draw_size_biased_coordinate(rng, p)
            } else {
                draw_complex_gaussian(rng, p)
            }
        })
        .collect();
    let psi = assemble_in_eigenbasis(None, rho.spectral(), coords.into_iter());
    project(&psi).expect("biased coordinate is almost surely nonzero")
}

/// A batch of exact `GAP(rho)` draws; sample `i` uses sub-stream `(seed, i)`.
pub fn sample_gap_mixture_batch(
    rho: &DensityOperator,
    seed: u64,
    batch_size: usize,
) -> Vec<StateVector> {
    (0..batch_size)
        .map(|i| sample_gap_mixture(rho, &RandomStream::new(seed, i as u64)))
        .collect()
}

/// A batch of `G(spec)` draws; sample `i` uses sub-stream `(seed, i)`.
pub fn sample_g_batch(
    spec: &GaussianMeasureSpec,
    seed: u64,
    batch_size: usize,
) -> Vec<StateVector> {
    (0..batch_size)
        .map(|i| sample_g(spec, &RandomStream::new(seed, i as u64)))
        .collect()
}

/// Importance-reweighting draws targeting `GAP(rho)`: each `G(rho)` draw is
/// projected to the sphere and carries weight `||psi||^2`. Self-normalized
/// weighted averages over the batch estimate GAP expectations; the batch mean
/// weight tends to 1. A zero draw (probability zero) gets weight zero.
pub fn sample_gap_reweight(
    rho: &DensityOperator,
    seed: u64,
    batch_size: usize,
) -> Vec<WeightedSample> {
    let spec = GaussianMeasureSpec::centered(rho);
    (0..batch_size)
        .map(|i| {
            let psi = sample_g(&spec, &RandomStream::new(seed, i as u64));
            match project(&psi) {
                Ok(vector) => WeightedSample { vector, weight: psi.norm_sq() },
                Err(_) => WeightedSample {
                    vector: StateVector::basis(rho.dim(), 0),
                    weight: 0.0,
                },
            }
        })
        .collect()
}

fn support_coordinates(
    support: &SupportRestriction,
    psi: &StateVector,
) -> Result<Vec<Complex64>, MeasureError> {
    if psi.dim() != support.ambient_dim() {
        return Err(MeasureError::DimMismatch {
            expected: support.ambient_dim(),
            got: psi.dim(),
        });
    }
    let coords: Vec<Complex64> = support.basis().iter().map(|phi| phi.inner(psi)).collect();
    // Explicit remainder; the difference-of-norms shortcut cancels badly.
    let mut remainder = psi.components().clone();
    for (z, phi) in coords.iter().zip(support.basis()) {
        remainder
            .iter_mut()
            .zip(phi.components().iter())
            .for_each(|(r, &b)| *r -= z * b);
    }
    let residual = remainder.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if residual > SUPPORT_RESIDUAL_TOL {
        return Err(MeasureError::OffSupport { residual });
    }
    Ok(coords)
}

/// Log of the `G(rho)` density on the support subspace relative to Lebesgue
/// measure there: `-sum |<phi_n,psi>|^2/p_n - k ln(pi) - sum ln(p_n)`.
///
/// Exposed separately because the normalizer underflows `exp` once the rank
/// is a couple hundred.
pub fn log_g_density(
    support: &SupportRestriction,
    psi: &StateVector,
) -> Result<f64, MeasureError> {
    let coords = support_coordinates(support, psi)?;
    let mut log_density = -(support.k() as f64) * std::f64::consts::PI.ln();
    for (z, &p) in coords.iter().zip(support.eigenvalues()) {
        log_density -= z.norm_sqr() / p + p.ln();
    }
    Ok(log_density)
}

/// The `G(rho)` density `exp(-<psi|rho_+^{-1}|psi>) / (pi^k det rho_+)`.
pub fn g_density(support: &SupportRestriction, psi: &StateVector) -> Result<f64, MeasureError> {
    Ok(log_g_density(support, psi)?.exp())
}

/// The adjusted density `||psi||^2 g(psi)`.
pub fn ga_density(support: &SupportRestriction, psi: &StateVector) -> Result<f64, MeasureError> {
    Ok(psi.norm_sq() * g_density(support, psi)?)
}

/// Closed-form Gaussian characteristic function
/// `E exp(i Re<phi, psi>) = exp(i Re<psi_0, psi> - <psi, C psi>/4)`.
///
/// The quarter comes from the covariance convention `<phi, C phi> = E|<phi,
/// Z>|^2`: each linear functional `Re<Z, psi>` is a real normal of variance
/// `<psi, C psi>/2`, and the real characteristic function contributes another
/// half.
pub fn char_fn_gaussian(spec: &GaussianMeasureSpec, psi: &StateVector) -> Complex64 {
    assert_eq!(spec.dim(), psi.dim(), "characteristic function dimension mismatch");
    let phase = spec.mean().inner(psi).re;
    let decay = 0.25 * spec.covariance().quadratic_form(psi);
    Complex64::from_polar((-decay).exp(), phase)
}

/// A trace-class eigenvalue sequence `n -> p_n` (1-indexed) with a certified
/// upper bound on its tails.
pub trait EigenvalueSequence {
    fn eigenvalue(&self, n: usize) -> f64;
    /// Upper bound on `sum_{m > n} p_m`; nonincreasing in `n`.
    fn tail_bound(&self, n: usize) -> f64;
    fn total(&self) -> f64;
}

/// `p_n = first * ratio^{n-1}` with exact geometric tails.
#[derive(Clone, Copy, Debug)]
pub struct GeometricSequence {
    first: f64,
    ratio: f64,
}

impl GeometricSequence {
    pub fn new(first: f64, ratio: f64) -> Self {
        assert!(first > 0.0 && (0.0..1.0).contains(&ratio));
        Self { first, ratio }
    }

    /// The geometric sequence with the given ratio normalized so the total
    /// is 1; covers harmonic-oscillator spectra `p_n` proportional to
    /// `exp(-beta n)` via `ratio = exp(-beta)`.
    pub fn normalized(ratio: f64) -> Self {
        assert!((0.0..1.0).contains(&ratio) && ratio > 0.0);
        Self { first: 1.0 - ratio, ratio }
    }
}

impl EigenvalueSequence for GeometricSequence {
    fn eigenvalue(&self, n: usize) -> f64 {
        assert!(n >= 1);
        self.first * self.ratio.powi(n as i32 - 1)
    }

    fn tail_bound(&self, n: usize) -> f64 {
        self.total() * self.ratio.powi(n as i32)
    }

    fn total(&self) -> f64 {
        self.first / (1.0 - self.ratio)
    }
}

/// Result of truncating an infinite covariance spectrum.
#[derive(Clone, Debug)]
pub struct Truncation {
    /// Mean-zero Gaussian spec on `C^N`, diagonal in the standard basis.
    pub spec: GaussianMeasureSpec,
    /// Number of retained eigenvalues.
    pub retained: usize,
    /// Certified bound on the discarded tail mass.
    pub achieved_tail: f64,
}

/// Truncate a trace-class spectrum at the smallest `N` whose certified tail
/// is at most `epsilon`. The retained eigenvalues become a diagonal
/// mean-zero Gaussian spec in the standard basis of `C^N`.
pub fn truncate(
    seq: &dyn EigenvalueSequence,
    epsilon: f64,
    cap: usize,
) -> Result<Truncation, MeasureError> {
    assert!(epsilon > 0.0 && epsilon < seq.total(), "need 0 < epsilon < total");
    let mut retained = None;
    for n in 1..=cap {
        if seq.tail_bound(n) <= epsilon {
            retained = Some(n);
            break;
        }
    }
    let retained = retained.ok_or(MeasureError::TailBoundTooLoose { epsilon, cap })?;
    let eigenvalues: Vec<f64> = (1..=retained).map(|n| seq.eigenvalue(n)).collect();
    let eigenvectors = (0..retained).map(|i| StateVector::basis(retained, i)).collect();
    let covariance = SpectralDecomposition::from_parts(eigenvalues, eigenvectors)
        .map_err(MeasureError::Spectral)?;
    let spec = GaussianMeasureSpec::new(StateVector::zero(retained), covariance)?;
    Ok(Truncation { spec, retained, achieved_tail: seq.tail_bound(retained) })
}
