//! Streaming empirical estimators for batches of state vectors: mean,
//! covariance, density operator, and characteristic function, with plug-in
//! standard errors.
//!
//! Accumulators are mergeable values, so shards accumulated independently and
//! merged give the same result as one pass up to floating-point
//! reassociation. Weighted batches use self-normalized importance weighting
//! throughout (divide by the weight sum, never by `n`).

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use thiserror::Error;

use crate::measure::WeightedSample;
use crate::spectral::{trace_norm, ComplexMatrix, DensityOperator, SpectralError, StateVector, SPHERE_TOL};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("estimator needs at least {needed} samples, has {got}")]
    EmptyBatch { needed: u64, got: u64 },
    #[error("sample norm deviates from 1 by {max_deviation:e}, beyond {SPHERE_TOL:e}")]
    NotOnSphere { max_deviation: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Running sums for one batch: count, weights, vector sum, and the uncentered
/// outer-product sum. The centered covariance is formed at read-out time.
#[derive(Clone, Debug)]
pub struct Accumulator {
    dim: usize,
    count: u64,
    weight_sum: f64,
    weight_sq_sum: f64,
    vector_sum: Array1<Complex64>,
    outer_sum: ComplexMatrix,
    max_sphere_dev: f64,
}

impl Accumulator {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            dim,
            count: 0,
            weight_sum: 0.0,
            weight_sq_sum: 0.0,
            vector_sum: Array1::zeros(dim),
            outer_sum: Array2::zeros((dim, dim)),
            max_sphere_dev: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// Generic `1/sqrt(n)` error scale for the batch.
    pub fn se_scale(&self) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            1.0 / (self.count as f64).sqrt()
        }
    }

    pub fn push(&mut self, psi: &StateVector) -> Result<(), EstimatorError> {
        self.push_with_weight(psi, 1.0)
    }

    pub fn push_weighted(&mut self, sample: &WeightedSample) -> Result<(), EstimatorError> {
        self.push_with_weight(&sample.vector, sample.weight)
    }

    fn push_with_weight(&mut self, psi: &StateVector, weight: f64) -> Result<(), EstimatorError> {
        if psi.dim() != self.dim {
            return Err(EstimatorError::DimMismatch { expected: self.dim, got: psi.dim() });
        }
        self.count += 1;
        self.weight_sum += weight;
        self.weight_sq_sum += weight * weight;
        self.max_sphere_dev = self.max_sphere_dev.max((psi.norm() - 1.0).abs());
        let c = psi.components();
        for i in 0..self.dim {
            self.vector_sum[i] += weight * c[i];
            for j in 0..self.dim {
                self.outer_sum[[i, j]] += weight * c[i] * c[j].conj();
            }
        }
        Ok(())
    }

    /// Merge another accumulator; equals accumulating the concatenated batch
    /// up to floating-point reassociation.
    pub fn merge(&mut self, other: &Accumulator) -> Result<(), EstimatorError> {
        if other.dim != self.dim {
            return Err(EstimatorError::DimMismatch { expected: self.dim, got: other.dim });
        }
        self.count += other.count;
        self.weight_sum += other.weight_sum;
        self.weight_sq_sum += other.weight_sq_sum;
        self.max_sphere_dev = self.max_sphere_dev.max(other.max_sphere_dev);
        self.vector_sum += &other.vector_sum;
        self.outer_sum += &other.outer_sum;
        Ok(())
    }

    /// Weight-normalized empirical mean.
    pub fn mean(&self) -> Result<StateVector, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::EmptyBatch { needed: 1, got: 0 });
        }
        let w = self.weight_sum;
        Ok(StateVector::from_array_unchecked(self.vector_sum.mapv(|z| z / w)))
    }

    /// Uncentered second-moment matrix; its trace is the weighted mean of
    /// `||psi||^2` exactly.
    pub fn second_moment(&self) -> Result<ComplexMatrix, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::EmptyBatch { needed: 1, got: 0 });
        }
        Ok(symmetrized(self.outer_sum.mapv(|z| z / self.weight_sum)))
    }

    /// Centered empirical covariance.
    pub fn covariance(&self) -> Result<ComplexMatrix, EstimatorError> {
        if self.count < 2 {
            return Err(EstimatorError::EmptyBatch { needed: 2, got: self.count });
        }
        let mean = self.mean()?;
        let mut cov = self.outer_sum.mapv(|z| z / self.weight_sum);
        let m = mean.components();
        for i in 0..self.dim {
            for j in 0..self.dim {
                cov[[i, j]] -= m[i] * m[j].conj();
            }
        }
        Ok(symmetrized(cov))
    }

    /// Empirical density operator `(1/W) sum w_i |psi_i><psi_i|`; requires
    /// every accumulated sample on the unit sphere.
    pub fn density_operator(&self) -> Result<ComplexMatrix, EstimatorError> {
        if self.count == 0 {
            return Err(EstimatorError::EmptyBatch { needed: 1, got: 0 });
        }
        if self.max_sphere_dev > SPHERE_TOL {
            return Err(EstimatorError::NotOnSphere { max_deviation: self.max_sphere_dev });
        }
        self.second_moment()
    }

    /// Full report; includes the trace distance to a reference state when one
    /// is supplied.
    pub fn report(
        &self,
        reference: Option<&DensityOperator>,
    ) -> Result<EstimatorReport, EstimatorError> {
        let mean_hat = self.mean()?;
        let cov_hat = if self.count >= 2 { Some(self.covariance()?) } else { None };
        let rho_hat = self.second_moment()?;
        let ref_distance = match reference {
            Some(rho) => {
                if rho.dim() != self.dim {
                    return Err(EstimatorError::DimMismatch {
                        expected: self.dim,
                        got: rho.dim(),
                    });
                }
                Some(trace_norm(&(&rho_hat - &rho.matrix()))?)
            }
            None => None,
        };
        Ok(EstimatorReport {
            n: self.count,
            weight_sum: self.weight_sum,
            se_scale: self.se_scale(),
            mean_hat,
            cov_hat,
            rho_hat,
            on_sphere: self.max_sphere_dev <= SPHERE_TOL,
            ref_distance,
        })
    }
}

fn symmetrized(m: ComplexMatrix) -> ComplexMatrix {
    crate::spectral::HermitianOperator::symmetrize(m).entries().clone()
}

/// Empirical summary of one batch.
#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub n: u64,
    pub weight_sum: f64,
    pub se_scale: f64,
    pub mean_hat: StateVector,
    /// Centered covariance; absent for single-sample batches.
    pub cov_hat: Option<ComplexMatrix>,
    /// Uncentered second moment; the empirical density operator for sphere
    /// batches.
    pub rho_hat: ComplexMatrix,
    pub on_sphere: bool,
    pub ref_distance: Option<f64>,
}

/// Empirical characteristic function `(1/n) sum exp(i Re<psi_i, psi>)`.
pub fn empirical_char_fn(
    batch: &[StateVector],
    psi: &StateVector,
) -> Result<Complex64, EstimatorError> {
    if batch.is_empty() {
        return Err(EstimatorError::EmptyBatch { needed: 1, got: 0 });
    }
    let mut sum = Complex64::ZERO;
    for sample in batch {
        if sample.dim() != psi.dim() {
            return Err(EstimatorError::DimMismatch { expected: psi.dim(), got: sample.dim() });
        }
        sum += Complex64::from_polar(1.0, sample.inner(psi).re);
    }
    Ok(sum / batch.len() as f64)
}

/// Self-normalized weighted empirical characteristic function.
pub fn empirical_char_fn_weighted(
    batch: &[WeightedSample],
    psi: &StateVector,
) -> Result<Complex64, EstimatorError> {
    if batch.is_empty() {
        return Err(EstimatorError::EmptyBatch { needed: 1, got: 0 });
    }
    let mut sum = Complex64::ZERO;
    let mut weight_sum = 0.0;
    for sample in batch {
        if sample.vector.dim() != psi.dim() {
            return Err(EstimatorError::DimMismatch {
                expected: psi.dim(),
                got: sample.vector.dim(),
            });
        }
        sum += sample.weight * Complex64::from_polar(1.0, sample.vector.inner(psi).re);
        weight_sum += sample.weight;
    }
    Ok(sum / weight_sum)
}

/// Accumulate a plain batch.
pub fn accumulate(dim: usize, batch: &[StateVector]) -> Result<Accumulator, EstimatorError> {
    let mut acc = Accumulator::new(dim);
    for psi in batch {
        acc.push(psi)?;
    }
    Ok(acc)
}

/// Accumulate a weighted batch.
pub fn accumulate_weighted(
    dim: usize,
    batch: &[WeightedSample],
) -> Result<Accumulator, EstimatorError> {
    let mut acc = Accumulator::new(dim);
    for sample in batch {
        acc.push_weighted(sample)?;
    }
    Ok(acc)
}
