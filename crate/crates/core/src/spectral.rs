//! Finite-dimensional complex Hermitian linear algebra.
//!
//! Everything needed to turn a raw matrix into sampler-ready spectral data:
//! validation, a cyclic Jacobi eigensolver, thermal (Gibbs) states, trace
//! norms, and restriction to the positive spectral subspace.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex matrix, row-major.
pub type ComplexMatrix = Array2<Complex64>;

/// Tolerance for membership in the unit sphere.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tolerance on the trace of a density operator before renormalization.
pub const TRACE_TOL: f64 = 1e-10;
/// Negative eigenvalues of magnitude up to this are rounding noise and get
/// clamped to zero; anything more negative is a genuine positivity failure.
pub const EIGENVALUE_CLAMP: f64 = 1e-10;
/// Default cutoff below which an eigenvalue is treated as outside the support.
pub const DEFAULT_SUPPORT_CUTOFF: f64 = 1e-12;
/// Norm tolerance for batch samples that are supposed to live on the sphere.
pub const SPHERE_TOL: f64 = 1e-8;

/// Relative off-diagonal Frobenius target for the Jacobi sweep.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("Hermitian asymmetry {max_deviation:e} exceeds tolerance {tol:e}")]
    AsymmetryExceeded { max_deviation: f64, tol: f64 },
    #[error("eigensolver failed to converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("operator is not positive: eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("trace {trace} is not 1 within {TRACE_TOL:e}")]
    TraceNotOne { trace: f64 },
    #[error("no eigenvalue exceeds the support cutoff {cutoff:e}")]
    EmptySupport { cutoff: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
}

/// A vector in the working Hilbert space `C^d`.
///
/// Any finite vector is admissible; unit norm is required only where an
/// operation says so (e.g. samples on the sphere).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    components: Array1<Complex64>,
}

impl StateVector {
    pub fn new(components: Vec<Complex64>) -> Result<Self, SpectralError> {
        if components.is_empty() {
            return Err(SpectralError::ZeroDimension);
        }
        if components.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        Ok(Self { components: Array1::from(components) })
    }

    pub(crate) fn from_array_unchecked(components: Array1<Complex64>) -> Self {
        debug_assert!(components.len() >= 1);
        Self { components }
    }

    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self { components: Array1::zeros(dim) }
    }

    /// The `i`-th standard basis vector of `C^dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim, "basis index out of range");
        let mut v = Array1::zeros(dim);
        v[i] = Complex64::new(1.0, 0.0);
        Self { components: v }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &Array1<Complex64> {
        &self.components
    }

    pub fn into_components(self) -> Array1<Complex64> {
        self.components
    }

    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Inner product `<self, other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.components
            .iter()
            .zip(other.components.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Outer product `|self><self|`.
    pub fn outer(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = self.components[i] * self.components[j].conj();
            }
        }
        m
    }
}

/// An exactly Hermitian matrix: `entries[i][j] == conj(entries[j][i])` holds
/// bit-for-bit because construction symmetrizes.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: ComplexMatrix,
}

impl HermitianOperator {
    /// Accepts a raw matrix whose asymmetry `|m[i][j] - conj(m[j][i])|` stays
    /// within `tol`, and returns the exact symmetrization `(M + M*)/2`.
    pub fn validate(raw: ComplexMatrix, tol: f64) -> Result<Self, SpectralError> {
        assert!(tol >= 0.0, "tolerance must be nonnegative");
        let (rows, cols) = raw.dim();
        if rows != cols {
            return Err(SpectralError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(SpectralError::ZeroDimension);
        }
        if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        let mut max_deviation: f64 = 0.0;
        for i in 0..rows {
            for j in i..rows {
                let dev = (raw[[i, j]] - raw[[j, i]].conj()).norm();
                max_deviation = max_deviation.max(dev);
            }
        }
        if max_deviation > tol {
            return Err(SpectralError::AsymmetryExceeded { max_deviation, tol });
        }
        Ok(Self::symmetrize(raw))
    }

    /// `(M + M*)/2` without an asymmetry check. Addition commutes exactly in
    /// IEEE arithmetic, so the result is Hermitian entry-for-entry.
    pub(crate) fn symmetrize(raw: ComplexMatrix) -> Self {
        let n = raw.nrows();
        let mut entries = Array2::zeros((n, n));
        for i in 0..n {
            entries[[i, i]] = Complex64::new(raw[[i, i]].re, 0.0);
            for j in (i + 1)..n {
                let avg = (raw[[i, j]] + raw[[j, i]].conj()) * 0.5;
                entries[[i, j]] = avg;
                entries[[j, i]] = avg.conj();
            }
        }
        Self { entries }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "dimension must be at least 1");
        let d = diag.len();
        let mut entries = Array2::zeros((d, d));
        for (i, &x) in diag.iter().enumerate() {
            entries[[i, i]] = Complex64::new(x, 0.0);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }
}

/// Eigenvalues (real, descending) with an orthonormal eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    dim: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<StateVector>,
}

impl SpectralDecomposition {
    /// Assemble from eigenpairs. Pairs are sorted descending by eigenvalue;
    /// each vector must be unit within 1e-10. Pairwise orthogonality is the
    /// caller's contract (all in-crate constructors guarantee it).
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<StateVector>,
    ) -> Result<Self, SpectralError> {
        if eigenvalues.is_empty() {
            return Err(SpectralError::ZeroDimension);
        }
        if eigenvalues.len() != eigenvectors.len() {
            return Err(SpectralError::DimMismatch {
                expected: eigenvalues.len(),
                got: eigenvectors.len(),
            });
        }
        let dim = eigenvectors[0].dim();
        if eigenvalues.len() != dim {
            return Err(SpectralError::DimMismatch { expected: dim, got: eigenvalues.len() });
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        for v in &eigenvectors {
            if v.dim() != dim {
                return Err(SpectralError::DimMismatch { expected: dim, got: v.dim() });
            }
            if !v.is_unit(1e-10) {
                return Err(SpectralError::NonFinite);
            }
        }
        let mut pairs: Vec<(f64, StateVector)> =
            eigenvalues.into_iter().zip(eigenvectors).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
        let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
        Ok(Self { dim, eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[StateVector] {
        &self.eigenvectors
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, &StateVector)> {
        self.eigenvalues.iter().copied().zip(self.eigenvectors.iter())
    }

    /// `sum_n lambda_n |phi_n><phi_n|`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut m: ComplexMatrix = Array2::zeros((d, d));
        for (lambda, phi) in self.pairs() {
            let c = phi.components();
            for i in 0..d {
                for j in 0..d {
                    m[[i, j]] += lambda * c[i] * c[j].conj();
                }
            }
        }
        m
    }

    /// Quadratic form `<psi| A |psi> = sum_n lambda_n |<phi_n, psi>|^2`.
    pub fn quadratic_form(&self, psi: &StateVector) -> f64 {
        assert_eq!(self.dim, psi.dim(), "quadratic form dimension mismatch");
        self.pairs().map(|(lambda, phi)| lambda * phi.inner(psi).norm_sqr()).sum()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// Diagonalize a Hermitian operator by cyclic Jacobi rotations.
///
/// Dimensions here are small (at most a few hundred), where Jacobi is
/// essentially foolproof: each rotation is exactly unitary, so eigenvector
/// orthonormality degrades only at the rounding level.
pub fn eigh(h: &HermitianOperator) -> Result<SpectralDecomposition, SpectralError> {
    let d = h.dim();
    let mut a = h.entries().clone();
    let mut v: ComplexMatrix = Array2::eye(d);

    let scale = frobenius_norm(&a);
    if scale > 0.0 {
        let tol = JACOBI_TOL * scale;
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&a) <= tol {
                converged = true;
                break;
            }
            for p in 0..d - 1 {
                for q in (p + 1)..d {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if !converged && off_diagonal_norm(&a) > tol {
            return Err(SpectralError::ConvergenceFailure { sweeps: JACOBI_MAX_SWEEPS });
        }
    }

    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = Vec::with_capacity(d);
    for k in 0..d {
        eigenvalues.push(a[[k, k]].re);
        let mut col: Array1<Complex64> = v.column(k).to_owned();
        normalize_phase(&mut col);
        eigenvectors.push(StateVector::from_array_unchecked(col));
    }
    SpectralDecomposition::from_parts(eigenvalues, eigenvectors)
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
///
/// The 2x2 block `[[app, b],[conj(b), aqq]]` is reduced to real form by the
/// phase `w = b/|b|` and then rotated by the usual stable real Jacobi angle.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let b = a[[p, q]];
    let beta = b.norm();
    if beta == 0.0 {
        return;
    }
    let w = b / beta;
    let app = a[[p, p]].re;
    let aqq = a[[q, q]].re;

    let theta = (aqq - app) / (2.0 * beta);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // R has columns p,q given by [[w*c, w*s], [-s, c]]; apply A <- R^* A R.
    let wc = w * c;
    let ws = w * s;
    let d = a.nrows();
    for i in 0..d {
        let aip = a[[i, p]];
        let aiq = a[[i, q]];
        a[[i, p]] = aip * wc - aiq * s;
        a[[i, q]] = aip * ws + aiq * c;
    }
    let wc_conj = wc.conj();
    let ws_conj = ws.conj();
    for j in 0..d {
        let apj = a[[p, j]];
        let aqj = a[[q, j]];
        a[[p, j]] = apj * wc_conj - aqj * s;
        a[[q, j]] = apj * ws_conj + aqj * c;
    }
    // The transformed block is diagonal analytically; pin it exactly.
    a[[p, p]] = Complex64::new(app - t * beta, 0.0);
    a[[q, q]] = Complex64::new(aqq + t * beta, 0.0);
    a[[p, q]] = Complex64::new(0.0, 0.0);
    a[[q, p]] = Complex64::new(0.0, 0.0);

    for i in 0..d {
        let vip = v[[i, p]];
        let viq = v[[i, q]];
        v[[i, p]] = vip * wc - viq * s;
        v[[i, q]] = vip * ws + viq * c;
    }
}

/// Rotate a vector's global phase so its largest-magnitude component is real
/// positive, then renormalize. First index wins ties, so output is
/// deterministic.
fn normalize_phase(col: &mut Array1<Complex64>) {
    let mut best = 0;
    let mut best_norm = 0.0;
    for (i, z) in col.iter().enumerate() {
        let n = z.norm_sqr();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    if best_norm > 0.0 {
        let phase = col[best] / col[best].norm();
        let correction = phase.conj();
        col.mapv_inplace(|z| z * correction);
    }
    let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        col.mapv_inplace(|z| z / norm);
    }
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let d = m.nrows();
    let mut sum = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                sum += m[[i, j]].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Trace norm `||M||_1 = tr sqrt(M^* M)`: sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64, SpectralError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(SpectralError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(SpectralError::ZeroDimension);
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let mut adjoint = m.t().to_owned();
    adjoint.mapv_inplace(|z| z.conj());
    let gram = HermitianOperator::symmetrize(adjoint.dot(m));
    let dec = eigh(&gram)?;
    Ok(dec.eigenvalues().iter().map(|&x| x.max(0.0).sqrt()).sum())
}

/// A positive unit-trace operator, held in spectral form.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    spectral: SpectralDecomposition,
}

impl DensityOperator {
    /// Accepts a decomposition of a would-be density operator. Eigenvalues in
    /// `[-EIGENVALUE_CLAMP, 0)` are rounding noise and clamp to zero; anything
    /// more negative is rejected. The trace must already be 1 within
    /// `TRACE_TOL`; it is then renormalized to 1 exactly up to rounding.
    pub fn from_spectral(dec: SpectralDecomposition) -> Result<Self, SpectralError> {
        let min = dec.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -EIGENVALUE_CLAMP {
            return Err(SpectralError::NotPositive { min_eigenvalue: min });
        }
        let eigenvalues: Vec<f64> =
            dec.eigenvalues().iter().map(|&x| x.max(0.0)).collect();
        let trace: f64 = eigenvalues.iter().sum();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(SpectralError::TraceNotOne { trace });
        }
        let eigenvalues = eigenvalues.into_iter().map(|x| x / trace).collect();
        let spectral =
            SpectralDecomposition::from_parts(eigenvalues, dec.eigenvectors.clone())?;
        Ok(Self { spectral })
    }

    pub fn from_matrix(h: &HermitianOperator) -> Result<Self, SpectralError> {
        Self::from_spectral(eigh(h)?)
    }

    /// Canonical (Gibbs) state `exp(-beta H)/Z`, computed through the spectral
    /// decomposition with a log-sum-exp shift so large `beta` cannot overflow.
    pub fn thermal(h: &HermitianOperator, beta: f64) -> Result<Self, SpectralError> {
        assert!(beta.is_finite() && beta >= 0.0, "beta must be finite and nonnegative");
        let dec = eigh(h)?;
        let e_min = dec.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> =
            dec.eigenvalues().iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
        let z: f64 = weights.iter().sum();
        let probabilities = weights.into_iter().map(|w| w / z).collect();
        let spectral =
            SpectralDecomposition::from_parts(probabilities, dec.eigenvectors.clone())?;
        Ok(Self { spectral })
    }

    /// The maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        assert!(dim >= 1);
        let eigenvalues = vec![1.0 / dim as f64; dim];
        let eigenvectors = (0..dim).map(|i| StateVector::basis(dim, i)).collect();
        let spectral = SpectralDecomposition::from_parts(eigenvalues, eigenvectors)
            .expect("valid by construction");
        Self { spectral }
    }

    /// The pure state `|phi><phi|`.
    ///
    /// Built directly as eigenvalue 1 on `phi` plus exact zeros on a
    /// completed orthonormal basis, so the kernel coordinates are never
    /// sampled.
    pub fn pure(phi: &StateVector) -> Result<Self, SpectralError> {
        let norm = phi.norm();
        if norm == 0.0 {
            return Err(SpectralError::NotPositive { min_eigenvalue: 0.0 });
        }
        let d = phi.dim();
        let unit = StateVector::from_array_unchecked(phi.components().mapv(|z| z / norm));
        let mut basis = vec![unit];
        // Complete with Gram-Schmidt over the standard basis; two passes keep
        // orthogonality at rounding level even for ill-aligned candidates.
        for i in 0..d {
            if basis.len() == d {
                break;
            }
            let mut v = StateVector::basis(d, i).components().clone();
            for _ in 0..2 {
                for b in &basis {
                    let overlap: Complex64 =
                        b.components().iter().zip(v.iter()).map(|(a, c)| a.conj() * c).sum();
                    v.iter_mut()
                        .zip(b.components().iter())
                        .for_each(|(c, &a)| *c -= overlap * a);
                }
            }
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n * n > 1e-12 {
                basis.push(StateVector::from_array_unchecked(v.mapv(|z| z / n)));
            }
        }
        assert_eq!(basis.len(), d, "basis completion failed");
        let mut eigenvalues = vec![0.0; d];
        eigenvalues[0] = 1.0;
        let spectral = SpectralDecomposition::from_parts(eigenvalues, basis)?;
        Ok(Self { spectral })
    }

    /// Convex mixture `(1 - t) self + t other`, re-decomposed spectrally.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self, SpectralError> {
        assert!((0.0..=1.0).contains(&t), "mixture weight must lie in [0, 1]");
        if other.dim() != self.dim() {
            return Err(SpectralError::DimMismatch { expected: self.dim(), got: other.dim() });
        }
        let mixed = self.matrix() * Complex64::new(1.0 - t, 0.0)
            + other.matrix() * Complex64::new(t, 0.0);
        Self::from_matrix(&HermitianOperator::symmetrize(mixed))
    }

    pub fn dim(&self) -> usize {
        self.spectral.dim()
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectral.eigenvalues()
    }

    pub fn eigenvectors(&self) -> &[StateVector] {
        self.spectral.eigenvectors()
    }

    pub fn matrix(&self) -> ComplexMatrix {
        self.spectral.reconstruct()
    }

    /// Diagonal entries `<e_i| rho |e_i>` in the standard basis.
    pub fn diagonal(&self) -> Vec<f64> {
        let d = self.dim();
        let mut diag = vec![0.0; d];
        for (p, phi) in self.spectral.pairs() {
            for (i, z) in phi.components().iter().enumerate() {
                diag[i] += p * z.norm_sqr();
            }
        }
        diag
    }

    /// Restriction to the eigenpairs with `p_n > cutoff` (the support of rho
    /// up to numerical noise).
    pub fn support(&self, cutoff: f64) -> Result<SupportRestriction, SpectralError> {
        assert!((0.0..1.0).contains(&cutoff), "cutoff must lie in [0, 1)");
        let mut eigenvalues = Vec::new();
        let mut basis = Vec::new();
        for (p, phi) in self.spectral.pairs() {
            if p > cutoff {
                eigenvalues.push(p);
                basis.push(phi.clone());
            }
        }
        if eigenvalues.is_empty() {
            return Err(SpectralError::EmptySupport { cutoff });
        }
        Ok(SupportRestriction { ambient_dim: self.dim(), eigenvalues, basis })
    }
}

/// The positive spectral subspace of a density operator: the `k` retained
/// eigenpairs with eigenvalue above the cutoff.
#[derive(Clone, Debug)]
pub struct SupportRestriction {
    ambient_dim: usize,
    eigenvalues: Vec<f64>,
    basis: Vec<StateVector>,
}

impl SupportRestriction {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Rank of the restriction.
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &[StateVector] {
        &self.basis
    }

    pub fn retained_weight(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}
