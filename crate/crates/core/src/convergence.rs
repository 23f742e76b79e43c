//! Desk-scale experiments probing continuity of `rho -> GAP(rho)`:
//! panel-based weak-convergence surrogates, the closed-form characteristic
//! function mechanism, the tail-compactness quantity, and the exact two-point
//! counterexample showing the adjustment map is not weakly continuous without
//! a second-moment hypothesis on the limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::measure::{
    char_fn_gaussian, derive_seed, sample_complex_gaussian, sample_gap_mixture_batch,
    GaussianMeasureSpec, RandomStream, WeightedSample,
};
use crate::spectral::{trace_norm, DensityOperator, SpectralError, StateVector};

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error("the two states must differ for a continuity experiment")]
    IdenticalStates,
    #[error("perturbation indices must be strictly increasing and at least 1")]
    BadPerturbationIndices,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// One bounded continuous test function on the Hilbert space.
#[derive(Clone, Debug)]
pub enum TestFunction {
    /// `f(psi) = 1`.
    Constant,
    /// `f(psi) = cos(Re<anchor, psi>)`.
    Cosine { anchor: StateVector },
    /// `f(psi) = exp(-||psi - anchor||^2)`.
    GaussianBump { anchor: StateVector },
}

impl TestFunction {
    pub fn eval(&self, psi: &StateVector) -> f64 {
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::Cosine { anchor } => anchor.inner(psi).re.cos(),
            TestFunction::GaussianBump { anchor } => {
                let diff_sq: f64 = anchor
                    .components()
                    .iter()
                    .zip(psi.components().iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                (-diff_sq).exp()
            }
        }
    }

    pub fn kind(&self) -> String {
        match self {
            TestFunction::Constant => "const".to_string(),
            TestFunction::Cosine { .. } => "cos".to_string(),
            TestFunction::GaussianBump { anchor } => {
                if anchor.norm() == 0.0 {
                    "gauss@0".to_string()
                } else {
                    "gauss".to_string()
                }
            }
        }
    }
}

/// A reproducible panel of bounded test functions, every member bounded by 1
/// in absolute value.
#[derive(Clone, Debug)]
pub struct TestFunctionPanel {
    functions: Vec<TestFunction>,
}

impl TestFunctionPanel {
    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Deterministic panel of `m >= 3` functions: the constant, a Gaussian bump
/// at the origin, then cosines and bumps anchored at `G(I/dim)` draws from
/// sub-streams `(seed, j)`.
pub fn make_panel(dim: usize, seed: u64, m: usize) -> TestFunctionPanel {
    assert!(m >= 3, "panel needs at least 3 functions");
    let mut functions = vec![
        TestFunction::Constant,
        TestFunction::GaussianBump { anchor: StateVector::zero(dim) },
    ];
    let variance = 1.0 / dim as f64;
    for j in 2..m {
        let anchor = StateVector::new(
            (0..dim)
                .map(|k| {
                    sample_complex_gaussian(
                        &RandomStream::new(seed, (j * dim + k) as u64),
                        variance,
                    )
                })
                .collect(),
        )
        .expect("gaussian draws are finite");
        if j % 2 == 0 {
            functions.push(TestFunction::Cosine { anchor });
        } else {
            functions.push(TestFunction::GaussianBump { anchor });
        }
    }
    TestFunctionPanel { functions }
}

/// A panel of plain vectors (characteristic-function probes), drawn from
/// `G(I/dim)` sub-streams `(seed, j)`.
pub fn seeded_vector_panel(dim: usize, seed: u64, count: usize) -> Vec<StateVector> {
    let variance = 1.0 / dim as f64;
    (0..count)
        .map(|j| {
            StateVector::new(
                (0..dim)
                    .map(|k| {
                        sample_complex_gaussian(
                            &RandomStream::new(seed, (j * dim + k) as u64),
                            variance,
                        )
                    })
                    .collect(),
            )
            .expect("gaussian draws are finite")
        })
        .collect()
}

/// Plug-in estimate and standard error of one panel function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PanelEstimate {
    pub kind: String,
    pub estimate: f64,
    pub se: f64,
}

/// Plug-in means with plug-in standard errors over an unweighted batch.
pub fn panel_expectations(
    batch: &[StateVector],
    panel: &TestFunctionPanel,
) -> Result<Vec<PanelEstimate>, ConvergenceError> {
    if batch.is_empty() {
        return Err(ConvergenceError::Estimator(EstimatorError::EmptyBatch {
            needed: 1,
            got: 0,
        }));
    }
    let n = batch.len() as f64;
    Ok(panel
        .functions()
        .iter()
        .map(|f| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for psi in batch {
                let v = f.eval(psi);
                sum += v;
                sum_sq += v * v;
            }
            let estimate = sum / n;
            let variance = (sum_sq / n - estimate * estimate).max(0.0);
            PanelEstimate { kind: f.kind(), estimate, se: (variance / n).sqrt() }
        })
        .collect())
}

/// Self-normalized panel expectations over a weighted batch, with
/// delta-method standard errors.
pub fn panel_expectations_weighted(
    batch: &[WeightedSample],
    panel: &TestFunctionPanel,
) -> Result<Vec<PanelEstimate>, ConvergenceError> {
    if batch.is_empty() {
        return Err(ConvergenceError::Estimator(EstimatorError::EmptyBatch {
            needed: 1,
            got: 0,
        }));
    }
    let weight_sum: f64 = batch.iter().map(|s| s.weight).sum();
    Ok(panel
        .functions()
        .iter()
        .map(|f| {
            let estimate = batch
                .iter()
                .map(|s| s.weight * f.eval(&s.vector))
                .sum::<f64>()
                / weight_sum;
            let se_sq = batch
                .iter()
                .map(|s| {
                    let r = s.weight * (f.eval(&s.vector) - estimate);
                    r * r
                })
                .sum::<f64>()
                / (weight_sum * weight_sum);
            PanelEstimate { kind: f.kind(), estimate, se: se_sq.sqrt() }
        })
        .collect())
}

/// Per-function discrepancy between two batches.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PanelDiscrepancy {
    pub kind: String,
    /// `|E_a(f) - E_b(f)|`.
    pub estimate: f64,
    /// Combined standard error `sqrt(se_a^2 + se_b^2)`.
    pub se: f64,
}

pub fn panel_discrepancies(a: &[PanelEstimate], b: &[PanelEstimate]) -> Vec<PanelDiscrepancy> {
    a.iter()
        .zip(b)
        .map(|(x, y)| PanelDiscrepancy {
            kind: x.kind.clone(),
            estimate: (x.estimate - y.estimate).abs(),
            se: (x.se * x.se + y.se * y.se).sqrt(),
        })
        .collect()
}

/// One row of a continuity experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: u64,
    pub trace_distance: f64,
    pub panel: Vec<PanelDiscrepancy>,
}

/// Full result of a continuity experiment over the perturbation family
/// `rho_n = (1 - 1/n) rho + (1/n) sigma`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
}

#[derive(Clone, Debug)]
pub struct ContinuityConfig {
    pub ns: Vec<u64>,
    pub batch_size: usize,
    pub seed: u64,
    pub panel_size: usize,
}

/// Sample GAP batches along `rho_n = (1 - 1/n) rho + (1/n) sigma` and record
/// trace distances plus panel discrepancies against a GAP(rho) reference
/// batch. Each leg derives its own sub-stream family from the experiment
/// seed, so legs may run in any order.
pub fn continuity_experiment(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    config: &ContinuityConfig,
) -> Result<ConvergenceReport, ConvergenceError> {
    if sigma.dim() != rho.dim() {
        return Err(ConvergenceError::Spectral(SpectralError::DimMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        }));
    }
    if trace_norm(&(sigma.matrix() - rho.matrix()))? < 1e-14 {
        return Err(ConvergenceError::IdenticalStates);
    }
    if config.ns.is_empty()
        || config.ns[0] < 1
        || config.ns.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ConvergenceError::BadPerturbationIndices);
    }

    let panel = make_panel(rho.dim(), derive_seed(config.seed, 0), config.panel_size);
    let reference =
        sample_gap_mixture_batch(rho, derive_seed(config.seed, 1), config.batch_size);
    let reference_stats = panel_expectations(&reference, &panel)?;

    let mut records = Vec::with_capacity(config.ns.len());
    for (leg, &n) in config.ns.iter().enumerate() {
        let t = 1.0 / n as f64;
        let rho_n = rho.mix(sigma, t)?;
        let trace_distance = trace_norm(&(rho_n.matrix() - rho.matrix()))?;
        let batch = sample_gap_mixture_batch(
            &rho_n,
            derive_seed(config.seed, 2 + leg as u64),
            config.batch_size,
        );
        let stats = panel_expectations(&batch, &panel)?;
        records.push(ConvergenceRecord {
            n,
            trace_distance,
            panel: panel_discrepancies(&stats, &reference_stats),
        });
    }
    Ok(ConvergenceReport { records })
}

/// Closed-form characteristic-function gaps along the perturbation family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharFnGapRecord {
    pub n: u64,
    /// `max_psi |exp(-<psi,rho_n psi>) - exp(-<psi,rho psi>)|` over the panel.
    pub max_gap: f64,
    /// Per-vector gaps, ordered as the panel.
    pub gaps: Vec<f64>,
    /// Per-vector bounds `||psi||^2 ||rho_n - rho||_1`.
    pub bounds: Vec<f64>,
}

/// Evaluate the Gaussian characteristic functions of `G(rho_n)` and `G(rho)`
/// on a vector panel, without sampling. The pointwise gap is bounded by
/// `||psi||^2 ||rho_n - rho||_1` and decays like `1/n`.
pub fn charfn_convergence(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    ns: &[u64],
    panel: &[StateVector],
) -> Result<Vec<CharFnGapRecord>, ConvergenceError> {
    let base = GaussianMeasureSpec::centered(rho);
    let mut records = Vec::with_capacity(ns.len());
    for &n in ns {
        let rho_n = rho.mix(sigma, 1.0 / n as f64)?;
        let delta_trace = trace_norm(&(rho_n.matrix() - rho.matrix()))?;
        let perturbed = GaussianMeasureSpec::centered(&rho_n);
        let mut gaps = Vec::with_capacity(panel.len());
        let mut bounds = Vec::with_capacity(panel.len());
        for psi in panel {
            let gap = (char_fn_gaussian(&perturbed, psi) - char_fn_gaussian(&base, psi)).norm();
            gaps.push(gap);
            bounds.push(psi.norm_sq() * delta_trace);
        }
        let max_gap = gaps.iter().copied().fold(0.0, f64::max);
        records.push(CharFnGapRecord { n, max_gap, gaps, bounds });
    }
    Ok(records)
}

/// `sup_n sum_{i >= k} <b_i, rho_n b_i>` over the family, in the standard
/// basis, with `k` 1-indexed. Nonincreasing in `k`; zero at `k = dim + 1`.
pub fn tail_compactness(rhos: &[DensityOperator], k: usize) -> f64 {
    assert!(!rhos.is_empty(), "need at least one state");
    let dim = rhos[0].dim();
    assert!(k >= 1 && k <= dim + 1, "k must lie in 1..=dim+1");
    rhos.iter()
        .map(|rho| rho.diagonal()[k - 1..].iter().sum::<f64>())
        .fold(0.0, f64::max)
}

/// One row of the adjustment counterexample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleRecord {
    pub n: u64,
    /// `mu_n(f)` for each panel function.
    pub mu_values: Vec<f64>,
    /// `f(0)`, the delta-at-zero limit values.
    pub limit_values: Vec<f64>,
    /// Total mass of the adjusted measure `A mu_n`; identically 1.
    pub adjusted_mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub records: Vec<CounterexampleRecord>,
    /// Total mass of the adjusted limit candidate `A delta_0`.
    pub adjusted_limit_mass: f64,
}

/// Exact evaluation of the two-point family
/// `mu_n = (1 - 1/n) delta_0 + (1/n) delta_{psi_n}` with `||psi_n||^2 = n`
/// (here `psi_n = sqrt(n) e_1`).
///
/// The panel values of `mu_n` converge to the `delta_0` values, while the
/// adjusted measures satisfy `A mu_n = delta_{psi_n}` with total mass 1 for
/// every `n` — but `A delta_0` has total mass 0, so adjustment does not
/// commute with the weak limit. No sampling: every number here is a finite
/// two-term sum.
pub fn adjustment_counterexample(
    ns: &[u64],
    panel: &TestFunctionPanel,
    dim: usize,
) -> CounterexampleReport {
    assert!(!ns.is_empty(), "need at least one n");
    let origin = StateVector::zero(dim);
    let limit_values: Vec<f64> = panel.functions().iter().map(|f| f.eval(&origin)).collect();
    let records = ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let spike = StateVector::from_array_unchecked(
                StateVector::basis(dim, 0).components().mapv(|z| z * nf.sqrt()),
            );
            // ||psi_n||^2 is exactly n by construction.
            let spike_norm_sq = nf;
            let mu_values = panel
                .functions()
                .iter()
                .map(|f| ((nf - 1.0) / nf) * f.eval(&origin) + f.eval(&spike) / nf)
                .collect();
            // A mu_n(1) = (1 - 1/n) * 0 + (1/n) * ||psi_n||^2 = n/n.
            let adjusted_mass = spike_norm_sq / nf;
            CounterexampleRecord { n, mu_values, limit_values: limit_values.clone(), adjusted_mass }
        })
        .collect();
    CounterexampleReport { records, adjusted_limit_mass: 0.0 }
}
