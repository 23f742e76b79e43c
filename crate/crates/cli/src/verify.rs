//! Verification suites: each criterion measures a statistic with a pinned
//! threshold and wide (>= 4 sigma) margins, so a failing run signals a real
//! defect rather than Monte Carlo noise.

use serde::Serialize;

use scrooge::convergence::{
    adjustment_counterexample, charfn_convergence, continuity_experiment, make_panel,
    panel_discrepancies, panel_expectations, panel_expectations_weighted, seeded_vector_panel,
    ContinuityConfig,
};
use scrooge::estimator::{accumulate, accumulate_weighted, empirical_char_fn};
use scrooge::measure::{
    char_fn_gaussian, derive_seed, project, truncate, GeometricSequence,
};
use scrooge::spectral::SpectralDecomposition;
use scrooge::{
    sample_g_batch, sample_gap_mixture_batch, sample_gap_reweight, trace_norm,
    DensityOperator, GaussianMeasureSpec, HermitianOperator, StateVector,
};

/// SEs below this are rounding residue of functions that are constant on the
/// batch, not statistical scatter.
const DEGENERATE_SE: f64 = 1e-13;
/// Absolute slack for discrepancies between values that agree analytically.
const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Core,
    Continuity,
    Counterexample,
    All,
}

impl Suite {
    fn label(self) -> &'static str {
        match self {
            Suite::Core => "core",
            Suite::Continuity => "continuity",
            Suite::Counterexample => "counterexample",
            Suite::All => "all",
        }
    }
}

/// One measured quantity against its pinned threshold. Passing means
/// `measured <= threshold` (exact checks pin `threshold` to 0).
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn leq(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, pass: measured <= threshold }
    }

    fn exact(name: impl Into<String>, measured: f64) -> Self {
        Self { name: name.into(), measured, threshold: 0.0, pass: measured == 0.0 }
    }

    pub fn margin(&self) -> f64 {
        self.threshold - self.measured
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    fn new(id: u32, name: &str, suite: &str, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { id, name: name.into(), suite: suite.into(), pass, checks }
    }

    /// The check with the smallest margin: the one that would fail first.
    pub fn tightest(&self) -> &Check {
        self.checks
            .iter()
            .min_by(|a, b| a.margin().partial_cmp(&b.margin()).unwrap())
            .expect("criteria always carry checks")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub defaults: Defaults,
    pub pass: bool,
    pub results: Vec<CriterionResult>,
}

/// Stable defaults baked into the suites, echoed in every report so published
/// numbers are reproducible.
#[derive(Clone, Debug, Serialize)]
pub struct Defaults {
    pub batch_size: usize,
    pub panel_size: usize,
    pub support_cutoff: f64,
    pub truncation_cap: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            batch_size: 100_000,
            panel_size: 12,
            support_cutoff: 1e-12,
            truncation_cap: 1_000_000,
        }
    }
}

fn thermal_ladder(dim: usize, beta: f64) -> DensityOperator {
    let levels: Vec<f64> = (0..dim).map(|i| i as f64).collect();
    DensityOperator::thermal(&HermitianOperator::from_diagonal(&levels), beta)
        .expect("diagonal ladder state is valid")
}

/// Criterion 1: the sampled GAP measure reproduces its density operator.
fn density_reproduction(seed: u64) -> CriterionResult {
    let rho = thermal_ladder(4, 1.0);
    let checks = (0..3)
        .map(|k| {
            let batch =
                sample_gap_mixture_batch(&rho, derive_seed(seed, 100 + k), 200_000);
            let rho_hat = accumulate(4, &batch).unwrap().density_operator().unwrap();
            let dist = trace_norm(&(&rho_hat - &rho.matrix())).unwrap();
            Check::leq(format!("trace_distance_seed_{k}"), dist, 0.02)
        })
        .collect();
    CriterionResult::new(1, "density-operator reproduction", "core", checks)
}

/// Criterion 2: the exact mixture sampler and the reweighting sampler agree.
fn sampler_cross_validation(seed: u64) -> CriterionResult {
    let rho = thermal_ladder(4, 1.0);
    let n = 100_000;
    let mixture = sample_gap_mixture_batch(&rho, derive_seed(seed, 200), n);
    let weighted = sample_gap_reweight(&rho, derive_seed(seed, 201), n);

    let rho_mixture = accumulate(4, &mixture).unwrap().density_operator().unwrap();
    let rho_weighted = accumulate_weighted(4, &weighted).unwrap().density_operator().unwrap();
    let dist = trace_norm(&(&rho_mixture - &rho_weighted)).unwrap();

    let panel = make_panel(4, derive_seed(seed, 202), Defaults::default().panel_size);
    let a = panel_expectations(&mixture, &panel).unwrap();
    let b = panel_expectations_weighted(&weighted, &panel).unwrap();
    // Functions that are constant on the sphere (the constant itself and the
    // bump at 0) have discrepancy and SE at rounding scale; a 4*SE test there
    // races rounding noise, so they get the rounding floor instead.
    let (mut worst_panel, mut worst_degenerate) = (f64::NEG_INFINITY, 0.0f64);
    for d in panel_discrepancies(&a, &b) {
        if d.se > DEGENERATE_SE {
            worst_panel = worst_panel.max(d.estimate - 4.0 * d.se);
        } else {
            worst_degenerate = worst_degenerate.max(d.estimate);
        }
    }

    let checks = vec![
        Check::leq("cross_sampler_trace_distance", dist, 0.03),
        Check::leq("panel_discrepancy_minus_4se", worst_panel, 0.0),
        Check::leq("degenerate_panel_discrepancy", worst_degenerate, ROUNDING_FLOOR),
    ];
    CriterionResult::new(2, "sampler cross-validation", "core", checks)
}

/// Criterion 3: the empirical Gaussian characteristic function matches the
/// closed form on a 20-vector panel.
fn characteristic_function(seed: u64) -> CriterionResult {
    let rho = thermal_ladder(4, 1.0);
    let spec = GaussianMeasureSpec::centered(&rho);
    let n = 100_000;
    let batch = sample_g_batch(&spec, derive_seed(seed, 300), n);
    let probes = seeded_vector_panel(4, derive_seed(seed, 301), 20);
    let worst = probes
        .iter()
        .map(|psi| {
            (empirical_char_fn(&batch, psi).unwrap() - char_fn_gaussian(&spec, psi)).norm()
        })
        .fold(0.0, f64::max);
    let bound = 4.0 / (n as f64).sqrt();
    let checks = vec![Check::leq("max_modulus_error", worst, bound)];
    CriterionResult::new(3, "gaussian characteristic function", "core", checks)
}

/// Criterion 4: covariance of the Gaussian equals the density operator of
/// the projected adjusted measure.
fn covariance_identity(seed: u64) -> CriterionResult {
    let rho = thermal_ladder(4, 1.0);
    let spec = GaussianMeasureSpec::centered(&rho);
    let n = 100_000;
    let g_batch = sample_g_batch(&spec, derive_seed(seed, 400), n);
    let gap_batch = sample_gap_mixture_batch(&rho, derive_seed(seed, 401), n);
    let cov = accumulate(4, &g_batch).unwrap().covariance().unwrap();
    let rho_hat = accumulate(4, &gap_batch).unwrap().density_operator().unwrap();
    let dist = trace_norm(&(&cov - &rho_hat)).unwrap();
    let checks = vec![Check::leq("covariance_vs_density_operator", dist, 0.03)];
    CriterionResult::new(4, "adjust-and-project covariance identity", "core", checks)
}

/// Criterion 5: trace-norm perturbations shrink the sampled panel
/// discrepancies down to the noise floor.
fn continuity(seed: u64) -> CriterionResult {
    let rho = thermal_ladder(3, 1.0);
    let sigma = DensityOperator::maximally_mixed(3);
    let config = ContinuityConfig {
        ns: vec![2, 4, 8, 16, 32, 64],
        batch_size: 50_000,
        seed: derive_seed(seed, 500),
        panel_size: Defaults::default().panel_size,
    };
    let report = continuity_experiment(&rho, &sigma, &config).unwrap();
    let base = trace_norm(&(sigma.matrix() - rho.matrix())).unwrap();

    let linearity = report
        .records
        .iter()
        .map(|r| (r.trace_distance - base / r.n as f64).abs())
        .fold(0.0, f64::max);

    let first = &report.records.first().unwrap().panel;
    let last = &report.records.last().unwrap().panel;
    let (mut worst_shrink, mut worst_degenerate) = (f64::NEG_INFINITY, 0.0f64);
    for (early, late) in first.iter().zip(last) {
        if late.se > DEGENERATE_SE {
            worst_shrink =
                worst_shrink.max(late.estimate - (3.0 * late.se).max(early.estimate / 4.0));
        } else {
            // Constant-on-sphere functions; see criterion 2.
            worst_degenerate = worst_degenerate.max(late.estimate);
        }
    }

    let checks = vec![
        Check::leq("trace_distance_linearity", linearity, 1e-10),
        Check::leq("panel_shrink_minus_floor", worst_shrink, 0.0),
        Check::leq("degenerate_panel_discrepancy", worst_degenerate, ROUNDING_FLOOR),
    ];
    CriterionResult::new(5, "trace-norm continuity of GAP", "continuity", checks)
}

/// Criterion 6: closed-form characteristic-function gaps obey the trace-norm
/// bound and scale like 1/n.
fn charfn_mechanism(seed: u64) -> CriterionResult {
    let rho = thermal_ladder(3, 1.0);
    let sigma = DensityOperator::maximally_mixed(3);
    let probes = seeded_vector_panel(3, derive_seed(seed, 600), 12);
    let ns = [2u64, 4, 8, 16, 32, 64];
    let records = charfn_convergence(&rho, &sigma, &ns, &probes).unwrap();

    let bound_violation = records
        .iter()
        .flat_map(|r| r.gaps.iter().zip(&r.bounds).map(|(g, b)| g - b))
        .fold(f64::NEG_INFINITY, f64::max);

    let scaling = records
        .windows(2)
        .filter(|pair| pair[0].n >= 8)
        .map(|pair| {
            let a = pair[0].max_gap * pair[0].n as f64;
            let b = pair[1].max_gap * pair[1].n as f64;
            (a / b - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let checks = vec![
        Check::leq("gap_minus_trace_norm_bound", bound_violation, 0.0),
        Check::leq("one_over_n_scaling_deviation", scaling, 0.1),
    ];
    CriterionResult::new(6, "characteristic-function mechanism", "continuity", checks)
}

/// Criterion 7: the two-point counterexample, evaluated exactly.
fn counterexample(seed: u64) -> CriterionResult {
    let dim = 2;
    let panel = make_panel(dim, derive_seed(seed, 700), Defaults::default().panel_size);
    let ns = [2u64, 3, 4, 8, 16, 32, 64];
    let report = adjustment_counterexample(&ns, &panel, dim);

    let mass_deviation = report
        .records
        .iter()
        .map(|r| (r.adjusted_mass - 1.0).abs())
        .fold(0.0, f64::max);
    let limit_mass = report.adjusted_limit_mass;
    // |mu_n(f) - f(0)| = |f(psi_n) - f(0)|/n <= 2/n for |f| <= 1.
    let convergence_excess = report
        .records
        .iter()
        .flat_map(|r| {
            let slack = 2.0 / r.n as f64;
            r.mu_values
                .iter()
                .zip(&r.limit_values)
                .map(move |(mu, lim)| (mu - lim).abs() - slack)
        })
        .fold(f64::NEG_INFINITY, f64::max);

    let checks = vec![
        Check::exact("adjusted_mass_equals_one", mass_deviation),
        Check::exact("adjusted_limit_mass", limit_mass),
        Check::leq("panel_convergence_to_delta0", convergence_excess, 0.0),
    ];
    CriterionResult::new(7, "adjustment counterexample", "counterexample", checks)
}

/// Criterion 8: GAP of the maximally mixed state is the uniform measure.
fn uniform_special_case(seed: u64) -> CriterionResult {
    let d = 4;
    let rho = DensityOperator::maximally_mixed(d);
    let n = 100_000;
    let gap_batch = sample_gap_mixture_batch(&rho, derive_seed(seed, 800), n);
    let rho_hat = accumulate(d, &gap_batch).unwrap().density_operator().unwrap();
    let dist = trace_norm(&(&rho_hat - &rho.matrix())).unwrap();

    // Independent oracle: normalize a standard complex Gaussian vector.
    let identity_cov = SpectralDecomposition::from_parts(
        vec![1.0; d],
        (0..d).map(|i| StateVector::basis(d, i)).collect(),
    )
    .unwrap();
    let standard =
        GaussianMeasureSpec::new(StateVector::zero(d), identity_cov).unwrap();
    let oracle_batch: Vec<StateVector> =
        sample_g_batch(&standard, derive_seed(seed, 801), n)
            .iter()
            .map(|psi| project(psi).unwrap())
            .collect();

    let e1 = StateVector::basis(d, 0);
    let overlap = |batch: &[StateVector]| -> Vec<f64> {
        batch.iter().map(|psi| e1.inner(psi).norm_sqr()).collect()
    };
    let ks = two_sample_ks(overlap(&gap_batch), overlap(&oracle_batch));
    // Smirnov 1% critical value for equal sample sizes.
    let critical = 1.628 * (2.0 / n as f64).sqrt();

    let checks = vec![
        Check::leq("trace_distance_to_uniform_state", dist, 0.02),
        Check::leq("two_sample_ks_vs_oracle", ks, critical),
    ];
    CriterionResult::new(8, "uniform special case", "core", checks)
}

/// Criterion 9: certified truncation of a dyadic covariance spectrum.
fn truncation(seed: u64) -> CriterionResult {
    let seq = GeometricSequence::new(0.5, 0.5);
    let epsilon = 1e-6;
    let t = truncate(&seq, epsilon, Defaults::default().truncation_cap).unwrap();

    let n = 100_000;
    let norms: Vec<f64> = sample_g_batch(&t.spec, derive_seed(seed, 900), n)
        .iter()
        .map(|v| v.norm_sq())
        .collect();
    let mean = norms.iter().sum::<f64>() / n as f64;
    let var = norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let se = (var / n as f64).sqrt();
    let target = 1.0 - t.achieved_tail;

    let checks = vec![
        Check::exact("retained_dimension_minus_20", (t.retained as f64) - 20.0),
        Check::leq("certified_tail", t.achieved_tail, epsilon),
        Check::leq("second_moment_error_minus_4se", (mean - target).abs() - 4.0 * se, 0.0),
    ];
    CriterionResult::new(9, "covariance spectrum truncation", "core", checks)
}

fn two_sample_ks(mut xs: Vec<f64>, mut ys: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn run(suite: Suite, seed: u64) -> VerifyReport {
    let mut results = Vec::new();
    let core = matches!(suite, Suite::Core | Suite::All);
    let continuity_suite = matches!(suite, Suite::Continuity | Suite::All);
    let counterexample_suite = matches!(suite, Suite::Counterexample | Suite::All);

    if core {
        results.push(density_reproduction(seed));
        results.push(sampler_cross_validation(seed));
        results.push(characteristic_function(seed));
        results.push(covariance_identity(seed));
    }
    if continuity_suite {
        results.push(continuity(seed));
        results.push(charfn_mechanism(seed));
    }
    if counterexample_suite {
        results.push(counterexample(seed));
    }
    if core {
        results.push(uniform_special_case(seed));
        results.push(truncation(seed));
    }
    results.sort_by_key(|r| r.id);

    let pass = results.iter().all(|r| r.pass);
    VerifyReport {
        suite: suite.label().to_string(),
        seed,
        defaults: Defaults::default(),
        pass,
        results,
    }
}
