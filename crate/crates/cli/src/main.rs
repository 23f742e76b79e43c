//! `scrooge` — build density operators, draw reproducible sample batches from
//! Gaussian and GAP measures, estimate their moments, and run the
//! verification suites.
//!
//! Exit codes: 0 success (or all verifications passed), 1 verification
//! failure, 2 usage error, 3 runtime (file/parse/numeric) error.

mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scrooge::convergence::{continuity_experiment, seeded_vector_panel, ContinuityConfig};
use scrooge::estimator::{accumulate, accumulate_weighted, empirical_char_fn};
use scrooge::io::{
    estimator_report_json, matrix_json, read_matrix, write_atomic, MeasureKind, SampleBatch,
};
use scrooge::measure::{char_fn_gaussian, derive_seed, truncate, GeometricSequence};
use scrooge::spectral::SpectralDecomposition;
use scrooge::{
    sample_g_batch, sample_gap_mixture_batch, sample_gap_reweight, DensityOperator,
    GaussianMeasureSpec, HermitianOperator, StateVector,
};

/// Asymmetry tolerance applied when validating matrices read from disk.
const READ_HERMITIAN_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "scrooge",
    about = "GAP-measure construction, exact sampling, estimation, and verification",
    version,
    propagate_version = true
)]
struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a density operator file from a preset, a Hamiltonian, or an
    /// existing matrix file.
    Density(DensityArgs),
    /// Draw a reproducible sample batch from G, GAP (exact mixture), or the
    /// weighted reweighting sampler.
    Sample(SampleArgs),
    /// Estimate mean, covariance, and density operator from a batch file.
    Estimate(EstimateArgs),
    /// Compare the empirical characteristic function of a Gaussian batch
    /// with its closed form on a panel of probe vectors.
    Charfn(CharfnArgs),
    /// Run the trace-norm continuity experiment along
    /// rho_n = (1 - 1/n) rho + (1/n) sigma.
    Continuity(ContinuityArgs),
    /// Run verification suites and report pass/fail per criterion.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DensityArgs {
    /// Preset state: maximally-mixed | pure | thermal-qho.
    #[arg(long, conflicts_with_all = ["hamiltonian", "input"])]
    preset: Option<String>,
    /// Dimension for presets.
    #[arg(long)]
    dim: Option<usize>,
    /// Inverse temperature (thermal sources). [default: 1]
    #[arg(long)]
    beta: Option<f64>,
    /// Covariance tail epsilon: lets thermal-qho choose its dimension by the
    /// certified tail bound instead of --dim.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Hamiltonian matrix file; combined with --beta.
    #[arg(long, conflicts_with = "input")]
    hamiltonian: Option<PathBuf>,
    /// Existing density matrix file to validate and rewrite.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Density operator file.
    #[arg(long)]
    rho: PathBuf,
    /// g | gap-mixture | gap-reweight.
    #[arg(long, value_parser = parse_measure)]
    measure: MeasureKind,
    /// Batch size.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Batch file produced by `scrooge sample`.
    #[arg(long)]
    batch: PathBuf,
    /// Reference density operator; adds trace_norm(rho_hat - ref) to the
    /// report.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CharfnArgs {
    #[arg(long)]
    rho: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of probe vectors.
    #[arg(long, default_value_t = 20)]
    panel_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ContinuityArgs {
    #[arg(long)]
    rho: PathBuf,
    #[arg(long)]
    sigma: PathBuf,
    /// Perturbation indices.
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 4, 8, 16, 32, 64])]
    ns: Vec<u64>,
    /// Batch size per leg.
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of panel test functions.
    #[arg(long, default_value_t = 12)]
    panel_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = verify::Suite::All)]
    suite: verify::Suite,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the full JSON report here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_measure(s: &str) -> Result<MeasureKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "g" => Ok(MeasureKind::Gaussian),
        "gap-mixture" | "gap" => Ok(MeasureKind::Gap),
        "gap-reweight" | "ga-weighted" => Ok(MeasureKind::GaWeighted),
        other => Err(format!("unknown measure {other:?}; use g | gap-mixture | gap-reweight")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    match run(cli.command, quiet) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command, quiet: bool) -> Result<ExitCode> {
    match command {
        Command::Density(args) => cmd_density(args, quiet)?,
        Command::Sample(args) => cmd_sample(args, quiet)?,
        Command::Estimate(args) => cmd_estimate(args, quiet)?,
        Command::Charfn(args) => cmd_charfn(args, quiet)?,
        Command::Continuity(args) => cmd_continuity(args, quiet)?,
        Command::Verify(args) => return cmd_verify(args, quiet),
    }
    Ok(ExitCode::SUCCESS)
}

fn read_density(path: &Path) -> Result<DensityOperator> {
    let matrix = read_matrix(path)
        .with_context(|| format!("reading density matrix from {}", path.display()))?;
    let hermitian = HermitianOperator::validate(matrix, READ_HERMITIAN_TOL)
        .context("validating Hermitian structure")?;
    DensityOperator::from_matrix(&hermitian).context("decomposing density operator")
}

fn cmd_density(args: DensityArgs, quiet: bool) -> Result<()> {
    let rho = if let Some(preset) = &args.preset {
        let beta = args.beta.unwrap_or(1.0);
        match preset.as_str() {
            "maximally-mixed" => {
                let dim = args.dim.context("--preset maximally-mixed needs --dim")?;
                DensityOperator::maximally_mixed(dim)
            }
            "pure" => {
                let dim = args.dim.context("--preset pure needs --dim")?;
                DensityOperator::pure(&StateVector::basis(dim, 0))?
            }
            "thermal-qho" => {
                if !(beta.is_finite() && beta > 0.0) {
                    bail!("thermal-qho needs a positive finite --beta");
                }
                let ratio = (-beta).exp();
                let dim = match (args.dim, args.epsilon) {
                    (Some(dim), None) => dim,
                    (None, Some(epsilon)) => {
                        let seq = GeometricSequence::normalized(ratio);
                        truncate(&seq, epsilon, 1_000_000)
                            .context("choosing the truncation dimension")?
                            .retained
                    }
                    _ => bail!("thermal-qho needs exactly one of --dim or --epsilon"),
                };
                if dim == 0 {
                    bail!("dimension must be at least 1");
                }
                // p_i proportional to exp(-beta i), truncated and renormalized.
                let weights: Vec<f64> = (0..dim).map(|i| ratio.powi(i as i32)).collect();
                let total: f64 = weights.iter().sum();
                let eigenvalues: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
                let eigenvectors = (0..dim).map(|i| StateVector::basis(dim, i)).collect();
                DensityOperator::from_spectral(SpectralDecomposition::from_parts(
                    eigenvalues,
                    eigenvectors,
                )?)?
            }
            other => bail!("unknown preset {other:?}; use maximally-mixed | pure | thermal-qho"),
        }
    } else if let Some(h_path) = &args.hamiltonian {
        let beta = args.beta.context("--hamiltonian needs --beta")?;
        if !(beta.is_finite() && beta >= 0.0) {
            bail!("--beta must be finite and nonnegative");
        }
        let matrix = read_matrix(h_path)
            .with_context(|| format!("reading Hamiltonian from {}", h_path.display()))?;
        let hamiltonian = HermitianOperator::validate(matrix, READ_HERMITIAN_TOL)
            .context("validating Hamiltonian")?;
        DensityOperator::thermal(&hamiltonian, beta)?
    } else if let Some(input) = &args.input {
        read_density(input)?
    } else {
        bail!("density needs one of --preset, --hamiltonian, or --input");
    };

    write_atomic(&args.out, matrix_json(&rho.matrix()).as_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if !quiet {
        eprintln!(
            "density: dim {} eigenvalues {:?} -> {}",
            rho.dim(),
            rho.eigenvalues(),
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs, quiet: bool) -> Result<()> {
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let rho = read_density(&args.rho)?;
    let rho_file = Some(args.rho.display().to_string());
    let batch = match args.measure {
        MeasureKind::Gaussian => {
            let spec = GaussianMeasureSpec::centered(&rho);
            SampleBatch::from_states(
                MeasureKind::Gaussian,
                args.seed,
                rho_file,
                sample_g_batch(&spec, args.seed, args.n),
            )
        }
        MeasureKind::Gap => SampleBatch::from_states(
            MeasureKind::Gap,
            args.seed,
            rho_file,
            sample_gap_mixture_batch(&rho, args.seed, args.n),
        ),
        MeasureKind::GaWeighted => SampleBatch::from_weighted(
            args.seed,
            rho_file,
            sample_gap_reweight(&rho, args.seed, args.n),
        ),
    };
    batch.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if !quiet {
        eprintln!(
            "sample: {} draws of {:?} (seed {}) -> {}",
            args.n,
            args.measure,
            args.seed,
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs, quiet: bool) -> Result<()> {
    let batch = SampleBatch::load(&args.batch)
        .with_context(|| format!("reading batch from {}", args.batch.display()))?;
    let reference = args.reference.as_deref().map(read_density).transpose()?;

    let acc = match batch.weighted_samples() {
        Some(weighted) => accumulate_weighted(batch.dim, &weighted)?,
        None => accumulate(batch.dim, &batch.samples)?,
    };
    if batch.measure == MeasureKind::Gap {
        // Surface off-sphere batches as the error they are.
        acc.density_operator()?;
    }
    let report = acc.report(reference.as_ref())?;
    write_atomic(&args.out, estimator_report_json(&report).as_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if !quiet {
        let distance = report
            .ref_distance
            .map(|d| format!(", ref distance {d:.6}"))
            .unwrap_or_default();
        eprintln!("estimate: n = {}{} -> {}", report.n, distance, args.out.display());
    }
    Ok(())
}

fn cmd_charfn(args: CharfnArgs, quiet: bool) -> Result<()> {
    if args.n == 0 || args.panel_size == 0 {
        bail!("--n and --panel-size must be at least 1");
    }
    let rho = read_density(&args.rho)?;
    let spec = GaussianMeasureSpec::centered(&rho);
    let batch = sample_g_batch(&spec, args.seed, args.n);
    let probes = seeded_vector_panel(rho.dim(), derive_seed(args.seed, 1), args.panel_size);

    let mut rows = Vec::with_capacity(probes.len());
    let mut max_error = 0.0f64;
    for (index, psi) in probes.iter().enumerate() {
        let closed = char_fn_gaussian(&spec, psi);
        let empirical = empirical_char_fn(&batch, psi)?;
        let error = (empirical - closed).norm();
        max_error = max_error.max(error);
        rows.push(serde_json::json!({
            "index": index,
            "closed_form": [closed.re, closed.im],
            "empirical": [empirical.re, empirical.im],
            "modulus_error": error,
        }));
    }
    let bound = 4.0 / (args.n as f64).sqrt();
    let report = serde_json::json!({
        "dim": rho.dim(),
        "n": args.n,
        "seed": args.seed,
        "panel_size": args.panel_size,
        "max_modulus_error": max_error,
        "bound_4_over_sqrt_n": bound,
        "within_bound": max_error < bound,
        "panel": rows,
    });
    write_atomic(&args.out, format!("{:#}\n", report).as_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if !quiet {
        eprintln!(
            "charfn: max modulus error {max_error:.6} (bound {bound:.6}) -> {}",
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_continuity(args: ContinuityArgs, quiet: bool) -> Result<()> {
    let rho = read_density(&args.rho)?;
    let sigma = read_density(&args.sigma)?;
    let config = ContinuityConfig {
        ns: args.ns,
        batch_size: args.n,
        seed: args.seed,
        panel_size: args.panel_size,
    };
    let report = continuity_experiment(&rho, &sigma, &config)?;
    let json = serde_json::to_string_pretty(&report.records)?;
    write_atomic(&args.out, format!("{json}\n").as_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    if !quiet {
        for record in &report.records {
            let worst = record
                .panel
                .iter()
                .map(|p| p.estimate)
                .fold(0.0f64, f64::max);
            eprintln!(
                "continuity: n = {:3}  ||rho_n - rho||_1 = {:.6}  max panel discrepancy = {:.6}",
                record.n, record.trace_distance, worst
            );
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs, quiet: bool) -> Result<ExitCode> {
    let report = verify::run(args.suite, args.seed);
    for result in &report.results {
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        let tightest = result.tightest();
        println!(
            "[{verdict}] criterion {} ({}): {} = {:.6} vs threshold {:.6} (margin {:+.6})",
            result.id,
            result.name,
            tightest.name,
            tightest.measured,
            tightest.threshold,
            tightest.margin()
        );
    }
    if !quiet {
        eprintln!(
            "verify: suite {} seed {} -> {}",
            report.suite,
            report.seed,
            if report.pass { "all criteria passed" } else { "FAILURES present" }
        );
    }
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report)?;
        write_atomic(out, format!("{json}\n").as_bytes())
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
