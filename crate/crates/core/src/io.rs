//! File formats: density/Hermitian matrix JSON, sample batch files, and
//! report serialization.
//!
//! Numeric fields in the matrix and batch formats are written with 17
//! significant digits, so `read(write(x)) == x` bit for bit and rewriting a
//! parsed file reproduces it byte for byte.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::EstimatorReport;
use crate::measure::WeightedSample;
use crate::spectral::{ComplexMatrix, StateVector};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("entries array has length {got}, expected {expected}")]
    WrongLength { expected: usize, got: usize },
}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn entries_json<'a>(entries: impl Iterator<Item = &'a Complex64>) -> String {
    let parts: Vec<String> = entries
        .map(|z| format!("[{}, {}]", format_f64(z.re), format_f64(z.im)))
        .collect();
    format!("[{}]", parts.join(", "))
}

/// `{ "dim": d, "entries": [[re, im], ...] }`, row-major, length `d^2`.
pub fn matrix_json(m: &ComplexMatrix) -> String {
    format!("{{\"dim\": {}, \"entries\": {}}}\n", m.nrows(), entries_json(m.iter()))
}

/// Same layout for a vector: `entries` has length `dim`.
pub fn vector_json(v: &StateVector) -> String {
    format!("{{\"dim\": {}, \"entries\": {}}}", v.dim(), entries_json(v.components().iter()))
}

fn parse_pair(value: &serde_json::Value) -> Result<Complex64, FormatError> {
    let pair = value
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| FormatError::Malformed("entry is not a [re, im] pair".into()))?;
    let re = pair[0]
        .as_f64()
        .ok_or_else(|| FormatError::Malformed("non-numeric real part".into()))?;
    let im = pair[1]
        .as_f64()
        .ok_or_else(|| FormatError::Malformed("non-numeric imaginary part".into()))?;
    Ok(Complex64::new(re, im))
}

pub fn parse_matrix_json(text: &str) -> Result<ComplexMatrix, FormatError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let dim = value
        .get("dim")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| FormatError::Malformed("missing or invalid \"dim\"".into()))?
        as usize;
    if dim == 0 {
        return Err(FormatError::Malformed("dim must be at least 1".into()));
    }
    let entries = value
        .get("entries")
        .and_then(|v| v.as_array())
        .ok_or_else(|| FormatError::Malformed("missing \"entries\" array".into()))?;
    if entries.len() != dim * dim {
        return Err(FormatError::WrongLength { expected: dim * dim, got: entries.len() });
    }
    let mut m = Array2::zeros((dim, dim));
    for (k, entry) in entries.iter().enumerate() {
        m[[k / dim, k % dim]] = parse_pair(entry)?;
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix, FormatError> {
    parse_matrix_json(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<(), FormatError> {
    write_atomic(path, matrix_json(m).as_bytes())?;
    Ok(())
}

/// Write through a temporary sibling and rename, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Which measure a batch was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "G")]
    Gaussian,
    #[serde(rename = "GAP")]
    Gap,
    #[serde(rename = "GA-weighted")]
    GaWeighted,
}

impl MeasureKind {
    pub fn is_weighted(&self) -> bool {
        matches!(self, MeasureKind::GaWeighted)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct BatchHeader {
    dim: usize,
    n: usize,
    measure: MeasureKind,
    seed: u64,
    rho_file: Option<String>,
}

/// A batch of sampled state vectors with its provenance, as stored on disk:
/// a JSON header line followed by one comma-separated record per sample
/// (re, im interleaved, weight last when present).
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub dim: usize,
    pub measure: MeasureKind,
    pub seed: u64,
    pub rho_file: Option<String>,
    pub samples: Vec<StateVector>,
    /// Present exactly when `measure` is weighted.
    pub weights: Option<Vec<f64>>,
}

impl SampleBatch {
    pub fn from_states(
        measure: MeasureKind,
        seed: u64,
        rho_file: Option<String>,
        samples: Vec<StateVector>,
    ) -> Self {
        assert!(!measure.is_weighted(), "weighted batches need weights");
        assert!(!samples.is_empty(), "batch must be nonempty");
        let dim = samples[0].dim();
        Self { dim, measure, seed, rho_file, samples, weights: None }
    }

    pub fn from_weighted(
        seed: u64,
        rho_file: Option<String>,
        samples: Vec<WeightedSample>,
    ) -> Self {
        assert!(!samples.is_empty(), "batch must be nonempty");
        let dim = samples[0].vector.dim();
        let weights = samples.iter().map(|s| s.weight).collect();
        let samples = samples.into_iter().map(|s| s.vector).collect();
        Self { dim, measure: MeasureKind::GaWeighted, seed, rho_file, samples, weights: Some(weights) }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weighted_samples(&self) -> Option<Vec<WeightedSample>> {
        self.weights.as_ref().map(|ws| {
            self.samples
                .iter()
                .zip(ws)
                .map(|(v, &w)| WeightedSample { vector: v.clone(), weight: w })
                .collect()
        })
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<(), FormatError> {
        let header = BatchHeader {
            dim: self.dim,
            n: self.samples.len(),
            measure: self.measure,
            seed: self.seed,
            rho_file: self.rho_file.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for (i, psi) in self.samples.iter().enumerate() {
            let mut fields: Vec<String> = Vec::with_capacity(2 * self.dim + 1);
            for z in psi.components() {
                fields.push(format_f64(z.re));
                fields.push(format_f64(z.im));
            }
            if let Some(ws) = &self.weights {
                fields.push(format_f64(ws[i]));
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        write_atomic(path, &self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self, FormatError> {
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| FormatError::Malformed("empty batch file".into()))??;
        let header: BatchHeader = serde_json::from_str(&header_line)?;
        if header.dim == 0 {
            return Err(FormatError::Malformed("dim must be at least 1".into()));
        }
        let expected_fields = 2 * header.dim + usize::from(header.measure.is_weighted());
        let mut samples = Vec::with_capacity(header.n);
        let mut weights = header.measure.is_weighted().then(Vec::new);
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_fields {
                return Err(FormatError::WrongLength {
                    expected: expected_fields,
                    got: fields.len(),
                });
            }
            let mut values = Vec::with_capacity(expected_fields);
            for field in &fields {
                let x: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| FormatError::Malformed(format!("bad float {field:?}")))?;
                if !x.is_finite() {
                    return Err(FormatError::Malformed("non-finite value in record".into()));
                }
                values.push(x);
            }
            let components: Vec<Complex64> = values[..2 * header.dim]
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            samples.push(
                StateVector::new(components)
                    .map_err(|e| FormatError::Malformed(e.to_string()))?,
            );
            if let Some(ws) = &mut weights {
                ws.push(values[2 * header.dim]);
            }
        }
        if samples.len() != header.n {
            return Err(FormatError::Malformed(format!(
                "header promises {} records, found {}",
                header.n,
                samples.len()
            )));
        }
        Ok(Self {
            dim: header.dim,
            measure: header.measure,
            seed: header.seed,
            rho_file: header.rho_file,
            samples,
            weights,
        })
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}

/// Estimator report as JSON, with matrices in the `{dim, entries}` format.
pub fn estimator_report_json(report: &EstimatorReport) -> String {
    let cov = match &report.cov_hat {
        Some(m) => matrix_json(m).trim_end().to_string(),
        None => "null".to_string(),
    };
    let ref_distance = match report.ref_distance {
        Some(d) => format_f64(d),
        None => "null".to_string(),
    };
    let rho_hat = matrix_json(&report.rho_hat).trim_end().to_string();
    let trace: f64 = (0..report.rho_hat.nrows()).map(|i| report.rho_hat[[i, i]].re).sum();
    format!(
        concat!(
            "{{\n",
            "  \"n\": {},\n",
            "  \"weight_sum\": {},\n",
            "  \"se_scale\": {},\n",
            "  \"mean_hat\": {},\n",
            "  \"mean_norm\": {},\n",
            "  \"cov_hat\": {},\n",
            "  \"rho_hat\": {},\n",
            "  \"rho_trace\": {},\n",
            "  \"on_sphere\": {},\n",
            "  \"ref_distance\": {}\n",
            "}}\n"
        ),
        report.n,
        format_f64(report.weight_sum),
        format_f64(report.se_scale),
        vector_json(&report.mean_hat),
        format_f64(report.mean_hat.norm()),
        cov,
        rho_hat,
        format_f64(trace),
        report.on_sphere,
        ref_distance,
    )
}
