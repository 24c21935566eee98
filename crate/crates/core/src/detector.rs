//! Nominal-subspace model and residual scoring.
//!
//! Fitting runs the pursuit decomposition on an attack-free training window
//! and keeps the left singular vectors of the low-rank part whose singular
//! values clear a relative cutoff. Scoring projects new columns onto that
//! basis; the per-column infinity norm of what the projection cannot explain
//! is the anomaly score, and a packet is flagged when its score strictly
//! exceeds the threshold `alpha`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EncoderSpec, FeatureMatrix, UNENCODED_FINGERPRINT};
use crate::fsutil;
use crate::matfactor::{self, Matrix};
use crate::rpca::{self, RpcaConfig};

/// Detection threshold used until training picks one.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Default relative singular-value cutoff for basis selection: low enough to
/// keep everything numerically nonzero, because the fit's `lambda` is the
/// intended rank control. The PCA baseline, which has no `lambda`, leans on
/// this knob instead.
pub const DEFAULT_GAMMA: f64 = 1e-6;

/// Floor for the basis cutoff. A `gamma` below this is clamped up so that
/// floating-point dust from the decomposition never enters the basis.
const NUMERICAL_RANK_FLOOR: f64 = 1e-12;

/// Orthonormality tolerance enforced when a model is loaded from disk.
const BASIS_ORTHO_TOL: f64 = 1e-10;

/// Summary of the decomposition behind a fitted model. `converged = false`
/// is a recorded warning, not an error; the model is still usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// The nominal operating model: an orthonormal basis for the low-rank
/// subspace plus the parameters that produced it and the encoder vocabulary
/// it expects. `encoder` is absent when the training window was built from
/// a raw matrix rather than encoded packets.
#[derive(Debug, Clone)]
pub struct NominalModel {
    /// `m x k` with orthonormal columns, `k >= 1`.
    pub basis: Matrix,
    /// Relative singular-value cutoff used to pick `k`.
    pub gamma: f64,
    /// Sparsity weight of the fit.
    pub lambda: f64,
    /// Detection threshold; scores strictly above it are flagged.
    pub alpha: f64,
    pub encoder: Option<EncoderSpec>,
    pub fit_metadata: FitMetadata,
}

impl NominalModel {
    /// Fingerprint of the vocabulary this model expects.
    pub fn expected_fingerprint(&self) -> String {
        self.encoder
            .as_ref()
            .map(EncoderSpec::fingerprint)
            .unwrap_or_else(|| UNENCODED_FINGERPRINT.to_string())
    }

    /// Checks the invariants every usable model satisfies; run when loading
    /// from disk so a corrupted file cannot produce silent nonsense.
    pub fn validate(&self) -> Result<()> {
        if self.basis.cols() == 0 || self.basis.is_empty() {
            return Err(Error::MalformedInput(
                "model basis must have at least one column".to_string(),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::MalformedInput(format!(
                "model alpha must be finite and positive, got {}",
                self.alpha
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::MalformedInput(format!(
                "model lambda must be finite and positive, got {}",
                self.lambda
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::MalformedInput(format!(
                "model gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        let gram = &self.basis.transpose() * &self.basis;
        for i in 0..gram.rows() {
            for j in 0..gram.cols() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram.get(i, j) - want).abs() > BASIS_ORTHO_TOL {
                    return Err(Error::MalformedInput(format!(
                        "model basis is not orthonormal at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-packet scoring output. `flags[i]` is exactly `scores[i] > alpha`, and
/// `scores[i]` is the largest absolute entry of residual column `i`.
#[derive(Debug, Clone)]
pub struct DetectionReport {
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    pub residual: Matrix,
    pub packet_index: Vec<u64>,
}

/// Fits the nominal model on a training window.
///
/// `lambda` must equal `rpca_config.lambda`; both are taken so call sites
/// state the sparsity weight explicitly rather than burying it in a config
/// clone. The basis keeps the left singular vectors of the low-rank part
/// whose singular values exceed `max(gamma, 1e-12) * sigma_max`. No
/// surviving singular value is a degenerate-model error; a non-converged
/// decomposition is only recorded in `fit_metadata`.
pub fn fit_nominal(
    y0: &FeatureMatrix,
    lambda: f64,
    gamma: f64,
    rpca_config: &RpcaConfig,
) -> Result<NominalModel> {
    if y0.matrix.is_empty() {
        return Err(Error::DimensionMismatch(
            "training window is empty".to_string(),
        ));
    }
    if rpca_config.lambda != lambda {
        return Err(Error::InvalidConfig(format!(
            "lambda argument {lambda} disagrees with rpca config lambda {}",
            rpca_config.lambda
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma must be finite and nonnegative, got {gamma}"
        )));
    }

    let result = rpca::rpca_decompose(&y0.matrix, rpca_config)?;
    let factors = matfactor::svd(&result.l)?;
    let sigma_max = factors.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = gamma.max(NUMERICAL_RANK_FLOOR) * sigma_max;
    let k = factors
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff)
        .count();
    if sigma_max <= 0.0 || k == 0 {
        return Err(Error::Numerical(format!(
            "degenerate model: no singular value of the low-rank part clears \
             the cutoff (sigma_max {sigma_max}, gamma {gamma})"
        )));
    }

    Ok(NominalModel {
        basis: factors.left_vectors.slice_cols(0..k)?,
        gamma,
        lambda,
        alpha: DEFAULT_ALPHA,
        encoder: y0.encoder.clone(),
        fit_metadata: FitMetadata {
            rank: rpca::rank_of(&result, NUMERICAL_RANK_FLOOR),
            iterations: result.iterations,
            converged: result.converged,
        },
    })
}

/// Scores a window against the model.
///
/// The projection is `basis * basis^T * ya`; the residual is what the
/// nominal subspace cannot explain. A row-count mismatch is an argument
/// error naming the encoder fingerprint the model was fit against.
pub fn score(ya: &FeatureMatrix, model: &NominalModel) -> Result<DetectionReport> {
    if ya.matrix.rows() != model.basis.rows() {
        return Err(Error::DimensionMismatch(format!(
            "window has {} feature rows but the model expects {} (model encoder \
             fingerprint {})",
            ya.matrix.rows(),
            model.basis.rows(),
            model.expected_fingerprint()
        )));
    }
    let (residual, scores) = residual_against_basis(&model.basis, &ya.matrix);
    let flags = scores.iter().map(|&s| s > model.alpha).collect();
    Ok(DetectionReport {
        scores,
        flags,
        residual,
        packet_index: ya.packet_index.clone(),
    })
}

/// Shared projection kernel: residual `ya - basis * basis^T * ya` and the
/// per-column infinity norms of that residual. Also used by the PCA
/// baseline, whose basis comes from a plain truncated SVD and may be empty
/// (rank 0), in which case nothing is explained and the residual is `ya`.
pub fn residual_against_basis(basis: &Matrix, ya: &Matrix) -> (Matrix, Vec<f64>) {
    assert_eq!(
        basis.rows(),
        ya.rows(),
        "basis and data row counts must agree"
    );
    let residual = if basis.cols() == 0 {
        ya.clone()
    } else {
        let coords = &basis.transpose() * ya;
        let projected = basis * &coords;
        ya - &projected
    };
    let scores = (0..residual.cols())
        .map(|j| {
            residual
                .column(j)
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
        })
        .collect();
    (residual, scores)
}

/// Writes the per-packet score table: `packet_index`, `score`, `flagged`.
pub fn write_detection_tsv(report: &DetectionReport, mut out: impl Write) -> Result<()> {
    let werr = |e: std::io::Error| Error::MalformedInput(format!("table write failed: {e}"));
    writeln!(out, "packet_index\tscore\tflagged").map_err(werr)?;
    for i in 0..report.scores.len() {
        writeln!(
            out,
            "{}\t{}\t{}",
            report.packet_index[i],
            report.scores[i],
            u8::from(report.flags[i])
        )
        .map_err(werr)?;
    }
    Ok(())
}

const MODEL_MAGIC: &[u8; 4] = b"PSNM";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    basis_rows: usize,
    basis_cols: usize,
    gamma: f64,
    lambda: f64,
    alpha: f64,
    fit_metadata: FitMetadata,
    encoder: Option<EncoderSpec>,
}

/// Serializes a model into the `PSNM` container (see `docs/FORMATS.md`):
/// magic, version, JSON header, little-endian `f64` column-major basis.
pub fn model_to_bytes(model: &NominalModel) -> Result<Vec<u8>> {
    model.validate()?;
    let header = ModelHeader {
        basis_rows: model.basis.rows(),
        basis_cols: model.basis.cols(),
        gamma: model.gamma,
        lambda: model.lambda,
        alpha: model.alpha,
        fit_metadata: model.fit_metadata.clone(),
        encoder: model.encoder.clone(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::MalformedInput(format!("header serialization failed: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    for j in 0..model.basis.cols() {
        for &v in model.basis.column(j) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Inverse of [`model_to_bytes`], validating structure and model invariants
/// so a loaded model scores exactly like the one that was saved.
pub fn model_from_bytes(bytes: &[u8]) -> Result<NominalModel> {
    let fail = |msg: &str| Error::MalformedInput(format!("model file: {msg}"));
    if bytes.len() < 16 {
        return Err(fail("truncated before header"));
    }
    if &bytes[0..4] != MODEL_MAGIC {
        return Err(fail("bad magic, expected PSNM"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .ok_or_else(|| fail("header length overflows"))?;
    if bytes.len() < header_end {
        return Err(fail("truncated header"));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| fail(&format!("unreadable header: {e}")))?;
    let payload_len = header
        .basis_rows
        .checked_mul(header.basis_cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| fail("basis size overflows"))?;
    if bytes.len() != header_end + payload_len {
        return Err(fail(&format!(
            "expected {} bytes total, file has {}",
            header_end + payload_len,
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(header.basis_rows * header.basis_cols);
    for chunk in bytes[header_end..].chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let model = NominalModel {
        basis: Matrix::from_col_major(header.basis_rows, header.basis_cols, data)?,
        gamma: header.gamma,
        lambda: header.lambda,
        alpha: header.alpha,
        encoder: header.encoder,
        fit_metadata: header.fit_metadata,
    };
    model.validate()?;
    Ok(model)
}

/// Atomically writes a model file.
pub fn write_model(model: &NominalModel, path: &Path) -> Result<()> {
    fsutil::atomic_write_bytes(path, &model_to_bytes(model)?)
}

/// Reads and validates a model file.
pub fn read_model(path: &Path) -> Result<NominalModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
