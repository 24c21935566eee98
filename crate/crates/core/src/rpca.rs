//! Stable principal component pursuit: split a data matrix `Y` into a
//! low-rank part `L`, a sparse part `S`, and a pointwise-bounded slack `E` by
//! minimizing `||L||_* + lambda * ||S||_1` subject to `|Y - (L + S)| <= eps`
//! entrywise.
//!
//! The program is solved with an inexact augmented-Lagrangian / alternating
//! direction iteration in which every block update is an exact proximal
//! step: singular value thresholding for `L` (with a hard rank cap), entrywise
//! soft thresholding for `S`, and an entrywise clamp into the epsilon box for
//! `E`. The multiplier matrix is updated with the current residual and the
//! penalty grows geometrically.

use crate::error::{Error, Result};
use crate::matfactor::{self, Matrix};

/// Penalty ceiling. Purely an overflow guard: the geometric growth schedule
/// would otherwise exceed `f64` range near iteration 1600.
const MU_CAP: f64 = 1e250;

/// Coupling constant that balances the nuclear-norm and l1 terms at the
/// scale where exact recovery guarantees hold: `1 / sqrt(max(m, n))`.
///
/// Zero dimensions are an argument error.
pub fn nominal_lambda(m: usize, n: usize) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    Ok(1.0 / (m.max(n) as f64).sqrt())
}

/// Pointwise error bound for the pursuit constraint: one scalar for every
/// entry, or a full matrix of per-entry bounds.
#[derive(Debug, Clone)]
pub enum EpsilonBound {
    Scalar(f64),
    PerEntry(Matrix),
}

impl Default for EpsilonBound {
    fn default() -> Self {
        EpsilonBound::Scalar(0.0)
    }
}

impl EpsilonBound {
    fn validate(&self, shape: (usize, usize)) -> Result<()> {
        match self {
            EpsilonBound::Scalar(e) => {
                if !(e.is_finite() && *e >= 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "epsilon must be finite and nonnegative, got {e}"
                    )));
                }
            }
            EpsilonBound::PerEntry(m) => {
                if m.shape() != shape {
                    return Err(Error::DimensionMismatch(format!(
                        "epsilon shape {:?} does not match data shape {:?}",
                        m.shape(),
                        shape
                    )));
                }
                if (0..m.cols()).any(|j| m.column(j).iter().any(|&v| v < 0.0)) {
                    return Err(Error::InvalidConfig(
                        "epsilon entries must be nonnegative".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Solver configuration. `lambda` has no sensible universal default and must
/// be chosen by the caller (see [`nominal_lambda`] and the trainer's sweep);
/// everything else defaults to the standard schedule.
#[derive(Debug, Clone)]
pub struct RpcaConfig {
    /// Sparsity weight, > 0.
    pub lambda: f64,
    /// Pointwise slack bound; default exact equality (zero).
    pub epsilon: EpsilonBound,
    /// Relative Frobenius residual below which the iteration stops.
    pub tol: f64,
    /// Iteration cap; hitting it returns `converged = false`.
    pub max_iter: usize,
    /// Hard cap on the rank of `L`, enforced inside every `L` update.
    pub max_rank: usize,
    /// Initial penalty weight; `None` selects `1.25 / opnorm(Y)`.
    pub mu_init: Option<f64>,
    /// Geometric penalty growth factor, > 1.
    pub rho: f64,
}

impl RpcaConfig {
    pub fn new(lambda: f64) -> Self {
        RpcaConfig {
            lambda,
            epsilon: EpsilonBound::default(),
            tol: 1e-7,
            max_iter: 1000,
            max_rank: 40,
            mu_init: None,
            rho: 1.5,
        }
    }

    fn validate(&self, shape: (usize, usize)) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and positive, got {}",
                self.lambda
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be finite and positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.rho.is_finite() && self.rho > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rho must be finite and greater than 1, got {}",
                self.rho
            )));
        }
        if let Some(mu) = self.mu_init {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "mu_init must be finite and positive, got {mu}"
                )));
            }
        }
        self.epsilon.validate(shape)
    }
}

/// Decomposition output. `l + s + e` reconstructs the input to within
/// `tol * ||Y||_F` whenever `converged` is true; `|e|` respects the epsilon
/// box entrywise; `rank(l)` never exceeds the configured cap.
#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub l: Matrix,
    pub s: Matrix,
    pub e: Matrix,
    /// Spectrum of `l` as reported by the final thresholding step: length
    /// `min(m, n)`, nonincreasing, zero beyond the rank cap.
    pub singular_values: Vec<f64>,
    /// Block-update passes performed.
    pub iterations: usize,
    /// True when the relative residual dropped below `tol` within the
    /// iteration budget; false means the cap was hit and the caller decides.
    pub converged: bool,
    /// Final relative Frobenius residual `||Y - L - S - E||_F / ||Y||_F`.
    pub final_residual: f64,
}

/// Counts spectrum entries above `rel_cutoff` times the largest one.
///
/// `rel_cutoff` must lie in (0, 1). A zero spectrum has rank 0.
pub fn rank_of(result: &RpcaResult, rel_cutoff: f64) -> usize {
    assert!(
        rel_cutoff > 0.0 && rel_cutoff < 1.0,
        "relative cutoff must lie in (0, 1), got {rel_cutoff}"
    );
    let top = result
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v));
    if top <= 0.0 {
        return 0;
    }
    result
        .singular_values
        .iter()
        .filter(|&&v| v > rel_cutoff * top)
        .count()
}

/// One augmented-Lagrangian iterate. Kept separate from the driver loop so
/// tests can evaluate the objective between block and multiplier updates.
struct AdmmState {
    l: Matrix,
    s: Matrix,
    e: Matrix,
    /// Multiplier matrix for the reconstruction constraint.
    dual: Matrix,
    mu: f64,
    /// Spectrum of `l` from its last thresholding update; kept so the
    /// nuclear norm of the iterate is available without a fresh SVD.
    l_spectrum: Vec<f64>,
    /// `Y - L - S - E` for the current blocks.
    residual: Matrix,
}

impl AdmmState {
    fn init(y: &Matrix, config: &RpcaConfig) -> Result<Self> {
        let op_norm = matfactor::svd(y)?.singular_values[0];
        debug_assert!(op_norm > 0.0, "zero matrices are handled before init");
        let (m, n) = y.shape();
        // Scale-aware warm start: the multiplier starts at Y normalized by
        // the larger of its operator norm and its max entry over lambda.
        let dual_scale = op_norm.max(y.max_abs() / config.lambda);
        let dual = y.scale(1.0 / dual_scale);
        let mu = config.mu_init.unwrap_or(1.25 / op_norm);
        Ok(AdmmState {
            l: Matrix::zeros(m, n),
            s: Matrix::zeros(m, n),
            e: Matrix::zeros(m, n),
            dual,
            mu,
            l_spectrum: vec![0.0; m.min(n)],
            residual: y.clone(),
        })
    }

    /// Exact proximal updates of `L`, `S`, `E` in that order, against the
    /// current multiplier and penalty. Returns the Frobenius norm of the
    /// new reconstruction residual.
    fn update_blocks(&mut self, y: &Matrix, config: &RpcaConfig) -> Result<f64> {
        let cap = config.max_rank.min(y.rows().min(y.cols()));
        let dual_over_mu = self.dual.scale(1.0 / self.mu);

        let l_target = &(&(y - &self.s) - &self.e) + &dual_over_mu;
        let svt_out = matfactor::svt(&l_target, 1.0 / self.mu, cap)?;
        self.l = svt_out.matrix;
        self.l_spectrum = svt_out.singular_values;

        let s_target = &(&(y - &self.l) - &self.e) + &dual_over_mu;
        self.s = matfactor::shrink_matrix(&s_target, config.lambda / self.mu)?;

        let e_target = &(&(y - &self.l) - &self.s) + &dual_over_mu;
        self.e = match &config.epsilon {
            // The zero box pins the slack at zero exactly.
            EpsilonBound::Scalar(e) if *e == 0.0 => Matrix::zeros(y.rows(), y.cols()),
            EpsilonBound::Scalar(e) => e_target.clamp_entries(-e, *e)?,
            EpsilonBound::PerEntry(bound) => e_target.clamp_entries_per_entry(bound)?,
        };

        self.residual = &(&(y - &self.l) - &self.s) - &self.e;
        Ok(self.residual.frobenius_norm())
    }

    /// Multiplier step and geometric penalty growth.
    fn update_dual(&mut self, config: &RpcaConfig) {
        self.dual = &self.dual + &self.residual.scale(self.mu);
        self.mu = (self.mu * config.rho).min(MU_CAP);
    }

    /// Augmented-Lagrangian objective at the current blocks and multiplier:
    /// `||L||_* + lambda ||S||_1 + <dual, R> + mu/2 ||R||_F^2`.
    #[cfg(test)]
    fn augmented_lagrangian(&self, lambda: f64) -> f64 {
        let nuclear: f64 = self.l_spectrum.iter().sum();
        let fro = self.residual.frobenius_norm();
        nuclear + lambda * self.s.l1_norm() + self.dual.dot(&self.residual)
            + 0.5 * self.mu * fro * fro
    }
}

/// Solves the pursuit program for `y` under `config`.
///
/// Deterministic for fixed inputs. Non-convergence within the iteration
/// budget is not an error: the result carries `converged = false` and the
/// caller decides. Only an SVD failure aborts.
pub fn rpca_decompose(y: &Matrix, config: &RpcaConfig) -> Result<RpcaResult> {
    config.validate(y.shape())?;
    if y.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "decomposition requires a nonempty matrix, got {:?}",
            y.shape()
        )));
    }

    let (m, n) = y.shape();
    let y_norm = y.frobenius_norm();
    if y_norm == 0.0 {
        // Zero is a fixed point of every block update; skip the iteration to
        // avoid dividing by the zero operator norm.
        return Ok(RpcaResult {
            l: Matrix::zeros(m, n),
            s: Matrix::zeros(m, n),
            e: Matrix::zeros(m, n),
            singular_values: vec![0.0; m.min(n)],
            iterations: 0,
            converged: true,
            final_residual: 0.0,
        });
    }

    let mut state = AdmmState::init(y, config)?;
    let mut iterations = 0;
    let mut converged = false;
    let mut rel_residual = f64::INFINITY;

    while iterations < config.max_iter {
        let residual_norm = state.update_blocks(y, config)?;
        iterations += 1;
        rel_residual = residual_norm / y_norm;
        if rel_residual < config.tol {
            converged = true;
            break;
        }
        state.update_dual(config);
    }

    Ok(RpcaResult {
        l: state.l,
        s: state.s,
        e: state.e,
        singular_values: state.l_spectrum,
        iterations,
        converged,
        final_residual: rel_residual,
    })
}
