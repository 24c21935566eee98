//! Two-stage parameter selection and ROC evaluation.
//!
//! Training picks the sparsity weight `lambda` first, refitting the nominal
//! model per candidate and scoring it by pooled detection performance on
//! labeled attack windows, then picks the threshold `alpha` with `lambda`
//! fixed. A window named as the holdout is mechanically rejected from every
//! training entry point so it cannot leak into selection.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::detector::{self, NominalModel, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::matfactor;
use crate::rpca::{self, RpcaConfig};

/// Relative singular-value floor shared with the detector's basis cut.
const NUMERICAL_RANK_FLOOR: f64 = 1e-12;

/// A scoring window with ground truth: one label per packet column.
#[derive(Debug, Clone)]
pub struct LabeledWindow {
    pub features: FeatureMatrix,
    pub name: String,
}

impl LabeledWindow {
    pub fn new(features: FeatureMatrix, name: impl Into<String>) -> Result<LabeledWindow> {
        let name = name.into();
        match &features.labels {
            Some(labels) if labels.len() == features.matrix.cols() => {
                Ok(LabeledWindow { features, name })
            }
            Some(labels) => Err(Error::DimensionMismatch(format!(
                "window '{name}' has {} labels for {} columns",
                labels.len(),
                features.matrix.cols()
            ))),
            None => Err(Error::InvalidConfig(format!(
                "window '{name}' has no labels and cannot be used for training"
            ))),
        }
    }

    pub fn labels(&self) -> &[bool] {
        self.features.labels.as_deref().expect("validated at construction")
    }
}

/// One operating point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Operating points ordered by decreasing `alpha` (so `fpr` and `tpr` are
/// nondecreasing along the list) and the trapezoidal area under them. The
/// integral closes the curve at the flag-everything limit (1, 1) so that a
/// detector separating the classes perfectly scores 1 even when no grid
/// threshold flags every item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// How a candidate parameter is judged. `Auc` is threshold-free and only
/// valid for the `lambda` stage; the `alpha` stage needs a per-threshold
/// metric. `TprAtFpr(budget)` is the best true-positive rate subject to a
/// false-positive budget, negative when no point meets the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMetric {
    Auc,
    Youden,
    TprAtFpr(f64),
}

impl SelectionMetric {
    pub fn token(&self) -> String {
        match self {
            SelectionMetric::Auc => "auc".to_string(),
            SelectionMetric::Youden => "youden".to_string(),
            SelectionMetric::TprAtFpr(budget) => format!("tpr@fpr<={budget}"),
        }
    }

    fn of_curve(&self, curve: &RocCurve) -> f64 {
        match self {
            SelectionMetric::Auc => curve.auc,
            SelectionMetric::Youden => curve
                .points
                .iter()
                .map(|p| p.tpr - p.fpr)
                .fold(f64::NEG_INFINITY, f64::max),
            SelectionMetric::TprAtFpr(budget) => curve
                .points
                .iter()
                .filter(|p| p.fpr <= *budget)
                .map(|p| p.tpr)
                .fold(-1.0, f64::max),
        }
    }

    fn of_point(&self, fpr: f64, tpr: f64) -> f64 {
        match self {
            SelectionMetric::Auc => unreachable!("guarded by threshold-stage validation"),
            SelectionMetric::Youden => tpr - fpr,
            SelectionMetric::TprAtFpr(budget) => {
                if fpr <= *budget {
                    tpr
                } else {
                    -1.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let SelectionMetric::TprAtFpr(budget) = self {
            if !(budget.is_finite() && (0.0..=1.0).contains(budget)) {
                return Err(Error::InvalidConfig(format!(
                    "false-positive budget must lie in [0, 1], got {budget}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<SelectionMetric> {
        if s == "auc" {
            return Ok(SelectionMetric::Auc);
        }
        if s == "youden" {
            return Ok(SelectionMetric::Youden);
        }
        if let Some(rest) = s.strip_prefix("tpr@fpr<=") {
            let budget: f64 = rest.parse().map_err(|_| {
                Error::InvalidConfig(format!("unreadable false-positive budget '{rest}'"))
            })?;
            let metric = SelectionMetric::TprAtFpr(budget);
            metric.validate()?;
            return Ok(metric);
        }
        Err(Error::InvalidConfig(format!(
            "unknown selection metric '{s}'; expected auc, youden, or tpr@fpr<=<budget>"
        )))
    }
}

impl Serialize for SelectionMetric {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for SelectionMetric {
    fn deserialize<D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<SelectionMetric, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Knobs shared by the training entry points. `holdout_name` is the window
/// excluded from training by name; passing such a window is an error, not a
/// silent skip.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub lambda_metric: SelectionMetric,
    pub alpha_metric: SelectionMetric,
    pub holdout_name: Option<String>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            lambda_metric: SelectionMetric::Auc,
            alpha_metric: SelectionMetric::Youden,
            holdout_name: None,
        }
    }
}

/// Per-window area under the curve; absent when the window's labels are all
/// one class (the pooled curve can still exist).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAuc {
    pub window: String,
    pub auc: Option<f64>,
}

/// Diagnostics for one successful `lambda` candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub basis_rank: usize,
    pub converged: bool,
    pub per_window_auc: Vec<WindowAuc>,
    pub pooled_auc: f64,
    pub lambda_metric: f64,
    pub chosen_alpha: f64,
    pub alpha_metric: f64,
    pub fpr_at_alpha: f64,
    pub tpr_at_alpha: f64,
}

/// One row of the sweep report; exactly one of `fit` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub lambda: f64,
    pub fit: Option<LambdaFit>,
    pub error: Option<String>,
}

/// The sweep's verdict plus everything needed to audit it. Both winners are
/// grid members verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub lambda_star: f64,
    pub alpha_star: f64,
    pub selection_metric: String,
    pub per_lambda: Vec<LambdaReport>,
}

/// Evaluation of one window: full curve plus the operating point at a fixed
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub window: String,
    pub roc: RocCurve,
    pub alpha: f64,
    pub fpr_at_alpha: f64,
    pub tpr_at_alpha: f64,
}

/// Computes the ROC curve of `scores` against `labels` over the threshold
/// grid. A point flags items with `score > alpha`; `tpr` is the flagged
/// fraction of attacks and `fpr` the flagged fraction of normals. The grid
/// is deduplicated and walked in decreasing order, and `auc` is the
/// trapezoidal integral of `tpr` over `fpr` across the listed points,
/// closed at the flag-everything terminus (1, 1). The closure matters when
/// some scores sit at or below the smallest threshold: those items are
/// never flagged by the strict rule, so the grid alone would end short of
/// `fpr = 1` and undercount the area.
pub fn roc_curve(scores: &[f64], labels: &[bool], alphas: &[f64]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!("non-finite score {bad}")));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Training(format!(
            "degenerate labels: {positives} attacks and {negatives} normals; the curve \
             needs at least one of each"
        )));
    }
    let grid = descending_grid(alphas)?;

    // One descending pass over items sorted by score; the flag set at each
    // threshold extends the previous one.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut next = 0;
    let mut flagged_pos = 0usize;
    let mut flagged_neg = 0usize;
    let mut points = Vec::with_capacity(grid.len());
    for alpha in grid {
        while next < order.len() && scores[order[next]] > alpha {
            if labels[order[next]] {
                flagged_pos += 1;
            } else {
                flagged_neg += 1;
            }
            next += 1;
        }
        points.push(RocPoint {
            alpha,
            fpr: flagged_neg as f64 / negatives as f64,
            tpr: flagged_pos as f64 / positives as f64,
        });
    }
    let last = points.last().expect("grid is nonempty");
    let auc = trapezoid_auc(&points) + (1.0 - last.fpr) * (last.tpr + 1.0) / 2.0;
    Ok(RocCurve { points, auc })
}

fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

fn descending_grid(alphas: &[f64]) -> Result<Vec<f64>> {
    validate_alpha_grid(alphas)?;
    let mut grid = alphas.to_vec();
    grid.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    grid.dedup();
    Ok(grid)
}

fn validate_alpha_grid(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig(
            "threshold grid must not be empty".to_string(),
        ));
    }
    if let Some(bad) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "threshold grid entries must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

fn validate_lambda_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig(
            "lambda grid must not be empty".to_string(),
        ));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "lambda grid entries must be finite and positive, got {bad}"
        )));
    }
    Ok(())
}

fn reject_holdout(windows: &[LabeledWindow], holdout_name: Option<&str>) -> Result<()> {
    if let Some(holdout) = holdout_name {
        if let Some(w) = windows.iter().find(|w| w.name == holdout) {
            return Err(Error::InvalidConfig(format!(
                "window '{}' is the declared holdout and cannot be used for training",
                w.name
            )));
        }
    }
    Ok(())
}

/// `(fpr, tpr)` of the flag rule `score > alpha`. Callers guarantee both
/// classes are present.
fn point_rates(scores: &[f64], labels: &[bool], alpha: f64) -> (f64, f64) {
    let mut flagged_pos = 0usize;
    let mut flagged_neg = 0usize;
    let mut pos = 0usize;
    for (&score, &label) in scores.iter().zip(labels) {
        if label {
            pos += 1;
            if score > alpha {
                flagged_pos += 1;
            }
        } else if score > alpha {
            flagged_neg += 1;
        }
    }
    let neg = labels.len() - pos;
    (
        flagged_neg as f64 / neg as f64,
        flagged_pos as f64 / pos as f64,
    )
}

/// Scores every window with the model and concatenates scores and labels in
/// window order.
fn pool_windows(
    model: &NominalModel,
    windows: &[LabeledWindow],
) -> Result<(Vec<f64>, Vec<bool>, Vec<Vec<f64>>)> {
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut per_window_scores = Vec::with_capacity(windows.len());
    for window in windows {
        let report = detector::score(&window.features, model)?;
        pooled_scores.extend_from_slice(&report.scores);
        pooled_labels.extend_from_slice(window.labels());
        per_window_scores.push(report.scores);
    }
    Ok((pooled_scores, pooled_labels, per_window_scores))
}

/// Threshold selection on already-pooled scores: evaluate the metric at
/// every grid point, take the maximum, and break ties toward the largest
/// threshold (fewer false positives at equal quality).
fn choose_alpha_pooled(
    scores: &[f64],
    labels: &[bool],
    alpha_grid: &[f64],
    metric: SelectionMetric,
) -> Result<(f64, f64, f64, f64)> {
    if metric == SelectionMetric::Auc {
        return Err(Error::InvalidConfig(
            "threshold selection needs a per-threshold metric (youden or tpr@fpr<=c); \
             the area under the curve does not depend on the threshold"
                .to_string(),
        ));
    }
    metric.validate()?;
    let curve = roc_curve(scores, labels, alpha_grid)?;
    // Points are in decreasing-alpha order; walk them in increasing order so
    // a tie replaces the incumbent and the largest tied alpha survives.
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for point in curve.points.iter().rev() {
        let value = metric.of_point(point.fpr, point.tpr);
        if best.map_or(true, |(_, incumbent, _, _)| value >= incumbent) {
            best = Some((point.alpha, value, point.fpr, point.tpr));
        }
    }
    Ok(best.expect("grid validated nonempty"))
}

/// Evaluates one fitted candidate model on the training windows.
fn evaluate_candidate(
    model: &NominalModel,
    windows: &[LabeledWindow],
    alpha_grid: &[f64],
    options: &SweepOptions,
) -> Result<LambdaFit> {
    let (pooled_scores, pooled_labels, per_window_scores) = pool_windows(model, windows)?;
    let mut per_window_auc = Vec::with_capacity(windows.len());
    for (window, scores) in windows.iter().zip(&per_window_scores) {
        let auc = match roc_curve(scores, window.labels(), alpha_grid) {
            Ok(curve) => Some(curve.auc),
            Err(Error::Training(_)) => None,
            Err(other) => return Err(other),
        };
        per_window_auc.push(WindowAuc {
            window: window.name.clone(),
            auc,
        });
    }
    let pooled = roc_curve(&pooled_scores, &pooled_labels, alpha_grid)?;
    let (chosen_alpha, alpha_metric, fpr_at_alpha, tpr_at_alpha) =
        choose_alpha_pooled(&pooled_scores, &pooled_labels, alpha_grid, options.alpha_metric)?;
    Ok(LambdaFit {
        basis_rank: model.basis.cols(),
        converged: model.fit_metadata.converged,
        per_window_auc,
        pooled_auc: pooled.auc,
        lambda_metric: options.lambda_metric.of_curve(&pooled),
        chosen_alpha,
        alpha_metric,
        fpr_at_alpha,
        tpr_at_alpha,
    })
}

/// Sweeps the sparsity weight: refit the nominal model on `y0` per grid
/// value, score the training windows, and keep the candidate with the best
/// pooled metric, breaking ties toward the smallest `lambda`. A degenerate
/// fit marks its candidate failed and excluded; every candidate failing is
/// a training error. The returned threshold is the winning candidate's
/// metric-optimal grid point.
pub fn sweep_lambda(
    y0: &FeatureMatrix,
    train_windows: &[LabeledWindow],
    lambda_grid: &[f64],
    gamma: f64,
    rpca_template: &RpcaConfig,
    alpha_grid: &[f64],
    options: &SweepOptions,
) -> Result<TrainOutcome> {
    validate_lambda_grid(lambda_grid)?;
    validate_alpha_grid(alpha_grid)?;
    options.lambda_metric.validate()?;
    reject_holdout(train_windows, options.holdout_name.as_deref())?;
    if train_windows.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one labeled training window is required".to_string(),
        ));
    }

    let mut grid = lambda_grid.to_vec();
    grid.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut per_lambda = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let mut config = rpca_template.clone();
        config.lambda = lambda;
        let report = match detector::fit_nominal(y0, lambda, gamma, &config) {
            Ok(model) => LambdaReport {
                lambda,
                fit: Some(evaluate_candidate(&model, train_windows, alpha_grid, options)?),
                error: None,
            },
            // A degenerate candidate is excluded, not fatal; anything else
            // would fail identically for every grid value.
            Err(Error::Numerical(msg)) => LambdaReport {
                lambda,
                fit: None,
                error: Some(msg),
            },
            Err(other) => return Err(other),
        };
        per_lambda.push(report);
    }

    let mut winner: Option<(f64, f64, f64)> = None;
    for report in &per_lambda {
        if let Some(fit) = &report.fit {
            if winner.map_or(true, |(_, incumbent, _)| fit.lambda_metric > incumbent) {
                winner = Some((report.lambda, fit.lambda_metric, fit.chosen_alpha));
            }
        }
    }
    let (lambda_star, _, alpha_star) = winner.ok_or_else(|| {
        let reasons: Vec<String> = per_lambda
            .iter()
            .map(|r| format!("{}: {}", r.lambda, r.error.as_deref().unwrap_or("unknown")))
            .collect();
        Error::Training(format!(
            "every lambda candidate failed ({})",
            reasons.join("; ")
        ))
    })?;

    Ok(TrainOutcome {
        lambda_star,
        alpha_star,
        selection_metric: format!(
            "lambda={},alpha={}",
            options.lambda_metric.token(),
            options.alpha_metric.token()
        ),
        per_lambda,
    })
}

/// Picks the detection threshold for a fixed model: the grid point
/// maximizing the per-threshold metric on the pooled training windows,
/// ties broken toward the largest threshold.
pub fn choose_alpha(
    model: &NominalModel,
    train_windows: &[LabeledWindow],
    alpha_grid: &[f64],
    options: &SweepOptions,
) -> Result<f64> {
    reject_holdout(train_windows, options.holdout_name.as_deref())?;
    if train_windows.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one labeled training window is required".to_string(),
        ));
    }
    let (pooled_scores, pooled_labels, _) = pool_windows(model, train_windows)?;
    let (alpha, _, _, _) =
        choose_alpha_pooled(&pooled_scores, &pooled_labels, alpha_grid, options.alpha_metric)?;
    Ok(alpha)
}

/// Evaluates a trained model on a window it never saw: the full curve over
/// the grid plus the operating point at the model's own threshold.
pub fn evaluate_holdout(
    model: &NominalModel,
    holdout: &LabeledWindow,
    alpha_grid: &[f64],
) -> Result<HoldoutReport> {
    let report = detector::score(&holdout.features, model)?;
    let roc = roc_curve(&report.scores, holdout.labels(), alpha_grid)?;
    let (fpr_at_alpha, tpr_at_alpha) = point_rates(&report.scores, holdout.labels(), model.alpha);
    Ok(HoldoutReport {
        window: holdout.name.clone(),
        roc,
        alpha: model.alpha,
        fpr_at_alpha,
        tpr_at_alpha,
    })
}

/// Basis size rule for the truncated-SVD baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaRank {
    /// Keep exactly this many leading singular directions.
    K(usize),
    /// Keep directions whose singular value exceeds this relative cutoff,
    /// mirroring the detector's rule.
    Gamma(f64),
}

/// The comparison baseline: the same decision scheme with the nominal basis
/// taken from a truncated SVD of the raw training window (no sparse
/// separation). Returns one report per window, evaluated at the default
/// threshold; an empty basis (`K(0)`) makes each score the column's largest
/// absolute entry.
pub fn pca_baseline(
    y0: &FeatureMatrix,
    rank: PcaRank,
    windows: &[LabeledWindow],
    alpha_grid: &[f64],
) -> Result<Vec<HoldoutReport>> {
    validate_alpha_grid(alpha_grid)?;
    if y0.matrix.is_empty() {
        return Err(Error::DimensionMismatch(
            "training window is empty".to_string(),
        ));
    }
    let factors = matfactor::svd(&y0.matrix)?;
    let k = match rank {
        PcaRank::K(k) => {
            if k > factors.left_vectors.cols() {
                return Err(Error::InvalidConfig(format!(
                    "basis size {k} exceeds the {} singular directions available",
                    factors.left_vectors.cols()
                )));
            }
            k
        }
        PcaRank::Gamma(gamma) => {
            if !(gamma.is_finite() && gamma >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "gamma must be finite and nonnegative, got {gamma}"
                )));
            }
            let sigma_max = factors.singular_values.first().copied().unwrap_or(0.0);
            let cutoff = gamma.max(NUMERICAL_RANK_FLOOR) * sigma_max;
            factors
                .singular_values
                .iter()
                .take_while(|&&s| s > cutoff)
                .count()
        }
    };
    let basis = factors.left_vectors.slice_cols(0..k)?;

    let mut reports = Vec::with_capacity(windows.len());
    for window in windows {
        if window.features.matrix.rows() != basis.rows() {
            return Err(Error::DimensionMismatch(format!(
                "window '{}' has {} feature rows but the baseline basis has {}",
                window.name,
                window.features.matrix.rows(),
                basis.rows()
            )));
        }
        let (_, scores) = detector::residual_against_basis(&basis, &window.features.matrix);
        let roc = roc_curve(&scores, window.labels(), alpha_grid)?;
        let (fpr_at_alpha, tpr_at_alpha) = point_rates(&scores, window.labels(), DEFAULT_ALPHA);
        reports.push(HoldoutReport {
            window: window.name.clone(),
            roc,
            alpha: DEFAULT_ALPHA,
            fpr_at_alpha,
            tpr_at_alpha,
        });
    }
    Ok(reports)
}

/// 101 evenly spaced thresholds spanning [0, 1].
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

/// 15 log-spaced sparsity weights from half the size-based default up to 30
/// times it, wide enough to cover the span where training typically lands.
pub fn default_lambda_grid(rows: usize, cols: usize) -> Result<Vec<f64>> {
    let nominal = rpca::nominal_lambda(rows, cols)?;
    let lo = nominal / 2.0;
    let ratio = 60.0f64;
    Ok((0..15)
        .map(|i| lo * ratio.powf(f64::from(i) / 14.0))
        .collect())
}

/// Writes a curve as a tab-separated table: `alpha`, `fpr`, `tpr`.
pub fn write_roc_table(curve: &RocCurve, mut out: impl Write) -> Result<()> {
    let werr = |e: std::io::Error| Error::MalformedInput(format!("table write failed: {e}"));
    writeln!(out, "alpha\tfpr\ttpr").map_err(werr)?;
    for p in &curve.points {
        writeln!(out, "{}\t{}\t{}", p.alpha, p.fpr, p.tpr).map_err(werr)?;
    }
    Ok(())
}

/// Writes the sweep report as a tab-separated table, one row per candidate.
pub fn write_train_report(outcome: &TrainOutcome, mut out: impl Write) -> Result<()> {
    let werr = |e: std::io::Error| Error::MalformedInput(format!("table write failed: {e}"));
    writeln!(
        out,
        "lambda\tstatus\tbasis_rank\tpooled_auc\tlambda_metric\tchosen_alpha\talpha_metric\
         \tfpr_at_alpha\ttpr_at_alpha\tper_window_auc\terror"
    )
    .map_err(werr)?;
    for report in &outcome.per_lambda {
        match &report.fit {
            Some(fit) => {
                let per_window: Vec<String> = fit
                    .per_window_auc
                    .iter()
                    .map(|w| match w.auc {
                        Some(auc) => format!("{}={}", w.window, auc),
                        None => format!("{}=na", w.window),
                    })
                    .collect();
                writeln!(
                    out,
                    "{}\tok\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
                    report.lambda,
                    fit.basis_rank,
                    fit.pooled_auc,
                    fit.lambda_metric,
                    fit.chosen_alpha,
                    fit.alpha_metric,
                    fit.fpr_at_alpha,
                    fit.tpr_at_alpha,
                    per_window.join(";")
                )
                .map_err(werr)?;
            }
            None => {
                writeln!(
                    out,
                    "{}\tfailed\t\t\t\t\t\t\t\t\t{}",
                    report.lambda,
                    report.error.as_deref().unwrap_or("")
                )
                .map_err(werr)?;
            }
        }
    }
    Ok(())
}
