//! Acceptance gate: one test per shipped guarantee, each printing a single
//! `ACCEPT-xx pass|fail` line and enforcing its runtime budget. Run with
//! `cargo test -p pcapsift --test acceptance -- --nocapture` to see the
//! lines for passing criteria too.

use pcapsift::detector::{fit_nominal, score, write_detection_tsv, DEFAULT_GAMMA};
use pcapsift::features::{
    build_encoder, default_protocols, encode, slice_columns, write_feature_matrix,
    FeatureMatrix, DEFAULT_IMPORTANT_PORTS,
};
use pcapsift::features::{write_labels_csv, write_packet_csv};
use pcapsift::matfactor::{pca_truncate, svd, svt, Matrix};
use pcapsift::rpca::{nominal_lambda, rank_of, rpca_decompose, RpcaConfig};
use pcapsift::synth::{generate, ScenarioConfig, SyntheticTrace};
use pcapsift::trainer::{
    default_alpha_grid, default_lambda_grid, evaluate_holdout, pca_baseline, roc_curve,
    sweep_lambda, write_roc_table, write_train_report, LabeledWindow, PcaRank, SweepOptions,
    TrainOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::time::{Duration, Instant};

/// Runs `body` under a wall-clock budget and prints exactly one
/// machine-greppable verdict line for it.
fn criterion(id: &str, what: &str, budget: Duration, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    match outcome {
        Ok(()) if elapsed <= budget => {
            println!("{id} pass {what} ({elapsed:.2?} of {budget:?} budget)");
        }
        Ok(()) => {
            println!("{id} fail {what} (runtime {elapsed:.2?} exceeds {budget:?} budget)");
            panic!("{id} exceeded its runtime budget");
        }
        Err(cause) => {
            println!("{id} fail {what} ({elapsed:.2?})");
            std::panic::resume_unwind(cause);
        }
    }
}

fn seeded_uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>() * 2.0 - 1.0
}

#[test]
fn truncation_error_equals_the_spectral_tail() {
    criterion(
        "ACCEPT-01",
        "rank-k truncation error equals the root of the discarded spectrum",
        Duration::from_secs(10),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(101);
            for _ in 0..100 {
                let rows = rng.random_range(1..=20);
                let cols = rng.random_range(1..=20);
                let y = Matrix::from_fn(rows, cols, |_, _| seeded_uniform(&mut rng)).unwrap();
                let factors = svd(&y).unwrap();
                // The spectrum itself must carry the full Frobenius energy.
                let energy: f64 = factors.singular_values.iter().map(|s| s * s).sum();
                assert!(
                    (energy.sqrt() - y.frobenius_norm()).abs() <= 1e-10,
                    "spectrum energy mismatch for {rows}x{cols}"
                );
                for k in 0..=rows.min(cols) {
                    let truncation = pca_truncate(&y, k).unwrap();
                    let err = (&y - &truncation.l).frobenius_norm();
                    let tail: f64 = factors.singular_values[k..].iter().map(|s| s * s).sum();
                    assert!(
                        (err - tail.sqrt()).abs() <= 1e-10,
                        "{rows}x{cols} k={k}: error {err} vs tail {}",
                        tail.sqrt()
                    );
                }
            }
        },
    );
}

/// Minimizes `tau*x + (x - sigma)^2 / 2` over `x >= 0` by a dense grid
/// search refined around the incumbent, finished with one parabolic-vertex
/// step (the objective differences near the minimum fall below f64
/// resolution, so a bare grid cannot localize it to 1e-8 on its own).
/// Deliberately knows nothing about the closed-form answer.
fn search_shrunk_value(sigma: f64, tau: f64) -> f64 {
    let objective = |x: f64| tau * x + 0.5 * (x - sigma) * (x - sigma);
    let (mut lo, mut hi) = (0.0f64, sigma + tau + 1.0);
    let mut best = 0.0f64;
    let mut step = 0.0f64;
    for _ in 0..2 {
        step = (hi - lo) / 2000.0;
        let mut best_val = f64::INFINITY;
        for i in 0..=2000 {
            let x = lo + step * i as f64;
            let v = objective(x);
            if v < best_val {
                best_val = v;
                best = x;
            }
        }
        lo = (best - step).max(0.0);
        hi = best + step;
    }
    let (below, at, above) = (
        objective(best - step),
        objective(best),
        objective(best + step),
    );
    let curvature = below - 2.0 * at + above;
    if curvature > 0.0 {
        best -= step * (above - below) / (2.0 * curvature);
    }
    best.max(0.0)
}

/// Orthogonal factor drawn from the left singular vectors of a seeded
/// square matrix.
fn seeded_rotation(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let raw = Matrix::from_fn(n, n, |_, _| seeded_uniform(rng)).unwrap();
    svd(&raw).unwrap().left_vectors
}

#[test]
fn singular_value_shrinkage_matches_a_direct_search() {
    criterion(
        "ACCEPT-02",
        "svt agrees with a dense per-singular-value search of its objective",
        Duration::from_secs(10),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(202);
            for _ in 0..50 {
                let rows = rng.random_range(3..=10);
                let cols = rng.random_range(3..=10);
                let r = rows.min(cols);
                // Construction with a known spectrum: rotations around a
                // positive diagonal.
                let diag: Vec<f64> = (0..r).map(|_| rng.random::<f64>() * 5.0 + 0.01).collect();
                let q1 = seeded_rotation(rows, &mut rng);
                let q2 = seeded_rotation(cols, &mut rng);
                let d = Matrix::from_fn(rows, cols, |i, j| {
                    if i == j {
                        diag[i.min(r - 1)]
                    } else {
                        0.0
                    }
                })
                .unwrap();
                let m = &(&q1 * &d) * &q2.transpose();
                let tau = rng.random::<f64>() * 3.0;

                let searched: Vec<f64> =
                    diag.iter().map(|&s| search_shrunk_value(s, tau)).collect();
                let d_star = Matrix::from_fn(rows, cols, |i, j| {
                    if i == j && i < r {
                        searched[i]
                    } else {
                        0.0
                    }
                })
                .unwrap();
                let oracle = &(&q1 * &d_star) * &q2.transpose();

                let outcome = svt(&m, tau, r).unwrap();
                let gap = (&outcome.matrix - &oracle).max_abs();
                assert!(
                    gap <= 1e-8,
                    "{rows}x{cols} tau={tau}: entrywise gap {gap}"
                );
            }
        },
    );
}

#[test]
fn planted_low_rank_plus_spikes_is_recovered() {
    criterion(
        "ACCEPT-03",
        "200x200 planted rank-5 with 5% spikes is split cleanly at the nominal weight",
        Duration::from_secs(60),
        || {
            let n = 200;
            let rank = 5;
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let a = Matrix::from_fn(n, rank, |_, _| seeded_uniform(&mut rng)).unwrap();
            let b = Matrix::from_fn(rank, n, |_, _| seeded_uniform(&mut rng)).unwrap();
            let low = &a * &b;
            let mut spikes = vec![0.0f64; n * n];
            let mut placed = 0usize;
            while placed < (n * n) / 20 {
                let idx = rng.random_range(0..n * n);
                if spikes[idx] == 0.0 {
                    spikes[idx] = if rng.random::<bool>() { 10.0 } else { -10.0 };
                    placed += 1;
                }
            }
            let sparse = Matrix::from_col_major(n, n, spikes.clone()).unwrap();
            let y = &low + &sparse;

            let lambda = nominal_lambda(n, n).unwrap();
            let result = rpca_decompose(&y, &RpcaConfig::new(lambda)).unwrap();
            assert!(result.converged, "no convergence in {} iterations", result.iterations);
            assert!(result.iterations <= 1000);

            let rel_err = (&result.l - &low).frobenius_norm() / low.frobenius_norm();
            assert!(rel_err <= 1e-3, "relative low-rank error {rel_err}");

            let (mut hit, mut total) = (0usize, 0usize);
            for j in 0..n {
                for i in 0..n {
                    if spikes[j * n + i] != 0.0 {
                        total += 1;
                        if result.s.get(i, j).abs() > 1e-6 {
                            hit += 1;
                        }
                    }
                }
            }
            let recall = hit as f64 / total as f64;
            assert!(recall >= 0.99, "spike support recall {recall}");
        },
    );
}

/// Default scenario encoded end to end; the encoder vocabulary comes from
/// `records` (pass the training slice to get training-scope encoding).
fn encode_trace(trace: &SyntheticTrace, vocabulary: &[pcapsift::features::PacketRecord]) -> FeatureMatrix {
    let spec = build_encoder(vocabulary, &DEFAULT_IMPORTANT_PORTS, &default_protocols()).unwrap();
    encode(&trace.records, &spec)
        .unwrap()
        .with_labels(trace.labels.clone())
        .unwrap()
}

#[test]
fn rank_grows_with_the_sparsity_weight() {
    criterion(
        "ACCEPT-04",
        "effective rank is nondecreasing in lambda on a seeded synthetic capture",
        Duration::from_secs(120),
        || {
            let trace = generate(&ScenarioConfig::default()).unwrap();
            let full = encode_trace(&trace, &trace.records);
            let mut ranks = Vec::new();
            for &lam in &[0.02, 0.05, 0.10, 0.15] {
                let result = rpca_decompose(&full.matrix, &RpcaConfig::new(lam)).unwrap();
                assert!(result.converged, "lambda {lam} did not converge");
                ranks.push(rank_of(&result, 1e-6));
            }
            assert!(
                ranks.windows(2).all(|w| w[0] <= w[1]),
                "ranks not nondecreasing: {ranks:?}"
            );
            assert!(
                ranks.windows(2).any(|w| w[0] < w[1]),
                "ranks never strictly increase: {ranks:?}"
            );
        },
    );
}

#[test]
fn roc_curves_respect_their_invariants() {
    criterion(
        "ACCEPT-05",
        "seeded ROC curves are monotone, bounded, and agree with the pairwise oracle",
        Duration::from_secs(10),
        || {
            let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(505);
            for _ in 0..1000 {
                let n = rng.random_range(2..=60);
                // Scores on the grid's own lattice, so the threshold sweep
                // resolves every pairwise distinction and ties are genuine.
                let scores: Vec<f64> = (0..n)
                    .map(|_| rng.random_range(0..=1000) as f64 / 1000.0)
                    .collect();
                let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
                labels[0] = true;
                labels[1] = false;

                let curve = roc_curve(&scores, &labels, &grid).unwrap();
                assert!(curve.auc >= -1e-12 && curve.auc <= 1.0 + 1e-12);
                for w in curve.points.windows(2) {
                    assert!(w[0].alpha > w[1].alpha);
                    assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
                }

                // Pairwise-comparison oracle: P(attack outscores normal),
                // ties counted half.
                let mut wins = 0.0f64;
                let mut pairs = 0.0f64;
                for (i, &li) in labels.iter().enumerate() {
                    if !li {
                        continue;
                    }
                    for (j, &lj) in labels.iter().enumerate() {
                        if lj {
                            continue;
                        }
                        pairs += 1.0;
                        if scores[i] > scores[j] {
                            wins += 1.0;
                        } else if scores[i] == scores[j] {
                            wins += 0.5;
                        }
                    }
                }
                let oracle = wins / pairs;
                assert!(
                    (curve.auc - oracle).abs() <= 0.02,
                    "auc {} vs oracle {oracle}",
                    curve.auc
                );
            }
        },
    );
}

struct SlicedScenario {
    y0: FeatureMatrix,
    train: Vec<LabeledWindow>,
    holdout: LabeledWindow,
}

/// Generates, encodes with training-window vocabulary, and slices the named
/// windows of a scenario.
fn sliced_scenario(config: &ScenarioConfig) -> SlicedScenario {
    let trace = generate(config).unwrap();
    let y0w = trace.window("y0").unwrap();
    let full = encode_trace(&trace, &trace.records[y0w.start..y0w.end]);
    let slice = |name: &str| {
        let w = trace.window(name).unwrap();
        slice_columns(&full, w.start..w.end).unwrap()
    };
    SlicedScenario {
        y0: slice("y0"),
        train: vec![
            LabeledWindow::new(slice("stage1"), "stage1").unwrap(),
            LabeledWindow::new(slice("stage2"), "stage2").unwrap(),
        ],
        holdout: LabeledWindow::new(slice("stage3"), "stage3").unwrap(),
    }
}

#[test]
fn trained_detector_beats_baselines_on_the_holdout_stage() {
    criterion(
        "ACCEPT-06",
        "cross-validated weights outperform nominal and truncated-SVD baselines",
        Duration::from_secs(300),
        || {
            let scenario = sliced_scenario(&ScenarioConfig::default());
            let (m, n0) = scenario.y0.matrix.shape();
            let nominal = nominal_lambda(m, n0).unwrap();
            let lambda_grid = default_lambda_grid(m, n0).unwrap();
            let alpha_grid = default_alpha_grid();
            let options = SweepOptions {
                holdout_name: Some("stage3".to_string()),
                ..SweepOptions::default()
            };

            let outcome = sweep_lambda(
                &scenario.y0,
                &scenario.train,
                &lambda_grid,
                DEFAULT_GAMMA,
                &RpcaConfig::new(nominal),
                &alpha_grid,
                &options,
            )
            .unwrap();

            let mut optimized = fit_nominal(
                &scenario.y0,
                outcome.lambda_star,
                DEFAULT_GAMMA,
                &RpcaConfig::new(outcome.lambda_star),
            )
            .unwrap();
            optimized.alpha = outcome.alpha_star;
            let optimized_report =
                evaluate_holdout(&optimized, &scenario.holdout, &alpha_grid).unwrap();

            let nominal_model =
                fit_nominal(&scenario.y0, nominal, DEFAULT_GAMMA, &RpcaConfig::new(nominal))
                    .unwrap();
            let nominal_report =
                evaluate_holdout(&nominal_model, &scenario.holdout, &alpha_grid).unwrap();

            let pca_report = pca_baseline(
                &scenario.y0,
                PcaRank::Gamma(DEFAULT_GAMMA),
                std::slice::from_ref(&scenario.holdout),
                &alpha_grid,
            )
            .unwrap()
            .remove(0);

            assert!(
                optimized_report.roc.auc >= nominal_report.roc.auc,
                "optimized auc {} below nominal auc {}",
                optimized_report.roc.auc,
                nominal_report.roc.auc
            );
            assert!(
                optimized_report.roc.auc >= pca_report.roc.auc,
                "optimized auc {} below baseline auc {}",
                optimized_report.roc.auc,
                pca_report.roc.auc
            );
            // Frozen regression values for the shipped default scenario.
            assert!(
                optimized_report.fpr_at_alpha <= 0.05,
                "holdout fpr {} above 0.05",
                optimized_report.fpr_at_alpha
            );
            assert!(
                optimized_report.tpr_at_alpha >= 0.8,
                "holdout tpr {} below 0.8",
                optimized_report.tpr_at_alpha
            );
        },
    );
}

#[test]
fn external_capture_reproduction_or_skip() {
    criterion(
        "ACCEPT-07",
        "external-capture rank sweep (optional) and its nominal weight",
        Duration::from_secs(300),
        || {
            // Unconditional part: the nominal weight for the published
            // 94-row, 8322-packet encoding.
            let nominal = nominal_lambda(94, 8322).unwrap();
            assert!(
                (nominal - 0.01096).abs() <= 0.00001,
                "nominal weight {nominal} outside 0.01096 +/- 0.00001"
            );

            let Some(path) = std::env::var_os("PCAPSIFT_DARPA_CSV") else {
                println!(
                    "ACCEPT-07 skip external sweep (set PCAPSIFT_DARPA_CSV to a packet CSV to run it)"
                );
                return;
            };
            let file = std::fs::File::open(&path).unwrap();
            let parsed = pcapsift::features::parse_packet_csv(
                file,
                &pcapsift::features::ColumnMap::default(),
            )
            .unwrap();
            let spec = build_encoder(
                &parsed.records,
                &DEFAULT_IMPORTANT_PORTS,
                &default_protocols(),
            )
            .unwrap();
            let encoded = encode(&parsed.records, &spec).unwrap();
            let expectations = [(0.02, 8), (0.035, 18), (0.05, 24), (0.075, 32), (0.10, 38)];
            for (lam, expected) in expectations {
                let result = rpca_decompose(&encoded.matrix, &RpcaConfig::new(lam)).unwrap();
                let nonzero = result
                    .singular_values
                    .iter()
                    .filter(|&&s| s > 0.0)
                    .count() as i64;
                assert!(
                    (nonzero - expected).abs() <= 2,
                    "lambda {lam}: {nonzero} nonzero singular values, expected {expected} +/- 2"
                );
            }
        },
    );
}

fn assert_same_bytes(a: &Path, b: &Path, what: &str) {
    let left = std::fs::read(a).unwrap();
    let right = std::fs::read(b).unwrap();
    assert!(left == right, "{what} differs between identical runs");
}

/// One full pipeline pass over a reduced scenario, writing every artifact
/// kind into `dir`.
fn pipeline_pass(dir: &Path) -> TrainOutcome {
    let config = ScenarioConfig {
        seed: 11,
        nominal_packets: 400,
        ..ScenarioConfig::default()
    };
    let trace = generate(&config).unwrap();
    {
        let mut packets = Vec::new();
        write_packet_csv(&trace.records, &mut packets).unwrap();
        std::fs::write(dir.join("packets.csv"), packets).unwrap();
        let mut labels = Vec::new();
        write_labels_csv(&trace.labels, &mut labels).unwrap();
        std::fs::write(dir.join("labels.csv"), labels).unwrap();
    }

    let scenario = sliced_scenario(&config);
    write_feature_matrix(&scenario.y0, &dir.join("features.fmat")).unwrap();

    let (m, n0) = scenario.y0.matrix.shape();
    let nominal = nominal_lambda(m, n0).unwrap();
    let outcome = sweep_lambda(
        &scenario.y0,
        &scenario.train,
        &default_lambda_grid(m, n0).unwrap(),
        DEFAULT_GAMMA,
        &RpcaConfig::new(nominal),
        &default_alpha_grid(),
        &SweepOptions {
            holdout_name: Some("stage3".to_string()),
            ..SweepOptions::default()
        },
    )
    .unwrap();
    std::fs::write(
        dir.join("train_outcome.json"),
        serde_json::to_vec_pretty(&outcome).unwrap(),
    )
    .unwrap();
    {
        let mut report = Vec::new();
        write_train_report(&outcome, &mut report).unwrap();
        std::fs::write(dir.join("train_report.tsv"), report).unwrap();
    }

    let mut model = fit_nominal(
        &scenario.y0,
        outcome.lambda_star,
        DEFAULT_GAMMA,
        &RpcaConfig::new(outcome.lambda_star),
    )
    .unwrap();
    model.alpha = outcome.alpha_star;
    pcapsift::detector::write_model(&model, &dir.join("model.psnm")).unwrap();

    let detection = score(&scenario.holdout.features, &model).unwrap();
    {
        let mut tsv = Vec::new();
        write_detection_tsv(&detection, &mut tsv).unwrap();
        std::fs::write(dir.join("detect_stage3.tsv"), tsv).unwrap();
    }

    let holdout_report = evaluate_holdout(&model, &scenario.holdout, &default_alpha_grid()).unwrap();
    {
        let mut roc = Vec::new();
        write_roc_table(&holdout_report.roc, &mut roc).unwrap();
        std::fs::write(dir.join("roc_stage3.tsv"), roc).unwrap();
    }
    outcome
}

#[test]
fn pipeline_stages_are_deterministic() {
    criterion(
        "ACCEPT-08",
        "identical config and seed reproduce every artifact byte for byte",
        Duration::from_secs(300),
        || {
            let dir_a = tempfile::tempdir().unwrap();
            let dir_b = tempfile::tempdir().unwrap();
            let outcome_a = pipeline_pass(dir_a.path());
            let outcome_b = pipeline_pass(dir_b.path());
            assert_eq!(outcome_a, outcome_b);
            for name in [
                "packets.csv",
                "labels.csv",
                "features.fmat",
                "train_outcome.json",
                "train_report.tsv",
                "model.psnm",
                "detect_stage3.tsv",
                "roc_stage3.tsv",
            ] {
                assert_same_bytes(&dir_a.path().join(name), &dir_b.path().join(name), name);
            }
        },
    );
}
