//! The pipeline commands. Every command resolves its parameters from the
//! run configuration, writes its artifacts atomically into the output
//! directory, and finishes by echoing the fully-resolved configuration as
//! `config_<command>.toml` so the run is reproducible from its outputs.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use pcapsift::detector::{self, fit_nominal};
use pcapsift::features::{
    build_encoder, default_protocols, encode, parse_packet_csv, read_feature_matrix,
    read_labels_csv, slice_columns, write_feature_matrix, write_labels_csv, write_packet_csv,
    ColumnMap, FeatureMatrix, DEFAULT_IMPORTANT_PORTS,
};
use pcapsift::fsutil::atomic_write_bytes;
use pcapsift::rpca::nominal_lambda;
use pcapsift::synth::generate;
use pcapsift::trainer::{
    default_alpha_grid, default_lambda_grid, evaluate_holdout, pca_baseline, sweep_lambda,
    write_roc_table, write_train_report, HoldoutReport, LabeledWindow, PcaRank, SweepOptions,
};
use pcapsift::{Error, Result};

use crate::config::{RunConfig, SynthSection, WindowRange};

/// Loads named windows: inline `[windows]` entries take precedence; a
/// windows file (CSV with a `name,start,end` header) fills in the rest.
fn resolve_windows(config: &RunConfig) -> Result<BTreeMap<String, WindowRange>> {
    let mut windows = BTreeMap::new();
    if let Some(path) = &config.input.windows {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        windows = read_windows_csv(file)?;
    }
    for (name, range) in &config.windows {
        windows.insert(name.clone(), *range);
    }
    Ok(windows)
}

pub fn read_windows_csv(input: impl Read) -> Result<BTreeMap<String, WindowRange>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedInput(format!("windows file: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["name", "start", "end"] {
        return Err(Error::MalformedInput(format!(
            "windows file must have the header name,start,end, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut windows = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::MalformedInput(format!("windows line {line}: {e}")))?;
        let field = |idx: usize| -> Result<&str> {
            row.get(idx).ok_or_else(|| {
                Error::MalformedInput(format!("windows line {line}: missing column {idx}"))
            })
        };
        let name = field(0)?.to_string();
        let start: usize = field(1)?.parse().map_err(|_| {
            Error::MalformedInput(format!("windows line {line}: unreadable start"))
        })?;
        let end: usize = field(2)?
            .parse()
            .map_err(|_| Error::MalformedInput(format!("windows line {line}: unreadable end")))?;
        if windows.insert(name.clone(), (start, end)).is_some() {
            return Err(Error::MalformedInput(format!(
                "windows line {line}: duplicate window '{name}'"
            )));
        }
    }
    Ok(windows)
}

pub fn write_windows_csv(
    windows: &[(String, WindowRange)],
    out: impl std::io::Write,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["name", "start", "end"])
        .map_err(|e| Error::MalformedInput(format!("windows write: {e}")))?;
    for (name, (start, end)) in windows {
        writer
            .write_record([name.as_str(), &start.to_string(), &end.to_string()])
            .map_err(|e| Error::MalformedInput(format!("windows write: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::MalformedInput(format!("windows write: {e}")))?;
    Ok(())
}

/// Looks a window up and checks it against the column count.
fn window_range(
    windows: &BTreeMap<String, WindowRange>,
    name: &str,
    n_packets: usize,
) -> Result<WindowRange> {
    let &(start, end) = windows.get(name).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "window '{name}' is not defined; known windows: {}",
            known(windows)
        ))
    })?;
    if start > end || end > n_packets {
        return Err(Error::InvalidConfig(format!(
            "window '{name}' spans [{start}, {end}) but the input has {n_packets} packets"
        )));
    }
    Ok((start, end))
}

fn known(windows: &BTreeMap<String, WindowRange>) -> String {
    if windows.is_empty() {
        "none".to_string()
    } else {
        windows.keys().cloned().collect::<Vec<_>>().join(", ")
    }
}

fn ensure_output_dir(config: &RunConfig) -> Result<std::path::PathBuf> {
    let dir = config.output_dir()?.to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn echo_config(config: &RunConfig, dir: &Path, command: &str) -> Result<()> {
    let path = dir.join(format!("config_{command}.toml"));
    atomic_write_bytes(&path, config.to_toml()?.as_bytes())
}

pub fn cmd_synth(mut config: RunConfig) -> Result<()> {
    let dir = ensure_output_dir(&config)?;
    let scenario = config.synth.resolve(config.seed);
    let trace = generate(&scenario)?;

    let mut packets = Vec::new();
    write_packet_csv(&trace.records, &mut packets)?;
    atomic_write_bytes(&dir.join("packets.csv"), &packets)?;

    let mut labels = Vec::new();
    write_labels_csv(&trace.labels, &mut labels)?;
    atomic_write_bytes(&dir.join("labels.csv"), &labels)?;

    let ranges: Vec<(String, WindowRange)> = trace
        .windows
        .iter()
        .map(|w| (w.name.clone(), (w.start, w.end)))
        .collect();
    let mut windows = Vec::new();
    write_windows_csv(&ranges, &mut windows)?;
    atomic_write_bytes(&dir.join("windows.csv"), &windows)?;

    config.seed = Some(scenario.seed);
    config.synth = SynthSection::pin(&scenario);
    echo_config(&config, &dir, "synth")
}

pub fn cmd_encode(mut config: RunConfig) -> Result<()> {
    let dir = ensure_output_dir(&config)?;
    let packets_path = config.require_input(&config.input.packets, "packet CSV", "packets")?;
    let file = std::fs::File::open(packets_path).map_err(|e| Error::io(packets_path, e))?;
    let parsed = parse_packet_csv(file, &ColumnMap::default())?;
    if let Some(first) = parsed.row_errors.first() {
        return Err(Error::MalformedInput(format!(
            "{}: {} unreadable rows, first at {first}",
            packets_path.display(),
            parsed.row_errors.len()
        )));
    }

    let windows = resolve_windows(&config)?;
    // Vocabulary scope: the explicit flag wins; otherwise the declared
    // training window, so values first seen during an attack stage encode
    // to zero blocks instead of getting columns of their own; otherwise
    // the whole capture.
    let vocab_window = config
        .encoder
        .vocab_window
        .clone()
        .or_else(|| config.train.nominal_window.clone());
    let vocabulary = match &vocab_window {
        Some(name) => {
            let (start, end) = window_range(&windows, name, parsed.records.len())?;
            &parsed.records[start..end]
        }
        None => &parsed.records[..],
    };
    let ports = config
        .encoder
        .important_ports
        .clone()
        .unwrap_or_else(|| DEFAULT_IMPORTANT_PORTS.to_vec());
    let protocols = config
        .encoder
        .protocols
        .clone()
        .unwrap_or_else(default_protocols);
    let spec = build_encoder(vocabulary, &ports, &protocols)?;

    let mut features = encode(&parsed.records, &spec)?;
    if let Some(labels_path) = &config.input.labels {
        let file = std::fs::File::open(labels_path).map_err(|e| Error::io(labels_path, e))?;
        features = features.with_labels(read_labels_csv(file)?)?;
    }
    write_feature_matrix(&features, &dir.join("features.fmat"))?;

    config.encoder.important_ports = Some(ports);
    config.encoder.protocols = Some(protocols);
    config.encoder.vocab_window = vocab_window;
    echo_config(&config, &dir, "encode")
}

/// Reads the feature file and cuts out a named window, or the whole matrix
/// when `name` is unset.
fn load_features(
    config: &RunConfig,
    name: Option<&str>,
) -> Result<(FeatureMatrix, String)> {
    let path = config.require_input(&config.input.features, "feature matrix", "features")?;
    let features = read_feature_matrix(path)?;
    match name {
        Some(name) => {
            let windows = resolve_windows(config)?;
            let (start, end) = window_range(&windows, name, features.n_packets())?;
            Ok((slice_columns(&features, start..end)?, name.to_string()))
        }
        None => Ok((features, "all".to_string())),
    }
}

pub fn cmd_fit(mut config: RunConfig) -> Result<()> {
    let dir = ensure_output_dir(&config)?;
    let (y0, _) = load_features(&config, config.train.nominal_window.as_deref())?;
    let lambda = match config.rpca.lambda {
        Some(lambda) => lambda,
        None => nominal_lambda(y0.matrix.rows(), y0.matrix.cols())?,
    };
    let gamma = config.train.gamma();
    let rpca = config.rpca.resolve(lambda);
    let model = fit_nominal(&y0, lambda, gamma, &rpca)?;
    detector::write_model(&model, &dir.join("model.psnm"))?;

    config.rpca = config.rpca.pin(&rpca);
    config.train.gamma = Some(gamma);
    echo_config(&config, &dir, "fit")
}

/// Builds the labeled training windows for sweep and roc: explicit names
/// when configured, otherwise every defined window except the nominal one
/// and the holdout.
fn labeled_windows(
    features: &FeatureMatrix,
    windows: &BTreeMap<String, WindowRange>,
    names: Option<&[String]>,
    exclude: &[Option<&str>],
) -> Result<Vec<LabeledWindow>> {
    let names: Vec<String> = match names {
        Some(names) => names.to_vec(),
        None => windows
            .keys()
            .filter(|name| !exclude.iter().any(|e| e.as_deref() == Some(name.as_str())))
            .cloned()
            .collect(),
    };
    if names.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no labeled windows to evaluate; known windows: {}",
            known(windows)
        )));
    }
    names
        .iter()
        .map(|name| {
            let (start, end) = window_range(windows, name, features.n_packets())?;
            LabeledWindow::new(slice_columns(features, start..end)?, name.clone())
        })
        .collect()
}

pub fn cmd_sweep(mut config: RunConfig) -> Result<()> {
    let dir = ensure_output_dir(&config)?;
    let path = config.require_input(&config.input.features, "feature matrix", "features")?;
    let features = read_feature_matrix(path)?;
    let windows = resolve_windows(&config)?;

    let nominal_name = config.train.nominal_window.as_deref();
    let y0 = match nominal_name {
        Some(name) => {
            let (start, end) = window_range(&windows, name, features.n_packets())?;
            slice_columns(&features, start..end)?
        }
        None => {
            return Err(Error::InvalidConfig(
                "sweep needs train.nominal_window: the window the nominal model is fit on"
                    .to_string(),
            ))
        }
    };
    let holdout = config.train.holdout.clone();
    let train = labeled_windows(
        &features,
        &windows,
        config.train.train_windows.as_deref(),
        &[nominal_name, holdout.as_deref()],
    )?;

    let (m, n0) = y0.matrix.shape();
    let lambda_grid = match &config.train.lambda_grid {
        Some(grid) => grid.clone(),
        None => default_lambda_grid(m, n0)?,
    };
    let alpha_grid = config
        .train
        .alpha_grid
        .clone()
        .unwrap_or_else(default_alpha_grid);
    let gamma = config.train.gamma();
    let options = SweepOptions {
        lambda_metric: config.train.lambda_metric()?,
        alpha_metric: config.train.alpha_metric()?,
        holdout_name: holdout,
    };
    let template = config.rpca.resolve(config.rpca.lambda.unwrap_or(1.0));

    let outcome = sweep_lambda(&y0, &train, &lambda_grid, gamma, &template, &alpha_grid, &options)?;

    let final_rpca = config.rpca.resolve(outcome.lambda_star);
    let mut model = fit_nominal(&y0, outcome.lambda_star, gamma, &final_rpca)?;
    model.alpha = outcome.alpha_star;
    detector::write_model(&model, &dir.join("model.psnm"))?;

    let json = serde_json::to_vec_pretty(&outcome)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize outcome: {e}")))?;
    atomic_write_bytes(&dir.join("train_outcome.json"), &json)?;
    let mut report = Vec::new();
    write_train_report(&outcome, &mut report)?;
    atomic_write_bytes(&dir.join("train_report.tsv"), &report)?;

    config.train.train_windows = Some(train.iter().map(|w| w.name.clone()).collect());
    config.train.lambda_grid = Some(lambda_grid);
    config.train.alpha_grid = Some(alpha_grid);
    config.train.gamma = Some(gamma);
    config.train.lambda_metric = Some(options.lambda_metric.token());
    config.train.alpha_metric = Some(options.alpha_metric.token());
    echo_config(&config, &dir, "sweep")
}

pub fn cmd_detect(mut config: RunConfig) -> Result<()> {
    let dir = ensure_output_dir(&config)?;
    let model_path = config.require_input(&config.input.model, "model file", "model")?;
    let mut model = detector::read_model(model_path)?;
    if let Some(alpha) = config.detect.alpha {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "detect.alpha must be finite and nonnegative, got {alpha}"
            )));
        }
        model.alpha = alpha;
    }
    let (window, window_name) = load_features(&config, config.detect.window.as_deref())?;
    let report = detector::score(&window, &model)?;
    let mut tsv = Vec::new();
    detector::write_detection_tsv(&report, &mut tsv)?;
    atomic_write_bytes(&dir.join(format!("detect_{window_name}.tsv")), &tsv)?;

    config.detect.alpha = Some(model.alpha);
    echo_config(&config, &dir, "detect")
}

const ROC_METHODS: [&str; 3] = ["pca", "rpca-nominal", "rpca-optimized"];

pub fn cmd_roc(mut config: RunConfig) -> Result<()> {
    let dir = ensure_output_dir(&config)?;
    let methods = config
        .roc
        .methods
        .clone()
        .unwrap_or_else(|| ROC_METHODS.iter().map(|m| m.to_string()).collect());
    for method in &methods {
        if !ROC_METHODS.contains(&method.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown roc method '{method}'; expected one of {}",
                ROC_METHODS.join(", ")
            )));
        }
    }

    let path = config.require_input(&config.input.features, "feature matrix", "features")?;
    let features = read_feature_matrix(path)?;
    let windows = resolve_windows(&config)?;
    let nominal_name = config.train.nominal_window.as_deref();
    let eval = labeled_windows(
        &features,
        &windows,
        config.roc.windows.as_deref(),
        &[nominal_name],
    )?;
    let alpha_grid = config
        .train
        .alpha_grid
        .clone()
        .unwrap_or_else(default_alpha_grid);
    let gamma = config.train.gamma();

    // The baselines refit from the nominal window; the optimized method
    // only replays a trained model, so the window is required exactly when
    // a baseline is.
    let needs_y0 = methods.iter().any(|m| m != "rpca-optimized");
    let y0 = match (needs_y0, nominal_name) {
        (true, Some(name)) => {
            let (start, end) = window_range(&windows, name, features.n_packets())?;
            Some(slice_columns(&features, start..end)?)
        }
        (true, None) => {
            return Err(Error::InvalidConfig(
                "roc baselines need train.nominal_window: the window they refit on".to_string(),
            ))
        }
        (false, _) => None,
    };

    for method in &methods {
        let reports: Vec<HoldoutReport> = match method.as_str() {
            "pca" => {
                let rank = match (config.roc.pca_rank, config.roc.pca_gamma) {
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidConfig(
                            "set at most one of roc.pca_rank and roc.pca_gamma".to_string(),
                        ))
                    }
                    (Some(k), None) => PcaRank::K(k),
                    (None, Some(g)) => PcaRank::Gamma(g),
                    (None, None) => PcaRank::Gamma(gamma),
                };
                pca_baseline(y0.as_ref().unwrap(), rank, &eval, &alpha_grid)?
            }
            "rpca-nominal" => {
                let y0 = y0.as_ref().unwrap();
                let lambda = nominal_lambda(y0.matrix.rows(), y0.matrix.cols())?;
                let model = fit_nominal(y0, lambda, gamma, &config.rpca.resolve(lambda))?;
                eval.iter()
                    .map(|w| evaluate_holdout(&model, w, &alpha_grid))
                    .collect::<Result<_>>()?
            }
            "rpca-optimized" => {
                let model_path =
                    config.require_input(&config.input.model, "model file", "model")?;
                let model = detector::read_model(model_path)?;
                eval.iter()
                    .map(|w| evaluate_holdout(&model, w, &alpha_grid))
                    .collect::<Result<_>>()?
            }
            _ => unreachable!("validated above"),
        };
        for report in &reports {
            let mut table = Vec::new();
            write_roc_table(&report.roc, &mut table)?;
            atomic_write_bytes(
                &dir.join(format!("roc_{method}_{}.tsv", report.window)),
                &table,
            )?;
        }
    }

    config.roc.methods = Some(methods);
    config.roc.windows = Some(eval.iter().map(|w| w.name.clone()).collect());
    config.train.alpha_grid = Some(alpha_grid);
    config.train.gamma = Some(gamma);
    echo_config(&config, &dir, "roc")
}
