//! Run configuration: a TOML file whose sections mirror the pipeline
//! stages, merged with command-line overrides. The file echoed into every
//! output directory is this structure with the values the run actually
//! used, so a run can be reproduced from its artifacts alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pcapsift::detector::DEFAULT_GAMMA;
use pcapsift::rpca::{EpsilonBound, RpcaConfig};
use pcapsift::synth::ScenarioConfig;
use pcapsift::trainer::SelectionMetric;
use pcapsift::{Error, Result};
use serde::{Deserialize, Serialize};

/// One window as it appears in the config file or in `windows.csv`: a
/// half-open packet-index range.
pub type WindowRange = (usize, usize);

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Directory every artifact of the invoked command lands in.
    pub output_dir: Option<PathBuf>,
    /// Seed for the synthetic generator.
    pub seed: Option<u64>,
    pub input: InputSection,
    pub synth: SynthSection,
    pub encoder: EncoderSection,
    /// Inline window definitions; they take precedence over a windows file
    /// when both are present.
    pub windows: BTreeMap<String, WindowRange>,
    pub rpca: RpcaSection,
    pub train: TrainSection,
    pub detect: DetectSection,
    pub roc: RocSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InputSection {
    pub packets: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub windows: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Scenario knobs; unset fields keep the library defaults. The generator's
/// stage and service structure is configured here as full values because
/// partial stage lists have no sensible merge.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_hosts_internal: Option<usize>,
    pub n_hosts_external: Option<usize>,
    pub nominal_packets: Option<usize>,
    pub rare_benign_rate: Option<f64>,
    pub stage_specs: Option<Vec<pcapsift::synth::StageSpec>>,
    pub services: Option<Vec<pcapsift::synth::ServiceSpec>>,
}

impl SynthSection {
    /// Materializes a full scenario from defaults, this section, and the
    /// top-level seed.
    pub fn resolve(&self, seed: Option<u64>) -> ScenarioConfig {
        let mut config = ScenarioConfig::default();
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(v) = self.n_hosts_internal {
            config.n_hosts_internal = v;
        }
        if let Some(v) = self.n_hosts_external {
            config.n_hosts_external = v;
        }
        if let Some(v) = self.nominal_packets {
            config.nominal_packets = v;
        }
        if let Some(v) = self.rare_benign_rate {
            config.rare_benign_rate = v;
        }
        if let Some(v) = &self.stage_specs {
            config.stage_specs = v.clone();
        }
        if let Some(v) = &self.services {
            config.services = v.clone();
        }
        config
    }

    /// Writes a materialized scenario back for the config echo.
    pub fn pin(config: &ScenarioConfig) -> SynthSection {
        SynthSection {
            n_hosts_internal: Some(config.n_hosts_internal),
            n_hosts_external: Some(config.n_hosts_external),
            nominal_packets: Some(config.nominal_packets),
            rare_benign_rate: Some(config.rare_benign_rate),
            stage_specs: Some(config.stage_specs.clone()),
            services: Some(config.services.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub important_ports: Option<Vec<u16>>,
    pub protocols: Option<Vec<String>>,
    /// Window whose packets supply the IP vocabularies. Defaults to
    /// `train.nominal_window` when that is set, else the whole input.
    pub vocab_window: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RpcaSection {
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_rank: Option<usize>,
    pub mu_init: Option<f64>,
    pub rho: Option<f64>,
}

impl RpcaSection {
    /// Builds the solver configuration for `lambda`, keeping library
    /// defaults for unset fields.
    pub fn resolve(&self, lambda: f64) -> RpcaConfig {
        let mut config = RpcaConfig::new(lambda);
        if let Some(e) = self.epsilon {
            config.epsilon = EpsilonBound::Scalar(e);
        }
        if let Some(v) = self.tol {
            config.tol = v;
        }
        if let Some(v) = self.max_iter {
            config.max_iter = v;
        }
        if let Some(v) = self.max_rank {
            config.max_rank = v;
        }
        if let Some(v) = self.mu_init {
            config.mu_init = Some(v);
        }
        if let Some(v) = self.rho {
            config.rho = v;
        }
        config
    }

    pub fn pin(&self, config: &RpcaConfig) -> RpcaSection {
        let epsilon = match config.epsilon {
            EpsilonBound::Scalar(e) => Some(e),
            // Per-entry bounds are a library-level feature with no config
            // syntax; the echo records the knob as unset.
            EpsilonBound::PerEntry(_) => None,
        };
        RpcaSection {
            lambda: Some(config.lambda),
            epsilon,
            tol: Some(config.tol),
            max_iter: Some(config.max_iter),
            max_rank: Some(config.max_rank),
            mu_init: config.mu_init,
            rho: Some(config.rho),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Window the nominal model is fit on; the whole input when unset.
    pub nominal_window: Option<String>,
    pub train_windows: Option<Vec<String>>,
    pub holdout: Option<String>,
    pub lambda_grid: Option<Vec<f64>>,
    pub alpha_grid: Option<Vec<f64>>,
    /// Metric token: `auc`, `youden`, or `tpr@fpr<=<budget>`.
    pub lambda_metric: Option<String>,
    pub alpha_metric: Option<String>,
    pub gamma: Option<f64>,
}

impl TrainSection {
    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(DEFAULT_GAMMA)
    }

    pub fn lambda_metric(&self) -> Result<SelectionMetric> {
        match &self.lambda_metric {
            Some(token) => SelectionMetric::from_str(token),
            None => Ok(SelectionMetric::Auc),
        }
    }

    pub fn alpha_metric(&self) -> Result<SelectionMetric> {
        match &self.alpha_metric {
            Some(token) => SelectionMetric::from_str(token),
            None => Ok(SelectionMetric::Youden),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DetectSection {
    /// Window to score; the whole input when unset.
    pub window: Option<String>,
    /// Threshold override; the model's trained threshold when unset.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RocSection {
    /// Any of `pca`, `rpca-nominal`, `rpca-optimized`; all three when
    /// unset.
    pub methods: Option<Vec<String>>,
    /// Labeled windows to evaluate; every defined window except the
    /// nominal one when unset.
    pub windows: Option<Vec<String>>,
    /// Fixed basis size for the `pca` method; mutually exclusive with
    /// `pca_gamma`.
    pub pca_rank: Option<usize>,
    /// Relative cutoff for the `pca` method; `train.gamma` when neither
    /// field is set.
    pub pca_gamma: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            Error::InvalidConfig(format!("{}: {}", path.display(), compact(&e.to_string())))
        })
    }

    /// The output directory is mandatory for every command.
    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir.as_deref().ok_or_else(|| {
            Error::InvalidConfig(
                "no output directory: pass --out or set output_dir".to_string(),
            )
        })
    }

    pub fn require_input<'a>(
        &self,
        field: &'a Option<PathBuf>,
        what: &str,
        flag: &str,
    ) -> Result<&'a Path> {
        field.as_deref().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "no {what} path: pass --{flag} or set input.{flag}"
            ))
        })
    }

    /// Serializes the resolved configuration for the output-directory echo.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("cannot serialize config echo: {e}")))
    }
}

/// TOML errors are multi-line; the reporting contract is one line.
fn compact(message: &str) -> String {
    message
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
