//! `pcapsift`: synthesize or ingest packet metadata, encode it into a
//! feature matrix, fit and train a nominal-subspace detector, and score
//! traffic against it. Each command reads one TOML run configuration
//! (`--config`), applies any flag overrides, and writes its artifacts plus
//! a fully-resolved config echo into the output directory.
//!
//! Exit codes: 0 success, 2 configuration (including usage), 3 file IO,
//! 4 malformed input data, 5 dimension mismatch, 6 numerical failure,
//! 7 training failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcapsift::Error;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "pcapsift", version, about = "Low-rank/sparse anomaly detection over packet metadata", max_term_width = 100)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory for artifacts and the config echo.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for the synthetic generator.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct InputFlags {
    /// Packet metadata CSV.
    #[arg(long, value_name = "FILE")]
    packets: Option<PathBuf>,

    /// Ground-truth label CSV aligned with the packet CSV.
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,

    /// Window definition CSV (name,start,end).
    #[arg(long, value_name = "FILE")]
    windows: Option<PathBuf>,

    /// Feature matrix file produced by `encode`.
    #[arg(long, value_name = "FILE")]
    features: Option<PathBuf>,

    /// Model file produced by `fit` or `sweep`.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic capture: packets, labels, windows.
    Synth,

    /// Encode a packet CSV into a feature matrix file.
    Encode {
        #[command(flatten)]
        input: InputFlags,

        /// Window whose packets supply the IP vocabularies (default: all).
        #[arg(long, value_name = "NAME")]
        vocab_window: Option<String>,
    },

    /// Fit the nominal model on a window of the feature matrix.
    Fit {
        #[command(flatten)]
        input: InputFlags,

        /// Window to fit on (default: the whole matrix).
        #[arg(long, value_name = "NAME")]
        window: Option<String>,

        /// Sparsity weight (default: 1/sqrt(max(rows, cols))).
        #[arg(long)]
        lambda: Option<f64>,
    },

    /// Cross-validate the sparsity weight and threshold, then write the
    /// trained model and report.
    Sweep {
        #[command(flatten)]
        input: InputFlags,

        /// Window the nominal model is fit on.
        #[arg(long, value_name = "NAME")]
        window: Option<String>,

        /// Window excluded from training (evaluate it later with `roc`).
        #[arg(long, value_name = "NAME")]
        holdout: Option<String>,
    },

    /// Score a window against a trained model.
    Detect {
        #[command(flatten)]
        input: InputFlags,

        /// Window to score (default: the whole matrix).
        #[arg(long, value_name = "NAME")]
        window: Option<String>,

        /// Threshold override (default: the model's trained threshold).
        #[arg(long)]
        alpha: Option<f64>,
    },

    /// Write ROC tables per method and window.
    Roc {
        #[command(flatten)]
        input: InputFlags,

        /// Window the baseline methods refit on.
        #[arg(long, value_name = "NAME")]
        window: Option<String>,

        /// Method to evaluate: pca, rpca-nominal, or rpca-optimized
        /// (repeatable; default: all three).
        #[arg(long = "method", value_name = "METHOD")]
        methods: Vec<String>,

        /// Labeled window to evaluate (repeatable; default: every defined
        /// window except the nominal one).
        #[arg(long = "eval-window", value_name = "NAME")]
        eval_windows: Vec<String>,
    },
}

impl InputFlags {
    fn apply(self, config: &mut RunConfig) {
        let fields = [
            (self.packets, &mut config.input.packets),
            (self.labels, &mut config.input.labels),
            (self.windows, &mut config.input.windows),
            (self.features, &mut config.input.features),
            (self.model, &mut config.input.model),
        ];
        for (flag, slot) in fields {
            if flag.is_some() {
                *slot = flag;
            }
        }
    }
}

fn run(cli: Cli) -> pcapsift::Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        config.output_dir = cli.out;
    }
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }

    match cli.command {
        Command::Synth => commands::cmd_synth(config),
        Command::Encode {
            input,
            vocab_window,
        } => {
            input.apply(&mut config);
            if vocab_window.is_some() {
                config.encoder.vocab_window = vocab_window;
            }
            commands::cmd_encode(config)
        }
        Command::Fit {
            input,
            window,
            lambda,
        } => {
            input.apply(&mut config);
            if window.is_some() {
                config.train.nominal_window = window;
            }
            if lambda.is_some() {
                config.rpca.lambda = lambda;
            }
            commands::cmd_fit(config)
        }
        Command::Sweep {
            input,
            window,
            holdout,
        } => {
            input.apply(&mut config);
            if window.is_some() {
                config.train.nominal_window = window;
            }
            if holdout.is_some() {
                config.train.holdout = holdout;
            }
            commands::cmd_sweep(config)
        }
        Command::Detect {
            input,
            window,
            alpha,
        } => {
            input.apply(&mut config);
            if window.is_some() {
                config.detect.window = window;
            }
            if alpha.is_some() {
                config.detect.alpha = alpha;
            }
            commands::cmd_detect(config)
        }
        Command::Roc {
            input,
            window,
            methods,
            eval_windows,
        } => {
            input.apply(&mut config);
            if window.is_some() {
                config.train.nominal_window = window;
            }
            if !methods.is_empty() {
                config.roc.methods = Some(methods);
            }
            if !eval_windows.is_empty() {
                config.roc.windows = Some(eval_windows);
            }
            commands::cmd_roc(config)
        }
    }
}

/// Machine-parsable category token, one per exit code.
fn category(error: &Error) -> &'static str {
    match error {
        Error::InvalidConfig(_) => "config",
        Error::Io { .. } => "io",
        Error::MalformedInput(_) => "format",
        Error::DimensionMismatch(_) => "dimension",
        Error::Numerical(_) => "numerical",
        Error::Training(_) => "training",
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidConfig(_) => 2,
        Error::Io { .. } => 3,
        Error::MalformedInput(_) => 4,
        Error::DimensionMismatch(_) => 5,
        Error::Numerical(_) => 6,
        Error::Training(_) => 7,
    }
}

/// Folds the message onto one line and escapes it for the quoted field.
fn escape(message: &str) -> String {
    message
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace(['\n', '\r'], " ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!(
                "error: category={} message=\"{}\"",
                category(&error),
                escape(&error.to_string())
            );
            ExitCode::from(exit_code(&error))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_error_category_has_a_distinct_exit_code() {
        let samples = [
            Error::InvalidConfig("x".into()),
            Error::io(std::path::Path::new("p"), std::io::Error::other("x")),
            Error::MalformedInput("x".into()),
            Error::DimensionMismatch("x".into()),
            Error::Numerical("x".into()),
            Error::Training("x".into()),
        ];
        let mut codes: Vec<u8> = samples.iter().map(exit_code).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), samples.len());
        for error in &samples {
            assert!(!category(error).is_empty());
        }
    }

    #[test]
    fn escaped_messages_stay_on_one_line() {
        let escaped = escape("a \"quoted\"\nmulti\r\nline \\ message");
        assert!(!escaped.contains('\n') && !escaped.contains('\r'));
        assert_eq!(
            escaped,
            "a \\\"quoted\\\" multi  line \\\\ message"
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
