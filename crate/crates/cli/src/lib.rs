//! Command-line front end: argument parsing, run configuration and artifact output.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use bmdetect::functional::Form;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{run, RunOutcome};
pub use config::{Command, RunConfig, Tolerances};

/// Exit code for invalid configuration or arguments.
pub const EXIT_CONFIG: i32 = 64;
/// Exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 65;
/// Exit code when an output file cannot be written.
pub const EXIT_IO: i32 = 74;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<bmdetect::Error> for CliError {
    fn from(e: bmdetect::Error) -> Self {
        use bmdetect::Error::*;
        match e {
            InvalidParameter(_)
            | InvalidBody(_)
            | NegativeWeight(_)
            | NotRotation(_)
            | NotUnit { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "bmdetect",
    version,
    about = "Support-function detection through Brunn-Minkowski violations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Product-grid level (3 * 2^level Gauss nodes in z).
    #[arg(long, env = config::GRID_LEVEL_ENV, default_value_t = config::DEFAULT_GRID_LEVEL)]
    pub grid_level: u32,
    /// Output file (defaults to a per-command name in the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum FormArg {
    Min,
    ConcaveRoot,
    NegativeRoot,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Form {
        match f {
            FormArg::Min => Form::MinForm,
            FormArg::ConcaveRoot => Form::ConcaveRoot,
            FormArg::NegativeRoot => Form::NegativeRoot,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Decide whether a function is a support function; emit a violation witness if not.
    Detect {
        #[command(flatten)]
        common: Common,
        /// `builtin:<name>` or a JSON function spec.
        #[arg(long)]
        function: String,
        #[arg(long)]
        emit_witness: Option<PathBuf>,
        /// Mollifier sharpness for continuous inputs.
        #[arg(long)]
        k: Option<u32>,
        /// Rotation samples for continuous inputs.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Brunn-Minkowski margins over body pairs and interpolation parameters (CSV).
    BmScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: String,
        /// Comma-separated body references (all pairs), or one JSON file of spec pairs.
        #[arg(long, value_delimiter = ',')]
        bodies: Vec<String>,
        /// A step `s` (interior points s, 2s, ...) or a comma-separated list.
        #[arg(long)]
        t_grid: String,
        #[arg(long, value_enum, default_value = "min")]
        form: FormArg,
        /// Shorthand for `--form negative-root` (sqrt(-F) convexity for negative functionals).
        #[arg(long)]
        case2: bool,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// First and second variation of F along K + s phi, analytic and finite-difference (JSON).
    Variation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: String,
        /// Support function of the base body.
        #[arg(long, conflicts_with = "body")]
        h: Option<String>,
        /// Base body reference.
        #[arg(long)]
        body: Option<String>,
        #[arg(long)]
        phi: String,
    },
    /// Residual battery of the spherical-calculus identities vs grid level (CSV).
    Identities {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Rotation-group mollification sampled on the grid nodes (JSON nodal dump).
    Mollify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        function: String,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
    /// Summary of the surface area measure of a body (JSON).
    AreaMeasure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        body: String,
    },
    /// Additivity of planar functionals on random pairs (CSV).
    Planar {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Run a JSON RunConfig file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

impl CliCommand {
    /// Resolves the arguments into a configuration (not yet validated).
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let blank = |command: Command, common: Common| RunConfig {
            command,
            grid_level: common.grid_level,
            function: None,
            bodies: vec![],
            body: None,
            h: None,
            phi: None,
            t_grid: vec![],
            form: Form::MinForm,
            k: None,
            samples: None,
            seed: common.seed,
            pairs: None,
            tolerances: Tolerances::default(),
            out: common
                .out
                .unwrap_or_else(|| command.default_output().into()),
            emit_witness: None,
        };
        Ok(match self {
            CliCommand::Detect {
                common,
                function,
                emit_witness,
                k,
                samples,
            } => RunConfig {
                function: Some(function),
                emit_witness,
                k,
                samples,
                ..blank(Command::Detect, common)
            },
            CliCommand::BmScan {
                common,
                function,
                bodies,
                t_grid,
                form,
                case2,
                tolerance,
            } => {
                let mut c = blank(Command::BmScan, common);
                c.function = Some(function);
                c.bodies = bodies;
                c.t_grid = config::parse_t_grid(&t_grid)?;
                c.form = if case2 {
                    Form::NegativeRoot
                } else {
                    form.into()
                };
                if let Some(t) = tolerance {
                    c.tolerances.bm = t;
                }
                c
            }
            CliCommand::Variation {
                common,
                function,
                h,
                body,
                phi,
            } => RunConfig {
                function: Some(function),
                h,
                body,
                phi: Some(phi),
                ..blank(Command::Variation, common)
            },
            CliCommand::Identities { common, tolerance } => {
                let mut c = blank(Command::Identities, common);
                if let Some(t) = tolerance {
                    c.tolerances.identity = t;
                }
                c
            }
            CliCommand::Mollify {
                common,
                function,
                k,
                samples,
            } => RunConfig {
                function: Some(function),
                k: Some(k),
                samples: Some(samples),
                ..blank(Command::Mollify, common)
            },
            CliCommand::AreaMeasure { common, body } => RunConfig {
                body: Some(body),
                ..blank(Command::AreaMeasure, common)
            },
            CliCommand::Planar {
                common,
                pairs,
                tolerance,
            } => {
                let mut c = blank(Command::Planar, common);
                c.pairs = pairs;
                if let Some(t) = tolerance {
                    c.tolerances.planar = t;
                }
                c
            }
            CliCommand::Run { config } => RunConfig::from_json_file(&config)?,
        })
    }
}
