//! Run configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use bmdetect::bodies::BodySpec;
use bmdetect::functional::Form;
use bmdetect::FunctionSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable supplying the default `grid_level`.
pub const GRID_LEVEL_ENV: &str = "BMDETECT_GRID_LEVEL";
pub const DEFAULT_GRID_LEVEL: u32 = 3;
/// Largest grid level accepted (level 7 already has ~75k nodes).
pub const MAX_GRID_LEVEL: u32 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Detect,
    BmScan,
    Variation,
    Identities,
    Mollify,
    AreaMeasure,
    Planar,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Detect => "detect",
            Command::BmScan => "bm-scan",
            Command::Variation => "variation",
            Command::Identities => "identities",
            Command::Mollify => "mollify",
            Command::AreaMeasure => "area-measure",
            Command::Planar => "planar",
        }
    }

    /// Default output file name.
    pub fn default_output(self) -> &'static str {
        match self {
            Command::Detect => "detect.json",
            Command::BmScan => "bm_scan.csv",
            Command::Variation => "variation.json",
            Command::Identities => "identities.csv",
            Command::Mollify => "mollified.json",
            Command::AreaMeasure => "area_measure.json",
            Command::Planar => "planar.csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Per-identity residual threshold for `identities`.
    pub identity: f64,
    /// Margins below `-bm` count as violations in `bm-scan`.
    pub bm: f64,
    /// Residual threshold for `planar`.
    pub planar: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: bmdetect::calculus::IDENTITY_THRESHOLD,
            bm: 1e-6,
            planar: 1e-6,
        }
    }
}

/// Everything a run depends on. Functions and bodies are references: `builtin:<name>` or a
/// path to a JSON spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub grid_level: u32,
    #[serde(default)]
    pub function: Option<String>,
    /// Bodies for `bm-scan` (all pairs are scanned) or a single pairs file.
    #[serde(default)]
    pub bodies: Vec<String>,
    /// Body for `variation` and `area-measure`.
    #[serde(default)]
    pub body: Option<String>,
    /// Support function of the base body for `variation` (alternative to `body`).
    #[serde(default)]
    pub h: Option<String>,
    #[serde(default)]
    pub phi: Option<String>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_form")]
    pub form: Form,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub pairs: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub out: PathBuf,
    #[serde(default)]
    pub emit_witness: Option<PathBuf>,
}

fn default_form() -> Form {
    Form::MinForm
}

fn default_seed() -> u64 {
    7
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid_level > MAX_GRID_LEVEL {
            return Err(invalid(format!(
                "grid_level {} exceeds {MAX_GRID_LEVEL}",
                self.grid_level
            )));
        }
        let needs_function = matches!(
            self.command,
            Command::Detect | Command::BmScan | Command::Variation | Command::Mollify
        );
        if needs_function && self.function.is_none() {
            return Err(invalid(format!("{} needs --function", self.command.name())));
        }
        match self.command {
            Command::BmScan => {
                if self.bodies.is_empty() {
                    return Err(invalid("bm-scan needs --bodies"));
                }
                if self.t_grid.is_empty() {
                    return Err(invalid("bm-scan needs --t-grid"));
                }
                for t in &self.t_grid {
                    if !(0.0..=1.0).contains(t) {
                        return Err(invalid(format!("t = {t} outside [0, 1]")));
                    }
                }
            }
            Command::Variation => {
                if self.phi.is_none() {
                    return Err(invalid("variation needs --phi"));
                }
                if self.h.is_some() == self.body.is_some() {
                    return Err(invalid("variation needs exactly one of --h and --body"));
                }
            }
            Command::AreaMeasure => {
                if self.body.is_none() {
                    return Err(invalid("area-measure needs --body"));
                }
            }
            Command::Mollify => {
                if self.k.is_none_or(|k| k == 0) {
                    return Err(invalid("mollify needs --k >= 1"));
                }
                if self
                    .samples
                    .is_none_or(|s| s < bmdetect::mollifier::MIN_SAMPLES)
                {
                    return Err(invalid(format!(
                        "mollify needs --samples >= {}",
                        bmdetect::mollifier::MIN_SAMPLES
                    )));
                }
            }
            Command::Planar => {
                if self.pairs == Some(0) {
                    return Err(invalid("planar needs --pairs >= 1"));
                }
            }
            Command::Detect | Command::Identities => {}
        }
        if let (Some(k), Command::Detect) = (self.k, self.command) {
            if k == 0 {
                return Err(invalid("--k must be positive"));
            }
        }
        if let (Some(s), Command::Detect) = (self.samples, self.command) {
            if s < bmdetect::mollifier::MIN_SAMPLES {
                return Err(invalid(format!(
                    "--samples must be at least {}",
                    bmdetect::mollifier::MIN_SAMPLES
                )));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("identity", t.identity), ("bm", t.bm), ("planar", t.planar)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("tolerance {name} = {v}")));
            }
        }
        if self.out.as_os_str().is_empty() {
            return Err(invalid("empty output path"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding of the configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// `builtin:<name>` or a JSON file holding a [`FunctionSpec`] (or a `mollify` output, whose
/// `spec` field is used).
pub fn load_function(reference: &str) -> Result<FunctionSpec, CliError> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return bmdetect::function::builtin::named(name).ok_or_else(|| {
            invalid(format!(
                "unknown builtin function `{name}` (known: {})",
                bmdetect::function::builtin::names().join(", ")
            ))
        });
    }
    let value = read_json(reference)?;
    let spec = match value.get("spec") {
        Some(inner) if value.get("variant").is_none() && value.get("kind").is_none() => {
            inner.clone()
        }
        _ => value,
    };
    serde_json::from_value(spec).map_err(|e| invalid(format!("function spec {reference}: {e}")))
}

/// `builtin:<name>` or a JSON file holding one [`BodySpec`].
pub fn load_body(reference: &str) -> Result<BodySpec, CliError> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return BodySpec::named(name)
            .ok_or_else(|| invalid(format!("unknown builtin body `{name}`")));
    }
    serde_json::from_value(read_json(reference)?)
        .map_err(|e| invalid(format!("body spec {reference}: {e}")))
}

/// A body with the reference it was loaded from.
pub type NamedBody = (String, BodySpec);

/// Body pairs for `bm-scan`: a single JSON file with an array of `[spec, spec]` pairs, or a
/// list of body references, of which every unordered pair is taken.
pub fn load_pairs(refs: &[String]) -> Result<Vec<(NamedBody, NamedBody)>, CliError> {
    if refs.len() == 1 && !refs[0].starts_with("builtin:") {
        let value = read_json(&refs[0])?;
        let pairs: Vec<(BodySpec, BodySpec)> = serde_json::from_value(value)
            .map_err(|e| invalid(format!("pairs file {}: {e}", refs[0])))?;
        return Ok(pairs
            .into_iter()
            .enumerate()
            .map(|(i, (a, b))| {
                (
                    (format!("{}[{i}].0", refs[0]), a),
                    (format!("{}[{i}].1", refs[0]), b),
                )
            })
            .collect());
    }
    if refs.len() < 2 {
        return Err(invalid("bm-scan needs at least two bodies or a pairs file"));
    }
    let bodies: Vec<NamedBody> = refs
        .iter()
        .map(|r| load_body(r).map(|b| (r.clone(), b)))
        .collect::<Result<_, _>>()?;
    let mut out = vec![];
    for i in 0..bodies.len() {
        for j in i + 1..bodies.len() {
            out.push((bodies[i].clone(), bodies[j].clone()));
        }
    }
    Ok(out)
}

fn read_json(path: &str) -> Result<serde_json::Value, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{path}: {e}")))
}

/// `--t-grid`: a single value `s` in (0, 1) means the interior points `s, 2s, ...`; a comma
/// list is taken literally.
pub fn parse_t_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("t-grid `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if let [step] = values[..] {
        if !(step > 0.0 && step < 1.0) {
            return Err(invalid(format!("t-grid step {step} outside (0, 1)")));
        }
        let n = (1.0 / step - 1e-9).floor() as usize;
        return Ok((1..=n)
            .map(|i| i as f64 * step)
            .filter(|t| *t < 1.0)
            .collect());
    }
    Ok(values)
}
