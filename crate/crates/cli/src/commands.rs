//! Execution of a validated [`RunConfig`].

use std::path::PathBuf;

use bmdetect::bodies::{BodySpec, ConvexBody};
use bmdetect::calculus::identity_battery;
use bmdetect::detector::{
    detect, min_q_eigen_scan, verify_witness, Decision, DetectOptions, DetectionReport, Witness,
    WitnessCheck,
};
use bmdetect::functional::{
    bm_check, variation_profile, variation_profile_body, Form, VariationProfile,
};
use bmdetect::measure::{area_measure, LinearDensity};
use bmdetect::mollifier::{mollify, RotationKernel};
use bmdetect::planar::{
    planar_additivity_residual, planar_functional, random_circle_function, random_planar_body,
    PlanarBody,
};
use bmdetect::{build_grid, Error, FunctionSpec, SphericalFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{load_body, load_function, load_pairs, Command, RunConfig, MAX_GRID_LEVEL};
use crate::output::{csv_with_hash, json_envelope, write_atomic, write_manifest};
use crate::CliError;

/// Result of a run: the exit code, the files written and a one-line summary.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

/// Default number of planar pairs.
pub const DEFAULT_PLANAR_PAIRS: usize = 20;

pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let hash = config.hash();
    let mut outcome = match config.command {
        Command::Detect => run_detect(config, &hash)?,
        Command::BmScan => run_bm_scan(config, &hash)?,
        Command::Variation => run_variation(config, &hash)?,
        Command::Identities => run_identities(config, &hash)?,
        Command::Mollify => run_mollify(config, &hash)?,
        Command::AreaMeasure => run_area_measure(config, &hash)?,
        Command::Planar => run_planar(config, &hash)?,
    };
    let manifest = write_manifest(config, &outcome.outputs, outcome.exit_code)?;
    outcome.outputs.push(manifest);
    Ok(outcome)
}

fn function(config: &RunConfig) -> Result<SphericalFunction, CliError> {
    let reference = config.function.as_deref().expect("validated");
    Ok(load_function(reference)?.build()?)
}

fn detect_options(config: &RunConfig) -> DetectOptions {
    let d = DetectOptions::default();
    DetectOptions {
        mollify_k: config.k.unwrap_or(d.mollify_k),
        mollify_samples: config.samples.unwrap_or(d.mollify_samples),
        seed: config.seed,
    }
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    decision: &'static str,
    report: DetectionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<&'a Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<WitnessCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mollified: Option<DetectOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostic: Option<String>,
}

fn run_detect(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let f = function(config)?;
    let grid = build_grid(config.grid_level);
    let opts = detect_options(config);
    let smooth_f = || -> Result<SphericalFunction, CliError> {
        Ok(if f.smoothness() < bmdetect::Smoothness::C2 {
            mollify(&f, opts.mollify_k, opts.mollify_samples, opts.seed)?.function()
        } else {
            f.clone()
        })
    };
    let mut outputs = vec![];
    let (out, exit_code) = match detect(&f, &grid, &opts) {
        Ok(d) => {
            let verification = match &d.witness {
                Some(w) => Some(verify_witness(
                    &smooth_f()?,
                    w,
                    (config.grid_level + 1).min(MAX_GRID_LEVEL),
                )?),
                None => None,
            };
            let (decision, code, diagnostic) = match (&d.report.decision, &verification) {
                (Decision::Support, _) => ("support", 0, None),
                (Decision::NotSupport, Some(v)) if v.verified => ("not_support", 1, None),
                _ => (
                    "inconclusive",
                    2,
                    Some("witness did not re-verify one grid level finer".to_string()),
                ),
            };
            if let (Some(path), Some(w)) = (&config.emit_witness, &d.witness) {
                let bytes = json_envelope(
                    hash,
                    "witness",
                    &json!({ "witness": w, "verification": verification }),
                )?;
                write_atomic(path, &bytes)?;
                outputs.push(path.clone());
            }
            let out = DetectOutput {
                decision,
                report: d.report.clone(),
                witness: None,
                verification,
                mollified: d.mollified,
                diagnostic,
            };
            let witness_json = d
                .witness
                .as_ref()
                .map(|w| serde_json::to_value(w).expect("witness json"));
            let mut value = serde_json::to_value(&out).expect("report json");
            if let Some(w) = witness_json {
                value["witness"] = w;
            }
            (value, code)
        }
        Err(Error::LadderExhausted { reason, best }) => {
            let report = min_q_eigen_scan(&smooth_f()?, &grid)?;
            let out = DetectOutput {
                decision: "inconclusive",
                report,
                witness: None,
                verification: None,
                mollified: (f.smoothness() < bmdetect::Smoothness::C2).then_some(opts),
                diagnostic: Some(format!(
                    "{reason} (best value {best:e}); try a finer --grid-level"
                )),
            };
            (serde_json::to_value(&out).expect("report json"), 2)
        }
        Err(e) => return Err(e.into()),
    };
    write_atomic(&config.out, &json_envelope(hash, "detection", &out)?)?;
    outputs.insert(0, config.out.clone());
    let summary = format!(
        "decision {} (lambda_min {:.6e})",
        out["decision"].as_str().unwrap_or("?"),
        out["report"]["lambda_min"].as_f64().unwrap_or(f64::NAN)
    );
    Ok(RunOutcome {
        exit_code,
        outputs,
        summary,
    })
}

#[derive(Serialize)]
struct ScanRow {
    pair: usize,
    body0: String,
    body1: String,
    t: f64,
    form: Form,
    f0: f64,
    f1: f64,
    f_mid: f64,
    lhs: f64,
    rhs: f64,
    margin: f64,
    violation: bool,
}

fn run_bm_scan(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let f = function(config)?;
    let grid = build_grid(config.grid_level);
    let pairs = load_pairs(&config.bodies)?;
    let mut rows = vec![];
    for (i, ((n0, s0), (n1, s1))) in pairs.iter().enumerate() {
        let (k0, k1) = (s0.build()?, s1.build()?);
        for &t in &config.t_grid {
            let r = bm_check(&f, &k0, &k1, t, config.form, &grid).map_err(|e| match e {
                Error::NegativeFunctional { .. } => CliError::Numerical(format!(
                    "{e}; use --form negative-root for negative functionals"
                )),
                e => e.into(),
            })?;
            rows.push(ScanRow {
                pair: i,
                body0: n0.clone(),
                body1: n1.clone(),
                t,
                form: config.form,
                f0: r.values[0],
                f1: r.values[1],
                f_mid: r.values[2],
                lhs: r.lhs,
                rhs: r.rhs,
                margin: r.margin,
                violation: r.margin < -config.tolerances.bm,
            });
        }
    }
    write_atomic(&config.out, &csv_with_hash(hash, &rows)?)?;
    let violations = rows.iter().filter(|r| r.violation).count();
    let min = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(RunOutcome {
        exit_code: if violations > 0 { 1 } else { 0 },
        outputs: vec![config.out.clone()],
        summary: format!(
            "{} rows, min margin {min:.6e}, {violations} violations",
            rows.len()
        ),
    })
}

fn run_variation(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let f = function(config)?;
    let grid = build_grid(config.grid_level);
    let phi = load_function(config.phi.as_deref().expect("validated"))?.build()?;
    let profile: VariationProfile = match (&config.h, &config.body) {
        (Some(h), None) => variation_profile(&f, &load_function(h)?.build()?, &phi, &grid)?,
        (None, Some(b)) => variation_profile_body(&f, &load_body(b)?.build()?, &phi, &grid)?,
        _ => unreachable!("validated"),
    };
    let value = json!({
        "profile": profile,
        "consistent": profile.consistent(),
        "concavity_defect": profile.concavity_defect(),
    });
    write_atomic(&config.out, &json_envelope(hash, "variation", &value)?)?;
    Ok(RunOutcome {
        exit_code: 0,
        outputs: vec![config.out.clone()],
        summary: format!(
            "F'(0) {:.6e} (fd {:.6e}), F''(0) {:.6e} (fd {:.6e})",
            profile.f1, profile.fd_f1, profile.f2, profile.fd_f2
        ),
    })
}

#[derive(Serialize)]
struct IdentityCsvRow {
    identity: &'static str,
    function: String,
    grid_level: u32,
    residual: f64,
    threshold: f64,
    passed: bool,
}

fn run_identities(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let top = config.grid_level;
    let mut rows = vec![];
    for level in top.min(2)..=top {
        for r in identity_battery(level)? {
            let threshold = config.tolerances.identity;
            rows.push(IdentityCsvRow {
                passed: r.residual.is_finite() && r.residual < threshold,
                identity: r.identity,
                function: r.function,
                grid_level: r.grid_level,
                residual: r.residual,
                threshold,
            });
        }
    }
    write_atomic(&config.out, &csv_with_hash(hash, &rows)?)?;
    let failed = rows
        .iter()
        .filter(|r| r.grid_level == top && !r.passed)
        .count();
    let worst = rows
        .iter()
        .filter(|r| r.grid_level == top)
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    Ok(RunOutcome {
        exit_code: if failed > 0 { 65 } else { 0 },
        outputs: vec![config.out.clone()],
        summary: format!("level {top}: worst residual {worst:.3e}, {failed} above threshold"),
    })
}

fn run_mollify(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let f = function(config)?;
    let grid = build_grid(config.grid_level);
    let (k, samples) = (
        config.k.expect("validated"),
        config.samples.expect("validated"),
    );
    let m = mollify(&f, k, samples, config.seed)?;
    let values = m.values(grid.nodes());
    let nodes: Vec<[f64; 3]> = grid.nodes().iter().map(|u| [u.x, u.y, u.z]).collect();
    let kernel: RotationKernel = m.kernel();
    let sigma: Vec<f64> = values.iter().map(|(_, s)| *s).collect();
    let vals: Vec<f64> = values.iter().map(|(v, _)| *v).collect();
    // exact re-evaluation when the source is serializable, nodal interpolation otherwise
    let spec = match m.function().spec() {
        Some(s) => s.clone(),
        None => FunctionSpec::Nodal {
            nodes: nodes.clone(),
            values: vals.clone(),
        },
    };
    let out = json!({
        "config_hash": hash,
        "source": f.spec(),
        "kernel": kernel,
        "samples": samples,
        "seed": config.seed,
        "grid_level": config.grid_level,
        "spec": spec,
        "nodes": nodes,
        "values": vals,
        "sigma": sigma,
    });
    let mut bytes = serde_json::to_vec_pretty(&out).expect("json value");
    bytes.push(b'\n');
    write_atomic(&config.out, &bytes)?;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    Ok(RunOutcome {
        exit_code: 0,
        outputs: vec![config.out.clone()],
        summary: format!("{} nodes, max standard error {smax:.3e}", grid.len()),
    })
}

fn run_area_measure(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let spec: BodySpec = load_body(config.body.as_deref().expect("validated"))?;
    let body: ConvexBody = spec.build()?;
    let grid = build_grid(config.grid_level);
    let m = area_measure(&body, &grid)?;
    let patches: Vec<_> = m
        .density
        .iter()
        .map(|p| json!({ "label": p.label, "nodes": p.quadrature.len(), "mass": p.quadrature.dot(&p.values) }))
        .collect();
    let curves: Vec<_> = m
        .curves
        .iter()
        .map(|c| {
            let kind = match c.density {
                LinearDensity::Constant(_) => "constant",
                LinearDensity::Planar { .. } => "planar",
            };
            json!({ "center": [c.center.x, c.center.y, c.center.z], "radius": c.radius, "density": kind, "mass": c.mass() })
        })
        .collect();
    let atoms: Vec<_> = m
        .atoms
        .iter()
        .map(|a| json!({ "direction": [a.direction.x, a.direction.y, a.direction.z], "mass": a.mass }))
        .collect();
    let c = m.centroid();
    let out = json!({
        "config_hash": hash,
        "body": spec,
        "grid_level": config.grid_level,
        "total_mass": m.total_mass(),
        "curve_mass": m.curve_mass(),
        "centroid": [c.x, c.y, c.z],
        "patches": patches,
        "curves": curves,
        "atoms": atoms,
    });
    let mut bytes = serde_json::to_vec_pretty(&out).expect("json value");
    bytes.push(b'\n');
    write_atomic(&config.out, &bytes)?;
    Ok(RunOutcome {
        exit_code: 0,
        outputs: vec![config.out.clone()],
        summary: format!(
            "total mass {:.12}, |centroid| {:.3e}",
            m.total_mass(),
            c.norm()
        ),
    })
}

#[derive(Serialize)]
struct PlanarRow {
    pair: usize,
    perimeter0: f64,
    perimeter1: f64,
    f0: f64,
    f1: f64,
    f_sum: f64,
    residual: f64,
    passed: bool,
}

fn run_planar(config: &RunConfig, hash: &str) -> Result<RunOutcome, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.pairs.unwrap_or(DEFAULT_PLANAR_PAIRS);
    let mut rows = vec![];
    for i in 0..n {
        let (k0, k1) = (random_planar_body(&mut rng), random_planar_body(&mut rng));
        let f2d = random_circle_function(&mut rng);
        let residual = planar_additivity_residual(&k0, &k1, &f2d)?;
        let sum = PlanarBody::minkowski(vec![(1.0, k0.clone()), (1.0, k1.clone())])?;
        rows.push(PlanarRow {
            pair: i,
            perimeter0: k0.perimeter(),
            perimeter1: k1.perimeter(),
            f0: planar_functional(&k0, &f2d),
            f1: planar_functional(&k1, &f2d),
            f_sum: planar_functional(&sum, &f2d),
            residual,
            passed: residual < config.tolerances.planar,
        });
    }
    write_atomic(&config.out, &csv_with_hash(hash, &rows)?)?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(RunOutcome {
        exit_code: if failed > 0 { 65 } else { 0 },
        outputs: vec![config.out.clone()],
        summary: format!("{n} pairs, worst residual {worst:.3e}"),
    })
}
