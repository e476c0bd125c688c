use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::risk::{monte_carlo_risk, validate_n_grid, RiskReport};
use super::FamilyDescriptor;
use crate::dist::PrivacyBudget;
use crate::error::{Error, Result};
use crate::mechanisms::EstimatorKind;
use crate::packings::Loss;

pub const CONFIG_SCHEMA: u32 = 1;
const MIN_TRIALS: usize = 50;

fn default_trials() -> usize {
    200
}

/// Estimator choice in a config; the alphabet size comes from the family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: f64,
}

impl EstimatorSpec {
    /// Privacy level the estimator certifies; the empirical estimator has none
    /// and is treated as `epsilon = inf`.
    pub fn budget(&self) -> Result<PrivacyBudget> {
        match self.kind {
            EstimatorKind::Empirical => PrivacyBudget::new(f64::INFINITY, self.delta),
            EstimatorKind::Laplace => match self.epsilon {
                Some(e) if e > 0.0 => PrivacyBudget::new(e, self.delta),
                _ => Err(Error::Schema(
                    "estimator.epsilon: the Laplace estimator needs epsilon > 0".into(),
                )),
            },
        }
    }
}

fn three() -> f64 {
    3.0
}

fn four() -> f64 {
    4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundName {
    Lecam,
    Fano,
    Assouad,
}

/// A pass/fail criterion evaluated on a finished report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Band {
    /// `max_risk(n) - sigmas * stderr <= value`.
    RiskAtMost {
        n: usize,
        value: f64,
        #[serde(default = "three")]
        sigmas: f64,
    },
    /// `max_risk(n) + sigmas * stderr >= bound(n)`.
    AboveBound {
        n: usize,
        bound: BoundName,
        #[serde(default = "four")]
        sigmas: f64,
    },
    /// Risk does not increase along the grid by more than `sigmas` combined stderrs.
    Monotone {
        #[serde(default = "three")]
        sigmas: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandResult {
    pub band: Band,
    pub pass: bool,
    pub detail: String,
}

impl Band {
    pub fn evaluate(&self, report: &RiskReport) -> Result<BandResult> {
        let at = |n: usize| {
            report
                .at(n)
                .ok_or_else(|| Error::Schema(format!("bands: n = {n} is not in n_grid")))
        };
        let (pass, detail) = match *self {
            Band::RiskAtMost { n, value, sigmas } => {
                let r = at(n)?;
                (
                    r.max_risk - sigmas * r.stderr <= value,
                    format!("n={n}: max risk {:.6} (stderr {:.2e}) vs {value}", r.max_risk, r.stderr),
                )
            }
            Band::AboveBound { n, bound, sigmas } => {
                let r = at(n)?;
                let b = match bound {
                    BoundName::Lecam => r.bounds.lecam,
                    BoundName::Fano => r.bounds.fano,
                    BoundName::Assouad => r.bounds.assouad,
                }
                .ok_or_else(|| Error::Schema(format!("bands: bound {bound:?} does not apply to this family")))?;
                (
                    r.max_risk + sigmas * r.stderr >= b,
                    format!(
                        "n={n}: max risk {:.6} (stderr {:.2e}) vs bound {b:.6}",
                        r.max_risk, r.stderr
                    ),
                )
            }
            Band::Monotone { sigmas } => {
                let worst = report
                    .per_n
                    .windows(2)
                    .map(|w| {
                        let slack = sigmas * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
                        w[1].max_risk - w[0].max_risk - slack
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                (worst <= 0.0, format!("largest excess increase {worst:.3e}"))
            }
        };
        Ok(BandResult {
            band: self.clone(),
            pass,
            detail,
        })
    }
}

/// A risk experiment read from JSON (`"schema": 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub family: FamilyDescriptor,
    pub estimator: EstimatorSpec,
    pub loss: Loss,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    /// Report path without extension; `.json` and `.csv` are written next to each other.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub bands: Vec<Band>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Schema(format!(
                "schema: unsupported version {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        validate_n_grid(&self.n_grid).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("n_grid: {m}")),
            other => other,
        })?;
        if self.trials < MIN_TRIALS {
            return Err(Error::Schema(format!(
                "trials: at least {MIN_TRIALS} required, got {}",
                self.trials
            )));
        }
        self.estimator.budget()?;
        Ok(())
    }
}

/// Line (1-based) of the first occurrence of `"key"` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn with_line(err: Error, text: &str) -> Error {
    match err {
        Error::Schema(msg) => {
            let key = msg.split(':').next().unwrap_or("").split('.').next().unwrap_or("");
            match key_line(text, key) {
                Some(line) => Error::Schema(format!("line {line}: {msg}")),
                None => Error::Schema(msg),
            }
        }
        other => other,
    }
}

/// Parses and validates a config, reporting the offending line on errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate().map_err(|e| with_line(e, text))?;
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// CSV with one row per (member, n).
pub fn report_csv(report: &RiskReport) -> String {
    let mut out = String::from("family_member,n,trials,mean_loss,stderr,bound_lecam,bound_fano,bound_assouad\n");
    for r in &report.rows {
        let b = report.at(r.n).map(|x| x.bounds).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{},{},{}",
            r.member,
            r.n,
            r.trials,
            r.mean_loss,
            r.stderr,
            fmt_opt(b.lecam),
            fmt_opt(b.fano),
            fmt_opt(b.assouad)
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: RiskReport,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Runs the config at `path` and writes `<stem>.json` and `<stem>.csv`.
///
/// The stem is `out` when given, else the config's `output_path` (relative
/// paths resolve against the config's directory), else the config path itself
/// with a `.report` suffix. A trailing `.json` or `.csv` on the stem is dropped.
pub fn run_experiment(path: &Path, out: Option<&Path>) -> Result<ExperimentOutcome> {
    let cfg = parse_config(&fs::read_to_string(path)?)?;
    run_config(&cfg, path, out)
}

/// Like [`run_experiment`] for an already parsed config read from `config_path`.
pub fn run_config(cfg: &ExperimentConfig, config_path: &Path, out: Option<&Path>) -> Result<ExperimentOutcome> {
    let report = monte_carlo_risk(cfg)?;
    let dir = config_path.parent().unwrap_or(Path::new("."));
    let stem = match (out, &cfg.output_path) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(p)) if p.is_absolute() => p.clone(),
        (None, Some(p)) => dir.join(p),
        (None, None) => config_path.with_extension("report"),
    };
    let stem = match stem.extension().and_then(|e| e.to_str()) {
        Some("json" | "csv") => stem.with_extension(""),
        _ => stem,
    };
    let with_ext = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let json_path = with_ext(".json");
    let csv_path = with_ext(".csv");
    if let Some(parent) = json_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(&csv_path, report_csv(&report))?;
    Ok(ExperimentOutcome {
        report,
        json_path,
        csv_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "schema": 1,
  "family": {"family": "kary-tv", "k": 4, "alpha": 0.02},
  "estimator": {"kind": "laplace", "epsilon": 1.0},
  "loss": "tv",
  "n_grid": [],
  "seed": 1
}"#;

    #[test]
    fn empty_grid_names_its_line() {
        let err = parse_config(BASE).unwrap_err().to_string();
        assert!(err.contains("line 6"), "{err}");
        assert!(err.contains("n_grid"), "{err}");
    }

    #[test]
    fn wrong_schema_and_few_trials() {
        let t = BASE.replace("\"schema\": 1", "\"schema\": 2").replace("[]", "[10]");
        assert!(parse_config(&t).unwrap_err().to_string().contains("schema"));
        let t = BASE
            .replace("[]", "[10]")
            .replace("\"seed\": 1", "\"seed\": 1, \"trials\": 10");
        assert!(parse_config(&t).unwrap_err().to_string().contains("trials"));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_config("{\n  \"schema\": 1,\n  oops\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn laplace_needs_epsilon() {
        let t = BASE.replace("[]", "[10]").replace(", \"epsilon\": 1.0", "");
        assert!(parse_config(&t).is_err());
    }
}
