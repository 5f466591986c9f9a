//! Experiment configuration and flag parsing.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use armagg::predictors::{Predictor, PredictorConfig};
use armagg::{AggregationScheme, ArmaModel, SchemeKind};
use serde::{Deserialize, Serialize};

/// Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub paths: usize,
    pub seed: u64,
}

/// Total-error flavour for the `errors` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    #[default]
    Approx,
    Exact,
}

/// Configuration file; every field mirrors a command-line flag.
///
/// `model` and `out` are resolved relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: PathBuf,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default)]
    pub sigma2: Option<f64>,
    pub horizons: String,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default)]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(default = "default_predictors")]
    pub predictors: Vec<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub mode: ModeArg,
    #[serde(default)]
    pub naive_sums: bool,
    #[serde(default)]
    pub common_root_tol: Option<f64>,
    #[serde(default)]
    pub oh_include_unit_divisor: bool,
    #[serde(default)]
    pub mc: Option<McSettings>,
}

fn default_scheme() -> String {
    "stock".into()
}

fn default_predictors() -> Vec<String> {
    vec!["TMS".into(), "H".into(), "OH".into()]
}

impl ExperimentConfig {
    /// Reads a JSON config and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.model.is_relative() {
            cfg.model = base.join(&cfg.model);
        }
        if let Some(out) = cfg.out.as_mut() {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon_range()?;
        if self.predictor_list()?.is_empty() {
            bail!(armagg::Error::InvalidInput("predictor list is empty".into()));
        }
        if self.t < *h.end() {
            bail!(armagg::Error::InvalidInput(format!(
                "T = {} is smaller than the largest horizon {}",
                self.t,
                h.end()
            )));
        }
        parse_scheme_arg(&self.scheme)?;
        Ok(())
    }

    pub fn horizon_range(&self) -> Result<RangeInclusive<usize>> {
        parse_horizons(&self.horizons)
    }

    pub fn predictor_list(&self) -> Result<Vec<Predictor>> {
        self.predictors
            .iter()
            .map(|p| Predictor::parse(p).map_err(Into::into))
            .collect()
    }

    /// Loads the model file and applies the σ² override.
    pub fn load_model(&self) -> Result<ArmaModel> {
        let model = load_model(&self.model)?;
        match self.sigma2 {
            Some(s) => Ok(model.with_sigma2(s)?),
            None => Ok(model),
        }
    }

    pub fn predictor_config(&self) -> PredictorConfig {
        let mut cfg = match self.common_root_tol {
            Some(tol) => PredictorConfig::with_common_root_tol(tol),
            None => PredictorConfig::default(),
        };
        cfg.oh_include_unit_divisor = self.oh_include_unit_divisor;
        cfg
    }

    pub fn scheme_kind(&self) -> Result<SchemeKind> {
        match parse_scheme_arg(&self.scheme)? {
            SchemeArg::Kind(k) => Ok(k),
            SchemeArg::Weights(_) => bail!(armagg::Error::Unsupported(
                "predictor comparisons need a scheme kind with a period per horizon".into()
            )),
        }
    }
}

/// Reads a model JSON file.
pub fn load_model(path: &Path) -> Result<ArmaModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model: ArmaModel = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(model)
}

/// `a..b` (inclusive) or a single horizon.
pub fn parse_horizons(s: &str) -> Result<RangeInclusive<usize>> {
    let parse = |v: &str| -> Result<usize> {
        v.trim()
            .parse::<usize>()
            .with_context(|| format!("invalid horizon {v:?}"))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let h = parse(s)?;
            (h, h)
        }
    };
    if a == 0 || b < a {
        bail!(armagg::Error::InvalidInput(format!(
            "horizon range {s:?} must satisfy 1 <= a <= b"
        )));
    }
    Ok(a..=b)
}

/// Parsed `--scheme` value.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeArg {
    Kind(SchemeKind),
    Weights(Vec<f64>),
}

pub fn parse_scheme_arg(s: &str) -> Result<SchemeArg> {
    if let Some(list) = s.strip_prefix("weights=") {
        let w = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("invalid weight {v:?}")))
            .collect::<Result<Vec<_>>>()?;
        return Ok(SchemeArg::Weights(w));
    }
    match s {
        "stock" => Ok(SchemeArg::Kind(SchemeKind::Stock)),
        "flow" => Ok(SchemeArg::Kind(SchemeKind::Flow)),
        "average" => Ok(SchemeArg::Kind(SchemeKind::Average)),
        other => bail!(armagg::Error::InvalidInput(format!(
            "unknown scheme {other:?}; expected stock, flow, average or weights=<csv>"
        ))),
    }
}

/// Builds the scheme; kinds need `k`, explicit weights carry their own period.
pub fn build_scheme(arg: &SchemeArg, k: Option<usize>) -> Result<AggregationScheme> {
    match arg {
        SchemeArg::Kind(kind) => {
            let k = k.context("--K is required with a scheme kind")?;
            Ok(AggregationScheme::with_period(*kind, k)?)
        }
        SchemeArg::Weights(w) => {
            if let Some(k) = k {
                if k != w.len() {
                    bail!(armagg::Error::InvalidInput(format!(
                        "--K {k} disagrees with {} weights",
                        w.len()
                    )));
                }
            }
            Ok(AggregationScheme::from_weights(w.clone())?)
        }
    }
}
