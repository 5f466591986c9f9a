//! Command implementations. Each returns its report as text so the binary
//! and the tests share one code path.

use std::path::Path;

use anyhow::{Context, Result};
use armagg::aggmodel::{aggregate_model_with, AggregationConfig};
use armagg::forecast::{char_msfe, char_msfe_aggregate, forecast_aggregate, forecast_h, PresetSample};
use armagg::model::{autocovariance, expand_causal, expand_inverse, MAX_TRUNC};
use armagg::predictors::{compare, construct_seed_model, SeedModel, SeedSpec};
use armagg::scheme::aggregate_series;
use armagg::totalerror::{ErrorEngine, ErrorMode, SumStrategy};
use armagg::{AggregationScheme, ArmaModel, LinearRep, ValidationConfig};
use serde::Serialize;

use crate::config::{ExperimentConfig, ModeArg};
use crate::io::{fmt_f64, Manifest, SampleFile};
use crate::mc::{mc_aggregate_char, mc_char_msfe, mc_css_ar1, McRow};

/// Report text and its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub manifest: String,
}

/// Machine-readable category for an error chain.
pub fn error_category(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<armagg::Error>() {
            return e.category();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::num::ParseFloatError>().is_some()
            || cause.downcast_ref::<std::num::ParseIntError>().is_some()
        {
            return "parse_error";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io_error";
        }
    }
    "invalid_input"
}

/// Predictor comparison over the configured horizons; horizon h forecasts
/// the h-period aggregate.
pub fn run_errors(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let model = cfg.load_model()?;
    let report = compare(
        &model,
        cfg.t,
        cfg.horizon_range()?,
        cfg.scheme_kind()?,
        &cfg.predictor_list()?,
        &cfg.predictor_config(),
    )?;
    let manifest = Manifest::new("compare", &model, cfg.t, cfg, cfg.out.as_deref()).to_json()?;
    Ok(RunOutput {
        csv: report.to_csv(),
        manifest,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorsSettings {
    pub horizons: (usize, usize),
    pub mode: ModeArg,
    pub naive_sums: bool,
    pub scheme: Option<Vec<f64>>,
}

/// Total error of the disaggregated forecast at each horizon, or of the
/// aggregate forecast when a scheme is given.
pub fn errors_table(
    model: &ArmaModel,
    t: usize,
    horizons: std::ops::RangeInclusive<usize>,
    mode: ModeArg,
    naive_sums: bool,
    scheme: Option<&AggregationScheme>,
) -> Result<String> {
    let mode = match mode {
        ModeArg::Approx => ErrorMode::Approx,
        ModeArg::Exact => ErrorMode::ExactGaussian,
    };
    let strategy = if naive_sums {
        SumStrategy::Naive
    } else {
        SumStrategy::Factorized
    };
    let kmax = (*horizons.end()).max(scheme.map_or(1, |s| s.k()));
    let engine = ErrorEngine::for_model(model, t, kmax)?;
    let mut out = String::from("target,characteristic,estimation,total,method\n");
    let mut row = |target: String, d: armagg::totalerror::ErrorDecomposition| {
        out.push_str(&format!(
            "{target},{},{},{},{}\n",
            fmt_f64(d.characteristic),
            fmt_f64(d.estimation),
            fmt_f64(d.total),
            d.method.name()
        ));
    };
    match scheme {
        Some(s) => row(s.describe(), engine.aggregate(s.weights(), mode, strategy)?),
        None => {
            for h in horizons {
                row(format!("h={h}"), engine.horizon(h, mode, strategy)?);
            }
        }
    }
    Ok(out)
}

/// ψ and π weights through `order`.
pub fn expand_table(model: &ArmaModel, order: usize) -> Result<String> {
    let psi = expand_causal(model, order)?;
    let pi = expand_inverse(model, order)?;
    let mut out = String::from("k,psi,pi\n");
    for k in 0..=order {
        out.push_str(&format!("{k},{},{}\n", fmt_f64(psi[k]), fmt_f64(pi[k])));
    }
    Ok(out)
}

/// Point forecasts from a sample file, per horizon or for one aggregate.
pub fn forecast_table(
    model: &ArmaModel,
    sample: &SampleFile,
    horizons: std::ops::RangeInclusive<usize>,
    scheme: Option<&AggregationScheme>,
) -> Result<String> {
    let t = sample.values.len();
    let hmax = (*horizons.end()).max(scheme.map_or(1, |s| s.k()));
    let rep = LinearRep::new(model, t + hmax - 1 + model.r())?;
    let ps = PresetSample::from_preset(&sample.preset(model)?, &rep, sample.values.clone())?;
    let mut out = String::from("target,forecast\n");
    match scheme {
        Some(s) => out.push_str(&format!("{},{}\n", s.describe(), fmt_f64(forecast_aggregate(&ps, &rep, s)?))),
        None => {
            for h in horizons {
                out.push_str(&format!("h={h},{}\n", fmt_f64(forecast_h(&ps, &rep, h)?)));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct AggregationSidecar<'a> {
    scheme: &'a AggregationScheme,
    tpoly: &'a [f64],
    n: usize,
    qstar: usize,
    sigma2_star: f64,
}

/// Aggregated model JSON and a sidecar with T(L), n, q* and σ*².
pub fn aggregate_model_output(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    cfg: &AggregationConfig,
) -> Result<(String, String)> {
    let agg = aggregate_model_with(model, scheme, cfg)?;
    let sidecar = AggregationSidecar {
        scheme,
        tpoly: agg.tpoly.coeffs(),
        n: agg.n,
        qstar: agg.qstar,
        sigma2_star: agg.base.sigma2(),
    };
    Ok((
        serde_json::to_string_pretty(&agg.base)? + "\n",
        serde_json::to_string_pretty(&sidecar)? + "\n",
    ))
}

pub fn aggregate_series_table(values: &[f64], scheme: &AggregationScheme) -> Result<String> {
    let y = aggregate_series(values, scheme)?;
    let mut out = String::from("m,y\n");
    for (m, v) in y.iter().enumerate() {
        out.push_str(&format!("{},{}\n", m + 1, fmt_f64(*v)));
    }
    Ok(out)
}

/// Validation report as JSON and whether every condition holds.
pub fn validate_output(model: &ArmaModel, cfg: &ValidationConfig) -> Result<(String, bool)> {
    let rep = model.validate(cfg)?;
    Ok((serde_json::to_string_pretty(&rep)? + "\n", rep.passed()))
}

pub fn seed_model_output(spec_path: &Path, cfg: &ValidationConfig) -> Result<(SeedModel, String)> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: SeedSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    let seed = construct_seed_model(&spec, cfg)?;
    let json = serde_json::to_string_pretty(&seed.model)? + "\n";
    Ok((seed, json))
}

/// Sample size and replication cap of the CSS check.
pub const CSS_T: usize = 2000;
pub const CSS_REPS: usize = 2000;

/// Formula-versus-simulation report.
///
/// Rows: the characteristic error at each horizon; the aggregate
/// characteristic error for the scheme with period h ≥ 2; for AR(1) models
/// the variance of `√T(φ̂_CSS − φ)` against `1 − φ²`.
pub fn run_mc_check(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let model = cfg.load_model()?;
    let mc = cfg
        .mc
        .ok_or_else(|| armagg::Error::InvalidInput("mc settings (paths, seed) are required".into()))?;
    let horizons = cfg.horizon_range()?;
    let kind = cfg.scheme_kind().ok();
    let rep = LinearRep::new(&model, *horizons.end() + model.r())?;
    let mut rows = Vec::new();
    for (i, h) in horizons.enumerate() {
        let seed = mc.seed.wrapping_add(2 * i as u64);
        let f = char_msfe(&rep, model.sigma2(), h)?;
        rows.push(McRow::new(format!("char_msfe h={h}"), f, mc_char_msfe(&model, cfg.t, h, mc.paths, seed)?));
        if let Some(kind) = kind.filter(|_| h >= 2) {
            let s = AggregationScheme::with_period(kind, h)?;
            let f = char_msfe_aggregate(&rep, model.sigma2(), &s)?;
            let est = mc_aggregate_char(&model, cfg.t, &s, mc.paths, seed.wrapping_add(1))?;
            rows.push(McRow::new(format!("aggregate_char {}", s.describe()), f, est));
        }
    }
    if model.p() == 1 && model.q() == 0 {
        let reps = mc.paths.min(CSS_REPS);
        let f = 1.0 - model.phi()[0].powi(2);
        let est = mc_css_ar1(&model, CSS_T, reps, mc.seed.wrapping_add(u64::MAX / 2))?;
        rows.push(McRow::new(format!("css_variance T={CSS_T}"), f, est));
    }
    let mut csv = String::from("quantity,formula,estimate,stderr,z\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.quantity,
            fmt_f64(r.formula),
            fmt_f64(r.estimate),
            fmt_f64(r.stderr),
            fmt_f64(r.z)
        ));
    }
    let manifest = Manifest::new("mc-check", &model, cfg.t, cfg, cfg.out.as_deref()).to_json()?;
    Ok(RunOutput { csv, manifest })
}

/// Autocovariances of the aggregated model at lags `0..=maxlag`.
pub fn aggregated_model_autocov(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    maxlag: usize,
    cfg: &AggregationConfig,
) -> Result<Vec<f64>> {
    let agg = aggregate_model_with(model, scheme, cfg)?;
    Ok(autocovariance(&agg.base, maxlag, MAX_TRUNC)?)
}

