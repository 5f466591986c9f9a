//! Predictors for temporal aggregates and the seed-model recipes used to
//! compare them.
//!
//! Four predictors of the K-aggregate `Σ_i w_i X_{T+i}` are covered:
//!
//! * TMS: multistep forecast with the disaggregated model and data.
//! * TA: one-step forecast with a model estimated on the aggregated sample.
//! * H: disaggregated estimation, aggregated model and data for a one-step
//!   forecast.
//! * OH: the multistep H variant over the divisors of K with the smallest
//!   total error.
//!
//! All errors use the first-order (approximate) total-error formula.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aggmodel::{aggregate_model_with, jacobian_beta_y_with, AggregationConfig};
use crate::asymcov::{jacobian_xi, sigma_beta, sigma_xi, XiCov};
use crate::error::{Error, Result};
use crate::model::{ArmaModel, ValidationConfig, MAX_TRUNC};
use crate::poly::{convolve, series_div};
use crate::scheme::{AggregationScheme, SchemeKind};
use crate::totalerror::{ErrorDecomposition, ErrorEngine, ErrorMode, SumStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predictor {
    #[serde(rename = "TMS")]
    Tms,
    #[serde(rename = "TA")]
    Ta,
    #[serde(rename = "H")]
    Hybrid,
    #[serde(rename = "OH")]
    OptimalHybrid,
}

impl Predictor {
    pub const ALL: [Predictor; 4] = [Predictor::Tms, Predictor::Ta, Predictor::Hybrid, Predictor::OptimalHybrid];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::Tms => "TMS",
            Predictor::Ta => "TA",
            Predictor::Hybrid => "H",
            Predictor::OptimalHybrid => "OH",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TMS" => Ok(Predictor::Tms),
            "TA" => Ok(Predictor::Ta),
            "H" | "HYBRID" => Ok(Predictor::Hybrid),
            "OH" => Ok(Predictor::OptimalHybrid),
            other => Err(Error::InvalidInput(format!("unknown predictor {other:?}"))),
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings shared by the predictor evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct PredictorConfig {
    pub aggregation: AggregationConfig,
    /// Let OH fall back to the divisor 1, which is the TMS predictor. Off by
    /// default: OH then ranges over the aggregating divisors only, so that
    /// it never does worse than H but may do worse than TMS.
    pub oh_include_unit_divisor: bool,
}

impl PredictorConfig {
    pub fn with_common_root_tol(tol: f64) -> Self {
        let mut cfg = Self::default();
        cfg.aggregation.validation.common_root_tol = tol;
        cfg
    }
}

/// TMS total error: the forecast of the aggregate from the disaggregated
/// model.
pub fn report_tms(model: &ArmaModel, t: usize, scheme: &AggregationScheme) -> Result<ErrorDecomposition> {
    let mut out = ErrorEngine::for_model(model, t, scheme.k())?.aggregate(
        scheme.weights(),
        ErrorMode::Approx,
        SumStrategy::Factorized,
    )?;
    out.label = format!("TMS {}", scheme.describe());
    Ok(out)
}

/// Error of forecasting the aggregate of the next `outer.k()` values of the
/// process aggregated with `inner`, using the aggregated model and Σ_Ξ
/// propagated from the disaggregated estimator.
fn multistep_hybrid(
    model: &ArmaModel,
    t: usize,
    inner: &AggregationScheme,
    outer: &AggregationScheme,
    cfg: &PredictorConfig,
) -> Result<ErrorDecomposition> {
    let agg = aggregate_model_with(model, inner, &cfg.aggregation)?;
    let jac = jacobian_beta_y_with(model, inner, &cfg.aggregation)?.j_beta_y();
    let sb = sigma_beta(model, MAX_TRUNC)?;
    let sy = &jac * sb.matrix() * jac.transpose();
    let order = t + outer.k() - 1 + agg.base.r();
    let xi = XiCov::from_parts(jacobian_xi(&agg.base, order)?, &sy)?;
    ErrorEngine::new(&agg.base, xi, t)?.aggregate(outer.weights(), ErrorMode::Approx, SumStrategy::Factorized)
}

/// Hybrid total error: one-step forecast of the aggregated model, with the
/// estimation error inherited from the disaggregated sample of size T.
pub fn report_hybrid(model: &ArmaModel, t: usize, scheme: &AggregationScheme) -> Result<ErrorDecomposition> {
    report_hybrid_with(model, t, scheme, &PredictorConfig::default())
}

pub fn report_hybrid_with(
    model: &ArmaModel,
    t: usize,
    scheme: &AggregationScheme,
    cfg: &PredictorConfig,
) -> Result<ErrorDecomposition> {
    if scheme.k() == 1 {
        return relabel(report_tms(model, t, scheme)?, "H", scheme);
    }
    let one = AggregationScheme::stock(1)?;
    relabel(multistep_hybrid(model, t, scheme, &one, cfg)?, "H", scheme)
}

fn relabel(mut d: ErrorDecomposition, name: &str, scheme: &AggregationScheme) -> Result<ErrorDecomposition> {
    d.label = format!("{name} {}", scheme.describe());
    Ok(d)
}

/// Positive divisors of `k` in increasing order.
pub fn divisors(k: usize) -> Vec<usize> {
    (1..=k).filter(|d| k % d == 0).collect()
}

/// Optimal-hybrid result: the best divisor and its decomposition, plus the
/// total error of every candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalHybrid {
    pub best: ErrorDecomposition,
    pub divisor: usize,
    pub candidates: Vec<(usize, f64)>,
}

/// OH total error over the divisors of K; only stock and flow compose.
///
/// The divisor 1 is a candidate only for `K = 1` or when
/// [`PredictorConfig::oh_include_unit_divisor`] is set.
pub fn report_oh(model: &ArmaModel, t: usize, k: usize, kind: SchemeKind) -> Result<OptimalHybrid> {
    report_oh_with(model, t, k, kind, &PredictorConfig::default())
}

pub fn report_oh_with(
    model: &ArmaModel,
    t: usize,
    k: usize,
    kind: SchemeKind,
    cfg: &PredictorConfig,
) -> Result<OptimalHybrid> {
    if !matches!(kind, SchemeKind::Stock | SchemeKind::Flow) {
        return Err(Error::Unsupported(format!(
            "optimal hybrid needs a compositional scheme, got {}",
            kind.name()
        )));
    }
    let full = AggregationScheme::with_period(kind, k)?;
    let mut best: Option<(usize, ErrorDecomposition)> = None;
    let mut candidates = Vec::new();
    let candidates_k = divisors(k)
        .into_iter()
        .filter(|&d| d > 1 || k == 1 || cfg.oh_include_unit_divisor);
    for ki in candidates_k {
        let ci = k / ki;
        let dec = if ki == 1 {
            report_tms(model, t, &full)?
        } else {
            let inner = AggregationScheme::with_period(kind, ki)?;
            let outer = AggregationScheme::with_period(kind, ci)?;
            multistep_hybrid(model, t, &inner, &outer, cfg)?
        };
        candidates.push((ki, dec.total));
        if best.as_ref().is_none_or(|(_, b)| dec.total < b.total) {
            best = Some((ki, dec));
        }
    }
    let (divisor, best) = best.ok_or_else(|| Error::InvalidInput("aggregation period must be at least 1".into()))?;
    Ok(OptimalHybrid {
        best: relabel(best, "OH", &full)?,
        divisor,
        candidates,
    })
}

/// TA total error.
///
/// The aggregated model is treated as if it were estimated by Gaussian
/// likelihood on the `M = T/K` aggregated points, with the asymptotic
/// covariance of a strong ARMA model. This is an approximation: the
/// aggregated innovations are only uncorrelated.
pub fn report_ta(model: &ArmaModel, t: usize, scheme: &AggregationScheme) -> Result<ErrorDecomposition> {
    report_ta_with(model, t, scheme, &PredictorConfig::default())
}

pub fn report_ta_with(
    model: &ArmaModel,
    t: usize,
    scheme: &AggregationScheme,
    cfg: &PredictorConfig,
) -> Result<ErrorDecomposition> {
    let k = scheme.k();
    if k == 1 {
        return relabel(report_tms(model, t, scheme)?, "TA", scheme);
    }
    if t % k != 0 {
        return Err(Error::InvalidInput(format!(
            "sample size {t} is not a multiple of the aggregation period {k}"
        )));
    }
    let m = t / k;
    let agg = aggregate_model_with(model, scheme, &cfg.aggregation)?;
    let xi = sigma_xi(&agg.base, m + agg.base.r(), MAX_TRUNC)?;
    let d = ErrorEngine::new(&agg.base, xi, m)?.horizon(1, ErrorMode::Approx, SumStrategy::Factorized)?;
    relabel(d, "TA", scheme)
}

/// One CSV row of a [`PredictorReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorEntry {
    pub predictor: Predictor,
    pub horizon: usize,
    pub characteristic: f64,
    pub estimation: f64,
    pub total: f64,
    pub chosen_divisor: Option<usize>,
}

/// Errors of several predictors over horizons `1..=H`, where horizon h
/// forecasts the h-period aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorReport {
    pub model: ArmaModel,
    pub t: usize,
    pub kind: SchemeKind,
    pub entries: Vec<PredictorEntry>,
}

impl PredictorReport {
    pub fn get(&self, predictor: Predictor, horizon: usize) -> Option<&PredictorEntry> {
        self.entries
            .iter()
            .find(|e| e.predictor == predictor && e.horizon == horizon)
    }

    /// CSV with 17 significant digits; an empty divisor field for
    /// predictors other than OH.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predictor,horizon,characteristic,estimation,total,chosen_divisor\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.predictor,
                e.horizon,
                fmt_f64(e.characteristic),
                fmt_f64(e.estimation),
                fmt_f64(e.total),
                e.chosen_divisor.map(|d| d.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

/// Formats with 17 significant digits so the value round-trips.
pub fn fmt_f64(v: f64) -> String {
    // Adding 0.0 maps -0.0 to 0.0.
    format!("{:.16e}", v + 0.0)
}

/// Evaluates `predictors` for every horizon in `horizons`.
pub fn compare(
    model: &ArmaModel,
    t: usize,
    horizons: impl IntoIterator<Item = usize>,
    kind: SchemeKind,
    predictors: &[Predictor],
    cfg: &PredictorConfig,
) -> Result<PredictorReport> {
    let mut entries = Vec::new();
    for h in horizons {
        let scheme = AggregationScheme::with_period(kind, h)?;
        for &p in predictors {
            let (d, div) = match p {
                Predictor::Tms => (report_tms(model, t, &scheme)?, None),
                Predictor::Ta => (report_ta_with(model, t, &scheme, cfg)?, None),
                Predictor::Hybrid => (report_hybrid_with(model, t, &scheme, cfg)?, None),
                Predictor::OptimalHybrid => {
                    let oh = report_oh_with(model, t, h, kind, cfg)?;
                    (oh.best, Some(oh.divisor))
                }
            };
            entries.push(PredictorEntry {
                predictor: p,
                horizon: h,
                characteristic: d.characteristic,
                estimation: d.estimation,
                total: d.total,
                chosen_divisor: div,
            });
        }
    }
    Ok(PredictorReport {
        model: model.clone(),
        t,
        kind,
        entries,
    })
}

/// Maximum coefficient mismatch in the truncated identity
/// `W̃(L)Ψ_n(L) = (Σ_{j≤J} a_j L^{jK}) (Σ_{j<K} b_j L^j)` with
/// `a_j = Σ_{i<K} w_{K-i} ψ_{jK-i}`, `b_j = Σ_{i≤j} w_{K-i} ψ_{j-i}` and
/// `J = ⌊(n-K+1)/K⌋`. Coefficients past `ψ_{n-1}` are zero.
pub fn lutkepohl_condition_residual(psi: &[f64], scheme: &AggregationScheme, n: usize) -> f64 {
    let k = scheme.k();
    let psi_at = |i: isize| -> f64 {
        if i >= 0 && (i as usize) < n.min(psi.len()) {
            psi[i as usize]
        } else {
            0.0
        }
    };
    let wt = scheme.wtilde();
    let psi_n: Vec<f64> = (0..n).map(|i| psi_at(i as isize)).collect();
    let lhs = convolve(&wt, &psi_n);
    let jmax = (n + 1).saturating_sub(k) / k;
    let mut seasonal = vec![0.0; jmax * k + 1];
    for j in 0..=jmax {
        seasonal[j * k] = (0..k)
            .map(|i| wt[i] * psi_at((j * k) as isize - i as isize))
            .sum();
    }
    let head: Vec<f64> = (0..k)
        .map(|j| (0..=j).map(|i| wt[i] * psi_at(j as isize - i as isize)).sum())
        .collect();
    let rhs = convolve(&seasonal, &head);
    (0..lhs.len().max(rhs.len()))
        .map(|i| (lhs.get(i).copied().unwrap_or(0.0) - rhs.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Which polynomial the seed recipe starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedBasis {
    /// AR coefficients φ are given; `Θ = Ψ*·Φ`.
    GivenAr { phi: Vec<f64> },
    /// MA coefficients θ are given; `Φ = Θ/Ψ*` truncated at `ar_order`.
    GivenMa { theta: Vec<f64>, ar_order: usize },
}

/// One coefficient change; `index` is 1-based in the sign convention of
/// the model (φ_i or θ_i).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nudge {
    pub index: usize,
    pub delta: f64,
}

/// How to break the AR/MA common roots a truncated recipe produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    None,
    /// Apply these changes to the derived polynomial.
    Explicit(Vec<Nudge>),
    /// Try every single-coefficient change of ±eps, doubling eps up to
    /// `max_doublings` times, and keep the one with the widest root
    /// separation.
    Auto { eps: f64, max_doublings: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub kind: SchemeKind,
    pub k: usize,
    pub psi_star: Vec<f64>,
    pub basis: SeedBasis,
    pub sigma2: f64,
    pub perturbation: Perturbation,
    /// Largest accepted condition residual of `psi_star`.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_residual_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedModel {
    pub model: ArmaModel,
    /// Model before any perturbation.
    pub unperturbed: ArmaModel,
    pub residual: f64,
    pub applied: Vec<Nudge>,
    pub warnings: Vec<String>,
}

fn apply_nudges(base: &[f64], nudges: &[Nudge]) -> Result<Vec<f64>> {
    let mut out = base.to_vec();
    for n in nudges {
        if n.index == 0 || n.index > out.len() {
            return Err(Error::InvalidInput(format!(
                "perturbation index {} outside 1..={}",
                n.index,
                out.len()
            )));
        }
        out[n.index - 1] += n.delta;
    }
    Ok(out)
}

/// Builds an ARMA model whose ψ weights start with `psi_star`.
pub fn construct_seed_model(spec: &SeedSpec, validation: &ValidationConfig) -> Result<SeedModel> {
    let scheme = AggregationScheme::with_period(spec.kind, spec.k)?;
    if !matches!(spec.kind, SchemeKind::Stock | SchemeKind::Flow) {
        return Err(Error::Unsupported("seed recipes exist for stock and flow only".into()));
    }
    let psi = &spec.psi_star;
    if psi.first().copied() != Some(1.0) {
        return Err(Error::InvalidInput("psi_star must start with ψ_0 = 1".into()));
    }
    let residual = lutkepohl_condition_residual(psi, &scheme, psi.len());
    if residual > spec.residual_tol {
        return Err(Error::ConstructionFailure(format!(
            "psi_star violates the truncated condition: residual {residual:e}"
        )));
    }
    // `given_ar` derives and perturbs Θ; `given_ma` derives and perturbs Φ.
    let (fixed, derived, ar_is_derived) = match &spec.basis {
        SeedBasis::GivenAr { phi } => {
            let ar: Vec<f64> = std::iter::once(1.0).chain(phi.iter().map(|v| -v)).collect();
            let mut theta = convolve(psi, &ar)[1..].to_vec();
            while theta.last().is_some_and(|v| v.abs() < 1e-14) {
                theta.pop();
            }
            (phi.clone(), theta, false)
        }
        SeedBasis::GivenMa { theta, ar_order } => {
            let ma: Vec<f64> = std::iter::once(1.0).chain(theta.iter().copied()).collect();
            let quotient = series_div(&ma, psi, *ar_order);
            let phi: Vec<f64> = quotient[1..].iter().map(|v| -v).collect();
            (theta.clone(), phi, true)
        }
    };
    let build = |d: &[f64]| -> Result<ArmaModel> {
        if ar_is_derived {
            ArmaModel::new(d.to_vec(), fixed.clone(), spec.sigma2)
        } else {
            ArmaModel::new(fixed.clone(), d.to_vec(), spec.sigma2)
        }
    };
    let unperturbed = build(&derived)?;
    let mut warnings = Vec::new();
    let applied = match &spec.perturbation {
        Perturbation::None => Vec::new(),
        Perturbation::Explicit(n) => n.clone(),
        Perturbation::Auto { eps, max_doublings } => {
            if unperturbed.validate(validation)?.passed() {
                Vec::new()
            } else {
                auto_nudge(&derived, &build, validation, *eps, *max_doublings)?
            }
        }
    };
    if !applied.is_empty() {
        warnings.push(format!(
            "perturbed {} coefficients to separate AR and MA roots: {}",
            if ar_is_derived { "AR" } else { "MA" },
            applied
                .iter()
                .map(|n| format!("[{}] {:+e}", n.index, n.delta))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let model = build(&apply_nudges(&derived, &applied)?)?;
    let report = model.validate(validation)?;
    if !report.passed() {
        return Err(Error::ConstructionFailure(format!(
            "seed model fails {} (closest AR/MA roots {:e})",
            report.failures().join(", "),
            report.min_common_distance.unwrap_or(f64::INFINITY)
        )));
    }
    Ok(SeedModel {
        model,
        unperturbed,
        residual,
        applied,
        warnings,
    })
}

fn auto_nudge(
    derived: &[f64],
    build: &dyn Fn(&[f64]) -> Result<ArmaModel>,
    validation: &ValidationConfig,
    eps: f64,
    max_doublings: usize,
) -> Result<Vec<Nudge>> {
    let mut eps = eps;
    for _ in 0..=max_doublings {
        let mut best: Option<(f64, Nudge)> = None;
        for index in 1..=derived.len() {
            for delta in [eps, -eps] {
                let nudge = Nudge { index, delta };
                let Ok(model) = build(&apply_nudges(derived, &[nudge])?) else {
                    continue;
                };
                let rep = model.validate(validation)?;
                if !(rep.causal && rep.invertible) {
                    continue;
                }
                let sep = rep.min_common_distance.unwrap_or(f64::INFINITY);
                if best.is_none_or(|(s, _)| sep > s) {
                    best = Some((sep, nudge));
                }
            }
        }
        if let Some((sep, nudge)) = best {
            if sep > validation.common_root_tol {
                return Ok(vec![nudge]);
            }
        }
        eps *= 2.0;
    }
    Err(Error::ConstructionFailure(
        "no single-coefficient perturbation within budget separates the roots".into(),
    ))
}
