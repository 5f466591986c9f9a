//! Monte-Carlo checks of the analytic error formulas.
//!
//! Path `i` of a run with master seed `s` draws from ChaCha8 seeded with
//! `s` on stream `i`, so every path is reproducible on its own and results
//! do not depend on the number of worker threads. Per-path values are
//! collected in path order and reduced sequentially.

use anyhow::Result;
use armagg::forecast::{forecast_aggregate, forecast_h, simulate_path, Preset, PresetSample};
use armagg::scheme::aggregate_series;
use armagg::{AggregationScheme, ArmaModel, LinearRep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Burn-in used when a path should start near stationarity.
pub const BURN_IN: usize = 500;

pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Mean and standard error of a Monte-Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_values(v: &[f64]) -> Self {
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Evaluates `f` on `paths` independent streams in parallel.
pub fn per_path<F>(paths: usize, seed: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    (0..paths as u64)
        .into_par_iter()
        .map(|i| f(&mut path_rng(seed, i)))
        .collect()
}

/// Squared error of the h-step forecast with known parameters, from a zero
/// preset and a sample of size `t`.
pub fn mc_char_msfe(model: &ArmaModel, t: usize, h: usize, paths: usize, seed: u64) -> Result<McEstimate> {
    let rep = LinearRep::new(model, t + h - 1 + model.r())?;
    let preset = Preset::zeros(model);
    let v = per_path(paths, seed, |rng| {
        let path = simulate_path(model, &preset, t + h, rng);
        let ps = PresetSample::from_preset(&preset, &rep, path.sample[..t].to_vec())?;
        let err = path.sample[t + h - 1] - forecast_h(&ps, &rep, h)?;
        Ok(err * err)
    })?;
    Ok(McEstimate::from_values(&v))
}

/// Squared error of the forecast of `Σ_i w_i X_{T+i}` with known parameters.
pub fn mc_aggregate_char(
    model: &ArmaModel,
    t: usize,
    scheme: &AggregationScheme,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let k = scheme.k();
    let rep = LinearRep::new(model, t + k - 1 + model.r())?;
    let preset = Preset::zeros(model);
    let v = per_path(paths, seed, |rng| {
        let path = simulate_path(model, &preset, t + k, rng);
        let ps = PresetSample::from_preset(&preset, &rep, path.sample[..t].to_vec())?;
        let target: f64 = (1..=k).map(|i| scheme.w(i) * path.sample[t + i - 1]).sum();
        let err = target - forecast_aggregate(&ps, &rep, scheme)?;
        Ok(err * err)
    })?;
    Ok(McEstimate::from_values(&v))
}

/// Conditional least-squares AR(1) estimate `Σ x_t x_{t-1} / Σ x_{t-1}²`.
pub fn css_ar1(x: &[f64]) -> f64 {
    let num: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    let den: f64 = x[..x.len() - 1].iter().map(|v| v * v).sum();
    num / den
}

/// Variance of `√T(φ̂ − φ)` over `reps` samples of size `t`, with its
/// standard error.
pub fn mc_css_ar1(model: &ArmaModel, t: usize, reps: usize, seed: u64) -> Result<McEstimate> {
    let phi = model.phi()[0];
    let preset = Preset::zeros(model);
    let z = per_path(reps, seed, |rng| {
        let path = simulate_path(model, &preset, BURN_IN + t, rng);
        Ok((t as f64).sqrt() * (css_ar1(&path.sample[BURN_IN..]) - phi))
    })?;
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let dev: Vec<f64> = z.iter().map(|v| (v - mean).powi(2)).collect();
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    let m4 = dev.iter().map(|d| d * d).sum::<f64>() / n;
    Ok(McEstimate {
        mean: var,
        stderr: ((m4 - var * var).max(0.0) / n).sqrt(),
        n: z.len(),
    })
}

/// Sample autocovariances (known zero mean) of the aggregated series at
/// lags `0..=maxlag`, averaged over paths of `m` aggregated points each.
pub fn mc_aggregated_autocov(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    m: usize,
    maxlag: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    let preset = Preset::zeros(model);
    let k = scheme.k();
    let per: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = path_rng(seed, i);
            let path = simulate_path(model, &preset, BURN_IN * k + m * k, &mut rng);
            let y = aggregate_series(&path.sample[BURN_IN * k..], scheme)?;
            Ok((0..=maxlag)
                .map(|j| y.iter().zip(&y[j..]).map(|(a, b)| a * b).sum::<f64>() / (y.len() - j) as f64)
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..=maxlag)
        .map(|j| McEstimate::from_values(&per.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect())
}

/// One line of the `mc-check` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub quantity: String,
    pub formula: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
}

impl McRow {
    pub fn new(quantity: impl Into<String>, formula: f64, est: McEstimate) -> Self {
        let z = if est.stderr > 0.0 {
            (est.mean - formula) / est.stderr
        } else {
            0.0
        };
        Self {
            quantity: quantity.into(),
            formula,
            estimate: est.mean,
            stderr: est.stderr,
            z,
        }
    }
}
