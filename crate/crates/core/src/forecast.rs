//! Presets, innovation reconstruction and finite-sample optimal forecasts.
//!
//! Time indices follow the model: the sample is `x_1..x_T`, the enlarged
//! preset covers `1-r..0` with `r = max(p, q)`, and the process is treated
//! as started at `1-r`. Reconstructed innovations for every index from `1-r`
//! on are obtained by applying π to the observed history, which for indices
//! `≤ 0` reproduces the enlarged-preset innovations whenever the preset is
//! consistent with a process started at `1-r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{ArmaModel, LinearRep};
use crate::scheme::AggregationScheme;

/// Preset `I`: presample `x_{1-p}..x_0` and preinnovations `ε_{1-q}..ε_0`,
/// oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    presample: Vec<f64>,
    preinnovations: Vec<f64>,
}

impl Preset {
    pub fn new(model: &ArmaModel, presample: Vec<f64>, preinnovations: Vec<f64>) -> Result<Self> {
        if presample.len() != model.p() || preinnovations.len() != model.q() {
            return Err(Error::InvalidInput(format!(
                "preset lengths ({}, {}) do not match model orders ({}, {})",
                presample.len(),
                preinnovations.len(),
                model.p(),
                model.q()
            )));
        }
        if presample.iter().chain(&preinnovations).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite preset value".into()));
        }
        Ok(Self {
            presample,
            preinnovations,
        })
    }

    pub fn zeros(model: &ArmaModel) -> Self {
        Self {
            presample: vec![0.0; model.p()],
            preinnovations: vec![0.0; model.q()],
        }
    }

    /// Preset of a process started at `1-r` from zero, driven by the given
    /// innovations `ε_{1-r}..ε_0`.
    pub fn from_innovations(model: &ArmaModel, eps: &[f64]) -> Result<Self> {
        let r = model.r();
        if eps.len() != r {
            return Err(Error::InvalidInput(format!(
                "expected {r} pre-innovations, got {}",
                eps.len()
            )));
        }
        let x = run_recursion(model, &[], &[], eps);
        Ok(Self {
            presample: x[r - model.p()..].to_vec(),
            preinnovations: eps[r - model.q()..].to_vec(),
        })
    }

    pub fn presample(&self) -> &[f64] {
        &self.presample
    }

    pub fn preinnovations(&self) -> &[f64] {
        &self.preinnovations
    }

    pub fn p(&self) -> usize {
        self.presample.len()
    }

    pub fn q(&self) -> usize {
        self.preinnovations.len()
    }
}

/// Enlarged preset `I*` with both blocks of length `r = max(p, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnlargedPreset {
    r: usize,
    x: Vec<f64>,
    eps: Vec<f64>,
}

impl EnlargedPreset {
    pub fn r(&self) -> usize {
        self.r
    }

    /// `x_{1-r}..x_0`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `ε_{1-r}..ε_0`.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }
}

/// Completes the shorter preset block to length `r`.
pub fn enlarge_preset(preset: &Preset, rep: &LinearRep) -> Result<EnlargedPreset> {
    let (p, q) = (preset.p(), preset.q());
    let r = p.max(q);
    if rep.r() != r {
        return Err(Error::InvalidInput(format!(
            "preset implies r = {r} but expansion has r = {}",
            rep.r()
        )));
    }
    rep.require(r.saturating_sub(1))?;
    let mut x = preset.presample.clone();
    let mut eps = preset.preinnovations.clone();
    if p > q {
        // ε_t for 1-p ≤ t < 1-q, position k = t + p - 1.
        let pi = rep.pi();
        let head: Vec<f64> = (0..p - q)
            .map(|k| (0..=k).map(|j| pi[j] * x[k - j]).sum())
            .collect();
        eps = head.into_iter().chain(eps).collect();
    } else if q > p {
        let psi = rep.psi();
        let head: Vec<f64> = (0..q - p)
            .map(|k| (0..=k).map(|i| psi[i] * eps[k - i]).sum())
            .collect();
        x = head.into_iter().chain(x).collect();
    }
    Ok(EnlargedPreset { r, x, eps })
}

/// Enlarged preset together with the observed sample `x_1..x_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetSample {
    preset: EnlargedPreset,
    sample: Vec<f64>,
}

impl PresetSample {
    pub fn new(preset: EnlargedPreset, sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidInput("sample must contain at least one value".into()));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample value".into()));
        }
        Ok(Self { preset, sample })
    }

    /// Enlarges `preset` with `rep` and attaches the sample.
    pub fn from_preset(preset: &Preset, rep: &LinearRep, sample: Vec<f64>) -> Result<Self> {
        Self::new(enlarge_preset(preset, rep)?, sample)
    }

    pub fn preset(&self) -> &EnlargedPreset {
        &self.preset
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// Sample size T.
    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn r(&self) -> usize {
        self.preset.r
    }

    /// Keeps the first `t` observations.
    pub fn truncated(&self, t: usize) -> Result<Self> {
        Self::new(self.preset.clone(), self.sample[..t.min(self.sample.len())].to_vec())
    }

    /// `x_{1-r}..x_T`; index `t` sits at position `t + r - 1`.
    fn history(&self) -> Vec<f64> {
        self.preset.x.iter().chain(&self.sample).copied().collect()
    }
}

fn check_r(ps: &PresetSample, rep: &LinearRep) -> Result<()> {
    if ps.r() != rep.r() {
        return Err(Error::InvalidInput(format!(
            "preset has r = {} but expansion has r = {}",
            ps.r(),
            rep.r()
        )));
    }
    Ok(())
}

/// ε̃_t for `t = 1-r..T`, at position `t + r - 1`.
fn reconstruct_all(ps: &PresetSample, rep: &LinearRep) -> Result<Vec<f64>> {
    check_r(ps, rep)?;
    let x = ps.history();
    rep.require(x.len() - 1)?;
    let pi = rep.pi();
    Ok((0..x.len())
        .map(|k| (0..=k).map(|j| pi[j] * x[k - j]).sum())
        .collect())
}

/// Reconstructed innovations `ε̃_t = Σ_{j=0}^{t+r-1} π_j x_{t-j}` for
/// `t = 1..T`.
pub fn reconstruct_innovations(ps: &PresetSample, rep: &LinearRep) -> Result<Vec<f64>> {
    let all = reconstruct_all(ps, rep)?;
    Ok(all[ps.r()..].to_vec())
}

fn forecast_from_innovations(eps: &[f64], psi: &[f64], t: usize, r: usize, h: usize) -> f64 {
    // Σ_{i=h}^{T+h-1+r} ψ_i ε̃_{T+h-i}; ε̃_s sits at position s + r - 1.
    (h..=t + h - 1 + r)
        .map(|i| psi[i] * eps[t + h + r - 1 - i])
        .sum()
}

/// Optimal h-step forecast `X̂_{T+h} = Σ_{i=h}^{T+h-1+r} ψ_i ε̃_{T+h-i}`.
pub fn forecast_h(ps: &PresetSample, rep: &LinearRep, h: usize) -> Result<f64> {
    if h == 0 {
        return Err(Error::InvalidInput("forecast horizon must be at least 1".into()));
    }
    let t = ps.len();
    rep.require(t + h - 1 + ps.r())?;
    let eps = reconstruct_all(ps, rep)?;
    Ok(forecast_from_innovations(&eps, rep.psi(), t, ps.r(), h))
}

/// Forecasts for `h = 1..=hmax` through the ARMA recursion
/// `X̂_{T+h} = Σ φ_i X̂_{T+h-i} + Σ_{j≥h} θ_j ε̃_{T+h-j}`.
pub fn forecast_recursive(ps: &PresetSample, model: &ArmaModel, hmax: usize) -> Result<Vec<f64>> {
    if hmax == 0 {
        return Err(Error::InvalidInput("forecast horizon must be at least 1".into()));
    }
    let t = ps.len();
    let r = ps.r();
    let rep = LinearRep::new(model, t - 1 + r)?;
    let eps = reconstruct_all(ps, &rep)?;
    let mut x = ps.history();
    for h in 1..=hmax {
        let pos = t + h + r - 1;
        let mut v: f64 = model
            .phi()
            .iter()
            .enumerate()
            .map(|(i, f)| f * x[pos - i - 1])
            .sum();
        for j in h..=model.q() {
            v += model.theta()[j - 1] * eps[pos - j];
        }
        x.push(v);
    }
    Ok(x[t + r..].to_vec())
}

/// Characteristic error `σ² Σ_{i<h} ψ_i²`.
pub fn char_msfe(rep: &LinearRep, sigma2: f64, h: usize) -> Result<f64> {
    if h == 0 {
        return Err(Error::InvalidInput("forecast horizon must be at least 1".into()));
    }
    rep.require(h - 1)?;
    Ok(sigma2 * rep.psi()[..h].iter().map(|v| v * v).sum::<f64>())
}

/// Forecast of the aggregate `Σ_i w_i X_{T+i}`.
pub fn forecast_aggregate(
    ps: &PresetSample,
    rep: &LinearRep,
    scheme: &AggregationScheme,
) -> Result<f64> {
    let t = ps.len();
    rep.require(t + scheme.k() - 1 + ps.r())?;
    let eps = reconstruct_all(ps, rep)?;
    Ok((1..=scheme.k())
        .filter(|&i| scheme.w(i) != 0.0)
        .map(|i| scheme.w(i) * forecast_from_innovations(&eps, rep.psi(), t, ps.r(), i))
        .sum())
}

/// Characteristic error of the aggregate forecast:
/// `σ² [Σ_i w_i² Σ_{l<i} ψ_l² + 2 Σ_{i<j} w_i w_j Σ_{l<i} ψ_l ψ_{j-i+l}]`.
pub fn char_msfe_aggregate(rep: &LinearRep, sigma2: f64, scheme: &AggregationScheme) -> Result<f64> {
    let k = scheme.k();
    rep.require(k - 1)?;
    let psi = rep.psi();
    let mut acc = 0.0;
    for i in 1..=k {
        let wi = scheme.w(i);
        if wi == 0.0 {
            continue;
        }
        acc += wi * wi * psi[..i].iter().map(|v| v * v).sum::<f64>();
        for j in i + 1..=k {
            let wj = scheme.w(j);
            if wj == 0.0 {
                continue;
            }
            acc += 2.0 * wi * wj * (0..i).map(|l| psi[l] * psi[j - i + l]).sum::<f64>();
        }
    }
    Ok(sigma2 * acc)
}

/// Simulated path with its driving innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub sample: Vec<f64>,
    pub innovations: Vec<f64>,
}

/// Runs the ARMA recursion for `eps.len()` steps after the given presets.
fn run_recursion(model: &ArmaModel, presample: &[f64], preinnovations: &[f64], eps: &[f64]) -> Vec<f64> {
    let p = model.p();
    let q = model.q();
    // Pad the presets with leading zeros so that lags reach far enough.
    let mut x: Vec<f64> = vec![0.0; p.saturating_sub(presample.len())];
    x.extend_from_slice(presample);
    let mut e: Vec<f64> = vec![0.0; q.saturating_sub(preinnovations.len())];
    e.extend_from_slice(preinnovations);
    let (x0, e0) = (x.len(), e.len());
    for &et in eps {
        let mut v = et;
        for (i, f) in model.phi().iter().enumerate() {
            v += f * x[x.len() - 1 - i];
        }
        for (j, th) in model.theta().iter().enumerate() {
            v += th * e[e.len() - 1 - j];
        }
        x.push(v);
        e.push(et);
    }
    debug_assert_eq!(x.len() - x0, e.len() - e0);
    x[x0..].to_vec()
}

/// Gaussian path of length `n` after `preset`, drawn from `rng`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &ArmaModel,
    preset: &Preset,
    n: usize,
    rng: &mut R,
) -> SimulatedPath {
    let normal = Normal::new(0.0, model.sigma2().sqrt()).expect("positive variance");
    let innovations: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
    let sample = run_recursion(model, preset.presample(), preset.preinnovations(), &innovations);
    SimulatedPath {
        sample,
        innovations,
    }
}

/// Deterministic Gaussian sample of length `t` for the given seed.
pub fn simulate(model: &ArmaModel, preset: &Preset, t: usize, seed: u64) -> Result<PresetSample> {
    if t == 0 {
        return Err(Error::InvalidInput("sample length must be at least 1".into()));
    }
    let rep = LinearRep::new(model, model.r())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = simulate_path(model, preset, t, &mut rng);
    PresetSample::from_preset(preset, &rep, path.sample)
}
