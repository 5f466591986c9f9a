//! ARMA model representation, validation and the ψ/π/γ expansions.
//!
//! Sign convention: `Φ(L) = 1 - φ_1 L - ... - φ_p L^p` and
//! `Θ(L) = 1 + θ_1 L + ... + θ_q L^q`.

use nalgebra::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Default tail tolerance for adaptive truncations.
pub const TAIL_TOL: f64 = 1e-12;

/// Default cap on adaptive truncation lengths.
pub const MAX_TRUNC: usize = 10_000;

/// Tolerances used by [`ArmaModel::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Roots must satisfy `|z| > 1 + root_margin`.
    pub root_margin: f64,
    /// AR and MA roots closer than this count as common.
    pub common_root_tol: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            root_margin: 1e-6,
            common_root_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootInfo {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

impl From<Complex<f64>> for RootInfo {
    fn from(z: Complex<f64>) -> Self {
        Self {
            re: z.re,
            im: z.im,
            modulus: z.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ar_roots: Vec<RootInfo>,
    pub ma_roots: Vec<RootInfo>,
    /// Smallest distance between an AR root and an MA root.
    pub min_common_distance: Option<f64>,
    pub causal: bool,
    pub invertible: bool,
    pub no_common_root: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.causal && self.invertible && self.no_common_root
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.causal {
            out.push("causal");
        }
        if !self.invertible {
            out.push("invertible");
        }
        if !self.no_common_root {
            out.push("common-root");
        }
        out
    }
}

/// On-disk model layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    pub sigma2: f64,
}

/// ARMA(p, q) model `Φ(L) X_t = Θ(L) ε_t` with innovation variance σ².
///
/// Construction only checks finiteness and `σ² > 0`; root conditions are
/// reported by [`ArmaModel::validate`] and enforced by the operations that
/// need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct ArmaModel {
    phi: Vec<f64>,
    theta: Vec<f64>,
    sigma2: f64,
}

impl TryFrom<ModelFile> for ArmaModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        ArmaModel::new(f.phi, f.theta, f.sigma2)
    }
}

impl From<ArmaModel> for ModelFile {
    fn from(m: ArmaModel) -> Self {
        ModelFile {
            phi: m.phi,
            theta: m.theta,
            sigma2: m.sigma2,
        }
    }
}

impl ArmaModel {
    pub fn new(phi: Vec<f64>, theta: Vec<f64>, sigma2: f64) -> Result<Self> {
        if phi.iter().chain(theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite ARMA coefficient".into()));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "innovation variance must be positive and finite, got {sigma2}"
            )));
        }
        Ok(Self { phi, theta, sigma2 })
    }

    pub fn white_noise(sigma2: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), sigma2)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("model file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn q(&self) -> usize {
        self.theta.len()
    }

    /// `max(p, q)`.
    pub fn r(&self) -> usize {
        self.p().max(self.q())
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.phi.clone(), self.theta.clone(), sigma2)
    }

    /// Parameter vector β = (φ', θ')'.
    pub fn beta(&self) -> Vec<f64> {
        self.phi.iter().chain(self.theta.iter()).copied().collect()
    }

    /// Model with the same orders and σ² and parameters taken from β.
    pub fn with_beta(&self, beta: &[f64]) -> Result<Self> {
        let p = self.p();
        if beta.len() != p + self.q() {
            return Err(Error::InvalidInput("parameter vector length mismatch".into()));
        }
        Self::new(beta[..p].to_vec(), beta[p..].to_vec(), self.sigma2)
    }

    pub fn ar_poly(&self) -> Polynomial {
        Polynomial::from_ar(&self.phi)
    }

    pub fn ma_poly(&self) -> Polynomial {
        Polynomial::from_ma(&self.theta)
    }

    pub fn ar_roots(&self) -> Result<Vec<Complex<f64>>> {
        self.ar_poly().roots()
    }

    pub fn ma_roots(&self) -> Result<Vec<Complex<f64>>> {
        self.ma_poly().roots()
    }

    pub fn validate(&self, cfg: &ValidationConfig) -> Result<ValidationReport> {
        let ar = self.ar_roots()?;
        let ma = self.ma_roots()?;
        let bound = 1.0 + cfg.root_margin;
        let causal = ar.iter().all(|z| z.norm() > bound);
        let invertible = ma.iter().all(|z| z.norm() > bound);
        let min_common_distance = ar
            .iter()
            .flat_map(|a| ma.iter().map(move |b| (a - b).norm()))
            .min_by(f64::total_cmp);
        let no_common_root = min_common_distance.is_none_or(|d| d > cfg.common_root_tol);
        Ok(ValidationReport {
            ar_roots: ar.into_iter().map(RootInfo::from).collect(),
            ma_roots: ma.into_iter().map(RootInfo::from).collect(),
            min_common_distance,
            causal,
            invertible,
            no_common_root,
        })
    }

    /// Errors with `ModelInvalid` unless all three root conditions hold.
    pub fn ensure_valid(&self, cfg: &ValidationConfig) -> Result<ValidationReport> {
        let rep = self.validate(cfg)?;
        if rep.passed() {
            Ok(rep)
        } else {
            Err(Error::ModelInvalid(format!(
                "fails {}",
                rep.failures().join(", ")
            )))
        }
    }

    /// Causality and invertibility at the default margin; these are the
    /// conditions the ψ and π expansions rely on.
    pub fn ensure_causal_invertible(&self) -> Result<()> {
        let bound = 1.0 + ValidationConfig::default().root_margin;
        if self.ar_roots()?.iter().any(|z| z.norm() <= bound) {
            return Err(Error::ModelInvalid("not causal".into()));
        }
        if self.ma_roots()?.iter().any(|z| z.norm() <= bound) {
            return Err(Error::ModelInvalid("not invertible".into()));
        }
        Ok(())
    }
}

/// ψ weights of `Θ/Φ` through `order`, without root checks.
pub fn psi_weights(phi: &[f64], theta: &[f64], order: usize) -> Vec<f64> {
    let mut psi = vec![0.0; order + 1];
    for k in 0..=order {
        let mut v = if k == 0 {
            1.0
        } else {
            theta.get(k - 1).copied().unwrap_or(0.0)
        };
        for (i, &f) in phi.iter().enumerate().take(k) {
            v += f * psi[k - 1 - i];
        }
        psi[k] = v;
    }
    psi
}

/// π weights of `Φ/Θ` through `order`, without root checks.
pub fn pi_weights(phi: &[f64], theta: &[f64], order: usize) -> Vec<f64> {
    let mut pi = vec![0.0; order + 1];
    for k in 0..=order {
        let mut v = if k == 0 {
            1.0
        } else {
            -phi.get(k - 1).copied().unwrap_or(0.0)
        };
        for (j, &t) in theta.iter().enumerate().take(k) {
            v -= t * pi[k - 1 - j];
        }
        pi[k] = v;
    }
    pi
}

/// ψ weights of `Θ/Φ`, extended until the homogeneous tail is below `tol`.
pub fn psi_weights_adaptive(
    phi: &[f64],
    theta: &[f64],
    tol: f64,
    cap: usize,
) -> Result<Vec<f64>> {
    let p = phi.len();
    let q = theta.len();
    let window = p.max(1);
    let start = (q + 1).max(p);
    let mut psi: Vec<f64> = Vec::with_capacity(64);
    for k in 0..=cap {
        let mut v = if k == 0 {
            1.0
        } else {
            theta.get(k - 1).copied().unwrap_or(0.0)
        };
        for (i, &f) in phi.iter().enumerate().take(k) {
            v += f * psi[k - 1 - i];
        }
        psi.push(v);
        if k >= start && psi[k + 1 - window..].iter().all(|x| x.abs() < tol) {
            return Ok(psi);
        }
    }
    Err(Error::ConvergenceFailure(format!(
        "expansion tail above {tol:e} after {cap} terms"
    )))
}

/// Truncated causal and inverse expansions `ψ_0..ψ_P`, `π_0..π_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRep {
    order: usize,
    r: usize,
    psi: Vec<f64>,
    pi: Vec<f64>,
}

impl LinearRep {
    pub fn new(model: &ArmaModel, order: usize) -> Result<Self> {
        model.ensure_causal_invertible()?;
        Ok(Self::new_unchecked(model, order))
    }

    /// Skips root checks; callers guarantee causality and invertibility.
    pub fn new_unchecked(model: &ArmaModel, order: usize) -> Self {
        Self {
            order,
            r: model.r(),
            psi: psi_weights(model.phi(), model.theta(), order),
            pi: pi_weights(model.phi(), model.theta(), order),
        }
    }

    /// Truncation order P.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.order < needed {
            Err(Error::TruncationTooShort {
                needed,
                available: self.order,
            })
        } else {
            Ok(())
        }
    }
}

/// ψ_0..ψ_P of a causal model.
pub fn expand_causal(model: &ArmaModel, order: usize) -> Result<Vec<f64>> {
    model.ensure_causal_invertible()?;
    Ok(psi_weights(model.phi(), model.theta(), order))
}

/// π_0..π_P of an invertible model.
pub fn expand_inverse(model: &ArmaModel, order: usize) -> Result<Vec<f64>> {
    model.ensure_causal_invertible()?;
    Ok(pi_weights(model.phi(), model.theta(), order))
}

/// Autocovariances γ(0..=maxlag) as `σ² Σ ψ_i ψ_{i+k}`.
///
/// The ψ expansion is extended adaptively up to `trunc` terms; the call
/// fails if the tail is still above [`TAIL_TOL`] by then.
pub fn autocovariance(model: &ArmaModel, maxlag: usize, trunc: usize) -> Result<Vec<f64>> {
    model.ensure_causal_invertible()?;
    let psi = psi_weights_adaptive(model.phi(), model.theta(), TAIL_TOL, trunc)?;
    Ok((0..=maxlag)
        .map(|k| {
            model.sigma2()
                * psi
                    .iter()
                    .zip(psi.iter().skip(k))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect())
}

/// Draws a valid model with prescribed root moduli range.
///
/// AR and MA roots are drawn with moduli in `[min_mod, max_mod]`, half of
/// the pairs complex. Draws are repeated until AR roots are pairwise
/// separated and AR/MA roots are apart by at least `sep`.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    p: usize,
    q: usize,
    sigma2: f64,
    min_mod: f64,
    max_mod: f64,
    sep: f64,
) -> ArmaModel {
    loop {
        let ar = random_roots(rng, p, min_mod, max_mod);
        let ma = random_roots(rng, q, min_mod, max_mod);
        let ar_ok = ar
            .iter()
            .enumerate()
            .all(|(i, a)| ar.iter().skip(i + 1).all(|b| (a - b).norm() > sep));
        let cross_ok = ar
            .iter()
            .all(|a| ma.iter().all(|b| (a - b).norm() > sep));
        if !(ar_ok && cross_ok) {
            continue;
        }
        let phi_poly = poly_from_roots(&ar);
        let theta_poly = poly_from_roots(&ma);
        let phi: Vec<f64> = phi_poly[1..].iter().map(|c| -c).collect();
        let theta = theta_poly[1..].to_vec();
        if let Ok(m) = ArmaModel::new(phi, theta, sigma2) {
            return m;
        }
    }
}

fn random_roots<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    min_mod: f64,
    max_mod: f64,
) -> Vec<Complex<f64>> {
    let mut roots = Vec::with_capacity(n);
    while roots.len() < n {
        let m = rng.random_range(min_mod..max_mod);
        if n - roots.len() >= 2 && rng.random_bool(0.5) {
            let arg = rng.random_range(0.3..(std::f64::consts::PI - 0.3));
            let z = Complex::from_polar(m, arg);
            roots.push(z);
            roots.push(z.conj());
        } else {
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            roots.push(Complex::new(s * m, 0.0));
        }
    }
    roots
}

/// Coefficients of `Π (1 - z / z_k)`, constant term first.
pub(crate) fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for z in roots {
        let inv = -z.inv();
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k] += ck;
            next[k + 1] += ck * inv;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}
