//! Temporal aggregation of ARMA models.
//!
//! With `W̃(z) = Σ_{m<K} w_{K-m} z^m`, the aggregated AR polynomial solves
//! `T(z) Φ(z) = Φ*(z^K) W̃(z)`, so that `Φ*(B) Y_m = (C(L) ε)_{mK}` with
//! `C = T Θ` and `B` the aggregated-scale lag. The MA part Θ* and σ*² are
//! the invertible spectral factor matching the autocovariances of `C(L)ε`
//! at lags `0, K, ..., q*K`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::asymcov::sigma_beta;
use crate::error::{Error, Result};
use crate::forecast::Preset;
use crate::model::{pi_weights, poly_from_roots, ArmaModel, ValidationConfig};
use crate::poly::{convolve, Polynomial};
use crate::scheme::AggregationScheme;

/// Preconditions for model aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregationConfig {
    pub validation: ValidationConfig,
    /// AR roots closer than this count as repeated.
    pub distinct_root_tol: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            validation: ValidationConfig::default(),
            distinct_root_tol: 1e-6,
        }
    }
}

/// Aggregated weak ARMA model with its construction data.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedArma {
    pub base: ArmaModel,
    pub tpoly: Polynomial,
    pub n: usize,
    pub qstar: usize,
    pub scheme: AggregationScheme,
}

impl AggregatedArma {
    /// `C(z) = T(z) Θ(z)` of the disaggregated model.
    pub fn c_poly(&self, model: &ArmaModel) -> Polynomial {
        self.tpoly.mul(&model.ma_poly())
    }
}

/// Degree `n = K(p+1) - p - K*` of T.
pub fn tpoly_degree(p: usize, scheme: &AggregationScheme) -> usize {
    scheme.k() * (p + 1) - p - scheme.kstar()
}

/// `q* = ⌊(K(p+1) + q - p - K*) / K⌋`.
pub fn qstar(p: usize, q: usize, scheme: &AggregationScheme) -> usize {
    (tpoly_degree(p, scheme) + q) / scheme.k()
}

fn check_generic(model: &ArmaModel, cfg: &AggregationConfig) -> Result<()> {
    let rep = model.validate(&cfg.validation)?;
    if !rep.causal || !rep.invertible {
        return Err(Error::ModelInvalid(format!("fails {}", rep.failures().join(", "))));
    }
    if !rep.no_common_root {
        return Err(Error::AggregationDegenerate(format!(
            "AR and MA roots within {:e}",
            cfg.validation.common_root_tol
        )));
    }
    let roots = model.ar_roots()?;
    for (i, a) in roots.iter().enumerate() {
        if roots[i + 1..].iter().any(|b| (a - b).norm() <= cfg.distinct_root_tol) {
            return Err(Error::AggregationDegenerate("repeated AR roots".into()));
        }
    }
    Ok(())
}

/// Brewer system in the unknowns `(t_0..t_n, φ*_1..φ*_p)`.
///
/// Row m reads `Σ_k t_k Φ_{m-k} + Σ_j φ*_j W̃_{m-jK} = W̃_m`.
fn brewer_system(phi: &[f64], scheme: &AggregationScheme) -> (DMatrix<f64>, DVector<f64>, usize) {
    let p = phi.len();
    let k = scheme.k();
    let n = tpoly_degree(p, scheme);
    let wt = scheme.wtilde();
    let size = n + 1 + p;
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    let big_phi = |l: usize| -> f64 {
        match l {
            0 => 1.0,
            l if l <= p => -phi[l - 1],
            _ => 0.0,
        }
    };
    for m in 0..size {
        for kk in 0..=n.min(m) {
            a[(m, kk)] = big_phi(m - kk);
        }
        for j in 1..=p {
            if m >= j * k && m - j * k < wt.len() {
                a[(m, n + j)] = wt[m - j * k];
            }
        }
        if m < wt.len() {
            rhs[m] = wt[m];
        }
    }
    (a, rhs, n)
}

fn solve_checked(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(max > 0.0) || min <= 1e-13 * max {
        return Err(Error::AggregationDegenerate("singular linear system".into()));
    }
    lu.solve(rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::AggregationDegenerate("singular linear system".into()))
}

/// Solves `T(z)Φ(z) = Φ*(z^K)W̃(z)` for T and φ*.
pub fn solve_brewer(model: &ArmaModel, scheme: &AggregationScheme) -> Result<(Polynomial, Vec<f64>)> {
    solve_brewer_with(model, scheme, &AggregationConfig::default())
}

pub fn solve_brewer_with(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    cfg: &AggregationConfig,
) -> Result<(Polynomial, Vec<f64>)> {
    check_generic(model, cfg)?;
    let (a, rhs, n) = brewer_system(model.phi(), scheme);
    let x = solve_checked(&a, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
    let t: Vec<f64> = (0..=n).map(|i| x[(i, 0)]).collect();
    let phistar: Vec<f64> = (0..model.p()).map(|j| x[(n + 1 + j, 0)]).collect();
    Ok((Polynomial::new(t), phistar))
}

/// `γ_j = σ² Σ_l c_l c_{l+jK}` for `j = 0..=qstar`.
fn aggregated_autocov(c: &[f64], k: usize, qstar: usize, sigma2: f64) -> Vec<f64> {
    (0..=qstar)
        .map(|j| {
            sigma2
                * c.iter()
                    .zip(c.iter().skip(j * k))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect()
}

/// Residuals `Σ_l τ_l τ_{l+j} - g_j`.
fn factor_residual(tau: &[f64], g: &[f64]) -> Vec<f64> {
    (0..g.len())
        .map(|j| {
            tau.iter()
                .zip(tau.iter().skip(j))
                .map(|(a, b)| a * b)
                .sum::<f64>()
                - g[j]
        })
        .collect()
}

/// Jacobian of [`factor_residual`] in τ: entry `(j, m) = τ_{m+j} + τ_{m-j}`.
fn factor_jacobian(tau: &[f64]) -> DMatrix<f64> {
    let n = tau.len();
    DMatrix::from_fn(n, n, |j, m| {
        let up = tau.get(m + j).copied().unwrap_or(0.0);
        let down = if m >= j { tau[m - j] } else { 0.0 };
        up + down
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Invertible MA factor τ with `Σ_l τ_l τ_{l+j} = g_j` and `τ_0 > 0`.
///
/// Roots of the autocovariance generating polynomial seed the factor; a
/// damped Newton iteration then polishes it.
pub fn factor_ma_autocov(g: &[f64]) -> Result<Vec<f64>> {
    let q = g.len() - 1;
    if !(g[0] > 0.0) {
        return Err(Error::FactorizationFailure("non-positive variance".into()));
    }
    let d = (1..=q).rev().find(|&j| g[j].abs() > 1e-14 * g[0]).unwrap_or(0);
    let mut tau = vec![0.0; q + 1];
    if d == 0 {
        tau[0] = g[0].sqrt();
        return Ok(tau);
    }
    // z^d Σ_{|j|≤d} g_|j| z^j has roots in pairs (z, 1/z).
    let laurent: Vec<f64> = (0..=2 * d).map(|m| g[m.abs_diff(d)]).collect();
    let mut roots = Polynomial::new(laurent).roots()?;
    roots.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let outside: Vec<Complex<f64>> = roots[..d].to_vec();
    if outside[d - 1].norm() <= 1.0 + 1e-9 {
        return Err(Error::FactorizationFailure(
            "autocovariance generating function has unit-circle roots".into(),
        ));
    }
    let theta = poly_from_roots(&outside);
    let scale = (g[0] / theta.iter().map(|v| v * v).sum::<f64>()).sqrt();
    for (t, th) in tau.iter_mut().zip(&theta) {
        *t = scale * th;
    }
    let tol = 1e-15 * g[0];
    let mut res = factor_residual(&tau, g);
    for _ in 0..60 {
        let norm = inf_norm(&res);
        if norm <= tol {
            break;
        }
        let jac = factor_jacobian(&tau);
        let step = match jac.lu().solve(&DVector::from_vec(res.clone())) {
            Some(s) => s,
            None => break,
        };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            let cand: Vec<f64> = tau.iter().zip(step.iter()).map(|(t, s)| t - lambda * s).collect();
            let cres = factor_residual(&cand, g);
            if inf_norm(&cres) < norm {
                tau = cand;
                res = cres;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if inf_norm(&res) > 1e-10 * g[0] {
        return Err(Error::FactorizationFailure(format!(
            "autocovariance equations not met: residual {:e}",
            inf_norm(&res)
        )));
    }
    if tau[0] < 0.0 {
        tau.iter_mut().for_each(|t| *t = -*t);
    }
    let check = Polynomial::new(tau.clone());
    if check.roots()?.iter().any(|z| z.norm() <= 1.0) {
        return Err(Error::FactorizationFailure("factor is not invertible".into()));
    }
    Ok(tau)
}

/// MA part Θ* (length q*) and σ*² of the aggregated model.
pub fn match_ma(
    model: &ArmaModel,
    tpoly: &Polynomial,
    scheme: &AggregationScheme,
) -> Result<(Vec<f64>, f64)> {
    let c = tpoly.mul(&model.ma_poly());
    let qs = qstar(model.p(), model.q(), scheme);
    let g = aggregated_autocov(c.coeffs(), scheme.k(), qs, model.sigma2());
    let tau = factor_ma_autocov(&g)?;
    let theta: Vec<f64> = tau[1..].iter().map(|t| t / tau[0]).collect();
    Ok((theta, tau[0] * tau[0]))
}

/// Aggregated model `(Φ*, Θ*, σ*²)`.
pub fn aggregate_model(model: &ArmaModel, scheme: &AggregationScheme) -> Result<AggregatedArma> {
    aggregate_model_with(model, scheme, &AggregationConfig::default())
}

pub fn aggregate_model_with(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    cfg: &AggregationConfig,
) -> Result<AggregatedArma> {
    let (tpoly, phistar) = solve_brewer_with(model, scheme, cfg)?;
    let (thetastar, s2) = match_ma(model, &tpoly, scheme)?;
    let base = ArmaModel::new(phistar, thetastar, s2)?;
    Ok(AggregatedArma {
        n: tpoly_degree(model.p(), scheme),
        qstar: base.q(),
        base,
        tpoly,
        scheme: scheme.clone(),
    })
}

/// Derivatives of the aggregated parameters with respect to β = (φ', θ')'.
#[derive(Debug, Clone, PartialEq)]
pub struct AggJacobian {
    pub d_phistar_d_phi: DMatrix<f64>,
    pub d_thetastar_d_beta: DMatrix<f64>,
    pub d_sigmastar_d_beta: DMatrix<f64>,
    pub d_t_d_phi: DMatrix<f64>,
}

impl AggJacobian {
    /// `J_{β_Y}` of size `(p+q*) × (p+q)`; the block `∂Φ*/∂Θ` is zero.
    pub fn j_beta_y(&self) -> DMatrix<f64> {
        let p = self.d_phistar_d_phi.nrows();
        let qs = self.d_thetastar_d_beta.nrows();
        let npar = self.d_thetastar_d_beta.ncols();
        let mut j = DMatrix::<f64>::zeros(p + qs, npar);
        j.view_mut((0, 0), (p, p)).copy_from(&self.d_phistar_d_phi);
        j.view_mut((p, 0), (qs, npar)).copy_from(&self.d_thetastar_d_beta);
        j
    }
}

/// Implicit differentiation of the Brewer system and the MA matching
/// equations.
pub fn jacobian_beta_y(model: &ArmaModel, scheme: &AggregationScheme) -> Result<AggJacobian> {
    jacobian_beta_y_with(model, scheme, &AggregationConfig::default())
}

pub fn jacobian_beta_y_with(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    cfg: &AggregationConfig,
) -> Result<AggJacobian> {
    let agg = aggregate_model_with(model, scheme, cfg)?;
    let (p, q) = (model.p(), model.q());
    let npar = p + q;
    let k = scheme.k();
    let n = agg.n;
    let qs = agg.qstar;
    let sigma2 = model.sigma2();
    let t = agg.tpoly.coeffs();
    let tcoef = |i: usize| t.get(i).copied().unwrap_or(0.0);

    // Brewer derivatives: A ∂x/∂φ_i = coefficients of z^i T(z).
    let (a, _, _) = brewer_system(model.phi(), scheme);
    let size = a.nrows();
    let rhs = DMatrix::from_fn(size, p, |m, i| if m > i { tcoef(m - i - 1) } else { 0.0 });
    let dx = if p > 0 {
        solve_checked(&a, &rhs)?
    } else {
        DMatrix::zeros(size, 0)
    };
    let d_t_d_phi = dx.view((0, 0), (n + 1, p)).into_owned();
    let d_phistar_d_phi = dx.view((n + 1, 0), (p, p)).into_owned();

    // ∂c for each parameter.
    let theta_poly = model.ma_poly();
    let c = convolve(t, theta_poly.coeffs());
    let clen = n + q + 1;
    let cpad = |v: Vec<f64>| -> Vec<f64> {
        let mut v = v;
        v.resize(clen, 0.0);
        v
    };
    let c = cpad(c);
    let mut dc: Vec<Vec<f64>> = Vec::with_capacity(npar);
    for i in 0..p {
        let dt: Vec<f64> = (0..=n).map(|m| d_t_d_phi[(m, i)]).collect();
        dc.push(cpad(convolve(&dt, theta_poly.coeffs())));
    }
    for s in 1..=q {
        let mut v = vec![0.0; clen];
        for (m, tm) in t.iter().enumerate() {
            v[m + s] += tm;
        }
        dc.push(v);
    }

    // ∂g_j = σ² Σ_l (∂c_l c_{l+jK} + c_l ∂c_{l+jK}).
    let dg = DMatrix::from_fn(qs + 1, npar, |j, a_idx| {
        let d = &dc[a_idx];
        let lag = j * k;
        sigma2
            * (0..clen.saturating_sub(lag))
                .map(|l| d[l] * c[l + lag] + c[l] * d[l + lag])
                .sum::<f64>()
    });

    let tau0 = agg.base.sigma2().sqrt();
    let tau: Vec<f64> = std::iter::once(tau0)
        .chain(agg.base.theta().iter().map(|th| th * tau0))
        .collect();
    let jt = factor_jacobian(&tau);
    let dtau = jt
        .lu()
        .solve(&dg)
        .ok_or_else(|| Error::AggregationDegenerate("singular MA matching Jacobian".into()))?;
    let d_thetastar_d_beta = DMatrix::from_fn(qs, npar, |l, a_idx| {
        (dtau[(l + 1, a_idx)] * tau0 - tau[l + 1] * dtau[(0, a_idx)]) / (tau0 * tau0)
    });
    let d_sigmastar_d_beta = DMatrix::from_fn(1, npar, |_, a_idx| 2.0 * tau0 * dtau[(0, a_idx)]);

    Ok(AggJacobian {
        d_phistar_d_phi,
        d_thetastar_d_beta,
        d_sigmastar_d_beta,
        d_t_d_phi,
    })
}

/// `Σ_{β_Y} = J_{β_Y} Σ_{β_X} J_{β_Y}'`, on the disaggregated sample-size
/// scale.
pub fn sigma_beta_y(model: &ArmaModel, scheme: &AggregationScheme, trunc: usize) -> Result<DMatrix<f64>> {
    sigma_beta_y_with(model, scheme, trunc, &AggregationConfig::default())
}

pub fn sigma_beta_y_with(
    model: &ArmaModel,
    scheme: &AggregationScheme,
    trunc: usize,
    cfg: &AggregationConfig,
) -> Result<DMatrix<f64>> {
    let j = jacobian_beta_y_with(model, scheme, cfg)?.j_beta_y();
    let sb = sigma_beta(model, trunc)?;
    let s = &j * sb.matrix() * j.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Preset of the aggregated model built from a disaggregated pre-window.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedPreset {
    pub preset: Preset,
    /// Whether missing pre-window values were replaced by zeros.
    pub padded: bool,
}

/// Aggregates the pre-window `x_{1-L}..x_0` (oldest first) into the
/// aggregated values `y_{1-r*}..y_0` and derives the aggregated preset.
///
/// Preinnovations come from the aggregated π weights applied to those
/// values, as for a process started at `1-r*`. A pre-window value that is
/// needed with nonzero weight but missing is replaced by zero only when
/// `allow_zero_padding` is set.
pub fn aggregate_preset(
    pre_window: &[f64],
    agg: &AggregatedArma,
    allow_zero_padding: bool,
) -> Result<AggregatedPreset> {
    let y_model = &agg.base;
    let k = agg.scheme.k();
    let rs = y_model.r();
    let len = pre_window.len();
    let mut padded = false;
    let mut y = Vec::with_capacity(rs);
    // Block m (m ≤ 0) covers x_{(m-1)K+i}, i = 1..K; x_t sits at len - 1 + t.
    for back in (0..rs).rev() {
        let m = -(back as isize);
        let mut v = 0.0;
        for i in 1..=k {
            let w = agg.scheme.w(i);
            if w == 0.0 {
                continue;
            }
            let tidx = (m - 1) * k as isize + i as isize;
            let pos = len as isize - 1 + tidx;
            if pos < 0 {
                if !allow_zero_padding {
                    return Err(Error::InvalidInput(format!(
                        "pre-window too short: x at index {tidx} is required"
                    )));
                }
                padded = true;
            } else {
                v += w * pre_window[pos as usize];
            }
        }
        y.push(v);
    }
    let pi = pi_weights(y_model.phi(), y_model.theta(), rs.saturating_sub(1));
    let eps: Vec<f64> = (0..rs)
        .map(|kk| (0..=kk).map(|j| pi[j] * y[kk - j]).sum())
        .collect();
    let preset = Preset::new(
        y_model,
        y[rs - y_model.p()..].to_vec(),
        eps[rs - y_model.q()..].to_vec(),
    )?;
    Ok(AggregatedPreset { preset, padded })
}
