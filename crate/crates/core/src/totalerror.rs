//! Total forecast error: characteristic plus parameter-estimation error.
//!
//! The forecast error of `X̂_{T+h}` is a linear combination of the
//! innovations `ε_τ`. For `τ ≤ T` the coefficient of `ε_{T+h-s}` is
//! `ψ_s - Σ_{i+j+k=s, i≥h} ψ̂_i π̂_j ψ_k`. Writing `ψ̂ = ψ + r/√T` and
//! `π̂ = π + t/√T`, that coefficient equals `-(L_s/√T + Q_s/T)` with
//!
//! * `L_s = r_s + Σ_j A_h(s-j) t_j`, `A_h(m) = Σ_{i=h}^{m} ψ_i ψ_{m-i}`,
//! * `Q_s = Σ_{i≥h, j≥1} r_i t_j ψ_{s-i-j}`.
//!
//! The first-order estimation error is `σ²/T Σ_s Var(L_s)`; the exact value
//! under a Gaussian law for `(r, t)` adds `σ²/T² Σ_s E[Q_s²]`, because odd
//! moments vanish. Aggregates follow by weighting the per-horizon
//! coefficients at each absolute time.

use nalgebra::{DMatrix, DVectorView};
use serde::Serialize;

use crate::asymcov::{jacobian_xi, sigma_beta, sigma_xi, Coef, XiCov};
use crate::error::{Error, Result};
use crate::model::{autocovariance, psi_weights, ArmaModel, MAX_TRUNC};
use crate::scheme::AggregationScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Approx,
    ExactGaussian,
    LuetkepohlDirect,
    Stationary,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Approx => "approx",
            Method::ExactGaussian => "exact_gaussian",
            Method::LuetkepohlDirect => "luetkepohl_direct",
            Method::Stationary => "stationary",
        }
    }
}

/// Evaluation mode for total errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// First order in 1/T.
    Approx,
    /// Exact under a Gaussian law `N(Ξ, Σ_Ξ/T)` for the estimated coefficients.
    ExactGaussian,
}

/// Evaluation strategy for the nested sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumStrategy {
    /// Convolution-factorized sums, `O(P³)`.
    #[default]
    Factorized,
    /// Literal nested sums with Kronecker selectors, for cross-checking.
    Naive,
}

/// Code paths for the estimation error Ω(h)/T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMode {
    /// Derivative of the forecast in β with finite-sample second moments.
    Direct,
    /// Sums over Σ_Ξ.
    XiSums,
    /// Derivative form with stationary autocovariances.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    pub label: String,
    pub characteristic: f64,
    pub estimation: f64,
    pub total: f64,
    pub method: Method,
}

impl ErrorDecomposition {
    pub fn new(label: impl Into<String>, characteristic: f64, estimation: f64, method: Method) -> Self {
        Self {
            label: label.into(),
            characteristic,
            estimation,
            total: characteristic + estimation,
            method,
        }
    }
}

/// `A_h(m) = Σ_{i=h}^{m} ψ_i ψ_{m-i}` for `m = 0..=max_m`.
fn a_conv(psi: &[f64], h: usize, max_m: usize) -> Vec<f64> {
    (0..=max_m)
        .map(|m| (h..=m).map(|i| psi[i] * psi[m - i]).sum())
        .collect()
}

/// Approximate-form matrices of an aggregate forecast; the total error is
/// `σ² <w, (A^char + D + F + G) w>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxMatrices {
    pub a_char: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

/// Exact-form matrices; the total error is `σ² <w, (A + B + C) w>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

fn quad(w: &[f64], m: &DMatrix<f64>) -> f64 {
    let v = DVectorView::from_slice(w, w.len());
    v.dot(&(m * v))
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Total-error evaluator for one model, sample size and Σ_Ξ.
///
/// Σ_Ξ may come from the model itself or be propagated from another
/// parametrization, as for aggregated models.
#[derive(Debug, Clone)]
pub struct ErrorEngine {
    psi: Vec<f64>,
    r: usize,
    sigma2: f64,
    t: usize,
    xi: XiCov,
    pp: DMatrix<f64>,
    pt: DMatrix<f64>,
    tt: DMatrix<f64>,
}

impl ErrorEngine {
    pub fn new(model: &ArmaModel, xi: XiCov, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        if xi.jac().ncols() != model.p() + model.q() {
            return Err(Error::InvalidInput(
                "Σ_Ξ parametrization does not match the model orders".into(),
            ));
        }
        model.ensure_causal_invertible()?;
        let order = xi.order();
        let psi = psi_weights(model.phi(), model.theta(), order);
        let (pp, pt, tt) = xi.padded_blocks();
        Ok(Self {
            psi,
            r: model.r(),
            sigma2: model.sigma2(),
            t,
            xi,
            pp,
            pt,
            tt,
        })
    }

    /// Engine with Σ_Ξ of the model itself, sized for horizons up to `kmax`.
    pub fn for_model(model: &ArmaModel, t: usize, kmax: usize) -> Result<Self> {
        let order = t + kmax.max(1) - 1 + model.r();
        let xi = sigma_xi(model, order, MAX_TRUNC)?;
        Self::new(model, xi, t)
    }

    pub fn sample_size(&self) -> usize {
        self.t
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn xi(&self) -> &XiCov {
        &self.xi
    }

    /// `P(h) = T + h - 1 + r`.
    pub fn p_of(&self, h: usize) -> usize {
        self.t + h - 1 + self.r
    }

    fn check_h(&self, h: usize) -> Result<()> {
        if h == 0 {
            return Err(Error::InvalidInput("forecast horizon must be at least 1".into()));
        }
        let needed = self.p_of(h);
        if needed > self.xi.order() {
            return Err(Error::TruncationTooShort {
                needed,
                available: self.xi.order(),
            });
        }
        Ok(())
    }

    /// `σ² Σ_{i<h} ψ_i²`.
    pub fn characteristic(&self, h: usize) -> Result<f64> {
        self.check_h(h)?;
        Ok(self.sigma2 * self.psi[..h].iter().map(|v| v * v).sum::<f64>())
    }

    /// Bracketed Σ_Ξ sum of the first-order estimation error at horizon h,
    /// so that the estimation error is `σ²/T` times this value.
    pub fn estimation_sum(&self, h: usize, strategy: SumStrategy) -> Result<f64> {
        self.check_h(h)?;
        Ok(match strategy {
            SumStrategy::Factorized => self.estimation_sum_factorized(h),
            SumStrategy::Naive => self.estimation_sum_naive(h),
        })
    }

    fn estimation_sum_factorized(&self, h: usize) -> f64 {
        let pm = self.p_of(h);
        let a = a_conv(&self.psi, h, pm);
        let mut acc = 0.0;
        for s in h..=pm {
            acc += self.pp[(s, s)];
            let n = s - h;
            let mut cross = 0.0;
            let mut quad_pi = 0.0;
            for j in 1..=n {
                let vj = a[s - j];
                if vj == 0.0 {
                    continue;
                }
                cross += vj * self.pt[(s, j)];
                let row: f64 = (1..=n).map(|j2| a[s - j2] * self.tt[(j, j2)]).sum();
                quad_pi += vj * row;
            }
            acc += 2.0 * cross + quad_pi;
        }
        acc
    }

    fn estimation_sum_naive(&self, h: usize) -> f64 {
        let pm = self.p_of(h);
        let psi = &self.psi;
        let xi = &self.xi;
        let mut first = 0.0;
        for i in h..=pm {
            first += xi.cov(Coef::Psi(i), Coef::Psi(i));
        }
        let mut second = 0.0;
        for i in h..=pm {
            for j in 0..=pm - i {
                for k in 0..=pm - i - j {
                    second += psi[i] * psi[k] * xi.cov(Coef::Psi(i + j + k), Coef::Pi(j));
                }
            }
        }
        let mut third = 0.0;
        for i in h..=pm {
            for j in 0..=pm - i {
                for k in 0..=pm - i - j {
                    for i2 in h..=pm {
                        for j2 in 0..=pm - i2 {
                            for k2 in 0..=pm - i2 - j2 {
                                if i + j + k == i2 + j2 + k2 {
                                    third += psi[i]
                                        * psi[k]
                                        * psi[i2]
                                        * psi[k2]
                                        * xi.cov(Coef::Pi(j), Coef::Pi(j2));
                                }
                            }
                        }
                    }
                }
            }
        }
        first + 2.0 * second + third
    }

    /// Sub-blocks of Σ_Ξ restricted to indices `0..=n`.
    fn blocks(&self, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (
            self.pp.view((0, 0), (n + 1, n + 1)).into_owned(),
            self.pt.view((0, 0), (n + 1, n + 1)).into_owned(),
            self.tt.view((0, 0), (n + 1, n + 1)).into_owned(),
        )
    }

    /// Matrix `M(i, j) = ψ_{s-i-j}` of the quadratic term `Q_s` at horizon h.
    fn q_matrix(&self, h: usize, s: usize, size: usize) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(size + 1, size + 1);
        for i in h..s {
            for j in 1..=s - i {
                m[(i, j)] = self.psi[s - i - j];
            }
        }
        m
    }

    /// `E[Q Q']` for Gaussian `(r, t)` with covariance blocks
    /// `(crr, crt, ctt)`, `Q = r'M t`, `Q' = r'M' t`.
    fn quad_moment(
        m1: &DMatrix<f64>,
        m2: &DMatrix<f64>,
        crr: &DMatrix<f64>,
        crt: &DMatrix<f64>,
        ctt: &DMatrix<f64>,
    ) -> f64 {
        let mean = frob(m1, crt) * frob(m2, crt);
        let pairs_rr = (m1.transpose() * crr * m2 * ctt).trace();
        let pairs_rt = frob(m1, &(crt * m2.transpose() * crt));
        mean + pairs_rr + pairs_rt
    }

    /// `Σ_s E[Q_s²]` at horizon h.
    pub fn quartic_sum(&self, h: usize) -> Result<f64> {
        self.check_h(h)?;
        let pm = self.p_of(h);
        let mut acc = 0.0;
        for s in h + 1..=pm {
            let (crr, crt, ctt) = self.blocks(s);
            let m = self.q_matrix(h, s, s);
            acc += Self::quad_moment(&m, &m, &crr, &crt, &ctt);
        }
        Ok(acc)
    }

    /// Total error at horizon h.
    pub fn horizon(&self, h: usize, mode: ErrorMode, strategy: SumStrategy) -> Result<ErrorDecomposition> {
        let ch = self.characteristic(h)?;
        let t = self.t as f64;
        let mut est = self.sigma2 / t * self.estimation_sum(h, strategy)?;
        let method = match mode {
            ErrorMode::Approx => Method::Approx,
            ErrorMode::ExactGaussian => {
                est += self.sigma2 / (t * t) * self.quartic_sum(h)?;
                Method::ExactGaussian
            }
        };
        Ok(ErrorDecomposition::new(format!("h={h}"), ch, est, method))
    }

    fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        self.check_h(w.len())
    }

    /// `A^char_{hh'} = Σ_{i<h, i'<h'} ψ_i ψ_{i'} δ_{h-i, h'-i'}`.
    pub fn char_matrix(&self, k: usize) -> Result<DMatrix<f64>> {
        self.check_h(k)?;
        let psi = &self.psi;
        Ok(DMatrix::from_fn(k, k, |a, b| {
            let (h, h2) = (a + 1, b + 1);
            // Future innovation ε_{T+u}, u = 1..min(h,h'): ψ_{h-u} ψ_{h'-u}.
            (1..=h.min(h2)).map(|u| psi[h - u] * psi[h2 - u]).sum()
        }))
    }

    /// First-order estimation part `<w, (D + F + G) w>` times T, evaluated
    /// per absolute time index.
    fn aggregate_estimation_sum(&self, w: &[f64]) -> f64 {
        let k = w.len();
        let nmax = self.t - 1 + self.r;
        let a: Vec<Vec<f64>> = (1..=k)
            .map(|h| a_conv(&self.psi, h, self.p_of(h)))
            .collect();
        let mut acc = 0.0;
        for n in 0..=nmax {
            let mut v = vec![0.0; n + 1];
            for (hi, &wh) in w.iter().enumerate() {
                if wh == 0.0 {
                    continue;
                }
                let h = hi + 1;
                for (j, vj) in v.iter_mut().enumerate().skip(1) {
                    *vj += wh * a[hi][h + n - j];
                }
            }
            let mut lin = 0.0;
            for (hi, &wh) in w.iter().enumerate() {
                if wh == 0.0 {
                    continue;
                }
                let s = hi + 1 + n;
                for (h2i, &wh2) in w.iter().enumerate() {
                    lin += wh * wh2 * self.pp[(s, h2i + 1 + n)];
                }
                lin += 2.0 * wh * (1..=n).map(|j| v[j] * self.pt[(s, j)]).sum::<f64>();
            }
            for j in 1..=n {
                if v[j] == 0.0 {
                    continue;
                }
                lin += v[j] * (1..=n).map(|j2| v[j2] * self.tt[(j, j2)]).sum::<f64>();
            }
            acc += lin;
        }
        acc
    }

    /// Matrices D, F, G (already divided by T) and A^char.
    pub fn approx_matrices(&self, k: usize, strategy: SumStrategy) -> Result<ApproxMatrices> {
        let a_char = self.char_matrix(k)?;
        Ok(match strategy {
            SumStrategy::Factorized => {
                let (d, f, g) = self.dfg_factorized(k);
                ApproxMatrices { a_char, d, f, g }
            }
            SumStrategy::Naive => {
                let (d, f, g) = self.dfg_naive(k);
                ApproxMatrices { a_char, d, f, g }
            }
        })
    }

    fn dfg_factorized(&self, k: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let nmax = self.t - 1 + self.r;
        let t = self.t as f64;
        let a: Vec<Vec<f64>> = (1..=k)
            .map(|h| a_conv(&self.psi, h, self.p_of(h)))
            .collect();
        let mut d = DMatrix::<f64>::zeros(k, k);
        let mut f = DMatrix::<f64>::zeros(k, k);
        let mut g = DMatrix::<f64>::zeros(k, k);
        for n in 0..=nmax {
            for h in 1..=k {
                for h2 in 1..=k {
                    d[(h - 1, h2 - 1)] += self.pp[(h + n, h2 + n)];
                    let mut fv = 0.0;
                    for j in 1..=n {
                        fv += a[h2 - 1][h2 + n - j] * self.pt[(h + n, j)];
                    }
                    f[(h - 1, h2 - 1)] += 2.0 * fv;
                    let mut gv = 0.0;
                    for j in 1..=n {
                        let x = a[h - 1][h + n - j];
                        if x == 0.0 {
                            continue;
                        }
                        gv += x * (1..=n)
                            .map(|j2| a[h2 - 1][h2 + n - j2] * self.tt[(j, j2)])
                            .sum::<f64>();
                    }
                    g[(h - 1, h2 - 1)] += gv;
                }
            }
        }
        (d / t, f / t, g / t)
    }

    fn dfg_naive(&self, k: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let t = self.t as f64;
        let psi = &self.psi;
        let xi = &self.xi;
        let mut d = DMatrix::<f64>::zeros(k, k);
        let mut f = DMatrix::<f64>::zeros(k, k);
        let mut g = DMatrix::<f64>::zeros(k, k);
        // Kronecker selectors δ_{a,b} on signed offsets.
        let same = |x: isize, y: isize| x == y;
        for h in 1..=k {
            let ph = self.p_of(h);
            for h2 in 1..=k {
                let ph2 = self.p_of(h2);
                let (hh, hh2) = (h as isize, h2 as isize);
                let mut dv = 0.0;
                for i in h..=ph {
                    for i2 in h2..=ph2 {
                        if same(hh - i as isize, hh2 - i2 as isize) {
                            dv += xi.cov(Coef::Psi(i), Coef::Psi(i2));
                        }
                    }
                }
                let mut fv = 0.0;
                for i in h..=ph {
                    for i2 in h2..=ph2 {
                        for j2 in 0..=ph2 - i2 {
                            for k2 in 0..=ph2 - i2 - j2 {
                                if same(hh - i as isize, hh2 - (i2 + j2 + k2) as isize) {
                                    fv += psi[i2] * psi[k2] * xi.cov(Coef::Psi(i), Coef::Pi(j2));
                                }
                            }
                        }
                    }
                }
                let mut gv = 0.0;
                for i in h..=ph {
                    for j in 0..=ph - i {
                        for kk in 0..=ph - i - j {
                            for i2 in h2..=ph2 {
                                for j2 in 0..=ph2 - i2 {
                                    for k2 in 0..=ph2 - i2 - j2 {
                                        if same(
                                            hh - (i + j + kk) as isize,
                                            hh2 - (i2 + j2 + k2) as isize,
                                        ) {
                                            gv += psi[i]
                                                * psi[kk]
                                                * psi[i2]
                                                * psi[k2]
                                                * xi.cov(Coef::Pi(j), Coef::Pi(j2));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                d[(h - 1, h2 - 1)] = dv / t;
                f[(h - 1, h2 - 1)] = 2.0 * fv / t;
                g[(h - 1, h2 - 1)] = gv / t;
            }
        }
        (d, f, g)
    }

    /// Matrix of the aggregated quadratic term at absolute time `T - n`.
    fn q_matrix_weighted(&self, w: &[f64], n: usize) -> DMatrix<f64> {
        let size = w.len() + n;
        let mut m = DMatrix::<f64>::zeros(size + 1, size + 1);
        for (hi, &wh) in w.iter().enumerate() {
            if wh == 0.0 {
                continue;
            }
            let h = hi + 1;
            let s = h + n;
            for i in h..s {
                for j in 1..=s - i {
                    m[(i, j)] += wh * self.psi[s - i - j];
                }
            }
        }
        m
    }

    /// `Σ_n E[Q_w(n)²]` for the aggregate with weights w.
    pub fn aggregate_quartic_sum(&self, w: &[f64]) -> Result<f64> {
        self.check_weights(w)?;
        let nmax = self.t - 1 + self.r;
        let mut acc = 0.0;
        for n in 1..=nmax {
            let size = w.len() + n;
            let (crr, crt, ctt) = self.blocks(size);
            let m = self.q_matrix_weighted(w, n);
            acc += Self::quad_moment(&m, &m, &crr, &crt, &ctt);
        }
        Ok(acc)
    }

    /// Total error of the aggregate forecast `Σ_h w_h X̂_{T+h}`.
    pub fn aggregate(&self, w: &[f64], mode: ErrorMode, strategy: SumStrategy) -> Result<ErrorDecomposition> {
        self.check_weights(w)?;
        let t = self.t as f64;
        let ch = self.sigma2 * quad(w, &self.char_matrix(w.len())?);
        let mut est = match strategy {
            SumStrategy::Factorized => self.sigma2 / t * self.aggregate_estimation_sum(w),
            SumStrategy::Naive => {
                let m = self.approx_matrices(w.len(), SumStrategy::Naive)?;
                self.sigma2 * quad(w, &(m.d + m.f + m.g))
            }
        };
        let method = match mode {
            ErrorMode::Approx => Method::Approx,
            ErrorMode::ExactGaussian => {
                est += self.sigma2 / (t * t) * self.aggregate_quartic_sum(w)?;
                Method::ExactGaussian
            }
        };
        Ok(ErrorDecomposition::new(format!("K={}", w.len()), ch, est, method))
    }

    /// Exact-form matrices A, B, C under the Gaussian surrogate.
    pub fn exact_matrices(&self, k: usize) -> Result<ExactMatrices> {
        self.check_h(k)?;
        let t = self.t as f64;
        let nmax = self.t - 1 + self.r;
        let approx = self.approx_matrices(k, SumStrategy::Factorized)?;
        let f_sym = (&approx.f + approx.f.transpose()) * 0.5;
        let psi = &self.psi;
        let mut a_res = DMatrix::<f64>::zeros(k, k);
        let mut b = DMatrix::<f64>::zeros(k, k);
        // Linear-term covariance Σ_n E[L_h L_h'] / T.
        let mut c = &approx.d + f_sym + &approx.g;
        for n in 0..=nmax {
            let size = k + n;
            let (crr, crt, ctt) = self.blocks(size);
            let ms: Vec<DMatrix<f64>> = (1..=k).map(|h| self.q_matrix(h, h + n, size)).collect();
            let means: Vec<f64> = ms.iter().map(|m| frob(m, &crt)).collect();
            for h in 1..=k {
                for h2 in 1..=k {
                    let (x, x2) = (psi[h + n], psi[h2 + n]);
                    a_res[(h - 1, h2 - 1)] += x * x2;
                    b[(h - 1, h2 - 1)] += -2.0 * x * (x2 + means[h2 - 1] / t);
                    let qq = Self::quad_moment(&ms[h - 1], &ms[h2 - 1], &crr, &crt, &ctt);
                    c[(h - 1, h2 - 1)] +=
                        x * x2 + (x * means[h2 - 1] + x2 * means[h - 1]) / t + qq / (t * t);
                }
            }
        }
        Ok(ExactMatrices {
            a: approx.a_char + a_res,
            b,
            c,
        })
    }
}

/// First-order total error at horizon h.
pub fn total_msfe_approx(model: &ArmaModel, t: usize, h: usize) -> Result<ErrorDecomposition> {
    total_msfe_approx_with(model, t, h, SumStrategy::Factorized)
}

pub fn total_msfe_approx_with(
    model: &ArmaModel,
    t: usize,
    h: usize,
    strategy: SumStrategy,
) -> Result<ErrorDecomposition> {
    ErrorEngine::for_model(model, t, h)?.horizon(h, ErrorMode::Approx, strategy)
}

/// Exact total error at horizon h under the Gaussian surrogate law.
pub fn total_msfe_exact_gaussian(model: &ArmaModel, t: usize, h: usize) -> Result<ErrorDecomposition> {
    ErrorEngine::for_model(model, t, h)?.horizon(h, ErrorMode::ExactGaussian, SumStrategy::Factorized)
}

/// Total error of the forecast of `Σ_h w_h X_{T+h}`.
pub fn aggregate_total_msfe(
    model: &ArmaModel,
    t: usize,
    scheme: &AggregationScheme,
    mode: ErrorMode,
) -> Result<ErrorDecomposition> {
    aggregate_total_msfe_with(model, t, scheme, mode, SumStrategy::Factorized)
}

pub fn aggregate_total_msfe_with(
    model: &ArmaModel,
    t: usize,
    scheme: &AggregationScheme,
    mode: ErrorMode,
    strategy: SumStrategy,
) -> Result<ErrorDecomposition> {
    let mut out = ErrorEngine::for_model(model, t, scheme.k())?.aggregate(scheme.weights(), mode, strategy)?;
    out.label = scheme.describe();
    Ok(out)
}

/// Coefficient of `x_{T+h-u}` in the forecast, differentiated along one
/// parameter direction: `Σ_{i+j=u, i≥h} (dψ_i π_j + ψ_i dπ_j)`.
fn forecast_derivative(psi: &[f64], pi: &[f64], dpsi: &[f64], dpi: &[f64], h: usize, u: usize) -> f64 {
    (h..=u)
        .map(|i| dpsi[i] * pi[u - i] + psi[i] * dpi[u - i])
        .sum()
}

/// Estimation error `Ω(h)/T` through one of three equivalent code paths.
///
/// `Direct` and `XiSums` agree identically; `Stationary` replaces the
/// finite-sample second moments of the observations with stationary
/// autocovariances.
pub fn omega_estimation_error(model: &ArmaModel, t: usize, h: usize, mode: OmegaMode) -> Result<f64> {
    if h == 0 || t == 0 {
        return Err(Error::InvalidInput("horizon and sample size must be positive".into()));
    }
    let r = model.r();
    let pm = t + h - 1 + r;
    let tf = t as f64;
    match mode {
        OmegaMode::XiSums => {
            let engine = ErrorEngine::for_model(model, t, h)?;
            Ok(model.sigma2() / tf * engine.estimation_sum(h, SumStrategy::Factorized)?)
        }
        OmegaMode::Direct => {
            let sb = sigma_beta(model, MAX_TRUNC)?;
            let jac = jacobian_xi(model, pm)?;
            let psi = psi_weights(model.phi(), model.theta(), pm);
            let pi = crate::model::pi_weights(model.phi(), model.theta(), pm);
            let npar = model.p() + model.q();
            // g[a][u] for u = h..=P.
            let width = pm - h + 1;
            let mut g = DMatrix::<f64>::zeros(npar, width);
            for a in 0..npar {
                let mut dpsi = vec![0.0; pm + 1];
                let mut dpi = vec![0.0; pm + 1];
                for k in 1..=pm {
                    dpsi[k] = jac[(k - 1, a)];
                    dpi[k] = jac[(pm + k - 1, a)];
                }
                for u in h..=pm {
                    g[(a, u - h)] = forecast_derivative(&psi, &pi, &dpsi, &dpi, h, u);
                }
            }
            // E[X_a X_b] = σ² Σ_{m=0}^{min(a,b)-1+r} ψ_m ψ_{m+|a-b|} for a process
            // started at 1-r, with a = T+h-u.
            let sigma2 = model.sigma2();
            let ex = DMatrix::from_fn(width, width, |i, j| {
                let ta = (t + h) as isize - (i + h) as isize;
                let tb = (t + h) as isize - (j + h) as isize;
                let lag = ta.abs_diff(tb);
                let top = (ta.min(tb) - 1 + r as isize) as usize;
                sigma2 * (0..=top).map(|m| psi[m] * psi[m + lag]).sum::<f64>()
            });
            let omega = (&g * ex * g.transpose()).component_mul(sb.matrix()).sum();
            Ok(omega / tf)
        }
        OmegaMode::Stationary => {
            let xi = sigma_xi(model, pm, MAX_TRUNC)?;
            let psi = psi_weights(model.phi(), model.theta(), pm);
            let pi = crate::model::pi_weights(model.phi(), model.theta(), pm);
            let gamma = autocovariance(model, pm, MAX_TRUNC)?;
            let width = pm - h + 1;
            // c[(row of Ξ, u)] = coefficient of Ξ_row in the forecast weight of x_{T+h-u}.
            let mut c = DMatrix::<f64>::zeros(2 * pm, width);
            for u in h..=pm {
                for i in h..=u {
                    c[(i - 1, u - h)] += pi[u - i];
                }
                for j in 1..=u - h {
                    c[(pm + j - 1, u - h)] += psi[u - j];
                }
            }
            let inner = c.transpose() * xi.matrix() * &c;
            let gmat = DMatrix::from_fn(width, width, |i, j| gamma[i.abs_diff(j)]);
            Ok(inner.component_mul(&gmat).sum() / tf)
        }
    }
}
