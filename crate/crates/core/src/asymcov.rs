//! Asymptotic covariance of the ARMA parameter estimator and its image on
//! the ψ/π coefficients.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{pi_weights, psi_weights, psi_weights_adaptive, ArmaModel, TAIL_TOL};
use crate::poly::{convolve_trunc, shift_trunc};

/// Covariance of `√T (β̂ - β)` for `β = (φ', θ')'`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCov {
    p: usize,
    q: usize,
    matrix: DMatrix<f64>,
}

impl AsymptoticCov {
    pub fn new(p: usize, q: usize, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != p + q || matrix.ncols() != p + q {
            return Err(Error::InvalidInput("covariance shape mismatch".into()));
        }
        Ok(Self { p, q, matrix })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Symmetric inverse through a Cholesky factorization whose pivots must
/// exceed `rel_tol · trace`.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let tol = rel_tol * m.trace().abs();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return Err(Error::NearNonIdentifiable(format!(
                "information matrix pivot {d:e} at index {j} below {tol:e}"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::NearNonIdentifiable("singular Cholesky factor".into()))?;
    Ok(linv.transpose() * linv)
}

/// Information matrix for unit innovation variance: second moments of
/// `(U_{t-1..t-p}, V_{t-1..t-q})` with `Φ(L)U = ε` and `Θ(L)V = ε`.
pub fn information_matrix(model: &ArmaModel, trunc: usize) -> Result<DMatrix<f64>> {
    let (p, q) = (model.p(), model.q());
    let a = psi_weights_adaptive(model.phi(), &[], TAIL_TOL, trunc)?;
    let neg_theta: Vec<f64> = model.theta().iter().map(|t| -t).collect();
    let b = psi_weights_adaptive(&neg_theta, &[], TAIL_TOL, trunc)?;
    let lagged = |x: &[f64], y: &[f64], d: usize| -> f64 {
        x.iter().zip(y.iter().skip(d)).map(|(u, v)| u * v).sum()
    };
    let mut m = DMatrix::<f64>::zeros(p + q, p + q);
    for k in 0..p {
        for l in 0..p {
            m[(k, l)] = lagged(&a, &a, k.abs_diff(l));
        }
    }
    for k in 0..q {
        for l in 0..q {
            m[(p + k, p + l)] = lagged(&b, &b, k.abs_diff(l));
        }
    }
    // E[U_{t-k} V_{t-l}] = Σ_i a_i b_{i+k-l} for k ≥ l, Σ_i a_{i+l-k} b_i otherwise.
    for k in 1..=p {
        for l in 1..=q {
            let v = if k >= l {
                lagged(&a, &b, k - l)
            } else {
                lagged(&b, &a, l - k)
            };
            m[(k - 1, p + l - 1)] = v;
            m[(p + l - 1, k - 1)] = v;
        }
    }
    Ok(m)
}

/// Σ_β = σ² M⁻¹ where σ² M is the covariance of the lagged U/V vector.
///
/// σ² cancels, so the result does not depend on the innovation variance.
/// White noise yields a 0×0 matrix.
pub fn sigma_beta(model: &ArmaModel, trunc: usize) -> Result<AsymptoticCov> {
    model.ensure_causal_invertible()?;
    let m = information_matrix(model, trunc)?;
    let inv = if m.nrows() == 0 {
        m
    } else {
        spd_inverse(&m, 1e-12)?
    };
    AsymptoticCov::new(model.p(), model.q(), inv)
}

/// Jacobian of `(ψ_1..ψ_P, π_1..π_P)` with respect to `(φ', θ')'` for
/// arbitrary coefficients, without root checks.
pub fn jacobian_xi_raw(phi: &[f64], theta: &[f64], order: usize) -> DMatrix<f64> {
    let (p, q) = (phi.len(), theta.len());
    let psi = psi_weights(phi, theta, order);
    let pi = pi_weights(phi, theta, order);
    let a = psi_weights(phi, &[], order);
    let b = pi_weights(&[], theta, order);
    let psi_a = convolve_trunc(&psi, &a, order);
    let pi_b = convolve_trunc(&pi, &b, order);
    let mut jac = DMatrix::<f64>::zeros(2 * order, p + q);
    let mut put = |col: usize, dpsi: &[f64], dpi: &[f64], sign_pi: f64| {
        for k in 1..=order {
            jac[(k - 1, col)] = dpsi[k];
            jac[(order + k - 1, col)] = sign_pi * dpi[k];
        }
    };
    for i in 1..=p {
        // Φ ∂Ψ/∂φ_i = z^i Ψ, Θ ∂Π/∂φ_i = -z^i.
        put(i - 1, &shift_trunc(&psi_a, i, order), &shift_trunc(&b, i, order), -1.0);
    }
    for j in 1..=q {
        // Φ ∂Ψ/∂θ_j = z^j, Θ ∂Π/∂θ_j = -z^j Π.
        put(p + j - 1, &shift_trunc(&a, j, order), &shift_trunc(&pi_b, j, order), -1.0);
    }
    jac
}

/// Jacobian J_Ξ of a causal and invertible model.
pub fn jacobian_xi(model: &ArmaModel, order: usize) -> Result<DMatrix<f64>> {
    model.ensure_causal_invertible()?;
    Ok(jacobian_xi_raw(model.phi(), model.theta(), order))
}

/// Coefficient selector for [`XiCov::cov`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coef {
    Psi(usize),
    Pi(usize),
}

/// Σ_Ξ = J_Ξ Σ_β J_Ξ' over `(ψ_1..ψ_P, π_1..π_P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiCov {
    order: usize,
    jac: DMatrix<f64>,
    sigma: DMatrix<f64>,
}

impl XiCov {
    pub fn from_parts(jac: DMatrix<f64>, sigma_beta: &DMatrix<f64>) -> Result<Self> {
        if jac.nrows() % 2 != 0 || jac.ncols() != sigma_beta.nrows() {
            return Err(Error::InvalidInput("Jacobian and covariance shapes differ".into()));
        }
        let order = jac.nrows() / 2;
        let mut sigma = &jac * sigma_beta * jac.transpose();
        // Remove rounding asymmetry.
        let st = sigma.transpose();
        sigma = (sigma + st) * 0.5;
        Ok(Self { order, jac, sigma })
    }

    /// Truncation order P.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn jac(&self) -> &DMatrix<f64> {
        &self.jac
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn row(&self, c: Coef) -> Option<usize> {
        match c {
            Coef::Psi(0) | Coef::Pi(0) => None,
            Coef::Psi(i) => {
                assert!(i <= self.order, "ψ_{i} beyond truncation {}", self.order);
                Some(i - 1)
            }
            Coef::Pi(j) => {
                assert!(j <= self.order, "π_{j} beyond truncation {}", self.order);
                Some(self.order + j - 1)
            }
        }
    }

    /// Covariance entry; ψ_0 and π_0 are constants with zero covariance.
    pub fn cov(&self, a: Coef, b: Coef) -> f64 {
        match (self.row(a), self.row(b)) {
            (Some(i), Some(j)) => self.sigma[(i, j)],
            _ => 0.0,
        }
    }

    /// Zero-padded blocks indexed from 0: `(C_ψψ, C_ψπ, C_ππ)` with row and
    /// column 0 referring to the constant coefficients.
    pub(crate) fn padded_blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.order;
        let mut pp = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut pt = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut tt = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 1..=n {
            for j in 1..=n {
                pp[(i, j)] = self.sigma[(i - 1, j - 1)];
                pt[(i, j)] = self.sigma[(i - 1, n + j - 1)];
                tt[(i, j)] = self.sigma[(n + i - 1, n + j - 1)];
            }
        }
        (pp, pt, tt)
    }
}

/// Σ_Ξ for the model at truncation `order`.
pub fn sigma_xi(model: &ArmaModel, order: usize, trunc: usize) -> Result<XiCov> {
    let sb = sigma_beta(model, trunc)?;
    let jac = jacobian_xi(model, order)?;
    XiCov::from_parts(jac, sb.matrix())
}
