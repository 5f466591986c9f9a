//! Real polynomials and truncated power series in the lag operator.

use nalgebra::{linalg::Schur, Complex, DMatrix};

use crate::error::{Error, Result};

/// Real polynomial stored with the constant term first.
///
/// Trailing exact zeros are stripped on construction, so the zero polynomial
/// has an empty coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    /// `1 - phi_1 z - ... - phi_p z^p`.
    pub fn from_ar(phi: &[f64]) -> Self {
        let mut c = Vec::with_capacity(phi.len() + 1);
        c.push(1.0);
        c.extend(phi.iter().map(|v| -v));
        Self::new(c)
    }

    /// `1 + theta_1 z + ... + theta_q z^q`.
    pub fn from_ma(theta: &[f64]) -> Self {
        let mut c = Vec::with_capacity(theta.len() + 1);
        c.push(1.0);
        c.extend_from_slice(theta);
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `z^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::new(Vec::new());
        }
        Polynomial::new(convolve(&self.coeffs, &other.coeffs))
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// All complex roots, computed as companion-matrix eigenvalues and then
    /// polished with a few Newton steps on the original coefficients.
    ///
    /// QR iteration can stall on companion matrices whose roots share one
    /// modulus (such as `1 + c z^d`); Aberth iteration takes over then.
    pub fn roots(&self) -> Result<Vec<Complex<f64>>> {
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "polynomial has non-finite coefficients".into(),
            ));
        }
        let d = match self.degree() {
            None => {
                return Err(Error::InvalidInput(
                    "roots of the zero polynomial".into(),
                ))
            }
            Some(0) => return Ok(Vec::new()),
            Some(d) => d,
        };
        let lead = self.coeffs[d];
        let mut comp = DMatrix::<f64>::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..d {
            comp[(i, d - 1)] = -self.coeffs[i] / lead;
        }
        let eig: Vec<Complex<f64>> = match Schur::try_new(comp, f64::EPSILON, 2000) {
            Some(schur) => schur.complex_eigenvalues().iter().copied().collect(),
            None => self.aberth(d)?,
        };
        let dpoly = self.derivative();
        let roots = eig
            .iter()
            .map(|&z0| {
                let mut z = z0;
                let mut fz = self.eval_complex(z).norm();
                for _ in 0..4 {
                    let dz = dpoly.eval_complex(z);
                    if dz.norm() == 0.0 {
                        break;
                    }
                    let cand = z - self.eval_complex(z) / dz;
                    let fc = self.eval_complex(cand).norm();
                    if fc.is_finite() && fc < fz {
                        z = cand;
                        fz = fc;
                    } else {
                        break;
                    }
                }
                z
            })
            .collect();
        Ok(roots)
    }

    fn aberth(&self, d: usize) -> Result<Vec<Complex<f64>>> {
        let dpoly = self.derivative();
        let radius = (self.coeffs[0].abs() / self.coeffs[d].abs()).powf(1.0 / d as f64).max(1e-3);
        let mut z: Vec<Complex<f64>> = (0..d)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
                Complex::from_polar(radius, angle)
            })
            .collect();
        for _ in 0..1000 {
            let mut biggest = 0.0f64;
            for k in 0..d {
                let ratio = self.eval_complex(z[k]) / dpoly.eval_complex(z[k]);
                let repulsion: Complex<f64> = (0..d)
                    .filter(|&j| j != k)
                    .map(|j| Complex::new(1.0, 0.0) / (z[k] - z[j]))
                    .sum();
                let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
                if step.re.is_finite() && step.im.is_finite() {
                    z[k] -= step;
                    biggest = biggest.max(step.norm() / z[k].norm().max(1.0));
                }
            }
            if biggest < 1e-15 {
                return Ok(z);
            }
        }
        if z.iter().all(|v| self.eval_complex(*v).norm() < 1e-8 * self.coeffs.iter().map(|c| c.abs()).sum::<f64>()) {
            Ok(z)
        } else {
            Err(Error::ConvergenceFailure("polynomial root finding did not converge".into()))
        }
    }
}

/// Full discrete convolution of two coefficient slices.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Convolution keeping coefficients of degree `0..=order`.
pub fn convolve_trunc(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, &ai) in a.iter().enumerate().take(order + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Product `a * b` truncated at degree `order`.
pub fn poly_product_trunc(a: &Polynomial, b: &Polynomial, order: usize) -> Polynomial {
    Polynomial::new(convolve_trunc(a.coeffs(), b.coeffs(), order))
}

/// Power series `num / den` through degree `order` by forward substitution.
///
/// `den[0]` must be nonzero.
pub fn series_div(num: &[f64], den: &[f64], order: usize) -> Vec<f64> {
    let d0 = den[0];
    let mut out = vec![0.0; order + 1];
    for k in 0..=order {
        let mut acc = num.get(k).copied().unwrap_or(0.0);
        for (j, &dj) in den.iter().enumerate().skip(1).take(k) {
            acc -= dj * out[k - j];
        }
        out[k] = acc / d0;
    }
    out
}

/// Multiplies a series by `z^k`, keeping degrees `0..=order`.
pub fn shift_trunc(a: &[f64], k: usize, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, &v) in a.iter().enumerate() {
        if i + k > order {
            break;
        }
        out[i + k] = v;
    }
    out
}
