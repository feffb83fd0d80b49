//! Linear readout of the pretext optimum.
//!
//! The central question: how small can the mean squared gap between a linear
//! map of `psi_star` and the Bayes posterior be made, and when is it exactly
//! zero ("exact matching")? This module fits the minimizing predictor by
//! centered least squares, certifies exactness at a relative tolerance, and
//! evaluates a closed-form upper bound on the minimal gap in terms of the
//! mean encoding, a rank-s subspace factor and the redundancy value.

use serde::{Deserialize, Serialize};

use crate::genmodel::{Dataset, GenerativeModel};
use crate::linalg::{self, vsub, Matrix};
use crate::{Error, Result};

/// Default relative exactness tolerance:
/// `error_apx_star / mean ||bayes||^2 <= this` declares exact matching.
pub const EXACTNESS_REL_TOL: f64 = 1e-6;

// ─── predictor ───

/// Affine readout `x -> beta (x - mu_x) + mu_y`; centering by training means
/// plays the role of an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    /// `p x d2`.
    pub beta: Matrix,
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
}

impl LinearPredictor {
    pub fn new(beta: Matrix, mu_x: Vec<f64>, mu_y: Vec<f64>) -> Result<Self> {
        if mu_x.len() != beta.cols() || mu_y.len() != beta.rows() {
            return Err(Error::DimensionMismatch(format!(
                "centering lengths {}/{} against beta {}x{}",
                mu_x.len(),
                mu_y.len(),
                beta.rows(),
                beta.cols()
            )));
        }
        if !beta.is_finite()
            || !mu_x.iter().all(|v| v.is_finite())
            || !mu_y.iter().all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("linear predictor".into()));
        }
        Ok(LinearPredictor { beta, mu_x, mu_y })
    }

    /// Pure linear map, no centering.
    pub fn from_beta(beta: Matrix) -> Self {
        let (p, d2) = (beta.rows(), beta.cols());
        LinearPredictor { beta, mu_x: vec![0.0; d2], mu_y: vec![0.0; p] }
    }

    pub fn zero(p: usize, d2: usize) -> Self {
        LinearPredictor::from_beta(Matrix::zeros(p, d2))
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let centered = vsub(x, &self.mu_x);
        let mut out = self.beta.mat_vec(&centered);
        for (o, m) in out.iter_mut().zip(&self.mu_y) {
            *o += m;
        }
        out
    }

    /// Row-wise prediction for an `n x d2` input block.
    pub fn predict_rows(&self, xs: &Matrix) -> Result<Matrix> {
        if xs.cols() != self.beta.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature columns, beta expects {}",
                xs.cols(),
                self.beta.cols()
            )));
        }
        let mut out = Matrix::zeros(xs.rows(), self.beta.rows());
        for i in 0..xs.rows() {
            out.row_mut(i).copy_from_slice(&self.predict(xs.row(i)));
        }
        Ok(out)
    }
}

/// Result of minimizing the readout gap over linear predictors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    /// Minimal empirical mean of `||bayes_i - predict(psi_i)||^2`.
    pub error_apx_star: f64,
    pub beta_star: LinearPredictor,
    pub is_exact: bool,
    /// Absolute threshold used: relative tolerance times mean `||bayes||^2`,
    /// so `is_exact` iff `error_apx_star <= tolerance`.
    pub tolerance: f64,
}

// ─── readout error ───

/// Empirical mean over rows of `||bayes_i - predict(psi_star_i)||^2`.
pub fn approx_error(dataset: &Dataset, predictor: &LinearPredictor) -> Result<f64> {
    if predictor.beta.cols() != dataset.d2() || predictor.beta.rows() != dataset.p() {
        return Err(Error::DimensionMismatch(format!(
            "predictor {}x{} against dataset p = {}, d2 = {}",
            predictor.beta.rows(),
            predictor.beta.cols(),
            dataset.p(),
            dataset.d2()
        )));
    }
    let n = dataset.n();
    let mut total = 0.0;
    for i in 0..n {
        let pred = predictor.predict(dataset.psi_star.row(i));
        let gap = vsub(dataset.bayes.row(i), &pred);
        total += linalg::vdot(&gap, &gap);
    }
    Ok(total / n as f64)
}

/// Minimizes `approx_error` over all affine predictors with the default
/// relative exactness tolerance.
pub fn min_approx_error(dataset: &Dataset) -> Result<MatchReport> {
    min_approx_error_with(dataset, EXACTNESS_REL_TOL)
}

/// Centered least squares of `bayes` on `psi_star`; minimum-norm coefficients
/// on rank deficiency. `rel_tol` scales the exactness threshold relative to
/// the mean squared Bayes norm.
pub fn min_approx_error_with(dataset: &Dataset, rel_tol: f64) -> Result<MatchReport> {
    let (n, p) = (dataset.n(), dataset.p());
    if n < p + 1 {
        return Err(Error::InvalidArgument(format!("need at least {} rows, got {n}", p + 1)));
    }
    if !rel_tol.is_finite() || rel_tol < 0.0 {
        return Err(Error::InvalidArgument(format!("relative tolerance {rel_tol}")));
    }
    let mu_x = dataset.psi_star.col_means();
    let mu_y = dataset.bayes.col_means();
    let xc = dataset.psi_star.center_rows(&mu_x);
    let yc = dataset.bayes.center_rows(&mu_y);
    // Normal equations with a minimum-norm pseudoinverse solve; the Gram
    // matrix keeps the cost at d2^2 per row instead of an n x d2 SVD.
    let gram = xc.transpose().dot(&xc);
    let rhs = xc.transpose().dot(&yc);
    let beta = linalg::ridge_solve(&gram, &rhs, 0.0)?.transpose();
    let predictor = LinearPredictor::new(beta, mu_x, mu_y)?;
    let error = approx_error(dataset, &predictor)?;

    let mut mean_sq = 0.0;
    for i in 0..n {
        let b = dataset.bayes.row(i);
        mean_sq += linalg::vdot(b, b);
    }
    mean_sq /= n as f64;
    let tolerance = rel_tol * mean_sq;
    Ok(MatchReport { error_apx_star: error, beta_star: predictor, is_exact: error <= tolerance, tolerance })
}

/// Samples `n` rows from the model and reports the minimal readout gap on
/// the oracle columns. The fitted predictor is included so callers can probe
/// it on held-out points.
pub fn check_exact_matching(
    model: &GenerativeModel,
    n: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<MatchReport> {
    let dataset = model.sample(n, seed)?;
    min_approx_error_with(&dataset, rel_tol)
}

// ─── redundancy at s = 0 ───

/// `(1/d2) * mean_i ||psi_i - C_tilde bayes_i||^2`: the mean squared size of
/// the centered-encoding image of the posterior, averaged per coordinate.
/// Uses the identity `(C(x_i) - C_tilde) bayes_i = psi_i - C_tilde bayes_i`.
pub fn epsilon_zero(dataset: &Dataset, c_tilde: &Matrix) -> Result<f64> {
    if c_tilde.rows() != dataset.d2() || c_tilde.cols() != dataset.p() {
        return Err(Error::DimensionMismatch(format!(
            "mean encoding {}x{}, dataset needs {}x{}",
            c_tilde.rows(),
            c_tilde.cols(),
            dataset.d2(),
            dataset.p()
        )));
    }
    let n = dataset.n();
    let mut total = 0.0;
    for i in 0..n {
        let u = vsub(dataset.psi_star.row(i), &c_tilde.mat_vec(dataset.bayes.row(i)));
        total += linalg::vdot(&u, &u);
    }
    Ok(total / (n as f64 * dataset.d2() as f64))
}

// ─── closed-form gap bound ───

/// The objective minimized by the closed-form readout:
/// `||I_p - beta C_tilde||^2 + ||beta B_star||^2 + eps_s ||beta||^2`
/// (Frobenius norms).
pub fn bound_objective(beta: &Matrix, c_tilde: &Matrix, b_star: &Matrix, eps_s: f64) -> f64 {
    let p = beta.rows();
    let fit = Matrix::identity(p).sub(&beta.dot(c_tilde));
    let leak = beta.dot(b_star);
    let f = fit.frobenius_norm();
    let l = leak.frobenius_norm();
    let b = beta.frobenius_norm();
    f * f + l * l + eps_s * b * b
}

/// Closed-form upper bound on the minimal readout gap, given the mean
/// encoding `C_tilde` (d2 x p), subspace factor `B_star` (d2 x s), the
/// redundancy value `eps_s`, and the second moment of the label residual
/// `Y - E[Y|X1]`. Returns the bound and its minimizing `beta_s` (p x d2),
/// computed as `C_tilde^T (C_tilde C_tilde^T + B_star B_star^T + eps_s I)^+`
/// (minimum-norm when the kernel matrix is singular at `eps_s = 0`).
pub fn approx_error_bound(
    c_tilde: &Matrix,
    b_star: &Matrix,
    eps_s: f64,
    noise_second_moment: f64,
) -> Result<(f64, Matrix)> {
    let d2 = c_tilde.rows();
    let p = c_tilde.cols();
    if b_star.rows() != d2 {
        return Err(Error::DimensionMismatch(format!(
            "factor has {} rows, mean encoding has {d2}",
            b_star.rows()
        )));
    }
    if !eps_s.is_finite() || eps_s < 0.0 {
        return Err(Error::InvalidArgument(format!("eps_s {eps_s}")));
    }
    if !noise_second_moment.is_finite() || noise_second_moment < 0.0 {
        return Err(Error::InvalidArgument(format!("noise second moment {noise_second_moment}")));
    }
    let mut kernel = c_tilde.dot(&c_tilde.transpose()).add(&b_star.dot(&b_star.transpose()));
    for i in 0..d2 {
        kernel[(i, i)] += eps_s;
    }
    let beta_s = linalg::ridge_solve(&kernel, c_tilde, 0.0)?.transpose();
    let bound = 2.0 * (p as f64 + noise_second_moment)
        * bound_objective(&beta_s, c_tilde, b_star, eps_s);
    Ok((bound, beta_s))
}

// ─── tests ───
