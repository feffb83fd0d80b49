//! Redundancy estimation.
//!
//! For a dataset with oracle columns and a mean encoding `C_tilde`, the
//! per-row residual `u_i = psi_i - C_tilde bayes_i` captures everything the
//! encoding does beyond its mean. The redundancy value at rank `s` is the
//! per-coordinate mean squared part of `u` that no rank-s factorization
//! `B v(x)` can explain:
//!
//! `eps_s = min_{B, v} (1/d2) (1/n) sum_i ||u_i - B v_i||^2`
//!
//! Because `v_i` may depend on `x_i` arbitrarily, each `v_i` is a free
//! s-vector and the minimization is exactly best rank-s subspace fitting of
//! the rows `u_i`: the spectral solver is closed-form (eigenvalue tail of
//! the uncentered second moment of `u`). An alternating least-squares solver
//! is kept as an independent cross-check, plus a closed form for jointly
//! Gaussian pairs and a Taylor-expansion construction for smooth scalar
//! encodings.

use serde::{Deserialize, Serialize};

use crate::genmodel::{Dataset, EncodingFunction};
use crate::linalg::{self, Matrix};
use crate::{Error, Result};

// ─── estimates ───

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Solver {
    Spectral,
    Als {
        iterations: usize,
        /// Relative objective decrease at the stopping iteration.
        final_gap: f64,
        /// Objective value after each full iteration, with the canonicalized
        /// value appended last; non-increasing up to roundoff.
        objective_trace: Vec<f64>,
    },
}

/// Scaling convention of the `(B_star, v_samples)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `B_star` has orthonormal columns.
    Canonical,
    /// Rescaled so the empirical mean of `||v_i||` is 1.
    UnitMeanFactorNorm,
    /// All `v_i` are zero; normalization is impossible.
    DegenerateZeroFactors,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub s: usize,
    /// The redundancy value at rank `s` (per-coordinate averaged).
    pub value: f64,
    /// `d2 x s` factor.
    pub b_star: Matrix,
    /// `n x s`, row `i` holds `v_i`.
    pub v_samples: Matrix,
    pub solver: Solver,
    pub normalization: Normalization,
}

// ─── residual rows ───

/// The `n x d2` matrix of residuals `u_i = psi_i - C_tilde bayes_i`.
pub fn encoding_residuals(dataset: &Dataset, c_tilde: &Matrix) -> Result<Matrix> {
    if c_tilde.rows() != dataset.d2() || c_tilde.cols() != dataset.p() {
        return Err(Error::DimensionMismatch(format!(
            "mean encoding {}x{}, dataset needs {}x{}",
            c_tilde.rows(),
            c_tilde.cols(),
            dataset.d2(),
            dataset.p()
        )));
    }
    let (n, d2) = (dataset.n(), dataset.d2());
    let mut u = Matrix::zeros(n, d2);
    for i in 0..n {
        let shift = c_tilde.mat_vec(dataset.bayes.row(i));
        let psi = dataset.psi_star.row(i);
        let row = u.row_mut(i);
        for k in 0..d2 {
            row[k] = psi[k] - shift[k];
        }
    }
    Ok(u)
}

/// Uncentered second moment `(1/n) sum_i u_i u_i^T` of a row block.
fn second_moment(rows: &Matrix) -> Matrix {
    rows.transpose().dot(rows).scale(1.0 / rows.rows() as f64)
}

fn check_s(s: usize, d2: usize) -> Result<()> {
    if s > d2 {
        return Err(Error::InvalidArgument(format!("rank {s} exceeds d2 = {d2}")));
    }
    Ok(())
}

fn objective(u: &Matrix, b: &Matrix, v: &Matrix) -> f64 {
    let (n, d2) = (u.rows(), u.cols());
    let mut total = 0.0;
    for i in 0..n {
        let fit = b.mat_vec(v.row(i));
        let ui = u.row(i);
        for k in 0..d2 {
            let r = ui[k] - fit[k];
            total += r * r;
        }
    }
    total / (n as f64 * d2 as f64)
}

// ─── spectral solver ───

/// Closed-form solve: eigenvalue tail of the second moment of `u` beyond the
/// top `s`, with `B_star` the top-s eigenvectors and `v_i = B_star^T u_i`.
pub fn epsilon_s_spectral(dataset: &Dataset, c_tilde: &Matrix, s: usize) -> Result<EpsilonEstimate> {
    let d2 = dataset.d2();
    check_s(s, d2)?;
    let u = encoding_residuals(dataset, c_tilde)?;
    let moment = second_moment(&u);
    let (summary, vecs) = linalg::eig_sym(&moment)?;
    let tail: f64 = summary.eigenvalues[s..].iter().map(|&l| l.max(0.0)).sum();
    let b_star = Matrix::from_fn(d2, s, |i, j| vecs[(i, j)]);
    let v_samples = u.dot(&b_star);
    Ok(EpsilonEstimate {
        s,
        value: tail / d2 as f64,
        b_star,
        v_samples,
        solver: Solver::Spectral,
        normalization: Normalization::Canonical,
    })
}

/// One row of the exportable spectrum table: the `index`-th largest
/// eigenvalue (1-based) of the second moment of `u`, and the redundancy
/// value at rank `index` (the per-coordinate tail beyond the top `index`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub epsilon_tail: f64,
}

/// Full eigenvalue spectrum of the second moment of `u`, with cumulative
/// tails. The rank-0 value equals `epsilon_tail` of row 1 plus
/// `eigenvalue / d2` of row 1.
pub fn residual_spectrum(dataset: &Dataset, c_tilde: &Matrix) -> Result<Vec<SpectrumRow>> {
    let u = encoding_residuals(dataset, c_tilde)?;
    let (summary, _) = linalg::eig_sym(&second_moment(&u))?;
    let d2 = dataset.d2() as f64;
    let mut rows = Vec::with_capacity(summary.eigenvalues.len());
    let mut tail: f64 = summary.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    for (idx, &lambda) in summary.eigenvalues.iter().enumerate() {
        tail -= lambda.max(0.0);
        rows.push(SpectrumRow { index: idx + 1, eigenvalue: lambda, epsilon_tail: tail.max(0.0) / d2 });
    }
    Ok(rows)
}

/// Writes the spectrum table as CSV (`index,eigenvalue,epsilon_tail`).
pub fn write_spectrum_csv<W: std::io::Write>(rows: &[SpectrumRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

// ─── alternating solver ───

/// Alternating least squares over `(B, {v_i})`, kept as an independent check
/// of the spectral reduction. Initialized from the top-s eigenvectors of the
/// second moment of the first tenth of the rows; stops when the relative
/// objective decrease falls below `tol` or after `max_iter` iterations.
pub fn epsilon_s_als(
    dataset: &Dataset,
    c_tilde: &Matrix,
    s: usize,
    max_iter: usize,
    tol: f64,
) -> Result<EpsilonEstimate> {
    let d2 = dataset.d2();
    check_s(s, d2)?;
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {tol}")));
    }
    let u = encoding_residuals(dataset, c_tilde)?;
    let n = u.rows();
    if s == 0 {
        let value = objective(&u, &Matrix::zeros(d2, 0), &Matrix::zeros(n, 0));
        return Ok(EpsilonEstimate {
            s,
            value,
            b_star: Matrix::zeros(d2, 0),
            v_samples: Matrix::zeros(n, 0),
            solver: Solver::Als { iterations: 0, final_gap: 0.0, objective_trace: vec![value] },
            normalization: Normalization::Canonical,
        });
    }

    // Warm start from a small prefix: cheap, deterministic.
    let m = (n / 10).max(1);
    let prefix = Matrix::from_fn(m, d2, |i, j| u[(i, j)]);
    let (_, vecs) = linalg::eig_sym(&second_moment(&prefix))?;
    let mut b = Matrix::from_fn(d2, s, |i, j| vecs[(i, j)]);

    let mut v;
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut final_gap = 0.0;
    let mut iterations = 0;
    for _ in 0..max_iter {
        v = u.dot(&linalg::pinv(&b)?.transpose());
        let uv = u.transpose().dot(&v);
        let vv = v.transpose().dot(&v);
        b = uv.dot(&linalg::pinv(&vv)?);
        let obj = objective(&u, &b, &v);
        iterations += 1;
        trace.push(obj);
        if prev.is_finite() {
            final_gap = (prev - obj) / prev.max(f64::MIN_POSITIVE);
            if final_gap < tol {
                break;
            }
        }
        prev = obj;
    }
    // Canonicalize B to an orthonormal basis of its range (padded when B is
    // rank deficient) and take the projection coefficients as v. For an
    // orthonormal basis the projection is the optimal v-step over a space
    // containing range(B), so this cannot exceed the loop objective.
    let (b_star, _, _) = linalg::svd(&b)?;
    let v_samples = u.dot(&b_star);
    let value = objective(&u, &b_star, &v_samples);
    trace.push(value);
    Ok(EpsilonEstimate {
        s,
        value,
        b_star,
        v_samples,
        solver: Solver::Als { iterations, final_gap, objective_trace: trace },
        normalization: Normalization::Canonical,
    })
}

/// Rescales `(B_star, v)` so the empirical mean of `||v_i||` equals 1,
/// preserving all products `B_star v_i`. An all-zero `v` block cannot be
/// normalized and is returned unchanged with the degenerate flag set.
pub fn normalize_factors(estimate: &EpsilonEstimate) -> EpsilonEstimate {
    let n = estimate.v_samples.rows();
    let mut mean_norm = 0.0;
    for i in 0..n {
        mean_norm += linalg::vnorm(estimate.v_samples.row(i));
    }
    mean_norm /= n as f64;
    if mean_norm == 0.0 {
        let mut out = estimate.clone();
        out.normalization = Normalization::DegenerateZeroFactors;
        return out;
    }
    let mut out = estimate.clone();
    out.b_star = estimate.b_star.scale(mean_norm);
    out.v_samples = estimate.v_samples.scale(1.0 / mean_norm);
    out.normalization = Normalization::UnitMeanFactorNorm;
    out
}

// ─── Gaussian closed form ───

/// Jointly Gaussian `(X1, X2)` pair, described by the input covariance and
/// the cross covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    /// `d1 x d1`, positive definite.
    pub sigma_x1x1: Matrix,
    /// `d2 x d1`.
    pub sigma_x2x1: Matrix,
}

impl GaussianModel {
    pub fn new(sigma_x1x1: Matrix, sigma_x2x1: Matrix) -> Result<Self> {
        if sigma_x1x1.rows() != sigma_x1x1.cols() {
            return Err(Error::DimensionMismatch("input covariance must be square".into()));
        }
        if sigma_x2x1.cols() != sigma_x1x1.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cross covariance {}x{} against input dimension {}",
                sigma_x2x1.rows(),
                sigma_x2x1.cols(),
                sigma_x1x1.rows()
            )));
        }
        if !sigma_x1x1.is_finite() || !sigma_x2x1.is_finite() {
            return Err(Error::NonFinite("Gaussian model covariances".into()));
        }
        Ok(GaussianModel { sigma_x1x1, sigma_x2x1 })
    }

    pub fn d1(&self) -> usize {
        self.sigma_x1x1.rows()
    }

    pub fn d2(&self) -> usize {
        self.sigma_x2x1.rows()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianEpsilon {
    pub s: usize,
    /// Squared singular-value tail of the whitened regression matrix.
    /// NOTE: total, not per-coordinate: divide by `d2` to compare with the
    /// dataset estimators.
    pub value: f64,
    /// `d2 x d1` rank-<=s approximation of the regression matrix `M`.
    pub factor: Matrix,
    /// Always false: the value follows the un-averaged convention.
    pub per_coordinate_average: bool,
}

/// Closed-form redundancy for a jointly Gaussian pair: with
/// `M = Sigma_21 Sigma_11^{-1}` and `W = Sigma_11^{1/2}`, the value is the
/// squared singular-value tail of `M W` beyond the top `s`, and the factor
/// is the truncated reconstruction mapped back through `W^{-1}`.
pub fn gaussian_epsilon_s(gm: &GaussianModel, s: usize) -> Result<GaussianEpsilon> {
    let d1 = gm.d1();
    let d2 = gm.d2();
    if s > d1.min(d2) {
        return Err(Error::InvalidArgument(format!(
            "rank {s} exceeds min(d1, d2) = {}",
            d1.min(d2)
        )));
    }
    let (summary, vecs) = linalg::eig_sym(&gm.sigma_x1x1)?;
    let max_eig = summary.eigenvalues.first().copied().unwrap_or(0.0);
    let min_eig = summary.eigenvalues.last().copied().unwrap_or(0.0);
    if min_eig <= 1e-12 * max_eig.max(1.0) {
        return Err(Error::Numerical(format!(
            "input covariance is singular (smallest eigenvalue {min_eig:.3e})"
        )));
    }
    // W = V diag(sqrt(lam)) V^T, and M W = Sigma_21 V diag(1/sqrt(lam)) V^T.
    let half = Matrix::from_fn(d1, d1, |i, j| vecs[(i, j)] * summary.eigenvalues[j].sqrt());
    let inv_half = Matrix::from_fn(d1, d1, |i, j| vecs[(i, j)] / summary.eigenvalues[j].sqrt());
    let w_inv = inv_half.dot(&vecs.transpose());
    let mw = gm.sigma_x2x1.dot(&inv_half).dot(&vecs.transpose());

    let (u, sigma, v) = linalg::svd(&mw)?;
    let value: f64 = sigma[s.min(sigma.len())..].iter().map(|x| x * x).sum();
    // Truncated reconstruction of M W, then undo the whitening.
    let mut truncated = Matrix::zeros(d2, d1);
    for j in 0..s.min(sigma.len()) {
        let uj = u.col(j);
        let vj = v.col(j);
        for r in 0..d2 {
            for c in 0..d1 {
                truncated[(r, c)] += sigma[j] * uj[r] * vj[c];
            }
        }
    }
    let factor = truncated.dot(&w_inv);
    let _ = half; // kept for clarity of the convention above
    Ok(GaussianEpsilon { s, value, factor, per_coordinate_average: false })
}

// ─── Taylor construction ───

/// Low-rank structure extracted from a univariate polynomial encoding by
/// Taylor expansion around `expansion_point`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaylorLowRank {
    /// Rank of the stacked Taylor coefficient block.
    pub s: usize,
    /// `d2 x s`, orthonormal columns.
    pub b: Matrix,
    /// `s x (order*p)` mixing of the stacked monomial features.
    feature_mix: Matrix,
    pub order: usize,
    pub expansion_point: f64,
    /// Encoding value at the expansion point.
    pub center: Matrix,
    /// Largest absolute residual entry over the verification grid
    /// `[a - 0.5, a + 0.5]`.
    pub remainder_sup: f64,
    /// Estimated constant in the `O((x-a)^{order+1})` remainder: the largest
    /// grid value of `|residual| / |x-a|^{order+1}`.
    pub remainder_constant: f64,
}

impl TaylorLowRank {
    /// The feature map `phi(x)`: an `s x p` matrix with
    /// `b * phi(x) = sum_j A_j (x-a)^j`.
    pub fn features(&self, x: f64) -> Matrix {
        let p = self.center.cols();
        let dx = x - self.expansion_point;
        // Stacked block [(x-a) I_p; (x-a)^2 I_p; ...].
        let mut stacked = Matrix::zeros(self.order * p, p);
        let mut pw = 1.0;
        for k in 0..self.order {
            pw *= dx;
            for j in 0..p {
                stacked[(k * p + j, j)] = pw;
            }
        }
        self.feature_mix.dot(&stacked)
    }

    /// `center + b * features(x)`: the rank-s surrogate of the encoding.
    pub fn surrogate(&self, x: f64) -> Matrix {
        self.center.add(&self.b.dot(&self.features(x)))
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (k - i) as f64;
    }
    out
}

/// Exact Taylor coefficient `A_j(a) = C^(j)(a) / j!` of the polynomial
/// encoding `C(x) = sum_k C_k x^k`.
fn taylor_coefficient(coefficients: &[Matrix], j: usize, a: f64) -> Matrix {
    let (d2, p) = (coefficients[0].rows(), coefficients[0].cols());
    let mut out = Matrix::zeros(d2, p);
    let mut pw = 1.0; // a^(k-j), built up incrementally
    for k in j..coefficients.len() {
        out = out.add(&coefficients[k].scale(binomial(k, j) * pw));
        pw *= a;
    }
    out
}

/// Builds the rank-s surrogate `C(a) + B phi(x)` of a polynomial encoding
/// from its Taylor expansion to the given order, and verifies the remainder
/// order numerically on a grid around the expansion point.
pub fn taylor_lowrank(
    encoding: &EncodingFunction,
    order: usize,
    expansion_point: f64,
) -> Result<TaylorLowRank> {
    let coefficients = match encoding {
        EncodingFunction::SmoothScalar { coefficients } => coefficients,
        _ => {
            return Err(Error::InvalidArgument(
                "Taylor construction needs a univariate polynomial encoding".into(),
            ))
        }
    };
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if !expansion_point.is_finite() {
        return Err(Error::NonFinite("expansion point".into()));
    }
    let (d2, p) = (coefficients[0].rows(), coefficients[0].cols());
    let center = taylor_coefficient(coefficients, 0, expansion_point);
    let blocks: Vec<Matrix> =
        (1..=order).map(|j| taylor_coefficient(coefficients, j, expansion_point)).collect();
    let refs: Vec<&Matrix> = blocks.iter().collect();
    let stacked = Matrix::hstack(&refs)?;

    let (u, sigma, v) = linalg::svd(&stacked)?;
    let cutoff = linalg::tol::RANK_REL * sigma.first().copied().unwrap_or(0.0);
    let s = sigma.iter().filter(|&&x| x > cutoff).count();
    let b = Matrix::from_fn(d2, s, |i, j| u[(i, j)]);
    // stacked = B * (diag(sigma) V^T restricted to the top s), exactly at
    // the kept rank.
    let feature_mix = Matrix::from_fn(s, order * p, |i, j| sigma[i] * v[(j, i)]);

    let mut out = TaylorLowRank {
        s,
        b,
        feature_mix,
        order,
        expansion_point,
        center,
        remainder_sup: 0.0,
        remainder_constant: 0.0,
    };
    let grid = 101;
    for g in 0..grid {
        let x = expansion_point - 0.5 + g as f64 / (grid - 1) as f64;
        let residual = encoding.eval(&[x]).sub(&out.surrogate(x)).max_abs();
        out.remainder_sup = out.remainder_sup.max(residual);
        let dx = (x - expansion_point).abs();
        if dx > 1e-9 {
            out.remainder_constant = out.remainder_constant.max(residual / dx.powi(order as i32 + 1));
        }
    }
    Ok(out)
}

// ─── tests ───
