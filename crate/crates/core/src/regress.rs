//! Downstream estimators on a learned representation.
//!
//! Ridge and minimum-norm least squares of the label encoding on feature
//! rows (centered internally, so the intercept is implicit), their
//! population counterpart, excess risk against the Bayes posterior,
//! classification decoding of the regression output, and seeded k-fold
//! cross-validation over a log-spaced penalty grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::genmodel::Dataset;
use crate::linalg::{self, Matrix, SpectralSummary};
use crate::matching::{self, LinearPredictor};
use crate::{Error, Result};

pub use crate::linalg::effective_dimension;

/// Penalty grid used by cross-validation: 200 log-spaced values.
pub const CV_GRID_SIZE: usize = 200;
pub const CV_GRID_MIN: f64 = 0.001;
pub const CV_GRID_MAX: f64 = 100.0;

// ─── ridge fits ───

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeFit {
    pub predictor: LinearPredictor,
    pub lambda: f64,
    pub n_train: usize,
    /// Eigen-summary of the centered feature second moment `X^T X / n`.
    pub gram_spectrum: SpectralSummary,
}

impl RidgeFit {
    /// Decodes the class of one feature row; see `decode_scores`.
    pub fn classify(&self, x: &[f64]) -> usize {
        decode_scores(&self.predictor.predict(x))
    }
}

/// `argmin (1/n)||Y - X beta^T||^2 + lambda ||beta||^2` with internal
/// centering by training means. `lambda = 0` returns the minimum-norm
/// least-squares fit.
pub fn fit_ridge(features: &Matrix, labels: &Matrix, lambda: f64) -> Result<RidgeFit> {
    if features.rows() != labels.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows, {} label rows",
            features.rows(),
            labels.rows()
        )));
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda {lambda}")));
    }
    let mu_x = features.col_means();
    let mu_y = labels.col_means();
    let xc = features.center_rows(&mu_x);
    let yc = labels.center_rows(&mu_y);
    let gram = xc.transpose().dot(&xc);
    let rhs = xc.transpose().dot(&yc);
    // The penalized normal equations read (X^T X + lambda n I) beta^T = X^T Y.
    let beta = linalg::ridge_solve(&gram, &rhs, lambda * n as f64)?.transpose();
    let (spectrum, _) = linalg::eig_sym(&gram.scale(1.0 / n as f64))?;
    Ok(RidgeFit {
        predictor: LinearPredictor::new(beta, mu_x, mu_y)?,
        lambda,
        n_train: n,
        gram_spectrum: spectrum,
    })
}

/// The training objective `(1/n)||Yc - Xc beta^T||^2 + lambda ||beta||^2`
/// of a fit, evaluated with the fit's own centering.
pub fn ridge_objective(features: &Matrix, labels: &Matrix, fit: &RidgeFit) -> Result<f64> {
    let pred = fit.predictor.predict_rows(features)?;
    if pred.rows() != labels.rows() || pred.cols() != labels.cols() {
        return Err(Error::DimensionMismatch("labels against predictions".into()));
    }
    let gap = labels.sub(&pred).frobenius_norm();
    let b = fit.predictor.beta.frobenius_norm();
    Ok(gap * gap / labels.rows() as f64 + fit.lambda * b * b)
}

/// Population ridge coefficients from exact moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationRidge {
    /// `p x d2`, the transpose of `(Sigma + lambda I)^{-1} E[X Y^T]`.
    pub beta: Matrix,
    /// True when `lambda = 0` met a singular `Sigma` and the minimum-norm
    /// pseudoinverse solution was returned.
    pub min_norm: bool,
}

pub fn population_ridge(sigma: &Matrix, cross_moment: &Matrix, lambda: f64) -> Result<PopulationRidge> {
    if sigma.rows() != sigma.cols() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    if cross_moment.rows() != sigma.rows() {
        return Err(Error::DimensionMismatch(format!(
            "cross moment has {} rows, covariance is {}x{}",
            cross_moment.rows(),
            sigma.rows(),
            sigma.cols()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda {lambda}")));
    }
    let beta = linalg::ridge_solve(sigma, cross_moment, lambda)?.transpose();
    let min_norm = if lambda == 0.0 {
        let (summary, _) = linalg::eig_sym(sigma)?;
        summary.rank < sigma.rows()
    } else {
        false
    };
    Ok(PopulationRidge { beta, min_norm })
}

// ─── risk evaluation ───

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    /// Mean over eval rows of `||bayes - predict(psi_star)||^2`.
    pub excess_risk: f64,
    /// Best achievable value of the same quantity over all affine readouts
    /// of the eval features: the floor `excess_risk` is compared against.
    pub error_apx_at_fit: f64,
    /// Fraction of eval rows whose decoded class matches the realized label.
    pub accuracy: f64,
    pub n_eval: usize,
}

/// Evaluates a fit on held-out oracle columns: the excess risk is the mean
/// squared gap to the Bayes posterior, the accuracy scores the decoded
/// classes against the realized labels.
pub fn excess_risk(fit: &RidgeFit, eval: &Dataset) -> Result<RiskReport> {
    let risk = matching::approx_error(eval, &fit.predictor)?;
    let floor = matching::min_approx_error(eval)?.error_apx_star;
    let enc = crate::genmodel::LabelEncoding { p: eval.p() };
    let mut correct = 0usize;
    for i in 0..eval.n() {
        let decoded = fit.classify(eval.psi_star.row(i));
        if decoded == enc.decode(eval.y.row(i)) {
            correct += 1;
        }
    }
    Ok(RiskReport {
        excess_risk: risk,
        error_apx_at_fit: floor,
        accuracy: correct as f64 / eval.n() as f64,
        n_eval: eval.n(),
    })
}

/// Decodes a `p`-dimensional regression output into a class in `1..=p+1`:
/// argmax over the scores `(y_1, ..., y_p, 1 - sum_j y_j)`, ties broken
/// toward the lowest index.
pub fn decode_scores(yhat: &[f64]) -> usize {
    let excluded = 1.0 - yhat.iter().sum::<f64>();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (j, &score) in yhat.iter().chain(std::iter::once(&excluded)).enumerate() {
        if score > best_score {
            best_score = score;
            best = j;
        }
    }
    best + 1
}

// ─── cross-validation ───

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_cv_loss: f64,
    pub std_cv_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub lambda_star: f64,
    pub rows: Vec<CvRow>,
    pub k_folds: usize,
    pub seed: u64,
}

impl CvReport {
    /// CSV export (`lambda,mean_cv_loss,std_cv_loss`).
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The 200-value log-spaced penalty grid on `[0.001, 100]`.
pub fn cv_lambda_grid() -> Vec<f64> {
    let lo = CV_GRID_MIN.ln();
    let hi = CV_GRID_MAX.ln();
    (0..CV_GRID_SIZE)
        .map(|i| (lo + (hi - lo) * i as f64 / (CV_GRID_SIZE - 1) as f64).exp())
        .collect()
}

/// Seeded k-fold cross-validation of the ridge penalty over the standard
/// grid. Folds are contiguous blocks of a seeded shuffle; the winner
/// minimizes the mean validation squared error, ties going to the larger
/// penalty. `k_folds = n` is leave-one-out.
pub fn cross_validate_lambda(
    features: &Matrix,
    labels: &Matrix,
    k_folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let n = features.rows();
    if labels.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows, {} label rows",
            n,
            labels.rows()
        )));
    }
    if k_folds < 2 || k_folds > n {
        return Err(Error::InvalidArgument(format!("k_folds = {k_folds} outside 2..={n}")));
    }
    let d = features.cols();
    let p = labels.cols();
    let grid = cv_lambda_grid();

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // Contiguous blocks of the shuffled order; the first n % k blocks get
    // one extra row.
    let base = n / k_folds;
    let extra = n % k_folds;
    let mut fold_losses = vec![Vec::with_capacity(k_folds); grid.len()];
    let mut start = 0;
    for f in 0..k_folds {
        let len = base + usize::from(f < extra);
        let val_idx = &order[start..start + len];
        start += len;
        let train_idx: Vec<usize> =
            order[..start - len].iter().chain(&order[start..]).copied().collect();

        let gather = |idx: &[usize], m: &Matrix, w: usize| {
            Matrix::from_fn(idx.len(), w, |i, j| m[(idx[i], j)])
        };
        let xt = gather(&train_idx, features, d);
        let yt = gather(&train_idx, labels, p);
        let xv = gather(val_idx, features, d);
        let yv = gather(val_idx, labels, p);

        let mu_x = xt.col_means();
        let mu_y = yt.col_means();
        let xc = xt.center_rows(&mu_x);
        let yc = yt.center_rows(&mu_y);
        let gram = xc.transpose().dot(&xc);
        let rhs = xc.transpose().dot(&yc);
        // One eigendecomposition per fold serves the whole penalty grid.
        let (summary, vecs) = linalg::eig_sym(&gram)?;
        let proj = vecs.transpose().dot(&rhs);
        let xvc = xv.center_rows(&mu_x);
        let n_t = train_idx.len() as f64;
        for (gi, &lambda) in grid.iter().enumerate() {
            let mut scaled = proj.clone();
            for r in 0..scaled.rows() {
                let denom = summary.eigenvalues[r] + lambda * n_t;
                for c in 0..p {
                    scaled[(r, c)] /= denom;
                }
            }
            let beta_t = vecs.dot(&scaled); // d x p
            let pred = xvc.dot(&beta_t);
            let mut loss = 0.0;
            for i in 0..val_idx.len() {
                for j in 0..p {
                    let r = yv[(i, j)] - (pred[(i, j)] + mu_y[j]);
                    loss += r * r;
                }
            }
            fold_losses[gi].push(loss / val_idx.len() as f64);
        }
    }

    let mut rows = Vec::with_capacity(grid.len());
    let mut lambda_star = grid[0];
    let mut best = f64::INFINITY;
    for (gi, &lambda) in grid.iter().enumerate() {
        let losses = &fold_losses[gi];
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>()
            / (losses.len() - 1).max(1) as f64;
        rows.push(CvRow { lambda, mean_cv_loss: mean, std_cv_loss: var.sqrt() });
        // <= sends exact ties to the larger (later) penalty.
        if mean <= best {
            best = mean;
            lambda_star = lambda;
        }
    }
    Ok(CvReport { lambda_star, rows, k_folds, seed })
}

// ─── tests ───
