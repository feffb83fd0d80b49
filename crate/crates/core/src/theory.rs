//! Second-order diagnostics for the linear-readout risk analysis.
//!
//! The redundancy estimate of [`crate::lowrank`] splits the oracle features
//! `x_i = psi_star_i` into a rank-limited surrogate `t_i = C_tilde bayes_i +
//! B_star v_i` and a gap `t_i - x_i`. This module measures everything the
//! risk bounds lean on: the covariance / second-moment triremes of the three
//! row families, empirical domination constants between them, effective
//! dimension ratios of shrunken spectra, max-whitened-norm proxies for the
//! tail assumptions, and seeded risk-vs-sample-size scaling sweeps.

use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use crate::genmodel::{Dataset, GenerativeModel};
use crate::linalg::{self, tol, vnorm, Matrix, SpectralSummary};
use crate::lowrank::{encoding_residuals, EpsilonEstimate};
use crate::matching::LinearPredictor;
use crate::regress;
use crate::seeding::mix_seed;
use crate::{Error, Result};

/// Relative spectral mass outside the base range above which a domination
/// constant is reported as infinite.
const LEAK_REL: f64 = 1e-8;
/// Largest eigenvalue below this times the reference scale counts as zero.
const NEGLIGIBLE_REL: f64 = 1e-12;

// ─── covariance triplet ───

/// Second-order summary of oracle features, their rank-s surrogate, and the
/// gap between the two, all measured on one dataset.
///
/// `covariance_*` are mean-centered; `moment_*` are uncentered second
/// moments. The uncentered convention is the one with an exact bookkeeping
/// identity: the mean squared gap per coordinate equals the redundancy
/// value, i.e. `tr(moment_gap) == d2 * estimate.value` up to roundoff.
#[derive(Debug, Clone)]
pub struct CovarianceTriplet {
    pub covariance: Matrix,
    pub covariance_surrogate: Matrix,
    pub covariance_gap: Matrix,
    pub moment: Matrix,
    pub moment_surrogate: Matrix,
    pub moment_gap: Matrix,
}

impl CovarianceTriplet {
    pub fn d2(&self) -> usize {
        self.moment.rows()
    }

    /// `tr(moment_gap) / d2`; agrees with the redundancy value it was built
    /// from to machine precision.
    pub fn redundancy_trace(&self) -> f64 {
        let d2 = self.d2();
        (0..d2).map(|i| self.moment_gap[(i, i)]).sum::<f64>() / d2 as f64
    }
}

fn symmetrize(m: Matrix) -> Matrix {
    m.add(&m.transpose()).scale(0.5)
}

/// `rows^T rows / n`, symmetrized.
fn uncentered_moment(rows: &Matrix) -> Matrix {
    symmetrize(rows.transpose().dot(rows).scale(1.0 / rows.rows() as f64))
}

fn centered_covariance(rows: &Matrix) -> Matrix {
    uncentered_moment(&rows.center_rows(&rows.col_means()))
}

/// Rebuilds the surrogate rows `t_i = C_tilde bayes_i + B_star v_i` and the
/// gap rows `t_i - x_i` from a dataset and a redundancy estimate.
fn surrogate_rows(
    dataset: &Dataset,
    c_tilde: &Matrix,
    estimate: &EpsilonEstimate,
) -> Result<(Matrix, Matrix)> {
    let (n, d2) = (dataset.n(), dataset.d2());
    if n == 0 {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if estimate.b_star.rows() != d2 || estimate.b_star.cols() != estimate.s {
        return Err(Error::DimensionMismatch(format!(
            "subspace factor is {}x{}, expected {}x{}",
            estimate.b_star.rows(),
            estimate.b_star.cols(),
            d2,
            estimate.s
        )));
    }
    if estimate.v_samples.rows() != n || estimate.v_samples.cols() != estimate.s {
        return Err(Error::DimensionMismatch(format!(
            "factor rows are {}x{}, expected {}x{}",
            estimate.v_samples.rows(),
            estimate.v_samples.cols(),
            n,
            estimate.s
        )));
    }
    let u = encoding_residuals(dataset, c_tilde)?;
    // t - x = B v - u, since x = C_tilde bayes + u and t = C_tilde bayes + B v.
    let gap = estimate.v_samples.dot(&estimate.b_star.transpose()).sub(&u);
    let surrogate = dataset.psi_star.add(&gap);
    Ok((surrogate, gap))
}

/// Centered covariances and uncentered second moments of features, surrogate
/// and gap. The estimate must come from the same dataset and mean encoding.
pub fn covariance_triplet(
    dataset: &Dataset,
    c_tilde: &Matrix,
    estimate: &EpsilonEstimate,
) -> Result<CovarianceTriplet> {
    let (surrogate, gap) = surrogate_rows(dataset, c_tilde, estimate)?;
    let x = &dataset.psi_star;
    Ok(CovarianceTriplet {
        covariance: centered_covariance(x),
        covariance_surrogate: centered_covariance(&surrogate),
        covariance_gap: centered_covariance(&gap),
        moment: uncentered_moment(x),
        moment_surrogate: uncentered_moment(&surrogate),
        moment_gap: uncentered_moment(&gap),
    })
}

// ─── domination constants ───

/// Empirically minimal constants comparing the surrogate and gap spectra
/// against the base feature spectrum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominationConstants {
    /// Smallest `a` with `surrogate ⪯ a (1 + eps) base`; infinite when the
    /// surrogate has spectral mass outside the range of the base.
    pub a_tilde: f64,
    /// Smallest `a` with `gap ⪯ a eps base`; zero when the gap vanishes,
    /// infinite when `eps == 0` but the gap does not, or on range leak.
    pub a_bar: f64,
}

/// One branch of the domination computation: the largest eigenvalue of the
/// base-whitened matrix divided by `denom`, with zero / leak flags.
fn domination_branch(
    white: &Matrix,
    complement: &Matrix,
    m: &Matrix,
    denom: f64,
    base_scale: f64,
) -> Result<f64> {
    let (summary, _) = linalg::eig_sym(m)?;
    let lmax = summary.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    if lmax <= NEGLIGIBLE_REL * base_scale.max(lmax) {
        return Ok(0.0);
    }
    if denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let outside = symmetrize(complement.dot(m).dot(complement));
    let (out_summary, _) = linalg::eig_sym(&outside)?;
    let leak = out_summary.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    if leak > LEAK_REL * lmax {
        return Ok(f64::INFINITY);
    }
    let whitened = symmetrize(white.dot(m).dot(white));
    let (w_summary, _) = linalg::eig_sym(&whitened)?;
    Ok(w_summary.eigenvalues.first().copied().unwrap_or(0.0).max(0.0) / denom)
}

/// Minimal constants `a_tilde`, `a_bar` such that on the numeric range of
/// `base`, `surrogate ⪯ a_tilde (1 + eps) base` and `gap ⪯ a_bar eps base`.
/// Mass outside that range cannot be dominated and flips the constant to
/// infinity; a vanished matrix yields zero. Verified by re-checking that
/// `a (1 + eps) base - surrogate` has smallest eigenvalue above `-1e-8`
/// relative, which holds whenever the returned constant is finite.
pub fn domination_constants(
    base: &Matrix,
    surrogate: &Matrix,
    gap: &Matrix,
    eps: f64,
) -> Result<DominationConstants> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("redundancy value {eps}")));
    }
    let d = base.rows();
    for m in [base, surrogate, gap] {
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "domination inputs must all be {d}x{d}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    let (base_summary, base_vecs) = linalg::eig_sym(base)?;
    let base_scale = base_summary.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cut = tol::RANK_REL * base_scale;
    let mut white = Matrix::zeros(d, d);
    let mut projector = Matrix::zeros(d, d);
    for (j, &l) in base_summary.eigenvalues.iter().enumerate() {
        if l > cut && l > 0.0 {
            let v = base_vecs.col(j);
            white.add_outer(&v, 1.0 / l.sqrt());
            projector.add_outer(&v, 1.0);
        }
    }
    let mut complement = Matrix::identity(d);
    complement = complement.sub(&projector);
    Ok(DominationConstants {
        a_tilde: domination_branch(&white, &complement, surrogate, 1.0 + eps, base_scale)?,
        a_bar: domination_branch(&white, &complement, gap, eps, base_scale)?,
    })
}

// ─── effective dimension ratio ───

/// Shrunken effective dimension of the spectrum relative to the budget
/// `(1 + eps/lambda)(p + s)`. Stays bounded across `lambda` grids when the
/// spectrum is a rank-(p+s) surrogate plus an `eps`-sized tail, and tends to
/// zero as `lambda` grows.
pub fn effective_dimension_ratio(
    spectrum: &SpectralSummary,
    lambda: f64,
    eps: f64,
    p: usize,
    s: usize,
) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!("shrinkage {lambda} must be positive")));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("redundancy value {eps}")));
    }
    if p + s == 0 {
        return Err(Error::InvalidArgument("p + s must be positive".into()));
    }
    let d_lambda = linalg::effective_dimension(spectrum, lambda)?;
    Ok(d_lambda / ((1.0 + eps / lambda) * (p + s) as f64))
}

// ─── scaling sweeps ───

/// Held-out rows used to measure per-cell excess risk in scaling sweeps.
const RATE_EVAL_ROWS: usize = 4_000;

/// Mean and spread of excess risk along a sweep grid, with a log-log rate.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingResult {
    /// Ascending sweep values (sample sizes or ranks).
    pub grid: Vec<f64>,
    pub mean_risk: Vec<f64>,
    /// Sample standard deviation over trials (zero for a single trial).
    pub std_risk: Vec<f64>,
    pub trials: usize,
    /// Least-squares slope of `log mean_risk` against `log grid`.
    pub slope: f64,
    pub intercept: f64,
    pub warnings: Vec<String>,
}

impl ScalingResult {
    /// CSV with columns `grid_value,mean_risk,std_risk,trials`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["grid_value", "mean_risk", "std_risk", "trials"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                self.grid[i].to_string(),
                self.mean_risk[i].to_string(),
                self.std_risk[i].to_string(),
                self.trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn log_log_fit(grid: &[f64], means: &[f64], warnings: &mut Vec<String>) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(means)
        .filter(|&(&g, &m)| g > 0.0 && m > 0.0)
        .map(|(&g, &m)| (g.ln(), m.ln()))
        .collect();
    if pts.len() < grid.len() {
        warnings.push(format!(
            "{} grid points had nonpositive mean risk and were left out of the rate fit",
            grid.len() - pts.len()
        ));
    }
    if pts.len() < 2 {
        warnings.push("fewer than two usable grid points; rate undefined".into());
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Excess risk of a min-norm least-squares readout on oracle features, swept
/// over training sizes with `trials` independent draws per size.
///
/// Cell `(i, t)` trains on `model.sample(n_grid[i], mix_seed(seed, i, 2t))`
/// and evaluates on a fresh draw of 4000 rows seeded with the odd stream
/// `mix_seed(seed, i, 2t + 1)`. Excess risk is the mean squared gap to the
/// posterior minus the best achievable gap on the same held-out rows. Cells
/// run concurrently; aggregation is in fixed `(grid, trial)` order, so the
/// output is independent of the thread schedule.
pub fn risk_rate_sweep(
    model: &GenerativeModel,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ScalingResult> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty sample-size grid".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sample-size grid must be strictly ascending".into()));
    }
    if n_grid[0] < 2 {
        return Err(Error::InvalidArgument("sample sizes below 2 cannot be fit".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial required".into()));
    }
    let mut warnings = Vec::new();
    if trials < 10 {
        warnings.push(format!("{trials} trials; scaling estimates will be noisy below 10"));
    }

    let cells: Vec<(usize, usize)> =
        (0..n_grid.len()).flat_map(|g| (0..trials).map(move |t| (g, t))).collect();
    let outcomes: Vec<(usize, usize, f64)> = cells
        .into_par_iter()
        .map(|(g, t)| -> Result<(usize, usize, f64)> {
            let train = model.sample(n_grid[g], mix_seed(seed, g as u64, 2 * t as u64))?;
            let eval = model.sample(RATE_EVAL_ROWS, mix_seed(seed, g as u64, 2 * t as u64 + 1))?;
            let fit = regress::fit_ridge(&train.psi_star, &train.y, 0.0)?;
            let report = regress::excess_risk(&fit, &eval)?;
            Ok((g, t, (report.excess_risk - report.error_apx_at_fit).max(0.0)))
        })
        .collect::<Result<_>>()?;

    let mut per_cell = vec![0.0; n_grid.len() * trials];
    for (g, t, excess) in outcomes {
        per_cell[g * trials + t] = excess;
    }
    let mut mean_risk = Vec::with_capacity(n_grid.len());
    let mut std_risk = Vec::with_capacity(n_grid.len());
    for g in 0..n_grid.len() {
        let cell = &per_cell[g * trials..(g + 1) * trials];
        let mean = cell.iter().sum::<f64>() / trials as f64;
        let var = if trials > 1 {
            cell.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
        } else {
            0.0
        };
        mean_risk.push(mean);
        std_risk.push(var.sqrt());
    }
    let grid: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let (slope, intercept) = log_log_fit(&grid, &mean_risk, &mut warnings);
    Ok(ScalingResult { grid, mean_risk, std_risk, trials, slope, intercept, warnings })
}

// ─── assumption diagnostics ───

/// Empirical proxies for the moment and spectrum conditions behind the risk
/// bounds. All quantities are maxima or minimal constants measured on one
/// dataset; they falsify a condition when wildly large but certify nothing.
///
/// Whitened norms use the inverse square root of the uncentered second
/// moment on its numeric range, divided by the square root of the ambient
/// dimension. Ranks of the feature / surrogate / gap moments share one
/// absolute eigenvalue cutoff tied to the largest of the three spectra, so a
/// numerically vanished gap reports rank zero instead of resurrecting
/// roundoff directions.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionDiagnostics {
    /// Largest whitened label-residual norm per sqrt ambient dimension.
    pub sigma_hat: f64,
    /// Largest whitened surrogate / gap feature norm per sqrt dimension.
    pub rho_hat: f64,
    /// Largest whitened-surrogate times readout-residual product per
    /// `sqrt(p + s)`.
    pub b_tilde_hat: f64,
    /// Gap analog of `b_tilde_hat`, per `sqrt(d2)`; zero when the gap
    /// vanishes.
    pub b_bar_hat: f64,
    /// Minimal spread constant: `lmax(surrogate - base) * d2 / |trace|`.
    pub c1_hat: f64,
    /// Minimal spread constant of the gap: `lmax * d2 / trace`.
    pub c2_hat: f64,
    pub a_tilde_hat: f64,
    pub a_bar_hat: f64,
    pub rank_features: usize,
    pub rank_surrogate: usize,
    pub rank_gap: usize,
}

/// `V diag(1/sqrt(l)) V^T` over eigenvalues above `cut`, plus the count kept.
fn pinv_sqrt_with(m: &Matrix, cut: f64) -> Result<(Matrix, usize)> {
    let (summary, vecs) = linalg::eig_sym(m)?;
    let d = m.rows();
    let mut out = Matrix::zeros(d, d);
    let mut rank = 0;
    for (j, &l) in summary.eigenvalues.iter().enumerate() {
        if l > cut && l > 0.0 {
            out.add_outer(&vecs.col(j), 1.0 / l.sqrt());
            rank += 1;
        }
    }
    Ok((out, rank))
}

fn largest_eigenvalue(summary: &SpectralSummary) -> f64 {
    summary.eigenvalues.first().copied().unwrap_or(0.0).max(0.0)
}

/// Measures all moment / spectrum proxies on one dataset. `beta_star` is the
/// minimizing readout whose residual `bayes_i - beta_star(psi_i)` enters the
/// cross-moment bounds; pass the fit from [`crate::matching::min_approx_error`].
pub fn assumption_diagnostics(
    dataset: &Dataset,
    c_tilde: &Matrix,
    estimate: &EpsilonEstimate,
    beta_star: &LinearPredictor,
) -> Result<AssumptionDiagnostics> {
    let (surrogate, gap) = surrogate_rows(dataset, c_tilde, estimate)?;
    let (n, d2, p) = (dataset.n(), dataset.d2(), dataset.p());

    let moment = uncentered_moment(&dataset.psi_star);
    let moment_surrogate = uncentered_moment(&surrogate);
    let moment_gap = uncentered_moment(&gap);

    let (feat_summary, _) = linalg::eig_sym(&moment)?;
    let (sur_summary, _) = linalg::eig_sym(&moment_surrogate)?;
    let (gap_summary, _) = linalg::eig_sym(&moment_gap)?;
    let scale = largest_eigenvalue(&feat_summary)
        .max(largest_eigenvalue(&sur_summary))
        .max(largest_eigenvalue(&gap_summary));
    let shared_cut = tol::RANK_REL * scale;
    let count_rank = |summary: &SpectralSummary| {
        summary.eigenvalues.iter().filter(|&&l| l > shared_cut && l > 0.0).count()
    };

    // Label residual: conditionally mean-zero, so its uncentered moment is
    // its covariance.
    let noise = dataset.y.sub(&dataset.bayes);
    let noise_moment = uncentered_moment(&noise);
    let (noise_summary, _) = linalg::eig_sym(&noise_moment)?;
    let (noise_white, _) =
        pinv_sqrt_with(&noise_moment, tol::RANK_REL * largest_eigenvalue(&noise_summary))?;
    let (sur_white, _) = pinv_sqrt_with(&moment_surrogate, shared_cut)?;
    let (gap_white, _) = pinv_sqrt_with(&moment_gap, shared_cut)?;

    let readout_residual = dataset.bayes.sub(&beta_star.predict_rows(&dataset.psi_star)?);
    let mut sigma_hat = 0.0_f64;
    let mut max_sur = 0.0_f64;
    let mut max_gap = 0.0_f64;
    let mut b_tilde_hat = 0.0_f64;
    let mut b_bar_hat = 0.0_f64;
    for i in 0..n {
        let zn = vnorm(&noise_white.mat_vec(noise.row(i)));
        let zs = vnorm(&sur_white.mat_vec(surrogate.row(i)));
        let zg = vnorm(&gap_white.mat_vec(gap.row(i)));
        let zr = vnorm(readout_residual.row(i));
        sigma_hat = sigma_hat.max(zn);
        max_sur = max_sur.max(zs);
        max_gap = max_gap.max(zg);
        b_tilde_hat = b_tilde_hat.max(zs * zr);
        b_bar_hat = b_bar_hat.max(zg * zr);
    }
    sigma_hat /= (p as f64).sqrt();
    let rho_hat = max_sur.max(max_gap) / (d2 as f64).sqrt();
    b_tilde_hat /= ((p + estimate.s) as f64).sqrt();
    b_bar_hat /= (d2 as f64).sqrt();

    // Spread constants: the smallest c with lmax <= c * |trace| / d2.
    let diff = moment_surrogate.sub(&moment);
    let (diff_summary, _) = linalg::eig_sym(&diff)?;
    let diff_lmax = diff_summary.eigenvalues.first().copied().unwrap_or(0.0);
    let c1_hat = if diff_lmax <= NEGLIGIBLE_REL * scale {
        0.0
    } else if diff_summary.trace.abs() <= NEGLIGIBLE_REL * scale * d2 as f64 {
        f64::INFINITY
    } else {
        diff_lmax * d2 as f64 / diff_summary.trace.abs()
    };
    let gap_lmax = largest_eigenvalue(&gap_summary);
    let c2_hat = if gap_lmax <= NEGLIGIBLE_REL * scale {
        0.0
    } else {
        gap_lmax * d2 as f64 / gap_summary.trace.max(f64::MIN_POSITIVE)
    };

    let constants = domination_constants(&moment, &moment_surrogate, &moment_gap, estimate.value)?;

    Ok(AssumptionDiagnostics {
        sigma_hat,
        rho_hat,
        b_tilde_hat,
        b_bar_hat,
        c1_hat,
        c2_hat,
        a_tilde_hat: constants.a_tilde,
        a_bar_hat: constants.a_bar,
        rank_features: count_rank(&feat_summary),
        rank_surrogate: count_rank(&sur_summary),
        rank_gap: count_rank(&gap_summary),
    })
}

// ─── tests ───
