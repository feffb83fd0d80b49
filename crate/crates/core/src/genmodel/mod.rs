//! The data-generating mechanism `X2 = C(X1) Y + N`.
//!
//! A model couples an input law for `X1`, a label rule giving the class
//! distribution conditional on `X1`, an encoding function `C` mapping inputs
//! to `d2 x p` matrices, and isotropic Gaussian noise. Labels use a one-hot
//! encoding over `p+1` classes with the highest-index class mapped to the
//! zero vector.
//!
//! The closed-form oracles `bayes_posterior` (the conditional class
//! probabilities, restricted to the first `p` coordinates) and
//! `pretext_oracle` (`C(x) E[Y|X1=x]`, the population optimum of the pretext
//! regression) are what the rest of the crate builds on.

pub mod features;

mod dataset;

pub use dataset::Dataset;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, vnorm, Matrix};
use crate::{Error, Result};
use features::{BasisExpansion, MatrixMap};

/// Internal seed for the constructor's posterior-covariance rank check.
const RANK_CHECK_SEED: u64 = 0x7ac7_0e11;
const RANK_CHECK_DRAWS: usize = 10_000;
const RANK_CHECK_MIN_EIG: f64 = 1e-6;
/// Mixing matrices must satisfy cond(A) < this.
const MAX_CONDITION: f64 = 1e8;

// ─── labels ───

/// One-hot encoding over `p + 1` classes; the last class encodes to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEncoding {
    pub p: usize,
}

impl LabelEncoding {
    pub fn class_count(&self) -> usize {
        self.p + 1
    }

    /// `class` is 1-based: classes `1..=p` map to basis vectors `e_class`,
    /// class `p+1` maps to the zero vector.
    pub fn encode(&self, class: usize) -> Result<Vec<f64>> {
        if class == 0 || class > self.p + 1 {
            return Err(Error::InvalidArgument(format!(
                "class {class} outside 1..={}",
                self.p + 1
            )));
        }
        let mut v = vec![0.0; self.p];
        if class <= self.p {
            v[class - 1] = 1.0;
        }
        Ok(v)
    }

    /// Inverse of `encode` for rows produced by this crate: the index of the
    /// entry equal to 1, or `p+1` when the row is all zeros.
    pub fn decode(&self, y_row: &[f64]) -> usize {
        y_row.iter().position(|&v| v == 1.0).map_or(self.p + 1, |j| j + 1)
    }
}

/// Conditional law of the class given `X1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LabelRule {
    /// Deterministic: class `j` when `|x1|` falls in the `j`-th of the
    /// `p + 1` intervals cut by the strictly ascending thresholds.
    NormThreshold { thresholds: Vec<f64> },
    /// Stochastic: `P(class = j | x1) = softmax(W x1 / temperature)_j`
    /// over `p + 1` classes.
    SoftmaxPosterior { weights: Matrix, temperature: f64 },
}

impl LabelRule {
    /// Probabilities over all `p + 1` classes.
    fn class_probs(&self, x1: &[f64], p: usize) -> Vec<f64> {
        match self {
            LabelRule::NormThreshold { thresholds } => {
                let r = vnorm(x1);
                let class = thresholds.iter().filter(|&&t| r >= t).count() + 1;
                let mut probs = vec![0.0; p + 1];
                probs[class - 1] = 1.0;
                probs
            }
            LabelRule::SoftmaxPosterior { weights, temperature } => {
                let logits: Vec<f64> = (0..weights.rows())
                    .map(|i| linalg::vdot(weights.row(i), x1) / temperature)
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                exps.iter().map(|e| e / z).collect()
            }
        }
    }

    fn validate(&self, d1: usize, p: usize) -> Result<()> {
        match self {
            LabelRule::NormThreshold { thresholds } => {
                if thresholds.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "{} thresholds for p = {p}",
                        thresholds.len()
                    )));
                }
                if !thresholds.iter().all(|t| t.is_finite()) {
                    return Err(Error::NonFinite("thresholds".into()));
                }
                if thresholds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument("thresholds not strictly ascending".into()));
                }
                Ok(())
            }
            LabelRule::SoftmaxPosterior { weights, temperature } => {
                if weights.rows() != p + 1 || weights.cols() != d1 {
                    return Err(Error::DimensionMismatch(format!(
                        "softmax weights {}x{}, expected {}x{d1}",
                        weights.rows(),
                        weights.cols(),
                        p + 1
                    )));
                }
                if !weights.is_finite() {
                    return Err(Error::NonFinite("softmax weights".into()));
                }
                if !temperature.is_finite() || *temperature <= 0.0 {
                    return Err(Error::InvalidArgument(format!("temperature {temperature}")));
                }
                Ok(())
            }
        }
    }
}

// ─── input law ───

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum X1Law {
    StandardNormal,
    Gaussian { mean: Vec<f64>, covariance: Matrix },
}

impl X1Law {
    fn validate(&self, d1: usize) -> Result<()> {
        match self {
            X1Law::StandardNormal => Ok(()),
            X1Law::Gaussian { mean, covariance } => {
                if mean.len() != d1 || covariance.rows() != d1 || covariance.cols() != d1 {
                    return Err(Error::DimensionMismatch("Gaussian law shape".into()));
                }
                if !mean.iter().all(|m| m.is_finite()) || !covariance.is_finite() {
                    return Err(Error::NonFinite("Gaussian law parameters".into()));
                }
                Ok(())
            }
        }
    }

    /// Square factor `L` with `L Lᵀ` equal to the covariance, for sampling.
    fn factor(&self, d1: usize) -> Result<Option<(Vec<f64>, Matrix)>> {
        match self {
            X1Law::StandardNormal => Ok(None),
            X1Law::Gaussian { mean, covariance } => {
                let (summary, v) = linalg::eig_sym(covariance)?;
                let max = summary.eigenvalues.first().copied().unwrap_or(0.0);
                let mut l = Matrix::zeros(d1, d1);
                for j in 0..d1 {
                    let lam = summary.eigenvalues[j];
                    if lam < -1e-10 * max.max(1.0) {
                        return Err(Error::InvalidArgument(
                            "Gaussian covariance is not positive semidefinite".into(),
                        ));
                    }
                    let s = lam.max(0.0).sqrt();
                    for i in 0..d1 {
                        l[(i, j)] = v[(i, j)] * s;
                    }
                }
                Ok(Some((mean.clone(), l)))
            }
        }
    }
}

// ─── encoding functions ───

/// The matrix-valued map `C` with `E[X2 | X1, Y] = C(X1) Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncodingFunction {
    /// `C(x) = C0` for all `x`.
    Constant { c0: Matrix },
    /// `C(x) = A1 + A2 a(x) 1ᵀ` with `a` mean-zero under the input law
    /// (the caller's responsibility; the closed-form mean relies on it).
    PartiallyLinear { a1: Matrix, a2: Matrix, a: BasisExpansion },
    /// `C(x) = A + B g(x)`.
    LowRankFactor { a: Matrix, b: Matrix, g: MatrixMap },
    /// `C(x) = A [I_p; R(x)]` with invertible `A`: a linear map of the
    /// pretext optimum recovers the posterior exactly by construction.
    MatchingWitness { a: Matrix, r: BasisExpansion },
    /// Univariate polynomial with matrix coefficients,
    /// `C(x) = sum_k coefficients[k] x^k`; requires `d1 == 1`.
    SmoothScalar { coefficients: Vec<Matrix> },
}

impl EncodingFunction {
    pub fn eval(&self, x: &[f64]) -> Matrix {
        match self {
            EncodingFunction::Constant { c0 } => c0.clone(),
            EncodingFunction::PartiallyLinear { a1, a2, a } => {
                let col = a2.dot(&a.eval(x)); // d2 x 1
                let p = a1.cols();
                let mut out = a1.clone();
                for i in 0..out.rows() {
                    let add = col[(i, 0)];
                    for j in 0..p {
                        out[(i, j)] += add;
                    }
                }
                out
            }
            EncodingFunction::LowRankFactor { a, b, g } => a.add(&b.dot(&g.eval(x))),
            EncodingFunction::MatchingWitness { a, r } => {
                let rx = r.eval(x);
                let stacked = Matrix::vstack(&[&Matrix::identity(rx.cols()), &rx])
                    .expect("shapes fixed by construction");
                a.dot(&stacked)
            }
            EncodingFunction::SmoothScalar { coefficients } => {
                // Horner evaluation in the scalar input.
                let t = x[0];
                let mut out = coefficients.last().expect("validated nonempty").clone();
                for c in coefficients.iter().rev().skip(1) {
                    out = out.scale(t).add(c);
                }
                out
            }
        }
    }

    fn validate(&self, d1: usize, d2: usize, p: usize) -> Result<()> {
        let shape_err = |what: &str, m: &Matrix, r: usize, c: usize| {
            Err(Error::DimensionMismatch(format!(
                "{what} is {}x{}, expected {r}x{c}",
                m.rows(),
                m.cols()
            )))
        };
        match self {
            EncodingFunction::Constant { c0 } => {
                if c0.rows() != d2 || c0.cols() != p {
                    return shape_err("constant encoding", c0, d2, p);
                }
                if !c0.is_finite() {
                    return Err(Error::NonFinite("constant encoding".into()));
                }
            }
            EncodingFunction::PartiallyLinear { a1, a2, a } => {
                if a1.rows() != d2 || a1.cols() != p {
                    return shape_err("A1", a1, d2, p);
                }
                if a2.rows() != d2 || a2.cols() != a.rows {
                    return shape_err("A2", a2, d2, a.rows);
                }
                if a.cols != 1 {
                    return Err(Error::DimensionMismatch("a(x) must be a column map".into()));
                }
                if !a1.is_finite() || !a2.is_finite() {
                    return Err(Error::NonFinite("partially linear encoding".into()));
                }
                a.validate(d1)?;
            }
            EncodingFunction::LowRankFactor { a, b, g } => {
                let (s, gp) = g.shape();
                if a.rows() != d2 || a.cols() != p {
                    return shape_err("A", a, d2, p);
                }
                if b.rows() != d2 || b.cols() != s {
                    return shape_err("B", b, d2, s);
                }
                if gp != p {
                    return Err(Error::DimensionMismatch(format!(
                        "factor map is {s}x{gp}, expected {s}x{p}"
                    )));
                }
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("low-rank encoding".into()));
                }
                g.validate(d1)?;
            }
            EncodingFunction::MatchingWitness { a, r } => {
                if a.rows() != d2 || a.cols() != d2 {
                    return shape_err("mixing matrix", a, d2, d2);
                }
                if r.rows != d2 - p || r.cols != p {
                    return Err(Error::DimensionMismatch(format!(
                        "redundancy block is {}x{}, expected {}x{p}",
                        r.rows,
                        r.cols,
                        d2 - p
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::NonFinite("mixing matrix".into()));
                }
                r.validate(d1)?;
                let (_, sigma, _) = linalg::svd(a)?;
                let smax = sigma.first().copied().unwrap_or(0.0);
                let smin = sigma.last().copied().unwrap_or(0.0);
                if smin <= 0.0 || smax / smin >= MAX_CONDITION {
                    return Err(Error::InvalidArgument(format!(
                        "mixing matrix condition number {:.2e} exceeds {MAX_CONDITION:.0e}",
                        if smin > 0.0 { smax / smin } else { f64::INFINITY }
                    )));
                }
            }
            EncodingFunction::SmoothScalar { coefficients } => {
                if d1 != 1 {
                    return Err(Error::InvalidArgument(
                        "scalar polynomial encoding needs d1 = 1".into(),
                    ));
                }
                if coefficients.is_empty() {
                    return Err(Error::InvalidArgument("empty coefficient table".into()));
                }
                for c in coefficients {
                    if c.rows() != d2 || c.cols() != p {
                        return shape_err("coefficient", c, d2, p);
                    }
                    if !c.is_finite() {
                        return Err(Error::NonFinite("coefficient table".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

// ─── the model ───

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub d1: usize,
    pub d2: usize,
    pub p: usize,
    pub x1_law: X1Law,
    pub label_rule: LabelRule,
    pub encoding: EncodingFunction,
    /// Noise is `N(0, noise_std^2 I_{d2})`, independent of `(X1, Y)`.
    pub noise_std: f64,
}

/// Monte-Carlo mean encoding with per-entry standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanEncoding {
    pub mean: Matrix,
    /// Zero when the mean is available in closed form.
    pub std_error: Matrix,
    pub closed_form: bool,
    pub n_mc: usize,
}

impl GenerativeModel {
    /// Validates shapes and runs the empirical posterior-covariance rank
    /// check; construction fails hard if `Cov(E[Y|X1])` is near-singular.
    pub fn new(
        d1: usize,
        d2: usize,
        p: usize,
        x1_law: X1Law,
        label_rule: LabelRule,
        encoding: EncodingFunction,
        noise_std: f64,
    ) -> Result<Self> {
        let model = GenerativeModel { d1, d2, p, x1_law, label_rule, encoding, noise_std };
        model.validate()?;
        model.check_posterior_rank()?;
        Ok(model)
    }

    /// Shape and range checks only (no sampling).
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.p == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        if self.p >= self.d2 {
            return Err(Error::InvalidArgument(format!(
                "p = {} must be smaller than d2 = {}",
                self.p, self.d2
            )));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(Error::InvalidArgument(format!("noise_std {}", self.noise_std)));
        }
        self.x1_law.validate(self.d1)?;
        self.label_rule.validate(self.d1, self.p)?;
        self.encoding.validate(self.d1, self.d2, self.p)
    }

    pub fn label_encoding(&self) -> LabelEncoding {
        LabelEncoding { p: self.p }
    }

    /// Empirical full-rank check of `Cov(E[Y|X1])` with a fixed internal
    /// seed; the smallest eigenvalue must exceed `1e-6`.
    pub fn check_posterior_rank(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(RANK_CHECK_SEED);
        let factor = self.x1_law.factor(self.d1)?;
        let mut mean = vec![0.0; self.p];
        let mut second = Matrix::zeros(self.p, self.p);
        let mut x1 = vec![0.0; self.d1];
        for _ in 0..RANK_CHECK_DRAWS {
            self.draw_x1(&mut rng, &factor, &mut x1);
            let b = self.posterior_at(&x1);
            for (m, &bi) in mean.iter_mut().zip(&b) {
                *m += bi;
            }
            second.add_outer(&b, 1.0);
        }
        let inv = 1.0 / RANK_CHECK_DRAWS as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        let mut cov = second.scale(inv);
        cov.add_outer(&mean, -1.0);
        let (summary, _) = linalg::eig_sym(&cov)?;
        let min_eig = summary.eigenvalues.last().copied().unwrap_or(0.0);
        if min_eig <= RANK_CHECK_MIN_EIG {
            return Err(Error::DegenerateModel(format!(
                "Cov(E[Y|X1]) nearly singular: smallest eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    fn draw_x1(
        &self,
        rng: &mut ChaCha8Rng,
        factor: &Option<(Vec<f64>, Matrix)>,
        out: &mut [f64],
    ) {
        match factor {
            None => {
                for o in out.iter_mut() {
                    *o = rng.sample(StandardNormal);
                }
            }
            Some((mean, l)) => {
                let z: Vec<f64> = (0..self.d1).map(|_| rng.sample(StandardNormal)).collect();
                let lz = l.mat_vec(&z);
                for (o, (m, v)) in out.iter_mut().zip(mean.iter().zip(&lz)) {
                    *o = m + v;
                }
            }
        }
    }

    fn check_x1(&self, x1: &[f64]) -> Result<()> {
        if x1.len() != self.d1 {
            return Err(Error::DimensionMismatch(format!(
                "input length {} but d1 = {}",
                x1.len(),
                self.d1
            )));
        }
        Ok(())
    }

    /// Posterior restricted to the first `p` classes (no input check).
    fn posterior_at(&self, x1: &[f64]) -> Vec<f64> {
        let probs = self.label_rule.class_probs(x1, self.p);
        probs[..self.p].to_vec()
    }

    /// `E[Y | X1 = x1]`: entries in `[0, 1]` summing to at most 1.
    pub fn bayes_posterior(&self, x1: &[f64]) -> Result<Vec<f64>> {
        self.check_x1(x1)?;
        Ok(self.posterior_at(x1))
    }

    /// `C(x1)`, the encoding evaluated at one input.
    pub fn encoding_at(&self, x1: &[f64]) -> Result<Matrix> {
        self.check_x1(x1)?;
        let c = self.encoding.eval(x1);
        if !c.is_finite() {
            return Err(Error::NonFinite("encoding value".into()));
        }
        Ok(c)
    }

    /// `E[X2 | X1 = x1] = C(x1) E[Y | X1 = x1]`, the pretext optimum.
    pub fn pretext_oracle(&self, x1: &[f64]) -> Result<Vec<f64>> {
        let c = self.encoding_at(x1)?;
        Ok(c.mat_vec(&self.posterior_at(x1)))
    }

    /// `E[C(X1)]`, exact for the constant and partially linear variants and
    /// a seeded Monte-Carlo average otherwise.
    pub fn mean_encoding(&self, n_mc: usize, seed: u64) -> Result<MeanEncoding> {
        match &self.encoding {
            EncodingFunction::Constant { c0 } => Ok(MeanEncoding {
                mean: c0.clone(),
                std_error: Matrix::zeros(self.d2, self.p),
                closed_form: true,
                n_mc: 0,
            }),
            // E[a(X1)] = 0 makes the mean collapse to A1.
            EncodingFunction::PartiallyLinear { a1, .. } => Ok(MeanEncoding {
                mean: a1.clone(),
                std_error: Matrix::zeros(self.d2, self.p),
                closed_form: true,
                n_mc: 0,
            }),
            _ => {
                if n_mc == 0 {
                    return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let factor = self.x1_law.factor(self.d1)?;
                let mut x1 = vec![0.0; self.d1];
                let mut sum = Matrix::zeros(self.d2, self.p);
                let mut sumsq = Matrix::zeros(self.d2, self.p);
                for _ in 0..n_mc {
                    self.draw_x1(&mut rng, &factor, &mut x1);
                    let c = self.encoding.eval(&x1);
                    for i in 0..self.d2 {
                        for j in 0..self.p {
                            sum[(i, j)] += c[(i, j)];
                            sumsq[(i, j)] += c[(i, j)] * c[(i, j)];
                        }
                    }
                }
                let inv = 1.0 / n_mc as f64;
                let mean = sum.scale(inv);
                let std_error = Matrix::from_fn(self.d2, self.p, |i, j| {
                    let var = (sumsq[(i, j)] * inv - mean[(i, j)] * mean[(i, j)]).max(0.0);
                    (var * inv).sqrt()
                });
                Ok(MeanEncoding { mean, std_error, closed_form: false, n_mc })
            }
        }
    }

    /// Draws `n` i.i.d. rows. Deterministic given the seed; per row the
    /// generator is consumed in the fixed order
    /// (x1 draws, label draw if stochastic, noise draws).
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        self.validate()?;
        let enc = self.label_encoding();
        let factor = self.x1_law.factor(self.d1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut x1 = Matrix::zeros(n, self.d1);
        let mut x2 = Matrix::zeros(n, self.d2);
        let mut y = Matrix::zeros(n, self.p);
        let mut bayes = Matrix::zeros(n, self.p);
        let mut psi = Matrix::zeros(n, self.d2);

        let mut row = vec![0.0; self.d1];
        for i in 0..n {
            self.draw_x1(&mut rng, &factor, &mut row);
            x1.row_mut(i).copy_from_slice(&row);

            let class = self.draw_class(&row, &mut rng);
            let y_row = enc.encode(class)?;
            y.row_mut(i).copy_from_slice(&y_row);

            let c = self.encoding.eval(&row);
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("encoding at sampled row {i}")));
            }
            let b = self.posterior_at(&row);
            bayes.row_mut(i).copy_from_slice(&b);
            psi.row_mut(i).copy_from_slice(&c.mat_vec(&b));

            let mean_x2 = c.mat_vec(&y_row);
            let out = x2.row_mut(i);
            for (k, m) in mean_x2.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                out[k] = m + self.noise_std * z;
            }
        }
        let ds = Dataset { x1, x2, y, bayes, psi_star: psi, seed };
        ds.check_consistent()?;
        Ok(ds)
    }

    fn draw_class(&self, x1: &[f64], rng: &mut ChaCha8Rng) -> usize {
        match &self.label_rule {
            LabelRule::NormThreshold { thresholds } => {
                let r = vnorm(x1);
                thresholds.iter().filter(|&&t| r >= t).count() + 1
            }
            LabelRule::SoftmaxPosterior { .. } => {
                let probs = self.label_rule.class_probs(x1, self.p);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (j, pr) in probs.iter().enumerate() {
                    acc += pr;
                    if u < acc {
                        return j + 1;
                    }
                }
                self.p + 1
            }
        }
    }

    /// Draws `n` samples of `X2` conditional on `X1 = x1` (labels drawn from
    /// the rule, then noise). Used by conditional Monte-Carlo checks.
    pub fn sample_x2_at(&self, x1: &[f64], n: usize, seed: u64) -> Result<Matrix> {
        self.check_x1(x1)?;
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one draw".into()));
        }
        let enc = self.label_encoding();
        let c = self.encoding_at(x1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Matrix::zeros(n, self.d2);
        for i in 0..n {
            let class = self.draw_class(x1, &mut rng);
            let mean = c.mat_vec(&enc.encode(class)?);
            let row = out.row_mut(i);
            for (k, m) in mean.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                row[k] = m + self.noise_std * z;
            }
        }
        Ok(out)
    }

    // ─── serialization ───

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and fully validates (including the posterior rank check).
    pub fn from_json(text: &str) -> Result<Self> {
        let model: GenerativeModel = serde_json::from_str(text)?;
        model.validate()?;
        model.check_posterior_rank()?;
        Ok(model)
    }
}

// ─── builders ───

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() * 2.0 * half_width - half_width)
}

/// The synthetic benchmark family: `X2 = (A + B g(X1)) Y + N` with
/// `A, B` entries i.i.d. Unif[-2, 2], the max/min sinusoid factor map
/// `g: R^{d1} -> R^{s_true x p}`, standard normal inputs, unit noise and
/// deterministic labels thresholded at norms (2.5, 3.5).
///
/// The threshold pair hard-codes `p = 2`; other `p` are rejected.
pub fn make_benchmark_model(
    d1: usize,
    d2: usize,
    p: usize,
    s_true: usize,
    seed: u64,
) -> Result<GenerativeModel> {
    if p != 2 {
        return Err(Error::InvalidArgument(format!(
            "benchmark thresholds (2.5, 3.5) define p = 2, got p = {p}"
        )));
    }
    if s_true == 0 || s_true > d2 {
        return Err(Error::InvalidArgument(format!("s_true = {s_true} outside 1..={d2}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = uniform_matrix(&mut rng, d2, p, 2.0);
    let b = uniform_matrix(&mut rng, d2, s_true, 2.0);
    GenerativeModel::new(
        d1,
        d2,
        p,
        X1Law::StandardNormal,
        LabelRule::NormThreshold { thresholds: vec![2.5, 3.5] },
        EncodingFunction::LowRankFactor {
            a,
            b,
            g: MatrixMap::MaxMinSinusoid { rows: s_true, cols: p },
        },
        1.0,
    )
}

/// Benchmark-style low-rank encoding with stochastic softmax labels, so the
/// posterior is smooth and the label residual has positive variance. Used by
/// risk-rate experiments that need a nonzero noise floor.
pub fn make_softmax_lowrank_model(
    d1: usize,
    d2: usize,
    p: usize,
    s_true: usize,
    seed: u64,
) -> Result<GenerativeModel> {
    if s_true == 0 || s_true > d2 {
        return Err(Error::InvalidArgument(format!("s_true = {s_true} outside 1..={d2}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = uniform_matrix(&mut rng, d2, p, 2.0);
    let b = uniform_matrix(&mut rng, d2, s_true, 2.0);
    let scale = 1.0 / (d1 as f64).sqrt();
    let w = Matrix::from_fn(p + 1, d1, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    });
    GenerativeModel::new(
        d1,
        d2,
        p,
        X1Law::StandardNormal,
        LabelRule::SoftmaxPosterior { weights: w, temperature: 1.0 },
        EncodingFunction::LowRankFactor {
            a,
            b,
            g: MatrixMap::MaxMinSinusoid { rows: s_true, cols: p },
        },
        1.0,
    )
}

/// Builds a model whose encoding is `C(x) = A [I_p; R(x)]` with invertible
/// `A`, so exact matching holds by construction.
pub fn make_matching_model(
    d1: usize,
    a: Matrix,
    r: BasisExpansion,
    label_rule: LabelRule,
    noise_std: f64,
) -> Result<GenerativeModel> {
    let d2 = a.rows();
    let p = r.cols;
    GenerativeModel::new(
        d1,
        d2,
        p,
        X1Law::StandardNormal,
        label_rule,
        EncodingFunction::MatchingWitness { a, r },
        noise_std,
    )
}

// ─── tests ───
