//! Shared random model generators and distribution helpers for the
//! integration suites. Each generator is fully determined by its seed.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rssl_core::genmodel::features::{BasisExpansion, ScalarFeature};
use rssl_core::genmodel::{
    make_matching_model, EncodingFunction, GenerativeModel, LabelRule, X1Law,
};
use rssl_core::linalg::Matrix;

// ─── chi-squared helpers ───

/// `P(chi2_dof <= x)` for even `dof`, via the exact partial exponential sum.
pub fn chi2_cdf_even(dof: usize, x: f64) -> f64 {
    assert!(dof >= 2 && dof % 2 == 0, "closed form needs even dof");
    if x <= 0.0 {
        return 0.0;
    }
    let half = x / 2.0;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for j in 1..(dof / 2) {
        term *= half / j as f64;
        sum += term;
    }
    1.0 - (-half).exp() * sum
}

/// Inverse of [`chi2_cdf_even`] by bisection.
pub fn chi2_quantile_even(dof: usize, prob: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while chi2_cdf_even(dof, hi) < prob {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_even(dof, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radius thresholds splitting a standard normal input into `p + 1` classes
/// of equal probability; `||X||^2` is chi-squared with `d1` degrees of
/// freedom, so the thresholds are square roots of its quantiles.
pub fn balanced_norm_thresholds(d1: usize, p: usize) -> Vec<f64> {
    (1..=p).map(|j| chi2_quantile_even(d1, j as f64 / (p + 1) as f64).sqrt()).collect()
}

// ─── random model building blocks ───

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    (rng.gen::<f64>() * 2.0 - 1.0) * half_width
}

pub fn random_basis_expansion(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    d1: usize,
    terms: usize,
) -> BasisExpansion {
    let mut list = Vec::with_capacity(terms);
    for _ in 0..terms {
        let weights: Vec<f64> = (0..d1).map(|_| uniform(rng, 1.0)).collect();
        let coef = Matrix::from_fn(rows, cols, |_, _| uniform(rng, 1.0));
        let feature = match rng.gen_range(0..3u8) {
            0 => ScalarFeature::poly(2, weights, uniform(rng, 0.5)),
            1 => ScalarFeature::sin(weights, rng.gen::<f64>()),
            _ => ScalarFeature::cos(weights, rng.gen::<f64>()),
        };
        list.push((feature, coef));
    }
    BasisExpansion::new(rows, cols, list).expect("shapes fixed by construction")
}

fn random_label_rule(rng: &mut ChaCha8Rng, d1: usize, p: usize) -> LabelRule {
    if rng.gen_bool(0.5) {
        LabelRule::NormThreshold { thresholds: balanced_norm_thresholds(d1, p) }
    } else {
        let weights = Matrix::from_fn(p + 1, d1, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            z / (d1 as f64).sqrt()
        });
        LabelRule::SoftmaxPosterior { weights, temperature: 1.0 }
    }
}

// ─── model families for the acceptance sweeps ───

/// Mixing-witness model: readout of the pretext optimum recovers the
/// posterior exactly by construction. `d2 <= 30`, `p <= 4`.
pub fn random_matching_model(seed: u64) -> GenerativeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d1 = [4usize, 6, 8][rng.gen_range(0..3)];
    let p = rng.gen_range(1..=4usize);
    let d2 = rng.gen_range((p + 2)..=30usize);
    let a = loop {
        let cand = Matrix::from_fn(d2, d2, |_, _| uniform(&mut rng, 1.0));
        let (_, sigma, _) = rssl_core::linalg::svd(&cand).expect("finite entries");
        let smin = sigma.last().copied().unwrap_or(0.0);
        if smin > 0.0 && sigma[0] / smin < 1e6 {
            break cand;
        }
    };
    let r = random_basis_expansion(&mut rng, d2 - p, p, d1, 3);
    let label_rule = random_label_rule(&mut rng, d1, p);
    let noise_std = 0.5 + 0.5 * rng.gen::<f64>();
    make_matching_model(d1, a, r, label_rule, noise_std).expect("witness family is valid")
}

/// Constant encoding whose matrix has column rank `p - 1`: one posterior
/// direction is unrecoverable from the pretext optimum, so the minimal
/// readout error stays bounded away from zero.
pub fn random_rank_deficient_constant(seed: u64) -> GenerativeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d1 = [4usize, 6, 8][rng.gen_range(0..3)];
    let p = rng.gen_range(2..=4usize);
    let d2 = rng.gen_range((p + 2)..=20usize);
    let mut c0 = Matrix::zeros(d2, p);
    for _ in 0..(p - 1) {
        let u: Vec<f64> = (0..d2).map(|_| uniform(&mut rng, 1.0)).collect();
        let v: Vec<f64> = (0..p).map(|_| uniform(&mut rng, 1.0)).collect();
        for i in 0..d2 {
            for j in 0..p {
                c0[(i, j)] += u[i] * v[j];
            }
        }
    }
    // Balanced norm-threshold labels keep the posterior covariance bounded
    // below in every direction, so the unrecoverable component is always
    // macroscopic. A soft posterior could concentrate its variation inside
    // the encoding's column space and mask the deficiency.
    let label_rule = LabelRule::NormThreshold { thresholds: balanced_norm_thresholds(d1, p) };
    let noise_std = 0.5 + 0.5 * rng.gen::<f64>();
    GenerativeModel::new(
        d1,
        d2,
        p,
        X1Law::StandardNormal,
        label_rule,
        EncodingFunction::Constant { c0 },
        noise_std,
    )
    .expect("constant family is valid")
}

/// Low-rank-plus-constant encoding with a known generating rank; returns the
/// model and that rank.
pub fn random_lowrank_model(seed: u64) -> (GenerativeModel, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d1 = [4usize, 6, 8][rng.gen_range(0..3)];
    let p = rng.gen_range(1..=3usize);
    let d2 = rng.gen_range((p + 4).max(6)..=16usize);
    let s_true = rng.gen_range(1..=(d2 - p).min(5));
    let a = Matrix::from_fn(d2, p, |_, _| uniform(&mut rng, 2.0));
    let b = Matrix::from_fn(d2, s_true, |_, _| uniform(&mut rng, 2.0));
    let g = random_basis_expansion(&mut rng, s_true, p, d1, s_true);
    let label_rule = random_label_rule(&mut rng, d1, p);
    let model = GenerativeModel::new(
        d1,
        d2,
        p,
        X1Law::StandardNormal,
        label_rule,
        EncodingFunction::LowRankFactor {
            a,
            b,
            g: rssl_core::genmodel::features::MatrixMap::Expansion(g),
        },
        0.7,
    )
    .expect("low-rank family is valid");
    (model, s_true)
}

/// Random orthogonal matrix from Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut q = Matrix::zeros(n, n);
    let mut built = 0;
    while built < n {
        let mut col: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for j in 0..built {
                let proj: f64 = (0..n).map(|r| col[r] * q[(r, j)]).sum();
                for r in 0..n {
                    col[r] -= proj * q[(r, j)];
                }
            }
        }
        let norm = rssl_core::linalg::vnorm(&col);
        if norm < 1e-6 {
            continue;
        }
        for r in 0..n {
            q[(r, built)] = col[r] / norm;
        }
        built += 1;
    }
    q
}

// ─── small statistics helpers ───

/// Standard error of a difference of two independent means.
pub fn pooled_se(std_a: f64, n_a: usize, std_b: f64, n_b: usize) -> f64 {
    (std_a * std_a / n_a as f64 + std_b * std_b / n_b as f64).sqrt()
}
