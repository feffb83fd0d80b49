//! Seeded experiment harness comparing SSL pipelines with supervised nets.
//!
//! A sweep varies one knob (labeled sample size, generating rank, or ridge
//! penalty) over repeated trials. Within a cell all configured methods share
//! the same pretext / labeled / test draws, so method comparisons are
//! paired. Cells run concurrently and aggregate in fixed order; every cell
//! is reproducible in isolation from `(master_seed, grid_index,
//! trial_index)` alone via [`run_cell`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::genmodel::{Dataset, GenerativeModel, LabelEncoding};
use crate::linalg::{self, Matrix};
use crate::lowrank::{epsilon_s_spectral, residual_spectrum};
use crate::matching;
use crate::mlp::{self, Loss, MlpConfig};
use crate::regress::{self, RidgeFit};
use crate::seeding::mix_seed;
use crate::theory;
use crate::{Error, Result};

// Shared training protocol for every network in the harness: two hidden
// ReLU layers, plain minibatch SGD.
const HIDDEN_WIDTH: usize = 64;
const NET_LEARNING_RATE: f64 = 1e-3;
const NET_EPOCHS: usize = 10;
const NET_BATCH: usize = 32;

// ─── methods and sweep variables ───

/// Downstream pipeline identity; the serialized names are the stable labels
/// used in config files and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Oracle pretext optimum as features, linear readout.
    #[serde(rename = "SSL_oracle")]
    SslOracle,
    /// Pretext network trained to reconstruct the auxiliary view, then a
    /// linear readout on its outputs.
    #[serde(rename = "SSL_mlp")]
    SslMlp,
    /// Supervised network on the shared view only.
    #[serde(rename = "SL1")]
    Sl1,
    /// Supervised network on both views concatenated.
    #[serde(rename = "SL2")]
    Sl2,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::SslOracle => "SSL_oracle",
            Method::SslMlp => "SSL_mlp",
            Method::Sl1 => "SL1",
            Method::Sl2 => "SL2",
        }
    }

    /// Linear-readout methods report excess risk against the best readout.
    fn has_linear_readout(&self) -> bool {
        matches!(self, Method::SslOracle | Method::SslMlp)
    }
}

/// Which knob the grid varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Labeled training size per cell.
    #[serde(rename = "n")]
    SampleSize,
    /// Rank of the generating low-rank term; rebuilds the model per point.
    #[serde(rename = "s_true")]
    GeneratingRank,
    /// Ridge penalty of the linear readout (overrides `downstream`).
    #[serde(rename = "lambda")]
    Shrinkage,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::SampleSize => "n",
            SweepVariable::GeneratingRank => "s_true",
            SweepVariable::Shrinkage => "lambda",
        }
    }
}

/// Generating model, either by family parameters or fully inline.
///
/// For inline models `redraw_model` has no effect (there is nothing to
/// redraw) and generating-rank sweeps are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    /// Norm-threshold labels with the low-rank sinusoid encoding.
    Benchmark { d1: usize, d2: usize, p: usize, s_true: usize },
    /// Same encoding with stochastic softmax labels.
    SoftmaxBenchmark { d1: usize, d2: usize, p: usize, s_true: usize },
    /// A fully specified generative model.
    Inline(Box<GenerativeModel>),
}

impl ModelSpec {
    /// Materializes the model, optionally overriding the generating rank
    /// (family specs only; inline models reject the override).
    pub fn build(&self, s_override: Option<usize>, seed: u64) -> Result<GenerativeModel> {
        match self {
            ModelSpec::Benchmark { d1, d2, p, s_true } => {
                crate::genmodel::make_benchmark_model(
                    *d1,
                    *d2,
                    *p,
                    s_override.unwrap_or(*s_true),
                    seed,
                )
            }
            ModelSpec::SoftmaxBenchmark { d1, d2, p, s_true } => {
                crate::genmodel::make_softmax_lowrank_model(
                    *d1,
                    *d2,
                    *p,
                    s_override.unwrap_or(*s_true),
                    seed,
                )
            }
            ModelSpec::Inline(model) => {
                if s_override.is_some() {
                    return Err(Error::InvalidArgument(
                        "inline models cannot sweep the generating rank".into(),
                    ));
                }
                Ok(model.as_ref().clone())
            }
        }
    }

    fn d2(&self) -> usize {
        match self {
            ModelSpec::Benchmark { d2, .. } | ModelSpec::SoftmaxBenchmark { d2, .. } => *d2,
            ModelSpec::Inline(model) => model.d2,
        }
    }
}

/// Linear readout fit on top of the learned or oracle features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Downstream {
    Ols,
    Ridge { lambda: f64 },
    /// k-fold cross-validation over the standard log-spaced penalty grid.
    RidgeCv { folds: usize },
}

// ─── configuration ───

fn default_n_pretext() -> usize {
    10_000
}
fn default_n_labeled() -> usize {
    300
}
fn default_n_test() -> usize {
    1_000
}
fn default_trials() -> usize {
    50
}
fn default_redraw() -> bool {
    true
}
fn default_downstream() -> Downstream {
    Downstream::RidgeCv { folds: 5 }
}

/// Full description of one sweep; hashable, JSON round-trippable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub methods: Vec<Method>,
    pub sweep: SweepVariable,
    /// Ascending grid of the swept knob. Sample sizes and ranks must be
    /// integral.
    pub grid: Vec<f64>,
    #[serde(default = "default_n_pretext")]
    pub n_pretext: usize,
    /// Labeled size when the sweep varies something else.
    #[serde(default = "default_n_labeled")]
    pub n_labeled: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_downstream")]
    pub downstream: Downstream,
    /// Redraw the model parameters per trial (fresh A, B); with `false`
    /// the model is fixed across trials (per grid point for rank sweeps).
    #[serde(default = "default_redraw")]
    pub redraw_model: bool,
}

impl ExperimentConfig {
    /// Rank sweep defaults: benchmark family, grid {1..5, 10, 15, 20},
    /// n = 300 labeled.
    pub fn s_sweep_default(master_seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::Benchmark { d1: 10, d2: 20, p: 2, s_true: 5 },
            methods: vec![Method::SslOracle, Method::SslMlp, Method::Sl1, Method::Sl2],
            sweep: SweepVariable::GeneratingRank,
            grid: vec![1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 15.0, 20.0],
            n_pretext: default_n_pretext(),
            n_labeled: default_n_labeled(),
            n_test: default_n_test(),
            trials: default_trials(),
            master_seed,
            downstream: default_downstream(),
            redraw_model: true,
        }
    }

    /// Size sweep defaults: rank fixed at 5, n in {100, ..., 1600}.
    pub fn n_sweep_default(master_seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            grid: vec![100.0, 200.0, 400.0, 800.0, 1600.0],
            sweep: SweepVariable::SampleSize,
            ..ExperimentConfig::s_sweep_default(master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("empty sweep grid".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite grid value".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("sweep grid must be strictly ascending".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("at least one trial required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.methods.iter().all(|m| seen.insert(*m)) {
            return Err(Error::InvalidArgument("duplicate method in method set".into()));
        }
        match self.sweep {
            SweepVariable::SampleSize => {
                if self.grid.iter().any(|&v| v.fract() != 0.0 || v < 2.0) {
                    return Err(Error::InvalidArgument(
                        "sample sizes must be integers of at least 2".into(),
                    ));
                }
            }
            SweepVariable::GeneratingRank => {
                if matches!(self.model, ModelSpec::Inline(_)) {
                    return Err(Error::InvalidArgument(
                        "inline models cannot sweep the generating rank".into(),
                    ));
                }
                let d2 = self.model.d2() as f64;
                if self.grid.iter().any(|&v| v.fract() != 0.0 || v < 1.0 || v > d2) {
                    return Err(Error::InvalidArgument(format!(
                        "generating ranks must be integers in 1..={d2}"
                    )));
                }
            }
            SweepVariable::Shrinkage => {
                if self.grid.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidArgument("penalties must be nonnegative".into()));
                }
                if self.methods.iter().any(|m| !m.has_linear_readout()) {
                    return Err(Error::InvalidArgument(
                        "penalty sweeps apply only to linear-readout methods".into(),
                    ));
                }
            }
        }
        if self.methods.contains(&Method::SslMlp) && self.n_pretext == 0 {
            return Err(Error::InvalidArgument("pretext set required for SSL_mlp".into()));
        }
        if self.n_labeled < 2 || self.n_test < 2 {
            return Err(Error::InvalidArgument("labeled and test sizes must be at least 2".into()));
        }
        if let ModelSpec::Inline(model) = &self.model {
            model.validate()?;
        }
        Ok(())
    }

    /// FNV-1a over the canonical JSON serialization: stable across runs,
    /// changes exactly when a field changes.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        Ok(format!("{:016x}", fnv1a64(canonical.as_bytes())))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ─── results ───

/// Aggregated scores of one method at one grid point. Field order is the
/// CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub grid_var: SweepVariable,
    pub grid_value: f64,
    pub mean_acc: f64,
    /// Sample standard deviation over trials.
    pub std_acc: f64,
    /// Readout risk minus the best achievable readout risk on the same test
    /// rows; present only for linear-readout methods.
    pub mean_excess_risk: Option<f64>,
    pub std_excess_risk: Option<f64>,
    pub trials: usize,
}

/// Sweep output with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Methods in config order, grid ascending within each method.
    pub rows: Vec<ResultRow>,
    pub config_hash: String,
    pub master_seed: u64,
    pub artifact_version: String,
}

/// One method's scores on one `(grid, trial)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub accuracy: f64,
    pub excess_risk: Option<f64>,
}

/// All methods evaluated on one cell's shared data draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub grid_index: usize,
    pub trial_index: usize,
    pub outcomes: Vec<MethodOutcome>,
}

// ─── cell execution ───

// Stream tags for deriving independent seeds from a cell seed.
const STREAM_MODEL: u64 = 0;
const STREAM_PRETEXT: u64 = 1;
const STREAM_LABELED: u64 = 2;
const STREAM_TEST: u64 = 3;
const STREAM_NET: u64 = 4;
const STREAM_CV: u64 = 7;

struct CellPlan {
    n_labeled: usize,
    s_override: Option<usize>,
    lambda_override: Option<f64>,
}

fn cell_plan(config: &ExperimentConfig, grid_index: usize) -> CellPlan {
    let value = config.grid[grid_index];
    match config.sweep {
        SweepVariable::SampleSize => CellPlan {
            n_labeled: value as usize,
            s_override: None,
            lambda_override: None,
        },
        SweepVariable::GeneratingRank => CellPlan {
            n_labeled: config.n_labeled,
            s_override: Some(value as usize),
            lambda_override: None,
        },
        SweepVariable::Shrinkage => CellPlan {
            n_labeled: config.n_labeled,
            s_override: None,
            lambda_override: Some(value),
        },
    }
}

fn fit_readout(
    features: &Matrix,
    labels: &Matrix,
    downstream: &Downstream,
    lambda_override: Option<f64>,
    cv_seed: u64,
) -> Result<RidgeFit> {
    if let Some(lambda) = lambda_override {
        return regress::fit_ridge(features, labels, lambda);
    }
    match downstream {
        Downstream::Ols => regress::fit_ridge(features, labels, 0.0),
        Downstream::Ridge { lambda } => regress::fit_ridge(features, labels, *lambda),
        Downstream::RidgeCv { folds } => {
            let report = regress::cross_validate_lambda(features, labels, *folds, cv_seed)?;
            regress::fit_ridge(features, labels, report.lambda_star)
        }
    }
}

/// Readout pipeline shared by the SSL methods: fit on training features,
/// score accuracy and excess readout risk on test features.
fn linear_readout_outcome(
    method: Method,
    train_features: &Matrix,
    labeled: &Dataset,
    test_features: Matrix,
    test: &Dataset,
    config: &ExperimentConfig,
    lambda_override: Option<f64>,
    cv_seed: u64,
) -> Result<MethodOutcome> {
    let fit = fit_readout(train_features, &labeled.y, &config.downstream, lambda_override, cv_seed)?;
    let eval = Dataset {
        x1: test.x1.clone(),
        x2: test.x2.clone(),
        y: test.y.clone(),
        bayes: test.bayes.clone(),
        psi_star: test_features,
        seed: test.seed,
    };
    let report = regress::excess_risk(&fit, &eval)?;
    Ok(MethodOutcome {
        method,
        accuracy: report.accuracy,
        excess_risk: Some((report.excess_risk - report.error_apx_at_fit).max(0.0)),
    })
}

/// Supervised classifier: two hidden layers, softmax cross-entropy over all
/// `p + 1` classes, scored by argmax on the test inputs.
fn supervised_outcome(
    method: Method,
    train_inputs: &Matrix,
    labeled: &Dataset,
    test_inputs: &Matrix,
    test: &Dataset,
    net_seed: u64,
) -> Result<MethodOutcome> {
    let p = labeled.p();
    let encoding = LabelEncoding { p };
    let targets = Matrix::from_fn(labeled.n(), p + 1, |i, j| {
        if encoding.decode(labeled.y.row(i)) == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let net_config = MlpConfig {
        layer_sizes: vec![train_inputs.cols(), HIDDEN_WIDTH, HIDDEN_WIDTH, p + 1],
        learning_rate: NET_LEARNING_RATE,
        epochs: NET_EPOCHS,
        batch_size: NET_BATCH,
        loss: Loss::SoftmaxCrossEntropy,
        seed: net_seed,
    };
    let net = mlp::train(net_config, train_inputs, &targets)?.model;
    let scores = net.predict(test_inputs)?;
    let mut correct = 0usize;
    for i in 0..test.n() {
        let row = scores.row(i);
        // Raw-score argmax equals softmax argmax; ties go to the lowest
        // class, matching the readout decoder convention.
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best + 1 == encoding.decode(test.y.row(i)) {
            correct += 1;
        }
    }
    Ok(MethodOutcome {
        method,
        accuracy: correct as f64 / test.n() as f64,
        excess_risk: None,
    })
}

fn evaluate_cell(
    config: &ExperimentConfig,
    grid_index: usize,
    trial_index: usize,
) -> Result<CellOutcome> {
    let plan = cell_plan(config, grid_index);
    let cell_seed = mix_seed(config.master_seed, grid_index as u64, trial_index as u64);
    // Redrawn models take a per-cell seed; fixed models take one seed per
    // rank point (the rank changes the parameter shapes) and a single
    // global seed otherwise.
    let model_seed = if config.redraw_model {
        mix_seed(cell_seed, STREAM_MODEL, 0)
    } else {
        let model_slot = match config.sweep {
            SweepVariable::GeneratingRank => grid_index as u64,
            _ => 0,
        };
        mix_seed(config.master_seed, model_slot, u64::MAX)
    };
    let model = config.model.build(plan.s_override, model_seed)?;
    let labeled = model.sample(plan.n_labeled, mix_seed(cell_seed, STREAM_LABELED, 0))?;
    let test = model.sample(config.n_test, mix_seed(cell_seed, STREAM_TEST, 0))?;
    let pretext = if config.methods.contains(&Method::SslMlp) {
        Some(model.sample(config.n_pretext, mix_seed(cell_seed, STREAM_PRETEXT, 0))?)
    } else {
        None
    };

    let mut outcomes = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let outcome = match method {
            Method::SslOracle => linear_readout_outcome(
                method,
                &labeled.psi_star,
                &labeled,
                test.psi_star.clone(),
                &test,
                config,
                plan.lambda_override,
                mix_seed(cell_seed, STREAM_CV, 0),
            )?,
            Method::SslMlp => {
                let pre = pretext.as_ref().expect("pretext drawn when SSL_mlp configured");
                let net_config = MlpConfig {
                    layer_sizes: vec![pre.d1(), HIDDEN_WIDTH, HIDDEN_WIDTH, pre.d2()],
                    learning_rate: NET_LEARNING_RATE,
                    epochs: NET_EPOCHS,
                    batch_size: NET_BATCH,
                    loss: Loss::SquaredError,
                    seed: mix_seed(cell_seed, STREAM_NET, 0),
                };
                let net = mlp::train(net_config, &pre.x1, &pre.x2)?.model;
                linear_readout_outcome(
                    method,
                    &net.predict(&labeled.x1)?,
                    &labeled,
                    net.predict(&test.x1)?,
                    &test,
                    config,
                    plan.lambda_override,
                    mix_seed(cell_seed, STREAM_CV, 1),
                )?
            }
            Method::Sl1 => supervised_outcome(
                method,
                &labeled.x1,
                &labeled,
                &test.x1,
                &test,
                mix_seed(cell_seed, STREAM_NET, 1),
            )?,
            Method::Sl2 => supervised_outcome(
                method,
                &Matrix::hstack(&[&labeled.x1, &labeled.x2])?,
                &labeled,
                &Matrix::hstack(&[&test.x1, &test.x2])?,
                &test,
                mix_seed(cell_seed, STREAM_NET, 2),
            )?,
        };
        outcomes.push(outcome);
    }
    Ok(CellOutcome { grid_index, trial_index, outcomes })
}

/// Runs one `(grid, trial)` cell in isolation; reproduces exactly the
/// numbers that [`run_sweep`] aggregates for that cell.
pub fn run_cell(
    config: &ExperimentConfig,
    grid_index: usize,
    trial_index: usize,
) -> Result<CellOutcome> {
    config.validate()?;
    if grid_index >= config.grid.len() {
        return Err(Error::InvalidArgument(format!("grid index {grid_index} out of range")));
    }
    if trial_index >= config.trials {
        return Err(Error::InvalidArgument(format!("trial index {trial_index} out of range")));
    }
    evaluate_cell(config, grid_index, trial_index)
}

// ─── sweeps ───

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Runs the configured sweep: all `(grid, trial)` cells concurrently,
/// aggregated per `(method, grid point)` in fixed order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|g| (0..config.trials).map(move |t| (g, t)))
        .collect();
    let mut outcomes: Vec<CellOutcome> = cells
        .into_par_iter()
        .map(|(g, t)| evaluate_cell(config, g, t))
        .collect::<Result<_>>()?;
    outcomes.sort_by_key(|c| (c.grid_index, c.trial_index));

    let mut rows = Vec::with_capacity(config.methods.len() * config.grid.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        for (g, &grid_value) in config.grid.iter().enumerate() {
            let cell_block = &outcomes[g * config.trials..(g + 1) * config.trials];
            let acc: Vec<f64> = cell_block.iter().map(|c| c.outcomes[mi].accuracy).collect();
            let (mean_acc, std_acc) = mean_and_std(&acc);
            let (mean_excess_risk, std_excess_risk) = if method.has_linear_readout() {
                let risks: Vec<f64> = cell_block
                    .iter()
                    .map(|c| c.outcomes[mi].excess_risk.expect("readout method has risk"))
                    .collect();
                let (m, s) = mean_and_std(&risks);
                (Some(m), Some(s))
            } else {
                (None, None)
            };
            rows.push(ResultRow {
                method,
                grid_var: config.sweep,
                grid_value,
                mean_acc,
                std_acc,
                mean_excess_risk,
                std_excess_risk,
                trials: config.trials,
            });
        }
    }
    Ok(ExperimentResult {
        rows,
        config_hash: config.hash()?,
        master_seed: config.master_seed,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Sweep over the generating rank; requires `sweep == s_true`.
pub fn run_s_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.sweep != SweepVariable::GeneratingRank {
        return Err(Error::InvalidArgument("config does not sweep the generating rank".into()));
    }
    run_sweep(config)
}

/// Sweep over the labeled sample size; requires `sweep == n`.
pub fn run_n_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.sweep != SweepVariable::SampleSize {
        return Err(Error::InvalidArgument("config does not sweep the sample size".into()));
    }
    run_sweep(config)
}

// ─── check suite ───

/// One named invariant check with its measured evidence.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Bundled structural checks of one model: matching, redundancy curve,
/// readout bound, spectra and moment diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub d1: usize,
    pub d2: usize,
    pub p: usize,
    pub seed: u64,
    /// Redundancy value at each rank `0..=d2-p`.
    pub epsilon_curve: Vec<f64>,
    /// First rank whose redundancy falls below `1e-8` of the rank-0 value.
    pub s_star: usize,
    /// Set when the rank-0 redundancy already vanishes: the mean encoding
    /// explains the pretext optimum exactly.
    pub conditional_mean_independent: bool,
    pub diagnostics: theory::AssumptionDiagnostics,
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

impl CheckReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const CHECK_SAMPLE: usize = 2_000;
const CHECK_MC: usize = 20_000;
const REDUNDANCY_DROP: f64 = 1e-8;

/// Runs the bundled invariant checks for one model spec and seed.
pub fn run_check_suite(spec: &ModelSpec, seed: u64) -> Result<CheckReport> {
    let model = spec.build(None, mix_seed(seed, 0, u64::MAX))?;
    let ds = model.sample(CHECK_SAMPLE, mix_seed(seed, 1, 0))?;
    let c_tilde = model.mean_encoding(CHECK_MC, mix_seed(seed, 2, 0))?.mean;
    let (d1, d2, p) = (model.d1, model.d2, model.p);
    let mut items = Vec::new();

    // Exact matching of the readout.
    let match_report = matching::min_approx_error(&ds)?;
    items.push(CheckItem {
        name: "exact_matching".into(),
        pass: match_report.is_exact,
        detail: format!(
            "readout error {:.3e}, threshold {:.3e}",
            match_report.error_apx_star, match_report.tolerance
        ),
    });

    // Redundancy curve over all ranks up to d2 - p.
    let eps0 = matching::epsilon_zero(&ds, &c_tilde)?;
    let spectrum_rows = residual_spectrum(&ds, &c_tilde)?;
    let mut epsilon_curve = vec![eps0];
    for s in 1..=(d2 - p) {
        epsilon_curve.push(spectrum_rows[s - 1].epsilon_tail);
    }
    let feature_scale = {
        let n = ds.n() as f64;
        ds.psi_star.frobenius_norm().powi(2) / (n * d2 as f64)
    };
    let conditional_mean_independent = eps0 <= 1e-10 * feature_scale.max(1e-300);
    let s_star = epsilon_curve
        .iter()
        .position(|&e| e <= REDUNDANCY_DROP * eps0.max(f64::MIN_POSITIVE))
        .unwrap_or(d2 - p);
    items.push(CheckItem {
        name: "low_rank_redundancy_vanishes".into(),
        pass: epsilon_curve[s_star] <= REDUNDANCY_DROP * eps0.max(f64::MIN_POSITIVE),
        detail: format!(
            "rank-0 value {:.3e}, rank-{s_star} value {:.3e}",
            eps0, epsilon_curve[s_star]
        ),
    });

    // Readout error bound at the selected rank. The bound's constant takes
    // the second moment of the label residual y - bayes, not the x2 noise.
    let estimate = epsilon_s_spectral(&ds, &c_tilde, s_star)?;
    let noise_second_moment = {
        let gap = ds.y.sub(&ds.bayes);
        gap.frobenius_norm().powi(2) / ds.n() as f64
    };
    let (bound, _) = matching::approx_error_bound(
        &c_tilde,
        &estimate.b_star,
        estimate.value,
        noise_second_moment,
    )?;
    items.push(CheckItem {
        name: "readout_bound_dominates".into(),
        pass: bound + 1e-8 * bound.abs().max(1.0) >= match_report.error_apx_star,
        detail: format!("bound {:.3e} vs error {:.3e}", bound, match_report.error_apx_star),
    });

    // Covariance domination and effective dimension, on the uncentered
    // second moments.
    let triplet = theory::covariance_triplet(&ds, &c_tilde, &estimate)?;
    let constants = theory::domination_constants(
        &triplet.moment,
        &triplet.moment_surrogate,
        &triplet.moment_gap,
        estimate.value,
    )?;
    items.push(CheckItem {
        name: "domination_constants_finite".into(),
        pass: constants.a_tilde.is_finite() && constants.a_bar.is_finite(),
        detail: format!("a_tilde {:.3e}, a_bar {:.3e}", constants.a_tilde, constants.a_bar),
    });

    // Penalties small against the O(1) feature spectrum, so the ratio
    // isolates the bound constant rather than the decay of the effective
    // dimension itself.
    let (feature_spectrum, _) = linalg::eig_sym(&triplet.moment)?;
    let lambda_grid: Vec<f64> = (0..9).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0_f64;
    for &lambda in &lambda_grid {
        let r = theory::effective_dimension_ratio(
            &feature_spectrum,
            lambda,
            estimate.value,
            p,
            s_star,
        )?;
        ratio_min = ratio_min.min(r);
        ratio_max = ratio_max.max(r);
    }
    items.push(CheckItem {
        name: "effective_dimension_bounded".into(),
        pass: ratio_max <= 3.0 && ratio_max <= 3.0 * ratio_min.max(f64::MIN_POSITIVE),
        detail: format!("ratio range [{ratio_min:.3e}, {ratio_max:.3e}] over the penalty grid"),
    });

    let diagnostics =
        theory::assumption_diagnostics(&ds, &c_tilde, &estimate, &match_report.beta_star)?;
    items.push(CheckItem {
        name: "rank_inequalities".into(),
        pass: diagnostics.rank_surrogate <= diagnostics.rank_features
            && diagnostics.rank_gap <= diagnostics.rank_features,
        detail: format!(
            "features {}, surrogate {}, gap {}",
            diagnostics.rank_features, diagnostics.rank_surrogate, diagnostics.rank_gap
        ),
    });

    let pass = items.iter().all(|item| item.pass);
    Ok(CheckReport {
        d1,
        d2,
        p,
        seed,
        epsilon_curve,
        s_star,
        conditional_mean_independent,
        diagnostics,
        items,
        pass,
    })
}

// ─── export / import ───

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExportFormat> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

const CSV_HEADER: [&str; 8] = [
    "method",
    "grid_var",
    "grid_value",
    "mean_acc",
    "std_acc",
    "mean_excess_risk",
    "std_excess_risk",
    "trials",
];

/// CSV rows with the fixed schema header, written even when empty.
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_result_csv<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    write_rows_csv(&result.rows, out)
}

pub fn read_result_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Writes the result to `path`; CSV carries the rows, JSON the whole
/// structure including provenance.
pub fn export(result: &ExperimentResult, path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    match format {
        ExportFormat::Csv => write_result_csv(result, file),
        ExportFormat::Json => {
            let mut file = file;
            file.write_all(serde_json::to_string_pretty(result)?.as_bytes())?;
            file.write_all(b"\n")?;
            Ok(())
        }
    }
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    read_result_csv(std::fs::File::open(path)?)
}

pub fn import_json(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

// ─── tests ───
