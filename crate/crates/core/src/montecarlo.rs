//! Monte Carlo harness for test size, test power and estimator accuracy.
//!
//! Every replication owns a random stream derived from `(master_seed,
//! replication_index)` alone, and results are collected in replication order
//! before aggregation. Reports therefore do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{mean_discrepancy, test_statistic, DistanceKind};
use crate::error::{Error, Result};
use crate::estimation::{fit_ml, FitOptions, FitResult};
use crate::g0::{G0Params, Sample};
use crate::kstest::ks_two_sample;

/// Outlier model: with probability `epsilon` an observation comes from the
/// same law with scale `scale_factor·γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    #[serde(default = "default_scale_factor")]
    pub scale_factor: f64,
}

fn default_scale_factor() -> f64 {
    100.0
}

impl Default for ContaminationSpec {
    fn default() -> Self {
        ContaminationSpec { epsilon: 0.0, scale_factor: 100.0 }
    }
}

impl ContaminationSpec {
    pub fn new(epsilon: f64, scale_factor: f64) -> Result<Self> {
        let c = ContaminationSpec { epsilon, scale_factor };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !((0.0..=1.0).contains(&self.epsilon) && self.scale_factor.is_finite() && self.scale_factor > 0.0) {
            return Err(Error::InvalidParams(format!(
                "contamination needs 0 <= epsilon <= 1 and scale_factor > 0, got ({}, {})",
                self.epsilon, self.scale_factor
            )));
        }
        Ok(())
    }
}

/// Draws `n` observations under contamination `c`.
pub fn contaminated_sample<R: Rng + ?Sized>(p: &G0Params, c: &ContaminationSpec, n: usize, rng: &mut R) -> Result<Sample> {
    contaminated_sample_counted(p, c, n, rng).map(|(s, _)| s)
}

/// Like [`contaminated_sample`], also returning the number of outliers.
pub fn contaminated_sample_counted<R: Rng + ?Sized>(
    p: &G0Params,
    c: &ContaminationSpec,
    n: usize,
    rng: &mut R,
) -> Result<(Sample, usize)> {
    c.validate()?;
    if c.epsilon == 0.0 {
        return Ok((p.sample(n, rng)?, 0));
    }
    if n == 0 {
        return Err(Error::InvalidParams("sample size must be >= 1".into()));
    }
    let mut outliers = 0;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let outlier = rng.random::<f64>() < c.epsilon;
        let z = p.draw(rng);
        if outlier {
            outliers += 1;
            values.push(z * c.scale_factor);
        } else {
            values.push(z);
        }
    }
    Ok((Sample::new(values)?, outliers))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioClass {
    I,
    Ii,
    Iii,
    Iv,
    V,
}

impl ScenarioClass {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioClass::I => "i",
            ScenarioClass::Ii => "ii",
            ScenarioClass::Iii => "iii",
            ScenarioClass::Iv => "iv",
            ScenarioClass::V => "v",
        }
    }

    /// The class implied by the two laws, if any.
    pub fn classify(alpha1: f64, gamma1: f64, alpha2: f64, gamma2: f64) -> Option<ScenarioClass> {
        let mu = |a: f64, g: f64| if a < -1.0 { g / (-a - 1.0) } else { f64::INFINITY };
        let (mu1, mu2) = (mu(alpha1, gamma1), mu(alpha2, gamma2));
        let same = |x: f64, y: f64| x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
        let same_mu = same(mu1, mu2);
        if alpha1 == alpha2 {
            return Some(if same_mu { ScenarioClass::I } else { ScenarioClass::Ii });
        }
        if same_mu {
            return Some(ScenarioClass::V);
        }
        if alpha1 > alpha2 {
            return Some(if mu1 > mu2 { ScenarioClass::Iii } else { ScenarioClass::Iv });
        }
        None
    }
}

fn default_replications() -> usize {
    1000
}

fn default_levels() -> Vec<f64> {
    vec![0.01]
}

/// One simulation cell: two laws, a window size and the test settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub looks: f64,
    pub sample_size: usize,
    #[serde(default)]
    pub contamination: ContaminationSpec,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_levels")]
    pub nominal_levels: Vec<f64>,
    pub scenario_class: ScenarioClass,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        G0Params::new(self.alpha1, self.gamma1, self.looks)?;
        G0Params::new(self.alpha2, self.gamma2, self.looks)?;
        self.contamination.validate()?;
        if self.sample_size < 2 || self.replications == 0 {
            return Err(Error::InvalidParams("sample_size must be >= 2 and replications >= 1".into()));
        }
        if let Some(level) = self.nominal_levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidParams(format!("nominal level {level} is not a probability")));
        }
        let implied = ScenarioClass::classify(self.alpha1, self.gamma1, self.alpha2, self.gamma2);
        if implied != Some(self.scenario_class) {
            return Err(Error::InvalidParams(format!(
                "parameters do not match scenario class {}: implied {}",
                self.scenario_class.label(),
                implied.map_or("none", ScenarioClass::label)
            )));
        }
        Ok(())
    }

    pub fn first(&self) -> G0Params {
        G0Params::new(self.alpha1, self.gamma1, self.looks).expect("validated")
    }

    pub fn second(&self) -> G0Params {
        G0Params::new(self.alpha2, self.gamma2, self.looks).expect("validated")
    }

    /// Identifier used in reports; derived from the parameters when unset.
    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            format!(
                "{}:a{}_{}:g{}_{}:L{}:N{}:e{}",
                self.scenario_class.label(),
                self.alpha1,
                self.alpha2,
                self.gamma1,
                self.gamma2,
                self.looks,
                self.sample_size,
                self.contamination.epsilon
            )
        })
    }
}

/// Execution settings shared by all studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub master_seed: u64,
    pub workers: usize,
    pub fit: FitOptions,
    /// Redraws allowed per replication before it is given up.
    pub max_redraws: usize,
}

impl McConfig {
    pub fn new(master_seed: u64) -> Self {
        McConfig { master_seed, workers: 1, fit: FitOptions::default(), max_redraws: 1000 }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        McConfig { workers, ..self }
    }

    fn stream(&self, replication: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replication as u64);
        rng
    }

    fn run<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, n: usize, work: F) -> Result<Vec<T>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| Error::InvalidParams(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(|| (0..n).into_par_iter().map(work).collect()))
    }
}

/// Master seed for scenario `index` of a campaign driven by one seed
/// (splitmix64 finalizer over the pair).
pub fn scenario_seed(campaign_seed: u64, index: usize) -> u64 {
    let mut z = campaign_seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub test: DistanceKind,
    pub level: f64,
    pub rejections: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub cv_percent: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub master_seed: u64,
    /// Replications that entered the summaries.
    pub replications: usize,
    /// Draws discarded and redrawn (non-convergent, censored or numerically failed).
    pub censored: usize,
    /// Replications abandoned after exhausting the redraw budget.
    pub abandoned: usize,
    pub rejection_rates: Vec<RejectionRate>,
    pub estimates: Vec<EstimateSummary>,
    pub mean_discrepancy: Option<f64>,
}

impl McReport {
    pub fn rate(&self, test: DistanceKind, level: f64) -> Option<f64> {
        self.rejection_rates.iter().find(|r| r.test == test && r.level == level).map(|r| r.rate)
    }

    pub fn estimate(&self, parameter: &str) -> Option<&EstimateSummary> {
        self.estimates.iter().find(|e| e.parameter == parameter)
    }
}

struct TestOutcome {
    redraws: usize,
    /// `rejections[t][l]` for test `t` at level `l`; `None` when abandoned.
    rejections: Option<Vec<Vec<bool>>>,
}

fn one_test_replication(spec: &ScenarioSpec, tests: &[DistanceKind], cfg: &McConfig, index: usize) -> TestOutcome {
    let mut rng = cfg.stream(index);
    let (p, q) = (spec.first(), spec.second());
    let n = spec.sample_size;
    for redraws in 0..=cfg.max_redraws {
        let mut attempt = || -> Option<Vec<Vec<bool>>> {
            let x = contaminated_sample(&p, &spec.contamination, n, &mut rng).ok()?;
            let y = contaminated_sample(&q, &spec.contamination, n, &mut rng).ok()?;
            let valid = |f: &FitResult, truth: &G0Params| f.converged && within_censoring(truth.alpha(), f.params.alpha());
            let fx = fit_ml(&x, spec.looks, &cfg.fit).ok().filter(|f| valid(f, &p))?;
            let fy = fit_ml(&y, spec.looks, &cfg.fit).ok().filter(|f| valid(f, &q))?;
            let mut out = Vec::with_capacity(tests.len());
            for &kind in tests {
                let result = if kind.is_parametric() {
                    test_statistic(kind, &fx.params, &fy.params, n, n).ok()?
                } else {
                    ks_two_sample(&x, &y)
                };
                out.push(spec.nominal_levels.iter().map(|&l| result.reject(l)).collect());
            }
            Some(out)
        };
        if let Some(r) = attempt() {
            return TestOutcome { redraws, rejections: Some(r) };
        }
    }
    TestOutcome { redraws: cfg.max_redraws + 1, rejections: None }
}

fn rejection_study(spec: &ScenarioSpec, tests: &[DistanceKind], cfg: &McConfig) -> Result<McReport> {
    spec.validate()?;
    if tests.is_empty() {
        return Err(Error::InvalidParams("no tests requested".into()));
    }
    let outcomes = cfg.run(spec.replications, |i| one_test_replication(spec, tests, cfg, i))?;
    let censored = outcomes.iter().map(|o| o.redraws).sum();
    let valid: Vec<_> = outcomes.iter().filter_map(|o| o.rejections.as_ref()).collect();
    let abandoned = outcomes.len() - valid.len();
    let mut rates = Vec::new();
    for (t, &test) in tests.iter().enumerate() {
        for (l, &level) in spec.nominal_levels.iter().enumerate() {
            let rejections = valid.iter().filter(|r| r[t][l]).count();
            let rate = if valid.is_empty() { f64::NAN } else { rejections as f64 / valid.len() as f64 };
            rates.push(RejectionRate { test, level, rejections, rate });
        }
    }
    Ok(McReport {
        scenario: spec.label(),
        master_seed: cfg.master_seed,
        replications: valid.len(),
        censored,
        abandoned,
        rejection_rates: rates,
        estimates: Vec::new(),
        mean_discrepancy: None,
    })
}

/// Rejection rates under equal laws (scenario class i).
pub fn empirical_size(spec: &ScenarioSpec, tests: &[DistanceKind], cfg: &McConfig) -> Result<McReport> {
    if spec.scenario_class != ScenarioClass::I {
        return Err(Error::InvalidParams("empirical size needs a class i scenario".into()));
    }
    let mut report = rejection_study(spec, tests, cfg)?;
    report.mean_discrepancy = Some(0.0);
    Ok(report)
}

/// Rejection rates under distinct laws, with `D̄` at the true parameters.
pub fn empirical_power(spec: &ScenarioSpec, tests: &[DistanceKind], cfg: &McConfig) -> Result<McReport> {
    if spec.scenario_class == ScenarioClass::I {
        return Err(Error::InvalidParams("empirical power needs distinct laws (classes ii-v)".into()));
    }
    let mut report = rejection_study(spec, tests, cfg)?;
    report.mean_discrepancy = Some(mean_discrepancy(&spec.first(), &spec.second())?);
    Ok(report)
}

/// Validity filter for Monte Carlo estimates: `α̂ ∈ [10α, α/20]`.
pub fn within_censoring(alpha_true: f64, alpha_hat: f64) -> bool {
    alpha_hat >= 10.0 * alpha_true && alpha_hat <= alpha_true / 20.0
}

fn summarize(parameter: &str, truth: f64, values: &[f64]) -> EstimateSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n;
    EstimateSummary {
        parameter: parameter.to_string(),
        truth,
        mean,
        bias: mean - truth,
        cv_percent: 100.0 * var.sqrt() / mean.abs(),
        mse,
    }
}

/// Bias, coefficient of variation and MSE of `(α̂, γ̂)` over `replications`
/// censored-in fits.
pub fn estimator_study(
    p: &G0Params,
    c: &ContaminationSpec,
    sample_size: usize,
    replications: usize,
    cfg: &McConfig,
) -> Result<McReport> {
    c.validate()?;
    if sample_size < 2 || replications == 0 {
        return Err(Error::InvalidParams("sample_size must be >= 2 and replications >= 1".into()));
    }
    let outcomes = cfg.run(replications, |i| {
        let mut rng = cfg.stream(i);
        for redraws in 0..=cfg.max_redraws {
            let Ok(s) = contaminated_sample(p, c, sample_size, &mut rng) else { continue };
            if let Ok(fit) = fit_ml(&s, p.looks(), &cfg.fit) {
                if fit.converged && within_censoring(p.alpha(), fit.params.alpha()) {
                    return (redraws, Some((fit.params.alpha(), fit.params.gamma())));
                }
            }
        }
        (cfg.max_redraws + 1, None)
    })?;
    let censored = outcomes.iter().map(|o| o.0).sum();
    let (alphas, gammas): (Vec<f64>, Vec<f64>) = outcomes.iter().filter_map(|o| o.1).unzip();
    if alphas.is_empty() {
        return Err(Error::numerical("estimator_study", "no replication produced a valid estimate"));
    }
    Ok(McReport {
        scenario: format!("estimator:a{}:g{}:L{}:N{}:e{}", p.alpha(), p.gamma(), p.looks(), sample_size, c.epsilon),
        master_seed: cfg.master_seed,
        replications: alphas.len(),
        censored,
        abandoned: replications - alphas.len(),
        rejection_rates: Vec::new(),
        estimates: vec![summarize("alpha", p.alpha(), &alphas), summarize("gamma", p.gamma(), &gammas)],
        mean_discrepancy: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Size,
    Power,
    Estimator,
}

pub const ROUGHNESS: [f64; 3] = [-1.5, -3.0, -5.0];
pub const MEANS: [f64; 3] = [1.0, 2.0, 5.0];
pub const LOOKS: [f64; 2] = [1.0, 8.0];
pub const WINDOW_SIZES: [usize; 3] = [49, 81, 121];
pub const EPSILONS: [f64; 3] = [0.0, 1e-4, 5e-3];

/// `γ` pairs of the distinct-roughness power tables, grouped by
/// `(α₁, α₂)` and then by `μ₁ > μ₂`, `μ₁ = μ₂`, `μ₁ < μ₂`.
pub const POWER_PAIRS: [((f64, f64), [[(f64, f64); 3]; 3]); 3] = [
    (
        (-1.5, -3.0),
        [[(1.0, 2.0), (2.5, 2.0), (2.5, 4.0)], [(0.5, 2.0), (1.0, 4.0), (2.5, 10.0)], [(0.5, 4.0), (0.5, 10.0), (1.0, 10.0)]],
    ),
    (
        (-1.5, -5.0),
        [[(1.0, 4.0), (2.5, 4.0), (2.5, 8.0)], [(0.5, 4.0), (1.0, 8.0), (2.5, 20.0)], [(0.5, 8.0), (0.5, 20.0), (1.0, 20.0)]],
    ),
    (
        (-3.0, -5.0),
        [[(4.0, 4.0), (10.0, 4.0), (10.0, 8.0)], [(2.0, 4.0), (4.0, 8.0), (10.0, 20.0)], [(2.0, 8.0), (2.0, 20.0), (4.0, 20.0)]],
    ),
];

/// Mean ratios `μ₂/μ₁` of the equal-roughness power table, with `μ₁ = 1`.
pub const MEAN_RATIOS: [f64; 3] = [2.0, 2.5, 5.0];

fn cell(alpha: (f64, f64), gamma: (f64, f64), looks: f64, n: usize, epsilon: f64, class: ScenarioClass) -> ScenarioSpec {
    ScenarioSpec {
        id: None,
        alpha1: alpha.0,
        alpha2: alpha.1,
        gamma1: gamma.0,
        gamma2: gamma.1,
        looks,
        sample_size: n,
        contamination: ContaminationSpec { epsilon, scale_factor: 100.0 },
        replications: default_replications(),
        nominal_levels: default_levels(),
        scenario_class: class,
    }
}

/// Enumerates the simulation grid in lexicographic order (ε, α, μ, L, N for
/// size and estimator grids; ε, table, cell, L, N for power).
pub fn scenario_grid(kind: GridKind) -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for &eps in &EPSILONS {
        match kind {
            GridKind::Size | GridKind::Estimator => {
                for &a in &ROUGHNESS {
                    for &mu in &MEANS {
                        let g = -mu * (1.0 + a);
                        for &l in &LOOKS {
                            for &n in &WINDOW_SIZES {
                                out.push(cell((a, a), (g, g), l, n, eps, ScenarioClass::I));
                            }
                        }
                    }
                }
            }
            GridKind::Power => {
                for &ratio in &MEAN_RATIOS {
                    for &a in &ROUGHNESS {
                        let g1 = -(1.0 + a);
                        for &l in &LOOKS {
                            for &n in &WINDOW_SIZES {
                                out.push(cell((a, a), (g1, ratio * g1), l, n, eps, ScenarioClass::Ii));
                            }
                        }
                    }
                }
                for (alpha, groups) in POWER_PAIRS {
                    for (group, class) in groups.iter().zip([ScenarioClass::Iii, ScenarioClass::V, ScenarioClass::Iv]) {
                        for &gamma in group {
                            for &l in &LOOKS {
                                for &n in &WINDOW_SIZES {
                                    out.push(cell(alpha, gamma, l, n, eps, class));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
