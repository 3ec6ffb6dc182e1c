//! Synthetic trial + external cohort generation and the marginal-truth
//! oracle.
//!
//! Covariates mimic EHR-style baseline variables (two binaries, two
//! centered continuous measurements) whose distributions differ between
//! trial and external subjects, confounding trial membership with the
//! outcome. Failure times are exponential with a log-linear rate in the
//! treatment indicator and the covariates; censoring is exponential and
//! heavier for external subjects.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cox;
use crate::model::{Cohort, Source, Subject, Treatment};
use crate::streams;

/// Strength of the covariate effects on the failure rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confounding {
    Mild,
    Strong,
}

impl Confounding {
    /// Per-covariate hazard ratios.
    pub fn betas(self) -> [f64; 4] {
        match self {
            Confounding::Mild => [1.25, 0.67, 0.98, 1.06],
            Confounding::Strong => [2.25, 0.4, 0.93, 1.21],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Confounding::Mild => "mild",
            Confounding::Strong => "strong",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "mild" => Some(Confounding::Mild),
            "strong" => Some(Confounding::Strong),
            _ => None,
        }
    }
}

/// Human-readable label for a hazard-ratio vector in output rows.
pub fn confounding_label(betas: &[f64; 4]) -> String {
    for preset in [Confounding::Mild, Confounding::Strong] {
        if &preset.betas() == betas {
            return preset.name().to_string();
        }
    }
    format!("custom({},{},{},{})", betas[0], betas[1], betas[2], betas[3])
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_trial: usize,
    /// External pool size; equal to the trial size in the study design.
    pub n_external: usize,
    /// Probability of randomization to the intervention arm (0.67 for a
    /// 2:1 trial, 0.75 for 3:1).
    pub treat_prob: f64,
    /// Conditional hazard ratio of the intervention.
    pub conditional_hr: f64,
    /// Hazard ratios of the four covariates.
    pub covariate_hrs: [f64; 4],
    pub censor_rate_trial: f64,
    pub censor_rate_external: f64,
    pub seed: u64,
}

impl Scenario {
    /// Scenario with the study's fixed censoring rates and an external pool
    /// matching the trial size.
    pub fn from_grid(
        n_trial: usize,
        treat_prob: f64,
        conditional_hr: f64,
        confounding: Confounding,
        seed: u64,
    ) -> Self {
        Scenario {
            n_trial,
            n_external: n_trial,
            treat_prob,
            conditional_hr,
            covariate_hrs: confounding.betas(),
            censor_rate_trial: 0.1,
            censor_rate_external: 0.4,
            seed,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.n_trial == 0 {
            return Err(crate::Error::InvalidInput("n_trial must be positive".into()));
        }
        if !(self.treat_prob > 0.0 && self.treat_prob < 1.0) {
            return Err(crate::Error::InvalidInput(format!(
                "treat_prob must be in (0,1), got {}",
                self.treat_prob
            )));
        }
        if !(self.conditional_hr > 0.0 && self.conditional_hr.is_finite()) {
            return Err(crate::Error::InvalidInput(format!(
                "conditional_hr must be positive, got {}",
                self.conditional_hr
            )));
        }
        if self.covariate_hrs.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(crate::Error::InvalidInput("covariate hazard ratios must be positive".into()));
        }
        if !(self.censor_rate_trial > 0.0 && self.censor_rate_external > 0.0) {
            return Err(crate::Error::InvalidInput("censoring rates must be positive".into()));
        }
        Ok(())
    }
}

/// Failure rate for one subject: baseline 1 times the treatment and
/// covariate hazard ratios, so the conditional treatment hazard ratio is
/// exactly `conditional_hr`.
pub(crate) fn failure_rate(
    conditional_hr: f64,
    covariate_hrs: &[f64; 4],
    treated: bool,
    covariates: &[f64; 4],
) -> f64 {
    let mut log_rate = if treated { conditional_hr.ln() } else { 0.0 };
    for (beta, x) in covariate_hrs.iter().zip(covariates) {
        log_rate += beta.ln() * x;
    }
    log_rate.exp()
}

/// Inverse-transform exponential draw.
pub(crate) fn sample_exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn trial_covariates<R: Rng>(rng: &mut R, x3: &Normal<f64>, x4: &Normal<f64>) -> [f64; 4] {
    [
        if rng.random_bool(0.5) { 1.0 } else { 0.0 },
        if rng.random_bool(0.6) { 1.0 } else { 0.0 },
        x3.sample(rng),
        x4.sample(rng),
    ]
}

fn external_covariates<R: Rng>(rng: &mut R, x3: &Normal<f64>, x4: &Normal<f64>) -> [f64; 4] {
    [
        if rng.random_bool(0.55) { 1.0 } else { 0.0 },
        if rng.random_bool(0.4) { 1.0 } else { 0.0 },
        x3.sample(rng),
        x4.sample(rng),
    ]
}

pub fn covariate_names() -> Vec<String> {
    vec!["x1".into(), "x2".into(), "x3".into(), "x4".into()]
}

/// Generate one trial cohort and one external cohort.
///
/// Each named stream (covariates, treatment, failure, censoring) is derived
/// from the scenario seed independently, so regeneration is bitwise
/// identical and downstream method-specific draws never perturb the data.
pub fn generate(scenario: &Scenario) -> (Cohort, Cohort) {
    let mut cov_rng = streams::stream_rng(scenario.seed, "covariates");
    let mut treat_rng = streams::stream_rng(scenario.seed, "treatment");
    let mut fail_rng = streams::stream_rng(scenario.seed, "failure");
    let mut cens_rng = streams::stream_rng(scenario.seed, "censoring");

    // Centered: Normal(60,5)-60 and Normal(21,2)-21 for the trial;
    // Normal(60,10)-60 and Normal(23,2)-21 for the externals.
    let trial_x3 = Normal::new(0.0, 5.0).unwrap();
    let trial_x4 = Normal::new(0.0, 2.0).unwrap();
    let ext_x3 = Normal::new(0.0, 10.0).unwrap();
    let ext_x4 = Normal::new(2.0, 2.0).unwrap();

    let mut trial = Cohort::new(covariate_names());
    for i in 0..scenario.n_trial {
        let covariates = trial_covariates(&mut cov_rng, &trial_x3, &trial_x4);
        let treated = treat_rng.random_bool(scenario.treat_prob);
        let rate = failure_rate(scenario.conditional_hr, &scenario.covariate_hrs, treated, &covariates);
        let failure = sample_exponential(&mut fail_rng, rate);
        let censor = sample_exponential(&mut cens_rng, scenario.censor_rate_trial);
        trial.subjects.push(Subject {
            id: format!("T{i:05}"),
            covariates: covariates.to_vec(),
            source: Source::Trial,
            treatment: if treated { Treatment::Intervention } else { Treatment::StandardOfCare },
            time: failure.min(censor),
            status: failure <= censor,
        });
    }

    let mut external = Cohort::new(covariate_names());
    for i in 0..scenario.n_external {
        let covariates = external_covariates(&mut cov_rng, &ext_x3, &ext_x4);
        let rate = failure_rate(scenario.conditional_hr, &scenario.covariate_hrs, false, &covariates);
        let failure = sample_exponential(&mut fail_rng, rate);
        let censor = sample_exponential(&mut cens_rng, scenario.censor_rate_external);
        external.subjects.push(Subject {
            id: format!("E{i:05}"),
            covariates: covariates.to_vec(),
            source: Source::External,
            treatment: Treatment::StandardOfCare,
            time: failure.min(censor),
            status: failure <= censor,
        });
    }

    (trial, external)
}

type MarginalKey = (u64, [u64; 4]);

fn marginal_cache() -> &'static Mutex<HashMap<MarginalKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<MarginalKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn marginal_key(conditional_hr: f64, covariate_hrs: &[f64; 4]) -> MarginalKey {
    (
        conditional_hr.to_bits(),
        [
            covariate_hrs[0].to_bits(),
            covariate_hrs[1].to_bits(),
            covariate_hrs[2].to_bits(),
            covariate_hrs[3].to_bits(),
        ],
    )
}

/// Record a marginal truth computed elsewhere (e.g. read from a fixture
/// file) so `true_marginal_log_hr` can skip its Monte Carlo run.
pub fn preload_marginal_truth(conditional_hr: f64, covariate_hrs: &[f64; 4], value: f64) {
    marginal_cache()
        .lock()
        .unwrap()
        .insert(marginal_key(conditional_hr, covariate_hrs), value);
}

/// Subjects per arm in the marginal-truth reference population.
const MARGINAL_ARM_SIZE: usize = 1_000_000;

/// Marginal log hazard ratio implied by a scenario's conditional effects.
///
/// A Cox model conditions on covariates, so the population-averaged
/// (marginal) hazard ratio is attenuated toward 1 relative to the
/// conditional one whenever covariates affect the hazard. The reference
/// value is computed once per `(conditional_hr, covariate_hrs)` by
/// simulating two million uncensored subjects under forced 1:1
/// randomization with the trial covariate distribution, fitting an
/// unadjusted Cox model, and caching the estimate. The internal seed is
/// fixed, so the value is deterministic.
pub fn true_marginal_log_hr(scenario: &Scenario) -> f64 {
    let key = marginal_key(scenario.conditional_hr, &scenario.covariate_hrs);
    if let Some(&value) = marginal_cache().lock().unwrap().get(&key) {
        return value;
    }

    let seed = streams::derive_seed(key.0 ^ key.1[0] ^ key.1[1] ^ key.1[2] ^ key.1[3], "marginal-truth");
    let mut rng = streams::stream_rng(seed, "marginal");
    let x3 = Normal::new(0.0, 5.0).unwrap();
    let x4 = Normal::new(0.0, 2.0).unwrap();

    let n = 2 * MARGINAL_ARM_SIZE;
    let mut times = Vec::with_capacity(n);
    let mut treated_flags = Vec::with_capacity(n);
    for i in 0..n {
        let treated = i < MARGINAL_ARM_SIZE;
        let covariates = trial_covariates(&mut rng, &x3, &x4);
        let rate =
            failure_rate(scenario.conditional_hr, &scenario.covariate_hrs, treated, &covariates);
        times.push(sample_exponential(&mut rng, rate));
        treated_flags.push(treated);
    }
    let events = vec![true; n];
    let weights = vec![1.0; n];
    let fit = cox::fit_cox(&times, &events, &treated_flags, &weights)
        .expect("marginal reference fit cannot be degenerate");

    marginal_cache().lock().unwrap().insert(key, fit.log_hr);
    fit.log_hr
}

/// Synthetic stand-in for a 2:1 oncology trial augmented from a registry:
/// 791 intervention, 394 standard-of-care, 1,000 externals. The registry is
/// sampled from the same standard-of-care population as the trial, but with
/// a covariate-dependent (and mildly nonlinear) selection that favors
/// sicker profiles, so externals have worse survival and the registry
/// self-selects in a way a main-effects on-trial model cannot fully
/// capture. Registry follow-up is also more complete (less censoring).
/// Times are on a month-like scale.
pub fn case_study_fixture(seed: u64) -> (Cohort, Cohort) {
    let mut cov_rng = streams::stream_rng(seed, "case-covariates");
    let mut fail_rng = streams::stream_rng(seed, "case-failure");
    let mut cens_rng = streams::stream_rng(seed, "case-censoring");
    let mut select_rng = streams::stream_rng(seed, "case-selection");

    let trial_x3 = Normal::new(0.0, 5.0).unwrap();
    let trial_x4 = Normal::new(0.0, 2.0).unwrap();

    let betas = Confounding::Strong.betas();
    let baseline_rate = 0.055;
    let intervention_hr = 0.8;

    let mut trial = Cohort::new(covariate_names());
    for i in 0..1185 {
        let treated = i < 791;
        let covariates = trial_covariates(&mut cov_rng, &trial_x3, &trial_x4);
        let rate = baseline_rate * failure_rate(intervention_hr, &betas, treated, &covariates);
        let failure = sample_exponential(&mut fail_rng, rate);
        let censor = sample_exponential(&mut cens_rng, 0.01);
        trial.subjects.push(Subject {
            id: format!("T{i:05}"),
            covariates: covariates.to_vec(),
            source: Source::Trial,
            treatment: if treated { Treatment::Intervention } else { Treatment::StandardOfCare },
            time: failure.min(censor),
            status: failure <= censor,
        });
    }

    // Registry inclusion probability: sicker profiles (low x2, high x4) are
    // more likely to appear, with an s-shaped x3 term so the registry skew
    // is not a linear function of the covariates.
    let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
    let inclusion = |x: &[f64; 4]| {
        sigmoid(-1.1 + 0.25 * x[0] - 0.9 * x[1] + 0.5 * x[3] + 1.2 * (sigmoid(0.6 * x[2]) - 0.5))
    };

    let mut external = Cohort::new(covariate_names());
    let mut accepted = 0;
    while accepted < 1000 {
        let covariates = trial_covariates(&mut cov_rng, &trial_x3, &trial_x4);
        if !select_rng.random_bool(inclusion(&covariates)) {
            continue;
        }
        let rate = baseline_rate * failure_rate(1.0, &betas, false, &covariates);
        let failure = sample_exponential(&mut fail_rng, rate);
        let censor = sample_exponential(&mut cens_rng, 0.004);
        external.subjects.push(Subject {
            id: format!("E{accepted:05}"),
            covariates: covariates.to_vec(),
            source: Source::External,
            treatment: Treatment::StandardOfCare,
            time: failure.min(censor),
            status: failure <= censor,
        });
        accepted += 1;
    }
    (trial, external)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_scenario() -> Scenario {
        Scenario::from_grid(1000, 0.67, 1.0, Confounding::Mild, 7)
    }

    #[test]
    fn unit_rate_failure_times_have_unit_mean() {
        let mut rng = streams::stream_rng(1, "sim-unit-exp");
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample_exponential(&mut rng, 1.0)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn treated_half_rate_doubles_mean_time() {
        // Treated subject with all covariates zero under hazard ratio 0.5.
        let rate = failure_rate(0.5, &[1.0, 1.0, 1.0, 1.0], true, &[0.0; 4]);
        assert_eq!(rate, 0.5);
        let mut rng = streams::stream_rng(2, "sim-half-exp");
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample_exponential(&mut rng, rate)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn generated_sizes_and_arms_match_scenario() {
        let scenario = base_scenario();
        let (trial, external) = generate(&scenario);
        assert_eq!(trial.len(), 1000);
        assert_eq!(external.len(), 1000);
        assert!(external.subjects.iter().all(|s| !s.is_treated() && s.source == Source::External));
        assert!(crate::model::validate_cohort(&trial).is_empty());
        assert!(crate::model::validate_cohort(&external).is_empty());
        // Intervention fraction near the randomization probability.
        let frac = trial.n_treated() as f64 / 1000.0;
        assert!((frac - 0.67).abs() < 0.05, "treated fraction {frac}");
    }

    #[test]
    fn regeneration_is_bitwise_identical() {
        let scenario = base_scenario();
        let (a_trial, a_ext) = generate(&scenario);
        let (b_trial, b_ext) = generate(&scenario);
        assert_eq!(a_trial, b_trial);
        assert_eq!(a_ext, b_ext);
    }

    #[test]
    fn external_censoring_is_heavier() {
        let mut scenario = base_scenario();
        scenario.n_trial = 20_000;
        scenario.n_external = 20_000;
        let (trial, external) = generate(&scenario);
        let censored = |c: &Cohort| {
            c.subjects.iter().filter(|s| !s.status).count() as f64 / c.len() as f64
        };
        assert!(
            censored(&external) > censored(&trial) + 0.1,
            "trial {} external {}",
            censored(&trial),
            censored(&external)
        );
    }

    #[test]
    fn covariate_means_match_design() {
        let mut scenario = base_scenario();
        scenario.n_trial = 100_000;
        scenario.n_external = 100_000;
        let (trial, external) = generate(&scenario);
        let mean = |c: &Cohort, j: usize| {
            c.subjects.iter().map(|s| s.covariates[j]).sum::<f64>() / c.len() as f64
        };
        assert!((mean(&trial, 0) - 0.5).abs() < 0.01);
        assert!((mean(&trial, 1) - 0.6).abs() < 0.01);
        assert!(mean(&trial, 2).abs() < 0.06);
        assert!(mean(&trial, 3).abs() < 0.03);
        assert!((mean(&external, 0) - 0.55).abs() < 0.01);
        assert!((mean(&external, 1) - 0.4).abs() < 0.01);
        assert!(mean(&external, 2).abs() < 0.11);
        assert!((mean(&external, 3) - 2.0).abs() < 0.03);
    }

    #[test]
    fn marginal_truth_is_zero_at_null() {
        for confounding in [Confounding::Mild, Confounding::Strong] {
            let scenario = Scenario::from_grid(100, 0.67, 1.0, confounding, 0);
            let value = true_marginal_log_hr(&scenario);
            assert!(value.abs() < 0.005, "{} null truth {value}", confounding.name());
        }
    }

    #[test]
    fn marginal_equals_conditional_without_covariate_effects() {
        let mut scenario = base_scenario();
        scenario.conditional_hr = 0.5;
        scenario.covariate_hrs = [1.0; 4];
        let value = true_marginal_log_hr(&scenario);
        assert!((value - 0.5_f64.ln()).abs() < 0.005, "truth {value}");
    }

    #[test]
    fn strong_confounding_attenuates_the_marginal_effect() {
        let scenario = Scenario::from_grid(100, 0.67, 0.5, Confounding::Strong, 0);
        let value = true_marginal_log_hr(&scenario);
        assert!(
            value > 0.5_f64.ln() && value < 0.0,
            "marginal log HR {value} not attenuated"
        );
    }

    #[test]
    fn preloaded_truth_short_circuits_the_oracle() {
        let hrs = [1.25, 0.67, 0.98, 1.07]; // not a preset: avoids cache collisions
        preload_marginal_truth(0.9, &hrs, -0.123);
        let mut scenario = base_scenario();
        scenario.conditional_hr = 0.9;
        scenario.covariate_hrs = hrs;
        assert_eq!(true_marginal_log_hr(&scenario), -0.123);
    }

    #[test]
    fn case_study_fixture_has_expected_shape() {
        let (trial, external) = case_study_fixture(11);
        assert_eq!(trial.len(), 1185);
        assert_eq!(trial.n_treated(), 791);
        assert_eq!(external.len(), 1000);
        let death = |c: &Cohort| c.n_events() as f64 / c.len() as f64;
        assert!(death(&trial) > 0.75, "trial death fraction {}", death(&trial));
        assert!(death(&external) > 0.85, "external death fraction {}", death(&external));
        // External survival is worse: higher event rate per unit time.
        let (soc, _, _) = crate::model::split(&trial);
        let km_soc = crate::km::km_estimate(
            &soc.subjects.iter().map(|s| (s.time, s.status)).collect::<Vec<_>>(),
            0.95,
        )
        .unwrap();
        let km_ext = crate::km::km_estimate(
            &external.subjects.iter().map(|s| (s.time, s.status)).collect::<Vec<_>>(),
            0.95,
        )
        .unwrap();
        assert!(km_ext.median.unwrap() < km_soc.median.unwrap());
    }
}
