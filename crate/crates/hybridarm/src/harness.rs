//! Monte Carlo engine: runs the analysis methods over replicated scenarios
//! and reduces the results into operating characteristics.

use rayon::prelude::*;

use crate::error::Result;
use crate::methods;
use crate::model::{Cohort, MethodResult};
use crate::sim::{self, Scenario};
use crate::stats::{mean, sample_variance};
use crate::streams;

/// A method to run in a sweep. `PowerPrior` carries its fixed weight, so a
/// sweep can hold several power prior variants side by side.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    TrialOnly,
    FullPooling,
    PowerPrior(f64),
    NormalizedPowerPrior,
    Lin,
    Daw,
}

impl MethodSpec {
    /// Stable label used in output rows, e.g. `pp_0.25`.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::TrialOnly => "trial_only".into(),
            MethodSpec::FullPooling => "full_pooling".into(),
            MethodSpec::PowerPrior(alpha) => format!("pp_{alpha}"),
            MethodSpec::NormalizedPowerPrior => "npp".into(),
            MethodSpec::Lin => "lin".into(),
            MethodSpec::Daw => "daw".into(),
        }
    }

    /// Run the method on one replicate's data. `rep_seed` feeds any
    /// method-internal randomness (only Lin's pool draw uses it).
    pub fn run(&self, trial: &Cohort, external: &Cohort, rep_seed: u64) -> Result<MethodResult> {
        match self {
            MethodSpec::TrialOnly => methods::analyze_trial_only(trial),
            MethodSpec::FullPooling => methods::analyze_full_pooling(trial, external),
            MethodSpec::PowerPrior(alpha) => methods::analyze_power_prior(trial, external, *alpha),
            MethodSpec::NormalizedPowerPrior => methods::analyze_npp(trial, external),
            MethodSpec::Lin => methods::analyze_lin(trial, external, rep_seed),
            MethodSpec::Daw => methods::analyze_daw(trial, external),
        }
    }
}

/// Operating characteristics of one method under one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    /// Method label, e.g. `daw` or `pp_0.5`.
    pub method: String,
    pub n_reps: usize,
    /// Replicates whose fit failed or did not converge; excluded from all
    /// moments below.
    pub n_failed: usize,
    /// Marginal truth the bias and coverage are measured against.
    pub true_log_hr: f64,
    /// Mean estimate minus the marginal truth.
    pub bias: f64,
    /// Sample variance of the estimates across replicates.
    pub emp_variance: f64,
    /// Fraction of 95% intervals containing the truth.
    pub coverage: f64,
    /// Fraction of intervals excluding 0: power off the null, type I error
    /// at the null.
    pub reject_rate: f64,
    pub mean_ess: f64,
    /// Mean borrowing weight, for the power prior family.
    pub mean_alpha: Option<f64>,
    /// Fewer than two successful replicates: moments are conventions, not
    /// estimates.
    pub degenerate: bool,
}

/// Marginal truth for a scenario. At a conditional hazard ratio of exactly
/// 1 the treatment leaves every hazard untouched, so the marginal log
/// hazard ratio is 0 identically and no Monte Carlo reference is needed
/// (the null is collapsible).
pub fn truth_for(scenario: &Scenario) -> f64 {
    if scenario.conditional_hr == 1.0 {
        0.0
    } else {
        sim::true_marginal_log_hr(scenario)
    }
}

struct RepOutcome {
    log_hr: f64,
    ci_low: f64,
    ci_high: f64,
    ess: f64,
    alpha: Option<f64>,
}

/// Run every method on `n_reps` replicates of one scenario.
///
/// All methods see the same generated data within a replicate; replicate
/// seeds depend only on `(scenario.seed, replicate index)`. Replicates run
/// in parallel on the current rayon pool but are reduced in index order, so
/// results do not depend on scheduling.
pub fn run_scenario(
    scenario: &Scenario,
    specs: &[MethodSpec],
    n_reps: usize,
) -> Vec<ScenarioSummary> {
    let truth = truth_for(scenario);

    let per_rep: Vec<Vec<Option<RepOutcome>>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = streams::replicate_seed(scenario.seed, rep as u64);
            let mut rep_scenario = scenario.clone();
            rep_scenario.seed = rep_seed;
            let (trial, external) = sim::generate(&rep_scenario);
            specs
                .iter()
                .map(|spec| {
                    spec.run(&trial, &external, rep_seed)
                        .ok()
                        .filter(|r| r.converged)
                        .map(|r| RepOutcome {
                            log_hr: r.log_hr,
                            ci_low: r.ci_low,
                            ci_high: r.ci_high,
                            ess: r.ess,
                            alpha: r.alpha_hat,
                        })
                })
                .collect()
        })
        .collect();

    specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let outcomes: Vec<&RepOutcome> =
                per_rep.iter().filter_map(|rep| rep[m].as_ref()).collect();
            let estimates: Vec<f64> = outcomes.iter().map(|o| o.log_hr).collect();
            let n_ok = outcomes.len();
            let covered =
                outcomes.iter().filter(|o| o.ci_low <= truth && truth <= o.ci_high).count();
            let rejected = outcomes.iter().filter(|o| o.ci_low > 0.0 || o.ci_high < 0.0).count();
            let alphas: Vec<f64> = outcomes.iter().filter_map(|o| o.alpha).collect();
            ScenarioSummary {
                scenario: scenario.clone(),
                method: spec.label(),
                n_reps,
                n_failed: n_reps - n_ok,
                true_log_hr: truth,
                bias: if n_ok > 0 { mean(&estimates) - truth } else { 0.0 },
                emp_variance: sample_variance(&estimates),
                coverage: if n_ok > 0 { covered as f64 / n_ok as f64 } else { 0.0 },
                reject_rate: if n_ok > 0 { rejected as f64 / n_ok as f64 } else { 0.0 },
                mean_ess: mean(&outcomes.iter().map(|o| o.ess).collect::<Vec<f64>>()),
                mean_alpha: if alphas.len() == n_ok && n_ok > 0 { Some(mean(&alphas)) } else { None },
                degenerate: n_ok < 2,
            }
        })
        .collect()
}

/// Run a scenario grid. Rows come back in `grid order x method order`
/// regardless of scheduling; for a fixed root seed the output is identical
/// at any parallelism level. `parallelism = 0` uses all cores.
pub fn sweep(
    grid: &[Scenario],
    specs: &[MethodSpec],
    n_reps: usize,
    parallelism: usize,
) -> Vec<ScenarioSummary> {
    let run = || {
        grid.iter()
            .flat_map(|scenario| run_scenario(scenario, specs, n_reps))
            .collect::<Vec<_>>()
    };
    if parallelism == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("failed to build worker pool");
        pool.install(run)
    }
}
