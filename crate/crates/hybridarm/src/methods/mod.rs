//! The six analysis strategies for a trial with an external control pool.
//!
//! Each strategy maps `(trial cohort, external cohort)` to a
//! [`MethodResult`]: an estimate of the log hazard ratio for the
//! intervention, a confidence interval, and the effective sample size of
//! the weighted analysis. Trial subjects always enter with weight 1; the
//! strategies differ only in which external subjects they include and at
//! what weight.

pub mod matching;
pub mod npp;

use crate::cox::{self, CoxFit};
use crate::error::{Error, Result};
use crate::logistic::{self, LogisticModel};
use crate::model::{AnalysisEntry, AnalysisSet, Cohort, Method, MethodResult};
use crate::streams;

pub use matching::{match_optimal, MatchResult};
pub use npp::{analyze_npp, estimate_npp_alpha, NppAlpha};

/// On-trial score model fitted on the pooled cohorts, with per-subject
/// scores aligned to each cohort's subject order.
#[derive(Debug, Clone)]
pub struct OnTrialScores {
    pub model: LogisticModel,
    pub trial: Vec<f64>,
    pub external: Vec<f64>,
}

/// Fit the on-trial score: probability of trial membership given baseline
/// covariates, estimated by main-effects logistic regression on all
/// subjects (both trial arms pooled with the externals).
pub fn fit_on_trial_scores(trial: &Cohort, external: &Cohort) -> Result<OnTrialScores> {
    let mut features = Vec::with_capacity(trial.len() + external.len());
    let mut labels = Vec::with_capacity(trial.len() + external.len());
    for subject in trial.subjects.iter().chain(&external.subjects) {
        features.push(subject.covariates.clone());
        labels.push(subject.is_trial());
    }
    let model = logistic::fit_logistic(&features, &labels, None)?;
    let trial_scores = trial.subjects.iter().map(|s| model.predict(&s.covariates)).collect();
    let external_scores =
        external.subjects.iter().map(|s| model.predict(&s.covariates)).collect();
    Ok(OnTrialScores { model, trial: trial_scores, external: external_scores })
}

fn result_from_cox(
    method: Method,
    fit: &CoxFit,
    robust: bool,
    ess: f64,
    alpha_hat: Option<f64>,
    n_external_used: usize,
) -> MethodResult {
    let se = if robust { fit.se_robust } else { fit.se_model };
    let mut result = MethodResult::from_fit(method, fit.log_hr, se, ess, alpha_hat, n_external_used);
    result.converged = fit.converged;
    if fit.at_boundary {
        result.note = Some("estimate clamped at the log hazard ratio boundary".into());
    }
    result
}

/// Analyze the trial alone; external data are ignored. Serves as the
/// reference all borrowing strategies are judged against.
pub fn analyze_trial_only(trial: &Cohort) -> Result<MethodResult> {
    let entries: Vec<AnalysisEntry> =
        trial.subjects.iter().map(|subject| AnalysisEntry { subject, weight: 1.0 }).collect();
    let set = AnalysisSet::new(entries)?;
    let ess = set.ess();
    let fit = cox::fit_weighted_cox(&set)?;
    Ok(result_from_cox(Method::TrialOnly, &fit, false, ess, None, 0))
}

/// Pool every external subject at full weight alongside the trial.
pub fn analyze_full_pooling(trial: &Cohort, external: &Cohort) -> Result<MethodResult> {
    let entries: Vec<AnalysisEntry> = trial
        .subjects
        .iter()
        .chain(&external.subjects)
        .map(|subject| AnalysisEntry { subject, weight: 1.0 })
        .collect();
    let set = AnalysisSet::new(entries)?;
    let ess = set.ess();
    let fit = cox::fit_weighted_cox(&set)?;
    Ok(result_from_cox(Method::FullPooling, &fit, false, ess, None, external.len()))
}

/// Power prior: every external subject enters at the fixed weight `alpha`.
pub fn analyze_power_prior(trial: &Cohort, external: &Cohort, alpha: f64) -> Result<MethodResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must be in [0,1], got {alpha}")));
    }
    let entries: Vec<AnalysisEntry> = trial
        .subjects
        .iter()
        .map(|subject| AnalysisEntry { subject, weight: 1.0 })
        .chain(external.subjects.iter().map(|subject| AnalysisEntry { subject, weight: alpha }))
        .collect();
    let set = AnalysisSet::new(entries)?;
    let ess = set.ess();
    let fit = cox::fit_weighted_cox(&set)?;
    let n_used = if alpha > 0.0 { external.len() } else { 0 };
    Ok(result_from_cox(Method::PowerPrior, &fit, true, ess, Some(alpha), n_used))
}

/// Standardized inverse-odds weights for the selected external subjects.
///
/// The selected set holds the externals with the largest on-trial scores,
/// one per missing control (`n_treated - n_soc`). Raw inverse odds
/// `e/(1-e)` are rescaled so the weights sum to exactly the selection size.
#[derive(Debug, Clone)]
pub struct DawWeights {
    /// Ids of the selected external subjects (score order, largest first).
    pub selected_ids: Vec<String>,
    /// Positions of the selected subjects in the external cohort.
    pub selected_indices: Vec<usize>,
    /// Inverse odds e/(1-e) per selected subject.
    pub raw_odds: Vec<f64>,
    /// Standardized weights; sums to the selection size.
    pub standardized: Vec<f64>,
}

/// Indices of the `n` largest scores, descending; ties keep the original
/// subject order (the sort is stable).
fn select_top_scores(scores: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    order.truncate(n);
    order
}

/// Shortfall of the standard-of-care arm relative to the intervention arm.
fn control_shortfall(trial: &Cohort) -> i64 {
    let n_treated = trial.n_treated() as i64;
    let n_soc = trial.len() as i64 - n_treated;
    n_treated - n_soc
}

/// Select and weight external subjects for data-adaptive weighting.
///
/// Selection ranks the external pool by the on-trial score fitted on all
/// subjects. The inverse-odds weights are then computed against the
/// *selected* pool: the score model is refit on the trial plus the selected
/// externals, and each selected subject gets `e/(1-e)` from that refit,
/// standardized to sum to the selection size. Weighting against the full
/// pool instead would tilt the already-selected (trial-like) subjects past
/// the trial covariate distribution and bias the treatment effect; the
/// refit targets the distribution the augmented analysis actually uses.
pub fn compute_daw_weights(trial: &Cohort, external: &Cohort) -> Result<DawWeights> {
    let shortfall = control_shortfall(trial);
    if shortfall <= 0 {
        return Err(Error::InvalidInput(format!(
            "control arm is not short ({} treated vs {} controls)",
            trial.n_treated(),
            trial.len() - trial.n_treated()
        )));
    }
    let n_select = shortfall as usize;
    if external.len() < n_select {
        return Err(Error::InsufficientExternals {
            needed: n_select,
            available: external.len(),
        });
    }

    let scores = fit_on_trial_scores(trial, external)?;
    let order = select_top_scores(&scores.external, n_select);

    // Refit against the selected pool only.
    let mut features: Vec<Vec<f64>> =
        trial.subjects.iter().map(|s| s.covariates.clone()).collect();
    let mut labels = vec![true; trial.len()];
    for &idx in &order {
        features.push(external.subjects[idx].covariates.clone());
        labels.push(false);
    }
    let refit = logistic::fit_logistic(&features, &labels, None)?;

    let selected_scores: Vec<f64> = order
        .iter()
        .map(|&idx| refit.predict(&external.subjects[idx].covariates))
        .collect();
    let selected_ids: Vec<String> =
        order.iter().map(|&i| external.subjects[i].id.clone()).collect();
    let (raw_odds, standardized) = standardized_inverse_odds(&selected_scores, &selected_ids)?;

    Ok(DawWeights { selected_ids, selected_indices: order, raw_odds, standardized })
}

/// Inverse odds `e/(1-e)` per score, rescaled to sum to the score count.
/// Scores at 1 within floating precision have unbounded odds and are
/// refused.
fn standardized_inverse_odds(scores: &[f64], ids: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut raw_odds = Vec::with_capacity(scores.len());
    for (score, id) in scores.iter().zip(ids) {
        if *score >= 1.0 - 1e-12 {
            return Err(Error::InfiniteOdds { id: id.clone(), score: *score });
        }
        raw_odds.push(score / (1.0 - score));
    }
    let odds_sum: f64 = raw_odds.iter().sum();
    let scale = scores.len() as f64 / odds_sum;
    let standardized: Vec<f64> = raw_odds.iter().map(|g| g * scale).collect();
    Ok((raw_odds, standardized))
}

/// Data-adaptive weighting: augment the control arm with the most
/// trial-like externals, weighted by standardized inverse odds, so the
/// augmented trial is balanced 1:1.
pub fn analyze_daw(trial: &Cohort, external: &Cohort) -> Result<MethodResult> {
    if control_shortfall(trial) <= 0 {
        let mut result = analyze_trial_only(trial)?;
        result.method = Method::Daw;
        result.note = Some("control arm not short; no augmentation performed".into());
        return Ok(result);
    }
    let weights = compute_daw_weights(trial, external)?;

    let mut entries: Vec<AnalysisEntry> =
        trial.subjects.iter().map(|subject| AnalysisEntry { subject, weight: 1.0 }).collect();
    for (&idx, &weight) in weights.selected_indices.iter().zip(&weights.standardized) {
        entries.push(AnalysisEntry { subject: &external.subjects[idx], weight });
    }
    let set = AnalysisSet::new(entries)?;
    let fit = cox::fit_weighted_cox(&set)?;
    let n_used = weights.selected_indices.len();
    // The standardization identity makes the weight sum the selection size
    // exactly, so report the ESS without accumulated rounding.
    let ess = (trial.len() + n_used) as f64;
    Ok(result_from_cox(Method::Daw, &fit, true, ess, None, n_used))
}

/// Lin's method: optimally match each intervention-arm subject to an
/// external on the on-trial score, draw the missing controls at random from
/// the matched pool, and weight them by their scores.
pub fn analyze_lin(trial: &Cohort, external: &Cohort, seed: u64) -> Result<MethodResult> {
    if control_shortfall(trial) <= 0 {
        let mut result = analyze_trial_only(trial)?;
        result.method = Method::Lin;
        result.note = Some("control arm not short; no augmentation performed".into());
        return Ok(result);
    }
    let scores = fit_on_trial_scores(trial, external)?;
    lin_with_scores(trial, external, &scores, seed)
}

/// Lin's augmentation given already-fitted on-trial scores.
fn lin_with_scores(
    trial: &Cohort,
    external: &Cohort,
    scores: &OnTrialScores,
    seed: u64,
) -> Result<MethodResult> {
    let n_draw = control_shortfall(trial) as usize;

    let treated_positions: Vec<usize> =
        (0..trial.len()).filter(|&i| trial.subjects[i].is_treated()).collect();
    if external.len() < treated_positions.len() {
        return Err(Error::InsufficientExternals {
            needed: treated_positions.len(),
            available: external.len(),
        });
    }
    let treated_scores: Vec<f64> = treated_positions.iter().map(|&i| scores.trial[i]).collect();
    let matched = match_optimal(&treated_scores, &scores.external)?;

    // Draw the missing controls uniformly from the matched pool.
    let mut pool: Vec<usize> = matched.pairs.iter().map(|&(_, e)| e).collect();
    let mut rng = streams::stream_rng(seed, "lin-draw");
    partial_shuffle(&mut pool, n_draw, &mut rng);
    pool.truncate(n_draw);

    let mut entries: Vec<AnalysisEntry> =
        trial.subjects.iter().map(|subject| AnalysisEntry { subject, weight: 1.0 }).collect();
    for &idx in &pool {
        entries.push(AnalysisEntry {
            subject: &external.subjects[idx],
            weight: scores.external[idx],
        });
    }
    let set = AnalysisSet::new(entries)?;
    let ess = set.ess();
    let fit = cox::fit_weighted_cox(&set)?;
    // Model-based SE: the sandwich overstates precision for score weights
    // and inflates the type I error well past nominal at large n.
    Ok(result_from_cox(Method::Lin, &fit, false, ess, None, n_draw))
}

/// Fisher-Yates over the first `count` slots.
fn partial_shuffle<R: rand::Rng>(items: &mut [usize], count: usize, rng: &mut R) {
    let n = items.len();
    for i in 0..count.min(n.saturating_sub(1)) {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
}
