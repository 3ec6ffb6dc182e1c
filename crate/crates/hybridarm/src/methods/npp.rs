//! Normalized power prior: the external-data weight is estimated from the
//! data instead of being fixed.
//!
//! The joint posterior couples the treatment effect, the baseline event
//! rate, and the borrowing weight `alpha`:
//!
//! ```text
//! q(a) = [ integral of L(effect, rate | D) * L(rate | D0)^a ]
//!        / [ integral of L(rate | D0)^a ]
//! ```
//!
//! Externals are single-arm, so they inform the baseline rate only; the
//! normalizing integral in the denominator is what rewards borrowing when
//! the external event rate agrees with the trial controls and punishes it
//! when they conflict. A partial likelihood cannot express this (it is flat
//! in everything the externals observe), so the weight estimation uses a
//! censoring-aware exponential working likelihood, under which both
//! integrals above reduce to gamma functions and the marginal posterior of
//! `alpha` is available in closed form. The resulting posterior-mean
//! `alpha` is then plugged into the weighted Cox fit, like any other power
//! prior.
//!
//! Flat priors on the effect and log-rate, uniform prior on `alpha`, and a
//! fixed grid over `alpha` with the posterior mean as the estimate.

use crate::error::{Error, Result};
use crate::model::{Cohort, Method, MethodResult};
use crate::stats::{ln_gamma, log_sum_exp};

/// Grid for the alpha posterior: 0.005, 0.015, ..., 0.995.
const GRID_STEP: f64 = 0.01;
const GRID_POINTS: usize = 100;

/// Estimated borrowing weight with its posterior profile.
#[derive(Debug, Clone)]
pub struct NppAlpha {
    /// Posterior mean of alpha over the grid.
    pub alpha_hat: f64,
    /// `(alpha, log posterior mass)` per evaluated grid point; the masses
    /// exponentiate to a distribution summing to 1.
    pub profile: Vec<(f64, f64)>,
    /// Grid points skipped because the Laplace approximation degenerated.
    pub skipped: usize,
}

/// Event and censoring counts plus total exposure time of a set of
/// subjects.
#[derive(Debug, Clone, Copy, Default)]
struct Exposure {
    events: f64,
    censored: f64,
    time: f64,
}

impl Exposure {
    fn add(&mut self, time: f64, event: bool) {
        self.time += time;
        if event {
            self.events += 1.0;
        } else {
            self.censored += 1.0;
        }
    }
}

/// Estimate the borrowing weight from the data.
pub fn estimate_npp_alpha(trial: &Cohort, external: &Cohort) -> Result<NppAlpha> {
    if trial.is_empty() || trial.n_events() == 0 {
        return Err(Error::InvalidInput("trial cohort must be nonempty with events".into()));
    }
    if external.is_empty() || external.n_events() == 0 {
        return Err(Error::InvalidInput("external cohort must be nonempty with events".into()));
    }

    // Only the control-side exposures matter: externals are single-arm, so
    // the treated-arm factor of the integrated likelihood is alpha-free.
    let mut control = Exposure::default();
    for subject in trial.subjects.iter().filter(|s| !s.is_treated()) {
        control.add(subject.time, subject.status);
    }
    let mut ext = Exposure::default();
    for subject in &external.subjects {
        ext.add(subject.time, subject.status);
    }

    let mut alphas = Vec::with_capacity(GRID_POINTS);
    let mut log_weights = Vec::with_capacity(GRID_POINTS);
    let mut skipped = 0;
    for i in 0..GRID_POINTS {
        let alpha = GRID_STEP / 2.0 + GRID_STEP * i as f64;
        match log_profile_point(alpha, control, ext) {
            Some(lq) => {
                alphas.push(alpha);
                log_weights.push(lq);
            }
            None => skipped += 1,
        }
    }
    if alphas.is_empty() {
        return Err(Error::DegenerateProfile);
    }

    let total = log_sum_exp(&log_weights);
    let mut alpha_hat = 0.0;
    let mut profile = Vec::with_capacity(alphas.len());
    for (alpha, lw) in alphas.iter().zip(&log_weights) {
        let mass = (lw - total).exp();
        alpha_hat += alpha * mass;
        profile.push((*alpha, lw - total));
    }
    Ok(NppAlpha { alpha_hat, profile, skipped })
}

/// Log posterior mass of one grid point, up to alpha-free constants.
///
/// The working model sees two independent exponential processes, failure
/// and censoring, each borrowed at the same weight. Integrating the
/// alpha-powered likelihood over a log-rate gives gamma integrals on both
/// sides of the ratio; the treated-arm factor and the flat-prior widths do
/// not depend on `alpha` and drop out, leaving per process
///
/// ```text
/// ln q(a) = lnG(d_c + a*d_0) - (d_c + a*d_0) * ln(y_c + a*y_0)
///         + a*d_0 * ln(a*y_0) - lnG(a*d_0)
/// ```
///
/// A process with no external occurrences carries no borrowable
/// information (its normalizer is improper) and is dropped.
fn log_profile_point(alpha: f64, control: Exposure, ext: Exposure) -> Option<f64> {
    let mut value = rate_component(alpha, control.events, control.time, ext.events, ext.time)?;
    if ext.censored > 0.0 {
        value += rate_component(alpha, control.censored, control.time, ext.censored, ext.time)?;
    }
    value.is_finite().then_some(value)
}

fn rate_component(alpha: f64, d_control: f64, y_control: f64, d_ext: f64, y_ext: f64) -> Option<f64> {
    let pooled_events = d_control + alpha * d_ext;
    let pooled_time = y_control + alpha * y_ext;
    if pooled_events <= 0.0 || pooled_time <= 0.0 {
        return None;
    }
    Some(
        ln_gamma(pooled_events) - pooled_events * pooled_time.ln()
            + alpha * d_ext * (alpha * y_ext).ln()
            - ln_gamma(alpha * d_ext),
    )
}

/// Normalized power prior analysis: estimate the weight, then run the power
/// prior at the estimated value.
pub fn analyze_npp(trial: &Cohort, external: &Cohort) -> Result<MethodResult> {
    let alpha = estimate_npp_alpha(trial, external)?;
    let mut result = super::analyze_power_prior(trial, external, alpha.alpha_hat)?;
    result.method = Method::NormalizedPowerPrior;
    result.alpha_hat = Some(alpha.alpha_hat);
    if alpha.skipped > 0 {
        result.note = Some(format!("{} degenerate grid points skipped", alpha.skipped));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Source, Subject, Treatment};

    fn subject(id: &str, source: Source, treated: bool, time: f64, status: bool) -> Subject {
        Subject {
            id: id.into(),
            covariates: vec![0.0],
            source,
            treatment: if treated { Treatment::Intervention } else { Treatment::StandardOfCare },
            time,
            status,
        }
    }

    fn tiny_fixture() -> (Cohort, Cohort) {
        let mut trial = Cohort::new(vec!["x1".into()]);
        for (i, (treated, time, status)) in [
            (true, 2.1, true),
            (true, 3.4, true),
            (true, 1.2, false),
            (false, 0.9, true),
            (false, 1.8, true),
        ]
        .into_iter()
        .enumerate()
        {
            trial.subjects.push(subject(&format!("t{i}"), Source::Trial, treated, time, status));
        }
        let mut external = Cohort::new(vec!["x1".into()]);
        for (i, (time, status)) in
            [(1.1, true), (0.7, true), (2.3, true), (1.9, false), (0.4, true)]
                .into_iter()
                .enumerate()
        {
            external
                .subjects
                .push(subject(&format!("e{i}"), Source::External, false, time, status));
        }
        (trial, external)
    }

    /// Posterior mean of alpha by dense numerical integration over the
    /// treatment effect and the two log-rates at every alpha, straight from
    /// per-subject likelihood terms. Shares only the posterior definition
    /// with the closed-form estimator.
    fn quadrature_alpha(trial: &Cohort, external: &Cohort) -> f64 {
        // Failure process over the whole trial (effect on the treated arm).
        let loglik_trial_fail = |theta: f64, mu: f64| -> f64 {
            let mut ll = 0.0;
            for s in &trial.subjects {
                let lp = if s.is_treated() { mu + theta } else { mu };
                ll += if s.status { lp } else { 0.0 } - lp.exp() * s.time;
            }
            ll
        };
        let loglik_ext_fail = |mu: f64| -> f64 {
            let mut ll = 0.0;
            for s in &external.subjects {
                ll += if s.status { mu } else { 0.0 } - mu.exp() * s.time;
            }
            ll
        };
        // Censoring process of the control experience only; the treated
        // arm's censoring factor is alpha-free and cancels.
        let loglik_ctrl_cens = |mu: f64| -> f64 {
            let mut ll = 0.0;
            for s in trial.subjects.iter().filter(|s| !s.is_treated()) {
                ll += if s.status { 0.0 } else { mu } - mu.exp() * s.time;
            }
            ll
        };
        let loglik_ext_cens = |mu: f64| -> f64 {
            let mut ll = 0.0;
            for s in &external.subjects {
                ll += if s.status { 0.0 } else { mu } - mu.exp() * s.time;
            }
            ll
        };
        let ext_events = external.subjects.iter().filter(|s| s.status).count() as f64;
        let ext_censored = external.len() as f64 - ext_events;

        // Integrands decay like exp(alpha*d*mu) toward -inf, so integration
        // ranges must widen as alpha or the count shrinks.
        let log_integral = |f: &dyn Fn(f64) -> f64, slowest_count: f64, alpha: f64| -> f64 {
            let lo = -14.0 - 16.0 / (alpha * slowest_count);
            let step = (6.0 - lo) / 60_000.0;
            let terms: Vec<f64> = (0..=60_000).map(|j| f(lo + step * j as f64)).collect();
            log_sum_exp(&terms) + step.ln()
        };

        let n_alpha = 100;
        let thetas: Vec<f64> = (0..501).map(|i| -10.0 + 0.04 * i as f64).collect();
        let mus: Vec<f64> = (0..1001).map(|i| -14.0 + 0.02 * i as f64).collect();

        let mut alphas = Vec::with_capacity(n_alpha);
        let mut log_q = Vec::with_capacity(n_alpha);
        for i in 0..n_alpha {
            let alpha = (i as f64 + 0.5) / n_alpha as f64;
            // Failure part: double integral of exp(trial + alpha*external)
            // over (theta, mu), with cell areas carried explicitly.
            let mut numer_terms = Vec::with_capacity(thetas.len() * mus.len());
            for &mu in &mus {
                let ext_part = alpha * loglik_ext_fail(mu);
                for &theta in &thetas {
                    numer_terms.push(loglik_trial_fail(theta, mu) + ext_part);
                }
            }
            let mut lq = log_sum_exp(&numer_terms) + (0.04_f64 * 0.02).ln()
                - log_integral(&|mu| alpha * loglik_ext_fail(mu), ext_events, alpha);

            // Censoring part, 1-D in its own log-rate.
            if ext_censored > 0.0 {
                lq += log_integral(
                    &|mu| loglik_ctrl_cens(mu) + alpha * loglik_ext_cens(mu),
                    ext_censored,
                    alpha,
                ) - log_integral(&|mu| alpha * loglik_ext_cens(mu), ext_censored, alpha);
            }

            log_q.push(lq);
            alphas.push(alpha);
        }
        let total = log_sum_exp(&log_q);
        alphas.iter().zip(&log_q).map(|(a, lq)| a * (lq - total).exp()).sum()
    }

    #[test]
    fn alpha_hat_lies_in_unit_interval() {
        let (trial, external) = tiny_fixture();
        let est = estimate_npp_alpha(&trial, &external).unwrap();
        assert!(est.alpha_hat > 0.0 && est.alpha_hat < 1.0, "alpha {}", est.alpha_hat);
        let mass: f64 = est.profile.iter().map(|(_, lw)| lw.exp()).sum();
        assert!((mass - 1.0).abs() < 1e-9, "profile mass {mass}");
    }

    #[test]
    fn grid_laplace_matches_dense_quadrature() {
        let (trial, external) = tiny_fixture();
        let est = estimate_npp_alpha(&trial, &external).unwrap();
        let oracle = quadrature_alpha(&trial, &external);
        assert!(
            (est.alpha_hat - oracle).abs() < 0.02,
            "estimate {} vs quadrature {}",
            est.alpha_hat,
            oracle
        );
    }

    #[test]
    fn similar_externals_earn_more_weight() {
        // Paired replicates: the same trial analyzed against (a) an exact
        // copy of its standard-of-care arm and (b) the copy with event times
        // scaled by 4. Borrowing should be higher for the similar externals.
        use rand::Rng;
        let reps = 500;
        let mut wins = 0usize;
        let mut sum_similar = 0.0;
        let mut sum_scaled = 0.0;
        for rep in 0..reps {
            let mut rng = crate::streams::stream_rng(rep as u64, "npp-similarity");
            let mut trial = Cohort::new(vec!["x1".into()]);
            for i in 0..36 {
                let treated = i < 24;
                let rate: f64 = if treated { 0.75 } else { 1.0 };
                let time = -(1.0 - rng.random::<f64>()).ln() / rate;
                let status = rng.random::<f64>() < 0.85;
                trial.subjects.push(subject(&format!("t{i}"), Source::Trial, treated, time, status));
            }
            let soc: Vec<Subject> = trial
                .subjects
                .iter()
                .filter(|s| !s.is_treated())
                .cloned()
                .collect();
            let mut similar = Cohort::new(vec!["x1".into()]);
            let mut scaled = Cohort::new(vec!["x1".into()]);
            for (i, s) in soc.iter().enumerate() {
                let mut a = s.clone();
                a.id = format!("ea{i}");
                a.source = Source::External;
                similar.subjects.push(a);
                let mut b = s.clone();
                b.id = format!("eb{i}");
                b.source = Source::External;
                b.time = s.time * 4.0;
                scaled.subjects.push(b);
            }
            let alpha_similar = estimate_npp_alpha(&trial, &similar).unwrap().alpha_hat;
            let alpha_scaled = estimate_npp_alpha(&trial, &scaled).unwrap().alpha_hat;
            sum_similar += alpha_similar;
            sum_scaled += alpha_scaled;
            if alpha_similar > alpha_scaled {
                wins += 1;
            }
        }
        let mean_similar = sum_similar / reps as f64;
        let mean_scaled = sum_scaled / reps as f64;
        assert!(
            mean_similar > mean_scaled,
            "similar {mean_similar} vs scaled {mean_scaled} ({wins}/{reps} wins)"
        );
    }

    #[test]
    fn npp_result_carries_alpha() {
        let (trial, external) = tiny_fixture();
        let result = analyze_npp(&trial, &external).unwrap();
        assert_eq!(result.method, Method::NormalizedPowerPrior);
        let alpha = result.alpha_hat.unwrap();
        assert!(alpha > 0.0 && alpha < 1.0);
        assert!((result.ess - (trial.len() as f64 + alpha * external.len() as f64)).abs() < 1e-9);
    }

    #[test]
    fn rejects_eventless_cohorts() {
        let (trial, mut external) = tiny_fixture();
        for s in &mut external.subjects {
            s.status = false;
        }
        assert!(matches!(
            estimate_npp_alpha(&trial, &external),
            Err(Error::InvalidInput(_))
        ));
    }
}
