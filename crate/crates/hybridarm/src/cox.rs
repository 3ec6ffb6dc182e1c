//! Weighted Cox proportional hazards fit with the treatment indicator as the
//! sole covariate.
//!
//! The partial likelihood uses Breslow tie handling and per-subject weights:
//! subject `j` contributes `w_j` to every risk-set sum it belongs to, and an
//! observed event adds `w_i * [x_i*b - ln(sum_at_risk w_j * exp(x_j*b))]` to
//! the log likelihood. With a single binary covariate each risk set reduces
//! to two weight totals, so one pass over the data yields a table that makes
//! every Newton iteration O(number of event times).

use crate::error::{Error, Result};
use crate::model::AnalysisSet;

/// Hazard-ratio estimates are clamped to this interval; a fit that ends on
/// the boundary is flagged rather than diverging.
pub const LOG_HR_CLAMP: f64 = 15.0;

const SCORE_TOL: f64 = 1e-9;
const MAX_ITER: usize = 50;
const MAX_STEP: f64 = 5.0;
const MAX_HALVINGS: usize = 10;

/// Result of a weighted Cox fit.
#[derive(Debug, Clone)]
pub struct CoxFit {
    /// Coefficient of the treatment indicator.
    pub log_hr: f64,
    /// Model-based standard error (inverse information).
    pub se_model: f64,
    /// Robust sandwich standard error.
    pub se_robust: f64,
    /// Weighted partial log likelihood at `log_hr`.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// True when the estimate sits on the +/-`LOG_HR_CLAMP` boundary
    /// (monotone likelihood).
    pub at_boundary: bool,
}

/// Fit the weighted Cox model on an analysis set.
pub fn fit_weighted_cox(set: &AnalysisSet) -> Result<CoxFit> {
    let n = set.len();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let mut treated = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for entry in set.entries() {
        times.push(entry.subject.time);
        events.push(entry.subject.status);
        treated.push(entry.subject.is_treated());
        weights.push(entry.weight);
    }
    fit_cox(&times, &events, &treated, &weights)
}

/// Fit the weighted Cox model from raw arrays.
pub fn fit_cox(times: &[f64], events: &[bool], treated: &[bool], weights: &[f64]) -> Result<CoxFit> {
    let data = SurvData::new(times, events, treated)?;
    data.fit(weights)
}

/// Survival data sorted once by follow-up time, reusable across weight
/// vectors (the normalized power prior refits at many weights).
pub(crate) struct SurvData {
    /// Subject indices in descending time order.
    order: Vec<usize>,
    times: Vec<f64>,
    events: Vec<bool>,
    treated: Vec<bool>,
}

impl SurvData {
    pub(crate) fn new(times: &[f64], events: &[bool], treated: &[bool]) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::InvalidInput("survival data is empty".into()));
        }
        if events.len() != n || treated.len() != n {
            return Err(Error::InvalidInput(format!(
                "length mismatch: {} times, {} events, {} treatment flags",
                n,
                events.len(),
                treated.len()
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "time at index {i} must be nonnegative and finite, got {t}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).unwrap());
        Ok(SurvData {
            order,
            times: times.to_vec(),
            events: events.to_vec(),
            treated: treated.to_vec(),
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.times.len()
    }

    /// Collapse the data under `weights` into one row per event time,
    /// ascending. Event times whose total event weight is zero contribute
    /// nothing and are dropped.
    pub(crate) fn risk_table(&self, weights: &[f64]) -> Result<RiskTable> {
        if weights.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} weights, got {}",
                self.len(),
                weights.len()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "weight at index {i} must be nonnegative and finite, got {w}"
                )));
            }
        }

        let mut rows: Vec<RiskRow> = Vec::new();
        let mut at_risk_control = 0.0;
        let mut at_risk_treated = 0.0;

        let mut pos = 0;
        while pos < self.order.len() {
            let time = self.times[self.order[pos]];
            let mut event_weight = 0.0;
            let mut event_weight_treated = 0.0;
            // Everyone observed at this time enters the risk set before the
            // events at this time are scored (censored-at-t stays at risk).
            while pos < self.order.len() && self.times[self.order[pos]] == time {
                let j = self.order[pos];
                let w = weights[j];
                if self.treated[j] {
                    at_risk_treated += w;
                } else {
                    at_risk_control += w;
                }
                if self.events[j] {
                    event_weight += w;
                    if self.treated[j] {
                        event_weight_treated += w;
                    }
                }
                pos += 1;
            }
            if event_weight > 0.0 {
                rows.push(RiskRow {
                    time,
                    at_risk_control,
                    at_risk_treated,
                    event_weight,
                    event_weight_treated,
                });
            }
        }
        rows.reverse();
        Ok(RiskTable { rows })
    }

    /// Fit under `weights`, including both standard errors.
    pub(crate) fn fit(&self, weights: &[f64]) -> Result<CoxFit> {
        let table = self.risk_table(weights)?;
        if table.rows.is_empty() {
            return Err(Error::NoEvents);
        }
        if !table.has_information() {
            return Err(Error::NoTreatmentVariation);
        }
        let newton = table.maximize();
        let se_robust = self.robust_se(weights, &table, newton.log_hr, newton.info);
        Ok(CoxFit {
            log_hr: newton.log_hr,
            se_model: 1.0 / newton.info.sqrt(),
            se_robust,
            loglik: newton.loglik,
            converged: newton.converged,
            iterations: newton.iterations,
            at_boundary: newton.at_boundary,
        })
    }

    /// Sandwich variance from weighted score residuals:
    /// `sum_j (w_j * U_j)^2 / info^2`.
    fn robust_se(&self, weights: &[f64], table: &RiskTable, beta: f64, info: f64) -> f64 {
        let eb = beta.exp();
        // Cumulative hazard-like sums over event rows, ascending in time.
        let mut cum_d_over_s = Vec::with_capacity(table.rows.len());
        let mut cum_dm_over_s = Vec::with_capacity(table.rows.len());
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        for row in &table.rows {
            let s = row.at_risk_control + row.at_risk_treated * eb;
            let m = row.at_risk_treated * eb / s;
            g0 += row.event_weight / s;
            g1 += row.event_weight * m / s;
            cum_d_over_s.push(g0);
            cum_dm_over_s.push(g1);
        }

        let mut sum_sq = 0.0;
        for &j in &self.order {
            let w = weights[j];
            if w == 0.0 {
                continue;
            }
            let x = if self.treated[j] { 1.0 } else { 0.0 };
            let y = self.times[j];
            // Last event row with time <= y.
            let rank = match table
                .rows
                .binary_search_by(|row| row.time.partial_cmp(&y).unwrap())
            {
                Ok(mut idx) => {
                    // Ties in the table are collapsed, so `Ok` is unique.
                    idx += 1;
                    idx
                }
                Err(idx) => idx,
            };
            let mut residual = 0.0;
            if rank > 0 {
                let expx = if self.treated[j] { eb } else { 1.0 };
                residual -= expx * (x * cum_d_over_s[rank - 1] - cum_dm_over_s[rank - 1]);
            }
            if self.events[j] {
                // The subject's own event time has a row (its weight is positive).
                let idx = table
                    .rows
                    .binary_search_by(|row| row.time.partial_cmp(&y).unwrap())
                    .expect("event time must have a risk row");
                let row = &table.rows[idx];
                let s = row.at_risk_control + row.at_risk_treated * eb;
                let m = row.at_risk_treated * eb / s;
                residual += x - m;
            }
            let scaled = w * residual;
            sum_sq += scaled * scaled;
        }
        sum_sq.sqrt() / info
    }
}

/// One event time: weight totals at risk by arm plus event weight sums.
#[derive(Debug, Clone)]
pub(crate) struct RiskRow {
    time: f64,
    at_risk_control: f64,
    at_risk_treated: f64,
    event_weight: f64,
    event_weight_treated: f64,
}

/// Per-event-time summary of an analysis set; rows ascend in time.
pub(crate) struct RiskTable {
    rows: Vec<RiskRow>,
}

pub(crate) struct NewtonOutcome {
    pub(crate) log_hr: f64,
    pub(crate) loglik: f64,
    pub(crate) info: f64,
    pub(crate) converged: bool,
    pub(crate) iterations: usize,
    pub(crate) at_boundary: bool,
}

impl RiskTable {
    /// True when at least one event time has positive weight in both arms at
    /// risk, i.e. the partial likelihood depends on the coefficient.
    pub(crate) fn has_information(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.event_weight > 0.0 && r.at_risk_control > 0.0 && r.at_risk_treated > 0.0)
    }

    pub(crate) fn loglik(&self, beta: f64) -> f64 {
        let eb = beta.exp();
        let mut ll = 0.0;
        for row in &self.rows {
            let s = row.at_risk_control + row.at_risk_treated * eb;
            ll += row.event_weight_treated * beta - row.event_weight * s.ln();
        }
        ll
    }

    /// Weighted score and observed information at `beta`.
    pub(crate) fn score_info(&self, beta: f64) -> (f64, f64) {
        let eb = beta.exp();
        let mut score = 0.0;
        let mut info = 0.0;
        for row in &self.rows {
            let s = row.at_risk_control + row.at_risk_treated * eb;
            let p = row.at_risk_treated * eb / s;
            score += row.event_weight_treated - row.event_weight * p;
            info += row.event_weight * p * (1.0 - p);
        }
        (score, info)
    }

    /// Newton maximization from 0 with step halving and the +/-15 clamp.
    pub(crate) fn maximize(&self) -> NewtonOutcome {
        let mut beta = 0.0;
        let mut ll = self.loglik(beta);
        let mut converged = false;
        let mut iterations = 0;

        for iter in 0..MAX_ITER {
            iterations = iter + 1;
            let (score, info) = self.score_info(beta);
            if score.abs() < SCORE_TOL {
                converged = true;
                iterations = iter;
                break;
            }
            let mut step = (score / info).clamp(-MAX_STEP, MAX_STEP);
            let mut candidate = (beta + step).clamp(-LOG_HR_CLAMP, LOG_HR_CLAMP);
            let mut candidate_ll = self.loglik(candidate);
            // Halve only on a decrease beyond rounding noise in the
            // likelihood sum, or tiny final steps stall below tolerance.
            let slack = 1e-8 * (1.0 + ll.abs());
            let mut halvings = 0;
            while candidate_ll < ll - slack && halvings < MAX_HALVINGS {
                step /= 2.0;
                candidate = (beta + step).clamp(-LOG_HR_CLAMP, LOG_HR_CLAMP);
                candidate_ll = self.loglik(candidate);
                halvings += 1;
            }
            if candidate == beta {
                break;
            }
            beta = candidate;
            ll = candidate_ll;
        }

        let (score, info) = self.score_info(beta);
        if score.abs() < SCORE_TOL {
            converged = true;
        }
        NewtonOutcome {
            log_hr: beta,
            loglik: self.loglik(beta),
            info,
            converged,
            iterations,
            at_boundary: beta.abs() >= LOG_HR_CLAMP - 1e-9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Partial log likelihood straight from the definition, O(n^2);
    /// independent of the risk-table path.
    fn naive_loglik(times: &[f64], events: &[bool], treated: &[bool], weights: &[f64], beta: f64) -> f64 {
        let mut ll = 0.0;
        for i in 0..times.len() {
            if !events[i] || weights[i] == 0.0 {
                continue;
            }
            let xi = if treated[i] { 1.0 } else { 0.0 };
            let mut denom = 0.0;
            for j in 0..times.len() {
                if times[j] >= times[i] {
                    let xj = if treated[j] { beta } else { 0.0 };
                    denom += weights[j] * xj.exp();
                }
            }
            ll += weights[i] * (xi * beta - denom.ln());
        }
        ll
    }

    /// Golden-section maximizer over the clamped domain.
    fn golden_max(mut f: impl FnMut(f64) -> f64) -> f64 {
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (-LOG_HR_CLAMP, LOG_HR_CLAMP);
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = f(d);
            }
        }
        0.5 * (lo + hi)
    }

    fn fixture() -> (Vec<f64>, Vec<bool>, Vec<bool>, Vec<f64>) {
        (
            vec![2.0, 5.0, 1.0, 4.0, 3.0, 6.0, 2.5, 0.5],
            vec![true, false, true, true, false, true, true, true],
            vec![true, true, false, false, true, false, true, false],
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        )
    }

    #[test]
    fn matches_golden_section_on_three_subject_fixture() {
        let times = [1.0, 2.0, 3.0];
        let events = [true, true, false];
        let treated = [true, false, false];
        let weights = [1.0, 1.0, 1.0];
        let fit = fit_cox(&times, &events, &treated, &weights).unwrap();
        let oracle = golden_max(|b| naive_loglik(&times, &events, &treated, &weights, b));
        assert!(
            (fit.log_hr - oracle).abs() < 1e-6,
            "fit {} vs oracle {}",
            fit.log_hr,
            oracle
        );
        // The treated subject fails first, so the likelihood is monotone and
        // both maximizers sit on the clamp boundary.
        assert!(fit.at_boundary);
        assert!(!fit.converged);
    }

    #[test]
    fn matches_golden_section_on_interior_fixture() {
        let (times, events, treated, weights) = fixture();
        let fit = fit_cox(&times, &events, &treated, &weights).unwrap();
        let oracle = golden_max(|b| naive_loglik(&times, &events, &treated, &weights, b));
        assert!((fit.log_hr - oracle).abs() < 1e-6);
        assert!(fit.converged);
        assert!(!fit.at_boundary);
        let naive_at_fit = naive_loglik(&times, &events, &treated, &weights, fit.log_hr);
        assert!((fit.loglik - naive_at_fit).abs() < 1e-9);
    }

    #[test]
    fn weight_scaling_leaves_estimate_and_robust_se_fixed() {
        let (times, events, treated, weights) = fixture();
        let base = fit_cox(&times, &events, &treated, &weights).unwrap();
        let scaled: Vec<f64> = weights.iter().map(|w| w * 4.0).collect();
        let fit = fit_cox(&times, &events, &treated, &scaled).unwrap();
        assert!((fit.log_hr - base.log_hr).abs() < 1e-9);
        assert!((fit.se_robust - base.se_robust).abs() < 1e-9);
        // Model-based SE scales by 1/sqrt(c).
        assert!((fit.se_model - base.se_model / 2.0).abs() < 1e-9);
    }

    #[test]
    fn duplication_equals_doubled_weights() {
        let (times, events, treated, _) = fixture();
        let mut dup_times = times.clone();
        dup_times.extend_from_slice(&times);
        let mut dup_events = events.clone();
        dup_events.extend_from_slice(&events);
        let mut dup_treated = treated.clone();
        dup_treated.extend_from_slice(&treated);

        let duplicated = fit_cox(&dup_times, &dup_events, &dup_treated, &[1.0; 16]).unwrap();
        let weighted = fit_cox(&times, &events, &treated, &[2.0; 8]).unwrap();
        assert!((duplicated.log_hr - weighted.log_hr).abs() < 1e-10);
        assert!((duplicated.loglik - weighted.loglik).abs() < 1e-9);
        assert!((duplicated.se_model - weighted.se_model).abs() < 1e-10);
    }

    #[test]
    fn score_vanishes_by_finite_differences() {
        let (times, events, treated, weights) = fixture();
        let fit = fit_cox(&times, &events, &treated, &weights).unwrap();
        let h = 1e-5;
        let up = naive_loglik(&times, &events, &treated, &weights, fit.log_hr + h);
        let down = naive_loglik(&times, &events, &treated, &weights, fit.log_hr - h);
        assert!(((up - down) / (2.0 * h)).abs() < 1e-4);
    }

    #[test]
    fn no_events_is_an_error() {
        let times = [1.0, 2.0];
        let events = [false, false];
        let treated = [true, false];
        assert!(matches!(fit_cox(&times, &events, &treated, &[1.0, 1.0]), Err(Error::NoEvents)));

        // Events that carry zero weight do not count.
        let events = [true, false];
        assert!(matches!(fit_cox(&times, &events, &treated, &[0.0, 1.0]), Err(Error::NoEvents)));
    }

    #[test]
    fn single_arm_data_has_no_information() {
        let times = [1.0, 2.0, 3.0];
        let events = [true, true, false];
        let treated = [false, false, false];
        match fit_cox(&times, &events, &treated, &[1.0; 3]) {
            Err(Error::NoTreatmentVariation) => {}
            other => panic!("expected NoTreatmentVariation, got {other:?}"),
        }
    }

    #[test]
    fn zero_weight_subjects_match_their_absence() {
        let (times, events, treated, weights) = fixture();
        let with_all = fit_cox(&times, &events, &treated, &weights).unwrap();

        let mut zeroed = weights.clone();
        zeroed[1] = 0.0;
        zeroed[5] = 0.0;
        let with_zero = fit_cox(&times, &events, &treated, &zeroed).unwrap();

        let keep: Vec<usize> = (0..8).filter(|i| ![1usize, 5].contains(i)).collect();
        let sub_times: Vec<f64> = keep.iter().map(|&i| times[i]).collect();
        let sub_events: Vec<bool> = keep.iter().map(|&i| events[i]).collect();
        let sub_treated: Vec<bool> = keep.iter().map(|&i| treated[i]).collect();
        let without = fit_cox(&sub_times, &sub_events, &sub_treated, &[1.0; 6]).unwrap();

        assert!((with_zero.log_hr - without.log_hr).abs() < 1e-12);
        assert!((with_zero.se_model - without.se_model).abs() < 1e-12);
        assert!((with_zero.se_robust - without.se_robust).abs() < 1e-12);
        assert!((with_all.log_hr - with_zero.log_hr).abs() > 1e-6);
    }

    #[test]
    fn null_effect_estimate_shrinks_at_large_n() {
        use rand::Rng;
        let mut rng = crate::streams::stream_rng(11, "cox-null");
        let n = 100_000;
        let mut times = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        let mut treated = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>();
            times.push(-(1.0 - u).ln());
            events.push(rng.random::<f64>() < 0.8);
            treated.push(rng.random::<f64>() < 0.5);
        }
        let fit = fit_cox(&times, &events, &treated, &vec![1.0; n]).unwrap();
        assert!(fit.log_hr.abs() < 0.05, "log_hr = {}", fit.log_hr);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(60))]
        #[test]
        fn newton_matches_golden_section(seed in 0u64..10_000) {
            use rand::Rng;
            let mut rng = crate::streams::stream_rng(seed, "cox-prop");
            let n = rng.random_range(3..12usize);
            let times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
            let events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
            let treated: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            let weights: Vec<f64> = (0..n).map(|_| 0.25 + rng.random::<f64>()).collect();

            let fit = match fit_cox(&times, &events, &treated, &weights) {
                Ok(fit) => fit,
                // Degenerate draws (no events / single-arm) are legitimate.
                Err(Error::NoEvents) | Err(Error::NoTreatmentVariation) => return Ok(()),
                Err(other) => panic!("unexpected error {other:?}"),
            };
            let oracle = golden_max(|b| naive_loglik(&times, &events, &treated, &weights, b));
            proptest::prop_assert!((fit.log_hr - oracle).abs() < 1e-6,
                "fit {} oracle {}", fit.log_hr, oracle);
        }
    }
}
