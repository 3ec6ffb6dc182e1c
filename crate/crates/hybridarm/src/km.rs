//! Product-limit (Kaplan-Meier) survival estimate with Greenwood variance.

use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// A Kaplan-Meier curve. `times` holds the distinct event times in
/// increasing order; the parallel vectors give the estimate after each of
/// them. An empty `times` means no events were observed and survival is
/// constant 1. Confidence limits are computed on the log-survival scale.
#[derive(Debug, Clone)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub greenwood_se: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// First time at which survival drops to 0.5 or below.
    pub median: Option<f64>,
    pub median_ci_low: Option<f64>,
    pub median_ci_high: Option<f64>,
}

/// Survival estimates can land exactly on 0.5; treat that as reaching the
/// median despite rounding in the running product.
const MEDIAN_TOL: f64 = 1e-9;

/// Estimate the survival curve from `(time, event)` pairs.
pub fn km_estimate(data: &[(f64, bool)], conf_level: f64) -> Result<KmCurve> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no subjects for the survival estimate".into()));
    }
    if !(conf_level > 0.0 && conf_level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level must be in (0,1), got {conf_level}"
        )));
    }
    for &(t, _) in data {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "times must be nonnegative and finite, got {t}"
            )));
        }
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].0.partial_cmp(&data[b].0).unwrap());

    let z = normal_quantile(0.5 + conf_level / 2.0);
    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        greenwood_se: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        median: None,
        median_ci_low: None,
        median_ci_high: None,
    };

    let mut survival = 1.0;
    let mut var_log = 0.0; // Greenwood variance of ln S(t)
    let mut at_risk = data.len();
    let mut pos = 0;
    while pos < order.len() {
        let time = data[order[pos]].0;
        let mut events = 0usize;
        let mut leaving = 0usize;
        while pos < order.len() && data[order[pos]].0 == time {
            if data[order[pos]].1 {
                events += 1;
            }
            leaving += 1;
            pos += 1;
        }
        if events > 0 {
            let n = at_risk as f64;
            let d = events as f64;
            survival *= 1.0 - d / n;
            let (se, low, high) = if at_risk == events {
                // Everyone remaining failed: the curve hits zero exactly.
                survival = 0.0;
                (0.0, 0.0, 0.0)
            } else {
                var_log += d / (n * (n - d));
                let sd_log = var_log.sqrt();
                (
                    survival * sd_log,
                    survival * (-z * sd_log).exp(),
                    (survival * (z * sd_log).exp()).min(1.0),
                )
            };
            curve.times.push(time);
            curve.survival.push(survival);
            curve.greenwood_se.push(se);
            curve.ci_low.push(low);
            curve.ci_high.push(high);

            if curve.median.is_none() && survival <= 0.5 + MEDIAN_TOL {
                curve.median = Some(time);
            }
            if curve.median_ci_low.is_none() && *curve.ci_low.last().unwrap() <= 0.5 + MEDIAN_TOL {
                curve.median_ci_low = Some(time);
            }
            if curve.median_ci_high.is_none() && *curve.ci_high.last().unwrap() <= 0.5 + MEDIAN_TOL
            {
                curve.median_ci_high = Some(time);
            }
        }
        at_risk -= leaving;
    }
    Ok(curve)
}
