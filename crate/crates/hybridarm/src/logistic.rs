//! Logistic regression via iteratively reweighted least squares.
//!
//! Used to fit the on-trial score: the probability that a subject is
//! enrolled in the trial given baseline covariates. The "success" label is
//! trial membership, so the fitted probability is the score directly.

use crate::error::{Error, Result};

const SCORE_TOL: f64 = 1e-8;
const RELATIVE_LL_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100;
const MAX_STEP: f64 = 10.0;
const MAX_HALVINGS: usize = 10;
/// Coefficients beyond this magnitude with a non-converged score mean the
/// classes are (quasi-)separated.
const SEPARATION_BOUND: f64 = 30.0;
/// Linear predictors are clamped here so predictions stay inside (0, 1).
const LP_CLAMP: f64 = 36.0;

/// Fitted logistic model with intercept.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Set when the optimizer ran away without the score vanishing:
    /// the data are separated and the MLE does not exist.
    pub separation: bool,
}

impl LogisticModel {
    /// Predicted probability; always strictly inside (0, 1).
    pub fn predict(&self, covariates: &[f64]) -> f64 {
        let mut lp = self.intercept;
        for (c, x) in self.coefficients.iter().zip(covariates) {
            lp += c * x;
        }
        sigmoid(lp.clamp(-LP_CLAMP, LP_CLAMP))
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Maximize the (weighted) Bernoulli log likelihood with an intercept.
///
/// `features` is row-major, one row per observation; all rows must share a
/// length and contain only finite values. Separated data come back as a
/// flagged, non-converged model rather than an error.
pub fn fit_logistic(
    features: &[Vec<f64>],
    labels: &[bool],
    weights: Option<&[f64]>,
) -> Result<LogisticModel> {
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidInput("no observations".into()));
    }
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            n,
            labels.len()
        )));
    }
    let k = features[0].len();
    for (i, row) in features.iter().enumerate() {
        if row.len() != k {
            return Err(Error::InvalidInput(format!(
                "feature row {i} has {} values, expected {k}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("feature row {i} contains a non-finite value")));
        }
    }
    if n < k + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} observations for {k} covariates plus intercept, got {n}",
            k + 1
        )));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidInput(format!("{} weights for {n} observations", w.len())));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("weights must be nonnegative and finite".into()));
        }
    }
    let weight_at = |i: usize| weights.map_or(1.0, |w| w[i]);
    let pos: f64 = (0..n).filter(|&i| labels[i]).map(weight_at).sum();
    let neg: f64 = (0..n).filter(|&i| !labels[i]).map(weight_at).sum();
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::InvalidInput("labels must contain both classes".into()));
    }

    let dim = k + 1;
    let mut beta = vec![0.0; dim];
    let mut ll = loglik(features, labels, weights, &beta);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITER {
        let (grad, info) = score_info(features, labels, weights, &beta);
        let max_score = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if max_score < SCORE_TOL {
            converged = true;
            iterations = iter;
            break;
        }
        iterations = iter + 1;

        let mut step = match solve_spd(&info, &grad) {
            Some(step) => step,
            None => {
                // A singular information matrix after the coefficients blew
                // up is separation, not collinearity.
                if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
                    return Ok(finish(beta, false, iterations, true));
                }
                return Err(Error::SingularInformation);
            }
        };
        let cap = step.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        if cap > MAX_STEP {
            for s in &mut step {
                *s *= MAX_STEP / cap;
            }
        }

        let mut candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
        let mut candidate_ll = loglik(features, labels, weights, &candidate);
        // Halve only on a decrease beyond rounding noise in the likelihood.
        let slack = 1e-8 * (1.0 + ll.abs());
        let mut halvings = 0;
        while candidate_ll < ll - slack && halvings < MAX_HALVINGS {
            for s in &mut step {
                *s /= 2.0;
            }
            candidate = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
            candidate_ll = loglik(features, labels, weights, &candidate);
            halvings += 1;
        }

        let rel_change = (candidate_ll - ll).abs() / (ll.abs() + 1.0);
        beta = candidate;
        ll = candidate_ll;
        if rel_change < RELATIVE_LL_TOL {
            converged = true;
            break;
        }
    }

    // Runaway coefficients mean the optimum lies at infinity; the score can
    // vanish numerically out there, so the magnitude itself is the signal.
    let separation = beta.iter().any(|b| b.abs() > SEPARATION_BOUND);
    Ok(finish(beta, converged && !separation, iterations, separation))
}

fn finish(beta: Vec<f64>, converged: bool, iterations: usize, separation: bool) -> LogisticModel {
    LogisticModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        converged,
        iterations,
        separation,
    }
}

fn linear_predictor(beta: &[f64], row: &[f64]) -> f64 {
    let mut lp = beta[0];
    for (b, x) in beta[1..].iter().zip(row) {
        lp += b * x;
    }
    lp.clamp(-LP_CLAMP, LP_CLAMP)
}

fn loglik(features: &[Vec<f64>], labels: &[bool], weights: Option<&[f64]>, beta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..features.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        let lp = linear_predictor(beta, &features[i]);
        // ln p = lp - ln(1+e^lp); ln(1-p) = -ln(1+e^lp), stably via softplus.
        let softplus = if lp > 0.0 { lp + (-lp).exp().ln_1p() } else { lp.exp().ln_1p() };
        ll += w * (if labels[i] { lp } else { 0.0 } - softplus);
    }
    ll
}

/// Gradient of the log likelihood and Fisher information at `beta`.
fn score_info(
    features: &[Vec<f64>],
    labels: &[bool],
    weights: Option<&[f64]>,
    beta: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = beta.len();
    let mut grad = vec![0.0; dim];
    let mut info = vec![vec![0.0; dim]; dim];
    let mut z = vec![0.0; dim];
    for i in 0..features.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let p = sigmoid(linear_predictor(beta, &features[i]));
        let y = if labels[i] { 1.0 } else { 0.0 };
        z[0] = 1.0;
        z[1..dim].copy_from_slice(&features[i]);
        let resid = w * (y - p);
        let curve = w * p * (1.0 - p);
        for a in 0..dim {
            grad[a] += resid * z[a];
            for b in a..dim {
                info[a][b] += curve * z[a] * z[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            info[a][b] = info[b][a];
        }
    }
    (grad, info)
}

/// Solve `info * x = rhs` for a symmetric positive definite matrix via
/// Cholesky; `None` when the matrix is (numerically) singular.
fn solve_spd(info: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let dim = rhs.len();
    let mut chol = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = info[i][j];
            for l in 0..j {
                sum -= chol[i][l] * chol[j][l];
            }
            if i == j {
                if sum <= 1e-12 {
                    return None;
                }
                chol[i][j] = sum.sqrt();
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; dim];
    for i in 0..dim {
        let mut sum = rhs[i];
        for l in 0..i {
            sum -= chol[i][l] * y[l];
        }
        y[i] = sum / chol[i][i];
    }
    let mut x = vec![0.0; dim];
    for i in (0..dim).rev() {
        let mut sum = y[i];
        for l in i + 1..dim {
            sum -= chol[l][i] * x[l];
        }
        x[i] = sum / chol[i][i];
    }
    Some(x)
}
