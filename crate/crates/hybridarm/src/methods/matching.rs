//! Optimal pair matching of treated subjects to external subjects on
//! one-dimensional scores.
//!
//! With scalar scores an optimal injective matching exists that is order
//! preserving once both sides are sorted, so the assignment problem reduces
//! to a dynamic program over the two sorted lists, O(n*m) instead of a
//! general assignment solver.

use crate::error::{Error, Result};

/// An optimal matching. `pairs` holds `(treated_index, external_index)`
/// positions into the original score slices, one pair per treated subject,
/// each external used at most once.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub pairs: Vec<(usize, usize)>,
    pub total_distance: f64,
}

/// Match every treated score to a distinct external score minimizing the
/// total absolute score difference.
pub fn match_optimal(treated_scores: &[f64], external_scores: &[f64]) -> Result<MatchResult> {
    let n = treated_scores.len();
    let m = external_scores.len();
    if m < n {
        return Err(Error::InsufficientExternals { needed: n, available: m });
    }
    if n == 0 {
        return Ok(MatchResult { pairs: Vec::new(), total_distance: 0.0 });
    }
    for &s in treated_scores.iter().chain(external_scores) {
        if !s.is_finite() {
            return Err(Error::InvalidInput("scores must be finite".into()));
        }
    }

    let mut treated_order: Vec<usize> = (0..n).collect();
    treated_order.sort_by(|&a, &b| treated_scores[a].partial_cmp(&treated_scores[b]).unwrap());
    let mut external_order: Vec<usize> = (0..m).collect();
    external_order.sort_by(|&a, &b| external_scores[a].partial_cmp(&external_scores[b]).unwrap());

    // dp[i][j]: cost of matching the i smallest treated among the j smallest
    // externals. Row i depends on row i-1 only; `matched` records choices
    // for reconstruction.
    let mut previous = vec![0.0_f64; m + 1];
    let mut current = vec![0.0_f64; m + 1];
    let mut matched = vec![false; (n + 1) * (m + 1)];
    for i in 1..=n {
        let t = treated_scores[treated_order[i - 1]];
        for j in 0..i {
            current[j] = f64::INFINITY;
        }
        for j in i..=m {
            let e = external_scores[external_order[j - 1]];
            let take = previous[j - 1] + (t - e).abs();
            let skip = if j > i { current[j - 1] } else { f64::INFINITY };
            if take <= skip {
                current[j] = take;
                matched[i * (m + 1) + j] = true;
            } else {
                current[j] = skip;
            }
        }
        std::mem::swap(&mut previous, &mut current);
    }
    let total_distance = previous[m];

    let mut pairs = Vec::with_capacity(n);
    let (mut i, mut j) = (n, m);
    while i > 0 {
        if matched[i * (m + 1) + j] {
            pairs.push((treated_order[i - 1], external_order[j - 1]));
            i -= 1;
        }
        j -= 1;
    }
    pairs.reverse();
    Ok(MatchResult { pairs, total_distance })
}
