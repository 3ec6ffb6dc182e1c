//! Inspect what data-adaptive weighting actually does: which externals it
//! selects and how the standardized inverse-odds weights balance the
//! augmented arm.
//!
//! ```bash
//! cargo run --release --example daw_weights
//! ```

use hybridarm::methods::{compute_daw_weights, fit_on_trial_scores};
use hybridarm::sim::{generate, Confounding, Scenario};

fn main() {
    let scenario = Scenario::from_grid(300, 0.67, 1.0, Confounding::Strong, 9);
    let (trial, external) = generate(&scenario);

    let scores = fit_on_trial_scores(&trial, &external).expect("score fit");
    println!(
        "on-trial model: intercept {:+.3}, coefficients {:?}",
        scores.model.intercept,
        scores
            .model
            .coefficients
            .iter()
            .map(|c| format!("{c:+.3}"))
            .collect::<Vec<_>>()
    );

    let weights = compute_daw_weights(&trial, &external).expect("weights");
    let n_selected = weights.selected_ids.len();
    println!(
        "selected {} of {} externals (control shortfall of the {}:{} trial)",
        n_selected,
        external.len(),
        trial.n_treated(),
        trial.len() - trial.n_treated()
    );
    println!("weight sum: {:.12} (standardized to the selection size)", {
        let s: f64 = weights.standardized.iter().sum();
        s
    });

    let mut sorted = weights.standardized.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "weights: min {:.3}, median {:.3}, max {:.3}",
        sorted[0],
        sorted[n_selected / 2],
        sorted[n_selected - 1]
    );

    println!("\ncovariate balance (weighted selected externals vs trial):");
    for j in 0..trial.covariate_names.len() {
        let trial_mean =
            trial.subjects.iter().map(|s| s.covariates[j]).sum::<f64>() / trial.len() as f64;
        let pool_mean = external.subjects.iter().map(|s| s.covariates[j]).sum::<f64>()
            / external.len() as f64;
        let weighted: f64 = weights
            .selected_indices
            .iter()
            .zip(&weights.standardized)
            .map(|(&i, &w)| w * external.subjects[i].covariates[j])
            .sum::<f64>()
            / n_selected as f64;
        println!(
            "  {:<4} trial {:+.3}  external pool {:+.3}  weighted selection {:+.3}",
            trial.covariate_names[j], trial_mean, pool_mean, weighted
        );
    }
}
