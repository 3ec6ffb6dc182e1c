//! Run all six analysis strategies on one simulated hybrid-control dataset
//! and print the estimates side by side.
//!
//! ```bash
//! cargo run --release --example compare_methods
//! ```

use hybridarm::harness::MethodSpec;
use hybridarm::sim::{generate, Confounding, Scenario};

fn main() {
    // A 2:1 trial of 200 with a real effect (conditional HR 0.75) and an
    // external pool of the same size under strong confounding.
    let scenario = Scenario::from_grid(200, 0.67, 0.75, Confounding::Strong, 42);
    let (trial, external) = generate(&scenario);
    println!(
        "trial: {} subjects ({} intervention), external pool: {}\n",
        trial.len(),
        trial.n_treated(),
        external.len()
    );

    let specs = [
        MethodSpec::TrialOnly,
        MethodSpec::FullPooling,
        MethodSpec::PowerPrior(0.25),
        MethodSpec::PowerPrior(0.5),
        MethodSpec::PowerPrior(0.75),
        MethodSpec::NormalizedPowerPrior,
        MethodSpec::Lin,
        MethodSpec::Daw,
    ];
    println!(
        "{:<12} {:>7} {:>17} {:>8} {:>7} {:>7}",
        "method", "HR", "95% CI", "ESS", "n_ext", "alpha"
    );
    for spec in specs {
        let result = spec.run(&trial, &external, scenario.seed).expect("analysis failed");
        println!(
            "{:<12} {:>7.3} [{:>6.3}, {:>6.3}] {:>8.1} {:>7} {:>7}",
            spec.label(),
            result.hazard_ratio(),
            result.ci_low.exp(),
            result.ci_high.exp(),
            result.ess,
            result.n_external_used,
            result.alpha_hat.map(|a| format!("{a:.3}")).unwrap_or_default(),
        );
    }
}
