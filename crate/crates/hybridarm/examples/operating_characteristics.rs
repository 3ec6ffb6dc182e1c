//! A miniature Monte Carlo study: bias, variance, coverage, and rejection
//! rate for every method on one null and one effect scenario.
//!
//! The full study grid lives in `configs/`; run it with the `simulate`
//! subcommand. This example keeps the replicate count small so it finishes
//! in under a minute.
//!
//! ```bash
//! cargo run --release --example operating_characteristics
//! ```

use hybridarm::harness::{run_scenario, truth_for, MethodSpec};
use hybridarm::sim::{Confounding, Scenario};

fn main() {
    let specs = vec![
        MethodSpec::TrialOnly,
        MethodSpec::FullPooling,
        MethodSpec::PowerPrior(0.5),
        MethodSpec::NormalizedPowerPrior,
        MethodSpec::Lin,
        MethodSpec::Daw,
    ];
    let n_reps = 200;

    for conditional_hr in [1.0, 0.5] {
        let scenario = Scenario::from_grid(100, 0.67, conditional_hr, Confounding::Strong, 1);
        let truth = truth_for(&scenario);
        println!(
            "\nconditional HR {conditional_hr}, marginal log HR {truth:+.4}, {} replicates:",
            n_reps
        );
        println!(
            "{:<12} {:>8} {:>9} {:>9} {:>8} {:>8}",
            "method", "bias", "variance", "coverage", "reject", "ess"
        );
        for summary in run_scenario(&scenario, &specs, n_reps) {
            println!(
                "{:<12} {:>8.4} {:>9.5} {:>9.3} {:>8.3} {:>8.1}",
                summary.method,
                summary.bias,
                summary.emp_variance,
                summary.coverage,
                summary.reject_rate,
                summary.mean_ess
            );
        }
    }
    println!("\n(at the null, `reject` is the type I error; off it, the power)");
}
