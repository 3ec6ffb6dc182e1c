//! Show the normalized power prior's posterior over the borrowing weight,
//! once for externals that agree with the trial controls and once for a
//! conflicting pool.
//!
//! ```bash
//! cargo run --release --example npp_profile
//! ```

use hybridarm::methods::estimate_npp_alpha;
use hybridarm::model::{Cohort, Source};
use hybridarm::sim::{generate, Confounding, Scenario};

fn print_profile(tag: &str, trial: &Cohort, external: &Cohort) {
    let est = estimate_npp_alpha(trial, external).expect("profile");
    println!("\n{tag}: alpha_hat = {:.3}", est.alpha_hat);
    // Coarse text histogram of the posterior in ten bins.
    let mut bins = [0.0f64; 10];
    for (alpha, log_mass) in &est.profile {
        bins[((alpha * 10.0) as usize).min(9)] += log_mass.exp();
    }
    let peak = bins.iter().cloned().fold(0.0, f64::max);
    for (i, mass) in bins.iter().enumerate() {
        let bar = "#".repeat((mass / peak * 40.0).round() as usize);
        println!("  [{:.1},{:.1}) {:>6.3} {}", i as f64 / 10.0, (i + 1) as f64 / 10.0, mass, bar);
    }
}

fn main() {
    let scenario = Scenario::from_grid(150, 0.67, 1.0, Confounding::Mild, 4);
    let (trial, external) = generate(&scenario);

    // Externals drawn from a shifted world (the generator's default).
    print_profile("shifted external pool", &trial, &external);

    // Externals that copy the trial's own control arm: no conflict at all.
    let mut copies = Cohort::new(trial.covariate_names.clone());
    for (i, subject) in trial.subjects.iter().filter(|s| !s.is_treated()).enumerate() {
        let mut copy = subject.clone();
        copy.id = format!("C{i:04}");
        copy.source = Source::External;
        copies.subjects.push(copy);
    }
    print_profile("copied control arm", &trial, &copies);
}
