//! Command-line front end: config-driven simulation sweeps, CSV dataset
//! analysis, and the marginal-truth oracle.
//!
//! Exit codes: 0 success, 2 config or data errors, 3 estimation
//! preconditions not met (e.g. no events in the dataset).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybridarm::config::{preload_truth_fixture, OutputFormat, RunConfig, TruthEntry};
use hybridarm::dataset::{
    analyses_to_csv, analyses_to_jsonl, km_curves_to_csv, read_cohorts_csv, summaries_to_csv,
    summaries_to_jsonl, write_cohorts_csv, AnalysisRow,
};
use hybridarm::harness::{sweep, MethodSpec, ScenarioSummary};
use hybridarm::km::km_estimate;
use hybridarm::model::{split, validate_cohort};
use hybridarm::sim::{self, Confounding, Scenario};
use hybridarm::{streams, Error};

#[derive(Parser)]
#[command(
    name = "hybridarm",
    about = "Hybrid control arm analysis and simulation for survival trials",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep described by a TOML config.
    Simulate(SimulateArgs),
    /// Analyze a subject-level CSV dataset with the borrowing methods.
    Analyze(AnalyzeArgs),
    /// Compute the marginal treatment effect implied by scenario parameters.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Sweep configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured output format.
    #[arg(long, value_parser = ["csv", "jsonl"])]
    format: Option<String>,
    /// Override the configured root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured worker count (0 = all cores).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Write each scenario's first-replicate dataset as CSV into this
    /// directory.
    #[arg(long, value_name = "DIR")]
    dump_data: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Subject-level CSV dataset.
    data: PathBuf,
    /// Comma-separated methods to run.
    #[arg(long, default_value = "trial_only,full_pooling,pp,npp,lin,daw")]
    methods: String,
    /// Weight for the power prior.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Seed for method-internal draws (Lin's pool draw).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-method rows to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format for --out.
    #[arg(long, default_value = "csv", value_parser = ["csv", "jsonl"])]
    format: String,
    /// Write Kaplan-Meier curve points per group to this file.
    #[arg(long)]
    km_out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Conditional hazard ratio of the intervention.
    #[arg(long)]
    conditional_hr: f64,
    /// Confounding preset for the covariate hazard ratios.
    #[arg(long, conflicts_with = "betas")]
    confounding: Option<String>,
    /// Explicit covariate hazard ratios, e.g. 1,1,1,1.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Merge the result into this JSON fixture file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl std::fmt::Display) -> Self {
        Failure { code: 2, message: message.to_string() }
    }

    fn estimation(message: impl std::fmt::Display) -> Self {
        Failure { code: 3, message: message.to_string() }
    }

    fn io(message: impl std::fmt::Display) -> Self {
        Failure { code: 1, message: message.to_string() }
    }
}

fn run() -> Result<(), Failure> {
    match Cli::parse().command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut config = RunConfig::from_path(&args.config).map_err(Failure::config)?;
    if let Some(out) = args.out {
        config.output.path = out;
    }
    if let Some(format) = args.format {
        config.output.format = OutputFormat::parse(&format).expect("clap-validated");
    }
    if let Some(seed) = args.seed {
        config.root_seed = seed;
    }
    if let Some(parallelism) = args.parallelism {
        config.parallelism = parallelism;
    }
    if let Some(fixture) = &config.truth_fixture {
        let n = preload_truth_fixture(fixture).map_err(Failure::config)?;
        println!("loaded {n} marginal truths from {}", fixture.display());
    }

    let grid = config.scenarios();
    let specs = config.method_specs();

    if let Some(dir) = &args.dump_data {
        std::fs::create_dir_all(dir).map_err(Failure::io)?;
        for (index, scenario) in grid.iter().enumerate() {
            let rep_seed = streams::replicate_seed(scenario.seed, 0);
            let mut rep_scenario = scenario.clone();
            rep_scenario.seed = rep_seed;
            let (trial, external) = sim::generate(&rep_scenario);
            let path = dir.join(format!("scenario{index:03}_rep0.csv"));
            write_cohorts_csv(&path, &trial, &external)
                .map_err(|e| Failure::io(format!("dump {}: {e}", path.display())))?;
            println!(
                "dumped scenario {index} replicate 0 (seed {rep_seed}) to {}",
                path.display()
            );
        }
    }

    let summaries = sweep(&grid, &specs, config.n_reps, config.parallelism);

    let rendered = match config.output.format {
        OutputFormat::Csv => summaries_to_csv(&summaries),
        OutputFormat::Jsonl => summaries_to_jsonl(&summaries),
    };
    std::fs::write(&config.output.path, rendered)
        .map_err(|e| Failure::io(format!("write {}: {e}", config.output.path.display())))?;

    print_summary_table(&summaries);
    println!(
        "\n{} rows written to {}",
        summaries.len(),
        config.output.path.display()
    );
    Ok(())
}

fn print_summary_table(summaries: &[ScenarioSummary]) {
    println!(
        "{:>7} {:>6} {:>6} {:>8} {:<12} {:>8} {:>9} {:>9} {:>9} {:>9} {:>7}",
        "n_trial", "ratio", "hr", "conf", "method", "bias", "variance", "coverage", "reject", "ess", "alpha"
    );
    for s in summaries {
        let row = hybridarm::dataset::SummaryRow::from(s);
        println!(
            "{:>7} {:>6.2} {:>6} {:>8} {:<12} {:>8.4} {:>9.5} {:>9.3} {:>9.3} {:>9.1} {:>7}",
            row.n_trial,
            row.treat_prob,
            row.conditional_hr,
            row.confounding,
            row.method,
            row.bias,
            row.emp_variance,
            row.coverage,
            row.reject_rate,
            row.mean_ess,
            row.mean_alpha.map(|a| format!("{a:.3}")).unwrap_or_default(),
        );
    }
}

fn parse_methods(list: &str, alpha: f64) -> Result<Vec<MethodSpec>, Failure> {
    let mut specs = Vec::new();
    for name in list.split(',') {
        match name.trim() {
            "trial_only" => specs.push(MethodSpec::TrialOnly),
            "full_pooling" => specs.push(MethodSpec::FullPooling),
            "pp" => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Failure::config(format!("--alpha must lie in [0,1], got {alpha}")));
                }
                specs.push(MethodSpec::PowerPrior(alpha));
            }
            "npp" => specs.push(MethodSpec::NormalizedPowerPrior),
            "lin" => specs.push(MethodSpec::Lin),
            "daw" => specs.push(MethodSpec::Daw),
            other => {
                return Err(Failure::config(format!(
                    "unknown method `{other}` (expected trial_only, full_pooling, pp, npp, lin, daw)"
                )))
            }
        }
    }
    if specs.is_empty() {
        return Err(Failure::config("no methods requested"));
    }
    Ok(specs)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let (trial, external) = read_cohorts_csv(&args.data).map_err(Failure::config)?;
    for cohort in [&trial, &external] {
        let violations = validate_cohort(cohort);
        if !violations.is_empty() {
            let listed: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
            return Err(Failure::config(format!(
                "{}: invalid cohort: {}",
                args.data.display(),
                listed.join("; ")
            )));
        }
    }
    let specs = parse_methods(&args.methods, args.alpha)?;

    let mut rows = Vec::new();
    for spec in &specs {
        let result = spec.run(&trial, &external, args.seed).map_err(|e| match e {
            Error::InvalidInput(_) => Failure::config(format!("{}: {e}", spec.label())),
            other => Failure::estimation(format!("{}: {other}", spec.label())),
        })?;
        rows.push(AnalysisRow::new(&spec.label(), &result));
    }

    println!(
        "{:<12} {:>7} {:>15} {:>8} {:>7} {:>9}",
        "method", "HR", "95% CI", "ESS", "n_ext", "alpha"
    );
    for row in &rows {
        println!(
            "{:<12} {:>7.3} [{:>6.3}, {:>6.3}] {:>8.1} {:>7} {:>9}",
            row.method,
            row.hazard_ratio,
            row.ci_low.exp(),
            row.ci_high.exp(),
            row.ess,
            row.n_external_used,
            row.alpha_hat.map(|a| format!("{a:.3}")).unwrap_or_default(),
        );
    }

    if let Some(out) = &args.out {
        let rendered = match args.format.as_str() {
            "csv" => analyses_to_csv(&rows),
            _ => analyses_to_jsonl(&rows),
        };
        std::fs::write(out, rendered)
            .map_err(|e| Failure::io(format!("write {}: {e}", out.display())))?;
        println!("\n{} rows written to {}", rows.len(), out.display());
    }

    if let Some(km_out) = &args.km_out {
        let (trial_soc, trial_intervention, _) = split(&trial);
        let groups = [
            ("trial_intervention", &trial_intervention),
            ("trial_soc", &trial_soc),
            ("external", &external),
        ];
        let mut curves = Vec::new();
        for (label, cohort) in groups {
            if cohort.is_empty() {
                continue;
            }
            let data: Vec<(f64, bool)> =
                cohort.subjects.iter().map(|s| (s.time, s.status)).collect();
            let curve = km_estimate(&data, 0.95)
                .map_err(|e| Failure::estimation(format!("{label}: {e}")))?;
            if let Some(median) = curve.median {
                println!(
                    "{label}: median survival {median:.2} (95% CI {}, {})",
                    curve.median_ci_low.map(|v| format!("{v:.2}")).unwrap_or("-".into()),
                    curve.median_ci_high.map(|v| format!("{v:.2}")).unwrap_or("-".into()),
                );
            }
            curves.push((label, curve));
        }
        std::fs::write(km_out, km_curves_to_csv(&curves))
            .map_err(|e| Failure::io(format!("write {}: {e}", km_out.display())))?;
        println!("KM curves written to {}", km_out.display());
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    let betas: [f64; 4] = if let Some(values) = &args.betas {
        if values.len() != 4 {
            return Err(Failure::config(format!(
                "--betas needs exactly 4 values, got {}",
                values.len()
            )));
        }
        [values[0], values[1], values[2], values[3]]
    } else if let Some(name) = &args.confounding {
        Confounding::parse(name)
            .ok_or_else(|| {
                Failure::config(format!(
                    "unknown confounding preset `{name}` (expected mild or strong)"
                ))
            })?
            .betas()
    } else {
        return Err(Failure::config("one of --confounding or --betas is required"));
    };
    if !(args.conditional_hr > 0.0 && args.conditional_hr.is_finite()) {
        return Err(Failure::config(format!(
            "--conditional-hr must be positive, got {}",
            args.conditional_hr
        )));
    }

    let mut scenario = Scenario::from_grid(100, 0.67, args.conditional_hr, Confounding::Mild, 0);
    scenario.covariate_hrs = betas;
    let marginal_log_hr = sim::true_marginal_log_hr(&scenario);
    let marginal_hr = marginal_log_hr.exp();
    println!("conditional HR: {}", args.conditional_hr);
    println!("marginal HR:    {marginal_hr:.4}");
    println!("ratio:          {:.4}", marginal_hr / args.conditional_hr);

    if let Some(out) = &args.out {
        let mut entries: Vec<TruthEntry> = if out.exists() {
            let text = std::fs::read_to_string(out)
                .map_err(|e| Failure::io(format!("read {}: {e}", out.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", out.display())))?
        } else {
            Vec::new()
        };
        entries.retain(|e| {
            e.conditional_hr != args.conditional_hr || e.betas != betas
        });
        entries.push(TruthEntry { conditional_hr: args.conditional_hr, betas, marginal_log_hr });
        let text = serde_json::to_string_pretty(&entries).expect("fixture serialization");
        std::fs::write(out, text)
            .map_err(|e| Failure::io(format!("write {}: {e}", out.display())))?;
        println!("fixture updated: {}", out.display());
    }
    Ok(())
}
