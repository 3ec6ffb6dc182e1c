//! Sweep configuration: TOML file describing the scenario grid, methods,
//! replicate count, and output destination.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::harness::MethodSpec;
use crate::sim::{Confounding, Scenario};

/// Output encoding for summary rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "csv" => Some(OutputFormat::Csv),
            "jsonl" => Some(OutputFormat::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    pub format: OutputFormat,
}

/// A sweep configuration.
///
/// The scenario grid is the cross product
/// `trial_sizes x treat_probs x conditional_hrs x confounding`, in that
/// nesting order; `methods` may name `pp`, which expands to one power prior
/// per entry of `pp_alphas`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub root_seed: u64,
    pub n_reps: usize,
    #[serde(default)]
    pub parallelism: usize,
    pub trial_sizes: Vec<usize>,
    pub treat_probs: Vec<f64>,
    pub conditional_hrs: Vec<f64>,
    pub confounding: Vec<String>,
    pub methods: Vec<String>,
    #[serde(default = "default_pp_alphas")]
    pub pp_alphas: Vec<f64>,
    /// Optional JSON file of precomputed marginal truths.
    #[serde(default)]
    pub truth_fixture: Option<PathBuf>,
    pub output: OutputConfig,
}

fn default_pp_alphas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

/// Configuration problems, with enough context to act on: parse errors keep
/// the TOML message (which names keys and line/column), semantic errors name
/// the offending key.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: key `{key}`: {message}")]
    Invalid { path: String, key: String, message: String },
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: display.clone(), source })?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: display.clone(), message: e.to_string() })?;
        config.validate(&display)?;
        Ok(config)
    }

    fn invalid(path: &str, key: &str, message: String) -> ConfigError {
        ConfigError::Invalid { path: path.into(), key: key.into(), message }
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigError> {
        if self.n_reps == 0 {
            return Err(Self::invalid(path, "n_reps", "must be at least 1".into()));
        }
        if self.trial_sizes.is_empty() {
            return Err(Self::invalid(path, "trial_sizes", "must be nonempty".into()));
        }
        if self.trial_sizes.iter().any(|&n| n < 2) {
            return Err(Self::invalid(path, "trial_sizes", "sizes must be at least 2".into()));
        }
        if self.treat_probs.is_empty() {
            return Err(Self::invalid(path, "treat_probs", "must be nonempty".into()));
        }
        if self.treat_probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Self::invalid(path, "treat_probs", "probabilities must lie in (0,1)".into()));
        }
        if self.conditional_hrs.is_empty() {
            return Err(Self::invalid(path, "conditional_hrs", "must be nonempty".into()));
        }
        if self.conditional_hrs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Self::invalid(
                path,
                "conditional_hrs",
                "hazard ratios must be positive".into(),
            ));
        }
        if self.confounding.is_empty() {
            return Err(Self::invalid(path, "confounding", "must be nonempty".into()));
        }
        for name in &self.confounding {
            if Confounding::parse(name).is_none() {
                return Err(Self::invalid(
                    path,
                    "confounding",
                    format!("\"{name}\" is not a known preset (expected \"mild\" or \"strong\")"),
                ));
            }
        }
        if self.methods.is_empty() {
            return Err(Self::invalid(path, "methods", "must be nonempty".into()));
        }
        for name in &self.methods {
            if !matches!(
                name.as_str(),
                "trial_only" | "full_pooling" | "pp" | "npp" | "lin" | "daw"
            ) {
                return Err(Self::invalid(
                    path,
                    "methods",
                    format!(
                        "\"{name}\" is not a known method (expected trial_only, full_pooling, pp, npp, lin, daw)"
                    ),
                ));
            }
        }
        if self.methods.iter().any(|m| m == "pp") {
            if self.pp_alphas.is_empty() {
                return Err(Self::invalid(path, "pp_alphas", "must be nonempty when `pp` is used".into()));
            }
            if self.pp_alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Self::invalid(path, "pp_alphas", "weights must lie in [0,1]".into()));
            }
        }
        if self.parallelism > 1024 {
            return Err(Self::invalid(path, "parallelism", "more than 1024 workers".into()));
        }
        Ok(())
    }

    /// The scenario grid in deterministic order. Every scenario carries the
    /// same root seed; replicate seeds depend only on (root seed, replicate
    /// index), so all scenarios see common random numbers.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut grid = Vec::new();
        for &n_trial in &self.trial_sizes {
            for &treat_prob in &self.treat_probs {
                for &hr in &self.conditional_hrs {
                    for name in &self.confounding {
                        let confounding = Confounding::parse(name).expect("validated");
                        grid.push(Scenario::from_grid(n_trial, treat_prob, hr, confounding, self.root_seed));
                    }
                }
            }
        }
        grid
    }

    /// Methods in configured order with `pp` expanded over `pp_alphas`.
    pub fn method_specs(&self) -> Vec<MethodSpec> {
        let mut specs = Vec::new();
        for name in &self.methods {
            match name.as_str() {
                "trial_only" => specs.push(MethodSpec::TrialOnly),
                "full_pooling" => specs.push(MethodSpec::FullPooling),
                "pp" => specs.extend(self.pp_alphas.iter().map(|&a| MethodSpec::PowerPrior(a))),
                "npp" => specs.push(MethodSpec::NormalizedPowerPrior),
                "lin" => specs.push(MethodSpec::Lin),
                "daw" => specs.push(MethodSpec::Daw),
                _ => unreachable!("validated"),
            }
        }
        specs
    }
}

/// One marginal-truth fixture entry, as written by the `oracle` subcommand.
#[derive(Debug, Clone, Deserialize, serde::Serialize)]
pub struct TruthEntry {
    pub conditional_hr: f64,
    pub betas: [f64; 4],
    pub marginal_log_hr: f64,
}

/// Load a truth fixture and preload the marginal-truth cache.
pub fn preload_truth_fixture(path: &Path) -> Result<usize, ConfigError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: display.clone(), source })?;
    let entries: Vec<TruthEntry> = serde_json::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: display, message: e.to_string() })?;
    for entry in &entries {
        crate::sim::preload_marginal_truth(entry.conditional_hr, &entry.betas, entry.marginal_log_hr);
    }
    Ok(entries.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(body: &str) -> tempfile::NamedTempHolder {
        tempfile::NamedTempHolder::new(body)
    }

    // Minimal self-managed temp file to avoid a dev-dependency.
    mod tempfile {
        use std::path::PathBuf;

        pub struct NamedTempHolder {
            pub path: PathBuf,
        }

        impl NamedTempHolder {
            pub fn new(body: &str) -> Self {
                let mut path = std::env::temp_dir();
                let unique = format!(
                    "hybridarm-config-{}-{}.toml",
                    std::process::id(),
                    std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .unwrap()
                        .as_nanos()
                );
                path.push(unique);
                std::fs::write(&path, body).unwrap();
                NamedTempHolder { path }
            }
        }

        impl Drop for NamedTempHolder {
            fn drop(&mut self) {
                let _ = std::fs::remove_file(&self.path);
            }
        }
    }

    const VALID: &str = r#"
root_seed = 42
n_reps = 10
trial_sizes = [100, 1000]
treat_probs = [0.67]
conditional_hrs = [0.5, 1.0]
confounding = ["mild", "strong"]
methods = ["trial_only", "full_pooling", "pp", "npp", "lin", "daw"]
pp_alphas = [0.25, 0.5, 0.75]

[output]
path = "out.csv"
format = "csv"
"#;

    #[test]
    fn valid_config_parses_and_expands() {
        let file = write_config(VALID);
        let config = RunConfig::from_path(&file.path).unwrap();
        assert_eq!(config.scenarios().len(), 8);
        let labels: Vec<String> = config.method_specs().iter().map(|s| s.label()).collect();
        assert_eq!(
            labels,
            ["trial_only", "full_pooling", "pp_0.25", "pp_0.5", "pp_0.75", "npp", "lin", "daw"]
        );
    }

    #[test]
    fn unknown_confounding_preset_names_the_key() {
        let file = write_config(&VALID.replace("\"strong\"", "\"extreme\""));
        let err = RunConfig::from_path(&file.path).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("confounding"), "{message}");
        assert!(message.contains("extreme"), "{message}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let file = write_config(&format!("{VALID}\nbogus_key = 1\n"));
        let err = RunConfig::from_path(&file.path).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn grid_order_is_deterministic() {
        let file = write_config(VALID);
        let config = RunConfig::from_path(&file.path).unwrap();
        let grid = config.scenarios();
        assert_eq!(grid[0].n_trial, 100);
        assert_eq!(grid[0].conditional_hr, 0.5);
        assert_eq!(grid[0].covariate_hrs, Confounding::Mild.betas());
        assert_eq!(grid[1].covariate_hrs, Confounding::Strong.betas());
        assert_eq!(grid[4].n_trial, 1000);
    }
}
