//! File formats: subject-level CSV datasets, summary tables, per-method
//! analysis rows, and Kaplan-Meier curve points.
//!
//! The subject schema is `id,source,treatment,time,status,<covariates...>`
//! with `source` in {trial, external}, `treatment` and `status` as 0/1, and
//! times as plain nonnegative decimals (decimal point, never a locale
//! comma; NaN and infinities are rejected). Floats are written in Rust's
//! shortest round-trip form, so a written file re-parses to bitwise
//! identical values.

use std::io::Write;
use std::path::Path;

use crate::harness::ScenarioSummary;
use crate::km::KmCurve;
use crate::model::{Cohort, MethodResult, Source, Subject, Treatment};
use crate::sim::confounding_label;

/// Dataset problems name the file line they were found on.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

/// Write a trial and an external cohort into one subject-level CSV.
pub fn write_cohorts_csv(path: &Path, trial: &Cohort, external: &Cohort) -> Result<(), DataError> {
    let io_err = |source| DataError::Io { path: path.display().to_string(), source };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let inner = |source| DataError::Io { path: path.display().to_string(), source };

    let mut header = String::from("id,source,treatment,time,status");
    for name in &trial.covariate_names {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}").map_err(inner)?;
    for subject in trial.subjects.iter().chain(&external.subjects) {
        let source = match subject.source {
            Source::Trial => "trial",
            Source::External => "external",
        };
        let treatment = if subject.is_treated() { 1 } else { 0 };
        let status = if subject.status { 1 } else { 0 };
        let mut row = format!(
            "{},{},{},{},{}",
            subject.id, source, treatment, subject.time, status
        );
        for x in &subject.covariates {
            row.push(',');
            row.push_str(&x.to_string());
        }
        writeln!(out, "{row}").map_err(inner)?;
    }
    Ok(())
}

/// Read a subject-level CSV back into (trial, external) cohorts.
///
/// Errors carry the 1-based line number (the header is line 1). Missing
/// cells, non-numeric values, NaN, negative times, and treated externals
/// are all malformed rows.
pub fn read_cohorts_csv(path: &Path) -> Result<(Cohort, Cohort), DataError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: display.clone(), source })?;
    let malformed = |line: usize, message: String| DataError::Malformed {
        path: display.clone(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let expected = ["id", "source", "treatment", "time", "status"];
    if columns.len() < expected.len() || columns[..expected.len()] != expected {
        return Err(malformed(
            1,
            format!("header must start with `id,source,treatment,time,status`, got `{header}`"),
        ));
    }
    let covariate_names: Vec<String> =
        columns[expected.len()..].iter().map(|s| s.to_string()).collect();
    let k = covariate_names.len();

    let mut trial = Cohort::new(covariate_names.clone());
    let mut external = Cohort::new(covariate_names);
    let mut seen = std::collections::HashSet::new();

    for (index, raw) in lines {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != expected.len() + k {
            return Err(malformed(
                line,
                format!("expected {} cells, got {}", expected.len() + k, cells.len()),
            ));
        }
        let id = cells[0].trim();
        if id.is_empty() {
            return Err(malformed(line, "empty id".into()));
        }
        if !seen.insert(id.to_string()) {
            return Err(malformed(line, format!("duplicate id `{id}`")));
        }
        let source = match cells[1].trim() {
            "trial" => Source::Trial,
            "external" => Source::External,
            other => {
                return Err(malformed(
                    line,
                    format!("source must be `trial` or `external`, got `{other}`"),
                ))
            }
        };
        let treatment = match cells[2].trim() {
            "0" => Treatment::StandardOfCare,
            "1" => Treatment::Intervention,
            other => return Err(malformed(line, format!("treatment must be 0 or 1, got `{other}`"))),
        };
        if source == Source::External && treatment == Treatment::Intervention {
            return Err(malformed(line, "external subjects cannot receive the intervention".into()));
        }
        let time = parse_number(cells[3], line, "time", &malformed)?;
        if time < 0.0 {
            // parse_number already rejected NaN and infinities.
            return Err(malformed(line, format!("time must be nonnegative, got {time}")));
        }
        let status = match cells[4].trim() {
            "0" => false,
            "1" => true,
            other => return Err(malformed(line, format!("status must be 0 or 1, got `{other}`"))),
        };
        let mut covariates = Vec::with_capacity(k);
        for (j, cell) in cells[expected.len()..].iter().enumerate() {
            if cell.trim().is_empty() {
                return Err(malformed(
                    line,
                    format!("missing value for covariate `{}`", trial.covariate_names[j]),
                ));
            }
            covariates.push(parse_number(cell, line, &trial.covariate_names[j], &malformed)?);
        }
        let subject = Subject { id: id.to_string(), covariates, source, treatment, time, status };
        match source {
            Source::Trial => trial.subjects.push(subject),
            Source::External => external.subjects.push(subject),
        }
    }
    Ok((trial, external))
}

fn parse_number(
    cell: &str,
    line: usize,
    what: &str,
    malformed: &impl Fn(usize, String) -> DataError,
) -> Result<f64, DataError> {
    let value: f64 = cell
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("{what} is not a number: `{cell}`")))?;
    if !value.is_finite() {
        return Err(malformed(line, format!("{what} must be finite, got `{cell}`")));
    }
    Ok(value)
}

/// Flat serializable view of a [`ScenarioSummary`] row.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SummaryRow {
    pub n_trial: usize,
    pub n_external: usize,
    pub treat_prob: f64,
    pub conditional_hr: f64,
    pub confounding: String,
    pub method: String,
    pub n_reps: usize,
    pub n_failed: usize,
    pub true_log_hr: f64,
    pub bias: f64,
    pub emp_variance: f64,
    pub coverage: f64,
    pub reject_rate: f64,
    pub mean_ess: f64,
    pub mean_alpha: Option<f64>,
}

impl From<&ScenarioSummary> for SummaryRow {
    fn from(s: &ScenarioSummary) -> Self {
        SummaryRow {
            n_trial: s.scenario.n_trial,
            n_external: s.scenario.n_external,
            treat_prob: s.scenario.treat_prob,
            conditional_hr: s.scenario.conditional_hr,
            confounding: confounding_label(&s.scenario.covariate_hrs),
            method: s.method.clone(),
            n_reps: s.n_reps,
            n_failed: s.n_failed,
            true_log_hr: s.true_log_hr,
            bias: s.bias,
            emp_variance: s.emp_variance,
            coverage: s.coverage,
            reject_rate: s.reject_rate,
            mean_ess: s.mean_ess,
            mean_alpha: s.mean_alpha,
        }
    }
}

pub const SUMMARY_HEADER: &str = "n_trial,n_external,treat_prob,conditional_hr,confounding,method,n_reps,n_failed,true_log_hr,bias,emp_variance,coverage,reject_rate,mean_ess,mean_alpha";

/// Render summary rows as CSV (fixed column order, shortest round-trip
/// floats, empty cell for a missing alpha).
pub fn summaries_to_csv(summaries: &[ScenarioSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for summary in summaries {
        let row = SummaryRow::from(summary);
        let alpha = row.mean_alpha.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.n_trial,
            row.n_external,
            row.treat_prob,
            row.conditional_hr,
            row.confounding,
            row.method,
            row.n_reps,
            row.n_failed,
            row.true_log_hr,
            row.bias,
            row.emp_variance,
            row.coverage,
            row.reject_rate,
            row.mean_ess,
            alpha,
        ));
    }
    out
}

/// Render summary rows as JSON lines.
pub fn summaries_to_jsonl(summaries: &[ScenarioSummary]) -> String {
    let mut out = String::new();
    for summary in summaries {
        let row = SummaryRow::from(summary);
        out.push_str(&serde_json::to_string(&row).expect("row serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Parse a summary CSV produced by [`summaries_to_csv`] back into rows.
pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty summary file")?;
    if header != SUMMARY_HEADER {
        return Err(format!("unexpected header `{header}`"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 15 {
            return Err(format!("row {}: expected 15 cells, got {}", i + 2, cells.len()));
        }
        let parse = |cell: &str| cell.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 2));
        rows.push(SummaryRow {
            n_trial: cells[0].parse().map_err(|e| format!("row {}: {e}", i + 2))?,
            n_external: cells[1].parse().map_err(|e| format!("row {}: {e}", i + 2))?,
            treat_prob: parse(cells[2])?,
            conditional_hr: parse(cells[3])?,
            confounding: cells[4].to_string(),
            method: cells[5].to_string(),
            n_reps: cells[6].parse().map_err(|e| format!("row {}: {e}", i + 2))?,
            n_failed: cells[7].parse().map_err(|e| format!("row {}: {e}", i + 2))?,
            true_log_hr: parse(cells[8])?,
            bias: parse(cells[9])?,
            emp_variance: parse(cells[10])?,
            coverage: parse(cells[11])?,
            reject_rate: parse(cells[12])?,
            mean_ess: parse(cells[13])?,
            mean_alpha: if cells[14].is_empty() { None } else { Some(parse(cells[14])?) },
        });
    }
    Ok(rows)
}

/// Flat serializable view of a per-method analysis result.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AnalysisRow {
    pub method: String,
    pub log_hr: f64,
    pub hazard_ratio: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ess: f64,
    pub alpha_hat: Option<f64>,
    pub n_external_used: usize,
    pub converged: bool,
}

impl AnalysisRow {
    pub fn new(label: &str, result: &MethodResult) -> Self {
        AnalysisRow {
            method: label.to_string(),
            log_hr: result.log_hr,
            hazard_ratio: result.hazard_ratio(),
            se: result.se,
            ci_low: result.ci_low,
            ci_high: result.ci_high,
            ess: result.ess,
            alpha_hat: result.alpha_hat,
            n_external_used: result.n_external_used,
            converged: result.converged,
        }
    }
}

pub const ANALYSIS_HEADER: &str =
    "method,log_hr,hazard_ratio,se,ci_low,ci_high,ess,alpha_hat,n_external_used,converged";

pub fn analyses_to_csv(rows: &[AnalysisRow]) -> String {
    let mut out = String::from(ANALYSIS_HEADER);
    out.push('\n');
    for row in rows {
        let alpha = row.alpha_hat.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.method,
            row.log_hr,
            row.hazard_ratio,
            row.se,
            row.ci_low,
            row.ci_high,
            row.ess,
            alpha,
            row.n_external_used,
            row.converged,
        ));
    }
    out
}

pub fn analyses_to_jsonl(rows: &[AnalysisRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Kaplan-Meier curve points for plotting, one block per group:
/// `group,time,survival,se,ci_low,ci_high`.
pub fn km_curves_to_csv(groups: &[(&str, KmCurve)]) -> String {
    let mut out = String::from("group,time,survival,se,ci_low,ci_high\n");
    for (label, curve) in groups {
        for i in 0..curve.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                label,
                curve.times[i],
                curve.survival[i],
                curve.greenwood_se[i],
                curve.ci_low[i],
                curve.ci_high[i],
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, Confounding, Scenario};

    fn temp_path(tag: &str) -> std::path::PathBuf {
        let mut path = std::env::temp_dir();
        path.push(format!(
            "hybridarm-data-{tag}-{}-{}.csv",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        path
    }

    #[test]
    fn cohort_csv_round_trip_is_exact() {
        let scenario = Scenario::from_grid(50, 0.67, 0.75, Confounding::Mild, 3);
        let (trial, external) = generate(&scenario);
        let path = temp_path("roundtrip");
        write_cohorts_csv(&path, &trial, &external).unwrap();
        let (trial2, external2) = read_cohorts_csv(&path).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(trial, trial2);
        assert_eq!(external, external2);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let path = temp_path("malformed");
        std::fs::write(
            &path,
            "id,source,treatment,time,status,x1\na,trial,1,1.0,1,0.5\nb,trial,0,1.0,1,\n",
        )
        .unwrap();
        let err = read_cohorts_csv(&path).unwrap_err();
        std::fs::remove_file(&path).unwrap();
        let message = err.to_string();
        assert!(message.contains(":3:"), "{message}");
        assert!(message.contains("x1"), "{message}");
    }

    #[test]
    fn nan_and_negative_times_are_rejected() {
        for bad in ["NaN", "-1.0", "inf"] {
            let path = temp_path("badtime");
            std::fs::write(
                &path,
                format!("id,source,treatment,time,status,x1\na,trial,1,{bad},1,0.5\n"),
            )
            .unwrap();
            let err = read_cohorts_csv(&path).unwrap_err();
            std::fs::remove_file(&path).unwrap();
            assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{bad}: {err}");
        }
    }

    #[test]
    fn treated_external_is_malformed() {
        let path = temp_path("treatedext");
        std::fs::write(&path, "id,source,treatment,time,status,x1\na,external,1,1.0,1,0.5\n")
            .unwrap();
        let err = read_cohorts_csv(&path).unwrap_err();
        std::fs::remove_file(&path).unwrap();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn summary_csv_round_trip_preserves_values() {
        let scenario = Scenario::from_grid(60, 0.67, 1.0, Confounding::Mild, 5);
        let summaries = crate::harness::run_scenario(
            &scenario,
            &[crate::harness::MethodSpec::TrialOnly, crate::harness::MethodSpec::PowerPrior(0.5)],
            4,
        );
        let text = summaries_to_csv(&summaries);
        let rows = parse_summary_csv(&text).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, summary) in rows.iter().zip(&summaries) {
            assert_eq!(row.method, summary.method);
            assert_eq!(row.bias.to_bits(), summary.bias.to_bits());
            assert_eq!(row.mean_ess.to_bits(), summary.mean_ess.to_bits());
            assert_eq!(row.mean_alpha.map(f64::to_bits), summary.mean_alpha.map(f64::to_bits));
        }
    }

    #[test]
    fn km_csv_has_one_row_per_step() {
        let curve = crate::km::km_estimate(&[(1.0, true), (2.0, true), (3.0, false)], 0.95).unwrap();
        let text = km_curves_to_csv(&[("trial_soc", curve.clone()), ("external", curve)]);
        assert_eq!(text.lines().count(), 1 + 4);
        assert!(text.starts_with("group,time,survival,se,ci_low,ci_high\n"));
    }
}
