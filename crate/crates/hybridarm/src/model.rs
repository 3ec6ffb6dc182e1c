//! Shared data model: subjects, cohorts, analysis sets, and method results.

use crate::error::{Error, Result};

/// Where a subject's record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Enrolled in the randomized trial.
    Trial,
    /// Drawn from an external data source (EHR-like registry).
    External,
}

/// Therapy a subject receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Treatment {
    StandardOfCare,
    Intervention,
}

/// One patient record.
///
/// `time` is the observed follow-up (minimum of failure and censoring time)
/// and `status` is true when the failure was observed. External subjects
/// always receive the standard of care; only trial patients can be
/// randomized to the intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    /// Covariate vector, ordered to match the cohort's `covariate_names`.
    pub covariates: Vec<f64>,
    pub source: Source,
    pub treatment: Treatment,
    pub time: f64,
    pub status: bool,
}

impl Subject {
    pub fn is_trial(&self) -> bool {
        self.source == Source::Trial
    }

    pub fn is_treated(&self) -> bool {
        self.treatment == Treatment::Intervention
    }
}

/// An ordered collection of subjects with a shared covariate schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub subjects: Vec<Subject>,
    pub covariate_names: Vec<String>,
}

impl Cohort {
    pub fn new(covariate_names: Vec<String>) -> Self {
        Cohort { subjects: Vec::new(), covariate_names }
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.subjects.iter().filter(|s| s.status).count()
    }

    pub fn n_treated(&self) -> usize {
        self.subjects.iter().filter(|s| s.is_treated()).count()
    }
}

/// A broken invariant found by [`validate_cohort`], naming the subject and
/// the rule it violates. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Offending subject id, or `None` for cohort-level problems.
    pub subject_id: Option<String>,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.subject_id {
            Some(id) => write!(f, "subject {}: {}", id, self.rule),
            None => write!(f, "cohort: {}", self.rule),
        }
    }
}

/// Check every cohort invariant; an empty return means the cohort is valid.
pub fn validate_cohort(cohort: &Cohort) -> Vec<Violation> {
    let mut violations = Vec::new();
    let k = cohort.covariate_names.len();
    let mut seen = std::collections::HashSet::new();

    for subject in &cohort.subjects {
        if !(subject.time >= 0.0 && subject.time.is_finite()) {
            violations.push(Violation {
                subject_id: Some(subject.id.clone()),
                rule: format!("time must satisfy time >= 0 and be finite, got {}", subject.time),
            });
        }
        if subject.source == Source::External && subject.treatment == Treatment::Intervention {
            violations.push(Violation {
                subject_id: Some(subject.id.clone()),
                rule: "external subjects must receive the standard of care".into(),
            });
        }
        if subject.covariates.len() != k {
            violations.push(Violation {
                subject_id: Some(subject.id.clone()),
                rule: format!("expected {} covariates, got {}", k, subject.covariates.len()),
            });
        }
        if subject.covariates.iter().any(|x| !x.is_finite()) {
            violations.push(Violation {
                subject_id: Some(subject.id.clone()),
                rule: "covariates must be finite".into(),
            });
        }
        if !seen.insert(subject.id.clone()) {
            violations.push(Violation {
                subject_id: Some(subject.id.clone()),
                rule: "subject id is not unique within the cohort".into(),
            });
        }
    }
    violations
}

/// Partition a cohort by (source, treatment) into
/// (trial standard-of-care, trial intervention, external).
pub fn split(cohort: &Cohort) -> (Cohort, Cohort, Cohort) {
    let mut trial_soc = Cohort::new(cohort.covariate_names.clone());
    let mut trial_intervention = Cohort::new(cohort.covariate_names.clone());
    let mut external = Cohort::new(cohort.covariate_names.clone());

    for subject in &cohort.subjects {
        let bucket = match (subject.source, subject.treatment) {
            (Source::Trial, Treatment::StandardOfCare) => &mut trial_soc,
            (Source::Trial, Treatment::Intervention) => &mut trial_intervention,
            (Source::External, _) => &mut external,
        };
        bucket.subjects.push(subject.clone());
    }
    (trial_soc, trial_intervention, external)
}

/// A subject paired with its analysis weight.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisEntry<'a> {
    pub subject: &'a Subject,
    pub weight: f64,
}

/// Subjects with per-subject weights: the common input to the weighted
/// Cox fit. Trial subjects always carry weight exactly 1; external weights
/// are nonnegative and finite.
#[derive(Debug, Clone)]
pub struct AnalysisSet<'a> {
    entries: Vec<AnalysisEntry<'a>>,
}

impl<'a> AnalysisSet<'a> {
    pub fn new(entries: Vec<AnalysisEntry<'a>>) -> Result<Self> {
        for entry in &entries {
            if !(entry.weight >= 0.0 && entry.weight.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "weight for subject {} must be nonnegative and finite, got {}",
                    entry.subject.id, entry.weight
                )));
            }
            if entry.subject.is_trial() && entry.weight != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "trial subject {} must carry weight 1, got {}",
                    entry.subject.id, entry.weight
                )));
            }
        }
        Ok(AnalysisSet { entries })
    }

    pub fn entries(&self) -> &[AnalysisEntry<'a>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Effective sample size: the sum of all weights.
    pub fn ess(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }
}

/// The analysis strategy that produced a [`MethodResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    TrialOnly,
    FullPooling,
    PowerPrior,
    NormalizedPowerPrior,
    Lin,
    Daw,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::TrialOnly => "trial_only",
            Method::FullPooling => "full_pooling",
            Method::PowerPrior => "power_prior",
            Method::NormalizedPowerPrior => "npp",
            Method::Lin => "lin",
            Method::Daw => "daw",
        };
        f.write_str(name)
    }
}

/// Estimate and diagnostics returned by every borrowing method.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    /// Log hazard ratio of intervention vs standard of care.
    pub log_hr: f64,
    /// Standard error used for the confidence interval (model-based for the
    /// unweighted naive methods, robust sandwich for weighted ones).
    pub se: f64,
    /// 95% Wald interval bounds: `log_hr -/+ 1.96 * se`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Effective sample size: sum of analysis weights.
    pub ess: f64,
    /// Borrowing weight, for the power prior family.
    pub alpha_hat: Option<f64>,
    /// Number of external subjects entering the analysis with positive weight.
    pub n_external_used: usize,
    /// Whether the underlying fit converged; the harness drops replicates
    /// where it did not.
    pub converged: bool,
    /// Diagnostic note, e.g. when a degenerate design forced a fallback.
    pub note: Option<String>,
}

impl MethodResult {
    pub(crate) fn from_fit(
        method: Method,
        log_hr: f64,
        se: f64,
        ess: f64,
        alpha_hat: Option<f64>,
        n_external_used: usize,
    ) -> Self {
        MethodResult {
            method,
            log_hr,
            se,
            ci_low: log_hr - 1.96 * se,
            ci_high: log_hr + 1.96 * se,
            ess,
            alpha_hat,
            n_external_used,
            converged: true,
            note: None,
        }
    }

    pub fn hazard_ratio(&self) -> f64 {
        self.log_hr.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn subject(id: &str, source: Source, treatment: Treatment, time: f64, status: bool) -> Subject {
        Subject { id: id.into(), covariates: vec![0.0], source, treatment, time, status }
    }

    fn three_class_cohort() -> Cohort {
        Cohort {
            covariate_names: vec!["x1".into()],
            subjects: vec![
                subject("a", Source::Trial, Treatment::StandardOfCare, 1.0, true),
                subject("b", Source::Trial, Treatment::Intervention, 2.0, false),
                subject("c", Source::External, Treatment::StandardOfCare, 3.0, true),
            ],
        }
    }

    #[test]
    fn valid_cohort_has_no_violations() {
        assert!(validate_cohort(&three_class_cohort()).is_empty());
    }

    #[test]
    fn empty_cohort_is_vacuously_valid() {
        assert!(validate_cohort(&Cohort::new(vec!["x1".into()])).is_empty());
    }

    #[test]
    fn treated_external_is_flagged() {
        let mut cohort = three_class_cohort();
        cohort.subjects[2].treatment = Treatment::Intervention;
        let violations = validate_cohort(&cohort);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].subject_id.as_deref(), Some("c"));
        assert!(violations[0].rule.contains("standard of care"));
    }

    #[test]
    fn negative_time_is_flagged() {
        let mut cohort = three_class_cohort();
        cohort.subjects[0].time = -1.0;
        let violations = validate_cohort(&cohort);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("time >= 0"));
    }

    #[test]
    fn duplicate_id_is_flagged() {
        let mut cohort = three_class_cohort();
        cohort.subjects[1].id = "a".into();
        let violations = validate_cohort(&cohort);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("not unique"));
    }

    #[test]
    fn split_partitions_three_classes() {
        let (soc, intervention, external) = split(&three_class_cohort());
        assert_eq!(soc.len(), 1);
        assert_eq!(intervention.len(), 1);
        assert_eq!(external.len(), 1);
        assert_eq!(soc.subjects[0].id, "a");
        assert_eq!(intervention.subjects[0].id, "b");
        assert_eq!(external.subjects[0].id, "c");
    }

    #[test]
    fn split_of_all_trial_cohort_leaves_external_empty() {
        let mut cohort = three_class_cohort();
        cohort.subjects.truncate(2);
        let (soc, intervention, external) = split(&cohort);
        assert_eq!(soc.len() + intervention.len(), 2);
        assert!(external.is_empty());
    }

    #[test]
    fn split_matches_case_study_sizes() {
        // 1,185-subject trial, 791 intervention / 394 standard of care.
        let mut cohort = Cohort::new(vec!["x1".into()]);
        for i in 0..791 {
            cohort.subjects.push(subject(
                &format!("i{i}"),
                Source::Trial,
                Treatment::Intervention,
                1.0,
                true,
            ));
        }
        for i in 0..394 {
            cohort.subjects.push(subject(
                &format!("s{i}"),
                Source::Trial,
                Treatment::StandardOfCare,
                1.0,
                true,
            ));
        }
        let (soc, intervention, external) = split(&cohort);
        assert_eq!((soc.len(), intervention.len(), external.len()), (394, 791, 0));
    }

    #[test]
    fn analysis_set_ess_is_weight_sum() {
        let cohort = three_class_cohort();
        let entries = vec![
            AnalysisEntry { subject: &cohort.subjects[0], weight: 1.0 },
            AnalysisEntry { subject: &cohort.subjects[1], weight: 1.0 },
            AnalysisEntry { subject: &cohort.subjects[2], weight: 0.25 },
        ];
        let set = AnalysisSet::new(entries).unwrap();
        assert_eq!(set.ess(), 2.25);
    }

    #[test]
    fn analysis_set_rejects_reweighted_trial_subject() {
        let cohort = three_class_cohort();
        let entries = vec![AnalysisEntry { subject: &cohort.subjects[0], weight: 0.5 }];
        assert!(matches!(AnalysisSet::new(entries), Err(Error::InvalidInput(_))));
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_partition(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut cohort = Cohort::new(vec!["x1".into()]);
            let n = rng.random_range(0..40usize);
            for i in 0..n {
                let source = if rng.random_bool(0.5) { Source::Trial } else { Source::External };
                let treatment = if source == Source::Trial && rng.random_bool(0.5) {
                    Treatment::Intervention
                } else {
                    Treatment::StandardOfCare
                };
                cohort.subjects.push(subject(&format!("s{i}"), source, treatment, 1.0, true));
            }
            let (a, b, c) = split(&cohort);
            proptest::prop_assert_eq!(a.len() + b.len() + c.len(), cohort.len());
            let mut ids: Vec<&str> = a.subjects.iter()
                .chain(&b.subjects)
                .chain(&c.subjects)
                .map(|s| s.id.as_str())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            proptest::prop_assert_eq!(ids.len(), cohort.len());
        }
    }
}
