//! Unplanned-readmission cohort rules, labels and patient-level folds.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::AgeBucket;
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::series::{Gender, PatientId, StayId, StayRecord, Timestamp, SECONDS_PER_DAY};

pub const READMISSION_WINDOW: i64 = 30 * SECONDS_PER_DAY;
pub const MIN_LOS: i64 = SECONDS_PER_DAY;
pub const MAX_LOS: i64 = 30 * SECONDS_PER_DAY;
pub const ADULT_AGE: u32 = 18;
const ROLLING_YEAR: i64 = 365 * SECONDS_PER_DAY;

/// Inclusion rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    /// Age at admission of at least 18.
    R1,
    /// Length of stay between 1 and 30 days inclusive.
    R2,
    /// At least `min_samples` raw samples of every concept.
    R3,
    /// No death during the stay or within 30 days after discharge.
    R4,
    /// First ICU stay of the patient in the year.
    R5,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.to_string() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown rule `{s}`")))
    }
}

/// How "first stay per year" is delimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YearWindow {
    /// Calendar year (UTC) of the ICU admission time.
    #[default]
    Calendar,
    /// No other stay of the patient in the preceding 365 days.
    Rolling,
}

impl FromStr for YearWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calendar" => Ok(YearWindow::Calendar),
            "rolling" => Ok(YearWindow::Rolling),
            _ => Err(Error::InvalidConfig(format!("unknown year window `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub year_window: YearWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortDecision {
    pub stay_id: StayId,
    pub patient_id: PatientId,
    pub included: bool,
    pub failed_rules: Vec<Rule>,
    /// Readmission label; present iff included.
    pub label: Option<bool>,
}

fn calendar_year(t: Timestamp) -> i32 {
    DateTime::from_timestamp(t, 0).map_or(1970, |d| d.year())
}

fn group_by_patient(stays: &[StayRecord]) -> BTreeMap<PatientId, Vec<&StayRecord>> {
    let mut by_patient: BTreeMap<PatientId, Vec<&StayRecord>> = BTreeMap::new();
    for s in stays {
        by_patient.entry(s.patient_id).or_default().push(s);
    }
    for v in by_patient.values_mut() {
        v.sort_by_key(|s| (s.icu_in, s.stay_id));
    }
    by_patient
}

fn has_sufficient_data(stay: &StayRecord, kb: &KnowledgeBase) -> bool {
    let mut counts: HashMap<&str, u32> = HashMap::new();
    for s in &stay.samples {
        *counts.entry(s.concept_id.as_str()).or_default() += 1;
    }
    kb.concepts()
        .iter()
        .all(|c| counts.get(c.concept_id.as_str()).copied().unwrap_or(0) >= c.min_samples)
}

/// Whether `stay` is the first of its patient's stays for the year, with
/// `history` being all of that patient's stays sorted by admission.
fn is_first_of_year(stay: &StayRecord, history: &[&StayRecord], window: YearWindow) -> bool {
    let earlier = history
        .iter()
        .filter(|o| o.stay_id != stay.stay_id)
        .filter(|o| (o.icu_in, o.stay_id) < (stay.icu_in, stay.stay_id));
    match window {
        YearWindow::Calendar => {
            let year = calendar_year(stay.icu_in);
            !earlier.into_iter().any(|o| calendar_year(o.icu_in) == year)
        }
        YearWindow::Rolling => !earlier
            .into_iter()
            .any(|o| stay.icu_in - o.icu_in < ROLLING_YEAR),
    }
}

/// Rules failed by one stay, given the patient's full history.
pub fn failed_rules(
    stay: &StayRecord,
    history: &[&StayRecord],
    kb: &KnowledgeBase,
    options: &CohortOptions,
) -> Vec<Rule> {
    let mut failed = Vec::new();
    if stay.age_years < ADULT_AGE {
        failed.push(Rule::R1);
    }
    let los = stay.length_of_stay();
    if !(MIN_LOS..=MAX_LOS).contains(&los) {
        failed.push(Rule::R2);
    }
    if !has_sufficient_data(stay, kb) {
        failed.push(Rule::R3);
    }
    if stay
        .death_time
        .is_some_and(|d| d <= stay.icu_out + READMISSION_WINDOW)
    {
        failed.push(Rule::R4);
    }
    if !is_first_of_year(stay, history, options.year_window) {
        failed.push(Rule::R5);
    }
    failed
}

/// True iff another stay of the same patient starts in
/// `(icu_out, icu_out + 30 days]`.
pub fn is_readmitted(stay: &StayRecord, history: &[&StayRecord]) -> bool {
    history.iter().any(|o| {
        o.stay_id != stay.stay_id
            && o.icu_in > stay.icu_out
            && o.icu_in <= stay.icu_out + READMISSION_WINDOW
    })
}

/// Evaluate every rule on every stay and label the included ones.
///
/// Decisions are returned in input order. Labels consider all stays of the
/// patient, including excluded ones.
pub fn apply_rules(
    stays: &[StayRecord],
    kb: &KnowledgeBase,
    options: &CohortOptions,
) -> Vec<CohortDecision> {
    let by_patient = group_by_patient(stays);
    stays
        .iter()
        .map(|s| {
            let history = &by_patient[&s.patient_id];
            let failed = failed_rules(s, history, kb, options);
            let included = failed.is_empty();
            CohortDecision {
                stay_id: s.stay_id,
                patient_id: s.patient_id,
                included,
                label: included.then(|| is_readmitted(s, history)),
                failed_rules: failed,
            }
        })
        .collect()
}

/// Readmission labels for `included` stays, looked up against `all` stays.
pub fn label_readmission(included: &[&StayRecord], all: &[StayRecord]) -> Vec<(StayId, bool)> {
    let by_patient = group_by_patient(all);
    included
        .iter()
        .map(|s| {
            let history = by_patient.get(&s.patient_id).map_or(&[][..], Vec::as_slice);
            (s.stay_id, is_readmitted(s, history))
        })
        .collect()
}

/// One labelled cohort member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortMember {
    pub stay_id: StayId,
    pub patient_id: PatientId,
    pub label: bool,
}

pub fn cohort_members(decisions: &[CohortDecision]) -> Vec<CohortMember> {
    decisions
        .iter()
        .filter_map(|d| {
            d.label.map(|label| CohortMember {
                stay_id: d.stay_id,
                patient_id: d.patient_id,
                label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub folds: BTreeMap<PatientId, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, patient: PatientId) -> Option<usize> {
        self.folds.get(&patient).copied()
    }

    pub fn patients_in(&self, fold: usize) -> impl Iterator<Item = PatientId> + '_ {
        self.folds
            .iter()
            .filter(move |(_, &f)| f == fold)
            .map(|(&p, _)| p)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("patient_id,fold\n");
        for (p, f) in &self.folds {
            out.push_str(&format!("{p},{f}\n"));
        }
        out
    }

    pub fn from_csv<R: std::io::Read>(r: R, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut folds = BTreeMap::new();
        for rec in rdr.deserialize::<(PatientId, usize)>() {
            let (p, f) = rec?;
            folds.insert(p, f);
        }
        let k = folds.values().max().map_or(0, |m| m + 1);
        Ok(FoldAssignment { k, seed, folds })
    }
}

/// Deal patients into `k` folds, stratified by patient-level label.
///
/// A patient is positive if any of their cohort stays is. Each class is
/// shuffled by `seed` and dealt round-robin; negatives continue from the
/// fold after the last positive so fold sizes differ by at most one.
pub fn stratified_folds(cohort: &[CohortMember], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFoldCount(k));
    }
    let mut patient_label: BTreeMap<PatientId, bool> = BTreeMap::new();
    for m in cohort {
        *patient_label.entry(m.patient_id).or_default() |= m.label;
    }
    if patient_label.len() < k {
        return Err(Error::TooFewPatients {
            patients: patient_label.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positives: Vec<PatientId> =
        patient_label.iter().filter(|(_, &l)| l).map(|(&p, _)| p).collect();
    let mut negatives: Vec<PatientId> =
        patient_label.iter().filter(|(_, &l)| !l).map(|(&p, _)| p).collect();
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let folds = positives
        .into_iter()
        .chain(negatives)
        .enumerate()
        .map(|(i, p)| (p, i % k))
        .collect();
    Ok(FoldAssignment { k, seed, folds })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub positive: usize,
    pub negative: usize,
}

/// Label counts by gender and age bucket, plus totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub male_18_65: Cell,
    pub male_over_65: Cell,
    pub female_18_65: Cell,
    pub female_over_65: Cell,
    pub stays: usize,
    pub patients: usize,
    pub positives: usize,
    pub positive_rate: f64,
}

impl CohortReport {
    pub fn cell(&self, gender: Gender, bucket: AgeBucket) -> Cell {
        match (gender, bucket) {
            (Gender::Male, AgeBucket::Adult) => self.male_18_65,
            (Gender::Male, AgeBucket::Senior) => self.male_over_65,
            (Gender::Female, AgeBucket::Adult) => self.female_18_65,
            (Gender::Female, AgeBucket::Senior) => self.female_over_65,
        }
    }

    fn cell_mut(&mut self, gender: Gender, bucket: AgeBucket) -> &mut Cell {
        match (gender, bucket) {
            (Gender::Male, AgeBucket::Adult) => &mut self.male_18_65,
            (Gender::Male, AgeBucket::Senior) => &mut self.male_over_65,
            (Gender::Female, AgeBucket::Adult) => &mut self.female_18_65,
            (Gender::Female, AgeBucket::Senior) => &mut self.female_over_65,
        }
    }

    /// Aligned text table, positives/negatives per cell.
    pub fn to_text(&self) -> String {
        let c = |cell: Cell| format!("{}/{}", cell.positive, cell.negative);
        let mut out = format!("{:<8} {:>14} {:>14}\n", "Gender", "Ages 18-65", "Ages > 65");
        out.push_str(&format!(
            "{:<8} {:>14} {:>14}\n",
            "Male",
            c(self.male_18_65),
            c(self.male_over_65)
        ));
        out.push_str(&format!(
            "{:<8} {:>14} {:>14}\n",
            "Female",
            c(self.female_18_65),
            c(self.female_over_65)
        ));
        out.push_str(&format!(
            "stays={} patients={} positives={} rate={:.1}%\n",
            self.stays,
            self.patients,
            self.positives,
            100.0 * self.positive_rate
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gender,age_bucket,positive,negative\n");
        for g in [Gender::Male, Gender::Female] {
            for b in [AgeBucket::Adult, AgeBucket::Senior] {
                let cell = self.cell(g, b);
                out.push_str(&format!("{},{},{},{}\n", g.as_str(), b.as_str(), cell.positive, cell.negative));
            }
        }
        out
    }
}

/// Count labelled stays in the cohort. `stays` supplies demographics.
pub fn cohort_report(decisions: &[CohortDecision], stays: &[StayRecord]) -> CohortReport {
    let by_id: HashMap<StayId, &StayRecord> = stays.iter().map(|s| (s.stay_id, s)).collect();
    let mut report = CohortReport::default();
    let mut patients = std::collections::BTreeSet::new();
    for d in decisions {
        let (Some(label), Some(stay)) = (d.label, by_id.get(&d.stay_id)) else {
            continue;
        };
        let Ok(bucket) = AgeBucket::of(stay.age_years) else {
            continue;
        };
        let cell = report.cell_mut(stay.gender, bucket);
        if label {
            cell.positive += 1;
        } else {
            cell.negative += 1;
        }
        report.stays += 1;
        report.positives += usize::from(label);
        patients.insert(stay.patient_id);
    }
    report.patients = patients.len();
    report.positive_rate = if report.stays == 0 {
        0.0
    } else {
        report.positives as f64 / report.stays as f64
    };
    report
}

/// Decisions as CSV: `stay_id,included,failed_rules,label,patient_id`, rules
/// joined by `;`.
pub fn decisions_to_csv(decisions: &[CohortDecision]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["stay_id", "included", "failed_rules", "label", "patient_id"])
        .expect("in-memory write");
    for d in decisions {
        let rules: Vec<String> = d.failed_rules.iter().map(Rule::to_string).collect();
        w.write_record([
            d.stay_id.to_string(),
            d.included.to_string(),
            rules.join(";"),
            d.label.map(|l| l.to_string()).unwrap_or_default(),
            d.patient_id.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn decisions_from_csv<R: std::io::Read>(r: R) -> Result<Vec<CohortDecision>> {
    #[derive(Deserialize)]
    struct Row {
        stay_id: StayId,
        included: bool,
        failed_rules: String,
        label: String,
        patient_id: PatientId,
    }
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize::<Row>().enumerate() {
        let row = row?;
        let failed_rules = row
            .failed_rules
            .split(';')
            .filter(|s| !s.is_empty())
            .map(Rule::from_str)
            .collect::<Result<Vec<_>>>()?;
        let label = match row.label.as_str() {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => {
                return Err(Error::Parse {
                    file: "decisions.csv".into(),
                    line: i as u64 + 2,
                    message: format!("bad label `{other}`"),
                })
            }
        };
        out.push(CohortDecision {
            stay_id: row.stay_id,
            patient_id: row.patient_id,
            included: row.included,
            failed_rules,
            label,
        });
    }
    Ok(out)
}
