//! Deterministic synthetic ICU cohorts with a tunable readmission signal.
//!
//! Each patient gets one index stay whose series are either steady (values
//! repeat or move by one quantum) or unstable (values jump around the normal
//! range). With signal strength `theta`, unstable stays are readmitted at rate
//! `r * (1 + theta)` and steady ones at `r * (1 - theta)`, where `r` is the
//! target positive rate; `theta = 0` makes labels independent of the series.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{ConceptDef, ConceptKind, KnowledgeBase};
use crate::series::{
    Gender, Icd9Entry, Sample, StayId, StayRecord, Timestamp, SECONDS_PER_DAY, SECONDS_PER_HOUR,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub positive_rate: f64,
    /// Signal strength in `[0, 1]`.
    pub theta: f64,
    pub seed: u64,
    /// Fraction of patients whose index stay violates one inclusion rule.
    pub exclusion_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 2_000,
            positive_rate: 0.113,
            theta: 1.0,
            seed: 0,
            exclusion_rate: 0.03,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 10 {
            return Err(Error::InvalidConfig("n_patients must be at least 10".into()));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::InvalidConfig("positive_rate must be in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig("theta must be in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.exclusion_rate) {
            return Err(Error::InvalidConfig("exclusion_rate must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthData {
    pub stays: Vec<StayRecord>,
    /// Intended readmission label of every index stay.
    pub labels: Vec<(StayId, bool)>,
}

const ICD9_CODES: &[(&str, &str)] = &[
    ("428.0", "Congestive heart failure, unspecified"),
    ("584.9", "Acute kidney failure, unspecified"),
    ("427.31", "Atrial fibrillation"),
    ("401.9", "Unspecified essential hypertension"),
    ("518.81", "Acute respiratory failure"),
    ("038.9", "Unspecified septicemia"),
    ("250.00", "Diabetes mellitus without mention of complication"),
    ("414.01", "Coronary atherosclerosis of native coronary artery"),
    ("486", "Pneumonia, organism unspecified"),
    ("599.0", "Urinary tract infection, site not specified"),
    ("285.9", "Anemia, unspecified"),
    ("272.4", "Other and unspecified hyperlipidemia"),
    ("995.92", "Severe sepsis"),
    ("496", "Chronic airway obstruction, not elsewhere classified"),
    ("96.71", "Continuous invasive mechanical ventilation for less than 96 consecutive hours"),
    ("38.93", "Venous catheterization, not elsewhere classified"),
];

const INSURANCE: &[&str] = &["Medicare", "Medicaid", "Private", "Government", "Self Pay"];

// 2001-01-01T00:00:00Z
const EPOCH_2001: Timestamp = 978_307_200;

/// Normal-range centre, width and value quantum of a concept.
struct Profile {
    mid: f64,
    width: f64,
    quantum: f64,
    decimals: usize,
}

impl Profile {
    fn of(c: &ConceptDef) -> Self {
        let bounds: Vec<f64> = c.cutoffs.iter().filter_map(|x| x.upper).collect();
        let (lo, hi) = match bounds.as_slice() {
            [] => (0.0, 1.0),
            [b] => (b - 1.0, b + 1.0),
            [a, .., b] => (*a, *b),
        };
        let width = (hi - lo).max(1e-6);
        let exp = (width / 10.0).log10().floor();
        let decimals = (-exp).max(0.0) as usize;
        Profile {
            mid: (lo + hi) / 2.0,
            width,
            quantum: 10f64.powf(exp),
            decimals,
        }
    }

    fn quantize(&self, v: f64) -> f64 {
        let q = (v / self.quantum).round() * self.quantum;
        // round-trip through text so CSV output and memory agree exactly
        format!("{:.*}", self.decimals, q).parse().expect("formatted float")
    }
}

fn sample_times(rng: &mut ChaCha8Rng, start: Timestamp, end: Timestamp, every: i64) -> Vec<Timestamp> {
    let mut out = Vec::new();
    let mut t = start;
    while t <= end {
        let jitter = rng.random_range(0..(every / 6).max(1));
        out.push((t + jitter).min(end));
        t += every;
    }
    out
}

fn series(
    rng: &mut ChaCha8Rng,
    profile: &Profile,
    times: &[Timestamp],
    unstable: bool,
    concept: &str,
) -> Vec<Sample> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut v = profile.quantize(profile.mid + noise.sample(rng) * profile.width * 0.15);
    times
        .iter()
        .map(|&t| {
            if unstable {
                v = profile.quantize(profile.mid + noise.sample(rng) * profile.width * 0.8);
            } else if rng.random_bool(0.25) {
                let step = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let next = v + step * profile.quantum;
                // stay near the normal range
                v = profile.quantize(if (next - profile.mid).abs() > profile.width * 0.4 {
                    v - step * profile.quantum
                } else {
                    next
                });
            }
            Sample::new(concept, t, v)
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Violation {
    Age,
    ShortStay,
    MissingLab,
    Death,
}

/// Generate a cohort for `kb` (normally the built-in knowledge base).
pub fn generate(cfg: &SynthConfig, kb: &KnowledgeBase) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let profiles: Vec<Profile> = kb.concepts().iter().map(Profile::of).collect();
    let mut data = SynthData::default();
    let mut next_stay: StayId = 100_001;

    for p in 0..cfg.n_patients {
        let patient_id = 10_001 + p as u64;
        let unstable = rng.random_bool(0.5);
        let p_pos = (cfg.positive_rate * (1.0 + cfg.theta * if unstable { 1.0 } else { -1.0 }))
            .clamp(0.0, 1.0);
        let positive = rng.random_bool(p_pos);

        let year = rng.random_range(0..10i64);
        let icu_in = EPOCH_2001
            + year * 365 * SECONDS_PER_DAY
            + rng.random_range(0..300) * SECONDS_PER_DAY
            + rng.random_range(0..24) * SECONDS_PER_HOUR;
        let los = rng.random_range(36..120) * SECONDS_PER_HOUR;
        let mut stay = StayRecord {
            stay_id: next_stay,
            patient_id,
            icu_in,
            icu_out: icu_in + los,
            age_years: rng.random_range(18..90),
            gender: if rng.random_bool(0.55) {
                Gender::Male
            } else {
                Gender::Female
            },
            insurance: Some(INSURANCE[rng.random_range(0..INSURANCE.len())].to_string()),
            death_time: None,
            samples: Vec::new(),
            icd9: Vec::new(),
            note_chunk_probs: None,
        };
        next_stay += 1;

        for (c, profile) in kb.concepts().iter().zip(&profiles) {
            let every = match c.kind {
                ConceptKind::Lab => SECONDS_PER_DAY,
                ConceptKind::Chart => SECONDS_PER_HOUR,
            };
            let times = sample_times(&mut rng, stay.icu_in, stay.icu_out, every);
            stay.samples
                .extend(series(&mut rng, profile, &times, unstable, &c.concept_id));
        }
        let n_codes = rng.random_range(2..8);
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() < n_codes {
            let i = rng.random_range(0..ICD9_CODES.len());
            if !picked.contains(&i) {
                picked.push(i);
            }
        }
        stay.icd9 = picked
            .into_iter()
            .map(|i| Icd9Entry {
                code: ICD9_CODES[i].0.to_string(),
                description: ICD9_CODES[i].1.to_string(),
            })
            .collect();

        if rng.random_bool(cfg.exclusion_rate) {
            let violation = [
                Violation::Age,
                Violation::ShortStay,
                Violation::MissingLab,
                Violation::Death,
            ][rng.random_range(0..4)];
            match violation {
                Violation::Age => stay.age_years = rng.random_range(14..18),
                Violation::ShortStay => {
                    stay.icu_out = stay.icu_in + 12 * SECONDS_PER_HOUR;
                    let out = stay.icu_out;
                    stay.samples.retain(|s| s.t <= out);
                }
                Violation::MissingLab => {
                    let lab = kb.concepts().iter().find(|c| c.kind == ConceptKind::Lab);
                    if let Some(lab) = lab {
                        stay.samples.retain(|s| s.concept_id != lab.concept_id);
                    }
                }
                Violation::Death => {
                    stay.death_time = Some(stay.icu_out + rng.random_range(0..20) * SECONDS_PER_DAY)
                }
            }
        }

        data.labels.push((stay.stay_id, positive));
        let index_out = stay.icu_out;
        data.stays.push(stay);

        let follow_up = if positive {
            Some(index_out + rng.random_range(SECONDS_PER_DAY..29 * SECONDS_PER_DAY))
        } else if rng.random_bool(0.1) {
            Some(index_out + rng.random_range(40..200) * SECONDS_PER_DAY)
        } else {
            None
        };
        if let Some(start) = follow_up {
            let lab = &kb.concepts()[0];
            let profile = &profiles[0];
            let s = StayRecord {
                stay_id: next_stay,
                patient_id,
                icu_in: start,
                icu_out: start + rng.random_range(24..96) * SECONDS_PER_HOUR,
                age_years: data.stays.last().map_or(50, |s| s.age_years),
                gender: data.stays.last().map_or(Gender::Male, |s| s.gender),
                insurance: data.stays.last().and_then(|s| s.insurance.clone()),
                death_time: None,
                samples: vec![Sample::new(lab.concept_id.clone(), start, profile.quantize(profile.mid))],
                icd9: Vec::new(),
                note_chunk_probs: None,
            };
            next_stay += 1;
            data.stays.push(s);
        }
    }
    for s in &mut data.stays {
        s.samples.sort_by(|a, b| (&a.concept_id, a.t).cmp(&(&b.concept_id, b.t)));
    }
    Ok(data)
}

fn fmt_value(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

impl SynthData {
    /// Write `events.csv`, `stays.csv`, `icd9.csv` and `labels.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut stays = csv::Writer::from_path(dir.join("stays.csv"))?;
        stays.write_record([
            "stay_id",
            "patient_id",
            "intime",
            "outtime",
            "age",
            "gender",
            "insurance",
            "death_time",
        ])?;
        let mut icd9 = csv::Writer::from_path(dir.join("icd9.csv"))?;
        icd9.write_record(["stay_id", "seq", "code", "description"])?;
        let mut events =
            std::io::BufWriter::new(std::fs::File::create(dir.join("events.csv"))?);
        writeln!(events, "stay_id,patient_id,concept_id,timestamp,value")?;
        for s in &self.stays {
            stays.write_record([
                s.stay_id.to_string(),
                s.patient_id.to_string(),
                s.icu_in.to_string(),
                s.icu_out.to_string(),
                s.age_years.to_string(),
                s.gender.as_str().to_string(),
                s.insurance.clone().unwrap_or_default(),
                s.death_time.map(|d| d.to_string()).unwrap_or_default(),
            ])?;
            for (i, e) in s.icd9.iter().enumerate() {
                icd9.write_record([
                    s.stay_id.to_string(),
                    (i + 1).to_string(),
                    e.code.clone(),
                    e.description.clone(),
                ])?;
            }
            for x in &s.samples {
                writeln!(
                    events,
                    "{},{},{},{},{}",
                    s.stay_id,
                    s.patient_id,
                    x.concept_id,
                    x.t,
                    fmt_value(x.value)
                )?;
            }
        }
        stays.flush()?;
        icd9.flush()?;
        events.flush()?;
        let mut labels = csv::Writer::from_path(dir.join("labels.csv"))?;
        labels.write_record(["stay_id", "label"])?;
        for (id, l) in &self.labels {
            labels.write_record([id.to_string(), u8::from(*l).to_string()])?;
        }
        labels.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{apply_rules, CohortOptions};
    use crate::kb::builtin_readmission_kb;

    fn small(theta: f64, seed: u64) -> SynthData {
        let cfg = SynthConfig {
            n_patients: 60,
            theta,
            seed,
            ..Default::default()
        };
        generate(&cfg, &builtin_readmission_kb()).unwrap()
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(small(1.0, 3), small(1.0, 3));
        assert_ne!(small(1.0, 3), small(1.0, 4));
    }

    #[test]
    fn quantized_values_survive_text() {
        let kb = builtin_readmission_kb();
        let p = Profile::of(kb.get("ph").unwrap());
        assert_eq!(p.decimals, 2);
        let v = p.quantize(7.3912);
        assert_eq!(v, 7.39);
        assert_eq!(fmt_value(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_value(72.0), "72.0");
    }

    #[test]
    fn cohort_labels_match_intended_labels() {
        let kb = builtin_readmission_kb();
        let data = small(1.0, 11);
        let decisions = apply_rules(&data.stays, &kb, &CohortOptions::default());
        let intended: std::collections::HashMap<_, _> = data.labels.iter().copied().collect();
        let mut included = 0;
        for d in decisions.iter().filter(|d| d.included) {
            if let Some(&l) = intended.get(&d.stay_id) {
                assert_eq!(d.label, Some(l));
                included += 1;
            }
        }
        assert!(included >= 50, "{included}");
    }

    #[test]
    fn config_validation() {
        let kb = builtin_readmission_kb();
        let bad = SynthConfig {
            n_patients: 5,
            ..Default::default()
        };
        assert!(generate(&bad, &kb).is_err());
        let bad = SynthConfig {
            positive_rate: 1.0,
            ..Default::default()
        };
        assert!(generate(&bad, &kb).is_err());
    }
}
