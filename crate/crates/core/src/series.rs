//! Raw event ingestion and per-stay normalization.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StayId = u64;
pub type PatientId = u64;
/// Seconds; epoch or dataset-relative offset, uniform within a dataset.
pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: i64 = 3600;
pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub concept_id: String,
    pub t: Timestamp,
    pub value: f64,
}

impl Sample {
    pub fn new(concept_id: impl Into<String>, t: Timestamp, value: f64) -> Self {
        Sample {
            concept_id: concept_id.into(),
            t,
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn parse(s: &str) -> Option<Gender> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Some(Gender::Male),
            "f" | "female" => Some(Gender::Female),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Icd9Entry {
    pub code: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StayRecord {
    pub stay_id: StayId,
    pub patient_id: PatientId,
    pub icu_in: Timestamp,
    pub icu_out: Timestamp,
    pub age_years: u32,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insurance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_time: Option<Timestamp>,
    #[serde(default)]
    pub samples: Vec<Sample>,
    #[serde(default)]
    pub icd9: Vec<Icd9Entry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note_chunk_probs: Option<Vec<f64>>,
}

impl StayRecord {
    pub fn length_of_stay(&self) -> i64 {
        self.icu_out - self.icu_in
    }
}

/// A row that could not be attached to a stay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub file: String,
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub stays: Vec<StayRecord>,
    pub rejects: Vec<Reject>,
}

/// Parse a timestamp cell: integer seconds, fractional seconds (truncated),
/// or `YYYY-MM-DD HH:MM:SS` interpreted as UTC.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then(|| v.trunc() as i64);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

struct Table<R: Read> {
    name: String,
    reader: csv::Reader<R>,
    columns: HashMap<String, usize>,
}

impl<R: Read> Table<R> {
    fn open(name: &str, source: R, required: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(source);
        let columns: HashMap<String, usize> = reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        for &col in required {
            if !columns.contains_key(col) {
                return Err(Error::Schema {
                    file: name.to_string(),
                    column: col.to_string(),
                });
            }
        }
        Ok(Table {
            name: name.to_string(),
            reader,
            columns,
        })
    }

    fn get<'a>(&self, rec: &'a csv::StringRecord, col: &str) -> &'a str {
        self.columns
            .get(col)
            .and_then(|&i| rec.get(i))
            .unwrap_or("")
            .trim()
    }

    fn reject(&self, line: u64, reason: impl Into<String>) -> Reject {
        Reject {
            file: self.name.clone(),
            line,
            reason: reason.into(),
        }
    }

    /// Iterate rows as (line, record); unreadable rows become rejects.
    fn rows(&mut self, rejects: &mut Vec<Reject>) -> Vec<(u64, csv::StringRecord)> {
        let mut out = Vec::new();
        let mut rec = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut rec) {
                Ok(true) => {
                    let line = rec.position().map(|p| p.line()).unwrap_or(0);
                    out.push((line, rec.clone()));
                }
                Ok(false) => break,
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    rejects.push(self.reject(line, e.to_string()));
                    if !matches!(e.kind(), csv::ErrorKind::UnequalLengths { .. } | csv::ErrorKind::Utf8 { .. }) {
                        break;
                    }
                }
            }
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, col: &str) -> std::result::Result<T, String> {
    raw.parse::<T>()
        .map_err(|_| format!("column `{col}`: cannot parse `{raw}`"))
}

fn parse_time_field(raw: &str, col: &str) -> std::result::Result<Timestamp, String> {
    parse_timestamp(raw).ok_or_else(|| format!("column `{col}`: cannot parse timestamp `{raw}`"))
}

const STAY_COLUMNS: &[&str] = &[
    "stay_id",
    "patient_id",
    "intime",
    "outtime",
    "age",
    "gender",
    "insurance",
    "death_time",
];
const EVENT_COLUMNS: &[&str] = &["stay_id", "patient_id", "concept_id", "timestamp", "value"];
const ICD9_COLUMNS: &[&str] = &["stay_id", "seq", "code", "description"];

fn parse_stay<R: Read>(
    t: &Table<R>,
    rec: &csv::StringRecord,
) -> std::result::Result<StayRecord, String> {
    let stay_id = parse_field(t.get(rec, "stay_id"), "stay_id")?;
    let patient_id = parse_field(t.get(rec, "patient_id"), "patient_id")?;
    let icu_in = parse_time_field(t.get(rec, "intime"), "intime")?;
    let icu_out = parse_time_field(t.get(rec, "outtime"), "outtime")?;
    if icu_in >= icu_out {
        return Err(format!("intime {icu_in} is not before outtime {icu_out}"));
    }
    let age_raw = t.get(rec, "age");
    let age: f64 = parse_field(age_raw, "age")?;
    if !(age.is_finite() && age >= 0.0) {
        return Err(format!("column `age`: invalid age `{age_raw}`"));
    }
    let gender_raw = t.get(rec, "gender");
    let gender =
        Gender::parse(gender_raw).ok_or_else(|| format!("column `gender`: unknown `{gender_raw}`"))?;
    let insurance = Some(t.get(rec, "insurance"))
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    let death_raw = t.get(rec, "death_time");
    let death_time = if death_raw.is_empty() {
        None
    } else {
        Some(parse_time_field(death_raw, "death_time")?)
    };
    Ok(StayRecord {
        stay_id,
        patient_id,
        icu_in,
        icu_out,
        age_years: age.floor() as u32,
        gender,
        insurance,
        death_time,
        samples: Vec::new(),
        icd9: Vec::new(),
        note_chunk_probs: None,
    })
}

/// Read the stays, events and ICD-9 tables and attach rows to their stays.
///
/// Every data row ends up either attached to a stay or listed in
/// `rejects`. Output stays are ordered by `stay_id` and normalized.
pub fn ingest<E: Read, S: Read, I: Read>(events: E, stays: S, icd9: I) -> Result<Ingested> {
    let mut rejects = Vec::new();

    let mut stays_t = Table::open("stays.csv", stays, STAY_COLUMNS)?;
    let mut events_t = Table::open("events.csv", events, EVENT_COLUMNS)?;
    let mut icd9_t = Table::open("icd9.csv", icd9, ICD9_COLUMNS)?;

    let mut records: Vec<StayRecord> = Vec::new();
    let mut by_id: HashMap<StayId, usize> = HashMap::new();
    for (line, rec) in stays_t.rows(&mut rejects) {
        match parse_stay(&stays_t, &rec) {
            Ok(stay) => {
                if let std::collections::hash_map::Entry::Vacant(e) = by_id.entry(stay.stay_id) {
                    e.insert(records.len());
                    records.push(stay);
                } else {
                    rejects.push(stays_t.reject(line, format!("duplicate stay_id {}", stay.stay_id)));
                }
            }
            Err(msg) => rejects.push(stays_t.reject(line, msg)),
        }
    }

    for (line, rec) in events_t.rows(&mut rejects) {
        let t = &events_t;
        let parsed = (|| -> std::result::Result<(StayId, Sample), String> {
            let stay_id: StayId = parse_field(t.get(&rec, "stay_id"), "stay_id")?;
            let concept_id = t.get(&rec, "concept_id");
            if concept_id.is_empty() {
                return Err("column `concept_id`: empty".into());
            }
            let ts = parse_time_field(t.get(&rec, "timestamp"), "timestamp")?;
            let value: f64 = parse_field(t.get(&rec, "value"), "value")?;
            Ok((stay_id, Sample::new(concept_id, ts, value)))
        })();
        match parsed {
            Ok((stay_id, sample)) => match by_id.get(&stay_id) {
                Some(&i) => records[i].samples.push(sample),
                None => rejects.push(t.reject(line, format!("orphan event: unknown stay_id {stay_id}"))),
            },
            Err(msg) => rejects.push(t.reject(line, msg)),
        }
    }

    let mut icd9_rows: HashMap<StayId, Vec<(i64, u64, Icd9Entry)>> = HashMap::new();
    for (line, rec) in icd9_t.rows(&mut rejects) {
        let t = &icd9_t;
        let parsed = (|| -> std::result::Result<(StayId, i64, Icd9Entry), String> {
            let stay_id: StayId = parse_field(t.get(&rec, "stay_id"), "stay_id")?;
            let seq: i64 = parse_field(t.get(&rec, "seq"), "seq")?;
            let code = t.get(&rec, "code");
            if code.is_empty() {
                return Err("column `code`: empty".into());
            }
            Ok((
                stay_id,
                seq,
                Icd9Entry {
                    code: code.to_string(),
                    description: t.get(&rec, "description").to_string(),
                },
            ))
        })();
        match parsed {
            Ok((stay_id, seq, entry)) => {
                if by_id.contains_key(&stay_id) {
                    icd9_rows.entry(stay_id).or_default().push((seq, line, entry));
                } else {
                    rejects.push(t.reject(line, format!("orphan ICD-9 row: unknown stay_id {stay_id}")));
                }
            }
            Err(msg) => rejects.push(t.reject(line, msg)),
        }
    }
    for (stay_id, mut rows) in icd9_rows {
        rows.sort_by(|a, b| (a.0, &a.2.code, a.1).cmp(&(b.0, &b.2.code, b.1)));
        records[by_id[&stay_id]].icd9 = rows.into_iter().map(|(_, _, e)| e).collect();
    }

    records.sort_by_key(|s| s.stay_id);
    let stays = records.into_par_iter().map(normalize).collect();
    Ok(Ingested { stays, rejects })
}

pub fn ingest_paths(
    events: impl AsRef<Path>,
    stays: impl AsRef<Path>,
    icd9: Option<&Path>,
) -> Result<Ingested> {
    let ev = std::fs::File::open(events.as_ref())?;
    let st = std::fs::File::open(stays.as_ref())?;
    match icd9 {
        Some(p) => ingest(ev, st, std::fs::File::open(p)?),
        None => ingest(ev, st, "stay_id,seq,code,description\n".as_bytes()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeStats {
    pub non_finite: usize,
    pub out_of_window: usize,
    pub merged_duplicates: usize,
}

/// Margin around `[icu_in, icu_out]` inside which samples are kept.
pub const SAMPLE_WINDOW_MARGIN: i64 = SECONDS_PER_HOUR;

/// Sort samples by `(concept_id, t)`, collapse equal timestamps per concept
/// to their mean and drop non-finite or out-of-window samples.
pub fn normalize(stay: StayRecord) -> StayRecord {
    normalize_with_stats(stay).0
}

pub fn normalize_with_stats(mut stay: StayRecord) -> (StayRecord, NormalizeStats) {
    let mut stats = NormalizeStats::default();
    let lo = stay.icu_in - SAMPLE_WINDOW_MARGIN;
    let hi = stay.icu_out + SAMPLE_WINDOW_MARGIN;
    let mut samples = std::mem::take(&mut stay.samples);
    samples.retain(|s| {
        if !s.value.is_finite() {
            stats.non_finite += 1;
            false
        } else if s.t < lo || s.t > hi {
            stats.out_of_window += 1;
            false
        } else {
            true
        }
    });
    samples.sort_by(|a, b| {
        a.concept_id
            .cmp(&b.concept_id)
            .then(a.t.cmp(&b.t))
            .then(a.value.total_cmp(&b.value))
    });

    let mut out: Vec<Sample> = Vec::with_capacity(samples.len());
    let mut i = 0;
    while i < samples.len() {
        let mut j = i + 1;
        while j < samples.len()
            && samples[j].t == samples[i].t
            && samples[j].concept_id == samples[i].concept_id
        {
            j += 1;
        }
        let mut s = samples[i].clone();
        if j - i > 1 {
            // values are sorted within the run, so the sum is order-independent
            s.value = samples[i..j].iter().map(|x| x.value).sum::<f64>() / (j - i) as f64;
            stats.merged_duplicates += j - i - 1;
        }
        out.push(s);
        i = j;
    }
    stay.samples = out;
    (stay, stats)
}

/// Serialize stays as JSON Lines.
pub fn write_stays_jsonl<W: std::io::Write>(mut w: W, stays: &[StayRecord]) -> Result<()> {
    for s in stays {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_stays_jsonl<R: std::io::BufRead>(r: R) -> Result<Vec<StayRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
