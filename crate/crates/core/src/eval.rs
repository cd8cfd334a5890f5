//! Classification metrics, threshold selection, model comparison and fold
//! aggregation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::StayId;

/// Scores in `[0, 1]` paired with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::EmptyScoredSet);
        }
        if let Some(&bad) = scores
            .iter()
            .find(|s| !(s.is_finite() && (0.0..=1.0).contains(*s)))
        {
            return Err(Error::InvalidScore(bad));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, bool)>) -> Result<Self> {
        let (scores, labels) = pairs.into_iter().unzip();
        Self::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    fn require_both_classes(&self) -> Result<()> {
        if self.positives() == 0 || self.negatives() == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// Groups of equal score in descending score order, as
    /// `(score, positives, negatives)`.
    fn descending_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut groups: Vec<(f64, usize, usize)> = Vec::new();
        for i in idx {
            let (s, l) = (self.scores[i], self.labels[i]);
            match groups.last_mut() {
                Some(g) if g.0 == s => {
                    if l {
                        g.1 += 1
                    } else {
                        g.2 += 1
                    }
                }
                _ => groups.push((s, usize::from(l), usize::from(!l))),
            }
        }
        groups
    }
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half.
pub fn auroc(s: &ScoredSet) -> Result<f64> {
    s.require_both_classes()?;
    let (p, n) = (s.positives() as f64, s.negatives() as f64);
    // walk ascending; each positive beats every negative seen strictly below
    let mut groups = s.descending_groups();
    groups.reverse();
    let mut negatives_below = 0usize;
    let mut twice_wins = 0u128;
    for (_, gp, gn) in groups {
        twice_wins += (gp as u128) * (2 * negatives_below as u128 + gn as u128);
        negatives_below += gn;
    }
    Ok(twice_wins as f64 / (2.0 * p * n))
}

/// Average precision: sum over score cuts of precision times recall gained.
pub fn auprc(s: &ScoredSet) -> Result<f64> {
    let total_pos = s.positives();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    for (_, gp, gn) in s.descending_groups() {
        tp += gp;
        seen += gp + gn;
        if gp > 0 {
            ap += (tp as f64 / seen as f64) * gp as f64;
        }
    }
    Ok(ap / total_pos as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn at(s: &ScoredSet, threshold: f64) -> Self {
        let mut c = Confusion { tp: 0, fp: 0, fn_: 0 };
        for (&score, &label) in s.scores.iter().zip(&s.labels) {
            match (score >= threshold, label) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        c
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    fn prf(self) -> (f64, f64, f64) {
        let p = Self::ratio(self.tp, self.tp + self.fp);
        let r = Self::ratio(self.tp, self.tp + self.fn_);
        let f1 = Self::ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_);
        (p, r, f1)
    }

    /// F1 as the exact fraction `2tp / (2tp + fp + fn)`.
    fn f1_fraction(self) -> (usize, usize) {
        (2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

/// Precision, recall and F1 when predicting positive iff `score >= threshold`.
/// Empty denominators give 0.
pub fn prf_at(s: &ScoredSet, threshold: f64) -> (f64, f64, f64) {
    Confusion::at(s, threshold).prf()
}

/// Observed score maximizing F1; ties resolve to the smallest threshold.
pub fn best_threshold(validation: &ScoredSet) -> Result<f64> {
    validation.require_both_classes()?;
    let mut best: Option<(f64, (usize, usize))> = None;
    let (mut tp, mut fp) = (0usize, 0usize);
    let total_pos = validation.positives();
    // descending scan; at each group, predicted positives are all scores >= it
    for (score, gp, gn) in validation.descending_groups() {
        tp += gp;
        fp += gn;
        let c = Confusion {
            tp,
            fp,
            fn_: total_pos - tp,
        };
        let (num, den) = c.f1_fraction();
        let better = match best {
            None => true,
            // num/den >= bnum/bden; equality prefers the later (smaller) threshold
            Some((_, (bnum, bden))) => (num as u128) * (bden as u128) >= (bnum as u128) * (den as u128),
        };
        if better {
            best = Some((score, (num, den)));
        }
    }
    Ok(best.expect("non-empty set").0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub auprc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

impl MetricsReport {
    /// The five compared metrics in table order: AUROC, F1, AUPRC,
    /// precision, recall.
    pub fn metrics(&self) -> [f64; 5] {
        [self.auroc, self.f1, self.auprc, self.precision, self.recall]
    }
}

pub const METRIC_NAMES: [&str; 5] = ["AUROC", "F1", "AUPRC", "Precision", "Recall"];

/// Score `test` with a threshold chosen beforehand (normally on validation).
pub fn evaluate(test: &ScoredSet, threshold: f64) -> Result<MetricsReport> {
    let (precision, recall, f1) = prf_at(test, threshold);
    Ok(MetricsReport {
        auroc: auroc(test)?,
        auprc: auprc(test)?,
        f1,
        precision,
        recall,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    A,
    B,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::A => "A",
            Verdict::B => "B",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// A model is better when strictly ahead on at least three of the five
/// metrics. Ties count for neither.
pub fn conclusively_better(a: &MetricsReport, b: &MetricsReport) -> Verdict {
    let (mut wa, mut wb) = (0, 0);
    for (x, y) in a.metrics().into_iter().zip(b.metrics()) {
        match x.partial_cmp(&y) {
            Some(Ordering::Greater) => wa += 1,
            Some(Ordering::Less) => wb += 1,
            _ => {}
        }
    }
    if wa >= 3 {
        Verdict::A
    } else if wb >= 3 {
        Verdict::B
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldAggregate {
    pub folds: usize,
    pub auroc: MeanStd,
    pub auprc: MeanStd,
    pub f1: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
}

impl FoldAggregate {
    pub fn metrics(&self) -> [MeanStd; 5] {
        [self.auroc, self.f1, self.auprc, self.precision, self.recall]
    }

    /// One `mean ± std` row, 4 decimals, in table column order.
    pub fn table_row(&self, method: &str) -> String {
        let cells: Vec<String> = self
            .metrics()
            .iter()
            .map(|m| format!("{:.4} ± {:.4}", m.mean, m.std))
            .collect();
        format!("{:<24} | {}", method, cells.join(" | "))
    }

    pub fn table_header() -> String {
        let cols: Vec<String> = METRIC_NAMES.iter().map(|n| format!("{n:<15}")).collect();
        format!("{:<24} | {}", "Method", cols.join(" | "))
    }
}

pub fn aggregate_folds(reports: &[MetricsReport]) -> Result<FoldAggregate> {
    if reports.is_empty() {
        return Err(Error::NoReports);
    }
    let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(FoldAggregate {
        folds: reports.len(),
        auroc: col(|r| r.auroc),
        auprc: col(|r| r.auprc),
        f1: col(|r| r.f1),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
    })
}

/// Combine per-chunk readmission probabilities of one note:
/// `(max + mean * n/2) / (1 + n/2)`.
pub fn aggregate_note_scores(chunk_probs: &[f64]) -> Result<f64> {
    if chunk_probs.is_empty() {
        return Err(Error::EmptyChunks);
    }
    if let Some(&bad) = chunk_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidProbability(bad));
    }
    let n = chunk_probs.len() as f64;
    let max = chunk_probs.iter().copied().fold(f64::MIN, f64::max);
    let mean = chunk_probs.iter().sum::<f64>() / n;
    let half = n / 2.0;
    Ok(((max + mean * half) / (1.0 + half)).clamp(mean.min(max), max))
}

/// One row of a scores file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub stay_id: StayId,
    pub score: f64,
    pub label: u8,
}

pub fn read_scores_csv<R: std::io::Read>(r: R) -> Result<Vec<ScoreRow>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_scores_csv<W: std::io::Write>(w: W, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn scored_set_from_rows(rows: &[ScoreRow]) -> Result<ScoredSet> {
    ScoredSet::from_pairs(rows.iter().map(|r| (r.score, r.label != 0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteChunks {
    pub stay_id: StayId,
    pub chunk_probs: Vec<f64>,
}
