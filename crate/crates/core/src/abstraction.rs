//! State and gradient temporal abstraction of per-stay series.
//!
//! A stay's raw samples become state points (knowledge-base discretization),
//! gradient points (direction of change between consecutive values) and
//! intervals of equal-labelled consecutive points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{ConceptDef, KnowledgeBase};
use crate::series::{StayId, StayRecord, Timestamp};

/// Weighting used when interpolating between two known neighbours.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Standard linear interpolation; the result tends to each endpoint's
    /// value as the query approaches that endpoint.
    #[default]
    Linear,
    /// Weights swapped between the two neighbours. Kept only for comparison
    /// runs; the result tends to the *far* endpoint.
    SwappedWeights,
}

/// Interpolate the value at `t_query` strictly between two known samples.
pub fn interpolate_at(
    prev: (Timestamp, f64),
    next: (Timestamp, f64),
    t_query: Timestamp,
) -> Result<f64> {
    interpolate_with(prev, next, t_query, Interpolation::Linear)
}

pub fn interpolate_with(
    (t_prev, v_prev): (Timestamp, f64),
    (t_next, v_next): (Timestamp, f64),
    t_query: Timestamp,
    mode: Interpolation,
) -> Result<f64> {
    if t_prev == t_next {
        return Err(Error::DegenerateSpan(t_prev));
    }
    if !(t_prev < t_query && t_query < t_next) {
        return Err(Error::OutOfSpan {
            t_prev,
            t_next,
            t_query,
        });
    }
    let span = (t_next - t_prev) as f64;
    let w = (t_query - t_prev) as f64 / span;
    let (from, to) = match mode {
        Interpolation::Linear => (v_prev, v_next),
        Interpolation::SwappedWeights => (v_next, v_prev),
    };
    let v = from + (to - from) * w;
    Ok(v.clamp(v_prev.min(v_next), v_prev.max(v_next)))
}

/// Direction of change between two consecutive values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trend {
    Decreasing,
    Stable,
    Increasing,
}

impl Trend {
    pub const ALL: [Trend; 3] = [Trend::Decreasing, Trend::Stable, Trend::Increasing];

    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Decreasing => "Decreasing",
            Trend::Stable => "Stable",
            Trend::Increasing => "Increasing",
        }
    }

    pub fn parse(s: &str) -> Option<Trend> {
        Trend::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Strict comparison of consecutive values; `Stable` only on equality.
    #[default]
    Simple,
    /// `Stable` when the absolute change is at most the concept's `sig_delta`.
    Thresholded,
}

/// Label every consecutive pair of an ordered series, at the later timestamp.
pub fn gradient_labels(
    series: &[(Timestamp, f64)],
    mode: GradientMode,
    sig_delta: f64,
) -> Vec<(Timestamp, Trend)> {
    series
        .windows(2)
        .map(|w| {
            let (prev, (t, cur)) = (w[0].1, w[1]);
            let trend = match mode {
                GradientMode::Thresholded if (cur - prev).abs() <= sig_delta => Trend::Stable,
                _ if cur > prev => Trend::Increasing,
                _ if cur < prev => Trend::Decreasing,
                _ => Trend::Stable,
            };
            (t, trend)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    State,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolPoint {
    pub concept_id: String,
    pub t: Timestamp,
    pub kind: SymbolKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolInterval {
    pub concept_id: String,
    pub kind: SymbolKind,
    pub label: String,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Number of points merged into this interval.
    pub count: usize,
}

/// Merge consecutive equal-label points of one (concept, kind) into intervals.
///
/// A label change or a gap larger than `max_gap` closes the current interval.
pub fn merge_intervals(points: &[SymbolPoint], max_gap: i64) -> Vec<SymbolInterval> {
    let mut out: Vec<SymbolInterval> = Vec::new();
    let mut last_t: Option<Timestamp> = None;
    for p in points {
        let extend = match (out.last(), last_t) {
            (Some(iv), Some(lt)) => {
                iv.label == p.label
                    && iv.concept_id == p.concept_id
                    && iv.kind == p.kind
                    && p.t.saturating_sub(lt) <= max_gap
            }
            _ => false,
        };
        if extend {
            let iv = out.last_mut().expect("checked above");
            iv.end = p.t;
            iv.count += 1;
        } else {
            out.push(SymbolInterval {
                concept_id: p.concept_id.clone(),
                kind: p.kind,
                label: p.label.clone(),
                start: p.t,
                end: p.t,
                count: 1,
            });
        }
        last_t = Some(p.t);
    }
    out
}

/// Multivariate series on the union of all sample timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSeries {
    pub concept_ids: Vec<String>,
    pub times: Vec<Timestamp>,
    /// Row-major `times.len() × concept_ids.len()`; `None` marks missing.
    pub values: Vec<Option<f64>>,
    /// Whether each cell holds a raw observation (as opposed to a fill).
    pub observed: Vec<bool>,
}

impl GridSeries {
    pub fn dims(&self) -> (usize, usize) {
        (self.times.len(), self.concept_ids.len())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.concept_ids.len() + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        let d = self.concept_ids.len();
        (0..self.times.len()).map(move |r| self.values[r * d + col])
    }
}

/// Raw samples of `stay` grouped per knowledge-base concept, in KB order.
fn per_concept_series(stay: &StayRecord, kb: &KnowledgeBase) -> Result<Vec<Vec<(Timestamp, f64)>>> {
    let mut cols = vec![Vec::new(); kb.len()];
    for s in &stay.samples {
        let i = kb
            .position(&s.concept_id)
            .ok_or_else(|| Error::UnknownConcept(s.concept_id.clone()))?;
        cols[i].push((s.t, s.value));
    }
    for c in &mut cols {
        c.sort_by_key(|&(t, _)| t);
    }
    Ok(cols)
}

/// Place a normalized stay on the union time grid and fill gaps.
///
/// Cells between two observations of a concept are interpolated; cells before
/// the first or after the last observation take the nearest observed value.
/// Concepts without samples stay missing.
pub fn fill_grid(stay: &StayRecord, kb: &KnowledgeBase) -> Result<GridSeries> {
    fill_grid_with(stay, kb, Interpolation::Linear)
}

pub fn fill_grid_with(
    stay: &StayRecord,
    kb: &KnowledgeBase,
    mode: Interpolation,
) -> Result<GridSeries> {
    let cols = per_concept_series(stay, kb)?;
    let mut times: Vec<Timestamp> = cols.iter().flatten().map(|&(t, _)| t).collect();
    times.sort_unstable();
    times.dedup();

    let d = kb.len();
    let mut values = vec![None; times.len() * d];
    let mut observed = vec![false; times.len() * d];
    for (c, series) in cols.iter().enumerate() {
        if series.is_empty() {
            continue;
        }
        // walk grid rows and the concept's samples together
        let mut k = 0;
        for (r, &t) in times.iter().enumerate() {
            while k < series.len() && series[k].0 < t {
                k += 1;
            }
            let cell = r * d + c;
            if k < series.len() && series[k].0 == t {
                values[cell] = Some(series[k].1);
                observed[cell] = true;
            } else if k == 0 {
                values[cell] = Some(series[0].1);
            } else if k == series.len() {
                values[cell] = Some(series[k - 1].1);
            } else {
                values[cell] = Some(interpolate_with(series[k - 1], series[k], t, mode)?);
            }
        }
    }
    Ok(GridSeries {
        concept_ids: kb.concepts().iter().map(|c| c.concept_id.clone()).collect(),
        times,
        values,
        observed,
    })
}

/// Label of the state containing `value`.
pub fn state_of(concept: &ConceptDef, value: f64) -> &str {
    concept.state_of(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionOptions {
    pub gradient_mode: GradientMode,
    /// Use each concept's stability window as the interval merge gap;
    /// otherwise runs merge regardless of gap.
    pub use_t_stable_as_max_gap: bool,
    /// Abstract the filled grid instead of the raw samples.
    pub interpolate: bool,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl Default for AbstractionOptions {
    fn default() -> Self {
        AbstractionOptions {
            gradient_mode: GradientMode::Simple,
            use_t_stable_as_max_gap: false,
            interpolate: false,
            interpolation: Interpolation::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionSet {
    pub stay_id: StayId,
    pub points: Vec<SymbolPoint>,
    pub intervals: Vec<SymbolInterval>,
    pub options: AbstractionOptions,
}

impl AbstractionSet {
    pub fn points_of(&self, kind: SymbolKind) -> impl Iterator<Item = &SymbolPoint> {
        self.points.iter().filter(move |p| p.kind == kind)
    }
}

/// State points, gradient points and intervals for one normalized stay.
///
/// Points are ordered by concept (KB order), then kind, then time.
pub fn abstract_stay(
    stay: &StayRecord,
    kb: &KnowledgeBase,
    options: &AbstractionOptions,
) -> Result<AbstractionSet> {
    let series: Vec<Vec<(Timestamp, f64)>> = if options.interpolate {
        let grid = fill_grid_with(stay, kb, options.interpolation)?;
        (0..kb.len())
            .map(|c| {
                grid.times
                    .iter()
                    .zip(grid.column(c))
                    .filter_map(|(&t, v)| v.map(|v| (t, v)))
                    .collect()
            })
            .collect()
    } else {
        per_concept_series(stay, kb)?
    };

    let mut points = Vec::new();
    let mut intervals = Vec::new();
    for (concept, values) in kb.concepts().iter().zip(&series) {
        let max_gap = if options.use_t_stable_as_max_gap {
            concept.t_stable
        } else {
            i64::MAX
        };
        let states: Vec<SymbolPoint> = values
            .iter()
            .map(|&(t, v)| SymbolPoint {
                concept_id: concept.concept_id.clone(),
                t,
                kind: SymbolKind::State,
                label: concept.state_of(v).to_string(),
            })
            .collect();
        let gradients: Vec<SymbolPoint> =
            gradient_labels(values, options.gradient_mode, concept.sig_delta)
                .into_iter()
                .map(|(t, trend)| SymbolPoint {
                    concept_id: concept.concept_id.clone(),
                    t,
                    kind: SymbolKind::Gradient,
                    label: trend.as_str().to_string(),
                })
                .collect();
        intervals.extend(merge_intervals(&states, max_gap));
        intervals.extend(merge_intervals(&gradients, max_gap));
        points.extend(states);
        points.extend(gradients);
    }
    Ok(AbstractionSet {
        stay_id: stay.stay_id,
        points,
        intervals,
        options: *options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::builtin_readmission_kb;
    use crate::series::{Gender, Sample};
    use proptest::prelude::*;

    fn stay(samples: Vec<Sample>) -> StayRecord {
        crate::series::normalize(StayRecord {
            stay_id: 7,
            patient_id: 1,
            icu_in: 0,
            icu_out: 10 * 86_400,
            age_years: 60,
            gender: Gender::Male,
            insurance: None,
            death_time: None,
            samples,
            icd9: vec![],
            note_chunk_probs: None,
        })
    }

    fn point(label: &str, t: Timestamp) -> SymbolPoint {
        SymbolPoint {
            concept_id: "heart_rate".into(),
            t,
            kind: SymbolKind::State,
            label: label.into(),
        }
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolate_at((0, 10.0), (2, 20.0), 1).unwrap(), 15.0);
        assert!((interpolate_at((0, 10.0), (10, 20.0), 1).unwrap() - 11.0).abs() < 1e-12);
        assert_eq!(interpolate_at((0, 7.0), (4, 7.0), 3).unwrap(), 7.0);
        let printed =
            interpolate_with((0, 10.0), (10, 20.0), 1, Interpolation::SwappedWeights).unwrap();
        assert!((printed - 19.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_errors() {
        assert!(matches!(
            interpolate_at((3, 1.0), (3, 2.0), 3),
            Err(Error::DegenerateSpan(3))
        ));
        assert!(matches!(
            interpolate_at((0, 1.0), (4, 2.0), 4),
            Err(Error::OutOfSpan { .. })
        ));
        assert!(matches!(
            interpolate_at((0, 1.0), (4, 2.0), -1),
            Err(Error::OutOfSpan { .. })
        ));
    }

    #[test]
    fn grid_fills_interior_and_edges() {
        let kb = builtin_readmission_kb();
        let s = stay(vec![
            Sample::new("heart_rate", 0, 60.0),
            Sample::new("heart_rate", 2, 80.0),
            Sample::new("body_temp", 1, 37.0),
        ]);
        let g = fill_grid(&s, &kb).unwrap();
        assert_eq!(g.times, vec![0, 1, 2]);
        let hr = kb.position("heart_rate").unwrap();
        let temp = kb.position("body_temp").unwrap();
        assert_eq!(g.get(1, hr), Some(70.0));
        assert_eq!(g.get(0, temp), Some(37.0));
        assert_eq!(g.get(2, temp), Some(37.0));
        assert!(!g.observed[temp] && g.observed[g.concept_ids.len() + temp]);
        let glucose = kb.position("glucose").unwrap();
        assert!(g.column(glucose).all(|v| v.is_none()));
    }

    #[test]
    fn grid_single_concept_is_its_own_samples() {
        let kb = builtin_readmission_kb();
        let s = stay(vec![
            Sample::new("heart_rate", 0, 60.0),
            Sample::new("heart_rate", 5, 61.0),
        ]);
        let g = fill_grid(&s, &kb).unwrap();
        let hr = kb.position("heart_rate").unwrap();
        assert_eq!(g.times, vec![0, 5]);
        assert_eq!(g.column(hr).collect::<Vec<_>>(), vec![Some(60.0), Some(61.0)]);
        assert_eq!(g.observed.iter().filter(|&&o| o).count(), 2);
    }

    #[test]
    fn unknown_concept_rejected_at_abstraction() {
        let kb = builtin_readmission_kb();
        let s = stay(vec![Sample::new("lactate", 0, 1.0)]);
        assert!(matches!(fill_grid(&s, &kb), Err(Error::UnknownConcept(_))));
        assert!(abstract_stay(&s, &kb, &AbstractionOptions::default()).is_err());
    }

    #[test]
    fn state_examples() {
        let kb = builtin_readmission_kb();
        let temp = kb.lookup("Body Temp").unwrap();
        assert_eq!(state_of(temp, 38.0), "Fever");
        assert_eq!(state_of(temp, 36.0), "Hypothermia");
        assert_eq!(state_of(kb.lookup("Heart-Rate").unwrap(), 60.0), "Normal");
    }

    #[test]
    fn gradient_examples() {
        use GradientMode::*;
        let lab = |v: &[f64]| -> Vec<Trend> {
            let s: Vec<_> = v.iter().enumerate().map(|(i, &x)| (i as i64, x)).collect();
            gradient_labels(&s, Simple, 1.0).into_iter().map(|x| x.1).collect()
        };
        assert_eq!(lab(&[5.0, 7.0]), [Trend::Increasing]);
        assert_eq!(lab(&[5.0, 5.0]), [Trend::Stable]);
        assert!(lab(&[5.0]).is_empty());
        assert!(lab(&[]).is_empty());
        let glucose = [(0, 100.0), (3600, 105.0)];
        assert_eq!(gradient_labels(&glucose, Thresholded, 10.0), [(3600, Trend::Stable)]);
        assert_eq!(gradient_labels(&glucose, Simple, 10.0), [(3600, Trend::Increasing)]);
    }

    #[test]
    fn merge_examples() {
        let iv = merge_intervals(&[point("A", 0), point("A", 1), point("A", 2)], 5);
        assert_eq!(iv.len(), 1);
        assert_eq!((iv[0].start, iv[0].end, iv[0].count), (0, 2, 3));

        let iv = merge_intervals(&[point("A", 0), point("A", 1), point("B", 2), point("A", 3)], 5);
        let labels: Vec<_> = iv.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(labels, ["A", "B", "A"]);

        let iv = merge_intervals(&[point("A", 0), point("A", 20)], 10);
        assert_eq!(iv.len(), 2);
        assert!(iv.iter().all(|i| i.start == i.end));
    }

    #[test]
    fn abstract_single_sample() {
        let kb = builtin_readmission_kb();
        let s = stay(vec![Sample::new("heart_rate", 0, 70.0)]);
        let a = abstract_stay(&s, &kb, &AbstractionOptions::default()).unwrap();
        let states: Vec<_> = a.points_of(SymbolKind::State).map(|p| p.label.as_str()).collect();
        assert_eq!(states, ["Normal"]);
        assert_eq!(a.points_of(SymbolKind::Gradient).count(), 0);
    }

    #[test]
    fn abstract_heart_rate_run() {
        let kb = builtin_readmission_kb();
        let s = stay(vec![
            Sample::new("heart_rate", 0, 70.0),
            Sample::new("heart_rate", 3600, 85.0),
            Sample::new("heart_rate", 7200, 85.0),
        ]);
        let a = abstract_stay(&s, &kb, &AbstractionOptions::default()).unwrap();
        let states: Vec<_> = a.points_of(SymbolKind::State).map(|p| p.label.as_str()).collect();
        let grads: Vec<_> = a.points_of(SymbolKind::Gradient).map(|p| p.label.as_str()).collect();
        assert_eq!(states, ["Normal", "High", "High"]);
        assert_eq!(grads, ["Increasing", "Stable"]);
        // Normal, High(2) and Increasing, Stable
        assert_eq!(a.intervals.len(), 4);
    }

    #[test]
    fn t_stable_gap_splits_intervals() {
        let kb = builtin_readmission_kb();
        let s = stay(vec![
            Sample::new("heart_rate", 0, 70.0),
            Sample::new("heart_rate", 3600, 71.0),
            Sample::new("heart_rate", 3 * 3600, 72.0),
        ]);
        let opts = AbstractionOptions {
            use_t_stable_as_max_gap: true,
            ..Default::default()
        };
        let a = abstract_stay(&s, &kb, &opts).unwrap();
        let states: Vec<_> = a.intervals.iter().filter(|i| i.kind == SymbolKind::State).collect();
        assert_eq!(states.len(), 2);
        let b = abstract_stay(&s, &kb, &AbstractionOptions::default()).unwrap();
        assert_eq!(b.intervals.iter().filter(|i| i.kind == SymbolKind::State).count(), 1);
    }

    #[test]
    fn aligned_samples_identical_with_or_without_interpolation() {
        let kb = builtin_readmission_kb();
        let mut samples = Vec::new();
        for (i, t) in [0, 3600, 7200].into_iter().enumerate() {
            samples.push(Sample::new("heart_rate", t, 70.0 + 10.0 * i as f64));
            samples.push(Sample::new("body_temp", t, 36.5 + 0.5 * i as f64));
        }
        let s = stay(samples);
        let raw = abstract_stay(&s, &kb, &AbstractionOptions::default()).unwrap();
        let opts = AbstractionOptions {
            interpolate: true,
            ..Default::default()
        };
        let mut interp = abstract_stay(&s, &kb, &opts).unwrap();
        interp.options = raw.options;
        assert_eq!(raw, interp);
    }

    // Direct transcriptions of the definitions, used as oracles.
    fn oracle_gradient(v: &[f64], thresholded: bool, delta: f64) -> Vec<Trend> {
        let mut out = vec![];
        for i in 1..v.len() {
            let diff = v[i] - v[i - 1];
            out.push(if thresholded && diff.abs() <= delta {
                Trend::Stable
            } else if v[i] > v[i - 1] {
                Trend::Increasing
            } else if v[i] < v[i - 1] {
                Trend::Decreasing
            } else {
                Trend::Stable
            });
        }
        out
    }

    proptest! {
        #[test]
        fn interpolation_bounded_and_monotone(
            v0 in -1e3f64..1e3, v1 in -1e3f64..1e3, span in 2i64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0
        ) {
            let qa = 1 + ((span - 2) as f64 * a) as i64;
            let qb = 1 + ((span - 2) as f64 * b) as i64;
            let (qa, qb) = (qa.min(qb), qa.max(qb));
            let ya = interpolate_at((0, v0), (span, v1), qa).unwrap();
            let yb = interpolate_at((0, v0), (span, v1), qb).unwrap();
            prop_assert!(ya >= v0.min(v1) && ya <= v0.max(v1));
            if v1 >= v0 { prop_assert!(ya <= yb) } else { prop_assert!(ya >= yb) }
        }

        #[test]
        fn gradients_match_oracle(
            v in prop::collection::vec(prop_oneof![(-5i32..5).prop_map(f64::from), -5.0f64..5.0], 0..20),
            delta in 0.01f64..3.0,
        ) {
            let s: Vec<_> = v.iter().enumerate().map(|(i, &x)| (i as i64 * 60, x)).collect();
            let simple: Vec<_> = gradient_labels(&s, GradientMode::Simple, delta).into_iter().map(|x| x.1).collect();
            let thr: Vec<_> = gradient_labels(&s, GradientMode::Thresholded, delta).into_iter().map(|x| x.1).collect();
            prop_assert_eq!(simple, oracle_gradient(&v, false, delta));
            prop_assert_eq!(thr, oracle_gradient(&v, true, delta));
        }

        #[test]
        fn reversing_strictly_monotone_swaps_trends(mut v in prop::collection::btree_set(-1000i32..1000, 2..20)) {
            let inc: Vec<(i64, f64)> = std::mem::take(&mut v).into_iter().enumerate().map(|(i, x)| (i as i64, x as f64)).collect();
            let dec: Vec<(i64, f64)> = inc.iter().rev().enumerate().map(|(i, &(_, x))| (i as i64, x)).collect();
            prop_assert!(gradient_labels(&inc, GradientMode::Simple, 1.0).iter().all(|x| x.1 == Trend::Increasing));
            prop_assert!(gradient_labels(&dec, GradientMode::Simple, 1.0).iter().all(|x| x.1 == Trend::Decreasing));
        }

        #[test]
        fn state_of_monotone_in_value(a in -50.0f64..250.0, b in -50.0f64..250.0) {
            let kb = builtin_readmission_kb();
            for c in kb.concepts() {
                let (lo, hi) = (a.min(b), a.max(b));
                prop_assert!(c.state_index(lo) <= c.state_index(hi));
            }
        }

        #[test]
        fn merge_partitions_points(
            labels in prop::collection::vec(prop::sample::select(vec!["A", "B"]), 0..20),
            gaps in prop::collection::vec(0i64..20, 20),
            max_gap in 0i64..15,
        ) {
            let mut t = 0;
            let pts: Vec<_> = labels.iter().zip(&gaps).map(|(l, g)| { t += g; point(l, t) }).collect();
            let ivs = merge_intervals(&pts, max_gap);
            let mut rebuilt = Vec::new();
            let mut offset = 0;
            for iv in &ivs {
                let run = &pts[offset..offset + iv.count];
                prop_assert!(run.iter().all(|p| p.label == iv.label));
                prop_assert_eq!(run.first().unwrap().t, iv.start);
                prop_assert_eq!(run.last().unwrap().t, iv.end);
                rebuilt.extend_from_slice(run);
                offset += iv.count;
            }
            prop_assert_eq!(rebuilt, pts);
        }
    }
}
