//! Abstraction knowledge base: per-concept state cutoffs, gradient
//! significance and stability windows.
//!
//! Cutoffs are an ordered list of upper bounds. A value belongs to the first
//! cutoff whose bound admits it (`v <= bound`, or `v < bound` for an exclusive
//! cutoff); the final cutoff is unbounded. In the JSON form each cutoff is
//! `[bound, label]` or `[bound, label, false]` for an exclusive bound, with
//! `null` as the final bound.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const BUILTIN_DOCUMENT: &str = include_str!("../../../kb/readmission.json");

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptKind {
    Lab,
    Chart,
}

impl ConceptKind {
    /// Minimum raw samples a stay needs for this kind of concept.
    pub fn default_min_samples(self) -> u32 {
        match self {
            ConceptKind::Lab => 1,
            ConceptKind::Chart => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    /// `None` marks the final, unbounded state.
    pub upper: Option<f64>,
    pub label: String,
    pub inclusive: bool,
}

impl Cutoff {
    pub fn inclusive(upper: f64, label: impl Into<String>) -> Self {
        Cutoff {
            upper: Some(upper),
            label: label.into(),
            inclusive: true,
        }
    }

    pub fn exclusive(upper: f64, label: impl Into<String>) -> Self {
        Cutoff {
            upper: Some(upper),
            label: label.into(),
            inclusive: false,
        }
    }

    pub fn unbounded(label: impl Into<String>) -> Self {
        Cutoff {
            upper: None,
            label: label.into(),
            inclusive: true,
        }
    }

    fn admits(&self, value: f64) -> bool {
        match self.upper {
            None => true,
            Some(b) if self.inclusive => value <= b,
            Some(b) => value < b,
        }
    }
}

impl Serialize for Cutoff {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.inclusive || self.upper.is_none() {
            (self.upper, &self.label).serialize(s)
        } else {
            (self.upper, &self.label, false).serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Cutoff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Pair(Option<f64>, String),
            Triple(Option<f64>, String, bool),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Pair(upper, label) => Cutoff {
                upper,
                label,
                inclusive: true,
            },
            Raw::Triple(upper, label, inclusive) => Cutoff {
                upper,
                label,
                inclusive,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDef {
    pub concept_id: String,
    pub name: String,
    pub kind: ConceptKind,
    pub unit: String,
    pub cutoffs: Vec<Cutoff>,
    pub sig_delta: f64,
    /// Stability window in seconds.
    pub t_stable: i64,
    pub min_samples: u32,
}

impl ConceptDef {
    /// Label of the unique state whose cutoff interval contains `value`.
    pub fn state_of(&self, value: f64) -> &str {
        &self.cutoffs[self.state_index(value)].label
    }

    /// Ordinal (position in cutoff order) of the state containing `value`.
    pub fn state_index(&self, value: f64) -> usize {
        self.cutoffs
            .iter()
            .position(|c| c.admits(value))
            .unwrap_or(self.cutoffs.len() - 1)
    }

    pub fn state_labels(&self) -> impl Iterator<Item = &str> {
        self.cutoffs.iter().map(|c| c.label.as_str())
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.cutoffs.iter().position(|c| c.label == label)
    }

    pub fn num_states(&self) -> usize {
        self.cutoffs.len()
    }

    fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidCutoffs {
            concept: self.concept_id.clone(),
            reason,
        };
        let Some(last) = self.cutoffs.last() else {
            return Err(invalid("no cutoffs".into()));
        };
        if last.upper.is_some() {
            return Err(invalid("final cutoff must be unbounded".into()));
        }
        let mut prev: Option<f64> = None;
        for c in &self.cutoffs[..self.cutoffs.len() - 1] {
            let Some(b) = c.upper else {
                return Err(invalid("only the final cutoff may be unbounded".into()));
            };
            if !b.is_finite() {
                return Err(invalid(format!("non-finite bound {b}")));
            }
            if let Some(p) = prev {
                if b <= p {
                    return Err(invalid(format!("bounds not strictly increasing ({p} then {b})")));
                }
            }
            prev = Some(b);
        }
        let mut seen = HashSet::new();
        for c in &self.cutoffs {
            if !seen.insert(c.label.as_str()) {
                return Err(invalid(format!("duplicate label `{}`", c.label)));
            }
        }
        if !(self.sig_delta > 0.0) {
            return Err(Error::NonPositiveParam {
                concept: self.concept_id.clone(),
                param: "sig_delta",
                value: self.sig_delta,
            });
        }
        if self.t_stable <= 0 {
            return Err(Error::NonPositiveParam {
                concept: self.concept_id.clone(),
                param: "t_stable",
                value: self.t_stable as f64,
            });
        }
        if self.min_samples == 0 {
            return Err(Error::NonPositiveParam {
                concept: self.concept_id.clone(),
                param: "min_samples",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Serialized form of one concept.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConceptDoc {
    id: String,
    name: String,
    kind: ConceptKind,
    #[serde(default)]
    unit: String,
    cutoffs: Vec<Cutoff>,
    sig_delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_stable_seconds: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_stable_hours: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_samples: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KbDoc {
    version: String,
    concepts: Vec<ConceptDoc>,
}

impl ConceptDoc {
    fn into_def(self) -> Result<ConceptDef> {
        let t_stable = match (self.t_stable_seconds, self.t_stable_hours) {
            (Some(s), _) => s,
            (None, Some(h)) => (h * SECONDS_PER_HOUR).round() as i64,
            (None, None) => {
                return Err(Error::KbFormat(format!(
                    "concept `{}` has neither t_stable_seconds nor t_stable_hours",
                    self.id
                )))
            }
        };
        Ok(ConceptDef {
            min_samples: self
                .min_samples
                .unwrap_or_else(|| self.kind.default_min_samples()),
            concept_id: self.id,
            name: self.name,
            kind: self.kind,
            unit: self.unit,
            cutoffs: self.cutoffs,
            sig_delta: self.sig_delta,
            t_stable,
        })
    }

    fn from_def(def: &ConceptDef) -> Self {
        ConceptDoc {
            id: def.concept_id.clone(),
            name: def.name.clone(),
            kind: def.kind,
            unit: def.unit.clone(),
            cutoffs: def.cutoffs.clone(),
            sig_delta: def.sig_delta,
            t_stable_seconds: Some(def.t_stable),
            t_stable_hours: None,
            min_samples: Some(def.min_samples),
        }
    }
}

/// Immutable, validated set of concept definitions.
///
/// Concept order is the document order; it fixes the column order of
/// multivariate encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    version: String,
    concepts: Vec<ConceptDef>,
    index: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new(version: impl Into<String>, concepts: Vec<ConceptDef>) -> Result<Self> {
        if concepts.is_empty() {
            return Err(Error::EmptyKb);
        }
        let mut index = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            c.validate()?;
            if index.insert(c.concept_id.clone(), i).is_some() {
                return Err(Error::DuplicateConcept(c.concept_id.clone()));
            }
        }
        Ok(KnowledgeBase {
            version: version.into(),
            concepts,
            index,
        })
    }

    /// Parse and validate a KB JSON document.
    pub fn from_json(doc: &str) -> Result<Self> {
        let doc: KbDoc =
            serde_json::from_str(doc).map_err(|e| Error::KbFormat(e.to_string()))?;
        let concepts = doc
            .concepts
            .into_iter()
            .map(ConceptDoc::into_def)
            .collect::<Result<Vec<_>>>()?;
        KnowledgeBase::new(doc.version, concepts)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        KnowledgeBase::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let doc = KbDoc {
            version: self.version.clone(),
            concepts: self.concepts.iter().map(ConceptDoc::from_def).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("KB document serializes")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn concepts(&self) -> &[ConceptDef] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, concept_id: &str) -> Option<&ConceptDef> {
        self.index.get(concept_id).map(|&i| &self.concepts[i])
    }

    pub fn position(&self, concept_id: &str) -> Option<usize> {
        self.index.get(concept_id).copied()
    }

    /// Find a concept by id, or by display name ignoring case.
    pub fn lookup(&self, key: &str) -> Option<&ConceptDef> {
        self.get(key).or_else(|| {
            self.concepts
                .iter()
                .find(|c| c.name.eq_ignore_ascii_case(key))
        })
    }

    pub fn concept(&self, concept_id: &str) -> Result<&ConceptDef> {
        self.get(concept_id)
            .ok_or_else(|| Error::UnknownConcept(concept_id.to_string()))
    }
}

pub fn load_kb(doc: &str) -> Result<KnowledgeBase> {
    KnowledgeBase::from_json(doc)
}

/// The embedded readmission knowledge base document.
pub fn builtin_document() -> &'static str {
    BUILTIN_DOCUMENT
}

/// The 17-concept readmission knowledge base (12 labs, 5 charts).
pub fn builtin_readmission_kb() -> KnowledgeBase {
    KnowledgeBase::from_json(BUILTIN_DOCUMENT).expect("embedded KB is valid")
}
