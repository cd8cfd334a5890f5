//! Model-ready encodings of abstracted stays, ICD-9 entries and demographics.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abstraction::{
    abstract_stay, fill_grid_with, gradient_labels, AbstractionOptions, AbstractionSet,
    GradientMode, GridSeries, SymbolKind, SymbolPoint, Trend,
};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::series::{Gender, Icd9Entry, StayId, StayRecord};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
/// Ordinal used for cells with no value.
pub const MISSING: i32 = -1;

pub const ICD9_TEXT_PREFIX: &str = "Procedures patient went through and doctor's diagnoses:";

/// Token list with index 0 reserved for padding and 1 for unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from observed tokens; order is lexicographic, so the result does
    /// not depend on iteration order.
    pub fn build<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let uniq: BTreeSet<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| t != PAD && t != UNK)
            .collect();
        let all = [PAD.to_string(), UNK.to_string()].into_iter().chain(uniq);
        Self::from_tokens(all.collect()).expect("reserved tokens present")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD || tokens[1] != UNK {
            return Err(Error::InvalidConfig(format!(
                "vocabulary must start with `{PAD}`, `{UNK}`"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// JSON list in index order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.tokens).expect("string list serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_tokens(serde_json::from_str(s)?)
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.tokens.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        Vocabulary::from_tokens(tokens).map_err(serde::de::Error::custom)
    }
}

/// Token naming a symbol point, e.g. `heart_rate:High` or
/// `heart_rate:trend:Increasing`.
pub fn point_token(p: &SymbolPoint) -> String {
    match p.kind {
        SymbolKind::State => format!("{}:{}", p.concept_id, p.label),
        SymbolKind::Gradient => format!("{}:trend:{}", p.concept_id, p.label),
    }
}

fn pad_to(mut ids: Vec<u32>, len: usize) -> Vec<u32> {
    ids.truncate(len);
    ids.resize(len, PAD_ID);
    ids
}

/// Points in flattening order: time, then concept id, states before gradients.
pub fn flattened_points(abs: &AbstractionSet, include_gradients: bool) -> Vec<&SymbolPoint> {
    let mut pts: Vec<&SymbolPoint> = abs
        .points
        .iter()
        .filter(|p| include_gradients || p.kind == SymbolKind::State)
        .collect();
    pts.sort_by(|a, b| {
        (a.t, &a.concept_id, a.kind).cmp(&(b.t, &b.concept_id, b.kind))
    });
    pts
}

/// Temporally ordered token ids of all points, truncated or padded to `len`.
pub fn flatten_one_hot(
    abs: &AbstractionSet,
    vocab: &Vocabulary,
    len: usize,
    include_gradients: bool,
) -> Vec<u32> {
    let ids = flattened_points(abs, include_gradients)
        .into_iter()
        .map(|p| vocab.id(&point_token(p)))
        .collect();
    pad_to(ids, len)
}

/// Row-major integer matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i32>,
}

impl OrdinalMatrix {
    pub fn get(&self, r: usize, c: usize) -> i32 {
        self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<i32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Truncate or pad with `MISSING` rows to exactly `rows` rows.
    pub fn pad_rows(mut self, rows: usize) -> Self {
        self.data.truncate(rows * self.cols);
        self.data.resize(rows * self.cols, MISSING);
        self.rows = rows;
        self
    }
}

/// Replace each grid cell with the ordinal of its state; empty cells become
/// `MISSING`.
pub fn encode_multivariate(grid: &GridSeries, kb: &KnowledgeBase) -> Result<OrdinalMatrix> {
    let (rows, cols) = grid.dims();
    let concepts = grid
        .concept_ids
        .iter()
        .map(|id| kb.concept(id))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for (c, concept) in concepts.iter().enumerate() {
            data.push(match grid.get(r, c) {
                Some(v) => concept.state_index(v) as i32,
                None => MISSING,
            });
        }
    }
    Ok(OrdinalMatrix { rows, cols, data })
}

/// State ordinals followed by one trend-ordinal column per concept
/// (`Decreasing`=0, `Stable`=1, `Increasing`=2; first row `MISSING`).
pub fn encode_multivariate_with_gradients(
    grid: &GridSeries,
    kb: &KnowledgeBase,
    mode: GradientMode,
) -> Result<OrdinalMatrix> {
    let states = encode_multivariate(grid, kb)?;
    let (rows, d) = grid.dims();
    let mut trends = vec![MISSING; rows * d];
    for c in 0..d {
        let sig_delta = kb.concept(&grid.concept_ids[c])?.sig_delta;
        let series: Vec<_> = grid
            .times
            .iter()
            .zip(grid.column(c))
            .enumerate()
            .filter_map(|(r, (_, v))| v.map(|v| (r as i64, v)))
            .collect();
        for (r, trend) in gradient_labels(&series, mode, sig_delta) {
            trends[r as usize * d + c] = trend.ordinal() as i32;
        }
    }
    let cols = 2 * d;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        data.extend_from_slice(&states.data[r * d..(r + 1) * d]);
        data.extend_from_slice(&trends[r * d..(r + 1) * d]);
    }
    Ok(OrdinalMatrix { rows, cols, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgeBucket {
    Adult,
    Senior,
}

impl AgeBucket {
    /// 18–65 inclusive, or above 65.
    pub fn of(age_years: u32) -> Result<AgeBucket> {
        match age_years {
            0..=17 => Err(Error::AgeBelowAdult(age_years)),
            18..=65 => Ok(AgeBucket::Adult),
            _ => Ok(AgeBucket::Senior),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeBucket::Adult => "18-65",
            AgeBucket::Senior => ">65",
        }
    }
}

/// Layout of the demographics bit vector: age bucket (2), gender (2),
/// insurance categories seen in training plus a trailing catch-all slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicsSpec {
    pub insurance: Vec<String>,
}

impl DemographicsSpec {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a StayRecord>) -> Self {
        let set: BTreeSet<String> = train
            .into_iter()
            .filter_map(|s| s.insurance.clone())
            .collect();
        DemographicsSpec {
            insurance: set.into_iter().collect(),
        }
    }

    pub fn width(&self) -> usize {
        2 + 2 + self.insurance.len() + 1
    }
}

pub fn demographics_one_hot(stay: &StayRecord, spec: &DemographicsSpec) -> Result<Vec<u8>> {
    let mut bits = vec![0u8; spec.width()];
    bits[match AgeBucket::of(stay.age_years)? {
        AgeBucket::Adult => 0,
        AgeBucket::Senior => 1,
    }] = 1;
    bits[match stay.gender {
        Gender::Male => 2,
        Gender::Female => 3,
    }] = 1;
    let ins = stay
        .insurance
        .as_ref()
        .and_then(|i| spec.insurance.iter().position(|x| x == i))
        .unwrap_or(spec.insurance.len());
    bits[4 + ins] = 1;
    Ok(bits)
}

pub fn icd9_one_hot(codes: &[Icd9Entry], vocab: &Vocabulary, len: usize) -> Vec<u32> {
    pad_to(codes.iter().map(|e| vocab.id(&e.code)).collect(), len)
}

pub fn demographic_sentence(stay: &StayRecord) -> String {
    format!("Patient is a {}-year-old {}.", stay.age_years, stay.gender.as_str())
}

/// Demographic sentence, the diagnoses prefix, then ICD-9 descriptions joined
/// by `", "` in sequence order.
pub fn icd9_text(codes: &[Icd9Entry], stay: &StayRecord) -> String {
    let mut out = format!("{} {}", demographic_sentence(stay), ICD9_TEXT_PREFIX);
    if !codes.is_empty() {
        out.push(' ');
        let descs: Vec<&str> = codes.iter().map(|e| e.description.as_str()).collect();
        out.push_str(&descs.join(", "));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "charts_1hot")]
    Charts1Hot,
    #[serde(rename = "charts_interpolated")]
    ChartsInterpolated,
    #[serde(rename = "charts_1hot_gradients")]
    Charts1HotGradients,
    #[serde(rename = "charts_interpolated_gradients")]
    ChartsInterpolatedGradients,
    #[serde(rename = "icd9_1hot")]
    Icd9OneHot,
    #[serde(rename = "icd9_text")]
    Icd9Text,
    #[serde(rename = "demographics_1hot")]
    Demographics1Hot,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Charts1Hot,
        Variant::ChartsInterpolated,
        Variant::Charts1HotGradients,
        Variant::ChartsInterpolatedGradients,
        Variant::Icd9OneHot,
        Variant::Icd9Text,
        Variant::Demographics1Hot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Charts1Hot => "charts_1hot",
            Variant::ChartsInterpolated => "charts_interpolated",
            Variant::Charts1HotGradients => "charts_1hot_gradients",
            Variant::ChartsInterpolatedGradients => "charts_interpolated_gradients",
            Variant::Icd9OneHot => "icd9_1hot",
            Variant::Icd9Text => "icd9_text",
            Variant::Demographics1Hot => "demographics_1hot",
        }
    }

    pub fn includes_gradients(self) -> bool {
        matches!(
            self,
            Variant::Charts1HotGradients | Variant::ChartsInterpolatedGradients
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnsupportedVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Tokens(Vec<u32>),
    Matrix(OrdinalMatrix),
    Bits(Vec<u8>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedFeatures {
    pub stay_id: StayId,
    pub variant: Variant,
    pub payload: Payload,
    /// Padded length (tokens or rows); bit width for demographics; character
    /// count for text.
    pub length: usize,
    /// Unpadded length before truncation or padding.
    pub raw_length: usize,
}

/// Fit-time settings for an encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub abstraction: AbstractionOptions,
    /// Hard cap on the padded length; `None` pads to the training maximum.
    pub max_len_cap: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            abstraction: AbstractionOptions::default(),
            max_len_cap: Some(4096),
        }
    }
}

/// Padded length: the largest training length, optionally capped; at least 1.
pub fn padded_length(lengths: impl IntoIterator<Item = usize>, cap: Option<usize>) -> usize {
    let max = lengths.into_iter().max().unwrap_or(0).max(1);
    cap.map_or(max, |c| max.min(c.max(1)))
}

/// Encoder state fitted on a training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub variant: Variant,
    pub config: EncoderConfig,
    /// Padded length L.
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vocabulary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<DemographicsSpec>,
}

enum Raw {
    Tokens(Vec<String>),
    Codes(Vec<String>),
    Matrix(OrdinalMatrix),
    Bits(Vec<u8>),
    Text(String),
}

fn raw_encoding(
    variant: Variant,
    stay: &StayRecord,
    kb: &KnowledgeBase,
    cfg: &EncoderConfig,
    demographics: Option<&DemographicsSpec>,
) -> Result<Raw> {
    Ok(match variant {
        Variant::Charts1Hot | Variant::Charts1HotGradients => {
            let opts = AbstractionOptions {
                interpolate: false,
                ..cfg.abstraction
            };
            let abs = abstract_stay(stay, kb, &opts)?;
            Raw::Tokens(
                flattened_points(&abs, variant.includes_gradients())
                    .into_iter()
                    .map(point_token)
                    .collect(),
            )
        }
        Variant::ChartsInterpolated => {
            let grid = fill_grid_with(stay, kb, cfg.abstraction.interpolation)?;
            Raw::Matrix(encode_multivariate(&grid, kb)?)
        }
        Variant::ChartsInterpolatedGradients => {
            let grid = fill_grid_with(stay, kb, cfg.abstraction.interpolation)?;
            Raw::Matrix(encode_multivariate_with_gradients(
                &grid,
                kb,
                cfg.abstraction.gradient_mode,
            )?)
        }
        Variant::Icd9OneHot => Raw::Codes(stay.icd9.iter().map(|e| e.code.clone()).collect()),
        Variant::Icd9Text => Raw::Text(icd9_text(&stay.icd9, stay)),
        Variant::Demographics1Hot => Raw::Bits(demographics_one_hot(
            stay,
            demographics.expect("demographics spec fitted"),
        )?),
    })
}

impl Encoder {
    /// Fit vocabulary, padded length and demographic categories on the
    /// training stays only.
    pub fn fit(
        variant: Variant,
        train: &[&StayRecord],
        kb: &KnowledgeBase,
        config: EncoderConfig,
    ) -> Result<Self> {
        let demographics = (variant == Variant::Demographics1Hot)
            .then(|| DemographicsSpec::fit(train.iter().copied()));
        let mut lengths = Vec::with_capacity(train.len());
        let mut tokens = BTreeSet::new();
        for stay in train {
            match raw_encoding(variant, stay, kb, &config, demographics.as_ref())? {
                Raw::Tokens(t) | Raw::Codes(t) => {
                    lengths.push(t.len());
                    tokens.extend(t);
                }
                Raw::Matrix(m) => lengths.push(m.rows),
                Raw::Bits(b) => lengths.push(b.len()),
                Raw::Text(s) => lengths.push(s.chars().count()),
            }
        }
        let vocab = matches!(
            variant,
            Variant::Charts1Hot | Variant::Charts1HotGradients | Variant::Icd9OneHot
        )
        .then(|| Vocabulary::build(tokens));
        let length = match variant {
            Variant::Demographics1Hot => demographics.as_ref().map_or(0, DemographicsSpec::width),
            _ => padded_length(lengths, config.max_len_cap),
        };
        Ok(Encoder {
            variant,
            config,
            length,
            vocab,
            demographics,
        })
    }

    pub fn encode(&self, stay: &StayRecord, kb: &KnowledgeBase) -> Result<EncodedFeatures> {
        let raw = raw_encoding(self.variant, stay, kb, &self.config, self.demographics.as_ref())?;
        let vocab = || self.vocab.as_ref().expect("vocabulary fitted");
        let (payload, raw_length, length) = match raw {
            Raw::Tokens(t) | Raw::Codes(t) => {
                let n = t.len();
                let ids = t.iter().map(|tok| vocab().id(tok)).collect();
                (Payload::Tokens(pad_to(ids, self.length)), n, self.length)
            }
            Raw::Matrix(m) => {
                let n = m.rows;
                (Payload::Matrix(m.pad_rows(self.length)), n, self.length)
            }
            Raw::Bits(b) => {
                let n = b.len();
                (Payload::Bits(b), n, n)
            }
            Raw::Text(s) => {
                let n = s.chars().count();
                (Payload::Text(s), n, n)
            }
        };
        Ok(EncodedFeatures {
            stay_id: stay.stay_id,
            variant: self.variant,
            payload,
            length,
            raw_length,
        })
    }
}

/// Number of state labels per trend column in gradient matrices.
pub const TREND_STATES: usize = Trend::ALL.len();

impl EncodedFeatures {
    /// Payload shapes are not self-describing in JSON (bits and token ids are
    /// both integer lists); restore the shape implied by the variant.
    fn restore_payload(mut self) -> Result<Self> {
        if self.variant == Variant::Demographics1Hot {
            if let Payload::Tokens(ids) = &self.payload {
                let bits = ids
                    .iter()
                    .map(|&b| u8::try_from(b).ok().filter(|&b| b <= 1))
                    .collect::<Option<Vec<u8>>>()
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "stay {}: demographics payload is not a bit vector",
                            self.stay_id
                        ))
                    })?;
                self.payload = Payload::Bits(bits);
            }
        }
        Ok(self)
    }
}

pub fn write_encoded_jsonl<W: std::io::Write>(mut w: W, rows: &[EncodedFeatures]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_encoded_jsonl<R: std::io::BufRead>(r: R) -> Result<Vec<EncodedFeatures>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EncodedFeatures = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: "encoded".into(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(row.restore_payload()?);
    }
    Ok(out)
}
