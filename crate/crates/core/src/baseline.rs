//! Logistic-regression baseline trained with validation-AUPRC early stopping.
//!
//! Every `eval_every` steps the validation AUPRC is computed. An improvement
//! over the best so far checkpoints the model; otherwise the learning rate is
//! multiplied by `lr_decay`. After `patience` consecutive non-improvements
//! training stops and the checkpoint is returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{Encoder, EncodedFeatures, Payload, Variant, MISSING, TREND_STATES};
use crate::error::{Error, Result};
use crate::eval::{auprc, ScoredSet};

/// How an encoded payload becomes a dense feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// Relative frequency of each vocabulary token (padding ignored).
    TokenFrequency { vocab_size: usize },
    /// 1 if the token occurs, else 0.
    TokenPresence { vocab_size: usize },
    /// Per column, relative frequency of each ordinal level plus `MISSING`.
    OrdinalHistogram { cols: usize, levels: usize },
    Bits { width: usize },
    /// Presence of lower-cased words hashed into buckets.
    HashedWords { buckets: usize },
}

const TEXT_BUCKETS: usize = 512;

impl FeatureSpec {
    pub fn for_encoder(encoder: &Encoder, kb_max_states: usize) -> Self {
        let vocab_size = encoder.vocab.as_ref().map_or(0, |v| v.len());
        match encoder.variant {
            Variant::Charts1Hot | Variant::Charts1HotGradients => {
                FeatureSpec::TokenFrequency { vocab_size }
            }
            Variant::Icd9OneHot => FeatureSpec::TokenPresence { vocab_size },
            Variant::ChartsInterpolated => FeatureSpec::OrdinalHistogram {
                cols: 0,
                levels: kb_max_states,
            },
            Variant::ChartsInterpolatedGradients => FeatureSpec::OrdinalHistogram {
                cols: 0,
                levels: kb_max_states.max(TREND_STATES),
            },
            Variant::Demographics1Hot => FeatureSpec::Bits {
                width: encoder.length,
            },
            Variant::Icd9Text => FeatureSpec::HashedWords {
                buckets: TEXT_BUCKETS,
            },
        }
    }

    pub fn width(&self) -> usize {
        match *self {
            FeatureSpec::TokenFrequency { vocab_size } | FeatureSpec::TokenPresence { vocab_size } => {
                vocab_size
            }
            FeatureSpec::OrdinalHistogram { cols, levels } => cols * (levels + 1),
            FeatureSpec::Bits { width } => width,
            FeatureSpec::HashedWords { buckets } => buckets,
        }
    }

    /// Dense features of one encoded stay. Matrix column counts are bound on
    /// first use when the spec was created with `cols: 0`.
    pub fn featurize(&mut self, enc: &EncodedFeatures) -> Result<Vec<f64>> {
        if let (FeatureSpec::OrdinalHistogram { cols, .. }, Payload::Matrix(m)) =
            (&mut *self, &enc.payload)
        {
            if *cols == 0 {
                *cols = m.cols;
            }
        }
        self.features(enc)
    }

    pub fn features(&self, enc: &EncodedFeatures) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.width()];
        match (self, &enc.payload) {
            (FeatureSpec::TokenFrequency { vocab_size }, Payload::Tokens(ids)) => {
                let real: Vec<u32> = ids.iter().copied().filter(|&i| i != 0).collect();
                let n = real.len().max(1) as f64;
                for id in real {
                    let i = (id as usize).min(vocab_size.saturating_sub(1));
                    x[i] += 1.0 / n;
                }
            }
            (FeatureSpec::TokenPresence { vocab_size }, Payload::Tokens(ids)) => {
                for &id in ids.iter().filter(|&&i| i != 0) {
                    x[(id as usize).min(vocab_size.saturating_sub(1))] = 1.0;
                }
            }
            (FeatureSpec::OrdinalHistogram { cols, levels }, Payload::Matrix(m)) => {
                if m.cols != *cols {
                    return Err(Error::DimensionMismatch {
                        expected: *cols,
                        got: m.cols,
                    });
                }
                let rows = enc.raw_length.min(m.rows);
                let inv = 1.0 / rows.max(1) as f64;
                for r in 0..rows {
                    for c in 0..m.cols {
                        let v = m.get(r, c);
                        let slot = if v == MISSING {
                            *levels
                        } else {
                            (v as usize).min(levels - 1)
                        };
                        x[c * (levels + 1) + slot] += inv;
                    }
                }
            }
            (FeatureSpec::Bits { width }, Payload::Bits(bits)) => {
                if bits.len() != *width {
                    return Err(Error::DimensionMismatch {
                        expected: *width,
                        got: bits.len(),
                    });
                }
                for (xi, &b) in x.iter_mut().zip(bits) {
                    *xi = f64::from(b);
                }
            }
            (FeatureSpec::HashedWords { buckets }, Payload::Text(text)) => {
                for word in text
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|w| !w.is_empty())
                {
                    x[(fnv1a(&word.to_lowercase()) % *buckets as u64) as usize] = 1.0;
                }
            }
            _ => return Err(Error::UnsupportedVariant(enc.variant.to_string())),
        }
        Ok(x)
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_spec: FeatureSpec,
}

impl LinearModel {
    pub fn zeros(spec: FeatureSpec) -> Self {
        LinearModel {
            weights: vec![0.0; spec.width()],
            bias: 0.0,
            feature_spec: spec,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn predict(model: &LinearModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features
        .iter()
        .map(|x| {
            model.check_dim(x)?;
            Ok(sigmoid(model.logit(x)))
        })
        .collect()
}

/// Feature matrix with binary labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<bool>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn width(&self) -> Option<usize> {
        self.x.first().map(Vec::len)
    }
}

/// Inverse-frequency class weights `(negative, positive)`; equal weights
/// when a class is absent.
pub fn class_weights(y: &[bool]) -> (f64, f64) {
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&l| l).count() as f64;
    let neg = n - pos;
    if pos == 0.0 || neg == 0.0 {
        (1.0, 1.0)
    } else {
        (n / (2.0 * neg), n / (2.0 * pos))
    }
}

/// Weighted mean logistic loss and its gradient `(d weights, d bias)` over
/// the rows in `batch`.
pub fn loss_and_gradient(
    model: &LinearModel,
    data: &Dataset,
    batch: &[usize],
    weights: (f64, f64),
) -> (f64, Vec<f64>, f64) {
    let mut grad = vec![0.0; model.weights.len()];
    let (mut gb, mut loss, mut total) = (0.0, 0.0, 0.0);
    for &i in batch {
        let (x, y) = (&data.x[i], data.y[i]);
        let w = if y { weights.1 } else { weights.0 };
        let z = model.logit(x);
        let t = if y { 1.0 } else { 0.0 };
        loss += w * (softplus(z) - t * z);
        let r = w * (sigmoid(z) - t);
        for (g, v) in grad.iter_mut().zip(x) {
            *g += r * v;
        }
        gb += r;
        total += w;
    }
    if total > 0.0 {
        loss /= total;
        gb /= total;
        grad.iter_mut().for_each(|g| *g /= total);
    }
    (loss, grad, gb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
    pub class_weighting: bool,
    /// Safety bound on optimizer steps.
    pub max_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            lr: 1e-3,
            lr_decay: 0.97,
            eval_every: 200,
            patience: 7,
            seed: 0,
            class_weighting: true,
            max_steps: 200_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(self.lr_decay > 0.0) {
            return bad("lr_decay must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    /// Learning rate after this evaluation's decision.
    pub lr: f64,
    pub val_auprc: f64,
    pub checkpointed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn best_auprc(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.checkpointed)
            .map(|e| e.val_auprc)
            .next_back()
    }
}

/// Adam moment estimates.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Apply one update; the last slot of `params`/`grad` is the bias.
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

fn validation_auprc(model: &LinearModel, val: &Dataset) -> Result<f64> {
    let scores = predict(model, &val.x)?;
    auprc(&ScoredSet::new(scores, val.y.clone())?)
}

/// Train on mini-batches of `train`, early-stopping on `val` AUPRC.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    spec: FeatureSpec,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainLog)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if !(val_set.y.iter().any(|&l| l) && val_set.y.iter().any(|&l| !l)) {
        return Err(Error::SingleClassValidation);
    }
    let dim = spec.width();
    for d in [train_set, val_set] {
        if let Some(bad) = d.x.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
    }
    debug_assert!(train_set.width().is_none_or(|w| w == dim));

    let class_w = if cfg.class_weighting {
        class_weights(&train_set.y)
    } else {
        (1.0, 1.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LinearModel::zeros(spec);
    let mut best = model.clone();
    let mut best_auprc = f64::NEG_INFINITY;
    let mut adam = Adam::new(dim + 1);
    let mut params = vec![0.0; dim + 1];
    let mut lr = cfg.lr;
    let mut misses = 0usize;
    let mut log = TrainLog::default();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();
    let mut step = 0usize;
    while step < cfg.max_steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let (_, gw, gb) = loss_and_gradient(&model, train_set, &order[cursor..end], class_w);
        cursor = end;
        let mut grad = gw;
        grad.push(gb);
        adam.step(&mut params, &grad, lr);
        model.weights.copy_from_slice(&params[..dim]);
        model.bias = params[dim];
        step += 1;

        if step.is_multiple_of(cfg.eval_every) {
            let score = validation_auprc(&model, val_set)?;
            let improved = score > best_auprc;
            if improved {
                best_auprc = score;
                best = model.clone();
                misses = 0;
            } else {
                lr *= cfg.lr_decay;
                misses += 1;
            }
            log.entries.push(LogEntry {
                step,
                lr,
                val_auprc: score,
                checkpointed: improved,
            });
            if misses >= cfg.patience {
                break;
            }
        }
    }
    if log.entries.is_empty() {
        let score = validation_auprc(&model, val_set)?;
        log.entries.push(LogEntry {
            step,
            lr,
            val_auprc: score,
            checkpointed: true,
        });
        best = model;
    }
    Ok((best, log))
}
