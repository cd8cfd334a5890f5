//! End-to-end cross-validation: cohort, folds, encoding, training, evaluation.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{predict, train, Dataset, FeatureSpec, LinearModel, TrainConfig, TrainLog};
use crate::cohort::{
    apply_rules, cohort_members, stratified_folds, CohortDecision, CohortMember, CohortOptions,
    FoldAssignment,
};
use crate::encoding::{Encoder, EncoderConfig, Variant};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_folds, best_threshold, evaluate, FoldAggregate, MetricsReport, ScoreRow, ScoredSet,
};
use crate::kb::KnowledgeBase;
use crate::series::{StayId, StayRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub cohort: CohortOptions,
    pub encoder: EncoderConfig,
    pub variant: Variant,
    pub train: TrainConfig,
    pub k: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cohort: CohortOptions::default(),
            encoder: EncoderConfig::default(),
            variant: Variant::Charts1HotGradients,
            train: TrainConfig::default(),
            k: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub threshold: f64,
    pub report: MetricsReport,
    pub log: TrainLog,
    pub model: LinearModel,
    pub test_scores: Vec<ScoreRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub decisions: Vec<CohortDecision>,
    pub folds: FoldAssignment,
    pub fold_results: Vec<FoldResult>,
    pub aggregate: FoldAggregate,
}

/// Largest number of states of any concept.
pub fn max_states(kb: &KnowledgeBase) -> usize {
    kb.concepts().iter().map(|c| c.num_states()).max().unwrap_or(0)
}

/// Encode `stays` with an encoder fitted on `train`, returning the bound
/// feature spec and one dense feature row per stay.
pub fn featurize(
    variant: Variant,
    train: &[&StayRecord],
    stays: &[&StayRecord],
    kb: &KnowledgeBase,
    config: EncoderConfig,
) -> Result<(Encoder, FeatureSpec, Vec<Vec<f64>>)> {
    let encoder = Encoder::fit(variant, train, kb, config)?;
    let encoded = stays
        .par_iter()
        .map(|s| encoder.encode(s, kb))
        .collect::<Result<Vec<_>>>()?;
    let mut spec = FeatureSpec::for_encoder(&encoder, max_states(kb));
    if let Some(first) = encoded.first() {
        spec.featurize(first)?;
    }
    let rows = encoded
        .par_iter()
        .map(|e| spec.features(e))
        .collect::<Result<Vec<_>>>()?;
    Ok((encoder, spec, rows))
}

/// Members split into `(train, validation, test)`: the test fold is `fold`,
/// validation is `(fold + 1) % k` and every other fold trains.
pub fn split_members(
    members: &[CohortMember],
    folds: &FoldAssignment,
    fold: usize,
) -> Result<(Vec<CohortMember>, Vec<CohortMember>, Vec<CohortMember>)> {
    if fold >= folds.k {
        return Err(Error::InvalidConfig(format!(
            "test fold {fold} out of range for k = {}",
            folds.k
        )));
    }
    let val_fold = (fold + 1) % folds.k;
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for m in members {
        let f = folds.fold_of(m.patient_id).ok_or_else(|| {
            Error::InvalidConfig(format!("patient {} has no fold", m.patient_id))
        })?;
        if f == fold {
            te.push(*m);
        } else if f == val_fold {
            va.push(*m);
        } else {
            tr.push(*m);
        }
    }
    Ok((tr, va, te))
}

/// Train on all folds except `fold` and `(fold + 1) % k`, pick the F1-optimal
/// threshold on the latter and evaluate on `fold`.
pub fn run_fold(
    fold: usize,
    members: &[CohortMember],
    folds: &FoldAssignment,
    stays: &HashMap<StayId, &StayRecord>,
    kb: &KnowledgeBase,
    cfg: &PipelineConfig,
) -> Result<FoldResult> {
    let (tr, va, te) = split_members(members, folds, fold)?;
    let lookup = |ms: &[CohortMember]| -> Vec<&StayRecord> {
        ms.iter().map(|m| stays[&m.stay_id]).collect()
    };
    let train_stays = lookup(&tr);
    let all: Vec<CohortMember> = tr.iter().chain(&va).chain(&te).copied().collect();
    let (_, spec, rows) = featurize(cfg.variant, &train_stays, &lookup(&all), kb, cfg.encoder)?;
    let (n_tr, n_va) = (tr.len(), va.len());
    let labels = |ms: &[CohortMember]| ms.iter().map(|m| m.label).collect::<Vec<_>>();
    let train_set = Dataset::new(rows[..n_tr].to_vec(), labels(&tr))?;
    let val_set = Dataset::new(rows[n_tr..n_tr + n_va].to_vec(), labels(&va))?;
    let test_x = &rows[n_tr + n_va..];

    let train_cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(fold as u64),
        ..cfg.train
    };
    let (model, log) = train(&train_set, &val_set, spec, &train_cfg)?;
    let threshold = best_threshold(&ScoredSet::new(predict(&model, &val_set.x)?, val_set.y)?)?;
    let scores = predict(&model, test_x)?;
    let report = evaluate(&ScoredSet::new(scores.clone(), labels(&te))?, threshold)?;
    let test_scores = te
        .iter()
        .zip(scores)
        .map(|(m, score)| ScoreRow {
            stay_id: m.stay_id,
            score,
            label: u8::from(m.label),
        })
        .collect();
    Ok(FoldResult {
        fold,
        threshold,
        report,
        log,
        model,
        test_scores,
    })
}

/// Run the full protocol on normalized stays.
pub fn run_pipeline(
    stays: &[StayRecord],
    kb: &KnowledgeBase,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    if cfg.k < 3 {
        return Err(Error::InvalidConfig(format!(
            "pipeline needs k >= 3 folds for train, validation and test; got {}",
            cfg.k
        )));
    }
    let mut sorted: Vec<StayRecord> = stays.to_vec();
    sorted.sort_by_key(|s| s.stay_id);
    let ids: HashSet<StayId> = sorted.iter().map(|s| s.stay_id).collect();
    if ids.len() != sorted.len() {
        return Err(Error::InvalidConfig("duplicate stay ids".into()));
    }
    let decisions = apply_rules(&sorted, kb, &cfg.cohort);
    let members = cohort_members(&decisions);
    let folds = stratified_folds(&members, cfg.k, cfg.seed)?;
    let by_id: HashMap<StayId, &StayRecord> = sorted.iter().map(|s| (s.stay_id, s)).collect();
    let fold_results = (0..cfg.k)
        .into_par_iter()
        .map(|f| run_fold(f, &members, &folds, &by_id, kb, cfg))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = fold_results.iter().map(|r| r.report).collect();
    let aggregate = aggregate_folds(&reports)?;
    Ok(PipelineResult {
        decisions,
        folds,
        fold_results,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::builtin_readmission_kb;
    use crate::synth::{generate, SynthConfig};

    fn quick_config() -> PipelineConfig {
        PipelineConfig {
            train: TrainConfig {
                eval_every: 20,
                patience: 3,
                lr: 0.05,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn small_run_is_deterministic_and_order_invariant() {
        let kb = builtin_readmission_kb();
        let data = generate(
            &SynthConfig {
                n_patients: 150,
                positive_rate: 0.3,
                ..Default::default()
            },
            &kb,
        )
        .unwrap();
        let cfg = quick_config();
        let a = run_pipeline(&data.stays, &kb, &cfg).unwrap();
        let mut reversed = data.stays.clone();
        reversed.reverse();
        let b = run_pipeline(&reversed, &kb, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fold_results.len(), 5);
        let tested: usize = a.fold_results.iter().map(|r| r.test_scores.len()).sum();
        assert_eq!(tested, cohort_members(&a.decisions).len());
    }

    #[test]
    fn rejects_too_few_folds() {
        let kb = builtin_readmission_kb();
        let cfg = PipelineConfig {
            k: 2,
            ..Default::default()
        };
        assert!(run_pipeline(&[], &kb, &cfg).is_err());
    }
}
