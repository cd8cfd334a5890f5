//! Temporal abstraction of ICU time series, readmission cohort construction,
//! feature encodings, a linear baseline and the evaluation protocol.

pub mod abstraction;
pub mod baseline;
pub mod cohort;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod kb;
pub mod pipeline;
pub mod series;
pub mod synth;

pub use abstraction::{
    abstract_stay, gradient_labels, interpolate_at, merge_intervals, AbstractionOptions,
    AbstractionSet, GradientMode, Interpolation, Trend,
};
pub use cohort::{apply_rules, stratified_folds, CohortDecision, CohortOptions, Rule, YearWindow};
pub use encoding::{EncodedFeatures, Encoder, EncoderConfig, Variant};
pub use error::{Error, Result};
pub use eval::{
    aggregate_folds, aggregate_note_scores, auprc, auroc, best_threshold, conclusively_better,
    evaluate, MetricsReport, ScoredSet, Verdict,
};
pub use kb::{builtin_readmission_kb, load_kb, ConceptDef, KnowledgeBase};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineResult};
pub use series::{ingest, normalize, Sample, StayRecord};
pub use synth::{generate, SynthConfig, SynthData};
