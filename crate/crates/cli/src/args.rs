use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use readmit_core::abstraction::{AbstractionOptions, GradientMode, Interpolation};
use readmit_core::baseline::TrainConfig;
use readmit_core::cohort::{CohortOptions, YearWindow};
use readmit_core::encoding::{EncoderConfig, Variant};

/// Temporal abstraction and ICU readmission prediction pipeline.
#[derive(Debug, Parser, Serialize)]
#[command(name = "readmit", version, propagate_version = true)]
pub struct Cli {
    /// Seed for every stochastic step (splits, shuffles, synthetic data).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON object of flag values; keys are long flag names. Flags given on
    /// the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for per-stay work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Load and validate a knowledge-base document.
    KbValidate(KbValidateArgs),
    /// Ingest CSVs, normalize series and write stays as JSON Lines.
    Ingest(IngestArgs),
    /// Apply inclusion rules R1-R5 and label readmissions.
    Cohort(CohortArgs),
    /// Assign cohort patients to stratified folds.
    Split(SplitArgs),
    /// Write state and gradient abstractions as JSON Lines.
    Abstract(AbstractArgs),
    /// Fit an encoder on training stays and encode the cohort.
    Encode(EncodeArgs),
    /// Train the logistic baseline on one fold.
    Train(TrainArgs),
    /// Compute metrics from score files, or aggregate fold reports.
    Evaluate(EvaluateArgs),
    /// Decide which of two reports is better on at least 3 of 5 metrics.
    Compare(CompareArgs),
    /// Combine per-chunk note probabilities into one score per stay.
    AggregateNotes(AggregateNotesArgs),
    /// Generate a synthetic cohort with a tunable readmission signal.
    Synth(SynthArgs),
    /// Run cohort, folds, encoding, training and evaluation end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Stays CSV (stay_id,patient_id,intime,outtime,age,gender,insurance,death_time).
    #[arg(long, value_name = "FILE", requires = "events")]
    pub stays: Option<PathBuf>,
    /// Events CSV (stay_id,patient_id,concept_id,timestamp,value).
    #[arg(long, value_name = "FILE", requires = "stays")]
    pub events: Option<PathBuf>,
    /// Diagnoses CSV (stay_id,seq,code,description).
    #[arg(long, value_name = "FILE", requires = "stays")]
    pub icd9: Option<PathBuf>,
    /// Normalized stays as JSON Lines, as written by `ingest`.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["stays", "events", "icd9"])]
    pub normalized: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct KbArg {
    /// Knowledge-base JSON (default: built-in readmission KB).
    #[arg(long, value_name = "FILE")]
    pub kb: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum YearWindowArg {
    Calendar,
    Rolling,
}

#[derive(Debug, Args, Serialize)]
pub struct CohortFlags {
    /// How "first stay of the year" is delimited for R5.
    #[arg(long, value_enum, default_value_t = YearWindowArg::Calendar)]
    pub year_window: YearWindowArg,
}

impl CohortFlags {
    pub fn options(&self) -> CohortOptions {
        CohortOptions {
            year_window: match self.year_window {
                YearWindowArg::Calendar => YearWindow::Calendar,
                YearWindowArg::Rolling => YearWindow::Rolling,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientModeArg {
    Simple,
    Thresholded,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationArg {
    Linear,
    SwappedWeights,
}

#[derive(Debug, Args, Serialize)]
pub struct AbstractionFlags {
    #[arg(long, value_enum, default_value_t = GradientModeArg::Simple)]
    pub gradient_mode: GradientModeArg,
    /// Abstract the hourly interpolated grid instead of raw samples.
    #[arg(long)]
    pub interpolate: bool,
    #[arg(long, value_enum, default_value_t = InterpolationArg::Linear)]
    pub interpolation: InterpolationArg,
    /// Merge intervals only across gaps up to each concept's stability window.
    #[arg(long)]
    pub t_stable_gap: bool,
}

impl AbstractionFlags {
    pub fn options(&self) -> AbstractionOptions {
        AbstractionOptions {
            gradient_mode: match self.gradient_mode {
                GradientModeArg::Simple => GradientMode::Simple,
                GradientModeArg::Thresholded => GradientMode::Thresholded,
            },
            use_t_stable_as_max_gap: self.t_stable_gap,
            interpolate: self.interpolate,
            interpolation: match self.interpolation {
                InterpolationArg::Linear => Interpolation::Linear,
                InterpolationArg::SwappedWeights => Interpolation::SwappedWeights,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum VariantArg {
    #[value(name = "charts_1hot")]
    #[serde(rename = "charts_1hot")]
    Charts1Hot,
    #[value(name = "charts_interpolated")]
    #[serde(rename = "charts_interpolated")]
    ChartsInterpolated,
    #[value(name = "charts_1hot_gradients")]
    #[serde(rename = "charts_1hot_gradients")]
    Charts1HotGradients,
    #[value(name = "charts_interpolated_gradients")]
    #[serde(rename = "charts_interpolated_gradients")]
    ChartsInterpolatedGradients,
    #[value(name = "icd9_1hot")]
    #[serde(rename = "icd9_1hot")]
    Icd9OneHot,
    #[value(name = "icd9_text")]
    #[serde(rename = "icd9_text")]
    Icd9Text,
    #[value(name = "demographics_1hot")]
    #[serde(rename = "demographics_1hot")]
    Demographics1Hot,
}

impl VariantArg {
    pub fn variant(self) -> Variant {
        match self {
            VariantArg::Charts1Hot => Variant::Charts1Hot,
            VariantArg::ChartsInterpolated => Variant::ChartsInterpolated,
            VariantArg::Charts1HotGradients => Variant::Charts1HotGradients,
            VariantArg::ChartsInterpolatedGradients => Variant::ChartsInterpolatedGradients,
            VariantArg::Icd9OneHot => Variant::Icd9OneHot,
            VariantArg::Icd9Text => Variant::Icd9Text,
            VariantArg::Demographics1Hot => Variant::Demographics1Hot,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EncodingFlags {
    #[arg(long, value_enum, default_value_t = VariantArg::Charts1HotGradients)]
    pub variant: VariantArg,
    /// Cap on the padded sequence length (0 = no cap).
    #[arg(long, default_value_t = 4096)]
    pub max_len: usize,
}

impl EncodingFlags {
    pub fn config(&self, abstraction: AbstractionOptions) -> EncoderConfig {
        EncoderConfig {
            abstraction,
            max_len_cap: (self.max_len > 0).then_some(self.max_len),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Learning-rate factor applied after each non-improving evaluation.
    #[arg(long, default_value_t = 0.97)]
    pub lr_decay: f64,
    /// Optimizer steps between validation evaluations.
    #[arg(long, default_value_t = 200)]
    pub eval_every: usize,
    /// Stop after this many consecutive non-improving evaluations.
    #[arg(long, default_value_t = 7)]
    pub patience: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_steps: usize,
    /// Disable inverse-frequency class weighting.
    #[arg(long)]
    pub no_class_weighting: bool,
}

impl TrainFlags {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            lr: self.lr,
            lr_decay: self.lr_decay,
            eval_every: self.eval_every,
            patience: self.patience,
            seed,
            class_weighting: !self.no_class_weighting,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FoldFlags {
    /// Fold assignment CSV (patient_id,fold) from `split`.
    #[arg(long, value_name = "FILE", requires = "test_fold")]
    pub folds: Option<PathBuf>,
    /// Held-out test fold; validation is the next fold (mod k). Encoders are
    /// then fitted on the remaining training folds only.
    #[arg(long, requires = "folds")]
    pub test_fold: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct KbValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    /// Write the validated KB in canonical form.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Rejected rows as CSV (file,line,reason).
    #[arg(long, value_name = "FILE")]
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CohortArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub cohort: CohortFlags,
    /// Decisions CSV (stay_id,included,failed_rules,label,patient_id).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Gender by age-bucket table as aligned text.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// The same table as CSV.
    #[arg(long, value_name = "FILE")]
    pub report_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// Decisions CSV from `cohort`.
    #[arg(long, value_name = "FILE")]
    pub decisions: PathBuf,
    #[arg(long, short, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AbstractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub abstraction: AbstractionFlags,
    /// Only abstract stays included by this decisions CSV.
    #[arg(long, value_name = "FILE")]
    pub decisions: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub abstraction: AbstractionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub encoding: EncodingFlags,
    /// Decisions CSV; only included stays are encoded.
    #[arg(long, value_name = "FILE")]
    pub decisions: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub folds: FoldFlags,
    /// Encoded stays as JSON Lines.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Fitted encoder state (variant, padded length, vocabulary).
    #[arg(long, value_name = "FILE")]
    pub encoder_out: PathBuf,
    /// Vocabulary as a JSON list in index order.
    #[arg(long, value_name = "FILE")]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    /// Encoded stays from `encode`.
    #[arg(long, value_name = "FILE")]
    pub encoded: PathBuf,
    /// Encoder state from `encode`.
    #[arg(long, value_name = "FILE")]
    pub encoder: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub decisions: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub folds: PathBuf,
    #[arg(long)]
    pub test_fold: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainFlags,
    /// Model JSON (weights, bias, feature_spec).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Training log CSV (step,lr,val_auprc,checkpointed).
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    /// Validation scores CSV (stay_id,score,label).
    #[arg(long, value_name = "FILE")]
    pub val_scores: PathBuf,
    /// Test scores CSV (stay_id,score,label).
    #[arg(long, value_name = "FILE")]
    pub test_scores: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Test scores CSV (stay_id,score,label).
    #[arg(long, value_name = "FILE", conflicts_with = "reports")]
    pub scores: Option<PathBuf>,
    /// Validation scores used to pick the F1-optimal threshold.
    #[arg(long, value_name = "FILE", conflicts_with = "threshold", requires = "scores")]
    pub val_scores: Option<PathBuf>,
    /// Fixed decision threshold.
    #[arg(long, requires = "scores")]
    pub threshold: Option<f64>,
    /// Per-fold report JSON files to aggregate as mean and std.
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Method name for the aggregate table row.
    #[arg(long, default_value = "model")]
    pub method: String,
    /// Report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Aligned-text table.
    #[arg(long, value_name = "FILE")]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Report A (single report or fold aggregate JSON).
    pub a: PathBuf,
    /// Report B.
    pub b: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AggregateNotesArgs {
    /// JSON Lines {"stay_id", "chunk_probs": [...], optional "label"}.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Take labels from this decisions CSV.
    #[arg(long, value_name = "FILE")]
    pub decisions: Option<PathBuf>,
    /// Scores CSV (stay_id,score,label).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2_000)]
    pub n_patients: usize,
    #[arg(long, default_value_t = 0.113)]
    pub positive_rate: f64,
    /// Signal strength in [0, 1]: how strongly unstable series predict readmission.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Fraction of index stays made to violate one inclusion rule.
    #[arg(long, default_value_t = 0.03)]
    pub exclusion_rate: f64,
    /// Directory for events.csv, stays.csv, icd9.csv and labels.csv.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kb: KbArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub cohort: CohortFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub abstraction: AbstractionFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub encoding: EncodingFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainFlags,
    #[arg(long, short, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}
