use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use readmit_core::abstraction::abstract_stay;
use readmit_core::baseline::{predict, train, Dataset, FeatureSpec};
use readmit_core::cohort::{
    apply_rules, cohort_members, cohort_report, decisions_from_csv, decisions_to_csv,
    stratified_folds, CohortDecision, CohortMember, FoldAssignment,
};
use readmit_core::encoding::{read_encoded_jsonl, write_encoded_jsonl, Encoder};
use readmit_core::eval::{
    aggregate_folds, aggregate_note_scores, best_threshold, conclusively_better, evaluate,
    read_scores_csv, scored_set_from_rows, write_scores_csv, FoldAggregate, MetricsReport,
    ScoreRow, METRIC_NAMES,
};
use readmit_core::kb::{builtin_readmission_kb, ConceptKind, KnowledgeBase};
use readmit_core::pipeline::{max_states, run_pipeline, split_members, PipelineConfig};
use readmit_core::series::{ingest_paths, read_stays_jsonl, write_stays_jsonl, StayId, StayRecord};
use readmit_core::synth::{generate, SynthConfig};

use crate::args::*;
use crate::error::{CliError, CliResult, Context};
use crate::manifest::{beside, Run};

/// Fail early if any referenced input is missing.
fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Data(format!("{}: input file not found", p.display())));
        }
    }
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    Ok(BufWriter::new(File::create(path).at(path)?))
}

fn write_text(run: &mut Run, path: &Path, text: &str) -> CliResult<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).at(path)?;
    w.flush().at(path)?;
    run.output(path);
    Ok(())
}

fn write_json<T: serde::Serialize>(run: &mut Run, path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(run, path, &text)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).at(path)?))
}

fn read_json<T: serde::de::DeserializeOwned>(run: &mut Run, path: &Path) -> CliResult<T> {
    run.input(path);
    serde_json::from_reader(open(path)?).at(path)
}

fn load_kb(run: &mut Run, arg: &KbArg) -> CliResult<KnowledgeBase> {
    let kb = match &arg.kb {
        Some(p) => {
            require_inputs([p.as_path()])?;
            run.input(p);
            KnowledgeBase::from_path(p).at(p)?
        }
        None => builtin_readmission_kb(),
    };
    run.kb_version = Some(kb.version().to_string());
    Ok(kb)
}

fn input_paths(input: &InputArgs) -> Vec<&Path> {
    [&input.normalized, &input.stays, &input.events, &input.icd9]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect()
}

fn load_stays(run: &mut Run, input: &InputArgs) -> CliResult<Vec<StayRecord>> {
    let paths = input_paths(input);
    if paths.is_empty() {
        return Err(CliError::Usage(
            "no input: pass --stays and --events (optionally --icd9), or --normalized".into(),
        ));
    }
    require_inputs(paths.iter().copied())?;
    paths.iter().for_each(|p| run.input(p));
    if let Some(p) = &input.normalized {
        return read_stays_jsonl(open(p)?).at(p);
    }
    let (stays, events) = (input.stays.as_ref().unwrap(), input.events.as_ref().unwrap());
    let ingested = ingest_paths(events, stays, input.icd9.as_deref())?;
    if let Some(first) = ingested.rejects.first() {
        log::warn!(
            "{} rows rejected; first at {}:{}: {}",
            ingested.rejects.len(),
            first.file,
            first.line,
            first.reason
        );
    }
    log::info!("ingested {} stays", ingested.stays.len());
    Ok(ingested.stays)
}

fn load_decisions(run: &mut Run, path: &Path) -> CliResult<Vec<CohortDecision>> {
    require_inputs([path])?;
    run.input(path);
    decisions_from_csv(open(path)?).at(path)
}

fn load_folds(run: &mut Run, path: &Path, seed: u64) -> CliResult<FoldAssignment> {
    require_inputs([path])?;
    run.input(path);
    FoldAssignment::from_csv(open(path)?, seed).at(path)
}

fn by_id(stays: &[StayRecord]) -> HashMap<StayId, &StayRecord> {
    stays.iter().map(|s| (s.stay_id, s)).collect()
}

fn lookup<'a>(
    stays: &HashMap<StayId, &'a StayRecord>,
    members: &[CohortMember],
) -> CliResult<Vec<&'a StayRecord>> {
    members
        .iter()
        .map(|m| {
            stays.get(&m.stay_id).copied().ok_or_else(|| {
                CliError::Data(format!("stay {} is in the decisions but not in the input", m.stay_id))
            })
        })
        .collect()
}

pub fn kb_validate(cli: &Cli, a: &KbValidateArgs) -> CliResult<()> {
    let mut run = Run::default();
    let kb = load_kb(&mut run, &a.kb)?;
    let labs = kb.concepts().iter().filter(|c| c.kind == ConceptKind::Lab).count();
    println!(
        "ok: {} with {} concepts ({} lab, {} chart)",
        kb.version(),
        kb.len(),
        labs,
        kb.len() - labs
    );
    if let Some(out) = &a.out {
        write_text(&mut run, out, &kb.to_json())?;
        run.write(cli, &beside(out))?;
    }
    Ok(())
}

pub fn ingest(cli: &Cli, a: &IngestArgs) -> CliResult<()> {
    let mut run = Run::default();
    if a.input.normalized.is_some() {
        return Err(CliError::Usage("ingest reads CSVs; --normalized is not accepted".into()));
    }
    let paths = input_paths(&a.input);
    if paths.is_empty() {
        return Err(CliError::Usage("ingest needs --stays and --events".into()));
    }
    require_inputs(paths.iter().copied())?;
    paths.iter().for_each(|p| run.input(p));
    let ingested = ingest_paths(
        a.input.events.as_ref().unwrap(),
        a.input.stays.as_ref().unwrap(),
        a.input.icd9.as_deref(),
    )?;
    let mut w = create(&a.out)?;
    write_stays_jsonl(&mut w, &ingested.stays)?;
    w.flush().at(&a.out)?;
    run.output(&a.out);
    if let Some(path) = &a.rejects {
        let mut w = create(path)?;
        writeln!(w, "file,line,reason").at(path)?;
        for r in &ingested.rejects {
            writeln!(w, "{},{},\"{}\"", r.file, r.line, r.reason.replace('"', "\"\"")).at(path)?;
        }
        w.flush().at(path)?;
        run.output(path);
    }
    if let Some(first) = ingested.rejects.first() {
        log::warn!(
            "{} rows rejected; first at {}:{}: {}",
            ingested.rejects.len(),
            first.file,
            first.line,
            first.reason
        );
    }
    println!(
        "ingested {} stays ({} rows rejected)",
        ingested.stays.len(),
        ingested.rejects.len()
    );
    run.write(cli, &beside(&a.out))
}

pub fn cohort(cli: &Cli, a: &CohortArgs) -> CliResult<()> {
    let mut run = Run::default();
    let kb = load_kb(&mut run, &a.kb)?;
    let stays = load_stays(&mut run, &a.input)?;
    let decisions = apply_rules(&stays, &kb, &a.cohort.options());
    write_text(&mut run, &a.out, &decisions_to_csv(&decisions))?;
    let report = cohort_report(&decisions, &stays);
    if let Some(p) = &a.report {
        write_text(&mut run, p, &report.to_text())?;
    }
    if let Some(p) = &a.report_csv {
        write_text(&mut run, p, &report.to_csv())?;
    }
    println!(
        "included {} of {} stays ({} patients); {} readmitted ({:.1}%)",
        report.stays,
        decisions.len(),
        report.patients,
        report.positives,
        100.0 * report.positive_rate
    );
    run.write(cli, &beside(&a.out))
}

pub fn split(cli: &Cli, a: &SplitArgs) -> CliResult<()> {
    let mut run = Run::default();
    let decisions = load_decisions(&mut run, &a.decisions)?;
    let folds = stratified_folds(&cohort_members(&decisions), a.k, cli.seed)?;
    write_text(&mut run, &a.out, &folds.to_csv())?;
    println!("assigned {} patients to {} folds", folds.folds.len(), a.k);
    run.write(cli, &beside(&a.out))
}

pub fn abstract_cmd(cli: &Cli, a: &AbstractArgs) -> CliResult<()> {
    let mut run = Run::default();
    let kb = load_kb(&mut run, &a.kb)?;
    let mut stays = load_stays(&mut run, &a.input)?;
    if let Some(p) = &a.decisions {
        let keep: std::collections::HashSet<StayId> = load_decisions(&mut run, p)?
            .iter()
            .filter(|d| d.included)
            .map(|d| d.stay_id)
            .collect();
        stays.retain(|s| keep.contains(&s.stay_id));
    }
    let opts = a.abstraction.options();
    let lines = stays
        .par_iter()
        .map(|s| Ok(serde_json::to_string(&abstract_stay(s, &kb, &opts)?)?))
        .collect::<CliResult<Vec<String>>>()?;
    let mut w = create(&a.out)?;
    for l in &lines {
        writeln!(w, "{l}").at(&a.out)?;
    }
    w.flush().at(&a.out)?;
    run.output(&a.out);
    println!("abstracted {} stays", lines.len());
    run.write(cli, &beside(&a.out))
}

pub fn encode(cli: &Cli, a: &EncodeArgs) -> CliResult<()> {
    let mut run = Run::default();
    let kb = load_kb(&mut run, &a.kb)?;
    let stays = load_stays(&mut run, &a.input)?;
    let members = cohort_members(&load_decisions(&mut run, &a.decisions)?);
    let fit_members = match (&a.folds.folds, a.folds.test_fold) {
        (Some(p), Some(f)) => {
            let folds = load_folds(&mut run, p, cli.seed)?;
            split_members(&members, &folds, f)?.0
        }
        _ => members.clone(),
    };
    let index = by_id(&stays);
    let config = a.encoding.config(a.abstraction.options());
    let encoder = Encoder::fit(a.encoding.variant.variant(), &lookup(&index, &fit_members)?, &kb, config)?;
    let rows = lookup(&index, &members)?
        .par_iter()
        .map(|s| encoder.encode(s, &kb))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = create(&a.out)?;
    write_encoded_jsonl(&mut w, &rows)?;
    w.flush().at(&a.out)?;
    run.output(&a.out);
    write_json(&mut run, &a.encoder_out, &encoder)?;
    if let Some(p) = &a.vocab_out {
        let vocab = encoder.vocab.as_ref().ok_or_else(|| {
            CliError::Usage(format!("variant {} has no vocabulary", encoder.variant))
        })?;
        write_text(&mut run, p, &format!("{}\n", vocab.to_json()))?;
    }
    println!(
        "encoded {} stays as {} (length {}, fitted on {})",
        rows.len(),
        encoder.variant,
        encoder.length,
        fit_members.len()
    );
    run.write(cli, &beside(&a.out))
}

fn score_rows(members: &[CohortMember], scores: Vec<f64>) -> Vec<ScoreRow> {
    members
        .iter()
        .zip(scores)
        .map(|(m, score)| ScoreRow {
            stay_id: m.stay_id,
            score,
            label: u8::from(m.label),
        })
        .collect()
}

fn write_scores(run: &mut Run, path: &Path, rows: &[ScoreRow]) -> CliResult<()> {
    let mut w = create(path)?;
    write_scores_csv(&mut w, rows)?;
    w.flush().at(path)?;
    run.output(path);
    Ok(())
}

pub fn train_cmd(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    let mut run = Run::default();
    let kb = load_kb(&mut run, &a.kb)?;
    require_inputs([a.encoded.as_path(), a.encoder.as_path()])?;
    let encoder: Encoder = read_json(&mut run, &a.encoder)?;
    run.input(&a.encoded);
    let encoded = read_encoded_jsonl(open(&a.encoded)?).at(&a.encoded)?;
    let members = cohort_members(&load_decisions(&mut run, &a.decisions)?);
    let folds = load_folds(&mut run, &a.folds, cli.seed)?;
    let (tr, va, te) = split_members(&members, &folds, a.test_fold)?;

    let mut spec = FeatureSpec::for_encoder(&encoder, max_states(&kb));
    if let Some(first) = encoded.first() {
        spec.featurize(first)?;
    }
    let index: HashMap<StayId, _> = encoded.iter().map(|e| (e.stay_id, e)).collect();
    let features = |ms: &[CohortMember]| -> CliResult<Vec<Vec<f64>>> {
        ms.par_iter()
            .map(|m| {
                let e = index.get(&m.stay_id).ok_or_else(|| {
                    CliError::Data(format!("stay {} missing from {}", m.stay_id, a.encoded.display()))
                })?;
                Ok(spec.features(e)?)
            })
            .collect()
    };
    let labels = |ms: &[CohortMember]| ms.iter().map(|m| m.label).collect::<Vec<_>>();
    let train_set = Dataset::new(features(&tr)?, labels(&tr))?;
    let val_set = Dataset::new(features(&va)?, labels(&va))?;
    let test_x = features(&te)?;
    let cfg = a.train.config(cli.seed.wrapping_add(a.test_fold as u64));
    let (model, log) = train(&train_set, &val_set, spec, &cfg)?;

    write_json(&mut run, &a.out, &model)?;
    write_text(&mut run, &a.log, &log.to_csv())?;
    write_scores(&mut run, &a.val_scores, &score_rows(&va, predict(&model, &val_set.x)?))?;
    write_scores(&mut run, &a.test_scores, &score_rows(&te, predict(&model, &test_x)?))?;
    println!(
        "trained on {} stays; {} evaluations; best validation AUPRC {:.4}",
        tr.len(),
        log.entries.len(),
        log.best_auprc().unwrap_or(f64::NAN)
    );
    run.write(cli, &beside(&a.out))
}

fn report_text(r: &MetricsReport) -> String {
    let mut out = String::new();
    for (name, v) in METRIC_NAMES.iter().zip(r.metrics()) {
        out.push_str(&format!("{name:<10} {v:.4}\n"));
    }
    out.push_str(&format!("{:<10} {:.4}\n", "Threshold", r.threshold));
    out
}

fn aggregate_text(agg: &FoldAggregate, method: &str) -> String {
    format!("{}\n{}\n", FoldAggregate::table_header(), agg.table_row(method))
}

fn load_scores(run: &mut Run, path: &Path) -> CliResult<Vec<ScoreRow>> {
    require_inputs([path])?;
    run.input(path);
    read_scores_csv(open(path)?).at(path)
}

pub fn evaluate_cmd(cli: &Cli, a: &EvaluateArgs) -> CliResult<()> {
    let mut run = Run::default();
    let text = if let Some(scores) = &a.scores {
        let test = scored_set_from_rows(&load_scores(&mut run, scores)?).at(scores)?;
        let threshold = match (&a.val_scores, a.threshold) {
            (Some(v), _) => best_threshold(&scored_set_from_rows(&load_scores(&mut run, v)?).at(v)?)
                .at(v)?,
            (None, Some(t)) => t,
            (None, None) => {
                return Err(CliError::Usage(
                    "evaluate --scores needs --val-scores or --threshold".into(),
                ))
            }
        };
        let report = evaluate(&test, threshold).at(scores)?;
        write_json(&mut run, &a.out, &report)?;
        report_text(&report)
    } else if !a.reports.is_empty() {
        require_inputs(a.reports.iter().map(PathBuf::as_path))?;
        let reports = a
            .reports
            .iter()
            .map(|p| read_json::<MetricsReport>(&mut run, p))
            .collect::<CliResult<Vec<_>>>()?;
        let agg = aggregate_folds(&reports)?;
        write_json(&mut run, &a.out, &agg)?;
        aggregate_text(&agg, &a.method)
    } else {
        return Err(CliError::Usage("evaluate needs --scores or --reports".into()));
    };
    print!("{text}");
    if let Some(p) = &a.text {
        write_text(&mut run, p, &text)?;
    }
    run.write(cli, &beside(&a.out))
}

/// A single report, or a fold aggregate reduced to its means.
fn load_report(path: &Path) -> CliResult<MetricsReport> {
    require_inputs([path])?;
    let value: serde_json::Value = serde_json::from_reader(open(path)?).at(path)?;
    if let Ok(r) = serde_json::from_value::<MetricsReport>(value.clone()) {
        return Ok(r);
    }
    let agg: FoldAggregate = serde_json::from_value(value)
        .map_err(|_| CliError::Data(format!("{}: not a metrics report", path.display())))?;
    Ok(MetricsReport {
        auroc: agg.auroc.mean,
        auprc: agg.auprc.mean,
        f1: agg.f1.mean,
        precision: agg.precision.mean,
        recall: agg.recall.mean,
        threshold: f64::NAN,
    })
}

pub fn compare(_cli: &Cli, a: &CompareArgs) -> CliResult<()> {
    let (ra, rb) = (load_report(&a.a)?, load_report(&a.b)?);
    println!("{}", conclusively_better(&ra, &rb).as_str());
    Ok(())
}

#[derive(Deserialize)]
struct NoteLine {
    stay_id: StayId,
    chunk_probs: Vec<f64>,
    #[serde(default)]
    label: Option<u8>,
}

pub fn aggregate_notes(cli: &Cli, a: &AggregateNotesArgs) -> CliResult<()> {
    use std::io::BufRead;
    let mut run = Run::default();
    require_inputs([a.input.as_path()])?;
    run.input(&a.input);
    let labels: BTreeMap<StayId, bool> = match &a.decisions {
        Some(p) => load_decisions(&mut run, p)?
            .iter()
            .filter_map(|d| d.label.map(|l| (d.stay_id, l)))
            .collect(),
        None => BTreeMap::new(),
    };
    let mut out = String::from("stay_id,score,label\n");
    let mut n = 0;
    for (i, line) in open(&a.input)?.lines().enumerate() {
        let line = line.at(&a.input)?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", a.input.display(), i + 1);
        let note: NoteLine =
            serde_json::from_str(&line).map_err(|e| CliError::Data(format!("{}: {e}", loc())))?;
        let score = aggregate_note_scores(&note.chunk_probs)
            .map_err(|e| CliError::Data(format!("{}: {e}", loc())))?;
        let label = labels
            .get(&note.stay_id)
            .map(|&l| u8::from(l))
            .or(note.label)
            .map(|l| l.to_string())
            .unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", note.stay_id, score, label));
        n += 1;
    }
    write_text(&mut run, &a.out, &out)?;
    println!("scored {n} notes");
    run.write(cli, &beside(&a.out))
}

pub fn synth(cli: &Cli, a: &SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        n_patients: a.n_patients,
        positive_rate: a.positive_rate,
        theta: a.theta,
        seed: cli.seed,
        exclusion_rate: a.exclusion_rate,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let kb = builtin_readmission_kb();
    let data = generate(&cfg, &kb)?;
    data.write_csvs(&a.out_dir).at(&a.out_dir)?;
    let mut run = Run {
        kb_version: Some(kb.version().to_string()),
        ..Default::default()
    };
    for f in ["events.csv", "stays.csv", "icd9.csv", "labels.csv"] {
        run.output(&a.out_dir.join(f));
    }
    let positives = data.labels.iter().filter(|(_, l)| *l).count();
    println!(
        "generated {} patients, {} stays, {} positive index stays",
        a.n_patients,
        data.stays.len(),
        positives
    );
    run.write(cli, &a.out_dir.join("manifest.json"))
}

pub fn pipeline(cli: &Cli, a: &PipelineArgs) -> CliResult<()> {
    let mut run = Run::default();
    let kb = load_kb(&mut run, &a.kb)?;
    let stays = load_stays(&mut run, &a.input)?;
    let cfg = PipelineConfig {
        cohort: a.cohort.options(),
        encoder: a.encoding.config(a.abstraction.options()),
        variant: a.encoding.variant.variant(),
        train: a.train.config(cli.seed),
        k: a.k,
        seed: cli.seed,
    };
    let result = run_pipeline(&stays, &kb, &cfg)?;
    let dir = &a.out_dir;
    write_text(&mut run, &dir.join("decisions.csv"), &decisions_to_csv(&result.decisions))?;
    write_text(&mut run, &dir.join("folds.csv"), &result.folds.to_csv())?;
    let report = cohort_report(&result.decisions, &stays);
    write_text(&mut run, &dir.join("cohort_report.txt"), &report.to_text())?;
    write_text(&mut run, &dir.join("cohort_report.csv"), &report.to_csv())?;
    for r in &result.fold_results {
        let fd = dir.join(format!("fold_{}", r.fold));
        write_json(&mut run, &fd.join("model.json"), &r.model)?;
        write_text(&mut run, &fd.join("train_log.csv"), &r.log.to_csv())?;
        write_scores(&mut run, &fd.join("test_scores.csv"), &r.test_scores)?;
        write_json(&mut run, &fd.join("report.json"), &r.report)?;
    }
    write_json(&mut run, &dir.join("aggregate.json"), &result.aggregate)?;
    let text = aggregate_text(&result.aggregate, cfg.variant.as_str());
    write_text(&mut run, &dir.join("aggregate.txt"), &text)?;
    print!("{text}");
    run.write(cli, &dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_text_lists_all_metrics() {
        let r = MetricsReport {
            auroc: 0.75,
            auprc: 0.5,
            f1: 0.4,
            precision: 0.3,
            recall: 0.6,
            threshold: 0.25,
        };
        let t = report_text(&r);
        assert_eq!(t.lines().count(), 6);
        assert!(t.starts_with("AUROC      0.7500\nF1         0.4000\n"));
    }

    #[test]
    fn fold_aggregate_reduces_to_means_for_compare() {
        let dir = tempfile::tempdir().unwrap();
        let reports: Vec<MetricsReport> = [0.6, 0.8]
            .iter()
            .map(|&v| MetricsReport {
                auroc: v,
                auprc: v,
                f1: v,
                precision: v,
                recall: v,
                threshold: 0.5,
            })
            .collect();
        let p = dir.path().join("agg.json");
        std::fs::write(&p, serde_json::to_string(&aggregate_folds(&reports).unwrap()).unwrap())
            .unwrap();
        let r = load_report(&p).unwrap();
        assert!((r.auroc - 0.7).abs() < 1e-12);
        assert!(r.threshold.is_nan());
    }
}
