//! The subcommands, as library functions writing into an output directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use sdrnn::data::{
    generate_cohort, read_cohort, split_patients, summarize, write_cohort, CohortSummary, EncodedPatient, GenConfig,
    LabEncoding, PatientRecord, Preprocessor, Split, UnknownTokenPolicy, Vocabulary, LABEL_NAMES,
};
use sdrnn::metrics::{aggregate_splits, evaluate, pooled_set, render_table, write_curves, EvalReport, SplitScores, TableRow, GROUPS};
use sdrnn::model::{init_params, Arch, Model, ModelDims, NUM_LABELS};
use sdrnn::numerics::{finite_diff_check_terms, Activation, GradCheckReport, ParamTensors, Rng, DEFAULT_STEP};
use sdrnn::train::{fit, grid_search, predict_all, FitOutcome, TrainConfig};
use sdrnn::{Error, Result};

use crate::checkpoint::Checkpoint;
use crate::manifest::RunManifest;

pub const COHORT_FILE: &str = "cohort.jsonl";
pub const VOCAB_FILE: &str = "vocab.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Fractions of patients in the training, validation and test parts.
pub const SPLIT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Number of repeated splits in the benchmark protocol.
pub const BENCHMARK_SPLITS: usize = 5;

/// Largest relative gradient error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn read_cohort_file(path: &Path) -> Result<Vec<PatientRecord>> {
    read_cohort(BufReader::new(File::open(path)?))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// The patient split used by `train` and `evaluate` for `seed`; benchmark
/// split `j` with base seed `s` equals the split for seed `s + j`.
pub fn protocol_split(n: usize, seed: u64) -> Result<Split> {
    split_patients(n, SPLIT_FRACTIONS, &mut Rng::new(seed).fork("split"))
}

fn ids(patients: &[PatientRecord]) -> Vec<String> {
    patients.iter().map(|p| p.patient_id.clone()).collect()
}

pub struct Prepared {
    pub preprocessor: Preprocessor,
    pub train: Vec<EncodedPatient>,
    pub validation: Vec<EncodedPatient>,
    pub test: Vec<EncodedPatient>,
}

/// Fits preprocessing on the training part and encodes all three parts.
pub fn prepare(patients: &[PatientRecord], vocab: &Vocabulary, split: &Split, encoding: LabEncoding) -> Result<Prepared> {
    let pick = |ix: &[usize]| ix.iter().map(|&i| &patients[i]).collect::<Vec<_>>();
    let preprocessor = Preprocessor::fit(&pick(&split.train), vocab, encoding, UnknownTokenPolicy::Reject)?;
    Ok(Prepared {
        train: preprocessor.encode_all(&pick(&split.train))?,
        validation: preprocessor.encode_all(&pick(&split.validation))?,
        test: preprocessor.encode_all(&pick(&split.test))?,
        preprocessor,
    })
}

fn encoding_of(degraded: bool) -> LabEncoding {
    if degraded {
        LabEncoding::Imputed
    } else {
        LabEncoding::ThreeBucket
    }
}

/// Generates a cohort and its vocabulary into `out`.
pub fn synth(cfg: &GenConfig, seed: u64, out: &Path) -> Result<CohortSummary> {
    let start = Instant::now();
    let (patients, vocab) = generate_cohort(cfg, seed)?;
    ensure_dir(out)?;
    let mut w = std::io::BufWriter::new(File::create(out.join(COHORT_FILE))?);
    write_cohort(&mut w, &patients)?;
    w.flush()?;
    vocab.write(&out.join(VOCAB_FILE))?;
    let summary = summarize(&patients);
    std::fs::write(out.join("summary.txt"), summary_text(&summary))?;
    let mut m = RunManifest::new("synth");
    m.add_config("gen.", &cfg.to_text());
    m.seeds.push(seed);
    m.time("total", start);
    m.finish(out)?;
    Ok(summary)
}

pub fn summary_text(s: &CohortSummary) -> String {
    format!(
        "target_density = {:.6}\nendpoint_patient_fraction = {:.6}\nmean_visits = {:.3}\nevaluable_fraction = {:.6}\n",
        s.target_density, s.endpoint_patient_fraction, s.mean_visits, s.evaluable_fraction
    )
}

pub struct TrainInputs<'a> {
    pub cohort: &'a Path,
    pub vocab: &'a Path,
    pub arch: Arch,
    pub config: TrainConfig,
    /// Configurations searched instead of `config` when present.
    pub grid: Option<Vec<TrainConfig>>,
    pub seed: u64,
    pub degraded: bool,
}

fn fit_or_search(arch: Arch, data: &Prepared, cfg: &TrainConfig, grid: Option<&[TrainConfig]>) -> Result<(FitOutcome, TrainConfig)> {
    match grid {
        Some(grid) if arch.is_trainable() => {
            let g = grid_search(arch, &data.train, &data.validation, grid)?;
            Ok((g.fit, g.best))
        }
        _ => Ok((fit(arch, &data.train, &data.validation, cfg)?, cfg.clone())),
    }
}

fn seeded(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.clone() }
}

/// Splits, preprocesses and fits one model; writes the checkpoint, the
/// training history and a manifest.
pub fn train(inputs: &TrainInputs<'_>, out: &Path) -> Result<Checkpoint> {
    let start = Instant::now();
    let patients = read_cohort_file(inputs.cohort)?;
    let vocab = Vocabulary::read(inputs.vocab)?;
    let split = protocol_split(patients.len(), inputs.seed)?;
    let data = prepare(&patients, &vocab, &split, encoding_of(inputs.degraded))?;
    let cfg = seeded(&inputs.config, inputs.seed);
    let grid: Option<Vec<TrainConfig>> = inputs.grid.as_ref().map(|g| g.iter().map(|c| seeded(c, inputs.seed)).collect());
    let (outcome, chosen) = fit_or_search(inputs.arch, &data, &cfg, grid.as_deref())?;

    ensure_dir(out)?;
    let checkpoint = Checkpoint { model: outcome.model, preprocessor: data.preprocessor, config: chosen };
    checkpoint.write(&out.join(CHECKPOINT_FILE))?;
    let h = &outcome.history;
    let mut history = String::from("epoch\ttrain_loss\tvalidation_auprc\n");
    for (e, (loss, score)) in h.train_loss.iter().zip(&h.validation_auprc).enumerate() {
        let score = score.map_or_else(|| "NA".into(), |s| s.to_string());
        writeln!(history, "{e}\t{loss}\t{score}").unwrap();
    }
    std::fs::write(out.join("history.tsv"), history)?;

    let mut m = RunManifest::new("train");
    m.add_input(inputs.cohort)?;
    m.add_input(inputs.vocab)?;
    m.set("arch", inputs.arch);
    m.set("lab_encoding", checkpoint.preprocessor.encoding.name());
    m.set("split_digest", split.digest(&ids(&patients)));
    m.set("best_epoch", h.best_epoch.map_or_else(|| "none".into(), |e| e.to_string()));
    m.add_config("train.", &checkpoint.config.to_text());
    m.seeds.push(inputs.seed);
    m.time("total", start);
    m.finish(out)?;
    Ok(checkpoint)
}

fn check_vocab(checkpoint: &Checkpoint, vocab: Option<&Path>) -> Result<()> {
    let Some(path) = vocab else { return Ok(()) };
    let given = Vocabulary::read(path)?;
    let own = &checkpoint.preprocessor.vocab;
    if given.dynamic_width() != own.dynamic_width() {
        return Err(Error::dim("cohort vocabulary dynamic width", own.dynamic_width(), given.dynamic_width()));
    }
    if given.static_width() != own.static_width() {
        return Err(Error::dim("cohort vocabulary static width", own.static_width(), given.static_width()));
    }
    if &given != own {
        return Err(Error::Validation("cohort vocabulary differs from the checkpoint vocabulary".into()));
    }
    Ok(())
}

/// Per-group report table of one or more splits.
pub fn group_table(report: &EvalReport) -> String {
    let rows: Vec<TableRow<'_>> = GROUPS
        .iter()
        .enumerate()
        .map(|(g, name)| TableRow { name: name.to_string(), auprc: &report.auprc[g], auroc: &report.auroc[g] })
        .collect();
    render_table("group", &rows)
}

/// Scores a checkpoint on the test part of the split for `seed`.
pub fn evaluate_checkpoint(checkpoint_path: &Path, cohort: &Path, vocab: Option<&Path>, seed: u64, out: &Path) -> Result<SplitScores> {
    let start = Instant::now();
    let checkpoint = Checkpoint::read(checkpoint_path)?;
    check_vocab(&checkpoint, vocab)?;
    let patients = read_cohort_file(cohort)?;
    let split = protocol_split(patients.len(), seed)?;
    let test: Vec<&PatientRecord> = split.test.iter().map(|&i| &patients[i]).collect();
    let encoded = checkpoint.preprocessor.encode_all(&test)?;
    let preds = predict_all(&checkpoint.model, &encoded)?;
    let scores = evaluate(&preds)?;

    ensure_dir(out)?;
    std::fs::write(out.join("report.tsv"), group_table(&aggregate_splits(std::slice::from_ref(&scores))?))?;
    let (s, y) = pooled_set(&preds);
    if y.iter().any(|&v| v) {
        write_curves(out, "pooled", &s, &y)?;
    }
    let mut m = RunManifest::new("evaluate");
    m.add_input(checkpoint_path)?;
    m.add_input(cohort)?;
    if let Some(v) = vocab {
        m.add_input(v)?;
    }
    m.set("split_digest", split.digest(&ids(&patients)));
    m.seeds.push(seed);
    m.time("total", start);
    m.finish(out)?;
    Ok(scores)
}

/// Writes one row per visit: patient id, visit index and the label probabilities.
pub fn predict(checkpoint_path: &Path, cohort: &Path, out: &Path) -> Result<usize> {
    let start = Instant::now();
    let checkpoint = Checkpoint::read(checkpoint_path)?;
    let patients = read_cohort_file(cohort)?;
    let refs: Vec<&PatientRecord> = patients.iter().collect();
    let encoded = checkpoint.preprocessor.encode_all(&refs)?;
    let preds = predict_all(&checkpoint.model, &encoded)?;
    ensure_dir(out)?;
    let mut text = format!("patient_id\tvisit_index\t{}\n", LABEL_NAMES.join("\t"));
    for p in &preds {
        let probs: Vec<String> = p.probs.iter().map(|v| v.to_string()).collect();
        writeln!(text, "{}\t{}\t{}", p.patient_id, p.visit, probs.join("\t")).unwrap();
    }
    std::fs::write(out.join("predictions.tsv"), text)?;
    let mut m = RunManifest::new("predict");
    m.add_input(checkpoint_path)?;
    m.add_input(cohort)?;
    m.time("total", start);
    m.finish(out)?;
    Ok(preds.len())
}

pub struct BenchmarkInputs<'a> {
    pub cohort: &'a Path,
    pub vocab: &'a Path,
    pub archs: Vec<Arch>,
    pub config: TrainConfig,
    pub grid: Option<Vec<TrainConfig>>,
    pub splits: usize,
    pub seed: u64,
    pub degraded: bool,
}

#[derive(Clone, Debug)]
pub struct BenchmarkOutcome {
    /// One report per model, in input order.
    pub reports: Vec<(Arch, EvalReport)>,
    /// Split digest used by each model for each split: `[split][model]`.
    pub digests: Vec<Vec<String>>,
}

/// `model | AUPRC | AUROC` with `mean ± SE` cells.
pub fn comparison_table(reports: &[(Arch, EvalReport)]) -> String {
    let mut out = String::from("model\tAUPRC\tAUROC\n");
    for (arch, r) in reports {
        let (p, a) = r.pooled();
        writeln!(out, "{}\t{}\t{}", arch.display_name(), p.display(), a.display()).unwrap();
    }
    out
}

/// `model | endpoint | AUPRC | AUROC` for every label column.
pub fn endpoint_table(reports: &[(Arch, EvalReport)]) -> String {
    let mut out = String::from("model\tendpoint\tAUPRC\tAUROC\n");
    for (arch, r) in reports {
        for (g, name) in GROUPS.iter().enumerate().skip(1) {
            writeln!(out, "{}\t{}\t{}\t{}", arch.display_name(), name, r.auprc[g].display(), r.auroc[g].display()).unwrap();
        }
    }
    out
}

fn score_cells(s: &SplitScores) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"));
    let mut cells = vec![f(s.pooled.auprc), f(s.pooled.auroc)];
    for l in &s.per_label {
        cells.push(f(l.auprc));
        cells.push(f(l.auroc));
    }
    cells.join("\t")
}

/// Trains every model on each of `splits` shared patient splits and
/// aggregates the test scores. Per-split results are appended to
/// `results.tsv` as they complete, so a failure keeps finished work.
pub fn benchmark(inputs: &BenchmarkInputs<'_>, out: &Path) -> Result<BenchmarkOutcome> {
    if inputs.archs.is_empty() {
        return Err(Error::config("arch", "benchmark needs at least one model"));
    }
    if inputs.splits == 0 {
        return Err(Error::config("splits", "must be positive"));
    }
    let start = Instant::now();
    let patients = read_cohort_file(inputs.cohort)?;
    let vocab = Vocabulary::read(inputs.vocab)?;
    let all_ids = ids(&patients);
    let index: HashMap<&str, usize> = all_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    ensure_dir(out)?;

    let results_path = out.join("results.tsv");
    let mut header = String::from("split\tseed\tmodel\tpooled_auprc\tpooled_auroc");
    for l in LABEL_NAMES {
        write!(header, "\t{l}_auprc\t{l}_auroc").unwrap();
    }
    std::fs::write(&results_path, header + "\n")?;
    let mut splits_text = String::from("split\tseed\tdigest\ttrain\tvalidation\ttest\n");

    let mut per_model: Vec<Vec<SplitScores>> = vec![Vec::new(); inputs.archs.len()];
    let mut digests = Vec::new();
    for j in 0..inputs.splits {
        let seed = inputs.seed + j as u64;
        let split = protocol_split(patients.len(), seed)?;
        let digest = split.digest(&all_ids);
        writeln!(splits_text, "{j}\t{seed}\t{digest}\t{}\t{}\t{}", split.train.len(), split.validation.len(), split.test.len()).unwrap();
        std::fs::write(out.join("splits.tsv"), &splits_text)?;
        let data = prepare(&patients, &vocab, &split, encoding_of(inputs.degraded))?;
        let cfg = seeded(&inputs.config, seed);
        let grid: Option<Vec<TrainConfig>> = inputs.grid.as_ref().map(|g| g.iter().map(|c| seeded(c, seed)).collect());
        let mut row = Vec::new();
        for (k, &arch) in inputs.archs.iter().enumerate() {
            let positions = |part: &[EncodedPatient]| part.iter().map(|p| index[p.id.as_str()]).collect();
            let used = Split {
                train: positions(&data.train),
                validation: positions(&data.validation),
                test: positions(&data.test),
            };
            row.push(used.digest(&all_ids));
            let (outcome, _) = fit_or_search(arch, &data, &cfg, grid.as_deref())?;
            let scores = evaluate(&predict_all(&outcome.model, &data.test)?)?;
            let mut f = OpenOptions::new().append(true).open(&results_path)?;
            writeln!(f, "{j}\t{seed}\t{}\t{}", arch.name(), score_cells(&scores))?;
            log::info!("split {j}: {} pooled AUROC {:?}", arch.name(), scores.pooled.auroc);
            per_model[k].push(scores);
        }
        if row.iter().any(|d| d != &digest) {
            return Err(Error::Split(format!("models saw different patients in split {j}")));
        }
        digests.push(row);
    }

    let reports: Vec<(Arch, EvalReport)> = inputs
        .archs
        .iter()
        .zip(&per_model)
        .map(|(&a, s)| Ok((a, aggregate_splits(s)?)))
        .collect::<Result<_>>()?;
    std::fs::write(out.join("table.tsv"), comparison_table(&reports))?;
    std::fs::write(out.join("endpoints.tsv"), endpoint_table(&reports))?;
    let rows: Vec<TableRow<'_>> = reports
        .iter()
        .map(|(a, r)| TableRow { name: a.display_name().into(), auprc: &r.auprc[0], auroc: &r.auroc[0] })
        .collect();
    std::fs::write(out.join("table_numeric.tsv"), render_table("model", &rows))?;

    let mut m = RunManifest::new("benchmark");
    m.add_input(inputs.cohort)?;
    m.add_input(inputs.vocab)?;
    m.set("models", inputs.archs.iter().map(|a| a.name()).collect::<Vec<_>>().join(","));
    m.set("splits", inputs.splits);
    m.set("lab_encoding", encoding_of(inputs.degraded).name());
    m.set("grid_points", inputs.grid.as_ref().map_or(0, Vec::len));
    m.add_config("train.", &inputs.config.to_text());
    m.seeds = (0..inputs.splits as u64).map(|j| inputs.seed + j).collect();
    m.time("total", start);
    m.finish(out)?;
    Ok(BenchmarkOutcome { reports, digests })
}

/// Dimensions used by `gradcheck`.
pub fn gradcheck_dims() -> ModelDims {
    ModelDims { static_dim: 5, dynamic_dim: 9, labels: NUM_LABELS, rank: 3, hidden: 4, window: 3 }
}

/// Random patient with real static features, binary visits and a random
/// evaluability mask.
pub fn gradcheck_patient(dims: &ModelDims, visits: usize, rng: &mut Rng) -> EncodedPatient {
    let static_features = (0..dims.static_dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mut visit_vecs = Vec::new();
    let mut targets = Vec::new();
    let mut mask = Vec::new();
    for _ in 0..visits {
        visit_vecs.push((0..dims.dynamic_dim).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect());
        targets.push((0..dims.labels).map(|_| if rng.bernoulli(0.3) { 1.0 } else { 0.0 }).collect());
        mask.push((0..dims.labels).map(|_| rng.bernoulli(0.9)).collect());
    }
    EncodedPatient { id: "gradcheck".into(), static_features, visits: visit_vecs, targets, mask }
}

/// Central-difference check of one architecture at small dimensions.
/// `inject_fault` corrupts one analytic gradient entry.
pub fn gradcheck(arch: Arch, activation: Activation, seed: u64, inject_fault: bool) -> Result<GradCheckReport> {
    let dims = gradcheck_dims();
    let mut rng = Rng::new(seed).fork("gradcheck").fork(arch.name());
    let mut model: Model = init_params(arch, &dims, activation, &mut rng);
    for t in model.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.uniform_range(-0.5, 0.5);
        }
    }
    let patient = gradcheck_patient(&dims, 8, &mut rng);
    model.loss_terms(&patient)?;
    let (_, mut grad) = model.loss_and_grad(&patient, None)?;
    if inject_fault {
        if let Some(t) = grad.tensors_mut().into_iter().next() {
            t[0] += 0.1;
        }
    }
    finite_diff_check_terms(|m: &Model| m.loss_terms(&patient).expect("shapes checked above"), &model, &grad, DEFAULT_STEP)
}

pub fn gradcheck_text(results: &[(Arch, GradCheckReport)]) -> String {
    let mut out = String::from("arch\ttensor\tmax_rel_error\tworst_index\n");
    for (arch, r) in results {
        for t in &r.tensors {
            writeln!(out, "{}\t{}\t{:.3e}\t{}", arch.name(), t.name, t.max_rel_error, t.worst_index).unwrap();
        }
    }
    out
}

/// Paths of a synthesized cohort directory.
pub fn cohort_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(COHORT_FILE), dir.join(VOCAB_FILE))
}
