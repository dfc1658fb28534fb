//! Evaluation harness: per-stage matching-score tables, the BDA vs
//! naive-threshold binarizer comparison, and verification timing.
//!
//! Genuine pairs use leave-one-out within each class (enroll on r-1
//! samples, probe with the held-out one) so scores are not training-set
//! resubstitution. Scoring metrics: cosine similarity for the feature and
//! cancelable stages, Hamming similarity for the binary stage, accept rate
//! for the full pipeline. Published absolute matching scores and
//! milliseconds are context, not targets; only table shapes and the
//! genuine-vs-impostor direction are reproduced.

use std::time::Instant;

use crate::bda;
use crate::bits::BinaryTemplate;
use crate::error::{Error, Result};
use crate::ingestion::Dataset;
use crate::linalg::{self, CancelableTemplate, FeatureVector};
use crate::pipeline::{self, EnrollmentRecord, SystemConfig};

pub const STAGE_CSV_HEADER: &str = "stage,genuine_mean,impostor_mean,count";

#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    pub stage: String,
    pub genuine_mean: f64,
    pub impostor_mean: f64,
    /// genuine pair count + impostor pair count backing the means.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Table rows for the BDA pipeline: feature_vector, cancelable,
    /// binary, full.
    pub stages: Vec<StageRow>,
    /// Binary-stage row for the naive-threshold baseline binarizer.
    pub baseline_binary: StageRow,
    pub genuine_trials: usize,
    pub impostor_trials: usize,
    pub false_rejects: usize,
    pub false_accepts: usize,
}

impl EvalReport {
    pub fn frr(&self) -> f64 {
        self.false_rejects as f64 / self.genuine_trials as f64
    }

    pub fn far(&self) -> f64 {
        self.false_accepts as f64 / self.impostor_trials as f64
    }

    pub fn bda_margin(&self) -> f64 {
        let row = self.stages.iter().find(|r| r.stage == "binary").unwrap();
        row.genuine_mean - row.impostor_mean
    }

    pub fn baseline_margin(&self) -> f64 {
        self.baseline_binary.genuine_mean - self.baseline_binary.impostor_mean
    }

    pub fn to_stage_csv(&self) -> String {
        let mut out = String::from(STAGE_CSV_HEADER);
        out.push('\n');
        for r in &self.stages {
            out.push_str(&format!("{},{},{},{}\n", r.stage, r.genuine_mean, r.impostor_mean, r.count));
        }
        out
    }

    pub fn to_comparison_csv(&self) -> String {
        let bda_row = self.stages.iter().find(|r| r.stage == "binary").unwrap();
        let mut out = String::from("binarizer,genuine_mean,impostor_mean,margin\n");
        out.push_str(&format!(
            "bda,{},{},{}\n",
            bda_row.genuine_mean,
            bda_row.impostor_mean,
            self.bda_margin()
        ));
        out.push_str(&format!(
            "baseline,{},{},{}\n",
            self.baseline_binary.genuine_mean,
            self.baseline_binary.impostor_mean,
            self.baseline_margin()
        ));
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>14} {:>14} {:>8}\n",
            "stage", "genuine_mean", "impostor_mean", "count"
        ));
        for r in &self.stages {
            out.push_str(&format!(
                "{:<16} {:>14.4} {:>14.4} {:>8}\n",
                r.stage, r.genuine_mean, r.impostor_mean, r.count
            ));
        }
        out.push_str(&format!(
            "{:<16} {:>14.4} {:>14.4} {:>8}  (baseline binarizer)\n",
            "binary", self.baseline_binary.genuine_mean, self.baseline_binary.impostor_mean,
            self.baseline_binary.count
        ));
        out.push_str(&format!(
            "FRR = {:.4} ({}/{}), FAR = {:.4} ({}/{})\n",
            self.frr(),
            self.false_rejects,
            self.genuine_trials,
            self.far(),
            self.false_accepts,
            self.impostor_trials
        ));
        out
    }
}

/// Parse the stage CSV back; used by the test suite for round-trip checks.
pub fn parse_stage_csv(text: &str) -> Result<Vec<StageRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == STAGE_CSV_HEADER => {}
        other => return Err(Error::Parse { row: 1, msg: format!("bad header {other:?}") }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse { row: i + 2, msg: "expected 4 fields".into() });
        }
        let parse_f = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse { row: i + 2, msg: format!("bad float {s:?}") })
        };
        rows.push(StageRow {
            stage: parts[0].to_string(),
            genuine_mean: parse_f(parts[1])?,
            impostor_mean: parse_f(parts[2])?,
            count: parts[3]
                .parse()
                .map_err(|_| Error::Parse { row: i + 2, msg: format!("bad count {:?}", parts[3]) })?,
        });
    }
    Ok(rows)
}

struct Accumulator {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl Accumulator {
    fn new() -> Self {
        Self { genuine: Vec::new(), impostor: Vec::new() }
    }

    fn row(&self, stage: &str) -> StageRow {
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        StageRow {
            stage: stage.to_string(),
            genuine_mean: mean(&self.genuine),
            impostor_mean: mean(&self.impostor),
            count: self.genuine.len() + self.impostor.len(),
        }
    }
}

/// Run the full evaluation in the system-wide multi-class mode: one shared
/// projection and BDA model per leave-one-out round, per-user commitments.
/// `impostor_limit` caps full-pipeline impostor trials (0 = unlimited).
pub fn run_eval(
    dataset: &Dataset,
    config: &SystemConfig,
    master_seed: u64,
    impostor_limit: usize,
) -> Result<EvalReport> {
    config.validate()?;
    if dataset.k() < 2 {
        return Err(Error::Structural("evaluation requires k >= 2 classes".into()));
    }
    if dataset.l() != config.l {
        return Err(Error::Dimension { what: "dataset vector", expected: config.l, actual: dataset.l() });
    }
    if config.n > config.l_r {
        // the naive-threshold baseline reads one coordinate per bit
        return Err(Error::Dimension { what: "evaluation n", expected: config.l_r, actual: config.n });
    }
    let min_r = dataset.classes().iter().map(|g| g.samples.len()).min().unwrap();
    if min_r < 2 {
        return Err(Error::Structural("evaluation requires r >= 2 samples per class".into()));
    }

    let mut feature = Accumulator::new();
    let mut cancelable = Accumulator::new();
    let mut binary = Accumulator::new();
    let mut baseline = Accumulator::new();
    let mut full = Accumulator::new();
    let mut false_rejects = 0usize;
    let mut false_accepts = 0usize;

    let mut eval_config = config.clone();
    eval_config.multi_class = true;

    for holdout in 0..min_r {
        // training split: every sample except index `holdout` in each class
        let train: Vec<Vec<FeatureVector>> = dataset
            .classes()
            .iter()
            .map(|g| {
                g.samples
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != holdout)
                    .map(|(_, s)| s.clone())
                    .collect()
            })
            .collect();
        let probes: Vec<&FeatureVector> =
            dataset.classes().iter().map(|g| &g.samples[holdout]).collect();

        let shared = pipeline::train_shared_model(&train, &eval_config, master_seed)?;
        let matrix =
            linalg::generate_projection_matrix(shared.projection_seed, config.l, config.l_r)?;

        // per-class projections, references and records
        let mut projected_train: Vec<Vec<CancelableTemplate>> = Vec::with_capacity(train.len());
        let mut records: Vec<EnrollmentRecord> = Vec::with_capacity(train.len());
        let mut bda_refs: Vec<BinaryTemplate> = Vec::with_capacity(train.len());
        let mut base_refs: Vec<BinaryTemplate> = Vec::with_capacity(train.len());
        for (c, group) in train.iter().enumerate() {
            let proj: Vec<CancelableTemplate> =
                group.iter().map(|s| linalg::project(s, &matrix)).collect::<Result<_>>()?;
            let key_seed = pipeline::derive_seeds(master_seed ^ (c as u64 + 1)).key;
            let record = pipeline::enroll_with_model(
                &dataset.classes()[c].label,
                &proj,
                &eval_config,
                shared.projection_seed,
                shared.model.clone(),
                key_seed,
            )?;
            let bin: Vec<BinaryTemplate> =
                proj.iter().map(|p| bda::binarize(p, &shared.model)).collect::<Result<_>>()?;
            bda_refs.push(pipeline::majority_reference(&bin)?);
            let base: Vec<BinaryTemplate> =
                proj.iter().map(|p| bda::baseline_binarize(p, config.n)).collect::<Result<_>>()?;
            base_refs.push(pipeline::majority_reference(&base)?);
            projected_train.push(proj);
            records.push(record);
        }

        for (pc, probe) in probes.iter().enumerate() {
            let probe_proj = linalg::project(probe, &matrix)?;
            let probe_bin = bda::binarize(&probe_proj, &shared.model)?;
            let probe_base = bda::baseline_binarize(&probe_proj, config.n)?;
            for (rc, record) in records.iter().enumerate() {
                let genuine = pc == rc;
                // feature / cancelable scores: mean cosine vs the class's
                // training samples
                let feat_scores: Vec<f64> = train[rc]
                    .iter()
                    .map(|s| linalg::cosine_similarity(probe.values(), s.values()))
                    .collect::<Result<_>>()?;
                let canc_scores: Vec<f64> = projected_train[rc]
                    .iter()
                    .map(|p| linalg::cosine_similarity(probe_proj.values(), p.values()))
                    .collect::<Result<_>>()?;
                let feat = feat_scores.iter().sum::<f64>() / feat_scores.len() as f64;
                let canc = canc_scores.iter().sum::<f64>() / canc_scores.len() as f64;
                let bin = bda::hamming_similarity(&probe_bin, &bda_refs[rc])? as f64;
                let base = bda::hamming_similarity(&probe_base, &base_refs[rc])? as f64;

                if genuine {
                    feature.genuine.push(feat);
                    cancelable.genuine.push(canc);
                    binary.genuine.push(bin);
                    baseline.genuine.push(base);
                    let decision = pipeline::authenticate_with_mode(probe, record, true)?;
                    full.genuine.push(f64::from(decision.accepted));
                    if !decision.accepted {
                        false_rejects += 1;
                    }
                } else {
                    feature.impostor.push(feat);
                    cancelable.impostor.push(canc);
                    binary.impostor.push(bin);
                    baseline.impostor.push(base);
                    if impostor_limit == 0 || full.impostor.len() < impostor_limit {
                        let decision = pipeline::authenticate_with_mode(probe, record, true)?;
                        full.impostor.push(f64::from(decision.accepted));
                        if decision.accepted {
                            false_accepts += 1;
                        }
                    }
                }
            }
        }
    }

    let stages = vec![
        feature.row("feature_vector"),
        cancelable.row("cancelable"),
        binary.row("binary"),
        full.row("full"),
    ];
    Ok(EvalReport {
        stages,
        baseline_binary: baseline.row("binary_baseline"),
        genuine_trials: full.genuine.len(),
        impostor_trials: full.impostor.len(),
        false_rejects,
        false_accepts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub repetitions: usize,
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("dataset,mean_ms,stddev_ms,repetitions\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.dataset, r.mean_ms, r.stddev_ms, r.repetitions));
    }
    out
}

/// Wall-clock mean/stddev of one verification (projection + binarize +
/// commitment check) over `repetitions` runs against an enrolled record.
pub fn run_bench(
    name: &str,
    dataset: &Dataset,
    config: &SystemConfig,
    master_seed: u64,
    repetitions: usize,
) -> Result<BenchRow> {
    if repetitions < 3 {
        return Err(Error::Domain("bench needs at least 3 repetitions".into()));
    }
    let group = &dataset.classes()[0];
    if group.samples.len() < 2 {
        return Err(Error::Structural("bench class needs r >= 2 samples".into()));
    }
    let record = pipeline::enroll(&group.label, &group.samples, config, master_seed)?;
    let probe = &group.samples[0];
    // warm-up
    pipeline::authenticate(probe, &record)?;
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let _ = pipeline::authenticate(probe, &record)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / times.len() as f64;
    Ok(BenchRow { dataset: name.to_string(), mean_ms: mean, stddev_ms: var.sqrt(), repetitions })
}
