//! Batch driver: blob matching, spatial filtering, model fitting and
//! evaluation over image pairs stored on disk.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blob::{blob_match, BlobConfig};
use crate::distance::DistanceMatrix;
use crate::dtm::{dtm, DtmConfig, Stage};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, all_pairs_correct_count, classify, normalized_correct_count, score_labels, Aggregate, ApMode,
    EvalReport, GroundTruth, Method, Tolerances,
};
use crate::io::{self, PairFile};
use crate::keypoint::PairContext;
use crate::matches::MatchSet;
use crate::model::{one_sac, Model, ModelKind, DEFAULT_INLIER_THRESHOLD};

/// Spatial filter applied to the blob matches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FilterConfig {
    #[default]
    None,
    /// DTM without the regrowth stage.
    Dtm1,
    /// DTM with the stage taken from the `dtm` section.
    Dtm,
    /// Keep matches scoring at most `t`.
    Threshold { t: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    #[default]
    None,
    #[serde(rename = "1sac")]
    OneSac {
        kind: ModelKind,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_INLIER_THRESHOLD
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub method: Method,
    pub tolerances: Tolerances,
    pub ap_mode: ApMode,
    /// Also score recall against every keypoint pair.
    pub recall_star: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            method: Method::D,
            tolerances: Tolerances::default(),
            ap_mode: ApMode::Rank,
            recall_star: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub blob: BlobConfig,
    pub filter: FilterConfig,
    pub dtm: DtmConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    /// Pair manifests, relative to the config file.
    pub pairs: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    /// Pairs processed concurrently.
    pub workers: usize,
    /// Write the match set of every stage next to the final one.
    pub dump_stages: bool,
    /// Also write a CSV table of per-pair metrics.
    pub table: bool,
    /// Seed of the synthetic generator.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            blob: BlobConfig::best(),
            filter: FilterConfig::Dtm,
            dtm: DtmConfig::default(),
            model: ModelConfig::None,
            eval: EvalConfig::default(),
            pairs: Vec::new(),
            output: None,
            workers: 1,
            dump_stages: true,
            table: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a config and resolves its paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.pairs {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(out) = &mut cfg.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        cfg.validate().map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.blob.validate()?;
        self.eval.tolerances.validate()?;
        if self.workers == 0 {
            return Err(Error::invalid("workers must be >= 1"));
        }
        if let FilterConfig::Threshold { t } = self.filter {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("filter threshold must be in [0, 1]"));
            }
        }
        if let ModelConfig::OneSac { threshold, .. } = self.model {
            if !(threshold > 0.0 && threshold.is_finite()) {
                return Err(Error::invalid("1SAC threshold must be positive"));
            }
        }
        Ok(())
    }
}

/// One image pair loaded in memory.
#[derive(Clone, Debug)]
pub struct PairInput {
    pub name: String,
    pub ctx: PairContext,
    pub distances: DistanceMatrix,
    pub ground_truth: Option<GroundTruth>,
}

impl PairInput {
    /// Loads the pair described by a manifest. The name is the manifest's
    /// stem, or its directory name for a file called `pair.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let pf: PairFile = io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let ctx = pf.load_context(base)?;
        let distances = io::read_distances(&pf.resolve(base, &pf.distances))?;
        ctx.check_shape(distances.rows(), distances.cols())?;
        let ground_truth = pf
            .ground_truth
            .as_ref()
            .map(|g| io::read_ground_truth(&pf.resolve(base, g)))
            .transpose()?;
        Ok(PairInput {
            name: pair_name(path),
            ctx,
            distances,
            ground_truth,
        })
    }
}

fn pair_name(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pair");
    if stem == "pair" {
        if let Some(dir) = path
            .canonicalize()
            .ok()
            .and_then(|p| p.parent().and_then(|d| d.file_name()).map(|n| n.to_string_lossy().into_owned()))
        {
            return dir;
        }
    }
    stem.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub values: [f64; 9],
}

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        ModelFile {
            kind: m.kind(),
            values: m.to_array(),
        }
    }
}

/// Every stage output of one pair.
#[derive(Clone, Debug)]
pub struct PairResult {
    pub name: String,
    pub blob: MatchSet,
    pub filtered: MatchSet,
    pub fitted: MatchSet,
    pub model: Option<Model>,
    /// Whether 1SAC failed, when it ran.
    pub fit_failed: Option<bool>,
    pub report: Option<EvalReport>,
}

impl PairResult {
    pub fn output(&self) -> &MatchSet {
        &self.fitted
    }
}

/// Applies the configured spatial filter.
pub fn apply_filter(matches: &MatchSet, ctx: &PairContext, cfg: &PipelineConfig) -> Result<MatchSet> {
    match cfg.filter {
        FilterConfig::None => Ok(matches.clone()),
        FilterConfig::Threshold { t } => Ok(matches.filtered(|_, m| m.score <= t)),
        FilterConfig::Dtm1 => dtm(
            matches,
            ctx,
            &DtmConfig {
                stage: Stage::Dtm1Only,
                ..cfg.dtm
            },
        ),
        FilterConfig::Dtm => dtm(matches, ctx, &cfg.dtm),
    }
}

/// Runs the configured model fit. Returns the kept matches, the model and
/// the failure flag.
pub fn apply_model(
    matches: &MatchSet,
    ctx: &PairContext,
    cfg: &PipelineConfig,
) -> Result<(MatchSet, Option<Model>, Option<bool>)> {
    match cfg.model {
        ModelConfig::None => Ok((matches.clone(), None, None)),
        ModelConfig::OneSac { kind, threshold } => {
            let r = one_sac(matches, kind, ctx, threshold)?;
            Ok((r.matches, r.model, Some(r.failed)))
        }
    }
}

/// Scores `output` with the blob output as recall universe.
pub fn evaluate(
    output: &MatchSet,
    blob: &MatchSet,
    gt: &GroundTruth,
    ctx: &PairContext,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let tol = &cfg.tolerances;
    tol.validate()?;
    let label = |set: &MatchSet| {
        set.iter()
            .map(|m| classify(gt, m, ctx, cfg.method, tol))
            .collect::<Result<Vec<bool>>>()
    };
    let labels = label(output)?;
    let blob_labels = label(blob)?;
    let universe = normalized_correct_count(blob.iter().zip(&blob_labels).filter(|(_, &c)| c).map(|(m, _)| m));
    let star = cfg
        .recall_star
        .then(|| all_pairs_correct_count(gt, ctx, cfg.method, tol))
        .transpose()?;
    score_labels(output, &labels, Some(universe), star, cfg.ap_mode)
}

/// Runs every stage on one pair.
pub fn run_pair(input: &PairInput, cfg: &PipelineConfig) -> Result<PairResult> {
    input.ctx.check_shape(input.distances.rows(), input.distances.cols())?;
    let blob = blob_match(&input.distances, &input.ctx, &cfg.blob)?;
    let filtered = apply_filter(&blob, &input.ctx, cfg)?;
    let (fitted, model, fit_failed) = apply_model(&filtered, &input.ctx, cfg)?;
    let report = input
        .ground_truth
        .as_ref()
        .map(|gt| evaluate(&fitted, &blob, gt, &input.ctx, &cfg.eval))
        .transpose()?;
    Ok(PairResult {
        name: input.name.clone(),
        blob,
        filtered,
        fitted,
        model,
        fit_failed,
        report,
    })
}

/// Writes the match files, model and metrics of one pair into `dir`.
pub fn write_pair(dir: &Path, result: &PairResult, cfg: &PipelineConfig) -> Result<()> {
    if cfg.dump_stages {
        io::write_matches(&dir.join("blob.csv"), &result.blob)?;
        io::write_matches(&dir.join("filtered.csv"), &result.filtered)?;
    }
    io::write_matches(&dir.join("matches.csv"), result.output())?;
    if let Some(m) = &result.model {
        io::write_json(&dir.join("model.json"), &ModelFile::from(m))?;
    }
    if let Some(r) = &result.report {
        io::write_json(&dir.join("metrics.json"), r)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub name: String,
    pub output_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_failed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub pairs: Vec<PairSummary>,
    /// Over the pairs with ground truth.
    pub aggregate: Option<Aggregate>,
}

/// Processes pairs with up to `cfg.workers` threads. Results keep the
/// input order.
pub fn run_batch(inputs: &[PairInput], cfg: &PipelineConfig) -> Result<Vec<PairResult>> {
    cfg.validate()?;
    let mut seen = HashSet::new();
    for p in inputs {
        if !seen.insert(p.name.as_str()) {
            return Err(Error::invalid(format!("duplicate pair name '{}'", p.name)));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| inputs.par_iter().map(|p| run_pair(p, cfg)).collect())
}

pub fn summarize(results: &[PairResult]) -> BatchSummary {
    let reports: Vec<EvalReport> = results.iter().filter_map(|r| r.report.clone()).collect();
    BatchSummary {
        pairs: results
            .iter()
            .map(|r| PairSummary {
                name: r.name.clone(),
                output_count: r.output().len(),
                fit_failed: r.fit_failed,
                report: r.report.clone(),
            })
            .collect(),
        aggregate: (!reports.is_empty()).then(|| aggregate(&reports)),
    }
}

fn table_csv(summary: &BatchSummary) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(format!("cannot write table: {e}"));
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    w.write_record(["pair", "output", "correct", "precision", "recall", "recall_star", "ap", "failed"])
        .map_err(fail)?;
    for p in &summary.pairs {
        let Some(r) = &p.report else {
            continue;
        };
        w.write_record([
            p.name.clone(),
            r.output_count.to_string(),
            r.correct_count.to_string(),
            opt(r.precision),
            opt(r.recall),
            opt(r.recall_star),
            r.average_precision.to_string(),
            r.failed.to_string(),
        ])
        .map_err(fail)?;
    }
    if let Some(a) = &summary.aggregate {
        w.write_record([
            "mean".to_string(),
            opt(a.mean_output_count),
            String::new(),
            opt(a.mean_precision),
            opt(a.mean_recall),
            opt(a.mean_recall_star),
            opt(a.mean_average_precision),
            a.failures.to_string(),
        ])
        .map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::invalid(format!("cannot write table: {e}")))
}

/// Loads the configured pairs.
pub fn load_pairs(cfg: &PipelineConfig) -> Result<Vec<PairInput>> {
    if cfg.pairs.is_empty() {
        return Err(Error::invalid("no pairs configured"));
    }
    cfg.pairs.iter().map(|p| PairInput::load(p)).collect()
}

/// Notes on checks that will be skipped for `input`.
pub fn warnings(input: &PairInput, cfg: &EvalConfig) -> Vec<String> {
    match (&input.ground_truth, cfg.method) {
        (Some(GroundTruth::Fundamental { masks: None, .. }), Method::D) => {
            vec![format!("{}: no admissible-region masks, region check skipped", input.name)]
        }
        _ => Vec::new(),
    }
}

/// Writes one directory per pair plus `summary.json` and, if asked,
/// `table.csv` below `out`.
pub fn write_outputs(out: &Path, results: &[PairResult], cfg: &PipelineConfig) -> Result<BatchSummary> {
    for r in results {
        write_pair(&out.join(&r.name), r, cfg)?;
    }
    let summary = summarize(results);
    io::write_json(&out.join("summary.json"), &summary)?;
    if cfg.table {
        io::write_atomic(&out.join("table.csv"), &table_csv(&summary)?)?;
    }
    Ok(summary)
}

/// Loads, runs and writes the configured pairs.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<BatchSummary> {
    cfg.validate()?;
    let inputs = load_pairs(cfg)?;
    let results = run_batch(&inputs, cfg)?;
    write_outputs(out, &results, cfg)
}

/// Writes a synthetic pair in the on-disk layout read by [`PairInput::load`]
/// and returns the manifest path.
pub fn write_synth(pair: &crate::synth::SynthPair, dir: &Path) -> Result<PathBuf> {
    io::write_keypoints(&dir.join("keypoints1.csv"), &pair.ctx.keypoints1)?;
    io::write_keypoints(&dir.join("keypoints2.csv"), &pair.ctx.keypoints2)?;
    io::write_distances_binary(&dir.join("distances.ctxd"), &pair.distances)?;
    io::write_ground_truth(&dir.join("gt.json"), &pair.ground_truth)?;
    io::write_json(&dir.join("manifest.json"), &pair.manifest)?;
    let pf = PairFile {
        width1: pair.ctx.width1,
        height1: pair.ctx.height1,
        width2: pair.ctx.width2,
        height2: pair.ctx.height2,
        keypoints1: "keypoints1.csv".into(),
        keypoints2: "keypoints2.csv".into(),
        distances: "distances.ctxd".into(),
        ground_truth: Some("gt.json".into()),
    };
    let path = dir.join("pair.json");
    io::write_json(&path, &pf)?;
    Ok(path)
}
