use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EmbedderChoice, ExperimentConfig};
use super::manifest::{Manifest, ManifestRow, Split};
use super::{io_error, CliError};
use crate::augment::{augment_set, rotate, AugmentConfig};
use crate::embed::{
    read_embeddings, write_embeddings, BaselineEmbedder, EmbeddingSet, EmbeddingSource,
};
use crate::metrics::{
    paired_t_test, run_statistics, RunSeries, TTestResult, VerificationReport,
};
use crate::numfmt::sig9;
use crate::preprocess::{preprocess, PreprocessConfig};
use crate::raster::{load_image, load_mask, save_image};
use crate::verify::{generate_pairs, score_all, split_scores, write_score_file, DistanceMetric, MetricKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFailure {
    pub id: String,
    pub error: String,
}

/// Result of a per-row stage: the manifest of rows that succeeded (also
/// written to `<out_dir>/manifest.csv`) and the rows that did not.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub failures: Vec<RowFailure>,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

fn file_name(path: &str) -> String {
    Path::new(path)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Output names are derived from image file names, which therefore must not
/// collide within one stage.
fn check_unique_names<'a>(
    rows: impl Iterator<Item = &'a ManifestRow>,
    name: impl Fn(&str) -> String,
) -> Result<(), CliError> {
    let mut seen: HashMap<String, &str> = HashMap::new();
    for r in rows {
        if let Some(prev) = seen.insert(name(&r.image_path), &r.id) {
            return Err(CliError::Manifest(format!(
                "rows {prev:?} and {:?} share the output name {:?}",
                r.id,
                name(&r.image_path)
            )));
        }
    }
    Ok(())
}

fn finish_stage(
    out_dir: &Path,
    results: Vec<Result<Vec<ManifestRow>, RowFailure>>,
) -> Result<StageOutcome, CliError> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(mut out) => rows.append(&mut out),
            Err(f) => failures.push(f),
        }
    }
    let manifest = Manifest::new(out_dir, rows)?;
    let manifest_path = out_dir.join("manifest.csv");
    manifest.save(&manifest_path)?;
    Ok(StageOutcome {
        manifest_path,
        manifest,
        failures,
    })
}

/// Preprocesses every row into `<out_dir>/<stem>__<scheme>.png`.
pub fn cmd_preprocess(
    manifest: &Manifest,
    config: &PreprocessConfig,
    out_dir: &Path,
) -> Result<StageOutcome, CliError> {
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    create_dir(out_dir)?;
    check_unique_names(manifest.rows().iter(), file_stem)?;
    let scheme = config.scheme_name();

    let results: Vec<_> = manifest
        .rows()
        .par_iter()
        .map(|row| {
            let fail = |error: String| RowFailure {
                id: row.id.clone(),
                error,
            };
            let mask_path = manifest
                .mask_path(row)
                .ok_or_else(|| fail("no mask path".into()))?;
            let image = load_image(manifest.image_path(row)).map_err(|e| fail(e.to_string()))?;
            let mask = load_mask(&mask_path).map_err(|e| fail(e.to_string()))?;
            let out = preprocess(&image, &mask, config).map_err(|e| fail(e.to_string()))?;
            let name = format!("{}__{}.png", file_stem(&row.image_path), scheme);
            save_image(&out, out_dir.join(&name)).map_err(|e| fail(e.to_string()))?;
            Ok(vec![ManifestRow {
                image_path: name,
                mask_path: String::new(),
                ..row.clone()
            }])
        })
        .collect();
    finish_stage(out_dir, results)
}

/// Runs the six standard schemes, one output directory per scheme.
pub fn cmd_preprocess_sweep(
    manifest: &Manifest,
    out_dir: &Path,
    final_size: usize,
) -> Result<Vec<(String, StageOutcome)>, CliError> {
    PreprocessConfig::standard_schemes()
        .into_iter()
        .map(|mut cfg| {
            cfg.final_size = final_size;
            let name = cfg.scheme_name();
            let outcome = cmd_preprocess(manifest, &cfg, &out_dir.join(&name))?;
            Ok((name, outcome))
        })
        .collect()
}

/// Expands train rows by rotation; test rows are copied through unchanged.
pub fn cmd_augment(
    manifest: &Manifest,
    config: &AugmentConfig,
    out_dir: &Path,
) -> Result<StageOutcome, CliError> {
    let train: Vec<(usize, String)> = manifest
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split == Split::Train)
        .map(|(i, r)| (i, r.class_label.clone()))
        .collect();
    let plan = augment_set(&train, config)?;
    create_dir(out_dir)?;
    check_unique_names(manifest.rows().iter(), file_name)?;
    check_unique_names(manifest.rows().iter(), file_stem)?;

    let mut per_row: HashMap<usize, Vec<f64>> = HashMap::new();
    for entry in plan.chunks(config.expansion_factor()).flatten() {
        per_row.entry(entry.item).or_default().push(entry.angle_deg);
    }

    let results: Vec<_> = manifest
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let fail = |error: String| RowFailure {
                id: row.id.clone(),
                error,
            };
            let src = manifest.image_path(row);
            let copy_name = file_name(&row.image_path);
            std::fs::copy(&src, out_dir.join(&copy_name))
                .map_err(|e| fail(format!("{}: {e}", src.display())))?;
            let original = ManifestRow {
                image_path: copy_name,
                mask_path: String::new(),
                ..row.clone()
            };
            let Some(angles) = per_row.get(&i) else {
                return Ok(vec![original]);
            };
            let image = load_image(&src).map_err(|e| fail(e.to_string()))?;
            let mut out = Vec::with_capacity(angles.len());
            for &angle in angles {
                if angle == 0.0 {
                    out.push(original.clone());
                    continue;
                }
                let tag = sig9(angle);
                let name = format!("{}__rot{}.png", file_stem(&row.image_path), tag);
                save_image(&rotate(&image, angle), out_dir.join(&name))
                    .map_err(|e| fail(e.to_string()))?;
                out.push(ManifestRow {
                    id: format!("{}@rot{}", row.id, tag),
                    image_path: name,
                    mask_path: String::new(),
                    angle_deg: row.angle_deg + angle,
                    ..row.clone()
                });
            }
            Ok(out)
        })
        .collect();
    finish_stage(out_dir, results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedOptions {
    /// Input size expected by the baseline embedder.
    pub size: usize,
    pub l2_normalize: bool,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            size: crate::preprocess::DEFAULT_FINAL_SIZE,
            l2_normalize: false,
        }
    }
}

/// One embedding per manifest row, in manifest order, written in `EMB v1`
/// format. External embeddings must cover every manifest id; the manifest's
/// class labels are used.
pub fn cmd_embed(
    manifest: &Manifest,
    embedder: &EmbedderChoice,
    out_path: &Path,
    options: EmbedOptions,
) -> Result<(EmbeddingSet, Vec<RowFailure>), CliError> {
    let (mut entries, failures, dim, source) = match embedder {
        EmbedderChoice::Baseline => {
            let emb = BaselineEmbedder::new(options.size)?;
            let results: Vec<_> = manifest
                .rows()
                .par_iter()
                .map(|row| {
                    load_image(manifest.image_path(row))
                        .map_err(|e| e.to_string())
                        .and_then(|img| {
                            emb.embed(row.id.clone(), row.class_label.clone(), &img)
                                .map_err(|e| e.to_string())
                        })
                        .map_err(|error| RowFailure {
                            id: row.id.clone(),
                            error,
                        })
                })
                .collect();
            let (ok, failed): (Vec<_>, Vec<_>) = results.into_iter().partition(Result::is_ok);
            (
                ok.into_iter().map(Result::unwrap).collect::<Vec<_>>(),
                failed.into_iter().map(|r| r.unwrap_err()).collect::<Vec<_>>(),
                emb.dim(),
                EmbeddingSource::Baseline,
            )
        }
        EmbedderChoice::External { path } => {
            let ext = read_embeddings(path)?;
            let dim = ext.dim();
            let mut by_id: HashMap<String, _> = ext
                .into_entries()
                .into_iter()
                .map(|e| (e.id.clone(), e))
                .collect();
            let missing: Vec<&str> = manifest
                .rows()
                .iter()
                .filter(|r| !by_id.contains_key(&r.id))
                .map(|r| r.id.as_str())
                .collect();
            if !missing.is_empty() {
                return Err(CliError::Evaluate(format!(
                    "external embeddings {} lack ids: {}",
                    path.display(),
                    missing.join(", ")
                )));
            }
            let entries = manifest
                .rows()
                .iter()
                .map(|r| {
                    let mut e = by_id.remove(&r.id).expect("coverage checked");
                    e.class_label = r.class_label.clone();
                    e
                })
                .collect();
            (entries, Vec::new(), dim, EmbeddingSource::ExternalFile)
        }
    };
    if options.l2_normalize {
        entries.iter_mut().for_each(|e| e.l2_normalize());
    }
    let set = EmbeddingSet::new(dim, entries, source)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_embeddings(&set, out_path)?;
    Ok((set, failures))
}

/// All-against-all evaluation. Writes `report.json`, `scores.csv` and
/// `det.csv` into `out_dir`.
pub fn cmd_evaluate(
    embeddings: &EmbeddingSet,
    metric: MetricKind,
    scheme: &str,
    out_dir: &Path,
) -> Result<VerificationReport, CliError> {
    if embeddings.len() < 2 {
        return Err(CliError::Evaluate(format!(
            "need at least 2 embeddings, got {}",
            embeddings.len()
        )));
    }
    let labels: Vec<(&str, &str)> = embeddings
        .entries()
        .iter()
        .map(|e| (e.id.as_str(), e.class_label.as_str()))
        .collect();
    let protocol = generate_pairs(&labels)?;
    if protocol.inter_count() == 0 {
        return Err(CliError::Evaluate("no impostor pairs (single class)".into()));
    }
    if protocol.intra_count() == 0 {
        return Err(CliError::Evaluate("no genuine pairs (every class has one sample)".into()));
    }
    let distance = DistanceMetric::for_set(metric, embeddings)?;
    let scores = score_all(&protocol, embeddings, &distance)?;
    let report = VerificationReport::from_scores(&split_scores(&protocol, &scores, metric), scheme)?;

    create_dir(out_dir)?;
    write_score_file(out_dir.join("scores.csv"), &protocol, &scores, metric)?;
    let json = serde_json::to_string(&report).expect("report serializes");
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, json + "\n").map_err(|e| io_error(&report_path, e))?;
    let det_path = out_dir.join("det.csv");
    std::fs::write(&det_path, report.det_csv()).map_err(|e| io_error(&det_path, e))?;
    Ok(report)
}

pub fn cmd_evaluate_file(
    embeddings: &Path,
    metric: MetricKind,
    scheme: &str,
    out_dir: &Path,
) -> Result<VerificationReport, CliError> {
    let set = read_embeddings(embeddings)?;
    cmd_evaluate(&set, metric, scheme, out_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// `mean±std`, EER in percent.
    pub display: String,
}

impl SeriesSummary {
    fn new(name: &str, values: Vec<f64>, scale: f64, decimals: usize) -> Result<Self, CliError> {
        let stats = run_statistics(&RunSeries::new(name, values.clone()))?;
        Ok(Self {
            values,
            mean: stats.mean,
            std: stats.std,
            display: stats.format(scale, decimals),
        })
    }
}

/// Aggregate over all runs of one pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub scheme: String,
    pub metric: String,
    pub embedder: String,
    pub augment: Option<AugmentConfig>,
    pub runs: usize,
    pub seed: u64,
    pub genuine_count: usize,
    pub impostor_count: usize,
    pub eer: SeriesSummary,
    pub decidability: SeriesSummary,
}

impl PipelineReport {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: not a pipeline report: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: PipelineReport,
    pub report_path: PathBuf,
    pub failures: Vec<RowFailure>,
}

fn with_noise(set: &EmbeddingSet, sigma: f64, seed: u64) -> Result<EmbeddingSet, CliError> {
    if sigma == 0.0 {
        return Ok(set.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| CliError::Config(e.to_string()))?;
    let mut entries = set.entries().to_vec();
    for e in &mut entries {
        for v in &mut e.values {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(EmbeddingSet::new(set.dim(), entries, set.source())?)
}

/// preprocess -> augment (train rows) -> embed -> evaluate (test rows),
/// repeated `config.runs` times with seed `config.seed + run`.
///
/// Layout under `out_dir`: `preprocessed/`, `augmented/`, `embeddings.emb`,
/// `run_NNN/{report.json,scores.csv,det.csv}` and the aggregate `report.json`.
pub fn cmd_pipeline(
    config: &ExperimentConfig,
    manifest: &Manifest,
    out_dir: &Path,
) -> Result<PipelineOutcome, CliError> {
    config.validate()?;
    let metric = config.metric_kind()?;
    create_dir(out_dir)?;
    let mut failures = Vec::new();

    let pre = cmd_preprocess(manifest, &config.preprocess, &out_dir.join("preprocessed"))
        .map_err(|e| e.in_stage("preprocess"))?;
    failures.extend(pre.failures);
    let mut current = pre.manifest;

    if let Some(aug) = &config.augment {
        let out = cmd_augment(&current, aug, &out_dir.join("augmented"))
            .map_err(|e| e.in_stage("augment"))?;
        failures.extend(out.failures);
        current = out.manifest;
    }

    let options = EmbedOptions {
        size: config.preprocess.final_size,
        l2_normalize: config.l2_normalize,
    };
    let emb_path = out_dir.join("embeddings.emb");
    let (_, embed_failures) =
        cmd_embed(&current, &config.embedder, &emb_path, options).map_err(|e| e.in_stage("embed"))?;
    failures.extend(embed_failures);
    // score what was written, so the run matches `embed` followed by `evaluate`
    let all = read_embeddings(&emb_path)
        .map_err(|e| CliError::from(e).in_stage("embed"))?;

    let test_ids: HashSet<&str> = current
        .rows()
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| r.id.as_str())
        .collect();
    let test_entries = all
        .entries()
        .iter()
        .filter(|e| test_ids.contains(e.id.as_str()))
        .cloned()
        .collect();
    let test = EmbeddingSet::new(all.dim(), test_entries, all.source())?;

    let scheme = config.preprocess.scheme_name();
    let mut eers = Vec::with_capacity(config.runs);
    let mut dprimes = Vec::with_capacity(config.runs);
    let mut counts = (0, 0);
    for run in 0..config.runs {
        let seed = config.seed.wrapping_add(run as u64);
        let set = with_noise(&test, config.embedding_noise, seed)?;
        let report = cmd_evaluate(&set, metric, &scheme, &out_dir.join(format!("run_{run:03}")))
            .map_err(|e| e.in_stage("evaluate"))?;
        eers.push(report.eer);
        dprimes.push(report.decidability);
        counts = (report.genuine_count, report.impostor_count);
    }

    let report = PipelineReport {
        scheme,
        metric: metric.name().to_string(),
        embedder: match &config.embedder {
            EmbedderChoice::Baseline => "baseline".to_string(),
            EmbedderChoice::External { .. } => "external".to_string(),
        },
        augment: config.augment,
        runs: config.runs,
        seed: config.seed,
        genuine_count: counts.0,
        impostor_count: counts.1,
        eer: SeriesSummary::new("eer", eers, 100.0, 2)?,
        decidability: SeriesSummary::new("decidability", dprimes, 1.0, 4)?,
    };
    let report_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&report_path, json + "\n").map_err(|e| io_error(&report_path, e))?;
    Ok(PipelineOutcome {
        report,
        report_path,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub scheme: String,
    pub eer: String,
    pub decidability: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub quantity: String,
    #[serde(flatten)]
    pub result: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub rows: Vec<ComparisonRow>,
    pub tests: Vec<PairwiseTest>,
}

impl ComparisonReport {
    /// Plain-text table; `*` marks tests significant at `alpha`.
    pub fn render(&self) -> String {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<w$}  {:<16}  {:>14}  {:>16}\n", "name", "scheme", "EER (%)", "decidability");
        for r in &self.rows {
            out.push_str(&format!("{:<w$}  {:<16}  {:>14}  {:>16}\n", r.name, r.scheme, r.eer, r.decidability));
        }
        out.push_str(&format!("\npaired t-tests (alpha = {})\n", self.alpha));
        for t in &self.tests {
            out.push_str(&format!(
                "{} vs {} [{}]: t = {:.4}, df = {}, p = {:.4}{}\n",
                t.a,
                t.b,
                t.quantity,
                t.result.t,
                t.result.df,
                t.result.p,
                if t.result.significant { " *" } else { "" }
            ));
        }
        out
    }
}

/// Mean±std per report and paired t-tests on the EER and decidability
/// series for every pair of reports.
pub fn cmd_compare(reports: &[PathBuf], alpha: f64) -> Result<ComparisonReport, CliError> {
    if reports.len() < 2 {
        return Err(CliError::Config("compare needs at least 2 reports".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let loaded: Vec<(String, PipelineReport)> = reports
        .iter()
        .map(|p| Ok((p.display().to_string(), PipelineReport::load(p)?)))
        .collect::<Result<_, CliError>>()?;
    let runs = loaded[0].1.eer.values.len();
    if let Some((name, r)) = loaded.iter().find(|(_, r)| r.eer.values.len() != runs || r.decidability.values.len() != runs) {
        return Err(CliError::Config(format!(
            "mismatched run counts: {name} has {} runs, expected {runs}",
            r.eer.values.len()
        )));
    }

    let rows = loaded
        .iter()
        .map(|(name, r)| ComparisonRow {
            name: name.clone(),
            scheme: r.scheme.clone(),
            eer: r.eer.display.clone(),
            decidability: r.decidability.display.clone(),
        })
        .collect();
    let mut tests = Vec::new();
    for i in 0..loaded.len() {
        for j in i + 1..loaded.len() {
            let (na, ra) = &loaded[i];
            let (nb, rb) = &loaded[j];
            for (quantity, sa, sb) in [
                ("eer", &ra.eer, &rb.eer),
                ("decidability", &ra.decidability, &rb.decidability),
            ] {
                let result = paired_t_test(
                    &RunSeries::new(na.as_str(), sa.values.clone()),
                    &RunSeries::new(nb.as_str(), sb.values.clone()),
                    alpha,
                )
                .map_err(|e| CliError::Evaluate(format!("{na} vs {nb} ({quantity}): {e}")))?;
                tests.push(PairwiseTest {
                    a: na.clone(),
                    b: nb.clone(),
                    quantity: quantity.to_string(),
                    result,
                });
            }
        }
    }
    Ok(ComparisonReport { alpha, rows, tests })
}
