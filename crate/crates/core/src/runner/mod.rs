//! Experiment orchestration: one config and one master seed drive benchmark
//! generation, training of all eight model variants, prediction, evaluation,
//! significance grids, and report emission, in that stage order.
//!
//! Every product on disk is byte-determined by (config, master seed). Each
//! stage directory carries a marker with the config fingerprint: rerunning
//! over an existing tree loads stages whose marker matches and refuses ones
//! that don't, so partial trees resume instead of silently mixing configs.
//!
//! Seed plan: every stage derives a child seed from the master seed and a
//! label ("benchmark", "train/{model}", "mc/{model}/{set}",
//! "bootstrap/{metric}"), and row/pass/iteration streams derive from the
//! child seed plus an index. No stage consumes another stage's stream.

mod evaluate;
mod predict;
mod report;

pub use evaluate::{write_results_table, AuxReport, EvaluateProducts, GRID_METRICS};
pub use predict::{
    load_predictions_csv, predict_rows, write_predictions_csv, PredictionRow, PREDICTION_SETS,
};
pub use report::{compare_reports, ExperimentReport};

use crate::error::{Error, Result};
use crate::heads::{HeadKind, HeadSpec};
use crate::mcinfer::DEFAULT_MC_PASSES;
use crate::net::{train, ModelSpec, TrainConfig, TrainedModel};
use crate::seed::{child_seed, rng_from};
use crate::synthlab::{
    generate_benchmark, load_benchmark, load_samples_csv, save_benchmark,
    simulate_fine_ratings, write_samples_csv, Benchmark, BenchmarkConfig, DomainShiftSpec,
    LatentSample, RaterPanel,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ORDSCORE_OUT";

/// The eight model variants, in table and grid order.
pub const MODEL_ORDER: [&str; 8] = [
    "multi_class",
    "mc_multi_class",
    "ordinal",
    "mc_ordinal",
    "regression",
    "mc_regression",
    "siamese",
    "mc_siamese",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseHead {
    MultiClass,
    Ordinal,
    Regression,
    Siamese,
}

/// One roster entry: a head plus whether inference is Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelVariant {
    pub name: &'static str,
    pub base: BaseHead,
    pub mc: bool,
}

pub fn model_roster() -> Vec<ModelVariant> {
    use BaseHead::*;
    vec![
        ModelVariant { name: "multi_class", base: MultiClass, mc: false },
        ModelVariant { name: "mc_multi_class", base: MultiClass, mc: true },
        ModelVariant { name: "ordinal", base: Ordinal, mc: false },
        ModelVariant { name: "mc_ordinal", base: Ordinal, mc: true },
        ModelVariant { name: "regression", base: Regression, mc: false },
        ModelVariant { name: "mc_regression", base: Regression, mc: true },
        ModelVariant { name: "siamese", base: Siamese, mc: false },
        ModelVariant { name: "mc_siamese", base: Siamese, mc: true },
    ]
}

/// Optimization settings for one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub balanced_sampling: bool,
    pub hidden_widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    pub multi_class: HeadTrainConfig,
    pub ordinal: HeadTrainConfig,
    pub regression: HeadTrainConfig,
    pub siamese: HeadTrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiameseSettings {
    pub embed_dim: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_anchor_count")]
    pub anchor_count: usize,
}

fn default_margin() -> f64 {
    crate::heads::DEFAULT_MARGIN
}
fn default_anchor_count() -> usize {
    crate::heads::DEFAULT_ANCHOR_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default = "default_mc_passes")]
    pub n_passes: usize,
}

fn default_mc_passes() -> usize {
    DEFAULT_MC_PASSES
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { n_passes: DEFAULT_MC_PASSES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClinicalSplitConfig {
    /// Lowest class counted as clinically positive.
    pub first_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub shift: DomainShiftSpec,
    pub models: ModelsConfig,
    pub siamese: SiameseSettings,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default = "default_mc_dropout_rate")]
    pub mc_dropout_rate: f64,
    pub clinical_split: ClinicalSplitConfig,
    #[serde(default = "default_bootstrap_iterations")]
    pub bootstrap_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub master_seed: u64,
}

fn default_mc_dropout_rate() -> f64 {
    0.2
}
fn default_bootstrap_iterations() -> usize {
    500
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.benchmark.validate()?;
        self.shift.validate(self.benchmark.classes)?;
        for (name, head) in [
            ("multi_class", &self.models.multi_class),
            ("ordinal", &self.models.ordinal),
            ("regression", &self.models.regression),
            ("siamese", &self.models.siamese),
        ] {
            if !(head.learning_rate > 0.0 && head.learning_rate.is_finite()) {
                return Err(Error::Config(format!("{name}: learning_rate must be positive")));
            }
            if head.batch_size == 0 {
                return Err(Error::Config(format!("{name}: batch_size must be at least 1")));
            }
        }
        if self.siamese.embed_dim == 0 {
            return Err(Error::Config("siamese embed_dim must be at least 1".into()));
        }
        if !(self.siamese.margin > 0.0 && self.siamese.margin.is_finite()) {
            return Err(Error::Config("siamese margin must be positive".into()));
        }
        if self.siamese.anchor_count == 0 {
            return Err(Error::Config("siamese anchor_count must be at least 1".into()));
        }
        if self.mc.n_passes == 0 {
            return Err(Error::Config("mc.n_passes must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.mc_dropout_rate) {
            return Err(Error::Config("mc_dropout_rate must be in [0, 1)".into()));
        }
        if self.bootstrap_iterations == 0 {
            return Err(Error::Config("bootstrap_iterations must be at least 1".into()));
        }
        self.clinical_split()?;
        Ok(())
    }

    pub fn clinical_split(&self) -> Result<crate::eval::ClinicalSplit> {
        crate::eval::ClinicalSplit::upper(
            self.benchmark.classes,
            self.clinical_split.first_positive,
        )
    }

    pub fn head_spec(&self, base: BaseHead) -> HeadSpec {
        let k = self.benchmark.classes;
        match base {
            BaseHead::MultiClass => HeadSpec::multi_class(k),
            BaseHead::Ordinal => HeadSpec::ordinal(k),
            BaseHead::Regression => HeadSpec::regression(k),
            BaseHead::Siamese => HeadSpec {
                kind: HeadKind::Siamese {
                    embed_dim: self.siamese.embed_dim,
                    margin: self.siamese.margin,
                    anchor_count: self.siamese.anchor_count,
                },
                classes: k,
            },
        }
    }

    fn head_train(&self, base: BaseHead) -> &HeadTrainConfig {
        match base {
            BaseHead::MultiClass => &self.models.multi_class,
            BaseHead::Ordinal => &self.models.ordinal,
            BaseHead::Regression => &self.models.regression,
            BaseHead::Siamese => &self.models.siamese,
        }
    }

    /// Network and optimizer settings for one roster entry. Plain variants
    /// train without dropout; MC variants train with `mc_dropout_rate` and
    /// keep it active at inference.
    pub fn model_spec(&self, variant: &ModelVariant) -> (ModelSpec, TrainConfig) {
        let head_train = self.head_train(variant.base);
        let spec = ModelSpec {
            head: self.head_spec(variant.base),
            hidden_widths: head_train.hidden_widths.clone(),
            dropout_rate: if variant.mc { self.mc_dropout_rate } else { 0.0 },
        };
        let cfg = TrainConfig {
            learning_rate: head_train.learning_rate,
            epochs: head_train.epochs,
            batch_size: head_train.batch_size,
            seed: child_seed(self.master_seed, &format!("train/{}", variant.name)),
            balanced_sampling: head_train.balanced_sampling,
        };
        (spec, cfg)
    }

    /// Stable digest of the experiment semantics: every field except the
    /// output location. Two runs with equal fingerprints produce
    /// byte-identical trees.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        format!("{:016x}", child_seed(0x4f52_4453_434f_5245, &json))
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Benchmark,
    Train,
    Predict,
    Evaluate,
    Compare,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Benchmark => "benchmark",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::Compare => "compare",
            Stage::Report => "report",
        }
    }

    /// Directory under the output root holding this stage's products.
    fn dir_name(self) -> &'static str {
        match self {
            Stage::Benchmark => "benchmark",
            Stage::Train => "models",
            Stage::Predict => "predictions",
            Stage::Evaluate => "evaluate",
            Stage::Compare => "compare",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Computed,
    Loaded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageStatus {
    pub stage: Stage,
    pub outcome: StageOutcome,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageMarker {
    stage: String,
    fingerprint: String,
}

/// What `run` hands back besides the on-disk tree.
#[derive(Debug)]
pub struct RunProducts {
    pub out_dir: PathBuf,
    pub fingerprint: String,
    pub stages: Vec<StageStatus>,
    /// Present when the pipeline ran through the report stage.
    pub report: Option<ExperimentReport>,
}

fn with_path_context(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub(crate) fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path_context(e, path))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}

/// Write `value` as pretty JSON with a trailing newline, the format every
/// JSON product in the output tree uses.
pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| with_path_context(e, path))
}

const MARKER_FILE: &str = "stage.json";

/// Decide whether an existing stage directory can be loaded. A marker from a
/// different config refuses rather than mixing trees; a missing marker means
/// the stage (re)computes.
fn stage_is_loadable(dir: &Path, stage: Stage, fingerprint: &str) -> Result<bool> {
    let marker_path = dir.join(MARKER_FILE);
    if !marker_path.exists() {
        return Ok(false);
    }
    let marker: StageMarker = read_json_file(&marker_path).map_err(|e| {
        Error::ResumeConflict(format!("unreadable stage marker {}: {e}", marker_path.display()))
    })?;
    if marker.stage != stage.name() {
        return Err(Error::ResumeConflict(format!(
            "{} belongs to stage {}, expected {}",
            marker_path.display(),
            marker.stage,
            stage.name()
        )));
    }
    if marker.fingerprint != fingerprint {
        return Err(Error::ResumeConflict(format!(
            "stage {} in {} was produced under a different configuration \
             (fingerprint {} vs {fingerprint}); delete the stage directory or \
             use a fresh output directory to proceed",
            stage.name(),
            dir.display(),
            marker.fingerprint
        )));
    }
    Ok(true)
}

fn write_marker(dir: &Path, stage: Stage, fingerprint: &str) -> Result<()> {
    write_json_file(
        &dir.join(MARKER_FILE),
        &StageMarker { stage: stage.name().to_string(), fingerprint: fingerprint.to_string() },
    )
}

fn stage_context(stage: Stage, e: Error) -> Error {
    let tag = stage.name();
    match e {
        Error::Config(m) => Error::Config(format!("stage {tag}: {m}")),
        Error::Input(m) => Error::Input(format!("stage {tag}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("stage {tag}: {m}")),
        Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("stage {tag}: {m}")),
        Error::ResumeConflict(m) => Error::ResumeConflict(format!("stage {tag}: {m}")),
        Error::Serialization(m) => Error::Serialization(format!("stage {tag}: {m}")),
        other => other,
    }
}

/// Output directory precedence: CLI override, then the config's own out_dir,
/// then `$ORDSCORE_OUT/run-{fingerprint}`, then `./ordscore-out/run-{fingerprint}`.
pub fn resolve_out_dir(
    cfg: &ExperimentConfig,
    cli_out: Option<&Path>,
    fingerprint: &str,
) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("ordscore-out"));
    root.join(format!("run-{fingerprint}"))
}

/// In-memory products of the benchmark stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkProducts {
    pub benchmark: Benchmark,
    pub shifted: Vec<LatentSample>,
    /// Single-rater rating per shifted sample, aligned with `shifted`.
    pub shifted_ratings: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ShiftedMeta {
    seed: u64,
    ratings_seed: u64,
    ratings: Vec<f64>,
}

const SHIFTED_SAMPLES_FILE: &str = "shifted.csv";
const SHIFTED_META_FILE: &str = "shifted_meta.json";

fn compute_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkProducts> {
    let master = cfg.master_seed;
    let benchmark = generate_benchmark(&cfg.benchmark, child_seed(master, "benchmark"))?;
    let shifted_seed = child_seed(master, "shifted");
    let shifted = benchmark.shifted_testset(&cfg.shift, shifted_seed)?;
    // The shifted set is rated by a single rater, not the full panel.
    let single_rater = RaterPanel {
        n_raters: 1,
        noise_sigma: cfg.benchmark.panel.noise_sigma,
        scale_points: cfg.benchmark.panel.scale_points,
    };
    let ratings_seed = child_seed(master, "shifted-ratings");
    let mut rng = rng_from(ratings_seed);
    let shifted_ratings: Vec<f64> =
        shifted.iter().map(|s| simulate_fine_ratings(s, &single_rater, &mut rng).1).collect();
    Ok(BenchmarkProducts { benchmark, shifted, shifted_ratings })
}

fn save_benchmark_products(products: &BenchmarkProducts, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    save_benchmark(&products.benchmark, dir)?;
    let refs: Vec<&LatentSample> = products.shifted.iter().collect();
    write_samples_csv(&dir.join(SHIFTED_SAMPLES_FILE), &refs, cfg.benchmark.feature_dim)?;
    write_json_file(
        &dir.join(SHIFTED_META_FILE),
        &ShiftedMeta {
            seed: child_seed(cfg.master_seed, "shifted"),
            ratings_seed: child_seed(cfg.master_seed, "shifted-ratings"),
            ratings: products.shifted_ratings.clone(),
        },
    )
}

fn load_benchmark_products(dir: &Path) -> Result<BenchmarkProducts> {
    let benchmark = load_benchmark(dir)?;
    let shifted = load_samples_csv(&dir.join(SHIFTED_SAMPLES_FILE))?;
    let meta: ShiftedMeta = read_json_file(&dir.join(SHIFTED_META_FILE))?;
    if meta.ratings.len() != shifted.len() {
        return Err(Error::Input(format!(
            "{} ratings for {} shifted samples",
            meta.ratings.len(),
            shifted.len()
        )));
    }
    Ok(BenchmarkProducts { benchmark, shifted, shifted_ratings: meta.ratings })
}

type PredictionTable = BTreeMap<String, BTreeMap<String, Vec<PredictionRow>>>;

fn prediction_samples<'a>(
    bench: &'a BenchmarkProducts,
    set: &str,
) -> Result<Vec<&'a LatentSample>> {
    let b = &bench.benchmark;
    Ok(match set {
        "ranked" => b.ranked_test.iter().map(|r| &r.sample).collect(),
        "fine" => b.fine_rated_test.iter().map(|f| &f.sample).collect(),
        "continuous" => b.continuous_test.iter().map(|c| &c.sample).collect(),
        "shifted" => bench.shifted.iter().collect(),
        "longitudinal_t0" => b.longitudinal_pairs.iter().map(|p| &p.t0.sample).collect(),
        "longitudinal_t1" => b.longitudinal_pairs.iter().map(|p| &p.t1.sample).collect(),
        other => return Err(Error::Input(format!("unknown prediction set {other}"))),
    })
}

fn compute_predictions(
    cfg: &ExperimentConfig,
    bench: &BenchmarkProducts,
    models: &BTreeMap<String, TrainedModel>,
) -> Result<PredictionTable> {
    let mut table = PredictionTable::new();
    for variant in model_roster() {
        let model = models
            .get(variant.name)
            .ok_or_else(|| Error::Input(format!("missing trained model {}", variant.name)))?;
        let mut sets = BTreeMap::new();
        for set in PREDICTION_SETS {
            let samples = prediction_samples(bench, set)?;
            let mc = variant.mc.then(|| {
                let base = child_seed(cfg.master_seed, &format!("mc/{}/{set}", variant.name));
                (base, cfg.mc.n_passes)
            });
            sets.insert(set.to_string(), predict_rows(model, &samples, mc)?);
        }
        table.insert(variant.name.to_string(), sets);
    }
    Ok(table)
}

/// Run the pipeline through `upto`, resuming over `out_override` (or the
/// configured output directory) where stage markers match.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
    upto: Stage,
) -> Result<RunProducts> {
    cfg.validate()?;
    let fingerprint = cfg.fingerprint();
    let out = resolve_out_dir(cfg, out_override, &fingerprint);
    std::fs::create_dir_all(&out).map_err(|e| with_path_context(e, &out))?;
    let mut stages = Vec::new();

    // Benchmark stage.
    let bench_dir = out.join(Stage::Benchmark.dir_name());
    let bench = if stage_is_loadable(&bench_dir, Stage::Benchmark, &fingerprint)? {
        stages.push(StageStatus { stage: Stage::Benchmark, outcome: StageOutcome::Loaded });
        load_benchmark_products(&bench_dir).map_err(|e| stage_context(Stage::Benchmark, e))?
    } else {
        let products = compute_benchmark(cfg).map_err(|e| stage_context(Stage::Benchmark, e))?;
        std::fs::create_dir_all(&bench_dir).map_err(|e| with_path_context(e, &bench_dir))?;
        save_benchmark_products(&products, &bench_dir, cfg)
            .map_err(|e| stage_context(Stage::Benchmark, e))?;
        write_marker(&bench_dir, Stage::Benchmark, &fingerprint)?;
        stages.push(StageStatus { stage: Stage::Benchmark, outcome: StageOutcome::Computed });
        products
    };
    if upto == Stage::Benchmark {
        return Ok(RunProducts { out_dir: out, fingerprint, stages, report: None });
    }

    // Train stage.
    let models_dir = out.join(Stage::Train.dir_name());
    let model_path = |name: &str| models_dir.join(format!("{name}.json"));
    let models: BTreeMap<String, TrainedModel> =
        if stage_is_loadable(&models_dir, Stage::Train, &fingerprint)? {
            stages.push(StageStatus { stage: Stage::Train, outcome: StageOutcome::Loaded });
            let mut loaded = BTreeMap::new();
            for variant in model_roster() {
                let model = TrainedModel::load_json(&model_path(variant.name))
                    .map_err(|e| stage_context(Stage::Train, e))?;
                loaded.insert(variant.name.to_string(), model);
            }
            loaded
        } else {
            std::fs::create_dir_all(&models_dir).map_err(|e| with_path_context(e, &models_dir))?;
            let mut trained = BTreeMap::new();
            for variant in model_roster() {
                let (spec, train_cfg) = cfg.model_spec(&variant);
                let model = train(&spec, &bench.benchmark.train, &bench.benchmark.val, &train_cfg)
                    .map_err(|e| stage_context(Stage::Train, e))?;
                model.save_json(&model_path(variant.name))
                    .map_err(|e| stage_context(Stage::Train, e))?;
                trained.insert(variant.name.to_string(), model);
            }
            write_marker(&models_dir, Stage::Train, &fingerprint)?;
            stages.push(StageStatus { stage: Stage::Train, outcome: StageOutcome::Computed });
            trained
        };
    if upto == Stage::Train {
        return Ok(RunProducts { out_dir: out, fingerprint, stages, report: None });
    }

    // Predict stage.
    let pred_dir = out.join(Stage::Predict.dir_name());
    let pred_path = |model: &str, set: &str| pred_dir.join(model).join(format!("{set}.csv"));
    let predictions: PredictionTable =
        if stage_is_loadable(&pred_dir, Stage::Predict, &fingerprint)? {
            stages.push(StageStatus { stage: Stage::Predict, outcome: StageOutcome::Loaded });
            let mut table = PredictionTable::new();
            for variant in model_roster() {
                let mut sets = BTreeMap::new();
                for set in PREDICTION_SETS {
                    let rows = load_predictions_csv(&pred_path(variant.name, set))
                        .map_err(|e| stage_context(Stage::Predict, e))?;
                    sets.insert(set.to_string(), rows);
                }
                table.insert(variant.name.to_string(), sets);
            }
            table
        } else {
            let table = compute_predictions(cfg, &bench, &models)
                .map_err(|e| stage_context(Stage::Predict, e))?;
            for (model, sets) in &table {
                let model_dir = pred_dir.join(model);
                std::fs::create_dir_all(&model_dir)
                    .map_err(|e| with_path_context(e, &model_dir))?;
                for (set, rows) in sets {
                    write_predictions_csv(&pred_path(model, set), rows)
                        .map_err(|e| stage_context(Stage::Predict, e))?;
                }
            }
            write_marker(&pred_dir, Stage::Predict, &fingerprint)?;
            stages.push(StageStatus { stage: Stage::Predict, outcome: StageOutcome::Computed });
            table
        };
    if upto == Stage::Predict {
        return Ok(RunProducts { out_dir: out, fingerprint, stages, report: None });
    }

    // Evaluate stage.
    let eval_dir = out.join(Stage::Evaluate.dir_name());
    let metrics_path = |m: &str| eval_dir.join("metrics").join(format!("{m}.json"));
    let bootstrap_path = |m: &str| eval_dir.join("bootstrap").join(format!("{m}.json"));
    let evaluated: EvaluateProducts =
        if stage_is_loadable(&eval_dir, Stage::Evaluate, &fingerprint)? {
            stages.push(StageStatus { stage: Stage::Evaluate, outcome: StageOutcome::Loaded });
            let mut metrics = BTreeMap::new();
            let mut bootstraps = BTreeMap::new();
            for variant in model_roster() {
                metrics.insert(
                    variant.name.to_string(),
                    read_json_file(&metrics_path(variant.name))
                        .map_err(|e| stage_context(Stage::Evaluate, e))?,
                );
                bootstraps.insert(
                    variant.name.to_string(),
                    read_json_file(&bootstrap_path(variant.name))
                        .map_err(|e| stage_context(Stage::Evaluate, e))?,
                );
            }
            let aux = read_json_file(&eval_dir.join("aux.json"))
                .map_err(|e| stage_context(Stage::Evaluate, e))?;
            EvaluateProducts { metrics, bootstraps, aux }
        } else {
            let products = evaluate::evaluate_all(cfg, &bench, &predictions)
                .map_err(|e| stage_context(Stage::Evaluate, e))?;
            for sub in ["metrics", "bootstrap"] {
                let d = eval_dir.join(sub);
                std::fs::create_dir_all(&d).map_err(|e| with_path_context(e, &d))?;
            }
            for variant in model_roster() {
                write_json_file(&metrics_path(variant.name), &products.metrics[variant.name])
                    .map_err(|e| stage_context(Stage::Evaluate, e))?;
                write_json_file(&bootstrap_path(variant.name), &products.bootstraps[variant.name])
                    .map_err(|e| stage_context(Stage::Evaluate, e))?;
            }
            write_json_file(&eval_dir.join("aux.json"), &products.aux)
                .map_err(|e| stage_context(Stage::Evaluate, e))?;
            write_results_table(&eval_dir.join("table2.csv"), &MODEL_ORDER, &products.metrics)
                .map_err(|e| stage_context(Stage::Evaluate, e))?;
            write_marker(&eval_dir, Stage::Evaluate, &fingerprint)?;
            stages.push(StageStatus { stage: Stage::Evaluate, outcome: StageOutcome::Computed });
            products
        };
    if upto == Stage::Evaluate {
        return Ok(RunProducts { out_dir: out, fingerprint, stages, report: None });
    }

    // Compare stage: significance grids across the roster.
    let compare_dir = out.join(Stage::Compare.dir_name());
    let grid_path = |metric: &str| compare_dir.join(format!("grid_{metric}.json"));
    let grids: Vec<crate::eval::ComparisonGrid> =
        if stage_is_loadable(&compare_dir, Stage::Compare, &fingerprint)? {
            stages.push(StageStatus { stage: Stage::Compare, outcome: StageOutcome::Loaded });
            let mut loaded = Vec::new();
            for metric in GRID_METRICS {
                let path = grid_path(metric);
                if path.exists() {
                    loaded.push(
                        read_json_file(&path).map_err(|e| stage_context(Stage::Compare, e))?,
                    );
                }
            }
            loaded
        } else {
            let grids = evaluate::build_grids(&MODEL_ORDER, &evaluated.bootstraps)
                .map_err(|e| stage_context(Stage::Compare, e))?;
            std::fs::create_dir_all(&compare_dir)
                .map_err(|e| with_path_context(e, &compare_dir))?;
            for grid in &grids {
                write_json_file(&grid_path(&grid.metric), grid)
                    .map_err(|e| stage_context(Stage::Compare, e))?;
            }
            write_marker(&compare_dir, Stage::Compare, &fingerprint)?;
            stages.push(StageStatus { stage: Stage::Compare, outcome: StageOutcome::Computed });
            grids
        };
    if upto == Stage::Compare {
        return Ok(RunProducts { out_dir: out, fingerprint, stages, report: None });
    }

    // Report stage.
    let report_dir = out.join(Stage::Report.dir_name());
    let report_path = report_dir.join("report.json");
    let final_report: ExperimentReport =
        if stage_is_loadable(&report_dir, Stage::Report, &fingerprint)? {
            stages.push(StageStatus { stage: Stage::Report, outcome: StageOutcome::Loaded });
            read_json_file(&report_path).map_err(|e| stage_context(Stage::Report, e))?
        } else {
            let plots = report::write_plots(cfg, &bench, &predictions, &report_dir.join("plots"))
                .map_err(|e| stage_context(Stage::Report, e))?;
            let report = ExperimentReport {
                fingerprint: fingerprint.clone(),
                master_seed: cfg.master_seed,
                benchmark_seed: bench.benchmark.seed,
                classes: cfg.benchmark.classes,
                model_order: MODEL_ORDER.iter().map(|s| s.to_string()).collect(),
                metrics: evaluated.metrics.clone(),
                grids: grids.clone(),
                aux: evaluated.aux.clone(),
                plot_files: plots,
                notes: report::report_notes(),
            };
            write_json_file(&report_path, &report)
                .map_err(|e| stage_context(Stage::Report, e))?;
            write_marker(&report_dir, Stage::Report, &fingerprint)?;
            stages.push(StageStatus { stage: Stage::Report, outcome: StageOutcome::Computed });
            report
        };

    Ok(RunProducts { out_dir: out, fingerprint, stages, report: Some(final_report) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthlab::ThresholdSpec;

    pub(crate) fn tiny_config(master_seed: u64) -> ExperimentConfig {
        let head = HeadTrainConfig {
            learning_rate: 0.05,
            epochs: 2,
            batch_size: 8,
            balanced_sampling: false,
            hidden_widths: vec![6],
        };
        ExperimentConfig {
            benchmark: BenchmarkConfig {
                classes: 3,
                feature_dim: 3,
                thresholds: ThresholdSpec::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap(),
                noise_sigma: 0.05,
                steepness: 4.0,
                n_train: 60,
                n_val: 24,
                n_test: 30,
                n_ranked: 12,
                n_fine_rated: 10,
                n_longitudinal: 6,
                panel: RaterPanel::default(),
                drift: Default::default(),
            },
            shift: DomainShiftSpec { n: Some(20), class_priors: None, noise_scale: 1.5 },
            models: ModelsConfig {
                multi_class: head.clone(),
                ordinal: head.clone(),
                regression: head.clone(),
                siamese: head,
            },
            siamese: SiameseSettings { embed_dim: 4, margin: 1.0, anchor_count: 3 },
            mc: McSettings { n_passes: 4 },
            mc_dropout_rate: 0.2,
            clinical_split: ClinicalSplitConfig { first_positive: 2 },
            bootstrap_iterations: 25,
            out_dir: None,
            master_seed,
        }
    }

    #[test]
    fn roster_matches_declared_order() {
        let roster = model_roster();
        assert_eq!(roster.len(), MODEL_ORDER.len());
        for (variant, name) in roster.iter().zip(MODEL_ORDER) {
            assert_eq!(variant.name, name);
            assert_eq!(variant.mc, name.starts_with("mc_"));
        }
    }

    #[test]
    fn fingerprint_ignores_out_dir_but_not_seed() {
        let a = tiny_config(1);
        let mut b = tiny_config(1);
        b.out_dir = Some(PathBuf::from("/somewhere/else"));
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = tiny_config(2);
        assert_ne!(a.fingerprint(), c.fingerprint());
        let mut d = tiny_config(1);
        d.mc.n_passes = 5;
        assert_ne!(a.fingerprint(), d.fingerprint());
    }

    #[test]
    fn config_json_round_trips() {
        let cfg = tiny_config(3);
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_defaults_fill_in() {
        let json = r#"{
            "benchmark": {
                "classes": 3,
                "thresholds": {"cuts": [0.33, 0.66]},
                "n_train": 30, "n_val": 12, "n_test": 12,
                "n_ranked": 6, "n_fine_rated": 4, "n_longitudinal": 3
            },
            "models": {
                "multi_class": {"learning_rate": 0.05, "epochs": 1, "batch_size": 4, "hidden_widths": [4]},
                "ordinal": {"learning_rate": 0.05, "epochs": 1, "batch_size": 4, "hidden_widths": [4]},
                "regression": {"learning_rate": 0.05, "epochs": 1, "batch_size": 4, "hidden_widths": [4]},
                "siamese": {"learning_rate": 0.05, "epochs": 1, "batch_size": 4, "hidden_widths": [4]}
            },
            "siamese": {"embed_dim": 3},
            "clinical_split": {"first_positive": 2},
            "master_seed": 9
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mc.n_passes, DEFAULT_MC_PASSES);
        assert_eq!(cfg.mc_dropout_rate, 0.2);
        assert_eq!(cfg.bootstrap_iterations, 500);
        assert_eq!(cfg.siamese.anchor_count, crate::heads::DEFAULT_ANCHOR_COUNT);
        assert!(cfg.shift.is_identity());
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let mut cfg_json = serde_json::to_value(tiny_config(1)).unwrap();
        cfg_json.as_object_mut().unwrap().insert("buttstrap_iterations".into(), 7.into());
        assert!(serde_json::from_value::<ExperimentConfig>(cfg_json).is_err());
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let mut cfg = tiny_config(1);
        cfg.mc_dropout_rate = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = tiny_config(1);
        cfg.clinical_split.first_positive = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config(1);
        cfg.models.ordinal.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config(1);
        cfg.bootstrap_iterations = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg = tiny_config(1);
        let fp = cfg.fingerprint();
        let cli = PathBuf::from("/tmp/cli-out");
        assert_eq!(resolve_out_dir(&cfg, Some(&cli), &fp), cli);
        cfg.out_dir = Some(PathBuf::from("/tmp/cfg-out"));
        assert_eq!(resolve_out_dir(&cfg, None, &fp), PathBuf::from("/tmp/cfg-out"));
        cfg.out_dir = None;
        let derived = resolve_out_dir(&cfg, None, &fp);
        assert!(derived.to_string_lossy().contains(&fp));
    }

    #[test]
    fn model_spec_applies_dropout_only_to_mc_variants() {
        let cfg = tiny_config(1);
        let roster = model_roster();
        let (plain, plain_train) = cfg.model_spec(&roster[0]);
        let (mc, mc_train) = cfg.model_spec(&roster[1]);
        assert_eq!(plain.dropout_rate, 0.0);
        assert_eq!(mc.dropout_rate, 0.2);
        assert_ne!(plain_train.seed, mc_train.seed);
        let (siamese, _) = cfg.model_spec(&roster[7]);
        match siamese.head.kind {
            HeadKind::Siamese { embed_dim, margin, anchor_count } => {
                assert_eq!((embed_dim, margin, anchor_count), (4, 1.0, 3));
            }
            _ => panic!("expected siamese head"),
        }
    }

    #[test]
    fn marker_mismatch_is_a_resume_conflict() {
        let dir = tempfile::tempdir().unwrap();
        write_marker(dir.path(), Stage::Train, "aaaa").unwrap();
        assert!(stage_is_loadable(dir.path(), Stage::Train, "aaaa").unwrap());
        match stage_is_loadable(dir.path(), Stage::Train, "bbbb") {
            Err(Error::ResumeConflict(msg)) => assert!(msg.contains("train")),
            other => panic!("expected resume conflict, got {other:?}"),
        }
        match stage_is_loadable(dir.path(), Stage::Predict, "aaaa") {
            Err(Error::ResumeConflict(_)) => {}
            other => panic!("expected resume conflict, got {other:?}"),
        }
        let empty = tempfile::tempdir().unwrap();
        assert!(!stage_is_loadable(empty.path(), Stage::Train, "aaaa").unwrap());
    }
}
