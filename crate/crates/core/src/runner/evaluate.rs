//! Turns prediction tables into per-model metric reports, bootstrap
//! distributions, auxiliary diagnostics, and the flat results table.
//!
//! Bootstrap closures receive resampled row tuples; rank-based metrics
//! re-rank the ground-truth ranks inside each resample (stale global ranks
//! like (3, 3, 7) are not valid rank vectors for the resample). All models
//! share one bootstrap seed per metric, so resample indices are paired
//! across models.

use super::{BenchmarkProducts, ExperimentConfig, ModelVariant, PredictionRow};
use crate::error::{Error, Result};
use crate::eval::{
    self, average_ranks, bootstrap, BootstrapDistribution, CiMetric, ComparisonGrid,
    LongitudinalDiff, MetricReport,
};
use crate::seed::child_seed;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Metrics that get a pairwise significance grid, in emission order. The
/// last two only exist when the benchmark carries the matching ground truth.
pub const GRID_METRICS: [&str; 6] =
    ["spearman", "pearson", "rank_mse", "auc", "fine_rating_mse", "longitudinal_mse"];

/// Whole-set diagnostics that complement the bootstrapped per-model metrics:
/// score-vs-latent correlation on the full test set and the two shifted-set
/// results. `None` marks a metric that was undefined (e.g. constant scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxReport {
    pub continuous_pearson: BTreeMap<String, Option<f64>>,
    pub shifted_spearman: BTreeMap<String, Option<f64>>,
    pub shifted_fine_rating_mse: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateProducts {
    pub metrics: BTreeMap<String, MetricReport>,
    pub bootstraps: BTreeMap<String, BTreeMap<String, BootstrapDistribution>>,
    pub aux: AuxReport,
}

fn optional(result: Result<f64>) -> Result<Option<f64>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn aligned<'a>(
    rows: &'a [PredictionRow],
    expected: impl ExactSizeIterator<Item = u64>,
    model: &str,
    set: &str,
) -> Result<&'a [PredictionRow]> {
    if rows.len() != expected.len() {
        return Err(Error::Input(format!(
            "{model}/{set}: {} prediction rows for {} samples",
            rows.len(),
            expected.len()
        )));
    }
    for (row, id) in rows.iter().zip(expected) {
        if row.id != id {
            return Err(Error::Input(format!(
                "{model}/{set}: prediction for sample {} where {} was expected",
                row.id, id
            )));
        }
    }
    Ok(rows)
}

/// Per-model row tuples that the metric closures resample.
struct ModelEvalData {
    /// (true rank, score, class label) over the ranked test set.
    ranked: Vec<(f64, f64, usize)>,
    /// (consensus rating, rescaled score).
    fine: Vec<(f64, f64)>,
    longitudinal: Vec<LongitudinalDiff>,
    /// (latent ground truth, score) over the full test set.
    continuous: Vec<(f64, f64)>,
    /// (latent, single-rater rating, score, rescaled score).
    shifted: Vec<(f64, f64, f64, f64)>,
}

fn collect_model_data(
    cfg: &ExperimentConfig,
    variant: &ModelVariant,
    bench: &BenchmarkProducts,
    sets: &BTreeMap<String, Vec<PredictionRow>>,
) -> Result<ModelEvalData> {
    let head = cfg.head_spec(variant.base);
    let name = variant.name;
    let get = |set: &str| -> Result<&Vec<PredictionRow>> {
        sets.get(set)
            .ok_or_else(|| Error::Input(format!("{name}: missing predictions for set {set}")))
    };
    let b = &bench.benchmark;

    let ranked_rows = aligned(
        get("ranked")?,
        b.ranked_test.iter().map(|r| r.sample.id.0),
        name,
        "ranked",
    )?;
    let ranked = b
        .ranked_test
        .iter()
        .zip(ranked_rows)
        .map(|(r, row)| (r.rank as f64, row.score, r.sample.label))
        .collect();

    let fine_rows = aligned(
        get("fine")?,
        b.fine_rated_test.iter().map(|f| f.sample.id.0),
        name,
        "fine",
    )?;
    let fine = b
        .fine_rated_test
        .iter()
        .zip(fine_rows)
        .map(|(f, row)| Ok((f.consensus, eval::rescale_score(row.score, &head)?)))
        .collect::<Result<Vec<_>>>()?;

    let t0_rows = aligned(
        get("longitudinal_t0")?,
        b.longitudinal_pairs.iter().map(|p| p.t0.sample.id.0),
        name,
        "longitudinal_t0",
    )?;
    let t1_rows = aligned(
        get("longitudinal_t1")?,
        b.longitudinal_pairs.iter().map(|p| p.t1.sample.id.0),
        name,
        "longitudinal_t1",
    )?;
    let longitudinal = b
        .longitudinal_pairs
        .iter()
        .zip(t0_rows.iter().zip(t1_rows))
        .map(|(pair, (r0, r1))| {
            Ok(LongitudinalDiff {
                rating_t0: pair.t0.consensus,
                rating_t1: pair.t1.consensus,
                score_t0: eval::rescale_score(r0.score, &head)?,
                score_t1: eval::rescale_score(r1.score, &head)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let continuous_rows = aligned(
        get("continuous")?,
        b.continuous_test.iter().map(|c| c.sample.id.0),
        name,
        "continuous",
    )?;
    let continuous = b
        .continuous_test
        .iter()
        .zip(continuous_rows)
        .map(|(c, row)| (c.ground_truth, row.score))
        .collect();

    let shifted_rows =
        aligned(get("shifted")?, bench.shifted.iter().map(|s| s.id.0), name, "shifted")?;
    let shifted = bench
        .shifted
        .iter()
        .zip(shifted_rows)
        .zip(&bench.shifted_ratings)
        .map(|((s, row), &rating)| {
            Ok((s.latent, rating, row.score, eval::rescale_score(row.score, &head)?))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ModelEvalData { ranked, fine, longitudinal, continuous, shifted })
}

pub(super) fn evaluate_all(
    cfg: &ExperimentConfig,
    bench: &BenchmarkProducts,
    predictions: &BTreeMap<String, BTreeMap<String, Vec<PredictionRow>>>,
) -> Result<EvaluateProducts> {
    let split = cfg.clinical_split()?;
    let iterations = cfg.bootstrap_iterations;
    let master = cfg.master_seed;
    let seed_for = |metric: &str| child_seed(master, &format!("bootstrap/{metric}"));

    let spearman_metric = |rows: &[(f64, f64, usize)]| {
        let trues: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        eval::spearman(&trues, &scores)
    };
    let pearson_metric = |rows: &[(f64, f64, usize)]| {
        let trues: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        eval::pearson(&average_ranks(&trues), &average_ranks(&scores))
    };
    let rank_mse_metric = |rows: &[(f64, f64, usize)]| {
        let trues: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        eval::normalized_rank_mse(&average_ranks(&trues), &scores)
    };
    let auc_split = split.clone();
    let auc_metric = move |rows: &[(f64, f64, usize)]| {
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.2).collect();
        eval::auc_binary(&scores, &labels, &auc_split)
    };
    let fine_metric = |rows: &[(f64, f64)]| {
        let ratings: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.1).collect();
        eval::fine_rating_mse(&ratings, &scores)
    };
    let longitudinal_metric = |pairs: &[LongitudinalDiff]| eval::longitudinal_diff_mse(pairs);

    let mut metrics = BTreeMap::new();
    let mut bootstraps = BTreeMap::new();
    let mut aux = AuxReport {
        continuous_pearson: BTreeMap::new(),
        shifted_spearman: BTreeMap::new(),
        shifted_fine_rating_mse: BTreeMap::new(),
    };

    for variant in super::model_roster() {
        let name = variant.name;
        let sets = predictions
            .get(name)
            .ok_or_else(|| Error::Input(format!("missing predictions for model {name}")))?;
        let data = collect_model_data(cfg, &variant, bench, sets)?;

        // Tag bootstrap failures with the model and metric that produced
        // them; a collapsed model shows up here as a permanently undefined
        // rank correlation.
        let ctx = |metric: &str, r: Result<BootstrapDistribution>| {
            r.map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("{name}/{metric}: {m}")),
                Error::UndefinedMetric(m) => {
                    Error::UndefinedMetric(format!("{name}/{metric}: {m}"))
                }
                other => other,
            })
        };

        let mut dists: BTreeMap<String, BootstrapDistribution> = BTreeMap::new();
        dists.insert(
            "spearman".into(),
            ctx("spearman", bootstrap(spearman_metric, &data.ranked, iterations, seed_for("spearman")))?,
        );
        dists.insert(
            "pearson".into(),
            ctx("pearson", bootstrap(pearson_metric, &data.ranked, iterations, seed_for("pearson")))?,
        );
        dists.insert(
            "rank_mse".into(),
            ctx("rank_mse", bootstrap(rank_mse_metric, &data.ranked, iterations, seed_for("rank_mse")))?,
        );
        dists.insert(
            "auc".into(),
            ctx("auc", bootstrap(&auc_metric, &data.ranked, iterations, seed_for("auc")))?,
        );
        // Rating-scale metrics need at least 2 observations to resample.
        if data.fine.len() >= 2 {
            dists.insert(
                "fine_rating_mse".into(),
                ctx(
                    "fine_rating_mse",
                    bootstrap(fine_metric, &data.fine, iterations, seed_for("fine_rating_mse")),
                )?,
            );
        }
        if data.longitudinal.len() >= 2 {
            dists.insert(
                "longitudinal_mse".into(),
                ctx(
                    "longitudinal_mse",
                    bootstrap(
                        longitudinal_metric,
                        &data.longitudinal,
                        iterations,
                        seed_for("longitudinal_mse"),
                    ),
                )?,
            );
        }

        let report = MetricReport {
            spearman: CiMetric::from(&dists["spearman"]),
            pearson: CiMetric::from(&dists["pearson"]),
            rank_mse: CiMetric::from(&dists["rank_mse"]),
            auc: CiMetric::from(&dists["auc"]),
            fine_rating_mse: dists.get("fine_rating_mse").map(CiMetric::from),
            longitudinal_mse: dists.get("longitudinal_mse").map(CiMetric::from),
        };
        report.validate()?;

        let truths: Vec<f64> = data.continuous.iter().map(|r| r.0).collect();
        let scores: Vec<f64> = data.continuous.iter().map(|r| r.1).collect();
        aux.continuous_pearson
            .insert(name.to_string(), optional(eval::pearson(&truths, &scores))?);
        let latents: Vec<f64> = data.shifted.iter().map(|r| r.0).collect();
        let raw_scores: Vec<f64> = data.shifted.iter().map(|r| r.2).collect();
        let ratings: Vec<f64> = data.shifted.iter().map(|r| r.1).collect();
        let rescaled: Vec<f64> = data.shifted.iter().map(|r| r.3).collect();
        aux.shifted_spearman
            .insert(name.to_string(), optional(eval::spearman(&latents, &raw_scores))?);
        aux.shifted_fine_rating_mse
            .insert(name.to_string(), optional(eval::fine_rating_mse(&ratings, &rescaled))?);

        metrics.insert(name.to_string(), report);
        bootstraps.insert(name.to_string(), dists);
    }

    Ok(EvaluateProducts { metrics, bootstraps, aux })
}

/// Flat results table: one row per model, bootstrap mean and 95% interval
/// (formatted `low..high`) for normalized-rank MSE, Spearman, and AUC.
pub fn write_results_table(
    path: &Path,
    order: &[&str],
    metrics: &BTreeMap<String, MetricReport>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["model", "mse", "mse_ci", "spearman", "spearman_ci", "auc", "auc_ci"])?;
    let num = |v: f64| format!("{v:.6}");
    let ci = |m: &CiMetric| format!("{:.6}..{:.6}", m.ci_low, m.ci_high);
    for &name in order {
        let report = metrics
            .get(name)
            .ok_or_else(|| Error::Input(format!("missing metrics for model {name}")))?;
        writer.write_record([
            name.to_string(),
            num(report.rank_mse.mean),
            ci(&report.rank_mse),
            num(report.spearman.mean),
            ci(&report.spearman),
            num(report.auc.mean),
            ci(&report.auc),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// One significance grid per available metric, models in roster order.
pub(super) fn build_grids(
    order: &[&str],
    bootstraps: &BTreeMap<String, BTreeMap<String, BootstrapDistribution>>,
) -> Result<Vec<ComparisonGrid>> {
    let mut grids = Vec::new();
    for metric in GRID_METRICS {
        if !order.iter().all(|m| bootstraps.get(*m).is_some_and(|d| d.contains_key(metric))) {
            continue;
        }
        let entries: Vec<(String, BootstrapDistribution)> = order
            .iter()
            .map(|m| (m.to_string(), bootstraps[*m][metric].clone()))
            .collect();
        grids.push(eval::comparison_grid(metric, &entries)?);
    }
    Ok(grids)
}
