//! Final experiment report, plot-data emission, and cross-report
//! comparison. Plot files are flat CSVs (model column + coordinates) meant
//! for external plotting tools; report.json embeds metrics, grids, and the
//! plot manifest with paths relative to its own directory.

use super::evaluate::AuxReport;
use super::{read_json_file, BenchmarkProducts, ExperimentConfig, PredictionRow};
use crate::error::{Error, Result};
use crate::eval::{self, average_ranks, BootstrapDistribution, ComparisonGrid, MetricReport};
use crate::synthlab::fmt_f64;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Everything `run` learned, in one JSON document.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentReport {
    pub fingerprint: String,
    pub master_seed: u64,
    pub benchmark_seed: u64,
    pub classes: usize,
    pub model_order: Vec<String>,
    pub metrics: BTreeMap<String, MetricReport>,
    pub grids: Vec<ComparisonGrid>,
    pub aux: AuxReport,
    /// Plot CSVs, relative to the report's directory.
    pub plot_files: Vec<String>,
    pub notes: Vec<String>,
}

pub(super) fn report_notes() -> Vec<String> {
    vec![
        "Rescaled 3-class head scores span [1,5] on the 1-9 rating axis; the x2+1 \
         rescale rule is applied verbatim, so rating-scale MSEs include that range \
         mismatch for high ratings."
            .to_string(),
        "AUC binarizes ranked-set class labels through the clinical split \
         (positives are the upper classes)."
            .to_string(),
        "The pearson metric is computed rank-vs-rank, checking linearity of the \
         rank relation; it coincides with spearman up to resampling noise."
            .to_string(),
    ]
}

fn head_for(cfg: &ExperimentConfig, model: &str) -> Result<crate::heads::HeadSpec> {
    let variant = super::model_roster()
        .into_iter()
        .find(|v| v.name == model)
        .ok_or_else(|| Error::Input(format!("unknown model {model}")))?;
    Ok(cfg.head_spec(variant.base))
}

/// Emit all plot CSVs into `plots_dir`; returns manifest entries relative to
/// the report directory (the parent of `plots_dir`).
pub(super) fn write_plots(
    cfg: &ExperimentConfig,
    bench: &BenchmarkProducts,
    predictions: &BTreeMap<String, BTreeMap<String, Vec<PredictionRow>>>,
    plots_dir: &Path,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(plots_dir)?;
    let order: Vec<&str> = super::MODEL_ORDER.to_vec();
    let rows_for = |model: &str, set: &str| -> Result<&Vec<PredictionRow>> {
        predictions
            .get(model)
            .and_then(|sets| sets.get(set))
            .ok_or_else(|| Error::Input(format!("missing predictions for {model}/{set}")))
    };
    let mut manifest = Vec::new();
    let mut emit =
        |file: &str, header: &[&str], build: &mut dyn FnMut(&mut csv::Writer<std::fs::File>) -> Result<()>| -> Result<()> {
            let path = plots_dir.join(file);
            let mut writer = csv::Writer::from_path(&path)?;
            writer.write_record(header)?;
            build(&mut writer)?;
            writer.flush()?;
            manifest.push(format!("plots/{file}"));
            Ok(())
        };

    // Ground-truth rank against predicted score (the plateau view).
    emit("rank_vs_score.csv", &["model", "id", "rank", "score"], &mut |w| {
        for &model in &order {
            for (r, row) in bench.benchmark.ranked_test.iter().zip(rows_for(model, "ranked")?) {
                w.write_record([
                    model.to_string(),
                    row.id.to_string(),
                    r.rank.to_string(),
                    fmt_f64(row.score),
                ])?;
            }
        }
        Ok(())
    })?;

    // Panel consensus rating against the rescaled score.
    emit(
        "rating_vs_score.csv",
        &["model", "id", "consensus", "score", "rescaled_score"],
        &mut |w| {
            for &model in &order {
                let head = head_for(cfg, model)?;
                for (f, row) in bench.benchmark.fine_rated_test.iter().zip(rows_for(model, "fine")?)
                {
                    w.write_record([
                        model.to_string(),
                        row.id.to_string(),
                        fmt_f64(f.consensus),
                        fmt_f64(row.score),
                        fmt_f64(eval::rescale_score(row.score, &head)?),
                    ])?;
                }
            }
            Ok(())
        },
    )?;

    // Normalized true rank against normalized predicted rank.
    emit(
        "rank_vs_rank.csv",
        &["model", "id", "true_rank_norm", "pred_rank_norm"],
        &mut |w| {
            for &model in &order {
                let rows = rows_for(model, "ranked")?;
                let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
                let pred_ranks = average_ranks(&scores);
                let n = rows.len() as f64;
                for ((r, row), pred) in
                    bench.benchmark.ranked_test.iter().zip(rows).zip(&pred_ranks)
                {
                    w.write_record([
                        model.to_string(),
                        row.id.to_string(),
                        fmt_f64(r.rank as f64 / n),
                        fmt_f64(pred / n),
                    ])?;
                }
            }
            Ok(())
        },
    )?;

    // Within-patient change: rating difference against rescaled-score difference.
    emit(
        "longitudinal.csv",
        &[
            "model",
            "pair",
            "rating_t0",
            "rating_t1",
            "score_t0",
            "score_t1",
            "rating_diff",
            "score_diff",
        ],
        &mut |w| {
            for &model in &order {
                let head = head_for(cfg, model)?;
                let t0 = rows_for(model, "longitudinal_t0")?;
                let t1 = rows_for(model, "longitudinal_t1")?;
                for (i, (pair, (r0, r1))) in
                    bench.benchmark.longitudinal_pairs.iter().zip(t0.iter().zip(t1)).enumerate()
                {
                    let s0 = eval::rescale_score(r0.score, &head)?;
                    let s1 = eval::rescale_score(r1.score, &head)?;
                    w.write_record([
                        model.to_string(),
                        i.to_string(),
                        fmt_f64(pair.t0.consensus),
                        fmt_f64(pair.t1.consensus),
                        fmt_f64(s0),
                        fmt_f64(s1),
                        fmt_f64(pair.t1.consensus - pair.t0.consensus),
                        fmt_f64(s1 - s0),
                    ])?;
                }
            }
            Ok(())
        },
    )?;

    // Latent ground truth against the raw score over the whole test set.
    emit("continuous.csv", &["model", "id", "ground_truth", "score"], &mut |w| {
        for &model in &order {
            for (c, row) in bench.benchmark.continuous_test.iter().zip(rows_for(model, "continuous")?)
            {
                w.write_record([
                    model.to_string(),
                    row.id.to_string(),
                    fmt_f64(c.ground_truth),
                    fmt_f64(row.score),
                ])?;
            }
        }
        Ok(())
    })?;

    // Shifted (out-of-domain) test set with its single-rater ratings.
    emit(
        "shifted.csv",
        &["model", "id", "label", "rating", "score", "rescaled_score"],
        &mut |w| {
            for &model in &order {
                let head = head_for(cfg, model)?;
                for ((s, row), &rating) in
                    bench.shifted.iter().zip(rows_for(model, "shifted")?).zip(&bench.shifted_ratings)
                {
                    w.write_record([
                        model.to_string(),
                        row.id.to_string(),
                        s.label.to_string(),
                        fmt_f64(rating),
                        fmt_f64(row.score),
                        fmt_f64(eval::rescale_score(row.score, &head)?),
                    ])?;
                }
            }
            Ok(())
        },
    )?;

    Ok(manifest)
}

struct LoadedReport {
    label: String,
    report: ExperimentReport,
    bootstraps: BTreeMap<String, BTreeMap<String, BootstrapDistribution>>,
}

fn load_report_dir(dir: &Path, index: usize) -> Result<LoadedReport> {
    if !dir.is_dir() {
        return Err(Error::Input(format!(
            "{} is not an experiment output directory",
            dir.display()
        )));
    }
    let report: ExperimentReport = read_json_file(&dir.join("report").join("report.json"))?;
    let mut bootstraps = BTreeMap::new();
    for model in &report.model_order {
        let path = dir.join("evaluate").join("bootstrap").join(format!("{model}.json"));
        let dists: BTreeMap<String, BootstrapDistribution> = read_json_file(&path)?;
        bootstraps.insert(model.clone(), dists);
    }
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("report{index}"));
    Ok(LoadedReport { label, report, bootstraps })
}

/// Merge several experiment outputs into one significance grid per metric.
/// Every report must target the same benchmark seed; with more than one
/// report, model names are qualified as `label:model`.
pub fn compare_reports(dirs: &[PathBuf]) -> Result<Vec<ComparisonGrid>> {
    if dirs.is_empty() {
        return Err(Error::Input("compare needs at least one report directory".into()));
    }
    let mut loaded = Vec::with_capacity(dirs.len());
    for (i, dir) in dirs.iter().enumerate() {
        loaded.push(load_report_dir(dir, i)?);
    }
    let seed0 = loaded[0].report.benchmark_seed;
    for l in &loaded[1..] {
        if l.report.benchmark_seed != seed0 {
            return Err(Error::Input(format!(
                "reports target different benchmarks: seed {} in {} vs seed {} in {}",
                seed0, loaded[0].label, l.report.benchmark_seed, l.label
            )));
        }
    }
    // Disambiguate duplicate directory names deterministically.
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for l in &mut loaded {
        let n = seen.entry(l.label.clone()).or_insert(0);
        if *n > 0 {
            l.label = format!("{}~{n}", l.label);
        }
        *n += 1;
    }

    let mut grids = Vec::new();
    for metric in super::evaluate::GRID_METRICS {
        let available = loaded.iter().all(|l| {
            l.report
                .model_order
                .iter()
                .all(|m| l.bootstraps.get(m).is_some_and(|d| d.contains_key(metric)))
        });
        if !available {
            continue;
        }
        let mut entries = Vec::new();
        for l in &loaded {
            for model in &l.report.model_order {
                let name = if loaded.len() > 1 {
                    format!("{}:{model}", l.label)
                } else {
                    model.clone()
                };
                entries.push((name, l.bootstraps[model][metric].clone()));
            }
        }
        grids.push(eval::comparison_grid(metric, &entries)?);
    }
    if grids.is_empty() {
        return Err(Error::Input("no metric is present in every report".into()));
    }
    Ok(grids)
}
