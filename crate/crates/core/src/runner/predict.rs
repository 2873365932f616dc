//! Scoring of evaluation sets and the prediction CSV format: one file per
//! (model, set), columns `id,score,derived_class` plus one `pass_i` column
//! per Monte Carlo pass when the model scores stochastically. Floats are
//! written with exact round-trip precision so reloaded predictions are
//! bit-identical to computed ones.

use crate::error::{Error, Result};
use crate::mcinfer::{mc_predict, McConfig};
use crate::net::TrainedModel;
use crate::seed::indexed_seed;
use crate::synthlab::{fmt_f64, LatentSample};
use std::path::Path;

/// Evaluation sets scored for every model, in emission order.
pub const PREDICTION_SETS: [&str; 6] =
    ["ranked", "fine", "continuous", "shifted", "longitudinal_t0", "longitudinal_t1"];

/// One scored sample; `passes` carries per-pass scores for MC models.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: u64,
    pub score: f64,
    pub derived_class: usize,
    pub passes: Option<Vec<f64>>,
}

/// Score every sample in order. For MC models each row draws its own pass
/// streams from (base_seed, row index) so single rows are reproducible
/// without rescoring the whole set.
pub fn predict_rows(
    model: &TrainedModel,
    samples: &[&LatentSample],
    mc: Option<(u64, usize)>,
) -> Result<Vec<PredictionRow>> {
    let mut rows = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let prediction = match mc {
            Some((base_seed, n_passes)) => {
                let cfg = McConfig { n_passes, seed: indexed_seed(base_seed, i as u64) };
                mc_predict(model, &sample.features, &cfg)?
            }
            None => model.predict(&sample.features)?,
        };
        rows.push(PredictionRow {
            id: sample.id.0,
            score: prediction.score,
            derived_class: prediction.derived_class,
            passes: prediction.per_pass_scores,
        });
    }
    Ok(rows)
}

pub fn write_predictions_csv(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let n_passes = rows.first().and_then(|r| r.passes.as_ref()).map_or(0, Vec::len);
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "score".to_string(), "derived_class".to_string()];
    header.extend((0..n_passes).map(|i| format!("pass_{i}")));
    writer.write_record(&header)?;
    for row in rows {
        let row_passes = row.passes.as_ref().map_or(0, Vec::len);
        if row_passes != n_passes {
            return Err(Error::Input(format!(
                "prediction row {} has {} passes, expected {}",
                row.id, row_passes, n_passes
            )));
        }
        let mut record =
            vec![row.id.to_string(), fmt_f64(row.score), row.derived_class.to_string()];
        if let Some(passes) = &row.passes {
            record.extend(passes.iter().map(|&p| fmt_f64(p)));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_predictions_csv(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let fixed = ["id", "score", "derived_class"];
    if header.len() < fixed.len() || header.iter().take(3).ne(fixed) {
        return Err(Error::Input(format!(
            "{}: unexpected prediction header {:?}",
            path.display(),
            header
        )));
    }
    for (i, name) in header.iter().skip(3).enumerate() {
        if name != format!("pass_{i}") {
            return Err(Error::Input(format!(
                "{}: unexpected pass column {name:?}",
                path.display()
            )));
        }
    }
    let n_passes = header.len() - fixed.len();
    let parse = |field: &str, what: &str| -> Result<f64> {
        field.parse::<f64>().map_err(|e| {
            Error::Input(format!("{}: bad {what} value {field:?}: {e}", path.display()))
        })
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Input(format!(
                "{}: row has {} fields, expected {}",
                path.display(),
                record.len(),
                header.len()
            )));
        }
        let id = record[0].parse::<u64>().map_err(|e| {
            Error::Input(format!("{}: bad id {:?}: {e}", path.display(), &record[0]))
        })?;
        let score = parse(&record[1], "score")?;
        let derived_class = record[2].parse::<usize>().map_err(|e| {
            Error::Input(format!("{}: bad class {:?}: {e}", path.display(), &record[2]))
        })?;
        let passes = if n_passes == 0 {
            None
        } else {
            let mut p = Vec::with_capacity(n_passes);
            for i in 0..n_passes {
                p.push(parse(&record[3 + i], "pass")?);
            }
            Some(p)
        };
        rows.push(PredictionRow { id, score, derived_class, passes });
    }
    Ok(rows)
}
