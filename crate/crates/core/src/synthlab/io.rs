use super::*;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Floats in CSV are written with 17 significant digits, which always
/// round-trips an f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// One sample table as CSV: id, patient_id, timepoint, latent, label, f_0..f_{D−1}.
pub fn write_samples_csv(path: &Path, samples: &[&LatentSample], feature_dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "id".to_string(),
        "patient_id".to_string(),
        "timepoint".to_string(),
        "latent".to_string(),
        "label".to_string(),
    ];
    for d in 0..feature_dim {
        header.push(format!("f_{d}"));
    }
    w.write_record(&header)?;
    for s in samples {
        if s.features.len() != feature_dim {
            return Err(Error::Input(format!(
                "sample {} has {} features, expected {feature_dim}",
                s.id.0,
                s.features.len()
            )));
        }
        let mut row = vec![
            s.id.0.to_string(),
            s.patient_id.0.to_string(),
            s.timepoint.to_string(),
            fmt_f64(s.latent),
            s.label.to_string(),
        ];
        row.extend(s.features.iter().map(|&f| fmt_f64(f)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_samples_csv(path: &Path) -> Result<Vec<LatentSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let fixed = ["id", "patient_id", "timepoint", "latent", "label"];
    if header.len() < fixed.len() || header.iter().take(5).ne(fixed.iter().copied()) {
        return Err(Error::Input(format!("unexpected sample CSV header in {}", path.display())));
    }
    let feature_dim = header.len() - fixed.len();
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Input("short CSV record".into()))
        };
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Input(format!("bad float {s:?}: {e}")))
        };
        let parse_u = |s: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|e| Error::Input(format!("bad integer {s:?}: {e}")))
        };
        let mut features = Vec::with_capacity(feature_dim);
        for d in 0..feature_dim {
            features.push(parse_f(field(5 + d)?)?);
        }
        out.push(LatentSample {
            id: SampleId(parse_u(field(0)?)?),
            patient_id: PatientId(parse_u(field(1)?)?),
            timepoint: parse_u(field(2)?)? as u32,
            latent: parse_f(field(3)?)?,
            label: parse_u(field(4)?)? as usize,
            features,
        });
    }
    Ok(out)
}

/// Index lists and label annotations that cannot live in the flat CSV.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    config: BenchmarkConfig,
    seed: u64,
    train_ids: Vec<SampleId>,
    val_ids: Vec<SampleId>,
    test_ids: Vec<SampleId>,
    ranked: Vec<RankedEntry>,
    fine_rated: Vec<FineEntry>,
    longitudinal: Vec<LongitudinalEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RankedEntry {
    id: SampleId,
    rank: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FineEntry {
    id: SampleId,
    ratings: Vec<u32>,
    consensus: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LongitudinalEntry {
    t0: FineEntry,
    t1: FineEntry,
}

const SAMPLES_FILE: &str = "samples.csv";
const SIDECAR_FILE: &str = "sidecar.json";

/// Write a benchmark as samples.csv + sidecar.json under `dir`.
pub fn save_benchmark(benchmark: &Benchmark, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_samples_csv(
        &dir.join(SAMPLES_FILE),
        &benchmark.all_samples(),
        benchmark.config.feature_dim,
    )?;
    let fine_entry = |f: &FineRatedSample| FineEntry {
        id: f.sample.id,
        ratings: f.ratings.clone(),
        consensus: f.consensus,
    };
    let sidecar = Sidecar {
        config: benchmark.config.clone(),
        seed: benchmark.seed,
        train_ids: benchmark.train.iter().map(|s| s.id).collect(),
        val_ids: benchmark.val.iter().map(|s| s.id).collect(),
        test_ids: benchmark.test.iter().map(|s| s.id).collect(),
        ranked: benchmark
            .ranked_test
            .iter()
            .map(|r| RankedEntry { id: r.sample.id, rank: r.rank })
            .collect(),
        fine_rated: benchmark.fine_rated_test.iter().map(fine_entry).collect(),
        longitudinal: benchmark
            .longitudinal_pairs
            .iter()
            .map(|p| LongitudinalEntry { t0: fine_entry(&p.t0), t1: fine_entry(&p.t1) })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(dir.join(SIDECAR_FILE), json + "\n")?;
    Ok(())
}

/// Inverse of `save_benchmark`; reconstructs the exact original benchmark.
pub fn load_benchmark(dir: &Path) -> Result<Benchmark> {
    let samples = load_samples_csv(&dir.join(SAMPLES_FILE))?;
    let sidecar: Sidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.join(SIDECAR_FILE))?)?;
    let by_id: BTreeMap<SampleId, &LatentSample> = samples.iter().map(|s| (s.id, s)).collect();
    let lookup = |id: SampleId| -> Result<LatentSample> {
        by_id
            .get(&id)
            .map(|s| (*s).clone())
            .ok_or_else(|| Error::Input(format!("sidecar references missing sample {}", id.0)))
    };
    let fine = |e: &FineEntry| -> Result<FineRatedSample> {
        Ok(FineRatedSample {
            sample: lookup(e.id)?,
            ratings: e.ratings.clone(),
            consensus: e.consensus,
        })
    };

    let train = sidecar.train_ids.iter().map(|&id| lookup(id)).collect::<Result<Vec<_>>>()?;
    let val = sidecar.val_ids.iter().map(|&id| lookup(id)).collect::<Result<Vec<_>>>()?;
    let test: Vec<LatentSample> =
        sidecar.test_ids.iter().map(|&id| lookup(id)).collect::<Result<Vec<_>>>()?;
    let ranked_test = sidecar
        .ranked
        .iter()
        .map(|e| Ok(RankedSample { sample: lookup(e.id)?, rank: e.rank }))
        .collect::<Result<Vec<_>>>()?;
    let fine_rated_test =
        sidecar.fine_rated.iter().map(fine).collect::<Result<Vec<_>>>()?;
    let longitudinal_pairs = sidecar
        .longitudinal
        .iter()
        .map(|e| Ok(LongitudinalPair { t0: fine(&e.t0)?, t1: fine(&e.t1)? }))
        .collect::<Result<Vec<_>>>()?;
    let continuous_test = test
        .iter()
        .map(|s| ContinuousSample { sample: s.clone(), ground_truth: s.latent })
        .collect();

    Ok(Benchmark {
        config: sidecar.config,
        seed: sidecar.seed,
        train,
        val,
        test,
        ranked_test,
        fine_rated_test,
        longitudinal_pairs,
        continuous_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthlab::generate_benchmark;

    fn small_config() -> BenchmarkConfig {
        BenchmarkConfig {
            classes: 3,
            feature_dim: 3,
            thresholds: ThresholdSpec::new(vec![0.4, 0.8]).unwrap(),
            noise_sigma: 0.1,
            steepness: 4.0,
            n_train: 30,
            n_val: 10,
            n_test: 20,
            n_ranked: 10,
            n_fine_rated: 8,
            n_longitudinal: 5,
            panel: RaterPanel::default(),
            drift: DriftSpec::default(),
        }
    }

    #[test]
    fn benchmark_round_trips_exactly() {
        let b = generate_benchmark(&small_config(), 321).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_benchmark(&b, dir.path()).unwrap();
        let loaded = load_benchmark(dir.path()).unwrap();
        assert_eq!(b, loaded);
    }

    #[test]
    fn save_is_byte_deterministic() {
        let b = generate_benchmark(&small_config(), 555).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        save_benchmark(&b, d1.path()).unwrap();
        save_benchmark(&b, d2.path()).unwrap();
        for file in [SAMPLES_FILE, SIDECAR_FILE] {
            let a = std::fs::read(d1.path().join(file)).unwrap();
            let b = std::fs::read(d2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between saves");
        }
    }

    #[test]
    fn csv_floats_round_trip_exactly() {
        let b = generate_benchmark(&small_config(), 777).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let all = b.all_samples();
        write_samples_csv(&path, &all, b.config.feature_dim).unwrap();
        let loaded = load_samples_csv(&path).unwrap();
        for (orig, read) in all.iter().zip(&loaded) {
            assert_eq!(orig.latent.to_bits(), read.latent.to_bits());
            for (a, bb) in orig.features.iter().zip(&read.features) {
                assert_eq!(a.to_bits(), bb.to_bits());
            }
        }
    }

    #[test]
    fn missing_sidecar_reference_is_an_input_error() {
        let b = generate_benchmark(&small_config(), 888).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_benchmark(&b, dir.path()).unwrap();
        // Truncate the CSV to drop samples the sidecar still references.
        let csv_path = dir.path().join(SAMPLES_FILE);
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let kept: Vec<&str> = text.lines().take(5).collect();
        std::fs::write(&csv_path, kept.join("\n") + "\n").unwrap();
        assert!(load_benchmark(dir.path()).is_err());
    }
}
