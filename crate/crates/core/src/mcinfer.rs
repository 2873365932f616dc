//! Monte Carlo dropout inference: N stochastic forward passes with dropout
//! kept active, averaged in score space into one continuous prediction.

use crate::error::{Error, Result};
use crate::heads::{derived_class, ScoredPrediction};
use crate::net::{DropoutConfig, TrainedModel};
use crate::seed::{indexed_seed, rng_from};
use crate::util::mean;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MC_PASSES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    #[serde(default = "default_passes")]
    pub n_passes: usize,
    pub seed: u64,
}

fn default_passes() -> usize {
    DEFAULT_MC_PASSES
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_passes == 0 {
            return Err(Error::Config("MC inference needs at least 1 pass".into()));
        }
        Ok(())
    }
}

/// N forward passes with dropout in MC mode (the model's training rate),
/// each pass seeded by (seed, pass index) so any pass is reproducible alone.
/// The final score is the arithmetic mean of the per-pass converted scores;
/// raw outputs are averaged elementwise as a diagnostic.
pub fn mc_predict(model: &TrainedModel, x: &[f64], cfg: &McConfig) -> Result<ScoredPrediction> {
    cfg.validate()?;
    let dropout = DropoutConfig::mc(model.dropout_rate);
    let mut per_pass_scores = Vec::with_capacity(cfg.n_passes);
    let mut raw_sum: Option<Vec<f64>> = None;
    for pass in 0..cfg.n_passes {
        let mut rng = rng_from(indexed_seed(cfg.seed, pass as u64));
        let (score, raw) = model.score_once(x, &dropout, Some(&mut rng))?;
        per_pass_scores.push(score);
        match &mut raw_sum {
            None => raw_sum = Some(raw),
            Some(acc) => {
                for (a, r) in acc.iter_mut().zip(&raw) {
                    *a += r;
                }
            }
        }
    }
    let score = mean(&per_pass_scores).expect("n_passes >= 1");
    let mut raw_outputs = raw_sum.expect("n_passes >= 1");
    if cfg.n_passes > 1 {
        for v in &mut raw_outputs {
            *v /= cfg.n_passes as f64;
        }
    }
    Ok(ScoredPrediction {
        score,
        derived_class: derived_class(score, model.head.classes),
        raw_outputs,
        per_pass_scores: Some(per_pass_scores),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::HeadSpec;
    use crate::net::{train, ModelSpec, TrainConfig, TrainedModel};
    use crate::seed::rng_from;
    use crate::synthlab::{LatentSample, PatientId, SampleId};
    use rand::Rng;

    fn sample(id: u64, label: usize, features: Vec<f64>) -> LatentSample {
        LatentSample {
            id: SampleId(id),
            patient_id: PatientId(id),
            timepoint: 0,
            latent: 0.0,
            label,
            features,
        }
    }

    fn trained(head: HeadSpec, dropout_rate: f64, seed: u64) -> TrainedModel {
        let mut train_set = Vec::new();
        for i in 0..60 {
            let label = (i % 3) as usize;
            train_set.push(sample(
                i,
                label,
                vec![label as f64 + 0.02 * (i as f64 / 60.0), 0.5 - 0.01 * i as f64],
            ));
        }
        let val_set: Vec<LatentSample> =
            (0..12).map(|i| sample(200 + i, (i % 3) as usize, vec![(i % 3) as f64, 0.2])).collect();
        let mut head = head;
        if let crate::heads::HeadKind::Siamese { anchor_count, .. } = &mut head.kind {
            *anchor_count = 5;
        }
        let spec = ModelSpec { head, hidden_widths: vec![6], dropout_rate };
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 15,
            batch_size: 8,
            seed,
            balanced_sampling: false,
        };
        train(&spec, &train_set, &val_set, &cfg).unwrap()
    }

    fn all_heads() -> Vec<HeadSpec> {
        vec![
            HeadSpec::multi_class(3),
            HeadSpec::ordinal(3),
            HeadSpec::regression(3),
            HeadSpec::siamese(3, 4),
        ]
    }

    #[test]
    fn rate_zero_mc_equals_deterministic_bit_for_bit() {
        for head in all_heads() {
            let model = trained(head, 0.0, 21);
            let cfg = McConfig { n_passes: 50, seed: 9 };
            for trial in 0..20 {
                let x = [0.1 * trial as f64, -0.3];
                let det = model.predict(&x).unwrap();
                let mc = mc_predict(&model, &x, &cfg).unwrap();
                assert_eq!(det.score.to_bits(), mc.score.to_bits());
                assert_eq!(det.derived_class, mc.derived_class);
                let passes = mc.per_pass_scores.as_ref().unwrap();
                assert!(passes.iter().all(|p| p.to_bits() == det.score.to_bits()));
            }
        }
    }

    #[test]
    fn single_pass_mc_is_that_pass() {
        let model = trained(HeadSpec::multi_class(3), 0.2, 22);
        let cfg = McConfig { n_passes: 1, seed: 33 };
        let p = mc_predict(&model, &[0.4, 0.1], &cfg).unwrap();
        assert_eq!(p.per_pass_scores.as_ref().unwrap().len(), 1);
        assert_eq!(p.score.to_bits(), p.per_pass_scores.as_ref().unwrap()[0].to_bits());
    }

    #[test]
    fn same_seed_reproduces_per_pass_scores() {
        let model = trained(HeadSpec::ordinal(3), 0.2, 23);
        let cfg = McConfig { n_passes: 50, seed: 44 };
        let a = mc_predict(&model, &[0.7, -0.1], &cfg).unwrap();
        let b = mc_predict(&model, &[0.7, -0.1], &cfg).unwrap();
        assert_eq!(a, b);
        let c = mc_predict(&model, &[0.7, -0.1], &McConfig { n_passes: 50, seed: 45 }).unwrap();
        assert_ne!(a.per_pass_scores, c.per_pass_scores);
    }

    #[test]
    fn mean_matches_independent_kahan_oracle() {
        let model = trained(HeadSpec::regression(3), 0.2, 24);
        let cfg = McConfig { n_passes: 50, seed: 55 };
        let p = mc_predict(&model, &[1.2, 0.3], &cfg).unwrap();
        let passes = p.per_pass_scores.as_ref().unwrap();
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        for &v in passes {
            let term = v - comp;
            let t = acc + term;
            comp = (t - acc) - term;
            acc = t;
        }
        let kahan_mean = acc / passes.len() as f64;
        assert!((p.score - kahan_mean).abs() < 1e-12);
    }

    #[test]
    fn mc_score_lies_in_the_hull_of_pass_scores() {
        for head in all_heads() {
            let model = trained(head.clone(), 0.3, 25);
            let cfg = McConfig { n_passes: 40, seed: 66 };
            let mut rng = rng_from(1);
            for _ in 0..10 {
                let x = [rng.random::<f64>() * 2.0, rng.random::<f64>() - 0.5];
                let p = mc_predict(&model, &x, &cfg).unwrap();
                let passes = p.per_pass_scores.as_ref().unwrap();
                let lo = passes.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = passes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(p.score >= lo - 1e-12 && p.score <= hi + 1e-12);
                if head.score_is_bounded() {
                    assert!(p.score >= 0.0 && p.score <= 2.0);
                }
            }
        }
    }

    #[test]
    fn mc_standard_error_decays_like_inverse_sqrt_passes() {
        let model = trained(HeadSpec::multi_class(3), 0.3, 26);
        let x = [0.9, 0.0];
        let se_at = |n_passes: usize| -> f64 {
            let reps = 200;
            let means: Vec<f64> = (0..reps)
                .map(|r| {
                    let cfg = McConfig { n_passes, seed: 1000 + r as u64 };
                    mc_predict(&model, &x, &cfg).unwrap().score
                })
                .collect();
            let m = means.iter().sum::<f64>() / reps as f64;
            (means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps as f64 - 1.0)).sqrt()
        };
        let se10 = se_at(10);
        let se40 = se_at(40);
        let se160 = se_at(160);
        // Each 4x step in passes should shrink the SE by about 2x.
        assert!(se10 > se40 && se40 > se160, "{se10} {se40} {se160}");
        assert!((se10 / se40) > 1.4 && (se10 / se40) < 2.9, "ratio {}", se10 / se40);
        assert!((se40 / se160) > 1.4 && (se40 / se160) < 2.9, "ratio {}", se40 / se160);
    }

    #[test]
    fn zero_passes_is_a_config_error() {
        let model = trained(HeadSpec::regression(3), 0.2, 27);
        let cfg = McConfig { n_passes: 0, seed: 1 };
        assert!(mc_predict(&model, &[0.0, 0.0], &cfg).is_err());
    }
}
