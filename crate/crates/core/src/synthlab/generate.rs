use super::*;
use crate::seed::{child_seed, rng_from};
use crate::util::{logistic, median};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// Sequential id source; samples and patients are numbered in generation
/// order so identical (config, seed) reproduce identical ids.
struct IdAlloc {
    next_sample: u64,
    next_patient: u64,
}

impl IdAlloc {
    fn new(sample_start: u64, patient_start: u64) -> Self {
        IdAlloc { next_sample: sample_start, next_patient: patient_start }
    }

    fn sample(&mut self) -> SampleId {
        let id = SampleId(self.next_sample);
        self.next_sample += 1;
        id
    }

    fn patient(&mut self) -> PatientId {
        let id = PatientId(self.next_patient);
        self.next_patient += 1;
        id
    }
}

/// The noiseless monotone coordinate: a logistic ramp centered at 0.5.
pub fn monotone_feature(latent: f64, steepness: f64) -> f64 {
    logistic(steepness * (latent - 0.5))
}

/// Observable features for a latent value: coordinate 0 is the monotone map
/// plus noise, the remaining D−1 coordinates are pure noise.
pub fn features_from_latent(
    latent: f64,
    config: &BenchmarkConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    features_with_sigma(latent, config.feature_dim, config.steepness, config.noise_sigma, rng)
}

fn features_with_sigma(
    latent: f64,
    dim: usize,
    steepness: f64,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut features = Vec::with_capacity(dim);
    for d in 0..dim {
        let noise: f64 = StandardNormal.sample(rng);
        let base = if d == 0 { monotone_feature(latent, steepness) } else { 0.0 };
        features.push(base + sigma * noise);
    }
    features
}

/// Panel ratings for a sample: the latent's equal-quantile bin on the rating
/// scale plus per-rater noise, rounded and clamped; consensus is the median.
pub fn simulate_fine_ratings(
    sample: &LatentSample,
    panel: &RaterPanel,
    rng: &mut ChaCha8Rng,
) -> (Vec<u32>, f64) {
    let scale = panel.scale_points as f64;
    let bin = (sample.latent * scale).floor() + 1.0;
    let bin = bin.min(scale);
    let mut ratings = Vec::with_capacity(panel.n_raters);
    for _ in 0..panel.n_raters {
        let noise: f64 = StandardNormal.sample(rng);
        let r = (bin + panel.noise_sigma * noise).round();
        ratings.push(r.clamp(1.0, scale) as u32);
    }
    let as_f64: Vec<f64> = ratings.iter().map(|&r| r as f64).collect();
    let consensus = median(&as_f64).expect("panel has at least one rater");
    (ratings, consensus)
}

fn draw_latent_uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random::<f64>()
}

fn draw_latent_with_priors(priors: &[f64], thresholds: &ThresholdSpec, rng: &mut ChaCha8Rng) -> f64 {
    let total: f64 = priors.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut class = priors.len() - 1;
    for (c, &p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            class = c;
            break;
        }
    }
    let (low, high) = thresholds.class_bounds(class);
    low + rng.random::<f64>() * (high - low)
}

fn gen_samples(
    n: usize,
    config: &BenchmarkConfig,
    priors: Option<&[f64]>,
    noise_scale: f64,
    timepoint: u32,
    alloc: &mut IdAlloc,
    rng: &mut ChaCha8Rng,
) -> Vec<LatentSample> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let latent = match priors {
            None => draw_latent_uniform(rng),
            Some(p) => draw_latent_with_priors(p, &config.thresholds, rng),
        };
        let features = features_with_sigma(
            latent,
            config.feature_dim,
            config.steepness,
            config.noise_sigma * noise_scale,
            rng,
        );
        out.push(LatentSample {
            id: alloc.sample(),
            patient_id: alloc.patient(),
            timepoint,
            latent,
            label: config.thresholds.bucket(latent),
            features,
        });
    }
    out
}

/// Ranked subset: stratified round-robin over classes so every class present
/// in the test set is represented, then ranked by latent (ties by id).
fn select_ranked(
    test: &[LatentSample],
    n_ranked: usize,
    classes: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<RankedSample> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, s) in test.iter().enumerate() {
        by_class[s.label].push(i);
    }
    for members in &mut by_class {
        shuffle(members, rng);
    }
    let mut cursors = vec![0usize; classes];
    let mut selected = Vec::with_capacity(n_ranked);
    while selected.len() < n_ranked {
        let mut progressed = false;
        for c in 0..classes {
            if selected.len() == n_ranked {
                break;
            }
            if cursors[c] < by_class[c].len() {
                selected.push(by_class[c][cursors[c]]);
                cursors[c] += 1;
                progressed = true;
            }
        }
        if !progressed {
            break; // n_ranked <= n_test, so this cannot trigger under valid config
        }
    }
    let mut chosen: Vec<&LatentSample> = selected.iter().map(|&i| &test[i]).collect();
    chosen.sort_by(|a, b| {
        a.latent.partial_cmp(&b.latent).expect("latents are finite").then(a.id.cmp(&b.id))
    });
    chosen
        .into_iter()
        .enumerate()
        .map(|(i, s)| RankedSample { sample: s.clone(), rank: i + 1 })
        .collect()
}

use crate::util::shuffle;

fn select_fine_rated(
    test: &[LatentSample],
    n: usize,
    panel: &RaterPanel,
    select_rng: &mut ChaCha8Rng,
    rating_rng: &mut ChaCha8Rng,
) -> Vec<FineRatedSample> {
    let mut indices: Vec<usize> = (0..test.len()).collect();
    shuffle(&mut indices, select_rng);
    let mut chosen: Vec<usize> = indices.into_iter().take(n).collect();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|i| {
            let sample = test[i].clone();
            let (ratings, consensus) = simulate_fine_ratings(&sample, panel, rating_rng);
            FineRatedSample { sample, ratings, consensus }
        })
        .collect()
}

/// Latent at the second timepoint after additive drift, clamped into [0,1].
pub(crate) fn drifted_latent(latent_t0: f64, drift: f64) -> f64 {
    (latent_t0 + drift).clamp(0.0, 1.0)
}

fn longitudinal_pairs_impl(
    config: &BenchmarkConfig,
    alloc: &mut IdAlloc,
    rng: &mut ChaCha8Rng,
) -> Vec<LongitudinalPair> {
    let drift_dist = Normal::new(config.drift.mean, config.drift.sigma)
        .expect("drift sigma validated as >= 0");
    let mut pairs = Vec::with_capacity(config.n_longitudinal);
    for _ in 0..config.n_longitudinal {
        let patient = alloc.patient();
        let latent_t0 = draw_latent_uniform(rng);
        let drift = if config.drift.sigma == 0.0 { config.drift.mean } else { drift_dist.sample(rng) };
        let latent_t1 = drifted_latent(latent_t0, drift);
        let mut make = |latent: f64, timepoint: u32| {
            let features = features_with_sigma(
                latent,
                config.feature_dim,
                config.steepness,
                config.noise_sigma,
                rng,
            );
            let sample = LatentSample {
                id: alloc.sample(),
                patient_id: patient,
                timepoint,
                latent,
                label: config.thresholds.bucket(latent),
                features,
            };
            let (ratings, consensus) = simulate_fine_ratings(&sample, &config.panel, rng);
            FineRatedSample { sample, ratings, consensus }
        };
        let t0 = make(latent_t0, 0);
        let t1 = make(latent_t1, 1);
        pairs.push(LongitudinalPair { t0, t1 });
    }
    pairs
}

/// Standalone pair generation with ids starting at 0; inside a benchmark the
/// same routine runs with the benchmark's id allocator.
pub fn make_longitudinal_pairs(
    config: &BenchmarkConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<LongitudinalPair> {
    let mut alloc = IdAlloc::new(0, 0);
    longitudinal_pairs_impl(config, &mut alloc, rng)
}

fn shifted_testset_impl(
    config: &BenchmarkConfig,
    shift: &DomainShiftSpec,
    alloc: &mut IdAlloc,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LatentSample>> {
    shift.validate(config.classes)?;
    let n = shift.n.unwrap_or(config.n_test);
    Ok(gen_samples(
        n,
        config,
        shift.class_priors.as_deref(),
        shift.noise_scale,
        0,
        alloc,
        rng,
    ))
}

/// Out-of-domain test set with ids starting at 0. The identity shift routes
/// through the same sampling path as in-domain test generation, so identical
/// seeds give identical sets.
pub fn make_shifted_testset(
    config: &BenchmarkConfig,
    shift: &DomainShiftSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LatentSample>> {
    let mut alloc = IdAlloc::new(0, 0);
    shifted_testset_impl(config, shift, &mut alloc, rng)
}

pub(super) fn shifted_testset_with_ids(
    config: &BenchmarkConfig,
    shift: &DomainShiftSpec,
    sample_start: u64,
    patient_start: u64,
    seed: u64,
) -> Result<Vec<LatentSample>> {
    let mut alloc = IdAlloc::new(sample_start, patient_start);
    let mut rng = rng_from(seed);
    shifted_testset_impl(config, shift, &mut alloc, &mut rng)
}

/// Full benchmark: train/val/test splits, ranked and fine-rated subsets,
/// longitudinal pairs, and the continuous ground-truth view of the test set.
/// Every stage draws from its own child stream of `seed`.
pub fn generate_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<Benchmark> {
    config.validate()?;
    let mut alloc = IdAlloc::new(0, 0);

    let mut rng_train = rng_from(child_seed(seed, "split/train"));
    let mut rng_val = rng_from(child_seed(seed, "split/val"));
    let mut rng_test = rng_from(child_seed(seed, "split/test"));
    let train = gen_samples(config.n_train, config, None, 1.0, 0, &mut alloc, &mut rng_train);
    let val = gen_samples(config.n_val, config, None, 1.0, 0, &mut alloc, &mut rng_val);
    let test = gen_samples(config.n_test, config, None, 1.0, 0, &mut alloc, &mut rng_test);

    let mut rng_ranked = rng_from(child_seed(seed, "ranked-select"));
    let ranked_test = select_ranked(&test, config.n_ranked, config.classes, &mut rng_ranked);

    let mut rng_fine_sel = rng_from(child_seed(seed, "fine-select"));
    let mut rng_fine_rate = rng_from(child_seed(seed, "fine-ratings"));
    let fine_rated_test = select_fine_rated(
        &test,
        config.n_fine_rated,
        &config.panel,
        &mut rng_fine_sel,
        &mut rng_fine_rate,
    );

    let mut rng_long = rng_from(child_seed(seed, "longitudinal"));
    let longitudinal_pairs = longitudinal_pairs_impl(config, &mut alloc, &mut rng_long);

    let continuous_test = test
        .iter()
        .map(|s| ContinuousSample { sample: s.clone(), ground_truth: s.latent })
        .collect();

    Ok(Benchmark {
        config: config.clone(),
        seed,
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
    use crate::eval::spearman;
    use std::collections::BTreeSet;

    fn test_config() -> BenchmarkConfig {
        BenchmarkConfig {
            classes: 3,
            feature_dim: 4,
            thresholds: ThresholdSpec::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap(),
            noise_sigma: 0.05,
            steepness: 4.0,
            n_train: 200,
            n_val: 60,
            n_test: 120,
            n_ranked: 40,
            n_fine_rated: 30,
            n_longitudinal: 20,
            panel: RaterPanel::default(),
            drift: DriftSpec::default(),
        }
    }

    #[test]
    fn bucket_counts_cuts_at_or_below() {
        let t = ThresholdSpec::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(t.bucket(0.0), 0);
        assert_eq!(t.bucket(0.29), 0);
        assert_eq!(t.bucket(0.3), 1);
        assert_eq!(t.bucket(0.69), 1);
        assert_eq!(t.bucket(0.7), 2);
        assert_eq!(t.bucket(1.0), 2);
    }

    #[test]
    fn from_proportions_places_cumulative_cuts() {
        let t = ThresholdSpec::from_proportions(&[0.823, 0.146, 0.031]).unwrap();
        assert_eq!(t.classes(), 3);
        assert!((t.cuts[0] - 0.823).abs() < 1e-12);
        assert!((t.cuts[1] - 0.969).abs() < 1e-12);
    }

    #[test]
    fn non_increasing_cuts_rejected() {
        assert!(ThresholdSpec::new(vec![0.5, 0.5]).is_err());
        assert!(ThresholdSpec::new(vec![0.7, 0.3]).is_err());
        assert!(ThresholdSpec::new(vec![0.0, 0.5]).is_err());
        assert!(ThresholdSpec::new(vec![]).is_err());
    }

    #[test]
    fn monotone_coordinate_hits_minimum_at_zero_latent() {
        let cfg = BenchmarkConfig { noise_sigma: 0.0, ..test_config() };
        let mut rng = rng_from(1);
        let f = features_from_latent(0.0, &cfg, &mut rng);
        // logistic(4*(0-0.5)) = logistic(-2)
        assert!((f[0] - 0.1192029220221175_6).abs() < 1e-15);
        assert_eq!(f[1], 0.0);
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn monotone_coordinate_increases_with_latent() {
        let cfg = BenchmarkConfig { noise_sigma: 0.0, ..test_config() };
        let mut rng = rng_from(1);
        let lo = features_from_latent(0.5, &cfg, &mut rng)[0];
        let hi = features_from_latent(0.9, &cfg, &mut rng)[0];
        assert!(hi > lo);
    }

    #[test]
    fn noiseless_sweep_has_perfect_rank_agreement() {
        let cfg = BenchmarkConfig { noise_sigma: 0.0, ..test_config() };
        let mut rng = rng_from(1);
        let latents: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let coords: Vec<f64> =
            latents.iter().map(|&l| features_from_latent(l, &cfg, &mut rng)[0]).collect();
        assert!((spearman(&latents, &coords).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_ratings_collapse_to_the_bin() {
        let cfg = test_config();
        let panel = RaterPanel { noise_sigma: 0.0, ..RaterPanel::default() };
        let mut rng = rng_from(2);
        // latent 0.5 on a 9-point scale falls in bin floor(4.5)+1 = 5
        let sample = LatentSample {
            id: SampleId(0),
            patient_id: PatientId(0),
            timepoint: 0,
            latent: 0.5,
            label: cfg.thresholds.bucket(0.5),
            features: vec![0.0],
        };
        let (ratings, consensus) = simulate_fine_ratings(&sample, &panel, &mut rng);
        assert_eq!(ratings, vec![5, 5, 5, 5, 5]);
        assert_eq!(consensus, 5.0);
    }

    #[test]
    fn ratings_respect_scale_bounds_at_extremes() {
        let panel = RaterPanel { noise_sigma: 50.0, ..RaterPanel::default() };
        let mut rng = rng_from(3);
        let sample = LatentSample {
            id: SampleId(0),
            patient_id: PatientId(0),
            timepoint: 0,
            latent: 1.0,
            label: 2,
            features: vec![],
        };
        for _ in 0..200 {
            let (ratings, consensus) = simulate_fine_ratings(&sample, &panel, &mut rng);
            assert!(ratings.iter().all(|&r| (1..=9).contains(&r)));
            assert!((1.0..=9.0).contains(&consensus));
        }
    }

    #[test]
    fn drift_arithmetic_is_clamped_addition() {
        assert_eq!(drifted_latent(0.5, 0.3), 0.8);
        assert_eq!(drifted_latent(0.9, 0.3), 1.0);
        assert_eq!(drifted_latent(0.1, -0.5), 0.0);
    }

    #[test]
    fn zero_drift_keeps_latents_identical() {
        let cfg = BenchmarkConfig {
            drift: DriftSpec { mean: 0.0, sigma: 0.0 },
            n_longitudinal: 25,
            ..test_config()
        };
        let mut rng = rng_from(4);
        for pair in make_longitudinal_pairs(&cfg, &mut rng) {
            assert_eq!(pair.t0.sample.latent, pair.t1.sample.latent);
            assert_eq!(pair.t0.sample.patient_id, pair.t1.sample.patient_id);
            assert_eq!(pair.t0.sample.timepoint, 0);
            assert_eq!(pair.t1.sample.timepoint, 1);
        }
    }

    #[test]
    fn symmetric_drift_is_mean_zero() {
        // Clamping biases extremes, so park t0 away from the boundary by using
        // a small sigma; 3-standard-error band around 0.
        let cfg = BenchmarkConfig {
            drift: DriftSpec { mean: 0.0, sigma: 0.05 },
            n_longitudinal: 1000,
            ..test_config()
        };
        let mut rng = rng_from(5);
        let pairs = make_longitudinal_pairs(&cfg, &mut rng);
        let diffs: Vec<f64> =
            pairs.iter().map(|p| p.t1.sample.latent - p.t0.sample.latent).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let se = (var / diffs.len() as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean drift {mean} exceeds 3 SE {se}");
    }

    #[test]
    fn identity_shift_matches_plain_generation() {
        let cfg = test_config();
        let shift = DomainShiftSpec::default();
        let mut r1 = rng_from(7);
        let mut r2 = rng_from(7);
        let shifted = make_shifted_testset(&cfg, &shift, &mut r1).unwrap();
        let mut alloc = IdAlloc::new(0, 0);
        let plain = gen_samples(cfg.n_test, &cfg, None, 1.0, 0, &mut alloc, &mut r2);
        assert_eq!(shifted, plain);
    }

    #[test]
    fn prior_shift_hits_target_class_fractions() {
        let cfg = test_config();
        let shift = DomainShiftSpec {
            n: Some(10000),
            class_priors: Some(vec![0.96, 0.03, 0.01]),
            noise_scale: 1.0,
        };
        let mut rng = rng_from(8);
        let shifted = make_shifted_testset(&cfg, &shift, &mut rng).unwrap();
        let frac0 =
            shifted.iter().filter(|s| s.label == 0).count() as f64 / shifted.len() as f64;
        assert!((frac0 - 0.96).abs() < 0.01, "class-0 fraction {frac0}");
    }

    #[test]
    fn benchmark_class_proportions_follow_cut_placement() {
        let cfg = BenchmarkConfig {
            thresholds: ThresholdSpec::from_proportions(&[0.823, 0.146, 0.031]).unwrap(),
            n_train: 5611,
            n_val: 100,
            n_test: 100,
            n_ranked: 50,
            n_fine_rated: 50,
            ..test_config()
        };
        let b = generate_benchmark(&cfg, 11).unwrap();
        let n = b.train.len() as f64;
        let frac = |c: usize| b.train.iter().filter(|s| s.label == c).count() as f64 / n;
        assert!((frac(0) - 0.823).abs() < 0.02);
        assert!((frac(1) - 0.146).abs() < 0.02);
        assert!((frac(2) - 0.031).abs() < 0.02);
    }

    #[test]
    fn uniform_thirds_balance_within_two_percent() {
        let cfg = BenchmarkConfig { n_train: 30000, ..test_config() };
        let b = generate_benchmark(&cfg, 12).unwrap();
        let n = b.train.len() as f64;
        for c in 0..3 {
            let frac = b.train.iter().filter(|s| s.label == c).count() as f64 / n;
            assert!((frac - 1.0 / 3.0).abs() < 0.02, "class {c} fraction {frac}");
        }
    }

    #[test]
    fn same_seed_reproduces_the_benchmark_exactly() {
        let cfg = test_config();
        let a = generate_benchmark(&cfg, 99).unwrap();
        let b = generate_benchmark(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_benchmark(&cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn patients_never_cross_splits() {
        let b = generate_benchmark(&test_config(), 13).unwrap();
        let collect = |set: &[LatentSample]| -> BTreeSet<PatientId> {
            set.iter().map(|s| s.patient_id).collect()
        };
        let train = collect(&b.train);
        let val = collect(&b.val);
        let test = collect(&b.test);
        let long: BTreeSet<PatientId> =
            b.longitudinal_pairs.iter().map(|p| p.t0.sample.patient_id).collect();
        assert!(train.is_disjoint(&val));
        assert!(train.is_disjoint(&test));
        assert!(val.is_disjoint(&test));
        assert!(long.is_disjoint(&train) && long.is_disjoint(&val) && long.is_disjoint(&test));
    }

    #[test]
    fn labels_equal_threshold_buckets_everywhere() {
        let b = generate_benchmark(&test_config(), 14).unwrap();
        for s in b.all_samples() {
            assert_eq!(s.label, b.config.thresholds.bucket(s.latent));
            assert!((0.0..=1.0).contains(&s.latent));
            assert_eq!(s.features.len(), b.config.feature_dim);
        }
    }

    #[test]
    fn ranks_follow_latent_order() {
        let b = generate_benchmark(&test_config(), 15).unwrap();
        assert_eq!(b.ranked_test.len(), b.config.n_ranked);
        for w in b.ranked_test.windows(2) {
            assert_eq!(w[1].rank, w[0].rank + 1);
            assert!(
                w[0].sample.latent < w[1].sample.latent
                    || (w[0].sample.latent == w[1].sample.latent
                        && w[0].sample.id < w[1].sample.id)
            );
        }
        assert_eq!(b.ranked_test[0].rank, 1);
    }

    #[test]
    fn ranked_subset_is_stratified() {
        let b = generate_benchmark(&test_config(), 16).unwrap();
        for c in 0..3 {
            let present_in_test = b.test.iter().any(|s| s.label == c);
            let present_in_ranked = b.ranked_test.iter().any(|r| r.sample.label == c);
            assert_eq!(present_in_test, present_in_ranked, "class {c}");
        }
    }

    #[test]
    fn continuous_ground_truth_is_the_latent() {
        let b = generate_benchmark(&test_config(), 17).unwrap();
        assert_eq!(b.continuous_test.len(), b.test.len());
        for (c, t) in b.continuous_test.iter().zip(&b.test) {
            assert_eq!(c.sample, *t);
            assert_eq!(c.ground_truth, t.latent);
        }
    }

    #[test]
    fn shifted_testset_extends_id_space() {
        let b = generate_benchmark(&test_config(), 18).unwrap();
        let shift = DomainShiftSpec { n: Some(50), class_priors: None, noise_scale: 2.0 };
        let shifted = b.shifted_testset(&shift, 55).unwrap();
        assert_eq!(shifted.len(), 50);
        let min_new = shifted.iter().map(|s| s.id.0).min().unwrap();
        assert!(min_new >= b.next_sample_id() - 50);
        let existing: BTreeSet<u64> = b.all_samples().iter().map(|s| s.id.0).collect();
        assert!(shifted.iter().all(|s| !existing.contains(&s.id.0)));
    }

    #[test]
    fn undersized_splits_rejected() {
        let cfg = BenchmarkConfig { n_train: 2, ..test_config() };
        assert!(generate_benchmark(&cfg, 1).is_err());
        let cfg = BenchmarkConfig { n_ranked: 121, ..test_config() };
        assert!(generate_benchmark(&cfg, 1).is_err());
        let cfg = BenchmarkConfig { classes: 4, ..test_config() };
        assert!(generate_benchmark(&cfg, 1).is_err());
    }
}
