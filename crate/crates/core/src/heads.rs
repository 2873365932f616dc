//! The four prediction heads: losses and raw-output → continuous-score
//! converters. Multi-class averages softmax mass by class index, the ordinal
//! head sums exceedance probabilities over its k−1 shared-weight binary
//! tasks, regression passes its output through, and the Siamese head scores
//! by median embedding distance to a pool of lowest-class anchors.

use crate::error::{Error, Result};
use crate::synthlab::LatentSample;
use crate::util::{logistic, softplus};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadKind {
    MultiClass,
    Ordinal,
    Regression,
    Siamese { embed_dim: usize, margin: f64, anchor_count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    #[serde(flatten)]
    pub kind: HeadKind,
    /// Number of ordinal classes k (>= 2 for every head).
    pub classes: usize,
}

pub const DEFAULT_ANCHOR_COUNT: usize = 10;
pub const DEFAULT_MARGIN: f64 = 1.0;

impl HeadSpec {
    pub fn multi_class(classes: usize) -> Self {
        HeadSpec { kind: HeadKind::MultiClass, classes }
    }

    pub fn ordinal(classes: usize) -> Self {
        HeadSpec { kind: HeadKind::Ordinal, classes }
    }

    pub fn regression(classes: usize) -> Self {
        HeadSpec { kind: HeadKind::Regression, classes }
    }

    pub fn siamese(classes: usize, embed_dim: usize) -> Self {
        HeadSpec {
            kind: HeadKind::Siamese {
                embed_dim,
                margin: DEFAULT_MARGIN,
                anchor_count: DEFAULT_ANCHOR_COUNT,
            },
            classes,
        }
    }

    /// Width of the network's output layer for this head.
    pub fn output_width(&self) -> usize {
        match self.kind {
            HeadKind::MultiClass => self.classes,
            HeadKind::Ordinal => self.classes - 1,
            HeadKind::Regression => 1,
            HeadKind::Siamese { embed_dim, .. } => embed_dim,
        }
    }

    /// Heads whose scores are confined to [0, k−1] by construction.
    pub fn score_is_bounded(&self) -> bool {
        matches!(self.kind, HeadKind::MultiClass | HeadKind::Ordinal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("heads need at least 2 classes".into()));
        }
        if let HeadKind::Siamese { embed_dim, margin, anchor_count } = self.kind {
            if embed_dim == 0 {
                return Err(Error::Config("siamese embedding dimension must be >= 1".into()));
            }
            if !(margin > 0.0) {
                return Err(Error::Config("siamese margin must be > 0".into()));
            }
            if anchor_count == 0 {
                return Err(Error::Config("siamese needs at least 1 anchor".into()));
            }
        }
        Ok(())
    }
}

/// One model prediction on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub score: f64,
    pub derived_class: usize,
    /// Raw head outputs (softmax logits, ordinal logits, regression output,
    /// or embedding); for MC predictions, the per-pass elementwise mean.
    pub raw_outputs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pass_scores: Option<Vec<f64>>,
}

/// Max-subtracted softmax; outputs are positive and sum to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    logistic(x)
}

/// Continuous score of a softmax vector: probability mass weighted by class
/// index, Σ p_i·(i−1) with 1-based i. Range [0, k−1].
pub fn cl_score(probabilities: &[f64]) -> Result<f64> {
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Input(format!("probabilities sum to {sum}, not 1")));
    }
    if probabilities.iter().any(|&p| p < 0.0) {
        return Err(Error::Input("negative probability".into()));
    }
    Ok(probabilities.iter().enumerate().map(|(i, &p)| p * i as f64).sum())
}

/// Continuous score of an ordinal head: sum of the k−1 exceedance
/// probabilities σ(logit_j). Range [0, k−1].
pub fn o_score(logits: &[f64]) -> f64 {
    logits.iter().map(|&z| sigmoid(z)).sum()
}

/// Cross-entropy loss on logits; returns (loss, dloss/dlogits).
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Input(format!("label {label} out of range for {} logits", logits.len())));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Binary targets of the ordinal decomposition: t_j = 1 iff label > j
/// (0-based j over the k−1 tasks).
pub fn ordinal_targets(classes: usize, label: usize) -> Vec<f64> {
    (0..classes - 1).map(|j| if label > j { 1.0 } else { 0.0 }).collect()
}

/// Sum of the k−1 binary cross-entropy terms of the ordinal decomposition;
/// returns (loss, dloss/dlogits). Uses softplus so extreme logits stay finite.
pub fn coral_loss(logits: &[f64], label: usize, classes: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() != classes - 1 {
        return Err(Error::Input(format!(
            "ordinal head for {classes} classes expects {} logits, got {}",
            classes - 1,
            logits.len()
        )));
    }
    if label >= classes {
        return Err(Error::Input(format!("label {label} out of range for {classes} classes")));
    }
    let targets = ordinal_targets(classes, label);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(&targets) {
        // BCE(σ(z), t) = softplus(z) − t·z, stable for all z.
        loss += softplus(z) - t * z;
        grad.push(sigmoid(z) - t);
    }
    Ok((loss, grad))
}

/// Squared error against the class number; returns (loss, dloss/doutput).
pub fn regression_loss(output: f64, label: usize) -> (f64, f64) {
    let diff = output - label as f64;
    (diff * diff, 2.0 * diff)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Contrastive loss on an embedding pair: d² for same-class pairs,
/// max(0, margin − d)² for different-class pairs.
pub fn contrastive_loss(distance: f64, same_class: bool, margin: f64) -> f64 {
    if same_class {
        distance * distance
    } else {
        let slack = (margin - distance).max(0.0);
        slack * slack
    }
}

/// Contrastive loss with gradients w.r.t. both embeddings.
/// At d = 0 on a different-class pair the gradient direction is undefined;
/// the zero subgradient is used.
pub fn contrastive_grads(
    embed_a: &[f64],
    embed_b: &[f64],
    same_class: bool,
    margin: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let d = euclidean_distance(embed_a, embed_b);
    let loss = contrastive_loss(d, same_class, margin);
    let dim = embed_a.len();
    let mut ga = vec![0.0; dim];
    let mut gb = vec![0.0; dim];
    if same_class {
        for i in 0..dim {
            let diff = embed_a[i] - embed_b[i];
            ga[i] = 2.0 * diff;
            gb[i] = -2.0 * diff;
        }
    } else if d < margin && d > 0.0 {
        // dL/dd = −2(margin − d); dd/da_i = (a_i − b_i)/d
        let coeff = -2.0 * (margin - d) / d;
        for i in 0..dim {
            let diff = embed_a[i] - embed_b[i];
            ga[i] = coeff * diff;
            gb[i] = -coeff * diff;
        }
    }
    (loss, ga, gb)
}

/// Median Euclidean distance from an embedding to the anchor embeddings.
pub fn median_anchor_distance(embedding: &[f64], anchor_embeddings: &[Vec<f64>]) -> Result<f64> {
    if anchor_embeddings.is_empty() {
        return Err(Error::Config("anchor pool is empty".into()));
    }
    let distances: Vec<f64> =
        anchor_embeddings.iter().map(|a| euclidean_distance(embedding, a)).collect();
    Ok(crate::util::median(&distances).expect("non-empty distances"))
}

/// Class decision from a continuous score: half-up rounding clamped to
/// [0, k−1].
pub fn derived_class(score: f64, classes: usize) -> usize {
    let rounded = (score + 0.5).floor();
    let max = (classes - 1) as f64;
    rounded.clamp(0.0, max) as usize
}

/// The fixed reference inputs the Siamese head scores against: the
/// anchor_count training samples of class 0 whose monotone feature
/// coordinate is smallest (ties by sample id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPool {
    /// Ids of the selected training samples.
    pub sample_ids: Vec<u64>,
    /// Their feature vectors, in the same order.
    pub features: Vec<Vec<f64>>,
}

impl AnchorPool {
    pub fn select(train: &[LatentSample], anchor_count: usize) -> Result<Self> {
        let mut class0: Vec<&LatentSample> = train.iter().filter(|s| s.label == 0).collect();
        if class0.len() < anchor_count {
            return Err(Error::Config(format!(
                "anchor pool needs {anchor_count} class-0 training samples, found {}",
                class0.len()
            )));
        }
        class0.sort_by(|a, b| {
            a.features[0]
                .partial_cmp(&b.features[0])
                .expect("features are finite")
                .then(a.id.cmp(&b.id))
        });
        let chosen = &class0[..anchor_count];
        Ok(AnchorPool {
            sample_ids: chosen.iter().map(|s| s.id.0).collect(),
            features: chosen.iter().map(|s| s.features.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Streams training pairs: a fair coin picks same-class vs different-class,
/// classes are sampled uniformly among eligible ones, members uniformly
/// within a class. Classes with a single member cannot form same-class pairs
/// and are skipped for that branch.
pub struct PairSampler {
    by_class: Vec<Vec<usize>>,
    nonempty: Vec<usize>,
    with_two: Vec<usize>,
}

/// An emitted pair: indices into the training set plus the same-class flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledPair {
    pub a: usize,
    pub b: usize,
    pub same_class: bool,
}

impl PairSampler {
    pub fn new(labels: &[usize]) -> Result<Self> {
        let classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let nonempty: Vec<usize> =
            (0..classes).filter(|&c| !by_class[c].is_empty()).collect();
        if nonempty.len() < 2 {
            return Err(Error::Config(
                "pair sampling needs at least 2 classes present in the data".into(),
            ));
        }
        let with_two: Vec<usize> = (0..classes).filter(|&c| by_class[c].len() >= 2).collect();
        Ok(PairSampler { by_class, nonempty, with_two })
    }

    pub fn next(&self, rng: &mut ChaCha8Rng) -> SampledPair {
        let want_same = rng.random::<f64>() < 0.5;
        if want_same && !self.with_two.is_empty() {
            let class = self.with_two[rng.random_range(0..self.with_two.len())];
            let members = &self.by_class[class];
            let i = rng.random_range(0..members.len());
            let mut j = rng.random_range(0..members.len() - 1);
            if j >= i {
                j += 1;
            }
            SampledPair { a: members[i], b: members[j], same_class: true }
        } else {
            // Either a different-class draw, or a same-class draw skipped
            // because no class has two members.
            let ci = rng.random_range(0..self.nonempty.len());
            let mut cj = rng.random_range(0..self.nonempty.len() - 1);
            if cj >= ci {
                cj += 1;
            }
            let ca = &self.by_class[self.nonempty[ci]];
            let cb = &self.by_class[self.nonempty[cj]];
            SampledPair {
                a: ca[rng.random_range(0..ca.len())],
                b: cb[rng.random_range(0..cb.len())],
                same_class: false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use crate::synthlab::{PatientId, SampleId};
    use proptest::prelude::*;

    fn sample(id: u64, label: usize, f0: f64) -> LatentSample {
        LatentSample {
            id: SampleId(id),
            patient_id: PatientId(id),
            timepoint: 0,
            latent: 0.0,
            label,
            features: vec![f0, 0.0],
        }
    }

    #[test]
    fn softmax_symmetric_inputs() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for &x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&[1000.0, 0.0, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1e-12 && p[2] < 1e-12);
    }

    #[test]
    fn softmax_matches_high_precision_evaluation() {
        // Reference values computed with 50-digit arithmetic for [1,2,3].
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p[0] - 0.09003057317038046).abs() < 1e-12);
        assert!((p[1] - 0.24472847105479764).abs() < 1e-12);
        assert!((p[2] - 0.66524095577482189).abs() < 1e-12);
    }

    #[test]
    fn cl_score_one_hot_boundaries() {
        assert_eq!(cl_score(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cl_score(&[0.0, 0.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn cl_score_weighted_example() {
        let s = cl_score(&[0.2, 0.5, 0.3]).unwrap();
        assert!((s - 1.1).abs() < 1e-15);
    }

    #[test]
    fn cl_score_rejects_unnormalized_input() {
        assert!(cl_score(&[0.5, 0.2, 0.2]).is_err());
        assert!(cl_score(&[0.7, 0.5, -0.2]).is_err());
    }

    #[test]
    fn o_score_saturates_at_bounds() {
        assert!(o_score(&[-100.0, -100.0]) < 1e-12);
        assert!((o_score(&[100.0, 100.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn o_score_sums_probabilities() {
        // logits for probabilities 0.8 and 0.3
        let z1 = (0.8f64 / 0.2).ln();
        let z2 = (0.3f64 / 0.7).ln();
        assert!((o_score(&[z1, z2]) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn coral_loss_vanishes_on_confident_correct_prediction() {
        let (loss, _) = coral_loss(&[100.0, 100.0], 2, 3).unwrap();
        assert!(loss < 1e-12);
        // probabilities (1−ε, 1−ε) → loss ≈ 2ε
        let eps = 1e-6f64;
        let z = ((1.0 - eps) / eps).ln();
        let (loss, _) = coral_loss(&[z, z], 2, 3).unwrap();
        assert!((loss - 2.0 * eps).abs() < 1e-8);
    }

    #[test]
    fn coral_loss_half_probabilities_give_two_ln_two() {
        let (loss, _) = coral_loss(&[0.0, 0.0], 0, 3).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn coral_loss_penalty_grows_with_label_distance() {
        let z = (0.9f64 / 0.1).ln();
        let logits = [z, z];
        let l2 = coral_loss(&logits, 2, 3).unwrap().0;
        let l1 = coral_loss(&logits, 1, 3).unwrap().0;
        let l0 = coral_loss(&logits, 0, 3).unwrap().0;
        assert!(l2 < l1 && l1 < l0, "expected graded penalty, got {l2} {l1} {l0}");
        // Hand-evaluated values at p = 0.9.
        assert!((l2 - 0.21072103131565260).abs() < 1e-12);
        assert!((l1 - 2.4079456086518720).abs() < 1e-12);
        assert!((l0 - 4.6051701859880914).abs() < 1e-12);
    }

    #[test]
    fn coral_gradient_matches_finite_differences() {
        let logits = [0.3, -1.2];
        for label in 0..3 {
            let (_, grad) = coral_loss(&logits, label, 3).unwrap();
            for j in 0..2 {
                let h = 1e-6;
                let mut up = logits;
                up[j] += h;
                let mut down = logits;
                down[j] -= h;
                let fd = (coral_loss(&up, label, 3).unwrap().0
                    - coral_loss(&down, label, 3).unwrap().0)
                    / (2.0 * h);
                assert!((grad[j] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ordinal_targets_encode_exceedance() {
        assert_eq!(ordinal_targets(3, 0), vec![0.0, 0.0]);
        assert_eq!(ordinal_targets(3, 1), vec![1.0, 0.0]);
        assert_eq!(ordinal_targets(3, 2), vec![1.0, 1.0]);
    }

    #[test]
    fn regression_loss_examples() {
        assert_eq!(regression_loss(1.0, 1), (0.0, 0.0));
        let (loss, _) = regression_loss(2.4, 1);
        assert!((loss - 1.96).abs() < 1e-12);
    }

    #[test]
    fn derived_class_rounds_half_up_and_clamps() {
        assert_eq!(derived_class(-0.7, 3), 0);
        assert_eq!(derived_class(0.5, 3), 1);
        assert_eq!(derived_class(1.49, 3), 1);
        assert_eq!(derived_class(2.6, 3), 2);
        assert_eq!(derived_class(7.0, 3), 2);
    }

    #[test]
    fn contrastive_loss_branches() {
        assert_eq!(contrastive_loss(0.0, true, 1.0), 0.0);
        assert_eq!(contrastive_loss(1.3, false, 1.0), 0.0);
        assert!((contrastive_loss(0.5, true, 1.0) - 0.25).abs() < 1e-15);
        assert!((contrastive_loss(0.5, false, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn contrastive_grads_match_finite_differences() {
        let a = vec![0.3, -0.7, 0.2];
        let b = vec![-0.1, 0.4, 0.5];
        for &same in &[true, false] {
            let (_, ga, gb) = contrastive_grads(&a, &b, same, 1.0);
            let h = 1e-6;
            for i in 0..3 {
                let mut up = a.clone();
                up[i] += h;
                let mut down = a.clone();
                down[i] -= h;
                let dist = |x: &[f64]| euclidean_distance(x, &b);
                let fd = (contrastive_loss(dist(&up), same, 1.0)
                    - contrastive_loss(dist(&down), same, 1.0))
                    / (2.0 * h);
                assert!((ga[i] - fd).abs() < 1e-5, "same={same} i={i}");
                let mut upb = b.clone();
                upb[i] += h;
                let mut downb = b.clone();
                downb[i] -= h;
                let fd_b = (contrastive_loss(euclidean_distance(&a, &upb), same, 1.0)
                    - contrastive_loss(euclidean_distance(&a, &downb), same, 1.0))
                    / (2.0 * h);
                assert!((gb[i] - fd_b).abs() < 1e-5, "same={same} i={i} (b side)");
            }
        }
    }

    #[test]
    fn median_anchor_distance_examples() {
        let anchors: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64]).collect();
        // target at 0 → distances 1..10 → median 5.5
        let d = median_anchor_distance(&[0.0], &anchors).unwrap();
        assert!((d - 5.5).abs() < 1e-15);
        let same = vec![vec![2.0, 3.0]; 4];
        assert_eq!(median_anchor_distance(&[2.0, 3.0], &same).unwrap(), 0.0);
        assert!(median_anchor_distance(&[0.0], &[]).is_err());
    }

    #[test]
    fn anchor_pool_takes_lowest_monotone_feature_class0() {
        let train = vec![
            sample(0, 0, 0.9),
            sample(1, 1, 0.1),
            sample(2, 0, 0.3),
            sample(3, 0, 0.5),
            sample(4, 2, 0.0),
            sample(5, 0, 0.4),
        ];
        let pool = AnchorPool::select(&train, 3).unwrap();
        assert_eq!(pool.sample_ids, vec![2, 5, 3]);
        assert!(AnchorPool::select(&train, 5).is_err());
    }

    #[test]
    fn anchor_pool_breaks_feature_ties_by_id() {
        let train =
            vec![sample(3, 0, 0.2), sample(1, 0, 0.2), sample(2, 0, 0.2), sample(9, 1, 0.0)];
        let pool = AnchorPool::select(&train, 2).unwrap();
        assert_eq!(pool.sample_ids, vec![1, 2]);
    }

    #[test]
    fn pair_sampler_is_balanced() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let sampler = PairSampler::new(&labels).unwrap();
        let mut rng = rng_from(42);
        let draws = 10000;
        let mut same = 0;
        for _ in 0..draws {
            let p = sampler.next(&mut rng);
            assert_ne!(p.a, p.b);
            assert_eq!(labels[p.a] == labels[p.b], p.same_class);
            if p.same_class {
                same += 1;
            }
        }
        let frac = same as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.02, "same-class fraction {frac}");
    }

    #[test]
    fn pair_sampler_degenerate_two_singletons() {
        let labels = vec![0, 1];
        let sampler = PairSampler::new(&labels).unwrap();
        let mut rng = rng_from(7);
        for _ in 0..100 {
            let p = sampler.next(&mut rng);
            assert!(!p.same_class);
            assert_ne!(p.a, p.b);
        }
    }

    #[test]
    fn pair_sampler_rejects_single_class() {
        assert!(PairSampler::new(&[0, 0, 0]).is_err());
        assert!(PairSampler::new(&[]).is_err());
    }

    #[test]
    fn pair_sampler_is_deterministic() {
        let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let sampler = PairSampler::new(&labels).unwrap();
        let mut r1 = rng_from(9);
        let mut r2 = rng_from(9);
        for _ in 0..200 {
            assert_eq!(sampler.next(&mut r1), sampler.next(&mut r2));
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_probability_vector(logits in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cl_score_stays_in_class_range(raw in proptest::collection::vec(0.001f64..1.0, 2..8)) {
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|&x| x / total).collect();
            let s = cl_score(&probs).unwrap();
            let k = probs.len() as f64;
            prop_assert!(s >= -1e-12 && s <= k - 1.0 + 1e-12);
        }

        #[test]
        fn cl_score_is_exact_on_one_hot(k in 2usize..8, c_raw in 0usize..8) {
            let c = c_raw % k;
            let mut probs = vec![0.0; k];
            probs[c] = 1.0;
            prop_assert_eq!(cl_score(&probs).unwrap(), c as f64);
        }

        #[test]
        fn o_score_is_strictly_monotone_in_each_logit(
            logits in proptest::collection::vec(-20.0f64..20.0, 1..6),
            idx_raw in 0usize..6,
        ) {
            let idx = idx_raw % logits.len();
            let base = o_score(&logits);
            let mut bumped = logits.clone();
            bumped[idx] += 0.5;
            prop_assert!(o_score(&bumped) > base);
        }

        #[test]
        fn o_score_bounded_by_task_count(logits in proptest::collection::vec(-500.0f64..500.0, 1..6)) {
            let s = o_score(&logits);
            prop_assert!(s >= 0.0 && s <= logits.len() as f64);
        }

        #[test]
        fn scores_match_high_precision_reference(logits in proptest::collection::vec(-30.0f64..30.0, 2..6)) {
            // Kahan-compensated reference for both converters.
            let p = softmax(&logits);
            let mut acc = 0.0f64;
            let mut comp = 0.0f64;
            for (i, &pi) in p.iter().enumerate() {
                let term = pi * i as f64 - comp;
                let t = acc + term;
                comp = (t - acc) - term;
                acc = t;
            }
            prop_assert!((cl_score(&p).unwrap() - acc).abs() < 1e-12);

            let mut acc2 = 0.0f64;
            let mut comp2 = 0.0f64;
            for &z in &logits {
                let term = sigmoid(z) - comp2;
                let t = acc2 + term;
                comp2 = (t - acc2) - term;
                acc2 = t;
            }
            prop_assert!((o_score(&logits) - acc2).abs() < 1e-12);
        }
    }
}
