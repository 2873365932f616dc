//! Evaluation metrics and statistical machinery: rank correlations,
//! normalized-rank MSE, binary AUC over a clinical class split, score
//! rescaling onto the 1–9 rating axis, longitudinal difference errors,
//! percentile bootstrap, and Welch t-tests between bootstrap distributions.

mod bootstrap;
mod report;

pub use bootstrap::{
    bootstrap, comparison_grid, pairwise_ttest, percentile, welch_ttest,
    BootstrapDistribution, ComparisonGrid, SIGNIFICANCE_ALPHA,
};
pub use report::{CiMetric, MetricReport};

use crate::error::{Error, Result};
use crate::heads::{HeadKind, HeadSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// 1-based ranks with ties replaced by the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("ranks need non-NaN input"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; ties share the average
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn check_paired(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Input("need at least 2 paired observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in metric input".into()));
    }
    Ok(())
}

/// Product-moment correlation, two-pass. Constant input has no defined
/// correlation and is reported as such rather than silently clamped.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric(
            "correlation requires non-constant inputs".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_paired(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// MSE between normalized rank vectors: predicted scores are ranked (ties
/// averaged), then both rank vectors are divided by the maximum attainable
/// rank (the vector length) before the squared differences are averaged.
pub fn normalized_rank_mse(true_ranks: &[f64], predicted_scores: &[f64]) -> Result<f64> {
    check_paired(true_ranks, predicted_scores)?;
    let n = true_ranks.len() as f64;
    let pred_ranks = average_ranks(predicted_scores);
    let mse = true_ranks
        .iter()
        .zip(&pred_ranks)
        .map(|(&t, &p)| {
            let d = t / n - p / n;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(mse)
}

/// A clinically motivated binarization of the ordinal classes: the lower
/// classes are negative, the upper classes positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalSplit {
    pub negative_classes: BTreeSet<usize>,
    pub positive_classes: BTreeSet<usize>,
}

impl ClinicalSplit {
    /// Classes 0..first_positive are negative, first_positive..k positive.
    pub fn upper(classes: usize, first_positive: usize) -> Result<Self> {
        if classes < 2 || first_positive == 0 || first_positive >= classes {
            return Err(Error::Config(format!(
                "cannot split {classes} classes at first positive {first_positive}"
            )));
        }
        Ok(ClinicalSplit {
            negative_classes: (0..first_positive).collect(),
            positive_classes: (first_positive..classes).collect(),
        })
    }

    pub fn is_positive(&self, label: usize) -> bool {
        self.positive_classes.contains(&label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.negative_classes.is_empty() || self.positive_classes.is_empty() {
            return Err(Error::Config("both sides of the clinical split must be non-empty".into()));
        }
        if !self.negative_classes.is_disjoint(&self.positive_classes) {
            return Err(Error::Config("clinical split sides overlap".into()));
        }
        let max_neg = self.negative_classes.iter().max().expect("non-empty");
        let min_pos = self.positive_classes.iter().min().expect("non-empty");
        if max_neg >= min_pos {
            return Err(Error::Config("positive classes must be the upper classes".into()));
        }
        let k = self.negative_classes.len() + self.positive_classes.len();
        let full: BTreeSet<usize> = (0..k).collect();
        let union: BTreeSet<usize> =
            self.negative_classes.union(&self.positive_classes).copied().collect();
        if union != full {
            return Err(Error::Config("clinical split must partition 0..k".into()));
        }
        Ok(())
    }
}

/// AUC with explicit positive flags: the probability that a random positive
/// outscores a random negative, ties counted half (Mann–Whitney form).
pub fn auc_from_flags(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Input("scores and flags differ in length".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let ranks = average_ranks(scores);
    let rank_sum_pos: f64 =
        ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(&r, _)| r).sum();
    let np = n_pos as f64;
    let nn = n_neg as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Clinically relevant AUC: binarize class labels through the split, then
/// rank-based AUC of the continuous scores.
pub fn auc_binary(scores: &[f64], labels: &[usize], split: &ClinicalSplit) -> Result<f64> {
    split.validate()?;
    if scores.len() != labels.len() {
        return Err(Error::Input("scores and labels differ in length".into()));
    }
    let flags: Vec<bool> = labels.iter().map(|&l| split.is_positive(l)).collect();
    auc_from_flags(scores, &flags)
}

/// Rescaling onto the 1–9 rating axis: 3-class score heads map score×2+1
/// (so 0..2 lands on 1..5); the Siamese head shifts by 1 and clips to [1,9].
pub fn rescale_score(score: f64, head: &HeadSpec) -> Result<f64> {
    match head.kind {
        HeadKind::MultiClass | HeadKind::Ordinal | HeadKind::Regression => {
            if head.classes != 3 {
                return Err(Error::Config(format!(
                    "rating-scale rescaling is defined for 3-class score heads, got {} classes",
                    head.classes
                )));
            }
            Ok(score * 2.0 + 1.0)
        }
        HeadKind::Siamese { .. } => Ok((score + 1.0).clamp(1.0, 9.0)),
    }
}

/// MSE between consensus ratings and rescaled scores on the 1–9 scale.
pub fn fine_rating_mse(consensus: &[f64], rescaled_scores: &[f64]) -> Result<f64> {
    if consensus.len() != rescaled_scores.len() {
        return Err(Error::Input("ratings and scores differ in length".into()));
    }
    if consensus.is_empty() {
        return Err(Error::Input("need at least one rated sample".into()));
    }
    let n = consensus.len() as f64;
    Ok(consensus
        .iter()
        .zip(rescaled_scores)
        .map(|(&c, &s)| (c - s) * (c - s))
        .sum::<f64>()
        / n)
}

/// One longitudinal pair, with scores already rescaled to the rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalDiff {
    pub rating_t0: f64,
    pub rating_t1: f64,
    pub score_t0: f64,
    pub score_t1: f64,
}

impl LongitudinalDiff {
    pub fn rating_diff(&self) -> f64 {
        self.rating_t1 - self.rating_t0
    }

    pub fn score_diff(&self) -> f64 {
        self.score_t1 - self.score_t0
    }
}

/// MSE between rating differences and (rescaled) score differences across
/// the two timepoints of each pair.
pub fn longitudinal_diff_mse(pairs: &[LongitudinalDiff]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Input("need at least one longitudinal pair".into()));
    }
    let n = pairs.len() as f64;
    Ok(pairs
        .iter()
        .map(|p| {
            let d = p.rating_diff() - p.score_diff();
            d * d
        })
        .sum::<f64>()
        / n)
}
