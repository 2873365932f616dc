//! Percentile bootstrap over evaluation metrics and Welch t-tests between
//! the resulting distributions. Every iteration draws from its own seeded
//! stream, so distributions are reproducible and insensitive to iteration
//! scheduling.

use crate::error::{Error, Result};
use crate::seed::{indexed_seed, rng_from};
use crate::util;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided significance threshold used throughout the comparison grids.
pub const SIGNIFICANCE_ALPHA: f64 = 0.05;

/// Iterations with an undefined metric (for example a resample with only
/// one clinical class) are redrawn at most this many times.
pub const MAX_REDRAWS: usize = 100;

/// A bootstrap distribution of one metric, with percentile 95% bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub seed: u64,
    pub iterations: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// One metric value per iteration, in iteration order.
    pub values: Vec<f64>,
}

/// Linear-interpolation percentile of pre-sorted values, position q·(n−1).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Resample `data` with replacement `iterations` times and evaluate `metric`
/// on each resample. Iteration i draws from its own stream derived from
/// (seed, i). A resample on which the metric is undefined is redrawn within
/// the same stream, up to [`MAX_REDRAWS`] attempts; any other metric error
/// propagates.
pub fn bootstrap<T, F>(
    metric: F,
    data: &[T],
    iterations: usize,
    seed: u64,
) -> Result<BootstrapDistribution>
where
    T: Clone,
    F: Fn(&[T]) -> Result<f64>,
{
    if data.len() < 2 {
        return Err(Error::Input("bootstrap needs at least 2 observations".into()));
    }
    if iterations == 0 {
        return Err(Error::Config("bootstrap needs at least 1 iteration".into()));
    }
    let n = data.len();
    let mut values = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let mut rng = rng_from(indexed_seed(seed, i as u64));
        let mut accepted = None;
        for _ in 0..MAX_REDRAWS {
            let resample: Vec<T> =
                (0..n).map(|_| data[rng.random_range(0..n)].clone()).collect();
            match metric(&resample) {
                Ok(v) => {
                    accepted = Some(v);
                    break;
                }
                Err(Error::UndefinedMetric(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some(v) if v.is_finite() => values.push(v),
            Some(v) => {
                return Err(Error::Numeric(format!(
                    "bootstrap iteration {i} produced non-finite value {v}"
                )))
            }
            None => {
                return Err(Error::Numeric(format!(
                    "metric undefined on {MAX_REDRAWS} consecutive resamples in iteration {i}"
                )))
            }
        }
    }
    let mean = util::mean(&values).expect("iterations >= 1");
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(BootstrapDistribution {
        seed,
        iterations,
        mean,
        ci_low: percentile(&sorted, 0.025),
        ci_high: percentile(&sorted, 0.975),
        values,
    })
}

/// Two-sided Welch t-test p-value for a difference in means between two
/// samples with unequal variances (Welch–Satterthwaite degrees of freedom).
/// When both samples have zero variance the test degenerates: p = 1 if the
/// means coincide, else 0.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("t-test needs at least 2 values per sample".into()));
    }
    let (ma, va) = util::mean_and_sample_variance(a).expect("len >= 2");
    let (mb, vb) = util::mean_and_sample_variance(b).expect("len >= 2");
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let sea = va / na;
    let seb = vb / nb;
    let se2 = sea + seb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
    if !t.is_finite() || !df.is_finite() || df <= 0.0 {
        return Err(Error::Numeric(format!(
            "degenerate t statistic (t = {t}, df = {df})"
        )));
    }
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Numeric(format!("t distribution: {e}")))?;
    let p = 2.0 * dist.sf(t.abs());
    Ok(p.clamp(0.0, 1.0))
}

/// Welch t-test between two bootstrap distributions of the same metric.
pub fn pairwise_ttest(a: &BootstrapDistribution, b: &BootstrapDistribution) -> Result<f64> {
    welch_ttest(&a.values, &b.values)
}

/// All-pairs significance grid over named bootstrap distributions.
/// `p_values[i][j]` is None on the diagonal; `significant` thresholds at
/// [`SIGNIFICANCE_ALPHA`]. Both matrices are symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonGrid {
    pub metric: String,
    pub alpha: f64,
    pub models: Vec<String>,
    pub p_values: Vec<Vec<Option<f64>>>,
    pub significant: Vec<Vec<bool>>,
}

impl ComparisonGrid {
    pub fn pair_count(&self) -> usize {
        let n = self.models.len();
        n * (n - 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.models.len();
        if self.p_values.len() != n || self.significant.len() != n {
            return Err(Error::Input("comparison grid shape mismatch".into()));
        }
        for i in 0..n {
            if self.p_values[i].len() != n || self.significant[i].len() != n {
                return Err(Error::Input("comparison grid row length mismatch".into()));
            }
            if self.p_values[i][i].is_some() || self.significant[i][i] {
                return Err(Error::Input("comparison grid diagonal must be empty".into()));
            }
            for j in 0..n {
                if self.p_values[i][j] != self.p_values[j][i] {
                    return Err(Error::Input("comparison grid must be symmetric".into()));
                }
            }
        }
        Ok(())
    }
}

/// Build the pairwise grid for one metric across models, in the given order.
pub fn comparison_grid(
    metric: &str,
    entries: &[(String, BootstrapDistribution)],
) -> Result<ComparisonGrid> {
    if entries.len() < 2 {
        return Err(Error::Input("comparison grid needs at least 2 models".into()));
    }
    let n = entries.len();
    let models: Vec<String> = entries.iter().map(|(name, _)| name.clone()).collect();
    let mut p_values = vec![vec![None; n]; n];
    let mut significant = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let p = pairwise_ttest(&entries[i].1, &entries[j].1)?;
            p_values[i][j] = Some(p);
            p_values[j][i] = Some(p);
            let sig = p < SIGNIFICANCE_ALPHA;
            significant[i][j] = sig;
            significant[j][i] = sig;
        }
    }
    Ok(ComparisonGrid {
        metric: metric.to_string(),
        alpha: SIGNIFICANCE_ALPHA,
        models,
        p_values,
        significant,
    })
}
