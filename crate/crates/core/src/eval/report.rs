//! Compact per-model report types: each metric is summarized by its
//! bootstrap mean and percentile 95% interval.

use super::bootstrap::BootstrapDistribution;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A metric estimate with its 95% confidence bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiMetric {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CiMetric {
    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.ci_low.is_finite() && self.ci_high.is_finite()) {
            return Err(Error::Numeric("non-finite metric summary".into()));
        }
        if self.ci_low > self.mean || self.mean > self.ci_high {
            return Err(Error::Numeric(format!(
                "mean {} outside its interval [{}, {}]",
                self.mean, self.ci_low, self.ci_high
            )));
        }
        Ok(())
    }
}

impl From<&BootstrapDistribution> for CiMetric {
    fn from(d: &BootstrapDistribution) -> Self {
        CiMetric { mean: d.mean, ci_low: d.ci_low, ci_high: d.ci_high }
    }
}

/// Bootstrap summaries of every evaluation metric for one model. The two
/// rating-scale metrics are optional because they only exist when the
/// benchmark carries fine ratings or longitudinal pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub spearman: CiMetric,
    pub pearson: CiMetric,
    pub rank_mse: CiMetric,
    pub auc: CiMetric,
    pub fine_rating_mse: Option<CiMetric>,
    pub longitudinal_mse: Option<CiMetric>,
}

impl MetricReport {
    pub fn validate(&self) -> Result<()> {
        self.spearman.validate()?;
        self.pearson.validate()?;
        self.rank_mse.validate()?;
        self.auc.validate()?;
        if let Some(m) = &self.fine_rating_mse {
            m.validate()?;
        }
        if let Some(m) = &self.longitudinal_mse {
            m.validate()?;
        }
        Ok(())
    }
}
