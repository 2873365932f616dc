//! Synthetic ordinal benchmarks with a known continuous latent severity.
//!
//! Each sample hides a latent severity in [0,1]. Ordinal training labels are
//! threshold buckets of the latent; evaluation labels come in three richer
//! forms: a true ranking, a finer 1–9 rating from a simulated rater panel,
//! and the latent itself as a continuous ground truth. Because the latent is
//! known, rank-recovery claims can be checked against exact ground truth.

mod generate;
mod io;

pub use generate::{
    features_from_latent, generate_benchmark, make_longitudinal_pairs, make_shifted_testset,
    monotone_feature, simulate_fine_ratings,
};
pub use io::{fmt_f64, load_benchmark, load_samples_csv, save_benchmark, write_samples_csv};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct SampleId(pub u64);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct PatientId(pub u64);

/// One benchmark instance. `latent` is hidden from models; only `features`
/// (and `label` during training) are observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSample {
    pub id: SampleId,
    pub patient_id: PatientId,
    pub timepoint: u32,
    pub latent: f64,
    pub label: usize,
    pub features: Vec<f64>,
}

/// Cut points that discretize the latent into ordinal classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// Strictly increasing cut points in (0,1); k classes need k−1 cuts.
    pub cuts: Vec<f64>,
    /// Target class proportions when the cuts were derived from them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<f64>>,
}

impl ThresholdSpec {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        let spec = ThresholdSpec { cuts, class_weights: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Place cuts so a uniform latent reproduces the given class proportions.
    pub fn from_proportions(proportions: &[f64]) -> Result<Self> {
        if proportions.len() < 2 {
            return Err(Error::Config("need at least 2 class proportions".into()));
        }
        if proportions.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::Config("class proportions must be positive".into()));
        }
        let total: f64 = proportions.iter().sum();
        let mut cuts = Vec::with_capacity(proportions.len() - 1);
        let mut acc = 0.0;
        for &p in &proportions[..proportions.len() - 1] {
            acc += p / total;
            cuts.push(acc);
        }
        let spec = ThresholdSpec {
            cuts,
            class_weights: Some(proportions.iter().map(|&p| p / total).collect()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn classes(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Class of a latent value: the number of cuts at or below it.
    pub fn bucket(&self, latent: f64) -> usize {
        self.cuts.iter().filter(|&&c| c <= latent).count()
    }

    /// Latent interval [low, high) occupied by a class.
    pub fn class_bounds(&self, class: usize) -> (f64, f64) {
        let low = if class == 0 { 0.0 } else { self.cuts[class - 1] };
        let high = if class == self.cuts.len() { 1.0 } else { self.cuts[class] };
        (low, high)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cuts.is_empty() {
            return Err(Error::Config("at least one cut required (k >= 2)".into()));
        }
        for w in self.cuts.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(format!(
                    "cuts must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if self.cuts.iter().any(|&c| c <= 0.0 || c >= 1.0 || !c.is_finite()) {
            return Err(Error::Config("cuts must lie strictly inside (0,1)".into()));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != self.classes() {
                return Err(Error::Config("class_weights length must equal class count".into()));
            }
        }
        Ok(())
    }
}

/// Simulated panel of human raters producing 1..scale_points integer ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterPanel {
    #[serde(default = "default_n_raters")]
    pub n_raters: usize,
    #[serde(default = "default_rater_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_scale_points")]
    pub scale_points: usize,
}

fn default_n_raters() -> usize {
    5
}
fn default_rater_sigma() -> f64 {
    0.5
}
fn default_scale_points() -> usize {
    9
}

impl Default for RaterPanel {
    fn default() -> Self {
        RaterPanel {
            n_raters: default_n_raters(),
            noise_sigma: default_rater_sigma(),
            scale_points: default_scale_points(),
        }
    }
}

impl RaterPanel {
    pub fn validate(&self) -> Result<()> {
        if self.n_raters == 0 {
            return Err(Error::Config("rater panel needs at least one rater".into()));
        }
        if self.scale_points == 0 {
            return Err(Error::Config("rating scale needs at least one point".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("rater noise sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Additive drift applied to the latent between the two timepoints of a
/// longitudinal pair: Normal(mean, sigma), then clamped into [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub mean: f64,
    pub sigma: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec { mean: 0.0, sigma: 0.15 }
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.mean.is_finite() {
            return Err(Error::Config("drift must have finite mean and sigma >= 0".into()));
        }
        Ok(())
    }
}

/// Distribution changes for an out-of-domain test set. Thresholds are kept;
/// only class priors and feature-noise scale move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainShiftSpec {
    /// Number of shifted samples; defaults to the benchmark's n_test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Target class priors; None keeps the uniform-latent distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_priors: Option<Vec<f64>>,
    /// Multiplier on the feature noise sigma.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

fn default_noise_scale() -> f64 {
    1.0
}

impl Default for DomainShiftSpec {
    fn default() -> Self {
        DomainShiftSpec { n: None, class_priors: None, noise_scale: 1.0 }
    }
}

impl DomainShiftSpec {
    pub fn is_identity(&self) -> bool {
        self.class_priors.is_none() && self.noise_scale == 1.0
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if let Some(p) = &self.class_priors {
            if p.len() != classes {
                return Err(Error::Config(format!(
                    "class_priors has {} entries for {} classes",
                    p.len(),
                    classes
                )));
            }
            if p.iter().any(|&x| x < 0.0 || !x.is_finite()) || p.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("class_priors must be non-negative, not all zero".into()));
            }
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub classes: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    pub thresholds: ThresholdSpec,
    /// Sigma of the additive Gaussian noise on every feature coordinate.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    /// Steepness of the logistic latent→feature map on the monotone coordinate.
    #[serde(default = "default_steepness")]
    pub steepness: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Size of the ranked evaluation subset (stratified from test).
    pub n_ranked: usize,
    /// Size of the fine-rated evaluation subset (sampled from test).
    pub n_fine_rated: usize,
    /// Number of two-timepoint patient pairs.
    pub n_longitudinal: usize,
    #[serde(default)]
    pub panel: RaterPanel,
    #[serde(default)]
    pub drift: DriftSpec,
}

fn default_feature_dim() -> usize {
    4
}
fn default_noise_sigma() -> f64 {
    0.05
}
fn default_steepness() -> f64 {
    4.0
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        self.thresholds.validate()?;
        if self.thresholds.classes() != self.classes {
            return Err(Error::Config(format!(
                "{} cuts imply {} classes but config says {}",
                self.thresholds.cuts.len(),
                self.thresholds.classes(),
                self.classes
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("need at least 1 feature".into()));
        }
        for (name, n) in [("n_train", self.n_train), ("n_val", self.n_val), ("n_test", self.n_test)]
        {
            if n < self.classes {
                return Err(Error::Config(format!(
                    "{name}={n} is smaller than the class count {}",
                    self.classes
                )));
            }
        }
        if self.n_ranked > self.n_test {
            return Err(Error::Config("n_ranked cannot exceed n_test".into()));
        }
        if self.n_ranked < 2 {
            return Err(Error::Config("n_ranked must be at least 2".into()));
        }
        if self.n_fine_rated > self.n_test {
            return Err(Error::Config("n_fine_rated cannot exceed n_test".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if !(self.steepness > 0.0) {
            return Err(Error::Config("steepness must be > 0".into()));
        }
        self.panel.validate()?;
        self.drift.validate()?;
        Ok(())
    }
}

/// A sample from the ranked test set with its ground-truth rank (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSample {
    pub sample: LatentSample,
    pub rank: usize,
}

/// A sample with simulated per-rater ratings and their median consensus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineRatedSample {
    pub sample: LatentSample,
    pub ratings: Vec<u32>,
    pub consensus: f64,
}

/// Two timepoints of one patient, each with panel ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalPair {
    pub t0: FineRatedSample,
    pub t1: FineRatedSample,
}

/// A test sample paired with its continuous ground truth (the latent itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSample {
    pub sample: LatentSample,
    pub ground_truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub seed: u64,
    pub train: Vec<LatentSample>,
    pub val: Vec<LatentSample>,
    pub test: Vec<LatentSample>,
    pub ranked_test: Vec<RankedSample>,
    pub fine_rated_test: Vec<FineRatedSample>,
    pub longitudinal_pairs: Vec<LongitudinalPair>,
    pub continuous_test: Vec<ContinuousSample>,
}

impl Benchmark {
    /// All samples in serialization order.
    pub fn all_samples(&self) -> Vec<&LatentSample> {
        let mut out: Vec<&LatentSample> =
            self.train.iter().chain(self.val.iter()).chain(self.test.iter()).collect();
        for pair in &self.longitudinal_pairs {
            out.push(&pair.t0.sample);
            out.push(&pair.t1.sample);
        }
        out
    }

    pub fn next_sample_id(&self) -> u64 {
        self.all_samples().iter().map(|s| s.id.0 + 1).max().unwrap_or(0)
    }

    pub fn next_patient_id(&self) -> u64 {
        self.all_samples().iter().map(|s| s.patient_id.0 + 1).max().unwrap_or(0)
    }

    /// Shifted test set drawn under the benchmark's thresholds with fresh ids
    /// that extend this benchmark's id space.
    pub fn shifted_testset(
        &self,
        shift: &DomainShiftSpec,
        seed: u64,
    ) -> Result<Vec<LatentSample>> {
        generate::shifted_testset_with_ids(
            &self.config,
            shift,
            self.next_sample_id(),
            self.next_patient_id(),
            seed,
        )
    }
}
