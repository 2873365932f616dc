//! Ordinal severity scoring on synthetic benchmarks.
//!
//! The crate generates latent-severity benchmarks with ordinal class labels,
//! fine-grained rater panels, and longitudinal pairs; trains four small MLP
//! heads that each read out a continuous severity score (multi-class
//! expectation, cumulative-link ordinal, direct regression, and a Siamese
//! embedding ranked against healthy anchors); optionally averages scores
//! over Monte Carlo dropout passes; and evaluates everything with
//! rank-based metrics, bootstrap confidence intervals, and pairwise
//! significance tests.
//!
//! All randomness flows from explicit seeds through per-stage child
//! streams, so every pipeline product is byte-reproducible.

pub mod error;
pub mod eval;
pub mod heads;
pub mod mcinfer;
pub mod net;
pub mod runner;
pub mod seed;
pub mod synthlab;
pub mod util;

pub use error::{Error, Result};
pub use eval::{
    BootstrapDistribution, CiMetric, ClinicalSplit, ComparisonGrid, LongitudinalDiff,
    MetricReport,
};
pub use heads::{AnchorPool, HeadKind, HeadSpec, ScoredPrediction};
pub use mcinfer::{McConfig, DEFAULT_MC_PASSES};
pub use net::{
    DropoutConfig, DropoutMode, Layer, MlpParams, ModelSpec, OutputLayer, TrainConfig,
    TrainedModel,
};
pub use runner::{
    run_experiment, ExperimentConfig, ExperimentReport, ModelVariant, RunProducts, Stage,
    StageOutcome, MODEL_ORDER,
};
pub use seed::{child_seed, indexed_seed, rng_from};
pub use synthlab::{
    Benchmark, BenchmarkConfig, DomainShiftSpec, DriftSpec, LatentSample, PatientId,
    RaterPanel, SampleId, ThresholdSpec,
};
