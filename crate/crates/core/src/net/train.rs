use super::{backward, forward, DropoutConfig, DropoutMode, MlpParams};
use crate::error::{Error, Result};
use crate::heads::{
    cl_score, contrastive_grads, coral_loss, cross_entropy_loss, derived_class,
    median_anchor_distance, o_score, regression_loss, softmax, AnchorPool, HeadKind, HeadSpec,
    PairSampler, ScoredPrediction,
};
use crate::seed::{child_seed, rng_from};
use crate::synthlab::LatentSample;
use crate::util::shuffle;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub balanced_sampling: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive and finite".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// What to build: the head, the hidden architecture, and the dropout rate
/// the model trains with (0 for a deterministic model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub head: HeadSpec,
    pub hidden_widths: Vec<usize>,
    pub dropout_rate: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        DropoutConfig::train(self.dropout_rate).validate()
    }
}

/// An immutable trained model: parameters, head, dropout rate, and (for the
/// Siamese head) the anchor pool frozen at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: MlpParams,
    pub head: HeadSpec,
    pub dropout_rate: f64,
    pub train_config: TrainConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<AnchorPool>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Checkpoint file layout: the redundant layer_sizes field is a cheap
/// integrity check for hand-edited files.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    #[serde(flatten)]
    pub model: TrainedModel,
}

impl TrainedModel {
    /// Deterministic single forward pass with dropout off.
    pub fn predict(&self, x: &[f64]) -> Result<ScoredPrediction> {
        let (score, raw) = self.score_once(x, &DropoutConfig::off(), None)?;
        Ok(ScoredPrediction {
            score,
            derived_class: derived_class(score, self.head.classes),
            raw_outputs: raw,
            per_pass_scores: None,
        })
    }

    /// One pass through the network plus the head's score converter.
    /// Returns (score, raw outputs). With active dropout the mask stream is
    /// drawn from `rng`; the Siamese head embeds the target first, then each
    /// anchor in pool order.
    pub fn score_once(
        &self,
        x: &[f64],
        dropout: &DropoutConfig,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<f64>)> {
        match &self.head.kind {
            HeadKind::MultiClass => {
                let (_, logits) = forward(&self.params, x, dropout, rng)?;
                let score = cl_score(&softmax(&logits))?;
                Ok((score, logits))
            }
            HeadKind::Ordinal => {
                let (_, logits) = forward(&self.params, x, dropout, rng)?;
                Ok((o_score(&logits), logits))
            }
            HeadKind::Regression => {
                let (_, out) = forward(&self.params, x, dropout, rng)?;
                Ok((out[0], out))
            }
            HeadKind::Siamese { .. } => {
                let pool = self
                    .anchors
                    .as_ref()
                    .ok_or_else(|| Error::Config("siamese model has no anchor pool".into()))?;
                let (_, embedding) = forward(&self.params, x, dropout, rng.as_deref_mut())?;
                let mut anchor_embeddings = Vec::with_capacity(pool.len());
                for anchor in &pool.features {
                    let (_, e) = forward(&self.params, anchor, dropout, rng.as_deref_mut())?;
                    anchor_embeddings.push(e);
                }
                let score = median_anchor_distance(&embedding, &anchor_embeddings)?;
                Ok((score, embedding))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let checkpoint =
            serde_json::to_value(Checkpoint { layer_sizes: self.params.layer_sizes(), model: self.clone() })?;
        Ok(serde_json::to_string_pretty(&checkpoint)? + "\n")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let checkpoint: Checkpoint = serde_json::from_str(text)?;
        if checkpoint.layer_sizes != checkpoint.model.params.layer_sizes() {
            return Err(Error::Input("checkpoint layer_sizes disagree with parameters".into()));
        }
        checkpoint.model.params.validate()?;
        Ok(checkpoint.model)
    }

    pub fn load_json(path: &Path) -> Result<TrainedModel> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Index batches for one epoch of balanced class sampling: every draw picks
/// a class uniformly, then a member uniformly within it (sampling with
/// replacement), so expected per-class frequency is equal regardless of the
/// class imbalance. One epoch makes `labels.len()` draws.
pub fn balanced_batch_sampler(
    labels: &[usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    use rand::Rng;
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if labels.is_empty() {
        return Err(Error::Config("cannot sample from an empty label set".into()));
    }
    let classes = labels.iter().max().expect("non-empty") + 1;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    if let Some(empty) = (0..classes).find(|&c| by_class[c].is_empty()) {
        return Err(Error::Config(format!("class {empty} has no samples to balance against")));
    }
    let mut draws = Vec::with_capacity(labels.len());
    for _ in 0..labels.len() {
        let class = rng.random_range(0..classes);
        let members = &by_class[class];
        draws.push(members[rng.random_range(0..members.len())]);
    }
    Ok(draws.chunks(batch_size).map(|c| c.to_vec()).collect())
}

fn epoch_batches(
    labels: &[usize],
    batch_size: usize,
    balanced: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if balanced {
        balanced_batch_sampler(labels, batch_size, rng)
    } else {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        shuffle(&mut order, rng);
        Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
    }
}

/// Loss and parameter gradients for one non-Siamese sample.
fn sample_loss_and_grads(
    params: &MlpParams,
    head: &HeadSpec,
    sample: &LatentSample,
    dropout: &DropoutConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, MlpParams)> {
    let (trace, out) = forward(params, &sample.features, dropout, rng)?;
    let (loss, out_grad) = match head.kind {
        HeadKind::MultiClass => cross_entropy_loss(&out, sample.label)?,
        HeadKind::Ordinal => coral_loss(&out, sample.label, head.classes)?,
        HeadKind::Regression => {
            let (loss, g) = regression_loss(out[0], sample.label);
            (loss, vec![g])
        }
        HeadKind::Siamese { .. } => {
            return Err(Error::Config("siamese models train on pairs, not single samples".into()))
        }
    };
    let grads = backward(params, &trace, &out_grad)?;
    Ok((loss, grads))
}

/// Loss and summed gradients for one Siamese pair: both branches share the
/// same parameters, so both backward passes accumulate into one gradient.
fn pair_loss_and_grads(
    params: &MlpParams,
    margin: f64,
    a: &LatentSample,
    b: &LatentSample,
    same_class: bool,
    dropout: &DropoutConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, MlpParams)> {
    let (trace_a, embed_a) = forward(params, &a.features, dropout, rng.as_deref_mut())?;
    let (trace_b, embed_b) = forward(params, &b.features, dropout, rng.as_deref_mut())?;
    let (loss, grad_a, grad_b) = contrastive_grads(&embed_a, &embed_b, same_class, margin);
    let mut grads = backward(params, &trace_a, &grad_a)?;
    grads.add_scaled(&backward(params, &trace_b, &grad_b)?, 1.0);
    Ok((loss, grads))
}

fn check_labels(set: &[LatentSample], classes: usize, name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Config(format!("{name} set is empty")));
    }
    if let Some(s) = set.iter().find(|s| s.label >= classes) {
        return Err(Error::Config(format!(
            "{name} set has label {} but the head expects classes 0..{}",
            s.label, classes
        )));
    }
    Ok(())
}

enum ValItems {
    Samples,
    Pairs(Vec<(usize, usize, bool)>),
}

/// Mean validation loss with dropout off; the quantity the epoch snapshot
/// selection minimizes.
fn validation_loss(
    params: &MlpParams,
    spec: &ModelSpec,
    val: &[LatentSample],
    items: &ValItems,
) -> Result<f64> {
    let off = DropoutConfig::off();
    let total: f64 = match items {
        ValItems::Samples => {
            let mut acc = 0.0;
            for s in val {
                acc += sample_loss_and_grads(params, &spec.head, s, &off, None)?.0;
            }
            acc / val.len() as f64
        }
        ValItems::Pairs(pairs) => {
            let margin = match spec.head.kind {
                HeadKind::Siamese { margin, .. } => margin,
                _ => unreachable!("pairs imply a siamese head"),
            };
            let mut acc = 0.0;
            for &(i, j, same) in pairs {
                acc +=
                    pair_loss_and_grads(params, margin, &val[i], &val[j], same, &off, None)?.0;
            }
            acc / pairs.len() as f64
        }
    };
    Ok(total)
}

/// Mini-batch gradient descent with per-epoch validation. Returns the
/// parameter snapshot with the lowest validation loss (ties keep the earlier
/// epoch; the untrained network is epoch 0's candidate). Fully determined by
/// (spec, data, cfg.seed).
pub fn train(
    spec: &ModelSpec,
    train_set: &[LatentSample],
    val_set: &[LatentSample],
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    spec.validate()?;
    cfg.validate()?;
    check_labels(train_set, spec.head.classes, "train")?;
    check_labels(val_set, spec.head.classes, "validation")?;
    let input_dim = train_set[0].features.len();
    if let Some(bad) = train_set.iter().chain(val_set).find(|s| s.features.len() != input_dim) {
        return Err(Error::Input(format!(
            "sample {} has {} features, expected {input_dim}",
            bad.id.0,
            bad.features.len()
        )));
    }

    let mut init_rng = rng_from(child_seed(cfg.seed, "init"));
    let shared_output = matches!(spec.head.kind, HeadKind::Ordinal);
    let mut params = MlpParams::init(
        input_dim,
        &spec.hidden_widths,
        spec.head.output_width(),
        shared_output,
        &mut init_rng,
    );

    let (anchors, margin, pair_sampler) = match spec.head.kind {
        HeadKind::Siamese { margin, anchor_count, .. } => {
            let pool = AnchorPool::select(train_set, anchor_count)?;
            let labels: Vec<usize> = train_set.iter().map(|s| s.label).collect();
            (Some(pool), margin, Some(PairSampler::new(&labels)?))
        }
        _ => (None, 0.0, None),
    };

    // Fixed validation items: samples for per-sample heads, a frozen pair
    // list for the Siamese head so epoch losses are comparable.
    let val_items = if pair_sampler.is_some() {
        let val_labels: Vec<usize> = val_set.iter().map(|s| s.label).collect();
        let val_sampler = PairSampler::new(&val_labels)?;
        let mut rng = rng_from(child_seed(cfg.seed, "val-pairs"));
        let pairs = (0..val_set.len())
            .map(|_| {
                let p = val_sampler.next(&mut rng);
                (p.a, p.b, p.same_class)
            })
            .collect();
        ValItems::Pairs(pairs)
    } else {
        ValItems::Samples
    };

    let dropout = DropoutConfig { rate: spec.dropout_rate, mode: DropoutMode::Train };
    let mut sgd_rng = rng_from(child_seed(cfg.seed, "sgd"));
    let train_labels: Vec<usize> = train_set.iter().map(|s| s.label).collect();

    let mut best_val_loss = validation_loss(&params, spec, val_set, &val_items)?;
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;

    let to_training_error = |e: Error, epoch: usize| match e {
        Error::Numeric(reason) => Error::Training { epoch, reason },
        other => other,
    };

    for epoch in 1..=cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut n_items = 0usize;
        if let (Some(sampler), HeadKind::Siamese { .. }) = (&pair_sampler, &spec.head.kind) {
            // One epoch consumes train_set.len() pairs, batched like samples.
            let pairs: Vec<_> = (0..train_set.len()).map(|_| sampler.next(&mut sgd_rng)).collect();
            for batch in pairs.chunks(cfg.batch_size) {
                let mut grad_acc = params.zeros_like();
                let mut batch_loss = 0.0;
                for p in batch {
                    let (loss, grads) = pair_loss_and_grads(
                        &params,
                        margin,
                        &train_set[p.a],
                        &train_set[p.b],
                        p.same_class,
                        &dropout,
                        Some(&mut sgd_rng),
                    )
                    .map_err(|e| to_training_error(e, epoch))?;
                    batch_loss += loss;
                    grad_acc.add_scaled(&grads, 1.0);
                }
                params.add_scaled(&grad_acc, -cfg.learning_rate / batch.len() as f64);
                epoch_loss += batch_loss;
                n_items += batch.len();
            }
        } else {
            let batches =
                epoch_batches(&train_labels, cfg.batch_size, cfg.balanced_sampling, &mut sgd_rng)?;
            for batch in batches {
                let mut grad_acc = params.zeros_like();
                let mut batch_loss = 0.0;
                for &idx in &batch {
                    let (loss, grads) = sample_loss_and_grads(
                        &params,
                        &spec.head,
                        &train_set[idx],
                        &dropout,
                        Some(&mut sgd_rng),
                    )
                    .map_err(|e| to_training_error(e, epoch))?;
                    batch_loss += loss;
                    grad_acc.add_scaled(&grads, 1.0);
                }
                params.add_scaled(&grad_acc, -cfg.learning_rate / batch.len() as f64);
                epoch_loss += batch_loss;
                n_items += batch.len();
            }
        }
        let mean_loss = epoch_loss / n_items as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: format!("mean training loss became {mean_loss}"),
            });
        }
        let val_loss = validation_loss(&params, spec, val_set, &val_items)
            .map_err(|e| to_training_error(e, epoch))?;
        if !val_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: format!("validation loss became {val_loss}"),
            });
        }
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_params = params.clone();
            best_epoch = epoch;
        }
    }

    Ok(TrainedModel {
        params: best_params,
        head: spec.head.clone(),
        dropout_rate: spec.dropout_rate,
        train_config: cfg.clone(),
        seed: cfg.seed,
        anchors,
        best_epoch,
        best_val_loss,
    })
}

/// Accuracy of derived classes against labels; a toy-problem test helper.
pub fn classification_accuracy(model: &TrainedModel, set: &[LatentSample]) -> Result<f64> {
    let mut correct = 0usize;
    for s in set {
        if model.predict(&s.features)?.derived_class == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}
