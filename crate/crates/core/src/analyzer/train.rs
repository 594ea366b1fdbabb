use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{head_backward, head_forward, AnalyzerModel, FrontEnd};
use crate::error::{Error, Result};
use crate::exec;
use crate::jpegio::{decompress, CoefficientImage, SpatialImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per mini-batch; a cover and its stego always share a batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub channels: usize,
    pub truncation: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            channels: super::DEFAULT_CHANNELS,
            truncation: super::DEFAULT_TRUNCATION,
        }
    }
}

/// Aligned cover/stego pairs.
#[derive(Debug, Clone, Copy)]
pub struct PairSet<'a> {
    pub covers: &'a [CoefficientImage],
    pub stegos: &'a [CoefficientImage],
}

impl<'a> PairSet<'a> {
    pub fn new(covers: &'a [CoefficientImage], stegos: &'a [CoefficientImage]) -> Result<Self> {
        if covers.len() != stegos.len() {
            return Err(Error::InvalidArgument(format!(
                "{} covers but {} stegos",
                covers.len(),
                stegos.len()
            )));
        }
        if let Some((c, s)) = covers.iter().zip(stegos).find(|(c, s)| c.dims() != s.dims()) {
            return Err(Error::shape(c.dims(), s.dims()));
        }
        Ok(Self { covers, stegos })
    }

    pub fn len(&self) -> usize {
        self.covers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covers.is_empty()
    }

    /// Decompressed samples, pair `i` at `2i` (cover, label 0) and `2i + 1` (stego, label 1).
    fn samples(&self) -> Vec<Sample> {
        let decoded = exec::map_range(2 * self.len(), |i| {
            let img = if i % 2 == 0 {
                &self.covers[i / 2]
            } else {
                &self.stegos[i / 2]
            };
            decompress(img)
        });
        decoded
            .into_iter()
            .enumerate()
            .map(|(i, image)| Sample {
                image,
                label: i % 2,
            })
            .collect()
    }
}

pub(crate) struct Sample {
    pub image: SpatialImage,
    pub label: usize,
}

fn log_softmax_loss(logits: [f64; 2], label: usize) -> (f64, [f64; 2]) {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    let p = [(logits[0] - lse).exp(), (logits[1] - lse).exp()];
    let mut d = p;
    d[label] -= 1.0;
    (lse - logits[label], d)
}

fn predict(model: &AnalyzerModel, img: &SpatialImage) -> Result<usize> {
    let fe = FrontEnd::compute(img, model.truncation())?;
    let l = head_forward(model, &fe).logits;
    Ok(usize::from(l[1] > l[0]))
}

fn sample_accuracy(model: &AnalyzerModel, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let hits = exec::try_map_range(samples.len(), |i| {
        predict(model, &samples[i].image).map(|p| usize::from(p == samples[i].label))
    })?;
    Ok(hits.iter().sum::<usize>() as f64 / samples.len() as f64)
}

/// Fraction of covers and stegos classified correctly at the 0.5 softmax threshold.
pub fn accuracy(model: &AnalyzerModel, pairs: &PairSet<'_>) -> Result<f64> {
    sample_accuracy(model, &pairs.samples())
}

/// Train a fresh analyzer on `train_set`; `validation` only feeds the recorded metrics.
pub fn train(
    train_set: &PairSet<'_>,
    validation: Option<&PairSet<'_>>,
    hp: &TrainConfig,
) -> Result<AnalyzerModel> {
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let samples = train_set.samples();
    let groups: Vec<Vec<usize>> = (0..train_set.len()).map(|i| vec![2 * i, 2 * i + 1]).collect();
    let mut model = fit(&samples, &groups, hp)?;
    model.metrics.train_accuracy = sample_accuracy(&model, &samples)?;
    if let Some(v) = validation.filter(|v| !v.is_empty()) {
        model.metrics.validation_accuracy = Some(accuracy(&model, v)?);
    }
    Ok(model)
}

/// Mini-batch SGD with momentum. Groups of samples always share a batch;
/// per-sample gradients are summed in sample order so the result does not
/// depend on the thread count.
pub(crate) fn fit(samples: &[Sample], groups: &[Vec<usize>], hp: &TrainConfig) -> Result<AnalyzerModel> {
    if hp.batch_size == 0 || hp.learning_rate.is_nan() || hp.learning_rate <= 0.0 || !(0.0..1.0).contains(&hp.momentum) {
        return Err(Error::InvalidArgument(format!("bad training config {hp:?}")));
    }
    let mut model = AnalyzerModel::init(hp.channels, hp.truncation, hp.seed);
    let mut velocity = vec![0.0; model.params().len()];
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x7472_6169_6e00_0000);
    let group_size = groups.first().map_or(1, |g| g.len().max(1));
    let groups_per_batch = (hp.batch_size / group_size).max(1);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let mut last_loss = f64::NAN;

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(groups_per_batch) {
            let batch: Vec<usize> = chunk.iter().flat_map(|&g| groups[g].iter().copied()).collect();
            let per_sample = exec::try_map_range(batch.len(), |bi| -> Result<(f64, Vec<f64>)> {
                let s = &samples[batch[bi]];
                let fe = FrontEnd::compute(&s.image, model.truncation())?;
                let pass = head_forward(&model, &fe);
                let (loss, dl) = log_softmax_loss(pass.logits, s.label);
                let (g, _) = head_backward(&model, &fe, &pass, dl, false);
                Ok((loss, g))
            })?;
            let scale = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; velocity.len()];
            let mut batch_loss = 0.0;
            for (loss, g) in &per_sample {
                batch_loss += loss;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    last_finite: Box::new(model),
                });
            }
            let snapshot = model.clone();
            for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = hp.momentum * *v - hp.learning_rate * g * scale;
                *p += *v;
            }
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    last_finite: Box::new(snapshot),
                });
            }
            epoch_loss += batch_loss;
        }
        last_loss = epoch_loss / samples.len() as f64;
        log::debug!("epoch {epoch}: mean loss {last_loss:.5}");
    }
    model.metrics.epochs = hp.epochs;
    model.metrics.final_loss = last_loss;
    Ok(model)
}
