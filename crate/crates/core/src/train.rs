//! Mini-batch training with BCE loss and Adam.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::InputFrame;
use crate::error::{Error, Result};
use crate::kernels::{adam_step, bce_loss, AdamConfig, AdamState};
use crate::model::{backward, build_model, forward, ModelConfig, ModelParameters};
use crate::sim::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 1000,
            epochs: 30,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        let rates = [self.learning_rate, self.beta1, self.beta2, self.epsilon];
        if rates.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::Config(format!("invalid optimizer settings: {self:?}")));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub params: ModelParameters,
    /// Mean per-frame loss of each epoch, measured while it ran.
    pub loss_history: Vec<f64>,
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(self) -> f64 {
        self.total + self.carry
    }
}

fn check_frames(config: &ModelConfig, data: &[InputFrame]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Input("training data is empty".into()));
    }
    if config.frame_len() != crate::data::FRAME_LEN {
        return Err(Error::Shape(format!(
            "model expects {} input values per frame, frames carry {}",
            config.frame_len(),
            crate::data::FRAME_LEN
        )));
    }
    Ok(())
}

/// [`train_with_progress`] without a progress callback.
pub fn train(config: &ModelConfig, data: &[InputFrame], tc: &TrainConfig) -> Result<TrainResult> {
    train_with_progress(config, data, tc, |_, _| {})
}

/// Trains from `build_model(config, tc.seed)`. Each epoch reshuffles the
/// frames with a seeded permutation and takes one Adam step per batch on
/// the batch-mean gradient, summed in batch order. The final short batch
/// is kept. `progress` receives the 1-based epoch and its mean loss.
pub fn train_with_progress(
    config: &ModelConfig,
    data: &[InputFrame],
    tc: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainResult> {
    tc.validate()?;
    config.validate()?;
    check_frames(config, data)?;
    let adam = tc.adam();
    let mut params = build_model(*config, tc.seed)?;
    let mut state = AdamState::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        let mut rng = stream_rng(tc.seed, epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = Sum::default();
        for (batch_index, batch) in order.chunks(tc.batch_size).enumerate() {
            let mut grad = params.zeros_like();
            for &i in batch {
                let (pred, cache) = forward(&params, &data[i])?;
                let loss = bce_loss(pred.p_collision, data[i].label)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}, batch {batch_index}")));
                }
                epoch_loss.add(loss);
                grad.add_assign(&backward(&cache, data[i].label)?.params)?;
            }
            grad.scale(1.0 / batch.len() as f64);
            let grads = grad.tensors();
            let grad_slices: Vec<&[f64]> = grads.iter().map(|t| t.values).collect();
            adam_step(&mut params.tensors_mut(), &grad_slices, &mut state, &adam)?;
            params
                .ensure_finite()
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, batch {batch_index}: {e}")))?;
        }
        let mean = epoch_loss.value() / data.len() as f64;
        loss_history.push(mean);
        progress(epoch, mean);
    }
    Ok(TrainResult { params, loss_history })
}

/// Mean per-frame BCE of `params` on `data`.
pub fn evaluate_loss(params: &ModelParameters, data: &[InputFrame]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("evaluation data is empty".into()));
    }
    let mut sum = Sum::default();
    for frame in data {
        let (pred, _) = forward(params, frame)?;
        sum.add(bce_loss(pred.p_collision, frame.label)?);
    }
    Ok(sum.value() / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FRAME_LEN;
    use crate::model::Variant;

    fn frame(values: [f64; FRAME_LEN], label: u8) -> InputFrame {
        InputFrame { values, label, source_time: 0, stiffness_level: 4 }
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let cfg = ModelConfig::for_variant(Variant::Mad);
        assert!(matches!(train(&cfg, &[], &TrainConfig::default()), Err(Error::Input(_))));
        let tc = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(train(&cfg, &[frame([0.5; FRAME_LEN], 1)], &tc).is_err());
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let p = ModelParameters::zeros(ModelConfig::for_variant(Variant::Mad)).unwrap();
        let data = [frame([0.1; FRAME_LEN], 0), frame([0.9; FRAME_LEN], 1)];
        assert!((evaluate_loss(&p, &data).unwrap() - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn history_length_matches_epochs() {
        let cfg = ModelConfig::for_variant(Variant::M);
        let data = vec![frame([0.3; FRAME_LEN], 1), frame([0.6; FRAME_LEN], 0)];
        let tc = TrainConfig { epochs: 3, batch_size: 1, ..TrainConfig::default() };
        let mut seen = Vec::new();
        let out = train_with_progress(&cfg, &data, &tc, |e, l| seen.push((e, l))).unwrap();
        assert_eq!(out.loss_history.len(), 3);
        assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn compensated_sum() {
        let mut s = Sum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }
}
