//! Supervised training, evaluation and the cross-orientation protocol.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::nn::{read_checkpoint, write_checkpoint, AdamConfig, AdamState, Gradients, ParamStore};
use crate::pointgroup::GroupElement;
use crate::sim::dataset::Dataset;
use crate::sim::SystemState;

/// Mean of squared differences over all coordinates, with its gradient
/// with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    let count = pred.len() as f64;
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    let grad = diff.iter().map(|d| 2.0 * d / count).collect();
    Ok((loss, grad))
}

/// Order-independent mean.
fn set_mean(mut values: Vec<f64>) -> f64 {
    let n = values.len() as f64;
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum::<f64>() / n
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Stop once this many epochs pass without a new best validation loss.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            lr: 3e-4,
            weight_decay: 1e-12,
            max_epochs: 5000,
            patience: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings sized for a laptop run on tens of trajectories.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 10,
            lr: 1e-3,
            max_epochs: 200,
            patience: 50,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("learning rate must be positive and weight decay non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, before each update.
    pub train_loss: f64,
    /// Validation loss after the epoch.
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Training and validation loss before any update.
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub test_mse: Option<f64>,
    pub wall_time_secs: f64,
}

impl RunMetrics {
    /// `epoch,train_loss,val_loss` with shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{},{:?},{:?}", r.epoch, r.train_loss, r.val_loss);
        }
        out
    }

    /// Human-readable summary.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "epochs run      {}", self.epochs.len());
        let _ = writeln!(out, "initial train   {:.6e}", self.initial_train_loss);
        if let Some(last) = self.epochs.last() {
            let _ = writeln!(out, "final train     {:.6e}", last.train_loss);
        }
        let _ = writeln!(out, "best epoch      {}", self.best_epoch);
        let _ = writeln!(out, "best val        {:.6e}", self.best_val_loss);
        if let Some(t) = self.test_mse {
            let _ = writeln!(out, "test mse        {t:.6e}");
        }
        let _ = writeln!(out, "wall time       {:.1} s", self.wall_time_secs);
        out
    }
}

/// Anything that maps an input state to predicted positions.
pub trait Predictor: Sync {
    fn predict(&self, state: &SystemState) -> Result<Vec<f64>>;
}

impl<F> Predictor for F
where
    F: Fn(&SystemState) -> Result<Vec<f64>> + Sync,
{
    fn predict(&self, state: &SystemState) -> Result<Vec<f64>> {
        self(state)
    }
}

/// A model together with its parameter values.
pub struct Trained<'a> {
    pub model: &'a Model,
    pub params: &'a ParamStore,
}

impl Predictor for Trained<'_> {
    fn predict(&self, state: &SystemState) -> Result<Vec<f64>> {
        self.model.forward(self.params, state)
    }
}

/// Constant-velocity extrapolation `q + horizon · qdot`.
pub struct Inertial {
    pub horizon: f64,
}

impl Predictor for Inertial {
    fn predict(&self, state: &SystemState) -> Result<Vec<f64>> {
        Ok(state
            .q
            .iter()
            .zip(&state.qdot)
            .map(|(q, v)| q + self.horizon * v)
            .collect())
    }
}

/// Mean over samples of the per-sample MSE.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let losses = data
        .samples
        .par_iter()
        .map(|s| Ok(mse_loss(&predictor.predict(&s.input)?, &s.target)?.0))
        .collect::<Result<Vec<f64>>>()?;
    Ok(set_mean(losses))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Generalization {
    pub element: String,
    pub mse_plain: f64,
    pub mse_transformed: f64,
    pub ratio: f64,
}

/// Evaluates on `data` and on `data` with positions, velocities and targets
/// all mapped by `element`.
pub fn generalization_eval<P: Predictor + ?Sized>(
    predictor: &P,
    data: &Dataset,
    element: &GroupElement,
) -> Result<Generalization> {
    if element.dim() != data.config.dim() {
        return Err(Error::GroupDimension {
            group: element.label().to_string(),
            expected: data.config.dim(),
            got: element.dim(),
        });
    }
    let mse_plain = evaluate(predictor, data)?;
    let mse_transformed = evaluate(predictor, &data.transformed(element)?)?;
    Ok(Generalization {
        element: element.label().to_string(),
        mse_plain,
        mse_transformed,
        ratio: mse_transformed / mse_plain,
    })
}

fn dataset_loss(model: &Model, params: &ParamStore, data: &Dataset) -> Result<f64> {
    evaluate(&Trained { model, params }, data)
}

/// Mini-batch Adam with early stopping on the validation loss. Returns the
/// parameters of the best validation epoch.
pub fn train(
    model: &Model,
    params: ParamStore,
    train_set: &Dataset,
    val_set: &Dataset,
    tc: &TrainConfig,
) -> Result<(ParamStore, RunMetrics)> {
    tc.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("training needs non-empty train and validation sets".into()));
    }
    let start = Instant::now();
    let mut params = params;
    let mut adam = AdamState::new(
        AdamConfig {
            lr: tc.lr,
            weight_decay: tc.weight_decay,
            ..AdamConfig::default()
        },
        &params,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let initial_train_loss = dataset_loss(model, &params, train_set)?;
    let initial_val_loss = dataset_loss(model, &params, val_set)?;
    let mut best = (0, initial_val_loss, params.clone());
    let mut epochs = Vec::new();

    for epoch in 1..=tc.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_losses = Vec::with_capacity(order.len());
        for (b, batch) in order.chunks(tc.batch_size).enumerate() {
            let results = batch
                .par_iter()
                .map(|&k| {
                    let s = &train_set.samples[k];
                    model.loss_and_grad(&params, &s.input, &s.target)
                })
                .collect::<Result<Vec<(f64, Gradients)>>>()?;
            let mut total = Gradients::zeros_like(&params);
            for (loss, g) in &results {
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss {loss} at epoch {epoch}, batch {b}")));
                }
                total.add_assign(g);
                epoch_losses.push(*loss);
            }
            params.zero_grads();
            params.accumulate_scaled(&total, 1.0 / batch.len() as f64);
            adam.step(&mut params)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
        }
        let val_loss = dataset_loss(model, &params, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite(format!("validation loss {val_loss} at epoch {epoch}")));
        }
        let train_loss = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.1 || best.0 == 0 {
            best = (epoch, val_loss, params.clone());
        }
        if epoch - best.0 >= tc.patience {
            break;
        }
    }

    let (best_epoch, best_val_loss, best_params) = best;
    Ok((
        best_params,
        RunMetrics {
            initial_train_loss,
            initial_val_loss,
            epochs,
            best_epoch,
            best_val_loss,
            test_mse: None,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Writes parameters with the model configuration as metadata.
pub fn save_model<W: Write>(w: W, config: &ModelConfig, params: &ParamStore) -> Result<()> {
    let meta = serde_json::json!({ "model": config });
    write_checkpoint(w, params, &meta)
}

/// Reads a checkpoint written by [`save_model`].
pub fn load_model<R: Read>(r: R) -> Result<(Model, ParamStore)> {
    let (stored, meta) = read_checkpoint(r)?;
    let config: ModelConfig = serde_json::from_value(
        meta.get("model")
            .cloned()
            .ok_or_else(|| Error::Checkpoint("metadata lacks a model configuration".into()))?,
    )?;
    Model::from_params(config, &stored)
}
