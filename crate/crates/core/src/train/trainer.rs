use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::ConfusionMatrix;
use super::optim::{Adam, AdamConfig};
use super::split::stratified_split;
use super::Network;
use crate::data::EegDataset;
use crate::dpl::{Head, LossComponents};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStageSchedule {
    /// Stage-1 epoch cap.
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stage 1 stops.
    pub patience: usize,
    /// Stage-2 epochs on the full training set.
    pub final_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_batch() -> usize {
    32
}
fn default_val_fraction() -> f64 {
    0.2
}

impl TwoStageSchedule {
    pub fn new(max_epochs: usize, patience: usize, final_epochs: usize, seed: u64) -> Self {
        Self {
            max_epochs,
            patience,
            final_epochs,
            batch_size: default_batch(),
            seed,
            val_fraction: default_val_fraction(),
        }
    }

    pub fn dataset_i(seed: u64) -> Self {
        Self::new(1000, 200, 300, seed)
    }

    pub fn dataset_ii(seed: u64) -> Self {
        Self::new(300, 150, 200, seed)
    }

    pub fn dataset_iii(seed: u64) -> Self {
        Self::new(300, 150, 150, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::config("max_epochs, patience and batch_size must be >= 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config(format!("val_fraction must be in (0, 1), got {}", self.val_fraction)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub encoder: AdamConfig,
    /// Used for prototypes and baseline head parameters.
    pub head: AdamConfig,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            encoder: AdamConfig::new(1e-3, 0.01),
            head: AdamConfig::new(1e-3, 0.0),
        }
    }
}

impl OptimConfig {
    pub fn dataset_iii() -> Self {
        Self {
            head: AdamConfig::new(1e-2, 0.0),
            ..Self::default()
        }
    }
}

/// Patience counter against the best loss so far, starting from `+inf`.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    /// Records one epoch's validation loss; true means stop now.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.since_best >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based, counted across both stages.
    pub epoch: usize,
    pub stage: u8,
    pub train_loss: f64,
    pub components: LossComponents,
    pub val_loss: Option<f64>,
    pub max_isp_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub stage1_epochs: usize,
    pub stop_reason: StopReason,
    pub best_val_loss: f64,
    pub stage2_epochs: usize,
    pub final_train_accuracy: f64,
    pub epochs: Vec<EpochLog>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub kappa: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
}

pub fn evaluate(net: &Network, ds: &EegDataset) -> Result<Evaluation> {
    let predictions = net.predict(ds)?;
    let confusion = ConfusionMatrix::from_predictions(ds.labels(), &predictions, net.classes())?;
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        kappa: confusion.kappa(),
        confusion,
        predictions,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Shuffle seed for a global epoch index.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    splitmix64(seed ^ splitmix64(epoch as u64))
}

struct Optimizers {
    encoder: Adam,
    head: Adam,
}

impl Optimizers {
    fn new(net: &Network, cfg: &OptimConfig) -> Result<Self> {
        cfg.encoder.validate()?;
        cfg.head.validate()?;
        let enc: Vec<&Tensor> = net.encoder.parameters().into_iter().map(|(_, t)| t).collect();
        let head: Vec<&Tensor> = net.head.parameters().into_iter().map(|(_, t)| t).collect();
        Ok(Self {
            encoder: Adam::new(cfg.encoder, &enc),
            head: Adam::new(cfg.head, &head),
        })
    }
}

fn ensure_finite(what: &str, epoch: usize, batch: usize, tensors: &[Tensor]) -> Result<()> {
    if tensors.iter().all(Tensor::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} at epoch {epoch}, batch {batch}")))
    }
}

struct EpochStats {
    loss: f64,
    components: LossComponents,
}

fn train_epoch(net: &mut Network, opt: &mut Optimizers, ds: &EegDataset, batch_size: usize, seed: u64, epoch: usize) -> Result<EpochStats> {
    let mut order: Vec<usize> = (0..ds.trials()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(seed, epoch)));
    let mut total = 0.0;
    let mut comps = LossComponents::default();
    for (b, idx) in order.chunks(batch_size).enumerate() {
        let trials: Vec<Tensor> = idx.iter().map(|&i| ds.trial(i)).collect();
        let labels: Vec<usize> = idx.iter().map(|&i| ds.labels()[i]).collect();
        let (out, cache) = net.encoder.forward_train(&trials)?;
        let loss = net.head.loss(&out.features, &labels, &net.dpl)?;
        if !loss.value.is_finite() {
            return Err(Error::NonFinite(format!("loss {} at epoch {epoch}, batch {b}", loss.value)));
        }
        let enc_grads = net.encoder.backward(&cache, &loss.grad_features)?;
        ensure_finite("encoder gradient", epoch, b, &enc_grads)?;
        ensure_finite("head gradient", epoch, b, &loss.grad_params)?;
        net.encoder.update_running_stats(&cache);
        opt.encoder.step(&mut net.encoder.parameters_mut(), &enc_grads)?;
        opt.head.step(&mut net.head.parameters_mut(), &loss.grad_params)?;
        net.head.after_step();

        let w = idx.len() as f64;
        total += w * loss.value;
        comps.separation += w * loss.components.separation;
        comps.compact += w * loss.components.compact;
        comps.explicit_force += w * loss.components.explicit_force;
    }
    let m = ds.trials() as f64;
    Ok(EpochStats {
        loss: total / m,
        components: LossComponents {
            separation: comps.separation / m,
            compact: comps.compact / m,
            explicit_force: comps.explicit_force / m,
        },
    })
}

fn validation_loss(net: &Network, ds: &EegDataset) -> Result<f64> {
    let z = net.embed(ds)?.features;
    let v = net.head.loss(&z, ds.labels(), &net.dpl)?.value;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("validation loss {v}")));
    }
    Ok(v)
}

fn isp_norm(net: &Network, epoch: usize) -> Option<f64> {
    match &net.head {
        Head::Dpl(bank) => {
            let norm = bank.max_isp_norm();
            assert!(
                norm <= bank.norm_bound * (1.0 + 1e-12),
                "ISP norm {norm} exceeds bound {} after epoch {epoch}",
                bank.norm_bound
            );
            Some(norm)
        }
        _ => None,
    }
}

/// Stage 1 trains on a stratified split with early stopping on validation
/// loss; stage 2 continues from the final stage-1 weights on all trials.
pub fn train_two_stage(dataset: &EegDataset, mut net: Network, schedule: &TwoStageSchedule, optim: &OptimConfig) -> Result<(Network, TrainReport)> {
    schedule.validate()?;
    if dataset.classes() != net.classes() {
        return Err(Error::dim("classes", net.classes(), dataset.classes()));
    }
    let start = Instant::now();
    let (train, val) = stratified_split(dataset, schedule.val_fraction, schedule.seed)?;
    let mut opt = Optimizers::new(&net, optim)?;
    let mut epochs = Vec::new();
    let mut stopper = EarlyStopping::new(schedule.patience);
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=schedule.max_epochs {
        let stats = train_epoch(&mut net, &mut opt, &train, schedule.batch_size, schedule.seed, epoch)?;
        let val_loss = validation_loss(&net, &val)?;
        epochs.push(EpochLog {
            epoch,
            stage: 1,
            train_loss: stats.loss,
            components: stats.components,
            val_loss: Some(val_loss),
            max_isp_norm: isp_norm(&net, epoch),
        });
        if stopper.observe(val_loss) {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }
    let stage1_epochs = epochs.len();

    for epoch in stage1_epochs + 1..=stage1_epochs + schedule.final_epochs {
        let stats = train_epoch(&mut net, &mut opt, dataset, schedule.batch_size, schedule.seed, epoch)?;
        epochs.push(EpochLog {
            epoch,
            stage: 2,
            train_loss: stats.loss,
            components: stats.components,
            val_loss: None,
            max_isp_norm: isp_norm(&net, epoch),
        });
    }

    let final_train_accuracy = evaluate(&net, dataset)?.accuracy;
    let report = TrainReport {
        seed: schedule.seed,
        stage1_epochs,
        stop_reason,
        best_val_loss: stopper.best(),
        stage2_epochs: schedule.final_epochs,
        final_train_accuracy,
        epochs,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_loss_stops_after_patience() {
        let mut s = EarlyStopping::new(3);
        let stopped_at = (1..=10).find(|_| s.observe(1.0));
        assert_eq!(stopped_at, Some(4));
    }

    #[test]
    fn improving_loss_never_stops() {
        let mut s = EarlyStopping::new(2);
        assert!((0..100).all(|i| !s.observe(100.0 - i as f64)));
        assert_eq!(s.best(), 1.0);
    }

    #[test]
    fn epoch_seeds_differ() {
        assert_ne!(epoch_seed(0, 1), epoch_seed(0, 2));
        assert_ne!(epoch_seed(0, 1), epoch_seed(1, 1));
        assert_eq!(epoch_seed(5, 9), epoch_seed(5, 9));
    }
}
