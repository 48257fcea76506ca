//! Two-stage training, evaluation metrics and checkpoints.

mod checkpoint;
mod metrics;
mod optim;
mod split;
mod trainer;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, load_checkpoint_for, network_from_bytes, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use metrics::{cohen_kappa, kappa_from_agreement, ConfusionMatrix};
pub use optim::{Adam, AdamConfig};
pub use split::{stratified_split, stratified_split_indices};
pub use trainer::{
    epoch_seed, evaluate, train_two_stage, EarlyStopping, EpochLog, Evaluation, OptimConfig, StopReason, TrainReport,
    TwoStageSchedule,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::EegDataset;
use crate::dpl::{DplConfig, Head};
use crate::error::Result;
use crate::model::{Encoder, EncoderConfig, EncoderOutput};
use crate::tensor::Tensor;

/// An encoder together with its classification head.
#[derive(Clone, Debug)]
pub struct Network {
    pub encoder: Encoder,
    pub head: Head,
    pub dpl: DplConfig,
}

impl Network {
    pub fn new(encoder: EncoderConfig, dpl: DplConfig, classes: usize, seed: u64) -> Result<Self> {
        dpl.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(encoder, &mut rng)?;
        let head = Head::new(&dpl, classes, encoder.feature_dim(), &mut rng);
        Ok(Self { encoder, head, dpl })
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.config().param_count().total() + self.head.param_count()
    }

    /// Eval-mode features (and attention vectors) for every trial.
    pub fn embed(&self, ds: &EegDataset) -> Result<EncoderOutput> {
        let trials: Vec<Tensor> = (0..ds.trials()).map(|i| ds.trial(i)).collect();
        self.encoder.forward_eval(&trials)
    }

    pub fn predict(&self, ds: &EegDataset) -> Result<Vec<usize>> {
        self.head.predict(&self.embed(ds)?.features)
    }
}
