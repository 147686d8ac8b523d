use super::{
    backward, forward_with_contexts, AdamParams, AdamState, Mode, ModelGraph, NnError, Scalar as _,
    Tensor,
};
use crate::metric;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam(AdamParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
}

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub early_stop_patience: usize,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub seed: u64,
    /// Training share of a train/validation split (e.g. 0.8 for 80/20).
    pub train_fraction: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.learning_rate <= 0.0 {
            return Err(NnError::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.early_stop_patience == 0 {
            return Err(NnError::Config(
                "epochs, batch_size and early_stopping_patience must be >= 1".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(NnError::Config(format!(
                "split fraction must be inside (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A labelled image source the trainer can draw from.
///
/// `input` yields the image as `c*h*w` floats in `[0, 1]`; `labels` yields
/// the reference values (one per rater). The regression target defaults to
/// the mean of the labels.
pub trait Dataset: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn input(&self, index: usize) -> Result<Vec<f32>, NnError>;

    fn labels(&self, index: usize) -> Vec<f64>;

    fn target(&self, index: usize) -> f64 {
        let l = self.labels(index);
        l.iter().sum::<f64>() / l.len() as f64
    }
}

/// Dataset held fully in memory (tests, small fixtures).
pub struct InMemoryDataset {
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<Vec<f64>>,
}

impl Dataset for InMemoryDataset {
    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn input(&self, index: usize) -> Result<Vec<f32>, NnError> {
        Ok(self.inputs[index].clone())
    }

    fn labels(&self, index: usize) -> Vec<f64> {
        self.labels[index].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean PK on the validation set; absent when PK is undefined there.
    pub val_pk: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (minimal validation loss).
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

/// Patience arithmetic for validation-loss early stopping.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_epoch: 0,
            best_loss: f64::INFINITY,
        }
    }

    /// Feed one epoch's validation loss. Returns `(improved, should_stop)`;
    /// the run stops once `patience` consecutive epochs fail to improve.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved = val_loss < self.best_loss;
        if improved {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
        }
        (improved, epoch - self.best_epoch >= self.patience)
    }
}

/// Train in place, returning the per-epoch log.
///
/// The dataset is reshuffled every epoch from the run seed, Adam drives the
/// updates, and the weights of the best-validation-loss epoch are restored
/// before returning. The whole run is deterministic given (weights, data,
/// config).
pub fn train<D: Dataset + ?Sized>(
    graph: &mut ModelGraph<f32>,
    train_set: &D,
    val_set: &D,
    config: &TrainConfig,
) -> Result<TrainLog, NnError> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NnError::Dataset("training and validation sets must be non-empty".into()));
    }
    let n_train = train_set.len();
    let sample_len: usize = {
        let [c, h, w] = graph.input_shape();
        c * h * w
    };

    // reference label columns of the validation set, for per-epoch PK
    let n_raters = val_set.labels(0).len();
    let mut val_columns: Vec<Vec<f64>> = vec![Vec::with_capacity(val_set.len()); n_raters];
    let mut val_targets: Vec<f64> = Vec::with_capacity(val_set.len());
    for i in 0..val_set.len() {
        let labels = val_set.labels(i);
        if labels.len() != n_raters {
            return Err(NnError::Dataset(format!(
                "validation row {i} has {} labels, expected {n_raters}",
                labels.len()
            )));
        }
        for (r, &v) in labels.iter().enumerate() {
            val_columns[r].push(v);
        }
        val_targets.push(val_set.target(i));
    }

    let OptimizerKind::Adam(adam_params) = config.optimizer;
    let mut adam = AdamState::new(graph, adam_params);
    let mut stopper = EarlyStopper::new(config.early_stop_patience);
    let mut best_weights = graph.weights().clone();
    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
    };

    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 1..=config.max_epochs {
        // fresh shuffle per epoch
        let mut rng = seeds::rng(seeds::derive_indexed(config.seed, "shuffle", epoch as u64));
        for i in (1..order.len()).rev() {
            use rand::Rng as _;
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut train_loss_acc = 0.0f64;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch_data = Vec::with_capacity(chunk.len() * sample_len);
            let mut targets = Vec::with_capacity(chunk.len());
            for &row in chunk {
                let input = train_set.input(row)?;
                if input.len() != sample_len {
                    return Err(NnError::Dataset(format!(
                        "row {row} has {} values, expected {sample_len}",
                        input.len()
                    )));
                }
                batch_data.extend_from_slice(&input);
                targets.push(train_set.target(row) as f32);
            }
            let [c, h, w] = graph.input_shape();
            let batch = Tensor::new(vec![chunk.len(), c, h, w], batch_data)?;
            let targets = Tensor::new(vec![chunk.len(), 1], targets)?;
            let dropout_seed = seeds::derive_indexed(
                config.seed,
                "dropout",
                ((epoch as u64) << 32) | batch_idx as u64,
            );
            let (_, ctxs) = forward_with_contexts(graph, &batch, Mode::Train, dropout_seed)?;
            let (loss, grads) = backward(graph, &ctxs, &targets)?;
            adam.step(graph, &grads, config.learning_rate)?;
            train_loss_acc += loss * chunk.len() as f64;
        }
        let train_loss = train_loss_acc / n_train as f64;

        let val_preds = predict_set(graph, val_set, sample_len)?;
        let mut val_loss = 0.0f64;
        for (p, t) in val_preds.iter().zip(&val_targets) {
            val_loss += (p - t) * (p - t);
        }
        val_loss /= val_preds.len() as f64;
        let val_pk = metric::average_pk(&val_columns, &val_preds)
            .ok()
            .map(|a| a.mean_pk);

        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_pk,
        });

        let (improved, should_stop) = stopper.observe(epoch, val_loss);
        if improved {
            best_weights = graph.weights().clone();
        }
        if should_stop {
            log.stop_reason = StopReason::EarlyStopped;
            break;
        }
    }

    log.best_epoch = stopper.best_epoch;
    if stopper.best_epoch > 0 {
        graph.set_weights(best_weights)?;
    }
    Ok(log)
}

/// Eval-mode predictions over a whole dataset, in dataset order.
pub fn predict_set<D: Dataset + ?Sized>(
    graph: &ModelGraph<f32>,
    set: &D,
    sample_len: usize,
) -> Result<Vec<f64>, NnError> {
    let mut preds = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let input = set.input(i)?;
        if input.len() != sample_len {
            return Err(NnError::Dataset(format!(
                "row {i} has {} values, expected {sample_len}",
                input.len()
            )));
        }
        let ctx = super::exec::forward_sample(graph, &input, Mode::Eval, 0, i as u64)?;
        preds.push(ctx.output(graph).as_f64());
    }
    Ok(preds)
}
