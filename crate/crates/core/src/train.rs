//! Losses, Adam, and the minibatch training loop with early stopping.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{MtpDataset, ScoreType};
use crate::encoders::{CoupleEncoder, EncodeError};
use crate::network::{CoupleInput, Gradients, Input, Model, NetworkError, OutputTransform};
use crate::splitter::Split;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{loss} loss cannot be used with {score_type} scores")]
    IncompatibleLoss { loss: Loss, score_type: ScoreType },
    #[error("{loss} loss needs a {expected} output, the model has a different one")]
    OutputMismatch { loss: Loss, expected: &'static str },
    #[error("the training partition is empty")]
    EmptyTrain,
    #[error("cannot evaluate an empty partition")]
    EmptyPartition,
    #[error("training loss became non-finite in epoch {0}")]
    DivergedLoss(usize),
    #[error("prediction {0} outside the open interval (0, 1)")]
    DomainError(f64),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Bce,
    Mse,
}

impl Loss {
    pub fn value(self, y: f64, y_hat: f64) -> Result<f64> {
        match self {
            Loss::Bce => bce(y, y_hat),
            Loss::Mse => Ok(mse(y, y_hat)),
        }
    }

    pub fn derivative(self, y: f64, y_hat: f64) -> Result<f64> {
        match self {
            Loss::Bce => bce_derivative(y, y_hat),
            Loss::Mse => Ok(mse_derivative(y, y_hat)),
        }
    }

    /// Binary scores train with BCE, ordinal and real scores with MSE.
    pub fn for_score_type(score_type: ScoreType) -> Option<Loss> {
        match score_type {
            ScoreType::Binary => Some(Loss::Bce),
            ScoreType::Ordinal | ScoreType::Real => Some(Loss::Mse),
            ScoreType::Nominal => None,
        }
    }

    pub fn output_transform(self) -> OutputTransform {
        match self {
            Loss::Bce => OutputTransform::Sigmoid,
            Loss::Mse => OutputTransform::Identity,
        }
    }

    pub fn check_compatible(self, score_type: ScoreType, model: &Model) -> Result<()> {
        if Loss::for_score_type(score_type) != Some(self) {
            return Err(TrainError::IncompatibleLoss {
                loss: self,
                score_type,
            });
        }
        if model.output_transform() != self.output_transform() {
            let expected = match self {
                Loss::Bce => "sigmoid",
                Loss::Mse => "identity",
            };
            return Err(TrainError::OutputMismatch {
                loss: self,
                expected,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Bce => "bce",
            Loss::Mse => "mse",
        })
    }
}

impl FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bce" => Ok(Loss::Bce),
            "mse" => Ok(Loss::Mse),
            other => Err(format!("unknown loss '{other}'")),
        }
    }
}

/// `-[y ln p + (1 - y) ln(1 - p)]`
pub fn bce(y: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(TrainError::DomainError(p));
    }
    Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

pub fn bce_derivative(y: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(TrainError::DomainError(p));
    }
    Ok(-y / p + (1.0 - y) / (1.0 - p))
}

pub fn mse(y: f64, y_hat: f64) -> f64 {
    (y - y_hat) * (y - y_hat)
}

pub fn mse_derivative(y: f64, y_hat: f64) -> f64 {
    -2.0 * (y - y_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: Loss,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl TrainConfig {
    pub fn new(loss: Loss) -> Self {
        Self {
            loss,
            learning_rate: 1e-3,
            batch_size: 512,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.adam_epsilon <= 0.0 {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl Adam {
    pub fn new(param_count: usize, cfg: &TrainConfig) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            epsilon: cfg.adam_epsilon,
            first: vec![0.0; param_count],
            second: vec![0.0; param_count],
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps);
        let c2 = 1.0 - self.beta2.powi(self.steps);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when there is no validation partition.
    pub val_loss: Option<f64>,
}

impl EpochRecord {
    /// Loss watched by early stopping: validation loss, or training loss when
    /// no validation partition exists.
    pub fn monitored(&self) -> f64 {
        self.val_loss.unwrap_or(self.train_loss)
    }

    /// `epoch,train_loss,val_loss` log line.
    pub fn log_line(&self) -> String {
        match self.val_loss {
            Some(v) => format!("{},{},{}", self.epoch, self.train_loss, v),
            None => format!("{},{},nan", self.epoch, self.train_loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch
            .checked_sub(1)
            .and_then(|k| self.history.get(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// New best loss; snapshot the parameters.
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored loss has not improved for `patience` epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_epoch: usize,
    best_loss: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_epoch: 0,
            best_loss: f64::INFINITY,
        }
    }

    /// Only a strictly lower loss counts as an improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            StopDecision::Improved
        } else if epoch - self.best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// Pre-encoded branch inputs for every entity, so each entity is encoded once.
pub struct EncodedData<'a> {
    ds: &'a MtpDataset,
    encoders: &'a CoupleEncoder,
    instances: Vec<Input>,
    targets: Vec<Input>,
}

impl<'a> EncodedData<'a> {
    pub fn new(ds: &'a MtpDataset, encoders: &'a CoupleEncoder) -> Result<Self> {
        let instances = (0..ds.interactions.n())
            .map(|i| encoders.instance.encode(i))
            .collect::<std::result::Result<_, _>>()?;
        let targets = (0..ds.interactions.m())
            .map(|j| encoders.target.encode(j))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self {
            ds,
            encoders,
            instances,
            targets,
        })
    }

    pub fn couple(&self, triplet_index: usize) -> Result<CoupleInput> {
        let t = self.ds.interactions.triplets()[triplet_index];
        let dyadic = match &self.encoders.dyadic {
            Some(e) => Some(e.encode(triplet_index)?),
            None => None,
        };
        Ok(CoupleInput {
            instance: self.instances[t.instance].clone(),
            target: self.targets[t.target].clone(),
            dyadic,
        })
    }

    pub fn score(&self, triplet_index: usize) -> f64 {
        self.ds.interactions.triplets()[triplet_index].score
    }
}

/// Mean loss over a set of triplets; no parameters are touched.
pub fn mean_loss(
    model: &Model,
    data: &EncodedData<'_>,
    indices: &[usize],
    loss: Loss,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(TrainError::EmptyPartition);
    }
    let mut total = 0.0;
    for &k in indices {
        let (y_hat, _) = model.forward(&data.couple(k)?)?;
        total += loss.value(data.score(k), y_hat)?;
    }
    Ok(total / indices.len() as f64)
}

/// Trains on `split.train` and early-stops on `split.validation`.
///
/// Every epoch shuffles the training indices with a generator seeded from
/// `(cfg.seed, epoch)`, walks them in batches of `batch_size`, and takes one
/// Adam step per batch on the mean per-couple loss. Returns the parameters of
/// the epoch with the lowest validation loss.
pub fn train_model(
    model: Model,
    ds: &MtpDataset,
    split: &Split,
    encoders: &CoupleEncoder,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    train_model_with(model, ds, split, encoders, cfg, |_| {})
}

/// [`train_model`] with a callback invoked after every epoch.
pub fn train_model_with(
    mut model: Model,
    ds: &MtpDataset,
    split: &Split,
    encoders: &CoupleEncoder,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    cfg.loss
        .check_compatible(ds.interactions.score_type(), &model)?;
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }
    let data = EncodedData::new(ds, encoders)?;

    let mut report = TrainReport {
        epochs_run: 0,
        history: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best_params = model.params().to_vec();
    let mut stopping = EarlyStopping::new(cfg.patience);
    let mut optimizer = Adam::new(model.param_count(), cfg);
    let mut grads = Gradients::zeros_like(&model);
    let mut order = split.train.clone();

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            let scale = 1.0 / batch.len() as f64;
            for &k in batch {
                let (y_hat, cache) = model.forward(&data.couple(k)?)?;
                let y = data.score(k);
                epoch_total += cfg.loss.value(y, y_hat)?;
                model.backward_into(&cache, cfg.loss.derivative(y, y_hat)? * scale, &mut grads)?;
            }
            optimizer.step(model.params_mut(), grads.values());
        }
        let train_loss = epoch_total / order.len() as f64;
        if !train_loss.is_finite() {
            return Err(TrainError::DivergedLoss(epoch));
        }
        let val_loss = if split.validation.is_empty() {
            None
        } else {
            Some(mean_loss(&model, &data, &split.validation, cfg.loss)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&record);
        report.history.push(record);
        report.epochs_run = epoch;

        match stopping.observe(epoch, record.monitored()) {
            StopDecision::Improved => best_params.copy_from_slice(model.params()),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                report.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    report.best_epoch = stopping.best_epoch();

    model.params_mut().copy_from_slice(&best_params);
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mean_loss: f64,
    /// Triplet indices in ascending order, aligned with `scores`.
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub losses: Vec<f64>,
}

/// Scores every triplet in `indices` and averages the per-couple loss.
pub fn evaluate_split(
    model: &Model,
    ds: &MtpDataset,
    indices: &[usize],
    encoders: &CoupleEncoder,
    loss: Loss,
) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(TrainError::EmptyPartition);
    }
    let data = EncodedData::new(ds, encoders)?;
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let couples = sorted
        .iter()
        .map(|&k| data.couple(k))
        .collect::<Result<Vec<_>>>()?;
    let scores = crate::network::predict_batch(model, &couples)?;
    let losses = sorted
        .iter()
        .zip(&scores)
        .map(|(&k, &s)| loss.value(data.score(k), s))
        .collect::<Result<Vec<f64>>>()?;
    let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(Evaluation {
        mean_loss,
        indices: sorted,
        scores,
        losses,
    })
}
