//! Epoch loop: sampled batches, the weighted multi-task loss, Adam updates and early
//! stopping on the validation mood loss.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{batches_per_epoch, sample_batch, Batch, DatasetError, LabeledSong};
use crate::metrics::{macro_metrics, score_songs, MetricsError};
use crate::model::{combined_loss, Model, ModelConfig, ModelError};
use crate::tensor::{bce_loss, Adam, AdamConfig, Mode, Real, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("loss became non-finite ({value}) at optimizer step {step}")]
    DivergedLoss { step: u64, value: f64 },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model head sizes ({model_mood}, {model_meta}) do not match the data ({data_mood}, {data_meta})")]
    HeadMismatch {
        model_mood: usize,
        model_meta: usize,
        data_mood: usize,
        data_meta: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Overrides `floor(1.25 · train songs)` when set.
    pub batches_per_epoch: Option<usize>,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 30,
            patience: 3,
            batch_size: 32,
            batches_per_epoch: None,
            optimizer: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.patience >= self.max_epochs {
            return bad("patience must be smaller than max_epochs");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.batches_per_epoch == Some(0) {
            return bad("batches_per_epoch must be at least 1");
        }
        Ok(())
    }
}

/// Outcome of feeding one epoch's validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// `(epoch, loss)` of the best epoch so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn update(&mut self, epoch: usize, loss: f64) -> StopDecision {
        match self.best {
            Some((_, b)) if loss >= b => {
                self.stale += 1;
                if self.stale >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, loss));
                self.stale = 0;
                StopDecision::Improved
            }
        }
    }
}

/// Losses of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub total: f64,
    pub mood: f64,
    pub metadata: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub mood_loss: f64,
    /// `None` when no label has both classes among the validation songs.
    pub macro_ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_mood_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_metadata_loss: Option<f64>,
    pub val_mood_loss: f64,
    pub val_macro_ap: Option<f64>,
    pub wall_seconds: f64,
}

/// Run settings echoed at the top of a history file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryHeader {
    pub alpha: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_songs: usize,
    pub val_songs: usize,
    pub batches_per_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub header: HistoryHeader,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// The history with wall-clock times zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut h = self.clone();
        for e in &mut h.epochs {
            e.wall_seconds = 0.0;
        }
        h
    }

    /// JSON lines: the header, one line per epoch, then a summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let line = |v: serde_json::Value| serde_json::to_string(&v).expect("json") + "\n";
        out += &line(serde_json::json!({ "header": self.header }));
        for e in &self.epochs {
            out += &line(serde_json::to_value(e).expect("json"));
        }
        out += &line(serde_json::json!({
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }));
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(self.to_jsonl().as_bytes()))
            .map_err(|source| TrainError::Io {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Mood loss and macro AP of song-level predictions on `songs`.
pub fn validate<T: Real>(
    model: &Model<T>,
    songs: &[LabeledSong],
) -> Result<Validation, TrainError> {
    if songs.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    let set = score_songs(model, songs)?;
    let n_mood = model.config().n_mood;
    let probs = Tensor::<f64>::new(
        vec![songs.len(), n_mood],
        set.scores.iter().flatten().copied().collect(),
    )?;
    let targets = Tensor::<f64>::new(
        vec![songs.len(), n_mood],
        songs
            .iter()
            .flat_map(|s| s.mood.iter().map(|&v| v as f64))
            .collect(),
    )?;
    let mood_loss = bce_loss(&probs, &targets)?;
    let macro_ap = match macro_metrics(&set) {
        Ok(r) => Some(r.macro_ap),
        Err(MetricsError::NoAdmissibleLabels) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Validation {
        mood_loss,
        macro_ap,
    })
}

/// Holds a model, its optimizer state and the training RNG.
#[derive(Debug, Clone)]
pub struct Trainer<T = f32> {
    pub model: Model<T>,
    pub config: TrainConfig,
    optimizer: Adam<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> Trainer<T> {
    /// The training RNG (batch sampling and dropout) is seeded from `config.seed` on its own
    /// stream, separate from the one used to initialize weights.
    pub fn new(model: Model<T>, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            optimizer: Adam::new(config.optimizer),
            model,
            config,
            rng,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.optimizer.steps_taken()
    }

    /// One Adam update on `batch`.
    pub fn train_step(&mut self, batch: &Batch<T>) -> Result<StepLoss, TrainError> {
        self.model.zero_grad();
        let (out, trace) = self
            .model
            .forward(&batch.inputs, Mode::Train, &mut self.rng)?;
        let meta_targets = match self.model.metadata_head() {
            Some(_) => batch.metadata_targets.as_ref(),
            None => None,
        };
        let loss = combined_loss(&out, &batch.mood_targets, meta_targets, self.model.alpha())?;
        if !loss.total.is_finite() {
            return Err(TrainError::DivergedLoss {
                step: self.optimizer.steps_taken() + 1,
                value: loss.total,
            });
        }
        self.model.backward(&trace, &loss.grads)?;
        self.optimizer.step(&mut self.model.trainable_mut())?;
        Ok(StepLoss {
            total: loss.total,
            mood: loss.mood,
            metadata: loss.metadata,
        })
    }

    /// Draw a batch from `songs` with the trainer's RNG.
    pub fn sample(&mut self, songs: &[LabeledSong]) -> Result<Batch<T>, TrainError> {
        Ok(sample_batch(
            songs,
            self.config.batch_size,
            self.model.config().input_frames,
            &mut self.rng,
        )?)
    }

    fn check_heads(&self, songs: &[LabeledSong]) -> Result<(), TrainError> {
        let cfg = self.model.config();
        let s = &songs[0];
        let meta_ok = cfg.n_metadata == 0 || cfg.n_metadata == s.metadata.len();
        if cfg.n_mood != s.mood.len() || !meta_ok {
            return Err(TrainError::HeadMismatch {
                model_mood: cfg.n_mood,
                model_meta: cfg.n_metadata,
                data_mood: s.mood.len(),
                data_meta: s.metadata.len(),
            });
        }
        Ok(())
    }

    pub fn header(&self, train: &[LabeledSong], val: &[LabeledSong]) -> HistoryHeader {
        HistoryHeader {
            alpha: self.model.alpha(),
            model: self.model.config().clone(),
            train: self.config.clone(),
            train_songs: train.len(),
            val_songs: val.len(),
            batches_per_epoch: self
                .config
                .batches_per_epoch
                .unwrap_or_else(|| batches_per_epoch(train.len())),
        }
    }

    /// Train until early stopping or `max_epochs`, then restore the weights of the epoch with
    /// the lowest validation mood loss. `on_epoch` sees every record as it is produced.
    pub fn fit(
        &mut self,
        train: &[LabeledSong],
        val: &[LabeledSong],
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<TrainHistory, TrainError> {
        if train.is_empty() {
            return Err(TrainError::EmptySplit("training"));
        }
        if val.is_empty() {
            return Err(TrainError::EmptySplit("validation"));
        }
        self.check_heads(train)?;
        let header = self.header(train, val);
        let mut stopper = EarlyStopping::new(self.config.patience);
        let mut best_model = self.model.clone();
        let mut epochs = Vec::new();
        let mut stopped_early = false;
        for epoch in 1..=self.config.max_epochs {
            let started = Instant::now();
            let (mut total, mut mood, mut meta) = (0.0, 0.0, 0.0);
            for _ in 0..header.batches_per_epoch {
                let batch = self.sample(train)?;
                let l = self.train_step(&batch)?;
                total += l.total;
                mood += l.mood;
                meta += l.metadata.unwrap_or(0.0);
            }
            let n = header.batches_per_epoch as f64;
            let v = validate(&self.model, val)?;
            let record = EpochRecord {
                epoch,
                train_loss: total / n,
                train_mood_loss: mood / n,
                train_metadata_loss: self.model.metadata_head().map(|_| meta / n),
                val_mood_loss: v.mood_loss,
                val_macro_ap: v.macro_ap,
                wall_seconds: started.elapsed().as_secs_f64(),
            };
            on_epoch(&record);
            epochs.push(record);
            match stopper.update(epoch, v.mood_loss) {
                StopDecision::Improved => best_model = self.model.clone(),
                StopDecision::Continue => {}
                StopDecision::Stop => {
                    stopped_early = epoch < self.config.max_epochs;
                    break;
                }
            }
        }
        self.model = best_model;
        Ok(TrainHistory {
            header,
            epochs,
            best_epoch: stopper.best().map_or(0, |(e, _)| e),
            stopped_early,
        })
    }
}

/// Train `model` on `train`, selecting weights on `val`. Returns the best model.
pub fn train<T: Real>(
    model: Model<T>,
    train: &[LabeledSong],
    val: &[LabeledSong],
    config: &TrainConfig,
) -> Result<(Model<T>, TrainHistory), TrainError> {
    let mut trainer = Trainer::new(model, config.clone())?;
    let history = trainer.fit(train, val, |_| {})?;
    Ok((trainer.model, history))
}
