//! End-to-end glue shared by the command line, the examples and the tests: turn records and
//! raw spectrograms into labelled splits, then train and score one configuration.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dataset::{
    build_vocab, filter_labeled, label_song, DatasetError, LabelVocabulary, LabeledSong,
    MetadataSpec, MoodSelection, SongRecord, Split, SplitAssignment,
};
use crate::dsp::{
    compute_mel_spectrogram, normalization_stats, resample, AudioBuffer, DspConfig, DspError,
    MelSpectrogram, NormalizationStats,
};
use crate::metrics::{evaluate, MetricsReport};
use crate::model::{AlphaSetting, Model, ModelAnnotations, ModelConfig};
use crate::synth::SynthCorpus;
use crate::train::{TrainConfig, TrainHistory, Trainer};
use crate::Result;

/// Labelled songs of all three splits plus the vocabulary and statistics behind them.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub vocab: LabelVocabulary,
    pub stats: NormalizationStats,
    pub train: Vec<LabeledSong>,
    pub val: Vec<LabeledSong>,
    pub test: Vec<LabeledSong>,
    /// Songs dropped because they carry no vocabulary mood.
    pub dropped: Vec<String>,
}

impl PreparedData {
    pub fn split(&self, split: Split) -> &[LabeledSong] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Log-mel spectrogram of in-memory audio, conditioned like [`crate::dsp::load_audio`]:
/// resampled to the target rate, capped at `max_seconds` and clamped to [-1, 1].
pub fn spectrogram_of(audio: &AudioBuffer, dsp: &DspConfig) -> Result<MelSpectrogram, DspError> {
    dsp.validate()?;
    let mut samples = if audio.sample_rate == dsp.target_sample_rate {
        audio.samples.clone()
    } else {
        resample(&audio.samples, audio.sample_rate, dsp.target_sample_rate)
    };
    samples.truncate(dsp.max_samples());
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    compute_mel_spectrogram(&AudioBuffer::new(samples, dsp.target_sample_rate), dsp)
}

/// Spectrograms of every song of a synthetic corpus, keyed by song id.
pub fn corpus_spectrograms(
    corpus: &SynthCorpus,
    dsp: &DspConfig,
) -> Result<BTreeMap<String, MelSpectrogram>, DspError> {
    corpus
        .songs
        .iter()
        .map(|s| Ok((s.record.song_id.clone(), spectrogram_of(&s.audio, dsp)?)))
        .collect()
}

/// Build the vocabulary from the training split, drop songs without a vocabulary mood, derive
/// normalization statistics from the training songs unless `stats` is given, and label
/// every remaining song.
pub fn prepare(
    records: &[SongRecord],
    spectrograms: &BTreeMap<String, MelSpectrogram>,
    split: &SplitAssignment,
    moods: &MoodSelection,
    metadata: &MetadataSpec,
    stats: Option<NormalizationStats>,
) -> Result<PreparedData> {
    let train_records: Vec<SongRecord> = split
        .select(records, Split::Train)
        .into_iter()
        .cloned()
        .collect();
    if train_records.is_empty() {
        return Err(DatasetError::EmptyTrainingSplit.into());
    }
    let vocab = build_vocab(&train_records, moods, metadata, None)?;
    let in_split: Vec<SongRecord> = records
        .iter()
        .filter(|r| split.songs.contains_key(&r.song_id))
        .cloned()
        .collect();
    let kept = filter_labeled(&in_split, &vocab);
    let dropped = in_split
        .iter()
        .filter(|r| !kept.iter().any(|k| k.song_id == r.song_id))
        .map(|r| r.song_id.clone())
        .collect();
    let raw = |r: &SongRecord| {
        spectrograms
            .get(&r.song_id)
            .ok_or_else(|| DatasetError::MissingSpectrogram {
                song_id: r.song_id.clone(),
                reason: "no spectrogram supplied".into(),
            })
    };
    let stats = match stats {
        Some(s) => s,
        None => {
            let train_specs = kept
                .iter()
                .filter(|r| split.songs.get(&r.song_id) == Some(&Split::Train))
                .map(raw)
                .collect::<Result<Vec<_>, _>>()?;
            normalization_stats(train_specs)?
        }
    };
    let mut parts: BTreeMap<Split, Vec<LabeledSong>> = BTreeMap::new();
    for r in &kept {
        let song = label_song(r, raw(r)?, &vocab, &stats)?;
        parts.entry(split.songs[&r.song_id]).or_default().push(song);
    }
    let mut take = |s: Split| parts.remove(&s).unwrap_or_default();
    Ok(PreparedData {
        train: take(Split::Train),
        val: take(Split::Val),
        test: take(Split::Test),
        vocab,
        stats,
        dropped,
    })
}

/// Model configuration for `vocab`: head widths from the vocabulary, trunk settings from
/// `base`. `alpha` defaults to `auto` with a metadata head and 0 without one.
pub fn model_config_for(
    vocab: &LabelVocabulary,
    base: &ModelConfig,
    alpha: Option<AlphaSetting>,
) -> ModelConfig {
    let n_metadata = vocab.metadata_size();
    ModelConfig {
        n_mood: vocab.n_mood(),
        n_metadata,
        alpha: alpha.unwrap_or(if n_metadata > 0 {
            AlphaSetting::Auto
        } else {
            AlphaSetting::Fixed(0.0)
        }),
        ..base.clone()
    }
}

/// Initialize a model from `config` with the seeded generator used for every run.
pub fn init_model(config: ModelConfig, vocab: &LabelVocabulary, seed: u64) -> Result<Model<f32>> {
    let mut model = Model::build(config, &mut ChaCha8Rng::seed_from_u64(seed))?;
    model.annotations = ModelAnnotations {
        mood_labels: vocab.mood_labels.clone(),
        mood_vocab_hash: vocab.mood_hash(),
        metadata_vocab_hash: vocab.metadata_hash(),
        stats_file: None,
    };
    Ok(model)
}

/// A trained model with its history and test-split metrics.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: Model<f32>,
    pub history: TrainHistory,
    pub test: MetricsReport,
}

/// Initialize with `train.seed`, fit on the training split with early stopping on the
/// validation split, then evaluate on the test split.
pub fn train_and_evaluate(
    data: &PreparedData,
    config: ModelConfig,
    train: &TrainConfig,
    on_epoch: impl FnMut(&crate::train::EpochRecord),
) -> Result<RunOutcome> {
    let model = init_model(config, &data.vocab, train.seed)?;
    let mut trainer = Trainer::new(model, train.clone())?;
    let history = trainer.fit(&data.train, &data.val, on_epoch)?;
    let test = evaluate(&trainer.model, &data.test)?;
    Ok(RunOutcome {
        model: trainer.model,
        history,
        test,
    })
}

/// Fingerprint of a set of song ids (order-insensitive), used to check that two runs were
/// scored on the same songs.
pub fn song_set_hash<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..8])
}
