//! Song manifests, label vocabularies, song-level splits and the random-window sampler.

mod manifest;
mod sampler;
mod split;
mod vocab;

use std::path::PathBuf;

use thiserror::Error;

pub use manifest::{load_manifest, parse_manifest, write_manifest, SongRecord};
pub use sampler::{batches_per_epoch, label_song, load_songs, sample_batch, Batch, LabeledSong};
pub use split::{read_split, split_songs, write_split, Split, SplitAssignment, MIN_SONGS};
pub use vocab::{
    build_vocab, encode_targets, filter_labeled, LabelVocabulary, MetadataSpec, MoodSelection,
    YEAR_BUCKET_WIDTH,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate song id `{0}`")]
    DuplicateSongId(String),
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("requested {requested} {kind} labels but only {available} are available")]
    InsufficientLabels {
        kind: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("year buckets requested but no record carries a year")]
    NoYearData,
    #[error("need at least {MIN_SONGS} songs to split, got {0}")]
    TooFewSongs(usize),
    #[error("the training split is empty")]
    EmptyTrainingSplit,
    #[error("no spectrogram for song `{song_id}`: {reason}")]
    MissingSpectrogram { song_id: String, reason: String },
    #[error("invalid label specification: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
