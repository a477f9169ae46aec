use rand::Rng;

use super::{encode_targets, DatasetError, LabelVocabulary, SongRecord};
use crate::dsp::{apply_normalization, read_spectrogram, MelSpectrogram, NormalizationStats};
use crate::model::extract_window;
use crate::tensor::{Real, Tensor};

/// A song held in memory with its normalized spectrogram and encoded targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSong {
    pub song_id: String,
    pub spec: MelSpectrogram,
    pub mood: Vec<f32>,
    pub metadata: Vec<f32>,
}

/// Normalize an in-memory spectrogram and attach the encoded targets of `record`.
pub fn label_song(
    record: &SongRecord,
    raw: &MelSpectrogram,
    vocab: &LabelVocabulary,
    stats: &NormalizationStats,
) -> Result<LabeledSong, DatasetError> {
    let missing = |reason: String| DatasetError::MissingSpectrogram {
        song_id: record.song_id.clone(),
        reason,
    };
    if raw.frames() == 0 {
        return Err(missing("spectrogram has no frames".into()));
    }
    let spec = apply_normalization(raw, stats).map_err(|e| missing(e.to_string()))?;
    let (mood, metadata) = encode_targets(record, vocab);
    Ok(LabeledSong {
        song_id: record.song_id.clone(),
        spec,
        mood,
        metadata,
    })
}

/// Read, normalize and label the spectrogram of every record.
pub fn load_songs<'a>(
    records: impl IntoIterator<Item = &'a SongRecord>,
    vocab: &LabelVocabulary,
    stats: &NormalizationStats,
) -> Result<Vec<LabeledSong>, DatasetError> {
    records
        .into_iter()
        .map(|r| {
            let path =
                r.spectrogram_path
                    .as_ref()
                    .ok_or_else(|| DatasetError::MissingSpectrogram {
                        song_id: r.song_id.clone(),
                        reason: "manifest has no spectrogram_path".into(),
                    })?;
            let raw = read_spectrogram(path).map_err(|e| DatasetError::MissingSpectrogram {
                song_id: r.song_id.clone(),
                reason: e.to_string(),
            })?;
            label_song(r, &raw, vocab, stats)
        })
        .collect()
}

/// One training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    /// `B × window × bands × 1`.
    pub inputs: Tensor<T>,
    pub mood_targets: Tensor<T>,
    /// Absent when the vocabulary has no metadata labels.
    pub metadata_targets: Option<Tensor<T>>,
    /// `(song_id, start_frame)` of every segment.
    pub provenance: Vec<(String, usize)>,
}

/// Draw `batch_size` random segments: for each, a uniformly random song, then a uniformly
/// random start in `[0, frames − window]`. Songs shorter than `window` start at 0 and are
/// tiled cyclically.
pub fn sample_batch<T: Real, R: Rng + ?Sized>(
    songs: &[LabeledSong],
    batch_size: usize,
    window: usize,
    rng: &mut R,
) -> Result<Batch<T>, DatasetError> {
    let first = songs.first().ok_or(DatasetError::EmptyTrainingSplit)?;
    let (bands, n_mood, n_meta) = (first.spec.bands(), first.mood.len(), first.metadata.len());
    let mut inputs = Vec::with_capacity(batch_size * window * bands);
    let mut mood = Vec::with_capacity(batch_size * n_mood);
    let mut meta = Vec::with_capacity(batch_size * n_meta);
    let mut provenance = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let song = &songs[rng.random_range(0..songs.len())];
        let last_start = song.spec.frames().saturating_sub(window);
        let start = rng.random_range(0..=last_start);
        inputs.extend(
            extract_window(&song.spec, start, window)
                .into_iter()
                .map(|v| T::from_f64(v as f64)),
        );
        mood.extend(song.mood.iter().map(|&v| T::from_f64(v as f64)));
        meta.extend(song.metadata.iter().map(|&v| T::from_f64(v as f64)));
        provenance.push((song.song_id.clone(), start));
    }
    let shape_err = |e: crate::tensor::TensorError| DatasetError::InvalidSpec(e.to_string());
    Ok(Batch {
        inputs: Tensor::new(vec![batch_size, window, bands, 1], inputs).map_err(shape_err)?,
        mood_targets: Tensor::new(vec![batch_size, n_mood], mood).map_err(shape_err)?,
        metadata_targets: if n_meta > 0 {
            Some(Tensor::new(vec![batch_size, n_meta], meta).map_err(shape_err)?)
        } else {
            None
        },
        provenance,
    })
}

/// `floor(1.25 · n)`, at least 1.
pub fn batches_per_epoch(num_train_songs: usize) -> usize {
    (num_train_songs * 5 / 4).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn song(id: &str, frames: usize, mood: Vec<f32>) -> LabeledSong {
        let spec =
            MelSpectrogram::new(frames, 4, (0..frames * 4).map(|i| i as f32).collect()).unwrap();
        LabeledSong {
            song_id: id.into(),
            spec,
            mood,
            metadata: vec![],
        }
    }

    #[test]
    fn epoch_lengths() {
        assert_eq!(batches_per_epoch(14357), 17946);
        assert_eq!(batches_per_epoch(4), 5);
        assert_eq!(batches_per_epoch(1), 1);
        assert_eq!(batches_per_epoch(0), 1);
    }

    #[test]
    fn batch_geometry_and_targets() {
        let songs = vec![song("a", 300, vec![1.0, 0.0])];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Batch<f32> = sample_batch(&songs, 32, 187, &mut rng).unwrap();
        assert_eq!(b.inputs.shape(), &[32, 187, 4, 1]);
        assert_eq!(b.mood_targets.shape(), &[32, 2]);
        assert!(b.metadata_targets.is_none());
        assert!(b.mood_targets.data().chunks(2).all(|r| r == [1.0, 0.0]));
        assert!(b.provenance.iter().all(|(id, s)| id == "a" && *s <= 113));
        // First window starts where provenance says.
        let s0 = b.provenance[0].1;
        assert_eq!(b.inputs.data()[0], (s0 * 4) as f32);
    }

    #[test]
    fn exact_and_short_songs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let exact = vec![song("e", 187, vec![1.0])];
        let b: Batch<f32> = sample_batch(&exact, 16, 187, &mut rng).unwrap();
        assert!(b.provenance.iter().all(|(_, s)| *s == 0));
        let short = vec![song("s", 10, vec![1.0])];
        let b: Batch<f32> = sample_batch(&short, 2, 187, &mut rng).unwrap();
        assert_eq!(b.inputs.data()[40], 0.0);
        assert!(matches!(
            sample_batch::<f32, _>(&[], 2, 187, &mut rng),
            Err(DatasetError::EmptyTrainingSplit)
        ));
    }

    #[test]
    fn song_selection_is_uniform() {
        let songs: Vec<_> = (0..10)
            .map(|i| song(&i.to_string(), 3, vec![1.0]))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for _ in 0..draws / 1000 {
            let b: Batch<f32> = sample_batch(&songs, 1000, 2, &mut rng).unwrap();
            for (id, _) in &b.provenance {
                counts[id.parse::<usize>().unwrap()] += 1;
            }
        }
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let songs: Vec<_> = (0..3)
            .map(|i| song(&i.to_string(), 200, vec![1.0]))
            .collect();
        let a: Batch<f64> =
            sample_batch(&songs, 8, 187, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b: Batch<f64> =
            sample_batch(&songs, 8, 187, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
