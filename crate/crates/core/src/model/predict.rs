use super::{Model, ModelError};
use crate::dsp::MelSpectrogram;
use crate::tensor::{Real, Tensor};

/// Windows evaluated per inference call when scoring a song.
const PREDICT_CHUNK: usize = 8;

/// Start frames of the non-overlapping `window`-frame segments of a `frames`-long song.
///
/// A trailing partial segment is dropped. A song shorter than one window yields a single
/// start at 0 (the window is then tiled, see [`extract_window`]).
pub fn segment_starts(frames: usize, window: usize) -> Vec<usize> {
    if frames < window {
        return vec![0];
    }
    (0..frames / window).map(|k| k * window).collect()
}

/// Copy `window` frames starting at `start`, wrapping cyclically past the end of the song.
pub fn extract_window(spec: &MelSpectrogram, start: usize, window: usize) -> Vec<f32> {
    let (frames, bands) = (spec.frames(), spec.bands());
    let mut out = Vec::with_capacity(window * bands);
    for i in 0..window {
        out.extend_from_slice(spec.frame((start + i) % frames));
    }
    out
}

/// Song-level mood probabilities: the arithmetic mean of the mood head over every full
/// segment, in inference mode. The metadata head is never evaluated.
pub fn predict_song<T: Real>(
    model: &Model<T>,
    spec: &MelSpectrogram,
) -> Result<Vec<f64>, ModelError> {
    if spec.frames() == 0 {
        return Err(ModelError::EmptySpectrogram);
    }
    let cfg = model.config();
    let (window, bands) = (cfg.input_frames, cfg.input_bands);
    if spec.bands() != bands {
        return Err(crate::tensor::TensorError::ShapeMismatch(format!(
            "spectrogram has {} bands, model expects {bands}",
            spec.bands()
        ))
        .into());
    }
    let starts = segment_starts(spec.frames(), window);
    let mut sum = vec![0f64; cfg.n_mood];
    for chunk in starts.chunks(PREDICT_CHUNK) {
        let mut data = Vec::with_capacity(chunk.len() * window * bands);
        for &s in chunk {
            data.extend(
                extract_window(spec, s, window)
                    .into_iter()
                    .map(|v| T::from_f64(v as f64)),
            );
        }
        let batch = Tensor::new(vec![chunk.len(), window, bands, 1], data)?;
        let out = model.mood_only(&batch)?;
        for row in out.data().chunks(cfg.n_mood) {
            for (acc, &p) in sum.iter_mut().zip(row) {
                *acc += p.as_f64();
            }
        }
    }
    let n = starts.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_arithmetic() {
        assert_eq!(segment_starts(187, 187), vec![0]);
        assert_eq!(segment_starts(561, 187), vec![0, 187, 374]);
        assert_eq!(segment_starts(400, 187), vec![0, 187]);
        assert_eq!(segment_starts(50, 187), vec![0]);
    }

    #[test]
    fn short_song_is_tiled() {
        let spec = MelSpectrogram::new(3, 2, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let w = extract_window(&spec, 0, 5);
        assert_eq!(w, vec![0., 1., 2., 3., 4., 5., 0., 1., 2., 3.]);
    }
}
