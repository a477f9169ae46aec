use super::{DspError, MelSpectrogram};

/// Lower bound applied to per-band standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-band mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormalizationStats {
    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// Stats that leave spectrograms unchanged.
    pub fn identity(bands: usize) -> Self {
        Self {
            mean: vec![0.0; bands],
            std: vec![1.0; bands],
        }
    }
}

/// Two-pass per-band statistics over every frame of every spectrogram, accumulated in f64.
pub fn normalization_stats<'a, I>(spectrograms: I) -> Result<NormalizationStats, DspError>
where
    I: IntoIterator<Item = &'a MelSpectrogram>,
    I::IntoIter: Clone,
{
    let iter = spectrograms.into_iter();
    let mut bands = None;
    let mut count = 0usize;
    let mut sum = Vec::new();
    for spec in iter.clone() {
        let b = *bands.get_or_insert(spec.bands());
        if spec.bands() != b {
            return Err(DspError::BandMismatch {
                expected: b,
                found: spec.bands(),
            });
        }
        if sum.is_empty() {
            sum = vec![0f64; b];
        }
        for frame in spec.values().chunks(b) {
            for (s, &v) in sum.iter_mut().zip(frame) {
                *s += v as f64;
            }
        }
        count += spec.frames();
    }
    let Some(bands) = bands else {
        return Err(DspError::EmptyCollection);
    };
    if count == 0 {
        return Err(DspError::EmptyCollection);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();

    let mut sq = vec![0f64; bands];
    for spec in iter {
        for frame in spec.values().chunks(bands) {
            for ((s, &v), m) in sq.iter_mut().zip(frame).zip(&mean) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
    }
    let std = sq
        .iter()
        .map(|s| (s / count as f64).sqrt().max(STD_FLOOR) as f32)
        .collect();
    Ok(NormalizationStats {
        mean: mean.into_iter().map(|m| m as f32).collect(),
        std,
    })
}

/// Z-score each band: `(value - mean) / std`.
pub fn apply_normalization(
    spec: &MelSpectrogram,
    stats: &NormalizationStats,
) -> Result<MelSpectrogram, DspError> {
    if stats.bands() != spec.bands() {
        return Err(DspError::BandMismatch {
            expected: spec.bands(),
            found: stats.bands(),
        });
    }
    let bands = spec.bands();
    let values = spec
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let b = i % bands;
            ((v as f64 - stats.mean[b] as f64) / stats.std[b] as f64) as f32
        })
        .collect();
    MelSpectrogram::new(spec.frames(), bands, values)
}
