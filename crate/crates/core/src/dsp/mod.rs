//! Audio front end: WAV ingestion, resampling and log-mel spectrograms.
//!
//! The frame geometry is fixed by [`DspConfig::default`]: 16 kHz audio, a hop of 256 samples
//! (62.5 frames per second), a 512-sample Hann window and 96 mel bands. Only the first
//! 29 seconds of each file are kept, which yields 1813 frames for a full-length song.

mod io;
mod mel;
mod normalize;
mod resample;
mod wav;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    read_spectrogram, read_stats, spectrogram_from_bytes, spectrogram_to_bytes, stats_from_bytes,
    stats_to_bytes, write_spectrogram, write_stats,
};
pub use mel::{compute_mel_spectrogram, hz_to_mel, mel_band_centers, mel_filterbank, mel_to_hz};
pub use normalize::{apply_normalization, normalization_stats, NormalizationStats, STD_FLOOR};
pub use resample::resample;
pub use wav::{load_audio, write_wav};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("cannot read audio file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported audio encoding in {path}: {reason}")]
    UnsupportedEncoding { path: PathBuf, reason: String },
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("cannot compute statistics over an empty collection")]
    EmptyCollection,
    #[error("invalid dsp configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed {kind} file: {reason}")]
    MalformedFile { kind: &'static str, reason: String },
    #[error("band count mismatch: expected {expected}, found {found}")]
    BandMismatch { expected: usize, found: usize },
}

/// Front-end parameters. The defaults reproduce the 62.5 frames/s, 96-band geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub target_sample_rate: u32,
    pub hop_length: usize,
    pub window_length: usize,
    pub num_mel_bands: usize,
    pub max_seconds: f64,
    pub log_floor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            target_sample_rate: 16_000,
            hop_length: 256,
            window_length: 512,
            num_mel_bands: 96,
            max_seconds: 29.0,
            log_floor: 1e-6,
        }
    }
}

/// Frames per second every configuration must produce.
pub const FRAME_RATE: f64 = 62.5;

impl DspConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let fail = |msg: String| Err(DspError::InvalidConfig(msg));
        if self.target_sample_rate == 0 || self.hop_length == 0 || self.num_mel_bands == 0 {
            return fail("sample rate, hop length and band count must be positive".into());
        }
        if self.window_length < 2 || !self.window_length.is_multiple_of(self.hop_length) {
            return fail(format!(
                "hop length {} must divide window length {}",
                self.hop_length, self.window_length
            ));
        }
        if (self.frame_rate() - FRAME_RATE).abs() > 1e-12 {
            return fail(format!(
                "frame rate {} differs from {FRAME_RATE} frames/s",
                self.frame_rate()
            ));
        }
        if !(self.max_seconds > 0.0 && self.max_seconds.is_finite()) {
            return fail("max_seconds must be positive".into());
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail("log_floor must be positive".into());
        }
        Ok(())
    }

    pub fn frame_rate(&self) -> f64 {
        self.target_sample_rate as f64 / self.hop_length as f64
    }

    /// Number of frequency bins of the one-sided spectrum.
    pub fn num_fft_bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    /// Sample cap applied after resampling.
    pub fn max_samples(&self) -> usize {
        (self.max_seconds * self.target_sample_rate as f64).round() as usize
    }

    /// Frame count for an `n`-sample signal under centre padding.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        1 + num_samples / self.hop_length
    }
}

/// Mono audio at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A `frames × bands` matrix stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    frames: usize,
    bands: usize,
    values: Vec<f32>,
}

impl MelSpectrogram {
    pub fn new(frames: usize, bands: usize, values: Vec<f32>) -> Result<Self, DspError> {
        if values.len() != frames * bands {
            return Err(DspError::MalformedFile {
                kind: "spectrogram",
                reason: format!("{} values do not fill {frames}×{bands}", values.len()),
            });
        }
        Ok(Self {
            frames,
            bands,
            values,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn frame(&self, index: usize) -> &[f32] {
        &self.values[index * self.bands..(index + 1) * self.bands]
    }

    pub fn get(&self, frame: usize, band: usize) -> f32 {
        self.values[frame * self.bands + band]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}
