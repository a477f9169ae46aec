use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{resample, AudioBuffer, DspConfig, DspError};

/// Extra source samples kept past the time cap so the resampler sees a full filter span.
const CAP_MARGIN: usize = 64;

/// Read a PCM WAV file as mono audio at `config.target_sample_rate`, keeping only the
/// first `config.max_seconds`.
///
/// Integer (8/16/24-bit) and 32-bit float files with one or two channels are accepted.
/// Channels are averaged, and the result is clamped to [-1, 1].
pub fn load_audio(path: &Path, config: &DspConfig) -> Result<AudioBuffer, DspError> {
    config.validate()?;
    let unreadable = |reason: String| DspError::UnreadableFile {
        path: path.to_path_buf(),
        reason,
    };
    let unsupported = |reason: String| DspError::UnsupportedEncoding {
        path: path.to_path_buf(),
        reason,
    };

    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported => unsupported("compressed or unknown WAV subtype".into()),
        hound::Error::IoError(io) => unreadable(io.to_string()),
        other => unreadable(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(unsupported(format!("{} channels", spec.channels)));
    }
    if spec.sample_rate == 0 {
        return Err(unreadable("zero sample rate".into()));
    }
    let channels = spec.channels as usize;
    let cap_frames = (config.max_seconds * spec.sample_rate as f64).ceil() as usize + CAP_MARGIN;

    let interleaved =
        read_interleaved(reader, spec, cap_frames * channels).map_err(|e| match e {
            hound::Error::Unsupported | hound::Error::InvalidSampleFormat => unsupported(format!(
                "{:?} {}-bit",
                spec.sample_format, spec.bits_per_sample
            )),
            other => unreadable(other.to_string()),
        })?;
    if interleaved.is_empty() {
        return Err(DspError::EmptyAudio);
    }

    let mono: Vec<f32> = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();

    let mut samples = if spec.sample_rate == config.target_sample_rate {
        mono
    } else {
        resample(&mono, spec.sample_rate, config.target_sample_rate)
    };
    samples.truncate(config.max_samples());
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    if samples.is_empty() {
        return Err(DspError::EmptyAudio);
    }
    Ok(AudioBuffer::new(samples, config.target_sample_rate))
}

fn read_interleaved<R: std::io::Read>(
    mut reader: WavReader<R>,
    spec: WavSpec,
    limit: usize,
) -> Result<Vec<f32>, hound::Error> {
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.samples::<f32>().take(limit).collect(),
        (SampleFormat::Int, bits @ (8 | 16 | 24)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f32;
            reader
                .samples::<i32>()
                .take(limit)
                .map(|s| s.map(|v| v as f32 * scale))
                .collect()
        }
        _ => Err(hound::Error::Unsupported),
    }
}

/// Write mono 16-bit PCM.
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> std::io::Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => io,
        other => std::io::Error::other(other.to_string()),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_io)?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16;
        writer.write_sample(v).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_spec(path: &Path, spec: WavSpec, frames: usize, value: impl Fn(usize) -> f32) {
        let mut w = WavWriter::create(path, spec).unwrap();
        for i in 0..frames * spec.channels as usize {
            let v = value(i);
            match (spec.sample_format, spec.bits_per_sample) {
                (SampleFormat::Float, _) => w.write_sample(v).unwrap(),
                (SampleFormat::Int, 8) => w.write_sample((v * 127.0) as i8).unwrap(),
                (SampleFormat::Int, 16) => w.write_sample((v * 32767.0) as i16).unwrap(),
                (SampleFormat::Int, _) => w.write_sample((v * 8_388_607.0) as i32).unwrap(),
            }
        }
        w.finalize().unwrap();
    }

    fn spec(channels: u16, rate: u32, bits: u16, fmt: SampleFormat) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: fmt,
        }
    }

    #[test]
    fn stereo_44k_ten_seconds_becomes_mono_16k() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_spec(
            &path,
            spec(2, 44_100, 16, SampleFormat::Int),
            441_000,
            |i| ((i / 2) as f32 * 0.01).sin() * 0.5,
        );
        let audio = load_audio(&path, &DspConfig::default()).unwrap();
        assert_eq!(audio.sample_rate, 16_000);
        assert_eq!(audio.len(), 160_000);
    }

    #[test]
    fn long_file_capped_at_29_seconds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_spec(
            &path,
            spec(1, 16_000, 16, SampleFormat::Int),
            60 * 16_000,
            |_| 0.1,
        );
        let audio = load_audio(&path, &DspConfig::default()).unwrap();
        assert_eq!(audio.len(), 464_000);
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_spec(&path, spec(1, 16_000, 16, SampleFormat::Int), 1000, |_| 0.0);
        let audio = load_audio(&path, &DspConfig::default()).unwrap();
        assert!(audio.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn bit_depths_and_channel_averaging() {
        let dir = tempfile::tempdir().unwrap();
        for (bits, fmt) in [
            (8, SampleFormat::Int),
            (16, SampleFormat::Int),
            (24, SampleFormat::Int),
            (32, SampleFormat::Float),
        ] {
            let path = dir.path().join(format!("b{bits}.wav"));
            // left = +0.5, right = -0.25 → mean 0.125
            write_spec(&path, spec(2, 16_000, bits, fmt), 100, |i| {
                if i % 2 == 0 {
                    0.5
                } else {
                    -0.25
                }
            });
            let audio = load_audio(&path, &DspConfig::default()).unwrap();
            assert_eq!(audio.len(), 100);
            let tol = if bits == 8 { 1e-2 } else { 1e-4 };
            assert!(
                (audio.samples[10] - 0.125).abs() < tol,
                "{bits}: {}",
                audio.samples[10]
            );
        }
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = load_audio(Path::new("/nonexistent/x.wav"), &DspConfig::default()).unwrap_err();
        assert!(matches!(err, DspError::UnreadableFile { .. }));
    }

    #[test]
    fn garbage_file_is_unreadable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        let err = load_audio(&path, &DspConfig::default()).unwrap_err();
        assert!(matches!(err, DspError::UnreadableFile { .. }));
    }

    #[test]
    fn compressed_subtype_is_unsupported() {
        // Minimal RIFF/WAVE with a mu-law (format tag 7) fmt chunk.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 4).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&7u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ulaw.wav");
        std::fs::write(&path, bytes).unwrap();
        let err = load_audio(&path, &DspConfig::default()).unwrap_err();
        assert!(matches!(err, DspError::UnsupportedEncoding { .. }), "{err}");
    }

    #[test]
    fn empty_data_chunk_is_empty_audio() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.wav");
        write_spec(&path, spec(1, 16_000, 16, SampleFormat::Int), 0, |_| 0.0);
        let err = load_audio(&path, &DspConfig::default()).unwrap_err();
        assert!(matches!(err, DspError::EmptyAudio));
    }
}
