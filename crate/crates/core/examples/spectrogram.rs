//! Log-mel front end: frame geometry, tone localization and the silence floor.
//!
//! ```text
//! cargo run --release --example spectrogram
//! ```

use mtl_mood::dsp::{compute_mel_spectrogram, mel_band_centers, AudioBuffer, DspConfig};

fn main() -> Result<(), mtl_mood::dsp::DspError> {
    let cfg = DspConfig::default();
    println!(
        "{} Hz, hop {} ({} frames/s), window {}, {} mel bands, first {} s",
        cfg.target_sample_rate,
        cfg.hop_length,
        cfg.frame_rate(),
        cfg.window_length,
        cfg.num_mel_bands,
        cfg.max_seconds
    );

    let sr = cfg.target_sample_rate as f64;
    let n = cfg.max_samples();
    let tone: Vec<f32> = (0..n)
        .map(|i| (0.5 * (std::f64::consts::TAU * 1000.0 * i as f64 / sr).sin()) as f32)
        .collect();
    let spec = compute_mel_spectrogram(&AudioBuffer::new(tone, cfg.target_sample_rate), &cfg)?;
    println!(
        "29 s of audio ({n} samples) -> {} x {} spectrogram",
        spec.frames(),
        spec.bands()
    );

    let mid = spec.frame(spec.frames() / 2);
    let peak = (0..mid.len())
        .max_by(|&a, &b| mid[a].total_cmp(&mid[b]))
        .unwrap_or(0);
    let centers = mel_band_centers(&cfg);
    println!(
        "1 kHz tone peaks in band {peak} (centre {:.0} Hz, log power {:.2})",
        centers[peak], mid[peak]
    );

    let silence = compute_mel_spectrogram(
        &AudioBuffer::new(vec![0.0; 16_000], cfg.target_sample_rate),
        &cfg,
    )?;
    println!(
        "1 s of silence -> {} frames, every value {:.4} (ln {:e} = {:.4})",
        silence.frames(),
        silence.values()[0],
        cfg.log_floor,
        cfg.log_floor.ln()
    );
    Ok(())
}
