use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioBuffer, DspConfig, DspError, MelSpectrogram};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// The `num_mel_bands + 2` filter edge frequencies in Hz, evenly spaced in mel from 0 Hz to
/// Nyquist.
fn mel_edges(config: &DspConfig) -> Vec<f64> {
    let top = hz_to_mel(config.target_sample_rate as f64 / 2.0);
    let n = config.num_mel_bands + 2;
    (0..n)
        .map(|i| mel_to_hz(top * i as f64 / (n - 1) as f64))
        .collect()
}

/// Peak frequency (Hz) of each triangular filter.
pub fn mel_band_centers(config: &DspConfig) -> Vec<f64> {
    let edges = mel_edges(config);
    edges[1..edges.len() - 1].to_vec()
}

/// Triangular mel filters, one row per band, over the `window_length/2 + 1` FFT bins.
///
/// Filters peak at 1.0 at their centre frequency and fall linearly to zero at the
/// neighbouring centres. The matrix is returned row-major.
pub fn mel_filterbank(config: &DspConfig) -> Vec<Vec<f64>> {
    let edges = mel_edges(config);
    let bins = config.num_fft_bins();
    let bin_hz = config.target_sample_rate as f64 / config.window_length as f64;
    (0..config.num_mel_bands)
        .map(|band| {
            let (lo, mid, hi) = (edges[band], edges[band + 1], edges[band + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let rising = (f - lo) / (mid - lo);
                    let falling = (hi - f) / (hi - mid);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Periodic Hann window.
fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Index into `samples` after reflecting `i` (which may fall outside) about both ends,
/// without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Log-compressed mel power spectrogram.
///
/// The signal is reflection-padded by half a window on each side, so frame `i` is centred on
/// sample `i·hop` and an `N`-sample input yields `1 + N/hop` frames. Each frame is Hann
/// windowed, its power spectrum projected through [`mel_filterbank`], and compressed as
/// `ln(log_floor + power)`.
pub fn compute_mel_spectrogram(
    audio: &AudioBuffer,
    config: &DspConfig,
) -> Result<MelSpectrogram, DspError> {
    let (frames, power) = mel_power(audio, config)?;
    let values = power
        .into_iter()
        .map(|p| (config.log_floor + p).ln() as f32)
        .collect();
    MelSpectrogram::new(frames, config.num_mel_bands, values)
}

/// Mel-projected power before log compression, frame-major.
pub(crate) fn mel_power(
    audio: &AudioBuffer,
    config: &DspConfig,
) -> Result<(usize, Vec<f64>), DspError> {
    config.validate()?;
    if audio.is_empty() {
        return Err(DspError::EmptyAudio);
    }
    if audio.sample_rate != config.target_sample_rate {
        return Err(DspError::InvalidConfig(format!(
            "audio at {} Hz, expected {} Hz",
            audio.sample_rate, config.target_sample_rate
        )));
    }

    let n = audio.len();
    let win_len = config.window_length;
    let pad = (win_len / 2) as isize;
    let frames = config.num_frames(n);
    let bands = config.num_mel_bands;
    let window = hann(win_len);
    let filters = mel_filterbank(config);
    // Sparse view of each filter: (first bin, weights).
    let sparse: Vec<(usize, Vec<f64>)> = filters
        .iter()
        .map(|row| {
            let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            (first, row[first..=last].to_vec())
        })
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(win_len);
    let mut buf = vec![Complex::new(0.0, 0.0); win_len];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0f64; config.num_fft_bins()];
    let mut values = Vec::with_capacity(frames * bands);

    for frame in 0..frames {
        let start = (frame * config.hop_length) as isize - pad;
        for (k, slot) in buf.iter_mut().enumerate() {
            let idx = reflect(start + k as isize, n);
            *slot = Complex::new(audio.samples[idx] as f64 * window[k], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (first, weights) in &sparse {
            let energy: f64 = weights
                .iter()
                .zip(&power[*first..])
                .map(|(w, p)| w * p)
                .sum();
            values.push(energy);
        }
    }
    Ok((frames, values))
}
