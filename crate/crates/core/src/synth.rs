//! Synthetic corpus for desk-scale experiments.
//!
//! Every song mixes three sources:
//!
//! - a mood signal: band-limited noise centred on a mood-specific frequency, amplitude
//!   modulated at a mood-specific rate;
//! - an artist signal: a harmonic tone whose fundamental and harmonic weights form a template
//!   shared by all of that artist's songs;
//! - broadband background noise.
//!
//! Each artist has a preferred mood. A song's primary mood is the artist's preference with
//! probability `artist_mood_correlation` and a uniformly drawn other mood otherwise, so
//! artist labels carry information about mood.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_manifest, SongRecord};
use crate::dsp::{write_wav, AudioBuffer};
use crate::error::{Error, Result};

const MOOD_NAMES: [&str; 8] = [
    "happy",
    "sad",
    "energetic",
    "calm",
    "dark",
    "romantic",
    "epic",
    "dreamy",
];

/// Lowest and highest mood centre frequencies (Hz).
const MOOD_FREQ_RANGE: (f64, f64) = (350.0, 4000.0);
/// Half-width of a mood band relative to its centre.
const MOOD_BANDWIDTH: f64 = 0.15;
const ARTIST_F0_RANGE: (f64, f64) = (90.0, 330.0);
const HARMONICS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_songs: usize,
    pub n_moods: usize,
    pub n_artists: usize,
    pub seed: u64,
    pub seconds: f64,
    pub sample_rate: u32,
    /// Probability that a song's primary mood is its artist's preferred mood.
    pub artist_mood_correlation: f64,
    /// RMS of the mood signal relative to the artist tone.
    pub mood_gain: f64,
    /// RMS of the background noise relative to the artist tone.
    pub noise_gain: f64,
    /// Probability of a second, weaker mood.
    pub second_mood_prob: f64,
    /// Songs get release years drawn uniformly from this inclusive range.
    pub years: (i32, i32),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_songs: 200,
            n_moods: 3,
            n_artists: 10,
            seed: 7,
            seconds: 8.0,
            sample_rate: 16_000,
            artist_mood_correlation: 0.7,
            mood_gain: 0.35,
            noise_gain: 0.5,
            second_mood_prob: 0.15,
            years: (1988, 2021),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_moods < 2 || self.n_artists < 2 {
            return bad("need at least 2 moods and 2 artists".into());
        }
        if self.n_moods > MOOD_NAMES.len() {
            return bad(format!("at most {} moods are supported", MOOD_NAMES.len()));
        }
        if self.num_songs == 0 {
            return bad("num_songs must be positive".into());
        }
        if !(self.seconds > 0.0) || self.sample_rate < 2 * MOOD_FREQ_RANGE.1 as u32 + 2000 {
            return bad("seconds must be positive and the sample rate high enough".into());
        }
        if !(0.0..=1.0).contains(&self.artist_mood_correlation)
            || !(0.0..=1.0).contains(&self.second_mood_prob)
        {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(self.mood_gain >= 0.0) || !(self.noise_gain >= 0.0) || self.years.0 > self.years.1 {
            return bad("gains must be non-negative and the year range ordered".into());
        }
        Ok(())
    }

    pub fn mood_names(&self) -> Vec<String> {
        MOOD_NAMES[..self.n_moods]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Centre frequency of mood `m`, log-spaced over the mood range.
    pub fn mood_center(&self, m: usize) -> f64 {
        let (lo, hi) = MOOD_FREQ_RANGE;
        lo * (hi / lo).powf(m as f64 / (self.n_moods - 1) as f64)
    }

    /// Amplitude-modulation rate of mood `m` in Hz.
    pub fn mood_am_rate(&self, m: usize) -> f64 {
        1.5 + 2.0 * m as f64
    }
}

/// Timbre template of one artist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtistTemplate {
    pub name: String,
    pub f0: f64,
    pub harmonic_weights: Vec<f64>,
    pub preferred_mood: usize,
}

#[derive(Debug, Clone)]
pub struct SynthSong {
    pub record: SongRecord,
    pub audio: AudioBuffer,
    pub artist: usize,
    /// Index of the dominant mood, the one the band-energy oracle should recover.
    pub primary_mood: usize,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub artists: Vec<ArtistTemplate>,
    pub songs: Vec<SynthSong>,
}

fn band_noise<R: Rng + ?Sized>(
    planner: &mut FftPlanner<f64>,
    len: usize,
    sample_rate: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 * sample_rate / len as f64;
        if f < lo || f > hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    unit_rms(out)
}

fn unit_rms(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms > 0.0 {
        for v in &mut x {
            *v /= rms;
        }
    }
    x
}

fn make_artists<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Vec<ArtistTemplate> {
    let (lo, hi) = ARTIST_F0_RANGE;
    (0..cfg.n_artists)
        .map(|a| {
            let spread = a as f64 / (cfg.n_artists - 1) as f64;
            ArtistTemplate {
                name: format!("artist{a:02}"),
                f0: lo * (hi / lo).powf(spread),
                harmonic_weights: (0..HARMONICS)
                    .map(|h| rng.random_range(0.2..1.0) / (h + 1) as f64)
                    .collect(),
                preferred_mood: a % cfg.n_moods,
            }
        })
        .collect()
}

/// Generate the corpus in memory. The RNG is consumed artists first, then song by song.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let artists = make_artists(cfg, &mut rng);
    let names = cfg.mood_names();
    let sr = cfg.sample_rate as f64;
    let len = (cfg.seconds * sr).round() as usize;
    let mut planner = FftPlanner::new();
    let mut songs = Vec::with_capacity(cfg.num_songs);
    for i in 0..cfg.num_songs {
        let artist = rng.random_range(0..cfg.n_artists);
        let tmpl = &artists[artist];
        let primary = if rng.random::<f64>() < cfg.artist_mood_correlation {
            tmpl.preferred_mood
        } else {
            let other = rng.random_range(0..cfg.n_moods - 1);
            if other >= tmpl.preferred_mood {
                other + 1
            } else {
                other
            }
        };
        let second = (rng.random::<f64>() < cfg.second_mood_prob).then(|| {
            let other = rng.random_range(0..cfg.n_moods - 1);
            if other >= primary {
                other + 1
            } else {
                other
            }
        });
        let year = rng.random_range(cfg.years.0..=cfg.years.1);

        let mut mix = vec![0f64; len];
        let mut add_mood = |m: usize, gain: f64, rng: &mut ChaCha8Rng| {
            let c = cfg.mood_center(m) * rng.random_range(0.97..1.03);
            let noise = band_noise(
                &mut planner,
                len,
                sr,
                c * (1.0 - MOOD_BANDWIDTH),
                c * (1.0 + MOOD_BANDWIDTH),
                rng,
            );
            let rate = cfg.mood_am_rate(m);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            for (t, (out, n)) in mix.iter_mut().zip(noise).enumerate() {
                let am = 1.0 + 0.8 * (std::f64::consts::TAU * rate * t as f64 / sr + phase).sin();
                // E[am²] = 1.32, keep the requested RMS.
                *out += gain * n * am / 1.32f64.sqrt();
            }
        };
        add_mood(primary, cfg.mood_gain, &mut rng);
        if let Some(m) = second {
            add_mood(m, 0.6 * cfg.mood_gain, &mut rng);
        }

        let f0 = tmpl.f0 * rng.random_range(0.98..1.02);
        let mut tone = vec![0f64; len];
        for (h, w) in tmpl.harmonic_weights.iter().enumerate() {
            let f = f0 * (h + 1) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            for (t, v) in tone.iter_mut().enumerate() {
                *v += w * (std::f64::consts::TAU * f * t as f64 / sr + phase).sin();
            }
        }
        for (out, v) in mix.iter_mut().zip(unit_rms(tone)) {
            *out += v;
        }
        let background = band_noise(&mut planner, len, sr, 30.0, sr / 2.0, &mut rng);
        for (out, n) in mix.iter_mut().zip(background) {
            *out += cfg.noise_gain * n;
        }

        let peak = mix.iter().fold(0f64, |a, v| a.max(v.abs()));
        let scale = if peak > 0.0 { 0.9 / peak } else { 1.0 };
        let samples = mix.iter().map(|v| (v * scale) as f32).collect();

        let mut moods = vec![names[primary].clone()];
        moods.extend(second.map(|m| names[m].clone()));
        let song_id = format!("song{i:04}");
        songs.push(SynthSong {
            record: SongRecord {
                audio_path: Some(PathBuf::from(format!("audio/{song_id}.wav"))),
                song_id,
                spectrogram_path: None,
                moods,
                artists: vec![tmpl.name.clone()],
                year: Some(year),
            },
            audio: AudioBuffer {
                samples,
                sample_rate: cfg.sample_rate,
            },
            artist,
            primary_mood: primary,
        });
    }
    Ok(SynthCorpus {
        config: cfg.clone(),
        artists,
        songs,
    })
}

/// Write `audio/<song_id>.wav` for every song plus `manifest.jsonl` under `out_dir`.
/// Returns the manifest path.
pub fn write_corpus(corpus: &SynthCorpus, out_dir: &Path) -> Result<PathBuf> {
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    for song in &corpus.songs {
        let rel = song
            .record
            .audio_path
            .as_ref()
            .expect("synthetic songs carry audio paths");
        let path = out_dir.join(rel);
        write_wav(&path, &song.audio).map_err(|e| Error::io(&path, e))?;
    }
    let records: Vec<SongRecord> = corpus.songs.iter().map(|s| s.record.clone()).collect();
    let manifest = out_dir.join("manifest.jsonl");
    write_manifest(&records, &manifest)?;
    Ok(manifest)
}

/// The generator's own decision rule: the mood whose band has the highest median power.
///
/// Harmonic lines of the artist tone occupy only a few bins of a band, so the median picks
/// out the broadband mood noise.
pub fn mood_band_oracle(audio: &AudioBuffer, cfg: &SynthConfig) -> usize {
    let len = audio.samples.len();
    let mut buf: Vec<Complex<f64>> = audio
        .samples
        .iter()
        .map(|&s| Complex::new(s as f64, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let sr = audio.sample_rate as f64;
    let band_median = |m: usize| {
        let c = cfg.mood_center(m);
        let (lo, hi) = (
            c * (1.0 - MOOD_BANDWIDTH / 2.0),
            c * (1.0 + MOOD_BANDWIDTH / 2.0),
        );
        let k0 = (lo * len as f64 / sr).ceil() as usize;
        let k1 = (hi * len as f64 / sr).floor() as usize;
        let mut p: Vec<f64> = buf[k0..=k1].iter().map(|c| c.norm_sqr()).collect();
        p.sort_by(f64::total_cmp);
        p[p.len() / 2]
    };
    (0..cfg.n_moods)
        .map(band_median)
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| m)
        .expect("at least two moods")
}

/// Fraction of songs whose primary mood the band oracle recovers.
pub fn oracle_accuracy(corpus: &SynthCorpus) -> f64 {
    let hits = corpus
        .songs
        .iter()
        .filter(|s| mood_band_oracle(&s.audio, &corpus.config) == s.primary_mood)
        .count();
    hits as f64 / corpus.songs.len() as f64
}
