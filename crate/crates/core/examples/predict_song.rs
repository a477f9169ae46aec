//! Checkpoint round trip and segment-averaged inference on a WAV file.
//!
//! A briefly trained model is saved, reloaded and used to score a synthetic song read back
//! from disk. Predictions from the original and the reloaded model are compared bit for bit.
//!
//! ```text
//! cargo run --release --example predict_song
//! ```

use mtl_mood::dataset::{build_vocab, label_song, MetadataSpec, MoodSelection};
use mtl_mood::dsp::{
    apply_normalization, compute_mel_spectrogram, load_audio, normalization_stats, DspConfig,
};
use mtl_mood::model::{
    load_checkpoint, predict_song, save_checkpoint, segment_starts, ModelConfig,
};
use mtl_mood::pipeline::{corpus_spectrograms, init_model};
use mtl_mood::synth::{generate_corpus, write_corpus, SynthConfig};
use mtl_mood::train::{TrainConfig, Trainer};

fn main() -> mtl_mood::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| mtl_mood::Error::Config(e.to_string()))?;
    let corpus = generate_corpus(&SynthConfig {
        num_songs: 12,
        seconds: 10.0,
        ..SynthConfig::default()
    })?;
    write_corpus(&corpus, dir.path())?;
    let dsp = DspConfig::default();
    let specs = corpus_spectrograms(&corpus, &dsp)?;
    let records: Vec<_> = corpus.songs.iter().map(|s| s.record.clone()).collect();
    let vocab = build_vocab(
        &records,
        &MoodSelection::Top(3),
        &MetadataSpec {
            artists: 5,
            year_buckets: 0,
        },
        None,
    )?;
    let stats = normalization_stats(specs.values())?;
    let songs = records
        .iter()
        .map(|r| label_song(r, &specs[&r.song_id], &vocab, &stats))
        .collect::<Result<Vec<_>, _>>()?;

    let config = ModelConfig {
        n_mood: vocab.n_mood(),
        n_metadata: vocab.metadata_size(),
        filters_per_block: 4,
        ..ModelConfig::default()
    };
    let mut trainer = Trainer::new(
        init_model(config, &vocab, 3)?,
        TrainConfig {
            batch_size: 8,
            ..TrainConfig::default()
        },
    )?;
    for _ in 0..20 {
        let batch = trainer.sample(&songs)?;
        trainer.train_step(&batch)?;
    }
    let path = dir.path().join("model.mtlm");
    save_checkpoint(&trainer.model, &path)?;
    let reloaded = load_checkpoint::<f32>(&path)?;

    let wav = dir.path().join("audio/song0000.wav");
    let spec = apply_normalization(
        &compute_mel_spectrogram(&load_audio(&wav, &dsp)?, &dsp)?,
        &stats,
    )?;
    let window = reloaded.config().input_frames;
    println!(
        "{}: {} frames -> {} segments of {window} frames",
        wav.file_name().unwrap_or_default().to_string_lossy(),
        spec.frames(),
        segment_starts(spec.frames(), window).len()
    );
    let before = predict_song(&trainer.model, &spec)?;
    let after = predict_song(&reloaded, &spec)?;
    for (label, p) in vocab.mood_labels.iter().zip(&after) {
        println!("{label:<10} {p:.4}");
    }
    let same = before
        .iter()
        .zip(&after)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!("reloaded predictions bit-identical: {same}");
    Ok(())
}
