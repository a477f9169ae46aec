//! Sanity check of the whole training path: a small network memorizes an 8-song, 2-mood
//! synthetic corpus with dropout active.
//!
//! ```text
//! cargo run --release --example overfit
//! ```

use mtl_mood::dataset::{build_vocab, label_song, MetadataSpec, MoodSelection};
use mtl_mood::dsp::{normalization_stats, DspConfig};
use mtl_mood::metrics::evaluate;
use mtl_mood::model::ModelConfig;
use mtl_mood::pipeline::{corpus_spectrograms, init_model};
use mtl_mood::synth::{generate_corpus, SynthConfig};
use mtl_mood::train::{TrainConfig, Trainer};

fn main() -> mtl_mood::Result<()> {
    let corpus = generate_corpus(&SynthConfig {
        num_songs: 8,
        n_moods: 2,
        n_artists: 2,
        seconds: 4.0,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let specs = corpus_spectrograms(&corpus, &DspConfig::default())?;
    let records: Vec<_> = corpus.songs.iter().map(|s| s.record.clone()).collect();
    let vocab = build_vocab(
        &records,
        &MoodSelection::Top(2),
        &MetadataSpec::none(),
        None,
    )?;
    let stats = normalization_stats(specs.values())?;
    let songs = records
        .iter()
        .map(|r| label_song(r, &specs[&r.song_id], &vocab, &stats))
        .collect::<Result<Vec<_>, _>>()?;

    let config = ModelConfig {
        n_mood: 2,
        filters_per_block: 8,
        ..ModelConfig::default()
    };
    println!(
        "dropout rate {}, {} songs, moods {:?}",
        config.dropout_rate,
        songs.len(),
        vocab.mood_labels
    );
    let model = init_model(config, &vocab, 1)?;
    let mut trainer = Trainer::new(
        model,
        TrainConfig {
            seed: 1,
            ..TrainConfig::default()
        },
    )?;
    for step in 1..=200 {
        let batch = trainer.sample(&songs)?;
        let loss = trainer.train_step(&batch)?;
        if step % 25 == 0 {
            println!("step {step:>3}  mood loss {:.4}", loss.mood);
        }
    }
    let report = evaluate(&trainer.model, &songs)?;
    println!(
        "train-split macro AP {:.4}, ROC-AUC {:.4}",
        report.macro_ap, report.macro_roc_auc
    );
    Ok(())
}
