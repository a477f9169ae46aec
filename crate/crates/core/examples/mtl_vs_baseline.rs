//! Baseline versus multi-task training on a synthetic corpus, over several seeds.
//!
//! Every seed draws a fresh corpus and split, then trains two models that differ only in the
//! metadata head: a mood-only baseline and a model with an extra artist head weighted by
//! `alpha = n_mood / n_artists`. Both are scored on the same test songs.
//!
//! ```text
//! cargo run --release --example mtl_vs_baseline -- --seeds 1,2,3 --filters 8
//! ```

use std::time::Instant;

use clap::Parser;
use mtl_mood::dataset::{split_songs, MetadataSpec, MoodSelection};
use mtl_mood::dsp::DspConfig;
use mtl_mood::model::ModelConfig;
use mtl_mood::pipeline::{corpus_spectrograms, model_config_for, prepare, train_and_evaluate};
use mtl_mood::synth::{generate_corpus, oracle_accuracy, SynthConfig};
use mtl_mood::train::TrainConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    songs: usize,
    #[arg(long, default_value_t = 3)]
    moods: usize,
    #[arg(long, default_value_t = 10)]
    artists: usize,
    #[arg(long, default_value_t = 0.7)]
    correlation: f64,
    #[arg(long, default_value_t = 8.0)]
    seconds: f64,
    /// RMS of the mood band noise relative to the artist tone.
    #[arg(long, default_value_t = 0.35)]
    mood_gain: f64,
    #[arg(long, default_value_t = 0.5)]
    noise_gain: f64,
    /// Filters per convolution block (128 at full scale).
    #[arg(long, default_value_t = 8)]
    filters: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Batches per epoch; defaults to 1.25 times the training songs.
    #[arg(long)]
    batches_per_epoch: Option<usize>,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    /// Print every epoch record.
    #[arg(long)]
    verbose: bool,
}

fn main() -> mtl_mood::Result<()> {
    let args = Args::parse();
    let dsp = DspConfig::default();
    let mut deltas = Vec::new();
    for &seed in &args.seeds {
        let corpus = generate_corpus(&SynthConfig {
            num_songs: args.songs,
            n_moods: args.moods,
            n_artists: args.artists,
            seed,
            seconds: args.seconds,
            artist_mood_correlation: args.correlation,
            mood_gain: args.mood_gain,
            noise_gain: args.noise_gain,
            ..SynthConfig::default()
        })?;
        println!(
            "seed {seed} band oracle accuracy {:.3}",
            oracle_accuracy(&corpus)
        );
        let records: Vec<_> = corpus.songs.iter().map(|s| s.record.clone()).collect();
        let specs = corpus_spectrograms(&corpus, &dsp)?;
        let split = split_songs(&records, seed)?;
        let base = ModelConfig {
            filters_per_block: args.filters,
            ..ModelConfig::default()
        };
        let train = TrainConfig {
            max_epochs: args.epochs,
            patience: args.patience,
            batch_size: args.batch_size,
            batches_per_epoch: args.batches_per_epoch,
            seed,
            ..TrainConfig::default()
        };
        let moods = MoodSelection::Top(args.moods);
        let mut scores = Vec::new();
        for metadata in [
            MetadataSpec::none(),
            MetadataSpec {
                artists: args.artists,
                year_buckets: 0,
            },
        ] {
            let data = prepare(&records, &specs, &split, &moods, &metadata, None)?;
            let config = model_config_for(&data.vocab, &base, None);
            let started = Instant::now();
            let run = train_and_evaluate(&data, config, &train, |e| {
                if args.verbose {
                    println!(
                        "  epoch {:>2}  train {:.4}  val mood loss {:.4}  val AP {:?}  [{:.1} s]",
                        e.epoch, e.train_loss, e.val_mood_loss, e.val_macro_ap, e.wall_seconds
                    );
                }
            })?;
            println!(
                "seed {seed} {:<10} alpha {:.2}  epochs {:>2} (best {:>2})  test AUC-ROC {:6.2}  AUC-PR {:6.2}  [{:.0} s]",
                if metadata.is_empty() { "baseline" } else { "multi-task" },
                run.history.header.alpha,
                run.history.epochs.len(),
                run.history.best_epoch,
                run.test.auc_roc_pct,
                run.test.auc_pr_pct,
                started.elapsed().as_secs_f64(),
            );
            scores.push(run.test.macro_ap);
        }
        deltas.push(scores[1] - scores[0]);
    }
    let mut sorted = deltas.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    println!("macro AP deltas (multi-task - baseline): {deltas:.4?}");
    println!("median delta {median:+.4}");
    Ok(())
}
