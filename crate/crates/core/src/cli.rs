//! Commands behind the `mtl-mood` binary.
//!
//! A typical session:
//!
//! ```text
//! mtl-mood synth      --out corpus
//! mtl-mood split      --manifest corpus/manifest.jsonl --out corpus/splits.json
//! mtl-mood preprocess --manifest corpus/manifest.jsonl --splits corpus/splits.json --out specs
//! mtl-mood train      --manifest specs/manifest.jsonl --splits corpus/splits.json --out base --baseline
//! mtl-mood train      --manifest specs/manifest.jsonl --splits corpus/splits.json --out mtl --metadata artists:10
//! mtl-mood evaluate   --checkpoint base/model.mtlm
//! mtl-mood evaluate   --checkpoint mtl/model.mtlm
//! mtl-mood report     --baseline base/eval_test.json mtl/eval_test.json
//! ```
//!
//! Every command writes its fully resolved settings, including the seed, next to its outputs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    filter_labeled, load_manifest, load_songs, read_split, split_songs, write_manifest,
    write_split, LabelVocabulary, MetadataSpec, MoodSelection, SongRecord, Split,
};
use crate::dsp::{
    compute_mel_spectrogram, load_audio, normalization_stats, read_spectrogram, read_stats,
    write_spectrogram, write_stats, DspConfig, MelSpectrogram,
};
use crate::metrics::{evaluate, MetricsReport};
use crate::model::{
    load_checkpoint_checked, predict_song, save_checkpoint, AlphaSetting, ModelConfig,
};
use crate::pipeline::{init_model, model_config_for, prepare, song_set_hash};
use crate::synth::{generate_corpus, write_corpus, SynthConfig};
use crate::train::{TrainConfig, Trainer};
use crate::{Error, Result};

const CHECKPOINT_FILE: &str = "model.mtlm";
const RUN_FILE: &str = "run.json";
const STATS_FILE: &str = "stats.msta";

#[derive(Debug, Parser)]
#[command(
    name = "mtl-mood",
    version,
    about = "Multi-task music mood classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of WAV files and a manifest.
    Synth(SynthArgs),
    /// Assign songs to train/val/test (80/10/10).
    Split(SplitArgs),
    /// Compute log-mel spectrograms and normalization statistics.
    Preprocess(PreprocessArgs),
    /// Train a baseline or multi-task model.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Print mood probabilities for audio files.
    Predict(PredictArgs),
    /// Compare evaluation results against a baseline run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with synthesizer settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub num_songs: Option<usize>,
    #[arg(long)]
    pub n_moods: Option<usize>,
    #[arg(long)]
    pub n_artists: Option<usize>,
    /// Probability that a song carries its artist's preferred mood.
    #[arg(long)]
    pub correlation: Option<f64>,
    #[arg(long)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output split file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for spectrograms, statistics and the rewritten manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Split file; statistics then come from the training songs only.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// JSON file with front-end settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest whose records carry spectrogram paths.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub splits: PathBuf,
    /// Normalization statistics; computed from the training songs when absent.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Output directory for the checkpoint, history and run record.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with `model` and `train` sections overriding the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `top:K` or a comma-separated list of mood labels.
    #[arg(long, default_value = "top:3")]
    pub moods: MoodSelection,
    /// Metadata head composition, e.g. `artists:50` or `artists:50,years:9`.
    #[arg(long)]
    pub metadata: Option<MetadataSpec>,
    /// Metadata loss weight: `auto` (n_mood / n_metadata) or a number.
    #[arg(long)]
    pub alpha: Option<AlphaSetting>,
    /// Train without a metadata head.
    #[arg(long, conflicts_with_all = ["alpha", "metadata"])]
    pub baseline: bool,
    /// Dataset name for reports; defaults to the manifest's directory name.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`; its run record is read from the same directory.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Override the manifest recorded at training time.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Override the split file recorded at training time.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Report path; defaults to `eval_<split>.json` next to the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON file with front-end settings (must match preprocessing).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(required = true)]
    pub audio: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation result of the baseline run.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Evaluation results to compare against the baseline.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some inputs failed; the rest were processed.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
        }
    }
}

/// Exit code for a command that failed.
pub const FATAL_EXIT: u8 = 2;

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Outcome> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Split(a) => cmd_split(&a, out),
        Command::Preprocess(a) => cmd_preprocess(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out).map(|_| Outcome::Success),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Report(a) => cmd_report(&a, out).map(|_| Outcome::Success),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // Reporting is best effort; a closed pipe must not turn success into failure.
    let _ = writeln!(out, "{line}");
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mut cfg: SynthConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.num_songs = args.num_songs.unwrap_or(cfg.num_songs);
    cfg.n_moods = args.n_moods.unwrap_or(cfg.n_moods);
    cfg.n_artists = args.n_artists.unwrap_or(cfg.n_artists);
    cfg.artist_mood_correlation = args.correlation.unwrap_or(cfg.artist_mood_correlation);
    cfg.seconds = args.seconds.unwrap_or(cfg.seconds);
    let corpus = generate_corpus(&cfg)?;
    let manifest = write_corpus(&corpus, &args.out)?;
    write_json(&args.out.join("synth.json"), &cfg)?;
    say(
        out,
        format_args!(
            "wrote {} songs ({} moods, {} artists, seed {}) to {}",
            cfg.num_songs,
            cfg.n_moods,
            cfg.n_artists,
            cfg.seed,
            manifest.display()
        ),
    );
    Ok(Outcome::Success)
}

pub fn cmd_split(args: &SplitArgs, out: &mut dyn Write) -> Result<Outcome> {
    let records = load_manifest(&args.manifest)?;
    let split = split_songs(&records, args.seed)?;
    write_split(&split, &args.out)?;
    say(
        out,
        format_args!(
            "train {}, val {}, test {} (seed {})",
            split.count(Split::Train),
            split.count(Split::Val),
            split.count(Split::Test),
            split.seed
        ),
    );
    Ok(Outcome::Success)
}

/// Settings and results of a preprocessing run (`preprocess.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    pub dsp: DspConfig,
    pub manifest: PathBuf,
    pub splits: Option<PathBuf>,
    /// `"train split"` or `"all songs"`.
    pub stats_source: String,
    pub ok: usize,
    pub failed: Vec<(String, String)>,
}

pub fn cmd_preprocess(args: &PreprocessArgs, out: &mut dyn Write) -> Result<Outcome> {
    let dsp: DspConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => DspConfig::default(),
    };
    dsp.validate()?;
    let records = load_manifest(&args.manifest)?;
    let split = args.splits.as_deref().map(read_split).transpose()?;
    let spec_dir = args.out.join("spectrograms");
    create_dir(&spec_dir)?;

    let mut done: Vec<(SongRecord, MelSpectrogram)> = Vec::new();
    let mut failed = Vec::new();
    for record in &records {
        let result = record
            .audio_path
            .as_ref()
            .ok_or_else(|| "manifest has no audio_path".to_string())
            .and_then(|p| load_audio(p, &dsp).map_err(|e| e.to_string()))
            .and_then(|a| compute_mel_spectrogram(&a, &dsp).map_err(|e| e.to_string()));
        match result {
            Ok(spec) => {
                let rel = PathBuf::from("spectrograms").join(format!("{}.mspc", record.song_id));
                write_spectrogram(&args.out.join(&rel), &spec)?;
                let mut r = record.clone();
                r.spectrogram_path = Some(rel);
                done.push((r, spec));
            }
            Err(reason) => {
                eprintln!("{}: {reason}", record.song_id);
                failed.push((record.song_id.clone(), reason));
            }
        }
    }
    if done.is_empty() {
        return Err(Error::Config("no song could be preprocessed".into()));
    }

    let stats_specs: Vec<&MelSpectrogram> = match &split {
        Some(s) => done
            .iter()
            .filter(|(r, _)| s.songs.get(&r.song_id) == Some(&Split::Train))
            .map(|(_, spec)| spec)
            .collect(),
        None => {
            eprintln!("warning: no split given, normalization statistics use every song");
            done.iter().map(|(_, spec)| spec).collect()
        }
    };
    let stats = normalization_stats(stats_specs)?;
    write_stats(&args.out.join(STATS_FILE), &stats)?;
    let rewritten: Vec<SongRecord> = done.into_iter().map(|(r, _)| r).collect();
    write_manifest(&rewritten, &args.out.join("manifest.jsonl"))?;
    write_json(
        &args.out.join("preprocess.json"),
        &PreprocessRecord {
            dsp,
            manifest: args.manifest.clone(),
            splits: args.splits.clone(),
            stats_source: if split.is_some() {
                "train split"
            } else {
                "all songs"
            }
            .into(),
            ok: rewritten.len(),
            failed: failed.clone(),
        },
    )?;
    say(
        out,
        format_args!("{} ok, {} failed", rewritten.len(), failed.len()),
    );
    Ok(if failed.is_empty() {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}

/// Optional `model` and `train` sections of a training config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFileConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Everything needed to reproduce or score a training run (`run.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub baseline: bool,
    pub seed: u64,
    pub moods: String,
    pub metadata: String,
    pub alpha: f64,
    pub manifest: PathBuf,
    pub splits: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub vocab: LabelVocabulary,
    pub train_songs: usize,
    pub val_songs: usize,
    pub test_songs: usize,
    /// Songs left out because they carry no vocabulary mood.
    pub dropped_songs: Vec<String>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl RunRecord {
    /// Row label in comparison tables.
    pub fn config_name(&self) -> String {
        if self.baseline {
            "Baseline".into()
        } else {
            format!("Multi-task ({})", self.metadata)
        }
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<Outcome> {
    let file_cfg: TrainFileConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => TrainFileConfig::default(),
    };
    let mut train_cfg = file_cfg.train;
    train_cfg.seed = args.seed.unwrap_or(train_cfg.seed);
    train_cfg.validate()?;
    let metadata = if args.baseline {
        MetadataSpec::none()
    } else {
        args.metadata.unwrap_or(MetadataSpec {
            artists: 50,
            year_buckets: 0,
        })
    };
    if metadata.is_empty() && !args.baseline {
        return Err(Error::Config(
            "an empty metadata head is the baseline; pass --baseline instead".into(),
        ));
    }

    let records = load_manifest(&args.manifest)?;
    let split = read_split(&args.splits)?;
    let mut specs = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| split.songs.contains_key(&r.song_id))
    {
        let path = r.spectrogram_path.as_ref().ok_or_else(|| {
            Error::Config(format!("song `{}` has no spectrogram_path", r.song_id))
        })?;
        specs.insert(r.song_id.clone(), read_spectrogram(path)?);
    }
    let stats = args.stats.as_deref().map(read_stats).transpose()?;
    let data = prepare(&records, &specs, &split, &args.moods, &metadata, stats)?;
    let config = model_config_for(&data.vocab, &file_cfg.model, args.alpha);
    config.validate()?;

    create_dir(&args.out)?;
    write_stats(&args.out.join(STATS_FILE), &data.stats)?;
    let mut model = init_model(config, &data.vocab, train_cfg.seed)?;
    model.annotations.stats_file = Some(STATS_FILE.into());
    say(
        out,
        format_args!(
            "train {} / val {} / test {} songs, n_mood {}, n_metadata {}, alpha {}",
            data.train.len(),
            data.val.len(),
            data.test.len(),
            model.config().n_mood,
            model.config().n_metadata,
            model.alpha()
        ),
    );
    let mut trainer = Trainer::new(model, train_cfg.clone())?;
    let history = trainer.fit(&data.train, &data.val, |e| {
        let meta = e
            .train_metadata_loss
            .map(|m| format!("  meta {m:.4}"))
            .unwrap_or_default();
        say(
            out,
            format_args!(
                "epoch {:>3}  loss {:.4}  mood {:.4}{meta}  val mood {:.4}  val AP {}",
                e.epoch,
                e.train_loss,
                e.train_mood_loss,
                e.val_mood_loss,
                e.val_macro_ap.map_or("n/a".into(), |v| format!("{v:.4}")),
            ),
        );
    })?;
    save_checkpoint(&trainer.model, &args.out.join(CHECKPOINT_FILE))?;
    history.write_jsonl(&args.out.join("history.jsonl"))?;
    let dataset = args.dataset.clone().unwrap_or_else(|| {
        absolute(&args.manifest)
            .parent()
            .and_then(|p| p.file_name())
            .map_or("dataset".into(), |n| n.to_string_lossy().into_owned())
    });
    let record = RunRecord {
        dataset,
        baseline: args.baseline,
        seed: train_cfg.seed,
        moods: args.moods.to_string(),
        metadata: metadata.to_string(),
        alpha: trainer.model.alpha(),
        manifest: absolute(&args.manifest),
        splits: absolute(&args.splits),
        model: trainer.model.config().clone(),
        train: train_cfg,
        vocab: data.vocab.clone(),
        train_songs: data.train.len(),
        val_songs: data.val.len(),
        test_songs: data.test.len(),
        dropped_songs: data.dropped.clone(),
        best_epoch: history.best_epoch,
        stopped_early: history.stopped_early,
    };
    write_json(&args.out.join(RUN_FILE), &record)?;
    say(
        out,
        format_args!(
            "best epoch {} of {}; wrote {}",
            history.best_epoch,
            history.epochs.len(),
            args.out.join(CHECKPOINT_FILE).display()
        ),
    );
    Ok(Outcome::Success)
}

/// Result file of `evaluate`, the input of `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub run: RunRecord,
    pub split: Split,
    /// Fingerprint of the scored song ids.
    pub song_set_hash: String,
    pub metrics: MetricsReport,
}

fn sibling(checkpoint: &Path, name: &str) -> PathBuf {
    checkpoint.parent().unwrap_or(Path::new(".")).join(name)
}

/// Per-label table followed by the macro summary.
pub fn format_metrics(m: &MetricsReport) -> String {
    let mut s = format!(
        "{:<16} {:>5} {:>5} {:>8} {:>8}\n",
        "label", "pos", "neg", "AP", "ROC"
    );
    for l in &m.labels {
        let f = |v: Option<f64>| v.map_or("excluded".into(), |v| format!("{v:.4}"));
        s += &format!(
            "{:<16} {:>5} {:>5} {:>8} {:>8}\n",
            l.label,
            l.positives,
            l.negatives,
            f(l.average_precision),
            f(l.roc_auc)
        );
    }
    s += &format!(
        "{} songs  AUC-ROC {:.2}%  AUC-PR {:.2}%",
        m.num_songs, m.auc_roc_pct, m.auc_pr_pct
    );
    s
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<EvaluationReport> {
    let run: RunRecord = read_json(&sibling(&args.checkpoint, RUN_FILE))?;
    let model = load_checkpoint_checked::<f32>(&args.checkpoint, &run.vocab.mood_hash())?;
    let stats_name = model
        .annotations
        .stats_file
        .as_deref()
        .unwrap_or(STATS_FILE);
    let stats = read_stats(&sibling(&args.checkpoint, stats_name))?;
    let records = load_manifest(args.manifest.as_ref().unwrap_or(&run.manifest))?;
    let split = read_split(args.splits.as_ref().unwrap_or(&run.splits))?;
    let selected: Vec<SongRecord> = split
        .select(&records, args.split)
        .into_iter()
        .cloned()
        .collect();
    let labeled = filter_labeled(&selected, &run.vocab);
    let songs = load_songs(&labeled, &run.vocab, &stats)?;
    let metrics = evaluate(&model, &songs)?;
    let report = EvaluationReport {
        song_set_hash: song_set_hash(songs.iter().map(|s| s.song_id.as_str())),
        split: args.split,
        run,
        metrics,
    };
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| sibling(&args.checkpoint, &format!("eval_{}.json", args.split)));
    write_json(&path, &report)?;
    say(out, format_args!("{}", format_metrics(&report.metrics)));
    say(out, format_args!("wrote {}", path.display()));
    Ok(report)
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<Outcome> {
    let dsp: DspConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => DspConfig::default(),
    };
    let model = crate::model::load_checkpoint::<f32>(&args.checkpoint)?;
    let stats_name = model
        .annotations
        .stats_file
        .clone()
        .ok_or_else(|| Error::Config("checkpoint does not name a statistics file".into()))?;
    let stats = read_stats(&sibling(&args.checkpoint, &stats_name))?;
    let labels = &model.annotations.mood_labels;
    let mut failures = 0;
    for path in &args.audio {
        let probs = load_audio(path, &dsp)
            .and_then(|a| compute_mel_spectrogram(&a, &dsp))
            .and_then(|s| crate::dsp::apply_normalization(&s, &stats))
            .map_err(Error::from)
            .and_then(|s| predict_song(&model, &s).map_err(Error::from));
        match probs {
            Ok(p) => {
                let pairs: Vec<String> = p
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let name = labels.get(i).cloned().unwrap_or_else(|| format!("mood{i}"));
                        format!("{name}:{v:.4}")
                    })
                    .collect();
                say(out, format_args!("{}\t{}", path.display(), pairs.join(" ")));
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failures += 1;
            }
        }
    }
    if failures == args.audio.len() {
        return Err(Error::Config("no audio file could be scored".into()));
    }
    Ok(if failures == 0 {
        Outcome::Success
    } else {
        Outcome::Partial
    })
}

/// Difference of two percentages, both already rounded to two decimals, as `(+x.xx)`.
///
/// The subtraction is done on integer hundredths so that the printed delta always equals the
/// difference of the printed values.
pub fn format_delta(baseline_pct: f64, pct: f64) -> String {
    let d = (pct * 100.0).round() as i64 - (baseline_pct * 100.0).round() as i64;
    let sign = if d < 0 { '-' } else { '+' };
    format!("({sign}{}.{:02})", d.abs() / 100, d.abs() % 100)
}

/// Comparison table with deltas against the baseline row.
pub fn format_report(baseline: &EvaluationReport, runs: &[EvaluationReport]) -> Result<String> {
    for r in runs {
        if r.song_set_hash != baseline.song_set_hash || r.split != baseline.split {
            return Err(Error::IncompatibleRuns(format!(
                "`{}` was scored on a different {} set than the baseline",
                r.run.config_name(),
                r.split
            )));
        }
    }
    let all = || std::iter::once(baseline).chain(runs);
    let dw = all()
        .map(|r| r.run.dataset.len())
        .chain([7])
        .max()
        .unwrap_or(7);
    let cw = all()
        .map(|r| r.run.config_name().len())
        .chain([6])
        .max()
        .unwrap_or(6);
    let header = format!(
        "{:<dw$}  {:<cw$}  {:>6}  {:>10}  {:>6}  {:>15}  {:>15}",
        "dataset", "config", "N_mood", "N_metadata", "#songs", "AUC-ROC (%)", "AUC-PR (%)"
    );
    let row = |r: &EvaluationReport, deltas: bool| {
        let m = &r.metrics;
        let cell = |base: f64, v: f64| {
            if deltas {
                format!("{v:.2} {}", format_delta(base, v))
            } else {
                format!("{v:.2}")
            }
        };
        let n_meta = if r.run.model.n_metadata == 0 {
            "-".to_string()
        } else {
            r.run.model.n_metadata.to_string()
        };
        format!(
            "{:<dw$}  {:<cw$}  {:>6}  {:>10}  {:>6}  {:>15}  {:>15}",
            r.run.dataset,
            r.run.config_name(),
            r.run.model.n_mood,
            n_meta,
            r.run.train_songs + r.run.val_songs + r.run.test_songs,
            cell(baseline.metrics.auc_roc_pct, m.auc_roc_pct),
            cell(baseline.metrics.auc_pr_pct, m.auc_pr_pct),
        )
    };
    let mut lines = vec![header, row(baseline, false)];
    lines.extend(runs.iter().map(|r| row(r, true)));
    Ok(lines.join("\n"))
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<String> {
    let baseline: EvaluationReport = read_json(&args.baseline)?;
    let runs = args
        .runs
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<Vec<EvaluationReport>>>()?;
    let table = format_report(&baseline, &runs)?;
    if let Some(p) = &args.out {
        std::fs::write(p, format!("{table}\n")).map_err(|e| Error::io(p, e))?;
    }
    say(out, format_args!("{table}"));
    Ok(table)
}
