//! Per-label average precision and ROC-AUC, macro averages and song-level evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledSong;
use crate::model::{predict_song, Model};
use crate::tensor::Real;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label needs at least one positive and one negative target")]
    DegenerateLabels,
    #[error("no label has both positive and negative targets")]
    NoAdmissibleLabels,
    #[error("scores and targets disagree in shape: {0}")]
    ShapeMismatch(String),
    #[error("non-finite score at position {0}")]
    NonFiniteScore(usize),
    #[error("nothing to evaluate: the split is empty")]
    EmptySplit,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

fn check(scores: &[f64], targets: &[bool]) -> Result<(usize, usize), MetricsError> {
    if scores.len() != targets.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} scores vs {} targets",
            scores.len(),
            targets.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let pos = targets.iter().filter(|&&t| t).count();
    let neg = targets.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// `Σ (R_n − R_{n−1})·P_n` over thresholds at each distinct score, highest first. Equal
/// scores enter together as a single step.
pub fn average_precision(scores: &[f64], targets: &[bool]) -> Result<f64, MetricsError> {
    let (pos, _) = check(scores, targets)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if targets[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Mann-Whitney estimate of `P(pos > neg) + ½·P(pos = neg)` via average ranks.
pub fn roc_auc(scores: &[f64], targets: &[bool]) -> Result<f64, MetricsError> {
    let (pos, neg) = check(scores, targets)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * order[i..j].iter().filter(|&&k| targets[k]).count() as f64;
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Metric value as a percentage rounded to two decimals.
pub fn percent(x: f64) -> f64 {
    (x * 10_000.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub positives: usize,
    pub negatives: usize,
    /// `None` for labels excluded from the macro averages.
    pub average_precision: Option<f64>,
    pub roc_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_songs: usize,
    pub macro_ap: f64,
    pub macro_roc_auc: f64,
    /// `macro_ap` as a percentage with two decimals.
    pub auc_pr_pct: f64,
    pub auc_roc_pct: f64,
    pub labels: Vec<LabelMetrics>,
    /// Labels lacking positives or negatives, left out of both averages.
    pub excluded: Vec<String>,
}

/// Per-song scores and binary targets, row-major `songs × labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabelSet {
    pub labels: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    pub targets: Vec<Vec<bool>>,
}

impl ScoredLabelSet {
    fn column<U: Copy>(rows: &[Vec<U>], j: usize) -> Vec<U> {
        rows.iter().map(|r| r[j]).collect()
    }
}

/// Unweighted means of per-label AP and ROC-AUC over labels with both classes present.
pub fn macro_metrics(set: &ScoredLabelSet) -> Result<MetricsReport, MetricsError> {
    let n_labels = set.labels.len();
    if set.scores.len() != set.targets.len() {
        return Err(MetricsError::ShapeMismatch("row counts differ".into()));
    }
    if set.scores.iter().any(|r| r.len() != n_labels)
        || set.targets.iter().any(|r| r.len() != n_labels)
    {
        return Err(MetricsError::ShapeMismatch(format!(
            "rows must have {n_labels} labels"
        )));
    }
    let mut labels = Vec::with_capacity(n_labels);
    let mut excluded = Vec::new();
    let (mut ap_sum, mut roc_sum, mut admissible) = (0.0, 0.0, 0usize);
    for (j, name) in set.labels.iter().enumerate() {
        let s = ScoredLabelSet::column(&set.scores, j);
        let t = ScoredLabelSet::column(&set.targets, j);
        let positives = t.iter().filter(|&&v| v).count();
        let (ap, roc) = match (average_precision(&s, &t), roc_auc(&s, &t)) {
            (Ok(ap), Ok(roc)) => {
                ap_sum += ap;
                roc_sum += roc;
                admissible += 1;
                (Some(ap), Some(roc))
            }
            (Err(MetricsError::DegenerateLabels), _) => {
                excluded.push(name.clone());
                (None, None)
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        labels.push(LabelMetrics {
            label: name.clone(),
            positives,
            negatives: t.len() - positives,
            average_precision: ap,
            roc_auc: roc,
        });
    }
    if admissible == 0 {
        return Err(MetricsError::NoAdmissibleLabels);
    }
    let macro_ap = ap_sum / admissible as f64;
    let macro_roc_auc = roc_sum / admissible as f64;
    Ok(MetricsReport {
        num_songs: set.scores.len(),
        macro_ap,
        macro_roc_auc,
        auc_pr_pct: percent(macro_ap),
        auc_roc_pct: percent(macro_roc_auc),
        labels,
        excluded,
    })
}

/// Song-level probabilities for every song, via segment-averaged inference. Label names come
/// from the model's annotations, falling back to `mood{i}` when absent.
pub fn score_songs<T: Real>(
    model: &Model<T>,
    songs: &[LabeledSong],
) -> Result<ScoredLabelSet, MetricsError> {
    if songs.is_empty() {
        return Err(MetricsError::EmptySplit);
    }
    let mut scores = Vec::with_capacity(songs.len());
    for song in songs {
        scores.push(predict_song(model, &song.spec)?);
    }
    let n_mood = model.config().n_mood;
    let mut labels = model.annotations.mood_labels.clone();
    if labels.len() != n_mood {
        labels = (0..n_mood).map(|i| format!("mood{i}")).collect();
    }
    Ok(ScoredLabelSet {
        labels,
        scores,
        targets: songs
            .iter()
            .map(|s| s.mood.iter().map(|&v| v > 0.5).collect())
            .collect(),
    })
}

/// Evaluate `model` on `songs`.
pub fn evaluate<T: Real>(
    model: &Model<T>,
    songs: &[LabeledSong],
) -> Result<MetricsReport, MetricsError> {
    macro_metrics(&score_songs(model, songs)?)
}
