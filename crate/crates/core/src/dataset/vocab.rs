use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DatasetError, SongRecord};

/// Width in years of one year bucket.
pub const YEAR_BUCKET_WIDTH: i32 = 5;

/// How the mood vocabulary is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoodSelection {
    /// The `k` most frequent moods.
    Top(usize),
    Explicit(Vec<String>),
}

impl Default for MoodSelection {
    fn default() -> Self {
        MoodSelection::Top(3)
    }
}

impl FromStr for MoodSelection {
    type Err = DatasetError;

    /// `top:K` or a comma-separated list of mood names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::InvalidSpec(format!("moods `{s}`: expected top:K or a,b,c"));
        if let Some(k) = s.strip_prefix("top:") {
            return match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(MoodSelection::Top(k)),
                _ => Err(bad()),
            };
        }
        let labels: Vec<String> = s.split(',').map(|m| m.trim().to_string()).collect();
        if labels.iter().any(String::is_empty) {
            return Err(bad());
        }
        Ok(MoodSelection::Explicit(labels))
    }
}

impl fmt::Display for MoodSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoodSelection::Top(k) => write!(f, "top:{k}"),
            MoodSelection::Explicit(l) => f.write_str(&l.join(",")),
        }
    }
}

/// Composition of the metadata head: top artists plus optional year buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MetadataSpec {
    pub artists: usize,
    pub year_buckets: usize,
}

impl MetadataSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.artists == 0 && self.year_buckets == 0
    }
}

impl FromStr for MetadataSpec {
    type Err = DatasetError;

    /// `artists:50`, `years:9`, `artists:50,years:9`, or `none`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = MetadataSpec::none();
        if s == "none" {
            return Ok(spec);
        }
        for part in s.split(',') {
            let bad = || DatasetError::InvalidSpec(format!("metadata part `{part}`"));
            let (key, n) = part.trim().split_once(':').ok_or_else(bad)?;
            let n: usize = n.parse().map_err(|_| bad())?;
            match key {
                "artists" => spec.artists = n,
                "years" => spec.year_buckets = n,
                _ => return Err(bad()),
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for MetadataSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.artists, self.year_buckets) {
            (0, 0) => f.write_str("none"),
            (a, 0) => write!(f, "artists:{a}"),
            (0, y) => write!(f, "years:{y}"),
            (a, y) => write!(f, "artists:{a},years:{y}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocabulary {
    pub mood_labels: Vec<String>,
    pub artist_labels: Vec<String>,
    /// First year of bucket 0, when year buckets are enabled.
    pub base_year: Option<i32>,
    pub year_buckets: usize,
}

impl LabelVocabulary {
    pub fn n_mood(&self) -> usize {
        self.mood_labels.len()
    }

    pub fn metadata_size(&self) -> usize {
        self.artist_labels.len() + self.year_buckets
    }

    /// Bucket of `year`, clamped into the available buckets.
    pub fn year_bucket(&self, year: i32) -> Option<usize> {
        let base = self.base_year?;
        if self.year_buckets == 0 {
            return None;
        }
        let raw = (year - base).div_euclid(YEAR_BUCKET_WIDTH);
        Some(raw.clamp(0, self.year_buckets as i32 - 1) as usize)
    }

    fn hash(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }

    pub fn mood_hash(&self) -> String {
        let v: Vec<&str> = self.mood_labels.iter().map(String::as_str).collect();
        Self::hash(&v)
    }

    pub fn metadata_hash(&self) -> String {
        let mut v: Vec<String> = self.artist_labels.clone();
        v.push(format!("years:{}:{:?}", self.year_buckets, self.base_year));
        let r: Vec<&str> = v.iter().map(String::as_str).collect();
        Self::hash(&r)
    }
}

/// Labels ordered by descending count, ties broken lexicographically.
fn ranked<'a>(labels: impl Iterator<Item = &'a String>) -> Vec<(String, usize)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let mut v: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(k, c)| (k.to_string(), c))
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Build mood, artist and year vocabularies from `records`.
///
/// `base_year` defaults to the largest multiple of 5 not above the earliest year present.
pub fn build_vocab(
    records: &[SongRecord],
    moods: &MoodSelection,
    metadata: &MetadataSpec,
    base_year: Option<i32>,
) -> Result<LabelVocabulary, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    let mood_labels = match moods {
        MoodSelection::Top(k) => {
            let r = ranked(records.iter().flat_map(|r| &r.moods));
            if r.len() < *k {
                return Err(DatasetError::InsufficientLabels {
                    kind: "mood",
                    requested: *k,
                    available: r.len(),
                });
            }
            r.into_iter().take(*k).map(|(l, _)| l).collect()
        }
        MoodSelection::Explicit(list) => {
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            if list.is_empty() || sorted.len() != list.len() {
                return Err(DatasetError::InvalidSpec(
                    "explicit mood list must be nonempty and duplicate-free".into(),
                ));
            }
            list.clone()
        }
    };
    let artist_labels = ranked(records.iter().flat_map(|r| &r.artists))
        .into_iter()
        .take(metadata.artists)
        .map(|(l, _)| l)
        .collect();
    let base_year = if metadata.year_buckets > 0 {
        match base_year {
            Some(b) => Some(b),
            None => {
                let min = records
                    .iter()
                    .filter_map(|r| r.year)
                    .min()
                    .ok_or(DatasetError::NoYearData)?;
                Some(min.div_euclid(YEAR_BUCKET_WIDTH) * YEAR_BUCKET_WIDTH)
            }
        }
    } else {
        None
    };
    Ok(LabelVocabulary {
        mood_labels,
        artist_labels,
        base_year,
        year_buckets: metadata.year_buckets,
    })
}

/// Multi-hot mood and metadata vectors. Labels outside the vocabulary are ignored; a year
/// sets exactly one position after the artist slice.
pub fn encode_targets(record: &SongRecord, vocab: &LabelVocabulary) -> (Vec<f32>, Vec<f32>) {
    let mut mood = vec![0f32; vocab.n_mood()];
    for (i, l) in vocab.mood_labels.iter().enumerate() {
        if record.moods.contains(l) {
            mood[i] = 1.0;
        }
    }
    let mut meta = vec![0f32; vocab.metadata_size()];
    for (i, a) in vocab.artist_labels.iter().enumerate() {
        if record.artists.contains(a) {
            meta[i] = 1.0;
        }
    }
    if let Some(b) = record.year.and_then(|y| vocab.year_bucket(y)) {
        meta[vocab.artist_labels.len() + b] = 1.0;
    }
    (mood, meta)
}

/// Keep only records carrying at least one vocabulary mood.
pub fn filter_labeled(records: &[SongRecord], vocab: &LabelVocabulary) -> Vec<SongRecord> {
    records
        .iter()
        .filter(|r| r.moods.iter().any(|m| vocab.mood_labels.contains(m)))
        .cloned()
        .collect()
}
