use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, SongRecord};

/// Smallest manifest that can be split.
pub const MIN_SONGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(DatasetError::InvalidSpec(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub songs: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn ids(&self, split: Split) -> Vec<&str> {
        self.songs
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.songs.values().filter(|&&s| s == split).count()
    }

    /// Records belonging to `split`, in manifest order.
    pub fn select<'a>(&self, records: &'a [SongRecord], split: Split) -> Vec<&'a SongRecord> {
        records
            .iter()
            .filter(|r| self.songs.get(&r.song_id) == Some(&split))
            .collect()
    }
}

/// Song-level 80/10/10 split.
///
/// Song ids are sorted, shuffled with a seeded ChaCha8 generator, then cut at
/// `round(0.8·n)` and `round(0.9·n)`. Rounding the cumulative boundaries (rather than each
/// share) keeps the three parts summing to `n`; 95 songs give 76/10/9.
pub fn split_songs(records: &[SongRecord], seed: u64) -> Result<SplitAssignment, DatasetError> {
    let n = records.len();
    if n < MIN_SONGS {
        return Err(DatasetError::TooFewSongs(n));
    }
    let mut ids: Vec<&str> = records.iter().map(|r| r.song_id.as_str()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut1 = (0.8 * n as f64).round() as usize;
    let cut2 = (0.9 * n as f64).round() as usize;
    let songs = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let s = if i < cut1 {
                Split::Train
            } else if i < cut2 {
                Split::Val
            } else {
                Split::Test
            };
            (id.to_string(), s)
        })
        .collect();
    Ok(SplitAssignment { seed, songs })
}

pub fn write_split(split: &SplitAssignment, path: &Path) -> Result<(), DatasetError> {
    let json = serde_json::to_vec_pretty(split).expect("split serializes");
    std::fs::write(path, json).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_split(path: &Path) -> Result<SplitAssignment, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        line: e.line(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn records(n: usize) -> Vec<SongRecord> {
        (0..n)
            .map(|i| SongRecord {
                song_id: format!("s{i:04}"),
                spectrogram_path: None,
                audio_path: None,
                moods: vec![],
                artists: vec![],
                year: None,
            })
            .collect()
    }

    fn counts(s: &SplitAssignment) -> (usize, usize, usize) {
        (
            s.count(Split::Train),
            s.count(Split::Val),
            s.count(Split::Test),
        )
    }

    #[test]
    fn proportions() {
        assert_eq!(
            counts(&split_songs(&records(100), 1).unwrap()),
            (80, 10, 10)
        );
        assert_eq!(counts(&split_songs(&records(95), 1).unwrap()), (76, 10, 9));
        assert_eq!(counts(&split_songs(&records(10), 1).unwrap()), (8, 1, 1));
        assert!(matches!(
            split_songs(&records(9), 1),
            Err(DatasetError::TooFewSongs(9))
        ));
    }

    #[test]
    fn seeded_and_order_independent() {
        let recs = records(50);
        let a = split_songs(&recs, 3).unwrap();
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(a, split_songs(&rev, 3).unwrap());
        assert_ne!(a, split_songs(&recs, 4).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.json");
        let s = split_songs(&records(20), 9).unwrap();
        write_split(&s, &p).unwrap();
        assert_eq!(read_split(&p).unwrap(), s);
    }

    proptest! {
        #[test]
        fn partition_is_exhaustive_and_disjoint(n in 10usize..300, seed in any::<u64>()) {
            let recs = records(n);
            let s = split_songs(&recs, seed).unwrap();
            prop_assert_eq!(s.songs.len(), n);
            let (tr, va, te) = counts(&s);
            prop_assert_eq!(tr + va + te, n);
            prop_assert!(tr >= va && tr >= te);
        }
    }
}
