use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// One line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongRecord {
    pub song_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrogram_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    #[serde(default)]
    pub moods: Vec<String>,
    #[serde(default)]
    pub artists: Vec<String>,
    #[serde(default)]
    pub year: Option<i32>,
}

impl SongRecord {
    fn normalize(&mut self, base: Option<&Path>) {
        for labels in [&mut self.moods, &mut self.artists] {
            labels.sort();
            labels.dedup();
        }
        if let Some(base) = base {
            for p in [&mut self.spectrogram_path, &mut self.audio_path]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

/// Parse JSON-lines manifest text. Blank lines are skipped; label lists are de-duplicated
/// and sorted. Relative paths are resolved against `base` when given.
pub fn parse_manifest(text: &str, base: Option<&Path>) -> Result<Vec<SongRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |reason: String| DatasetError::Parse {
            line: i + 1,
            reason,
        };
        let mut rec: SongRecord = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
        if rec.song_id.is_empty() {
            return Err(parse("empty song_id".into()));
        }
        if !seen.insert(rec.song_id.clone()) {
            return Err(DatasetError::DuplicateSongId(rec.song_id));
        }
        rec.normalize(base);
        out.push(rec);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SongRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text, path.parent())
}

pub fn write_manifest(records: &[SongRecord], path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records_and_resolves_paths() {
        let text = r#"{"song_id":"a","spectrogram_path":"s/a.mspc","moods":["sad","happy","sad"],"artists":["x"],"year":1999}

{"song_id":"b","audio_path":"/abs/b.wav","moods":["calm"]}
{"song_id":"c","moods":[]}"#;
        let recs = parse_manifest(text, Some(Path::new("/data"))).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].moods, vec!["happy", "sad"]);
        assert_eq!(
            recs[0].spectrogram_path.as_deref(),
            Some(Path::new("/data/s/a.mspc"))
        );
        assert_eq!(recs[1].audio_path.as_deref(), Some(Path::new("/abs/b.wav")));
        assert_eq!(recs[1].year, None);
    }

    #[test]
    fn missing_id_names_the_line() {
        let text = "{\"song_id\":\"a\"}\n{\"moods\":[\"x\"]}\n";
        match parse_manifest(text, None) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "{\"song_id\":\"a\"}\n{\"song_id\":\"a\"}\n";
        assert!(matches!(
            parse_manifest(text, None),
            Err(DatasetError::DuplicateSongId(id)) if id == "a"
        ));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let recs = vec![SongRecord {
            song_id: "a".into(),
            spectrogram_path: Some(dir.path().join("a.mspc")),
            audio_path: None,
            moods: vec!["happy".into()],
            artists: vec![],
            year: Some(2001),
        }];
        write_manifest(&recs, &path).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), recs);
    }
}
