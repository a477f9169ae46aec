//! Binary spectrogram ("MSPC") and statistics ("MSTA") files, little-endian.

use std::path::Path;

use super::{DspError, MelSpectrogram, NormalizationStats};
use crate::error::Error;

const SPEC_MAGIC: &[u8; 4] = b"MSPC";
const STATS_MAGIC: &[u8; 4] = b"MSTA";
const VERSION: u32 = 1;

pub fn spectrogram_to_bytes(spec: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + spec.values().len() * 4);
    out.extend_from_slice(SPEC_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.bands() as u32).to_le_bytes());
    for v in spec.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    kind: &'static str,
}

impl<'a> Cursor<'a> {
    fn fail(&self, reason: impl Into<String>) -> DspError {
        DspError::MalformedFile {
            kind: self.kind,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DspError> {
        if self.bytes.len() < n {
            return Err(self.fail("truncated"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, DspError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DspError> {
        let len = n.checked_mul(4).ok_or_else(|| self.fail("size overflow"))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), DspError> {
        if self.take(4)? != magic {
            return Err(self.fail("bad magic"));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(self.fail(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<(), DspError> {
        if !self.bytes.is_empty() {
            return Err(self.fail(format!("{} trailing bytes", self.bytes.len())));
        }
        Ok(())
    }
}

pub fn spectrogram_from_bytes(bytes: &[u8]) -> Result<MelSpectrogram, DspError> {
    let mut cur = Cursor {
        bytes,
        kind: "spectrogram",
    };
    cur.header(SPEC_MAGIC)?;
    let frames = cur.u32()? as usize;
    let bands = cur.u32()? as usize;
    let values = cur.f32s(frames * bands)?;
    cur.finish()?;
    MelSpectrogram::new(frames, bands, values)
}

pub fn stats_to_bytes(stats: &NormalizationStats) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + stats.bands() * 8);
    out.extend_from_slice(STATS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(stats.bands() as u32).to_le_bytes());
    for v in stats.mean.iter().chain(&stats.std) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn stats_from_bytes(bytes: &[u8]) -> Result<NormalizationStats, DspError> {
    let mut cur = Cursor {
        bytes,
        kind: "stats",
    };
    cur.header(STATS_MAGIC)?;
    let bands = cur.u32()? as usize;
    let mean = cur.f32s(bands)?;
    let std = cur.f32s(bands)?;
    cur.finish()?;
    Ok(NormalizationStats { mean, std })
}

pub fn write_spectrogram(path: &Path, spec: &MelSpectrogram) -> Result<(), Error> {
    std::fs::write(path, spectrogram_to_bytes(spec)).map_err(|e| Error::io(path, e))
}

pub fn read_spectrogram(path: &Path) -> Result<MelSpectrogram, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(spectrogram_from_bytes(&bytes)?)
}

pub fn write_stats(path: &Path, stats: &NormalizationStats) -> Result<(), Error> {
    std::fs::write(path, stats_to_bytes(stats)).map_err(|e| Error::io(path, e))
}

pub fn read_stats(path: &Path) -> Result<NormalizationStats, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(stats_from_bytes(&bytes)?)
}
