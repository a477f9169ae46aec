use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;
use crate::tensor::{BN_EPSILON, BN_MOMENTUM};

/// Metadata loss weight: a fixed value or the label-count ratio `n_mood / n_metadata`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AlphaSetting {
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for AlphaSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSetting::Auto => f.write_str("auto"),
            AlphaSetting::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for AlphaSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AlphaSetting::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(AlphaSetting::Fixed(v)),
            Ok(v) => Err(format!(
                "alpha must be a finite non-negative number, got {v}"
            )),
            Err(_) => Err(format!("alpha must be `auto` or a number, got `{s}`")),
        }
    }
}

impl Serialize for AlphaSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AlphaSetting::Auto => s.serialize_str("auto"),
            AlphaSetting::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => format!("{v}").parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `n_mood / n_metadata`, the weight that balances the two label counts.
pub fn default_alpha(n_mood: usize, n_metadata: usize) -> Result<f64, ModelError> {
    if n_metadata == 0 {
        return Err(ModelError::ZeroMetadataLabels);
    }
    Ok(n_mood as f64 / n_metadata as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_frames: usize,
    pub input_bands: usize,
    pub num_blocks: usize,
    pub filters_per_block: usize,
    pub dropout_rate: f64,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub n_mood: usize,
    /// Zero means no metadata head (the single-task baseline).
    pub n_metadata: usize,
    pub alpha: AlphaSetting,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_frames: 187,
            input_bands: 96,
            num_blocks: 5,
            filters_per_block: 128,
            dropout_rate: 0.25,
            bn_momentum: BN_MOMENTUM,
            bn_epsilon: BN_EPSILON,
            n_mood: 3,
            n_metadata: 0,
            alpha: AlphaSetting::Fixed(0.0),
        }
    }
}

impl ModelConfig {
    /// Default trunk with the given head sizes; alpha is `auto` when a metadata head exists.
    pub fn new(n_mood: usize, n_metadata: usize) -> Self {
        Self {
            n_mood,
            n_metadata,
            alpha: if n_metadata > 0 {
                AlphaSetting::Auto
            } else {
                AlphaSetting::Fixed(0.0)
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.n_mood == 0 {
            return bad("n_mood must be at least 1".into());
        }
        if self.filters_per_block == 0 || self.num_blocks == 0 {
            return bad("the trunk needs at least one block with one filter".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || !(self.bn_epsilon > 0.0) {
            return bad("batch norm momentum must be in [0, 1) and epsilon positive".into());
        }
        match self.alpha {
            AlphaSetting::Auto if self.n_metadata == 0 => {
                return Err(ModelError::ZeroMetadataLabels)
            }
            AlphaSetting::Fixed(a) if !(a >= 0.0 && a.is_finite()) => {
                return bad(format!("alpha must be ≥ 0, got {a}"))
            }
            _ => {}
        }
        self.spatial_chain().map(|_| ())
    }

    /// Spatial size after each block, starting with the input size.
    pub fn spatial_chain(&self) -> Result<Vec<(usize, usize)>, ModelError> {
        let mut chain = vec![(self.input_frames, self.input_bands)];
        for k in 0..self.num_blocks {
            let (h, w) = chain[k];
            if h < 2 || w < 2 {
                return Err(ModelError::InvalidConfig(format!(
                    "input {}×{} collapses below 2×2 before block {}",
                    self.input_frames,
                    self.input_bands,
                    k + 1
                )));
            }
            chain.push((h / 2, w / 2));
        }
        Ok(chain)
    }

    pub fn flatten_width(&self) -> Result<usize, ModelError> {
        let &(h, w) = self.spatial_chain()?.last().expect("chain is never empty");
        Ok(h * w * self.filters_per_block)
    }

    /// The effective alpha: 0 without a metadata head, otherwise the fixed value or the
    /// label-count ratio.
    pub fn resolved_alpha(&self) -> f64 {
        if self.n_metadata == 0 {
            return 0.0;
        }
        match self.alpha {
            AlphaSetting::Auto => self.n_mood as f64 / self.n_metadata as f64,
            AlphaSetting::Fixed(a) => a,
        }
    }
}
