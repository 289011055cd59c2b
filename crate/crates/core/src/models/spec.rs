use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Vocal,
    Visual,
    Verbal,
    /// Early fusion: per-word feature concatenation.
    Ef,
    /// Tensor fusion: 3-way outer product of unimodal top layers.
    Tfn,
    /// Late fusion: concatenated unimodal top layers.
    Lf,
    /// Hierarchical fusion: vocal → visual → verbal.
    Hf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Vocal,
        ModelKind::Visual,
        ModelKind::Verbal,
        ModelKind::Ef,
        ModelKind::Tfn,
        ModelKind::Lf,
        ModelKind::Hf,
    ];

    pub fn is_fusion(self) -> bool {
        matches!(self, ModelKind::Ef | ModelKind::Tfn | ModelKind::Lf | ModelKind::Hf)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vocal => "vocal",
            ModelKind::Visual => "visual",
            ModelKind::Verbal => "verbal",
            ModelKind::Ef => "EF",
            ModelKind::Tfn => "TFN",
            ModelKind::Lf => "LF",
            ModelKind::Hf => "HF",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Spec(format!("unknown model kind `{s}`")))
    }
}

impl Serialize for ModelKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Auxiliary heads attached next to the always-present score head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskSet {
    pub polarity: bool,
    pub intensity: bool,
}

impl TaskSet {
    pub const S: TaskSet = TaskSet { polarity: false, intensity: false };
    pub const SP: TaskSet = TaskSet { polarity: true, intensity: false };
    pub const SI: TaskSet = TaskSet { polarity: false, intensity: true };
    pub const ALL: TaskSet = TaskSet { polarity: true, intensity: true };

    /// Column order of the results tables.
    pub const GRID: [TaskSet; 4] = [TaskSet::S, TaskSet::SP, TaskSet::SI, TaskSet::ALL];

    pub fn head_count(self) -> usize {
        1 + self.polarity as usize + self.intensity as usize
    }

    pub fn name(self) -> &'static str {
        match (self.polarity, self.intensity) {
            (false, false) => "S",
            (true, false) => "S+P",
            (false, true) => "S+I",
            (true, true) => "S+P+I",
        }
    }

    pub fn column(self) -> usize {
        TaskSet::GRID.iter().position(|&t| t == self).expect("every task set is in the grid")
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split('+').map(|p| p.trim().to_ascii_uppercase());
        if parts.next().as_deref() != Some("S") {
            return Err(Error::Spec(format!("task set `{s}` must start with the score task S")));
        }
        let mut t = TaskSet::S;
        for p in parts {
            match p.as_str() {
                "P" if !t.polarity => t.polarity = true,
                "I" if !t.intensity => t.intensity = true,
                _ => return Err(Error::Spec(format!("bad task set `{s}`"))),
            }
        }
        Ok(t)
    }
}

impl Serialize for TaskSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TaskSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Layer sizes and regularization. Defaults reproduce the reference topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Width of every ReLU layer in the vocal/visual stacks and the fusion stack.
    pub dense_units: usize,
    pub dense_layers: usize,
    pub lstm_units: usize,
    /// Width of the ReLU layer on top of the verbal LSTM.
    pub verbal_dense_units: usize,
    /// Input dropout for vocal/visual features and the EF combined vector.
    pub dropout: f64,
    /// L2 weight on the fusion stack's dense layers.
    pub fusion_l2: f64,
    /// The score head emits `score_scale · tanh(·)`.
    pub score_scale: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            dense_units: 32,
            dense_layers: 3,
            lstm_units: 128,
            verbal_dense_units: 64,
            dropout: 0.2,
            fusion_l2: 0.01,
            score_scale: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub tasks: TaskSet,
    #[serde(default)]
    pub hyper: Hyperparameters,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, tasks: TaskSet) -> Self {
        ModelSpec {
            kind,
            tasks,
            hyper: Hyperparameters::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.hyper;
        if h.dense_units == 0 || h.dense_layers == 0 || h.lstm_units == 0 || h.verbal_dense_units == 0 {
            return Err(Error::Spec("layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&h.dropout) {
            return Err(Error::Spec(format!("dropout {} outside [0, 1)", h.dropout)));
        }
        if h.fusion_l2 < 0.0 || h.score_scale.is_nan() || h.score_scale <= 0.0 {
            return Err(Error::Spec("fusion_l2 must be >= 0 and score_scale > 0".into()));
        }
        Ok(())
    }

    /// Cell label, e.g. `verbal S+P`.
    pub fn label(&self) -> String {
        format!("{} {}", self.kind, self.tasks)
    }
}
