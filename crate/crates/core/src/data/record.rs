use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::container;
use crate::error::{Error, Result};
use crate::labels::{SCORE_MAX, SCORE_MIN};

pub const VERBAL_DIM: usize = 300;
pub const VOCAL_DIM: usize = 74;
pub const VISUAL_DIM: usize = 46;

/// Container kind for segment datasets.
pub const DATASET_KIND: &str = "mmsa-segments";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub token: String,
    pub start: f64,
    pub end: f64,
    pub embedding: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: f64,
    pub features: Vec<f64>,
}

/// One opinion segment with frame-rate acoustic/facial features and
/// word-rate embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub video_id: String,
    pub segment_id: String,
    pub gold_score: f64,
    pub words: Vec<Word>,
    pub vocal_frames: Vec<Frame>,
    pub visual_frames: Vec<Frame>,
}

/// Anything addressable by a segment key (`{video_id}_{segment_id}`).
pub trait SegmentKey {
    fn key(&self) -> String;
}

impl SegmentKey for SegmentRecord {
    fn key(&self) -> String {
        format!("{}_{}", self.video_id, self.segment_id)
    }
}

impl SegmentKey for String {
    fn key(&self) -> String {
        self.clone()
    }
}

impl SegmentRecord {
    pub fn validate(&self) -> Result<()> {
        let key = self.key();
        let parse = |field: String, message: String| Error::Parse {
            key: key.clone(),
            field,
            message,
        };
        if !self.gold_score.is_finite() || !(SCORE_MIN..=SCORE_MAX).contains(&self.gold_score) {
            return Err(parse("gold_score".into(), format!("{} outside [-3, 3]", self.gold_score)));
        }
        if self.words.is_empty() {
            return Err(parse("words".into(), "segment has no words".into()));
        }
        let mut prev_end = f64::NEG_INFINITY;
        for (i, w) in self.words.iter().enumerate() {
            if !(w.start.is_finite() && w.end.is_finite()) || w.end < w.start {
                return Err(parse(format!("words[{i}]"), format!("bad interval [{}, {})", w.start, w.end)));
            }
            if w.start < prev_end {
                return Err(parse(
                    format!("words[{i}].start"),
                    format!("{} overlaps or precedes the previous word ending at {prev_end}", w.start),
                ));
            }
            prev_end = w.end;
            check_vector(&key, &format!("words[{i}].embedding"), &w.embedding, VERBAL_DIM)?;
        }
        for (name, frames, dim) in [
            ("vocal_frames", &self.vocal_frames, VOCAL_DIM),
            ("visual_frames", &self.visual_frames, VISUAL_DIM),
        ] {
            for (i, f) in frames.iter().enumerate() {
                if !f.time.is_finite() {
                    return Err(parse(format!("{name}[{i}].time"), "not finite".into()));
                }
                check_vector(&key, &format!("{name}[{i}].features"), &f.features, dim)?;
            }
        }
        Ok(())
    }
}

fn check_vector(key: &str, field: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::Schema {
            key: key.to_string(),
            field: field.to_string(),
            expected: dim,
            found: v.len(),
        });
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Parse {
            key: key.to_string(),
            field: format!("{field}[{i}]"),
            message: "not finite".into(),
        });
    }
    Ok(())
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, name: &str) -> Result<T> {
    let v = obj.get(name).ok_or_else(|| Error::Parse {
        key: key.to_string(),
        field: name.to_string(),
        message: "missing".into(),
    })?;
    T::deserialize(v).map_err(|e| Error::Parse {
        key: key.to_string(),
        field: name.to_string(),
        message: e.to_string(),
    })
}

fn items<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, name: &str) -> Result<Vec<T>> {
    let raw: Vec<Value> = field(obj, key, name)?;
    raw.iter()
        .enumerate()
        .map(|(i, v)| {
            T::deserialize(v).map_err(|e| Error::Parse {
                key: key.to_string(),
                field: format!("{name}[{i}]"),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Parse and validate one record line.
pub fn parse_record(line: &str, line_no: usize) -> Result<SegmentRecord> {
    let fallback = format!("<line {line_no}>");
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
        key: fallback.clone(),
        field: "<record>".into(),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        key: fallback.clone(),
        field: "<record>".into(),
        message: "not a JSON object".into(),
    })?;
    let video_id: String = field(obj, &fallback, "video_id")?;
    let segment_id: String = field(obj, &fallback, "segment_id")?;
    let key = format!("{video_id}_{segment_id}");
    let record = SegmentRecord {
        gold_score: field(obj, &key, "gold_score")?,
        words: items(obj, &key, "words")?,
        vocal_frames: items(obj, &key, "vocal_frames")?,
        visual_frames: items(obj, &key, "visual_frames")?,
        video_id,
        segment_id,
    };
    record.validate()?;
    Ok(record)
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<SegmentRecord>> {
    container::read_lines(input, DATASET_KIND)?
        .into_iter()
        .map(|(n, l)| parse_record(&l, n))
        .collect()
}

pub fn load_dataset(path: &Path) -> Result<Vec<SegmentRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(f))
}

pub fn write_dataset<W: Write>(out: W, records: &[SegmentRecord]) -> Result<()> {
    container::write_records(out, DATASET_KIND, records)
}

pub fn save_dataset(path: &Path, records: &[SegmentRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(BufWriter::new(f), records)
}
