use serde::{Deserialize, Serialize};

use super::record::{Frame, SegmentKey, SegmentRecord, VISUAL_DIM, VOCAL_DIM};
use crate::error::{Error, Result};
use crate::labels::LabelBundle;

/// Word-rate view of a segment: row `i` of every matrix belongs to word `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedSegment {
    pub key: String,
    pub verbal: Vec<Vec<f64>>,
    pub vocal: Vec<Vec<f64>>,
    pub visual: Vec<Vec<f64>>,
    pub labels: LabelBundle,
}

impl AlignedSegment {
    pub fn len(&self) -> usize {
        self.verbal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verbal.is_empty()
    }
}

impl SegmentKey for AlignedSegment {
    fn key(&self) -> String {
        self.key.clone()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentDiagnostics {
    pub words: usize,
    /// Words whose interval contains no vocal frame (given a zero row).
    pub vocal_empty_words: usize,
    pub visual_empty_words: usize,
    /// Frames that landed inside some word interval.
    pub vocal_frames_used: usize,
    pub visual_frames_used: usize,
    pub vocal_frames_total: usize,
    pub visual_frames_total: usize,
}

impl AlignmentDiagnostics {
    pub fn merge(&mut self, other: &AlignmentDiagnostics) {
        self.words += other.words;
        self.vocal_empty_words += other.vocal_empty_words;
        self.visual_empty_words += other.visual_empty_words;
        self.vocal_frames_used += other.vocal_frames_used;
        self.visual_frames_used += other.visual_frames_used;
        self.vocal_frames_total += other.vocal_frames_total;
        self.visual_frames_total += other.visual_frames_total;
    }
}

/// Average frames over each word's half-open interval `[start, end)`.
///
/// Returns per-word rows plus the number of frames assigned to each word.
/// Words with no frames get a zero row.
fn average_frames(starts: &[f64], ends: &[f64], frames: &[Frame], dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; starts.len()];
    let mut counts = vec![0usize; starts.len()];
    for f in frames {
        // Last word starting at or before the frame time.
        let idx = starts.partition_point(|&s| s <= f.time);
        if idx == 0 {
            continue;
        }
        let w = idx - 1;
        if f.time < ends[w] {
            counts[w] += 1;
            sums[w].iter_mut().zip(&f.features).for_each(|(s, x)| *s += x);
        }
    }
    for (row, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            row.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

pub fn align_to_words(record: &SegmentRecord) -> Result<(AlignedSegment, AlignmentDiagnostics)> {
    let labels = LabelBundle::from_score(record.gold_score)?;
    let starts: Vec<f64> = record.words.iter().map(|w| w.start).collect();
    let ends: Vec<f64> = record.words.iter().map(|w| w.end).collect();
    let (vocal, vocal_counts) = average_frames(&starts, &ends, &record.vocal_frames, VOCAL_DIM);
    let (visual, visual_counts) = average_frames(&starts, &ends, &record.visual_frames, VISUAL_DIM);
    let diag = AlignmentDiagnostics {
        words: record.words.len(),
        vocal_empty_words: vocal_counts.iter().filter(|&&c| c == 0).count(),
        visual_empty_words: visual_counts.iter().filter(|&&c| c == 0).count(),
        vocal_frames_used: vocal_counts.iter().sum(),
        visual_frames_used: visual_counts.iter().sum(),
        vocal_frames_total: record.vocal_frames.len(),
        visual_frames_total: record.visual_frames.len(),
    };
    let aligned = AlignedSegment {
        key: record.key(),
        verbal: record.words.iter().map(|w| w.embedding.clone()).collect(),
        vocal,
        visual,
        labels,
    };
    Ok((aligned, diag))
}

/// Align every record, summing diagnostics.
pub fn align_all(records: &[SegmentRecord]) -> Result<(Vec<AlignedSegment>, AlignmentDiagnostics)> {
    let mut total = AlignmentDiagnostics::default();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let (a, d) = align_to_words(r)?;
        total.merge(&d);
        out.push(a);
    }
    Ok((out, total))
}

/// Mean over rows.
pub fn pool_segment(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or(Error::Empty { what: "pool_segment" })?;
    let mut out = vec![0.0; first.len()];
    for r in rows {
        if r.len() != out.len() {
            return Err(Error::dim("pool_segment", &[out.len()], &[r.len()]));
        }
        out.iter_mut().zip(r).for_each(|(o, x)| *o += x);
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}
