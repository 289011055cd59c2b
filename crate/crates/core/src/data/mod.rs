//! Segment records, word-level alignment, fold splits and synthetic data.

mod align;
mod record;
mod split;
mod synthetic;

pub use align::{align_all, align_to_words, pool_segment, AlignedSegment, AlignmentDiagnostics};
pub use record::{
    load_dataset, parse_record, read_dataset, save_dataset, write_dataset, Frame, SegmentKey, SegmentRecord, Word,
    DATASET_KIND, VERBAL_DIM, VISUAL_DIM, VOCAL_DIM,
};
pub use split::{split_dataset, Fold, Folds, SplitManifest, BUNDLED_MOSI_KEYS, BUNDLED_MOSI_MANIFEST};
pub use synthetic::{generate_synthetic, Aspect, SignalSpec, SyntheticConfig};

/// Container kind for aligned segments.
pub const ALIGNED_KIND: &str = "mmsa-aligned";
