use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::record::SegmentKey;
use crate::error::{Error, Result};

/// A 2198-key manifest with the 1283/229/686 train/validation/test shape of
/// the standard CMU-MOSI folds. Keys are placeholders (`mosi_vNN_S`): swap in
/// a manifest exported from the SDK's fold lists to run on the real corpus.
pub const BUNDLED_MOSI_MANIFEST: &str = include_str!("../../data/mosi_split_manifest.tsv");

/// The matching 2198-key listing.
pub const BUNDLED_MOSI_KEYS: &str = include_str!("../../data/mosi_keys.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Train,
    Validation,
    Test,
}

impl FromStr for Fold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Fold::Train),
            "validation" | "valid" => Ok(Fold::Validation),
            "test" => Ok(Fold::Test),
            other => Err(Error::Manifest(format!("unknown fold `{other}`"))),
        }
    }
}

impl fmt::Display for Fold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fold::Train => "train",
            Fold::Validation => "validation",
            Fold::Test => "test",
        })
    }
}

/// Segment key → fold. Each key appears exactly once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitManifest {
    entries: Vec<(String, Fold)>,
    index: HashMap<String, Fold>,
}

impl SplitManifest {
    pub fn new(entries: Vec<(String, Fold)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (k, f) in &entries {
            if index.insert(k.clone(), *f).is_some() {
                return Err(Error::Manifest(format!("key `{k}` listed more than once")));
            }
        }
        Ok(SplitManifest { entries, index })
    }

    /// Parse `key<TAB>fold` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, fold) = line
                .split_once('\t')
                .ok_or_else(|| Error::Manifest(format!("line {}: expected `key<TAB>fold`", i + 1)))?;
            entries.push((key.to_string(), fold.trim().parse()?));
        }
        SplitManifest::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SplitManifest::parse(&text)
    }

    pub fn bundled_mosi() -> Self {
        SplitManifest::parse(BUNDLED_MOSI_MANIFEST).expect("bundled manifest is well formed")
    }

    /// First `train` keys to train, next `validation` to validation, rest to test.
    pub fn from_sizes(keys: &[String], train: usize, validation: usize) -> Result<Self> {
        if train + validation > keys.len() {
            return Err(Error::Manifest(format!(
                "split sizes {train}+{validation} exceed {} records",
                keys.len()
            )));
        }
        let entries = keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let f = if i < train {
                    Fold::Train
                } else if i < train + validation {
                    Fold::Validation
                } else {
                    Fold::Test
                };
                (k.clone(), f)
            })
            .collect();
        SplitManifest::new(entries)
    }

    pub fn fold_of(&self, key: &str) -> Option<Fold> {
        self.index.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        self.entries.iter().map(|(k, f)| format!("{k}\t{f}\n")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Folds<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Folds<T> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Partition items by manifest fold, keeping input order within each fold.
pub fn split_dataset<T: SegmentKey>(items: Vec<T>, manifest: &SplitManifest) -> Result<Folds<T>> {
    let mut folds = Folds {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for item in items {
        let key = item.key();
        match manifest.fold_of(&key) {
            Some(Fold::Train) => folds.train.push(item),
            Some(Fold::Validation) => folds.validation.push(item),
            Some(Fold::Test) => folds.test.push(item),
            None => return Err(Error::Manifest(format!("segment `{key}` is not in the manifest"))),
        }
    }
    Ok(folds)
}
