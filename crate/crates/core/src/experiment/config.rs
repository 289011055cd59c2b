use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SyntheticConfig;
use crate::error::{Error, Result};
use crate::eval::TestKind;
use crate::models::{Hyperparameters, ModelKind, ModelSpec, TaskSet};
use crate::training::TrainConfig;

/// Where segments come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    /// A `mmsa-segments` or `mmsa-aligned` container file.
    Path(PathBuf),
    Synthetic {
        #[serde(default)]
        config: SyntheticConfig,
        #[serde(default)]
        seed: u64,
    },
}

/// How segments are assigned to folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplitSource {
    /// A `key<TAB>fold` manifest file.
    Manifest(PathBuf),
    /// The bundled 1283/229/686 manifest.
    BundledMosi,
    /// First `train` records, next `validation`, rest test (in file order).
    Sizes { train: usize, validation: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub kind: ModelKind,
    pub tasks: TaskSet,
}

impl CellSpec {
    pub fn label(&self) -> String {
        format!("{} {}", self.kind, self.tasks)
    }

    /// Filesystem-safe label, e.g. `verbal_S+P`.
    pub fn slug(&self) -> String {
        format!("{}_{}", self.kind, self.tasks)
    }

    pub fn parse(text: &str) -> Result<CellSpec> {
        let (kind, tasks) = text
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("cell `{text}` must look like `kind:tasks`, e.g. `verbal:S+P`")))?;
        Ok(CellSpec {
            kind: kind.trim().parse()?,
            tasks: tasks.trim().parse()?,
        })
    }
}

/// All 28 cells: kinds in table order, task sets in column order.
pub fn full_grid() -> Vec<CellSpec> {
    ModelKind::ALL
        .into_iter()
        .flat_map(|kind| TaskSet::GRID.into_iter().map(move |tasks| CellSpec { kind, tasks }))
        .collect()
}

fn default_dataset() -> DatasetSource {
    DatasetSource::Synthetic {
        config: SyntheticConfig::default(),
        seed: 0,
    }
}

fn default_split() -> SplitSource {
    SplitSource::Sizes {
        train: 60,
        validation: 20,
    }
}

fn default_cells() -> Vec<CellSpec> {
    full_grid()
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

/// One experiment: data, folds, grid cells, training settings and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dataset")]
    pub dataset: DatasetSource,
    #[serde(default = "default_split")]
    pub split: SplitSource,
    #[serde(default = "default_cells")]
    pub cells: Vec<CellSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Top-level seeds; cell `i` under seed `s` uses `s + i`.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub significance: TestKind,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: default_dataset(),
            split: default_split(),
            cells: default_cells(),
            train: TrainConfig::default(),
            hyper: Hyperparameters::default(),
            output_dir: default_output(),
            seeds: default_seeds(),
            significance: TestKind::default(),
            plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("`cells` must list at least one cell".into()));
        }
        for (i, c) in self.cells.iter().enumerate() {
            if self.cells[..i].contains(c) {
                return Err(Error::Config(format!("cell `{}` listed twice", c.label())));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        self.train.validate()?;
        ModelSpec {
            kind: ModelKind::Vocal,
            tasks: TaskSet::S,
            hyper: self.hyper.clone(),
        }
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn model_spec(&self, cell: &CellSpec) -> ModelSpec {
        ModelSpec {
            kind: cell.kind,
            tasks: cell.tasks,
            hyper: self.hyper.clone(),
        }
    }

    /// Training seed of cell `index` under top-level `seed`.
    pub fn cell_seed(seed: u64, index: usize) -> u64 {
        seed.wrapping_add(index as u64)
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
