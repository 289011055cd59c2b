//! Config-driven experiment grid: data preparation, per-cell training and
//! evaluation, significance tests and result reports.
//!
//! A results directory holds the resolved `config.json`, fold sizes in
//! `data.json`, aggregate `results.jsonl`, `significance.jsonl`,
//! `cells.jsonl`, `baseline.json`, `table.txt` / `table.jsonl`, and one
//! `cells/<kind>_<tasks>_seed<S>/` directory per trained cell.

mod config;
mod runner;

pub use config::{full_grid, CellSpec, DatasetSource, ExperimentConfig, SplitSource};
pub use runner::{
    compare_cells, load_segments, model_id, prepare_data, report, run_experiment, worker_count, BaselineRecord,
    CellStatus, DataSummary, PredictionRecord, ReportOutcome, RunSummary, TrainingSummary, CELLS_KIND,
    PREDICTIONS_KIND, SIGNIFICANCE_KIND, WORKERS_ENV,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticConfig;
    use crate::models::{ModelKind, TaskSet};

    #[test]
    fn grid_and_cell_parsing() {
        let g = full_grid();
        assert_eq!(g.len(), 28);
        assert_eq!(g[0].label(), "vocal S");
        assert_eq!(g[27].label(), "HF S+P+I");
        let c = CellSpec::parse("ef:S+P").unwrap();
        assert_eq!((c.kind, c.tasks), (ModelKind::Ef, TaskSet::SP));
        assert!(CellSpec::parse("ef").is_err());
        assert!(CellSpec::parse("zz:S").is_err());
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let c = ExperimentConfig::parse("{}").unwrap();
        assert_eq!(c.cells.len(), 28);
        assert_eq!(c.seeds, vec![0]);
        let text = c.to_pretty_json();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
        let json = r#"{
            "dataset": {"synthetic": {"config": {"n_segments": 30}, "seed": 2}},
            "split": {"sizes": {"train": 20, "validation": 5}},
            "cells": [{"kind": "verbal", "tasks": "S+P"}],
            "seeds": [1, 2]
        }"#;
        let c = ExperimentConfig::parse(json).unwrap();
        assert_eq!(c.cells.len(), 1);
        match &c.dataset {
            DatasetSource::Synthetic { config, seed } => {
                assert_eq!(config.n_segments, 30);
                assert_eq!(config.max_words, SyntheticConfig::default().max_words);
                assert_eq!(*seed, 2);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            ExperimentConfig::parse(r#"{"split": "bundled-mosi"}"#).unwrap().split,
            SplitSource::BundledMosi
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            r#"{"cells": []}"#,
            r#"{"seeds": []}"#,
            r#"{"unknown": 1}"#,
            r#"{"train": {"learning_rate": -1}}"#,
            r#"{"cells": [{"kind": "verbal", "tasks": "S"}, {"kind": "verbal", "tasks": "S"}]}"#,
            r#"{"hyper": {"dropout": 2.0}}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::parse(bad), Err(crate::Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn cell_seeds_are_offsets() {
        assert_eq!(ExperimentConfig::cell_seed(10, 3), 13);
    }
}
