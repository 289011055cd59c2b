use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::EvalReport;
use super::wilcoxon::SignificanceResult;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpec, TaskSet};

/// Container kind for machine-readable tables.
pub const TABLE_KIND: &str = "mmsa-table";

/// Published reference points on the CMU-MOSI test set.
pub const HUMAN_CC: f64 = 0.820;
pub const HUMAN_MAE: f64 = 0.710;
pub const RANDOM_MAE: f64 = 1.880;

/// Published test-set CC and MAE per cell, columns in [`TaskSet::GRID`] order.
pub const PUBLISHED: [(ModelKind, [f64; 4], [f64; 4]); 7] = [
    (ModelKind::Vocal, [0.125, 0.149, 0.119, 0.153], [1.456, 1.471, 1.444, 1.431]),
    (ModelKind::Visual, [0.092, 0.109, 0.116, 0.106], [1.442, 1.439, 1.453, 1.460]),
    (ModelKind::Verbal, [0.404, 0.455, 0.434, 0.417], [1.196, 1.156, 1.181, 1.206]),
    (ModelKind::Ef, [0.471, 0.472, 0.476, 0.482], [1.197, 1.181, 1.193, 1.172]),
    (ModelKind::Tfn, [0.448, 0.461, 0.446, 0.429], [1.186, 1.181, 1.178, 1.205]),
    (ModelKind::Lf, [0.454, 0.413, 0.428, 0.428], [1.179, 1.211, 1.204, 1.201]),
    (ModelKind::Hf, [0.469, 0.424, 0.458, 0.432], [1.155, 1.211, 1.164, 1.187]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "MAE")]
    Mae,
}

impl Block {
    fn name(self) -> &'static str {
        match self {
            Block::Cc => "CC",
            Block::Mae => "MAE",
        }
    }
}

/// One table entry. Reference rows carry `tasks: None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub block: Block,
    pub row: String,
    pub tasks: Option<TaskSet>,
    pub value: Option<f64>,
    /// Number of seeds averaged into `value`.
    pub seeds: usize,
    pub best: bool,
    pub missing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultsTable {
    pub cells: Vec<TableCell>,
    pub significance: Vec<SignificanceResult>,
}

#[derive(Default)]
struct Acc {
    cc: Vec<f64>,
    mae: Vec<f64>,
    seeds: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregate reports (averaging over seeds) into CC and MAE blocks. Cells
/// listed in `expected` but absent from `reports` are flagged as missing.
pub fn results_table(
    reports: &[EvalReport],
    significance: &[SignificanceResult],
    expected: &[ModelSpec],
) -> Result<ResultsTable> {
    if reports.is_empty() && expected.is_empty() {
        return Err(Error::Empty { what: "results table" });
    }
    let mut acc: BTreeMap<(ModelKind, TaskSet), Acc> = BTreeMap::new();
    for r in reports {
        let a = acc.entry((r.spec.kind, r.spec.tasks)).or_default();
        a.cc.extend(r.cc);
        a.mae.push(r.mae);
        a.seeds += 1;
    }
    let expected_cells: Vec<(ModelKind, TaskSet)> = expected.iter().map(|s| (s.kind, s.tasks)).collect();
    let kinds: Vec<ModelKind> = ModelKind::ALL
        .into_iter()
        .filter(|k| acc.keys().chain(&expected_cells).any(|(kk, _)| kk == k))
        .collect();

    let mut cells = Vec::new();
    for block in [Block::Cc, Block::Mae] {
        cells.push(reference(block, "Random", if block == Block::Mae { Some(RANDOM_MAE) } else { None }));
        for &kind in &kinds {
            let start = cells.len();
            for tasks in TaskSet::GRID {
                let a = acc.get(&(kind, tasks));
                let value = a.and_then(|a| match block {
                    Block::Cc => mean(&a.cc),
                    Block::Mae => mean(&a.mae),
                });
                cells.push(TableCell {
                    block,
                    row: kind.name().to_string(),
                    tasks: Some(tasks),
                    value,
                    seeds: a.map_or(0, |a| a.seeds),
                    best: false,
                    missing: a.is_none() && expected_cells.contains(&(kind, tasks)),
                });
            }
            mark_best(&mut cells[start..], block);
        }
        let human = match block {
            Block::Cc => HUMAN_CC,
            Block::Mae => HUMAN_MAE,
        };
        cells.push(reference(block, "Human", Some(human)));
    }
    Ok(ResultsTable {
        cells,
        significance: significance.to_vec(),
    })
}

fn reference(block: Block, row: &str, value: Option<f64>) -> TableCell {
    TableCell {
        block,
        row: row.to_string(),
        tasks: None,
        value,
        seeds: 0,
        best: false,
        missing: false,
    }
}

/// Best = highest CC or lowest MAE; the first column wins exact ties.
fn mark_best(row: &mut [TableCell], block: Block) {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in row.iter().enumerate() {
        if let Some(v) = c.value {
            let better = match (best, block) {
                (None, _) => true,
                (Some((_, b)), Block::Cc) => v > b,
                (Some((_, b)), Block::Mae) => v < b,
            };
            if better {
                best = Some((i, v));
            }
        }
    }
    if let Some((i, _)) = best {
        row[i].best = true;
    }
}

impl ResultsTable {
    pub fn missing(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .cells
            .iter()
            .filter(|c| c.missing && c.block == Block::Cc)
            .map(|c| format!("{} {}", c.row, c.tasks.map_or("", TaskSet::name)))
            .collect();
        out.dedup();
        out
    }

    /// Aligned plain-text rendering; `*` marks the best cell in each row.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for block in [Block::Cc, Block::Mae] {
            let _ = write!(s, "{:<8}", block.name());
            for t in TaskSet::GRID {
                let _ = write!(s, "{:>10}", t.name());
            }
            s.push('\n');
            let mut rows: Vec<&str> = Vec::new();
            for c in self.cells.iter().filter(|c| c.block == block) {
                if !rows.contains(&c.row.as_str()) {
                    rows.push(&c.row);
                }
            }
            for row in rows {
                let _ = write!(s, "{row:<8}");
                let row_cells: Vec<&TableCell> =
                    self.cells.iter().filter(|c| c.block == block && c.row == row).collect();
                for (col, t) in TaskSet::GRID.iter().enumerate() {
                    let cell = row_cells
                        .iter()
                        .find(|c| c.tasks == Some(*t))
                        .or_else(|| if col == 0 { row_cells.iter().find(|c| c.tasks.is_none()) } else { None });
                    let text = match cell {
                        Some(c) if c.missing => "missing".to_string(),
                        Some(TableCell { value: Some(v), best, .. }) => {
                            format!("{v:.3}{}", if *best { "*" } else { " " })
                        }
                        _ => "- ".to_string(),
                    };
                    let _ = write!(s, "{text:>10}");
                }
                s.push('\n');
            }
            s.push('\n');
        }
        if !self.significance.is_empty() {
            s.push_str("Pairwise Wilcoxon tests (two-sided, alpha 0.05)\n");
            for r in &self.significance {
                let _ = writeln!(
                    s,
                    "  {} vs {}: p = {:.4}{}",
                    r.model_a,
                    r.model_b,
                    r.p_value,
                    if r.significant { " (significant)" } else { "" }
                );
            }
        }
        s
    }

    pub fn write<W: std::io::Write>(&self, writer: W) -> Result<()> {
        crate::container::write_records(writer, TABLE_KIND, &self.cells)
    }
}
