//! Table rendering for aggregated strategy results.

use super::correlation::ReasoningLevel;
use super::metrics::{Aggregate, Prf, Scope};
use serde::{Deserialize, Serialize};

/// One row of the results table: a strategy on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub dataset: String,
    pub toolset: String,
    pub strategy: String,
    pub reasoning_level: ReasoningLevel,
    pub file: Option<Prf>,
    pub entity: Option<Prf>,
    pub avg_context_tokens: f64,
    pub instances: usize,
}

impl StrategyRow {
    pub fn from_aggregate(
        dataset: &str,
        toolset: &str,
        reasoning_level: ReasoningLevel,
        aggregate: &Aggregate,
    ) -> Self {
        StrategyRow {
            dataset: dataset.to_string(),
            toolset: toolset.to_string(),
            strategy: reasoning_level.label().to_string(),
            reasoning_level,
            file: aggregate.file.map(|m| m.prf()),
            entity: aggregate.entity.map(|m| m.prf()),
            avg_context_tokens: aggregate.avg_context_tokens,
            instances: aggregate.instances,
        }
    }

    pub fn scope(&self, scope: Scope) -> Option<Prf> {
        match scope {
            Scope::File => self.file,
            Scope::Entity => self.entity,
        }
    }

    /// File P/R/F1 then entity P/R/F1.
    pub fn metric_cells(&self) -> [Option<f64>; 6] {
        let split = |p: Option<Prf>| {
            p.map_or([None; 3], |p| {
                [Some(p.precision), Some(p.recall), Some(p.f1)]
            })
        };
        let [a, b, c] = split(self.file);
        let [d, e, f] = split(self.entity);
        [a, b, c, d, e, f]
    }
}

/// Percentage with one decimal, as displayed.
pub fn display_metric(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

fn display_key(value: f64) -> i64 {
    (value * 1000.0).round() as i64
}

/// Column maxima of the displayed values within each (dataset, toolset)
/// block; ties are all marked.
pub fn bold_mask(rows: &[StrategyRow]) -> Vec<[bool; 6]> {
    let mut mask = vec![[false; 6]; rows.len()];
    for (i, row) in rows.iter().enumerate() {
        let block: Vec<&StrategyRow> = rows
            .iter()
            .filter(|r| r.dataset == row.dataset && r.toolset == row.toolset)
            .collect();
        for (col, cell) in row.metric_cells().iter().enumerate() {
            let Some(value) = cell else { continue };
            let best = block
                .iter()
                .filter_map(|r| r.metric_cells()[col])
                .map(display_key)
                .max();
            mask[i][col] = best == Some(display_key(*value));
        }
    }
    mask
}

const HEADER: [&str; 10] = [
    "Dataset",
    "Tools",
    "Strategy",
    "File P",
    "File R",
    "File F1",
    "Entity P",
    "Entity R",
    "Entity F1",
    "Avg. CL",
];

/// Aligned-column markdown table; scores in percent, context length in tokens.
pub fn render_markdown(rows: &[StrategyRow]) -> String {
    let mask = bold_mask(rows);
    let mut table: Vec<Vec<String>> = vec![HEADER.iter().map(|h| h.to_string()).collect()];
    for (row, bold) in rows.iter().zip(&mask) {
        let mut cells = vec![
            row.dataset.clone(),
            row.toolset.clone(),
            row.strategy.clone(),
        ];
        for (cell, b) in row.metric_cells().iter().zip(bold) {
            cells.push(match cell {
                Some(v) if *b => format!("**{}**", display_metric(*v)),
                Some(v) => display_metric(*v),
                None => "n/a".to_string(),
            });
        }
        cells.push(format!("{:.0}", row.avg_context_tokens));
        table.push(cells);
    }
    let widths: Vec<usize> = (0..HEADER.len())
        .map(|c| {
            table
                .iter()
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c < 3 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = String::from(
        "Precision, recall and F1 are macro-averaged over instances and shown in percent; \
         Avg. CL is the mean gathered context in tokens. Bold marks the best value of each \
         column within a dataset and toolset block.\n\n",
    );
    out.push_str(&line(&table[0]));
    let rule: Vec<String> = widths
        .iter()
        .enumerate()
        .map(|(c, w)| {
            if c < 3 {
                "-".repeat(*w)
            } else {
                format!("{}:", "-".repeat(w.saturating_sub(1)))
            }
        })
        .collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for row in &table[1..] {
        out.push_str(&line(row));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(rows: &[StrategyRow]) -> String {
    let mut out = String::from(
        "dataset,toolset,strategy,reasoning_level,file_precision,file_recall,file_f1,\
         entity_precision,entity_recall,entity_f1,avg_context_tokens,instances\n",
    );
    for row in rows {
        let mut fields = vec![
            csv_field(&row.dataset),
            csv_field(&row.toolset),
            csv_field(&row.strategy),
            row.reasoning_level.ordinal().to_string(),
        ];
        fields.extend(
            row.metric_cells()
                .iter()
                .map(|c| c.map_or(String::new(), |v| v.to_string())),
        );
        fields.push(row.avg_context_tokens.to_string());
        fields.push(row.instances.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
