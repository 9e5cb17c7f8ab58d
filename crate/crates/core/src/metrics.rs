//! Automatic scoring of generated completions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{all_connected, cells_overlap, is_bounded, KernelConfig};
use crate::script::{compare, parse, parse_with_externals, CompareVerdict, ScriptAst};
use crate::CellGeom;

/// Truth cell counts covered by the matrices.
pub const MATRIX_MAX_CELLS: usize = 9;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("bad input for {id}: {msg}")]
    BadInput { id: String, msg: String },
    #[error("no rows to aggregate")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub example_id: String,
    pub correct_syntax: bool,
    pub all_cells_connected: bool,
    pub no_overlapping_cells: bool,
    pub correct_syntax_and_logic: bool,
    pub all_surfaces_used: bool,
    pub same_number_of_cells: bool,
    pub structural_match: bool,
    pub exact_match: bool,
    pub n_input_cells: usize,
    pub n_truth_cells: usize,
    pub n_generated_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MetricsRow {
    /// `exact => structural => same count` and the logic conjunction.
    pub fn is_consistent(&self) -> bool {
        (!self.exact_match || self.structural_match)
            && (!self.structural_match || self.same_number_of_cells)
            && self.correct_syntax_and_logic
                == (self.correct_syntax && self.all_cells_connected && self.no_overlapping_cells)
            && (self.correct_syntax
                || !(self.all_cells_connected
                    || self.no_overlapping_cells
                    || self.all_surfaces_used
                    || self.same_number_of_cells))
    }
}

/// Scores `generated_text` as a completion of `input_text` against
/// `truth_text`. The input and truth are trusted; failures there are
/// reported as `BadInput`.
pub fn evaluate_example(
    example_id: &str,
    input_text: &str,
    generated_text: &str,
    truth_text: &str,
    cfg: &KernelConfig,
) -> Result<MetricsRow, MetricsError> {
    let bad = |msg: String| MetricsError::BadInput {
        id: example_id.to_string(),
        msg,
    };
    let input = parse(input_text).map_err(|e| bad(format!("input: {e}")))?;
    let header = input.reuse_header.clone().unwrap_or_default();
    let truth =
        parse_with_externals(truth_text, &header).map_err(|e| bad(format!("truth: {e}")))?;
    let input_geoms = input
        .cell_geoms(None)
        .map_err(|e| bad(format!("input: {e}")))?;
    if let Some(c) = input_geoms.iter().position(|g| !is_bounded(g)) {
        return Err(bad(format!("input cell {} is unbounded", input.cells[c].id)));
    }

    let mut row = MetricsRow {
        example_id: example_id.to_string(),
        n_input_cells: input.cells.len(),
        n_truth_cells: truth.cells.len(),
        ..MetricsRow::default()
    };
    let generated = match parse_with_externals(generated_text, &header) {
        Ok(ast) => ast,
        Err(e) => {
            row.note = Some(e.to_string());
            return Ok(row);
        }
    };
    row.correct_syntax = true;
    row.n_generated_cells = generated.cells.len();
    row.all_surfaces_used = header
        .iter()
        .all(|id| generated.cells.iter().any(|c| c.surface_ids().any(|s| s == id)));

    let gen_geoms = generated
        .cell_geoms(Some(&input))
        .map_err(|e| bad(format!("generated: {e}")))?;
    let unbounded: Vec<&str> = generated
        .cells
        .iter()
        .zip(&gen_geoms)
        .filter(|(_, g)| !is_bounded(g))
        .map(|(c, _)| c.id.as_str())
        .collect();
    if unbounded.is_empty() {
        let combined: Vec<CellGeom> = input_geoms.into_iter().chain(gen_geoms).collect();
        let geom_err = |e| bad(format!("kernel: {e}"));
        row.all_cells_connected = all_connected(&combined, cfg).map_err(geom_err)?;
        row.no_overlapping_cells = !any_overlap(&combined, cfg).map_err(geom_err)?;
    } else {
        row.note = Some(format!("unbounded generated cells: {}", unbounded.join(", ")));
    }
    row.correct_syntax_and_logic = row.all_cells_connected && row.no_overlapping_cells;

    let verdict = compare(&resolved(&generated, &input), &resolved(&truth, &input));
    row.same_number_of_cells = verdict.same_cell_count;
    row.structural_match = verdict.structural;
    row.exact_match = verdict.exact;
    Ok(row)
}

fn resolved(completion: &ScriptAst, input: &ScriptAst) -> ScriptAst {
    completion.resolve_against(input)
}

fn any_overlap(cells: &[CellGeom], cfg: &KernelConfig) -> Result<bool, crate::geom::GeomError> {
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells_overlap(&cells[i], &cells[j], cfg)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Compares two completions of the same input directly.
pub fn compare_completions(generated: &ScriptAst, truth: &ScriptAst, input: &ScriptAst) -> CompareVerdict {
    compare(&resolved(generated, input), &resolved(truth, input))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub correct_syntax: f64,
    pub all_cells_connected: f64,
    pub no_overlapping_cells: f64,
    pub correct_syntax_and_logic: f64,
    pub all_surfaces_used: f64,
    pub same_number_of_cells: f64,
    pub structural_match: f64,
    pub exact_match: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_rows: usize,
    pub means: MetricMeans,
    /// Truth cell count 1..9 by generated count 1..9 and 10+, row-normalized.
    pub cell_count_matrix: Vec<Vec<f64>>,
    pub cell_count_totals: Vec<usize>,
    /// Input cell count 1..9 by truth cell count 1..9; share of structural
    /// matches, `None` where no rows fall.
    pub equality_matrix: Vec<Vec<Option<f64>>>,
}

pub fn aggregate(rows: &[MetricsRow]) -> Result<MetricsReport, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricsRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
    let means = MetricMeans {
        correct_syntax: mean(|r| r.correct_syntax),
        all_cells_connected: mean(|r| r.all_cells_connected),
        no_overlapping_cells: mean(|r| r.no_overlapping_cells),
        correct_syntax_and_logic: mean(|r| r.correct_syntax_and_logic),
        all_surfaces_used: mean(|r| r.all_surfaces_used),
        same_number_of_cells: mean(|r| r.same_number_of_cells),
        structural_match: mean(|r| r.structural_match),
        exact_match: mean(|r| r.exact_match),
    };

    let k = MATRIX_MAX_CELLS;
    let mut counts = vec![vec![0usize; k + 1]; k];
    let mut eq_hits = vec![vec![0usize; k]; k];
    let mut eq_total = vec![vec![0usize; k]; k];
    for r in rows {
        if (1..=k).contains(&r.n_truth_cells) && r.n_generated_cells >= 1 {
            let col = r.n_generated_cells.min(k + 1) - 1;
            counts[r.n_truth_cells - 1][col] += 1;
        }
        if (1..=k).contains(&r.n_input_cells) && (1..=k).contains(&r.n_truth_cells) {
            eq_total[r.n_input_cells - 1][r.n_truth_cells - 1] += 1;
            if r.structural_match {
                eq_hits[r.n_input_cells - 1][r.n_truth_cells - 1] += 1;
            }
        }
    }
    let totals: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
    let cell_count_matrix = counts
        .iter()
        .zip(&totals)
        .map(|(row, &t)| {
            row.iter()
                .map(|&c| if t == 0 { 0.0 } else { c as f64 / t as f64 })
                .collect()
        })
        .collect();
    let equality_matrix = eq_hits
        .iter()
        .zip(&eq_total)
        .map(|(hits, tot)| {
            hits.iter()
                .zip(tot)
                .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
                .collect()
        })
        .collect();
    Ok(MetricsReport {
        n_rows: rows.len(),
        means,
        cell_count_matrix,
        cell_count_totals: totals,
        equality_matrix,
    })
}

/// Cell-count matrix as CSV, rows by truth count.
pub fn cell_count_csv(report: &MetricsReport) -> String {
    let mut out = String::from("truth");
    for g in 1..=MATRIX_MAX_CELLS {
        write!(out, ",{g}").unwrap();
    }
    out.push_str(",10+,n\n");
    for (t, row) in report.cell_count_matrix.iter().enumerate() {
        write!(out, "{}", t + 1).unwrap();
        for v in row {
            write!(out, ",{v:.6}").unwrap();
        }
        writeln!(out, ",{}", report.cell_count_totals[t]).unwrap();
    }
    out
}

/// Equality matrix as CSV, rows by input count; empty fields have no rows.
pub fn equality_csv(report: &MetricsReport) -> String {
    let mut out = String::from("input");
    for t in 1..=MATRIX_MAX_CELLS {
        write!(out, ",{t}").unwrap();
    }
    out.push('\n');
    for (i, row) in report.equality_matrix.iter().enumerate() {
        write!(out, "{}", i + 1).unwrap();
        for v in row {
            match v {
                Some(v) => write!(out, ",{v:.6}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const INPUT: &str = "# surfaces to reuse: s2\n\
        s1 = XPlane(x0=0.000000)\ns2 = XPlane(x0=1.000000)\n\
        s3 = YPlane(y0=0.000000)\ns4 = YPlane(y0=1.000000)\n\
        s5 = ZPlane(z0=0.000000)\ns6 = ZPlane(z0=1.000000)\n\
        c1 = Cell(region = +s1 & -s2 & +s3 & -s4 & +s5 & -s6)\n";
    const TRUTH: &str = "s7 = XPlane(x0=2.000000)\n\
        s8 = YPlane(y0=0.000000)\ns9 = YPlane(y0=1.000000)\n\
        s10 = ZPlane(z0=0.000000)\ns11 = ZPlane(z0=1.000000)\n\
        c2 = Cell(region = +s2 & -s7 & +s8 & -s9 & +s10 & -s11)\n";

    fn eval(generated: &str) -> MetricsRow {
        evaluate_example("t", INPUT, generated, TRUTH, &KernelConfig::default()).unwrap()
    }

    #[test]
    fn truth_scores_perfectly() {
        let r = eval(TRUTH);
        assert!(r.correct_syntax && r.all_cells_connected && r.no_overlapping_cells);
        assert!(r.correct_syntax_and_logic && r.all_surfaces_used);
        assert!(r.same_number_of_cells && r.structural_match && r.exact_match);
        assert_eq!((r.n_input_cells, r.n_truth_cells, r.n_generated_cells), (1, 1, 1));
        assert!(r.is_consistent());
    }

    #[test]
    fn coincident_box_overlaps() {
        let r = eval("c2 = Cell(region = +s1 & -s2 & +s3 & -s4 & +s5 & -s6)\n");
        assert!(!r.correct_syntax_and_logic);
        assert!(r.is_consistent());
    }

    #[test]
    fn bad_input_is_reported() {
        let e = evaluate_example("x", "s1 = XPlane(x0=)", TRUTH, TRUTH, &KernelConfig::default());
        assert!(matches!(e, Err(MetricsError::BadInput { .. })));
    }

    #[test]
    fn means_and_diagonal() {
        let row = eval(TRUTH);
        let rep = aggregate(&vec![row; 4]).unwrap();
        assert_eq!(rep.means.exact_match, 1.0);
        assert_eq!(rep.means.correct_syntax_and_logic, 1.0);
        assert_eq!(rep.cell_count_matrix[0][0], 1.0);
        assert_eq!(rep.equality_matrix[0][0], Some(1.0));
        assert_eq!(rep.equality_matrix[1][1], None);
    }

    #[test]
    fn row_normalization() {
        let mk = |g| MetricsRow {
            n_truth_cells: 1,
            n_generated_cells: g,
            ..MetricsRow::default()
        };
        let mut rows: Vec<MetricsRow> = (0..84).map(|_| mk(1)).collect();
        rows.extend((0..16).map(|i| mk(2 + i % 12)));
        let rep = aggregate(&rows).unwrap();
        assert!((rep.cell_count_matrix[0][0] - 0.84).abs() < 1e-12);
        let sum: f64 = rep.cell_count_matrix[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(rep.cell_count_matrix[0][9] > 0.0);
        assert!(matches!(aggregate(&[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn csv_shapes() {
        let rep = aggregate(&[eval(TRUTH)]).unwrap();
        let m1 = cell_count_csv(&rep);
        assert_eq!(m1.lines().count(), 10);
        assert!(m1.starts_with("truth,1,2,3,4,5,6,7,8,9,10+,n\n1,1.000000,"));
        let m2 = equality_csv(&rep);
        assert_eq!(m2.lines().nth(1).unwrap(), "1,1.000000,,,,,,,,");
    }
}
