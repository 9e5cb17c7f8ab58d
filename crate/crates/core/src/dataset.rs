//! Dataset assembly: filtering, augmentation, JSONL rows, splits and stats.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotate::{AnnotateConfig, AnnotateError, Annotator};
use crate::decompose::DecomposeConfig;
use crate::geom::{KernelConfig, SurfaceKind};
use crate::render::render_views;
use crate::script::{emit, QUANTIZE_DECIMALS};
use crate::sequence::{build_graph, enumerate_orders, least_order, split_at, BuildSequence};
use crate::Part;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("part {id}: {msg}")]
    Part { id: String, msg: String },
    #[error("no rows")]
    Empty,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
}

fn part_err(id: &str, e: impl fmt::Display) -> DatasetError {
    DatasetError::Part {
        id: id.to_string(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augment {
    #[default]
    None,
    Cut,
    Order,
    CutAndOrder,
}

impl FromStr for Augment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Augment::None),
            "cut" => Ok(Augment::Cut),
            "order" => Ok(Augment::Order),
            "cut_and_order" => Ok(Augment::CutAndOrder),
            _ => Err(format!(
                "unknown augment mode {s:?} (expected none, cut, order or cut_and_order)"
            )),
        }
    }
}

impl fmt::Display for Augment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Augment::None => "none",
            Augment::Cut => "cut",
            Augment::Order => "order",
            Augment::CutAndOrder => "cut_and_order",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kernel: KernelConfig,
    pub decompose: DecomposeConfig,
    pub augment: Augment,
    /// Maximum orderings per part for order augmentation; `None` is unlimited.
    pub order_cap: Option<usize>,
    pub quantize_decimals: u32,
    pub dedup: bool,
    pub render_size: usize,
    pub annotate: AnnotateConfig,
    pub split_ratio: f64,
    pub min_cells: usize,
    pub max_cells: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kernel: KernelConfig::default(),
            decompose: DecomposeConfig::default(),
            augment: Augment::None,
            order_cap: Some(24),
            quantize_decimals: QUANTIZE_DECIMALS,
            dedup: true,
            render_size: 64,
            annotate: AnnotateConfig::default(),
            split_ratio: 0.9,
            min_cells: 2,
            max_cells: 10,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Config(m.to_string()));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie strictly between 0 and 1");
        }
        if self.min_cells > self.max_cells {
            return bad("min_cells must not exceed max_cells");
        }
        if self.order_cap == Some(0) {
            return bad("order cap must be at least 1");
        }
        if self.render_size == 0 {
            return bad("render size must be positive");
        }
        self.kernel.validate().map_err(DatasetError::Config)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    TooManyCells(usize),
    TooFewCells(usize),
    UnsupportedSurface(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::TooManyCells(n) => write!(f, "too many cells ({n})"),
            RejectReason::TooFewCells(n) => write!(f, "too few cells ({n})"),
            RejectReason::UnsupportedSurface(k) => write!(f, "unsupported surface kind {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Filter {
    Accept,
    Reject(RejectReason),
}

pub fn filter_part(part: &Part, cfg: &PipelineConfig) -> Filter {
    let n = part.cells.len();
    if n > cfg.max_cells {
        Filter::Reject(RejectReason::TooManyCells(n))
    } else if n < cfg.min_cells {
        Filter::Reject(RejectReason::TooFewCells(n))
    } else {
        Filter::Accept
    }
}

/// Surface kind in a raw Part JSON value that the pipeline cannot represent.
pub fn unsupported_surface(value: &serde_json::Value) -> Option<String> {
    value
        .get("surfaces")?
        .as_array()?
        .iter()
        .filter_map(|s| s.get("kind").and_then(|k| k.as_str()))
        .find(|k| SurfaceKind::from_name(k).is_none())
        .map(str::to_string)
}

/// One completion example. `order` and `reused` use the part's own cell and
/// surface ids; the scripts are renumbered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub part_id: String,
    pub order: Vec<String>,
    pub cut: usize,
    pub input_script: String,
    pub output_script: String,
    pub reused: Vec<String>,
    pub annotation: Option<String>,
}

impl DatasetRow {
    pub fn example_id(&self) -> String {
        format!("{}/{}/{}", self.part_id, self.order.join(","), self.cut)
    }

    fn sort_key(&self) -> (&str, &[String], usize) {
        (&self.part_id, &self.order, self.cut)
    }
}

/// Per-part seed: the first 8 bytes of SHA-256 over the global seed and the
/// part id, so a part's sampling does not depend on which other parts exist.
pub fn part_seed(seed: u64, part_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(part_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn middle_cut(n: usize) -> usize {
    n / 2
}

fn part_rows(part: &Part, cfg: &PipelineConfig) -> Result<Vec<DatasetRow>, DatasetError> {
    let err = |e: &dyn fmt::Display| part_err(&part.id, e);
    let graph = build_graph(part, &cfg.kernel).map_err(|e| err(&e))?;
    let n = graph.len();
    if n < 2 {
        return Err(err(&"needs at least two cells"));
    }
    let sequences = match cfg.augment {
        Augment::None | Augment::Cut => vec![BuildSequence {
            part_id: part.id.clone(),
            order: least_order(&graph).map_err(|e| err(&e))?,
        }],
        Augment::Order | Augment::CutAndOrder => {
            enumerate_orders(&graph, &part.id, cfg.order_cap, part_seed(cfg.seed, &part.id))
                .map_err(|e| err(&e))?
        }
    };
    let cuts: Vec<usize> = match cfg.augment {
        Augment::None | Augment::Order => vec![middle_cut(n)],
        Augment::Cut | Augment::CutAndOrder => (1..n).collect(),
    };
    let mut rows = Vec::with_capacity(sequences.len() * cuts.len());
    for seq in &sequences {
        for &cut in &cuts {
            let ex = split_at(seq, part, cut).map_err(|e| err(&e))?;
            let (input_script, output_script) = emit(&ex, part).map_err(|e| err(&e))?;
            rows.push(DatasetRow {
                part_id: part.id.clone(),
                order: ex.order,
                cut,
                input_script,
                output_script,
                reused: ex.reused_surfaces,
                annotation: None,
            });
        }
    }
    Ok(rows)
}

/// Rows for every part, sorted by `(part_id, order, cut)`. Parts are processed
/// in parallel; the result does not depend on the thread count.
pub fn build_dataset(parts: &[Part], cfg: &PipelineConfig) -> Result<Vec<DatasetRow>, DatasetError> {
    cfg.validate()?;
    let per_part = parts
        .par_iter()
        .map(|p| part_rows(p, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows: Vec<DatasetRow> = per_part.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(rows)
}

/// Splits by part: all rows of a part go to the same side. The number of
/// training parts is `round(ratio * parts)`.
pub fn split_dataset(
    rows: &[DatasetRow],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<DatasetRow>, Vec<DatasetRow>), DatasetError> {
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(DatasetError::Config(format!("split ratio {ratio} outside [0, 1]")));
    }
    let mut ids: Vec<&str> = rows
        .iter()
        .map(|r| r.part_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    ids.shuffle(&mut SplitMix64::seed_from_u64(seed));
    let n_train = (ratio * ids.len() as f64).round() as usize;
    let train_ids: BTreeSet<&str> = ids[..n_train].iter().copied().collect();
    let (train, test) = rows
        .iter()
        .cloned()
        .partition(|r| train_ids.contains(r.part_id.as_str()));
    Ok((train, test))
}

/// Parts by cell count: buckets 1..9 and 10+.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Histogram {
    pub counts: [usize; 10],
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn label(i: usize) -> String {
        if i == 9 {
            "10+".into()
        } else {
            (i + 1).to_string()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cells,parts\n");
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{c}", Self::label(i)).unwrap();
        }
        out
    }

    /// Text bar chart, bars scaled so the largest bucket is `width` wide.
    pub fn bar_chart(&self, width: usize) -> String {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let digits = max.to_string().len();
        let mut out = String::new();
        for (i, &c) in self.counts.iter().enumerate() {
            let len = if max == 0 { 0 } else { (c * width).div_ceil(max) };
            writeln!(
                out,
                "{:>3} | {:>digits$} {}",
                Self::label(i),
                c,
                "#".repeat(len)
            )
            .unwrap();
        }
        out
    }
}

/// Histogram over part cell counts. Zero-cell entries are ignored.
pub fn stats(cell_counts: impl IntoIterator<Item = usize>) -> Histogram {
    let mut h = Histogram::default();
    for n in cell_counts {
        if n >= 1 {
            h.counts[n.min(10) - 1] += 1;
        }
    }
    h
}

/// Renders the output cells of each row and stores the model's description.
/// Rows are annotated in parallel, bounded by the client's concurrency cap.
pub fn annotate_rows(
    rows: &mut [DatasetRow],
    parts: &[Part],
    cfg: &PipelineConfig,
) -> Result<(), DatasetError> {
    let annotator = Annotator::new(cfg.annotate.clone())?;
    let by_id: HashMap<&str, &Part> = parts.iter().map(|p| (p.id.as_str(), p)).collect();
    let texts = rows
        .par_iter()
        .map(|row| {
            let part = by_id
                .get(row.part_id.as_str())
                .ok_or_else(|| part_err(&row.part_id, "part not found"))?;
            let cells = row.order[row.cut..]
                .iter()
                .map(|id| {
                    let cell = part.cell(id).ok_or_else(|| part_err(&part.id, id))?;
                    part.resolve(cell).map_err(|e| part_err(&part.id, e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let views = render_views(&cells, cfg.render_size, &cfg.kernel)
                .map_err(|e| part_err(&part.id, e))?;
            Ok(annotator.annotate(&views)?)
        })
        .collect::<Result<Vec<String>, DatasetError>>()?;
    for (row, text) in rows.iter_mut().zip(texts) {
        row.annotation = Some(text);
    }
    Ok(())
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable row"));
        out.push('\n');
    }
    out
}

/// Parses JSONL, skipping blank lines. Errors carry the 1-based line number.
pub fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{decompose, CsgExpr};
    use crate::script::{canonicalize, parse, parse_with_externals};

    /// `n` unit cubes in a row along x.
    fn row_part(id: &str, n: usize) -> Part {
        let mut e = CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        for i in 1..n {
            let x = i as f64;
            e = e.union(CsgExpr::cuboid(x, x + 1.0, 0.0, 1.0, 0.0, 1.0));
        }
        let cfg = DecomposeConfig {
            merge: false,
            ..DecomposeConfig::default()
        };
        let mut p = decompose(&e, &cfg).unwrap();
        p.id = id.into();
        assert_eq!(p.cells.len(), n);
        p
    }

    fn rows(parts: &[Part], augment: Augment, cap: Option<usize>) -> Vec<DatasetRow> {
        let cfg = PipelineConfig {
            augment,
            order_cap: cap,
            ..PipelineConfig::default()
        };
        build_dataset(parts, &cfg).unwrap()
    }

    #[test]
    fn filter_thresholds() {
        let cfg = PipelineConfig::default();
        assert_eq!(
            filter_part(&row_part("a", 11), &cfg),
            Filter::Reject(RejectReason::TooManyCells(11))
        );
        assert_eq!(
            filter_part(&row_part("b", 1), &cfg),
            Filter::Reject(RejectReason::TooFewCells(1))
        );
        assert_eq!(filter_part(&row_part("c", 5), &cfg), Filter::Accept);
    }

    #[test]
    fn unsupported_kinds_are_detected() {
        let v: serde_json::Value =
            serde_json::from_str(r#"{"surfaces":[{"kind":"XPlane"},{"kind":"Sphere"}]}"#).unwrap();
        assert_eq!(unsupported_surface(&v), Some("Sphere".into()));
    }

    #[test]
    fn row_counts_per_mode() {
        let p4 = row_part("p4", 4);
        assert_eq!(rows(&[p4.clone()], Augment::None, Some(24)).len(), 1);
        assert_eq!(rows(&[p4.clone()], Augment::Cut, Some(24)).len(), 3);
        // A path on 4 nodes has 2^(4-1) connected orderings.
        assert_eq!(rows(&[p4.clone()], Augment::Order, None).len(), 8);
        assert_eq!(rows(&[p4.clone()], Augment::CutAndOrder, None).len(), 24);
        assert_eq!(rows(&[p4.clone()], Augment::Order, Some(5)).len(), 5);
        let three = [row_part("x", 2), row_part("y", 3), p4];
        assert_eq!(rows(&three, Augment::None, Some(24)).len(), 3);
        assert_eq!(rows(&three, Augment::Cut, Some(24)).len(), 1 + 2 + 3);
    }

    #[test]
    fn rows_are_sorted_and_self_consistent() {
        let parts = [row_part("b", 3), row_part("a", 4)];
        let rs = rows(&parts, Augment::CutAndOrder, None);
        assert!(rs.windows(2).all(|w| w[0].sort_key() < w[1].sort_key()));
        for r in &rs {
            let input = parse(&r.input_script).unwrap();
            let header = input.reuse_header.clone().unwrap();
            assert_eq!(header.len(), r.reused.len());
            let output = parse_with_externals(&r.output_script, &header).unwrap();
            canonicalize(&input, 6);
            canonicalize(&output, 6);
            assert_eq!(input.to_text(), r.input_script);
        }
    }

    #[test]
    fn middle_cut_of_none() {
        let rs = rows(&[row_part("p", 5)], Augment::None, Some(24));
        assert_eq!(rs[0].cut, 2);
        assert_eq!(rs[0].order, vec!["c1", "c2", "c3", "c4", "c5"]);
    }

    #[test]
    fn split_by_part() {
        let mk = |id: String| DatasetRow {
            part_id: id,
            order: vec![],
            cut: 1,
            input_script: String::new(),
            output_script: String::new(),
            reused: vec![],
            annotation: None,
        };
        let rs: Vec<DatasetRow> = (0..100)
            .flat_map(|i| [mk(format!("p{i:03}")), mk(format!("p{i:03}"))])
            .collect();
        let (train, test) = split_dataset(&rs, 0.9, 7).unwrap();
        let ids = |v: &[DatasetRow]| v.iter().map(|r| r.part_id.clone()).collect::<BTreeSet<_>>();
        assert_eq!(ids(&train).len(), 90);
        assert_eq!(ids(&test).len(), 10);
        assert!(ids(&train).is_disjoint(&ids(&test)));
        assert_eq!(split_dataset(&rs, 0.9, 7).unwrap(), (train, test));
        let (a, b) = split_dataset(&rs[..4], 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
        assert!(matches!(split_dataset(&[], 0.5, 1), Err(DatasetError::Empty)));
    }

    #[test]
    fn histogram() {
        let h = stats([2, 2, 5]);
        assert_eq!(h.counts[1], 2);
        assert_eq!(h.counts[4], 1);
        assert_eq!(h.total(), 3);
        assert_eq!(stats([]).total(), 0);
        assert_eq!(stats([12, 10]).counts[9], 2);
        let csv = h.to_csv();
        assert!(csv.contains("\n2,2\n") && csv.ends_with("10+,0\n"));
        let chart = h.bar_chart(10);
        assert_eq!(chart.lines().nth(1).unwrap(), "  2 | 2 ##########");
        assert_eq!(chart.lines().nth(4).unwrap(), "  5 | 1 #####");
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(part_seed(1, "a"), part_seed(1, "a"));
        assert_ne!(part_seed(1, "a"), part_seed(2, "a"));
        assert_ne!(part_seed(1, "a"), part_seed(1, "b"));
    }

    #[test]
    fn jsonl_round_trip() {
        let rs = rows(&[row_part("p", 3)], Augment::Cut, Some(24));
        let text = to_jsonl(&rs);
        assert!(text.starts_with("{\"part_id\":\"p\",\"order\":"));
        assert!(text.lines().next().unwrap().ends_with("\"annotation\":null}"));
        let back: Vec<DatasetRow> = from_jsonl(&text).unwrap();
        assert_eq!(back, rs);
    }
}
