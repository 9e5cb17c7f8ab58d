//! The line-oriented script format used for training pairs and model output.
//!
//! ```text
//! # surfaces to reuse: s2
//! s1 = XPlane(x0=0.000000)
//! s2 = XPlane(x0=1.000000)
//! ...
//! c1 = Cell(region = +s1 & -s2 & +s3 & -s4 & +s5 & -s6)
//! ```
//!
//! An input script starts with the reuse header and defines every surface its
//! cells use. An output script has no header; it defines only new surfaces and
//! refers to the reused ones by their input ids.

mod canon;
mod emit;
mod parse;

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{resolve_region, Cell, GeomError};
use crate::{CellGeom, Part, SurfaceGeom};

pub use canon::{canonicalize, compare, CompareVerdict};
pub use emit::emit;
pub use parse::{parse, parse_with_externals};

/// Default number of decimals for quantized comparison.
pub const QUANTIZE_DECIMALS: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("semantic error at {line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
    #[error("inconsistent example: {0}")]
    InconsistentExample(String),
}

impl ScriptError {
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            ScriptError::Syntax { line, col, .. } | ScriptError::Semantic { line, col, .. } => {
                Some((*line, *col))
            }
            ScriptError::InconsistentExample(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDef {
    pub id: String,
    pub geom: SurfaceGeom,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptAst {
    /// `Some` when the script carries a reuse header line.
    pub reuse_header: Option<Vec<String>>,
    pub surfaces: Vec<SurfaceDef>,
    pub cells: Vec<Cell>,
}

/// Formats a parameter in the fixed 6-decimal form.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub(crate) fn header_line(ids: &[String]) -> String {
    if ids.is_empty() {
        "# surfaces to reuse:".to_string()
    } else {
        format!("# surfaces to reuse: {}", ids.join(", "))
    }
}

pub(crate) fn surface_line(id: &str, geom: &SurfaceGeom) -> String {
    let kind = geom.kind();
    let params: Vec<String> = kind
        .param_names()
        .iter()
        .zip(geom.params())
        .map(|(n, v)| format!("{n}={}", format_number(v)))
        .collect();
    format!("{id} = {}({})", kind.name(), params.join(", "))
}

pub(crate) fn cell_line(cell: &Cell) -> String {
    let terms: Vec<String> = cell.region.iter().map(|t| t.to_string()).collect();
    format!("{} = Cell(region = {})", cell.id, terms.join(" & "))
}

impl ScriptAst {
    /// Serializes to the canonical text layout: header, surfaces, cells; one
    /// definition per LF-terminated line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.reuse_header {
            writeln!(out, "{}", header_line(h)).unwrap();
        }
        for s in &self.surfaces {
            writeln!(out, "{}", surface_line(&s.id, &s.geom)).unwrap();
        }
        for c in &self.cells {
            writeln!(out, "{}", cell_line(c)).unwrap();
        }
        out
    }

    pub fn surface(&self, id: &str) -> Option<&SurfaceDef> {
        self.surfaces.iter().find(|s| s.id == id)
    }

    /// Surface ids referenced by cells but not defined in this script.
    pub fn external_refs(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.cells.iter().flat_map(|c| &c.region) {
            if self.surface(&t.surface).is_none() && !out.contains(&t.surface) {
                out.push(t.surface.clone());
            }
        }
        out
    }

    /// Copies definitions of externally referenced surfaces from `input`, so
    /// the script stands alone. The header is dropped.
    pub fn resolve_against(&self, input: &ScriptAst) -> ScriptAst {
        let mut surfaces: Vec<SurfaceDef> = self
            .external_refs()
            .iter()
            .filter_map(|id| input.surface(id).cloned())
            .collect();
        surfaces.extend(self.surfaces.iter().cloned());
        ScriptAst {
            reuse_header: None,
            surfaces,
            cells: self.cells.clone(),
        }
    }

    /// Resolved geometry of every cell, looking surfaces up in this script and
    /// then in `externals`.
    pub fn cell_geoms(&self, externals: Option<&ScriptAst>) -> Result<Vec<CellGeom>, GeomError> {
        let mut table: HashMap<&str, SurfaceGeom> = HashMap::new();
        if let Some(ext) = externals {
            table.extend(ext.surfaces.iter().map(|s| (s.id.as_str(), s.geom)));
        }
        table.extend(self.surfaces.iter().map(|s| (s.id.as_str(), s.geom)));
        self.cells
            .iter()
            .map(|c| resolve_region(&c.id, &c.region, |id| table.get(id).copied()))
            .collect()
    }

    /// The whole part as one script without a header.
    pub fn from_part(part: &Part) -> ScriptAst {
        ScriptAst {
            reuse_header: None,
            surfaces: part
                .surfaces
                .iter()
                .map(|s| SurfaceDef {
                    id: s.id.clone(),
                    geom: s.geom,
                })
                .collect(),
            cells: part.cells.clone(),
        }
    }
}
