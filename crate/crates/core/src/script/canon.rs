use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{ScriptAst, SurfaceDef, QUANTIZE_DECIMALS};
use crate::geom::{Cell, Sign, SignedSurface, SurfaceKind};
use crate::SurfaceGeom;

/// Outcome of comparing a generated script against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompareVerdict {
    pub exact: bool,
    pub structural: bool,
    pub same_cell_count: bool,
}

/// Sort key of a surface. Surfaces referenced but not defined in the script
/// are opaque and ordered after all defined ones by their original id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum SurfKey {
    Known(SurfaceKind, Vec<i64>),
    External(String),
}

impl SurfKey {
    fn kind(&self) -> Option<SurfaceKind> {
        match self {
            SurfKey::Known(k, _) => Some(*k),
            SurfKey::External(_) => None,
        }
    }

    fn params(&self) -> &[i64] {
        match self {
            SurfKey::Known(_, p) => p,
            SurfKey::External(_) => &[],
        }
    }
}

fn quantize(v: f64, scale: f64) -> i64 {
    let q = (v * scale).round() as i64;
    if q == 0 {
        0
    } else {
        q
    }
}

fn key_of(geom: &SurfaceGeom, scale: f64) -> SurfKey {
    SurfKey::Known(
        geom.kind(),
        geom.params().iter().map(|v| quantize(*v, scale)).collect(),
    )
}

type Term = (SurfKey, Sign);

/// Cells as sorted term lists over surface keys.
fn keyed_cells(ast: &ScriptAst, scale: f64) -> Vec<Vec<Term>> {
    let table: HashMap<&str, SurfKey> = ast
        .surfaces
        .iter()
        .map(|s| (s.id.as_str(), key_of(&s.geom, scale)))
        .collect();
    ast.cells
        .iter()
        .map(|c| {
            let terms: BTreeSet<(Option<SurfaceKind>, Sign, SurfKey)> = c
                .region
                .iter()
                .map(|t| {
                    let key = table
                        .get(t.surface.as_str())
                        .cloned()
                        .unwrap_or_else(|| SurfKey::External(t.surface.clone()));
                    (key.kind(), t.sign, key)
                })
                .collect();
            terms.into_iter().map(|(_, s, k)| (k, s)).collect()
        })
        .collect()
}

fn signature(cell: &[Term]) -> Vec<(Option<SurfaceKind>, Sign)> {
    let mut sig: Vec<_> = cell.iter().map(|(k, s)| (k.kind(), *s)).collect();
    sig.sort();
    sig
}

/// Rewrites `ast` into a canonical form: parameters quantized to `decimals`,
/// coincident surfaces merged, unreferenced surfaces dropped, terms and cells
/// sorted, and ids renumbered densely.
pub fn canonicalize(ast: &ScriptAst, decimals: u32) -> ScriptAst {
    let scale = 10f64.powi(decimals as i32);
    let mut cells = keyed_cells(ast, scale);
    cells.sort_by(|a, b| {
        signature(a).cmp(&signature(b)).then_with(|| {
            let params = |c: &[Term]| -> Vec<Vec<i64>> {
                c.iter().map(|(k, _)| k.params().to_vec()).collect()
            };
            params(a).cmp(&params(b)).then_with(|| a.cmp(b))
        })
    });

    let used: BTreeSet<SurfKey> = cells.iter().flatten().map(|(k, _)| k.clone()).collect();
    let ids: BTreeMap<SurfKey, String> = used
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), format!("s{}", i + 1)))
        .collect();

    let mut surfaces = Vec::new();
    let mut externals = Vec::new();
    for (key, id) in &ids {
        match key {
            SurfKey::Known(kind, params) => {
                let values: Vec<f64> = params.iter().map(|q| *q as f64 / scale).collect();
                surfaces.push(SurfaceDef {
                    id: id.clone(),
                    geom: SurfaceGeom::from_params(*kind, &values).expect("kind arity"),
                });
            }
            SurfKey::External(_) => externals.push(id.clone()),
        }
    }

    let cells = cells
        .iter()
        .enumerate()
        .map(|(i, terms)| Cell {
            id: format!("c{}", i + 1),
            region: terms
                .iter()
                .map(|(k, s)| SignedSurface::new(*s, ids[k].clone()))
                .collect(),
        })
        .collect();

    ScriptAst {
        reuse_header: (!externals.is_empty()).then_some(externals),
        surfaces,
        cells,
    }
}

/// Compares at [`QUANTIZE_DECIMALS`]. Structural equality ignores parameter
/// values: equal multisets of cell signatures and equal distinct-surface
/// counts. It approximates, but does not decide, isomorphism.
pub fn compare(generated: &ScriptAst, truth: &ScriptAst) -> CompareVerdict {
    let g = canonicalize(generated, QUANTIZE_DECIMALS);
    let t = canonicalize(truth, QUANTIZE_DECIMALS);
    let same_cell_count = g.cells.len() == t.cells.len();
    let sigs = |ast: &ScriptAst| {
        let scale = 10f64.powi(QUANTIZE_DECIMALS as i32);
        let mut s: Vec<_> = keyed_cells(ast, scale).iter().map(|c| signature(c)).collect();
        s.sort();
        s
    };
    let n_surfaces = |ast: &ScriptAst| ast.surfaces.len() + ast.reuse_header.as_ref().map_or(0, Vec::len);
    let structural =
        same_cell_count && n_surfaces(&g) == n_surfaces(&t) && sigs(&g) == sigs(&t);
    let exact = structural && g.to_text() == t.to_text();
    CompareVerdict {
        exact,
        structural,
        same_cell_count,
    }
}
