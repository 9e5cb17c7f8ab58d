//! Duplicate removal up to translation, uniform scale and axis rotation.
//!
//! Each part is moved to the origin, scaled to unit max extent and then
//! serialized under each of the 24 proper axis-aligned rotations; the
//! smallest canonical serialization is hashed.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom::{Axis, GeomError};
use crate::script::{canonicalize, ScriptAst, QUANTIZE_DECIMALS};
use crate::{Part, SurfaceGeom};

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("part {0} has a degenerate bounding box")]
    Degenerate(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalKey {
    pub key: [u8; 32],
    pub canonical_text: String,
}

impl CanonicalKey {
    pub fn hex(&self) -> String {
        self.key.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

/// A signed axis permutation: new coordinate `i` is `sign[i] * old[perm[i]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub perm: [usize; 3],
    pub sign: [f64; 3],
}

impl Rotation {
    /// The 24 proper rotations mapping axes onto axes.
    pub fn all() -> Vec<Rotation> {
        const PERMS: [([usize; 3], f64); 6] = [
            ([0, 1, 2], 1.0),
            ([1, 2, 0], 1.0),
            ([2, 0, 1], 1.0),
            ([0, 2, 1], -1.0),
            ([2, 1, 0], -1.0),
            ([1, 0, 2], -1.0),
        ];
        let mut out = Vec::with_capacity(24);
        for (perm, parity) in PERMS {
            for bits in 0..8u8 {
                let sign = [0, 1, 2].map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 });
                if parity * sign[0] * sign[1] * sign[2] > 0.0 {
                    out.push(Rotation { perm, sign });
                }
            }
        }
        out
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.sign[i] * p[self.perm[i]])
    }

    /// New axis index that old axis `a` maps to.
    fn image(&self, a: usize) -> usize {
        (0..3).find(|&i| self.perm[i] == a).expect("permutation")
    }
}

/// Rotates a part normalized into `[0, e]` and shifts it back to the
/// positive octant. Returns the new geometry and whether term signs flip.
fn transform(geom: &SurfaceGeom, rot: &Rotation, extent: &[f64; 3]) -> (SurfaceGeom, bool) {
    // Per new axis: q = sign * p + shift.
    let shift = |i: usize| if rot.sign[i] < 0.0 { extent[rot.perm[i]] } else { 0.0 };
    let coord = |i: usize, v: f64| rot.sign[i] * v + shift(i);
    match *geom {
        SurfaceGeom::Plane { axis, offset } => {
            let i = rot.image(axis.index());
            (
                SurfaceGeom::Plane {
                    axis: Axis::from_index(i),
                    offset: coord(i, offset),
                },
                rot.sign[i] < 0.0,
            )
        }
        SurfaceGeom::Cylinder {
            axis,
            center,
            radius,
        } => {
            let mut p = [0.0; 3];
            let (u, v) = axis.perpendicular();
            p[u.index()] = center[0];
            p[v.index()] = center[1];
            let new_axis = Axis::from_index(rot.image(axis.index()));
            let (nu, nv) = new_axis.perpendicular();
            let q = |j: usize| coord(j, p[rot.perm[j]]);
            (
                SurfaceGeom::Cylinder {
                    axis: new_axis,
                    center: [q(nu.index()), q(nv.index())],
                    radius,
                },
                false,
            )
        }
    }
}

fn scale_geom(geom: &SurfaceGeom, min: &[f64; 3], s: f64) -> SurfaceGeom {
    match *geom {
        SurfaceGeom::Plane { axis, offset } => SurfaceGeom::Plane {
            axis,
            offset: (offset - min[axis.index()]) * s,
        },
        SurfaceGeom::Cylinder {
            axis,
            center,
            radius,
        } => {
            let (u, v) = axis.perpendicular();
            SurfaceGeom::Cylinder {
                axis,
                center: [
                    (center[0] - min[u.index()]) * s,
                    (center[1] - min[v.index()]) * s,
                ],
                radius: radius * s,
            }
        }
    }
}

pub fn canonical_key(part: &Part) -> Result<CanonicalKey, DedupError> {
    let bounds = part.bounding_box()?;
    let max_extent = bounds.max_extent();
    if !(max_extent > 0.0) || !max_extent.is_finite() {
        return Err(DedupError::Degenerate(part.id.clone()));
    }
    let s = 1.0 / max_extent;
    let extent = [0, 1, 2].map(|a| bounds.extent(a) * s);
    let mut base = ScriptAst::from_part(part);
    for surf in &mut base.surfaces {
        surf.geom = scale_geom(&surf.geom, &bounds.min, s);
    }

    let best = Rotation::all()
        .iter()
        .map(|rot| {
            let mut ast = base.clone();
            let mut flipped: HashMap<String, bool> = HashMap::new();
            for surf in &mut ast.surfaces {
                let (g, flip) = transform(&surf.geom, rot, &extent);
                surf.geom = g;
                flipped.insert(surf.id.clone(), flip);
            }
            for term in ast.cells.iter_mut().flat_map(|c| c.region.iter_mut()) {
                if flipped[&term.surface] {
                    term.sign = term.sign.flip();
                }
            }
            canonicalize(&ast, QUANTIZE_DECIMALS).to_text()
        })
        .min()
        .expect("24 rotations");

    Ok(CanonicalKey {
        key: Sha256::digest(best.as_bytes()).into(),
        canonical_text: best,
    })
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    pub kept: Vec<Part>,
    /// `(dropped id, id of the kept part it duplicates)`.
    pub dropped: Vec<(String, String)>,
}

/// Keeps the first part of every similarity class, in input order. Keys are
/// computed in parallel.
pub fn dedup_parts(parts: Vec<Part>) -> Result<DedupOutcome, DedupError> {
    let keys = parts
        .par_iter()
        .map(canonical_key)
        .collect::<Result<Vec<_>, _>>()?;
    let mut first: HashMap<[u8; 32], String> = HashMap::new();
    let mut out = DedupOutcome::default();
    for (part, key) in parts.into_iter().zip(keys) {
        match first.get(&key.key) {
            Some(orig) => out.dropped.push((part.id.clone(), orig.clone())),
            None => {
                first.insert(key.key, part.id.clone());
                out.kept.push(part);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{decompose, CsgExpr, DecomposeConfig};

    fn part(e: CsgExpr, id: &str) -> Part {
        let mut p = decompose(&e, &DecomposeConfig::default()).unwrap();
        p.id = id.into();
        p
    }

    /// Applies `x -> s * M x + t` to a part with `M` a signed permutation,
    /// using the generic point map rather than the per-surface rules above.
    fn moved(p: &Part, rot: &Rotation, s: f64, t: [f64; 3]) -> Part {
        let map = |x: [f64; 3]| {
            let r = rot.apply(&x);
            [0, 1, 2].map(|i| s * r[i] + t[i])
        };
        let mut out = p.clone();
        for (surf, orig) in out.surfaces.iter_mut().zip(&p.surfaces) {
            surf.geom = match orig.geom {
                SurfaceGeom::Plane { axis, offset } => {
                    let mut x = [0.0; 3];
                    x[axis.index()] = offset;
                    let mut dir = [0.0; 3];
                    dir[axis.index()] = 1.0;
                    let y = map(x);
                    let d = rot.apply(&dir);
                    let a = (0..3).find(|&i| d[i] != 0.0).unwrap();
                    SurfaceGeom::Plane {
                        axis: Axis::from_index(a),
                        offset: y[a],
                    }
                }
                SurfaceGeom::Cylinder {
                    axis,
                    center,
                    radius,
                } => {
                    let (u, v) = axis.perpendicular();
                    let mut x = [0.0; 3];
                    x[u.index()] = center[0];
                    x[v.index()] = center[1];
                    let mut dir = [0.0; 3];
                    dir[axis.index()] = 1.0;
                    let y = map(x);
                    let d = rot.apply(&dir);
                    let a = Axis::from_index((0..3).find(|&i| d[i] != 0.0).unwrap());
                    let (nu, nv) = a.perpendicular();
                    SurfaceGeom::Cylinder {
                        axis: a,
                        center: [y[nu.index()], y[nv.index()]],
                        radius: radius * s,
                    }
                }
            };
        }
        // Planes whose normal reversed swap sides.
        for cell in &mut out.cells {
            for t in &mut cell.region {
                let g = p.surface(&t.surface).unwrap().geom;
                if let SurfaceGeom::Plane { axis, .. } = g {
                    let mut dir = [0.0; 3];
                    dir[axis.index()] = 1.0;
                    if rot.apply(&dir).iter().sum::<f64>() < 0.0 {
                        t.sign = t.sign.flip();
                    }
                }
            }
        }
        out.id = format!("{}'", p.id);
        out
    }

    fn bracket() -> Part {
        part(
            CsgExpr::cuboid(0.0, 3.0, 0.0, 1.0, 0.0, 1.0)
                .union(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 1.0, 2.0))
                .difference(CsgExpr::cylinder(Axis::Z, 2.0, 0.5, 0.25, -1.0, 2.0)),
            "bracket",
        )
    }

    #[test]
    fn group_has_24_distinct_proper_rotations() {
        let all = Rotation::all();
        assert_eq!(all.len(), 24);
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a, b);
            }
        }
        // Determinant via the image of a right-handed frame.
        for r in &all {
            let m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|e| r.apply(&e));
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert_eq!(det, 1.0);
        }
    }

    #[test]
    fn invariant_under_similarity() {
        let p = bracket();
        let k = canonical_key(&p).unwrap();
        let id = Rotation {
            perm: [0, 1, 2],
            sign: [1.0; 3],
        };
        let quarter_z = Rotation {
            perm: [1, 0, 2],
            sign: [-1.0, 1.0, 1.0],
        };
        for q in [
            moved(&p, &id, 1.0, [3.0, -2.0, 7.0]),
            moved(&p, &id, 2.5, [0.0; 3]),
            moved(&p, &quarter_z, 1.0, [0.0; 3]),
        ] {
            q.validate(&Default::default()).unwrap();
            assert_eq!(canonical_key(&q).unwrap(), k);
        }
        for rot in Rotation::all() {
            let q = moved(&p, &rot, 0.75, [1.25, -3.5, 0.5]);
            assert_eq!(canonical_key(&q).unwrap().key, k.key, "{rot:?}");
        }
    }

    #[test]
    fn dissimilar_parts_differ() {
        let cube = part(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 0.0, 1.0), "cube");
        let slab = part(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 0.0, 2.0), "slab");
        assert_ne!(canonical_key(&cube).unwrap().key, canonical_key(&slab).unwrap().key);
    }

    #[test]
    fn mirror_images_differ() {
        let l = part(
            CsgExpr::cuboid(0.0, 3.0, 0.0, 1.0, 0.0, 1.0)
                .union(CsgExpr::cuboid(0.0, 1.0, 1.0, 2.0, 0.0, 1.0))
                .union(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 1.0, 3.0)),
            "chiral",
        );
        let mirror = Rotation {
            perm: [0, 1, 2],
            sign: [-1.0, 1.0, 1.0],
        };
        let m = moved(&l, &mirror, 1.0, [0.0; 3]);
        m.validate(&Default::default()).unwrap();
        assert_ne!(canonical_key(&l).unwrap().key, canonical_key(&m).unwrap().key);
    }

    #[test]
    fn dedup_keeps_first() {
        let a = bracket();
        let a2 = moved(&a, &Rotation::all()[5], 2.0, [1.0, 1.0, 1.0]);
        let b = part(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 0.0, 2.0), "b");
        let out = dedup_parts(vec![a, a2, b]).unwrap();
        let kept: Vec<&str> = out.kept.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(kept, ["bracket", "b"]);
        assert_eq!(out.dropped, vec![("bracket'".to_string(), "bracket".to_string())]);
        let empty = dedup_parts(vec![]).unwrap();
        assert!(empty.kept.is_empty() && empty.dropped.is_empty());
    }

    #[test]
    fn hex_is_64_chars() {
        let k = canonical_key(&bracket()).unwrap();
        assert_eq!(k.hex().len(), 64);
        assert_eq!(k.to_string(), k.hex());
    }
}
