//! CSG expression to half-space cells.
//!
//! Every primitive surface enters one arrangement: box faces and cylinder caps
//! split space into a grid, and each grid box is further split by the sides of
//! the cylinders whose wall crosses it. Each nonempty region is sign-constant
//! with respect to every primitive, so a handful of interior samples decides
//! whether it belongs to the solid.

mod csg;
mod merge;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{
    bounding_box, classify_point, is_bounded, Axis, Cell, GeomError, KernelConfig, PointClass,
    Sign, SignedSurface, Surface as SurfaceT, SURFACE_MERGE_TOL,
};
use crate::{Aabb, CellGeom, Constraint, Part, Surface, SurfaceGeom};

pub use csg::CsgExpr;

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("invalid expression: {0}")]
    InvalidExpr(String),
    #[error("interior samples disagree in region {region}; the arrangement is missing a surface")]
    MixedRegion { region: String },
    #[error("expression has no interior")]
    EmptySolid,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecomposeConfig {
    /// Interior samples per region; all must agree.
    pub classify_samples: usize,
    /// Rejection samples for the sampled emptiness test. Interior search per
    /// region draws at most `empty_samples * classify_samples` candidates.
    pub empty_samples: usize,
    pub merge: bool,
    pub seed: u64,
    pub kernel: KernelConfig,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            classify_samples: 16,
            empty_samples: 64,
            merge: true,
            seed: 0,
            kernel: KernelConfig::default(),
        }
    }
}

/// Per-axis slab bounds of a grid box; `None` is unbounded.
type Slab = (Option<f64>, Option<f64>);

struct Arrangement {
    slabs: [Vec<Slab>; 3],
    cylinders: Vec<SurfaceGeom>,
}

impl Arrangement {
    fn new(expr: &CsgExpr) -> Self {
        let mut offsets: [Vec<f64>; 3] = Default::default();
        let mut cylinders: Vec<SurfaceGeom> = Vec::new();
        for s in expr.surfaces() {
            match s {
                SurfaceGeom::Plane { axis, offset } => offsets[axis.index()].push(offset),
                cyl => {
                    if !cylinders.iter().any(|c| c.approx_eq(&cyl, SURFACE_MERGE_TOL)) {
                        cylinders.push(cyl);
                    }
                }
            }
        }
        let slabs = offsets.map(|mut o| {
            o.sort_by(f64::total_cmp);
            o.dedup_by(|b, a| (*b - *a).abs() <= SURFACE_MERGE_TOL);
            let mut edges: Vec<Option<f64>> = vec![None];
            edges.extend(o.into_iter().map(Some));
            edges.push(None);
            edges.windows(2).map(|w| (w[0], w[1])).collect()
        });
        cylinders.sort_by(surface_order);
        Arrangement { slabs, cylinders }
    }

    fn grid_boxes(&self) -> Vec<[Slab; 3]> {
        let mut out = Vec::new();
        for &x in &self.slabs[0] {
            for &y in &self.slabs[1] {
                for &z in &self.slabs[2] {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }
}

/// Orders surfaces by axis, then kind (planes first), then parameters.
pub(crate) fn surface_order(a: &SurfaceGeom, b: &SurfaceGeom) -> Ordering {
    let key = |s: &SurfaceGeom| (s.axis(), !s.kind().is_plane());
    key(a).cmp(&key(b)).then_with(|| {
        a.params()
            .iter()
            .zip(b.params())
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Cross-section of `b` in the two axes perpendicular to `axis`.
fn cross_section(b: &Aabb, axis: Axis) -> ([f64; 2], [f64; 2]) {
    let (u, v) = axis.perpendicular();
    (
        [b.min[u.index()], b.min[v.index()]],
        [b.max[u.index()], b.max[v.index()]],
    )
}

/// Distances from `c` to the nearest point and the farthest point of the
/// rectangle `[lo, hi]`.
fn rect_distances(c: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> (f64, f64) {
    let mut near = 0.0;
    let mut far = 0.0;
    for k in 0..2 {
        let d_near = (lo[k] - c[k]).max(0.0).max(c[k] - hi[k]);
        let d_far = (c[k] - lo[k]).abs().max((hi[k] - c[k]).abs());
        near += d_near * d_near;
        far += d_far * d_far;
    }
    (near.sqrt(), far.sqrt())
}

fn cylinder_parts(g: &SurfaceGeom) -> (Axis, [f64; 2], f64) {
    match *g {
        SurfaceGeom::Cylinder {
            axis,
            center,
            radius,
        } => (axis, center, radius),
        SurfaceGeom::Plane { .. } => unreachable!("cylinder expected"),
    }
}

/// Whether the cylinder wall passes through the interior of `b`.
fn wall_crosses(cyl: &SurfaceGeom, b: &Aabb) -> bool {
    let (axis, center, radius) = cylinder_parts(cyl);
    let (lo, hi) = cross_section(b, axis);
    let (near, far) = rect_distances(center, lo, hi);
    near < radius - 1e-12 && far > radius + 1e-12
}

/// Emptiness of the region `bounds ∩ cylinder constraints`. Exact with at most
/// one cylinder constraint, sampled with `cfg.empty_samples` points otherwise.
pub fn region_empty(bounds: &Aabb, cylinders: &[Constraint], cfg: &DecomposeConfig) -> bool {
    if (0..3).any(|a| !(bounds.extent(a) > 0.0)) {
        return true;
    }
    match cylinders {
        [] => false,
        [c] => {
            let (axis, center, radius) = cylinder_parts(&c.geom);
            let (lo, hi) = cross_section(bounds, axis);
            let (near, far) = rect_distances(center, lo, hi);
            match c.sign {
                Sign::Minus => near >= radius,
                Sign::Plus => far <= radius,
            }
        }
        _ => {
            let mut rng = SplitMix64::seed_from_u64(cfg.seed);
            !(0..cfg.empty_samples).any(|_| {
                let p = sample_in(&mut rng, bounds);
                cylinders.iter().all(|c| c.margin(&p) > 0.0)
            })
        }
    }
}

fn sample_in<R: Rng>(rng: &mut R, b: &Aabb) -> [f64; 3] {
    std::array::from_fn(|a| b.min[a] + b.extent(a) * rng.gen::<f64>())
}

fn region_rng(seed: u64, index: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn describe(constraints: &[Constraint]) -> String {
    constraints
        .iter()
        .map(|c| {
            let params: Vec<String> = c.geom.params().iter().map(|p| format!("{p}")).collect();
            format!("{}{}({})", c.sign.symbol(), c.geom.kind(), params.join(","))
        })
        .collect::<Vec<_>>()
        .join(" & ")
}

fn classify_grid_box(
    expr: &CsgExpr,
    arr: &Arrangement,
    slabs: &[Slab; 3],
    index: usize,
    cfg: &DecomposeConfig,
) -> Result<Vec<Vec<Constraint>>, DecomposeError> {
    let mut planes = Vec::new();
    let mut grid = Aabb::everything();
    for axis in Axis::ALL {
        let (lo, hi) = slabs[axis.index()];
        if let Some(offset) = lo {
            planes.push(Constraint::new(SurfaceGeom::Plane { axis, offset }, Sign::Plus));
            grid.min[axis.index()] = offset;
        }
        if let Some(offset) = hi {
            planes.push(Constraint::new(SurfaceGeom::Plane { axis, offset }, Sign::Minus));
            grid.max[axis.index()] = offset;
        }
    }
    let relevant: Vec<&SurfaceGeom> = arr
        .cylinders
        .iter()
        .filter(|c| wall_crosses(c, &grid))
        .collect();

    let mut cells = Vec::new();
    for mask in 0u64..(1 << relevant.len()) {
        let cyls: Vec<Constraint> = relevant
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let sign = if mask >> k & 1 == 1 {
                    Sign::Minus
                } else {
                    Sign::Plus
                };
                Constraint::new(**g, sign)
            })
            .collect();
        let mut constraints = planes.clone();
        constraints.extend(cyls.iter().copied());
        let region = CellGeom::new(constraints);
        // unbounded regions lie outside the bounded solid
        if !is_bounded(&region) {
            continue;
        }
        let bounds = bounding_box(&region)?;
        let region_index = (index as u64) << 16 | mask;
        let mut empty_cfg = cfg.clone();
        empty_cfg.seed = region_rng(cfg.seed, region_index).gen();
        if region_empty(&bounds, &cyls, &empty_cfg) {
            continue;
        }

        let mut rng = region_rng(cfg.seed, region_index);
        let mut samples = Vec::with_capacity(cfg.classify_samples);
        let center = bounds.center();
        if classify_point(&center, &region, &cfg.kernel) == PointClass::Inside {
            samples.push(center);
        }
        let attempts = cfg.empty_samples * cfg.classify_samples;
        for _ in 0..attempts {
            if samples.len() >= cfg.classify_samples {
                break;
            }
            let p = sample_in(&mut rng, &bounds);
            if classify_point(&p, &region, &cfg.kernel) == PointClass::Inside {
                samples.push(p);
            }
        }
        if samples.is_empty() {
            continue;
        }
        let inside = samples.iter().filter(|p| expr.contains(p)).count();
        if inside == samples.len() {
            cells.push(region.constraints);
        } else if inside != 0 {
            return Err(DecomposeError::MixedRegion {
                region: describe(&region.constraints),
            });
        }
    }
    Ok(cells)
}

/// Canonical term order: per axis lower then upper plane, then cylinders.
fn canonical_terms(mut cs: Vec<Constraint>) -> Vec<Constraint> {
    let rank = |c: &Constraint| match (c.geom, c.sign) {
        (SurfaceGeom::Plane { axis, .. }, Sign::Plus) => 2 * axis.index(),
        (SurfaceGeom::Plane { axis, .. }, Sign::Minus) => 2 * axis.index() + 1,
        (SurfaceGeom::Cylinder { .. }, _) => 6,
    };
    cs.sort_by(|a, b| {
        rank(a)
            .cmp(&rank(b))
            .then_with(|| surface_order(&a.geom, &b.geom))
            .then_with(|| a.sign.cmp(&b.sign))
    });
    cs
}

fn cell_order(a: &[Constraint], b: &[Constraint]) -> Ordering {
    let key = |cs: &[Constraint]| {
        let b = crate::geom::raw_bounds(&CellGeom::new(cs.to_vec()));
        let mut k: Vec<f64> = b.min.to_vec();
        k.extend(b.max);
        k
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| surface_order(&x.geom, &y.geom).then(x.sign.cmp(&y.sign)))
                .find(|o| o.is_ne())
                .unwrap_or(a.len().cmp(&b.len()))
        })
}

/// Assigns surface ids in surface order and cell ids in cell order.
fn assemble(cells: Vec<Vec<Constraint>>) -> Part {
    let mut geoms: Vec<SurfaceGeom> = Vec::new();
    for c in cells.iter().flatten() {
        if !geoms.iter().any(|g| g.approx_eq(&c.geom, SURFACE_MERGE_TOL)) {
            geoms.push(c.geom);
        }
    }
    geoms.sort_by(surface_order);
    let surfaces: Vec<Surface> = geoms
        .iter()
        .enumerate()
        .map(|(i, g)| SurfaceT {
            id: format!("s{}", i + 1),
            geom: *g,
        })
        .collect();
    let cells = cells
        .into_iter()
        .enumerate()
        .map(|(i, cs)| Cell {
            id: format!("c{}", i + 1),
            region: cs
                .iter()
                .map(|c| {
                    let k = geoms
                        .iter()
                        .position(|g| g.approx_eq(&c.geom, SURFACE_MERGE_TOL))
                        .expect("surface collected above");
                    SignedSurface::new(c.sign, surfaces[k].id.clone())
                })
                .collect(),
        })
        .collect();
    Part {
        id: "part".into(),
        surfaces,
        cells,
    }
}

/// Decomposes `expr` into a part of bounded, pairwise-disjoint cells.
pub fn decompose(expr: &CsgExpr, cfg: &DecomposeConfig) -> Result<Part, DecomposeError> {
    expr.validate().map_err(DecomposeError::InvalidExpr)?;
    if cfg.classify_samples == 0 {
        return Err(DecomposeError::InvalidExpr(
            "classify_samples must be at least 1".into(),
        ));
    }
    let arr = Arrangement::new(expr);
    let regions: Vec<Vec<Vec<Constraint>>> = arr
        .grid_boxes()
        .par_iter()
        .enumerate()
        .map(|(i, slabs)| classify_grid_box(expr, &arr, slabs, i, cfg))
        .collect::<Result<_, _>>()?;
    let mut cells: Vec<Vec<Constraint>> = regions
        .into_iter()
        .flatten()
        .map(canonical_terms)
        .collect();
    if cells.is_empty() {
        return Err(DecomposeError::EmptySolid);
    }
    cells.sort_by(|a, b| cell_order(a, b));
    if cfg.merge {
        merge::merge_cells(&mut cells);
        for c in cells.iter_mut() {
            *c = canonical_terms(std::mem::take(c));
        }
        cells.sort_by(|a, b| cell_order(a, b));
    }
    let part = assemble(cells);
    let mut kernel = cfg.kernel.clone();
    kernel.seed = cfg.seed;
    part.validate(&kernel)?;
    Ok(part)
}

/// Fraction of `n` seeded points in the expression's inflated bounding box on
/// which `expr` and the union of `part`'s cells agree. Points within
/// `KernelConfig::default().boundary_eps` of any surface are skipped.
pub fn verify_decomposition(
    expr: &CsgExpr,
    part: &Part,
    n: usize,
    seed: u64,
) -> Result<f64, GeomError> {
    let cells = part.resolve_all()?;
    let eps = KernelConfig::default().boundary_eps;
    let mut surfaces = expr.surfaces();
    surfaces.extend(part.surfaces.iter().map(|s| s.geom));
    let mut b = expr.bounding_box();
    for a in 0..3 {
        let pad = 0.05 * b.extent(a);
        b.min[a] -= pad;
        b.max[a] += pad;
    }
    let cfg = KernelConfig::default();
    let mut rng = SplitMix64::seed_from_u64(seed);
    let (mut compared, mut agreed) = (0usize, 0usize);
    for _ in 0..n {
        let p = sample_in(&mut rng, &b);
        if surfaces.iter().any(|s| s.margin(Sign::Plus, &p).abs() <= eps) {
            continue;
        }
        let in_part = cells
            .iter()
            .any(|c| classify_point(&p, c, &cfg) == PointClass::Inside);
        compared += 1;
        if in_part == expr.contains(&p) {
            agreed += 1;
        }
    }
    Ok(if compared == 0 {
        1.0
    } else {
        agreed as f64 / compared as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::cells_overlap;

    fn unit_box() -> CsgExpr {
        CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)
    }

    fn no_merge() -> DecomposeConfig {
        DecomposeConfig {
            merge: false,
            ..Default::default()
        }
    }

    /// Independent oracle: enumerate the plane grid and classify each box
    /// center against the expression (plane-only expressions).
    fn grid_oracle(expr: &CsgExpr) -> usize {
        let mut offs: [Vec<f64>; 3] = Default::default();
        for s in expr.surfaces() {
            if let SurfaceGeom::Plane { axis, offset } = s {
                offs[axis.index()].push(offset);
            }
        }
        for o in offs.iter_mut() {
            o.sort_by(f64::total_cmp);
            o.dedup();
        }
        let mut n = 0;
        for xs in offs[0].windows(2) {
            for ys in offs[1].windows(2) {
                for zs in offs[2].windows(2) {
                    let c = [(xs[0] + xs[1]) / 2.0, (ys[0] + ys[1]) / 2.0, (zs[0] + zs[1]) / 2.0];
                    n += expr.contains(&c) as usize;
                }
            }
        }
        n
    }

    #[test]
    fn single_box() {
        let part = decompose(&unit_box(), &DecomposeConfig::default()).unwrap();
        assert_eq!(part.cells.len(), 1);
        assert_eq!(part.surfaces.len(), 6);
    }

    #[test]
    fn stacked_boxes_merge() {
        let e = unit_box().union(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 1.0, 2.0));
        assert_eq!(grid_oracle(&e), 2);
        assert_eq!(decompose(&e, &no_merge()).unwrap().cells.len(), 2);
        let merged = decompose(&e, &DecomposeConfig::default()).unwrap();
        assert_eq!(merged.cells.len(), 1);
        // the shared plane z=1 is pruned
        assert_eq!(merged.surfaces.len(), 6);
    }

    #[test]
    fn box_minus_hole() {
        let e = unit_box().difference(CsgExpr::cylinder(Axis::Z, 0.5, 0.5, 0.2, -1.0, 2.0));
        let part = decompose(&e, &no_merge()).unwrap();
        assert_eq!(part.cells.len(), 1);
        let cyl = part
            .surfaces
            .iter()
            .find(|s| !s.geom.kind().is_plane())
            .unwrap();
        let term = part.cells[0]
            .region
            .iter()
            .find(|t| t.surface == cyl.id)
            .unwrap();
        assert_eq!(term.sign, Sign::Plus);
        // cap planes at z=-1 and z=2 only bound outside regions and are pruned
        assert_eq!(part.surfaces.len(), 7);
    }

    #[test]
    fn l_shape() {
        let e = CsgExpr::cuboid(0.0, 2.0, 0.0, 1.0, 0.0, 1.0)
            .union(CsgExpr::cuboid(0.0, 1.0, 0.0, 1.0, 1.0, 2.0));
        assert_eq!(grid_oracle(&e), 3);
        let part = decompose(&e, &no_merge()).unwrap();
        assert_eq!(part.cells.len(), 3);
        let merged = decompose(&e, &DecomposeConfig::default()).unwrap();
        assert_eq!(merged.cells.len(), 2);
    }

    #[test]
    fn lone_cylinder_needs_no_side_planes() {
        let e = CsgExpr::cylinder(Axis::Y, 0.0, 0.0, 1.0, 0.0, 3.0);
        let part = decompose(&e, &DecomposeConfig::default()).unwrap();
        assert_eq!(part.cells.len(), 1);
        assert_eq!(part.surfaces.len(), 3);
        assert!(verify_decomposition(&e, &part, 20_000, 1).unwrap() > 0.999);
    }

    #[test]
    fn empty_solid() {
        let e = unit_box().difference(CsgExpr::cuboid(-1.0, 2.0, -1.0, 2.0, -1.0, 2.0));
        assert!(matches!(
            decompose(&e, &DecomposeConfig::default()),
            Err(DecomposeError::EmptySolid)
        ));
    }

    #[test]
    fn region_empty_examples() {
        let b = Aabb::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let cyl = |x, y, r, sign| {
            Constraint::new(
                SurfaceGeom::Cylinder {
                    axis: Axis::Z,
                    center: [x, y],
                    radius: r,
                },
                sign,
            )
        };
        let cfg = DecomposeConfig::default();
        assert!(region_empty(&b, &[cyl(5.0, 5.0, 1.0, Sign::Minus)], &cfg));
        assert!(region_empty(&b, &[cyl(0.5, 0.5, 10.0, Sign::Plus)], &cfg));
        assert!(!region_empty(&b, &[cyl(0.5, 0.5, 0.2, Sign::Minus)], &cfg));
        // sampled path: inside one circle and outside a concentric larger one
        assert!(region_empty(
            &b,
            &[cyl(0.5, 0.5, 0.2, Sign::Minus), cyl(0.5, 0.5, 0.3, Sign::Plus)],
            &cfg
        ));
        assert!(!region_empty(
            &b,
            &[cyl(0.5, 0.5, 0.4, Sign::Minus), cyl(0.5, 0.5, 0.2, Sign::Plus)],
            &cfg
        ));
    }

    #[test]
    fn dropping_a_cell_lowers_agreement_by_its_volume() {
        let e = unit_box().union(CsgExpr::cuboid(1.0, 3.0, 0.0, 1.0, 0.0, 1.0));
        let full = decompose(&e, &no_merge()).unwrap();
        assert_eq!(full.cells.len(), 2);
        assert_eq!(verify_decomposition(&e, &full, 10_000, 3).unwrap(), 1.0);
        let mut partial = full.clone();
        partial.cells.remove(0);
        // the dropped unit box is 1/(3.3*1.1*1.1) of the sampled inflated box
        let expected = 1.0 - 1.0 / (3.3 * 1.1 * 1.1);
        let got = verify_decomposition(&e, &partial, 100_000, 3).unwrap();
        assert!((got - expected).abs() < 0.01, "{got} vs {expected}");
    }

    #[test]
    fn outputs_are_disjoint_and_deterministic() {
        let e = CsgExpr::cuboid(0.0, 4.0, 0.0, 2.0, 0.0, 0.5)
            .difference(CsgExpr::cylinder(Axis::Z, 1.0, 1.0, 0.4, -1.0, 1.0))
            .difference(CsgExpr::cylinder(Axis::Z, 3.0, 1.0, 0.4, -1.0, 1.0))
            .union(CsgExpr::cylinder(Axis::Z, 2.0, 1.0, 0.5, 0.5, 1.5));
        let a = decompose(&e, &DecomposeConfig::default()).unwrap();
        let b = decompose(&e, &DecomposeConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let cells = a.resolve_all().unwrap();
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                assert!(!cells_overlap(&cells[i], &cells[j], &KernelConfig::default()).unwrap());
            }
        }
        assert!(verify_decomposition(&e, &a, 50_000, 9).unwrap() >= 0.999);
    }
}
