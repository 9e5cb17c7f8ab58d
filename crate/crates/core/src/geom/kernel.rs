use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use super::{Aabb, CellGeom, Constraint, GeomError, SurfaceGeom, SURFACE_MERGE_TOL};
use crate::scalar::Scalar;

/// Tolerances and sample budgets for the sampled predicates.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub boundary_eps: f64,
    pub face_eps: f64,
    pub mc_samples_overlap: usize,
    pub mc_samples_face: usize,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            boundary_eps: 1e-9,
            face_eps: 1e-6,
            mc_samples_face: 2048,
            mc_samples_overlap: 4096,
            seed: 0,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.boundary_eps > 0.0 && self.face_eps > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.mc_samples_face == 0 || self.mc_samples_overlap == 0 {
            return Err("sample counts must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointClass {
    Inside,
    Outside,
    Boundary,
}

pub fn classify_point<T: Scalar>(p: &[T; 3], cell: &CellGeom<T>, cfg: &KernelConfig) -> PointClass {
    classify_with_eps(p, &cell.constraints, T::lit(cfg.boundary_eps))
}

fn classify_with_eps<T: Scalar>(p: &[T; 3], constraints: &[Constraint<T>], eps: T) -> PointClass {
    let mut inside = true;
    for c in constraints {
        let m = c.margin(p);
        if m < -eps {
            return PointClass::Outside;
        }
        if m <= eps {
            inside = false;
        }
    }
    if inside {
        PointClass::Inside
    } else {
        PointClass::Boundary
    }
}

/// Per-axis lower/upper bound flags implied by the constraints.
fn bound_flags<T: Scalar>(cell: &CellGeom<T>) -> [[bool; 2]; 3] {
    use super::Sign;
    let mut flags = [[false; 2]; 3];
    for c in &cell.constraints {
        match (c.geom, c.sign) {
            (SurfaceGeom::Plane { axis, .. }, Sign::Plus) => flags[axis.index()][0] = true,
            (SurfaceGeom::Plane { axis, .. }, Sign::Minus) => flags[axis.index()][1] = true,
            (SurfaceGeom::Cylinder { axis, .. }, Sign::Minus) => {
                let (u, v) = axis.perpendicular();
                flags[u.index()] = [true, true];
                flags[v.index()] = [true, true];
            }
            (SurfaceGeom::Cylinder { .. }, Sign::Plus) => {}
        }
    }
    flags
}

pub fn is_bounded<T: Scalar>(cell: &CellGeom<T>) -> bool {
    bound_flags(cell).iter().all(|f| f[0] && f[1])
}

/// Tight analytic box of the plane bounds intersected with inside-cylinder
/// extents. Components may be infinite; callers that need a finite box use
/// [`bounding_box`].
pub(crate) fn raw_bounds<T: Scalar>(cell: &CellGeom<T>) -> Aabb<T> {
    use super::Sign;
    let mut b = Aabb::<T>::everything();
    for c in &cell.constraints {
        match (c.geom, c.sign) {
            (SurfaceGeom::Plane { axis, offset }, Sign::Plus) => {
                let a = axis.index();
                b.min[a] = b.min[a].max(offset);
            }
            (SurfaceGeom::Plane { axis, offset }, Sign::Minus) => {
                let a = axis.index();
                b.max[a] = b.max[a].min(offset);
            }
            (
                SurfaceGeom::Cylinder {
                    axis,
                    center,
                    radius,
                },
                Sign::Minus,
            ) => {
                let (u, v) = axis.perpendicular();
                for (k, ax) in [u, v].into_iter().enumerate() {
                    let a = ax.index();
                    b.min[a] = b.min[a].max(center[k] - radius);
                    b.max[a] = b.max[a].min(center[k] + radius);
                }
            }
            (SurfaceGeom::Cylinder { .. }, Sign::Plus) => {}
        }
    }
    b
}

pub fn bounding_box<T: Scalar>(cell: &CellGeom<T>) -> Result<Aabb<T>, GeomError> {
    if !is_bounded(cell) {
        return Err(GeomError::Unbounded);
    }
    Ok(raw_bounds(cell))
}

fn require_bounded<T: Scalar>(cell: &CellGeom<T>) -> Result<Aabb<T>, GeomError> {
    bounding_box(cell).map_err(|_| GeomError::InvalidCell("cell is unbounded".into()))
}

fn sample_in<T: Scalar, R: Rng>(rng: &mut R, b: &Aabb<T>) -> [T; 3] {
    std::array::from_fn(|a| b.min[a] + b.extent(a) * T::lit(rng.gen::<f64>()))
}

/// True if the cell contains at least one strictly interior point.
/// Exact for plane-only cells, sampled otherwise.
pub fn has_interior<T: Scalar>(cell: &CellGeom<T>, cfg: &KernelConfig) -> bool {
    let Ok(b) = bounding_box(cell) else {
        return false;
    };
    let eps = T::lit(cfg.boundary_eps);
    if (0..3).any(|a| b.extent(a) <= eps) {
        return false;
    }
    if cell.is_plane_only() {
        return true;
    }
    if classify_point(&b.center(), cell, cfg) == PointClass::Inside {
        return true;
    }
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    (0..cfg.mc_samples_overlap)
        .any(|_| classify_point(&sample_in(&mut rng, &b), cell, cfg) == PointClass::Inside)
}

/// True iff the interiors of `a` and `b` intersect.
pub fn cells_overlap<T: Scalar>(
    a: &CellGeom<T>,
    b: &CellGeom<T>,
    cfg: &KernelConfig,
) -> Result<bool, GeomError> {
    let ba = require_bounded(a)?;
    let bb = require_bounded(b)?;
    let inter = ba.intersection(&bb);
    let eps = T::lit(cfg.boundary_eps);
    if (0..3).any(|ax| inter.extent(ax) <= eps) {
        return Ok(false);
    }
    if a.is_plane_only() && b.is_plane_only() {
        return Ok(true);
    }
    let inside_both = |p: &[T; 3]| {
        classify_point(p, a, cfg) == PointClass::Inside
            && classify_point(p, b, cfg) == PointClass::Inside
    };
    if inside_both(&inter.center()) {
        return Ok(true);
    }
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    Ok((0..cfg.mc_samples_overlap).any(|_| inside_both(&sample_in(&mut rng, &inter))))
}

/// True iff `a` and `b` share a face of positive area: some surface appears in
/// both with opposite signs and sampled points on it satisfy the remaining
/// constraints of both cells.
pub fn cells_adjacent<T: Scalar>(
    a: &CellGeom<T>,
    b: &CellGeom<T>,
    cfg: &KernelConfig,
) -> Result<bool, GeomError> {
    let ba = require_bounded(a)?;
    let bb = require_bounded(b)?;
    let face_eps = T::lit(cfg.face_eps);
    let inter = ba.intersection(&bb);
    if (0..3).any(|ax| inter.extent(ax) < -face_eps) {
        return Ok(false);
    }
    let tol = T::lit(SURFACE_MERGE_TOL);
    for (i, ca) in a.constraints.iter().enumerate() {
        for (j, cb) in b.constraints.iter().enumerate() {
            if ca.sign == cb.sign || !ca.geom.approx_eq(&cb.geom, tol) {
                continue;
            }
            let rest: Vec<Constraint<T>> = a
                .constraints
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .chain(b.constraints.iter().enumerate().filter(|(k, _)| *k != j))
                .map(|(_, c)| *c)
                .collect();
            if face_contact(&ca.geom, &rest, &inter, cfg) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn face_contact<T: Scalar>(
    surface: &SurfaceGeom<T>,
    rest: &[Constraint<T>],
    region: &Aabb<T>,
    cfg: &KernelConfig,
) -> bool {
    let face_eps = T::lit(cfg.face_eps);
    let satisfied = |p: &[T; 3]| rest.iter().all(|c| c.margin(p) >= -face_eps);
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    match *surface {
        SurfaceGeom::Plane { axis, offset } => {
            let (u, v) = axis.perpendicular();
            if region.extent(u.index()) <= face_eps || region.extent(v.index()) <= face_eps {
                return false;
            }
            (0..cfg.mc_samples_face).any(|_| {
                let mut p = sample_in(&mut rng, region);
                p[axis.index()] = offset;
                satisfied(&p)
            })
        }
        SurfaceGeom::Cylinder {
            axis,
            center,
            radius,
        } => {
            let a = axis.index();
            if region.extent(a) <= face_eps {
                return false;
            }
            let (u, v) = axis.perpendicular();
            let n = cfg.mc_samples_face;
            let tau = T::PI() + T::PI();
            (0..n).any(|i| {
                let jitter: f64 = rng.gen();
                let theta = tau * T::lit((i as f64 + jitter) / n as f64);
                let mut p = [T::zero(); 3];
                p[a] = region.min[a] + region.extent(a) * T::lit(rng.gen::<f64>());
                p[u.index()] = center[0] + radius * theta.cos();
                p[v.index()] = center[1] + radius * theta.sin();
                satisfied(&p)
            })
        }
    }
}

/// True iff the face-adjacency graph over `cells` is connected. An empty or
/// single-cell list is connected.
pub fn all_connected<T: Scalar>(cells: &[CellGeom<T>], cfg: &KernelConfig) -> Result<bool, GeomError> {
    for c in cells {
        require_bounded(c)?;
    }
    if cells.len() <= 1 {
        return Ok(true);
    }
    let mut reached = vec![false; cells.len()];
    reached[0] = true;
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        for j in 0..cells.len() {
            if !reached[j] && cells_adjacent(&cells[i], &cells[j], cfg)? {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    Ok(reached.into_iter().all(|r| r))
}
