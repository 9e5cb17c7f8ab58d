//! Axis-aligned surfaces, half-space cells and the predicates over them.
//!
//! A [`Part`] stores surfaces and cells by id, the way they appear in JSON and
//! scripts. Kernel predicates work on [`CellGeom`], a cell whose surface
//! references have been resolved into concrete [`Constraint`]s; use
//! [`Part::resolve`] to get one.

mod json;
mod kernel;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use kernel::{
    all_connected, bounding_box, cells_adjacent, cells_overlap, classify_point, has_interior,
    is_bounded, KernelConfig, PointClass,
};
pub(crate) use kernel::raw_bounds;

/// Tolerance under which two surfaces of the same kind are considered identical.
pub const SURFACE_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("cell {cell} references undefined surface {surface}")]
    Reference { cell: String, surface: String },
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("cell is unbounded")]
    Unbounded,
    #[error("invalid surface {id}: {reason}")]
    InvalidSurface { id: String, reason: String },
    #[error("invalid part {id}: {reason}")]
    InvalidPart { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    /// The two axes perpendicular to `self`, in increasing order.
    pub fn perpendicular(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// The six surface kinds the pipeline supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurfaceKind {
    PlaneX,
    PlaneY,
    PlaneZ,
    CylX,
    CylY,
    CylZ,
}

impl SurfaceKind {
    pub const ALL: [SurfaceKind; 6] = [
        SurfaceKind::PlaneX,
        SurfaceKind::PlaneY,
        SurfaceKind::PlaneZ,
        SurfaceKind::CylX,
        SurfaceKind::CylY,
        SurfaceKind::CylZ,
    ];

    /// Name used in Part JSON and in scripts.
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::PlaneX => "XPlane",
            SurfaceKind::PlaneY => "YPlane",
            SurfaceKind::PlaneZ => "ZPlane",
            SurfaceKind::CylX => "XCylinder",
            SurfaceKind::CylY => "YCylinder",
            SurfaceKind::CylZ => "ZCylinder",
        }
    }

    pub fn from_name(name: &str) -> Option<SurfaceKind> {
        SurfaceKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Parameter names, in serialization order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            SurfaceKind::PlaneX => &["x0"],
            SurfaceKind::PlaneY => &["y0"],
            SurfaceKind::PlaneZ => &["z0"],
            SurfaceKind::CylX => &["y0", "z0", "r"],
            SurfaceKind::CylY => &["x0", "z0", "r"],
            SurfaceKind::CylZ => &["x0", "y0", "r"],
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            SurfaceKind::PlaneX | SurfaceKind::CylX => Axis::X,
            SurfaceKind::PlaneY | SurfaceKind::CylY => Axis::Y,
            SurfaceKind::PlaneZ | SurfaceKind::CylZ => Axis::Z,
        }
    }

    pub fn is_plane(self) -> bool {
        matches!(
            self,
            SurfaceKind::PlaneX | SurfaceKind::PlaneY | SurfaceKind::PlaneZ
        )
    }

    pub fn plane(axis: Axis) -> SurfaceKind {
        [SurfaceKind::PlaneX, SurfaceKind::PlaneY, SurfaceKind::PlaneZ][axis.index()]
    }

    pub fn cylinder(axis: Axis) -> SurfaceKind {
        [SurfaceKind::CylX, SurfaceKind::CylY, SurfaceKind::CylZ][axis.index()]
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometry of a surface, independent of its id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceGeom<T> {
    /// The plane `coord(axis) == offset`.
    Plane { axis: Axis, offset: T },
    /// Infinite cylinder along `axis`; `center` is given in the two
    /// perpendicular axes in increasing axis order.
    Cylinder { axis: Axis, center: [T; 2], radius: T },
}

impl<T: Scalar> SurfaceGeom<T> {
    pub fn kind(&self) -> SurfaceKind {
        match *self {
            SurfaceGeom::Plane { axis, .. } => SurfaceKind::plane(axis),
            SurfaceGeom::Cylinder { axis, .. } => SurfaceKind::cylinder(axis),
        }
    }

    pub fn axis(&self) -> Axis {
        match *self {
            SurfaceGeom::Plane { axis, .. } | SurfaceGeom::Cylinder { axis, .. } => axis,
        }
    }

    /// Parameters in [`SurfaceKind::param_names`] order.
    pub fn params(&self) -> Vec<T> {
        match *self {
            SurfaceGeom::Plane { offset, .. } => vec![offset],
            SurfaceGeom::Cylinder { center, radius, .. } => vec![center[0], center[1], radius],
        }
    }

    pub fn from_params(kind: SurfaceKind, params: &[T]) -> Option<Self> {
        let axis = kind.axis();
        match (kind.is_plane(), params) {
            (true, [offset]) => Some(SurfaceGeom::Plane { axis, offset: *offset }),
            (false, [c0, c1, r]) => Some(SurfaceGeom::Cylinder {
                axis,
                center: [*c0, *c1],
                radius: *r,
            }),
            _ => None,
        }
    }

    /// Checks finiteness and positive radius.
    pub fn validate(&self) -> Result<(), String> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err("non-finite parameter".into());
        }
        if let SurfaceGeom::Cylinder { radius, .. } = *self {
            if radius <= T::zero() {
                return Err(format!("radius must be positive, got {radius}"));
            }
        }
        Ok(())
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.kind() == other.kind()
            && self
                .params()
                .iter()
                .zip(other.params())
                .all(|(a, b)| (*a - b).abs() <= tol)
    }

    /// Signed distance-like margin of `p` on the given side of the surface.
    /// Positive means the side is satisfied.
    pub fn margin(&self, sign: Sign, p: &[T; 3]) -> T {
        let raw = match *self {
            SurfaceGeom::Plane { axis, offset } => p[axis.index()] - offset,
            SurfaceGeom::Cylinder {
                axis,
                center,
                radius,
            } => {
                let (u, v) = axis.perpendicular();
                let du = p[u.index()] - center[0];
                let dv = p[v.index()] - center[1];
                (du * du + dv * dv).sqrt() - radius
            }
        };
        match sign {
            Sign::Plus => raw,
            Sign::Minus => -raw,
        }
    }

    pub fn cast<U: Scalar>(&self) -> SurfaceGeom<U> {
        let c = |v: T| U::lit(v.as_f64());
        match *self {
            SurfaceGeom::Plane { axis, offset } => SurfaceGeom::Plane {
                axis,
                offset: c(offset),
            },
            SurfaceGeom::Cylinder {
                axis,
                center,
                radius,
            } => SurfaceGeom::Cylinder {
                axis,
                center: [c(center[0]), c(center[1])],
                radius: c(radius),
            },
        }
    }
}

/// Side of a surface. For planes `Plus` is the side with larger coordinate;
/// for cylinders `Minus` is the inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface<T> {
    pub id: String,
    pub geom: SurfaceGeom<T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignedSurface {
    pub sign: Sign,
    pub surface: String,
}

impl SignedSurface {
    pub fn new(sign: Sign, surface: impl Into<String>) -> Self {
        SignedSurface {
            sign,
            surface: surface.into(),
        }
    }
}

impl fmt::Display for SignedSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.symbol(), self.surface)
    }
}

/// A conjunction of signed surface references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: String,
    pub region: Vec<SignedSurface>,
}

impl Cell {
    pub fn surface_ids(&self) -> impl Iterator<Item = &str> {
        self.region.iter().map(|t| t.surface.as_str())
    }
}

/// One resolved half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint<T> {
    pub geom: SurfaceGeom<T>,
    pub sign: Sign,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(geom: SurfaceGeom<T>, sign: Sign) -> Self {
        Constraint { geom, sign }
    }

    pub fn margin(&self, p: &[T; 3]) -> T {
        self.geom.margin(self.sign, p)
    }
}

/// A cell with its surface references resolved to geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeom<T> {
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> CellGeom<T> {
    pub fn new(constraints: Vec<Constraint<T>>) -> Self {
        CellGeom { constraints }
    }

    pub fn is_plane_only(&self) -> bool {
        self.constraints.iter().all(|c| c.geom.kind().is_plane())
    }

    pub fn cast<U: Scalar>(&self) -> CellGeom<U> {
        CellGeom {
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint::new(c.geom.cast(), c.sign))
                .collect(),
        }
    }
}

/// Axis-aligned box. Bounds may be infinite while a cell is being bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: [T; 3],
    pub max: [T; 3],
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min: [T; 3], max: [T; 3]) -> Self {
        Aabb { min, max }
    }

    pub fn everything() -> Self {
        Aabb {
            min: [T::neg_infinity(); 3],
            max: [T::infinity(); 3],
        }
    }

    pub fn extent(&self, axis: usize) -> T {
        self.max[axis] - self.min[axis]
    }

    pub fn max_extent(&self) -> T {
        (0..3).map(|a| self.extent(a)).fold(T::zero(), T::max)
    }

    pub fn center(&self) -> [T; 3] {
        let two = T::one() + T::one();
        std::array::from_fn(|a| (self.min[a] + self.max[a]) / two)
    }

    pub fn diagonal(&self) -> T {
        (0..3)
            .map(|a| self.extent(a) * self.extent(a))
            .fold(T::zero(), |s, v| s + v)
            .sqrt()
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Aabb {
            min: std::array::from_fn(|a| self.min[a].max(other.min[a])),
            max: std::array::from_fn(|a| self.max[a].min(other.max[a])),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Aabb {
            min: std::array::from_fn(|a| self.min[a].min(other.min[a])),
            max: std::array::from_fn(|a| self.max[a].max(other.max[a])),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.min.iter().chain(self.max.iter()).all(|v| v.is_finite())
    }

    pub fn contains(&self, p: &[T; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

/// A solid made of surfaces and cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Part<T> {
    pub id: String,
    pub surfaces: Vec<Surface<T>>,
    pub cells: Vec<Cell>,
}

impl<T: Scalar> Part<T> {
    /// Builds a part and checks every part invariant, including pairwise
    /// non-overlap of cells.
    pub fn new(
        id: impl Into<String>,
        surfaces: Vec<Surface<T>>,
        cells: Vec<Cell>,
        cfg: &KernelConfig,
    ) -> Result<Self, GeomError> {
        let part = Part {
            id: id.into(),
            surfaces,
            cells,
        };
        part.validate(cfg)?;
        Ok(part)
    }

    pub fn surface(&self, id: &str) -> Option<&Surface<T>> {
        self.surfaces.iter().find(|s| s.id == id)
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn cell_index(&self, id: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.id == id)
    }

    /// Resolves the cell's surface references against this part.
    pub fn resolve(&self, cell: &Cell) -> Result<CellGeom<T>, GeomError> {
        let by_id: HashMap<&str, &SurfaceGeom<T>> = self
            .surfaces
            .iter()
            .map(|s| (s.id.as_str(), &s.geom))
            .collect();
        resolve_region(&cell.id, &cell.region, |id| by_id.get(id).map(|g| **g))
    }

    pub fn resolve_all(&self) -> Result<Vec<CellGeom<T>>, GeomError> {
        self.cells.iter().map(|c| self.resolve(c)).collect()
    }

    /// Union of the cell bounding boxes.
    pub fn bounding_box(&self) -> Result<Aabb<T>, GeomError> {
        let mut acc: Option<Aabb<T>> = None;
        for cell in self.resolve_all()? {
            let b = bounding_box(&cell)?;
            acc = Some(match acc {
                Some(a) => a.union(&b),
                None => b,
            });
        }
        acc.ok_or_else(|| GeomError::InvalidPart {
            id: self.id.clone(),
            reason: "part has no cells".into(),
        })
    }

    pub fn validate(&self, cfg: &KernelConfig) -> Result<(), GeomError> {
        let invalid = |reason: String| GeomError::InvalidPart {
            id: self.id.clone(),
            reason,
        };
        let mut seen = BTreeSet::new();
        for s in &self.surfaces {
            if !seen.insert(s.id.as_str()) {
                return Err(invalid(format!("duplicate surface id {}", s.id)));
            }
            s.geom.validate().map_err(|reason| GeomError::InvalidSurface {
                id: s.id.clone(),
                reason,
            })?;
        }
        let mut seen_cells = BTreeSet::new();
        let mut used = BTreeSet::new();
        let mut geoms = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            if !seen_cells.insert(cell.id.as_str()) {
                return Err(invalid(format!("duplicate cell id {}", cell.id)));
            }
            check_region_terms(&cell.id, &cell.region)?;
            let g = self.resolve(cell)?;
            if !is_bounded(&g) {
                return Err(GeomError::InvalidCell(format!("{} is unbounded", cell.id)));
            }
            if !has_interior(&g, cfg) {
                return Err(GeomError::InvalidCell(format!(
                    "{} has an empty interior",
                    cell.id
                )));
            }
            used.extend(cell.surface_ids());
            geoms.push(g);
        }
        if let Some(s) = self.surfaces.iter().find(|s| !used.contains(s.id.as_str())) {
            return Err(invalid(format!("surface {} is not used by any cell", s.id)));
        }
        for i in 0..geoms.len() {
            for j in i + 1..geoms.len() {
                if cells_overlap(&geoms[i], &geoms[j], cfg)? {
                    return Err(invalid(format!(
                        "cells {} and {} overlap",
                        self.cells[i].id, self.cells[j].id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rejects empty regions and repeated same-sign terms.
pub fn check_region_terms(cell: &str, region: &[SignedSurface]) -> Result<(), GeomError> {
    if region.is_empty() {
        return Err(GeomError::InvalidCell(format!("{cell} has an empty region")));
    }
    let mut seen = BTreeSet::new();
    for t in region {
        if !seen.insert((t.sign, t.surface.as_str())) {
            return Err(GeomError::InvalidCell(format!(
                "{cell} references {t} twice"
            )));
        }
    }
    Ok(())
}

/// Resolves region terms through `lookup`.
pub fn resolve_region<T: Scalar>(
    cell: &str,
    region: &[SignedSurface],
    lookup: impl Fn(&str) -> Option<SurfaceGeom<T>>,
) -> Result<CellGeom<T>, GeomError> {
    region
        .iter()
        .map(|t| {
            lookup(&t.surface)
                .map(|g| Constraint::new(g, t.sign))
                .ok_or_else(|| GeomError::Reference {
                    cell: cell.to_string(),
                    surface: t.surface.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(CellGeom::new)
}
