//! Half-space cell decomposition and script tooling for CSG completion datasets.
//!
//! The pipeline turns axis-aligned CSG solids into parts made of bounded
//! half-space cells, orders the cells into connected build sequences, splits
//! them into input/output script pairs, and scores generated completions.
//!
//! The geometry kernel and renderer are generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix the scalar to `f64`, which is what the data
//! formats use.

pub mod annotate;
pub mod config;
pub mod dataset;
pub mod decompose;
pub mod dedup;
pub mod geom;
pub mod metrics;
pub mod render;
pub mod scalar;
pub mod script;
pub mod sequence;

pub use render::ViewImage;
pub use scalar::Scalar;

pub type Surface = geom::Surface<f64>;
pub type SurfaceGeom = geom::SurfaceGeom<f64>;
pub type Constraint = geom::Constraint<f64>;
pub type CellGeom = geom::CellGeom<f64>;
pub type Aabb = geom::Aabb<f64>;
pub type Part = geom::Part<f64>;

pub type Part32 = geom::Part<f32>;
pub type CellGeom32 = geom::CellGeom<f32>;
