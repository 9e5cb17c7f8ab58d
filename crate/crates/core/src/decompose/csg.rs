use serde::{Deserialize, Serialize};

use crate::geom::Axis;
use crate::SurfaceGeom;
use crate::Aabb;

/// Boolean tree over axis-aligned boxes and finite cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExpr", into = "RawExpr")]
pub enum CsgExpr {
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// Finite cylinder: lateral surface along `axis` plus two cap planes at
    /// `h[0]` and `h[1]`.
    Cylinder {
        axis: Axis,
        center: [f64; 2],
        radius: f64,
        h: [f64; 2],
    },
    Union(Box<CsgExpr>, Box<CsgExpr>),
    Intersect(Box<CsgExpr>, Box<CsgExpr>),
    Difference(Box<CsgExpr>, Box<CsgExpr>),
}

impl CsgExpr {
    pub fn cuboid(x0: f64, x1: f64, y0: f64, y1: f64, z0: f64, z1: f64) -> Self {
        CsgExpr::Box {
            min: [x0, y0, z0],
            max: [x1, y1, z1],
        }
    }

    pub fn cylinder(axis: Axis, c1: f64, c2: f64, radius: f64, h0: f64, h1: f64) -> Self {
        CsgExpr::Cylinder {
            axis,
            center: [c1, c2],
            radius,
            h: [h0, h1],
        }
    }

    pub fn union(self, other: CsgExpr) -> Self {
        CsgExpr::Union(Box::new(self), Box::new(other))
    }

    pub fn intersect(self, other: CsgExpr) -> Self {
        CsgExpr::Intersect(Box::new(self), Box::new(other))
    }

    pub fn difference(self, other: CsgExpr) -> Self {
        CsgExpr::Difference(Box::new(self), Box::new(other))
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |vs: &[f64]| vs.iter().all(|v| v.is_finite());
        match self {
            CsgExpr::Box { min, max } => {
                if !finite(min) || !finite(max) {
                    return Err("box bounds must be finite".into());
                }
                if (0..3).any(|a| min[a] >= max[a]) {
                    return Err(format!("box bounds must be increasing: {min:?} {max:?}"));
                }
                Ok(())
            }
            CsgExpr::Cylinder {
                center, radius, h, ..
            } => {
                if !finite(center) || !finite(h) || !radius.is_finite() {
                    return Err("cylinder parameters must be finite".into());
                }
                if *radius <= 0.0 {
                    return Err(format!("cylinder radius must be positive, got {radius}"));
                }
                if h[0] >= h[1] {
                    return Err(format!("cylinder height range must be increasing: {h:?}"));
                }
                Ok(())
            }
            CsgExpr::Union(l, r) | CsgExpr::Intersect(l, r) | CsgExpr::Difference(l, r) => {
                l.validate()?;
                r.validate()
            }
        }
    }

    /// Point membership. Boundaries are excluded; callers only query points
    /// away from primitive surfaces.
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        match self {
            CsgExpr::Box { min, max } => (0..3).all(|a| p[a] > min[a] && p[a] < max[a]),
            CsgExpr::Cylinder {
                axis,
                center,
                radius,
                h,
            } => {
                let (u, v) = axis.perpendicular();
                let a = axis.index();
                let du = p[u.index()] - center[0];
                let dv = p[v.index()] - center[1];
                p[a] > h[0] && p[a] < h[1] && du * du + dv * dv < radius * radius
            }
            CsgExpr::Union(l, r) => l.contains(p) || r.contains(p),
            CsgExpr::Intersect(l, r) => l.contains(p) && r.contains(p),
            CsgExpr::Difference(l, r) => l.contains(p) && !r.contains(p),
        }
    }

    /// Conservative bounding box of the solid.
    pub fn bounding_box(&self) -> Aabb {
        match self {
            CsgExpr::Box { min, max } => Aabb::new(*min, *max),
            CsgExpr::Cylinder {
                axis,
                center,
                radius,
                h,
            } => {
                let mut min = [0.0; 3];
                let mut max = [0.0; 3];
                let (u, v) = axis.perpendicular();
                min[axis.index()] = h[0];
                max[axis.index()] = h[1];
                for (k, ax) in [u, v].into_iter().enumerate() {
                    min[ax.index()] = center[k] - radius;
                    max[ax.index()] = center[k] + radius;
                }
                Aabb::new(min, max)
            }
            CsgExpr::Union(l, r) => l.bounding_box().union(&r.bounding_box()),
            CsgExpr::Intersect(l, r) => l.bounding_box().intersection(&r.bounding_box()),
            CsgExpr::Difference(l, _) => l.bounding_box(),
        }
    }

    /// Every boundary surface of every primitive: box faces and cylinder caps
    /// as planes, cylinder walls as cylinders. Not deduplicated.
    pub fn surfaces(&self) -> Vec<SurfaceGeom> {
        let mut out = Vec::new();
        self.collect_surfaces(&mut out);
        out
    }

    fn collect_surfaces(&self, out: &mut Vec<SurfaceGeom>) {
        match self {
            CsgExpr::Box { min, max } => {
                for axis in Axis::ALL {
                    for offset in [min[axis.index()], max[axis.index()]] {
                        out.push(SurfaceGeom::Plane { axis, offset });
                    }
                }
            }
            CsgExpr::Cylinder {
                axis,
                center,
                radius,
                h,
            } => {
                out.push(SurfaceGeom::Cylinder {
                    axis: *axis,
                    center: *center,
                    radius: *radius,
                });
                for offset in h {
                    out.push(SurfaceGeom::Plane {
                        axis: *axis,
                        offset: *offset,
                    });
                }
            }
            CsgExpr::Union(l, r) | CsgExpr::Intersect(l, r) | CsgExpr::Difference(l, r) => {
                l.collect_surfaces(out);
                r.collect_surfaces(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OpName {
    Union,
    Intersect,
    Difference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "prim", rename_all = "lowercase", deny_unknown_fields)]
enum RawPrim {
    Box {
        bounds: [f64; 6],
    },
    Cyl {
        axis: Axis,
        center: [f64; 2],
        r: f64,
        h: [f64; 2],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawExpr {
    Op {
        op: OpName,
        l: Box<RawExpr>,
        r: Box<RawExpr>,
    },
    Prim(RawPrim),
}

impl TryFrom<RawExpr> for CsgExpr {
    type Error = String;

    fn try_from(raw: RawExpr) -> Result<Self, String> {
        let expr = match raw {
            RawExpr::Prim(RawPrim::Box { bounds: b }) => {
                CsgExpr::cuboid(b[0], b[1], b[2], b[3], b[4], b[5])
            }
            RawExpr::Prim(RawPrim::Cyl { axis, center, r, h }) => CsgExpr::Cylinder {
                axis,
                center,
                radius: r,
                h,
            },
            RawExpr::Op { op, l, r } => {
                let l = Box::new(CsgExpr::try_from(*l)?);
                let r = Box::new(CsgExpr::try_from(*r)?);
                match op {
                    OpName::Union => CsgExpr::Union(l, r),
                    OpName::Intersect => CsgExpr::Intersect(l, r),
                    OpName::Difference => CsgExpr::Difference(l, r),
                }
            }
        };
        expr.validate()?;
        Ok(expr)
    }
}

impl From<CsgExpr> for RawExpr {
    fn from(e: CsgExpr) -> RawExpr {
        let op = |op, l: Box<CsgExpr>, r: Box<CsgExpr>| RawExpr::Op {
            op,
            l: Box::new((*l).into()),
            r: Box::new((*r).into()),
        };
        match e {
            CsgExpr::Box { min, max } => RawExpr::Prim(RawPrim::Box {
                bounds: [min[0], max[0], min[1], max[1], min[2], max[2]],
            }),
            CsgExpr::Cylinder {
                axis,
                center,
                radius,
                h,
            } => RawExpr::Prim(RawPrim::Cyl {
                axis,
                center,
                r: radius,
                h,
            }),
            CsgExpr::Union(l, r) => op(OpName::Union, l, r),
            CsgExpr::Intersect(l, r) => op(OpName::Intersect, l, r),
            CsgExpr::Difference(l, r) => op(OpName::Difference, l, r),
        }
    }
}
