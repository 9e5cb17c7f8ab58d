#![allow(dead_code)]

use cellforge::decompose::CsgExpr;
use cellforge::geom::{Axis, Sign};
use cellforge::{Part, SurfaceGeom};

fn cuboid(b: [f64; 6]) -> CsgExpr {
    CsgExpr::cuboid(b[0], b[1], b[2], b[3], b[4], b[5])
}

fn cyl(axis: Axis, c: [f64; 2], r: f64, h: [f64; 2]) -> CsgExpr {
    CsgExpr::cylinder(axis, c[0], c[1], r, h[0], h[1])
}

fn union_all(items: Vec<CsgExpr>) -> CsgExpr {
    items.into_iter().reduce(CsgExpr::union).expect("non-empty")
}

/// Connected CSG fixtures: boxes, stacked/L/T unions, holes and plates.
pub fn csg_fixtures() -> Vec<(&'static str, CsgExpr)> {
    use Axis::*;
    vec![
        ("cube", cuboid([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])),
        ("slab", cuboid([0.0, 2.0, -1.0, 1.0, 0.0, 0.25])),
        (
            "stacked",
            cuboid([0.0, 2.0, 0.0, 2.0, 0.0, 1.0]).union(cuboid([0.5, 1.5, 0.5, 1.5, 1.0, 2.0])),
        ),
        (
            "l_bracket",
            cuboid([0.0, 3.0, 0.0, 1.0, 0.0, 1.0]).union(cuboid([0.0, 1.0, 0.0, 1.0, 1.0, 3.0])),
        ),
        (
            "t_shape",
            cuboid([0.0, 3.0, 0.0, 1.0, 2.0, 3.0]).union(cuboid([1.0, 2.0, 0.0, 1.0, 0.0, 2.0])),
        ),
        (
            "u_channel",
            cuboid([0.0, 3.0, 0.0, 2.0, 0.0, 2.0]).difference(cuboid([1.0, 2.0, -1.0, 3.0, 0.5, 3.0])),
        ),
        (
            "stairs",
            union_all(vec![
                cuboid([0.0, 3.0, 0.0, 1.0, 0.0, 1.0]),
                cuboid([1.0, 3.0, 0.0, 1.0, 1.0, 2.0]),
                cuboid([2.0, 3.0, 0.0, 1.0, 2.0, 3.0]),
            ]),
        ),
        (
            "plus",
            union_all(vec![
                cuboid([-2.0, 2.0, -0.5, 0.5, -0.5, 0.5]),
                cuboid([-0.5, 0.5, -2.0, 2.0, -0.5, 0.5]),
            ]),
        ),
        (
            "through_hole",
            cuboid([0.0, 2.0, 0.0, 2.0, 0.0, 1.0]).difference(cyl(Z, [1.0, 1.0], 0.5, [-1.0, 2.0])),
        ),
        (
            "plate_two_holes",
            cuboid([0.0, 4.0, 0.0, 2.0, 0.0, 0.5])
                .difference(cyl(Z, [1.0, 1.0], 0.3, [-1.0, 1.0]))
                .difference(cyl(Z, [3.0, 1.0], 0.3, [-1.0, 1.0])),
        ),
        (
            "plate_four_holes",
            cuboid([0.0, 4.0, 0.0, 4.0, 0.0, 0.5])
                .difference(cyl(Z, [1.0, 1.0], 0.4, [-1.0, 1.0]))
                .difference(cyl(Z, [3.0, 1.0], 0.4, [-1.0, 1.0]))
                .difference(cyl(Z, [1.0, 3.0], 0.4, [-1.0, 1.0]))
                .difference(cyl(Z, [3.0, 3.0], 0.4, [-1.0, 1.0])),
        ),
        ("rod", cyl(Z, [0.0, 0.0], 1.0, [0.0, 3.0])),
        (
            "boss",
            cuboid([0.0, 2.0, 0.0, 2.0, 0.0, 1.0]).union(cyl(X, [1.0, 0.5], 0.4, [2.0, 3.0])),
        ),
        (
            "blind_hole",
            cuboid([0.0, 2.0, 0.0, 2.0, 0.0, 2.0]).difference(cyl(Z, [1.0, 1.0], 0.5, [1.0, 3.0])),
        ),
        (
            "l_with_hole",
            cuboid([0.0, 3.0, 0.0, 1.0, 0.0, 1.0])
                .union(cuboid([0.0, 1.0, 0.0, 1.0, 1.0, 3.0]))
                .difference(cyl(Z, [2.0, 0.5], 0.25, [-1.0, 2.0])),
        ),
        (
            "cross_holes",
            cuboid([0.0, 4.0, 0.0, 4.0, 0.0, 4.0])
                .difference(cyl(X, [1.0, 1.0], 0.5, [-1.0, 5.0]))
                .difference(cyl(Y, [3.0, 3.0], 0.5, [-1.0, 5.0])),
        ),
        (
            "tube",
            cyl(Z, [0.0, 0.0], 1.0, [0.0, 2.0]).difference(cyl(Z, [0.0, 0.0], 0.5, [-1.0, 3.0])),
        ),
        (
            "flange",
            cyl(Z, [0.0, 0.0], 2.0, [0.0, 0.5]).union(cyl(Z, [0.0, 0.0], 0.75, [0.5, 3.0])),
        ),
        (
            "frame",
            cuboid([0.0, 4.0, 0.0, 4.0, 0.0, 1.0]).difference(cuboid([1.0, 3.0, 1.0, 3.0, -1.0, 2.0])),
        ),
        (
            "rounded_bar",
            cuboid([0.0, 1.0, 0.0, 4.0, 0.0, 1.0]).intersect(cyl(Y, [0.5, 0.5], 0.6, [-1.0, 5.0])),
        ),
        (
            "counterbore",
            cuboid([0.0, 3.0, 0.0, 3.0, 0.0, 2.0])
                .difference(cyl(Z, [1.5, 1.5], 0.5, [-1.0, 3.0]))
                .difference(cyl(Z, [1.5, 1.5], 1.0, [1.5, 3.0])),
        ),
        (
            "step_block_hole",
            cuboid([0.0, 4.0, 0.0, 2.0, 0.0, 1.0])
                .union(cuboid([0.0, 2.0, 0.0, 2.0, 1.0, 2.0]))
                .difference(cyl(Z, [3.0, 1.0], 0.5, [-1.0, 3.0])),
        ),
    ]
}

/// A signed axis permutation `x -> (s0 x[p0], s1 x[p1], s2 x[p2])`.
#[derive(Debug, Clone, Copy)]
pub struct SignedPerm {
    pub perm: [usize; 3],
    pub sign: [f64; 3],
}

impl SignedPerm {
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.sign[i] * p[self.perm[i]])
    }

    pub fn det(&self) -> f64 {
        let m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|e| self.apply(e));
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// All 48 signed permutations; the 24 with determinant 1 are rotations.
    pub fn all() -> Vec<SignedPerm> {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::new();
        for perm in perms {
            for bits in 0..8 {
                let sign = [0, 1, 2].map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 });
                out.push(SignedPerm { perm, sign });
            }
        }
        out
    }

    pub fn rotations() -> Vec<SignedPerm> {
        Self::all().into_iter().filter(|r| r.det() > 0.0).collect()
    }
}

/// Applies `x -> s * R x + t` to every surface of `part` by mapping points
/// and directions, flipping plane terms whose normal reverses.
pub fn transform_part(part: &Part, r: &SignedPerm, s: f64, t: [f64; 3]) -> Part {
    let map = |x: [f64; 3]| {
        let y = r.apply(x);
        [0, 1, 2].map(|i| s * y[i] + t[i])
    };
    let image_axis = |a: Axis| {
        let mut d = [0.0; 3];
        d[a.index()] = 1.0;
        let d = r.apply(d);
        let i = (0..3).find(|&i| d[i] != 0.0).unwrap();
        (Axis::from_index(i), d[i] < 0.0)
    };
    let mut out = part.clone();
    let mut flipped = Vec::new();
    for surf in &mut out.surfaces {
        surf.geom = match surf.geom {
            SurfaceGeom::Plane { axis, offset } => {
                let mut x = [0.0; 3];
                x[axis.index()] = offset;
                let (a, flip) = image_axis(axis);
                if flip {
                    flipped.push(surf.id.clone());
                }
                SurfaceGeom::Plane {
                    axis: a,
                    offset: map(x)[a.index()],
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
                let (a, _) = image_axis(axis);
                let (nu, nv) = a.perpendicular();
                let y = map(x);
                SurfaceGeom::Cylinder {
                    axis: a,
                    center: [y[nu.index()], y[nv.index()]],
                    radius: radius * s,
                }
            }
        };
    }
    for term in out.cells.iter_mut().flat_map(|c| c.region.iter_mut()) {
        if flipped.contains(&term.surface) {
            term.sign = match term.sign {
                Sign::Plus => Sign::Minus,
                Sign::Minus => Sign::Plus,
            };
        }
    }
    out
}
