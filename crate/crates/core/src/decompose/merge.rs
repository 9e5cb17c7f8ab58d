//! Greedy merging of face-adjacent cells whose union is one conjunction.

use crate::geom::{Axis, Sign, SURFACE_MERGE_TOL};
use crate::{Constraint, SurfaceGeom};

fn plane_on(c: &Constraint, axis: Axis) -> Option<f64> {
    match c.geom {
        SurfaceGeom::Plane { axis: a, offset } if a == axis => Some(offset),
        _ => None,
    }
}

fn same(a: &Constraint, b: &Constraint) -> bool {
    a.sign == b.sign && a.geom.approx_eq(&b.geom, SURFACE_MERGE_TOL)
}

/// Lower and upper bounding planes on `axis` plus every other constraint.
/// `None` unless the cell has exactly one plane on each side of `axis`.
fn split_axis(cell: &[Constraint], axis: Axis) -> Option<(Constraint, Constraint, Vec<Constraint>)> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut rest = Vec::new();
    for c in cell {
        match (plane_on(c, axis), c.sign) {
            (Some(_), Sign::Plus) => lower.push(*c),
            (Some(_), Sign::Minus) => upper.push(*c),
            (None, _) => rest.push(*c),
        }
    }
    match (lower.as_slice(), upper.as_slice()) {
        ([l], [u]) => Some((*l, *u, rest)),
        _ => None,
    }
}

fn same_set(a: &[Constraint], b: &[Constraint]) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| same(x, y)))
}

/// The union of `a` and `b` as one conjunction, if they are stacked along
/// `axis` and agree on every other constraint.
pub(super) fn try_merge(a: &[Constraint], b: &[Constraint], axis: Axis) -> Option<Vec<Constraint>> {
    let (la, ua, ra) = split_axis(a, axis)?;
    let (lb, ub, rb) = split_axis(b, axis)?;
    if !same_set(&ra, &rb) {
        return None;
    }
    let touches = |upper: &Constraint, lower: &Constraint| {
        upper.geom.approx_eq(&lower.geom, SURFACE_MERGE_TOL)
    };
    let (lo, hi) = if touches(&ua, &lb) {
        (la, ub)
    } else if touches(&ub, &la) {
        (lb, ua)
    } else {
        return None;
    };
    let mut merged = ra;
    merged.push(lo);
    merged.push(hi);
    Some(merged)
}

/// Merges along x, then y, then z, always taking the lowest-index mergeable
/// pair, until no pass changes anything. The merged cell keeps the lower index.
pub(super) fn merge_cells(cells: &mut Vec<Vec<Constraint>>) {
    loop {
        let mut changed = false;
        for axis in Axis::ALL {
            'restart: loop {
                for i in 0..cells.len() {
                    for j in i + 1..cells.len() {
                        if let Some(m) = try_merge(&cells[i], &cells[j], axis) {
                            cells[i] = m;
                            cells.remove(j);
                            changed = true;
                            continue 'restart;
                        }
                    }
                }
                break;
            }
        }
        if !changed {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxc(lo: [f64; 3], hi: [f64; 3]) -> Vec<Constraint> {
        let mut cs = Vec::new();
        for a in Axis::ALL {
            cs.push(Constraint::new(SurfaceGeom::Plane { axis: a, offset: lo[a.index()] }, Sign::Plus));
            cs.push(Constraint::new(SurfaceGeom::Plane { axis: a, offset: hi[a.index()] }, Sign::Minus));
        }
        cs
    }

    #[test]
    fn stacked_boxes_merge_along_shared_axis_only() {
        let a = boxc([0.0; 3], [1.0; 3]);
        let b = boxc([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let m = try_merge(&a, &b, Axis::X).unwrap();
        assert!(same_set(&m, &boxc([0.0; 3], [2.0, 1.0, 1.0])));
        assert_eq!(try_merge(&b, &a, Axis::X).map(|m| m.len()), Some(6));
        assert!(try_merge(&a, &b, Axis::Y).is_none());
    }

    #[test]
    fn mismatched_cross_sections_do_not_merge() {
        let a = boxc([0.0; 3], [1.0; 3]);
        let b = boxc([1.0, 0.0, 0.0], [2.0, 2.0, 1.0]);
        assert!(try_merge(&a, &b, Axis::X).is_none());
    }

    #[test]
    fn two_by_two_grid_merges_to_one() {
        let mut cells = vec![
            boxc([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
            boxc([0.0, 1.0, 0.0], [1.0, 2.0, 1.0]),
            boxc([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]),
            boxc([1.0, 1.0, 0.0], [2.0, 2.0, 1.0]),
        ];
        merge_cells(&mut cells);
        assert_eq!(cells.len(), 1);
        assert!(same_set(&cells[0], &boxc([0.0; 3], [2.0, 2.0, 1.0])));
    }
}
