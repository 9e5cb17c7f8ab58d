//! Orthographic depth renderings of cell sets, written as binary PGM.
//!
//! Four views look at the bounding-box center from the upper corners
//! `(±1, ±1, 1)`. Each pixel marches along its ray in steps of
//! `diagonal / (4 * size)` and is shaded by the depth of the first inside
//! sample: near is bright, far is dim, misses are 0.

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{
    bounding_box, classify_point, Aabb, CellGeom, GeomError, KernelConfig, PointClass,
};
use crate::scalar::Scalar;

/// View directions in the order of `view_id` 1..4, as corner signs.
pub const VIEW_CORNERS: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("nothing to render")]
    EmptyGeometry,
    #[error("image size must be positive")]
    ZeroSize,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewImage {
    pub width: usize,
    pub height: usize,
    /// Row-major grayscale, top row first.
    pub pixels: Vec<u8>,
    /// 1..4 for the corner views, 0 for the top-down debug view.
    pub view_id: u8,
}

impl ViewImage {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn foreground(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0).count()
    }
}

type V3<T> = [T; 3];

fn add<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale<T: Scalar>(a: V3<T>, s: T) -> V3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize<T: Scalar>(a: V3<T>) -> V3<T> {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    scale(a, T::one() / n)
}

/// Orthographic camera: pixel `(x, y)` starts at
/// `origin + (x+0.5)*du*right - (y+0.5)*dv*up` and travels along `dir`.
struct Camera<T> {
    origin: V3<T>,
    right: V3<T>,
    up: V3<T>,
    dir: V3<T>,
    pixel: T,
    depth: T,
}

fn bounds_of<T: Scalar>(cells: &[CellGeom<T>]) -> Result<Aabb<T>, RenderError> {
    let mut it = cells.iter();
    let first = it.next().ok_or(RenderError::EmptyGeometry)?;
    let mut b = bounding_box(first)?;
    for c in it {
        b = b.union(&bounding_box(c)?);
    }
    Ok(b)
}

fn corner_camera<T: Scalar>(b: &Aabb<T>, corner: [f64; 2], size: usize) -> Camera<T> {
    let diag = b.diagonal();
    let two = T::lit(2.0);
    let dir = normalize([T::lit(-corner[0]), T::lit(-corner[1]), -T::one()]);
    let right = normalize(cross(dir, [T::zero(), T::zero(), T::one()]));
    let up = cross(right, dir);
    let center = b.center();
    // Start a full diagonal behind the center; the square image spans the
    // diagonal, which covers the box from any direction.
    let back = add(center, scale(dir, -diag));
    let origin = add(add(back, scale(right, -diag / two)), scale(up, diag / two));
    Camera {
        origin,
        right,
        up,
        dir,
        pixel: diag / T::lit(size as f64),
        depth: two * diag,
    }
}

fn top_camera<T: Scalar>(b: &Aabb<T>, size: usize) -> Camera<T> {
    let side = b.extent(0).max(b.extent(1));
    let two = T::lit(2.0);
    let c = b.center();
    let top = b.max[2] + b.extent(2) / T::lit(4.0) + T::lit(1e-6);
    Camera {
        origin: [c[0] - side / two, c[1] + side / two, top],
        right: [T::one(), T::zero(), T::zero()],
        up: [T::zero(), T::one(), T::zero()],
        dir: [T::zero(), T::zero(), -T::one()],
        pixel: side / T::lit(size as f64),
        depth: top - b.min[2] + T::lit(1e-6),
    }
}

fn inside_any<T: Scalar>(p: &V3<T>, cells: &[CellGeom<T>], cfg: &KernelConfig) -> bool {
    cells
        .iter()
        .any(|c| classify_point(p, c, cfg) == PointClass::Inside)
}

fn shoot<T: Scalar>(
    cam: &Camera<T>,
    cells: &[CellGeom<T>],
    size: usize,
    step: T,
    view_id: u8,
    cfg: &KernelConfig,
) -> ViewImage {
    let half = T::lit(0.5);
    let steps = (cam.depth / step).ceil().to_usize().unwrap_or(0);
    let pixels: Vec<u8> = (0..size)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..size).map(move |x| {
                let sx = (T::lit(x as f64) + half) * cam.pixel;
                let sy = (T::lit(y as f64) + half) * cam.pixel;
                let start = add(add(cam.origin, scale(cam.right, sx)), scale(cam.up, -sy));
                (0..=steps)
                    .map(|i| T::lit(i as f64) * step)
                    .find(|t| inside_any(&add(start, scale(cam.dir, *t)), cells, cfg))
                    .map_or(0, |t| {
                        let frac = (t / cam.depth).min(T::one()).as_f64();
                        (255.0 - 254.0 * frac).round().clamp(1.0, 255.0) as u8
                    })
            })
        })
        .collect();
    ViewImage {
        width: size,
        height: size,
        pixels,
        view_id,
    }
}

/// Renders the four corner views of `cells` at `size x size` pixels.
pub fn render_views<T: Scalar>(
    cells: &[CellGeom<T>],
    size: usize,
    cfg: &KernelConfig,
) -> Result<[ViewImage; 4], RenderError> {
    if size == 0 {
        return Err(RenderError::ZeroSize);
    }
    let b = bounds_of(cells)?;
    let step = b.diagonal() / T::lit(4.0 * size as f64);
    let views = VIEW_CORNERS.map(|c| corner_camera(&b, c, size));
    let mut out = Vec::with_capacity(4);
    for (i, cam) in views.iter().enumerate() {
        out.push(shoot(cam, cells, size, step, i as u8 + 1, cfg));
    }
    Ok(out.try_into().expect("four views"))
}

/// Straight-down view whose image spans the square hull of the bounding
/// box's xy extent. Used to sanity-check footprints.
pub fn render_top_down<T: Scalar>(
    cells: &[CellGeom<T>],
    size: usize,
    cfg: &KernelConfig,
) -> Result<ViewImage, RenderError> {
    if size == 0 {
        return Err(RenderError::ZeroSize);
    }
    let b = bounds_of(cells)?;
    let cam = top_camera(&b, size);
    let step = b.diagonal() / T::lit(4.0 * size as f64);
    Ok(shoot(&cam, cells, size, step, 0, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Axis, Constraint, Sign, SurfaceGeom};

    fn plane<T: Scalar>(axis: Axis, offset: f64, sign: Sign) -> Constraint<T> {
        Constraint::new(
            SurfaceGeom::Plane {
                axis,
                offset: T::lit(offset),
            },
            sign,
        )
    }

    fn cuboid<T: Scalar>(min: [f64; 3], max: [f64; 3]) -> CellGeom<T> {
        CellGeom::new(
            Axis::ALL
                .into_iter()
                .flat_map(|a| {
                    [
                        plane(a, min[a.index()], Sign::Plus),
                        plane(a, max[a.index()], Sign::Minus),
                    ]
                })
                .collect(),
        )
    }

    #[test]
    fn unit_box_views_are_nonempty_and_stable() {
        let cells = vec![cuboid::<f64>([0.0; 3], [1.0; 3])];
        let cfg = KernelConfig::default();
        let a = render_views(&cells, 32, &cfg).unwrap();
        let b = render_views(&cells, 32, &cfg).unwrap();
        assert_eq!(a, b);
        for (i, v) in a.iter().enumerate() {
            assert_eq!(v.view_id as usize, i + 1);
            assert!(v.foreground() > 0);
            assert!(v.foreground() < 32 * 32);
        }
        // A cube seen from symmetric corners looks the same up to mirroring.
        assert_eq!(a[0].foreground(), a[2].foreground());
    }

    #[test]
    fn pgm_header() {
        let img = ViewImage {
            width: 3,
            height: 2,
            pixels: vec![0, 1, 2, 3, 4, 5],
            view_id: 1,
        };
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(pgm.len(), 11 + 6);
    }

    #[test]
    fn empty_geometry() {
        let cells: Vec<CellGeom<f64>> = vec![];
        assert!(matches!(
            render_views(&cells, 8, &KernelConfig::default()),
            Err(RenderError::EmptyGeometry)
        ));
    }

    #[test]
    fn disc_footprint_ratio() {
        let r = 0.7;
        let cyl = CellGeom::new(vec![
            Constraint::new(
                SurfaceGeom::Cylinder {
                    axis: Axis::Z,
                    center: [0.3, -0.2],
                    radius: r,
                },
                Sign::Minus,
            ),
            plane(Axis::Z, 0.0, Sign::Plus),
            plane(Axis::Z, 0.5, Sign::Minus),
        ]);
        let img = render_top_down(&[cyl], 200, &KernelConfig::default()).unwrap();
        let ratio = img.foreground() as f64 / (200.0 * 200.0);
        assert!((ratio / std::f64::consts::FRAC_PI_4 - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn nearer_surfaces_are_brighter() {
        let cells = vec![cuboid::<f64>([0.0; 3], [1.0; 3])];
        let top = render_top_down(&cells, 16, &KernelConfig::default()).unwrap();
        let tall = vec![cuboid::<f64>([0.0; 3], [1.0, 1.0, 0.2]), cuboid([0.0, 0.0, 0.2], [0.5, 1.0, 1.0])];
        let img = render_top_down(&tall, 16, &KernelConfig::default()).unwrap();
        assert!(top.pixels.iter().all(|&p| p > 0));
        assert!(img.pixels[0] > img.pixels[15]);
    }

    #[test]
    fn f32_matches_shape() {
        let cells = vec![cuboid::<f32>([0.0; 3], [1.0; 3])];
        let v = render_views(&cells, 16, &KernelConfig::default()).unwrap();
        assert!(v.iter().all(|i| i.foreground() > 0));
    }
}
