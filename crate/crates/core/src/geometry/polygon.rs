//! Convex polygon arithmetic: areas, containment, half-plane clipping.

use super::{cross, dist, dot, orient, sub, GeometryError, Point};

/// A convex polygon with vertices in CCW order.
#[derive(Debug, Clone)]
pub struct ConvexPolygon {
    verts: Vec<Point>,
}

impl ConvexPolygon {
    /// Validates convexity (CCW, no reflex corner beyond tolerance).
    pub fn new(verts: Vec<Point>) -> Result<Self, GeometryError> {
        if verts.len() < 3 {
            return Err(GeometryError::TooFewNodes(verts.len()));
        }
        let m = verts.len();
        let scale: f64 = verts
            .iter()
            .zip(verts.iter().cycle().skip(1))
            .map(|(a, b)| dist(*a, *b))
            .fold(0.0, f64::max);
        let eps = 1e-12 * scale * scale;
        let mut area2 = 0.0;
        for i in 0..m {
            let o = orient(verts[i], verts[(i + 1) % m], verts[(i + 2) % m]);
            if o < -eps {
                return Err(GeometryError::CollinearNodes);
            }
            area2 += cross(verts[i], verts[(i + 1) % m]);
        }
        if area2 <= eps {
            return Err(GeometryError::CollinearNodes);
        }
        Ok(ConvexPolygon { verts })
    }

    /// Regular n-gon inscribed in the circle of radius `r` about
    /// `center`, first vertex at angle 0.
    pub fn regular_ngon(center: Point, r: f64, sides: usize) -> Self {
        assert!(sides >= 3 && r > 0.0);
        let verts = (0..sides)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            })
            .collect();
        ConvexPolygon { verts }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.verts
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.verts)
    }

    pub fn centroid(&self) -> Point {
        let m = self.verts.len() as f64;
        let mut c = [0.0, 0.0];
        for v in &self.verts {
            c[0] += v[0];
            c[1] += v[1];
        }
        [c[0] / m, c[1] / m]
    }

    pub fn bounds(&self) -> (Point, Point) {
        super::bounds(&self.verts)
    }

    /// Signed distance from `x` to the boundary along inward normals:
    /// positive inside. The minimum over edges of the inward distance.
    pub fn inner_margin(&self, x: Point) -> f64 {
        let m = self.verts.len();
        let mut margin = f64::INFINITY;
        for i in 0..m {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % m];
            let e = sub(b, a);
            let len = dot(e, e).sqrt();
            // Inward normal of a CCW edge is the left normal.
            let d = cross(e, sub(x, a)) / len;
            margin = margin.min(d);
        }
        margin
    }

    pub fn contains(&self, x: Point, tol: f64) -> bool {
        self.inner_margin(x) >= -tol
    }

    /// Euclidean distance from `x` to the polygon (0 inside).
    pub fn distance(&self, x: Point) -> f64 {
        if self.contains(x, 0.0) {
            return 0.0;
        }
        let m = self.verts.len();
        (0..m)
            .map(|i| {
                super::hull::point_segment_distance(x, self.verts[i], self.verts[(i + 1) % m])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Evenly spaced samples along the boundary, at most `spacing`
    /// apart, always including the polygon vertices.
    pub fn boundary_samples(&self, spacing: f64) -> Vec<Point> {
        assert!(spacing > 0.0);
        let m = self.verts.len();
        let mut out = Vec::new();
        for i in 0..m {
            let a = self.verts[i];
            let b = self.verts[(i + 1) % m];
            let len = dist(a, b);
            let pieces = (len / spacing).ceil().max(1.0) as usize;
            for k in 0..pieces {
                let t = k as f64 / pieces as f64;
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        out
    }
}

/// Shoelace area of a CCW polygon (vertex list, not validated).
pub fn polygon_area(verts: &[Point]) -> f64 {
    let m = verts.len();
    if m < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..m {
        s += cross(verts[i], verts[(i + 1) % m]);
    }
    0.5 * s
}

/// Clip a convex polygon by the half-plane `{ p : p . dir <= offset }`.
/// Returns the clipped vertex list (possibly empty).
pub fn clip_halfplane(poly: &[Point], dir: Point, offset: f64) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    if m == 0 {
        return out;
    }
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let da = dot(a, dir) - offset;
        let db = dot(b, dir) - offset;
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Convex hull (monotone chain) of a small point cloud, CCW. Collinear
/// inputs collapse to fewer than 3 vertices.
pub fn convex_hull_points(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .unwrap()
            .then(a[1].partial_cmp(&b[1]).unwrap())
    });
    pts.dedup_by(|a, b| dist(*a, *b) == 0.0);
    if pts.len() < 3 {
        return pts;
    }
    let build = |iter: &mut dyn Iterator<Item = Point>| -> Vec<Point> {
        let mut out: Vec<Point> = Vec::new();
        for p in iter {
            while out.len() >= 2 && orient(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                out.pop();
            }
            out.push(p);
        }
        out
    };
    let mut lower = build(&mut pts.iter().copied());
    let mut upper = build(&mut pts.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.append(&mut upper);
    lower
}
