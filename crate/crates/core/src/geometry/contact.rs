//! Contact sets and strict-convexity detection.
//!
//! A supporting plane at a base point touches the graph on its contact
//! set; a singleton contact set (up to mesh resolution) means the
//! function is strictly convex there. Solutions with a singular set
//! `gamma` are expected to be strictly convex away from the convex hull
//! of `gamma`.

use super::polygon::convex_hull_points;
use super::{dist, dot, GeometryError, PLConvexFunction, Point};

/// A supporting plane at a base point and the nodes it touches.
#[derive(Debug, Clone)]
pub struct ContactReport {
    pub base: Point,
    /// Plane `p(x) = gradient . x + offset`.
    pub plane_gradient: Point,
    pub plane_offset: f64,
    /// Nodes within tolerance of the plane.
    pub contact_nodes: Vec<usize>,
    /// Max pairwise distance among contact nodes.
    pub diameter: f64,
    pub tolerance: f64,
}

/// Contact set of the supporting plane at `x0` (averaged subgradient of
/// the adjacent facets; any subgradient is valid).
pub fn contact_set(f: &PLConvexFunction, x0: Point) -> Result<ContactReport, GeometryError> {
    let v0 = f.evaluate(x0)?;
    // Use the node subgradient when x0 is (numerically) a node; facet
    // gradient otherwise.
    let g = match nearest_node_within(f, x0, 1e-9 * (1.0 + f.mesh_size())) {
        Some(i) => f.subgradient(i),
        None => {
            let t = f
                .triangulation()
                .locate(f.nodes(), x0)
                .ok_or(GeometryError::OutsideDomain(x0[0], x0[1]))?;
            f.triangulation().grads[t]
        }
    };
    let offset = v0 - dot(g, x0);
    let value_scale = f.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-9 * value_scale;
    let mut contact_nodes = Vec::new();
    for (i, (x, u)) in f.nodes().iter().zip(f.values()).enumerate() {
        let gap = u - (dot(g, *x) + offset);
        if gap <= tolerance {
            contact_nodes.push(i);
        }
    }
    let mut diameter = 0.0f64;
    for (a, &i) in contact_nodes.iter().enumerate() {
        for &j in contact_nodes.iter().skip(a + 1) {
            diameter = diameter.max(dist(f.nodes()[i], f.nodes()[j]));
        }
    }
    Ok(ContactReport {
        base: x0,
        plane_gradient: g,
        plane_offset: offset,
        contact_nodes,
        diameter,
        tolerance,
    })
}

fn nearest_node_within(f: &PLConvexFunction, x: Point, tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in f.nodes().iter().enumerate() {
        let d = dist(*p, x);
        match best {
            Some((_, bd)) if bd <= d => {}
            _ => best = Some((i, d)),
        }
    }
    best.and_then(|(i, d)| (d <= tol).then_some(i))
}

/// The singular set `gamma`: isolated points and line segments.
#[derive(Debug, Clone, Default)]
pub struct GammaSet {
    pub points: Vec<Point>,
    pub segments: Vec<[Point; 2]>,
}

impl GammaSet {
    pub fn points(pts: &[Point]) -> Self {
        GammaSet {
            points: pts.to_vec(),
            segments: Vec::new(),
        }
    }

    pub fn segment(a: Point, b: Point) -> Self {
        GammaSet {
            points: Vec::new(),
            segments: vec![[a, b]],
        }
    }

    fn support_points(&self) -> Vec<Point> {
        let mut pts = self.points.clone();
        for s in &self.segments {
            pts.push(s[0]);
            pts.push(s[1]);
        }
        pts
    }

    /// Distance from `x` to the convex hull of the set.
    pub fn hull_distance(&self, x: Point) -> f64 {
        let pts = self.support_points();
        match pts.len() {
            0 => f64::INFINITY,
            1 => dist(x, pts[0]),
            _ => {
                let hull = convex_hull_points(&pts);
                if hull.len() < 3 {
                    // Degenerate hull: a segment.
                    let (a, b) = (hull[0], *hull.last().unwrap());
                    super::hull::point_segment_distance(x, a, b)
                } else {
                    let poly = super::polygon::ConvexPolygon::new(hull).expect("hull is convex");
                    poly.distance(x)
                }
            }
        }
    }
}

/// Per-node strict-convexity flags: a node is strictly convex when its
/// contact set has diameter at most the mesh size.
#[derive(Debug, Clone)]
pub struct StrictConvexityMap {
    pub strict: Vec<bool>,
    pub contact_diameters: Vec<f64>,
    pub mesh_size: f64,
}

impl StrictConvexityMap {
    /// Nodes farther than `margin` from the hull of `gamma` that are
    /// NOT strictly convex. Empty for solutions that obey the
    /// strict-convexity statement away from the singular hull.
    pub fn violations_outside(&self, f: &PLConvexFunction, gamma: &GammaSet, margin: f64) -> Vec<usize> {
        (0..f.len())
            .filter(|&i| {
                !f.is_boundary(i)
                    && gamma.hull_distance(f.nodes()[i]) > margin
                    && !self.strict[i]
            })
            .collect()
    }
}

/// Scan all nodes and flag strict convexity by contact-set diameter.
pub fn strict_convexity_region(f: &PLConvexFunction, _gamma: &GammaSet) -> StrictConvexityMap {
    let h = f.mesh_size();
    let mut strict = Vec::with_capacity(f.len());
    let mut diameters = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        let rep = contact_set(f, f.nodes()[i]).expect("nodes are in the domain");
        diameters.push(rep.diameter);
        strict.push(rep.diameter <= h * (1.0 + 1e-9));
    }
    StrictConvexityMap {
        strict,
        contact_diameters: diameters,
        mesh_size: h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_pl;

    fn grid(m: usize, f: impl Fn(f64, f64) -> f64) -> PLConvexFunction {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for i in 0..=m {
            for j in 0..=m {
                let x = -1.0 + 2.0 * i as f64 / m as f64;
                let y = -1.0 + 2.0 * j as f64 / m as f64;
                nodes.push([x, y]);
                values.push(f(x, y));
            }
        }
        build_pl(nodes, values).unwrap()
    }

    #[test]
    fn paraboloid_contact_is_singleton() {
        let f = grid(8, |x, y| 0.5 * (x * x + y * y));
        let rep = contact_set(&f, [0.25, 0.25]).unwrap();
        assert_eq!(rep.contact_nodes.len(), 1);
        assert_eq!(rep.diameter, 0.0);
    }

    #[test]
    fn crease_contact_spans_the_segment() {
        // u = |x1| has a supporting plane p = 0 touching the whole crease.
        let f = grid(8, |x, _| x.abs());
        let rep = contact_set(&f, [0.0, 0.0]).unwrap();
        // Contact nodes are exactly the x = 0 column.
        assert_eq!(rep.contact_nodes.len(), 9);
        assert!((rep.diameter - 2.0).abs() < 1e-12);
        for &i in &rep.contact_nodes {
            assert!(f.nodes()[i][0].abs() < 1e-12);
        }
    }

    #[test]
    fn cone_contact_at_apex_is_singleton() {
        let f = build_pl(
            vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![0.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let rep = contact_set(&f, [0.0, 0.0]).unwrap();
        assert_eq!(rep.contact_nodes, vec![0]);
    }

    #[test]
    fn paraboloid_grid_is_strictly_convex_everywhere() {
        let f = grid(8, |x, y| 0.5 * (x * x + y * y));
        let gamma = GammaSet::points(&[[0.0, 0.0]]);
        let map = strict_convexity_region(&f, &gamma);
        for i in 0..f.len() {
            if !f.is_boundary(i) {
                assert!(map.strict[i], "interior node {i} not strict");
            }
        }
        assert!(map.violations_outside(&f, &gamma, 0.0).is_empty());
    }

    #[test]
    fn crease_nodes_flagged_degenerate_outside_gamma() {
        let f = grid(8, |x, _| x.abs());
        let gamma = GammaSet::segment([0.0, -0.5], [0.0, 0.5]);
        let map = strict_convexity_region(&f, &gamma);
        // Crease nodes beyond the segment are not strictly convex: the
        // degenerate direction extends along the whole line.
        let offenders = map.violations_outside(&f, &gamma, 2.0 * f.mesh_size());
        for i in 0..f.len() {
            let p = f.nodes()[i];
            if p[0].abs() < 1e-12 && !f.is_boundary(i) && gamma.hull_distance(p) > 2.0 * f.mesh_size() {
                assert!(offenders.contains(&i), "crease node {i} not flagged");
            }
        }
        assert!(!offenders.is_empty());
    }

    #[test]
    fn outside_query_is_an_error() {
        let f = grid(4, |x, y| 0.5 * (x * x + y * y));
        assert!(matches!(
            contact_set(&f, [3.0, 0.0]),
            Err(GeometryError::OutsideDomain(_, _))
        ));
    }
}
