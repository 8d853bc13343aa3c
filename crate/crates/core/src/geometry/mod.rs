//! Exact Monge-Ampere measures of piecewise-linear convex functions in
//! the plane.
//!
//! A `PLConvexFunction` stores nodes, one value per node, and the
//! triangulation induced by the lower convex hull of the lifted points
//! `(x_i, u_i)`. The Monge-Ampere measure of such a function is purely
//! atomic: the atom at an interior node is the area of its subgradient
//! cell, the convex polygon spanned by the gradients of the incident
//! facets. Boundary nodes have unbounded cells and are reported
//! separately.

mod contact;
mod dual;
mod hull;
mod measure;
pub mod polygon;

pub use contact::{contact_set, strict_convexity_region, ContactReport, StrictConvexityMap};
pub use dual::{conjugate_at, legendre_pl};
pub use hull::Triangulation;
pub use measure::{brute_force_cell, brute_force_cell_area, brute_force_cell_raw, ma_measure, MAMeasure};
pub use polygon::ConvexPolygon;

use thiserror::Error;

/// Absolute tolerance on lifted heights for hull membership and local
/// convexity checks.
pub const HEIGHT_TOL: f64 = 1e-9;

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("need at least 3 affinely independent nodes, got {0}")]
    TooFewNodes(usize),
    #[error("nodes {0} and {1} coincide")]
    DuplicateNodes(usize, usize),
    #[error("node set is collinear")]
    CollinearNodes,
    #[error("values are not in convex position near nodes {0} and {1}")]
    NonConvexValues(usize, usize),
    #[error("point ({0}, {1}) is outside the node hull")]
    OutsideDomain(f64, f64),
    #[error("dual node set is degenerate (fewer than 3 affinely independent gradients)")]
    DegenerateDual,
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    dot(d, d).sqrt()
}

/// Twice the signed area of triangle `(a, b, c)`; positive when CCW.
#[inline]
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

/// A piecewise-linear convex function: nodes, values, and the cached
/// lower-hull triangulation. Construction validates that every node lies
/// on the lower hull of the lifted points.
#[derive(Debug, Clone)]
pub struct PLConvexFunction {
    nodes: Vec<Point>,
    values: Vec<f64>,
    tri: Triangulation,
    boundary: Vec<bool>,
    mesh_size: f64,
}

/// Build a PL convex function from nodes and values.
///
/// Rejects duplicate or collinear node sets and value assignments whose
/// convex envelope drops any node (non-convex data).
pub fn build_pl(nodes: Vec<Point>, values: Vec<f64>) -> Result<PLConvexFunction, GeometryError> {
    assert_eq!(nodes.len(), values.len(), "one value per node");
    if nodes.len() < 3 {
        return Err(GeometryError::TooFewNodes(nodes.len()));
    }
    let tri = hull::lower_hull_triangulation(&nodes, &values)?;
    let boundary = hull::boundary_flags(&nodes);
    let mesh_size = nearest_neighbor_spread(&nodes);
    Ok(PLConvexFunction {
        nodes,
        values,
        tri,
        boundary,
        mesh_size,
    })
}

/// Largest nearest-neighbor distance over the node set; the natural
/// resolution scale of the mesh.
fn nearest_neighbor_spread(nodes: &[Point]) -> f64 {
    let n = nodes.len();
    let mut spread: f64 = 0.0;
    // Grid buckets keep this near-linear on large meshes.
    let (min, max) = bounds(nodes);
    let diag = dist(min, max).max(1e-300);
    let cells = (n as f64).sqrt().ceil() as usize;
    let cell = diag / cells as f64;
    let index = |p: Point| -> (i64, i64) {
        (
            ((p[0] - min[0]) / cell).floor() as i64,
            ((p[1] - min[1]) / cell).floor() as i64,
        )
    };
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, &p) in nodes.iter().enumerate() {
        buckets.entry(index(p)).or_default().push(i);
    }
    for (i, &p) in nodes.iter().enumerate() {
        let (bx, by) = index(p);
        let mut best = f64::INFINITY;
        let mut ring = 1i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() < ring && dy.abs() < ring {
                        continue;
                    }
                    if let Some(list) = buckets.get(&(bx + dx, by + dy)) {
                        for &j in list {
                            if j != i {
                                best = best.min(dist(p, nodes[j]));
                            }
                        }
                    }
                }
            }
            // A neighbor in ring k guarantees none closer beyond ring k+1.
            if (best.is_finite() && best < (ring - 1).max(0) as f64 * cell) || ring as usize > 2 * cells + 2
            {
                break;
            }
            if best.is_finite() && ring as f64 * cell > best {
                break;
            }
            ring += 1;
        }
        // Ring 0 (own bucket) handled here.
        if let Some(list) = buckets.get(&(bx, by)) {
            for &j in list {
                if j != i {
                    best = best.min(dist(p, nodes[j]));
                }
            }
        }
        spread = spread.max(best);
    }
    spread
}

pub(crate) fn bounds(nodes: &[Point]) -> (Point, Point) {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in nodes {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    (min, max)
}

impl PLConvexFunction {
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    /// True if the node lies on the boundary of the convex hull of the
    /// node set (its subgradient cell is unbounded).
    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.boundary[i]).collect()
    }

    /// Largest nearest-neighbor distance; the mesh resolution.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    /// Evaluate the PL interpolant at `x` (must be inside the node hull).
    pub fn evaluate(&self, x: Point) -> Result<f64, GeometryError> {
        let t = self
            .tri
            .locate(&self.nodes, x)
            .ok_or(GeometryError::OutsideDomain(x[0], x[1]))?;
        let [a, b, c] = self.tri.tris[t];
        let (pa, pb, pc) = (
            self.nodes[a as usize],
            self.nodes[b as usize],
            self.nodes[c as usize],
        );
        let area = orient(pa, pb, pc);
        let wa = orient(x, pb, pc) / area;
        let wb = orient(pa, x, pc) / area;
        let wc = 1.0 - wa - wb;
        Ok(wa * self.values[a as usize] + wb * self.values[b as usize] + wc * self.values[c as usize])
    }

    /// Gradients of the facets incident to node `i`, in triangulation
    /// order.
    pub fn incident_gradients(&self, i: usize) -> Vec<Point> {
        self.tri.incident[i]
            .iter()
            .map(|&t| self.tri.grads[t as usize])
            .collect()
    }

    /// A subgradient at node `i`: the average of the incident facet
    /// gradients (a convex combination of cell vertices, hence valid).
    pub fn subgradient(&self, i: usize) -> Point {
        let grads = self.incident_gradients(i);
        let mut g = [0.0, 0.0];
        for q in &grads {
            g[0] += q[0];
            g[1] += q[1];
        }
        let k = grads.len().max(1) as f64;
        [g[0] / k, g[1] / k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_paraboloid(m: usize) -> (Vec<Point>, Vec<f64>) {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for i in 0..=m {
            for j in 0..=m {
                let x = -1.0 + 2.0 * i as f64 / m as f64;
                let y = -1.0 + 2.0 * j as f64 / m as f64;
                nodes.push([x, y]);
                values.push(0.5 * (x * x + y * y));
            }
        }
        (nodes, values)
    }

    #[test]
    fn triangle_always_accepted() {
        let f = build_pl(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![3.0, -1.0, 7.0]).unwrap();
        assert_eq!(f.triangulation().tris.len(), 1);
    }

    #[test]
    fn paraboloid_grid_accepted_with_all_nodes_on_hull() {
        let (nodes, values) = grid_paraboloid(8);
        let f = build_pl(nodes, values).unwrap();
        // Triangulation covers the hull: area sum check.
        let mut area = 0.0;
        for t in &f.triangulation().tris {
            let (a, b, c) = (
                f.nodes()[t[0] as usize],
                f.nodes()[t[1] as usize],
                f.nodes()[t[2] as usize],
            );
            area += 0.5 * orient(a, b, c);
        }
        assert!((area - 4.0).abs() < 1e-9, "area {area}");
    }

    #[test]
    fn concave_data_rejected() {
        let (nodes, values) = grid_paraboloid(4);
        let neg: Vec<f64> = values.iter().map(|v| -2.0 * v).collect();
        assert!(matches!(
            build_pl(nodes, neg),
            Err(GeometryError::NonConvexValues(_, _))
        ));
    }

    #[test]
    fn dipped_node_rejects_whole_build() {
        let (mut nodes, mut values) = grid_paraboloid(4);
        nodes.push([0.01, 0.013]);
        values.push(-0.2);
        assert!(matches!(
            build_pl(nodes, values),
            Err(GeometryError::NonConvexValues(_, _))
        ));
    }

    #[test]
    fn collinear_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(
            build_pl(nodes, vec![0.0; 4]),
            Err(GeometryError::CollinearNodes)
        ));
    }

    #[test]
    fn duplicates_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            build_pl(nodes, vec![0.0; 4]),
            Err(GeometryError::DuplicateNodes(_, _))
        ));
    }

    #[test]
    fn evaluate_interpolates() {
        let (nodes, values) = grid_paraboloid(10);
        let f = build_pl(nodes, values).unwrap();
        // PL interpolation of the paraboloid overshoots by at most h^2/2.
        let v = f.evaluate([0.03, -0.07]).unwrap();
        let exact = 0.5 * (0.03f64 * 0.03 + 0.07 * 0.07);
        assert!(v >= exact - 1e-12 && v - exact < 0.2 * 0.2 / 2.0);
    }

    #[test]
    fn boundary_flags_on_square_grid() {
        let (nodes, values) = grid_paraboloid(4);
        let f = build_pl(nodes, values).unwrap();
        let nb = f.boundary_nodes().len();
        assert_eq!(nb, 16); // 5x5 grid: 16 rim nodes
        assert_eq!(f.interior_nodes().len(), 9);
    }

    #[test]
    fn mesh_size_of_grid() {
        let (nodes, values) = grid_paraboloid(4);
        let f = build_pl(nodes, values).unwrap();
        assert!((f.mesh_size() - 0.5).abs() < 1e-12);
    }
}
