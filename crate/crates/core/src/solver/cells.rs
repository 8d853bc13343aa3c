//! Subgradient-cell evaluation during the fixed-point iteration.
//!
//! The cell of node `i` at trial value `t` is the half-plane
//! intersection `{ p : p . (x_j - x_i) <= u_j - t }` over all other
//! nodes. Far constraints are pruned soundly: recentering at a reference
//! gradient `p0` turns the test into offset comparisons against the
//! current polygon radius, and a global paraboloid minorant of the node
//! values lower-bounds every unseen offset, so the expanding ring scan
//! can stop early without missing a cut. The result is the exact cell.

use crate::geometry::polygon::{clip_halfplane, polygon_area};
use crate::geometry::Point;
use std::cell::RefCell;

// Reusable clip buffer per thread; clipping is the innermost hot loop.
thread_local! {
    static SCRATCH: RefCell<Vec<Point>> = const { RefCell::new(Vec::new()) };
}

/// In-place half-plane clip using a scratch buffer: `poly` is replaced
/// by its intersection with `{ p : p . dir <= offset }`.
fn clip_in_place(poly: &mut Vec<Point>, dir: Point, offset: f64) {
    SCRATCH.with(|scratch| {
        let mut out = scratch.borrow_mut();
        out.clear();
        let m = poly.len();
        for i in 0..m {
            let a = poly[i];
            let b = poly[(i + 1) % m];
            let da = a[0] * dir[0] + a[1] * dir[1] - offset;
            let db = b[0] * dir[0] + b[1] * dir[1] - offset;
            if da <= 0.0 {
                out.push(a);
            }
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                let t = da / (da - db);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        std::mem::swap(poly, &mut *out);
    });
}

use super::mesh::{Buckets, Mesh};

pub struct CellEngine {
    nodes: Vec<Point>,
    buckets: Buckets,
    /// Nearest node in each coordinate direction (+x, -x, +y, -y) per
    /// node; used for the reference gradient and the initial polygon.
    compass: Vec<[u32; 4]>,
}

const NONE: u32 = u32::MAX;

impl CellEngine {
    pub fn new(mesh: &Mesh) -> CellEngine {
        let nodes = mesh.nodes.clone();
        let buckets = Buckets::build(&nodes, 2.0 * mesh.h);
        let mut compass = vec![[NONE; 4]; nodes.len()];
        for i in 0..nodes.len() {
            let xi = nodes[i];
            let mut best = [(NONE, f64::INFINITY); 4];
            buckets.scan_rings(xi, |ring, j| {
                let j = j as usize;
                if j != i {
                    let d = [nodes[j][0] - xi[0], nodes[j][1] - xi[1]];
                    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    // Quadrant-ish sectors around the axes.
                    let slot = if d[0].abs() >= d[1].abs() {
                        if d[0] > 0.0 {
                            0
                        } else {
                            1
                        }
                    } else if d[1] > 0.0 {
                        2
                    } else {
                        3
                    };
                    if len < best[slot].1 {
                        best[slot] = (j as u32, len);
                    }
                }
                let worst = best.iter().map(|b| b.1).fold(0.0f64, f64::max);
                (ring as f64 - 1.0).max(0.0) * buckets.cell_size() < worst
            });
            compass[i] = [best[0].0, best[1].0, best[2].0, best[3].0];
        }
        CellEngine {
            nodes,
            buckets,
            compass,
        }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    /// Reference gradient at node `i`: central differences from the
    /// compass neighbors. Only affects pruning efficiency, not results.
    fn reference_gradient(&self, values: &[f64], i: usize, t: f64) -> Point {
        let xi = self.nodes[i];
        let mut g = [0.0, 0.0];
        for axis in 0..2 {
            let (jp, jm) = (self.compass[i][2 * axis], self.compass[i][2 * axis + 1]);
            g[axis] = match (jp, jm) {
                (p, m) if p != NONE && m != NONE => {
                    let (p, m) = (p as usize, m as usize);
                    (values[p] - values[m]) / (self.nodes[p][axis] - self.nodes[m][axis])
                }
                (p, _) if p != NONE => {
                    let p = p as usize;
                    (values[p] - t) / (self.nodes[p][axis] - xi[axis])
                }
                (_, m) if m != NONE => {
                    let m = m as usize;
                    (values[m] - t) / (self.nodes[m][axis] - xi[axis])
                }
                _ => 0.0,
            };
        }
        g
    }

    /// Exact subgradient cell of node `i` at trial value `t`, in
    /// recentered coordinates `q = p - p0`; returns `(polygon, p0)`.
    ///
    /// `parab_min` must satisfy `values[j] >= |x_j|^2/2 + parab_min` for
    /// every node; it feeds the sound ring cutoff. Pass `-inf` to
    /// disable pruning (still correct, just slower).
    pub fn cell(
        &self,
        values: &[f64],
        i: usize,
        t: f64,
        parab_min: f64,
    ) -> (Vec<Point>, Point) {
        let (poly, p0, _) = self.cell_with_survivors(values, i, t, parab_min, None, 0.0);
        (poly, p0)
    }

    pub fn cell_area(&self, values: &[f64], i: usize, t: f64, parab_min: f64) -> f64 {
        polygon_area(&self.cell(values, i, t, parab_min).0)
    }

    /// Cell computation that can also collect the constraint indices
    /// which could bind anywhere in the value interval `[t, t_hi]` or
    /// within `margin` of binding at `t` (`survivors`), so nested root
    /// finds can run on a small set between full passes.
    pub fn cell_with_survivors(
        &self,
        values: &[f64],
        i: usize,
        t: f64,
        parab_min: f64,
        t_hi: Option<f64>,
        margin: f64,
    ) -> (Vec<Point>, Point, Vec<u32>) {
        let xi = self.nodes[i];
        let p0 = self.reference_gradient(values, i, t);
        let mut poly = self.initial_polygon(values, i, t, p0);
        let mut rho = poly_radius(&poly);
        let mut survivors: Vec<u32> = Vec::new();
        let collect = t_hi.is_some() || margin > 0.0;
        let t_hi = t_hi.unwrap_or(t);
        // s-term of the ring cutoff (see module docs).
        let s = 0.5 * (xi[0] * xi[0] + xi[1] * xi[1]) + parab_min - t;
        let drift = {
            let dx = xi[0] - p0[0];
            let dy = xi[1] - p0[1];
            (dx * dx + dy * dy).sqrt()
        };
        self.buckets.scan_rings(xi, |ring, j| {
            let j = j as usize;
            if j != i {
                let xj = self.nodes[j];
                let d = [xj[0] - xi[0], xj[1] - xi[1]];
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let c_base = values[j] - p0[0] * d[0] - p0[1] * d[1];
                let offset = (c_base - t) / len;
                if offset < rho {
                    clip_in_place(&mut poly, d, c_base - t);
                    rho = poly_radius(&poly);
                }
                if collect && (c_base - t_hi) / len < rho + margin + 1e-12 {
                    survivors.push(j as u32);
                }
            }
            if poly.is_empty() && !collect {
                return false;
            }
            // Sound cutoff: every node at ring distance >= dist_min has
            // offset at least beta(dist_min).
            let dist_min = (ring as f64 - 1.0).max(0.0) * self.buckets.cell_size();
            if dist_min <= 0.0 {
                return true;
            }
            let beta = 0.5 * dist_min - drift + s.min(0.0) / dist_min;
            beta < rho + margin + 1e-12
        });
        (poly, p0, survivors)
    }

    /// Area plus a refreshed candidate cache for later subset evals.
    pub fn cell_area_refresh(
        &self,
        values: &[f64],
        i: usize,
        t: f64,
        parab_min: f64,
        margin: f64,
    ) -> (f64, Point, Vec<u32>) {
        let (poly, p0, cand) = self.cell_with_survivors(values, i, t, parab_min, None, margin);
        (polygon_area(&poly), p0, cand)
    }

    /// Area of the cell with constraints restricted to `subset`
    /// (exact when the subset covers the binding constraints, e.g.
    /// inside the survivor interval established by
    /// `cell_with_survivors`; heuristic on stale caches, which the
    /// sweep-level verification corrects).
    pub fn cell_area_subset(
        &self,
        values: &[f64],
        i: usize,
        t: f64,
        p0: Point,
        subset: &[u32],
    ) -> f64 {
        let xi = self.nodes[i];
        let mut poly = self.initial_polygon(values, i, t, p0);
        // Nearest constraints first.
        for &j in subset {
            let j = j as usize;
            let xj = self.nodes[j];
            let d = [xj[0] - xi[0], xj[1] - xi[1]];
            let c = values[j] - t - p0[0] * d[0] - p0[1] * d[1];
            clip_in_place(&mut poly, d, c);
            if poly.is_empty() {
                return 0.0;
            }
        }
        polygon_area(&poly)
    }

    /// Starting polygon: a box from the compass constraints when all
    /// four exist, otherwise a huge box (pruning still bounds the scan).
    fn initial_polygon(&self, values: &[f64], i: usize, t: f64, p0: Point) -> Vec<Point> {
        let xi = self.nodes[i];
        let mut extent = 0.0f64;
        let mut complete = true;
        for &j in &self.compass[i] {
            if j == NONE {
                complete = false;
                break;
            }
            let j = j as usize;
            let d = [self.nodes[j][0] - xi[0], self.nodes[j][1] - xi[1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let c = values[j] - t - p0[0] * d[0] - p0[1] * d[1];
            extent = extent.max(c / len);
        }
        let b = if complete {
            // The four sector constraints confine q to a box of this
            // scale (each direction is within 45 degrees of an axis).
            4.0 * extent.max(0.0) + 1e-9
        } else {
            1e9
        };
        let mut poly = vec![[-b, -b], [b, -b], [b, b], [-b, b]];
        for &j in &self.compass[i] {
            if j == NONE {
                continue;
            }
            let j = j as usize;
            let d = [self.nodes[j][0] - xi[0], self.nodes[j][1] - xi[1]];
            let c = values[j] - t - p0[0] * d[0] - p0[1] * d[1];
            poly = clip_halfplane(&poly, d, c);
            if poly.is_empty() {
                break;
            }
        }
        poly
    }
}

fn poly_radius(poly: &[Point]) -> f64 {
    poly.iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::brute_force_cell_raw;
    use crate::geometry::polygon::polygon_area as parea;
    use crate::geometry::ConvexPolygon;
    use crate::solver::mesh::generate_mesh;
    use crate::solver::DensityField;

    fn test_mesh() -> Mesh {
        let sq = ConvexPolygon::new(vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
            .unwrap();
        generate_mesh(&sq, 0.2, &[], &DensityField::Constant(1.0), None).unwrap()
    }

    #[test]
    fn pruned_cells_match_brute_force() {
        let mesh = test_mesh();
        let engine = CellEngine::new(&mesh);
        let values: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
            .collect();
        let parab_min = values
            .iter()
            .zip(mesh.nodes.iter())
            .map(|(v, p)| v - 0.5 * (p[0] * p[0] + p[1] * p[1]))
            .fold(f64::INFINITY, f64::min);
        for &i in mesh.interior.iter().step_by(7) {
            let fast = engine.cell_area(&values, i, values[i], parab_min);
            let brute = parea(&brute_force_cell_raw(&mesh.nodes, &values, i));
            assert!(
                (fast - brute).abs() < 1e-12,
                "node {i}: {fast} vs {brute}"
            );
        }
    }

    #[test]
    fn lowering_a_node_grows_its_cell() {
        let mesh = test_mesh();
        let engine = CellEngine::new(&mesh);
        let values: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
            .collect();
        let i = mesh.interior[mesh.interior.len() / 2];
        let a0 = engine.cell_area(&values, i, values[i], -10.0);
        let a1 = engine.cell_area(&values, i, values[i] - 0.05, -10.0);
        let a2 = engine.cell_area(&values, i, values[i] - 0.2, -10.0);
        assert!(a0 < a1 && a1 < a2, "{a0} {a1} {a2}");
    }

    #[test]
    fn survivors_reproduce_full_areas_inside_bracket() {
        let mesh = test_mesh();
        let engine = CellEngine::new(&mesh);
        let values: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
            .collect();
        let i = mesh.interior[3];
        let t_hi = values[i];
        let t_lo = t_hi - 0.3;
        let (_, p0, survivors) =
            engine.cell_with_survivors(&values, i, t_lo, -10.0, Some(t_hi), 0.0);
        for k in 0..=6 {
            let t = t_lo + (t_hi - t_lo) * k as f64 / 6.0;
            let full = engine.cell_area(&values, i, t, -10.0);
            let sub = engine.cell_area_subset(&values, i, t, p0, &survivors);
            assert!(
                (full - sub).abs() < 1e-12,
                "t={t}: full {full} vs survivors {sub}"
            );
        }
    }

    #[test]
    fn raised_node_has_empty_cell() {
        let mesh = test_mesh();
        let engine = CellEngine::new(&mesh);
        let values: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
            .collect();
        let i = mesh.interior[0];
        let a = engine.cell_area(&values, i, values[i] + 0.5, -10.0);
        assert_eq!(a, 0.0);
    }
}
