//! Mesh generation for the Dirichlet solver.
//!
//! Nodes are a regular interior lattice of spacing `h` clipped to the
//! domain polygon, plus boundary samples along the polygon edges, plus
//! one node exactly at each atom. Per-node measure targets are the
//! density integrated over the node's Voronoi cell (clipped to the
//! domain), plus the atom mass where one is hosted.

use crate::geometry::polygon::{clip_halfplane, polygon_area};
use crate::geometry::{ConvexPolygon, Point};

use super::{DensityField, SolverError};

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub is_boundary: Vec<bool>,
    pub interior: Vec<usize>,
    pub h: f64,
    /// `(node index, atom mass, snap distance)` per atom.
    pub atom_nodes: Vec<(usize, f64, f64)>,
    /// Measure target per node (0 for boundary nodes).
    pub targets: Vec<f64>,
}

/// Spatial bucket index over nodes, used for neighbor scans.
#[derive(Debug, Clone)]
pub struct Buckets {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<u32>>,
}

impl Buckets {
    pub fn build(nodes: &[Point], cell: f64) -> Buckets {
        let (min, max) = crate::geometry::bounds(nodes);
        let nx = (((max[0] - min[0]) / cell).floor() as usize + 2).max(1);
        let ny = (((max[1] - min[1]) / cell).floor() as usize + 2).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        let origin = min;
        for (i, p) in nodes.iter().enumerate() {
            let bx = (((p[0] - origin[0]) / cell) as usize).min(nx - 1);
            let by = (((p[1] - origin[1]) / cell) as usize).min(ny - 1);
            bins[by * nx + bx].push(i as u32);
        }
        Buckets {
            origin,
            cell,
            nx,
            ny,
            bins,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn coords(&self, p: Point) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.cell) as i64,
            ((p[1] - self.origin[1]) / self.cell) as i64,
        )
    }

    /// Visit nodes in square rings of buckets around `p`. The callback
    /// receives `(ring index, node index)`; returning `false` stops the
    /// scan after the current ring completes. Ring `k` contains nodes at
    /// distance at least `(k - 1) * cell` from `p`.
    pub fn scan_rings<F: FnMut(usize, u32) -> bool>(&self, p: Point, mut visit: F) {
        let (cx, cy) = self.coords(p);
        let max_ring = self.nx.max(self.ny) + 2;
        for ring in 0..max_ring {
            let r = ring as i64;
            let mut keep_going = true;
            let mut any_bucket = false;
            for dx in -r..=r {
                for dy in -r..=r {
                    if dx.abs().max(dy.abs()) != r {
                        continue;
                    }
                    let bx = cx + dx;
                    let by = cy + dy;
                    if bx < 0 || by < 0 || bx >= self.nx as i64 || by >= self.ny as i64 {
                        continue;
                    }
                    any_bucket = true;
                    for &i in &self.bins[by as usize * self.nx + bx as usize] {
                        keep_going &= visit(ring, i);
                    }
                }
            }
            if !keep_going {
                return;
            }
            if !any_bucket && ring > 0 && (cx.unsigned_abs() as usize) < self.nx + max_ring {
                // Walked past every bucket.
                if r as usize > self.nx + self.ny {
                    return;
                }
            }
        }
    }
}

/// Generate the mesh for a problem.
pub fn generate_mesh(
    domain: &ConvexPolygon,
    h: f64,
    atoms: &[(Point, f64)],
    density: &DensityField,
    explicit_nodes: Option<&[Point]>,
) -> Result<Mesh, SolverError> {
    if h <= 0.0 {
        return Err(SolverError::BadMeshSize(h));
    }
    for (p, m) in atoms {
        if *m <= 0.0 {
            return Err(SolverError::NonPositiveAtom(*m));
        }
        if domain.inner_margin(*p) <= 0.0 {
            return Err(SolverError::AtomOutsideDomain(p[0], p[1]));
        }
    }

    let mut nodes: Vec<Point>;
    let mut is_boundary: Vec<bool>;
    if let Some(given) = explicit_nodes {
        nodes = given.to_vec();
        is_boundary = nodes
            .iter()
            .map(|p| domain.inner_margin(*p) < 1e-9 * h)
            .collect();
    } else {
        nodes = domain.boundary_samples(h);
        is_boundary = vec![true; nodes.len()];
        let (min, max) = domain.bounds();
        let margin = 0.45 * h;
        let mut y = (min[1] / h).floor() * h;
        while y <= max[1] {
            let mut x = (min[0] / h).floor() * h;
            while x <= max[0] {
                let p = [x, y];
                if domain.inner_margin(p) >= margin {
                    nodes.push(p);
                    is_boundary.push(false);
                }
                x += h;
            }
            y += h;
        }
    }

    // Place a node exactly at each atom: snap when one is already close,
    // otherwise insert (evicting interior nodes that crowd it).
    let mut atom_nodes = Vec::new();
    for (p, mass) in atoms {
        let mut nearest = usize::MAX;
        let mut nearest_d = f64::INFINITY;
        for (i, q) in nodes.iter().enumerate() {
            if is_boundary[i] {
                continue;
            }
            let d = dist(*p, *q);
            if d < nearest_d {
                nearest_d = d;
                nearest = i;
            }
        }
        if nearest != usize::MAX && nearest_d <= 0.05 * h {
            atom_nodes.push((nearest, *mass, nearest_d));
        } else {
            // Evict interior nodes within 0.45 h, then insert.
            let evict: Vec<usize> = (0..nodes.len())
                .filter(|&i| !is_boundary[i] && dist(nodes[i], *p) < 0.45 * h)
                .collect();
            for &i in evict.iter().rev() {
                nodes.remove(i);
                is_boundary.remove(i);
                for a in atom_nodes.iter_mut() {
                    let (ref mut idx, _, _): &mut (usize, f64, f64) = a;
                    if *idx > i {
                        *idx -= 1;
                    }
                }
            }
            nodes.push(*p);
            is_boundary.push(false);
            atom_nodes.push((nodes.len() - 1, *mass, 0.0));
        }
    }

    let interior: Vec<usize> = (0..nodes.len()).filter(|&i| !is_boundary[i]).collect();
    if interior.is_empty() {
        return Err(SolverError::EmptyMesh);
    }

    let mut targets = voronoi_targets(&nodes, &is_boundary, domain, density, h);
    for &(i, mass, _) in &atom_nodes {
        targets[i] += mass;
    }

    Ok(Mesh {
        nodes,
        is_boundary,
        interior,
        h,
        atom_nodes,
        targets,
    })
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Density mass of the Voronoi cell of every interior node, clipped to
/// the domain. Cells are computed by clipping with perpendicular
/// bisectors of neighbors within an expanding radius; a cell entirely
/// inside the scanned radius is final.
fn voronoi_targets(
    nodes: &[Point],
    is_boundary: &[bool],
    domain: &ConvexPolygon,
    density: &DensityField,
    h: f64,
) -> Vec<f64> {
    let buckets = Buckets::build(nodes, 2.0 * h);
    let mut targets = vec![0.0; nodes.len()];
    for i in 0..nodes.len() {
        if is_boundary[i] {
            continue;
        }
        let xi = nodes[i];
        // Start from the domain polygon shifted around xi.
        let mut poly: Vec<Point> = domain.vertices().to_vec();
        let mut scanned: Vec<u32> = Vec::new();
        buckets.scan_rings(xi, |ring, j| {
            if j as usize != i {
                scanned.push(j);
            }
            // Continue while the ring could still cut: a bisector of a
            // site at distance d only matters within d/2 of xi.
            let ring_min_dist = (ring as f64 - 1.0).max(0.0) * buckets.cell_size();
            let max_r = poly_max_dist(&poly, xi);
            ring_min_dist / 2.0 < max_r + 1e-12
        });
        // Sort by distance so the polygon shrinks early.
        scanned.sort_by(|&a, &b| {
            dist(nodes[a as usize], xi)
                .partial_cmp(&dist(nodes[b as usize], xi))
                .unwrap()
        });
        for &j in &scanned {
            let xj = nodes[j as usize];
            let d = [xj[0] - xi[0], xj[1] - xi[1]];
            let offset =
                0.5 * (xj[0] * xj[0] + xj[1] * xj[1] - xi[0] * xi[0] - xi[1] * xi[1]);
            // Half-plane p . d <= offset keeps points nearer xi than xj.
            if poly_cut_possible(&poly, d, offset) {
                poly = clip_halfplane(&poly, d, offset);
                if poly.is_empty() {
                    break;
                }
            }
        }
        let area = polygon_area(&poly);
        targets[i] = match density {
            DensityField::Constant(f) => f * area,
            DensityField::Function(f) => {
                // Centroid rule; adequate for slowly varying densities.
                let c = poly_centroid(&poly);
                f(c) * area
            }
        };
    }
    targets
}

fn poly_max_dist(poly: &[Point], x: Point) -> f64 {
    poly.iter().map(|p| dist(*p, x)).fold(0.0, f64::max)
}

fn poly_cut_possible(poly: &[Point], d: Point, offset: f64) -> bool {
    poly.iter()
        .any(|p| p[0] * d[0] + p[1] * d[1] > offset)
}

fn poly_centroid(poly: &[Point]) -> Point {
    let m = poly.len().max(1) as f64;
    let mut c = [0.0, 0.0];
    for p in poly {
        c[0] += p[0];
        c[1] += p[1];
    }
    [c[0] / m, c[1] / m]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_mesh_targets_sum_close_to_area() {
        let sq = ConvexPolygon::new(vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
            .unwrap();
        let mesh = generate_mesh(&sq, 0.25, &[], &DensityField::Constant(1.0), None).unwrap();
        let total: f64 = mesh.targets.iter().sum();
        // Interior Voronoi cells cover the square minus a boundary strip.
        assert!(total > 2.8 && total < 4.0, "total {total}");
        // Interior grid nodes have h^2 cells exactly.
        for &i in &mesh.interior {
            let p = mesh.nodes[i];
            if p[0].abs() < 0.5 && p[1].abs() < 0.5 {
                assert!((mesh.targets[i] - 0.0625).abs() < 1e-12, "target {}", mesh.targets[i]);
            }
        }
    }

    #[test]
    fn atom_gets_exact_node() {
        let sq = ConvexPolygon::new(vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
            .unwrap();
        let atom_p = [0.1001, -0.2002];
        let mesh = generate_mesh(&sq, 0.25, &[(atom_p, 2.0)], &DensityField::Constant(1.0), None)
            .unwrap();
        let (idx, mass, snap) = mesh.atom_nodes[0];
        assert_eq!(mesh.nodes[idx], atom_p);
        assert_eq!(mass, 2.0);
        assert_eq!(snap, 0.0);
        assert!(mesh.targets[idx] >= 2.0);
    }

    #[test]
    fn atom_outside_rejected() {
        let sq = ConvexPolygon::new(vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
            .unwrap();
        assert!(matches!(
            generate_mesh(&sq, 0.25, &[([2.0, 0.0], 1.0)], &DensityField::Constant(1.0), None),
            Err(SolverError::AtomOutsideDomain(_, _))
        ));
    }
}
