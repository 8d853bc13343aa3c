//! Monge-Ampere measures of PL convex functions.
//!
//! The atom at an interior node is the exact polygon area of its
//! subgradient cell. The fast route takes the convex hull of the
//! gradients of the facets incident to the node (the normal-fan cell);
//! the brute-force route intersects the half-planes
//! `{ p : p . (x_j - x_i) <= u_j - u_i }` over all other nodes `j` and is
//! kept as an independent oracle.

use super::polygon::{clip_halfplane, convex_hull_points, polygon_area};
use super::{dist, sub, PLConvexFunction, Point};

/// A Monge-Ampere measure split into per-node atoms and an optional
/// absolutely continuous per-cell part. Boundary nodes have unbounded
/// subgradient cells; they carry no atom and are listed separately.
#[derive(Debug, Clone)]
pub struct MAMeasure {
    /// `(node index, mass)` for interior nodes, in node order.
    pub atoms: Vec<(usize, f64)>,
    /// Optional per-triangle absolutely continuous mass (used for
    /// discretized density targets; `None` for measures of PL
    /// functions, which are purely atomic).
    pub per_cell: Option<Vec<f64>>,
    /// Sum of atoms plus the per-cell part.
    pub total_mass: f64,
    /// Nodes excluded from the atom list (unbounded cells).
    pub boundary_nodes: Vec<usize>,
}

impl MAMeasure {
    pub fn atom_mass(&self, node: usize) -> Option<f64> {
        self.atoms
            .iter()
            .find(|(i, _)| *i == node)
            .map(|(_, m)| *m)
    }
}

/// Exact Monge-Ampere measure of a PL convex function: one atom per
/// interior node, equal to the area of the convex hull of the incident
/// facet gradients.
pub fn ma_measure(f: &PLConvexFunction) -> MAMeasure {
    let mut atoms = Vec::new();
    let mut total = 0.0;
    for i in 0..f.len() {
        if f.is_boundary(i) {
            continue;
        }
        let mass = node_cell_area(f, i);
        total += mass;
        atoms.push((i, mass));
    }
    MAMeasure {
        atoms,
        per_cell: None,
        total_mass: total,
        boundary_nodes: f.boundary_nodes(),
    }
}

/// Area of the subgradient cell of node `i` from the triangulation
/// adjacency (gradients of incident facets).
pub fn node_cell_area(f: &PLConvexFunction, i: usize) -> f64 {
    let grads = f.incident_gradients(i);
    cell_area_from_gradients(&grads)
}

pub(crate) fn cell_area_from_gradients(grads: &[Point]) -> f64 {
    if grads.len() < 3 {
        return 0.0;
    }
    let hull = convex_hull_points(grads);
    polygon_area(&hull)
}

/// Brute-force subgradient cell of an interior node: intersection of the
/// half-planes from all other nodes. The initial box is derived from the
/// four axis-direction constraints, which keeps the clip numerically
/// tight. Panics if called on a boundary node (the cell is unbounded).
pub fn brute_force_cell(f: &PLConvexFunction, i: usize) -> Vec<Point> {
    brute_force_cell_raw(f.nodes(), f.values(), i)
}

/// Same as [`brute_force_cell`] but on raw node/value slices, so the
/// solver can use it on meshes mid-iteration (where values are not yet
/// in convex position and a `PLConvexFunction` cannot be built).
///
/// Two clipping passes: a coarse pass from a huge box localizes the
/// cell, then a tight box around it is re-clipped so every final vertex
/// is computed in small coordinates at full precision.
pub fn brute_force_cell_raw(nodes: &[Point], values: &[f64], i: usize) -> Vec<Point> {
    let xi = nodes[i];
    let ui = values[i];
    let mut order: Vec<usize> = (0..nodes.len()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| {
        dist(nodes[a], xi)
            .partial_cmp(&dist(nodes[b], xi))
            .unwrap()
    });
    let clip_all = |init: Vec<Point>| -> Vec<Point> {
        let mut poly = init;
        for &j in &order {
            let d = sub(nodes[j], xi);
            poly = clip_halfplane(&poly, d, values[j] - ui);
            if poly.is_empty() {
                break;
            }
        }
        poly
    };
    const BIG: f64 = 1e6;
    let coarse = clip_all(vec![[-BIG, -BIG], [BIG, -BIG], [BIG, BIG], [-BIG, BIG]]);
    if coarse.is_empty() {
        return coarse;
    }
    let (lo, hi) = super::bounds(&coarse);
    let margin = 1.0 + 2.0 * (hi[0] - lo[0] + hi[1] - lo[1]);
    clip_all(vec![
        [lo[0] - margin, lo[1] - margin],
        [hi[0] + margin, lo[1] - margin],
        [hi[0] + margin, hi[1] + margin],
        [lo[0] - margin, hi[1] + margin],
    ])
}

/// Area of the brute-force cell.
pub fn brute_force_cell_area(f: &PLConvexFunction, i: usize) -> f64 {
    polygon_area(&brute_force_cell(f, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_pl;

    fn cone5() -> PLConvexFunction {
        build_pl(
            vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![0.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn five_node_cone_has_atom_exactly_four() {
        let f = cone5();
        let m = ma_measure(&f);
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].0, 0);
        assert_eq!(m.atoms[0].1, 4.0); // conv{(+-1, +-1)} exactly
        assert_eq!(m.boundary_nodes.len(), 4);
    }

    #[test]
    fn cone_brute_force_agrees_exactly() {
        let f = cone5();
        assert!((brute_force_cell_area(&f, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn paraboloid_grid_masses_sum_to_domain_area() {
        let m = 10usize;
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
        let f = build_pl(nodes, values).unwrap();
        let meas = ma_measure(&f);
        let h = 2.0 / m as f64;
        // Interior Voronoi boxes of the grid cover (2 - h)^2 exactly.
        let expect = (2.0 - h) * (2.0 - h);
        assert!(
            (meas.total_mass - expect).abs() < 1e-9,
            "total {} vs {}",
            meas.total_mass,
            expect
        );
        for &(i, mass) in &meas.atoms {
            assert!(
                (mass - h * h).abs() < 2.0 * h * h,
                "node {i} mass {mass} vs h^2 {}",
                h * h
            );
        }
    }

    #[test]
    fn sixteen_plane_cone_mass_matches_inscribed_polygon() {
        // PL cone u = max_k <g_k, x> with g_k on the unit circle; the
        // subgradient at 0 is the inscribed 16-gon, area 8 sin(pi/8).
        // Ring nodes sit at the ridge directions between adjacent g_k so
        // each facet keeps gradient exactly g_k.
        let k = 16usize;
        let mut nodes = vec![[0.0, 0.0]];
        let mut values = vec![0.0];
        let r = 2.0;
        for j in 0..k {
            let a = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / k as f64;
            nodes.push([r * a.cos(), r * a.sin()]);
            values.push(r * (std::f64::consts::PI / k as f64).cos());
        }
        let f = build_pl(nodes, values).unwrap();
        let meas = ma_measure(&f);
        let expect = 8.0 * (std::f64::consts::PI / 8.0).sin();
        let got = meas.atom_mass(0).unwrap();
        assert!((got - expect).abs() < 1e-10, "got {got}, want {expect}");
        let brute = brute_force_cell_area(&f, 0);
        assert!((brute - expect).abs() < 1e-10, "brute {brute}");
    }

    #[test]
    fn adjacency_and_brute_force_agree_on_small_instances() {
        // Random strictly convex instances built from max-of-planes data.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _case in 0..25 {
            let n = rng.gen_range(5..=12);
            let mut nodes: Vec<Point> = Vec::new();
            while nodes.len() < n {
                let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if nodes.iter().all(|q| dist(*q, p) > 0.05) {
                    nodes.push(p);
                }
            }
            let values: Vec<f64> = nodes
                .iter()
                .map(|p| 0.7 * (p[0] * p[0] + p[1] * p[1]) + 0.3 * p[0] * p[1])
                .collect();
            let f = match build_pl(nodes, values) {
                Ok(f) => f,
                Err(_) => continue,
            };
            for i in 0..f.len() {
                if f.is_boundary(i) {
                    continue;
                }
                let fast = node_cell_area(&f, i);
                let brute = brute_force_cell_area(&f, i);
                assert!(
                    (fast - brute).abs() <= 1e-10,
                    "node {i}: fast {fast} vs brute {brute}"
                );
            }
        }
    }

    #[test]
    fn unimodular_shear_preserves_atoms() {
        // u(Ax) - l(x) with det A = 1 leaves every atom mass unchanged.
        let f = cone5();
        let shear = |p: Point| -> Point { [p[0] + 0.6 * p[1], p[1]] };
        // New nodes y = A^-1 x so that sampling u(Ay) hits old values.
        let nodes2: Vec<Point> = f.nodes().iter().map(|p| shear(*p)).collect();
        let values2: Vec<f64> = f
            .values()
            .iter()
            .zip(nodes2.iter())
            .map(|(v, p)| v - 0.1 * p[0] + 0.05 * p[1])
            .collect();
        let g = build_pl(nodes2, values2).unwrap();
        let m1 = ma_measure(&f);
        let m2 = ma_measure(&g);
        assert_eq!(m1.atoms.len(), m2.atoms.len());
        for (a, b) in m1.atoms.iter().zip(m2.atoms.iter()) {
            assert!((a.1 - b.1).abs() < 1e-10);
        }
    }
}
