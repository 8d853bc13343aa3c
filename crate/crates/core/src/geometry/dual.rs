//! Discrete Legendre transforms of PL convex functions.
//!
//! The conjugate of a PL convex function on its node hull is again PL:
//! its kink vertices are exactly the facet gradients of the primal, and
//! its value there is `max_i (x_i . y - u_i)`. Conjugating twice
//! reproduces the primal values at every node.

use super::{build_pl, dist, dot, GeometryError, PLConvexFunction, Point};

/// Conjugate value `f*(y) = max_i (x_i . y - u_i)`. Exact for PL convex
/// functions on their node hull (the sup over the domain is attained at
/// a node).
pub fn conjugate_at(f: &PLConvexFunction, y: Point) -> f64 {
    f.nodes()
        .iter()
        .zip(f.values())
        .map(|(x, u)| dot(*x, y) - u)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Legendre transform as a PL convex function: dual nodes are the
/// deduplicated facet gradients, dual values the conjugate there.
///
/// Conjugating the result with [`conjugate_at`] reproduces the primal
/// values at every node; rebuilding a second PL transform reproduces
/// them at interior nodes (planes supported only on the boundary of the
/// gradient hull have no facet of their own in the dual).
///
/// Fails with [`GeometryError::DegenerateDual`] when the gradient set is
/// affinely degenerate (for example a function with a single facet);
/// `conjugate_at` still works in that case.
pub fn legendre_pl(f: &PLConvexFunction) -> Result<PLConvexFunction, GeometryError> {
    let mut grads: Vec<Point> = Vec::new();
    let gscale = f
        .triangulation()
        .grads
        .iter()
        .map(|g| dot(*g, *g).sqrt())
        .fold(1.0f64, f64::max);
    for g in &f.triangulation().grads {
        if grads.iter().all(|q| dist(*q, *g) > 1e-12 * gscale) {
            grads.push(*g);
        }
    }
    if grads.len() < 3 {
        return Err(GeometryError::DegenerateDual);
    }
    let values: Vec<f64> = grads.iter().map(|g| conjugate_at(f, *g)).collect();
    build_pl(grads, values).map_err(|e| match e {
        GeometryError::CollinearNodes | GeometryError::TooFewNodes(_) => {
            GeometryError::DegenerateDual
        }
        other => other,
    })
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
    fn dual_of_paraboloid_is_paraboloid() {
        let f = grid(10, |x, y| 0.5 * (x * x + y * y));
        let dual = legendre_pl(&f).unwrap();
        for (g, v) in dual.nodes().iter().zip(dual.values()) {
            let expect = 0.5 * dot(*g, *g);
            // PL conjugation undershoots by at most (h/2)^2 / 2.
            assert!((v - expect).abs() < 0.02, "g={g:?} v={v} expect={expect}");
        }
    }

    #[test]
    fn dual_of_cone_is_flat_over_gradient_hull() {
        let f = build_pl(
            vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![0.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let dual = legendre_pl(&f).unwrap();
        // Dual nodes are the four gradients (+-1, +-1); all values 0.
        assert_eq!(dual.len(), 4);
        for v in dual.values() {
            assert!(v.abs() < 1e-12);
        }
        for g in &dual.triangulation().grads {
            assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
        }
    }

    #[test]
    fn biconjugation_recovers_values_at_nodes() {
        let f = grid(8, |x, y| 0.6 * x * x + 0.4 * y * y + 0.25 * x * y + 0.1 * x);
        let dual = legendre_pl(&f).unwrap();
        for (x, u) in f.nodes().iter().zip(f.values()) {
            let back = conjugate_at(&dual, *x);
            assert!(
                (back - u).abs() < 1e-10,
                "node {x:?}: {back} vs {u}"
            );
        }
    }

    #[test]
    fn double_transform_matches_at_interior_nodes() {
        // Interior nodes have positive-area subgradient cells, so they
        // reappear as dual facet gradients and the built double
        // transform is exact there. Boundary-supported planes are only
        // recovered by the conjugate sup form (previous test).
        let f = grid(6, |x, y| 0.5 * (x * x + y * y));
        let ddual = legendre_pl(&legendre_pl(&f).unwrap()).unwrap();
        for i in 0..f.len() {
            if f.is_boundary(i) {
                continue;
            }
            let v = ddual.evaluate(f.nodes()[i]).unwrap();
            assert!((v - f.values()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn biconjugation_exact_even_for_cone() {
        let f = build_pl(
            vec![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            vec![0.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let dual = legendre_pl(&f).unwrap();
        for (x, u) in f.nodes().iter().zip(f.values()) {
            assert!((conjugate_at(&dual, *x) - u).abs() < 1e-12);
        }
    }
}
