//! Lifted lower-hull triangulation.
//!
//! The triangulation of the lower convex hull of `(x_i, u_i)` is built in
//! two stages: a lexicographic scan produces some triangulation of the
//! planar point set, then Lawson flips driven by the lifted local
//! convexity test turn it into the lower hull. For convex-position data
//! the flipped triangulation is locally convex across every interior
//! edge, which makes the PL surface globally convex and hence equal to
//! the envelope; data that still has a reflex edge after flips ran out of
//! legal moves and is rejected as non-convex.
//!
//! Ties from coplanar lifted facets are broken deterministically by the
//! lexicographic insertion order; measures computed downstream are
//! independent of the choice.

use super::{cross, dist, orient, sub, GeometryError, Point, HEIGHT_TOL};

const NONE: u32 = u32::MAX;

/// Lower-hull triangulation with adjacency, facet gradients, and
/// per-node incidence lists.
#[derive(Debug, Clone)]
pub struct Triangulation {
    /// CCW vertex triples.
    pub tris: Vec<[u32; 3]>,
    /// `nbrs[t][k]` is the triangle across the edge opposite `tris[t][k]`.
    pub nbrs: Vec<[u32; 3]>,
    /// Facet plane gradients.
    pub grads: Vec<[f64; 2]>,
    /// Incident triangles per node, angularly ordered.
    pub incident: Vec<Vec<u32>>,
}

struct Builder<'a> {
    nodes: &'a [Point],
    values: &'a [f64],
    tris: Vec<[u32; 3]>,
    nbrs: Vec<[u32; 3]>,
    eps_area: f64,
    flip_tol: f64,
}

/// Build the lower-hull triangulation of the lifted nodes.
pub fn lower_hull_triangulation(
    nodes: &[Point],
    values: &[f64],
) -> Result<Triangulation, GeometryError> {
    let n = nodes.len();
    let (min, max) = super::bounds(nodes);
    let scale = dist(min, max).max(1e-12);
    let height_scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (nodes[i as usize], nodes[j as usize]);
        a[0].partial_cmp(&b[0])
            .unwrap()
            .then(a[1].partial_cmp(&b[1]).unwrap())
            .then(i.cmp(&j))
    });
    for w in order.windows(2) {
        let (a, b) = (nodes[w[0] as usize], nodes[w[1] as usize]);
        if dist(a, b) <= 1e-12 * scale {
            return Err(GeometryError::DuplicateNodes(w[0] as usize, w[1] as usize));
        }
    }

    let mut b = Builder {
        nodes,
        values,
        tris: Vec::with_capacity(2 * n),
        nbrs: Vec::with_capacity(2 * n),
        eps_area: 1e-12 * scale * scale,
        flip_tol: 1e-12 * height_scale,
    };
    b.scan_triangulate(&order)?;
    b.rebuild_adjacency();
    b.flip_to_lower_hull();
    b.validate_convexity()?;
    Ok(b.finish())
}

impl<'a> Builder<'a> {
    fn p(&self, v: u32) -> Point {
        self.nodes[v as usize]
    }

    fn h(&self, v: u32) -> f64 {
        self.values[v as usize]
    }

    /// Insert points in lexicographic order, fanning each new point to
    /// the strictly visible arc of the current hull. A collinear prefix
    /// accumulates into a chain until the first point off the line.
    fn scan_triangulate(&mut self, order: &[u32]) -> Result<(), GeometryError> {
        // CCW hull cycle; hull_tri[i] is the triangle inside the directed
        // edge hull[i] -> hull[i+1].
        let mut hull: Vec<u32> = Vec::new();
        let mut hull_tri: Vec<u32> = Vec::new();
        let mut chain: Vec<u32> = Vec::new();

        for &v in order {
            if hull.is_empty() {
                if chain.len() < 2 {
                    chain.push(v);
                    continue;
                }
                // Anchor the collinearity test on the farthest pair so a
                // short noisy baseline cannot misclassify.
                let anchor = self.p(chain[0]);
                let far = *chain
                    .iter()
                    .max_by(|&&s, &&t| {
                        dist(anchor, self.p(s))
                            .partial_cmp(&dist(anchor, self.p(t)))
                            .unwrap()
                    })
                    .unwrap();
                let b = self.p(far);
                let o = orient(anchor, b, self.p(v));
                if o.abs() <= self.eps_area {
                    chain.push(v);
                    continue;
                }
                // First off-line point: fan to the whole chain, sorted
                // along the line (coordinate noise can jumble the
                // lexicographic order of near-collinear points) and
                // oriented so the fan triangles are CCW.
                let dir = sub(b, anchor);
                chain.sort_by(|&s, &t| {
                    let ps = super::dot(sub(self.p(s), anchor), dir);
                    let pt = super::dot(sub(self.p(t), anchor), dir);
                    ps.partial_cmp(&pt).unwrap()
                });
                let o = orient(self.p(chain[0]), self.p(*chain.last().unwrap()), self.p(v));
                let lo: Vec<u32> = if o > 0.0 {
                    chain.clone()
                } else {
                    chain.iter().rev().copied().collect()
                };
                let mut fans = Vec::new();
                for w in lo.windows(2) {
                    fans.push(self.push_tri([w[0], w[1], v]));
                }
                // Hull: chain then v; inside triangles per edge.
                hull = lo;
                hull.push(v);
                hull_tri.clear();
                hull_tri.extend_from_slice(&fans); // edges (c_i, c_{i+1})
                hull_tri.push(*fans.last().unwrap()); // edge (c_k, v)
                hull_tri.push(fans[0]); // edge (v, c_0)
                continue;
            }

            let m = hull.len();
            let vis: Vec<bool> = (0..m)
                .map(|i| {
                    let a = self.p(hull[i]);
                    let bq = self.p(hull[(i + 1) % m]);
                    orient(a, bq, self.p(v)) < -self.eps_area
                })
                .collect();
            let num_vis = vis.iter().filter(|&&x| x).count();
            if num_vis == m {
                return Err(GeometryError::CollinearNodes);
            }
            if num_vis == 0 {
                // The point is within tolerance of a hull edge (collinear
                // boundary samples land here): split that edge and the
                // triangle behind it instead of fanning.
                self.split_hull_edge(&mut hull, &mut hull_tri, v)?;
                continue;
            }
            let mut start = 0;
            for i in 0..m {
                if vis[i] && !vis[(i + m - 1) % m] {
                    start = i;
                    break;
                }
            }
            // Fan over the contiguous visible arc.
            let mut fan_prev = NONE;
            let mut first_new = NONE;
            let mut arc = 0usize;
            while arc < m && vis[(start + arc) % m] {
                let i = (start + arc) % m;
                let (a, bq) = (hull[i], hull[(i + 1) % m]);
                let t = self.push_tri([a, v, bq]);
                if first_new == NONE {
                    first_new = t;
                }
                fan_prev = t;
                arc += 1;
            }
            debug_assert_eq!(arc, num_vis, "visible edges must form one arc");
            // New hull: walk the invisible part from the end of the arc
            // around to its start, then close with v.
            let mut new_hull = Vec::with_capacity(m + 1 - arc);
            let mut new_ht = Vec::with_capacity(m + 2 - arc);
            let mut i = (start + arc) % m;
            loop {
                new_hull.push(hull[i]);
                if i == start {
                    break;
                }
                new_ht.push(hull_tri[i]);
                i = (i + 1) % m;
            }
            new_hull.push(v);
            new_ht.push(first_new); // edge (hull[start], v)
            new_ht.push(fan_prev); // edge (v, hull[start+arc])
            hull = new_hull;
            hull_tri = new_ht;
        }

        if self.tris.is_empty() {
            return Err(GeometryError::CollinearNodes);
        }
        Ok(())
    }

    /// Insert a point lying (within tolerance) on a hull edge: split the
    /// edge and the triangle behind it, keeping the hull cycle aligned.
    fn split_hull_edge(
        &mut self,
        hull: &mut Vec<u32>,
        hull_tri: &mut Vec<u32>,
        v: u32,
    ) -> Result<(), GeometryError> {
        let m = hull.len();
        let (mut best, mut best_d) = (usize::MAX, f64::INFINITY);
        for i in 0..m {
            let d = point_segment_distance(self.p(v), self.p(hull[i]), self.p(hull[(i + 1) % m]));
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let scale = dist(self.p(hull[0]), self.p(v)).max(1.0);
        if best == usize::MAX || best_d > 1e-9 * scale {
            return Err(GeometryError::CollinearNodes);
        }
        let i = best;
        let (a, b) = (hull[i], hull[(i + 1) % m]);
        let t = hull_tri[i];
        debug_assert_ne!(t, NONE);
        // t = (a, b, c) cyclically; split into (a, v, c) and (v, b, c).
        let tri = self.tris[t as usize];
        let ka = (0..3).find(|&k| tri[k] == a).expect("hull edge in its triangle");
        let c = tri[(ka + 2) % 3];
        debug_assert_eq!(tri[(ka + 1) % 3], b);
        self.tris[t as usize] = [a, v, c];
        let t2 = self.push_tri([v, b, c]);
        hull.insert(i + 1, v);
        hull_tri.insert(i + 1, t2);
        // hull_tri[i] still points at t, which now borders (a, v).
        Ok(())
    }

    fn push_tri(&mut self, v: [u32; 3]) -> u32 {
        debug_assert!(
            orient(self.p(v[0]), self.p(v[1]), self.p(v[2])) > 0.0,
            "triangles must be CCW"
        );
        self.tris.push(v);
        self.nbrs.push([NONE; 3]);
        (self.tris.len() - 1) as u32
    }

    /// Rebuild the whole adjacency structure from a directed-edge map.
    /// Scanning leaves links unset; this makes the structure watertight
    /// before flipping (unlinked interior edges would silently escape
    /// both flips and validation).
    fn rebuild_adjacency(&mut self) {
        use std::collections::HashMap;
        let mut twin: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
        for (t, tri) in self.tris.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let old = twin.insert(e, (t as u32, k));
                debug_assert!(old.is_none(), "duplicate directed edge {e:?}");
            }
        }
        for (t, tri) in self.tris.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[(k + 2) % 3], tri[(k + 1) % 3]);
                self.nbrs[t][k] = twin.get(&e).map_or(NONE, |&(s, _)| s);
            }
        }
    }

    fn shared_edge(&self, t1: u32, t2: u32) -> Option<(usize, usize)> {
        let a = self.tris[t1 as usize];
        let b = self.tris[t2 as usize];
        for k1 in 0..3 {
            let e = (a[(k1 + 1) % 3], a[(k1 + 2) % 3]);
            for k2 in 0..3 {
                if (b[(k2 + 1) % 3], b[(k2 + 2) % 3]) == (e.1, e.0) {
                    return Some((k1, k2));
                }
            }
        }
        None
    }

    /// Plane through the lifted triangle `t`, evaluated at `x`.
    fn plane_at(&self, t: u32, x: Point) -> f64 {
        let [a, b, c] = self.tris[t as usize];
        let (pa, pb, pc) = (self.p(a), self.p(b), self.p(c));
        let area = orient(pa, pb, pc);
        let wa = orient(x, pb, pc) / area;
        let wb = orient(pa, x, pc) / area;
        let wc = 1.0 - wa - wb;
        wa * self.h(a) + wb * self.h(b) + wc * self.h(c)
    }

    /// Lawson flips with the lifted convexity test until no edge can be
    /// improved. Each flip strictly lowers the lifted surface, so the
    /// loop terminates.
    fn flip_to_lower_hull(&mut self) {
        use std::collections::VecDeque;
        let mut queue: VecDeque<(u32, usize)> = VecDeque::new();
        for t in 0..self.tris.len() as u32 {
            for k in 0..3 {
                queue.push_back((t, k));
            }
        }
        let mut guard = 0usize;
        let max_ops = 200 * self.tris.len() * (64 + self.tris.len());
        while let Some((t1, k1)) = queue.pop_front() {
            guard += 1;
            if guard > max_ops {
                break; // validation flags anything left unresolved
            }
            let t2 = self.nbrs[t1 as usize][k1];
            if t2 == NONE {
                continue;
            }
            let (e1, e2) = match self.shared_edge(t1, t2) {
                Some(p) => p,
                None => continue,
            };
            if e1 != k1 {
                continue; // stale entry
            }
            // t1 = (c, a, b) cyclically with shared edge (a, b);
            // t2 = (d, b, a) cyclically with shared edge (b, a).
            let tri1 = self.tris[t1 as usize];
            let tri2 = self.tris[t2 as usize];
            let c = tri1[e1];
            let a = tri1[(e1 + 1) % 3];
            let b = tri1[(e1 + 2) % 3];
            let d = tri2[e2];
            let gain = self.plane_at(t1, self.p(d)) - self.h(d);
            if gain <= self.flip_tol {
                continue;
            }
            // Geometric legality: quad (a, d, b, c) strictly convex.
            if orient(self.p(c), self.p(a), self.p(d)) <= self.eps_area
                || orient(self.p(d), self.p(b), self.p(c)) <= self.eps_area
            {
                continue;
            }
            let n_ad = self.nbrs[t2 as usize][(e2 + 1) % 3]; // across (a, d)
            let n_db = self.nbrs[t2 as usize][(e2 + 2) % 3]; // across (d, b)
            let n_bc = self.nbrs[t1 as usize][(e1 + 1) % 3]; // across (b, c)
            let n_ca = self.nbrs[t1 as usize][(e1 + 2) % 3]; // across (c, a)

            // Replace by (a, d, c) and (d, b, c) sharing edge (d, c).
            self.tris[t1 as usize] = [a, d, c];
            self.tris[t2 as usize] = [d, b, c];
            self.nbrs[t1 as usize] = [t2, n_ca, n_ad];
            self.nbrs[t2 as usize] = [n_bc, t1, n_db];
            for (nt, me) in [(n_ad, t1), (n_ca, t1), (n_bc, t2), (n_db, t2)] {
                if nt != NONE {
                    if let Some((ke, kn)) = self.shared_edge(me, nt) {
                        self.nbrs[me as usize][ke] = nt;
                        self.nbrs[nt as usize][kn] = me;
                    }
                }
            }
            for t in [t1, t2] {
                for k in 0..3 {
                    queue.push_back((t, k));
                }
            }
        }
    }

    /// After flipping, every interior edge must be locally convex within
    /// the hull-membership tolerance; a remaining reflex edge means the
    /// value assignment is not in convex position.
    fn validate_convexity(&self) -> Result<(), GeometryError> {
        let height_scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tol = HEIGHT_TOL * height_scale;
        for t1 in 0..self.tris.len() as u32 {
            for k in 0..3 {
                let t2 = self.nbrs[t1 as usize][k];
                if t2 == NONE || t2 < t1 {
                    continue;
                }
                let (_, e2) = match self.shared_edge(t1, t2) {
                    Some(p) => p,
                    None => continue,
                };
                let d = self.tris[t2 as usize][e2];
                let gap = self.plane_at(t1, self.p(d)) - self.h(d);
                if gap > tol {
                    let a = self.tris[t1 as usize][(k + 1) % 3];
                    return Err(GeometryError::NonConvexValues(a as usize, d as usize));
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Triangulation {
        let mut grads = Vec::with_capacity(self.tris.len());
        for tri in &self.tris {
            grads.push(facet_gradient(self.nodes, self.values, *tri));
        }
        let mut incident = vec![Vec::new(); self.nodes.len()];
        for (t, tri) in self.tris.iter().enumerate() {
            for &v in tri {
                incident[v as usize].push(t as u32);
            }
        }
        // Angular order makes cell polygons and summation deterministic.
        for (v, list) in incident.iter_mut().enumerate() {
            let pv = self.nodes[v];
            list.sort_by(|&s, &t| {
                let cs = tri_centroid(self.nodes, self.tris[s as usize]);
                let ct = tri_centroid(self.nodes, self.tris[t as usize]);
                angle_about(pv, cs)
                    .partial_cmp(&angle_about(pv, ct))
                    .unwrap()
                    .then(s.cmp(&t))
            });
        }
        Triangulation {
            tris: self.tris,
            nbrs: self.nbrs,
            grads,
            incident,
        }
    }
}

fn tri_centroid(nodes: &[Point], tri: [u32; 3]) -> Point {
    let (a, b, c) = (
        nodes[tri[0] as usize],
        nodes[tri[1] as usize],
        nodes[tri[2] as usize],
    );
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

fn angle_about(center: Point, p: Point) -> f64 {
    (p[1] - center[1]).atan2(p[0] - center[0])
}

/// Gradient of the plane through the three lifted vertices.
pub(crate) fn facet_gradient(nodes: &[Point], values: &[f64], tri: [u32; 3]) -> [f64; 2] {
    let (a, b, c) = (
        nodes[tri[0] as usize],
        nodes[tri[1] as usize],
        nodes[tri[2] as usize],
    );
    let (ua, ub, uc) = (
        values[tri[0] as usize],
        values[tri[1] as usize],
        values[tri[2] as usize],
    );
    let e1 = sub(b, a);
    let e2 = sub(c, a);
    let det = cross(e1, e2);
    let r1 = ub - ua;
    let r2 = uc - ua;
    [
        (r1 * e2[1] - r2 * e1[1]) / det,
        (e1[0] * r2 - e2[0] * r1) / det,
    ]
}

impl Triangulation {
    /// Walk to the triangle containing `x`; `None` if outside the hull.
    pub fn locate(&self, nodes: &[Point], x: Point) -> Option<usize> {
        if self.tris.is_empty() {
            return None;
        }
        let mut t = 0usize;
        let mut steps = 0usize;
        let max_steps = 4 * self.tris.len() + 16;
        'walk: while steps < max_steps {
            steps += 1;
            let tri = self.tris[t];
            for k in 0..3 {
                let a = nodes[tri[(k + 1) % 3] as usize];
                let b = nodes[tri[(k + 2) % 3] as usize];
                if orient(a, b, x) < -1e-12 {
                    let nb = self.nbrs[t][k];
                    if nb == NONE {
                        break 'walk;
                    }
                    t = nb as usize;
                    continue 'walk;
                }
            }
            return Some(t);
        }
        // Deterministic fallback for degenerate walks.
        let mut best: Option<(usize, f64)> = None;
        for (t, tri) in self.tris.iter().enumerate() {
            let (a, b, c) = (
                nodes[tri[0] as usize],
                nodes[tri[1] as usize],
                nodes[tri[2] as usize],
            );
            let worst = orient(a, b, x).min(orient(b, c, x)).min(orient(c, a, x));
            if worst >= -1e-10 * (1.0 + dist(a, b)) {
                match best {
                    Some((_, w)) if w >= worst => {}
                    _ => best = Some((t, worst)),
                }
            }
        }
        best.map(|(t, _)| t)
    }
}

/// Flags nodes lying on the boundary of the 2-D convex hull of the node
/// set (their subgradient cells are unbounded).
pub fn boundary_flags(nodes: &[Point]) -> Vec<bool> {
    let n = nodes.len();
    let (min, max) = super::bounds(nodes);
    let scale = dist(min, max).max(1e-12);
    let hull = convex_hull_indices(nodes);
    let mut flags = vec![false; n];
    let tol = 1e-9 * scale;
    for (i, &p) in nodes.iter().enumerate() {
        for w in 0..hull.len() {
            let a = nodes[hull[w]];
            let b = nodes[hull[(w + 1) % hull.len()]];
            if point_segment_distance(p, a, b) <= tol {
                flags[i] = true;
                break;
            }
        }
    }
    flags
}

/// Andrew monotone chain; returns hull vertex indices in CCW order.
pub fn convex_hull_indices(nodes: &[Point]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..nodes.len()).collect();
    idx.sort_by(|&i, &j| {
        nodes[i][0]
            .partial_cmp(&nodes[j][0])
            .unwrap()
            .then(nodes[i][1].partial_cmp(&nodes[j][1]).unwrap())
    });
    let build = |iter: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for i in iter {
            while out.len() >= 2
                && orient(nodes[out[out.len() - 2]], nodes[out[out.len() - 1]], nodes[i]) <= 0.0
            {
                out.pop();
            }
            out.push(i);
        }
        out
    };
    let mut lower = build(&mut idx.iter().copied());
    let mut upper = build(&mut idx.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.append(&mut upper);
    lower
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = super::dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (super::dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}
