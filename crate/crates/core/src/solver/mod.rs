//! Alexandrov-solution Dirichlet solver for measure right-hand sides on
//! convex polygons.
//!
//! The discretization is an Oliker-Prussner fixed point on a piecewise
//! linear convex function: node values move until the subgradient-cell
//! mass of every interior node matches its target (density integrated
//! over the node's Voronoi cell, plus a Dirac mass where an atom is
//! hosted). Atoms are represented exactly. Starting from the convex
//! envelope of the boundary data, the iterates decrease monotonically to
//! the unique discrete solution; a from-below start raises instead and
//! meets the same fixed point, which is the uniqueness probe.

pub mod cells;
pub mod global;
pub mod mesh;
pub mod sandwich;

pub use global::{solve_global, GlobalRun, GlobalSolveParams};
pub use sandwich::{
    averaged_subsolution, build_sandwich, lemma31_barrier, AveragedSubsolution, SandwichBounds,
    SingularConfiguration,
};

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::geometry::{build_pl, ma_measure, ConvexPolygon, GeometryError, PLConvexFunction, Point};
use cells::CellEngine;
use mesh::Mesh;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("mesh size must be positive, got {0}")]
    BadMeshSize(f64),
    #[error("atom mass must be positive, got {0}")]
    NonPositiveAtom(f64),
    #[error("atom at ({0}, {1}) lies outside the domain")]
    AtomOutsideDomain(f64, f64),
    #[error("density must be nonnegative")]
    NegativeDensity,
    #[error("mesh has no interior nodes")]
    EmptyMesh,
    #[error("no convergence after {sweeps} sweeps (residual {residual:.3e}, tolerance {tol:.3e})")]
    NonConvergence {
        sweeps: usize,
        residual: f64,
        tol: f64,
    },
    #[error("node value diverged during mass matching at node {0}")]
    Diverged(usize),
    #[error("meshes do not match")]
    MeshMismatch,
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Config(String),
}

/// Right-hand density on the domain.
#[derive(Clone)]
pub enum DensityField {
    Constant(f64),
    Function(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for DensityField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DensityField::Constant(c) => write!(f, "Constant({c})"),
            DensityField::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Boundary values, sampled at boundary nodes.
#[derive(Clone)]
pub struct BoundaryValues(Arc<dyn Fn(Point) -> f64 + Send + Sync>);

impl std::fmt::Debug for BoundaryValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BoundaryValues(..)")
    }
}

impl BoundaryValues {
    pub fn function(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryValues(Arc::new(f))
    }

    /// `|x|^2 / 2` evaluated at the node position.
    pub fn paraboloid() -> Self {
        Self::function(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
    }

    /// Exact classified radial profile of mass parameter `c` in 2-D,
    /// evaluated at the node's true radius.
    pub fn radial_profile(c: f64) -> Self {
        let sol = crate::radial::RadialSingularSolution::new(2, c).expect("valid profile");
        Self::function(move |p| sol.value((p[0] * p[0] + p[1] * p[1]).sqrt()))
    }

    pub fn eval(&self, p: Point) -> f64 {
        (self.0)(p)
    }
}

/// A Dirichlet problem instance on a convex polygon.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub domain: ConvexPolygon,
    pub density: DensityField,
    pub atoms: Vec<(Point, f64)>,
    pub boundary: BoundaryValues,
    pub mesh_size: f64,
    /// Optional explicit node set (boundary detection by domain
    /// margin); atoms snap to the nearest node, recorded in the report.
    pub explicit_nodes: Option<Vec<Point>>,
}

impl DirichletProblem {
    pub fn new(
        domain: ConvexPolygon,
        density: DensityField,
        atoms: Vec<(Point, f64)>,
        boundary: BoundaryValues,
        mesh_size: f64,
    ) -> Self {
        DirichletProblem {
            domain,
            density,
            atoms,
            boundary,
            mesh_size,
            explicit_nodes: None,
        }
    }
}

/// Where the iteration starts; both initializations converge to the
/// same discrete solution (comparison principle), which is the
/// uniqueness probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Convex envelope of the boundary data (a supersolution; the
    /// iteration lowers node values).
    UpperEnvelope,
    /// The envelope shifted down below the solution (a subsolution; the
    /// iteration raises node values).
    SandwichLower,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub init: InitMode,
    pub tol_scale: f64,
    pub max_sweeps: usize,
    /// Warm-start from a solve at twice the mesh size (recursively).
    /// The final residual certificate does not depend on the path.
    pub multiscale: bool,
    /// Over-relaxation of node moves (1 = plain lifting). Values above
    /// 1 speed up the drain of smooth error modes; convergence is still
    /// certified by the verified residuals.
    pub relaxation: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            init: InitMode::UpperEnvelope,
            tol_scale: 1.0,
            max_sweeps: 100_000,
            multiscale: true,
            relaxation: 1.6,
        }
    }
}

/// Solver diagnostics. The residual is recomputed from the returned PL
/// function, not from iteration state.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub sweeps: usize,
    pub max_residual: f64,
    pub residual_node: usize,
    pub boundary_mismatch: f64,
    pub tolerance: f64,
    pub sandwich_violations: Option<usize>,
    pub wall_seconds: f64,
    /// `(requested position, snap distance)` per atom.
    pub atom_snaps: Vec<(Point, f64)>,
    pub nodes: usize,
}

/// Mass-matching tolerance for mesh size `h`.
pub fn mass_tolerance(h: f64) -> f64 {
    (1e-3 * h * h).max(1e-8)
}

/// Solve the Dirichlet problem; returns the PL solution and the report.
pub fn solve_dirichlet(
    problem: &DirichletProblem,
    options: &SolveOptions,
) -> Result<(PLConvexFunction, SolveReport), SolverError> {
    let start = Instant::now();
    if let DensityField::Constant(f) = problem.density {
        if f < 0.0 {
            return Err(SolverError::NegativeDensity);
        }
    }
    let mesh = mesh::generate_mesh(
        &problem.domain,
        problem.mesh_size,
        &problem.atoms,
        &problem.density,
        problem.explicit_nodes.as_deref(),
    )?;
    let engine = CellEngine::new(&mesh);
    let tol = mass_tolerance(mesh.h) * options.tol_scale;

    // Boundary values, then the interior initialization.
    let mut values = vec![0.0; mesh.nodes.len()];
    for (i, p) in mesh.nodes.iter().enumerate() {
        if mesh.is_boundary[i] {
            values[i] = problem.boundary.eval(*p);
        }
    }
    let coarse_init = if options.multiscale
        && options.init == InitMode::UpperEnvelope
        && problem.explicit_nodes.is_none()
    {
        coarse_start(problem, options)?
    } else {
        None
    };
    match coarse_init {
        Some(coarse) => {
            // Interpolate the coarse solution and shift up so the fine
            // iteration starts (essentially) above its fixed point.
            let shift = 2.0 * (2.0 * mesh.h) * (2.0 * mesh.h) + 1e-6;
            for &i in &mesh.interior {
                values[i] = match coarse.evaluate(mesh.nodes[i]) {
                    Ok(v) => v + shift,
                    Err(_) => f64::INFINITY,
                };
            }
            // Nodes the coarse hull misses fall back to the envelope.
            if values.iter().any(|v| !v.is_finite()) {
                let mut env = values.clone();
                init_interior(&mesh, &mut env, InitMode::UpperEnvelope)?;
                for &i in &mesh.interior {
                    if !values[i].is_finite() {
                        values[i] = env[i];
                    }
                }
            }
        }
        None => init_interior(&mesh, &mut values, options.init)?,
    }

    let mut sweeps = 0;
    let mut converged = false;
    let mut last_step: Vec<f64> = vec![0.0; mesh.nodes.len()];
    let mut caches: Vec<Vec<u32>> = vec![Vec::new(); mesh.nodes.len()];
    let mut ref_grads: Vec<Point> = vec![[0.0, 0.0]; mesh.nodes.len()];
    let margin = 2.0 * mesh.h;
    // The caches stay valid while cumulative value movement is small
    // against the collection margin; refresh on that budget, on a
    // convergence candidate, or periodically.
    let refresh_budget = 0.5 * margin * mesh.h;
    let mut moved_since_refresh = f64::INFINITY;
    let mut sweeps_since_refresh = usize::MAX;
    let mut last_max_move = f64::INFINITY;
    loop {
        let need_refresh = moved_since_refresh > refresh_budget
            || sweeps_since_refresh >= 16
            || last_max_move < 0.25 * tol * mesh.h;
        if need_refresh {
            // Sound verification pass; also refreshes the per-node
            // constraint caches the in-sweep root finds run on.
            let parab_min = parab_minorant(&mesh, &values);
            let mut worst = 0.0f64;
            for &i in &mesh.interior {
                let (a, p0, cand) =
                    engine.cell_area_refresh(&values, i, values[i], parab_min, margin);
                caches[i] = cand;
                ref_grads[i] = p0;
                worst = worst.max((a - mesh.targets[i]).abs());
            }
            moved_since_refresh = 0.0;
            sweeps_since_refresh = 0;
            if std::env::var_os("ALEXANDROV_TRACE").is_some() {
                eprintln!("sweep {sweeps}: residual {worst:.3e} tol {tol:.3e}");
            }
            if worst < tol {
                converged = true;
                break;
            }
        }
        if sweeps >= options.max_sweeps {
            return Err(SolverError::NonConvergence {
                sweeps,
                residual: f64::NAN,
                tol,
            });
        }
        sweeps += 1;
        sweeps_since_refresh += 1;
        // Symmetric sweep over the cached constraint sets: corrections
        // propagate both ways each iteration.
        let mut max_move = 0.0f64;
        let forward = mesh.interior.iter().copied();
        let backward = mesh.interior.iter().rev().copied();
        for i in forward.chain(backward) {
            let t_match = match_mass(
                &engine,
                &values,
                i,
                mesh.targets[i],
                tol,
                ref_grads[i],
                &caches[i],
                &mut last_step[i],
            )?;
            let delta = t_match - values[i];
            // Over-relax only small corrections (the smooth-mode
            // drain); large descents stay plain.
            let omega = if delta.abs() <= mesh.h * mesh.h {
                options.relaxation.max(1.0)
            } else {
                1.0
            };
            values[i] += omega * delta;
            max_move = max_move.max((omega * delta).abs());
        }
        moved_since_refresh += max_move;
        last_max_move = max_move;
    }
    let _ = converged;

    let f = build_pl(mesh.nodes.clone(), values)?;
    let meas = ma_measure(&f);
    let mut max_residual = 0.0f64;
    let mut residual_node = 0;
    for &(i, mass) in &meas.atoms {
        let r = (mass - mesh.targets[i]).abs();
        if r > max_residual {
            max_residual = r;
            residual_node = i;
        }
    }
    let boundary_mismatch = mesh
        .interior
        .iter()
        .map(|_| 0.0)
        .chain((0..mesh.nodes.len()).filter(|&i| mesh.is_boundary[i]).map(|i| {
            (f.values()[i] - problem.boundary.eval(mesh.nodes[i])).abs()
        }))
        .fold(0.0f64, f64::max);
    let atom_snaps = mesh
        .atom_nodes
        .iter()
        .zip(problem.atoms.iter())
        .map(|(&(_, _, snap), &(p, _))| (p, snap))
        .collect();
    let report = SolveReport {
        sweeps,
        max_residual,
        residual_node,
        boundary_mismatch,
        tolerance: tol,
        sandwich_violations: None,
        wall_seconds: start.elapsed().as_secs_f64(),
        atom_snaps,
        nodes: mesh.nodes.len(),
    };
    Ok((f, report))
}

/// Recursive coarse solve for the multiscale warm start. Returns `None`
/// at the coarsest useful level.
fn coarse_start(
    problem: &DirichletProblem,
    options: &SolveOptions,
) -> Result<Option<PLConvexFunction>, SolverError> {
    let (lo, hi) = {
        let b = problem.domain.bounds();
        (b.0, b.1)
    };
    let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let h2 = 2.0 * problem.mesh_size;
    if h2 > diam / 8.0 {
        return Ok(None);
    }
    let coarse_problem = DirichletProblem {
        mesh_size: h2,
        ..problem.clone()
    };
    let coarse_options = SolveOptions {
        // Coarse levels only warm-start; loose tolerance is enough.
        tol_scale: options.tol_scale * 4.0,
        ..options.clone()
    };
    let (f, _) = solve_dirichlet(&coarse_problem, &coarse_options)?;
    Ok(Some(f))
}

fn parab_minorant(mesh: &Mesh, values: &[f64]) -> f64 {
    values
        .iter()
        .zip(mesh.nodes.iter())
        .map(|(v, p)| v - 0.5 * (p[0] * p[0] + p[1] * p[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Interior initialization: PL envelope of the boundary nodes alone,
/// optionally shifted below the solution for the from-below start.
fn init_interior(mesh: &Mesh, values: &mut [f64], init: InitMode) -> Result<(), SolverError> {
    let bnodes: Vec<Point> = (0..mesh.nodes.len())
        .filter(|&i| mesh.is_boundary[i])
        .map(|i| mesh.nodes[i])
        .collect();
    let bvalues: Vec<f64> = (0..mesh.nodes.len())
        .filter(|&i| mesh.is_boundary[i])
        .map(|i| values[i])
        .collect();
    let envelope = build_pl(bnodes, bvalues)?;
    for &i in &mesh.interior {
        values[i] = envelope
            .evaluate(mesh.nodes[i])
            .map_err(SolverError::Geometry)?;
    }
    if init == InitMode::SandwichLower {
        // Alexandrov-style depth bound: the solution sits at most this
        // far below the zero-measure envelope.
        let total: f64 = mesh.targets.iter().sum();
        let (lo, hi) = crate::geometry::bounds(&mesh.nodes);
        let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
        let depth = 2.0 * (diam * diam * total / std::f64::consts::PI).sqrt() + 1.0;
        for &i in &mesh.interior {
            values[i] -= depth;
        }
    }
    Ok(())
}

/// Move node `i`'s value so its cell mass matches `target` within a
/// fraction of `tol`, evaluating areas on the node's cached constraint
/// set. The cell area is nonincreasing in the node value, so a doubling
/// bracket plus bisection (to 1e-12) finds the match; stale caches are
/// corrected by the sweep-level verification.
#[allow(clippy::too_many_arguments)]
fn match_mass(
    engine: &CellEngine,
    values: &[f64],
    i: usize,
    target: f64,
    tol: f64,
    p0: Point,
    cache: &[u32],
    warm_step: &mut f64,
) -> Result<f64, SolverError> {
    let t0 = values[i];
    let area = |t: f64| engine.cell_area_subset(values, i, t, p0, cache);
    let a0 = area(t0);
    if (a0 - target).abs() <= 0.25 * tol {
        return Ok(t0);
    }
    let mut step = (*warm_step * 0.5).max(1e-9_f64.max(1e-6 * (1.0 + t0.abs())));
    let (mut lo, mut hi);
    if a0 < target {
        // Lower the node until its cell is big enough.
        let mut guard = 0;
        loop {
            let t = t0 - step;
            if area(t) >= target {
                lo = t;
                hi = t0;
                break;
            }
            step *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(SolverError::Diverged(i));
            }
        }
    } else {
        // Raise the node until its cell is small enough.
        let mut guard = 0;
        loop {
            let t = t0 + step;
            if area(t) <= target {
                lo = t0;
                hi = t;
                break;
            }
            step *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(SolverError::Diverged(i));
            }
        }
    }
    // Regula falsi (Illinois) with bisection safeguards: the area is
    // monotone and piecewise smooth in t, so this converges in a
    // handful of evaluations to the 1e-12 bracket.
    let mut f_lo = area(lo) - target; // >= 0
    let mut f_hi = area(hi) - target; // <= 0
    let mut side = 0i32;
    let mut iters = 0usize;
    while hi - lo > 1e-12 {
        iters += 1;
        let denom = f_lo - f_hi;
        let mut mid = if denom.abs() > 1e-300 {
            (f_lo * hi - f_hi * lo) / denom
        } else {
            0.5 * (lo + hi)
        };
        // Keep strictly inside; fall back to bisection periodically.
        if !(mid > lo && mid < hi) || iters % 4 == 0 {
            mid = 0.5 * (lo + hi);
        }
        let fm = area(mid) - target;
        if fm.abs() <= 0.05 * tol {
            *warm_step = (mid - t0).abs().max(1e-12);
            return Ok(mid);
        }
        if fm >= 0.0 {
            lo = mid;
            f_lo = fm;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = mid;
            f_hi = fm;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    *warm_step = (hi - t0).abs().max(1e-12);
    // Conservative end: from above stay slightly high, from below low.
    Ok(if a0 < target { hi } else { lo })
}

/// Node-wise comparison of two PL functions on the same mesh:
/// asserts `u <= v + tol` and returns the violating node indices.
pub fn comparison_check(
    u: &PLConvexFunction,
    v: &PLConvexFunction,
    tol: f64,
) -> Result<Vec<usize>, SolverError> {
    if u.len() != v.len() {
        return Err(SolverError::MeshMismatch);
    }
    for (a, b) in u.nodes().iter().zip(v.nodes()) {
        if (a[0] - b[0]).abs() > 1e-12 || (a[1] - b[1]).abs() > 1e-12 {
            return Err(SolverError::MeshMismatch);
        }
    }
    Ok((0..u.len())
        .filter(|&i| u.values()[i] > v.values()[i] + tol)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialSingularSolution;

    fn square() -> ConvexPolygon {
        ConvexPolygon::new(vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]).unwrap()
    }

    #[test]
    fn recovers_paraboloid_without_atoms() {
        let problem = DirichletProblem::new(
            square(),
            DensityField::Constant(1.0),
            vec![],
            BoundaryValues::paraboloid(),
            0.2,
        );
        let (f, report) = solve_dirichlet(&problem, &SolveOptions::default()).unwrap();
        assert!(report.max_residual < report.tolerance * 1.01);
        let mut worst = 0.0f64;
        for (p, v) in f.nodes().iter().zip(f.values()) {
            let exact = 0.5 * (p[0] * p[0] + p[1] * p[1]);
            worst = worst.max((v - exact).abs());
        }
        assert!(worst < 0.2 * 0.2, "sup error {worst}");
    }

    #[test]
    fn cone_recovered_exactly_on_five_nodes() {
        let diamond =
            ConvexPolygon::new(vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]).unwrap();
        let mut problem = DirichletProblem::new(
            diamond,
            DensityField::Constant(0.0),
            vec![([0.0, 0.0], 4.0)],
            BoundaryValues::function(|_| 1.0),
            1.0,
        );
        problem.explicit_nodes = Some(vec![
            [1.0, 0.0],
            [0.0, 1.0],
            [-1.0, 0.0],
            [0.0, -1.0],
            [0.0, 0.0],
        ]);
        let (f, report) = solve_dirichlet(&problem, &SolveOptions::default()).unwrap();
        let apex = f
            .nodes()
            .iter()
            .position(|p| p[0] == 0.0 && p[1] == 0.0)
            .unwrap();
        assert!(f.values()[apex].abs() < 1e-9, "apex {}", f.values()[apex]);
        assert!(report.max_residual < 1e-8);
    }

    #[test]
    fn one_atom_matches_radial_solution() {
        // Disk domain (32-gon), atom pi at 0, exact radial boundary data.
        let disk = ConvexPolygon::regular_ngon([0.0, 0.0], 1.0, 32);
        let problem = DirichletProblem::new(
            disk,
            DensityField::Constant(1.0),
            vec![([0.0, 0.0], std::f64::consts::PI)],
            BoundaryValues::radial_profile(1.0),
            0.1,
        );
        let (f, report) = solve_dirichlet(&problem, &SolveOptions::default()).unwrap();
        assert!(report.max_residual < report.tolerance * 1.01);
        let exact = RadialSingularSolution::new(2, 1.0).unwrap();
        let mut worst = 0.0f64;
        for (p, v) in f.nodes().iter().zip(f.values()) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            worst = worst.max((v - exact.value(r)).abs());
        }
        assert!(worst < 5.0 * 0.1, "sup error vs radial {worst}");
    }

    #[test]
    fn comparison_with_paraboloid() {
        // Solution with an atom and paraboloid boundary lies below the
        // paraboloid.
        let problem = DirichletProblem::new(
            square(),
            DensityField::Constant(1.0),
            vec![([0.0, 0.0], 1.0)],
            BoundaryValues::paraboloid(),
            0.25,
        );
        let (f, _) = solve_dirichlet(&problem, &SolveOptions::default()).unwrap();
        let parab = build_pl(
            f.nodes().to_vec(),
            f.nodes()
                .iter()
                .map(|p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
                .collect(),
        )
        .unwrap();
        let bad = comparison_check(&f, &parab, 1e-9).unwrap();
        assert!(bad.is_empty(), "violations at {bad:?}");
        // Contrapositive fixture: the paraboloid is NOT below f.
        let bad = comparison_check(&parab, &f, 1e-9).unwrap();
        assert!(!bad.is_empty());
    }

    #[test]
    fn two_inits_agree() {
        let problem = DirichletProblem::new(
            square(),
            DensityField::Constant(1.0),
            vec![([0.25, 0.0], 0.8)],
            BoundaryValues::paraboloid(),
            0.25,
        );
        let (f1, _) = solve_dirichlet(&problem, &SolveOptions::default()).unwrap();
        let opts = SolveOptions {
            init: InitMode::SandwichLower,
            ..Default::default()
        };
        let (f2, r2) = solve_dirichlet(&problem, &opts).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in f1.values().iter().zip(f2.values()) {
            worst = worst.max((a - b).abs());
        }
        assert!(
            worst <= 2.0 * r2.tolerance.max(mass_tolerance(0.25)),
            "init gap {worst}"
        );
    }
}
