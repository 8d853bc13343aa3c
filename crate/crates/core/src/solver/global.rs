//! Growing-ball approximation of global solutions in 2-D.
//!
//! Each ball problem prescribes the paraboloid on the boundary of an
//! inscribed regular polygon; the solutions are pinned by a sandwich:
//! the paraboloid from above (equal boundary data, larger measure) and
//! the averaged subsolution with a per-ball boundary shift from below.
//! In 2-D the shift grows like the logarithm of the radius, which is the
//! log-corrected form of the global bounds.

use crate::geometry::{ConvexPolygon, PLConvexFunction};

use super::sandwich::{averaged_subsolution, AveragedSubsolution, SingularConfiguration};
use super::{
    solve_dirichlet, BoundaryValues, DensityField, DirichletProblem, SolveOptions, SolveReport,
    SolverError,
};

#[derive(Debug, Clone)]
pub struct GlobalSolveParams {
    /// Polygon sides approximating each ball (at least 64).
    pub sides: usize,
    /// Mesh size as a fraction of the radius: `h = radius / resolution`.
    pub resolution: f64,
    pub options: SolveOptions,
}

impl Default for GlobalSolveParams {
    fn default() -> Self {
        GlobalSolveParams {
            sides: 64,
            resolution: 32.0,
            options: SolveOptions::default(),
        }
    }
}

/// One solved ball with its sandwich diagnostics.
pub struct BallSolution {
    pub radius: f64,
    pub solution: PLConvexFunction,
    pub report: SolveReport,
    /// Shift of the lower bound on this ball (log-corrected in 2-D).
    pub beta_minus: f64,
    /// Shift of the upper bound (zero: the boundary data is the
    /// paraboloid itself).
    pub beta_plus: f64,
    pub sandwich_violations: usize,
    /// Max Lipschitz scale used in the sandwich tolerance.
    pub lipschitz: f64,
}

/// A growing-ball run: solutions on each ball plus Cauchy diagnostics
/// on the common core.
pub struct GlobalRun {
    pub balls: Vec<BallSolution>,
    /// Sup difference of consecutive solutions on the first ball's core.
    pub cauchy_diffs: Vec<f64>,
}

/// Solve the measure problem `1 + sum a_i delta_(P_i)` on growing balls
/// with paraboloid boundary data, verifying the sandwich on every ball.
pub fn solve_global(
    cfg: &SingularConfiguration,
    radii: &[f64],
    params: &GlobalSolveParams,
) -> Result<GlobalRun, SolverError> {
    if cfg.dim != 2 {
        return Err(SolverError::Config(
            "the exact growing-ball solver is 2-D only".into(),
        ));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SolverError::Config("radii must be increasing".into()));
    }
    let max_p = cfg
        .points
        .iter()
        .map(|p| p.norm())
        .fold(0.0f64, f64::max);
    if 2.0 * max_p >= radii[0] {
        return Err(SolverError::Config(format!(
            "atoms must lie inside half of the first ball (|P| max {max_p}, R1 {})",
            radii[0]
        )));
    }
    let lower = averaged_subsolution(cfg).map_err(|e| SolverError::Config(e.to_string()))?;

    let mut balls: Vec<BallSolution> = Vec::new();
    let mut cauchy = Vec::new();
    for &radius in radii {
        let sides = params.sides.max(64);
        let domain = ConvexPolygon::regular_ngon([0.0, 0.0], radius, sides);
        let h = radius / params.resolution;
        let atoms: Vec<([f64; 2], f64)> = cfg
            .points
            .iter()
            .zip(cfg.masses.iter())
            .map(|(p, &a)| ([p[0], p[1]], a))
            .collect();
        let problem = DirichletProblem::new(
            domain,
            DensityField::Constant(1.0),
            atoms,
            BoundaryValues::paraboloid(),
            h,
        );
        let (solution, mut report) = solve_dirichlet(&problem, &params.options)?;

        let (violations, beta_minus, lipschitz) =
            check_sandwich(&solution, &lower, h)?;
        report.sandwich_violations = Some(violations);
        if let Some(prev) = balls.last() {
            cauchy.push(core_difference(&prev.solution, &solution, radii[0]));
        }
        balls.push(BallSolution {
            radius,
            solution,
            report,
            beta_minus,
            beta_plus: 0.0,
            sandwich_violations: violations,
            lipschitz,
        });
    }
    Ok(GlobalRun {
        balls,
        cauchy_diffs: cauchy,
    })
}

/// Node-wise sandwich check:
/// `lower + beta_minus <= u <= |x|^2/2` within `5 h Lip(u)`.
/// Returns `(violations, beta_minus, Lip)`.
fn check_sandwich(
    u: &PLConvexFunction,
    lower: &AveragedSubsolution,
    h: f64,
) -> Result<(usize, f64, f64), SolverError> {
    // beta_minus: the boundary shift making the subsolution admissible.
    let mut beta_minus = f64::INFINITY;
    for i in 0..u.len() {
        if u.is_boundary(i) {
            let p = u.nodes()[i];
            beta_minus = beta_minus.min(u.values()[i] - lower.value(&p));
        }
    }
    // Lipschitz scale from the PL subgradients.
    let mut lip = 0.0f64;
    for i in 0..u.len() {
        let g = u.subgradient(i);
        lip = lip.max((g[0] * g[0] + g[1] * g[1]).sqrt());
    }
    let tol = 5.0 * h * lip;
    let mut violations = 0;
    for (p, &v) in u.nodes().iter().zip(u.values()) {
        let upper = 0.5 * (p[0] * p[0] + p[1] * p[1]);
        let low = lower.value(p) + beta_minus;
        if v > upper + tol || v < low - tol {
            violations += 1;
        }
    }
    Ok((violations, beta_minus, lip))
}

/// Sup difference of two ball solutions over nodes of the smaller mesh
/// inside the common core radius.
fn core_difference(a: &PLConvexFunction, b: &PLConvexFunction, core_radius: f64) -> f64 {
    let mut worst = 0.0f64;
    for (p, &va) in a.nodes().iter().zip(a.values()) {
        if (p[0] * p[0] + p[1] * p[1]).sqrt() > 0.9 * core_radius {
            continue;
        }
        if let Ok(vb) = b.evaluate(*p) {
            worst = worst.max((va - vb).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_atom_run_is_the_paraboloid() {
        // Positive-mass requirement: use a tiny atom standing in for the
        // atom-free case is not allowed here, so call the solver
        // directly through a configuration with a negligible atom.
        let cfg = SingularConfiguration::new(2, vec![vec![0.0, 0.0]], vec![1e-12]).unwrap();
        let params = GlobalSolveParams {
            sides: 64,
            resolution: 12.0,
            options: SolveOptions::default(),
        };
        let run = solve_global(&cfg, &[2.0, 3.0], &params).unwrap();
        for ball in &run.balls {
            assert_eq!(ball.sandwich_violations, 0);
            let mut worst = 0.0f64;
            for (p, &v) in ball.solution.nodes().iter().zip(ball.solution.values()) {
                worst = worst.max((v - 0.5 * (p[0] * p[0] + p[1] * p[1])).abs());
            }
            let h = ball.radius / params.resolution;
            assert!(worst < h * h + 1e-6, "worst {worst}");
        }
    }

    #[test]
    fn one_atom_run_approaches_radial_limit() {
        let cfg =
            SingularConfiguration::new(2, vec![vec![0.0, 0.0]], vec![std::f64::consts::PI])
                .unwrap();
        let params = GlobalSolveParams {
            sides: 64,
            resolution: 16.0,
            options: SolveOptions::default(),
        };
        let run = solve_global(&cfg, &[2.0, 4.0], &params).unwrap();
        assert!(run.balls.iter().all(|b| b.sandwich_violations == 0));
        // The exact global limit is the radial profile with c = 1 plus
        // a constant; compare the solution's shape on the core.
        let exact = crate::radial::RadialSingularSolution::new(2, 1.0).unwrap();
        let last = run.balls.last().unwrap();
        let u0 = last.solution.evaluate([0.0, 0.0]).unwrap();
        let mut worst = 0.0f64;
        for (p, &v) in last.solution.nodes().iter().zip(last.solution.values()) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r > 1.5 {
                continue;
            }
            worst = worst.max(((v - u0) - exact.value(r)).abs());
        }
        // Shape agreement on the core within a few mesh cells; the
        // finite ball shifts the profile by an R-dependent constant.
        let h = last.radius / params.resolution;
        assert!(worst < 6.0 * h, "shape error {worst}");
    }

    #[test]
    fn rejects_bad_radii() {
        let cfg = SingularConfiguration::new(2, vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        assert!(solve_global(&cfg, &[3.0, 2.0], &GlobalSolveParams::default()).is_err());
        assert!(solve_global(&cfg, &[], &GlobalSolveParams::default()).is_err());
    }
}
