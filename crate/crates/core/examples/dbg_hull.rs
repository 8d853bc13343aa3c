use std::time::Instant;
use alexandrov::solver::*;
use alexandrov::geometry::ConvexPolygon;
fn main() {
    let exact = alexandrov::radial::RadialSingularSolution::new(2, 1.0).unwrap();
    for h in [0.05f64, 0.025] {
        let disk = ConvexPolygon::regular_ngon([0.0, 0.0], 1.0, 64);
        let problem = DirichletProblem::new(
            disk, DensityField::Constant(1.0),
            vec![([0.0, 0.0], std::f64::consts::PI)],
            BoundaryValues::radial_profile(1.0), h,
        );
        let t0 = Instant::now();
        let (f, report) = solve_dirichlet(&problem, &SolveOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for (p, v) in f.nodes().iter().zip(f.values()) {
            let r = (p[0]*p[0]+p[1]*p[1]).sqrt();
            worst = worst.max((v - exact.value(r)).abs());
        }
        println!("h={h}: nodes={} sweeps={} residual={:.2e} err={:.5} (5h={}) time={:?}",
            report.nodes, report.sweeps, report.max_residual, worst, 5.0*h, t0.elapsed());
    }
    // criterion-7 style: two atoms, ball R=16
    let cfg = SingularConfiguration::new(2, vec![vec![0.5, 0.0], vec![-0.5, 0.0]],
        vec![std::f64::consts::PI, std::f64::consts::PI]).unwrap();
    let params = GlobalSolveParams { sides: 64, resolution: 32.0, options: SolveOptions::default() };
    let t0 = Instant::now();
    match solve_global(&cfg, &[4.0, 8.0, 16.0], &params) {
        Ok(run) => {
            for b in &run.balls {
                println!("R={}: sweeps={} residual={:.2e} sandwich_viol={} time so far {:?}",
                    b.radius, b.report.sweeps, b.report.max_residual, b.sandwich_violations, t0.elapsed());
            }
            println!("cauchy diffs: {:?}", run.cauchy_diffs);
        }
        Err(e) => println!("global ERROR: {e}"),
    }
}
