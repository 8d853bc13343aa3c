//! Global constructions: averaged subsolutions, the sub/supersolution
//! sandwich, and the ellipsoid barrier.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::quad;
use crate::radial::{
    radial_ode_solve, unit_ball_volume, RadialError, RadialMeasure, RadialProfile,
    RadialSingularSolution,
};

#[derive(Debug, Error)]
pub enum SandwichError {
    #[error("{0}")]
    Radial(#[from] RadialError),
    #[error("the global sandwich profile requires dimension >= 3 (got {0}); the 2-D case uses log-corrected per-ball bounds")]
    TwoDimensional(usize),
    #[error("the closed-form sandwich requires radially symmetric data (single atom at the origin)")]
    NotRadial,
    #[error("configuration is invalid: {0}")]
    BadConfiguration(String),
}

/// Data of a k-point singular problem: distinct points with positive
/// masses, plus the prescribed asymptotic quadratic (unimodular matrix,
/// linear part, constant).
#[derive(Debug, Clone)]
pub struct SingularConfiguration {
    pub dim: usize,
    pub points: Vec<DVector<f64>>,
    pub masses: Vec<f64>,
    pub asym_matrix: DMatrix<f64>,
    pub asym_linear: DVector<f64>,
    pub asym_constant: f64,
}

impl SingularConfiguration {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self, SandwichError> {
        if dim < 2 {
            return Err(SandwichError::BadConfiguration(format!(
                "dimension must be >= 2, got {dim}"
            )));
        }
        if points.len() != masses.len() {
            return Err(SandwichError::BadConfiguration(
                "one mass per point required".into(),
            ));
        }
        if points.is_empty() {
            return Err(SandwichError::BadConfiguration("no singular points".into()));
        }
        for m in &masses {
            if *m <= 0.0 {
                return Err(SandwichError::BadConfiguration(format!(
                    "masses must be positive, got {m}"
                )));
            }
        }
        for p in &points {
            if p.len() != dim {
                return Err(SandwichError::BadConfiguration(
                    "point dimension mismatch".into(),
                ));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d: f64 = points[i]
                    .iter()
                    .zip(points[j].iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d == 0.0 {
                    return Err(SandwichError::BadConfiguration(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(SingularConfiguration {
            dim,
            points: points.into_iter().map(DVector::from_vec).collect(),
            masses,
            asym_matrix: DMatrix::identity(dim, dim),
            asym_linear: DVector::zeros(dim),
            asym_constant: 0.0,
        })
    }

    pub fn with_asymptotic(
        mut self,
        matrix: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
    ) -> Result<Self, SandwichError> {
        let det = matrix.clone().determinant();
        if (det - 1.0).abs() > 1e-12 * det.abs().max(1.0) {
            return Err(SandwichError::BadConfiguration(format!(
                "asymptotic matrix must have unit determinant, got {det}"
            )));
        }
        self.asym_matrix = matrix;
        self.asym_linear = linear;
        self.asym_constant = constant;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// The averaged subsolution `(1/k) sum_i u_i`, where `u_i` solves the
/// single-atom problem with mass `k^n a_i` at `P_i` and is tilted so the
/// average keeps the paraboloid asymptotics. Exact values, gradients,
/// and Hessians away from the singular points.
pub struct AveragedSubsolution {
    parts: Vec<RadialSingularSolution>,
    k: usize,
}

/// Build the averaged subsolution of a configuration. Its Hessian
/// determinant is at least 1 away from the points (Minkowski's
/// determinant inequality), and each point carries at least its mass.
pub fn averaged_subsolution(
    cfg: &SingularConfiguration,
) -> Result<AveragedSubsolution, SandwichError> {
    let n = cfg.dim;
    let k = cfg.k();
    let omega = unit_ball_volume(n);
    let mut parts = Vec::with_capacity(k);
    for (p, &a) in cfg.points.iter().zip(cfg.masses.iter()) {
        let c = (k as f64).powi(n as i32) * a / omega;
        // u_i = v_i(|x - P_i|) + P_i . x - |P_i|^2 / 2, encoded as a
        // subtracted linear form.
        let mut affine = crate::radial::AffineNormalization::identity(n);
        affine.linear_grad = -p.clone();
        affine.linear_offset = 0.5 * p.dot(p);
        let sol = RadialSingularSolution::new(n, c)?
            .with_center(p.as_slice())
            .with_affine(affine)?;
        parts.push(sol);
    }
    Ok(AveragedSubsolution { parts, k })
}

impl AveragedSubsolution {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|s| s.value_at(x)).sum::<f64>() / self.k as f64
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>, RadialError> {
        let mut g = DVector::zeros(x.len());
        for s in &self.parts {
            g += s.gradient_at(x)?;
        }
        Ok(g / self.k as f64)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, RadialError> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for s in &self.parts {
            h += s.hessian_at(x)?;
        }
        Ok(h / self.k as f64)
    }

    /// `det D^2 u` at `x`; at least 1 away from the singular points.
    pub fn hessian_det(&self, x: &[f64]) -> Result<f64, RadialError> {
        Ok(self.hessian(x)?.determinant())
    }

    /// Minkowski defect `(det D^2 u)^(1/n) - (1/k) sum (det D^2 u_i)^(1/n)`;
    /// nonnegative up to rounding. The per-part determinants are 1.
    pub fn minkowski_defect(&self, x: &[f64]) -> Result<f64, RadialError> {
        let n = x.len() as f64;
        Ok(self.hessian_det(x)?.powf(1.0 / n) - 1.0)
    }
}

/// The glued sub/supersolution pair pinning growing-ball solutions for
/// `n >= 3`, with its shift constants.
pub struct SandwichBounds {
    pub dim: usize,
    /// Rescaling factor: data was scaled into the half ball by
    /// `u -> u(rho x) / rho^2`.
    pub scale: f64,
    pub bump_mass: f64,
    pub c0: f64,
    pub k1: f64,
    pub k2: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// Implied constant in `c0 = c(n) (total mass)^(1/n)`.
    pub c_n_implied: f64,
    v1: ShiftedProfile,
}

struct ShiftedProfile {
    profile: RadialProfile,
    shift: f64, // v1(r) = profile(r) - shift, so v1(1) = 0
}

impl SandwichBounds {
    /// Inner profile `v1(r)` (zero on the unit sphere, negative inside).
    pub fn v1(&self, r: f64) -> f64 {
        self.v1.profile.value(r) - self.v1.shift
    }

    /// Outer comparison profile `v2 = K1 (r^2 - 1)`.
    pub fn v2(&self, r: f64) -> f64 {
        self.k1 * (r * r - 1.0)
    }

    /// The glued lower profile: `v1` inside the unit ball, the
    /// `(tau^n + K2)^(1/n)` integral outside.
    pub fn lower(&self, r: f64) -> f64 {
        if r <= 1.0 {
            self.v1(r)
        } else {
            let n = self.dim as f64;
            let k2 = self.k2;
            quad::integrate(|t| (t.powf(n) + k2).powf(1.0 / n), 1.0, r, 1e-10)
        }
    }

    /// The upper profile: 0 inside the unit ball, the
    /// `(tau^n - 1)^(1/n)` integral outside.
    pub fn upper(&self, r: f64) -> f64 {
        if r <= 1.0 {
            0.0
        } else {
            let n = self.dim as f64;
            quad::integrate(|t| (t.powf(n) - 1.0).max(0.0).powf(1.0 / n), 1.0, r, 1e-10)
        }
    }

    /// One-sided radial derivatives at the gluing sphere: the inner
    /// comparison slope `2 K1` and the outer profile slope
    /// `(1 + K2)^(1/n)`. The strict jump `2 K1 < (1 + K2)^(1/n)` is what
    /// pins the contact point away from the sphere.
    pub fn gradient_jump(&self) -> (f64, f64) {
        let n = self.dim as f64;
        (2.0 * self.k1, (1.0 + self.k2).powf(1.0 / n))
    }

    /// `det D^2` of the upper profile at radius `r > 1`; identically 1.
    pub fn upper_hessian_det(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        let w = r.powf(n) - 1.0;
        let radial = r.powf(n - 1.0) * w.powf((1.0 - n) / n);
        let tangential = w.powf(1.0 / n) / r;
        radial * tangential.powf(n - 1.0)
    }
}

/// Construct the sandwich for a configuration with radially symmetric
/// excess (a single atom at the origin, or no atom), any `n >= 3`.
///
/// The data is rescaled so the excess lives in the half ball; `v1` is
/// the radial solution with the bump added, `c0` the verified bound
/// `v1 >= -c0` on the half ball, `K1 = 4 c0 / 3`, `K2 = (2 K1)^n`
/// (raising the bump mass until `K2 >= 1`), and the shifts come from
/// one-dimensional optimization with analytic tails.
pub fn build_sandwich(
    cfg: &SingularConfiguration,
    bump_mass: f64,
) -> Result<SandwichBounds, SandwichError> {
    let n = cfg.dim;
    if n == 2 {
        return Err(SandwichError::TwoDimensional(n));
    }
    if cfg.k() != 1 || cfg.points[0].norm() != 0.0 {
        return Err(SandwichError::NotRadial);
    }
    // Rescale so the atom support (a point) sits inside B_{1/2}; with a
    // single origin atom any scale works, use 1.
    let scale: f64 = 1.0;
    let atom = cfg.masses[0] / scale.powi(n as i32);

    let nf = n as f64;
    let omega = unit_ball_volume(n);
    let mut bump = bump_mass.max(0.0);
    let (c0, k1, k2, profile) = loop {
        // v1 solves det = 1 + (atom + bump spread over B_(1/4)) inside
        // B_1 with v1 = 0 on the sphere. A uniform bump density on
        // B_(1/4) stands in for the smooth mollifier.
        let quarter_vol = omega * 0.25f64.powi(n as i32);
        let bump_density = bump / quarter_vol;
        let meas = RadialMeasure::new(n, atom)?.with_radial_density(std::sync::Arc::new(
            move |r: f64| {
                if r < 0.25 {
                    1.0 + bump_density
                } else {
                    1.0
                }
            },
        ));
        let profile = radial_ode_solve(meas, 4.0)?;
        let shift = profile.value(1.0);
        // c0: depth of v1 at the center (the profile is increasing, so
        // the minimum over the half ball is at r = 0).
        let c0 = shift;
        let k1 = 4.0 * c0 / 3.0;
        let k2 = (2.0 * k1).powf(nf);
        if k2 >= 1.0 {
            break (c0, k1, k2, ShiftedProfile { profile, shift });
        }
        bump = (bump * 2.0).max(0.5);
    };

    // beta+ = sup(r^2/2 - upper): increasing in r, equal to the limit.
    let tail_hi = 1e4;
    let beta_plus = {
        let main = quad::integrate(
            |t| t - (t.powf(nf) - 1.0).max(0.0).powf(1.0 / nf),
            1.0,
            tail_hi,
            1e-11,
        );
        let tail = (1.0 / nf) * tail_hi.powf(2.0 - nf) / (nf - 2.0);
        0.5 + main + tail
    };
    // beta- = inf(r^2/2 - lower): decreasing outside the ball, so it is
    // the r -> infinity limit, but the inside can dip too; scan it.
    let beta_minus = {
        let limit = {
            let main = quad::integrate(
                |t| (t.powf(nf) + k2).powf(1.0 / nf) - t,
                1.0,
                tail_hi,
                1e-11,
            );
            let tail = (k2 / nf) * tail_hi.powf(2.0 - nf) / (nf - 2.0);
            0.5 - (main + tail)
        };
        let inner = quad::scan_min(
            &|r: f64| 0.5 * r * r - (profile.profile.value(r) - profile.shift),
            0.0,
            1.0,
            200,
            1e-10,
        )
        .1;
        limit.min(inner)
    };

    let total = omega * scale.powi(n as i32) /* unit density over B_1 */ + atom + bump;
    let c_n_implied = c0 / total.powf(1.0 / nf);
    Ok(SandwichBounds {
        dim: n,
        scale,
        bump_mass: bump,
        c0,
        k1,
        k2,
        beta_plus,
        beta_minus,
        c_n_implied,
        v1: profile,
    })
}

/// The ellipsoid barrier: for `lambda > 0`, `r > 0`,
///
/// ```text
/// v(x) = (lambda^(1/n) r^(2-2/n) / (2 * 4^((n-1)/n)))
///        * (4|x'|^2/r^2 + (x_n - 3/4)^2 - 1/16)
/// ```
///
/// Its Hessian determinant is identically `lambda`; it vanishes on the
/// ellipsoid `{4|x'|^2/r^2 + (x_n - 3/4)^2 = 1/16}` and its minimum over
/// the ellipsoid is `-lambda^(1/n) r^(2-2/n) / (32 * 4^((n-1)/n))` at
/// `(0', 3/4)`.
pub fn lemma31_barrier(n: usize, lambda: f64, r: f64, x: &[f64]) -> f64 {
    assert!(n >= 2 && lambda > 0.0 && r > 0.0 && x.len() == n);
    let nf = n as f64;
    let coeff = lambda.powf(1.0 / nf) * r.powf(2.0 - 2.0 / nf)
        / (2.0 * 4.0f64.powf((nf - 1.0) / nf));
    let horiz: f64 = x[..n - 1].iter().map(|v| v * v).sum();
    let axial = x[n - 1] - 0.75;
    coeff * (4.0 * horiz / (r * r) + axial * axial - 1.0 / 16.0)
}

/// Hessian determinant of the barrier (constant in `x`); equals
/// `lambda` identically.
pub fn lemma31_barrier_hessian_det(n: usize, lambda: f64, r: f64) -> f64 {
    let nf = n as f64;
    let coeff = lambda.powf(1.0 / nf) * r.powf(2.0 - 2.0 / nf)
        / (2.0 * 4.0f64.powf((nf - 1.0) / nf));
    (coeff * 8.0 / (r * r)).powf(nf - 1.0) * (coeff * 2.0)
}

/// Barrier minimum value (attained at `(0', 3/4)`).
pub fn lemma31_barrier_min(n: usize, lambda: f64, r: f64) -> f64 {
    let nf = n as f64;
    -lambda.powf(1.0 / nf) * r.powf(2.0 - 2.0 / nf) / (32.0 * 4.0f64.powf((nf - 1.0) / nf))
}
