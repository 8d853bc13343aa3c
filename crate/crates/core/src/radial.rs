//! Closed-form machinery for the classified radial singular solutions.
//!
//! The canonical profile in dimension `n` with mass parameter `c >= 0` is
//!
//! ```text
//! u(x) = phi(|x|),    phi(r) = int_0^r (t^n + c)^(1/n) dt
//! ```
//!
//! which solves `det D^2 u = 1` away from the origin and carries a Dirac
//! atom of mass `omega_n * c` at the origin (the subgradient there is the
//! closed ball of radius `c^(1/n)`). Everything here is exact up to
//! quadrature tolerance: values, derivatives, Hessian spectra, Legendre
//! duals, and Hessian-metric path lengths.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::quad;

/// Absolute tolerance used for all profile quadratures.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum RadialError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("mass parameter must be nonnegative, got {0}")]
    NegativeMassParam(f64),
    #[error("atom mass must be nonnegative, got {0}")]
    NegativeAtom(f64),
    #[error("density is negative at r = {0}")]
    NegativeDensity(f64),
    #[error("Hessian is unbounded at the singularity (r = 0 with c > 0)")]
    HessianAtSingularity,
    #[error("normalization matrix must have unit determinant, got {0}")]
    NotUnimodular(f64),
    #[error("operation requires the canonical normalization (center 0, trivial affine part)")]
    NotCanonical,
    #[error("evaluation at a singular point")]
    SingularPoint,
    #[error("invalid radius range [{0}, {1}]")]
    BadRange(f64, f64),
}

/// Volume of the unit ball in dimension `n`, cached.
pub fn unit_ball_volume(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        // omega_1 = 2, omega_2 = pi, omega_n = omega_{n-2} * 2 pi / n
        let mut t = vec![0.0; 65];
        t[1] = 2.0;
        t[2] = std::f64::consts::PI;
        for k in 3..t.len() {
            t[k] = t[k - 2] * 2.0 * std::f64::consts::PI / k as f64;
        }
        t
    });
    assert!(n >= 1 && n < table.len(), "dimension {n} out of cached range");
    table[n]
}

/// Unimodular affine normalization `x -> A(x - P) + b` together with a
/// subtracted linear function `l(x) = g . x + h`.
#[derive(Debug, Clone)]
pub struct AffineNormalization {
    pub matrix: DMatrix<f64>,
    pub shift: DVector<f64>,
    pub linear_grad: DVector<f64>,
    pub linear_offset: f64,
}

impl AffineNormalization {
    pub fn identity(n: usize) -> Self {
        AffineNormalization {
            matrix: DMatrix::identity(n, n),
            shift: DVector::zeros(n),
            linear_grad: DVector::zeros(n),
            linear_offset: 0.0,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.matrix == DMatrix::identity(self.matrix.nrows(), self.matrix.ncols())
            && self.shift.iter().all(|&v| v == 0.0)
            && self.linear_grad.iter().all(|&v| v == 0.0)
            && self.linear_offset == 0.0
    }
}

/// A member of the classified radial family: dimension, mass parameter,
/// center, and a lazily applied unimodular affine normalization. The
/// canonical profile stays one-dimensional; point evaluations map through
/// the normalization on demand.
#[derive(Debug, Clone)]
pub struct RadialSingularSolution {
    dim: usize,
    mass_param: f64,
    center: DVector<f64>,
    affine: AffineNormalization,
}

impl RadialSingularSolution {
    /// Canonical solution centered at the origin.
    pub fn new(dim: usize, mass_param: f64) -> Result<Self, RadialError> {
        if dim < 2 {
            return Err(RadialError::DimensionTooSmall(dim));
        }
        if mass_param < 0.0 {
            return Err(RadialError::NegativeMassParam(mass_param));
        }
        Ok(RadialSingularSolution {
            dim,
            mass_param,
            center: DVector::zeros(dim),
            affine: AffineNormalization::identity(dim),
        })
    }

    pub fn with_center(mut self, center: &[f64]) -> Self {
        assert_eq!(center.len(), self.dim);
        self.center = DVector::from_column_slice(center);
        self
    }

    /// Attach a normalization; the matrix must be unimodular within
    /// 1e-12 relative tolerance.
    pub fn with_affine(mut self, affine: AffineNormalization) -> Result<Self, RadialError> {
        let det = affine.matrix.clone().determinant();
        if (det - 1.0).abs() > 1e-12 * det.abs().max(1.0) {
            return Err(RadialError::NotUnimodular(det));
        }
        self.affine = affine;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass_param(&self) -> f64 {
        self.mass_param
    }

    pub fn center(&self) -> &[f64] {
        self.center.as_slice()
    }

    /// Radius of the subgradient ball at the singularity, `c^(1/n)`.
    pub fn subgradient_radius(&self) -> f64 {
        self.mass_param.powf(1.0 / self.dim as f64)
    }

    /// Profile derivative `phi'(r) = (r^n + c)^(1/n)`.
    pub fn profile_derivative(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        if self.mass_param == 0.0 {
            return r;
        }
        (r.powi(self.dim as i32) + self.mass_param).powf(1.0 / self.dim as f64)
    }

    /// Profile second derivative `phi''(r) = r^(n-1) (r^n + c)^((1-n)/n)`.
    pub fn profile_second_derivative(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        if self.mass_param == 0.0 {
            return 1.0;
        }
        if r == 0.0 {
            return 0.0;
        }
        r.powf(n - 1.0) * (r.powf(n) + self.mass_param).powf((1.0 - n) / n)
    }

    /// Profile value `phi(r) = int_0^r (t^n + c)^(1/n) dt` with absolute
    /// quadrature error at most 1e-10; exact `r^2/2` when `c = 0`.
    pub fn value(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "radius must be nonnegative");
        if self.mass_param == 0.0 {
            return 0.5 * r * r;
        }
        let n = self.dim as f64;
        let c = self.mass_param;
        quad::integrate(|t| (t.powf(n) + c).powf(1.0 / n), 0.0, r, QUAD_TOL)
    }

    /// Radial and tangential Hessian eigenvalues at radius `r > 0`; the
    /// tangential one has multiplicity `n - 1` and the product of all `n`
    /// eigenvalues is identically 1.
    pub fn hessian_spectrum(&self, r: f64) -> Result<(f64, f64), RadialError> {
        if r <= 0.0 {
            return if self.mass_param > 0.0 {
                Err(RadialError::HessianAtSingularity)
            } else if r == 0.0 {
                Ok((1.0, 1.0))
            } else {
                Err(RadialError::BadRange(r, r))
            };
        }
        let radial = self.profile_second_derivative(r);
        let tangential = self.profile_derivative(r) / r;
        Ok((radial, tangential))
    }

    /// Mass of the Dirac atom at the singularity: `omega_n * c`.
    pub fn subgradient_mass(&self) -> f64 {
        unit_ball_volume(self.dim) * self.mass_param
    }

    /// Value at a point, through the stored normalization:
    /// `u(x) = phi(|A(x - P) + b|) - g.x - h`.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let y = self.normalized_coords(x);
        self.value(y.norm()) - self.affine.linear_grad.dot(&DVector::from_column_slice(x))
            - self.affine.linear_offset
    }

    /// Gradient at a point away from the singularity.
    pub fn gradient_at(&self, x: &[f64]) -> Result<DVector<f64>, RadialError> {
        let y = self.normalized_coords(x);
        let r = y.norm();
        if r == 0.0 {
            return Err(RadialError::SingularPoint);
        }
        let dphi = self.profile_derivative(r);
        Ok(self.affine.matrix.transpose() * (y * (dphi / r)) - &self.affine.linear_grad)
    }

    /// Hessian matrix at a point away from the singularity.
    pub fn hessian_at(&self, x: &[f64]) -> Result<DMatrix<f64>, RadialError> {
        let y = self.normalized_coords(x);
        let r = y.norm();
        if r == 0.0 {
            return Err(RadialError::SingularPoint);
        }
        let (lr, lt) = self.hessian_spectrum(r)?;
        let unit = y / r;
        let n = self.dim;
        let mut h = DMatrix::identity(n, n) * lt;
        h += (&unit * unit.transpose()) * (lr - lt);
        Ok(self.affine.matrix.transpose() * h * &self.affine.matrix)
    }

    fn normalized_coords(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.dim);
        let rel = DVector::from_column_slice(x) - &self.center;
        &self.affine.matrix * rel + &self.affine.shift
    }

    /// Legendre transform of the canonical solution. Requires center 0
    /// and trivial affine part.
    pub fn legendre(&self) -> Result<RadialDualProfile, RadialError> {
        if self.center.iter().any(|&v| v != 0.0) || !self.affine.is_trivial() {
            return Err(RadialError::NotCanonical);
        }
        Ok(RadialDualProfile {
            dim: self.dim,
            mass_param: self.mass_param,
        })
    }

    /// Length of the radial segment `[from_r, to_r]` in the Hessian
    /// metric `g = D^2 u`: `int sqrt(phi''(r)) dr`. Finite down to 0.
    pub fn hessian_metric_length(&self, from_r: f64, to_r: f64) -> Result<f64, RadialError> {
        if !(0.0 <= from_r && from_r < to_r) {
            return Err(RadialError::BadRange(from_r, to_r));
        }
        Ok(quad::integrate(
            |r| self.profile_second_derivative(r).max(0.0).sqrt(),
            from_r,
            to_r,
            1e-11,
        ))
    }
}

/// Shift that matches the canonical profile to the paraboloid at
/// infinity for `n >= 3`:
/// `int_0^inf ((t^n + c)^(1/n) - t) dt`, so that
/// `phi(r) - shift - r^2/2 -> 0` as `r -> infinity`.
pub fn asymptotic_shift(n: usize, c: f64) -> f64 {
    assert!(n >= 3, "the constant shift exists only for n >= 3");
    if c == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let t_max = 100.0_f64.max(4.0 * c.powf(1.0 / nf));
    let main = quad::integrate(
        |t| (t.powf(nf) + c).powf(1.0 / nf) - t,
        0.0,
        t_max,
        1e-12,
    );
    // Tail from the expansion (t^n+c)^(1/n) - t = c/(n t^(n-1)) - (n-1)c^2/(2n^2 t^(2n-1)) + ...
    let tail = c / (nf * (nf - 2.0)) * t_max.powf(2.0 - nf)
        - (nf - 1.0) * c * c / (2.0 * nf * nf * (2.0 * nf - 2.0)) * t_max.powf(2.0 - 2.0 * nf);
    main + tail
}

/// Legendre dual of a canonical radial solution: zero on the closed ball
/// of radius `c^(1/n)` and `r |y| - phi(r)` outside, where `r` inverts
/// `phi'(r) = |y|`.
#[derive(Debug, Clone)]
pub struct RadialDualProfile {
    dim: usize,
    mass_param: f64,
}

impl RadialDualProfile {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius of the flat set (the dual of the singularity).
    pub fn flat_radius(&self) -> f64 {
        self.mass_param.powf(1.0 / self.dim as f64)
    }

    /// Radius `r` where the sup defining the conjugate at `|y| = s` is
    /// attained: the inverse of `phi'`.
    pub fn contact_radius(&self, s: f64) -> f64 {
        let n = self.dim as f64;
        let gap = s.powf(n) - self.mass_param;
        if gap <= 0.0 {
            0.0
        } else {
            gap.powf(1.0 / n)
        }
    }

    /// Dual value at `|y| = s`.
    pub fn value(&self, s: f64) -> f64 {
        assert!(s >= 0.0);
        let r = self.contact_radius(s);
        if r == 0.0 {
            return 0.0;
        }
        let primal = RadialSingularSolution::new(self.dim, self.mass_param).expect("valid");
        r * s - primal.value(r)
    }

    /// Conjugate of the dual on a ray, computed by direct 1-D
    /// maximization of `s r - value(s)`; recovers the primal profile.
    pub fn conjugate_value(&self, r: f64) -> f64 {
        assert!(r >= 0.0);
        // The maximizer is s = phi'(r); scan a safe bracket around it.
        let primal = RadialSingularSolution::new(self.dim, self.mass_param).expect("valid");
        let s_star = primal.profile_derivative(r);
        let hi = 2.0 * s_star + 1.0;
        let (_, neg_max) = quad::scan_min(&|s: f64| self.value(s) - s * r, 0.0, hi, 400, 1e-12);
        -neg_max
    }
}

/// Radial measure data `a delta_0 + f(r) dx`: one optional atom at the
/// center plus a radial density (constant 1 by default).
#[derive(Clone)]
pub struct RadialMeasure {
    dim: usize,
    atom: f64,
    density: Density,
}

#[derive(Clone)]
pub enum Density {
    Constant(f64),
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RadialMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = match &self.density {
            Density::Constant(c) => format!("const {c}"),
            Density::Radial(_) => "radial fn".to_string(),
        };
        write!(f, "RadialMeasure(n={}, atom={}, density={d})", self.dim, self.atom)
    }
}

impl RadialMeasure {
    pub fn new(dim: usize, atom: f64) -> Result<Self, RadialError> {
        if dim < 2 {
            return Err(RadialError::DimensionTooSmall(dim));
        }
        if atom < 0.0 {
            return Err(RadialError::NegativeAtom(atom));
        }
        Ok(RadialMeasure {
            dim,
            atom,
            density: Density::Constant(1.0),
        })
    }

    pub fn with_constant_density(mut self, f: f64) -> Result<Self, RadialError> {
        if f < 0.0 {
            return Err(RadialError::NegativeDensity(f));
        }
        self.density = Density::Constant(f);
        Ok(self)
    }

    pub fn with_radial_density(
        mut self,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Self {
        self.density = Density::Radial(f);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// Cumulative mass of the ball of radius `r`:
    /// `a + int_0^r f(s) n omega_n s^(n-1) ds`. Nondecreasing in `r`.
    pub fn cumulative_mass(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        let omega = unit_ball_volume(self.dim);
        match &self.density {
            Density::Constant(f) => self.atom + f * omega * r.powf(n),
            Density::Radial(f) => {
                self.atom
                    + quad::integrate(
                        |s| f(s) * n * omega * s.powf(n - 1.0),
                        0.0,
                        r,
                        1e-12,
                    )
            }
        }
    }
}

/// Radial profile solving `det D^2 u = measure` about the center:
/// `u'(r) = (mu(B_r) / omega_n)^(1/n)`, `u(0) = 0`.
pub struct RadialProfile {
    measure: RadialMeasure,
    r_max: f64,
}

/// Integrate the radial solution of the measure problem out to `r_max`.
/// For constant density `f` and atom `a` this reproduces the classified
/// profile with `c = a / (f^{...} omega_n)` scalings; in particular for
/// `f = 1` it equals the canonical solution with `c = a / omega_n`.
pub fn radial_ode_solve(measure: RadialMeasure, r_max: f64) -> Result<RadialProfile, RadialError> {
    if r_max <= 0.0 {
        return Err(RadialError::BadRange(0.0, r_max));
    }
    if let Density::Radial(f) = &measure.density {
        // Reject negative densities on a sample of the working range.
        for k in 0..=1024 {
            let r = r_max * k as f64 / 1024.0;
            let v = f(r);
            if v < 0.0 {
                return Err(RadialError::NegativeDensity(r));
            }
        }
    }
    Ok(RadialProfile { measure, r_max })
}

impl RadialProfile {
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let omega = unit_ball_volume(self.measure.dim);
        (self.measure.cumulative_mass(r) / omega).powf(1.0 / self.measure.dim as f64)
    }

    /// `u(r)` with `u(0) = 0`, integrated to absolute error <= 1e-9.
    pub fn value(&self, r: f64) -> f64 {
        assert!(r >= 0.0 && r <= self.r_max * (1.0 + 1e-12), "radius out of range");
        quad::integrate(|s| self.derivative(s), 0.0, r, 1e-10)
    }
}
