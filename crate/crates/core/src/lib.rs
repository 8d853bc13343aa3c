//! Generalized (Alexandrov) solutions of Monge-Ampere equations with
//! point singularities.
//!
//! The library has four working layers:
//!
//! - [`radial`]: closed forms for the classified radial singular
//!   solutions in any dimension: values, Hessian spectra, subgradient
//!   masses, Legendre duals, Hessian-metric lengths, and the radial
//!   measure ODE.
//! - [`geometry`]: exact Monge-Ampere measures of piecewise-linear
//!   convex functions in 2-D via lifted lower hulls and subgradient
//!   cells, plus discrete Legendre transforms and contact-set probes.
//! - [`solver`]: an Oliker-Prussner fixed point for the Dirichlet
//!   problem with measure right-hand sides on convex polygons, the
//!   averaged-subsolution and sub/supersolution sandwich constructions,
//!   and growing-ball approximations of global solutions.
//! - [`verify`]: quantitative checks of the classification formulas,
//!   growth rates, and asymptotics, with a named check catalogue in
//!   [`checks`] consumed by the CLI and the acceptance suite.
//!
//! Scenario configuration and the columnar output formats live in
//! [`config`] and [`report`].

pub mod config;
pub mod geometry;
pub mod quad;
pub mod radial;
pub mod report;
pub mod solver;
pub mod verify;

pub mod checks {
    //! Named verification checks shared by the CLI and the acceptance
    //! suite.
    pub use crate::verify::checks::*;
}
