//! Two-sided threshold control of linear diffusions when interventions are
//! only possible at the arrival times of an independent Poisson clock.
//!
//! The crate solves for the optimal band `(a*, b*)` — push the state to the
//! nearest band edge at every arrival that finds it outside — via a
//! monotone fixed-point composition of auxiliary integral functionals,
//! assembles the associated piecewise value function with full pasting
//! diagnostics, and cross-validates both against brute-force and Monte
//! Carlo oracles. Closed forms for the geometric-Brownian backend carry
//! the hot paths; adaptive quadrature backs every closed form as an
//! independent check.

// numeric guards use `!(x > 0.0)` deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod functionals;
pub mod mc;
pub mod power;
pub mod quad;
pub mod resolvent;
pub mod root;
pub mod solver;
pub mod value;

pub use diffusion::{BoundaryKind, Diffusion, Gbm, StateInterval};
pub use error::{Error, Result};
pub use functionals::{
    AssumptionGrid, AssumptionReport, Basis, CriticalPoints, Functionals, ProblemSpec, Side,
};
pub use mc::{PolicySpec, SimConfig, SimResult};
pub use power::PowerSum;
pub use quad::QuadConfig;
pub use resolvent::Resolvent;
pub use solver::{SingularThresholds, SolverConfig, SweepPoint, ThresholdSolver, Thresholds};
pub use value::{Region, ValueDiagnostics, ValueFunction};
