//! The resolvent operator `R_s f = E_x ∫ e^{−st} f(X_t) dt`.
//!
//! Evaluation goes through the Green-function representation
//!
//! ```text
//! (R_s f)(x) = B_s⁻¹ [ φ_s(x) ∫₀ˣ ψ_s f m' dy + ψ_s(x) ∫ₓ^∞ φ_s f m' dy ]
//! ```
//!
//! with derivatives taken termwise (the boundary terms cancel at order one;
//! order two picks up `−2f(x)/σ²(x)`). Backends that know a closed form for
//! power-sum integrands short-circuit the quadrature; the quadrature route
//! stays available as an independent cross-check.
//!
//! Membership of `f` in the integrability class required by the operator is
//! not provable numerically: the tail-truncation diagnostic (and, on the
//! closed-form route, the exponent window) acts as a heuristic stand-in and
//! reports divergence as an error.

use crate::diffusion::Diffusion;
use crate::error::{Error, Result};
use crate::power::PowerSum;
use crate::quad::{integrate_lower_tail, integrate_upper_tail, QuadConfig};

pub struct Resolvent<'m> {
    model: &'m dyn Diffusion,
    cfg: QuadConfig,
}

impl<'m> Resolvent<'m> {
    pub fn new(model: &'m dyn Diffusion) -> Self {
        Self {
            model,
            cfg: QuadConfig::default(),
        }
    }

    pub fn with_config(model: &'m dyn Diffusion, cfg: QuadConfig) -> Self {
        Self { model, cfg }
    }

    pub fn model(&self) -> &'m dyn Diffusion {
        self.model
    }

    pub fn quad_config(&self) -> &QuadConfig {
        &self.cfg
    }

    /// `(R_s f)(x)` or one of its first two derivatives, closed form when
    /// the backend provides one.
    pub fn resolve(&self, s: f64, f: &PowerSum, x: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(s > 0.0) {
            return Err(Error::NonPositiveRate(s));
        }
        self.model.interval().check_interior(x)?;
        if let Some(rf) = self.model.resolvent_power_sum(s, f) {
            return Ok(rf.eval_deriv(x, order));
        }
        self.resolve_quadrature(s, &|y| f.eval(y), x, order)
    }

    /// Closed-form image of the resolvent as a power sum, when available.
    pub fn resolve_power_sum(&self, s: f64, f: &PowerSum) -> Option<PowerSum> {
        self.model.resolvent_power_sum(s, f)
    }

    /// Green-representation evaluation by adaptive quadrature; independent
    /// of any closed form the backend declares.
    pub fn resolve_quadrature(
        &self,
        s: f64,
        f: &dyn Fn(f64) -> f64,
        x: f64,
        order: u8,
    ) -> Result<f64> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let interval = self.model.interval();
        interval.check_interior(x)?;
        let m = self.model;
        let wronskian = m.wronskian(s)?;

        let lower = |y: f64| m.psi_speed_kernel(s, y).unwrap_or(f64::NAN) * f(y);
        let upper = |y: f64| m.phi_speed_kernel(s, y).unwrap_or(f64::NAN) * f(y);
        let i_lo = integrate_lower_tail(&lower, x, &self.cfg, "resolvent lower branch")?.value;
        let i_hi = integrate_upper_tail(&upper, x, &self.cfg, "resolvent upper branch")?.value;

        let combined =
            (self.model.phi(s, x, order)? * i_lo + self.model.psi(s, x, order)? * i_hi) / wronskian;
        if order == 2 {
            let v = m.vol(x);
            Ok(combined - 2.0 * f(x) / (v * v))
        } else {
            Ok(combined)
        }
    }

    /// Normalised residual of the resolvent identity
    /// `R_q R_s f = (R_s f − R_q f)/(q − s)`, `q > s > 0`. Self-test only;
    /// the outer application of `R_q` always runs through quadrature.
    pub fn equation_residual(&self, f: &PowerSum, q: f64, s: f64, x: f64) -> Result<f64> {
        if !(q > s && s > 0.0) {
            return Err(Error::InvalidRates { q, s });
        }
        let inner = |y: f64| self.resolve(s, f, y, 0).unwrap_or(f64::NAN);
        let lhs = self.resolve_quadrature(q, &inner, x, 0)?;
        let rhs = (self.resolve(s, f, x, 0)? - self.resolve(q, f, x, 0)?) / (q - s);
        Ok((lhs - rhs).abs() / (self.resolve(s, f, x, 0)?.abs() + 1.0))
    }
}
