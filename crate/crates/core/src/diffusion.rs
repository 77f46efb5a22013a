//! The uncontrolled diffusion and its analytic toolbox.
//!
//! A [`Diffusion`] exposes drift, volatility, the scale and speed densities,
//! and the minimal excessive pair `ψ_s`/`φ_s` (the positive increasing and
//! decreasing solutions of `(A − s)f = 0`, where `A` is the generator)
//! together with their first two derivatives. Backends supply these in
//! closed form; derivatives are never approximated by differencing because
//! they feed second-order pasting checks downstream.
//!
//! The only backend shipped here is geometric Brownian motion on `(0, ∞)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::PowerSum;

/// Kind of boundary behaviour at an endpoint of the state interval.
///
/// Only natural boundaries (never reached, never entered from) are
/// supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Natural,
}

/// The open interval the diffusion lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_kind: BoundaryKind,
    pub upper_kind: BoundaryKind,
}

impl StateInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidConfig(format!(
                "state interval requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            lower_kind: BoundaryKind::Natural,
            upper_kind: BoundaryKind::Natural,
        })
    }

    /// `(0, ∞)` with natural boundaries.
    pub fn positive_half_line() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
            lower_kind: BoundaryKind::Natural,
            upper_kind: BoundaryKind::Natural,
        }
    }

    /// Strict interior test.
    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && x > self.lower && x < self.upper
    }

    pub fn check_interior(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                x,
                lo: self.lower,
                hi: self.upper,
            })
        }
    }
}

fn check_rate(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveRate(s))
    }
}

fn check_order(order: u8) -> Result<()> {
    if order <= 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(order))
    }
}

/// Analytic contract for a regular one-dimensional diffusion
/// `dX = μ(X)dt + σ(X)dW` with natural boundaries.
///
/// All methods are pure; model objects are immutable after construction and
/// safe to share across threads.
pub trait Diffusion: Send + Sync {
    fn interval(&self) -> StateInterval;

    fn drift(&self, x: f64) -> f64;

    fn drift_deriv(&self, x: f64) -> f64;

    /// Volatility `σ(x)`, strictly positive on the open interval.
    fn vol(&self, x: f64) -> f64;

    /// `order`-th derivative (0, 1 or 2) of the increasing minimal
    /// `s`-excessive function `ψ_s` at an interior point.
    fn psi(&self, s: f64, x: f64, order: u8) -> Result<f64>;

    /// `order`-th derivative of the decreasing minimal `s`-excessive
    /// function `φ_s`.
    fn phi(&self, s: f64, x: f64, order: u8) -> Result<f64>;

    /// Scale density `S'(x) = exp(−∫ 2μ/σ²)`, with the backend's fixed
    /// integration base point.
    fn scale_density(&self, x: f64) -> Result<f64>;

    /// Speed density `m'(x) = 2/(σ²(x) S'(x))`.
    fn speed_density(&self, x: f64) -> Result<f64> {
        let s = self.scale_density(x)?;
        let v = self.vol(x);
        // divide stepwise so huge σ(x) cannot overflow before S' rescales
        Ok(2.0 / v / v / s)
    }

    /// Scale and speed densities together.
    fn densities(&self, x: f64) -> Result<(f64, f64)> {
        Ok((self.scale_density(x)?, self.speed_density(x)?))
    }

    /// `ψ_s(y)·m'(y)` as one evaluation. Green-kernel integrands combine
    /// these factors; fusing them keeps far-tail evaluations finite where
    /// the factors individually overflow.
    fn psi_speed_kernel(&self, s: f64, y: f64) -> Result<f64> {
        Ok(self.psi(s, y, 0)? * self.speed_density(y)?)
    }

    /// `φ_s(y)·m'(y)` as one evaluation.
    fn phi_speed_kernel(&self, s: f64, y: f64) -> Result<f64> {
        Ok(self.phi(s, y, 0)? * self.speed_density(y)?)
    }

    /// Reference point at which x-independent expressions (the Wronskian)
    /// are evaluated.
    fn reference_point(&self) -> f64;

    /// The constant Wronskian `B_s = ψ'_s φ_s/S' − φ'_s ψ_s/S'`.
    fn wronskian(&self, s: f64) -> Result<f64> {
        let x = self.reference_point();
        let sp = self.scale_density(x)?;
        Ok(
            (self.psi(s, x, 1)? * self.phi(s, x, 0)? - self.phi(s, x, 1)? * self.psi(s, x, 0)?)
                / sp,
        )
    }

    /// Drift as a power sum, when the backend has one (enables the
    /// closed-form route for the net convenience yield).
    fn drift_power_sum(&self) -> Option<PowerSum> {
        None
    }

    /// Closed-form resolvent `R_s f` for a power-sum `f`, when available.
    /// `None` means the caller must fall back to quadrature.
    fn resolvent_power_sum(&self, _s: f64, _f: &PowerSum) -> Option<PowerSum> {
        None
    }

    /// Closed-form `L^s_f(x) = s∫ₓ^∞ f φ_s m' + (φ'_s/S')f(x)` for a
    /// power-sum `f`, when available.
    fn l_power_sum(&self, _s: f64, _f: &PowerSum) -> Option<PowerSum> {
        None
    }

    /// Closed-form `K^s_f(x) = s∫₀ˣ f ψ_s m' − (ψ'_s/S')f(x)` for a
    /// power-sum `f`, when available.
    fn k_power_sum(&self, _s: f64, _f: &PowerSum) -> Option<PowerSum> {
        None
    }

    /// Exact one-step transition `x → X_h` given a standard normal draw,
    /// for backends that admit exact sampling.
    fn exact_step(&self, _x: f64, _h: f64, _z: f64) -> Option<f64> {
        None
    }
}

/// Geometric Brownian motion `dX = μX dt + σX dW` on `(0, ∞)`.
///
/// The minimal `s`-excessive pair is `ψ_s(x) = x^{β(s)}`, `φ_s(x) =
/// x^{α(s)}` with `β(s) > 1 > 0 > α(s)` the roots of the characteristic
/// quadratic `½σ²p(p−1) + μp − s = 0`. The scale density is normalised so
/// that `S'(x) = x^{−2μ/σ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    mu: f64,
    sigma: f64,
}

impl Gbm {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gbm requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The exponent pair `(β(s), α(s))` of `ψ_s` and `φ_s`.
    pub fn exponents(&self, s: f64) -> Result<(f64, f64)> {
        check_rate(s)?;
        let s2 = self.sigma * self.sigma;
        let c = 0.5 - self.mu / s2;
        let d = (c * c + 2.0 * s / s2).sqrt();
        Ok((c + d, c - d))
    }

    /// `s − pμ − ½σ²p(p−1)`, the denominator of the closed-form resolvent
    /// of `x^p`; positive exactly when `x^p` is resolvent-integrable, i.e.
    /// `p ∈ (α(s), β(s))`.
    fn resolvent_denominator(&self, s: f64, p: f64) -> f64 {
        s - p * self.mu - 0.5 * self.sigma * self.sigma * p * (p - 1.0)
    }

    fn power_deriv(c: f64, p: f64, x: f64, order: u8) -> f64 {
        match order {
            0 => c * x.powf(p),
            1 => c * p * x.powf(p - 1.0),
            _ => c * p * (p - 1.0) * x.powf(p - 2.0),
        }
    }
}

impl Diffusion for Gbm {
    fn interval(&self) -> StateInterval {
        StateInterval::positive_half_line()
    }

    fn drift(&self, x: f64) -> f64 {
        self.mu * x
    }

    fn drift_deriv(&self, _x: f64) -> f64 {
        self.mu
    }

    fn vol(&self, x: f64) -> f64 {
        self.sigma * x
    }

    fn psi(&self, s: f64, x: f64, order: u8) -> Result<f64> {
        check_order(order)?;
        self.interval().check_interior(x)?;
        let (beta, _) = self.exponents(s)?;
        Ok(Self::power_deriv(1.0, beta, x, order))
    }

    fn phi(&self, s: f64, x: f64, order: u8) -> Result<f64> {
        check_order(order)?;
        self.interval().check_interior(x)?;
        let (_, alpha) = self.exponents(s)?;
        Ok(Self::power_deriv(1.0, alpha, x, order))
    }

    fn scale_density(&self, x: f64) -> Result<f64> {
        self.interval().check_interior(x)?;
        Ok(x.powf(-2.0 * self.mu / (self.sigma * self.sigma)))
    }

    fn speed_density(&self, x: f64) -> Result<f64> {
        self.interval().check_interior(x)?;
        // single power keeps far-tail evaluations finite
        let s2 = self.sigma * self.sigma;
        Ok(2.0 / s2 * x.powf(2.0 * self.mu / s2 - 2.0))
    }

    fn psi_speed_kernel(&self, s: f64, y: f64) -> Result<f64> {
        self.interval().check_interior(y)?;
        let (_, alpha) = self.exponents(s)?;
        let s2 = self.sigma * self.sigma;
        Ok(2.0 / s2 * y.powf(-alpha - 1.0))
    }

    fn phi_speed_kernel(&self, s: f64, y: f64) -> Result<f64> {
        self.interval().check_interior(y)?;
        let (beta, _) = self.exponents(s)?;
        let s2 = self.sigma * self.sigma;
        Ok(2.0 / s2 * y.powf(-beta - 1.0))
    }

    fn reference_point(&self) -> f64 {
        // geometric midpoint of the default [1e-4, 1e4] evaluation grid
        1.0
    }

    fn drift_power_sum(&self) -> Option<PowerSum> {
        Some(PowerSum::linear(self.mu))
    }

    fn resolvent_power_sum(&self, s: f64, f: &PowerSum) -> Option<PowerSum> {
        check_rate(s).ok()?;
        f.try_map_terms(|c, p| {
            let den = self.resolvent_denominator(s, p);
            // den > 0 is exactly the integrability window p ∈ (α, β)
            if den > 1e-12 * s {
                Some((c / den, p))
            } else {
                None
            }
        })
    }

    fn l_power_sum(&self, s: f64, f: &PowerSum) -> Option<PowerSum> {
        let (beta, _) = self.exponents(s).ok()?;
        let two_s = 2.0 * s / (self.sigma * self.sigma);
        f.try_map_terms(|c, p| {
            if beta - p > 1e-10 {
                Some((-two_s * (1.0 / (p - beta) + 1.0 / beta) * c, p - beta))
            } else {
                None
            }
        })
    }

    fn k_power_sum(&self, s: f64, f: &PowerSum) -> Option<PowerSum> {
        let (_, alpha) = self.exponents(s).ok()?;
        let two_s = 2.0 * s / (self.sigma * self.sigma);
        f.try_map_terms(|c, p| {
            if p - alpha > 1e-10 {
                Some((two_s * (1.0 / (p - alpha) + 1.0 / alpha) * c, p - alpha))
            } else {
                None
            }
        })
    }

    fn exact_step(&self, x: f64, h: f64, z: f64) -> Option<f64> {
        let drift = (self.mu - 0.5 * self.sigma * self.sigma) * h;
        Some(x * (drift + self.sigma * h.sqrt() * z).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MU: f64 = 0.05;
    const SIGMA: f64 = 0.2;
    const S: f64 = 0.15;

    // frozen from the root formula beta/alpha = 1/2 - mu/sigma^2 +- sqrt((1/2 - mu/sigma^2)^2 + 2s/sigma^2)
    const BETA0: f64 = 2.08945417290014;
    const ALPHA0: f64 = -3.58945417290014;

    fn model() -> Gbm {
        Gbm::new(MU, SIGMA).unwrap()
    }

    #[test]
    fn exponent_roots() {
        let (beta, alpha) = model().exponents(S).unwrap();
        assert!((beta - BETA0).abs() < 1e-12);
        assert!((alpha - ALPHA0).abs() < 1e-12);
        assert!(beta > 1.0 && alpha < 0.0);
    }

    #[test]
    fn psi_phi_values() {
        let m = model();
        assert_eq!(m.psi(S, 1.0, 0).unwrap(), 1.0);
        assert_eq!(m.phi(S, 1.0, 0).unwrap(), 1.0);
        // 2^beta0 and 2^alpha0
        assert!((m.psi(S, 2.0, 0).unwrap() - 4.25587026554456).abs() < 1e-10);
        assert!((m.phi(S, 2.0, 0).unwrap() - 0.0830742876388021).abs() < 1e-12);
    }

    #[test]
    fn psi_increasing_phi_decreasing_on_grid() {
        let m = model();
        let mut x = 1e-3;
        while x < 1e3 {
            assert!(m.psi(S, x, 0).unwrap() > 0.0);
            assert!(m.psi(S, x, 1).unwrap() > 0.0);
            assert!(m.phi(S, x, 0).unwrap() > 0.0);
            assert!(m.phi(S, x, 1).unwrap() < 0.0);
            x *= 3.7;
        }
    }

    #[test]
    fn densities_match_closed_forms() {
        let m = model();
        // S'(x) = x^{-2mu/sigma^2} = x^{-2.5}
        assert_eq!(m.scale_density(1.0).unwrap(), 1.0);
        assert!((m.scale_density(2.0).unwrap() - 2.0_f64.powf(-2.5)).abs() < 1e-15);
        // m'(1) = 2/sigma^2 = 50
        assert!((m.speed_density(1.0).unwrap() - 50.0).abs() < 1e-12);
        // definitional identity m' S' sigma^2 / 2 = 1
        for &x in &[0.01, 0.3, 1.0, 7.0, 450.0] {
            let (sp, mp) = m.densities(x).unwrap();
            let v = m.vol(x);
            assert!((mp * sp * v * v / 2.0 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn wronskian_is_beta_minus_alpha() {
        let m = model();
        let b = m.wronskian(S).unwrap();
        assert!((b - (BETA0 - ALPHA0)).abs() < 1e-12);
        assert!(b > 0.0);
    }

    #[test]
    fn wronskian_constancy_across_grid() {
        let m = model();
        let reference = m.wronskian(S).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let x = 1e-2 * 10f64.powf(4.0 * i as f64 / 19.0);
            let sp = m.scale_density(x).unwrap();
            let b = (m.psi(S, x, 1).unwrap() * m.phi(S, x, 0).unwrap()
                - m.phi(S, x, 1).unwrap() * m.psi(S, x, 0).unwrap())
                / sp;
            worst = worst.max((b - reference).abs() / reference);
        }
        assert!(worst <= 1e-8, "relative spread {worst:.3e}");
    }

    #[test]
    fn harmonicity_residual() {
        let m = model();
        for i in 0..16 {
            let x = 1e-2 * 10f64.powf(4.0 * i as f64 / 15.0);
            for s in [0.07, S, 2.15] {
                let psi_res = 0.5 * m.vol(x) * m.vol(x) * m.psi(s, x, 2).unwrap()
                    + m.drift(x) * m.psi(s, x, 1).unwrap()
                    - s * m.psi(s, x, 0).unwrap();
                let phi_res = 0.5 * m.vol(x) * m.vol(x) * m.phi(s, x, 2).unwrap()
                    + m.drift(x) * m.phi(s, x, 1).unwrap()
                    - s * m.phi(s, x, 0).unwrap();
                assert!(psi_res.abs() <= 1e-8 * s * m.psi(s, x, 0).unwrap());
                assert!(phi_res.abs() <= 1e-8 * s * m.phi(s, x, 0).unwrap());
            }
        }
    }

    #[test]
    fn convexity_when_drift_slope_below_rate() {
        let m = model();
        assert!(m.drift_deriv(1.0) < S);
        for i in 0..16 {
            let x = 1e-2 * 10f64.powf(4.0 * i as f64 / 15.0);
            assert!(m.psi(S, x, 2).unwrap() >= 0.0);
            assert!(m.phi(S, x, 2).unwrap() >= 0.0);
        }
    }

    #[test]
    fn excessive_ratio_orderings() {
        // psi_{r+lam}/psi_r increasing and dominated by the derivative
        // ratio; phi ratio decreasing, same domination.
        let m = model();
        let r = S;
        for lam in [0.4, 2.0, 20.0] {
            let grid = [0.05, 0.2, 0.8, 1.0, 3.0, 12.0];
            for w in grid.windows(2) {
                let (z, x) = (w[0], w[1]);
                let psi_ratio = |y: f64| m.psi(r + lam, y, 0).unwrap() / m.psi(r, y, 0).unwrap();
                let phi_ratio = |y: f64| m.phi(r + lam, y, 0).unwrap() / m.phi(r, y, 0).unwrap();
                assert!(psi_ratio(z) <= psi_ratio(x) * (1.0 + 1e-12));
                assert!(
                    psi_ratio(x)
                        <= m.psi(r + lam, x, 1).unwrap() / m.psi(r, x, 1).unwrap() * (1.0 + 1e-12)
                );
                assert!(phi_ratio(z) >= phi_ratio(x) * (1.0 - 1e-12));
                assert!(
                    phi_ratio(x)
                        <= m.phi(r + lam, x, 1).unwrap() / m.phi(r, x, 1).unwrap() * (1.0 + 1e-12)
                );
            }
        }
    }

    #[test]
    fn domain_and_order_errors() {
        let m = model();
        assert!(matches!(m.psi(S, 0.0, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(m.phi(S, -1.0, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(m.psi(S, 1.0, 3), Err(Error::UnsupportedOrder(3))));
        assert!(matches!(m.exponents(0.0), Err(Error::NonPositiveRate(_))));
        assert!(Gbm::new(0.05, 0.0).is_err());
    }

    #[test]
    fn exact_step_is_lognormal() {
        let m = model();
        let x = m.exact_step(1.0, 0.25, 0.7).unwrap();
        let expect = ((MU - 0.5 * SIGMA * SIGMA) * 0.25 + SIGMA * 0.5 * 0.7).exp();
        assert!((x - expect).abs() < 1e-15);
    }

    #[test]
    fn fused_kernels_match_their_factors() {
        let m = model();
        for &s in &[0.07, S, 2.15] {
            for &y in &[0.05, 0.7, 1.0, 12.0] {
                let psi_kernel = m.psi_speed_kernel(s, y).unwrap();
                let product = m.psi(s, y, 0).unwrap() * m.speed_density(y).unwrap();
                assert!((psi_kernel - product).abs() <= 1e-12 * product.abs());
                let phi_kernel = m.phi_speed_kernel(s, y).unwrap();
                let product = m.phi(s, y, 0).unwrap() * m.speed_density(y).unwrap();
                assert!((phi_kernel - product).abs() <= 1e-12 * product.abs());
            }
        }
    }

    proptest! {
        #[test]
        fn model_contract_over_random_parameters(
            mu in -0.1..0.12f64,
            sigma in 0.15..1.5f64,
            s in 0.01..2.0f64,
            x in 0.01..100.0f64,
        ) {
            let m = Gbm::new(mu, sigma).unwrap();
            let (beta, alpha) = m.exponents(s).unwrap();
            prop_assert!(beta > 0.0 && alpha < 0.0);
            prop_assert!((m.wronskian(s).unwrap() - (beta - alpha)).abs() <= 1e-10 * (beta - alpha));
            // harmonicity: (A - s) psi = (A - s) phi = 0, with the
            // cancellation tolerance scaled by the term magnitudes
            for (f, f1, f2) in [
                (m.psi(s, x, 0).unwrap(), m.psi(s, x, 1).unwrap(), m.psi(s, x, 2).unwrap()),
                (m.phi(s, x, 0).unwrap(), m.phi(s, x, 1).unwrap(), m.phi(s, x, 2).unwrap()),
            ] {
                let quad_term = 0.5 * m.vol(x) * m.vol(x) * f2;
                let drift_term = m.drift(x) * f1;
                let residual = quad_term + drift_term - s * f;
                let scale = quad_term.abs() + drift_term.abs() + s * f;
                prop_assert!(residual.abs() <= 1e-11 * scale, "residual {residual:.3e}");
            }
        }
    }
}
