//! Problem data and the auxiliary functionals driving the threshold system.
//!
//! For a control side `n ∈ {d, u}` with unit price `γ_d` and unit cost
//! `γ_u`, the module provides
//!
//! * the net convenience yield `θ_n(x) = π(x) + γ_n(μ(x) − rx)`,
//! * `g_n(x) = γ_n x − (R_r π)(x)` and `π_{γ_n}(x) = λγ_n x + π(x)`,
//! * the integral functionals
//!   `L^s_f(x) = s∫ₓ^∞ f φ_s m' + (φ'_s/S')f(x)` and
//!   `K^s_f(x) = s∫₀ˣ f ψ_s m' − (ψ'_s/S')f(x)`,
//! * the four combinations `H(ψ)`, `H(φ)`, `Q(ψ)`, `Q(φ)` whose equality in
//!   pairs characterises the optimal thresholds,
//! * the critical points anchoring existence and uniqueness, and
//! * a sampled checker for the standing assumptions.
//!
//! `H`/`Q` are computed in the θ-based form, e.g.
//! `Q(ψ; x) = −(ψ'_r/φ'_{r+λ})L^{r+λ}_{θ_d}(x) − K^r_{θ_d}(x)`; the
//! equivalent quotient form through `L`/`K` of `g` and the fundamental
//! solutions is exposed separately as a cross-check route (it carries a
//! factor λ so the two agree identically).

use serde::Serialize;

use crate::diffusion::Diffusion;
use crate::error::{Error, Result};
use crate::power::PowerSum;
use crate::quad::{integrate_lower_tail, integrate_upper_tail, QuadConfig};
use crate::resolvent::Resolvent;
use crate::root::bisect;

/// Which control direction a quantity refers to: `Down` pushes the state
/// down and earns `γ_d` per unit, `Up` pushes it up and costs `γ_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Down,
    Up,
}

/// Which fundamental solution flavours an `H`/`Q` combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Psi,
    Phi,
}

/// Everything entering the objective: discounting, signal intensity, unit
/// price/cost, and the running payoff.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub r: f64,
    pub lambda: f64,
    pub gamma_d: f64,
    pub gamma_u: f64,
    pub payoff: PowerSum,
}

impl ProblemSpec {
    pub fn new(r: f64, lambda: f64, gamma_d: f64, gamma_u: f64, payoff: PowerSum) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "discount rate must be positive, got {r}"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "signal intensity must be positive, got {lambda}"
            )));
        }
        if !(gamma_d < gamma_u) {
            return Err(Error::InvalidConfig(format!(
                "unit price must be below unit cost, got gamma_d={gamma_d}, gamma_u={gamma_u}"
            )));
        }
        Ok(Self {
            r,
            lambda,
            gamma_d,
            gamma_u,
            payoff,
        })
    }

    pub fn gamma(&self, side: Side) -> f64 {
        match side {
            Side::Down => self.gamma_d,
            Side::Up => self.gamma_u,
        }
    }

    /// Same problem with a different signal intensity.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.r,
            lambda,
            self.gamma_d,
            self.gamma_u,
            self.payoff.clone(),
        )
    }
}

/// The anchors of existence and uniqueness: the argmax and sign-change
/// points of `θ_n`, the root `x̃` of `K^{r+λ}_{θ_u}` and the root `x̂` of
/// `L^{r+λ}_{θ_d}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalPoints {
    pub x_star_u: f64,
    pub x_star_d: f64,
    pub x_zero_u: f64,
    pub x_zero_d: f64,
    pub x_tilde: f64,
    pub x_hat: f64,
}

/// Outcome of one assumption item.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionItem {
    pub code: &'static str,
    pub label: &'static str,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Sampled verdict on the standing assumptions plus the sufficient
/// existence condition `x̃ < x̂`.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub pass: bool,
    pub items: Vec<AssumptionItem>,
}

impl AssumptionReport {
    pub fn item(&self, code: &str) -> Option<&AssumptionItem> {
        self.items.iter().find(|i| i.code == code)
    }

    /// All items except the (sufficient-only) existence condition.
    pub fn core_items_pass(&self) -> bool {
        self.items
            .iter()
            .filter(|i| i.code != "existence_condition")
            .all(|i| i.pass)
    }
}

/// Log-spaced sampling grid used by the assumption checker.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for AssumptionGrid {
    fn default() -> Self {
        Self {
            lo: 1e-4,
            hi: 1e4,
            points: 512,
        }
    }
}

impl AssumptionGrid {
    fn sample(&self, scale: f64) -> Vec<f64> {
        let lo = (self.lo * scale).ln();
        let hi = (self.hi * scale).ln();
        (0..self.points)
            .map(|i| (lo + (hi - lo) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

// Closed-form images of the six L/K combinations the optimality system
// needs, available when the backend does power sums.
struct FastTables {
    k_theta_u_r: PowerSum,
    k_theta_u_rl: PowerSum,
    k_theta_d_r: PowerSum,
    l_theta_d_r: PowerSum,
    l_theta_d_rl: PowerSum,
    l_theta_u_r: PowerSum,
}

pub struct Functionals<'m> {
    model: &'m dyn Diffusion,
    problem: ProblemSpec,
    resolvent: Resolvent<'m>,
    root_tol: f64,
    fast: Option<FastTables>,
}

impl<'m> Functionals<'m> {
    pub fn new(model: &'m dyn Diffusion, problem: ProblemSpec) -> Self {
        Self::with_config(model, problem, QuadConfig::default(), 1e-10)
    }

    pub fn with_config(
        model: &'m dyn Diffusion,
        problem: ProblemSpec,
        quad: QuadConfig,
        root_tol: f64,
    ) -> Self {
        let resolvent = Resolvent::with_config(model, quad);
        let fast = Self::build_fast_tables(model, &problem);
        Self {
            model,
            problem,
            resolvent,
            root_tol,
            fast,
        }
    }

    fn build_fast_tables(model: &dyn Diffusion, problem: &ProblemSpec) -> Option<FastTables> {
        let theta_d = Self::theta_power_sum(model, problem, Side::Down)?;
        let theta_u = Self::theta_power_sum(model, problem, Side::Up)?;
        let r = problem.r;
        let rl = r + problem.lambda;
        Some(FastTables {
            k_theta_u_r: model.k_power_sum(r, &theta_u)?,
            k_theta_u_rl: model.k_power_sum(rl, &theta_u)?,
            k_theta_d_r: model.k_power_sum(r, &theta_d)?,
            l_theta_d_r: model.l_power_sum(r, &theta_d)?,
            l_theta_d_rl: model.l_power_sum(rl, &theta_d)?,
            l_theta_u_r: model.l_power_sum(r, &theta_u)?,
        })
    }

    fn theta_power_sum(
        model: &dyn Diffusion,
        problem: &ProblemSpec,
        side: Side,
    ) -> Option<PowerSum> {
        let drift = model.drift_power_sum()?;
        let net = drift.sub(&PowerSum::linear(problem.r));
        Some(problem.payoff.add(&net.scale(problem.gamma(side))))
    }

    pub fn model(&self) -> &'m dyn Diffusion {
        self.model
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn resolvent(&self) -> &Resolvent<'m> {
        &self.resolvent
    }

    pub fn root_tol(&self) -> f64 {
        self.root_tol
    }

    /// Net convenience yield `θ_n(x) = π(x) + γ_n(μ(x) − rx)`.
    pub fn theta(&self, side: Side, x: f64) -> f64 {
        self.problem.payoff.eval(x)
            + self.problem.gamma(side) * (self.model.drift(x) - self.problem.r * x)
    }

    pub fn theta_deriv(&self, side: Side, x: f64) -> f64 {
        self.problem.payoff.eval_deriv(x, 1)
            + self.problem.gamma(side) * (self.model.drift_deriv(x) - self.problem.r)
    }

    /// `g_n(x) = γ_n x − (R_r π)(x)`.
    pub fn g(&self, side: Side, x: f64) -> Result<f64> {
        Ok(self.problem.gamma(side) * x
            - self
                .resolvent
                .resolve(self.problem.r, &self.problem.payoff, x, 0)?)
    }

    pub fn g_deriv(&self, side: Side, x: f64) -> Result<f64> {
        Ok(self.problem.gamma(side)
            - self
                .resolvent
                .resolve(self.problem.r, &self.problem.payoff, x, 1)?)
    }

    /// `π_{γ_n}(x) = λ γ_n x + π(x)`.
    pub fn pi_gamma(&self, side: Side, x: f64) -> f64 {
        self.problem.lambda * self.problem.gamma(side) * x + self.problem.payoff.eval(x)
    }

    pub fn pi_gamma_power_sum(&self, side: Side) -> PowerSum {
        self.problem.payoff.add(&PowerSum::linear(
            self.problem.lambda * self.problem.gamma(side),
        ))
    }

    /// `L^s_f(x)` for a power-sum `f`; closed form when the backend has one.
    pub fn l_functional(&self, f: &PowerSum, s: f64, x: f64) -> Result<f64> {
        if let Some(ps) = self.model.l_power_sum(s, f) {
            return Ok(ps.eval(x));
        }
        self.l_quadrature(&|y| f.eval(y), s, x)
    }

    /// `K^s_f(x)` for a power-sum `f`.
    pub fn k_functional(&self, f: &PowerSum, s: f64, x: f64) -> Result<f64> {
        if let Some(ps) = self.model.k_power_sum(s, f) {
            return Ok(ps.eval(x));
        }
        self.k_quadrature(&|y| f.eval(y), s, x)
    }

    /// Quadrature evaluation of `L^s_f`, usable with any integrand.
    pub fn l_quadrature(&self, f: &dyn Fn(f64) -> f64, s: f64, x: f64) -> Result<f64> {
        self.model.interval().check_interior(x)?;
        let m = self.model;
        let integrand = |y: f64| f(y) * m.phi_speed_kernel(s, y).unwrap_or(f64::NAN);
        let tail =
            integrate_upper_tail(&integrand, x, self.resolvent.quad_config(), "L functional")?;
        Ok(s * tail.value + m.phi(s, x, 1)? / m.scale_density(x)? * f(x))
    }

    /// Quadrature evaluation of `K^s_f`.
    pub fn k_quadrature(&self, f: &dyn Fn(f64) -> f64, s: f64, x: f64) -> Result<f64> {
        self.model.interval().check_interior(x)?;
        let m = self.model;
        let integrand = |y: f64| f(y) * m.psi_speed_kernel(s, y).unwrap_or(f64::NAN);
        let tail =
            integrate_lower_tail(&integrand, x, self.resolvent.quad_config(), "K functional")?;
        Ok(s * tail.value - m.psi(s, x, 1)? / m.scale_density(x)? * f(x))
    }

    pub(crate) fn l_theta(&self, side: Side, s: f64, x: f64) -> Result<f64> {
        if let Some(fast) = &self.fast {
            let rl = self.problem.r + self.problem.lambda;
            match side {
                Side::Down if s == self.problem.r => return Ok(fast.l_theta_d_r.eval(x)),
                Side::Down if s == rl => return Ok(fast.l_theta_d_rl.eval(x)),
                Side::Up if s == self.problem.r => return Ok(fast.l_theta_u_r.eval(x)),
                _ => {}
            }
        }
        self.l_quadrature(&|y| self.theta(side, y), s, x)
    }

    pub(crate) fn k_theta(&self, side: Side, s: f64, x: f64) -> Result<f64> {
        if let Some(fast) = &self.fast {
            let rl = self.problem.r + self.problem.lambda;
            match side {
                Side::Up if s == self.problem.r => return Ok(fast.k_theta_u_r.eval(x)),
                Side::Up if s == rl => return Ok(fast.k_theta_u_rl.eval(x)),
                Side::Down if s == self.problem.r => return Ok(fast.k_theta_d_r.eval(x)),
                _ => {}
            }
        }
        self.k_quadrature(&|y| self.theta(side, y), s, x)
    }

    /// `H(·; x)` in the θ-based representation:
    /// `H(ψ; x) = (ψ'_r/ψ'_{r+λ}) K^{r+λ}_{θ_u}(x) − K^r_{θ_u}(x)` and
    /// `H(φ; x) = (φ'_r/ψ'_{r+λ}) K^{r+λ}_{θ_u}(x) + L^r_{θ_u}(x)`.
    pub fn h(&self, basis: Basis, x: f64) -> Result<f64> {
        let r = self.problem.r;
        let rl = r + self.problem.lambda;
        let k_rl = self.k_theta(Side::Up, rl, x)?;
        let psi_rl_1 = self.model.psi(rl, x, 1)?;
        match basis {
            Basis::Psi => {
                Ok(self.model.psi(r, x, 1)? / psi_rl_1 * k_rl - self.k_theta(Side::Up, r, x)?)
            }
            Basis::Phi => {
                Ok(self.model.phi(r, x, 1)? / psi_rl_1 * k_rl + self.l_theta(Side::Up, r, x)?)
            }
        }
    }

    /// `Q(·; x)` in the θ-based representation:
    /// `Q(ψ; x) = −(ψ'_r/φ'_{r+λ}) L^{r+λ}_{θ_d}(x) − K^r_{θ_d}(x)` and
    /// `Q(φ; x) = −(φ'_r/φ'_{r+λ}) L^{r+λ}_{θ_d}(x) + L^r_{θ_d}(x)`.
    pub fn q(&self, basis: Basis, x: f64) -> Result<f64> {
        let r = self.problem.r;
        let rl = r + self.problem.lambda;
        let l_rl = self.l_theta(Side::Down, rl, x)?;
        let phi_rl_1 = self.model.phi(rl, x, 1)?;
        match basis {
            Basis::Psi => {
                Ok(-self.model.psi(r, x, 1)? / phi_rl_1 * l_rl - self.k_theta(Side::Down, r, x)?)
            }
            Basis::Phi => {
                Ok(-self.model.phi(r, x, 1)? / phi_rl_1 * l_rl + self.l_theta(Side::Down, r, x)?)
            }
        }
    }

    /// Quotient representation of `H` through `K` of `g_u` and the
    /// fundamental solutions, scaled by λ so it agrees with [`Self::h`].
    /// The integrals run through quadrature, making this an independent
    /// route.
    pub fn h_quotient(&self, basis: Basis, x: f64) -> Result<f64> {
        let r = self.problem.r;
        let rl = r + self.problem.lambda;
        let m = self.model;
        let k_gu = self.k_quadrature(&|y| self.g(Side::Up, y).unwrap_or(f64::NAN), rl, x)?;
        let g_u_1 = self.g_deriv(Side::Up, x)?;
        let psi_rl_1 = m.psi(rl, x, 1)?;
        let quotient = match basis {
            Basis::Psi => {
                let k_psi = self.k_quadrature(&|y| m.psi(r, y, 0).unwrap_or(f64::NAN), rl, x)?;
                (m.psi(r, x, 1)? * k_gu - g_u_1 * k_psi) / psi_rl_1
            }
            Basis::Phi => {
                let k_phi = self.k_quadrature(&|y| m.phi(r, y, 0).unwrap_or(f64::NAN), rl, x)?;
                (m.phi(r, x, 1)? * k_gu - g_u_1 * k_phi) / psi_rl_1
            }
        };
        Ok(self.problem.lambda * quotient)
    }

    /// Quotient representation of `Q` through `L` of `g_d`, scaled by λ.
    pub fn q_quotient(&self, basis: Basis, x: f64) -> Result<f64> {
        let r = self.problem.r;
        let rl = r + self.problem.lambda;
        let m = self.model;
        let l_gd = self.l_quadrature(&|y| self.g(Side::Down, y).unwrap_or(f64::NAN), rl, x)?;
        let g_d_1 = self.g_deriv(Side::Down, x)?;
        let phi_rl_1 = m.phi(rl, x, 1)?;
        let quotient = match basis {
            Basis::Psi => {
                let l_psi = self.l_quadrature(&|y| m.psi(r, y, 0).unwrap_or(f64::NAN), rl, x)?;
                (g_d_1 * l_psi - m.psi(r, x, 1)? * l_gd) / phi_rl_1
            }
            Basis::Phi => {
                let l_phi = self.l_quadrature(&|y| m.phi(r, y, 0).unwrap_or(f64::NAN), rl, x)?;
                (g_d_1 * l_phi - m.phi(r, x, 1)? * l_gd) / phi_rl_1
            }
        };
        Ok(self.problem.lambda * quotient)
    }

    fn scale_point(&self) -> f64 {
        self.model.reference_point()
    }

    /// Argmax of `θ_n`, located as the bracketed root of `θ'_n`.
    fn theta_peak(&self, side: Side) -> Result<f64> {
        let name = match side {
            Side::Down => "argmax of theta_d",
            Side::Up => "argmax of theta_u",
        };
        let mut lo = self.scale_point();
        let mut expansions = 0;
        while self.theta_deriv(side, lo) <= 0.0 {
            lo *= 0.5;
            expansions += 1;
            if expansions > 300 {
                return Err(Error::BracketingFailure {
                    target: name.into(),
                    detail: "derivative never becomes positive near the lower boundary".into(),
                });
            }
        }
        let mut hi = lo * 2.0;
        expansions = 0;
        while self.theta_deriv(side, hi) >= 0.0 {
            hi *= 2.0;
            expansions += 1;
            if expansions > 300 {
                return Err(Error::BracketingFailure {
                    target: name.into(),
                    detail: "derivative never becomes negative; no interior peak".into(),
                });
            }
        }
        bisect(&|x| Ok(self.theta_deriv(side, x)), lo, hi, self.root_tol)
    }

    /// Root of `θ_n` to the right of its peak.
    fn theta_root(&self, side: Side, peak: f64) -> Result<f64> {
        let name = match side {
            Side::Down => "sign change of theta_d",
            Side::Up => "sign change of theta_u",
        };
        if self.theta(side, peak) <= 0.0 {
            return Err(Error::BracketingFailure {
                target: name.into(),
                detail: format!("theta is non-positive at its peak {peak}"),
            });
        }
        let mut hi = peak * 2.0;
        let mut expansions = 0;
        while self.theta(side, hi) >= 0.0 {
            hi *= 2.0;
            expansions += 1;
            if expansions > 300 {
                return Err(Error::BracketingFailure {
                    target: name.into(),
                    detail: "theta never becomes negative for large states".into(),
                });
            }
        }
        bisect(&|x| Ok(self.theta(side, x)), peak, hi, self.root_tol)
    }

    /// Root `x̃` of `K^{r+λ}_{θ_u}` on `(x*_u, ∞)`.
    fn k_root(&self, peak_u: f64) -> Result<f64> {
        let s = self.problem.r + self.problem.lambda;
        let at_peak = self.k_theta(Side::Up, s, peak_u)?;
        if at_peak >= 0.0 {
            return Err(Error::BracketingFailure {
                target: "root of K^{r+lambda}_{theta_u}".into(),
                detail: format!("functional is non-negative at the theta_u peak ({at_peak})"),
            });
        }
        let mut hi = peak_u * 2.0;
        let mut expansions = 0;
        while self.k_theta(Side::Up, s, hi)? <= 0.0 {
            hi *= 2.0;
            expansions += 1;
            if expansions > 300 {
                return Err(Error::BracketingFailure {
                    target: "root of K^{r+lambda}_{theta_u}".into(),
                    detail: "no sign change to the right of the theta_u peak".into(),
                });
            }
        }
        bisect(&|x| self.k_theta(Side::Up, s, x), peak_u, hi, self.root_tol)
    }

    /// Root `x̂` of `L^{r+λ}_{θ_d}` on `(0, x*_d)`.
    fn l_root(&self, peak_d: f64) -> Result<f64> {
        let s = self.problem.r + self.problem.lambda;
        let at_peak = self.l_theta(Side::Down, s, peak_d)?;
        if at_peak >= 0.0 {
            return Err(Error::BracketingFailure {
                target: "root of L^{r+lambda}_{theta_d}".into(),
                detail: format!("functional is non-negative at the theta_d peak ({at_peak})"),
            });
        }
        let mut lo = peak_d * 0.5;
        let mut expansions = 0;
        while self.l_theta(Side::Down, s, lo)? <= 0.0 {
            lo *= 0.5;
            expansions += 1;
            if expansions > 300 {
                return Err(Error::BracketingFailure {
                    target: "root of L^{r+lambda}_{theta_d}".into(),
                    detail: "no sign change to the left of the theta_d peak".into(),
                });
            }
        }
        bisect(
            &|x| self.l_theta(Side::Down, s, x),
            lo,
            peak_d,
            self.root_tol,
        )
    }

    pub fn critical_points(&self) -> Result<CriticalPoints> {
        let x_star_u = self.theta_peak(Side::Up)?;
        let x_star_d = self.theta_peak(Side::Down)?;
        let x_zero_u = self.theta_root(Side::Up, x_star_u)?;
        let x_zero_d = self.theta_root(Side::Down, x_star_d)?;
        let x_tilde = self.k_root(x_star_u)?;
        let x_hat = self.l_root(x_star_d)?;

        let tol = 16.0 * self.root_tol;
        if !(x_star_u < x_star_d * (1.0 + tol)) {
            return Err(Error::BracketingFailure {
                target: "critical point ordering".into(),
                detail: format!("expected x*_u < x*_d, got {x_star_u} vs {x_star_d}"),
            });
        }
        if !(x_hat < x_star_d * (1.0 + tol) && x_tilde > x_star_u * (1.0 - tol)) {
            return Err(Error::BracketingFailure {
                target: "critical point ordering".into(),
                detail: format!(
                    "expected x_hat < x*_d and x_tilde > x*_u, got x_hat={x_hat}, x_tilde={x_tilde}"
                ),
            });
        }
        Ok(CriticalPoints {
            x_star_u,
            x_star_d,
            x_zero_u,
            x_zero_d,
            x_tilde,
            x_hat,
        })
    }

    /// Evaluate the standing assumptions on a sampled grid plus the
    /// sufficient existence condition `x̃ < x̂`. Failures are reported, not
    /// thrown.
    pub fn check_assumptions(&self, grid: &AssumptionGrid) -> AssumptionReport {
        let xs = grid.sample(self.scale_point());
        let mut items = Vec::with_capacity(7);

        // (i) strict ordering of the unit price and cost
        let gamma_ok = self.problem.gamma_d < self.problem.gamma_u;
        items.push(AssumptionItem {
            code: "gamma_order",
            label: "(i) gamma_d < gamma_u",
            pass: gamma_ok,
            detail: (!gamma_ok).then(|| {
                format!(
                    "gamma_d={} gamma_u={}",
                    self.problem.gamma_d, self.problem.gamma_u
                )
            }),
        });

        // (ii) integrability of theta_n and the identity map under R_r
        let mut integrability_detail = None;
        for (name, f) in [
            (
                "theta_d",
                Self::theta_power_sum(self.model, &self.problem, Side::Down),
            ),
            (
                "theta_u",
                Self::theta_power_sum(self.model, &self.problem, Side::Up),
            ),
            ("identity", Some(PowerSum::linear(1.0))),
        ] {
            let ok = match f {
                Some(ps) => self.model.resolvent_power_sum(self.problem.r, &ps).is_some(),
                None => {
                    // no closed form available: probe the tails numerically
                    self.resolvent
                        .resolve_quadrature(
                            self.problem.r,
                            &|y| self.theta(Side::Down, y),
                            self.scale_point(),
                            0,
                        )
                        .is_ok()
                }
            };
            if !ok && integrability_detail.is_none() {
                integrability_detail = Some(format!("{name} failed the resolvent tail diagnostic"));
            }
        }
        items.push(AssumptionItem {
            code: "integrability",
            label: "(ii) theta_n and the identity map are resolvent-integrable",
            pass: integrability_detail.is_none(),
            detail: integrability_detail,
        });

        // (iii) payoff positive and non-decreasing
        let mut payoff_detail = None;
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (pa, pb) = (self.problem.payoff.eval(a), self.problem.payoff.eval(b));
            if pa < 0.0 || pb < pa * (1.0 - 1e-12) - 1e-300 {
                payoff_detail = Some(format!("payoff not positive non-decreasing near x={a}"));
                break;
            }
        }
        items.push(AssumptionItem {
            code: "payoff_shape",
            label: "(iii) payoff is positive, continuous and non-decreasing",
            pass: payoff_detail.is_none(),
            detail: payoff_detail,
        });

        // (iv) drift slope below the discount rate
        let drift_offender = xs
            .iter()
            .find(|&&x| self.model.drift_deriv(x) >= self.problem.r);
        items.push(AssumptionItem {
            code: "drift_slope",
            label: "(iv) mu'(x) < r",
            pass: drift_offender.is_none(),
            detail: drift_offender.map(|x| {
                format!(
                    "mu'({x}) = {} >= r = {}",
                    self.model.drift_deriv(*x),
                    self.problem.r
                )
            }),
        });

        // (v) theta_n' changes sign exactly once, from + to -
        let mut peak_detail = None;
        for side in [Side::Down, Side::Up] {
            let signs: Vec<bool> = xs
                .iter()
                .map(|&x| self.theta_deriv(side, x) > 0.0)
                .collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            let starts_positive = *signs.first().unwrap_or(&false);
            if changes != 1 || !starts_positive {
                peak_detail = Some(format!(
                    "theta_{} derivative has {changes} sign changes on the grid",
                    if side == Side::Down { "d" } else { "u" }
                ));
                break;
            }
        }
        items.push(AssumptionItem {
            code: "theta_peak",
            label: "(v) theta_n has a unique interior peak",
            pass: peak_detail.is_none(),
            detail: peak_detail,
        });

        // (vi) theta_n positive near the lower end, diverging to -inf at
        // the upper end
        let mut limit_detail = None;
        for side in [Side::Down, Side::Up] {
            let first = self.theta(side, xs[0]);
            let last = self.theta(side, xs[xs.len() - 1]);
            let prev = self.theta(side, xs[xs.len() - 2]);
            if !(first > 0.0 && last < 0.0 && last < prev) {
                limit_detail = Some(format!(
                    "theta_{} limits: value {first} at {} and {last} at {}",
                    if side == Side::Down { "d" } else { "u" },
                    xs[0],
                    xs[xs.len() - 1]
                ));
                break;
            }
        }
        items.push(AssumptionItem {
            code: "theta_limits",
            label: "(vi) theta_n > 0 near 0 and theta_n -> -inf",
            pass: limit_detail.is_none(),
            detail: limit_detail,
        });

        // sufficient existence condition x_tilde < x_hat
        let (pass, detail) = match self.critical_points() {
            Ok(cp) if cp.x_tilde < cp.x_hat => (true, None),
            Ok(cp) => (
                false,
                Some(format!(
                    "x_tilde={} >= x_hat={} (sufficient condition only; a solution may still exist)",
                    cp.x_tilde, cp.x_hat
                )),
            ),
            Err(e) => (false, Some(format!("critical points unavailable: {e}"))),
        };
        items.push(AssumptionItem {
            code: "existence_condition",
            label: "x_tilde < x_hat (sufficient for existence)",
            pass,
            detail,
        });

        AssumptionReport {
            pass: items.iter().all(|i| i.pass),
            items,
        }
    }
}
