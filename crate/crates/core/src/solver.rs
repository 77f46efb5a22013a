//! Threshold solver: the monotone fixed-point route to `(a*, b*)`.
//!
//! The optimal pair solves `H(ψ; a) = Q(ψ; b)` and `H(φ; a) = Q(φ; b)`.
//! Eliminating `b` through the first equation turns `a*` into the fixed
//! point of the increasing composition
//!
//! ```text
//! K(x) = H(φ)⁻¹( Q(φ)( Q(ψ)⁻¹( H(ψ)(x) ) ) )
//! ```
//!
//! with `H` restricted to `(0, x̃]` and `Q` to `[x̂, ∞)`. When `x̃ < x̂`
//! the composition is defined on all of `(0, x̃]` and a fixed point is
//! guaranteed; otherwise the map may only be defined on a sub-domain, and
//! a solution may or may not exist (it does for some textbook parameter
//! sets). The solver therefore scans for a sign change of `K(x) − x` over
//! the points where the inner inversions bracket, and reports nonexistence
//! with a trace when no crossing is found.
//!
//! The module also solves the λ→∞ (continuous-intervention) limit pair
//! `L^r_{θ_u}(a) = L^r_{θ_d}(b)`, `K^r_{θ_u}(a) = K^r_{θ_d}(b)` by the
//! analogous composition, and sweeps the signal intensity to expose the
//! convergence of `(a*, b*)` towards that limit.

use std::cell::Cell;

use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::Diffusion;
use crate::error::{Error, Result};
use crate::functionals::{AssumptionGrid, Basis, CriticalPoints, Functionals, ProblemSpec, Side};
use crate::quad::QuadConfig;
use crate::root::bisect;

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Relative interval width at which bisections stop.
    pub bisect_rel_tol: f64,
    /// Acceptance threshold for the normalised pair residuals.
    pub residual_tol: f64,
    /// Points in the log-spaced scan for the fixed-point sign change.
    pub scan_points: usize,
    /// Lower end of the fixed-point search, as a fraction of `x̃`.
    pub eps_frac: f64,
    /// Doublings of the upper bracket for `Q(ψ)⁻¹`, starting from `4x̂`.
    pub max_upper_doublings: u32,
    /// Quadrature tolerances handed to the functional layer.
    pub quad: QuadConfig,
    /// Stopping width for the critical-point roots.
    pub root_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bisect_rel_tol: 1e-12,
            residual_tol: 1e-8,
            scan_points: 200,
            eps_frac: 1e-6,
            max_upper_doublings: 20,
            quad: QuadConfig::default(),
            root_tol: 1e-10,
        }
    }
}

/// A solved threshold pair with solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    pub a_star: f64,
    pub b_star: f64,
    /// Normalised residual of `H(ψ; a) − Q(ψ; b)`.
    pub residual_psi: f64,
    /// Normalised residual of `H(φ; a) − Q(φ; b)`.
    pub residual_phi: f64,
    /// Map evaluations spent locating the fixed point.
    pub iterations: usize,
    /// Sampled slope of the fixed-point map through `a*`; below one when
    /// the crossing is from above.
    pub k_prime_at_fixed_point: f64,
}

/// Thresholds of the continuous-intervention (λ→∞) limit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SingularThresholds {
    pub a_s: f64,
    pub b_s: f64,
    pub residual_l: f64,
    pub residual_k: f64,
}

/// One entry of a λ sweep; `a_gap`/`b_gap` measure the distance to the
/// singular thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct ThresholdSolver<'m> {
    fx: Functionals<'m>,
    cfg: SolverConfig,
    cp: CriticalPoints,
}

fn normalised(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs())
}

impl<'m> ThresholdSolver<'m> {
    pub fn new(model: &'m dyn Diffusion, problem: ProblemSpec) -> Result<Self> {
        Self::with_config(model, problem, SolverConfig::default())
    }

    pub fn with_config(
        model: &'m dyn Diffusion,
        problem: ProblemSpec,
        cfg: SolverConfig,
    ) -> Result<Self> {
        let fx = Functionals::with_config(model, problem, cfg.quad, cfg.root_tol);
        let cp = fx.critical_points()?;
        Ok(Self { fx, cfg, cp })
    }

    pub fn functionals(&self) -> &Functionals<'m> {
        &self.fx
    }

    pub fn critical_points(&self) -> &CriticalPoints {
        &self.cp
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Normalised residuals of the two optimality equations at `(a, b)`.
    pub fn pair_residual(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let res_psi = normalised(self.fx.h(Basis::Psi, a)?, self.fx.q(Basis::Psi, b)?);
        let res_phi = normalised(self.fx.h(Basis::Phi, a)?, self.fx.q(Basis::Phi, b)?);
        Ok((res_psi, res_phi))
    }

    /// Same residuals evaluated through the quotient representation of
    /// `H` and `Q`; cross-check route.
    pub fn pair_residual_quotient(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let res_psi = normalised(
            self.fx.h_quotient(Basis::Psi, a)?,
            self.fx.q_quotient(Basis::Psi, b)?,
        );
        let res_phi = normalised(
            self.fx.h_quotient(Basis::Phi, a)?,
            self.fx.q_quotient(Basis::Phi, b)?,
        );
        Ok((res_psi, res_phi))
    }

    /// Preimage of `value` under `Q(ψ; ·)` restricted to `[x̂, ∞)`, where
    /// it decreases from `Q(ψ; x̂)` towards `−∞`.
    fn invert_q_psi(&self, value: f64) -> Result<f64> {
        let x_hat = self.cp.x_hat;
        let at_hat = self.fx.q(Basis::Psi, x_hat)?;
        if value > at_hat {
            return Err(Error::InversionFailure {
                map: "Q(psi) on [x_hat, inf)",
                value,
            });
        }
        if value == at_hat {
            return Ok(x_hat);
        }
        let mut hi = 4.0 * x_hat;
        let mut doublings = 0;
        while self.fx.q(Basis::Psi, hi)? > value {
            hi *= 2.0;
            doublings += 1;
            if doublings > self.cfg.max_upper_doublings {
                return Err(Error::InversionFailure {
                    map: "Q(psi) on [x_hat, inf)",
                    value,
                });
            }
        }
        bisect(
            &|y| Ok(self.fx.q(Basis::Psi, y)? - value),
            x_hat,
            hi,
            self.cfg.bisect_rel_tol,
        )
    }

    /// Preimage of `value` under `H(φ; ·)` restricted to `(0, x̃]`, where
    /// it decreases from `+∞` at the origin to `H(φ; x̃) < 0`.
    fn invert_h_phi(&self, value: f64) -> Result<f64> {
        let x_tilde = self.cp.x_tilde;
        let at_tilde = self.fx.h(Basis::Phi, x_tilde)?;
        if value < at_tilde {
            return Err(Error::InversionFailure {
                map: "H(phi) on (0, x_tilde]",
                value,
            });
        }
        if value == at_tilde {
            return Ok(x_tilde);
        }
        let mut lo = 0.5 * x_tilde;
        let mut halvings = 0;
        while self.fx.h(Basis::Phi, lo)? < value {
            lo *= 0.5;
            halvings += 1;
            if halvings > 300 {
                return Err(Error::InversionFailure {
                    map: "H(phi) on (0, x_tilde]",
                    value,
                });
            }
        }
        bisect(
            &|y| Ok(self.fx.h(Basis::Phi, y)? - value),
            lo,
            x_tilde,
            self.cfg.bisect_rel_tol,
        )
    }

    /// One application of the composed map; errors signal that `x` lies
    /// outside the sub-domain on which the inner inverses bracket.
    pub fn fixed_point_map(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= self.cp.x_tilde * (1.0 + 1e-12)) {
            return Err(Error::OutOfDomain {
                x,
                lo: 0.0,
                hi: self.cp.x_tilde,
            });
        }
        let upstream = self.fx.h(Basis::Psi, x)?;
        let b = self.invert_q_psi(upstream)?;
        let downstream = self.fx.q(Basis::Phi, b)?;
        self.invert_h_phi(downstream)
    }

    /// Locate the unique fixed point of the composed map and recover the
    /// paired upper threshold.
    pub fn solve(&self) -> Result<Thresholds> {
        let x_tilde = self.cp.x_tilde;
        let eps = self.cfg.eps_frac * x_tilde;
        let n = self.cfg.scan_points.max(8);
        let evals = Cell::new(0usize);
        let displaced = |x: f64| -> Result<f64> {
            evals.set(evals.get() + 1);
            Ok(self.fixed_point_map(x)? - x)
        };

        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        let mut trace = String::new();
        for i in 0..n {
            let x = eps * (x_tilde / eps).powf(i as f64 / (n - 1) as f64);
            match displaced(x) {
                Ok(d) => {
                    if trace.len() < 512 {
                        trace.push_str(&format!("({x:.4e},{d:+.3e}) "));
                    }
                    if let Some((px, pd)) = prev {
                        if pd > 0.0 && d <= 0.0 {
                            bracket = Some((px, x));
                            break;
                        }
                    }
                    prev = Some((x, d));
                }
                Err(_) => {
                    // hole in the domain: do not bracket across it
                    prev = None;
                }
            }
        }

        let (lo, hi) = bracket.ok_or(Error::NoSignChange {
            lo: eps,
            hi: x_tilde,
            trace,
        })?;
        let a_star = bisect(&displaced, lo, hi, self.cfg.bisect_rel_tol)?;
        let b_star = self.invert_q_psi(self.fx.h(Basis::Psi, a_star)?)?;
        let (residual_psi, residual_phi) = self.pair_residual(a_star, b_star)?;

        let h = 1e-6 * a_star;
        let k_prime_at_fixed_point = match (
            self.fixed_point_map(a_star - h),
            self.fixed_point_map(a_star + h),
        ) {
            (Ok(km), Ok(kp)) => (kp - km) / (2.0 * h),
            (Ok(km), Err(_)) => (self.fixed_point_map(a_star)? - km) / h,
            (Err(_), Ok(kp)) => (kp - self.fixed_point_map(a_star)?) / h,
            _ => f64::NAN,
        };

        let out = Thresholds {
            a_star,
            b_star,
            residual_psi,
            residual_phi,
            iterations: evals.get(),
            k_prime_at_fixed_point,
        };
        self.validate(&out)?;
        Ok(out)
    }

    fn validate(&self, t: &Thresholds) -> Result<()> {
        let tol = self.cfg.residual_tol;
        if !(t.residual_psi.abs() <= tol && t.residual_phi.abs() <= tol) {
            return Err(Error::ThresholdValidation(format!(
                "pair residuals ({:.3e}, {:.3e}) exceed {tol:.1e}",
                t.residual_psi, t.residual_phi
            )));
        }
        if !(t.a_star > 0.0 && t.a_star <= self.cp.x_tilde * (1.0 + 1e-9)) {
            return Err(Error::ThresholdValidation(format!(
                "a* = {} outside (0, x_tilde = {}]",
                t.a_star, self.cp.x_tilde
            )));
        }
        if !(t.b_star >= self.cp.x_hat * (1.0 - 1e-9)) {
            return Err(Error::ThresholdValidation(format!(
                "b* = {} below x_hat = {}",
                t.b_star, self.cp.x_hat
            )));
        }
        if !(t.k_prime_at_fixed_point < 1.0) {
            return Err(Error::ThresholdValidation(format!(
                "fixed-point slope {} is not below one",
                t.k_prime_at_fixed_point
            )));
        }
        Ok(())
    }

    /// Brute-force companion: the grid point of `a_range × b_range`
    /// minimising the sum of squared pair residuals. Test oracle only.
    pub fn grid_oracle(
        &self,
        a_range: (f64, f64),
        b_range: (f64, f64),
        n_per_axis: usize,
    ) -> Result<(f64, f64)> {
        if n_per_axis < 2 {
            return Err(Error::InvalidConfig(
                "grid oracle needs at least two points per axis".into(),
            ));
        }
        let lin = |range: (f64, f64), i: usize| {
            range.0 + (range.1 - range.0) * i as f64 / (n_per_axis - 1) as f64
        };
        let mut h_psi = Vec::with_capacity(n_per_axis);
        let mut h_phi = Vec::with_capacity(n_per_axis);
        let mut q_psi = Vec::with_capacity(n_per_axis);
        let mut q_phi = Vec::with_capacity(n_per_axis);
        for i in 0..n_per_axis {
            let a = lin(a_range, i);
            let b = lin(b_range, i);
            h_psi.push(self.fx.h(Basis::Psi, a)?);
            h_phi.push(self.fx.h(Basis::Phi, a)?);
            q_psi.push(self.fx.q(Basis::Psi, b)?);
            q_phi.push(self.fx.q(Basis::Phi, b)?);
        }
        let mut best = (0usize, 0usize, f64::INFINITY);
        for i in 0..n_per_axis {
            for j in 0..n_per_axis {
                let r1 = normalised(h_psi[i], q_psi[j]);
                let r2 = normalised(h_phi[i], q_phi[j]);
                let objective = r1 * r1 + r2 * r2;
                if objective < best.2 {
                    best = (i, j, objective);
                }
            }
        }
        Ok((lin(a_range, best.0), lin(b_range, best.1)))
    }

    /// Thresholds of the continuous-intervention limit, solved through the
    /// analogous composition of the rate-`r` functionals restricted to
    /// `(0, x*_u]` and `[x*_d, ∞)`.
    pub fn singular_thresholds(&self) -> Result<SingularThresholds> {
        let r = self.fx.problem().r;
        let x_star_u = self.cp.x_star_u;
        let x_star_d = self.cp.x_star_d;

        let invert_k_down = |value: f64| -> Result<f64> {
            // K^r_{theta_d} increases on [x*_d, ∞)
            let at_peak = self.fx.k_theta(Side::Down, r, x_star_d)?;
            if value < at_peak {
                return Err(Error::InversionFailure {
                    map: "K^r(theta_d) on [x*_d, inf)",
                    value,
                });
            }
            if value == at_peak {
                return Ok(x_star_d);
            }
            let mut hi = 2.0 * x_star_d;
            let mut doublings = 0;
            while self.fx.k_theta(Side::Down, r, hi)? < value {
                hi *= 2.0;
                doublings += 1;
                if doublings > self.cfg.max_upper_doublings + 20 {
                    return Err(Error::InversionFailure {
                        map: "K^r(theta_d) on [x*_d, inf)",
                        value,
                    });
                }
            }
            bisect(
                &|y| Ok(self.fx.k_theta(Side::Down, r, y)? - value),
                x_star_d,
                hi,
                self.cfg.bisect_rel_tol,
            )
        };
        let invert_l_up = |value: f64| -> Result<f64> {
            // L^r_{theta_u} decreases on (0, x*_u] from +inf
            let at_peak = self.fx.l_theta(Side::Up, r, x_star_u)?;
            if value < at_peak {
                return Err(Error::InversionFailure {
                    map: "L^r(theta_u) on (0, x*_u]",
                    value,
                });
            }
            if value == at_peak {
                return Ok(x_star_u);
            }
            let mut lo = 0.5 * x_star_u;
            let mut halvings = 0;
            while self.fx.l_theta(Side::Up, r, lo)? < value {
                lo *= 0.5;
                halvings += 1;
                if halvings > 300 {
                    return Err(Error::InversionFailure {
                        map: "L^r(theta_u) on (0, x*_u]",
                        value,
                    });
                }
            }
            bisect(
                &|y| Ok(self.fx.l_theta(Side::Up, r, y)? - value),
                lo,
                x_star_u,
                self.cfg.bisect_rel_tol,
            )
        };
        let map = |x: f64| -> Result<f64> {
            let b = invert_k_down(self.fx.k_theta(Side::Up, r, x)?)?;
            invert_l_up(self.fx.l_theta(Side::Down, r, b)?)
        };

        let eps = self.cfg.eps_frac * x_star_u;
        let n = self.cfg.scan_points.max(8);
        let mut prev: Option<(f64, f64)> = None;
        let mut bracket = None;
        let mut trace = String::new();
        for i in 0..n {
            let x = eps * (x_star_u / eps).powf(i as f64 / (n - 1) as f64);
            match map(x) {
                Ok(kx) => {
                    let d = kx - x;
                    if trace.len() < 512 {
                        trace.push_str(&format!("({x:.4e},{d:+.3e}) "));
                    }
                    if let Some((px, pd)) = prev {
                        if pd > 0.0 && d <= 0.0 {
                            bracket = Some((px, x));
                            break;
                        }
                    }
                    prev = Some((x, d));
                }
                Err(_) => prev = None,
            }
        }
        let (lo, hi) = bracket.ok_or(Error::NoSignChange {
            lo: eps,
            hi: x_star_u,
            trace,
        })?;
        let a_s = bisect(&|x| Ok(map(x)? - x), lo, hi, self.cfg.bisect_rel_tol)?;
        let b_s = invert_k_down(self.fx.k_theta(Side::Up, r, a_s)?)?;

        let residual_l = normalised(
            self.fx.l_theta(Side::Up, r, a_s)?,
            self.fx.l_theta(Side::Down, r, b_s)?,
        );
        let residual_k = normalised(
            self.fx.k_theta(Side::Up, r, a_s)?,
            self.fx.k_theta(Side::Down, r, b_s)?,
        );
        let tol = self.cfg.residual_tol;
        if !(residual_l.abs() <= tol && residual_k.abs() <= tol && a_s < b_s) {
            return Err(Error::ThresholdValidation(format!(
                "singular pair ({a_s}, {b_s}) residuals ({residual_l:.3e}, {residual_k:.3e})"
            )));
        }
        Ok(SingularThresholds {
            a_s,
            b_s,
            residual_l,
            residual_k,
        })
    }

    /// Solve across signal intensities; per-entry failures are recorded and
    /// the sweep continues. Entries solve independently in parallel.
    pub fn lambda_sweep(&self, lambdas: &[f64]) -> Result<Vec<SweepPoint>> {
        let singular = self.singular_thresholds()?;
        let model = self.fx.model();
        let problem = self.fx.problem().clone();
        let cfg = self.cfg;
        let mut points: Vec<(usize, SweepPoint)> = lambdas
            .par_iter()
            .enumerate()
            .map(|(idx, &lambda)| {
                let solved = problem
                    .with_lambda(lambda)
                    .and_then(|p| ThresholdSolver::with_config(model, p, cfg))
                    .and_then(|solver| solver.solve());
                let point = match solved {
                    Ok(t) => SweepPoint {
                        lambda,
                        a_star: Some(t.a_star),
                        b_star: Some(t.b_star),
                        a_gap: Some((t.a_star - singular.a_s).abs()),
                        b_gap: Some((t.b_star - singular.b_s).abs()),
                        error: None,
                    },
                    Err(e) => SweepPoint {
                        lambda,
                        a_star: None,
                        b_star: None,
                        a_gap: None,
                        b_gap: None,
                        error: Some(e.to_string()),
                    },
                };
                (idx, point)
            })
            .collect();
        points.sort_by_key(|(idx, _)| *idx);
        Ok(points.into_iter().map(|(_, p)| p).collect())
    }

    /// Convenience wrapper: the standing assumptions for this instance.
    pub fn check_assumptions(&self, grid: &AssumptionGrid) -> crate::functionals::AssumptionReport {
        self.fx.check_assumptions(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Gbm;
    use crate::power::PowerSum;

    fn problem(lambda: f64) -> ProblemSpec {
        ProblemSpec::new(0.15, lambda, 4.0, 5.0, PowerSum::power(1.0, 0.3)).unwrap()
    }

    fn p0_solver(model: &Gbm) -> ThresholdSolver<'_> {
        ThresholdSolver::new(model, problem(2.0)).unwrap()
    }

    #[test]
    fn reference_instance_thresholds() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let t = solver.solve().unwrap();
        assert!(
            (t.a_star - 0.309176840633).abs() < 1e-9,
            "a* = {}",
            t.a_star
        );
        assert!(
            (t.b_star - 0.744637995897).abs() < 1e-9,
            "b* = {}",
            t.b_star
        );
        assert!(t.residual_psi.abs() <= 1e-8 && t.residual_phi.abs() <= 1e-8);
        assert!(t.k_prime_at_fixed_point < 1.0);
        assert!(t.k_prime_at_fixed_point.abs() < 0.05);
    }

    #[test]
    fn map_rejects_points_outside_its_domain() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let x_tilde = solver.critical_points().x_tilde;
        assert!(solver.fixed_point_map(2.0 * x_tilde).is_err());
        assert!(solver.fixed_point_map(0.0).is_err());
        assert!(solver.fixed_point_map(-1.0).is_err());
    }

    #[test]
    fn fixed_point_is_consistent() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let t = solver.solve().unwrap();
        let mapped = solver.fixed_point_map(t.a_star).unwrap();
        assert!((mapped - t.a_star).abs() <= 1e-9);
    }

    #[test]
    fn map_is_increasing_on_samples() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let xs = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
        let mut prev = None;
        for &x in &xs {
            if x > solver.critical_points().x_tilde {
                break;
            }
            let kx = solver.fixed_point_map(x).unwrap();
            if let Some(p) = prev {
                assert!(kx > p, "map not increasing at {x}");
            }
            prev = Some(kx);
        }
    }

    #[test]
    fn unique_sign_change_of_displacement() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let x_tilde = solver.critical_points().x_tilde;
        let mut signs = Vec::new();
        for i in 0..60 {
            let x = 1e-4 * (x_tilde / 1e-4_f64).powf(i as f64 / 59.0);
            if let Ok(kx) = solver.fixed_point_map(x) {
                signs.push(kx - x > 0.0);
            }
        }
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn residual_signs_at_critical_pair() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let cp = *solver.critical_points();
        // the sufficient inequality makes the psi-residual non-positive at
        // (x_tilde, x_hat)
        let (res_psi, _) = solver.pair_residual(cp.x_tilde, cp.x_hat).unwrap();
        assert!(res_psi <= 0.0);
        // no spurious root on the diagonal midway between the anchors
        let mid = 0.5 * (cp.x_tilde + cp.x_hat);
        let (r1, r2) = solver.pair_residual(mid, mid).unwrap();
        assert!(r1.abs().max(r2.abs()) > 1e-6);
    }

    #[test]
    fn grid_oracle_brackets_solution() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let t = solver.solve().unwrap();
        let cp = *solver.critical_points();
        let n = 100;
        let a_range = (0.05, cp.x_tilde);
        let b_range = (cp.x_hat, 3.0);
        let (ga, gb) = solver.grid_oracle(a_range, b_range, n).unwrap();
        let cell_a = (a_range.1 - a_range.0) / (n - 1) as f64;
        let cell_b = (b_range.1 - b_range.0) / (n - 1) as f64;
        assert!((ga - t.a_star).abs() <= 1.5 * cell_a);
        assert!((gb - t.b_star).abs() <= 1.5 * cell_b);
        // a coarse grid still lands adjacent to the refined answer
        let (ca, cb) = solver.grid_oracle(a_range, b_range, 20).unwrap();
        assert!((ca - t.a_star).abs() <= 1.5 * (a_range.1 - a_range.0) / 19.0);
        assert!((cb - t.b_star).abs() <= 1.5 * (b_range.1 - b_range.0) / 19.0);
    }

    #[test]
    fn singular_limit_values() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let s = solver.singular_thresholds().unwrap();
        assert!((s.a_s - 0.284527579127).abs() < 1e-9, "a_s = {}", s.a_s);
        assert!((s.b_s - 0.83219659501).abs() < 1e-9, "b_s = {}", s.b_s);
        assert!(s.residual_l.abs() <= 1e-8 && s.residual_k.abs() <= 1e-8);
        // the finite-intensity solution sits inside the singular band here
        let t = solver.solve().unwrap();
        assert!(s.a_s < t.a_star && t.b_star < s.b_s);
    }

    #[test]
    fn sweep_gaps_shrink_towards_singular() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let points = solver.lambda_sweep(&[2.0, 20.0, 200.0, 2000.0]).unwrap();
        assert_eq!(points.len(), 4);
        for w in points.windows(2) {
            assert!(w[1].a_gap.unwrap() < w[0].a_gap.unwrap());
            assert!(w[1].b_gap.unwrap() < w[0].b_gap.unwrap());
        }
        let last = points.last().unwrap();
        assert!(last.a_gap.unwrap() <= 0.01 && last.b_gap.unwrap() <= 0.01);
    }

    #[test]
    fn vanishing_intensity_still_solves() {
        // the sufficient ordering fails here (x_tilde > x_hat) yet the pair
        // has a root; the domain-scanned composition finds it
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = ThresholdSolver::new(&m, problem(1e-4)).unwrap();
        let cp = *solver.critical_points();
        assert!(cp.x_tilde > cp.x_hat);
        let t = solver.solve().unwrap();
        assert!(
            (t.a_star - 0.300582466959).abs() < 1e-8,
            "a* = {}",
            t.a_star
        );
        assert!(
            (t.b_star - 0.413529950745).abs() < 1e-8,
            "b* = {}",
            t.b_star
        );
    }

    #[test]
    fn solved_pair_satisfies_explicit_exponent_system() {
        // the optimality system written out through the exponent pairs
        // (beta, alpha) at both rates; positive rescaling of the
        // residual functions, so the solved pair must zero it too
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let t = solver.solve().unwrap();
        let (r, lam, gd, gu, delta) = (0.15, 2.0, 4.0, 5.0, 0.3);
        let (b0, a0) = m.exponents(r).unwrap();
        let (bl, al) = m.exponents(r + lam).unwrap();
        let coef = |e_lam: f64, e0: f64, p: f64, anchor: f64| {
            e_lam / (anchor * (p - e_lam)) - 1.0 / (p - e0)
        };
        let gcoef = |e_lam: f64, e0: f64, g: f64, anchor: f64| {
            g * (m.mu() - r) * e_lam / (anchor * (1.0 - e_lam)) - g * (m.mu() - r) / (1.0 - e0)
        };
        for (anchor, e0) in [(a0, a0), (b0, b0)] {
            let side = |x: f64, e_lam: f64, g: f64| {
                coef(e_lam, e0, delta, anchor) * x.powf(delta - e0)
                    + gcoef(e_lam, e0, g, anchor) * x.powf(1.0 - e0)
            };
            let lhs = side(t.a_star, al, gu);
            let rhs = side(t.b_star, bl, gd);
            let residual = (lhs - rhs).abs() / (1.0 + lhs.abs() + rhs.abs());
            assert!(residual <= 1e-8, "explicit system residual {residual:.3e}");
        }
    }

    #[test]
    fn representation_consistency_at_solution() {
        let m = Gbm::new(0.05, 0.2).unwrap();
        let solver = p0_solver(&m);
        let t = solver.solve().unwrap();
        let (r1, r2) = solver.pair_residual(t.a_star, t.b_star).unwrap();
        let (q1, q2) = solver.pair_residual_quotient(t.a_star, t.b_star).unwrap();
        assert!((r1 - q1).abs() <= 1e-9 + 1e-6 * r1.abs());
        assert!((r2 - q2).abs() <= 1e-9 + 1e-6 * r2.abs());
    }
}
