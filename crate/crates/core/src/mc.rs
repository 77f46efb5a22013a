//! Monte Carlo oracle for band policies.
//!
//! Simulates the controlled state under a two-threshold policy: at every
//! arrival of an independent Poisson clock, the state is pushed to the
//! nearest edge of `[a, b]` if it sits outside, earning `γ_d` per unit of
//! downward displacement and paying `γ_u` per unit upward. The discounted
//! running payoff accumulates by trapezoid on a substep grid; between grid
//! points the state advances by the backend's exact transition, and arrival
//! instants are spliced into the grid, so the only discretisation bias sits
//! in the payoff integral.
//!
//! Determinism contract: path `i` draws from its own stream seeded with
//! `seed ^ i`, and aggregation is pairwise over the path index, so results
//! are bit-identical for any degree of parallelism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::Diffusion;
use crate::error::{Error, Result};
use crate::functionals::ProblemSpec;
use crate::value::ValueFunction;

/// Two-threshold band policy: at a signal arrival, move a state above `b`
/// down to `b`, a state below `a` up to `a`, else do nothing.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolicySpec {
    pub a: f64,
    pub b: f64,
}

impl PolicySpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0 < a && a < b) || !b.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "policy requires 0 < a < b, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }
}

/// Simulation controls. The horizon must discount to below `tail_tol`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub tail_tol: f64,
}

impl SimConfig {
    /// Defaults for a given problem: `tail_tol = 1e-4`, horizon chosen so
    /// `e^{-r·horizon} = tail_tol`.
    pub fn for_problem(problem: &ProblemSpec, x0: f64) -> Self {
        let tail_tol: f64 = 1e-4;
        Self {
            x0,
            horizon: (1.0 / tail_tol).ln() / problem.r,
            dt: 1e-2,
            n_paths: 4000,
            seed: 0x5eed_cafe,
            tail_tol,
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    fn validate(&self, r: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "x0 must be positive, got {}",
                self.x0
            )));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tail_tol must lie in (0, 1), got {}",
                self.tail_tol
            )));
        }
        let tail = (-r * self.horizon).exp();
        if tail > self.tail_tol * (1.0 + 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "horizon {} leaves discount tail {tail:.3e} above tail_tol {:.3e}",
                self.horizon, self.tail_tol
            )));
        }
        Ok(())
    }
}

/// Decomposition of the estimate into its payoff and control flows.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Components {
    pub running_payoff: f64,
    pub down_income: f64,
    pub up_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub estimate: f64,
    pub stderr: f64,
    pub components: Components,
    pub n_paths: usize,
    /// Crude bound on the mass discarded by the horizon truncation.
    pub truncation_bound: f64,
}

struct PathAccum {
    running: f64,
    down: f64,
    up: f64,
}

enum StepKind {
    Arrival,
    Substep,
    End,
}

fn run_path(
    model: &dyn Diffusion,
    problem: &ProblemSpec,
    policy: &PolicySpec,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<PathAccum> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ path_index);
    let interarrival = Exp::new(problem.lambda)
        .map_err(|e| Error::InvalidConfig(format!("exponential clock: {e}")))?;
    let r = problem.r;
    let payoff = &problem.payoff;

    let mut t = 0.0_f64;
    let mut x = cfg.x0;
    let mut acc = PathAccum {
        running: 0.0,
        down: 0.0,
        up: 0.0,
    };
    let mut next_arrival = rng.sample(interarrival);
    let mut sub_index: u64 = 1;
    let mut integrand_prev = payoff.eval(x); // e^{-r t} π(x) at t = 0

    loop {
        let next_sub = sub_index as f64 * cfg.dt;
        let (t_next, kind) = if next_arrival < next_sub.min(cfg.horizon) {
            (next_arrival, StepKind::Arrival)
        } else if next_sub < cfg.horizon {
            (next_sub, StepKind::Substep)
        } else {
            (cfg.horizon, StepKind::End)
        };

        let h = t_next - t;
        if h > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            x = model.exact_step(x, h, z).ok_or_else(|| {
                Error::InvalidConfig("backend declares no exact sampling scheme".into())
            })?;
            if !x.is_finite() {
                return Err(Error::NonFinitePath {
                    path: path_index,
                    t: t_next,
                });
            }
        }
        let disc = (-r * t_next).exp();
        let integrand = disc * payoff.eval(x);
        acc.running += 0.5 * (integrand_prev + integrand) * h;
        integrand_prev = integrand;
        t = t_next;

        match kind {
            StepKind::Arrival => {
                if x > policy.b {
                    acc.down += disc * problem.gamma_d * (x - policy.b);
                    x = policy.b;
                } else if x < policy.a {
                    acc.up += disc * problem.gamma_u * (policy.a - x);
                    x = policy.a;
                }
                integrand_prev = disc * payoff.eval(x);
                next_arrival = t + rng.sample(interarrival);
            }
            StepKind::Substep => sub_index += 1,
            StepKind::End => break,
        }
    }
    Ok(acc)
}

fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Estimate the objective under `policy` starting from `cfg.x0`.
pub fn simulate(
    model: &dyn Diffusion,
    problem: &ProblemSpec,
    policy: &PolicySpec,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate(problem.r)?;
    if model.exact_step(1.0, 1.0, 0.0).is_none() {
        return Err(Error::InvalidConfig(
            "backend declares no exact sampling scheme".into(),
        ));
    }

    let accs: Vec<PathAccum> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(model, problem, policy, cfg, i))
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.n_paths as f64;
    let estimates: Vec<f64> = accs.iter().map(|a| a.running + a.down - a.up).collect();
    let mean = pairwise_sum(&estimates) / n;
    let sq: Vec<f64> = estimates.iter().map(|e| (e - mean) * (e - mean)).collect();
    let stderr = if cfg.n_paths > 1 {
        (pairwise_sum(&sq) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let running: Vec<f64> = accs.iter().map(|a| a.running).collect();
    let down: Vec<f64> = accs.iter().map(|a| a.down).collect();
    let up: Vec<f64> = accs.iter().map(|a| a.up).collect();

    let x_ref = cfg.x0.max(policy.b);
    let truncation_bound =
        cfg.tail_tol * (problem.payoff.eval(x_ref) / problem.r + problem.gamma_u * x_ref);

    Ok(SimResult {
        estimate: mean,
        stderr,
        components: Components {
            running_payoff: pairwise_sum(&running) / n,
            down_income: pairwise_sum(&down) / n,
            up_cost: pairwise_sum(&up) / n,
        },
        n_paths: cfg.n_paths,
        truncation_bound,
    })
}

/// Comparison of a simulated policy against the analytic value at one
/// starting point.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationEntry {
    pub x0: f64,
    pub analytic: f64,
    pub optimal: SimResult,
    pub optimal_within_three_stderr: bool,
    pub perturbed: Vec<(PolicySpec, SimResult)>,
    /// Every perturbed estimate stayed below `analytic + 3·stderr`.
    pub perturbed_dominated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub pass: bool,
}

/// Validate the analytic value function by simulation: the solved policy
/// must reproduce `V` within noise, and ±10% threshold perturbations must
/// not beat it.
pub fn validate(
    vf: &ValueFunction<'_>,
    points: &[f64],
    cfg: &SimConfig,
) -> Result<ValidationReport> {
    let model = vf.model();
    let problem = vf.problem();
    let optimal_policy = PolicySpec::new(vf.a_star, vf.b_star)?;
    let perturbations = [
        PolicySpec::new(vf.a_star * 1.1, vf.b_star * 0.9)?,
        PolicySpec::new(vf.a_star * 0.9, vf.b_star * 1.1)?,
    ];

    let mut entries = Vec::with_capacity(points.len());
    for &x0 in points {
        let local = cfg.with_x0(x0);
        let analytic = vf.eval(x0, 0)?;
        let optimal = simulate(model, problem, &optimal_policy, &local)?;
        let optimal_within_three_stderr =
            (optimal.estimate - analytic).abs() <= 3.0 * optimal.stderr;
        let mut perturbed = Vec::with_capacity(perturbations.len());
        let mut perturbed_dominated = true;
        for p in perturbations {
            let sim = simulate(model, problem, &p, &local)?;
            perturbed_dominated &= sim.estimate <= analytic + 3.0 * sim.stderr;
            perturbed.push((p, sim));
        }
        entries.push(ValidationEntry {
            x0,
            analytic,
            optimal,
            optimal_within_three_stderr,
            perturbed,
            perturbed_dominated,
        });
    }
    Ok(ValidationReport {
        pass: entries
            .iter()
            .all(|e| e.optimal_within_three_stderr && e.perturbed_dominated),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Gbm;
    use crate::power::PowerSum;
    use crate::solver::ThresholdSolver;
    use crate::value::ValueFunction;

    fn p0() -> (Gbm, ProblemSpec) {
        (
            Gbm::new(0.05, 0.2).unwrap(),
            ProblemSpec::new(0.15, 2.0, 4.0, 5.0, PowerSum::power(1.0, 0.3)).unwrap(),
        )
    }

    fn small_cfg(x0: f64, n: usize) -> SimConfig {
        let (_, p) = p0();
        let mut cfg = SimConfig::for_problem(&p, x0);
        cfg.n_paths = n;
        cfg
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let (m, p) = p0();
        let policy = PolicySpec::new(0.31, 0.74).unwrap();
        let cfg = small_cfg(1.0, 256);
        let mut outputs = Vec::new();
        for threads in [1usize, 2, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let result = pool.install(|| simulate(&m, &p, &policy, &cfg).unwrap());
            outputs.push(serde_json::to_string(&result).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[1], outputs[2]);
    }

    #[test]
    fn near_zero_intensity_recovers_uncontrolled_value() {
        let (m, p) = p0();
        let quiet = p.with_lambda(1e-6).unwrap();
        let policy = PolicySpec::new(0.31, 0.74).unwrap();
        let cfg = small_cfg(1.0, 1500);
        let result = simulate(&m, &quiet, &policy, &cfg).unwrap();
        let expected = 7.18390804597701; // discounted payoff stream with no control
        assert!(
            (result.estimate - expected).abs() <= 3.0 * result.stderr,
            "estimate {} +- {}",
            result.estimate,
            result.stderr
        );
    }

    #[test]
    fn far_thresholds_never_trigger() {
        let (m, p) = p0();
        let policy = PolicySpec::new(1e-6, 1e6).unwrap();
        let cfg = small_cfg(1.0, 1500);
        let result = simulate(&m, &p, &policy, &cfg).unwrap();
        assert_eq!(result.components.down_income, 0.0);
        assert_eq!(result.components.up_cost, 0.0);
        assert!((result.estimate - 7.18390804597701).abs() <= 3.0 * result.stderr);
    }

    #[test]
    fn optimal_policy_matches_analytic_value() {
        let (m, p) = p0();
        let solver = ThresholdSolver::new(&m, p.clone()).unwrap();
        let t = solver.solve().unwrap();
        let vf = ValueFunction::build(&m, p.clone(), &t).unwrap();
        let policy = PolicySpec::new(t.a_star, t.b_star).unwrap();
        let cfg = small_cfg(1.0, 3000);
        let result = simulate(&m, &p, &policy, &cfg).unwrap();
        let v = vf.eval(1.0, 0).unwrap();
        assert!(
            (result.estimate - v).abs() <= 3.0 * result.stderr,
            "estimate {} +- {} vs analytic {v}",
            result.estimate,
            result.stderr
        );
        assert!(result.stderr <= 0.005 * v);
        // component sanity
        assert!(result.components.running_payoff >= 0.0);
        assert!(result.components.down_income >= 0.0);
        assert!(result.components.up_cost >= 0.0);
    }

    #[test]
    fn perturbed_policies_do_not_dominate() {
        let (m, p) = p0();
        let solver = ThresholdSolver::new(&m, p.clone()).unwrap();
        let t = solver.solve().unwrap();
        let vf = ValueFunction::build(&m, p.clone(), &t).unwrap();
        let cfg = small_cfg(1.0, 2000);
        let report = validate(&vf, &[1.0], &cfg).unwrap();
        assert!(report.pass, "{report:#?}");
        let entry = &report.entries[0];
        for (_, sim) in &entry.perturbed {
            let combined = (entry.optimal.stderr.powi(2) + sim.stderr.powi(2)).sqrt();
            assert!(entry.optimal.estimate >= sim.estimate - 2.0 * combined);
        }
    }

    #[test]
    fn refining_dt_moves_estimate_less_than_noise() {
        let (m, p) = p0();
        let policy = PolicySpec::new(0.309176840633, 0.744637995897).unwrap();
        let mut cfg = small_cfg(1.0, 2000);
        let coarse = simulate(&m, &p, &policy, &cfg).unwrap();
        cfg.dt /= 2.0;
        let fine = simulate(&m, &p, &policy, &cfg).unwrap();
        let noise = (coarse.stderr.powi(2) + fine.stderr.powi(2)).sqrt();
        assert!(
            (coarse.estimate - fine.estimate).abs() <= noise,
            "dt bias {} vs noise {noise}",
            (coarse.estimate - fine.estimate).abs()
        );
    }

    #[test]
    fn empty_points_list_gives_empty_report() {
        let (m, p) = p0();
        let solver = ThresholdSolver::new(&m, p.clone()).unwrap();
        let t = solver.solve().unwrap();
        let vf = ValueFunction::build(&m, p.clone(), &t).unwrap();
        let cfg = small_cfg(1.0, 16);
        let report = validate(&vf, &[], &cfg).unwrap();
        assert!(report.entries.is_empty() && report.pass);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (m, p) = p0();
        let policy = PolicySpec::new(0.3, 0.7).unwrap();
        let mut cfg = small_cfg(1.0, 16);
        cfg.dt = 0.0;
        assert!(simulate(&m, &p, &policy, &cfg).is_err());
        let mut cfg = small_cfg(1.0, 16);
        cfg.n_paths = 0;
        assert!(simulate(&m, &p, &policy, &cfg).is_err());
        let mut cfg = small_cfg(1.0, 16);
        cfg.horizon = 1.0; // discount tail far above tail_tol
        assert!(simulate(&m, &p, &policy, &cfg).is_err());
        assert!(PolicySpec::new(0.7, 0.3).is_err());
        assert!(PolicySpec::new(0.0, 0.3).is_err());
    }
}
