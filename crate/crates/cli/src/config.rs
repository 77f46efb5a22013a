//! JSON run configuration: model, problem, numerics, simulation and output
//! blocks. Unknown fields are rejected so typos fail loudly.

use serde::{Deserialize, Serialize};

use poisson_impulse::{
    AssumptionGrid, Gbm, PowerSum, ProblemSpec, QuadConfig, SimConfig, SolverConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelConfig,
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerics: Option<NumericsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Gbm { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub r: f64,
    pub lambda: f64,
    pub gamma_d: f64,
    pub gamma_u: f64,
    pub payoff: PayoffConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PayoffConfig {
    Power { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_quad_abs_tol")]
    pub quad_abs_tol: f64,
    #[serde(default = "default_quad_rel_tol")]
    pub quad_rel_tol: f64,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_quad_abs_tol() -> f64 {
    1e-10
}
fn default_quad_rel_tol() -> f64 {
    1e-9
}
fn default_root_tol() -> f64 {
    1e-10
}
fn default_grid_points() -> usize {
    512
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            quad_abs_tol: default_quad_abs_tol(),
            quad_rel_tol: default_quad_rel_tol(),
            root_tol: default_root_tol(),
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub x0: f64,
    /// Horizon in time units; derived from `tail_tol` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_dt() -> f64 {
    1e-2
}
fn default_n_paths() -> usize {
    4000
}
fn default_seed() -> u64 {
    0x5eed_cafe
}
fn default_tail_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.version != 1 {
            return Err(format!("unsupported config version {}", self.version));
        }
        let ModelConfig::Gbm { sigma, .. } = self.model;
        if !(sigma > 0.0) {
            return Err(format!("model.sigma must be positive, got {sigma}"));
        }
        if !(self.problem.r > 0.0) {
            return Err(format!(
                "problem.r must be positive, got {}",
                self.problem.r
            ));
        }
        if !(self.problem.lambda > 0.0) {
            return Err(format!(
                "problem.lambda must be positive, got {}",
                self.problem.lambda
            ));
        }
        let PayoffConfig::Power { delta } = self.problem.payoff;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(format!("payoff.delta must lie in (0, 1), got {delta}"));
        }
        if let Some(sim) = &self.sim {
            if !(sim.x0 > 0.0) {
                return Err(format!("sim.x0 must be positive, got {}", sim.x0));
            }
            if !(sim.dt > 0.0) {
                return Err(format!("sim.dt must be positive, got {}", sim.dt));
            }
        }
        Ok(())
    }

    /// Strict ordering of the unit price and cost; the `check` subcommand
    /// reports a violation as a failed assumption instead of a config
    /// error.
    pub fn gammas_ordered(&self) -> bool {
        self.problem.gamma_d < self.problem.gamma_u
    }

    pub fn build_model(&self) -> Result<Gbm, String> {
        let ModelConfig::Gbm { mu, sigma } = self.model;
        Gbm::new(mu, sigma).map_err(|e| e.to_string())
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, String> {
        if !self.gammas_ordered() {
            return Err(format!(
                "problem.gamma_d must be below problem.gamma_u, got {} and {}",
                self.problem.gamma_d, self.problem.gamma_u
            ));
        }
        let PayoffConfig::Power { delta } = self.problem.payoff;
        ProblemSpec::new(
            self.problem.r,
            self.problem.lambda,
            self.problem.gamma_d,
            self.problem.gamma_u,
            PowerSum::power(1.0, delta),
        )
        .map_err(|e| e.to_string())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let numerics = self.numerics.clone().unwrap_or_default();
        SolverConfig {
            quad: QuadConfig {
                abs_tol: numerics.quad_abs_tol,
                rel_tol: numerics.quad_rel_tol,
                ..QuadConfig::default()
            },
            root_tol: numerics.root_tol,
            ..SolverConfig::default()
        }
    }

    pub fn assumption_grid(&self) -> AssumptionGrid {
        let numerics = self.numerics.clone().unwrap_or_default();
        AssumptionGrid {
            points: numerics.grid_points.max(8),
            ..AssumptionGrid::default()
        }
    }

    /// Simulation settings; requires the `sim` block.
    pub fn sim_config(&self, problem: &ProblemSpec) -> Result<SimConfig, String> {
        let sim = self
            .sim
            .as_ref()
            .ok_or_else(|| "config has no \"sim\" block".to_string())?;
        let mut cfg = SimConfig::for_problem(problem, sim.x0);
        cfg.dt = sim.dt;
        cfg.n_paths = sim.n_paths;
        cfg.seed = sim.seed;
        cfg.tail_tol = sim.tail_tol;
        cfg.horizon = sim
            .horizon
            .unwrap_or_else(|| (1.0 / sim.tail_tol).ln() / problem.r);
        Ok(cfg)
    }
}
