//! Experiment configuration and the manifest format.
//!
//! A manifest is a fully resolved configuration: every constant that affects
//! the run is spelled out, so feeding a manifest back as the config
//! reproduces the result rows bit-for-bit (timing columns excepted).

use serde::{Deserialize, Serialize};

use robust_ising::error::{Error, Result};
use robust_ising::filters::{BoundedCovConfig, NearIdentityConfig};
use robust_ising::learner::{LearnerConfig, RefinementConstants};
use robust_ising::mle::MleConfig;
use robust_ising::model::{random_bounded_model, IsingParameters};

/// Model source: an explicit file, a generator recipe, or an inline model
/// object (the form manifests use, immune to file edits).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<serde_json::Value>,
}

/// Random-model recipe: the interaction is rescaled so the largest row
/// l1-norm equals `fill * M` with `M = m` or `1 - eta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_fill")]
    pub fill: f64,
    pub seed: u64,
}

fn default_fill() -> f64 {
    0.9
}

impl ModelSource {
    pub fn load(&self) -> Result<IsingParameters> {
        match (&self.file, &self.generator, &self.inline) {
            (Some(path), None, None) => {
                let text = std::fs::read_to_string(path)?;
                IsingParameters::from_json(&text)
            }
            (None, Some(gen), None) => {
                let m = match (gen.m, gen.eta) {
                    (Some(m), None) => m,
                    (None, Some(eta)) => 1.0 - eta,
                    _ => {
                        return Err(Error::Parameter(
                            "generator needs exactly one of `m` or `eta`".into(),
                        ))
                    }
                };
                Ok(random_bounded_model(gen.d, gen.fill * m, gen.alpha, gen.seed))
            }
            (None, None, Some(value)) => IsingParameters::from_json(&value.to_string()),
            _ => Err(Error::Parameter(
                "model source needs exactly one of `file`, `generator` or `inline`".into(),
            )),
        }
    }
}

/// Attack description for configs and the `corrupt` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// One of `replace-with-point`, `mean-shift-direction`,
    /// `pair-correlation-boost`, `heavy-tail-injection`.
    pub kind: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
}

impl AttackConfig {
    pub fn build(&self, eps: f64, d: usize) -> Result<robust_ising::attack::AttackSpec> {
        use robust_ising::attack::{Attack, AttackSpec};
        let kind = match self.kind.as_str() {
            "replace-with-point" => Attack::ReplaceWithPoint {
                point: self.point.clone().unwrap_or_else(|| vec![1.0; d]),
            },
            "mean-shift-direction" => Attack::MeanShiftDirection {
                direction: self.direction.clone(),
                distance: self.distance.unwrap_or(0.0),
            },
            "pair-correlation-boost" => Attack::PairCorrelationBoost {
                pairs: self.pairs.clone().unwrap_or_else(|| vec![(0, 1.min(d - 1))]),
            },
            "heavy-tail-injection" => Attack::HeavyTailInjection {
                distance: self.distance.unwrap_or(100.0),
            },
            other => {
                return Err(Error::Parameter(format!("unknown attack kind {other:?}")))
            }
        };
        Ok(AttackSpec { kind, eps, seed: self.seed })
    }
}

/// Learner mode with its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeConfig {
    ZeroField { eta: f64 },
    External { m: f64, alpha: f64, c0: f64 },
}

/// Every tunable constant of the learner, flattened. All fields are
/// optional in a config; the manifest always carries the resolved values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsPatch {
    pub eps0: Option<f64>,
    pub c0: Option<f64>,
    pub c_ref: Option<f64>,
    pub c_tau: Option<f64>,
    pub c_n: Option<f64>,
    pub smoothness: Option<f64>,
    pub strong_convexity: Option<f64>,
    pub grad_constant: Option<f64>,
    pub grad_budget: Option<usize>,
    pub grad_chain_constant: Option<f64>,
    pub mle_max_iters: Option<usize>,
    pub tail_average: Option<usize>,
    pub mle_delta: Option<f64>,
    pub zeta: Option<f64>,
    pub cov_budget: Option<usize>,
    pub cov_gamma: Option<f64>,
    pub cov_chain_constant: Option<f64>,
    pub whiten_floor: Option<f64>,
    pub bounded_stop_factor: Option<f64>,
    pub near_stop_factor: Option<f64>,
    pub tail_floor: Option<f64>,
    pub tail_coeff: Option<f64>,
    pub tail_rate: Option<f64>,
    pub within_ball_downweight: Option<bool>,
    pub filter_rounds_per_dim: Option<usize>,
    pub rounds_override: Option<usize>,
    pub final_solve_boost: Option<f64>,
    pub c1: Option<f64>,
    pub disable_filters: Option<bool>,
}

impl ConstantsPatch {
    pub fn apply(&self, base: LearnerConfig) -> LearnerConfig {
        let mut cfg = base;
        let c = self;
        if let Some(v) = c.eps0 {
            cfg.eps0 = v;
        }
        if let Some(v) = c.c0 {
            cfg.constants.c0 = v;
        }
        if let Some(v) = c.c_ref {
            cfg.constants.c_ref = v;
        }
        if let Some(v) = c.c_tau {
            cfg.constants.c_tau = v;
        }
        if let Some(v) = c.c_n {
            cfg.constants.c_n = v;
        }
        if let Some(v) = c.smoothness {
            cfg.mle.smoothness = v;
        }
        if let Some(v) = c.strong_convexity {
            cfg.mle.strong_convexity = v;
        }
        if let Some(v) = c.grad_constant {
            cfg.mle.grad_constant = v;
        }
        if let Some(v) = c.grad_budget {
            cfg.mle.grad_budget = v;
        }
        if let Some(v) = c.grad_chain_constant {
            cfg.mle.chain_constant = v;
        }
        if let Some(v) = c.mle_max_iters {
            cfg.mle.max_iters = v;
        }
        if let Some(v) = c.tail_average {
            cfg.mle.tail_average = v;
        }
        if let Some(v) = c.mle_delta {
            cfg.mle_delta = v;
        }
        if let Some(v) = c.zeta {
            cfg.zeta = v;
        }
        if let Some(v) = c.cov_budget {
            cfg.cov_budget = v;
        }
        if let Some(v) = c.cov_gamma {
            cfg.cov_gamma = v;
        }
        if let Some(v) = c.cov_chain_constant {
            cfg.cov_chain_constant = v;
        }
        if let Some(v) = c.whiten_floor {
            cfg.whiten_floor = v;
        }
        if let Some(v) = c.bounded_stop_factor {
            cfg.bounded_cov.stop_factor = v;
        }
        if let Some(v) = c.near_stop_factor {
            cfg.near_identity.stop_factor = v;
        }
        if let Some(v) = c.tail_floor {
            cfg.near_identity.tail_floor = v;
        }
        if let Some(v) = c.tail_coeff {
            cfg.near_identity.tail_coeff = v;
        }
        if let Some(v) = c.tail_rate {
            cfg.near_identity.tail_rate = v;
        }
        if let Some(v) = c.within_ball_downweight {
            cfg.near_identity.within_ball_downweight = v;
        }
        if let Some(v) = c.filter_rounds_per_dim {
            cfg.bounded_cov.max_rounds_per_dim = v;
            cfg.near_identity.max_rounds_per_dim = v;
        }
        if let Some(v) = c.rounds_override {
            cfg.rounds_override = Some(v);
        }
        if let Some(v) = c.final_solve_boost {
            cfg.final_solve_boost = v;
        }
        if let Some(v) = c.c1 {
            cfg.c1 = v;
        }
        if let Some(v) = c.disable_filters {
            cfg.disable_filters = v;
        }
        cfg
    }

    /// Fully resolved snapshot of a learner configuration.
    pub fn resolved(cfg: &LearnerConfig) -> Self {
        Self {
            eps0: Some(cfg.eps0),
            c0: Some(cfg.constants.c0),
            c_ref: Some(cfg.constants.c_ref),
            c_tau: Some(cfg.constants.c_tau),
            c_n: Some(cfg.constants.c_n),
            smoothness: Some(cfg.mle.smoothness),
            strong_convexity: Some(cfg.mle.strong_convexity),
            grad_constant: Some(cfg.mle.grad_constant),
            grad_budget: Some(cfg.mle.grad_budget),
            grad_chain_constant: Some(cfg.mle.chain_constant),
            mle_max_iters: Some(cfg.mle.max_iters),
            tail_average: Some(cfg.mle.tail_average),
            mle_delta: Some(cfg.mle_delta),
            zeta: Some(cfg.zeta),
            cov_budget: Some(cfg.cov_budget),
            cov_gamma: Some(cfg.cov_gamma),
            cov_chain_constant: Some(cfg.cov_chain_constant),
            whiten_floor: Some(cfg.whiten_floor),
            bounded_stop_factor: Some(cfg.bounded_cov.stop_factor),
            near_stop_factor: Some(cfg.near_identity.stop_factor),
            tail_floor: Some(cfg.near_identity.tail_floor),
            tail_coeff: Some(cfg.near_identity.tail_coeff),
            tail_rate: Some(cfg.near_identity.tail_rate),
            within_ball_downweight: Some(cfg.near_identity.within_ball_downweight),
            filter_rounds_per_dim: Some(cfg.near_identity.max_rounds_per_dim),
            rounds_override: cfg.rounds_override,
            final_solve_boost: Some(cfg.final_solve_boost),
            c1: Some(cfg.c1),
            disable_filters: Some(cfg.disable_filters),
        }
    }
}

/// Defaults used by the CLI before any patch is applied.
pub fn base_learner_config() -> LearnerConfig {
    LearnerConfig {
        constants: RefinementConstants::default(),
        mle: MleConfig { grad_budget: 5_000, ..MleConfig::ising_desk_scale() },
        bounded_cov: BoundedCovConfig::default(),
        near_identity: NearIdentityConfig { stop_factor: 0.75, ..Default::default() },
        ..Default::default()
    }
}

/// Top-level experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub n_samples: usize,
    pub eps: f64,
    pub attack: AttackConfig,
    pub mode: ModeConfig,
    #[serde(default)]
    pub constants: ConstantsPatch,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Chain accuracy for generating the clean data.
    #[serde(default = "default_data_gamma")]
    pub data_gamma: f64,
    /// Chain multiplier for generating the clean data.
    #[serde(default = "default_data_chain_constant")]
    pub data_chain_constant: f64,
}

fn default_reps() -> usize {
    1
}

fn default_data_gamma() -> f64 {
    0.01
}

fn default_data_chain_constant() -> f64 {
    20.0
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.eps) {
            return Err(Error::Parameter(format!("eps must be in [0, 0.5), got {}", self.eps)));
        }
        if self.repetitions == 0 {
            return Err(Error::Parameter("repetitions must be at least 1".into()));
        }
        if self.n_samples < 2 {
            return Err(Error::Parameter("n_samples must be at least 2".into()));
        }
        Ok(())
    }
}
