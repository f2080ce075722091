//! The experiment pipeline: generate clean samples from a reference model,
//! corrupt them, learn, and score against the reference, over independent
//! repetitions with derived seeds.
//!
//! Outputs in the target directory:
//! - `results.csv` with columns `rep,eps,frobenius_error,tv_error_if_enumerable,wall_ms`
//!   (the TV column is empty above the enumeration cap);
//! - `manifest.json`, the fully resolved configuration. Feeding the
//!   manifest back as `--config` reproduces every result column except the
//!   timing one.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use robust_ising::enumerate::{exact_tv, ENUM_CAP_DEFAULT};
use robust_ising::error::{Error, Result};
use robust_ising::glauber::{sample_batch, ChainConfig};
use robust_ising::learner::{
    param_distance, robust_learn_ising_external, robust_learn_ising_zero_field,
};
use robust_ising::model::{DobrushinSpec, IsingParameters};
use robust_ising::seeding::derive_seed;

use crate::config::{base_learner_config, ConstantsPatch, ExperimentConfig, ModeConfig, ModelSource};
use crate::fmt_f;

struct RepetitionOutcome {
    rep: usize,
    frobenius_error: f64,
    tv_error: Option<f64>,
    wall_ms: f64,
}

fn run_repetition(
    rep: usize,
    cfg: &ExperimentConfig,
    target: &IsingParameters,
    learner_base: &robust_ising::learner::LearnerConfig,
) -> Result<RepetitionOutcome> {
    let start = std::time::Instant::now();
    let rep_seed = derive_seed(cfg.master_seed, rep as u64);
    let chain = ChainConfig::new(cfg.data_gamma, cfg.data_chain_constant, derive_seed(rep_seed, 0))?;
    let clean = sample_batch(target, cfg.n_samples, &chain)?;
    let attack = cfg.attack.build(cfg.eps, target.dim())?;
    let attack = robust_ising::attack::AttackSpec {
        seed: derive_seed(attack.seed, rep as u64),
        ..attack
    };
    let corrupted = robust_ising::attack::corrupt(&clean, &attack)?;

    let mut learner_cfg = learner_base.clone();
    learner_cfg.master_seed = derive_seed(rep_seed, 1);
    let theta = match &cfg.mode {
        ModeConfig::ZeroField { eta } => {
            robust_learn_ising_zero_field(&corrupted, cfg.eps, *eta, &learner_cfg)?.0
        }
        ModeConfig::External { m, alpha, c0 } => {
            let bounds = DobrushinSpec::from_bounds(*m, *alpha)?;
            robust_learn_ising_external(&corrupted, cfg.eps, &bounds, *c0, &learner_cfg)?.0
        }
    };
    let frobenius_error = param_distance(&theta, target);
    let tv_error = if target.dim() <= ENUM_CAP_DEFAULT {
        Some(exact_tv(&theta, target)?)
    } else {
        None
    };
    Ok(RepetitionOutcome {
        rep,
        frobenius_error,
        tv_error,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn run(config_path: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("experiment config: {e}")))?;
    cfg.validate()?;
    let target = cfg.model.load()?;
    let learner_cfg = cfg.constants.apply(base_learner_config());

    std::fs::create_dir_all(out_dir)?;

    // Manifest: resolved constants and an inline copy of the model, so the
    // run is reproducible even if the referenced file changes.
    let mut manifest_cfg = cfg.clone();
    manifest_cfg.constants = ConstantsPatch::resolved(&learner_cfg);
    if manifest_cfg.model.generator.is_none() {
        let inline: serde_json::Value = serde_json::from_str(&target.to_json())
            .expect("model serialization is valid JSON");
        manifest_cfg.model = ModelSource { file: None, generator: None, inline: Some(inline) };
    }
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": manifest_cfg,
    });
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;

    let outcomes: Vec<Result<RepetitionOutcome>> =
        robust_ising::par::map_indexed(cfg.repetitions, |rep| {
            run_repetition(rep, &cfg, &target, &learner_cfg)
        });

    let mut rows = Vec::with_capacity(cfg.repetitions);
    for outcome in outcomes {
        rows.push(outcome?);
    }
    rows.sort_by_key(|r| r.rep);

    let mut file = File::create(out_dir.join("results.csv"))?;
    writeln!(file, "rep,eps,frobenius_error,tv_error_if_enumerable,wall_ms")?;
    for r in &rows {
        let tv = r.tv_error.map(fmt_f).unwrap_or_default();
        writeln!(
            file,
            "{},{},{},{tv},{}",
            r.rep,
            fmt_f(cfg.eps),
            fmt_f(r.frobenius_error),
            fmt_f(r.wall_ms)
        )?;
    }
    let median = {
        let mut errs: Vec<f64> = rows.iter().map(|r| r.frobenius_error).collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        errs[errs.len() / 2]
    };
    println!(
        "completed {} repetitions; median parameter error {}",
        cfg.repetitions,
        fmt_f(median)
    );
    Ok(())
}
