//! Command-line front end: sampling, exact oracles, contamination, robust
//! learning, Monte Carlo verification, and full experiment pipelines.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 usage or input errors,
//! 3 refusal by the external-field feasibility inequality (both evaluated
//! sides are printed).

mod config;
mod experiment;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use robust_ising::enumerate::{exact_summary_capped, exact_tv, ENUM_CAP_HARD};
use robust_ising::error::Error;
use robust_ising::glauber::{sample_batch, ChainConfig};
use robust_ising::learner::{
    robust_learn_ising_external, robust_learn_ising_zero_field, RefinementTrace,
};
use robust_ising::model::{DobrushinSpec, IsingParameters};
use robust_ising::samples::SampleSet;
use robust_ising::verify::{
    mc_linear_anticoncentration, mc_tail_check, mc_variance_lower_bound, mc_variance_upper_bound,
    random_test_matrix, McConfig, VarianceReport,
};

use config::{AttackConfig, ConstantsPatch};

/// Format a float with 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Parser)]
#[command(name = "robust-ising", version, about = "Robust Ising model learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw approximate samples from a model file into a CSV.
    Sample(SampleArgs),
    /// Exact enumeration statistics of a small model.
    Oracle(OracleArgs),
    /// Replace a fraction of sample rows with adversarial content.
    Corrupt(CorruptArgs),
    /// Learn model parameters from (possibly corrupted) samples.
    Learn(LearnArgs),
    /// Monte Carlo verification of variance and tail properties.
    Verify(VerifyArgs),
    /// Full generate -> corrupt -> learn -> score pipeline with repetitions.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20.0)]
    mixing_constant: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated list from: partition, mean, cov, tv.
    #[arg(long, default_value = "partition,mean,cov")]
    stats: String,
    /// Second model, required for the tv statistic.
    #[arg(long)]
    other: Option<PathBuf>,
    /// Enumeration cap override (hard cap 16).
    #[arg(long, default_value_t = 12)]
    cap: usize,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    eps: f64,
    /// replace-with-point | mean-shift-direction | pair-correlation-boost |
    /// heavy-tail-injection (point sets only).
    #[arg(long)]
    attack: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Payload spin vector, comma separated (replace-with-point).
    #[arg(long)]
    point: Option<String>,
    /// Payload direction, comma separated (mean-shift-direction).
    #[arg(long)]
    direction: Option<String>,
    /// Payload pairs like "0-1,2-3" (pair-correlation-boost).
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    eps: f64,
    /// zero-field | external
    #[arg(long)]
    mode: String,
    /// Dobrushin slack (zero-field mode).
    #[arg(long)]
    eta: Option<f64>,
    /// Row-sum bound (external mode).
    #[arg(long = "M")]
    m: Option<f64>,
    /// Field bound (external mode).
    #[arg(long)]
    alpha: Option<f64>,
    /// Margin constant of the feasibility inequality (external mode).
    #[arg(long)]
    c0: Option<f64>,
    /// Constant in the assumed spin-mean error bound (external mode).
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file of constant overrides (same schema as the experiment
    /// `constants` block).
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV (k, tau_k, mass_removed, cov_gap, wall_ms).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// anticoncentration | upper | linear | tails
    #[arg(long)]
    check: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include a random linear part in the quadratic checks.
    #[arg(long, default_value_t = false)]
    with_linear: bool,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 20.0)]
    mixing_constant: f64,
    /// Largest threshold of the tail grid.
    #[arg(long, default_value_t = 3.0)]
    t_max: f64,
    /// Number of tail thresholds.
    #[arg(long, default_value_t = 12)]
    t_count: usize,
    /// Output directory for the report CSV and summary JSON.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("ROBUST_ISING_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(args) => cmd_sample(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Corrupt(args) => cmd_corrupt(args),
        Command::Learn(args) => cmd_learn(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Experiment(args) => experiment::run(&args.config, &args.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::ConstraintRefused { lhs, rhs, .. } => {
                    eprintln!("constraint sides: lhs = {} rhs = {}", fmt_f(lhs), fmt_f(rhs));
                    ExitCode::from(3)
                }
                Error::Numeric(_) | Error::Io(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_model(path: &Path) -> Result<IsingParameters, Error> {
    let text = std::fs::read_to_string(path)?;
    IsingParameters::from_json(&text)
}

fn cmd_sample(args: SampleArgs) -> Result<(), Error> {
    let model = load_model(&args.model)?;
    let cfg = ChainConfig::new(args.gamma, args.mixing_constant, args.seed)?;
    let samples = sample_batch(&model, args.n, &cfg)?;
    let file = File::create(&args.out)?;
    samples.write_csv(file)?;
    println!("wrote {} samples of dimension {} to {}", args.n, model.dim(), args.out.display());
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Error> {
    let model = load_model(&args.model)?;
    let wanted: Vec<&str> = args.stats.split(',').map(|s| s.trim()).collect();
    for w in &wanted {
        if !["partition", "mean", "cov", "tv"].contains(w) {
            return Err(Error::Parameter(format!("unknown statistic {w:?}")));
        }
    }
    let cap = args.cap.min(ENUM_CAP_HARD);
    let summary = exact_summary_capped(&model, cap)?;
    let mut out = serde_json::Map::new();
    if wanted.contains(&"partition") {
        out.insert("logZ".into(), summary.log_z.into());
    }
    if wanted.contains(&"mean") {
        out.insert("mean".into(), vec_json(&summary.mean));
        out.insert("pairMoments".into(), mat_json(&summary.pair_moments));
    }
    if wanted.contains(&"cov") {
        out.insert("suffStatMean".into(), vec_json(&summary.suffstat_mean));
        out.insert("suffStatCov".into(), mat_json(&summary.suffstat_cov));
    }
    if wanted.contains(&"tv") {
        let other_path = args.other.ok_or_else(|| {
            Error::Parameter("the tv statistic requires --other".into())
        })?;
        let other = load_model(&other_path)?;
        out.insert("tv".into(), exact_tv(&model, &other)?.into());
    }
    println!("{}", serde_json::Value::Object(out));
    Ok(())
}

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|&x| x.into()).collect())
}

fn mat_json(m: &nalgebra::DMatrix<f64>) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|i| {
                serde_json::Value::Array((0..m.ncols()).map(|j| m[(i, j)].into()).collect())
            })
            .collect(),
    )
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {s:?}")))
        })
        .collect()
}

fn cmd_corrupt(args: CorruptArgs) -> Result<(), Error> {
    let samples = SampleSet::read_csv(File::open(&args.input)?)?;
    let pairs = match &args.pairs {
        None => None,
        Some(text) => {
            let mut out = Vec::new();
            for part in text.split(',') {
                let (a, b) = part
                    .split_once('-')
                    .ok_or_else(|| Error::Format(format!("bad pair {part:?}")))?;
                out.push((
                    a.trim().parse().map_err(|_| Error::Format(format!("bad pair {part:?}")))?,
                    b.trim().parse().map_err(|_| Error::Format(format!("bad pair {part:?}")))?,
                ));
            }
            Some(out)
        }
    };
    let attack_cfg = AttackConfig {
        kind: args.attack.clone(),
        seed: args.seed,
        point: args.point.as_deref().map(parse_f64_list).transpose()?,
        direction: args.direction.as_deref().map(parse_f64_list).transpose()?,
        distance: None,
        pairs,
    };
    let attack = attack_cfg.build(args.eps, samples.dim())?;
    let corrupted = robust_ising::attack::corrupt(&samples, &attack)?;
    corrupted.write_csv(File::create(&args.out)?)?;
    println!(
        "replaced {} of {} rows ({})",
        (args.eps * samples.len() as f64).floor() as usize,
        samples.len(),
        args.attack
    );
    Ok(())
}

fn write_trace_csv(path: &Path, trace: &RefinementTrace) -> Result<(), Error> {
    let mut file = File::create(path)?;
    writeln!(file, "k,tau_k,mass_removed,cov_gap,wall_ms")?;
    for r in &trace.rounds {
        writeln!(
            file,
            "{},{},{},{},{}",
            r.k,
            fmt_f(r.tau_k),
            fmt_f(r.filter.mass_removed),
            fmt_f(r.cov_spectral_gap),
            fmt_f(r.wall_ms)
        )?;
    }
    Ok(())
}

fn cmd_learn(args: LearnArgs) -> Result<(), Error> {
    let samples = SampleSet::read_csv(File::open(&args.input)?)?;
    let mut cfg = config::base_learner_config();
    if let Some(path) = &args.constants {
        let patch: ConstantsPatch = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Format(format!("constants file: {e}")))?;
        cfg = patch.apply(cfg);
    }
    cfg.master_seed = args.seed;
    cfg.c1 = args.c1;
    let (theta, trace) = match args.mode.as_str() {
        "zero-field" => {
            let eta = args
                .eta
                .ok_or_else(|| Error::Parameter("zero-field mode requires --eta".into()))?;
            robust_learn_ising_zero_field(&samples, args.eps, eta, &cfg)?
        }
        "external" => {
            let m = args.m.ok_or_else(|| Error::Parameter("external mode requires --M".into()))?;
            let alpha = args
                .alpha
                .ok_or_else(|| Error::Parameter("external mode requires --alpha".into()))?;
            let c0 = args
                .c0
                .ok_or_else(|| Error::Parameter("external mode requires --c0".into()))?;
            let bounds = DobrushinSpec::from_bounds(m, alpha)?;
            let (theta, _, trace) =
                robust_learn_ising_external(&samples, args.eps, &bounds, c0, &cfg)?;
            (theta, trace)
        }
        other => return Err(Error::Parameter(format!("unknown mode {other:?}"))),
    };
    std::fs::write(&args.out, theta.to_json())?;
    if let Some(path) = &args.trace {
        write_trace_csv(path, &trace)?;
    }
    println!("wrote parameter estimate to {}", args.out.display());
    Ok(())
}

fn summarize_ratios(reports: &[VarianceReport]) -> (f64, f64, f64) {
    let mut ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (ratios[0], ratios[ratios.len() - 1], ratios[ratios.len() / 2])
}

fn write_variance_csv(path: &Path, reports: &[VarianceReport]) -> Result<(), Error> {
    let mut file = File::create(path)?;
    writeln!(
        file,
        "trial,test_matrix_norm,linear_norm,empirical_variance,ratio,n_samples,ci95_half_width"
    )?;
    for (t, r) in reports.iter().enumerate() {
        writeln!(
            file,
            "{t},{},{},{},{},{},{}",
            fmt_f(r.test_matrix_norm),
            fmt_f(r.linear_norm),
            fmt_f(r.empirical_variance),
            fmt_f(r.ratio),
            r.n_samples,
            fmt_f(r.ci95_half_width)
        )?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Error> {
    let model = load_model(&args.model)?;
    std::fs::create_dir_all(&args.out)?;
    let mc = McConfig { gamma: args.gamma, mixing_constant: args.mixing_constant };
    let summary = match args.check.as_str() {
        "anticoncentration" | "upper" | "linear" => {
            let reports = match args.check.as_str() {
                "anticoncentration" => mc_variance_lower_bound(
                    &model,
                    args.trials,
                    args.n,
                    args.with_linear,
                    args.seed,
                    &mc,
                )?,
                "upper" => mc_variance_upper_bound(&model, args.trials, args.n, args.seed, &mc)?,
                _ => mc_linear_anticoncentration(&model, args.trials, args.n, args.seed, &mc)?,
            };
            write_variance_csv(&args.out.join(format!("{}_report.csv", args.check)), &reports)?;
            let (min, max, median) = summarize_ratios(&reports);
            serde_json::json!({
                "check": args.check,
                "trials": args.trials,
                "n": args.n,
                "seed": args.seed,
                "min_ratio": min,
                "max_ratio": max,
                "median_ratio": median,
            })
        }
        "tails" => {
            let mut rng = robust_ising::seeding::unit_rng(args.seed, 0);
            let a = random_test_matrix(model.dim(), &mut rng);
            let b = DVector::zeros(model.dim());
            if args.t_count < 2 || args.t_max <= 0.0 {
                return Err(Error::Parameter("need t_count >= 2 and t_max > 0".into()));
            }
            let thresholds: Vec<f64> = (1..=args.t_count)
                .map(|i| args.t_max * i as f64 / args.t_count as f64)
                .collect();
            let report =
                mc_tail_check(&model, &a, &b, None, args.n, &thresholds, args.seed, &mc)?;
            let mut file = File::create(args.out.join("tails_report.csv"))?;
            writeln!(file, "threshold,log_survival")?;
            for (t, ls) in report.thresholds.iter().zip(&report.log_survival) {
                writeln!(file, "{},{}", fmt_f(*t), fmt_f(*ls))?;
            }
            serde_json::json!({
                "check": "tails",
                "n": args.n,
                "seed": args.seed,
                "fitted_rate": report.fitted_rate,
                "truncated": report.truncated,
            })
        }
        other => return Err(Error::Parameter(format!("unknown check {other:?}"))),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(args.out.join(format!("{}_summary.json", args.check)), &text)?;
    println!("{text}");
    Ok(())
}
