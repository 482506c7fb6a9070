use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use irw::config::{parse_integer_list, parse_real_list, KeyValues};
use irw::critical::{conjectured_critical_limit, conjectured_critical_n, continuum_critical};
use irw::gaps::pi2;
use irw::lyapunov::{epsilon_n, epsilon_search, ergodic_certificate_search, transience_certificate, ErgodicSearchOptions};
use irw::nonlinear::{existence_bounds, gamma_fixed_point_with, Damping, FixedPointOptions};
use irw::report::{self, fmt_num};
use irw::sim::{self, ChaosOptions, ProbeThresholds, SimulateOptions};
use irw::sweep::{run_sweep, SweepConfig};
use irw::{Error, Kernel, ModelSpec, ParticleState, ProbabilityVector};

/// Interacting random walks: simulation, nonlinear fixed points, critical
/// values and drift certificates.
#[derive(Debug, Parser)]
#[command(name = "irw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory, or diagnose recurrence with --diagnose.
    Simulate(SimulateArgs),
    /// Iterate the map from a driving measure to its stationary law.
    Fixedpoint(FixedpointArgs),
    /// Critical interaction strengths and theoretical bounds.
    Critical(CriticalArgs),
    /// Exact stationary law of the two-particle gaps.
    Pi2(Pi2Args),
    /// Drift certificates for ergodicity or transience.
    Certify(CertifyArgs),
    /// Phase-diagram sweep driven by a config file.
    Sweep(SweepArgs),
    /// Distance between the particle marginal and the nonlinear law.
    Chaos(ChaosArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Key-value file with n, delta, lambda and optionally kernel.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// small_jump, jump_to_lower or tabulated:<csv>
    #[arg(long)]
    kernel: Option<String>,
}

impl ModelArgs {
    fn resolve(&self) -> irw::Result<ModelSpec> {
        let base = match &self.config {
            Some(p) => Some(ModelSpec::read(p)?),
            None => None,
        };
        let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
            flag.or(from)
                .ok_or_else(|| Error::InvalidInput(format!("--{name} (or a config file) is required")))
        };
        let n = self
            .n
            .or(base.as_ref().map(|m| m.n_particles))
            .ok_or_else(|| Error::InvalidInput("--n (or a config file) is required".into()))?;
        let delta = pick(self.delta, base.as_ref().map(|m| m.delta), "delta")?;
        let lambda = pick(self.lambda, base.as_ref().map(|m| m.lambda), "lambda")?;
        let kernel = match (&self.kernel, &base) {
            (Some(k), _) => Kernel::parse(k, None)?,
            (None, Some(m)) => m.kernel.clone(),
            (None, None) => Kernel::SmallJump,
        };
        ModelSpec::new(n, delta, lambda, kernel)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record K+1 evenly spaced states instead of every jump.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Initial positions, comma separated (default: all at 0).
    #[arg(long)]
    init: Option<String>,
    #[arg(long, default_value_t = sim::DEFAULT_MAX_EVENTS)]
    max_events: u64,
    /// Write a recurrence diagnosis instead of the trajectory.
    #[arg(long)]
    diagnose: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DampingArg {
    None,
    Auto,
    Half,
}

#[derive(Debug, Args)]
struct FixedpointArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = DampingArg::None)]
    damping: DampingArg,
    /// Starting weights on 0, 1, 2, ... (default: point mass at 0).
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriticalMode {
    /// Root of the N-particle Jackson stability condition.
    Conjectured,
    /// Large-N limit of the conjectured values.
    Limit,
    /// Threshold of the continuum gap model, 2δN/(N−1).
    Continuum,
    /// No stationary law below 2δ, one above 4δ (nonlinear process).
    Bounds,
    /// Transience below (1+ε_N)2δ, ergodicity above 12δ+8δ².
    Particle,
}

#[derive(Debug, Args)]
struct CriticalArgs {
    /// Particle counts, `a,b,c` or `start:stop:step`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = CriticalMode::Conjectured)]
    mode: CriticalMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Pi2Args {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    lambda: f64,
    /// Bound on the mass left outside the written window.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CertificateArg {
    Ergodic,
    Transient,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    kind: CertificateArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    lambda: f64,
    /// Transience weight; searched when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Per-coordinate radius of the verified box (ergodic kind).
    #[arg(long, default_value_t = 30)]
    r#box: u64,
    /// Radius of the exceptional core (default: a third of the box).
    #[arg(long)]
    core: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out` from the config file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChaosArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    lambda: f64,
    /// Particle counts, `a,b,c` or `start:stop:step`.
    #[arg(long)]
    n: String,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial one-particle law as weights on 0, 1, 2, ... (default: point mass at 0).
    #[arg(long)]
    mu0: Option<String>,
    #[arg(long, default_value_t = sim::DEFAULT_MAX_EVENTS)]
    max_events: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> irw::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn weights(text: &str, key: &str) -> irw::Result<ProbabilityVector> {
    ProbabilityVector::from_weights(&parse_real_list(key, text)?)
}

fn run(cli: Cli) -> irw::Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let model = a.model.resolve()?;
            let init = match &a.init {
                Some(s) => ParticleState(
                    parse_integer_list("init", s)?
                        .into_iter()
                        .map(|v| v as u64)
                        .collect(),
                ),
                None => ParticleState::zeros(model.n_particles),
            };
            if a.diagnose {
                let thresholds = ProbeThresholds {
                    max_events: a.max_events,
                    ..Default::default()
                };
                let d = sim::recurrence_probe(&model, &init, a.horizon, &thresholds, a.seed)?;
                report::write_diagnosis(output(&a.out)?, &[(model, d)])
            } else {
                let opts = SimulateOptions {
                    snapshots: a.snapshots,
                    max_events: a.max_events,
                };
                match sim::simulate(&init, &model, a.horizon, a.seed, &opts) {
                    Ok(path) => report::write_trajectory(output(&a.out)?, &model, &path),
                    Err(Error::BudgetExceeded {
                        events,
                        reached,
                        partial: Some(path),
                    }) => {
                        // keep what was simulated, then report the overrun
                        report::write_trajectory(output(&a.out)?, &model, &path)?;
                        Err(Error::BudgetExceeded {
                            events,
                            reached,
                            partial: None,
                        })
                    }
                    Err(e) => Err(e),
                }
            }
        }
        Command::Fixedpoint(a) => {
            let mu0 = match &a.init {
                Some(s) => weights(s, "init")?,
                None => ProbabilityVector::point_mass(0),
            };
            let opts = FixedPointOptions {
                max_iter: a.max_iter,
                tolerance: a.tol,
                damping: match a.damping {
                    DampingArg::None => Damping::None,
                    DampingArg::Auto => Damping::Auto,
                    DampingArg::Half => Damping::Fixed(0.5),
                },
                ..Default::default()
            };
            let rep = gamma_fixed_point_with(a.delta, a.lambda, &mu0, &opts)?;
            report::write_fixed_point(output(&a.out)?, a.delta, a.lambda, &rep)
        }
        Command::Critical(a) => critical(a),
        Command::Pi2(a) => {
            let law = pi2(a.delta, a.lambda, a.tol)?;
            report::write_pi2(output(&a.out)?, a.delta, a.lambda, &law)
        }
        Command::Certify(a) => {
            let cert = match a.kind {
                CertificateArg::Ergodic => {
                    let opts = ErgodicSearchOptions {
                        box_radius: a.r#box,
                        core: a.core,
                        ..Default::default()
                    };
                    ergodic_certificate_search(a.n, a.delta, a.lambda, &opts)?
                }
                CertificateArg::Transient => {
                    let eps = match a.epsilon {
                        Some(e) => e,
                        None => epsilon_search(a.n, a.delta, a.lambda)?.ok_or_else(|| {
                            Error::NoCandidate(format!(
                                "no weight in [0, 3 lambda/(4N)] certifies transience at N={}, delta={}, lambda={}",
                                a.n, a.delta, a.lambda
                            ))
                        })?,
                    };
                    transience_certificate(a.n, a.delta, a.lambda, eps)?
                }
            };
            report::write_certificate(output(&a.out)?, &cert)
        }
        Command::Sweep(a) => {
            let kv = KeyValues::read(&a.config)?;
            let cfg = SweepConfig::from_config(&kv)?;
            let rows = run_sweep(&cfg)?;
            let out = a.out.or(cfg.out.clone());
            report::write_sweep(output(&out)?, cfg.seed, cfg.horizon, &rows)
        }
        Command::Chaos(a) => {
            let n_list = parse_integer_list("n", &a.n)?;
            let mu0 = match &a.mu0 {
                Some(s) => weights(s, "mu0")?,
                None => ProbabilityVector::point_mass(0),
            };
            let opts = ChaosOptions {
                max_events: a.max_events,
                ..Default::default()
            };
            let points = sim::chaos_distance(a.delta, a.lambda, &n_list, &mu0, a.horizon, a.replicates, a.seed, &opts)?;
            report::write_chaos(output(&a.out)?, a.delta, a.lambda, a.horizon, &points)
        }
    }
}

fn critical(a: CriticalArgs) -> irw::Result<()> {
    let n_list = match &a.n {
        Some(s) => parse_integer_list("n", s)?,
        None => Vec::new(),
    };
    let needs_n = matches!(a.mode, CriticalMode::Conjectured | CriticalMode::Continuum | CriticalMode::Particle);
    if needs_n && n_list.is_empty() {
        return Err(Error::InvalidInput("--n is required for this mode".into()));
    }
    let meta = [("delta", fmt_num(a.delta))];
    let out = output(&a.out)?;
    match a.mode {
        CriticalMode::Conjectured | CriticalMode::Continuum => {
            let f = if a.mode == CriticalMode::Conjectured {
                conjectured_critical_n
            } else {
                continuum_critical
            };
            let rows = n_list
                .iter()
                .map(|&n| Ok(vec![n.to_string(), fmt_num(f(n, a.delta)?)]))
                .collect::<irw::Result<Vec<_>>>()?;
            report::write_table(out, "critical", &meta, &["n", "lambda_critical"], rows)
        }
        CriticalMode::Limit => {
            let row = vec![fmt_num(conjectured_critical_limit(a.delta)?)];
            report::write_table(out, "critical", &meta, &["lambda_critical"], [row])
        }
        CriticalMode::Bounds => {
            let b = existence_bounds(a.delta)?;
            let row = vec![
                fmt_num(b.no_stationary_below),
                fmt_num(b.stationary_above),
                fmt_num(b.conjectured),
            ];
            report::write_table(
                out,
                "critical",
                &meta,
                &["no_stationary_below", "stationary_above", "conjectured"],
                [row],
            )
        }
        CriticalMode::Particle => {
            let d = a.delta;
            let rows = n_list
                .iter()
                .map(|&n| {
                    Ok(vec![
                        n.to_string(),
                        fmt_num((1.0 + epsilon_n(n, d)?) * 2.0 * d),
                        fmt_num(12.0 * d + 8.0 * d * d),
                        fmt_num(conjectured_critical_n(n, d)?),
                    ])
                })
                .collect::<irw::Result<Vec<_>>>()?;
            report::write_table(
                out,
                "critical",
                &meta,
                &["n", "transient_below", "ergodic_above", "conjectured"],
                rows,
            )
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("IRW_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("IRW_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_resource_exhaustion() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
