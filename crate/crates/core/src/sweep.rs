//! Phase-diagram sweeps over `(N, δ, λ)` grids.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::config::KeyValues;
use crate::critical::{conjectured_critical_n, continuum_critical};
use crate::error::{Error, Result};
use crate::lyapunov::epsilon_n;
use crate::model::{ModelSpec, ParticleState};
use crate::rng;
use crate::sim::{recurrence_probe, ProbeThresholds, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub horizon: f64,
    pub replicates: usize,
    pub seed: u64,
    pub thresholds: ProbeThresholds,
    pub out: Option<PathBuf>,
}

const KEYS: [&str; 14] = [
    "n",
    "delta",
    "lambda",
    "horizon",
    "replicates",
    "seed",
    "slope_threshold",
    "t_stat_threshold",
    "return_threshold",
    "burn_in",
    "samples",
    "max_events",
    "out",
    "kernel",
];

impl SweepConfig {
    /// Keys: `n`, `delta`, `lambda` (lists or ranges), `horizon`,
    /// `replicates` (default 1), `seed` (default 0), the probe thresholds
    /// `slope_threshold`, `t_stat_threshold`, `return_threshold`, `burn_in`,
    /// `samples`, `max_events`, and `out`. `kernel` is accepted only as
    /// `small_jump`.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(&KEYS)?;
        if let Some(k) = kv.raw("kernel") {
            if k != "small_jump" {
                return Err(Error::UnsupportedKernel(format!("sweeps use the small-jump kernel, got `{k}`")));
            }
        }
        let list = |key: &str| -> Result<Vec<f64>> {
            kv.real_list(key)?
                .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
        };
        let mut thresholds = ProbeThresholds::default();
        if let Some(v) = kv.scalar("slope_threshold")? {
            thresholds.slope = v;
        }
        if let Some(v) = kv.scalar("t_stat_threshold")? {
            thresholds.t_stat = v;
        }
        if let Some(v) = kv.scalar("return_threshold")? {
            thresholds.returns = v;
        }
        if let Some(v) = kv.scalar("burn_in")? {
            thresholds.burn_in = v;
        }
        if let Some(v) = kv.scalar("samples")? {
            thresholds.samples = v;
        }
        if let Some(v) = kv.scalar("max_events")? {
            thresholds.max_events = v;
        }
        let cfg = Self {
            n: kv
                .integer_list("n")?
                .ok_or_else(|| Error::Parse("missing key `n`".into()))?,
            delta: list("delta")?,
            lambda: list("lambda")?,
            horizon: kv.required_scalar("horizon")?,
            replicates: kv.scalar("replicates")?.unwrap_or(1),
            seed: kv.scalar("seed")?.unwrap_or(0),
            thresholds,
            out: kv.raw("out").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.delta.is_empty() || self.lambda.is_empty() {
            return Err(Error::invalid("sweep grids must be nonempty"));
        }
        if self.n.iter().any(|&n| n < 2) {
            return Err(Error::invalid("every N must be at least 2"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        self.thresholds.validate()?;
        for &d in &self.delta {
            for &l in &self.lambda {
                crate::model::check_rate_parameters(d, l)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub delta: f64,
    pub lambda: f64,
    /// Verdict held by a strict majority of replicates, else inconclusive.
    pub verdict: Verdict,
    pub ergodic_votes: usize,
    pub transient_votes: usize,
    pub replicates: usize,
    pub mean_slope: f64,
    pub mean_returns: f64,
    /// `(1 + ε_N) 2δ`.
    pub bound_transient_below: f64,
    /// `12δ + 8δ²`.
    pub bound_ergodic_above: f64,
    pub conjectured_critical: f64,
    pub continuum_critical: f64,
    /// Budget exhaustion and similar per-point remarks.
    pub note: String,
}

/// Runs every grid point from the all-zero state. Points and replicates run
/// in parallel; replicate `r` of point `(n, i, j)` uses the stream
/// `(seed; n, i, j, r)`. Rows come back sorted by `(n, δ, λ)`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for &n in &cfg.n {
        for (i, &d) in cfg.delta.iter().enumerate() {
            for (j, &l) in cfg.lambda.iter().enumerate() {
                points.push((n, i, d, j, l));
            }
        }
    }
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(n, i, delta, j, lambda)| sweep_point(cfg, n, i, delta, j, lambda))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| {
        (a.n, a.delta, a.lambda)
            .partial_cmp(&(b.n, b.delta, b.lambda))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(rows)
}

fn sweep_point(cfg: &SweepConfig, n: usize, i: usize, delta: f64, j: usize, lambda: f64) -> Result<SweepRow> {
    let model = ModelSpec::small_jump(n, delta, lambda)?;
    let init = ParticleState::zeros(n);
    let diags: Vec<_> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = rng::stream_id(cfg.seed, &[n as u64, i as u64, j as u64, r as u64]);
            recurrence_probe(&model, &init, cfg.horizon, &cfg.thresholds, seed)
        })
        .collect::<Result<_>>()?;
    let votes = |v: Verdict| diags.iter().filter(|d| d.verdict == v).count();
    let (ergodic_votes, transient_votes) = (votes(Verdict::ErgodicLooking), votes(Verdict::TransientLooking));
    let verdict = if 2 * ergodic_votes > cfg.replicates {
        Verdict::ErgodicLooking
    } else if 2 * transient_votes > cfg.replicates {
        Verdict::TransientLooking
    } else {
        Verdict::Inconclusive
    };
    let reps = cfg.replicates as f64;
    let exhausted = diags.iter().filter(|d| d.budget_exhausted).count();
    let note = if exhausted > 0 {
        format!("budget exhausted in {exhausted}/{} replicates", cfg.replicates)
    } else {
        String::new()
    };
    Ok(SweepRow {
        n,
        delta,
        lambda,
        verdict,
        ergodic_votes,
        transient_votes,
        replicates: cfg.replicates,
        mean_slope: diags.iter().map(|d| d.min_position_slope).sum::<f64>() / reps,
        mean_returns: diags.iter().map(|d| d.returns as f64).sum::<f64>() / reps,
        bound_transient_below: (1.0 + epsilon_n(n, delta)?) * 2.0 * delta,
        bound_ergodic_above: 12.0 * delta + 8.0 * delta * delta,
        conjectured_critical: conjectured_critical_n(n, delta)?,
        continuum_critical: continuum_critical(n, delta)?,
        note,
    })
}
