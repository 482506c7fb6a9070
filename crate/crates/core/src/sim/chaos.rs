use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::ProbabilityVector;
use crate::model::{ModelSpec, ParticleState};
use crate::nonlinear::evolve_law;
use crate::rng;

use super::engine::Engine;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosOptions {
    pub max_events: u64,
    /// Accuracy of the reference law from the master equation.
    pub tolerance: f64,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        Self {
            max_events: super::DEFAULT_MAX_EVENTS,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosPoint {
    pub n: usize,
    /// Total variation between the replicate-averaged empirical marginal at
    /// the horizon and the nonlinear law at the horizon.
    pub tv: f64,
    /// Monte Carlo standard error of `tv`, from the linearised estimator.
    pub std_error: f64,
}

/// Distance between the `N`-particle one-particle marginal and the nonlinear
/// law at time `horizon`, for each `N` in `n_list`. Positions start i.i.d.
/// from `mu0` and the kernel is small-jump.
#[allow(clippy::too_many_arguments)]
pub fn chaos_distance(
    delta: f64,
    lambda: f64,
    n_list: &[usize],
    mu0: &ProbabilityVector,
    horizon: f64,
    replicates: usize,
    seed: u64,
    options: &ChaosOptions,
) -> Result<Vec<ChaosPoint>> {
    if n_list.is_empty() || n_list.iter().any(|&n| n < 2) {
        return Err(Error::invalid("every N must be at least 2"));
    }
    if replicates < 2 {
        return Err(Error::invalid("need at least two replicates"));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let reference = evolve_law(mu0, delta, lambda, horizon, options.tolerance)?;
    let initial = WeightedIndex::new(mu0.mass()).map_err(|e| Error::invalid(format!("mu0: {e}")))?;

    n_list
        .iter()
        .map(|&n| {
            let model = ModelSpec::small_jump(n, delta, lambda)?;
            let runs: Vec<Vec<f64>> = (0..replicates)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = rng::stream(seed, &[n as u64, rep as u64]);
                    let init = ParticleState((0..n).map(|_| initial.sample(&mut rng) as u64).collect());
                    let mut engine = Engine::new(&model, &init)?;
                    while engine.advance(horizon, &mut rng)?.is_some() {
                        if engine.events() >= options.max_events {
                            return Err(Error::BudgetExceeded {
                                events: options.max_events,
                                reached: engine.time(),
                                partial: None,
                            });
                        }
                    }
                    let mut hist = Vec::new();
                    for &x in engine.positions() {
                        let x = x as usize;
                        if x >= hist.len() {
                            hist.resize(x + 1, 0.0);
                        }
                        hist[x] += 1.0 / n as f64;
                    }
                    Ok(hist)
                })
                .collect::<Result<_>>()?;
            Ok(distance_with_error(&runs, &reference))
        })
        .collect::<Result<Vec<_>>>()
        .map(|tvs| {
            n_list
                .iter()
                .zip(tvs)
                .map(|(&n, (tv, std_error))| ChaosPoint { n, tv, std_error })
                .collect()
        })
}

fn distance_with_error(runs: &[Vec<f64>], reference: &ProbabilityVector) -> (f64, f64) {
    let r = runs.len() as f64;
    let len = runs
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
        .max(reference.mass().len());
    let mut mean = vec![0.0; len];
    for run in runs {
        for (m, p) in mean.iter_mut().zip(run) {
            *m += p / r;
        }
    }
    let sign: Vec<f64> = (0..len)
        .map(|x| (mean[x] - reference.get(x)).signum())
        .collect();
    let tv = 0.5 * ((0..len).map(|x| (mean[x] - reference.get(x)).abs()).sum::<f64>() + reference.tail_bound());
    // per-replicate value of the linearised functional
    let f: Vec<f64> = runs
        .iter()
        .map(|run| 0.5 * run.iter().zip(&sign).map(|(p, s)| s * p).sum::<f64>())
        .collect();
    let fm = f.iter().sum::<f64>() / r;
    let var = f.iter().map(|v| (v - fm).powi(2)).sum::<f64>() / (r - 1.0);
    (tv, (var / r).sqrt())
}
