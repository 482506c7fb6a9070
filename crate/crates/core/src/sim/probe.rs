use std::fmt;

use crate::error::{Error, Result};
use crate::measure::ProbabilityVector;
use crate::model::{ModelSpec, ParticleState};
use crate::rng;

use super::engine::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    ErgodicLooking,
    TransientLooking,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ErgodicLooking => "ergodic-looking",
            Verdict::TransientLooking => "transient-looking",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeThresholds {
    /// Minimum least-squares slope of `min_i x_i(t)` for a transient verdict.
    pub slope: f64,
    /// Minimum t-statistic of that slope.
    pub t_stat: f64,
    /// Returns of the minimum to 0 needed for an ergodic verdict.
    pub returns: u64,
    /// Fraction of the horizon discarded before any statistic is collected.
    pub burn_in: f64,
    /// Evenly spaced samples of the minimum used for the slope fit.
    pub samples: usize,
    pub max_events: u64,
}

impl Default for ProbeThresholds {
    fn default() -> Self {
        Self {
            slope: 0.01,
            t_stat: 5.0,
            returns: 50,
            burn_in: 0.1,
            samples: 2000,
            max_events: super::DEFAULT_MAX_EVENTS,
        }
    }
}

impl ProbeThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::invalid("burn-in fraction must lie in [0, 1)"));
        }
        if self.samples < 3 {
            return Err(Error::invalid("need at least 3 slope samples"));
        }
        if !(self.slope.is_finite() && self.t_stat.is_finite()) {
            return Err(Error::invalid("thresholds must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceDiagnosis {
    pub verdict: Verdict,
    pub min_position_slope: f64,
    pub slope_t_stat: f64,
    /// Returns of `min_i x_i` to 0 after burn-in.
    pub returns: u64,
    /// Time-averaged one-particle marginal after burn-in.
    pub occupation: ProbabilityVector,
    pub events: u64,
    /// Time actually simulated; below the horizon when the budget ran out.
    pub reached: f64,
    pub budget_exhausted: bool,
}

/// Heuristic classification of a single run from `init` over `[0, horizon]`.
/// A run that exhausts its event budget is diagnosed on what was simulated.
pub fn recurrence_probe(
    model: &ModelSpec,
    init: &ParticleState,
    horizon: f64,
    thresholds: &ProbeThresholds,
    seed: u64,
) -> Result<RecurrenceDiagnosis> {
    thresholds.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    let mut engine = Engine::new(model, init)?;
    let mut rng = rng::stream(seed, &[]);
    let n = model.n_particles as f64;
    let burn = thresholds.burn_in * horizon;
    let k = thresholds.samples;
    let span = horizon - burn;

    let mut acc: Vec<f64> = Vec::new();
    let mut last: Vec<f64> = Vec::new();
    let integrate = |site: u64, occ_before: u32, t: f64, acc: &mut Vec<f64>, last: &mut Vec<f64>| {
        let s = site as usize;
        if s >= acc.len() {
            acc.resize(s * 2 + 2, 0.0);
            last.resize(s * 2 + 2, 0.0);
        }
        let from = last[s].max(burn);
        if t > from {
            acc[s] += occ_before as f64 * (t - from);
        }
        last[s] = t;
    };

    let mut sample_t = Vec::with_capacity(k);
    let mut sample_min = Vec::with_capacity(k);
    let mut returns = 0u64;
    let mut exhausted = false;

    // first stop at the burn-in time, then at the sample midpoints
    let stops = std::iter::once(burn)
        .chain((0..k).map(|j| burn + (j as f64 + 0.5) * span / k as f64))
        .chain(std::iter::once(horizon));
    let mut sampling = false;
    'outer: for stop in stops {
        loop {
            let min_before = engine.min_position();
            let Some(ev) = engine.advance(stop, &mut rng)? else {
                break;
            };
            let t = engine.time();
            if t >= burn {
                if min_before > 0 && engine.min_position() == 0 {
                    returns += 1;
                }
                integrate(ev.from, engine.occupancy(ev.from) + 1, t, &mut acc, &mut last);
                integrate(ev.to, engine.occupancy(ev.to) - 1, t, &mut acc, &mut last);
            }
            if engine.events() >= thresholds.max_events {
                exhausted = true;
                break 'outer;
            }
        }
        if sampling && sample_t.len() < k {
            sample_t.push(engine.time());
            sample_min.push(engine.min_position() as f64);
        }
        sampling = true;
    }

    let reached = engine.time();
    let top = engine.positions().iter().copied().max().unwrap_or(0) as usize;
    acc.resize(acc.len().max(top + 1), 0.0);
    last.resize(acc.len(), 0.0);
    for s in 0..acc.len() {
        let occ = engine.occupancy(s as u64);
        integrate(s as u64, occ, reached, &mut acc, &mut last);
    }
    let occupation = if reached > burn {
        while acc.len() > 1 && acc[acc.len() - 1] == 0.0 {
            acc.pop();
        }
        let weights: Vec<f64> = acc.iter().map(|a| a / (n * (reached - burn))).collect();
        ProbabilityVector::from_weights(&weights)?
    } else {
        crate::model::empirical_measure(&engine.state())?
    };

    let (slope, t_stat) = least_squares_slope(&sample_t, &sample_min);
    let verdict = if slope > thresholds.slope && t_stat > thresholds.t_stat {
        Verdict::TransientLooking
    } else if returns >= thresholds.returns {
        Verdict::ErgodicLooking
    } else {
        Verdict::Inconclusive
    };
    Ok(RecurrenceDiagnosis {
        verdict,
        min_position_slope: slope,
        slope_t_stat: t_stat,
        returns,
        occupation,
        events: engine.events(),
        reached,
        budget_exhausted: exhausted,
    })
}

/// Ordinary least-squares slope and its t-statistic.
fn least_squares_slope(t: &[f64], y: &[f64]) -> (f64, f64) {
    let m = t.len();
    if m < 3 {
        return (0.0, 0.0);
    }
    let mt = t.iter().sum::<f64>() / m as f64;
    let my = y.iter().sum::<f64>() / m as f64;
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    if sxx <= 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let rss: f64 = t
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - my - slope * (a - mt);
            r * r
        })
        .sum();
    let se = (rss / (m as f64 - 2.0) / sxx).sqrt();
    let t_stat = if se > 0.0 {
        slope / se
    } else if slope > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    (slope, t_stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_a_line() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|a| 2.0 * a + 1.0 + if (*a as i64) % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let (s, ts) = least_squares_slope(&t, &y);
        assert!((s - 2.0).abs() < 1e-3);
        assert!(ts > 100.0);
    }

    #[test]
    fn occupation_is_a_probability_vector_and_returns_counted() {
        let m = ModelSpec::small_jump(2, 0.0, 1.0).unwrap();
        let d = recurrence_probe(&m, &ParticleState::zeros(2), 2000.0, &ProbeThresholds::default(), 4)
            .unwrap();
        assert!(d.returns > 50);
        assert!((d.occupation.window_mass() - 1.0).abs() < 1e-12);
        assert_eq!(d.verdict, Verdict::ErgodicLooking);
    }
}
