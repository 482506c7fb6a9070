//! Exact continuous-time simulation of the particle system.

mod chaos;
mod coupled;
mod engine;
mod probe;

pub use chaos::{chaos_distance, ChaosOptions, ChaosPoint};
pub use coupled::{coupled_domination, CouplingReport};
pub use engine::{step, Engine, Event, EventKind};
pub use probe::{recurrence_probe, ProbeThresholds, RecurrenceDiagnosis, Verdict};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParticleState};
use crate::rng;

/// Default cap on realised jumps per run.
pub const DEFAULT_MAX_EVENTS: u64 = 20_000_000;

/// A recorded path: `times[k]` with the state `positions[k*N..(k+1)*N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    times: Vec<f64>,
    positions: Vec<u64>,
    horizon: f64,
}

impl Trajectory {
    fn new(init: &ParticleState) -> Self {
        Self {
            n: init.len(),
            times: vec![0.0],
            positions: init.positions().to_vec(),
            horizon: 0.0,
        }
    }

    fn push(&mut self, t: f64, x: &[u64]) {
        self.times.push(t);
        self.positions.extend_from_slice(x);
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    /// Number of recorded states.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[u64] {
        &self.positions[k * self.n..(k + 1) * self.n]
    }

    pub fn final_state(&self) -> &[u64] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[u64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.positions.chunks_exact(self.n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    /// Record the state on `K + 1` evenly spaced times instead of every jump.
    pub snapshots: Option<usize>,
    pub max_events: u64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            snapshots: None,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

/// Simulates on `[0, horizon]`. Running out of events returns
/// [`Error::BudgetExceeded`] with the path recorded so far.
pub fn simulate(
    init: &ParticleState,
    model: &ModelSpec,
    horizon: f64,
    seed: u64,
    options: &SimulateOptions,
) -> Result<Trajectory> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    if options.snapshots == Some(0) {
        return Err(Error::invalid("snapshot count must be positive"));
    }
    let mut engine = Engine::new(model, init)?;
    let mut rng = rng::stream(seed, &[]);
    let mut path = Trajectory::new(init);
    let budget_error = |engine: &Engine, mut path: Trajectory| {
        path.horizon = engine.time();
        Error::BudgetExceeded {
            events: options.max_events,
            reached: engine.time(),
            partial: Some(Box::new(path)),
        }
    };

    match options.snapshots {
        None => {
            while engine.advance(horizon, &mut rng)?.is_some() {
                path.push(engine.time(), engine.positions());
                if engine.events() >= options.max_events && engine.time() < horizon {
                    return Err(budget_error(&engine, path));
                }
            }
        }
        Some(k) => {
            for j in 1..=k {
                let t = horizon * j as f64 / k as f64;
                while engine.advance(t, &mut rng)?.is_some() {
                    if engine.events() >= options.max_events {
                        return Err(budget_error(&engine, path));
                    }
                }
                if horizon > 0.0 {
                    path.push(t, engine.positions());
                }
            }
        }
    }
    path.horizon = horizon;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::jump_rates;

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let m = ModelSpec::small_jump(3, 0.5, 1.0).unwrap();
        let init = ParticleState(vec![1, 0, 2]);
        let tr = simulate(&init, &m, 0.0, 9, &SimulateOptions::default()).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.state(0), &[1, 0, 2]);
    }

    #[test]
    fn path_is_a_chain_of_transitions() {
        let m = ModelSpec::new(4, 0.2, 3.0, crate::model::Kernel::JumpToLower).unwrap();
        let tr = simulate(&ParticleState(vec![0, 3, 5, 5]), &m, 20.0, 3, &SimulateOptions::default())
            .unwrap();
        assert!(tr.len() > 10);
        for k in 1..tr.len() {
            assert!(tr.times()[k] > tr.times()[k - 1]);
            let prev = ParticleState(tr.state(k - 1).to_vec());
            let next = tr.state(k);
            let ts = jump_rates(&prev, &m).unwrap();
            assert!(ts.iter().any(|t| t.target.positions() == next));
        }
    }

    #[test]
    fn identical_seeds_give_identical_paths() {
        let m = ModelSpec::small_jump(5, 0.1, 1.5).unwrap();
        let init = ParticleState::zeros(5);
        let a = simulate(&init, &m, 10.0, 42, &SimulateOptions::default()).unwrap();
        let b = simulate(&init, &m, 10.0, 42, &SimulateOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = simulate(&init, &m, 10.0, 43, &SimulateOptions::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn snapshots_sit_on_the_grid() {
        let m = ModelSpec::small_jump(3, 0.1, 1.0).unwrap();
        let opts = SimulateOptions {
            snapshots: Some(8),
            ..Default::default()
        };
        let tr = simulate(&ParticleState::zeros(3), &m, 4.0, 1, &opts).unwrap();
        assert_eq!(tr.len(), 9);
        assert_eq!(tr.times()[8], 4.0);
        assert_eq!(tr.times()[2], 1.0);
    }

    #[test]
    fn budget_overrun_carries_partial_path() {
        let m = ModelSpec::small_jump(3, 0.1, 1.0).unwrap();
        let opts = SimulateOptions {
            max_events: 100,
            ..Default::default()
        };
        match simulate(&ParticleState::zeros(3), &m, 1e6, 1, &opts) {
            Err(Error::BudgetExceeded { partial: Some(p), events, .. }) => {
                assert_eq!(events, 100);
                assert_eq!(p.len(), 101);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn single_walker_drifts_at_delta() {
        let m = ModelSpec::small_jump(1, 0.5, 7.0).unwrap();
        let horizon = 20_000.0;
        let opts = SimulateOptions {
            snapshots: Some(1),
            ..Default::default()
        };
        let tr = simulate(&ParticleState::zeros(1), &m, horizon, 11, &opts).unwrap();
        let speed = tr.final_state()[0] as f64 / horizon;
        assert!((speed - 0.5).abs() < 0.05, "speed {speed}");
    }
}
