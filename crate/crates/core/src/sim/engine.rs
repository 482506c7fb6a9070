use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParticleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Up,
    IntrinsicDown,
    Interaction,
}

/// One realised jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub particle: usize,
    pub from: u64,
    pub to: u64,
    pub kind: EventKind,
    /// Time elapsed since the previous realised jump (or since the last
    /// stopping time handed to [`Engine::advance`]).
    pub dwell: f64,
}

/// Event-driven simulator for one realisation of the particle system.
///
/// The aggregate rates need only three counters: the number of particles
/// away from zero, and the number `P` of unordered pairs sitting on different
/// sites, which equals the number of ordered pairs `(i, k)` with `x_k < x_i`.
/// The acting particle (or pair) is then drawn by rejection, and kernels with
/// φ < 1 are handled by thinning.
#[derive(Debug, Clone)]
pub struct Engine<'m> {
    model: &'m ModelSpec,
    pos: Vec<u64>,
    occ: Vec<u32>,
    positive: usize,
    spread_pairs: u64,
    min_site: u64,
    time: f64,
    events: u64,
    thinning: bool,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m ModelSpec, init: &ParticleState) -> Result<Self> {
        model.validate()?;
        init.check_against(model)?;
        let pos = init.positions().to_vec();
        let top = pos.iter().copied().max().unwrap_or(0) as usize;
        let mut occ = vec![0u32; top + 2];
        for &v in &pos {
            occ[v as usize] += 1;
        }
        let n = pos.len() as u64;
        let same: u64 = occ.iter().map(|&c| c as u64 * c as u64).sum();
        let min_site = pos.iter().copied().min().unwrap_or(0);
        Ok(Self {
            model,
            positive: pos.iter().filter(|&&v| v > 0).count(),
            spread_pairs: (n * n - same) / 2,
            min_site,
            pos,
            occ,
            time: 0.0,
            events: 0,
            thinning: !model.kernel.has_unit_phi(),
        })
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Realised jumps so far (thinned proposals are not counted).
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn positions(&self) -> &[u64] {
        &self.pos
    }

    pub fn state(&self) -> ParticleState {
        ParticleState(self.pos.clone())
    }

    pub fn occupancy(&self, site: u64) -> u32 {
        self.occ.get(site as usize).copied().unwrap_or(0)
    }

    pub fn min_position(&self) -> u64 {
        self.min_site
    }

    /// Ordered pairs `(i, k)` with `x_k < x_i`.
    pub fn lower_pairs(&self) -> u64 {
        self.spread_pairs
    }

    /// Total proposal rate in the current state.
    pub fn total_rate(&self) -> f64 {
        let n = self.pos.len() as f64;
        n * (1.0 + self.model.delta)
            + self.positive as f64
            + self.model.lambda * self.spread_pairs as f64 / n
    }

    /// Advances to the next jump, unless the clock passes `limit` first, in
    /// which case time stops at `limit` and `None` is returned. By the memoryless
    /// property this does not bias the path.
    pub fn advance<R: Rng + ?Sized>(&mut self, limit: f64, rng: &mut R) -> Result<Option<Event>> {
        let start = self.time;
        let n = self.pos.len();
        loop {
            let total = self.total_rate();
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Invariant(format!("total jump rate {total}")));
            }
            let dwell: f64 = rng.sample::<f64, _>(Exp1) / total;
            if self.time + dwell > limit {
                self.time = limit.max(self.time);
                return Ok(None);
            }
            self.time += dwell;

            let up = n as f64 * (1.0 + self.model.delta);
            let u = rng.random::<f64>() * total;
            let (i, to, kind) = if u < up || (u >= up + self.positive as f64 && self.spread_pairs == 0) {
                let i = rng.random_range(0..n);
                (i, self.pos[i] + 1, EventKind::Up)
            } else if u < up + self.positive as f64 {
                let i = loop {
                    let i = rng.random_range(0..n);
                    if self.pos[i] > 0 {
                        break i;
                    }
                };
                (i, self.pos[i] - 1, EventKind::IntrinsicDown)
            } else {
                let (i, k) = loop {
                    let i = rng.random_range(0..n);
                    let mut k = rng.random_range(0..n - 1);
                    if k >= i {
                        k += 1;
                    }
                    if self.pos[k] < self.pos[i] {
                        break (i, k);
                    }
                };
                let (xi, xk) = (self.pos[i], self.pos[k]);
                if self.thinning && rng.random::<f64>() >= self.model.kernel.phi(xi, xk) {
                    continue;
                }
                let size = self.model.kernel.psi(xi, xk);
                (i, xi.saturating_sub(size), EventKind::Interaction)
            };
            let from = self.pos[i];
            self.move_particle(i, to);
            self.events += 1;
            return Ok(Some(Event {
                particle: i,
                from,
                to,
                kind,
                dwell: self.time - start,
            }));
        }
    }

    fn move_particle(&mut self, i: usize, to: u64) {
        let from = self.pos[i];
        if to as usize >= self.occ.len() {
            self.occ.resize(to as usize * 2 + 2, 0);
        }
        let (f, t) = (from as usize, to as usize);
        // pairs involving i before and after the move
        self.spread_pairs = self.spread_pairs + (self.occ[f] as u64 - 1) - self.occ[t] as u64;
        self.occ[f] -= 1;
        self.occ[t] += 1;
        match (from > 0, to > 0) {
            (true, false) => self.positive -= 1,
            (false, true) => self.positive += 1,
            _ => {}
        }
        if to < self.min_site {
            self.min_site = to;
        } else if from == self.min_site && self.occ[f] == 0 {
            let mut m = f + 1;
            while self.occ[m] == 0 {
                m += 1;
            }
            self.min_site = m as u64;
        }
        self.pos[i] = to;
    }
}

/// One jump from `state`: the next state and the holding time.
pub fn step<R: Rng + ?Sized>(
    state: &ParticleState,
    model: &ModelSpec,
    rng: &mut R,
) -> Result<(ParticleState, f64)> {
    let mut engine = Engine::new(model, state)?;
    match engine.advance(f64::INFINITY, rng)? {
        Some(ev) => Ok((engine.state(), ev.dwell)),
        None => Err(Error::Invariant("no jump before infinite time".into())),
    }
}
