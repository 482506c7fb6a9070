//! Forward integration of the nonlinear master equation
//!
//! dμ(x)/dt = (1+δ)μ(x−1) − (1+δ)μ(x) − 1(x>0)(1+λμ[0,x))μ(x) + (1+λμ[0,x+1))μ(x+1)
//!
//! written in flux form on a finite window `0..=L`. Mass pushed out of the top
//! cell is parked in a tail accumulator, so total mass is conserved exactly up
//! to rounding and the accumulator is a certified bound on the escaped mass.

use crate::error::{Error, Result};
use crate::measure::ProbabilityVector;
use crate::model::check_rate_parameters;

/// Hard cap on the number of explicitly tracked states.
pub const MAX_STATES: usize = 1_000_000;

/// Integrator state. The last entry of `u` is the tail accumulator.
#[derive(Debug, Clone)]
pub struct LawEvolver {
    delta: f64,
    lambda: f64,
    tolerance: f64,
    u: Vec<f64>,
    time: f64,
    h: f64,
    steps: u64,
}

impl LawEvolver {
    pub fn new(mu0: &ProbabilityVector, delta: f64, lambda: f64, tolerance: f64) -> Result<Self> {
        check_rate_parameters(delta, lambda)?;
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tolerance}")));
        }
        let mut u = mu0.mass().to_vec();
        u.extend(std::iter::repeat_n(0.0, 16));
        u.push(mu0.tail_bound());
        Ok(Self {
            delta,
            lambda,
            tolerance,
            u,
            time: 0.0,
            h: max_step(delta, lambda),
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn current(&self) -> Result<ProbabilityVector> {
        let (window, tail) = self.u.split_at(self.u.len() - 1);
        let mut mass: Vec<f64> = window.iter().map(|m| m.max(0.0)).collect();
        while mass.len() > 1 && mass[mass.len() - 1] == 0.0 {
            mass.pop();
        }
        let tail = tail[0].max(0.0);
        let total = crate::measure::compensated_sum(mass.iter().copied()) + tail;
        mass.iter_mut().for_each(|m| *m /= total);
        ProbabilityVector::new(mass, tail / total)
    }

    /// Integrates up to absolute time `t`. The window is widened whenever the
    /// top cell carries enough mass that the escaped mass could exceed a tenth
    /// of the tolerance by time `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if !(t.is_finite() && t >= self.time) {
            return Err(Error::invalid(format!("cannot integrate from {} to {t}", self.time)));
        }
        let hmax = max_step(self.delta, self.lambda);
        let escape = self.tolerance / (10.0 * (1.0 + self.delta) * t.max(1.0));
        let local = self.tolerance / t.max(1.0);
        let mut scratch = Scratch::default();
        while self.time < t {
            self.widen(escape)?;
            let h = self.h.min(t - self.time).min(hmax);
            let coarse = ssp_rk3(&self.u, h, self.delta, self.lambda, &mut scratch);
            let half = ssp_rk3(&self.u, 0.5 * h, self.delta, self.lambda, &mut scratch);
            let fine = ssp_rk3(&half, 0.5 * h, self.delta, self.lambda, &mut scratch);
            let err = coarse
                .iter()
                .zip(&fine)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / 7.0;
            let target = local * h;
            if err <= target || h <= 1e-12 {
                self.u = fine;
                self.time = if t - self.time <= h { t } else { self.time + h };
                self.steps += 1;
                let grow = if err > 0.0 { 0.9 * (target / err).powf(0.25) } else { 2.0 };
                // only grow from a full step, not from the clipped last one
                if h >= self.h {
                    self.h = (h * grow.clamp(0.2, 2.0)).min(hmax);
                }
            } else {
                self.h = h * (0.9 * (target / err).powf(0.25)).clamp(0.1, 0.9);
            }
        }
        Ok(())
    }

    fn widen(&mut self, escape: f64) -> Result<()> {
        let top = self.u.len() - 2;
        if self.u[top] <= escape && self.u[top.saturating_sub(1)] <= escape {
            return Ok(());
        }
        let extra = (top / 4).max(16);
        if top + 1 + extra > MAX_STATES {
            return Err(Error::TruncationOverflow { cap: MAX_STATES });
        }
        let tail = self.u.pop().unwrap_or(0.0);
        self.u.extend(std::iter::repeat_n(0.0, extra));
        self.u.push(tail);
        Ok(())
    }
}

/// Positivity bound for forward Euler stages: `h · (total outflow rate) ≤ 1/2`.
fn max_step(delta: f64, lambda: f64) -> f64 {
    0.5 / (2.0 + delta + lambda)
}

#[derive(Default)]
struct Scratch {
    k: Vec<f64>,
}

/// Right-hand side in flux form; `u` includes the tail accumulator.
fn rhs(u: &[f64], delta: f64, lambda: f64, out: &mut Vec<f64>) {
    let top = u.len() - 2;
    out.clear();
    out.resize(u.len(), 0.0);
    let mut below = 0.0;
    for x in 0..=top {
        let up = (1.0 + delta) * u[x];
        out[x] -= up;
        out[x + 1] += up;
        if x > 0 {
            let down = (1.0 + lambda * below) * u[x];
            out[x] -= down;
            out[x - 1] += down;
        }
        below += u[x];
    }
}

fn ssp_rk3(u: &[f64], h: f64, delta: f64, lambda: f64, s: &mut Scratch) -> Vec<f64> {
    rhs(u, delta, lambda, &mut s.k);
    let u1: Vec<f64> = u.iter().zip(&s.k).map(|(a, k)| a + h * k).collect();
    rhs(&u1, delta, lambda, &mut s.k);
    let u2: Vec<f64> = u
        .iter()
        .zip(&u1)
        .zip(&s.k)
        .map(|((a, b), k)| 0.75 * a + 0.25 * (b + h * k))
        .collect();
    rhs(&u2, delta, lambda, &mut s.k);
    u.iter()
        .zip(&u2)
        .zip(&s.k)
        .map(|((a, b), k)| a / 3.0 + 2.0 / 3.0 * (b + h * k))
        .collect()
}

/// Law of the nonlinear process at time `horizon` started from `mu0`.
pub fn evolve_law(
    mu0: &ProbabilityVector,
    delta: f64,
    lambda: f64,
    horizon: f64,
    tolerance: f64,
) -> Result<ProbabilityVector> {
    let mut ev = LawEvolver::new(mu0, delta, lambda, tolerance)?;
    ev.advance_to(horizon)?;
    ev.current()
}

/// Largest absolute value of the master-equation right-hand side at `mu`.
/// Mass beyond the window is ignored, and the top cell leaks upward.
pub fn stationarity_residual(mu: &ProbabilityVector, delta: f64, lambda: f64) -> f64 {
    let mut u = mu.mass().to_vec();
    u.push(0.0);
    let mut out = Vec::new();
    rhs(&u, delta, lambda, &mut out);
    out[..out.len() - 1].iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_is_identity() {
        let mu = ProbabilityVector::point_mass(0);
        let out = evolve_law(&mu, 0.3, 1.0, 0.0, 1e-10).unwrap();
        assert_eq!(out, mu);
    }

    #[test]
    fn mass_is_conserved() {
        let mu = ProbabilityVector::uniform(3);
        let mut ev = LawEvolver::new(&mu, 0.5, 2.0, 1e-10).unwrap();
        for t in [0.5, 1.0, 3.0, 10.0] {
            ev.advance_to(t).unwrap();
            let law = ev.current().unwrap();
            let total = law.window_mass() + law.tail_bound();
            assert!((total - 1.0).abs() <= 1e-12);
            assert!(law.tail_bound() <= 1e-10);
            assert!(law.mass().iter().all(|m| *m >= 0.0));
        }
    }

    #[test]
    fn free_walk_mean_grows_without_interaction() {
        let mu = ProbabilityVector::point_mass(0);
        let early = evolve_law(&mu, 0.0, 0.0, 10.0, 1e-8).unwrap();
        let late = evolve_law(&mu, 0.0, 0.0, 100.0, 1e-8).unwrap();
        // reflected symmetric walk: mean grows like sqrt(t)
        assert!(late.mean() > 2.5 * early.mean());
        assert!(late.get(0) < early.get(0));
    }

    #[test]
    fn single_walker_matches_linear_chain_at_lambda_zero() {
        // λ = 0 decouples: compare the truncated linear chain solved by tiny Euler steps
        let mu = ProbabilityVector::point_mass(2);
        let law = evolve_law(&mu, 0.2, 0.0, 1.0, 1e-12).unwrap();
        let mut p = vec![0.0; 60];
        p[2] = 1.0;
        let dt = 1e-5;
        for _ in 0..100_000 {
            let mut d = vec![0.0; 60];
            for x in 0..59 {
                d[x] -= 1.2 * p[x];
                d[x + 1] += 1.2 * p[x];
                if x > 0 {
                    d[x] -= p[x];
                    d[x - 1] += p[x];
                }
            }
            p.iter_mut().zip(&d).for_each(|(a, b)| *a += dt * b);
        }
        for (x, px) in p.iter().enumerate().take(20) {
            assert!((law.get(x) - px).abs() < 1e-5, "x={x}");
        }
    }
}
