//! Gap coordinates and the exact stationary law for two particles.
//!
//! `g_1` is the lowest position and `g_i` the distance between the `(i−1)`-th
//! and `i`-th order statistics. For two particles the gap process is a
//! reflected walk in the quadrant with a product-form stationary law.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{check_rate_parameters, ParticleState};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GapState(pub Vec<u64>);

impl GapState {
    pub fn gaps(&self) -> &[u64] {
        &self.0
    }
}

pub fn to_gaps(state: &ParticleState) -> GapState {
    let mut sorted = state.positions().to_vec();
    sorted.sort_unstable();
    let mut prev = 0;
    GapState(
        sorted
            .into_iter()
            .map(|x| {
                let g = x - prev;
                prev = x;
                g
            })
            .collect(),
    )
}

/// Sorted positions with the given gaps.
pub fn from_gaps(g: &GapState) -> ParticleState {
    let mut acc = 0u64;
    ParticleState(
        g.gaps()
            .iter()
            .map(|&d| {
                acc += d;
                acc
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapTransition {
    pub target: GapState,
    pub rate: f64,
}

/// Jump rates of the two-particle gap process.
pub fn gap_rates_2(g: &GapState, delta: f64, lambda: f64) -> Result<Vec<GapTransition>> {
    check_rate_parameters(delta, lambda)?;
    let &[g1, g2] = g.gaps() else {
        return Err(Error::invalid(format!(
            "gap rates are tabulated for two particles, got {}",
            g.gaps().len()
        )));
    };
    let t = |a: u64, b: u64, rate: f64| GapTransition {
        target: GapState(vec![a, b]),
        rate,
    };
    let up = 1.0 + delta;
    let pull = 1.0 + 0.5 * lambda;
    Ok(match (g1 > 0, g2 > 0) {
        (true, true) => vec![
            t(g1 + 1, g2 - 1, up),
            t(g1, g2 - 1, pull),
            t(g1 - 1, g2 + 1, 1.0),
            t(g1, g2 + 1, up),
        ],
        (false, true) => vec![t(1, g2 - 1, up), t(0, g2 - 1, pull), t(0, g2 + 1, up)],
        (true, false) => vec![t(g1 - 1, 1, 2.0), t(g1, 1, 2.0 * up)],
        (false, false) => vec![t(0, 1, 2.0 * up)],
    })
}

/// Stationary law of the two-particle gap process on a finite window, with
/// the normalising constant obtained numerically.
///
/// The law factorises as `C · r^x · b(y)` with `r = (1+δ)²/(1+λ/2)`,
/// `b(0) = 1/2` and `b(y) = q^y` for `y ≥ 1`, `q = (1+δ)/(1+λ/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLaw {
    width: usize,
    height: usize,
    mass: Vec<f64>,
    tail_bound: f64,
    c_numeric: f64,
    r: f64,
    q: f64,
}

impl GridLaw {
    /// Window is `0..width` × `0..height`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Mass at `(x, y)`, zero outside the window.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        if x < self.width && y < self.height {
            self.mass[x * self.height + y]
        } else {
            0.0
        }
    }

    /// Exact value of the law anywhere in the quadrant.
    pub fn density(&self, x: u64, y: u64) -> f64 {
        let by = if y == 0 { 0.5 } else { self.q.powf(y as f64) };
        self.c_numeric * self.r.powf(x as f64) * by
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// The constant `C` with `π(0, 0) = C/2`.
    pub fn c_numeric(&self) -> f64 {
        self.c_numeric
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.width).flat_map(move |x| (0..self.height).map(move |y| (x, y, self.get(x, y))))
    }

    pub fn window_mass(&self) -> f64 {
        crate::measure::compensated_sum(self.mass.iter().copied())
    }

    pub fn x_marginal(&self, x: usize) -> f64 {
        (0..self.height).map(|y| self.get(x, y)).sum()
    }

    pub fn y_marginal(&self, y: usize) -> f64 {
        (0..self.width).map(|x| self.get(x, y)).sum()
    }

    /// Largest `|Σ_s π(s) Q(s, t)|` over window states `t`, with π evaluated
    /// exactly (including outside the window).
    pub fn stationary_residual(&self, delta: f64, lambda: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in 0..self.width as u64 {
            for y in 0..self.height as u64 {
                let mut flow = 0.0;
                let here = GapState(vec![x, y]);
                let out: f64 = gap_rates_2(&here, delta, lambda)?.iter().map(|t| t.rate).sum();
                flow -= self.density(x, y) * out;
                for (sx, sy) in neighbours(x, y) {
                    let src = GapState(vec![sx, sy]);
                    for t in gap_rates_2(&src, delta, lambda)? {
                        if t.target == here {
                            flow += self.density(sx, sy) * t.rate;
                        }
                    }
                }
                worst = worst.max(flow.abs());
            }
        }
        Ok(worst)
    }
}

fn neighbours(x: u64, y: u64) -> impl Iterator<Item = (u64, u64)> {
    let cands = [
        (x as i64 - 1, y as i64 + 1),
        (x as i64, y as i64 + 1),
        (x as i64 + 1, y as i64 - 1),
        (x as i64, y as i64 - 1),
    ];
    cands
        .into_iter()
        .filter(|&(a, b)| a >= 0 && b >= 0)
        .map(|(a, b)| (a as u64, b as u64))
}

/// Exact stationary law of the two-particle gaps, truncated so that the
/// mass outside the window is at most `tolerance`.
pub fn pi2(delta: f64, lambda: f64, tolerance: f64) -> Result<GridLaw> {
    check_rate_parameters(delta, lambda)?;
    let threshold = 2.0 * delta * delta + 4.0 * delta;
    if lambda <= threshold {
        return Err(Error::NonErgodic(format!(
            "two-particle gaps need lambda > 2 delta^2 + 4 delta = {threshold}"
        )));
    }
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::invalid(format!("tolerance must lie in (0,1), got {tolerance}")));
    }
    let pull = 1.0 + 0.5 * lambda;
    let r = (1.0 + delta).powi(2) / pull;
    let q = (1.0 + delta) / pull;
    // split the tolerance between the two directions; marginal tails are
    // r^W and a multiple of q^H
    let width = ((0.5 * tolerance).ln() / r.ln()).ceil().max(1.0) as usize + 1;
    let height = ((0.5 * tolerance * 0.5).ln() / q.ln()).ceil().max(1.0) as usize + 1;
    if width.saturating_mul(height) > 50_000_000 {
        return Err(Error::TruncationOverflow { cap: 50_000_000 });
    }
    let bx: Vec<f64> = (0..width).map(|x| r.powi(x as i32)).collect();
    let by: Vec<f64> = (0..height)
        .map(|y| if y == 0 { 0.5 } else { q.powi(y as i32) })
        .collect();
    // remaining weight beyond the window in each factor, in closed form
    let sx_full = 1.0 / (1.0 - r);
    let sy_full = 0.5 + q / (1.0 - q);
    let sx_win: f64 = bx.iter().sum();
    let sy_win: f64 = by.iter().sum();
    let window = sx_win * sy_win;
    let outside = (sx_full * sy_full - window).max(0.0);
    let c_numeric = 1.0 / (window + outside);
    let mut mass = Vec::with_capacity(width * height);
    for &a in &bx {
        for &b in &by {
            mass.push(c_numeric * a * b);
        }
    }
    Ok(GridLaw {
        width,
        height,
        mass,
        tail_bound: outside * c_numeric,
        c_numeric,
        r,
        q,
    })
}

/// Values of `C` obtained by reading the ambiguous factor `(λ/2 + δ2)` in the
/// printed closed form as `λ/2 + 2δ`, `λ/2 + δ²` and `λ/2 + δ + 2`. Only a
/// diagnostic; [`pi2`] normalises numerically.
pub fn printed_c_candidates(delta: f64, lambda: f64) -> [(&'static str, f64); 3] {
    let h = 0.5 * lambda;
    let numerator = 2.0 * (h - delta) * (h - 2.0 * delta - delta * delta);
    let c = |factor: f64| numerator / (factor * (h + 1.0));
    [
        ("lambda/2+2*delta", c(h + 2.0 * delta)),
        ("lambda/2+delta^2", c(h + delta * delta)),
        ("lambda/2+delta+2", c(h + delta + 2.0)),
    ]
}

/// Time-weighted occupation of a direct simulation of the two-particle gap
/// process, run for `events` jumps from `(0, 0)`.
pub fn simulate_gaps_2(
    delta: f64,
    lambda: f64,
    events: u64,
    seed: u64,
) -> Result<std::collections::BTreeMap<(u64, u64), f64>> {
    let mut rng = rng::stream(seed, &[2]);
    let mut g = GapState(vec![0, 0]);
    let mut occupation = std::collections::BTreeMap::new();
    let mut total_time = 0.0;
    for _ in 0..events {
        let ts = gap_rates_2(&g, delta, lambda)?;
        let rate: f64 = ts.iter().map(|t| t.rate).sum();
        let dwell = rng.sample::<f64, _>(Exp1) / rate;
        *occupation.entry((g.0[0], g.0[1])).or_insert(0.0) += dwell;
        total_time += dwell;
        let mut u = rng.random::<f64>() * rate;
        let mut next = &ts[ts.len() - 1];
        for t in &ts {
            if u < t.rate {
                next = t;
                break;
            }
            u -= t.rate;
        }
        g = next.target.clone();
    }
    occupation.values_mut().for_each(|v| *v /= total_time);
    Ok(occupation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_of_unsorted_state() {
        assert_eq!(to_gaps(&ParticleState(vec![3, 0, 5])).0, vec![0, 3, 2]);
        assert_eq!(from_gaps(&GapState(vec![0, 0, 0])).0, vec![0, 0, 0]);
        assert_eq!(from_gaps(&GapState(vec![0, 3, 2])).0, vec![0, 3, 5]);
    }

    #[test]
    fn interior_rate_table() {
        let ts = gap_rates_2(&GapState(vec![2, 3]), 0.0, 2.0).unwrap();
        let rate = |a, b| {
            ts.iter()
                .find(|t| t.target.0 == vec![a, b])
                .map(|t| t.rate)
                .unwrap()
        };
        assert_eq!(ts.len(), 4);
        assert_eq!(rate(3, 2), 1.0);
        assert_eq!(rate(2, 2), 2.0);
        assert_eq!(rate(1, 4), 1.0);
        assert_eq!(rate(2, 4), 1.0);
    }

    #[test]
    fn corner_rate() {
        let ts = gap_rates_2(&GapState(vec![0, 0]), 0.0, 2.0).unwrap();
        assert_eq!(ts, vec![GapTransition { target: GapState(vec![0, 1]), rate: 2.0 }]);
        assert!(gap_rates_2(&GapState(vec![0, 0, 0]), 0.0, 2.0).is_err());
    }

    #[test]
    fn pi2_corner_ratio_and_normalisation() {
        let law = pi2(0.0, 2.0, 1e-13).unwrap();
        // corner carries C/2; at these rates q = 1/2, so (0,1) carries C/2 too
        assert!((law.get(0, 0) - law.c_numeric() / 2.0).abs() < 1e-15);
        assert!((law.get(0, 0) / law.get(0, 1) - 1.0).abs() < 1e-12);
        let total = law.window_mass() + law.tail_bound();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(law.tail_bound() <= 1e-13);
    }

    #[test]
    fn pi2_requires_ergodicity() {
        assert!(matches!(pi2(1.0, 6.0, 1e-12), Err(Error::NonErgodic(_))));
    }

    #[test]
    fn pi2_is_stationary_and_independent() {
        let (d, l) = (0.5, 4.0);
        let law = pi2(d, l, 1e-12).unwrap();
        assert!(law.stationary_residual(d, l).unwrap() <= 1e-10);
        for x in 1..6 {
            for y in 1..6 {
                let joint = law.density(x, y);
                let prod = law.x_marginal(x as usize) * law.y_marginal(y as usize)
                    / (law.window_mass() + law.tail_bound());
                assert!((joint - prod).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn printed_constant_candidates_are_finite() {
        for (_, c) in printed_c_candidates(0.5, 4.0) {
            assert!(c.is_finite());
        }
    }
}
