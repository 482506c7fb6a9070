//! Lyapunov functionals for the small-jump system.
//!
//! Ergodic side: `V = ψ φ` with `ψ(x) = (1/N) Σ e^{α x_i}` and
//! `φ(x) = e^{(β/N) η̄(x)}`, where `η̄` is the tallest pile. A finite-box
//! search looks for `α, β` with `LV ≤ −γV + H`.
//!
//! Transient side: `f_ε(x) = Σ x_i + ε min_i x_i`. Its drift is bounded
//! below by finitely many region values, so checking their signs is exact.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_rate_parameters, jump_rates, ModelSpec, ParticleState, TransitionLabel};

/// Largest number of occupants of a single site.
pub fn pile_height(x: &[u64]) -> usize {
    site_counts(x).values().copied().max().unwrap_or(0) as usize
}

fn site_counts(x: &[u64]) -> BTreeMap<u64, u32> {
    let mut counts = BTreeMap::new();
    for &v in x {
        *counts.entry(v).or_insert(0u32) += 1;
    }
    counts
}

/// `K_N(x) = (1/N) Σ_i μ_N[0, x_i)`, the mean fraction of particles strictly
/// below a particle.
pub fn interaction_weight(x: &[u64]) -> f64 {
    let n = x.len() as f64;
    let mut sorted = x.to_vec();
    sorted.sort_unstable();
    let below: usize = x.iter().map(|&v| sorted.partition_point(|&w| w < v)).sum();
    below as f64 / (n * n)
}

/// `(1/N) Σ_i e^{α x_i} μ_N[0, x_i)`.
pub fn weighted_interaction(x: &[u64], alpha: f64) -> f64 {
    let n = x.len() as f64;
    let mut sorted = x.to_vec();
    sorted.sort_unstable();
    x.iter()
        .map(|&v| (alpha * v as f64).exp() * sorted.partition_point(|&w| w < v) as f64 / n)
        .sum::<f64>()
        / n
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `ln ψ(x)`.
pub fn log_psi(x: &[u64], alpha: f64) -> f64 {
    log_sum_exp(x.iter().map(|&v| alpha * v as f64)) - (x.len() as f64).ln()
}

/// `ln V(x)`, safe for large `α max_i x_i`.
pub fn log_v(x: &[u64], alpha: f64, beta: f64) -> f64 {
    log_psi(x, alpha) + beta * pile_height(x) as f64 / x.len() as f64
}

pub fn eval_v(x: &[u64], alpha: f64, beta: f64) -> f64 {
    log_v(x, alpha, beta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Every particle on its own site.
    Spread,
    /// A pile holding more than half the particles.
    TallPile,
    /// Some sharing, but no pile above half.
    ShortPiles,
}

impl Region {
    pub fn of(x: &[u64]) -> Self {
        let h = pile_height(x);
        if 2 * h > x.len() {
            Region::TallPile
        } else if h <= 1 {
            Region::Spread
        } else {
            Region::ShortPiles
        }
    }
}

/// Drift of `V` at one state. Ratios are relative to `V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEvaluation {
    pub state: ParticleState,
    pub log_v: f64,
    pub value_v: f64,
    /// `LV(x)`.
    pub drift: f64,
    /// `LV / V` summed transition by transition.
    pub drift_ratio: f64,
    /// `(ψLφ + φLψ + Γ(ψ, φ)) / V`.
    pub decomposed_ratio: f64,
    pub psi_l_phi_ratio: f64,
    pub phi_l_psi_ratio: f64,
    /// Carré du champ `Γ(ψ, φ) / V`.
    pub carre_ratio: f64,
    /// `Σ rate · |ΔV| / V`, the scale for comparing the two routes.
    pub scale: f64,
    pub region: Region,
    pub pile_height: usize,
}

impl DriftEvaluation {
    /// Disagreement of the two computations relative to [`Self::scale`].
    pub fn decomposition_gap(&self) -> f64 {
        let diff = (self.drift_ratio - self.decomposed_ratio).abs();
        if self.scale > 0.0 {
            diff / self.scale
        } else {
            diff
        }
    }
}

/// Pile height after moving one particle from `from` to `to`.
fn pile_after_move(counts: &BTreeMap<u64, u32>, height: u32, tallest: usize, from: u64, to: u64) -> u32 {
    let n_from = counts[&from];
    let n_to = counts.get(&to).copied().unwrap_or(0);
    let rest = if n_from == height && tallest == 1 {
        height - 1
    } else {
        height
    };
    rest.max(n_to + 1)
}

/// `LV` at `state` for a small-jump model, computed directly and through the
/// product rule.
pub fn drift_v(state: &ParticleState, model: &ModelSpec, alpha: f64, beta: f64) -> Result<DriftEvaluation> {
    if !model.kernel.is_small_jump() {
        return Err(Error::UnsupportedKernel(format!(
            "drift of V is implemented for the small-jump kernel, not {}",
            model.kernel
        )));
    }
    check_alpha_beta(alpha, beta)?;
    let x = state.positions();
    let n = x.len() as f64;
    let lv = log_v(x, alpha, beta);
    let log_n_psi = log_psi(x, alpha) + n.ln();
    let counts = site_counts(x);
    let height = counts.values().copied().max().unwrap_or(0);
    let tallest = counts.values().filter(|&&c| c == height).count();

    let (mut direct, mut scale) = (0.0, 0.0);
    let (mut l_phi, mut l_psi, mut carre) = (0.0, 0.0, 0.0);
    for t in jump_rates(state, model)? {
        let i = match t.label {
            TransitionLabel::Up(i) | TransitionLabel::IntrinsicDown(i) => i,
            TransitionLabel::InteractionDown { particle, .. } => particle,
        };
        let (from, to) = (x[i], t.target.positions()[i]);
        let ratio = (log_v(t.target.positions(), alpha, beta) - lv).exp_m1();
        direct += t.rate * ratio;
        scale += t.rate * ratio.abs();

        let d_psi = (alpha * from as f64 - log_n_psi).exp() * (alpha * (to as f64 - from as f64)).exp_m1();
        let new_height = pile_after_move(&counts, height, tallest, from, to);
        let d_phi = (beta / n * (new_height as f64 - height as f64)).exp_m1();
        l_psi += t.rate * d_psi;
        l_phi += t.rate * d_phi;
        carre += t.rate * d_psi * d_phi;
    }
    let value_v = lv.exp();
    Ok(DriftEvaluation {
        state: state.clone(),
        log_v: lv,
        value_v,
        drift: direct * value_v,
        drift_ratio: direct,
        decomposed_ratio: l_phi + l_psi + carre,
        psi_l_phi_ratio: l_phi,
        phi_l_psi_ratio: l_psi,
        carre_ratio: carre,
        scale,
        region: Region::of(x),
        pile_height: height as usize,
    })
}

/// `N(2 + λ + δ)(e^α − 1)(e^{β/N} − 1)`, a bound on `|Γ(ψ, φ)| / V`.
pub fn carre_bound(n: usize, delta: f64, lambda: f64, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    nf * (2.0 + lambda + delta) * alpha.exp_m1() * (beta / nf).exp_m1()
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha and beta must be positive, got {alpha}, {beta}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    ErgodicDrift,
    TransienceDrift,
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateKind::ErgodicDrift => "ergodic",
            CertificateKind::TransienceDrift => "transient",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub n: usize,
    pub delta: f64,
    pub lambda: f64,
    /// Ergodic kind: `(α, β, γ, H)`.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub h: f64,
    /// Transience kind: the weight on the lowest particle.
    pub epsilon: f64,
    /// Ergodic kind: per-coordinate radius of the verified box and of the
    /// exceptional core inside it.
    pub box_radius: u64,
    pub core: u64,
    /// Ergodic: `max LV/V` outside the core. Transience: smallest region value.
    pub worst_residual: f64,
    pub holds: bool,
    pub states_checked: usize,
    /// Transience kind: interior value, then pile values for `k = 2..=N`.
    pub region_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicSearchOptions {
    pub box_radius: u64,
    /// Radius of the exceptional set `{max_i x_i < core}`; default a third of the box.
    pub core: Option<u64>,
    pub alpha_grid: Vec<f64>,
    /// Values of `C = β/α`; default 64 interior points of the admissible window.
    pub c_grid: Option<Vec<f64>>,
    pub max_states: usize,
}

impl Default for ErgodicSearchOptions {
    fn default() -> Self {
        Self {
            box_radius: 30,
            core: None,
            alpha_grid: (3..=14).map(|k| 2f64.powi(-k)).collect(),
            c_grid: None,
            max_states: 2_000_000,
        }
    }
}

/// Admissible window for `C = β/α`: `[δ/(1+δ), (λ − 4δ)/λ]`.
pub fn c_window(delta: f64, lambda: f64) -> Option<(f64, f64)> {
    if lambda <= 0.0 {
        return None;
    }
    let lo = delta / (1.0 + delta);
    let hi = (lambda - 4.0 * delta) / lambda;
    (hi >= lo && hi > 0.0).then_some((lo, hi))
}

/// One state of the box, grouped by site: `(position, occupancy)`.
type Multiset = Vec<(u64, u32)>;

fn enumerate_multisets(n: usize, radius: u64, cap: usize) -> Result<Vec<Multiset>> {
    // count C(radius + n, n) before allocating
    let mut count = 1f64;
    for k in 1..=n {
        count *= (radius as f64 + k as f64) / k as f64;
    }
    if count > cap as f64 {
        return Err(Error::invalid(format!(
            "box of radius {radius} holds {count:.0} states for N={n}, above the cap {cap}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut x = vec![0u64; n];
    loop {
        let mut groups: Multiset = Vec::new();
        for &v in &x {
            match groups.last_mut() {
                Some((site, c)) if *site == v => *c += 1,
                _ => groups.push((v, 1)),
            }
        }
        out.push(groups);
        // next nondecreasing sequence
        let Some(pos) = (0..n).rev().find(|&i| x[i] < radius) else {
            break;
        };
        let v = x[pos] + 1;
        x[pos..].iter_mut().for_each(|e| *e = v);
    }
    Ok(out)
}

/// `LV/V` on a grouped state, small-jump kernel.
fn drift_ratio_grouped(s: &Multiset, n: usize, delta: f64, lambda: f64, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let m = s.iter().map(|&(v, _)| alpha * v as f64).fold(f64::NEG_INFINITY, f64::max);
    let log_n_psi = m + s
        .iter()
        .map(|&(v, c)| c as f64 * (alpha * v as f64 - m).exp())
        .sum::<f64>()
        .ln();
    let height = s.iter().map(|g| g.1).max().unwrap_or(0);
    let tallest = s.iter().filter(|g| g.1 == height).count();
    let occupancy = |site: u64| s.iter().find(|g| g.0 == site).map_or(0, |g| g.1);
    let (up_a, down_a) = (alpha.exp_m1(), (-alpha).exp_m1());
    let mut below = 0u32;
    let mut total = 0.0;
    for &(v, c) in s {
        let weight = (alpha * v as f64 - log_n_psi).exp();
        let rest = if c == height && tallest == 1 { height - 1 } else { height };
        let mut term = |to: u64, rate: f64, d_psi: f64| {
            let h = rest.max(occupancy(to) + 1);
            let d_phi = (beta / nf * (h as f64 - height as f64)).exp_m1();
            total += rate * c as f64 * (d_psi + d_phi + d_psi * d_phi);
        };
        term(v + 1, 1.0 + delta, weight * up_a);
        if v > 0 {
            term(v - 1, 1.0 + lambda * below as f64 / nf, weight * down_a);
        }
        below += c;
    }
    total
}

fn log_v_grouped(s: &Multiset, n: usize, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    let m = s.iter().map(|&(v, _)| alpha * v as f64).fold(f64::NEG_INFINITY, f64::max);
    let lse = m + s
        .iter()
        .map(|&(v, c)| c as f64 * (alpha * v as f64 - m).exp())
        .sum::<f64>()
        .ln();
    lse - nf.ln() + beta * s.iter().map(|g| g.1).max().unwrap_or(0) as f64 / nf
}

/// Grid search for `(α, β = Cα)` maximising the `γ` with `LV ≤ −γV` on the
/// box minus its core, with `H = max_core (LV + γV)⁺`. This verifies the
/// drift inequality on a finite box only.
pub fn ergodic_certificate_search(
    n: usize,
    delta: f64,
    lambda: f64,
    opts: &ErgodicSearchOptions,
) -> Result<Certificate> {
    check_rate_parameters(delta, lambda)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    if lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    let radius = opts.box_radius;
    let core = opts.core.unwrap_or(radius / 3);
    if core > radius {
        return Err(Error::invalid("core radius exceeds the box"));
    }
    let c_grid = match &opts.c_grid {
        Some(g) if !g.is_empty() => g.clone(),
        Some(_) => return Err(Error::invalid("empty C grid")),
        None => {
            let (lo, hi) = c_window(delta, lambda).ok_or_else(|| {
                Error::NoCandidate(format!(
                    "window for C is empty at delta={delta}, lambda={lambda}"
                ))
            })?;
            (1..=64).map(|j| lo + (hi - lo) * j as f64 / 65.0).collect()
        }
    };
    if opts.alpha_grid.is_empty() {
        return Err(Error::invalid("empty alpha grid"));
    }
    let states = enumerate_multisets(n, radius, opts.max_states)?;
    let in_core = |s: &Multiset| s.last().is_some_and(|g| g.0 < core);

    let candidates: Vec<(f64, f64)> = opts
        .alpha_grid
        .iter()
        .flat_map(|&a| c_grid.iter().map(move |&c| (a, c * a)))
        .collect();
    for &(a, b) in &candidates {
        check_alpha_beta(a, b)?;
    }
    let scored: Vec<(f64, f64, f64, f64)> = candidates
        .par_iter()
        .map(|&(alpha, beta)| {
            let mut worst = f64::NEG_INFINITY;
            let mut core_ratios = Vec::new();
            for s in &states {
                let r = drift_ratio_grouped(s, n, delta, lambda, alpha, beta);
                if in_core(s) {
                    core_ratios.push((r, log_v_grouped(s, n, alpha, beta)));
                } else {
                    worst = worst.max(r);
                }
            }
            let gamma = -worst;
            let h = core_ratios
                .iter()
                .map(|&(r, lv)| ((r + gamma) * lv.exp()).max(0.0))
                .fold(0.0, f64::max);
            (alpha, beta, gamma, h)
        })
        .collect();
    // first maximiser in grid order, independent of scheduling
    let best = scored
        .iter()
        .copied()
        .reduce(|a, b| if b.2 > a.2 { b } else { a })
        .ok_or_else(|| Error::NoCandidate("no candidates".into()))?;
    Ok(Certificate {
        kind: CertificateKind::ErgodicDrift,
        n,
        delta,
        lambda,
        alpha: best.0,
        beta: best.1,
        gamma: best.2,
        h: best.3,
        epsilon: f64::NAN,
        box_radius: radius,
        core,
        worst_residual: -best.2,
        holds: best.2 > 0.0,
        states_checked: states.len(),
        region_values: Vec::new(),
    })
}

/// Interior value `Nδ − λ(N−1)/2 + εδ`, then for `k = 2..=N` the value on
/// states whose lowest site holds `k` particles,
/// `Nδ − λ(N−1)/2 − kε + λk(k−1)/(2N)`.
pub fn transience_region_values(n: usize, delta: f64, lambda: f64, epsilon: f64) -> Vec<f64> {
    let nf = n as f64;
    let a = nf * delta - lambda * (nf - 1.0) / 2.0;
    std::iter::once(a + epsilon * delta)
        .chain((2..=n).map(|k| {
            let k = k as f64;
            a - k * epsilon + lambda * k * (k - 1.0) / (2.0 * nf)
        }))
        .collect()
}

/// Exact transience check for the weight vector `(1+ε, 1, …, 1)` on the
/// order statistics. Requires `0 ≤ ε ≤ 3λ/(4N)`.
pub fn transience_certificate(n: usize, delta: f64, lambda: f64, epsilon: f64) -> Result<Certificate> {
    check_rate_parameters(delta, lambda)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    let window = 3.0 * lambda / (4.0 * n as f64);
    if !(epsilon >= 0.0 && epsilon <= window) {
        return Err(Error::invalid(format!(
            "epsilon {epsilon} outside [0, 3 lambda/(4N)] = [0, {window}]"
        )));
    }
    let values = transience_region_values(n, delta, lambda, epsilon);
    let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Certificate {
        kind: CertificateKind::TransienceDrift,
        n,
        delta,
        lambda,
        alpha: f64::NAN,
        beta: f64::NAN,
        gamma: f64::NAN,
        h: f64::NAN,
        epsilon,
        box_radius: 0,
        core: 0,
        worst_residual: worst,
        holds: worst > 0.0,
        states_checked: 0,
        region_values: values,
    })
}

/// `ε_N = N²(δ+2) / (N(N−1)(δ+2) − 2δ) − 1`; transience is certified for
/// `λ < (1 + ε_N) 2δ`.
pub fn epsilon_n(n: usize, delta: f64) -> Result<f64> {
    check_rate_parameters(delta, 0.0)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    let nf = n as f64;
    Ok(nf * nf * (delta + 2.0) / (nf * (nf - 1.0) * (delta + 2.0) - 2.0 * delta) - 1.0)
}

/// Some ε in `[0, 3λ/(4N)]` making every region value positive, if any:
/// `0` when the interior value is already positive, otherwise the midpoint
/// of the feasible interval.
pub fn epsilon_search(n: usize, delta: f64, lambda: f64) -> Result<Option<f64>> {
    check_rate_parameters(delta, lambda)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    let nf = n as f64;
    let a = nf * delta - lambda * (nf - 1.0) / 2.0;
    if a > 0.0 {
        return Ok(Some(0.0));
    }
    if delta == 0.0 {
        return Ok(None);
    }
    let lo = -a / delta;
    let hi = (2..=n)
        .map(|k| {
            let k = k as f64;
            (a + lambda * k * (k - 1.0) / (2.0 * nf)) / k
        })
        .fold(3.0 * lambda / (4.0 * nf), f64::min);
    Ok((lo < hi).then_some(0.5 * (lo + hi)))
}
