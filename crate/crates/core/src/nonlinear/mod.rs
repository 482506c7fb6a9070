//! Stationary laws of the nonlinear single-particle process.
//!
//! For a fixed measure μ the process is the birth-death chain with up-rate
//! `1 + δ` and down-rate `1 + λ μ[0, x)` at `x ≥ 1`; `Γ(μ)` denotes its
//! stationary law. Stationary laws of the nonlinear process are exactly the
//! fixed points of Γ.

mod evolve;

pub use evolve::{evolve_law, stationarity_residual, LawEvolver, MAX_STATES};

use std::fmt;

use crate::critical::conjectured_critical_limit;
use crate::error::{Error, Result};
use crate::measure::ProbabilityVector;
use crate::model::check_rate_parameters;

/// Tail tolerance used when callers do not choose one.
pub const DEFAULT_TRUNCATION: f64 = 1e-15;

/// `Γ(μ)`: stationary law of the chain driven by `mu`, by detailed balance
/// `π(k) ∝ ∏_{h=1}^{k} (1+δ) / (1 + λ μ[0,h))`.
///
/// The window stops at the first `L` where the geometric bound on the
/// remaining weight (ratio `(1+δ)/(1 + λ μ[0, L+1))`, valid because the
/// ratios are nonincreasing) is at most `tolerance` times the total.
pub fn bd_stationary(
    mu: &ProbabilityVector,
    delta: f64,
    lambda: f64,
    tolerance: f64,
) -> Result<ProbabilityVector> {
    check_rate_parameters(delta, lambda)?;
    if lambda <= delta {
        return Err(Error::NonErgodic(format!(
            "the driven chain needs lambda > delta (delta={delta}, lambda={lambda})"
        )));
    }
    check_tolerance(tolerance)?;
    let cdf = mu.cdf_table();
    let floor = 1.0 - mu.tail_bound();
    // lower bound on μ[0, h) for every h ≥ 1
    let below = |h: usize| cdf.get(h - 1).copied().unwrap_or(floor);
    let ln_up = delta.ln_1p();

    let mut logw = vec![0.0f64];
    let mut log_max = 0.0f64;
    // Σ exp(logw − log_max), rescaled whenever the maximum moves
    let mut total = 1.0f64;
    loop {
        let l = logw.len() - 1;
        let ratio_next = (1.0 + delta) / (1.0 + lambda * below(l + 1));
        if ratio_next < 1.0 {
            // remaining weight ≤ w_L r / (1 − r)
            let log_tail = logw[l] + ratio_next.ln() - (-ratio_next).ln_1p();
            let tail = (log_tail - log_max).exp();
            if tail <= tolerance * total {
                let weights: Vec<f64> = logw.iter().map(|lw| (lw - log_max).exp()).collect();
                return ProbabilityVector::from_weights_with_tail(weights, tail);
            }
        } else if l + 1 >= cdf.len() {
            return Err(Error::NonNormalizable(format!(
                "driving measure leaves too much mass ({}) beyond its window",
                mu.tail_bound()
            )));
        }
        if logw.len() >= MAX_STATES {
            return Err(Error::TruncationOverflow { cap: MAX_STATES });
        }
        let next = logw[l] + ln_up - (lambda * below(l + 1)).ln_1p();
        if next > log_max {
            total = total * (log_max - next).exp() + 1.0;
            log_max = next;
        } else {
            total += (next - log_max).exp();
        }
        logw.push(next);
    }
}

/// Stationary law of the dominating chain with extra down-rate `λ/2` above
/// level `m`: `π_m(x) ∝ (1+δ)^{min(x,m)} q^{(x−m)⁺}` with `q = (1+δ)/(1+λ/2)`.
pub fn dominating_pi_m(m: usize, delta: f64, lambda: f64) -> Result<ProbabilityVector> {
    check_rate_parameters(delta, lambda)?;
    if lambda <= 2.0 * delta {
        return Err(Error::NonNormalizable(format!(
            "dominating chain needs lambda > 2 delta (delta={delta}, lambda={lambda})"
        )));
    }
    if m >= MAX_STATES {
        return Err(Error::TruncationOverflow { cap: MAX_STATES });
    }
    let ln_up = delta.ln_1p();
    let ln_q = ln_up - (0.5 * lambda).ln_1p();
    let q = ln_q.exp();
    // weights relative to the peak at x = m
    let mut weights: Vec<f64> = (0..=m).map(|x| ((x as f64 - m as f64) * ln_up).exp()).collect();
    let head: f64 = weights.iter().sum();
    let mut w = 1.0;
    loop {
        let tail = w * q / (1.0 - q);
        if tail <= DEFAULT_TRUNCATION * head || weights.len() >= MAX_STATES {
            if weights.len() >= MAX_STATES {
                return Err(Error::TruncationOverflow { cap: MAX_STATES });
            }
            return ProbabilityVector::from_weights_with_tail(weights, tail);
        }
        w *= q;
        weights.push(w);
    }
}

/// Smallest `m` with `(λ/2 − 2δ)/(λ/2 − δ) > (1+δ)^{−(m+1)}`, checked a
/// posteriori against `median(π_m) ≤ m`. For `δ = 0` the inequality carries
/// no information and the median condition is searched directly.
pub fn find_m_star(delta: f64, lambda: f64) -> Result<usize> {
    check_rate_parameters(delta, lambda)?;
    if lambda <= 4.0 * delta {
        return Err(Error::ConditionUnsatisfiable(format!(
            "needs lambda > 4 delta (delta={delta}, lambda={lambda})"
        )));
    }
    if delta == 0.0 {
        for m in 0..MAX_STATES {
            if median(&dominating_pi_m(m, delta, lambda)?) <= m {
                return Ok(m);
            }
        }
        return Err(Error::TruncationOverflow { cap: MAX_STATES });
    }
    let lhs = (0.5 * lambda - 2.0 * delta) / (0.5 * lambda - delta);
    let ln_up = delta.ln_1p();
    let mut m = ((-lhs.ln()) / ln_up - 1.0).floor().max(0.0) as usize;
    while m > 0 && lhs > (-(m as f64) * ln_up).exp() {
        m -= 1;
    }
    while lhs <= (-((m + 1) as f64) * ln_up).exp() {
        m += 1;
    }
    let pi = dominating_pi_m(m, delta, lambda)?;
    if median(&pi) > m {
        return Err(Error::Invariant(format!(
            "median {} of pi_{m} exceeds {m}",
            median(&pi)
        )));
    }
    Ok(m)
}

/// Smallest `m` with `μ[0, m] ≥ 1/2`.
pub fn median(mu: &ProbabilityVector) -> usize {
    mu.median()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `λ > 4δ`: a stationary law is known to exist.
    Proven,
    /// `2δ < λ ≤ 4δ`: existence is open; output is exploratory.
    OutsideProvenRegime,
    /// `δ < λ ≤ 2δ`: no stationary law exists.
    NonExistenceProven,
}

impl Regime {
    pub fn classify(delta: f64, lambda: f64) -> Result<Self> {
        check_rate_parameters(delta, lambda)?;
        if lambda <= delta {
            Err(Error::NonErgodic(format!(
                "lambda must exceed delta (delta={delta}, lambda={lambda})"
            )))
        } else if lambda <= 2.0 * delta {
            Ok(Regime::NonExistenceProven)
        } else if lambda <= 4.0 * delta {
            Ok(Regime::OutsideProvenRegime)
        } else {
            Ok(Regime::Proven)
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Proven => "proven",
            Regime::OutsideProvenRegime => "outside-proven-regime",
            Regime::NonExistenceProven => "non-existence-proven",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// Plain iteration `μ ← Γ(μ)`.
    None,
    /// Always mix: `μ ← (1−w) μ + w Γ(μ)`.
    Fixed(f64),
    /// Plain iteration, switching to `w = 1/2` once the step distance has
    /// failed to decrease five times in a row.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Convergence threshold on the total-variation step.
    pub tolerance: f64,
    /// Tail bound requested from each Γ evaluation.
    pub truncation: f64,
    pub damping: Damping,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tolerance: 1e-10,
            truncation: DEFAULT_TRUNCATION,
            damping: Damping::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub measure: ProbabilityVector,
    pub iterations: usize,
    pub final_step_tv: f64,
    pub converged: bool,
    /// Largest master-equation residual at `measure`.
    pub stationarity_residual: f64,
    /// `Σ_{x≥1} μ[0,x−1] μ(x)` at `measure`.
    pub lower_pair_sum: f64,
    /// `|δ + μ(0) − λ Σ_{x≥1} μ[0,x−1] μ(x)|`: the mean of the generator
    /// applied to the identity, which vanishes at a stationary law.
    pub mean_identity_residual: f64,
    /// Median of every iterate, starting with the initial measure.
    pub median_trace: Vec<usize>,
    pub regime: Regime,
    pub damped: bool,
}

pub fn gamma_fixed_point(
    delta: f64,
    lambda: f64,
    mu0: &ProbabilityVector,
    max_iter: usize,
    tolerance: f64,
) -> Result<FixedPointReport> {
    let opts = FixedPointOptions {
        max_iter,
        tolerance,
        ..Default::default()
    };
    gamma_fixed_point_with(delta, lambda, mu0, &opts)
}

/// Iterates Γ from `mu0`. Failure to converge is reported, not raised;
/// truncation overflow (mass escaping) is raised.
pub fn gamma_fixed_point_with(
    delta: f64,
    lambda: f64,
    mu0: &ProbabilityVector,
    opts: &FixedPointOptions,
) -> Result<FixedPointReport> {
    let regime = Regime::classify(delta, lambda)?;
    check_tolerance(opts.tolerance)?;
    let mut mu = mu0.clone();
    let mut trace = vec![mu.median()];
    let mut last_tv = f64::INFINITY;
    let mut stalls = 0usize;
    let mut weight = match opts.damping {
        Damping::Fixed(w) if w > 0.0 && w <= 1.0 => w,
        Damping::Fixed(w) => return Err(Error::invalid(format!("mixing weight {w} not in (0,1]"))),
        _ => 1.0,
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let image = bd_stationary(&mu, delta, lambda, opts.truncation)?;
        let tv = image.total_variation(&mu);
        iterations += 1;
        mu = if weight < 1.0 { mix(&mu, &image, weight)? } else { image };
        trace.push(mu.median());
        if opts.damping == Damping::Auto && weight == 1.0 {
            stalls = if tv >= last_tv { stalls + 1 } else { 0 };
            if stalls >= 5 {
                weight = 0.5;
            }
        }
        last_tv = tv;
        if tv <= opts.tolerance {
            converged = true;
            break;
        }
    }
    let lower_pair_sum = mu.lower_pair_sum();
    Ok(FixedPointReport {
        stationarity_residual: stationarity_residual(&mu, delta, lambda),
        mean_identity_residual: (delta + mu.get(0) - lambda * lower_pair_sum).abs(),
        lower_pair_sum,
        final_step_tv: last_tv,
        iterations,
        converged,
        median_trace: trace,
        regime,
        damped: weight < 1.0,
        measure: mu,
    })
}

fn mix(a: &ProbabilityVector, b: &ProbabilityVector, w: f64) -> Result<ProbabilityVector> {
    let n = a.mass().len().max(b.mass().len());
    let mass = (0..n).map(|x| (1.0 - w) * a.get(x) + w * b.get(x)).collect();
    ProbabilityVector::new(mass, (1.0 - w) * a.tail_bound() + w * b.tail_bound())
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("tolerance must be positive, got {tol}")))
    }
}

/// Thresholds in λ at fixed δ for the nonlinear process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceBounds {
    /// No stationary law for `λ ≤` this value.
    pub no_stationary_below: f64,
    /// A stationary law exists for `λ >` this value.
    pub stationary_above: f64,
    /// Conjectured sharp threshold (large-N limit of the Jackson critical values).
    pub conjectured: f64,
}

pub fn existence_bounds(delta: f64) -> Result<ExistenceBounds> {
    check_rate_parameters(delta, 0.0)?;
    Ok(ExistenceBounds {
        no_stationary_below: 2.0 * delta,
        stationary_above: 4.0 * delta,
        conjectured: conjectured_critical_limit(delta)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_of_point_mass_at_zero() {
        // μ[0,h) = 1 for h ≥ 1: ratios (1+δ)/(1+λ) = 1/2 from the start
        let pi = bd_stationary(&ProbabilityVector::point_mass(0), 0.0, 1.0, 1e-14).unwrap();
        for x in 0..30 {
            assert!((pi.get(x) - 0.5f64.powi(x as i32 + 1)).abs() < 1e-14, "x={x}");
        }
        assert!(pi.tail_bound() <= 1e-14);
    }

    #[test]
    fn gamma_satisfies_detailed_balance() {
        let mu = ProbabilityVector::new(vec![0.2, 0.1, 0.4, 0.3], 0.0).unwrap();
        let (d, l) = (0.3, 2.0);
        let pi = bd_stationary(&mu, d, l, 1e-14).unwrap();
        for x in 0..pi.support_bound() {
            let flow = (1.0 + d) * pi.get(x) - (1.0 + l * mu.cdf(x)) * pi.get(x + 1);
            assert!(flow.abs() < 1e-15, "x={x} flow={flow}");
        }
        assert!((pi.window_mass() + pi.tail_bound() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_needs_lambda_above_delta() {
        let mu = ProbabilityVector::point_mass(0);
        assert!(matches!(bd_stationary(&mu, 1.0, 1.0, 1e-12), Err(Error::NonErgodic(_))));
    }

    #[test]
    fn dominating_law_is_piecewise_geometric() {
        let pi = dominating_pi_m(0, 0.0, 2.0).unwrap();
        for x in 0..20 {
            assert!((pi.get(x) - 0.5f64.powi(x as i32 + 1)).abs() < 1e-15);
        }
        let a = dominating_pi_m(2, 0.3, 1.5).unwrap();
        let b = dominating_pi_m(5, 0.3, 1.5).unwrap();
        assert!(a.stochastically_le(&b, 1e-15));
        assert!(!b.stochastically_le(&a, 1e-15));
        assert!(matches!(dominating_pi_m(1, 1.0, 2.0), Err(Error::NonNormalizable(_))));
    }

    #[test]
    fn m_star_values() {
        assert_eq!(find_m_star(0.5, 3.0).unwrap(), 1);
        // with δ = 0 the median condition decides: π_0 puts only 1/3 at 0
        assert_eq!(find_m_star(0.0, 1.0).unwrap(), 1);
        assert_eq!(find_m_star(0.0, 4.0).unwrap(), 0);
        assert!(matches!(find_m_star(1.0, 4.0), Err(Error::ConditionUnsatisfiable(_))));
        for (d, l) in [(0.1, 0.5), (0.5, 3.0), (1.0, 4.5), (2.0, 50.0)] {
            let m = find_m_star(d, l).unwrap();
            assert!(median(&dominating_pi_m(m, d, l).unwrap()) <= m);
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&ProbabilityVector::point_mass(7)), 7);
        assert_eq!(median(&ProbabilityVector::uniform(1)), 0);
        assert_eq!(median(&dominating_pi_m(0, 0.0, 2.0).unwrap()), 0);
    }

    #[test]
    fn fixed_point_without_drift() {
        let r = gamma_fixed_point(0.0, 1.0, &ProbabilityVector::point_mass(0), 500, 1e-12).unwrap();
        assert!(r.converged);
        assert!(r.mean_identity_residual < 1e-9);
        assert_eq!(r.regime, Regime::Proven);
        // Σ equals μ(0)/λ here
        assert!((r.lower_pair_sum - r.measure.get(0)).abs() < 1e-9);
    }

    #[test]
    fn regimes() {
        assert!(Regime::classify(1.0, 0.5).is_err());
        assert_eq!(Regime::classify(1.0, 1.5).unwrap(), Regime::NonExistenceProven);
        assert_eq!(Regime::classify(1.0, 3.0).unwrap(), Regime::OutsideProvenRegime);
        assert_eq!(Regime::classify(1.0, 5.0).unwrap(), Regime::Proven);
    }

    #[test]
    fn existence_bound_triples() {
        let b = existence_bounds(0.0).unwrap();
        assert_eq!((b.no_stationary_below, b.stationary_above, b.conjectured), (0.0, 0.0, 0.0));
        let b = existence_bounds(1.0).unwrap();
        assert_eq!((b.no_stationary_below, b.stationary_above), (2.0, 4.0));
        assert!(b.conjectured > 2.0 && b.conjectured < 4.0);
        let b = existence_bounds(0.5).unwrap();
        assert_eq!((b.no_stationary_below, b.stationary_above), (1.0, 2.0));
    }
}
