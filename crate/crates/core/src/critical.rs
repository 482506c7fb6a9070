//! Critical interaction strengths.
//!
//! * Jackson-network prediction for N particles: the root in λ of
//!   `Σ_{k=1}^{N−1} ln(1 + λk/N) = N ln(1+δ)`.
//! * Its large-N limit: the root of `(1 + 1/λ) ln(1+λ) − 1 = ln(1+δ)`.
//! * Continuum (reflected diffusion) threshold `2δN/(N−1)` and the rates of
//!   the exponential gap laws above it.

use crate::error::{Error, Result};
use crate::model::check_rate_parameters;

/// Root of an increasing function with `f(0) ≤ 0`, by doubling then bisection
/// down to adjacent floating-point numbers.
fn increasing_root(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Invariant("root bracket diverged".into()));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Smallest λ at which the N-node Jackson network of gaps is stable.
pub fn conjectured_critical_n(n: usize, delta: f64) -> Result<f64> {
    check_rate_parameters(delta, 0.0)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let target = nf * delta.ln_1p();
    increasing_root(|lambda| {
        let lhs: f64 = (1..n).map(|k| (lambda * k as f64 / nf).ln_1p()).sum();
        lhs - target
    })
}

/// `(1 + 1/λ) ln(1+λ) − 1`, accurate for small λ.
pub fn limit_condition(lambda: f64) -> f64 {
    if lambda < 1e-4 {
        let l = lambda;
        l / 2.0 - l * l / 6.0 + l.powi(3) / 12.0 - l.powi(4) / 20.0
    } else {
        (1.0 + lambda) * lambda.ln_1p() / lambda - 1.0
    }
}

/// Large-N limit of [`conjectured_critical_n`].
pub fn conjectured_critical_limit(delta: f64) -> Result<f64> {
    check_rate_parameters(delta, 0.0)?;
    if delta == 0.0 {
        return Ok(0.0);
    }
    let target = delta.ln_1p();
    increasing_root(|lambda| limit_condition(lambda) - target)
}

/// `2δN/(N−1)`.
pub fn continuum_critical(n: usize, delta: f64) -> Result<f64> {
    check_rate_parameters(delta, 0.0)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    Ok(2.0 * delta * n as f64 / (n as f64 - 1.0))
}

/// Rates `a_1..a_N` of the exponential gap laws of the continuum model,
/// `a_i = (N+1−i)(iλ − (2−N)λ − 2δN) / (2N)`. All are positive exactly when
/// λ exceeds [`continuum_critical`]; otherwise the nonpositive entries flag
/// the absence of a stationary law.
pub fn continuum_gap_params(n: usize, delta: f64, lambda: f64) -> Result<Vec<f64>> {
    check_rate_parameters(delta, lambda)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    let nf = n as f64;
    Ok((1..=n)
        .map(|i| {
            let i = i as f64;
            (nf + 1.0 - i) * (i * lambda - (2.0 - nf) * lambda - 2.0 * delta * nf) / (2.0 * nf)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_particles_match_the_closed_form() {
        for d in [0.1, 0.5, 1.0, 2.0] {
            let c = conjectured_critical_n(2, d).unwrap();
            assert!((c - (2.0 * d * d + 4.0 * d)).abs() < 1e-9, "delta={d}");
        }
        assert!((conjectured_critical_n(2, 1.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_gives_zero() {
        for n in [2, 7, 100] {
            assert_eq!(conjectured_critical_n(n, 0.0).unwrap(), 0.0);
        }
        assert_eq!(conjectured_critical_limit(0.0).unwrap(), 0.0);
    }

    #[test]
    fn limit_exceeds_non_existence_bound() {
        for k in 1..=50 {
            let d = 0.1 * k as f64;
            assert!(conjectured_critical_limit(d).unwrap() > 2.0 * d);
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        let l = 0.99999e-4;
        let closed = (1.0 + l) * f64::ln_1p(l) / l - 1.0;
        assert!((limit_condition(l) - closed).abs() < 1e-12);
    }

    #[test]
    fn continuum_values() {
        assert_eq!(continuum_critical(2, 1.0).unwrap(), 4.0);
        for n in [2, 3, 5, 10, 50] {
            for d in [0.1, 1.0, 3.0] {
                let c = continuum_critical(n, d).unwrap();
                assert!(c < conjectured_critical_n(n, d).unwrap());
                assert!(continuum_gap_params(n, d, 1.1 * c).unwrap().iter().all(|a| *a > 0.0));
                assert!(continuum_gap_params(n, d, 0.9 * c).unwrap().iter().any(|a| *a <= 0.0));
            }
        }
    }
}
