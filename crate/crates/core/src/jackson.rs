//! Open Jackson networks and the network attached to the gap process.
//!
//! Node `i` receives external customers at rate `arrivals[i]`, serves at
//! rate `services[i]` while nonempty, and routes a served customer to node
//! `j` with probability `routing[i][j]` or out with probability `exit[i]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::check_rate_parameters;

/// Stability margins below this are reported as near-critical.
pub const NEAR_CRITICAL_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct JacksonSpec {
    pub arrivals: Vec<f64>,
    pub services: Vec<f64>,
    pub routing: Vec<Vec<f64>>,
    pub exit: Vec<f64>,
}

impl JacksonSpec {
    pub fn nodes(&self) -> usize {
        self.arrivals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes();
        if n == 0 {
            return Err(Error::invalid("network has no nodes"));
        }
        if self.services.len() != n || self.exit.len() != n || self.routing.len() != n {
            return Err(Error::invalid("network vectors have inconsistent lengths"));
        }
        for i in 0..n {
            if self.routing[i].len() != n {
                return Err(Error::invalid(format!("routing row {i} has wrong length")));
            }
            let rates = [self.arrivals[i], self.services[i]];
            if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::invalid(format!("node {i} has a negative or non-finite rate")));
            }
            let row = self.routing[i].iter().chain(std::iter::once(&self.exit[i]));
            if row.clone().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("routing row {i} leaves [0,1]")));
            }
            if self.services[i] > 0.0 {
                let total: f64 = row.sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("routing row {i} sums to {total}")));
                }
            }
        }
        Ok(())
    }

    /// Jumps out of queue-length vector `z`: `(target, rate)`. Services at
    /// empty nodes are suppressed.
    pub fn transitions(&self, z: &[u64]) -> Result<Vec<(Vec<u64>, f64)>> {
        let n = self.nodes();
        if z.len() != n {
            return Err(Error::invalid("queue vector has wrong length"));
        }
        let mut out = Vec::new();
        for i in 0..n {
            if self.arrivals[i] > 0.0 {
                let mut t = z.to_vec();
                t[i] += 1;
                out.push((t, self.arrivals[i]));
            }
            if z[i] == 0 || self.services[i] == 0.0 {
                continue;
            }
            let mu = self.services[i];
            if self.exit[i] > 0.0 {
                let mut t = z.to_vec();
                t[i] -= 1;
                out.push((t, mu * self.exit[i]));
            }
            for (j, &p) in self.routing[i].iter().enumerate() {
                if p > 0.0 && j != i {
                    let mut t = z.to_vec();
                    t[i] -= 1;
                    t[j] += 1;
                    out.push((t, mu * p));
                }
            }
        }
        Ok(out)
    }
}

/// Network whose interior jumps match the `N`-particle gap process: node
/// `i < N` forwards to `i+1` at rate `1 + λ(i−1)/N` (node 1 at rate 1), node
/// `i ≥ 2` sends back to `i−1` at rate `1 + δ`, node `N` receives arrivals at
/// rate `1 + δ` and releases customers at rate `1 + λ(N−1)/N`. Nodes are
/// indexed from 0 in the returned vectors.
pub fn jackson_spec_for_gaps(n: usize, delta: f64, lambda: f64) -> Result<JacksonSpec> {
    check_rate_parameters(delta, lambda)?;
    if n < 2 {
        return Err(Error::invalid("need at least two particles"));
    }
    let nf = n as f64;
    let mut spec = JacksonSpec {
        arrivals: vec![0.0; n],
        services: vec![0.0; n],
        routing: vec![vec![0.0; n]; n],
        exit: vec![0.0; n],
    };
    spec.arrivals[n - 1] = 1.0 + delta;
    for j in 1..=n {
        let forward = 1.0 + lambda * (j as f64 - 1.0) / nf;
        let back = if j > 1 { 1.0 + delta } else { 0.0 };
        let mu = forward + back;
        let idx = j - 1;
        spec.services[idx] = mu;
        if j < n {
            spec.routing[idx][idx + 1] = forward / mu;
        } else {
            spec.exit[idx] = forward / mu;
        }
        if j > 1 {
            spec.routing[idx][idx - 1] = back / mu;
        }
    }
    Ok(spec)
}

/// Solves `ν_j = λ_j + Σ_i ν_i p_{i,j}`. Customers can only circulate
/// through nodes with positive service rate, so those nodes must all be able
/// to reach the exit.
pub fn traffic_solve(spec: &JacksonSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.nodes();
    // nodes from which the exit is reachable through serving nodes
    let mut drains: Vec<bool> = (0..n).map(|i| spec.services[i] > 0.0 && spec.exit[i] > 0.0).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !drains[i]
                && spec.services[i] > 0.0
                && (0..n).any(|j| spec.routing[i][j] > 0.0 && drains[j])
            {
                drains[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(i) = (0..n).find(|&i| spec.services[i] > 0.0 && !drains[i]) {
        return Err(Error::NoUniqueSolution(format!(
            "node {i} cannot reach the exit; the network is not open"
        )));
    }
    let a = DMatrix::from_fn(n, n, |j, i| {
        let p = if spec.services[i] > 0.0 { spec.routing[i][j] } else { 0.0 };
        if i == j {
            1.0 - p
        } else {
            -p
        }
    });
    let b = DVector::from_column_slice(&spec.arrivals);
    let lu = a.clone().lu();
    let mut nu = lu
        .solve(&b)
        .ok_or_else(|| Error::NoUniqueSolution("traffic system is singular".into()))?;
    // one step of iterative refinement
    let r = &b - &a * &nu;
    if let Some(d) = lu.solve(&r) {
        nu += d;
    }
    if nu.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoUniqueSolution("traffic solution is not finite".into()));
    }
    Ok(nu.iter().map(|v| v.max(0.0)).collect())
}

/// Largest absolute violation of the traffic equations by `nu`.
pub fn traffic_residual(spec: &JacksonSpec, nu: &[f64]) -> f64 {
    let n = spec.nodes();
    (0..n)
        .map(|j| {
            let inflow: f64 = (0..n)
                .filter(|&i| spec.services[i] > 0.0)
                .map(|i| nu[i] * spec.routing[i][j])
                .sum();
            (nu[j] - spec.arrivals[j] - inflow).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stability {
    pub ergodic: bool,
    /// Traffic intensities `ν_i / μ_i` (∞ when `μ_i = 0 < ν_i`, 0 when both vanish).
    pub loads: Vec<f64>,
    /// `min_i (1 − load_i)`.
    pub margin: f64,
    pub near_critical: bool,
}

pub fn jackson_stability(spec: &JacksonSpec) -> Result<Stability> {
    let nu = traffic_solve(spec)?;
    let loads: Vec<f64> = nu
        .iter()
        .zip(&spec.services)
        .map(|(&v, &mu)| match (mu > 0.0, v > 0.0) {
            (true, _) => v / mu,
            (false, true) => f64::INFINITY,
            (false, false) => 0.0,
        })
        .collect();
    let margin = loads.iter().map(|l| 1.0 - l).fold(f64::INFINITY, f64::min);
    Ok(Stability {
        ergodic: margin > 0.0,
        near_critical: margin.abs() <= NEAR_CRITICAL_MARGIN,
        loads,
        margin,
    })
}

/// `ν_i < μ_i` at every node (a node without service must carry no traffic).
pub fn jackson_ergodic(spec: &JacksonSpec) -> Result<bool> {
    Ok(jackson_stability(spec)?.ergodic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_parameters() {
        let (d, l) = (0.5, 3.0);
        let s = jackson_spec_for_gaps(2, d, l).unwrap();
        let mu2 = 2.0 + l / 2.0 + d;
        assert_eq!(s.arrivals, vec![0.0, 1.0 + d]);
        assert_eq!(s.services, vec![1.0, mu2]);
        assert_eq!(s.routing[0][1], 1.0);
        assert_eq!(s.exit[0], 0.0);
        assert!((s.exit[1] - (1.0 + l / 2.0) / mu2).abs() < 1e-15);
        assert!((s.routing[1][0] - (1.0 + d) / mu2).abs() < 1e-15);
        s.validate().unwrap();
    }

    #[test]
    fn two_node_traffic_by_hand() {
        let (d, l) = (0.5, 3.0);
        let s = jackson_spec_for_gaps(2, d, l).unwrap();
        let nu = traffic_solve(&s).unwrap();
        let mu2 = 2.0 + l / 2.0 + d;
        assert!((nu[0] - (1.0 + d).powi(2) / (1.0 + l / 2.0)).abs() < 1e-14);
        assert!((nu[1] - (1.0 + d) * mu2 / (1.0 + l / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn no_arrivals_no_traffic() {
        let mut s = jackson_spec_for_gaps(4, 0.3, 2.0).unwrap();
        s.arrivals.iter_mut().for_each(|a| *a = 0.0);
        assert!(traffic_solve(&s).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_network_is_rejected() {
        let s = JacksonSpec {
            arrivals: vec![1.0, 0.0],
            services: vec![1.0, 1.0],
            routing: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            exit: vec![0.0, 0.0],
        };
        assert!(matches!(traffic_solve(&s), Err(Error::NoUniqueSolution(_))));
    }

    #[test]
    fn product_formula_for_loads() {
        for n in 2..=8 {
            let (d, l) = (0.4, 3.0);
            let s = jackson_spec_for_gaps(n, d, l).unwrap();
            let nu = traffic_solve(&s).unwrap();
            for j in 1..=n {
                let prod: f64 = (1..=n + 1 - j)
                    .map(|k| (1.0 + d) / (1.0 + l * (n - k) as f64 / n as f64))
                    .product();
                assert!((nu[j - 1] / s.services[j - 1] - prod).abs() < 1e-12, "n={n} j={j}");
            }
        }
    }

    #[test]
    fn stability_examples() {
        assert!(!jackson_ergodic(&jackson_spec_for_gaps(2, 0.5, 0.0).unwrap()).unwrap());
        assert!(jackson_ergodic(&jackson_spec_for_gaps(2, 1.0, 6.5).unwrap()).unwrap());
        assert!(!jackson_ergodic(&jackson_spec_for_gaps(2, 1.0, 5.5).unwrap()).unwrap());
    }

    #[test]
    fn unserved_node_must_be_idle() {
        let s = JacksonSpec {
            arrivals: vec![0.5, 0.0],
            services: vec![0.0, 1.0],
            routing: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            exit: vec![0.0, 1.0],
        };
        assert!(!jackson_ergodic(&s).unwrap());
    }
}
