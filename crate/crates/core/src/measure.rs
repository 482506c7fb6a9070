//! Finite-support probability measures on the nonnegative integers.
//!
//! A [`ProbabilityVector`] stores the masses of `0..=L` together with a
//! certified upper bound on the mass that lives beyond `L`. The invariant
//! `Σ mass + tail_bound = 1` holds to [`NORMALISATION_SLACK`].

use crate::error::{Error, Result};

/// Allowed deviation of `Σ mass + tail_bound` from one.
pub const NORMALISATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    mass: Vec<f64>,
    tail_bound: f64,
}

impl ProbabilityVector {
    pub fn new(mass: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::invalid("probability vector needs at least one site"));
        }
        if let Some((x, m)) = mass
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(Error::invalid(format!("mass at {x} is {m}")));
        }
        if !tail_bound.is_finite() || tail_bound < 0.0 {
            return Err(Error::invalid(format!("tail bound {tail_bound}")));
        }
        let total = compensated_sum(mass.iter().copied()) + tail_bound;
        if (total - 1.0).abs() > NORMALISATION_SLACK {
            return Err(Error::invalid(format!(
                "total mass {total} differs from one by {:e}",
                total - 1.0
            )));
        }
        Ok(Self { mass, tail_bound })
    }

    /// Normalises nonnegative weights; the result carries no tail.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total = compensated_sum(weights.iter().copied());
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::invalid("weights must be nonnegative with a positive sum"));
        }
        Self::new(weights.iter().map(|w| w / total).collect(), 0.0)
    }

    /// Normalises `weights` (on `0..=L`) together with an upper bound on the
    /// unnormalised weight beyond `L`. The tail bound is folded into the
    /// normaliser so the invariant holds whatever the tolerance was.
    pub(crate) fn from_weights_with_tail(weights: Vec<f64>, tail_weight: f64) -> Result<Self> {
        let window = compensated_sum(weights.iter().copied());
        let z = window + tail_weight;
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::NonNormalizable(format!("normaliser {z}")));
        }
        let mass = weights.into_iter().map(|w| w / z).collect();
        Self::new(mass, tail_weight / z)
    }

    pub fn point_mass(site: usize) -> Self {
        let mut mass = vec![0.0; site + 1];
        mass[site] = 1.0;
        Self {
            mass,
            tail_bound: 0.0,
        }
    }

    /// Uniform law on `0..=upper`.
    pub fn uniform(upper: usize) -> Self {
        let p = 1.0 / (upper + 1) as f64;
        Self {
            mass: vec![p; upper + 1],
            tail_bound: 0.0,
        }
    }

    /// Largest site carried explicitly.
    pub fn support_bound(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn get(&self, x: usize) -> f64 {
        self.mass.get(x).copied().unwrap_or(0.0)
    }

    pub fn window_mass(&self) -> f64 {
        compensated_sum(self.mass.iter().copied())
    }

    /// μ[0, x].
    pub fn cdf(&self, x: usize) -> f64 {
        let end = x.min(self.support_bound());
        compensated_sum(self.mass[..=end].iter().copied())
    }

    /// Cumulative sums μ[0, x] for every explicit site.
    pub fn cdf_table(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut comp = 0.0;
        self.mass
            .iter()
            .map(|&m| {
                neumaier_add(&mut acc, &mut comp, m);
                acc + comp
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.mass.iter().enumerate().map(|(x, m)| x as f64 * m))
    }

    /// Smallest `m` with μ[0, m] ≥ 1/2. When the explicit window never reaches
    /// one half (a tail heavier than 1/2) the first site past the window is
    /// returned, which is a lower bound.
    pub fn median(&self) -> usize {
        self.cdf_table()
            .iter()
            .position(|&c| c >= 0.5)
            .unwrap_or(self.mass.len())
    }

    /// Total-variation distance, counting both tail bounds as possible
    /// disagreement, so the value is an upper bound.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let n = self.mass.len().max(other.mass.len());
        let diff = compensated_sum((0..n).map(|x| (self.get(x) - other.get(x)).abs()));
        0.5 * (diff + self.tail_bound + other.tail_bound)
    }

    /// Usual stochastic order `self ⪯ other`: μ[0,x] ≥ ν[0,x] for every x,
    /// up to `slack` on each comparison.
    pub fn stochastically_le(&self, other: &Self, slack: f64) -> bool {
        let a = self.cdf_table();
        let b = other.cdf_table();
        let n = a.len().max(b.len());
        (0..n).all(|x| {
            let ca = a.get(x).copied().unwrap_or(1.0 - self.tail_bound);
            let cb = b.get(x).copied().unwrap_or(1.0 - other.tail_bound);
            ca + slack >= cb
        })
    }

    /// Σ_{x≥1} μ[0, x−1] μ(x): the probability that of two independent
    /// draws the second lands strictly above the first.
    pub fn lower_pair_sum(&self) -> f64 {
        let mut below = 0.0;
        let mut terms = Vec::with_capacity(self.mass.len());
        for &m in &self.mass {
            terms.push(below * m);
            below += m;
        }
        compensated_sum(terms.into_iter())
    }
}

/// Neumaier-compensated summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        neumaier_add(&mut sum, &mut comp, v);
    }
    sum + comp
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalised() {
        assert!(ProbabilityVector::new(vec![0.5, 0.4], 0.0).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.4], 0.1).is_ok());
        assert!(ProbabilityVector::new(vec![1.1, -0.1], 0.0).is_err());
        assert!(ProbabilityVector::new(vec![], 1.0).is_err());
    }

    #[test]
    fn median_convention() {
        assert_eq!(ProbabilityVector::point_mass(7).median(), 7);
        assert_eq!(ProbabilityVector::uniform(1).median(), 0);
        let geo: Vec<f64> = (0..80).map(|x| 0.5f64.powi(x + 1)).collect();
        let tail = 0.5f64.powi(80);
        assert_eq!(ProbabilityVector::new(geo, tail).unwrap().median(), 0);
    }

    #[test]
    fn stochastic_order_and_tv() {
        let a = ProbabilityVector::point_mass(1);
        let b = ProbabilityVector::point_mass(3);
        assert!(a.stochastically_le(&b, 0.0));
        assert!(!b.stochastically_le(&a, 0.0));
        assert_eq!(a.total_variation(&b), 1.0);
        assert_eq!(a.total_variation(&a), 0.0);
    }

    #[test]
    fn lower_pair_sum_of_two_point_uniform() {
        // pairs (0,1) only: 1/2 * 1/2
        assert!((ProbabilityVector::uniform(1).lower_pair_sum() - 0.25).abs() < 1e-15);
    }
}
