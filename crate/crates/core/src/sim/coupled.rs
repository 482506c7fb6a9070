use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParticleState};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    /// Clock rings processed, including those that moved neither copy.
    pub events: u64,
    /// Rings after which some `y_i > x_i`.
    pub violations: u64,
    pub first_violation: Option<f64>,
    pub final_x: ParticleState,
    pub final_y: ParticleState,
}

/// Drives a small-jump system `X` and a second system `Y` with the same
/// parameters off shared clocks: per-particle up and intrinsic-down clocks,
/// and one clock of rate `λ/N` per ordered pair `(i, k)`. A pair ring moves
/// `x_i` down by one when `x_k < x_i`, and moves `y_i` down by `ψ` when
/// `y_k < y_i`, thinned by `φ`. Counts the rings after which `Y ≤ X` fails
/// componentwise.
pub fn coupled_domination(
    x_model: &ModelSpec,
    y_model: &ModelSpec,
    init_x: &ParticleState,
    init_y: &ParticleState,
    horizon: f64,
    seed: u64,
    max_events: u64,
) -> Result<CouplingReport> {
    x_model.validate()?;
    y_model.validate()?;
    if !x_model.kernel.is_small_jump() {
        return Err(Error::UnsupportedKernel("the dominating copy must use the small-jump kernel".into()));
    }
    if !x_model.same_parameters(y_model) {
        return Err(Error::invalid("coupled models must share N, delta and lambda"));
    }
    init_x.check_against(x_model)?;
    init_y.check_against(y_model)?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::invalid(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let n = x_model.n_particles;
    let (delta, lambda) = (x_model.delta, x_model.lambda);
    let mut x = init_x.positions().to_vec();
    let mut y = init_y.positions().to_vec();
    let dominated = |x: &[u64], y: &[u64]| y.iter().zip(x).all(|(a, b)| a <= b);

    let up = n as f64 * (1.0 + delta);
    let down = n as f64;
    let pairs = if n > 1 { lambda * (n - 1) as f64 } else { 0.0 };
    let total = up + down + pairs;
    let mut rng = rng::stream(seed, &[]);
    let mut t = 0.0;
    let mut report = CouplingReport {
        events: 0,
        violations: 0,
        first_violation: None,
        final_x: init_x.clone(),
        final_y: init_y.clone(),
    };
    loop {
        t += rng.sample::<f64, _>(Exp1) / total;
        if t > horizon {
            break;
        }
        if report.events >= max_events {
            return Err(Error::BudgetExceeded {
                events: max_events,
                reached: t,
                partial: None,
            });
        }
        report.events += 1;
        let u = rng.random::<f64>() * total;
        let i = rng.random_range(0..n);
        if u < up {
            x[i] += 1;
            y[i] += 1;
        } else if u < up + down {
            x[i] = x[i].saturating_sub(1);
            y[i] = y[i].saturating_sub(1);
        } else {
            let mut k = rng.random_range(0..n - 1);
            if k >= i {
                k += 1;
            }
            let thin = rng.random::<f64>();
            if x[k] < x[i] {
                x[i] -= 1;
            }
            if y[k] < y[i] && thin < y_model.kernel.phi(y[i], y[k]) {
                y[i] = y[i].saturating_sub(y_model.kernel.psi(y[i], y[k]));
            }
        }
        if !dominated(&x, &y) {
            report.violations += 1;
            report.first_violation.get_or_insert(t);
        }
    }
    report.final_x = ParticleState(x);
    report.final_y = ParticleState(y);
    Ok(report)
}
