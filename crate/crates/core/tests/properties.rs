use proptest::prelude::*;

use irw::gaps::{from_gaps, to_gaps};
use irw::lyapunov::{drift_v, interaction_weight, pile_height, weighted_interaction, eval_v};
use irw::nonlinear::{bd_stationary, dominating_pi_m, find_m_star, DEFAULT_TRUNCATION};
use irw::{ModelSpec, ParticleState, ProbabilityVector};

fn measure() -> impl Strategy<Value = ProbabilityVector> {
    (prop::collection::vec(0.0f64..1.0, 0..50), 0.05f64..1.0).prop_map(|(mut w, last)| {
        w.push(last);
        ProbabilityVector::from_weights(&w).unwrap()
    })
}

/// `mu` together with a stochastically larger measure, built by moving every
/// atom up by its own shift.
fn ordered_pair() -> impl Strategy<Value = (ProbabilityVector, ProbabilityVector)> {
    measure().prop_flat_map(|mu| {
        let n = mu.mass().len();
        (Just(mu), prop::collection::vec(0usize..8, n)).prop_map(|(mu, shifts)| {
            let mut up = vec![0.0; mu.mass().len() + 8];
            for (x, (p, s)) in mu.mass().iter().zip(&shifts).enumerate() {
                up[x + s] += p;
            }
            let larger = ProbabilityVector::from_weights(&up).unwrap();
            (mu, larger)
        })
    })
}

fn rates() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..1.5).prop_flat_map(|d| (Just(d), (2.0 * d + 0.1)..(2.0 * d + 6.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lower_pair_sum_is_below_one_half(mu in measure()) {
        let s = mu.lower_pair_sum();
        let squares: f64 = mu.mass().iter().map(|p| p * p).sum();
        prop_assert!(s < 0.5);
        prop_assert!((s - (1.0 - squares) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_is_isotone((mu, larger) in ordered_pair(), (delta, lambda) in rates()) {
        prop_assume!(lambda > delta);
        prop_assert!(mu.stochastically_le(&larger, 1e-12));
        let a = bd_stationary(&mu, delta, lambda, DEFAULT_TRUNCATION).unwrap();
        let b = bd_stationary(&larger, delta, lambda, DEFAULT_TRUNCATION).unwrap();
        prop_assert!(a.stochastically_le(&b, 1e-12));
    }

    #[test]
    fn gamma_is_dominated_at_the_median(mu in measure(), (delta, lambda) in rates()) {
        let pi = bd_stationary(&mu, delta, lambda, DEFAULT_TRUNCATION).unwrap();
        let dom = dominating_pi_m(mu.median(), delta, lambda).unwrap();
        prop_assert!(pi.stochastically_le(&dom, 1e-12));
    }

    #[test]
    fn dominated_set_is_invariant(delta in 0.0f64..1.0, extra in 0.1f64..6.0, w in 0.0f64..1.0) {
        let lambda = 4.0 * delta + extra;
        let m = find_m_star(delta, lambda).unwrap();
        let top = dominating_pi_m(m, delta, lambda).unwrap();
        // mixtures of π_{m*} with δ₀ stay below π_{m*}
        let mass: Vec<f64> = top
            .mass()
            .iter()
            .enumerate()
            .map(|(x, p)| w * p + if x == 0 { 1.0 - w } else { 0.0 })
            .collect();
        let mu = ProbabilityVector::new(mass, w * top.tail_bound()).unwrap();
        prop_assert!(mu.stochastically_le(&top, 1e-12));
        let image = bd_stationary(&mu, delta, lambda, DEFAULT_TRUNCATION).unwrap();
        prop_assert!(image.stochastically_le(&top, 1e-12));
    }

    #[test]
    fn gaps_round_trip(x in prop::collection::vec(0u64..1000, 1..12)) {
        let g = to_gaps(&ParticleState(x.clone()));
        let mut sorted = x;
        sorted.sort_unstable();
        prop_assert_eq!(from_gaps(&g).0, sorted);
    }

    #[test]
    fn pile_and_interaction_bounds(x in prop::collection::vec(0u64..6, 1..10), alpha in 0.01f64..1.0) {
        let n = x.len() as f64;
        let h = pile_height(&x) as f64;
        let k = interaction_weight(&x);
        prop_assert!(k + 1e-15 >= (h / n) * (1.0 - h / n));
        // both e^{αx} and μ_N[0, x) increase in x
        let psi = x.iter().map(|&v| (alpha * v as f64).exp()).sum::<f64>() / n;
        prop_assert!(weighted_interaction(&x, alpha) + 1e-12 * psi >= psi * k);
    }

    #[test]
    fn drift_decomposition_holds(
        x in prop::collection::vec(0u64..80, 2..7),
        delta in 0.0f64..2.0,
        lambda in 0.0f64..10.0,
        alpha in 0.001f64..0.5,
        beta in 0.001f64..2.0,
    ) {
        let model = ModelSpec::small_jump(x.len(), delta, lambda).unwrap();
        let state = ParticleState(x);
        let d = drift_v(&state, &model, alpha, beta).unwrap();
        prop_assert!(d.decomposition_gap() < 1e-10);
        prop_assert!((d.value_v - eval_v(state.positions(), alpha, beta)).abs() <= 1e-12 * d.value_v);
    }
}
