use std::collections::BTreeMap;

use irw::gaps::{from_gaps, gap_rates_2, pi2, simulate_gaps_2, to_gaps, GapState};
use irw::model::jump_rates;
use irw::sim::Engine;
use irw::ModelSpec;

/// Gap-coordinate rates obtained by pushing the particle generator forward.
fn pushed_forward(g: &GapState, model: &ModelSpec) -> BTreeMap<GapState, f64> {
    let state = from_gaps(g);
    let mut out = BTreeMap::new();
    for t in jump_rates(&state, model).unwrap() {
        let target = to_gaps(&t.target);
        if &target != g {
            *out.entry(target).or_insert(0.0) += t.rate;
        }
    }
    out
}

#[test]
fn gap_rates_are_the_pushforward_of_particle_rates() {
    for (delta, lambda) in [(0.0, 2.0), (0.5, 4.0), (1.3, 0.7)] {
        let model = ModelSpec::small_jump(2, delta, lambda).unwrap();
        for x in 0..20 {
            for y in 0..20 {
                let g = GapState(vec![x, y]);
                let expected = pushed_forward(&g, &model);
                let mut got = BTreeMap::new();
                for t in gap_rates_2(&g, delta, lambda).unwrap() {
                    *got.entry(t.target).or_insert(0.0) += t.rate;
                }
                assert_eq!(got.len(), expected.len(), "({x},{y})");
                for (k, r) in &expected {
                    assert!((got[k] - r).abs() < 1e-12, "({x},{y}) -> {k:?}");
                }
            }
        }
    }
}

#[test]
fn direct_gap_simulation_matches_product_form() {
    let (delta, lambda) = (0.5, 4.0);
    let law = pi2(delta, lambda, 1e-12).unwrap();
    let occ = simulate_gaps_2(delta, lambda, 1_000_000, 17).unwrap();
    let mut tv = 0.0;
    let mut seen = 0.0;
    for (&(x, y), p) in &occ {
        let exact = law.density(x, y);
        seen += exact;
        tv += (p - exact).abs();
    }
    tv = 0.5 * (tv + 1.0 - seen);
    assert!(tv < 0.02, "tv={tv}");
}

#[test]
fn lowest_particle_sits_at_zero_half_the_time() {
    // δ = 0, λ = 2: the x-marginal is geometric with ratio 1/2
    let model = ModelSpec::small_jump(2, 0.0, 2.0).unwrap();
    let law = pi2(0.0, 2.0, 1e-12).unwrap();
    let expected = law.x_marginal(0);
    assert!((expected - 0.5).abs() < 1e-10);
    let mut engine = Engine::new(&model, &irw::ParticleState::zeros(2)).unwrap();
    let mut rng = irw::rng::stream(5, &[]);
    let horizon = 1e5;
    let mut at_zero = 0.0;
    let mut last = 0.0;
    let mut min = 0;
    while engine.advance(horizon, &mut rng).unwrap().is_some() {
        if min == 0 {
            at_zero += engine.time() - last;
        }
        last = engine.time();
        min = engine.min_position();
    }
    if min == 0 {
        at_zero += horizon - last;
    }
    let fraction = at_zero / horizon;
    assert!((fraction - expected).abs() < 0.02, "fraction={fraction}");
}
