use irw::lyapunov::{
    ergodic_certificate_search, transience_certificate, transience_region_values, ErgodicSearchOptions,
};
use irw::model::jump_rates;
use irw::{ModelSpec, ParticleState};

/// Nondecreasing sequences in `{0..top}^n`.
fn sorted_states(n: usize, top: u64) -> Vec<Vec<u64>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in sorted_states(n - 1, top) {
        let from = rest.last().copied().unwrap_or(0);
        for v in from..=top {
            let mut s = rest.clone();
            s.push(v);
            out.push(s);
        }
    }
    out
}

fn f(x: &[u64], eps: f64) -> f64 {
    x.iter().sum::<u64>() as f64 + eps * *x.iter().min().unwrap() as f64
}

/// Generator applied to `f` by summing over every transition.
fn lf(x: &[u64], model: &ModelSpec, eps: f64) -> f64 {
    let state = ParticleState(x.to_vec());
    jump_rates(&state, model)
        .unwrap()
        .iter()
        .map(|t| t.rate * (f(t.target.positions(), eps) - f(x, eps)))
        .sum()
}

#[test]
fn region_values_bound_the_drift_everywhere() {
    for n in 2..=5 {
        for (delta, lambda) in [(0.2, 0.5), (1.0, 3.0), (1.0, 6.0), (3.0, 10.0), (0.0, 1.0)] {
            let model = ModelSpec::small_jump(n, delta, lambda).unwrap();
            let window = 3.0 * lambda / (4.0 * n as f64);
            for j in 0..=10 {
                let eps = window * j as f64 / 10.0;
                let bounds = transience_region_values(n, delta, lambda, eps);
                for x in sorted_states(n, 6) {
                    let k = x.iter().filter(|&&v| v == x[0]).count();
                    let bound = bounds[k - 1];
                    let drift = lf(&x, &model, eps);
                    assert!(drift >= bound - 1e-12, "n={n} x={x:?} eps={eps} drift={drift} bound={bound}");
                }
            }
        }
    }
}

#[test]
fn certified_transience_means_positive_drift_on_the_box() {
    for (n, delta, lambda) in [(2, 1.0, 5.5), (3, 1.0, 3.3), (5, 0.5, 1.2)] {
        let eps = irw::lyapunov::epsilon_search(n, delta, lambda).unwrap().expect("feasible");
        let cert = transience_certificate(n, delta, lambda, eps).unwrap();
        assert!(cert.holds);
        let model = ModelSpec::small_jump(n, delta, lambda).unwrap();
        for x in sorted_states(n, 6) {
            assert!(lf(&x, &model, eps) > 0.0, "x={x:?}");
        }
    }
}

#[test]
fn ergodic_search_prototype_values() {
    let (n, delta, lambda) = (3, 0.1, 2.0);
    let core = |c| ErgodicSearchOptions {
        core: Some(c),
        ..Default::default()
    };
    let with_core_10 = ergodic_certificate_search(n, delta, lambda, &core(10)).unwrap();
    assert!(with_core_10.holds);
    assert!(with_core_10.gamma > 0.005);
    let with_core_5 = ergodic_certificate_search(n, delta, lambda, &core(5)).unwrap();
    assert!(with_core_5.gamma > 0.0 && with_core_5.gamma < with_core_10.gamma);
    let without_core = ergodic_certificate_search(n, delta, lambda, &core(0)).unwrap();
    assert!(!without_core.holds);
}

#[test]
fn search_fails_deep_in_the_transient_region() {
    // below the continuum threshold the drift of V cannot be negative far out
    let opts = ErgodicSearchOptions {
        c_grid: Some(vec![0.1, 0.5, 0.9]),
        ..Default::default()
    };
    let cert = ergodic_certificate_search(2, 1.0, 1.0, &opts).unwrap();
    assert!(!cert.holds);
}
