use proptest::prelude::*;
use robo_mv::numeric::mean_and_se;
use robo_mv::{rng, MarketParams};

#[test]
fn long_chain_occupation_matches_stationary_distribution() {
    let m = MarketParams::two_regime_example();
    let lam = m.stationary_distribution().unwrap();
    let mut g = rng::master(1);
    let mut y = 0;
    let steps = 1_000_000;
    let batch = steps / 100;
    let mut fractions = Vec::new();
    let mut count = 0usize;
    for n in 1..=steps {
        y = m.sample_next_regime(y, &mut g);
        count += y;
        if n % batch == 0 {
            fractions.push(count as f64 / batch as f64);
            count = 0;
        }
    }
    let (mean, se) = mean_and_se(&fractions);
    assert!((mean - lam[1]).abs() < 4.0 * se, "{mean} vs {} (se {se})", lam[1]);
}

#[test]
fn sampled_returns_have_per_step_moments() {
    let m = MarketParams::two_regime_example();
    for y in 0..2 {
        let s = m.step(y);
        let mut g = rng::master(20 + y as u64);
        let n = 200_000;
        let zs: Vec<f64> = (0..n).map(|_| m.sample_step(y, &mut g).1).collect();
        let (mean, se) = mean_and_se(&zs);
        assert!((mean - s.mu).abs() < 4.0 * se);
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let var_se = s.sigma * s.sigma * (2.0 / n as f64).sqrt();
        assert!((var - s.sigma * s.sigma).abs() < 4.0 * var_se, "regime {y}: {var}");
    }
}

#[test]
fn per_step_conversion_round_trips() {
    let m = MarketParams::two_regime_example();
    let k = m.steps_per_year as f64;
    for y in 0..2 {
        let s = m.step(y);
        assert!((s.sigma * k.sqrt() - m.vol_return[y]).abs() < 1e-15);
        assert!((s.mu * k - m.mean_return[y]).abs() < 1e-15);
        assert!((s.gross_rf - 1.0 - m.risk_free[y] / k).abs() < 1e-15);
        assert!((s.mu_tilde - (m.mean_return[y] - m.risk_free[y]) / k).abs() < 1e-15);
    }
}

#[test]
fn reducible_chain_is_rejected() {
    let mut m = MarketParams::two_regime_example();
    m.transition = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    assert!(m.stationary_distribution().is_err());
}

fn stochastic_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 3).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn stationary_distribution_is_invariant(p in stochastic_matrix()) {
        let m = MarketParams {
            num_states: 3,
            transition: p.clone(),
            risk_free: vec![0.0; 3],
            mean_return: vec![0.05; 3],
            vol_return: vec![0.2; 3],
            steps_per_year: 12,
        };
        let lam = m.stationary_distribution().unwrap();
        prop_assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..3 {
            let lp: f64 = (0..3).map(|i| lam[i] * p[i][j]).sum();
            prop_assert!((lp - lam[j]).abs() < 1e-12);
        }
    }
}
