use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stosszahl_core::master::{
    build_master_operator, equilibrium, evolve_probabilities, relative_entropy, two_state_closed_form, MasterOperator,
    RateMatrix,
};
use stosszahl_core::sampling::{random_generator, random_probabilities};
use stosszahl_core::{shannon_entropy, ProbabilityVector, SimRng};

/// Fixed-step classical RK4 on dp/dt = M p; independent of the exponential.
fn rk4(m: &DMatrix<f64>, p0: &[f64], t: f64, max_step: f64) -> Vec<f64> {
    let steps = (t / max_step).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut p = DVector::from_column_slice(p0);
    for _ in 0..steps {
        let k1 = m * &p;
        let k2 = m * (&p + &k1 * (h / 2.0));
        let k3 = m * (&p + &k2 * (h / 2.0));
        let k4 = m * (&p + &k3 * h);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    p.iter().copied().collect()
}

#[test]
fn matches_closed_form_on_random_pairs() {
    let mut rng = SimRng::new(7);
    for _ in 0..10 {
        let r12 = 0.05 + 3.0 * rng.uniform();
        let r21 = 0.05 + 3.0 * rng.uniform();
        let p0 = random_probabilities(2, &mut rng).unwrap();
        let m = build_master_operator(&RateMatrix::two_state(r12, r21).unwrap());
        for i in 0..20 {
            let t = i as f64 * 0.25;
            let num = evolve_probabilities(&m, &p0, t).unwrap();
            let exact = two_state_closed_form(r12, r21, &p0, t).unwrap();
            for k in 0..2 {
                assert!((num[k] - exact[k]).abs() < 1e-8, "r=({r12},{r21}) t={t}");
            }
        }
    }
}

#[test]
fn matches_rk4_on_random_generators() {
    let mut rng = SimRng::new(8);
    for case in 0..20 {
        let n = 2 + case % 5;
        let m = random_generator(n, 0.1, 2.0, false, &mut rng).unwrap();
        let p0 = random_probabilities(n, &mut rng).unwrap();
        // fastest timescale bounded by the largest exit rate
        let fastest = (0..n).map(|j| -m.matrix()[(j, j)]).fold(0.0, f64::max);
        let step = 1e-3 / fastest;
        for &t in &[0.3, 1.0, 2.5] {
            let num = evolve_probabilities(&m, &p0, t).unwrap();
            let oracle = rk4(m.matrix(), p0.as_slice(), t, step);
            for k in 0..n {
                assert!((num[k] - oracle[k]).abs() < 1e-6, "case {case} t {t}");
            }
        }
    }
}

#[test]
fn initial_information_decays_exponentially() {
    let mut rng = SimRng::new(9);
    for _ in 0..10 {
        let r = 0.1 + 2.0 * rng.uniform();
        let m = build_master_operator(&RateMatrix::two_state(r, r).unwrap());
        let p_eq = equilibrium(&m).unwrap();
        let p0 = random_probabilities(2, &mut rng).unwrap();
        let dist0 = (p0[0] - p_eq[0]).abs().max((p0[1] - p_eq[1]).abs());
        for i in 0..30 {
            let t = i as f64 * 0.2;
            let p = evolve_probabilities(&m, &p0, t).unwrap();
            let dist = (p[0] - p_eq[0]).abs().max((p[1] - p_eq[1]).abs());
            assert!(dist <= (-2.0 * r * t).exp() * dist0 + 1e-9);
        }
    }
}

fn lyapunov_checks(m: &MasterOperator, p0: &ProbabilityVector, times: &[f64]) -> Result<(), TestCaseError> {
    let p_eq = equilibrium(m).unwrap();
    prop_assert!((m.matrix() * DVector::from_column_slice(p_eq.as_slice())).amax() < 1e-10);
    let mut prev_d = f64::INFINITY;
    let mut prev_s = f64::NEG_INFINITY;
    let symmetric = m.is_symmetric(0.0);
    for &t in times {
        let p = evolve_probabilities(m, p0, t).unwrap();
        prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.as_slice().iter().all(|&x| x >= -1e-10));
        let d = relative_entropy(&p, &p_eq).unwrap();
        prop_assert!(d <= prev_d + 1e-10, "D rose from {} to {} at t={}", prev_d, d, t);
        prev_d = d;
        if symmetric {
            let s = shannon_entropy(&p);
            prop_assert!(s >= prev_s - 1e-10, "S fell from {} to {} at t={}", prev_s, s, t);
            prev_s = s;
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relative_entropy_is_a_lyapunov_function(seed in any::<u64>(), n in 2usize..=6, symmetric in any::<bool>()) {
        let mut rng = SimRng::new(seed);
        let m = random_generator(n, 0.05, 3.0, symmetric, &mut rng).unwrap();
        let p0 = if rng.uniform() < 0.5 {
            ProbabilityVector::point(n, rng.index(n)).unwrap()
        } else {
            random_probabilities(n, &mut rng).unwrap()
        };
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        lyapunov_checks(&m, &p0, &times)?;
    }

    #[test]
    fn equilibrium_is_stationary_and_attracting(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = SimRng::new(seed);
        let m = random_generator(n, 0.2, 2.0, false, &mut rng).unwrap();
        let p_eq = equilibrium(&m).unwrap();
        let still = evolve_probabilities(&m, &p_eq, 3.0).unwrap();
        prop_assert!(still.total_variation(&p_eq).unwrap() < 1e-10);
        let p0 = random_probabilities(n, &mut rng).unwrap();
        let late = evolve_probabilities(&m, &p0, 200.0).unwrap();
        prop_assert!(late.total_variation(&p_eq).unwrap() < 1e-8);
    }
}
