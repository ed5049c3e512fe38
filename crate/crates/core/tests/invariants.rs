use num_complex::Complex64;
use proptest::prelude::*;

use tppp::analytic::{moment, success_prob};
use tppp::geometry::{default_window_radius, sample_tppp};
use tppp::metadist::{md_exact_curve, MdOptions};
use tppp::model::from_db;
use tppp::montecarlo::{estimate_success_prob, simulate_cond_success, SimConfig};
use tppp::{Execution, Model, NetworkParams};

const TOL: f64 = 1e-8;

fn params(lambda: f64, mu: f64, p: f64, theta_db: f64) -> NetworkParams {
    NetworkParams {
        lambda,
        mu,
        p,
        ..NetworkParams::default()
    }
    .with_theta(from_db(theta_db))
}

fn network() -> impl Strategy<Value = NetworkParams> {
    (0.05f64..5.0, 0.05f64..5.0, 0.01f64..1.0, -20.0f64..30.0).prop_map(|(l, m, p, t)| params(l, m, p, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn success_falls_with_threshold(net in network(), step in 0.5f64..10.0) {
        let harder = net.with_theta(net.theta * from_db(step));
        for model in [Model::Ppp2d, Model::TpppPlp, Model::PlpPpp] {
            let a = success_prob(model, &net, TOL).unwrap();
            let b = success_prob(model, &harder, TOL).unwrap();
            prop_assert!(b <= a + 1e-9, "{model}: {a} -> {b}");
        }
    }

    #[test]
    fn moments_are_ordered(net in network()) {
        for model in [Model::TpppPlp, Model::PlpPpp] {
            let m1 = moment(model, Complex64::new(1.0, 0.0), &net, TOL).unwrap().re;
            let m2 = moment(model, Complex64::new(2.0, 0.0), &net, TOL).unwrap().re;
            prop_assert!(m2 <= m1 + 1e-9, "{model}: M2 {m2} > M1 {m1}");
            prop_assert!(m1 * m1 <= m2 + 1e-9, "{model}: M1² {} > M2 {m2}", m1 * m1);
        }
    }

    #[test]
    fn transdimensional_model_is_pessimistic(net in network()) {
        let tppp = success_prob(Model::TpppPlp, &net, TOL).unwrap();
        let plp = success_prob(Model::PlpPpp, &net, TOL).unwrap();
        prop_assert!(tppp <= plp + 1e-9, "{tppp} > {plp}");
    }

    #[test]
    fn imaginary_moments_lie_in_unit_disc(net in network(), t in 0.0f64..200.0) {
        for model in [Model::TpppPlp, Model::PlpPpp] {
            let m = moment(model, Complex64::new(0.0, t), &net, TOL).unwrap();
            prop_assert!(m.norm() <= 1.0 + 1e-9, "{model}: |M| = {}", m.norm());
        }
    }

    #[test]
    fn exact_md_is_nonincreasing(lambda in 0.5f64..5.0, theta_db in -10.0f64..15.0) {
        let net = params(lambda, 1.0, 0.3, theta_db);
        let xs: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let md = md_exact_curve(Model::TpppPlp, &net, &xs, &MdOptions::with_tol(1e-4)).unwrap();
        for w in md.windows(2) {
            prop_assert!(w[1] <= w[0] + 2e-4, "{md:?}");
        }
        prop_assert!(md.iter().all(|v| (-1e-4..=1.0 + 1e-4).contains(v)));
    }
}

#[test]
fn same_seed_gives_same_realizations() {
    let net = NetworkParams::default();
    for model in [Model::TpppPlp, Model::PlpPpp] {
        let sim = SimConfig::new(200, 11);
        let a = simulate_cond_success(model, &net, &sim).unwrap();
        let b = simulate_cond_success(model, &net, &sim).unwrap();
        assert_eq!(a, b);
        let c = simulate_cond_success(model, &net, &SimConfig::new(200, 12)).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let net = NetworkParams::default();
    for model in [Model::TpppPlp, Model::PlpPpp, Model::Ppp2d] {
        let run = |exec| {
            let sim = SimConfig {
                exec,
                ..SimConfig::new(300, 5)
            };
            simulate_cond_success(model, &net, &sim).unwrap()
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }
    let xs = [0.2, 0.5, 0.8];
    let curve = |exec| {
        let opts = MdOptions {
            exec,
            ..MdOptions::with_tol(1e-4)
        };
        md_exact_curve(Model::TpppPlp, &net, &xs, &opts).unwrap()
    };
    assert_eq!(curve(Execution::Sequential), curve(Execution::Parallel));
}

#[test]
fn window_holds_the_relevant_interferers() {
    let net = NetworkParams::default();
    let r = default_window_radius(&net);
    assert!(r >= 4.0 * net.d_link);
    let strict = net.with_theta(net.theta * 100.0);
    assert!(default_window_radius(&strict) >= r);
    let pattern = sample_tppp(&net, r, 3).unwrap();
    let d = pattern.nearest_sq_distances(pattern.len());
    assert!(d.windows(2).all(|w| w[0] <= w[1]));
    assert!(d.iter().all(|&v| v <= r * r * (1.0 + 1e-12)));
}

#[test]
fn simulated_success_matches_closed_form_in_the_plane() {
    let net = NetworkParams::default();
    let exact = success_prob(Model::Ppp2d, &net, TOL).unwrap();
    let (mean, se) = estimate_success_prob(Model::Ppp2d, &net, &SimConfig::new(4000, 9)).unwrap();
    assert!((mean - exact).abs() < 4.0 * se, "{mean} ± {se} vs {exact}");
}
