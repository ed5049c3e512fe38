use tppp::analytic::success_prob;
use tppp::congestion::{contour_success, ContourRequest};
use tppp::geometry::default_window_radius;
use tppp::metadist::{md_beta, md_exact, md_exact_curve, MdOptions};
use tppp::model::from_db;
use tppp::montecarlo::{estimate_md, estimate_success_prob, SimConfig};
use tppp::{Model, NetworkParams};

#[test]
fn window_radius_sanity() {
    let net = NetworkParams::default();
    let r = default_window_radius(&net);
    let run = |radius: f64| {
        let sim = SimConfig {
            window_radius: Some(radius),
            ..SimConfig::new(20_000, 21)
        };
        estimate_success_prob(Model::TpppPlp, &net, &sim).unwrap()
    };
    let (base, se_base) = run(r);
    let (half, se_half) = run(0.5 * r);
    let (double, se_double) = run(2.0 * r);
    let truncation_bound = 1e-4;
    assert!(half - base > truncation_bound, "half {half} vs {base}");
    let se = (se_base.powi(2) + se_double.powi(2)).sqrt();
    assert!((double - base).abs() < 2.0 * se, "double {double} vs {base} ± {se}");
    assert!(se_half > 0.0);
}

#[test]
fn transition_near_one_minus_p() {
    let net = NetworkParams::default().with_theta(from_db(-30.0));
    let xs: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    let md = estimate_md(Model::PlpPpp, &net, &SimConfig::new(20_000, 4).with_x_grid(xs.clone())).unwrap();
    let at = |x: f64| md.survival[xs.iter().position(|v| (v - x).abs() < 1e-9).unwrap()];
    let edge = 1.0 - net.p;
    let drop = at(edge - 0.05) - at(edge + 0.05);
    // one vehicle inside the near-field disc: about 2λ·0.67·s^{1/α}
    let single = 2.0 * net.lambda * 0.67 * (net.theta * net.d_link.powf(net.alpha)).powf(1.0 / net.alpha);
    assert!((drop - single).abs() < 0.3 * single, "drop across 1-p: {drop} vs {single}");
    let elsewhere = (1..=90)
        .map(|i| {
            let lo = 0.005 * i as f64;
            at(lo) - at(lo + 0.1)
        })
        .fold(0.0, f64::max);
    assert!(drop > 5.0 * elsewhere, "{drop} vs {elsewhere}");
    assert!(md.survival[0] > 0.99);
}

#[test]
fn planar_exact_md_matches_simulation() {
    let net = NetworkParams::default();
    let xs: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    let exact = md_exact_curve(Model::Ppp2d, &net, &xs, &MdOptions::with_tol(1e-4)).unwrap();
    let empirical = estimate_md(Model::Ppp2d, &net, &SimConfig::new(20_000, 2).with_x_grid(xs)).unwrap();
    let gap = empirical.sup_gap_to(&exact);
    assert!(gap < 0.02, "{gap}");
}

#[test]
fn beta_is_tight_at_the_ends() {
    let net = NetworkParams::default();
    let dense = net.with_lambda(10.0).with_p(0.03);
    let opts = MdOptions::with_tol(1e-4);
    for (model, at) in [(Model::TpppPlp, net), (Model::Ppp2d, net), (Model::PlpPpp, dense)] {
        // low reliabilities at the nominal threshold, high ones at a strict threshold
        for (x, at) in [(1e-4, at), (1.0 - 1e-5, at.with_theta(10.0))] {
            let e = md_exact(model, &at, x, &opts).unwrap();
            let b = md_beta(model, &at, x, 1e-8).unwrap();
            assert!((e - b).abs() < 1e-3, "{model} at x={x}: {e} vs {b}");
        }
    }
}

#[test]
fn success_is_monotone_in_every_parameter() {
    let base = NetworkParams::default();
    let bumps: [fn(NetworkParams) -> NetworkParams; 5] = [
        |n| n.with_theta(n.theta * 2.0),
        |n| n.with_lambda(n.lambda * 2.0),
        |n| n.with_p(n.p * 2.0),
        |n| NetworkParams { mu: n.mu * 2.0, ..n },
        |n| NetworkParams {
            d_link: n.d_link * 2.0,
            ..n
        },
    ];
    for model in [Model::Ppp1d, Model::Ppp2d, Model::TpppPlp, Model::PlpPpp] {
        for bump in bumps {
            let before = success_prob(model, &base, 1e-9).unwrap();
            let after = success_prob(model, &bump(base), 1e-9).unwrap();
            assert!(after <= before + 1e-12, "{model}: {before} -> {after}");
        }
    }
}

#[test]
fn higher_targets_need_lower_rates() {
    let lambda_grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.25).collect();
    let contour = |q: f64| {
        contour_success(&ContourRequest {
            target_q: q,
            reliability_x: None,
            lambda_grid: lambda_grid.clone(),
            params: NetworkParams::default(),
        })
        .unwrap()
    };
    let mut previous = contour(0.5);
    for q in [0.7, 0.9, 0.95, 0.99] {
        let next = contour(q);
        for (a, b) in previous.iter().zip(&next) {
            assert!(b.p <= a.p, "λ={}: {} -> {}", a.lambda, a.p, b.p);
            assert!(b.p > 0.0 && b.p <= 1.0);
        }
        previous = next;
    }
}
