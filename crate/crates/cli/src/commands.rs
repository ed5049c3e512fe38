//! The subcommands. Each writes its files through [`Outputs`] and returns a
//! JSON summary for the manifest.

use std::sync::Mutex;
use std::time::Instant;

use serde_json::{json, Value};
use tppp::analytic::{asymptote_theta0, asymptote_theta_inf, max_success_gap, success_prob};
use tppp::congestion::{
    contour_md, contour_success, success_range_along_md_contour, validate_against_exact, ContourPoint,
    ContourRequest, Reference,
};
use tppp::exec::map_slice;
use tppp::geometry::{default_window_radius, nn_distance_moments, replicate_rng, sample_pattern_with};
use tppp::metadist::{md_exact, md_exact_curve, psp_beta, theta_db_for_md, BetaMd, MdMethod, MdOptions};
use tppp::model::{from_db, to_db};
use tppp::montecarlo::{simulate_cond_success, uniform_x_grid, EmpiricalMd, SampleStats, SimConfig};
use tppp::{Execution, Model, NetworkParams};

use crate::config::{
    ContourConfig, Curve, Limit, MaxgapConfig, MetadistConfig, SimOutput, SimulateConfig, SuccessConfig,
    ValidationMethod,
};
use crate::output::{num, Outputs, PartialError};
use crate::CliError;

/// Reliabilities are kept this far inside (0, 1).
const X_CLAMP: f64 = 1e-6;

/// Shared state of one command run.
#[derive(Debug)]
pub struct Run {
    pub seed: u64,
    pub exec: Execution,
    partial: Mutex<Vec<PartialError>>,
}

impl Run {
    pub fn new(seed: u64, exec: Execution) -> Self {
        Self {
            seed,
            exec,
            partial: Mutex::new(Vec::new()),
        }
    }

    /// Passes values through, keeps best estimates from methods that ran out
    /// of budget, and fails on anything else.
    pub fn settle<F>(&self, r: tppp::Result<f64>, context: F) -> Result<f64, CliError>
    where
        F: FnOnce() -> String,
    {
        match r {
            Ok(v) => Ok(v),
            Err(e) if e.is_convergence_failure() => {
                let value = e.partial_value();
                let context = context();
                log::warn!("{context}: {e}");
                self.partial.lock().expect("poisoned").push(PartialError {
                    context,
                    message: e.to_string(),
                    partial_value: value,
                });
                Ok(value.unwrap_or(f64::NAN))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn into_partial(self) -> Vec<PartialError> {
        self.partial.into_inner().expect("poisoned")
    }

    fn sim(&self, n_realizations: usize) -> SimConfig {
        SimConfig {
            exec: self.exec,
            ..SimConfig::new(n_realizations, self.seed)
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

/// Clamps reliabilities into the open unit interval and checks ordering.
fn reliability_grid(xs: Vec<f64>) -> Result<Vec<f64>, CliError> {
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(CliError::Config("reliabilities must lie in [0, 1]".into()));
    }
    let xs: Vec<f64> = xs.into_iter().map(|x| x.clamp(X_CLAMP, 1.0 - X_CLAMP)).collect();
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("reliabilities must be strictly increasing".into()));
    }
    Ok(xs)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn success(cfg: &SuccessConfig, run: &Run, out: &mut Outputs) -> Result<Value, CliError> {
    cfg.params.derived().map_err(tppp::Error::from)?;
    positive("tol", cfg.tol)?;
    let dbs = cfg.theta_db.values()?;
    let jobs: Vec<(f64, Curve)> = dbs
        .iter()
        .flat_map(|&db| cfg.models.iter().map(move |&c| (db, c)))
        .collect();
    let results = map_slice(run.exec, &jobs, |&(db, curve)| {
        let params = cfg.params.with_theta(from_db(db));
        let start = Instant::now();
        let value = match curve {
            Curve::Model(m) => success_prob(m, &params, cfg.tol),
            Curve::Limit(Limit::LimitLowTheta) => Ok(1.0 - asymptote_theta0(&params, params.theta)),
            Curve::Limit(Limit::LimitHighTheta) => Ok(asymptote_theta_inf(&params, params.theta)),
        };
        (value, start.elapsed().as_secs_f64())
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut seconds = vec![0.0; cfg.models.len()];
    for (k, (&(db, curve), (value, secs))) in jobs.iter().zip(results).enumerate() {
        let v = run.settle(value, || format!("{} at {db} dB", curve.name()))?;
        seconds[k % cfg.models.len()] += secs;
        rows.push(vec![num(db), num(from_db(db)), curve.name().to_owned(), num(v)]);
    }
    out.csv("success.csv", &["theta_db", "theta", "model", "value"], rows)?;

    let mean_seconds: serde_json::Map<String, Value> = cfg
        .models
        .iter()
        .zip(&seconds)
        .map(|(c, s)| (c.name().to_owned(), json!(s / dbs.len().max(1) as f64)))
        .collect();
    let time_of = |m: Model| {
        cfg.models
            .iter()
            .position(|&c| c == Curve::Model(m))
            .map(|i| seconds[i])
    };
    let ratio = match (time_of(Model::PlpPpp), time_of(Model::TpppPlp)) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    Ok(json!({
        "rows": jobs.len(),
        "mean_eval_seconds": mean_seconds,
        "plp_ppp_to_tppp_plp_time_ratio": ratio,
    }))
}

fn exact_curve(
    model: Model,
    params: &NetworkParams,
    xs: &[f64],
    opts: &MdOptions,
    run: &Run,
) -> Result<Vec<f64>, CliError> {
    match md_exact_curve(model, params, xs, opts) {
        Ok(v) => Ok(v),
        Err(e) if e.is_convergence_failure() => xs
            .iter()
            .map(|&x| {
                run.settle(md_exact(model, params, x, opts), || {
                    format!("exact {model} at theta {} and x {x}", params.theta)
                })
            })
            .collect(),
        Err(e) => Err(e.into()),
    }
}

pub fn metadist(cfg: &MetadistConfig, run: &Run, out: &mut Outputs) -> Result<Value, CliError> {
    cfg.params.derived().map_err(tppp::Error::from)?;
    positive("tol", cfg.tol)?;
    let dbs = cfg.theta_db.values()?;
    let xs = reliability_grid(cfg.x.values()?)?;
    let wants = |m: MdMethod| cfg.methods.contains(&m);
    let exact_models = || cfg.models.iter().filter(|m| !m.needs_sticks());
    if let Some(&m) = cfg.models.iter().find(|m| m.needs_sticks()) {
        if wants(MdMethod::Exact) || cfg.inverse.is_some() {
            return Err(CliError::Config(format!(
                "model {m} has no exact meta distribution; use beta or empirical"
            )));
        }
    }
    if wants(MdMethod::Empirical) && cfg.n_realizations == 0 {
        return Err(CliError::Config("n_realizations must be positive".into()));
    }
    let opts = MdOptions {
        exec: run.exec,
        ..MdOptions::with_tol(cfg.tol)
    };
    let sim = run.sim(cfg.n_realizations).with_x_grid(xs.clone());

    let mut rows = Vec::new();
    for &model in &cfg.models {
        for &db in &dbs {
            let params = cfg.params.with_theta(from_db(db));
            let exact = if wants(MdMethod::Exact) {
                Some(exact_curve(model, &params, &xs, &opts, run)?)
            } else {
                None
            };
            let beta = if wants(MdMethod::Beta) {
                let fit = if model.needs_sticks() {
                    psp_beta(model, &params, &sim, opts.moment_tol)?
                } else {
                    BetaMd::for_model(model, &params, opts.moment_tol)?
                };
                Some(fit)
            } else {
                None
            };
            let empirical = if wants(MdMethod::Empirical) {
                let samples = simulate_cond_success(model, &params, &sim)?;
                let window = default_window_radius(&params);
                Some(EmpiricalMd::from_samples(samples, &xs, window, false))
            } else {
                None
            };
            for (i, &x) in xs.iter().enumerate() {
                rows.push(vec![
                    model.name().to_owned(),
                    num(db),
                    num(params.theta),
                    num(x),
                    opt_num(exact.as_ref().map(|v| v[i])),
                    opt_num(beta.map(|b| b.survival(x))),
                    opt_num(empirical.as_ref().map(|e| e.survival[i])),
                    opt_num(empirical.as_ref().map(|e| e.std_err[i])),
                ]);
            }
        }
    }
    out.csv(
        "metadist.csv",
        &["model", "theta_db", "theta", "x", "exact", "beta", "empirical", "empirical_std_err"],
        rows,
    )?;

    let mut summary = json!({ "rows": dbs.len() * xs.len() * cfg.models.len() });
    if let Some(inv) = &cfg.inverse {
        let x = reliability_grid(vec![inv.x])?[0];
        if !(inv.target > 0.0 && inv.target < 1.0) || inv.lo_db >= inv.hi_db {
            return Err(CliError::Config(
                "inverse sweep needs target in (0, 1) and lo_db < hi_db".into(),
            ));
        }
        let mut found = serde_json::Map::new();
        let mut rows = Vec::new();
        for &model in exact_models() {
            let r = theta_db_for_md(model, &cfg.params, x, inv.target, (inv.lo_db, inv.hi_db), &opts);
            let db = run.settle(r, || format!("inverse sweep for {model}"))?;
            found.insert(model.name().to_owned(), json!(db));
            rows.push(vec![model.name().to_owned(), num(x), num(inv.target), num(db), num(from_db(db))]);
        }
        out.csv("metadist_inverse.csv", &["model", "x", "target", "theta_db", "theta"], rows)?;
        summary["inverse_theta_db"] = Value::Object(found);
    }
    Ok(summary)
}

pub fn simulate(cfg: &SimulateConfig, run: &Run, out: &mut Outputs) -> Result<Value, CliError> {
    let sets: Vec<NetworkParams> = cfg
        .params
        .as_slice()
        .iter()
        .map(|p| match cfg.theta_db {
            Some(db) => p.with_theta(from_db(db)),
            None => *p,
        })
        .collect();
    if sets.is_empty() {
        return Err(CliError::Config("params must hold at least one set".into()));
    }
    for p in &sets {
        p.derived().map_err(tppp::Error::from)?;
    }
    let xs = match &cfg.x_grid {
        Some(g) => reliability_grid(g.values()?)?,
        None => uniform_x_grid(19),
    };
    let sim = SimConfig {
        window_radius: cfg.window_radius,
        ..run.sim(cfg.n_realizations).with_x_grid(xs.clone())
    };
    sim.validate()?;
    let wants = |o: SimOutput| cfg.outputs.contains(&o);
    let needs_samples = wants(SimOutput::Md) || wants(SimOutput::Success) || wants(SimOutput::Raw);

    let mut md_rows = Vec::new();
    let mut success_rows = Vec::new();
    let mut nnd_rows = Vec::new();
    let mut point_rows = Vec::new();
    let mut raw_columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut summary = Vec::new();
    for (set, params) in sets.iter().enumerate() {
        let window = cfg.window_radius.unwrap_or_else(|| default_window_radius(params));
        for &model in &cfg.models {
            let name = model.name();
            if needs_samples {
                let samples = simulate_cond_success(model, params, &sim)?;
                let stats = SampleStats::of(&samples);
                let md = EmpiricalMd::from_samples(samples, &xs, window, wants(SimOutput::Raw));
                for ((x, s), e) in md.x_grid.iter().zip(&md.survival).zip(&md.std_err) {
                    md_rows.push(vec![set.to_string(), name.to_owned(), num(*x), num(*s), num(*e)]);
                }
                success_rows.push(vec![
                    set.to_string(),
                    name.to_owned(),
                    cfg.n_realizations.to_string(),
                    num(window),
                    num(stats.mean),
                    num(stats.std_err),
                    num(stats.variance),
                    num(stats.second_moment),
                    num(stats.second_moment_std_err),
                ]);
                summary.push(json!({
                    "set": set,
                    "model": name,
                    "mean": stats.mean,
                    "mean_std_err": stats.std_err,
                    "variance": stats.variance,
                    "window_radius": window,
                }));
                if let Some(raw) = md.raw {
                    let column = if sets.len() == 1 {
                        name.to_owned()
                    } else {
                        format!("{name}_{set}")
                    };
                    raw_columns.push((column, raw));
                }
            }
            if wants(SimOutput::Nnd) {
                let moments = nn_distance_moments(model, params, cfg.n_max, cfg.n_realizations, run.seed, run.exec)?;
                for m in moments {
                    nnd_rows.push(vec![
                        set.to_string(),
                        name.to_owned(),
                        m.n.to_string(),
                        num(m.mean),
                        num(m.std_err),
                    ]);
                }
            }
            if wants(SimOutput::Points) {
                let mut rng = replicate_rng(run.seed, 0);
                let pattern = sample_pattern_with(model, params, window, &mut rng)?;
                for v in &pattern.points {
                    point_rows.push(vec![
                        set.to_string(),
                        name.to_owned(),
                        num(v.position.x),
                        num(v.position.y),
                        v.on_typical_street.to_string(),
                        num(v.shadow_mark),
                    ]);
                }
            }
        }
    }
    if wants(SimOutput::Md) {
        out.csv("simulate_md.csv", &["set", "model", "x", "survival", "std_err"], md_rows)?;
    }
    if wants(SimOutput::Success) {
        out.csv(
            "simulate_success.csv",
            &[
                "set",
                "model",
                "n_realizations",
                "window_radius",
                "mean",
                "mean_std_err",
                "variance",
                "second_moment",
                "second_moment_std_err",
            ],
            success_rows,
        )?;
    }
    if wants(SimOutput::Raw) {
        let header: Vec<&str> = raw_columns.iter().map(|(h, _)| h.as_str()).collect();
        let rows = (0..cfg.n_realizations).map(|i| raw_columns.iter().map(|(_, v)| num(v[i])).collect());
        out.csv("simulate_raw.csv", &header, rows)?;
    }
    if wants(SimOutput::Nnd) {
        out.csv("simulate_nnd.csv", &["set", "model", "n", "mean_sq_distance_per_n", "std_err"], nnd_rows)?;
    }
    if wants(SimOutput::Points) {
        out.csv(
            "simulate_points.csv",
            &["set", "model", "x", "y", "on_typical_street", "shadow_mark"],
            point_rows,
        )?;
    }
    Ok(json!({ "estimates": summary }))
}

/// At most `k` points spread evenly over `points`, ends included.
fn spread<T: Copy>(points: &[T], k: Option<usize>) -> Vec<T> {
    match k {
        Some(k) if k < points.len() => {
            if k == 0 {
                return Vec::new();
            }
            if k == 1 {
                return vec![points[0]];
            }
            (0..k)
                .map(|i| points[i * (points.len() - 1) / (k - 1)])
                .collect()
        }
        _ => points.to_vec(),
    }
}

pub fn contour(cfg: &ContourConfig, run: &Run, out: &mut Outputs) -> Result<Value, CliError> {
    let params = match cfg.theta_db {
        Some(db) => cfg.params.with_theta(from_db(db)),
        None => cfg.params,
    };
    let req = ContourRequest {
        target_q: cfg.target_q,
        reliability_x: cfg.reliability_x,
        lambda_grid: cfg.lambdas()?,
        params,
    };
    req.validate()?;
    if cfg.validate.is_some() && cfg.reliability_x.is_none() {
        return Err(CliError::Config("validation needs reliability_x".into()));
    }
    let points: Vec<ContourPoint> = match cfg.reliability_x {
        None => contour_success(&req)?,
        Some(_) => contour_md(&req, run.exec)?,
    };
    let rows = points.iter().map(|pt| {
        vec![
            num(pt.lambda),
            num(pt.inv_lambda),
            num(pt.p),
            num(pt.achieved_metric),
            pt.feasible.to_string(),
        ]
    });
    out.csv("contour.csv", &["lambda", "inv_lambda", "p", "achieved_metric", "feasible"], rows)?;

    let mut summary = json!({
        "points": points.len(),
        "feasible": points.iter().filter(|p| p.feasible).count(),
        "theta_db": to_db(params.theta),
    });
    summary["success_range"] = match success_range_along_md_contour(&req, run.exec) {
        Ok((lo, hi)) => json!({ "min": lo, "max": hi }),
        Err(tppp::Error::Config(_)) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    if let (Some(v), Some(x)) = (&cfg.validate, cfg.reliability_x) {
        positive("validate.tol", v.tol)?;
        let feasible: Vec<ContourPoint> = points.iter().copied().filter(|p| p.feasible).collect();
        let picked = spread(&feasible, v.max_points);
        let reference = match v.method {
            ValidationMethod::Exact => Reference::Exact(MdOptions {
                exec: run.exec,
                ..MdOptions::with_tol(v.tol)
            }),
            ValidationMethod::Empirical => Reference::Empirical(run.sim(v.n_realizations)),
        };
        let table = validate_against_exact(&picked, &params, x, cfg.target_q, &reference)?;
        let rows = table.iter().map(|r| {
            vec![
                num(r.lambda),
                num(r.p),
                num(r.plp_md),
                num(r.plp_std_err),
                num(r.tppp_md),
                num(r.deviation),
                num(r.tppp_deviation),
            ]
        });
        out.csv(
            "contour_validation.csv",
            &["lambda", "p", "plp_md", "plp_std_err", "tppp_md", "deviation", "tppp_deviation"],
            rows,
        )?;
        let worst = table.iter().map(|r| r.deviation.abs()).fold(0.0, f64::max);
        summary["validation"] = json!({ "rows": table.len(), "max_abs_deviation": worst });
    }
    Ok(summary)
}

pub fn maxgap(cfg: &MaxgapConfig, run: &Run, out: &mut Outputs) -> Result<Value, CliError> {
    positive("tol", cfg.tol)?;
    let lp = cfg.lambda_p.values()?;
    let d2 = cfg.d2_theta_delta.values()?;
    if lp.iter().chain(&d2).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(CliError::Config("gap grids must be positive".into()));
    }
    let scan = max_success_gap(cfg.mu, cfg.alpha, cfg.m, &lp, &d2, cfg.tol, run.exec)?;
    out.json("maxgap.json", &scan)?;
    Ok(json!({ "best": scan.best, "grid_points": scan.grid.len() }))
}
