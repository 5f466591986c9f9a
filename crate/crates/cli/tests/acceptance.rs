//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use armagg::aggmodel::{aggregate_model, jacobian_beta_y, qstar, tpoly_degree};
use armagg::asymcov::{jacobian_xi, sigma_beta};
use armagg::forecast::{char_msfe, char_msfe_aggregate, forecast_h, Preset, PresetSample};
use armagg::model::{autocovariance, pi_weights, psi_weights, random_model, LinearRep, MAX_TRUNC};
use armagg::predictors::{compare, Predictor, PredictorReport};
use armagg::totalerror::{omega_estimation_error, ErrorEngine, ErrorMode, OmegaMode, SumStrategy};
use armagg::{AggregationScheme, ArmaModel, SchemeKind};
use armagg_cli::config::ExperimentConfig;
use armagg_cli::mc::{mc_aggregate_char, mc_char_msfe, mc_css_ar1};
use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Random causal, invertible model with `p + q ≥ 1`.
fn draw_model(rng: &mut ChaCha8Rng, pmax: usize, qmax: usize, lo: f64, hi: f64, sep: f64) -> ArmaModel {
    loop {
        let p = rng.random_range(0..=pmax);
        let q = rng.random_range(0..=qmax);
        if p + q > 0 {
            let sigma2 = rng.random_range(0.5..3.0);
            return random_model(rng, p, q, sigma2, lo, hi, sep);
        }
    }
}

/// Largest entrywise relative error. Entries below `1e-4` of the largest
/// reference entry are measured against that floor, so that structural
/// zeros are not compared with finite-difference rounding noise.
fn mat_rel(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), reference.shape());
    let floor = 1e-4 * reference.amax();
    a.iter()
        .zip(reference.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor).max(1e-300))
        .fold(0.0, f64::max)
}

// 1. MA(1): finite-sample forecast, its error and the stationary predictor.
fn ma1_example() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for theta in [0.3, 0.5, 0.9] {
        let m = ArmaModel::new(vec![], vec![theta], 1.0).map_err(e2s)?;
        let rep = LinearRep::new(&m, 10).map_err(e2s)?;
        for (x1, eps0) in [(1.3, -0.4), (-0.7, 0.9), (0.25, 2.0)] {
            let preset = Preset::new(&m, vec![], vec![eps0]).map_err(e2s)?;
            let ps = PresetSample::from_preset(&preset, &rep, vec![x1]).map_err(e2s)?;
            let f = forecast_h(&ps, &rep, 1).map_err(e2s)?;
            let closed = theta * x1 - theta * theta * eps0;
            worst = worst.max((f - closed).abs());
            ensure!((f - closed).abs() < 1e-12, "θ={theta}: forecast {f} vs {closed}");
        }
        let msfe = char_msfe(&rep, 1.0, 1).map_err(e2s)?;
        ensure!((msfe - 1.0).abs() < 1e-12, "θ={theta}: MSFE {msfe}");
        let stationary = (1.0 + theta * theta) - theta * theta / (1.0 + theta * theta);
        ensure!(stationary > msfe, "θ={theta}: stationary error {stationary} not above {msfe}");
        // Best linear predictor from the stationary autocovariances.
        let g = autocovariance(&m, 1, MAX_TRUNC).map_err(e2s)?;
        let yw = g[0] - g[1] * g[1] / g[0];
        ensure!((yw - stationary).abs() < 1e-12, "θ={theta}: stationary closed form {stationary} vs {yw}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "runtime {elapsed:?}");
    Ok(format!("max forecast deviation {worst:.1e}, {elapsed:.2?}"))
}

// 2. ARMA(1,1): forecast and error closed forms, stationary comparison.
fn arma11_example() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pairs = vec![(0.5, 0.4), (-0.6, 0.3), (0.9, -0.2)];
    while pairs.len() < 23 {
        let phi: f64 = rng.random_range(-0.95..0.95);
        let theta: f64 = rng.random_range(-0.95..0.95);
        if (phi + theta).abs() > 0.05 && theta.abs() > 0.05 {
            pairs.push((phi, theta));
        }
    }
    let sigma2 = 2.0;
    for &(phi, theta) in &pairs {
        let m = ArmaModel::new(vec![phi], vec![theta], sigma2).map_err(e2s)?;
        let rep = LinearRep::new(&m, 10).map_err(e2s)?;
        for _ in 0..3 {
            let (x0, eps0, x1) = (
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let preset = Preset::new(&m, vec![x0], vec![eps0]).map_err(e2s)?;
            let ps = PresetSample::from_preset(&preset, &rep, vec![x1]).map_err(e2s)?;
            let f = forecast_h(&ps, &rep, 1).map_err(e2s)?;
            let closed = (phi + theta) * x1 - theta * (phi + theta) * x0;
            ensure!((f - closed).abs() < 1e-12, "(φ,θ)=({phi},{theta}): forecast {f} vs {closed}");
        }
        let msfe = char_msfe(&rep, sigma2, 1).map_err(e2s)?;
        ensure!((msfe - sigma2).abs() < 1e-12, "MSFE {msfe}");

        let d = (theta * theta + theta * phi + 1.0).powi(2) - theta * theta;
        let a1 = (theta * theta + phi * theta + 1.0) * (theta + phi) * (phi * theta + 1.0) / d;
        let a0 = -(theta + phi) * (theta * phi + 1.0) * theta / d;
        let msfe_s = (theta * theta + phi * theta + 1.0)
            * (theta.powi(4) + theta.powi(3) * phi + theta * phi + 1.0)
            * sigma2
            / d;
        ensure!(msfe_s > msfe, "(φ,θ)=({phi},{theta}): stationary {msfe_s} not above {msfe}");
        ensure!(theta.powi(4) * (theta + phi).powi(2) > 0.0, "equivalent condition fails");
        // Two-observation best linear predictor from stationary autocovariances.
        let g = autocovariance(&m, 2, MAX_TRUNC).map_err(e2s)?;
        let det = g[0] * g[0] - g[1] * g[1];
        let b1 = (g[1] * g[0] - g[1] * g[2]) / det;
        let b0 = (g[0] * g[2] - g[1] * g[1]) / det;
        let yw = g[0] - b1 * g[1] - b0 * g[2];
        ensure!(
            rel(a1, b1) < 1e-10 && rel(a0, b0) < 1e-10 && rel(msfe_s, yw) < 1e-10,
            "stationary closed form ({a1}, {a0}, {msfe_s}) vs ({b1}, {b0}, {yw})"
        );
    }
    Ok(format!("{} (φ,θ) pairs", pairs.len()))
}

// 3. Monte-Carlo characteristic errors.
fn mc_characteristic() -> Check {
    let start = Instant::now();
    let ma10 = armagg_cli::config::load_model(&workspace_root().join("models/ma10.json")).map_err(e2s)?;
    let paths = 100_000;
    let a = mc_char_msfe(&ma10, 50, 2, paths, 31).map_err(e2s)?;
    ensure!(rel(a.mean, 5.0) < 0.02, "MA(10) h=2: {} vs 5", a.mean);

    let ma1 = ArmaModel::new(vec![], vec![0.5], 1.0).map_err(e2s)?;
    let flow = AggregationScheme::flow(2).map_err(e2s)?;
    let formula = char_msfe_aggregate(&LinearRep::new(&ma1, 2).map_err(e2s)?, 1.0, &flow).map_err(e2s)?;
    ensure!((formula - 3.25).abs() < 1e-12, "flow formula {formula}");
    let b = mc_aggregate_char(&ma1, 50, &flow, paths, 32).map_err(e2s)?;
    ensure!(rel(b.mean, 3.25) < 0.02, "flow MA(1): {} vs 3.25", b.mean);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "runtime {elapsed:?}");
    Ok(format!(
        "MA(10) {:.4}±{:.4}, flow MA(1) {:.4}±{:.4}, {elapsed:.2?}",
        a.mean, a.stderr, b.mean, b.stderr
    ))
}

/// Brute-force information matrix of an ARMA(1,1) from length-200
/// expansions of `1/Φ` and `1/Θ`, inverted in closed form.
fn brute_sigma_beta_arma11(phi: f64, theta: f64) -> [[f64; 2]; 2] {
    let a: Vec<f64> = (0..200).map(|i| phi.powi(i)).collect();
    let b: Vec<f64> = (0..200).map(|i| (-theta).powi(i)).collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>();
    let (m00, m01, m11) = (dot(&a, &a), dot(&a, &b), dot(&b, &b));
    let det = m00 * m11 - m01 * m01;
    [[m11 / det, -m01 / det], [-m01 / det, m00 / det]]
}

// 4. Asymptotic covariance of the parameter estimator.
fn sigma_beta_checks() -> Check {
    for c in [-0.7, 0.2, 0.5, 0.9] {
        let ar = ArmaModel::new(vec![c], vec![], 1.0).map_err(e2s)?;
        let s = sigma_beta(&ar, MAX_TRUNC).map_err(e2s)?.matrix()[(0, 0)];
        ensure!((s - (1.0 - c * c)).abs() < 1e-10, "AR(1) φ={c}: {s}");
        let ma = ArmaModel::new(vec![], vec![c], 1.0).map_err(e2s)?;
        let s = sigma_beta(&ma, MAX_TRUNC).map_err(e2s)?.matrix()[(0, 0)];
        ensure!((s - (1.0 - c * c)).abs() < 1e-10, "MA(1) θ={c}: {s}");
    }
    for (phi, theta) in [(0.5, 0.4), (-0.3, 0.6), (0.7, -0.2)] {
        let m = ArmaModel::new(vec![phi], vec![theta], 1.0).map_err(e2s)?;
        let s = sigma_beta(&m, MAX_TRUNC).map_err(e2s)?;
        let brute = brute_sigma_beta_arma11(phi, theta);
        for i in 0..2 {
            for j in 0..2 {
                let (x, y) = (s.matrix()[(i, j)], brute[i][j]);
                ensure!(rel(x, y) < 1e-8, "ARMA(1,1) ({phi},{theta}) entry ({i},{j}): {x} vs {y}");
            }
        }
    }
    let ar = ArmaModel::new(vec![0.5], vec![], 1.0).map_err(e2s)?;
    let est = mc_css_ar1(&ar, 2000, 2000, 41).map_err(e2s)?;
    ensure!(rel(est.mean, 0.75) < 0.10, "CSS variance {} vs 0.75", est.mean);
    Ok(format!("CSS variance {:.4}±{:.4} vs 0.75", est.mean, est.stderr))
}

fn fd_step(beta: &[f64], a: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut up = beta.to_vec();
    let mut dn = beta.to_vec();
    up[a] += h;
    dn[a] -= h;
    (up, dn)
}

// 5. Jacobians against central finite differences.
fn jacobian_checks() -> Check {
    const H: f64 = 1e-6;
    const ORDER: usize = 15;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_xi, mut worst_y, mut redraws) = (0.0f64, 0.0f64, 0);
    let mut done = 0;
    while done < 50 {
        let m = draw_model(&mut rng, 3, 3, 1.3, 3.0, 0.3);
        let k = rng.random_range(2..=4);
        let kind = if done % 2 == 0 { SchemeKind::Stock } else { SchemeKind::Flow };
        let scheme = AggregationScheme::with_period(kind, k).map_err(e2s)?;
        let Ok(agg) = aggregate_model(&m, &scheme) else {
            redraws += 1;
            continue;
        };
        let beta = m.beta();
        let npar = beta.len();

        let jx = jacobian_xi(&m, ORDER).map_err(e2s)?;
        let mut fd = DMatrix::<f64>::zeros(2 * ORDER, npar);
        for a in 0..npar {
            let (up, dn) = fd_step(&beta, a, H);
            let (mu, md) = (m.with_beta(&up).map_err(e2s)?, m.with_beta(&dn).map_err(e2s)?);
            let dpsi: Vec<f64> = psi_weights(mu.phi(), mu.theta(), ORDER)
                .iter()
                .zip(psi_weights(md.phi(), md.theta(), ORDER))
                .map(|(u, d)| (u - d) / (2.0 * H))
                .collect();
            let dpi: Vec<f64> = pi_weights(mu.phi(), mu.theta(), ORDER)
                .iter()
                .zip(pi_weights(md.phi(), md.theta(), ORDER))
                .map(|(u, d)| (u - d) / (2.0 * H))
                .collect();
            for i in 1..=ORDER {
                fd[(i - 1, a)] = dpsi[i];
                fd[(ORDER + i - 1, a)] = dpi[i];
            }
        }
        let e = mat_rel(&jx, &fd);
        worst_xi = worst_xi.max(e);
        ensure!(e < 1e-4, "J_Ξ of {m:?}: relative error {e:e}");

        let jac = jacobian_beta_y(&m, &scheme).map_err(e2s)?;
        let (p, qs) = (m.p(), agg.qstar);
        let n = agg.n;
        let mut fd_y = DMatrix::<f64>::zeros(p + qs, npar);
        let mut fd_s = DMatrix::<f64>::zeros(1, npar);
        let mut fd_t = DMatrix::<f64>::zeros(n + 1, p);
        for a in 0..npar {
            let (up, dn) = fd_step(&beta, a, H);
            let au = aggregate_model(&m.with_beta(&up).map_err(e2s)?, &scheme).map_err(e2s)?;
            let ad = aggregate_model(&m.with_beta(&dn).map_err(e2s)?, &scheme).map_err(e2s)?;
            ensure!(au.qstar == qs && ad.qstar == qs, "q* changed under perturbation");
            let yu = au.base.beta();
            let yd = ad.base.beta();
            for r in 0..p + qs {
                fd_y[(r, a)] = (yu[r] - yd[r]) / (2.0 * H);
            }
            fd_s[(0, a)] = (au.base.sigma2() - ad.base.sigma2()) / (2.0 * H);
            if a < p {
                for r in 0..=n {
                    fd_t[(r, a)] = (au.tpoly.coeff(r) - ad.tpoly.coeff(r)) / (2.0 * H);
                }
            }
        }
        let e = mat_rel(&jac.j_beta_y(), &fd_y)
            .max(mat_rel(&jac.d_sigmastar_d_beta, &fd_s))
            .max(if p > 0 { mat_rel(&jac.d_t_d_phi, &fd_t) } else { 0.0 });
        worst_y = worst_y.max(e);
        ensure!(e < 1e-4, "J_βY of {m:?} with {}: relative error {e:e}", scheme.describe());
        done += 1;
    }
    Ok(format!(
        "50 models, max rel error J_Ξ {worst_xi:.1e}, J_βY {worst_y:.1e} ({redraws} degenerate draws replaced)"
    ))
}

// 6. Estimation error through the two finite-sample code paths.
fn omega_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = draw_model(&mut rng, 2, 2, 1.2, 3.0, 0.3);
        for t in [25, 50] {
            for h in 1..=5 {
                let a = omega_estimation_error(&m, t, h, OmegaMode::Direct).map_err(e2s)?;
                let b = omega_estimation_error(&m, t, h, OmegaMode::XiSums).map_err(e2s)?;
                let e = if a == 0.0 && b == 0.0 { 0.0 } else { rel(a, b) };
                worst = worst.max(e);
                ensure!(e < 1e-8, "{m:?} T={t} h={h}: {a} vs {b}");
            }
        }
    }
    Ok(format!("200 cases, max rel difference {worst:.1e}"))
}

// 7. The exact-minus-approximate gap is of order 1/T².
fn surrogate_order() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ratios = Vec::new();
    while ratios.len() < 10 {
        let m = draw_model(&mut rng, 2, 2, 1.3, 3.0, 0.3);
        let gap = |t: usize| -> Result<f64, String> {
            let e = ErrorEngine::for_model(&m, t, 1).map_err(e2s)?;
            let a = e.horizon(1, ErrorMode::Approx, SumStrategy::Factorized).map_err(e2s)?;
            let x = e.horizon(1, ErrorMode::ExactGaussian, SumStrategy::Factorized).map_err(e2s)?;
            Ok((x.total - a.total).abs())
        };
        let (g1, g2) = (gap(50)?, gap(100)?);
        ensure!(g2 > 0.0, "{m:?}: zero gap at T=100");
        ratios.push(g1 / g2);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ensure!((2.5..=6.0).contains(&mean), "mean ratio {mean} (ratios {ratios:?})");
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    Ok(format!("mean ratio {mean:.4} over 10 models (range {lo:.4}..{hi:.4}), T=50→100, h=1"))
}

// 8. Factorized sums equal the literal nested sums; factorized timing.
fn factorized_sums() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for _ in 0..8 {
        let m = draw_model(&mut rng, 2, 2, 1.2, 3.0, 0.3);
        for t in [5usize, 10, 15, 20] {
            let hmax = 25 + 1 - t - m.r();
            let engine = ErrorEngine::for_model(&m, t, hmax).map_err(e2s)?;
            for h in 1..=hmax {
                let a = engine.estimation_sum(h, SumStrategy::Factorized).map_err(e2s)?;
                let b = engine.estimation_sum(h, SumStrategy::Naive).map_err(e2s)?;
                let e = if a == 0.0 && b == 0.0 { 0.0 } else { rel(a, b) };
                worst = worst.max(e);
                ensure!(e < 1e-10, "{m:?} T={t} h={h}: {a} vs {b}");
                cases += 1;
            }
            let k = hmax.min(4);
            let fa = engine.approx_matrices(k, SumStrategy::Factorized).map_err(e2s)?;
            let na = engine.approx_matrices(k, SumStrategy::Naive).map_err(e2s)?;
            for (x, y) in [(&fa.d, &na.d), (&fa.f, &na.f), (&fa.g, &na.g)] {
                let e = mat_rel(x, y);
                worst = worst.max(e);
                ensure!(e < 1e-10, "{m:?} T={t} K={k}: aggregate matrices differ by {e:e}");
            }
            cases += 1;
        }
    }
    let model = armagg_cli::config::load_model(&workspace_root().join("models/arma311.json")).map_err(e2s)?;
    let mut slowest = Duration::ZERO;
    let start = Instant::now();
    let engine = ErrorEngine::for_model(&model, 50, 10).map_err(e2s)?;
    let setup = start.elapsed();
    for h in 1..=10 {
        let s = Instant::now();
        engine.horizon(h, ErrorMode::Approx, SumStrategy::Factorized).map_err(e2s)?;
        let flow = AggregationScheme::flow(h).map_err(e2s)?;
        engine
            .aggregate(flow.weights(), ErrorMode::Approx, SumStrategy::Factorized)
            .map_err(e2s)?;
        slowest = slowest.max(s.elapsed());
    }
    ensure!(setup + slowest < Duration::from_secs(5), "slowest horizon {:?}", setup + slowest);
    Ok(format!(
        "{cases} cases, max rel difference {worst:.1e}; T=50 slowest horizon {:.2?}",
        setup + slowest
    ))
}

fn experiment(name: &str) -> Result<(ExperimentConfig, PredictorReport), String> {
    let cfg = ExperimentConfig::load(&workspace_root().join("configs").join(format!("{name}.json"))).map_err(e2s)?;
    let model = cfg.load_model().map_err(e2s)?;
    let report = compare(
        &model,
        cfg.t,
        cfg.horizon_range().map_err(e2s)?,
        cfg.scheme_kind().map_err(e2s)?,
        &cfg.predictor_list().map_err(e2s)?,
        &cfg.predictor_config(),
    )
    .map_err(e2s)?;
    Ok((cfg, report))
}

fn total(r: &PredictorReport, p: Predictor, h: usize) -> f64 {
    r.get(p, h).map(|e| e.total).unwrap_or(f64::NAN)
}

fn characteristic(r: &PredictorReport, p: Predictor, h: usize) -> f64 {
    r.get(p, h).map(|e| e.characteristic).unwrap_or(f64::NAN)
}

// 9. Predictor orderings of the numerical study.
fn numerical_study() -> Check {
    use Predictor::{Hybrid as H, OptimalHybrid as OH, Tms};
    let start = Instant::now();
    let names = ["ma10_stock", "arma311_stock", "arma14_stock", "ma10_flow", "arma310_flow"];
    let mut reports = Vec::new();
    for name in names {
        let (cfg, r) = experiment(name)?;
        ensure!(cfg.t == 50 && cfg.horizon_range().map_err(e2s)? == (1..=10), "{name}: unexpected config");
        let m = cfg.load_model().map_err(e2s)?;
        ensure!(m.sigma2() == 5.0, "{name}: σ² = {}", m.sigma2());
        reports.push(r);
    }
    let [ma10s, a311, a14, ma10f, a310] = &reports[..] else {
        unreachable!()
    };

    // (a)
    for (name, r) in names.iter().zip(&reports) {
        let t = total(r, Tms, 1);
        for p in [H, OH] {
            ensure!(rel(total(r, p, 1), t) < 1e-12, "(a) {name}: {p} differs from TMS at h=1");
        }
        let model = experiment(name)?.0.load_model().map_err(e2s)?;
        let ta = compare(&model, 50, [1], SchemeKind::Stock, &[Predictor::Ta], &Default::default()).map_err(e2s)?;
        ensure!(rel(total(&ta, Predictor::Ta, 1), t) < 1e-12, "(a) {name}: TA differs from TMS at h=1");
    }
    // (b)
    for h in [2, 5, 10] {
        let (c1, c2) = (characteristic(ma10s, Tms, h), characteristic(ma10s, H, h));
        ensure!((c1 - c2).abs() < 1e-6, "(b) h={h}: characteristic TMS {c1} vs H {c2}");
    }
    let better: Vec<usize> = (1..=10).filter(|&h| total(ma10s, H, h) <= total(ma10s, Tms, h)).collect();
    ensure!(better.contains(&2), "(b) total(H) > total(TMS) at h=2");
    // (c)
    for h in [3, 6, 9, 10] {
        for p in [H, OH] {
            ensure!(total(a311, p, h) < total(a311, Tms, h), "(c) h={h}: {p} not below TMS");
        }
    }
    ensure!(total(a311, OH, 4) < total(a311, H, 4), "(c) OH not below H at h=4");
    // (d)
    for h in 1..=10 {
        ensure!(rel(total(a14, H, h), total(a14, OH, h)) < 1e-12, "(d) H and OH differ at h={h}");
    }
    for h in 3..=10 {
        ensure!(total(a14, H, h) < total(a14, Tms, h), "(d) H not below TMS at h={h}");
    }
    ensure!(total(a14, H, 2) >= total(a14, Tms, 2), "(d) H below TMS at h=2");
    // (e)
    for h in 2..=10 {
        for p in [H, OH] {
            ensure!(total(ma10f, p, h) < total(ma10f, Tms, h), "(e) flow MA(10) h={h}: {p} not below TMS");
        }
    }
    ensure!(
        total(ma10f, OH, 4) < total(ma10f, H, 4).min(total(ma10f, Tms, 4)),
        "(e) flow MA(10): OH not smallest at h=4"
    );
    for h in [2, 4, 5, 6, 7] {
        for p in [H, OH] {
            ensure!(total(a310, p, h) < total(a310, Tms, h), "(e) flow ARMA(3,10) h={h}: {p} not below TMS");
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "runtime {elapsed:?}");
    Ok(format!("(a)-(e) hold; H ≤ TMS for MA(10) stock at h ∈ {better:?}; {elapsed:.2?}"))
}

/// Coefficients of `Π (1 - z / z_k)` from complex roots.
fn poly_from_roots(roots: &[Complex<f64>]) -> Vec<f64> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for z in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci / z;
        }
        c = next;
    }
    c.iter().map(|v| v.re).collect()
}

/// AR roots via companion-matrix eigenvalues.
fn ar_roots(phi: &[f64]) -> Vec<Complex<f64>> {
    let p = phi.len();
    if p == 0 {
        return Vec::new();
    }
    // Inverse roots are the eigenvalues of the companion matrix of z^p - φ_1 z^{p-1} - ... - φ_p.
    let comp = DMatrix::from_fn(p, p, |i, j| if i == 0 { phi[j] } else if i == j + 1 { 1.0 } else { 0.0 });
    comp.complex_eigenvalues().iter().map(|l| Complex::new(1.0, 0.0) / l).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `num / den` as a power series through degree `len - 1`; `den[0] = 1`.
fn series_quotient(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for i in 0..len {
        let mut v = num.get(i).copied().unwrap_or(0.0);
        for j in 1..den.len().min(i + 1) {
            v -= den[j] * out[i - j];
        }
        out[i] = v;
    }
    out
}

/// Oracle `T = Φ*(z^K) W̃(z) / Φ(z)` and `Φ*` from the AR roots.
fn oracle_tpoly(model: &ArmaModel, scheme: &AggregationScheme) -> (Vec<f64>, Vec<f64>, f64) {
    let k = scheme.k();
    let powered: Vec<Complex<f64>> = ar_roots(model.phi()).iter().map(|z| z.powu(k as u32)).collect();
    let phistar_u = poly_from_roots(&powered);
    let mut phistar_z = vec![0.0; (phistar_u.len() - 1) * k + 1];
    for (j, c) in phistar_u.iter().enumerate() {
        phistar_z[j * k] = *c;
    }
    let ar: Vec<f64> = std::iter::once(1.0).chain(model.phi().iter().map(|v| -v)).collect();
    let wtilde = &scheme.wtilde()[..=k - scheme.kstar()];
    let num = poly_mul(&phistar_z, wtilde);
    let deg = num.len() - model.p();
    // Exact division leaves no terms beyond the quotient degree.
    let mut t = series_quotient(&num, &ar, deg + 20);
    let remainder = t[deg..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    t.truncate(deg);
    let phistar = phistar_u[1..].iter().map(|v| -v).collect();
    (t, phistar, remainder)
}

// 10. Aggregation algebra.
fn aggregation_algebra() -> Check {
    // AR(1), K = 2.
    for phi in [-0.6, 0.3, 0.8] {
        let sigma2 = 1.5;
        let m = ArmaModel::new(vec![phi], vec![], sigma2).map_err(e2s)?;
        let s = aggregate_model(&m, &AggregationScheme::stock(2).map_err(e2s)?).map_err(e2s)?;
        ensure!((s.base.phi()[0] - phi * phi).abs() < 1e-8, "stock φ* for φ={phi}");
        ensure!(s.base.q() == 0, "stock q* for φ={phi}");
        ensure!((s.base.sigma2() - sigma2 * (1.0 + phi * phi)).abs() < 1e-8, "stock σ*² for φ={phi}");

        let f = aggregate_model(&m, &AggregationScheme::flow(2).map_err(e2s)?).map_err(e2s)?;
        let g0 = sigma2 * (1.0 + (1.0 + phi).powi(2) + phi * phi);
        let g1 = sigma2 * phi;
        let theta = (g0 - (g0 * g0 - 4.0 * g1 * g1).sqrt()) / (2.0 * g1);
        ensure!((f.base.phi()[0] - phi * phi).abs() < 1e-8, "flow φ* for φ={phi}");
        ensure!(f.base.q() == 1, "flow q* for φ={phi}");
        ensure!((f.base.theta()[0] - theta).abs() < 1e-8, "flow θ* {} vs {theta}", f.base.theta()[0]);
        ensure!((f.base.sigma2() - g1 / theta).abs() < 1e-8, "flow σ*² for φ={phi}");
    }

    // Exhaustive (p, q, K, K*) grid.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut grid = 0;
    let mut redraws = 0;
    for p in 0..=5usize {
        for q in 0..=5usize {
            for k in 1..=6usize {
                for kstar in 1..=k {
                    let mut attempt = 0;
                    loop {
                        attempt += 1;
                        ensure!(attempt <= 50, "no usable model for (p,q,K,K*)=({p},{q},{k},{kstar})");
                        let m = random_model(&mut rng, p, q, 1.0, 1.15, 1.8, 0.15);
                        let w: Vec<f64> = (1..=k)
                            .map(|i| if i < kstar { 0.0 } else { rng.random_range(0.5..1.5) })
                            .collect();
                        let scheme = AggregationScheme::from_weights(w).map_err(e2s)?;
                        let Ok(agg) = aggregate_model(&m, &scheme) else {
                            redraws += 1;
                            continue;
                        };
                        let n_formula = k * (p + 1) - p - kstar;
                        let q_formula = (k * (p + 1) + q - p - kstar) / k;
                        ensure!(tpoly_degree(p, &scheme) == n_formula, "n formula at ({p},{q},{k},{kstar})");
                        ensure!(qstar(p, q, &scheme) == q_formula, "q* formula at ({p},{q},{k},{kstar})");
                        let (t, phistar, remainder) = oracle_tpoly(&m, &scheme);
                        let tmax = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                        ensure!(remainder < 1e-9 * tmax, "Φ does not divide Φ*(z^K)W̃ at ({p},{q},{k},{kstar})");
                        ensure!(
                            t.len() == n_formula + 1 && t[n_formula].abs() > 1e-12 * tmax,
                            "T degree {} vs n = {n_formula} at ({p},{q},{k},{kstar})",
                            t.len() - 1
                        );
                        ensure!(
                            agg.n == n_formula && agg.tpoly.coeffs().len() == n_formula + 1,
                            "Brewer T degree at ({p},{q},{k},{kstar})"
                        );
                        for (i, v) in t.iter().enumerate() {
                            ensure!(
                                (agg.tpoly.coeff(i) - v).abs() < 1e-8 * tmax,
                                "T coefficient {i} at ({p},{q},{k},{kstar})"
                            );
                        }
                        for (a, b) in agg.base.phi().iter().zip(&phistar) {
                            ensure!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "φ* at ({p},{q},{k},{kstar})");
                        }
                        // Last nonzero autocovariance of C(L)ε at multiples of K.
                        let c = poly_mul(&t, m.ma_poly().coeffs());
                        let g: Vec<f64> = (0..=c.len() / k)
                            .map(|j| c.iter().zip(c.iter().skip(j * k)).map(|(a, b)| a * b).sum())
                            .collect();
                        let q_oracle = (0..g.len()).rev().find(|&j| g[j].abs() > 1e-10 * g[0]).unwrap_or(0);
                        ensure!(
                            q_oracle == q_formula && agg.qstar == q_formula,
                            "q* {} (oracle {q_oracle}, formula {q_formula}) at ({p},{q},{k},{kstar})",
                            agg.qstar
                        );
                        grid += 1;
                        break;
                    }
                }
            }
        }
    }

    // Autocovariance equivalence.
    let mut worst = 0.0f64;
    for i in 0..50 {
        let m = draw_model(&mut rng, 3, 3, 1.3, 3.0, 0.3);
        let k = rng.random_range(2..=4);
        let scheme = match i % 3 {
            0 => AggregationScheme::stock(k),
            1 => AggregationScheme::flow(k),
            _ => AggregationScheme::from_weights((0..k).map(|_| rng.random_range(0.2..1.0)).collect()),
        }
        .map_err(e2s)?;
        let Ok(agg) = aggregate_model(&m, &scheme) else {
            redraws += 1;
            continue;
        };
        let lags = 6;
        let gx = autocovariance(&m, lags * k + k, MAX_TRUNC).map_err(e2s)?;
        let gy = autocovariance(&agg.base, lags, MAX_TRUNC).map_err(e2s)?;
        let w = scheme.weights();
        for j in 0..=lags {
            let mut direct = 0.0;
            for a in 0..k {
                for b in 0..k {
                    let lag = (j * k + b) as isize - a as isize;
                    direct += w[a] * w[b] * gx[lag.unsigned_abs()];
                }
            }
            let e = (direct - gy[j]).abs() / gx[0].max(gy[0]);
            worst = worst.max(e);
            ensure!(e < 1e-8, "{m:?} {}: lag {j} {direct} vs {}", scheme.describe(), gy[j]);
        }
        // MA part against the aggregated-lag autocovariance of C(L)ε.
        let c = agg.c_poly(&m);
        let c = c.coeffs();
        let tau: Vec<f64> = std::iter::once(1.0).chain(agg.base.theta().iter().copied()).collect();
        for j in 0..=agg.qstar {
            let g: f64 = m.sigma2() * c.iter().zip(c.iter().skip(j * k)).map(|(a, b)| a * b).sum::<f64>();
            let ma: f64 = agg.base.sigma2() * tau.iter().zip(tau.iter().skip(j)).map(|(a, b)| a * b).sum::<f64>();
            let e = (g - ma).abs() / gx[0];
            worst = worst.max(e);
            ensure!(e < 1e-8, "{m:?} {}: MA lag {j} {g} vs {ma}", scheme.describe());
        }
    }
    Ok(format!(
        "closed forms hold; {grid} grid points; autocovariance max error {worst:.1e} ({redraws} degenerate draws replaced)"
    ))
}

// 11. Characteristic error of the TMS aggregate forecast is at most σ*².
fn tms_char_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut cases, mut strict, mut models, mut redraws) = (0, 0, 0, 0);
    let mut min_gap = f64::INFINITY;
    while models < 100 {
        let m = draw_model(&mut rng, 3, 3, 1.2, 3.0, 0.3);
        let mut rows = Vec::new();
        for kind in [SchemeKind::Stock, SchemeKind::Flow] {
            for k in 2..=4 {
                let scheme = AggregationScheme::with_period(kind, k).map_err(e2s)?;
                match aggregate_model(&m, &scheme) {
                    Ok(agg) => rows.push((scheme, agg.base.sigma2())),
                    Err(_) => break,
                }
            }
        }
        if rows.len() < 6 {
            redraws += 1;
            continue;
        }
        let rep = LinearRep::new(&m, 4).map_err(e2s)?;
        for (scheme, s2) in rows {
            let c = char_msfe_aggregate(&rep, m.sigma2(), &scheme).map_err(e2s)?;
            ensure!(c <= s2 * (1.0 + 1e-10), "{m:?} {}: char {c} > σ*² {s2}", scheme.describe());
            let gap = (s2 - c) / s2;
            min_gap = min_gap.min(gap);
            if gap > 1e-9 {
                strict += 1;
            }
            cases += 1;
        }
        models += 1;
    }
    Ok(format!(
        "{cases} cases, {strict} strict, min relative gap {min_gap:.2e} ({redraws} degenerate draws replaced)"
    ))
}

// 12. The TMS total error is not monotone in the horizon.
fn non_monotone() -> Check {
    let (_, r) = experiment("ma10_stock")?;
    let totals: Vec<f64> = (1..=10).map(|h| total(&r, Predictor::Tms, h)).collect();
    let drops: Vec<usize> = (1..10).filter(|&i| totals[i] < totals[i - 1]).map(|i| i + 1).collect();
    ensure!(!drops.is_empty(), "monotone: {totals:?}");
    Ok(format!("total decreases at h ∈ {drops:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("MA(1) finite-sample forecast closed forms", ma1_example),
        ("ARMA(1,1) forecast closed forms and stationary comparison", arma11_example),
        ("Monte-Carlo characteristic errors", mc_characteristic),
        ("asymptotic covariance of the estimator", sigma_beta_checks),
        ("Jacobians vs central finite differences", jacobian_checks),
        ("estimation error code paths agree", omega_identity),
        ("exact-minus-approximate gap is O(1/T²)", surrogate_order),
        ("factorized sums equal nested sums", factorized_sums),
        ("predictor orderings, T=50, h=1..10", numerical_study),
        ("aggregation algebra", aggregation_algebra),
        ("char(TMS) ≤ σ*²", tms_char_bound),
        ("TMS total error is not monotone", non_monotone),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
