//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Oracles here are written from the model equations directly and
//! do not reuse the library's closed forms.

use std::time::{Duration, Instant};

use offshore_market::calibration::{
    anchor_normalizations, anchored, estimate_rates, fit_zipf, german_scenario, AnchorConditions,
    CalibrationSeries, SizeBucket, YearRecord,
};
use offshore_market::cli::trajectory_csv;
use offshore_market::curves::{evolve_density, CurveMode, DemandSide, SupplySide};
use offshore_market::dynamics::{simulate, sweep, ScenarioConfig, SweepSpec, Trajectory};
use offshore_market::equilibrium::{classify_regime, solve_equilibrium, Regime, SlopeMode, SolveOptions};
use offshore_market::model::ModelParams;
use offshore_market::numerics::{bisect, Bracket, DensityGrid};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn german(mu: f64) -> ModelParams<f64> {
    german_scenario(mu).expect("German scenario is valid")
}

fn german_config(mu: f64, mode: SlopeMode) -> ScenarioConfig<f64> {
    ScenarioConfig {
        mode,
        ..ScenarioConfig::new(german(mu))
    }
}

fn run(cfg: &ScenarioConfig<f64>) -> Result<Trajectory<f64>, String> {
    simulate(cfg).map_err(|e| e.to_string())
}

fn regime_threshold() -> Outcome {
    let start = Instant::now();
    let at = |mu: f64| -> f64 {
        let p = german(mu);
        let d = DemandSide::new(p).unwrap();
        let s = SupplySide::new(p).unwrap();
        match classify_regime(&d, &s, 0.0, 37_000.0, CurveMode::Closed).unwrap().tag {
            Regime::Emerging => 1.0,
            Regime::Mature => -1.0,
        }
    };
    let (lo, hi) = (0.0, 0.1);
    let bracket = Bracket::new(lo, hi, at(lo), at(hi)).map_err(|e| e.to_string())?;
    let b = bisect(at, bracket, 1e-10).map_err(|e| e.to_string())?;
    let flip = b.midpoint();
    let elapsed = start.elapsed();
    ensure((flip - 0.037).abs() <= 1e-9, || format!("flip at mu = {flip:.12}"))?;
    ensure(at(0.073 - 0.036) > 0.0, || "mu = alpha - psi is not emerging".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("flip at mu = {flip:.10} ({elapsed:.2?})"))
}

fn equilibrium_anchor() -> Outcome {
    let p = german(0.07);
    let closed = solve_equilibrium(
        &DemandSide::new(p).unwrap(),
        &SupplySide::new(p).unwrap(),
        0.0,
        &SolveOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let numeric = solve_equilibrium(
        &DemandSide::gridded(p).unwrap(),
        &SupplySide::gridded(p).unwrap(),
        0.0,
        &SolveOptions {
            curve_mode: CurveMode::Numeric,
            ..SolveOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure((closed.price - 37_000.0).abs() <= 1e-6, || format!("closed price {}", closed.price))?;
    let agree = rel(numeric.price, closed.price);
    ensure(agree <= 1e-6, || format!("numeric price {} (rel {agree:e})", numeric.price))?;
    ensure(rel(closed.served, 7500.0) <= 1e-9, || format!("served {}", closed.served))?;
    ensure((closed.marginal_size - 2600.0).abs() <= 1e-6, || {
        format!("marginal size {}", closed.marginal_size)
    })?;
    // provider needs (nc - P)/(n delta_c) of its work offshore; the complement stays local
    let share = (50_000.0 - closed.price) / 25_000.0;
    ensure((closed.required_share - share).abs() <= 1e-12 && (share - 0.52).abs() <= 1e-9, || {
        format!("required share {}", closed.required_share)
    })?;
    Ok(format!(
        "P = {:.6}, numeric rel diff {agree:.1e}, served {:.1}, size {:.1}, share {:.2} (complement {:.2})",
        closed.price,
        closed.served,
        closed.marginal_size,
        closed.required_share,
        1.0 - closed.required_share
    ))
}

fn price_share_bracket() -> Outcome {
    let start = Instant::now();
    let base = german_config(0.05, SlopeMode::CapacityBalance);
    let spec: SweepSpec = "mu=0.045:0.06:0.0025".parse().map_err(|e: offshore_market::Error| e.to_string())?;
    let rows = sweep(&base, &spec).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let hits: Vec<f64> = rows
        .iter()
        .filter_map(|r| {
            let s = r.outcome.as_ref().ok()?;
            let ok = (-0.55..=-0.45).contains(&s.price_drift_pct) && (0.65..=0.80).contains(&s.share_gain_pp);
            ok.then_some(r.value)
        })
        .collect();
    ensure(!hits.is_empty(), || {
        let seen: Vec<String> = rows
            .iter()
            .map(|r| match &r.outcome {
                Ok(s) => format!("{:.4}:{:.3}%/{:.3}pp", r.value, s.price_drift_pct, s.share_gain_pp),
                Err(e) => format!("{:.4}:{e}", r.value),
            })
            .collect();
        format!("no mu in bracket: {}", seen.join(" "))
    })?;
    ensure(elapsed < Duration::from_secs(5), || format!("sweep took {elapsed:?}"))?;

    // instantaneous rates at t = 0 for mu = 0.05, from the exponential path
    let traj = run(&base)?;
    let p0 = &traj.points[0];
    let oracle_slope = (0.073 - 0.036 - 0.05) * (37_000.0 - 25_000.0);
    ensure(rel(p0.price_slope, oracle_slope) <= 1e-9, || format!("initial slope {}", p0.price_slope))?;
    let drift = p0.price_slope / p0.price * 100.0;
    let gain = -p0.price_slope / 25_000.0 * 100.0;
    ensure((drift + 0.42).abs() < 0.005 && (gain - 0.62).abs() < 0.005, || {
        format!("mu = 0.05 gives {drift:.4}%/year and {gain:.4} pp/year")
    })?;
    Ok(format!(
        "mu in {:?} hit the bracket; mu = 0.05: {drift:.3}%/year, {gain:.3} pp/year; sweep {elapsed:.2?}",
        hits
    ))
}

fn affine_link() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for (mu, mode) in [
        (0.05, SlopeMode::CapacityBalance),
        (0.07, SlopeMode::CapacityBalance),
        (0.06, SlopeMode::Literal),
    ] {
        let traj = run(&german_config(mu, mode))?;
        for w in traj.points.windows(2) {
            if w[0].regime != Regime::Mature || w[1].regime != Regime::Mature {
                continue;
            }
            let d_share = w[1].required_share - w[0].required_share;
            let d_price = w[1].price - w[0].price;
            worst = worst.max((d_share + d_price / 25_000.0).abs());
            steps += 1;
        }
    }
    ensure(steps > 0, || "no mature steps".into())?;
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("{steps} mature steps, max deviation {worst:.1e}"))
}

fn trajectory_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for mu in [0.05, 0.07] {
        let traj = run(&german_config(mu, SlopeMode::CapacityBalance))?;
        let last = traj.points.last().unwrap();
        ensure((last.t - 10.0).abs() < 1e-12, || format!("path ends at t = {}", last.t))?;
        let floor = 25_000.0;
        let oracle = floor + (37_000.0 - floor) * ((0.073 - 0.036 - mu) * 10.0f64).exp();
        let err = rel(last.price, oracle);
        ensure(err <= 1e-6, || format!("mu = {mu}: P(10) = {} vs {oracle} (rel {err:e})", last.price))?;
        worst = worst.max(err);
    }
    Ok(format!("P(10) within {worst:.1e} relative for mu = 0.05 and 0.07"))
}

fn transport_oracle() -> Outcome {
    let p = german(0.07);
    let (alpha, psi, r_m, f0) = (p.alpha, p.psi, p.r_m, p.f0);
    let density = |t: f64, r: f64| alpha * f0 * (alpha * t).exp() * (r / r_m).powf(-alpha / psi);
    let h = 0.005;
    let t = 5.0;
    let shift = (psi * t / h).round() as usize;
    let points = 4001;
    let upper = r_m * (h * (points - 1) as f64).exp();
    let grid = DensityGrid::log_spaced(r_m, upper, points, |r| density(0.0, r)).map_err(|e| e.to_string())?;
    let evolved = evolve_density(&grid, psi, t, |tau| alpha * f0 * (alpha * tau).exp())
        .map_err(|e| e.to_string())?
        .grid;
    let mut worst_closed: f64 = 0.0;
    for (&r, &v) in evolved.axis().iter().zip(evolved.values()) {
        worst_closed = worst_closed.max(rel(v, density(t, r)));
    }
    ensure(worst_closed <= 1e-6, || format!("closed-form mismatch {worst_closed:e}"))?;
    let mut worst_char: f64 = 0.0;
    for i in 0..points - shift {
        let before = grid.values()[i];
        worst_char = worst_char.max(rel(evolved.values()[i + shift], before));
        let r = grid.axis()[i];
        worst_char = worst_char.max(rel(density(t, r * (psi * t).exp()), density(0.0, r)));
    }
    ensure(worst_char <= 1e-9, || format!("characteristic mismatch {worst_char:e}"))?;
    let side = DemandSide::new(p).unwrap();
    let r = 2.0 * r_m;
    let lib = side.demand_density(t, r * (psi * t).exp()).unwrap();
    ensure(rel(lib, side.demand_density(0.0, r).unwrap()) <= 1e-9, || "library density drifts".into())?;
    Ok(format!(
        "{shift}-node shift, closed form within {worst_closed:.1e}, characteristics within {worst_char:.1e}"
    ))
}

#[derive(Debug, Clone)]
struct Draw {
    params: ModelParams<f64>,
    p_lo: f64,
    p_hi: f64,
    anchor_price: f64,
    served0: f64,
}

fn draws() -> impl Strategy<Value = Draw> {
    (
        (0.01f64..0.06, 1.5f64..4.0, 0.0f64..0.1, 1.0f64..5.0),
        (20_000.0f64..100_000.0, 0.1f64..0.9, 1e-5f64..1e-3, 0.01f64..0.1, 0.2f64..0.99),
        (0.01f64..0.99, 0.01f64..0.99, 0.01f64..0.99, 100.0f64..1e5, 0.1f64..10.0, 0.1f64..10.0),
    )
        .prop_map(|((psi, ratio, mu, n), (c, frac, beta, v, rm_frac), (u1, u2, u3, served0, f0, g0))| {
            let delta_c = frac * c;
            let floor = n * (c - delta_c);
            // below this price the smallest viable provider exceeds n
            let unclamped = n * c - n * n * beta * delta_c;
            let params = ModelParams {
                v,
                n,
                c,
                delta_c,
                beta,
                psi,
                mu,
                alpha: ratio * psi,
                r_m: rm_frac * floor / v,
                f0,
                g0,
            };
            let span = unclamped - floor;
            let (a, b) = (floor + span * u1.min(u2), floor + span * u1.max(u2));
            Draw {
                params,
                p_lo: a,
                p_hi: if b > a { b } else { a + span * 1e-3 },
                anchor_price: floor + span * u3,
                served0,
            }
        })
}

fn check_draw(d: &Draw) -> Result<(), TestCaseError> {
    let p = d.params;
    let fail = |m: String| TestCaseError::fail(m);
    let closed_d = DemandSide::new(p).map_err(|e| fail(e.to_string()))?;
    let closed_s = SupplySide::new(p).map_err(|e| fail(e.to_string()))?;
    let dem = |x: f64| closed_d.demand_at(0.0, x, CurveMode::Closed).unwrap();
    let sup = |x: f64| closed_s.supply_at(0.0, x, CurveMode::Closed).unwrap();
    prop_assert!(dem(d.p_lo) > dem(d.p_hi), "demand not decreasing on {:?}", (d.p_lo, d.p_hi));
    prop_assert!(sup(d.p_lo) <= sup(d.p_hi), "supply decreasing on {:?}", (d.p_lo, d.p_hi));

    let num_d = DemandSide::gridded(p).map_err(|e| fail(e.to_string()))?;
    let num_s = SupplySide::gridded(p).map_err(|e| fail(e.to_string()))?;
    for x in [d.p_lo, d.p_hi] {
        let nd = num_d.demand_at(0.0, x, CurveMode::Numeric).unwrap();
        let ns = num_s.supply_at(0.0, x, CurveMode::Numeric).unwrap();
        prop_assert!(rel(nd, dem(x)) <= 1e-6, "demand {nd} vs {} at {x}", dem(x));
        prop_assert!(rel(ns, sup(x)) <= 1e-6, "supply {ns} vs {} at {x}", sup(x));
    }

    let anchors = AnchorConditions {
        served0: d.served0,
        price0: d.anchor_price,
    };
    anchor_normalizations(&p, &anchors).map_err(|e| fail(e.to_string()))?;
    let fitted = anchored(&p, &anchors).map_err(|e| fail(e.to_string()))?;
    let opts = SolveOptions::default();
    let eq = solve_equilibrium(
        &DemandSide::new(fitted).unwrap(),
        &SupplySide::new(fitted).unwrap(),
        0.0,
        &opts,
    )
    .map_err(|e| fail(e.to_string()))?;
    prop_assert!(
        (eq.price - d.anchor_price).abs() <= opts.tol,
        "round trip {} vs {}",
        eq.price,
        d.anchor_price
    );
    Ok(())
}

fn curve_properties() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&draws(), |d| check_draw(&d)).map_err(|e| e.to_string())?;
    Ok(format!("{cases} random parameter draws"))
}

fn calibration_recovery() -> Outcome {
    let (psi, alpha, r_m): (f64, f64, f64) = (0.041, 0.067, 9.5e5);
    let mut records = Vec::new();
    let (mut firms, mut revenue): (f64, f64) = (120_000.0, 2.5e11);
    for k in 0..12 {
        let births = if k == 0 { 0.0 } else { firms * (alpha.exp() - 1.0) };
        if k > 0 {
            revenue = revenue * psi.exp() + births * r_m;
            firms += births;
        }
        records.push(YearRecord {
            year: 2001 + k,
            firm_count: firms,
            total_revenue: revenue,
            births,
            entrant_revenue_mean: r_m,
            line: None,
        });
    }
    let series = CalibrationSeries::new(records, None).map_err(|e| e.to_string())?;
    let rates = estimate_rates(&series).map_err(|e| e.to_string())?;
    let errs = [
        (rates.psi - psi).abs(),
        (rates.alpha - alpha).abs(),
        rel(rates.r_m, r_m),
    ];
    ensure(errs.iter().all(|&e| e <= 1e-9), || format!("errors {errs:?}"))?;

    let g0 = 3.125;
    let buckets: Vec<SizeBucket> = [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0]
        .iter()
        .map(|&size| SizeBucket {
            size,
            provider_count: g0 / size,
            line: None,
        })
        .collect();
    let fit = fit_zipf(&buckets).map_err(|e| e.to_string())?;
    ensure(fit.g0 == g0 && fit.residual <= 1e-12, || format!("fit {fit:?}"))?;
    Ok(format!("rate errors {:.1e}, Zipf g0 = {} exactly", errs.iter().cloned().fold(0.0, f64::max), fit.g0))
}

fn determinism(suite_start: Instant) -> Outcome {
    let cfg = german_config(0.07, SlopeMode::CapacityBalance);
    let start = Instant::now();
    let first = run(&cfg)?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("10-year simulation took {elapsed:?}"))?;
    let a = trajectory_csv(&first);
    let b = trajectory_csv(&run(&cfg)?);
    ensure(a == b, || "trajectory bytes differ".into())?;
    let bits = |t: &Trajectory<f64>| -> Vec<u64> { t.points.iter().map(|p| p.price.to_bits()).collect() };
    ensure(bits(&first) == bits(&run(&cfg)?), || "prices differ bitwise".into())?;

    let exe = env!("CARGO_BIN_EXE_offshore-market");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = dir.path().join("german.cfg");
    std::fs::write(
        &cfg_path,
        "[market]\nv = 0.025\nn = 1\nc = 50000\ndelta_c = 25000\nbeta = 0.0002\npsi = 0.036\nmu = 0.07\n\
         alpha = 0.073\nr_m = 1300000\n[anchors]\nserved0 = 7500\nprice0 = 37000\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let traj = dir.path().join(format!("traj{i}.csv"));
        let sweep_out = dir.path().join(format!("sweep{i}.csv"));
        for args in [
            vec!["simulate", "--out", traj.to_str().unwrap()],
            vec!["sweep", "--vary", "mu=0.04:0.08:0.01", "--out", sweep_out.to_str().unwrap()],
        ] {
            let status = std::process::Command::new(exe)
                .args(&args)
                .args(["--config", cfg_path.to_str().unwrap()])
                .stdout(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            ensure(status.success(), || format!("{args:?} exited with {status}"))?;
        }
        outputs.push((std::fs::read(&traj).unwrap(), std::fs::read(&sweep_out).unwrap()));
    }
    ensure(outputs[0] == outputs[1], || "CLI outputs differ between runs".into())?;
    ensure(outputs[0].0 == a, || "CLI trajectory differs from library trajectory".into())?;
    let total = suite_start.elapsed();
    ensure(total < Duration::from_secs(60), || format!("suite took {total:?}"))?;
    Ok(format!("identical bytes across runs, simulation {elapsed:.2?}, suite {total:.2?}"))
}

fn main() {
    let suite_start = Instant::now();
    let criteria: [(&str, &dyn Fn() -> Outcome); 9] = [
        ("regime threshold", &regime_threshold),
        ("equilibrium anchor", &equilibrium_anchor),
        ("price and share bracket", &price_share_bracket),
        ("affine share-price link", &affine_link),
        ("trajectory oracle", &trajectory_oracle),
        ("transport oracle", &transport_oracle),
        ("curve properties", &curve_properties),
        ("calibration recovery", &calibration_recovery),
        ("determinism and performance", &|| determinism(suite_start)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.2?}",
        criteria.len() - failed,
        suite_start.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
