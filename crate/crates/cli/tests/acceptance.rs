//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use optsel_core::allocation::{l1_min_lp, merton_eta, ExposureTarget};
use optsel_core::evaluation::{estimate_cer, CerSettings, Composition};
use optsel_core::market::MarketParams;
use optsel_core::numerics::{lin_space, log_space, reversed_hazard};
use optsel_core::pricing::{
    bs_european, bs_price, mc_price, tree_price_american, Family, OptionSpec, PricingContext, PricingSettings,
    SensitivityMatrix, Style, Underlying,
};
use optsel_core::selection::{basket_region_map, putcall_region_map, select_straddle, Slot1Mode, ONE_ASSET_FAMILIES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn exposure_target() -> Outcome {
    let eta = merton_eta(&MarketParams::table1()).unwrap().eta;
    let ok = within(eta[0], 0.0833, 5e-4) && within(eta[1], 0.1167, 5e-4);
    (ok, format!("eta* = ({:.6}, {:.6})", eta[0], eta[1]))
}

fn straddle_strikes() -> Outcome {
    let p = MarketParams::table1();
    let ctx = PricingContext::new(p, PricingSettings::default()).unwrap();
    let eta = merton_eta(&p).unwrap();
    let euro = select_straddle(1, Style::European, &ctx, &eta).unwrap();
    let asian = select_straddle(1, Style::AsianArithmetic, &ctx, &eta).unwrap();
    let amer = select_straddle(1, Style::American, &ctx, &eta).unwrap();
    let b = amer.exercise_bound.unwrap();
    let checks = [
        ("Euro A", euro.exclusion_strike, 34.5, 0.05),
        ("Asian A", asian.exclusion_strike, 31.9, 0.3),
        ("Amer A", amer.exclusion_strike, 32.9, 0.3),
        ("Amer B", b, 37.7, 0.3),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, x, target, tol) in checks {
        let pass = within(x, target, tol);
        ok &= pass;
        parts.push(format!(
            "{name} = {x:.4} (target {target} ± {tol}{})",
            if pass { "" } else { ", out of tolerance" }
        ));
    }
    (ok, parts.join("; "))
}

fn corollary_limits() -> Outcome {
    let p = MarketParams::table1();
    let eta = merton_eta(&p).unwrap().eta;
    let mut ok = true;
    let mut parts = Vec::new();
    for (asset, target) in eta.iter().enumerate() {
        let (s, sigma) = (p.spot[asset], p.sigma[asset]);
        let strikes = log_space(0.01 * s, 100.0 * s, 200);
        let pi = |family: Family, k: f64| {
            let q = bs_european(s, k, p.r, sigma, p.maturity, family).unwrap();
            (target / q.f).abs()
        };
        let calls: Vec<f64> = strikes.iter().map(|&k| pi(Family::Call, k)).collect();
        // puts walk toward zero strike
        let puts: Vec<f64> = strikes.iter().rev().map(|&k| pi(Family::Put, k)).collect();
        for (name, v) in [("call", &calls), ("put", &puts)] {
            let decreasing = v.windows(2).all(|w| w[1] < w[0]);
            let ratio = v[v.len() - 1] / v[0];
            ok &= decreasing && ratio < 1e-3;
            parts.push(format!(
                "asset {} {name}: strictly decreasing = {decreasing}, final/initial = {ratio:.4e}",
                asset + 1
            ));
        }
    }
    (ok, parts.join("; "))
}

fn reversed_hazard_inequality() -> Outcome {
    let xs = lin_space(-10.0, 10.0, 2001);
    let cs: Vec<f64> = (1..=500).map(|j| 5.0 * j as f64 / 500.0).collect();
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for &x in &xs {
        let rhs = reversed_hazard(x);
        for &c in &cs {
            let lhs = reversed_hazard(x - c) - c;
            // rounding allowance of a few ulps of the operands
            let slack = 8.0 * f64::EPSILON * (rhs.abs() + (lhs + c).abs() + c);
            worst = worst.max(lhs - rhs);
            if lhs > rhs + slack {
                violations += 1;
            }
        }
    }
    (
        violations == 0,
        format!("{} points, {violations} violations, max(lhs - rhs) = {worst:.3e}", xs.len() * cs.len()),
    )
}

/// Minimum ℓ1 over all solvable pairs, by direct 2×2 solves.
fn brute_force_pairs(rows: &[[f64; 2]], eta: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if i >= j {
                continue;
            }
            let (a, b) = (rows[i], rows[j]);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-10 {
                continue;
            }
            // π_i a + π_j b = η
            let pi_i = (eta[0] * b[1] - eta[1] * b[0]) / det;
            let pi_j = (a[0] * eta[1] - a[1] * eta[0]) / det;
            best = best.min(pi_i.abs() + pi_j.abs());
        }
    }
    best
}

fn lp_matches_pairs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut max_nonzeros = 0;
    let mut failures = 0;
    for trial in 0..200 {
        let n = 2 + trial % 7;
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let eta = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let labels = (0..n).map(|i| format!("o{i}")).collect();
        match l1_min_lp(&SensitivityMatrix::from_rows(rows.clone(), labels), &ExposureTarget { eta }) {
            Ok(lp) => {
                let gap = (lp.allocation.l1 - brute_force_pairs(&rows, eta)).abs();
                worst = worst.max(gap);
                max_nonzeros = max_nonzeros.max(lp.nonzeros);
                if gap > 1e-8 || lp.nonzeros > 2 {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    (
        failures == 0,
        format!("200 matrices, {failures} failures, max gap = {worst:.3e}, max nonzeros = {max_nonzeros}"),
    )
}

fn pricing_cross_validation() -> Outcome {
    let p = MarketParams::table1();
    let settings = PricingSettings::default();
    let (r, sigma, ttm) = (p.r, p.sigma[0], p.maturity);
    let grid = [30.0, 35.0, 40.0, 45.0, 50.0];
    let mut worst_z = 0.0f64;
    let mut worst_amer = 0.0f64;
    for &s in &grid {
        for &k in &grid {
            for family in [Family::Call, Family::Put] {
                let spec = OptionSpec::new(family, Style::European, Underlying::Asset1, k, ttm);
                let mc = mc_price(&spec, [s, p.spot[1]], &p, &settings).unwrap();
                let exact = bs_price(family, s, k, r, sigma, ttm);
                worst_z = worst_z.max((mc.price - exact).abs() / mc.price_std_err);
            }
            let amer = OptionSpec::new(Family::Call, Style::American, Underlying::Asset1, k, ttm);
            let tree = tree_price_american(&amer, s, r, sigma, settings.tree_steps).unwrap();
            worst_amer = worst_amer.max((tree.price - bs_price(Family::Call, s, k, r, sigma, ttm)).abs());
        }
    }
    (
        worst_z <= 3.0 && worst_amer <= 1e-2,
        format!("max |MC - closed form| = {worst_z:.2} std err; max |American - European call| = {worst_amer:.2e}"),
    )
}

fn cer_convergence() -> Outcome {
    let r = estimate_cer(Composition::Stocks, 250, &MarketParams::table1(), &CerSettings::default()).unwrap();
    let ok = (r.cer - r.theoretical).abs() <= 2.0 * r.std_err && r.std_err < 30e-4;
    (
        ok,
        format!("CER = {:.6} ± {:.6}, theoretical {:.6}", r.cer, r.std_err, r.theoretical),
    )
}

fn region_winners() -> Outcome {
    let ra = lin_space(0.5, 1.0, 11);
    let rb = lin_space(1.0, 2.0, 21);
    let p = MarketParams::table1();
    let ctx = PricingContext::new(p, PricingSettings::default()).unwrap();
    let eta = merton_eta(&p).unwrap();
    let map = putcall_region_map(1, &ra, &rb, &ONE_ASSET_FAMILIES, &ctx, &eta).unwrap();
    let winner = |ra: f64, rb: f64| map.cell(ra, rb).and_then(|c| c.winner);
    let call = winner(0.95, 1.5);
    let put = winner(0.7, 1.05);
    let call_ok = call.is_some_and(|w| w.family == Family::Call && w.style == Style::AsianArithmetic);
    let put_ok = put.is_some_and(|w| w.family == Family::Put && w.style == Style::AsianArithmetic);

    let q = MarketParams { rho: -0.4, ..p };
    let ctx = PricingContext::new(q, PricingSettings::default()).unwrap();
    let basket = basket_region_map(&ra, &rb, Slot1Mode::Fixed(40.0), &ctx, &merton_eta(&q).unwrap()).unwrap();
    let basket_puts = basket
        .cells
        .iter()
        .filter(|c| c.winner.is_some_and(|w| w.family == Family::BasketPut))
        .count();
    let tag = |w: Option<OptionSpec>| w.map_or("none".into(), |w| w.tag());
    (
        call_ok && put_ok && basket_puts > 0,
        format!(
            "(0.95, 1.5) -> {}; (0.7, 1.05) -> {}; basket-put cells at rho = -0.4: {basket_puts}/{}",
            tag(call),
            tag(put),
            basket.cells.len()
        ),
    )
}

fn rolling_straddle() -> Outcome {
    let r = estimate_cer(Composition::StraddleRatio, 10, &MarketParams::table1(), &CerSettings::default()).unwrap();
    (
        (r.cer - r.theoretical).abs() <= 0.01,
        format!("CER at 10/yr = {:.6} ± {:.6}, theoretical {:.6}", r.cer, r.std_err, r.theoretical),
    )
}

fn determinism() -> Outcome {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/table1.toml");
    let dir = tempfile::tempdir().unwrap();
    let studies: [(&str, &[&str]); 3] = [
        (
            "putcall-region",
            &["numeric.region_points=6", "numeric.mc_paths=20000", "numeric.tree_steps=300"],
        ),
        (
            "basket-surface",
            &["numeric.surface_points=4", "numeric.mc_paths=20000"],
        ),
        (
            "cer-surface",
            &["numeric.cer_points=2", "numeric.cer_paths=4000", "numeric.frequencies=\"1,10\""],
        ),
    ];
    let mut compared = 0;
    for (study, overrides) in studies {
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("{study}-{threads}"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_optsel"));
            cmd.args(["run", config, "--threads", threads, "--out", out.to_str().unwrap()]);
            cmd.args(["--override", &format!("study={study}")]);
            for o in overrides {
                cmd.args(["--override", o]);
            }
            let status = cmd.output().unwrap().status;
            if !status.success() {
                return (false, format!("{study} with {threads} threads exited with {status}"));
            }
            outputs.push(out);
        }
        let csvs = |d: &Path| -> Vec<(String, Vec<u8>)> {
            let mut v: Vec<_> = fs::read_dir(d)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
                .collect();
            v.sort();
            v
        };
        let (a, b) = (csvs(&outputs[0]), csvs(&outputs[1]));
        if a.is_empty() || a != b {
            return (false, format!("{study}: CSVs differ between 1 and 4 threads"));
        }
        compared += a.len();
    }
    (true, format!("{compared} CSVs byte-identical across 1 and 4 threads"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("exposure target", exposure_target),
        ("straddle exclusion strikes", straddle_strikes),
        ("call/put allocation limits", corollary_limits),
        ("reversed-hazard inequality", reversed_hazard_inequality),
        ("LP equals best pair", lp_matches_pairs),
        ("pricing cross-validation", pricing_cross_validation),
        ("CER convergence", cer_convergence),
        ("region winners", region_winners),
        ("rolling straddle CER", rolling_straddle),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {} ({name}): {detail} [{secs:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1
        );
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
