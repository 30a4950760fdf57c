use rayon::prelude::*;

use super::{asset_underlying, evaluate_one_asset, warm_engines, Candidate, SelectionOutcome};
use crate::allocation::ExposureTarget;
use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::numerics::{brent_minimize, brent_root, log_space, norm_cdf};
use crate::pricing::{
    american_exercise_bound, bs_price, bs_straddle, Family, OptionSpec, PricingContext, Style,
};

/// Strikes per branch in the scan that precedes the bracketed refinement.
pub const BRANCH_GRID: usize = 200;

/// Time to maturity of the straddle held at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaturityRule {
    /// Rolled into a fresh contract, always `T̂` to expiry.
    #[default]
    RollingConstant,
    /// One contract bought at 0 and held, `T̂ − t` to expiry.
    FixedExpiry,
}

impl MaturityRule {
    pub fn ttm(self, maturity: f64, t: f64) -> f64 {
        match self {
            MaturityRule::RollingConstant => maturity,
            MaturityRule::FixedExpiry => maturity - t,
        }
    }
}

/// Outcome of the straddle search on one asset and style.
#[derive(Debug, Clone, PartialEq)]
pub struct StraddleSelection {
    pub outcome: SelectionOutcome,
    /// Strike where the straddle Delta vanishes.
    pub exclusion_strike: f64,
    /// Largest strike not exercised immediately (American only).
    pub exercise_bound: Option<f64>,
    /// Best strike below the exclusion strike.
    pub left: Candidate,
    /// Best strike above it, if any is admissible.
    pub right: Option<Candidate>,
    /// Normalized residual of the first-order condition at the winner
    /// (European only): `|Δ_K·O − Δ·O_K| / (|Δ_K·O| + |Δ·O_K|)`.
    pub stationarity_residual: Option<f64>,
}

/// Maximizes `objective` over `[lo, hi]`: a log-spaced scan, then Brent
/// between the neighbours of the best scan point.
fn maximize_branch<F>(objective: F, lo: f64, hi: f64, x_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let grid = log_space(lo, hi, BRANCH_GRID);
    let values: Vec<f64> = grid.par_iter().map(|&k| objective(k)).collect();
    let (i, &best) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let a = grid[i.saturating_sub(1)];
    let b = grid[(i + 1).min(grid.len() - 1)];
    if a == b {
        return Ok((grid[i], best));
    }
    let (k, neg) = brent_minimize(|k| Ok(-objective(k)), a, b, x_tol)?;
    Ok(if -neg > best { (k, -neg) } else { (grid[i], best) })
}

/// Left-branch strike that maximizes the European straddle sensitivity,
/// with that sensitivity.
pub fn euro_straddle_optimum(spot: f64, r: f64, sigma: f64, ttm: f64) -> Result<(f64, f64)> {
    if !(ttm > 0.0) {
        return Err(Error::param("ttm", ttm, "must be positive"));
    }
    let a = spot * ((r + 0.5 * sigma * sigma) * ttm).exp();
    let f = |k: f64| bs_straddle(spot, k, r, sigma, ttm).map_or(0.0, |q| q.f);
    maximize_branch(f, 1e-2 * spot, a * (1.0 - 1e-3), 1e-6 * spot)
}

fn euro_straddle_delta(spot: f64, k: f64, r: f64, sigma: f64, ttm: f64) -> f64 {
    let d1 = ((spot / k).ln() + (r + 0.5 * sigma * sigma) * ttm) / (sigma * ttm.sqrt());
    2.0 * norm_cdf(d1) - 1.0
}

/// Optimal straddle strike on `asset` for one exercise style.
pub fn select_straddle(
    asset: usize,
    style: Style,
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<StraddleSelection> {
    let underlying = asset_underlying(asset)?;
    let p = *ctx.params();
    let spot = p.spot[asset];
    let sigma = p.sigma[asset];
    let ttm = p.maturity;
    let spec = |k: f64| OptionSpec::new(Family::Straddle, style, underlying, k, ttm);
    warm_engines(ctx, &[spec(spot)]);

    let delta = |k: f64| -> Result<f64> {
        match style {
            Style::European => Ok(euro_straddle_delta(spot, k, p.r, sigma, ttm)),
            _ => Ok(ctx.price(&spec(k), p.spot)?.delta[asset]),
        }
    };
    let x_tol = 1e-4 * spot;
    let exclusion = brent_root("straddle delta", delta, 0.5 * spot, 2.0 * spot, x_tol)?;
    let exercise_bound = match style {
        Style::American => Some(american_exercise_bound(
            spot,
            p.r,
            sigma,
            ttm,
            ctx.settings().tree_steps,
        )?),
        _ => None,
    };

    let abs_f = |k: f64| -> f64 {
        let c = evaluate_one_asset(spec(k), asset, ctx, eta);
        if c.is_admissible() {
            c.f[asset].abs()
        } else {
            0.0
        }
    };
    let band = 1e-3 * exclusion;
    let branch_tol = 1e-6 * spot;
    let (k_left, _) = maximize_branch(abs_f, 1e-2 * spot, exclusion - band, branch_tol)?;
    let left = evaluate_one_asset(spec(k_left), asset, ctx, eta);
    if !left.is_admissible() {
        return Err(Error::NoAdmissibleCandidate(format!(
            "left straddle branch below {exclusion:.4}"
        )));
    }
    let right_hi = exercise_bound.unwrap_or(4.0 * spot);
    let right = if right_hi > exclusion + band {
        let (k_right, _) = maximize_branch(abs_f, exclusion + band, right_hi, branch_tol)?;
        Some(evaluate_one_asset(spec(k_right), asset, ctx, eta)).filter(Candidate::is_admissible)
    } else {
        None
    };

    let winner = match &right {
        Some(r) if r.f[asset].abs() > left.f[asset].abs() => r.clone(),
        _ => left.clone(),
    };
    let stationarity_residual = (style == Style::European).then(|| {
        let k = winner.spec.strike;
        let h = 1e-3 * spot;
        let price = |k: f64| bs_price(Family::Straddle, spot, k, p.r, sigma, ttm);
        let d = |k: f64| euro_straddle_delta(spot, k, p.r, sigma, ttm);
        let d_k = (d(k + h) - d(k - h)) / (2.0 * h);
        let o_k = (price(k + h) - price(k - h)) / (2.0 * h);
        let (a, b) = (d_k * price(k), d(k) * o_k);
        (a - b).abs() / (a.abs() + b.abs())
    });

    let mut candidates = vec![left.clone()];
    candidates.extend(right.clone());
    Ok(StraddleSelection {
        outcome: SelectionOutcome {
            winner: winner.spec,
            winner_f: winner.f,
            achieved_l1: winner.l1,
            candidates,
        },
        exclusion_strike: exclusion,
        exercise_bound,
        left,
        right,
        stationarity_residual,
    })
}

/// Optimal European straddle strike-to-spot ratio at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub t: f64,
    pub ttm: f64,
    pub ratio: f64,
    pub f: f64,
}

/// Optimal left-branch ratio `K*/S` of the European straddle at each time.
pub fn straddle_ratio_path(
    asset: usize,
    params: &MarketParams,
    times: &[f64],
    rule: MaturityRule,
) -> Result<Vec<RatioPoint>> {
    params.validate()?;
    asset_underlying(asset)?;
    let spot = params.spot[asset];
    times
        .iter()
        .map(|&t| {
            if !(0.0..=params.horizon).contains(&t) {
                return Err(Error::param("t", t, "must lie in [0, horizon]"));
            }
            let ttm = rule.ttm(params.maturity, t);
            let (k, f) = euro_straddle_optimum(spot, params.r, params.sigma[asset], ttm)?;
            Ok(RatioPoint {
                t,
                ttm,
                ratio: k / spot,
                f,
            })
        })
        .collect()
}
