//! Composition search: which option, style and strike minimizes the ℓ1
//! exposure needed to hit the target.
//!
//! One-asset slots are separable, so each slot maximizes `|f|` on its own
//! asset. Basket slots couple both assets and are compared on total ℓ1.

mod basket;
mod straddle;

pub use basket::{basket_l1_surface, basket_region_map, select_basket, BasketSurfacePoint, Slot1Mode};
pub use straddle::{
    euro_straddle_optimum, select_straddle, straddle_ratio_path, MaturityRule, RatioPoint,
    StraddleSelection,
};

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::allocation::ExposureTarget;
use crate::csv::{fmt_f64, row};
use crate::error::{Error, Result};
use crate::numerics::lin_space;
use crate::pricing::{Family, OptionSpec, PricingContext, Style, Underlying};

/// Admissible strike interval `[lower, upper]` in currency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrikeBounds {
    pub lower: f64,
    pub upper: f64,
}

impl StrikeBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let b = StrikeBounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// `[ra·reference, rb·reference]`.
    pub fn from_ratios(ra: f64, rb: f64, reference: f64) -> Result<Self> {
        StrikeBounds::new(ra * reference, rb * reference)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower >= 0.0) || !self.lower.is_finite() {
            return Err(Error::param("lower", self.lower, "must be finite and non-negative"));
        }
        if !(self.upper >= self.lower) || !self.upper.is_finite() {
            return Err(Error::param("upper", self.upper, "must be finite and at least the lower bound"));
        }
        Ok(())
    }
}

/// One evaluated strike.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: OptionSpec,
    /// Relative sensitivities to both assets.
    pub f: [f64; 2],
    /// Weight of this option in its slot.
    pub pi: f64,
    /// ℓ1 exposure of the composition this candidate belongs to.
    pub l1: f64,
    /// Why the candidate cannot enter a composition, if it cannot.
    pub rejected: Option<String>,
}

impl Candidate {
    pub fn is_admissible(&self) -> bool {
        self.rejected.is_none()
    }

    fn rejected(spec: OptionSpec, reason: String) -> Self {
        Candidate {
            spec,
            f: [f64::NAN; 2],
            pi: f64::NAN,
            l1: f64::NAN,
            rejected: Some(reason),
        }
    }

    pub const CURVE_HEADER: &'static str = "strike,family,style,f,pi";

    /// Curve row `strike,family,style,f,pi`; `f` is the loading on the slot asset.
    pub fn curve_row(&self, asset: usize) -> String {
        let (family, style) = family_style_tokens(&self.spec);
        row([
            fmt_f64(self.spec.strike),
            family.to_string(),
            style.to_string(),
            fmt_f64(self.f[asset]),
            fmt_f64(self.pi),
        ])
    }
}

fn family_style_tokens(spec: &OptionSpec) -> (String, String) {
    let record = spec.to_string();
    let mut it = record.split(',');
    (it.next().unwrap_or_default().to_string(), it.next().unwrap_or_default().to_string())
}

/// Winner of a slot and everything evaluated to find it.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub winner: OptionSpec,
    pub winner_f: [f64; 2],
    pub achieved_l1: f64,
    pub candidates: Vec<Candidate>,
}

/// One cell of a selection region map.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub ra: f64,
    pub rb: f64,
    /// Tag of the winning option, `None` when nothing was admissible.
    pub winner: Option<OptionSpec>,
    pub achieved_l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub cells: Vec<RegionCell>,
}

impl RegionMap {
    pub const CSV_HEADER: &'static str = "ra,rb,winner,achieved_l1";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for c in &self.cells {
            out.push_str(&row([
                fmt_f64(c.ra),
                fmt_f64(c.rb),
                c.winner.map_or_else(|| "none".to_string(), |w| w.tag()),
                fmt_f64(c.achieved_l1),
            ]));
        }
        out
    }

    pub fn cell(&self, ra: f64, rb: f64) -> Option<&RegionCell> {
        self.cells
            .iter()
            .find(|c| (c.ra - ra).abs() < 1e-9 && (c.rb - rb).abs() < 1e-9)
    }

    /// Counts of cells won by each tag.
    pub fn tally(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for c in &self.cells {
            let tag = c.winner.map_or_else(|| "none".to_string(), |w| w.tag());
            match out.iter_mut().find(|(t, _)| *t == tag) {
                Some((_, n)) => *n += 1,
                None => out.push((tag, 1)),
            }
        }
        out
    }
}

/// The one-asset families compared in region maps.
pub const ONE_ASSET_FAMILIES: [(Family, Style); 5] = [
    (Family::Call, Style::European),
    (Family::Call, Style::AsianArithmetic),
    (Family::Put, Style::European),
    (Family::Put, Style::AsianArithmetic),
    (Family::Put, Style::American),
];

/// Preference when two candidates tie on the criterion: nearer the money,
/// then calls, then European, Asian, American.
fn tie_break(a: &OptionSpec, b: &OptionSpec, spot: f64) -> Ordering {
    let moneyness = |s: &OptionSpec| (s.strike - spot).abs();
    moneyness(a)
        .total_cmp(&moneyness(b))
        .then_with(|| b.family.is_call_like().cmp(&a.family.is_call_like()))
        .then_with(|| a.style.cmp(&b.style))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Index of the admissible candidate with the largest `|f[asset]|`.
fn argmax_sensitivity(cands: &[Candidate], asset: usize, spot: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cands.iter().enumerate() {
        if !c.is_admissible() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) => {
                let (a, b) = (c.f[asset].abs(), cands[j].f[asset].abs());
                let better = if close(a, b) {
                    tie_break(&c.spec, &cands[j].spec, spot) == Ordering::Less
                } else {
                    a > b
                };
                Some(if better { i } else { j })
            }
        };
    }
    best
}

/// Index of the admissible candidate with the smallest total ℓ1.
fn argmin_l1(cands: &[Candidate], spot: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cands.iter().enumerate() {
        if !c.is_admissible() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) => {
                let better = if close(c.l1, cands[j].l1) {
                    tie_break(&c.spec, &cands[j].spec, spot) == Ordering::Less
                } else {
                    c.l1 < cands[j].l1
                };
                Some(if better { i } else { j })
            }
        };
    }
    best
}

/// Prices a one-asset candidate and derives its slot weight `η_k / f`.
pub(crate) fn evaluate_one_asset(spec: OptionSpec, asset: usize, ctx: &PricingContext, eta: &ExposureTarget) -> Candidate {
    let spots = ctx.params().spot;
    match ctx.price(&spec, spots) {
        Ok(q) => {
            if let Some(ex) = q.exercise {
                if ex.immediate {
                    return Candidate::rejected(spec, "exercised immediately".into());
                }
                if ex.degenerate {
                    return Candidate::rejected(spec, "zero price".into());
                }
            }
            let f = q.f[asset];
            if !(f.abs() >= ctx.settings().singular_threshold) || !f.is_finite() {
                return Candidate {
                    f: q.f,
                    ..Candidate::rejected(spec, "zero sensitivity".into())
                };
            }
            let pi = eta.eta[asset] / f;
            Candidate {
                spec,
                f: q.f,
                pi,
                l1: pi.abs(),
                rejected: None,
            }
        }
        Err(e) => Candidate::rejected(spec, e.to_string()),
    }
}

/// Makes sure Monte-Carlo scenario sets exist before parallel pricing.
pub(crate) fn warm_engines(ctx: &PricingContext, specs: &[OptionSpec]) {
    for s in specs {
        match s.style {
            Style::AsianArithmetic => {
                ctx.engine(s.ttm, s.monitoring);
            }
            Style::European if s.family.is_basket() => {
                ctx.engine(s.ttm, 1);
            }
            _ => {}
        }
    }
}

fn asset_underlying(asset: usize) -> Result<Underlying> {
    match asset {
        0 | 1 => Ok(Underlying::asset(asset)),
        _ => Err(Error::param("asset", asset as f64, "must be 0 or 1")),
    }
}

/// Slot-optimal one-asset option among `families` with strikes in `bounds`.
///
/// The boundary strikes and `grid_points` interior strikes are evaluated for
/// every family; the winner has the largest `|f|`.
pub fn select_one_asset(
    asset: usize,
    families: &[(Family, Style)],
    bounds: &StrikeBounds,
    grid_points: usize,
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<SelectionOutcome> {
    bounds.validate()?;
    let underlying = asset_underlying(asset)?;
    let ttm = ctx.params().maturity;
    let mut strikes = lin_space(bounds.lower, bounds.upper, grid_points.max(2));
    strikes.dedup_by(|a, b| a == b);
    let mut specs = Vec::new();
    for &(family, style) in families {
        if family.is_basket() {
            return Err(Error::param("family", f64::NAN, "basket families need select_basket"));
        }
        if family == Family::Put && bounds.lower == 0.0 {
            return Err(Error::param("lower", 0.0, "put strikes must be bounded away from zero"));
        }
        for &k in &strikes {
            specs.push(OptionSpec::new(family, style, underlying, k, ttm));
        }
    }
    let candidates = strike_curve_specs(&specs, asset, ctx, eta);
    let spot = ctx.params().spot[asset];
    let best = argmax_sensitivity(&candidates, asset, spot).ok_or_else(|| {
        Error::NoAdmissibleCandidate(format!(
            "no admissible one-asset option on asset {} in [{}, {}]",
            asset + 1,
            bounds.lower,
            bounds.upper
        ))
    })?;
    let w = &candidates[best];
    Ok(SelectionOutcome {
        winner: w.spec,
        winner_f: w.f,
        achieved_l1: w.l1,
        candidates,
    })
}

fn strike_curve_specs(specs: &[OptionSpec], asset: usize, ctx: &PricingContext, eta: &ExposureTarget) -> Vec<Candidate> {
    warm_engines(ctx, specs);
    specs
        .par_iter()
        .map(|s| evaluate_one_asset(*s, asset, ctx, eta))
        .collect()
}

/// Sensitivity and weight of each family at each strike, for plotting.
pub fn strike_curve(
    asset: usize,
    families: &[(Family, Style)],
    strikes: &[f64],
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<Vec<Candidate>> {
    let underlying = asset_underlying(asset)?;
    let ttm = ctx.params().maturity;
    let specs: Vec<OptionSpec> = families
        .iter()
        .flat_map(|&(family, style)| {
            strikes
                .iter()
                .map(move |&k| OptionSpec::new(family, style, underlying, k, ttm))
        })
        .collect();
    Ok(strike_curve_specs(&specs, asset, ctx, eta))
}

/// Per-cell winner when calls are capped at `rb·S` and puts floored at `ra·S`.
///
/// Only the deepest out-of-the-money strike of each family is compared.
pub fn putcall_region_map(
    asset: usize,
    ra_grid: &[f64],
    rb_grid: &[f64],
    families: &[(Family, Style)],
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<RegionMap> {
    check_ratio_grids(ra_grid, rb_grid)?;
    let underlying = asset_underlying(asset)?;
    let spot = ctx.params().spot[asset];
    let ttm = ctx.params().maturity;
    let calls: Vec<(Family, Style)> = families.iter().copied().filter(|f| f.0.is_call_like()).collect();
    let puts: Vec<(Family, Style)> = families.iter().copied().filter(|f| !f.0.is_call_like()).collect();
    let call_specs: Vec<OptionSpec> = rb_grid
        .iter()
        .flat_map(|&rb| calls.iter().map(move |&(f, s)| OptionSpec::new(f, s, underlying, rb * spot, ttm)))
        .collect();
    let put_specs: Vec<OptionSpec> = ra_grid
        .iter()
        .flat_map(|&ra| puts.iter().map(move |&(f, s)| OptionSpec::new(f, s, underlying, ra * spot, ttm)))
        .collect();
    let call_c = strike_curve_specs(&call_specs, asset, ctx, eta);
    let put_c = strike_curve_specs(&put_specs, asset, ctx, eta);

    let mut cells = Vec::with_capacity(ra_grid.len() * rb_grid.len());
    for (i, &ra) in ra_grid.iter().enumerate() {
        for (j, &rb) in rb_grid.iter().enumerate() {
            let mut pool: Vec<Candidate> = call_c[j * calls.len()..(j + 1) * calls.len()].to_vec();
            pool.extend_from_slice(&put_c[i * puts.len()..(i + 1) * puts.len()]);
            let best = argmax_sensitivity(&pool, asset, spot);
            cells.push(RegionCell {
                ra,
                rb,
                winner: best.map(|b| pool[b].spec),
                achieved_l1: best.map_or(f64::NAN, |b| pool[b].l1),
            });
        }
    }
    Ok(RegionMap { cells })
}

pub(crate) fn check_ratio_grids(ra_grid: &[f64], rb_grid: &[f64]) -> Result<()> {
    if ra_grid.is_empty() || rb_grid.is_empty() {
        return Err(Error::param("grid", 0.0, "ratio grids must be non-empty"));
    }
    for &ra in ra_grid {
        if !(ra > 0.0 && ra <= 1.0) {
            return Err(Error::param("ra", ra, "must lie in (0, 1]"));
        }
    }
    for &rb in rb_grid {
        if !(rb >= 1.0) || !rb.is_finite() {
            return Err(Error::param("rb", rb, "must be finite and at least 1"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::merton_eta;
    use crate::market::MarketParams;
    use crate::numerics::log_space;
    use crate::pricing::{bs_european, PricingSettings};

    fn ctx(paths: usize) -> PricingContext {
        PricingContext::new(
            MarketParams::table1(),
            PricingSettings {
                mc_paths: paths,
                tree_steps: 400,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn euro_call_winner_is_the_upper_bound() {
        let c = ctx(1000);
        let eta = merton_eta(c.params()).unwrap();
        let b = StrikeBounds::new(30.0, 60.0).unwrap();
        let out = select_one_asset(1, &[(Family::Call, Style::European)], &b, 25, &c, &eta).unwrap();
        assert_eq!(out.winner.strike, 60.0);
        assert_eq!(out.candidates.len(), 25);
    }

    #[test]
    fn euro_put_winner_is_the_lower_bound() {
        let c = ctx(1000);
        let eta = merton_eta(c.params()).unwrap();
        let b = StrikeBounds::new(15.0, 30.0).unwrap();
        let out = select_one_asset(1, &[(Family::Put, Style::European)], &b, 25, &c, &eta).unwrap();
        assert_eq!(out.winner.strike, 15.0);
        assert!(out.candidates.iter().all(|c| c.pi < 0.0));
    }

    #[test]
    fn collapsed_bounds_give_a_single_point() {
        let c = ctx(1000);
        let eta = merton_eta(c.params()).unwrap();
        let b = StrikeBounds::new(33.0, 33.0).unwrap();
        let out = select_one_asset(1, &[(Family::Call, Style::European)], &b, 11, &c, &eta).unwrap();
        assert_eq!(out.candidates.len(), 1);
        assert_eq!(out.winner.strike, 33.0);
        let q = bs_european(30.0, 33.0, 0.05, 0.2, 2.0, Family::Call).unwrap();
        assert!((out.achieved_l1 - (7.0 / 60.0) / q.f).abs() < 1e-12);
    }

    #[test]
    fn invalid_bounds_and_zero_put_floor_are_rejected() {
        assert!(StrikeBounds::new(40.0, 30.0).is_err());
        let c = ctx(1000);
        let eta = merton_eta(c.params()).unwrap();
        let b = StrikeBounds::new(0.0, 30.0).unwrap();
        assert!(select_one_asset(1, &[(Family::Put, Style::European)], &b, 5, &c, &eta).is_err());
    }

    #[test]
    fn one_asset_winners_are_separable() {
        let c = ctx(20_000);
        let eta = merton_eta(c.params()).unwrap();
        let b1 = StrikeBounds::new(40.0, 60.0).unwrap();
        let alone = select_one_asset(0, &[(Family::Call, Style::European)], &b1, 5, &c, &eta).unwrap();
        // offering different asset-2 families does not touch asset 1
        for fams in [&ONE_ASSET_FAMILIES[..2], &ONE_ASSET_FAMILIES[2..]] {
            let b2 = StrikeBounds::new(20.0, 45.0).unwrap();
            select_one_asset(1, fams, &b2, 5, &c, &eta).unwrap();
            let again = select_one_asset(0, &[(Family::Call, Style::European)], &b1, 5, &c, &eta).unwrap();
            assert_eq!(again.winner, alone.winner);
        }
    }

    #[test]
    fn at_the_money_cell_matches_direct_comparison() {
        let c = ctx(40_000);
        let eta = merton_eta(c.params()).unwrap();
        let map = putcall_region_map(1, &[1.0], &[1.0], &ONE_ASSET_FAMILIES, &c, &eta).unwrap();
        let cell = map.cell(1.0, 1.0).unwrap();
        let mut best = (0.0, None);
        for &(f, s) in &ONE_ASSET_FAMILIES {
            let spec = OptionSpec::new(f, s, Underlying::Asset2, 30.0, 2.0);
            let q = c.price(&spec, c.params().spot).unwrap();
            if q.f[1].abs() > best.0 {
                best = (q.f[1].abs(), Some(spec));
            }
        }
        assert_eq!(cell.winner, best.1);
    }

    #[test]
    fn call_weight_decreases_and_put_weight_grows_with_strike() {
        let c = ctx(1000);
        let eta = merton_eta(c.params()).unwrap();
        let strikes = log_space(3.0, 300.0, 60);
        let calls = strike_curve(1, &[(Family::Call, Style::European)], &strikes, &c, &eta).unwrap();
        for w in calls.windows(2) {
            assert!(w[1].pi.abs() < w[0].pi.abs());
        }
        let puts = strike_curve(1, &[(Family::Put, Style::European)], &strikes, &c, &eta).unwrap();
        for w in puts.windows(2) {
            assert!(w[1].pi.abs() > w[0].pi.abs());
        }
    }

    #[test]
    fn region_csv_is_deterministic() {
        let c = ctx(5_000);
        let eta = merton_eta(c.params()).unwrap();
        let run = || {
            putcall_region_map(1, &[0.7, 0.9], &[1.1, 1.5], &ONE_ASSET_FAMILIES, &c, &eta)
                .unwrap()
                .to_csv()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.starts_with("ra,rb,winner,achieved_l1\n"));
        assert_eq!(a.lines().count(), 5);
    }

    #[test]
    fn tie_break_prefers_liquid_then_call_then_european() {
        let s = |f, st, k| OptionSpec::new(f, st, Underlying::Asset2, k, 2.0);
        let spot = 30.0;
        assert_eq!(
            tie_break(&s(Family::Put, Style::American, 31.0), &s(Family::Call, Style::European, 35.0), spot),
            Ordering::Less
        );
        assert_eq!(
            tie_break(&s(Family::Call, Style::American, 33.0), &s(Family::Put, Style::European, 27.0), spot),
            Ordering::Less
        );
        assert_eq!(
            tie_break(&s(Family::Call, Style::European, 33.0), &s(Family::Call, Style::AsianArithmetic, 33.0), spot),
            Ordering::Less
        );
    }
}
