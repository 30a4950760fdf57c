use rayon::prelude::*;

use super::{
    argmin_l1, check_ratio_grids, evaluate_one_asset, warm_engines, Candidate, RegionCell,
    RegionMap, SelectionOutcome, StrikeBounds, ONE_ASSET_FAMILIES,
};
use crate::allocation::{solve_allocation, ExposureTarget};
use crate::csv::{fmt_f64, row};
use crate::error::{Error, Result};
use crate::numerics::lin_space;
use crate::pricing::{Family, OptionSpec, PricingContext, SensitivityMatrix, Style, Underlying};

/// How the asset-1 call strike is chosen in basket comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot1Mode {
    /// Hold the European call at this strike.
    Fixed(f64),
    /// Pick the strike on `points` equally spaced values in `bounds` that
    /// minimizes ℓ1 for each slot-2 candidate.
    Optimize { bounds: StrikeBounds, points: usize },
}

impl Slot1Mode {
    fn strikes(&self) -> Vec<f64> {
        match *self {
            Slot1Mode::Fixed(k) => vec![k],
            Slot1Mode::Optimize { bounds, points } => lin_space(bounds.lower, bounds.upper, points.max(1)),
        }
    }
}

fn slot1_spec(strike: f64, ttm: f64) -> OptionSpec {
    OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, strike, ttm)
}

/// Total ℓ1 of `[slot1, slot2]` given both candidates' sensitivities.
fn pair_l1(slot1: &Candidate, slot2: &Candidate, eta: &ExposureTarget) -> std::result::Result<(f64, f64), String> {
    if let Some(r) = slot1.rejected.as_ref().or(slot2.rejected.as_ref()) {
        return Err(r.clone());
    }
    let m = SensitivityMatrix::from_rows(
        vec![[slot1.f[0], 0.0], slot2.f],
        vec![slot1.spec.compact(), slot2.spec.compact()],
    );
    let a = solve_allocation(&m, eta).map_err(|e| e.to_string())?;
    Ok((a.pi[1], a.l1))
}

fn combine(slot1: &[Candidate], slot2: &Candidate, eta: &ExposureTarget) -> Candidate {
    let mut best: Option<(f64, f64)> = None;
    let mut reason = String::from("no slot-1 strike");
    for s1 in slot1 {
        match pair_l1(s1, slot2, eta) {
            Ok((pi, l1)) if best.is_none_or(|b| l1 < b.1) => best = Some((pi, l1)),
            Ok(_) => {}
            Err(r) => reason = r,
        }
    }
    match best {
        Some((pi, l1)) => Candidate {
            spec: slot2.spec,
            f: slot2.f,
            pi,
            l1,
            rejected: None,
        },
        None => Candidate {
            spec: slot2.spec,
            f: slot2.f,
            pi: f64::NAN,
            l1: f64::NAN,
            rejected: Some(reason),
        },
    }
}

fn evaluate_all(specs: &[OptionSpec], ctx: &PricingContext, eta: &ExposureTarget) -> Vec<Candidate> {
    warm_engines(ctx, specs);
    specs
        .par_iter()
        .map(|s| {
            let asset = if s.underlying == Underlying::Asset1 { 0 } else { 1 };
            evaluate_one_asset(*s, asset, ctx, eta)
        })
        .collect()
}

/// Best basket strike for slot 2 next to the European call `slot1`.
pub fn select_basket(
    slot1: &OptionSpec,
    family: Family,
    style: Style,
    bounds: &StrikeBounds,
    grid_points: usize,
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<SelectionOutcome> {
    bounds.validate()?;
    if !family.is_basket() {
        return Err(Error::param("family", f64::NAN, "slot 2 must be a basket family"));
    }
    if family == Family::BasketPut && bounds.lower == 0.0 {
        return Err(Error::param("lower", 0.0, "basket put strikes must be bounded away from zero"));
    }
    if slot1.family != Family::Call || slot1.underlying != Underlying::Asset1 {
        return Err(Error::param("slot1", slot1.strike, "slot 1 must be a call on asset 1"));
    }
    let s1 = evaluate_one_asset(*slot1, 0, ctx, eta);
    if let Some(r) = &s1.rejected {
        return Err(Error::NoAdmissibleCandidate(format!("slot 1 {slot1}: {r}")));
    }
    let ttm = ctx.params().maturity;
    let mut strikes = lin_space(bounds.lower, bounds.upper, grid_points.max(2));
    strikes.dedup_by(|a, b| a == b);
    let specs: Vec<OptionSpec> = strikes
        .iter()
        .map(|&k| OptionSpec::new(family, style, Underlying::Basket, k, ttm))
        .collect();
    let candidates: Vec<Candidate> = evaluate_all(&specs, ctx, eta)
        .iter()
        .map(|c| combine(std::slice::from_ref(&s1), c, eta))
        .collect();
    let reference = ctx.params().spot[0] + ctx.params().spot[1];
    let best = argmin_l1(&candidates, reference)
        .ok_or_else(|| Error::NoAdmissibleCandidate(format!("no admissible {family:?} strike")))?;
    let w = &candidates[best];
    Ok(SelectionOutcome {
        winner: w.spec,
        winner_f: w.f,
        achieved_l1: w.l1,
        candidates,
    })
}

/// One point of the ℓ1 surface over `(K₁, K₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasketSurfacePoint {
    pub k1: f64,
    pub k2: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub l1: f64,
}

impl BasketSurfacePoint {
    pub const CSV_HEADER: &'static str = "k1,k2,family,style,pi1,pi2,l1";

    pub fn csv_row(&self, family: Family, style: Style) -> String {
        let spec = OptionSpec::new(family, style, Underlying::Basket, self.k2, 1.0).to_string();
        let mut tokens = spec.split(',');
        row([
            fmt_f64(self.k1),
            fmt_f64(self.k2),
            tokens.next().unwrap_or_default().to_string(),
            tokens.next().unwrap_or_default().to_string(),
            fmt_f64(self.pi1),
            fmt_f64(self.pi2),
            fmt_f64(self.l1),
        ])
    }
}

/// ℓ1 of every `(asset-1 call strike, basket strike)` pair; inadmissible
/// points carry NaN.
pub fn basket_l1_surface(
    k1_grid: &[f64],
    k2_grid: &[f64],
    family: Family,
    style: Style,
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<Vec<BasketSurfacePoint>> {
    if !family.is_basket() {
        return Err(Error::param("family", f64::NAN, "slot 2 must be a basket family"));
    }
    let ttm = ctx.params().maturity;
    let slot1 = evaluate_all(&k1_grid.iter().map(|&k| slot1_spec(k, ttm)).collect::<Vec<_>>(), ctx, eta);
    let slot2 = evaluate_all(
        &k2_grid
            .iter()
            .map(|&k| OptionSpec::new(family, style, Underlying::Basket, k, ttm))
            .collect::<Vec<_>>(),
        ctx,
        eta,
    );
    let mut out = Vec::with_capacity(k1_grid.len() * k2_grid.len());
    for (s1, &k1) in slot1.iter().zip(k1_grid) {
        for (s2, &k2) in slot2.iter().zip(k2_grid) {
            let point = match pair_l1(s1, s2, eta) {
                Ok((pi2, l1)) => BasketSurfacePoint {
                    k1,
                    k2,
                    pi1: (eta.eta[0] - s2.f[0] * pi2) / s1.f[0],
                    pi2,
                    l1,
                },
                Err(_) => BasketSurfacePoint {
                    k1,
                    k2,
                    pi1: f64::NAN,
                    pi2: f64::NAN,
                    l1: f64::NAN,
                },
            };
            out.push(point);
        }
    }
    Ok(out)
}

/// Per-cell slot-2 winner among one-asset options on asset 2 and European
/// basket calls and puts, on total ℓ1 next to an asset-1 European call.
///
/// Calls are capped at `rb` times their reference price (`S₂`, or
/// `S₁ + S₂` for baskets) and puts floored at `ra` times it.
pub fn basket_region_map(
    ra_grid: &[f64],
    rb_grid: &[f64],
    slot1: Slot1Mode,
    ctx: &PricingContext,
    eta: &ExposureTarget,
) -> Result<RegionMap> {
    check_ratio_grids(ra_grid, rb_grid)?;
    let p = ctx.params();
    let ttm = p.maturity;
    let (s2, basket) = (p.spot[1], p.spot[0] + p.spot[1]);

    let k1s = slot1.strikes();
    let slot1_c = evaluate_all(&k1s.iter().map(|&k| slot1_spec(k, ttm)).collect::<Vec<_>>(), ctx, eta);
    if slot1_c.iter().all(|c| !c.is_admissible()) {
        return Err(Error::NoAdmissibleCandidate("every slot-1 call strike is inadmissible".into()));
    }

    let one = |f, s, k| OptionSpec::new(f, s, Underlying::Asset2, k, ttm);
    let calls: Vec<(Family, Style)> = ONE_ASSET_FAMILIES.iter().copied().filter(|f| f.0 == Family::Call).collect();
    let puts: Vec<(Family, Style)> = ONE_ASSET_FAMILIES.iter().copied().filter(|f| f.0 == Family::Put).collect();
    let per_rb = calls.len() + 1;
    let per_ra = puts.len() + 1;
    let mut call_specs = Vec::with_capacity(rb_grid.len() * per_rb);
    for &rb in rb_grid {
        call_specs.extend(calls.iter().map(|&(f, s)| one(f, s, rb * s2)));
        call_specs.push(OptionSpec::new(Family::BasketCall, Style::European, Underlying::Basket, rb * basket, ttm));
    }
    let mut put_specs = Vec::with_capacity(ra_grid.len() * per_ra);
    for &ra in ra_grid {
        put_specs.extend(puts.iter().map(|&(f, s)| one(f, s, ra * s2)));
        put_specs.push(OptionSpec::new(Family::BasketPut, Style::European, Underlying::Basket, ra * basket, ttm));
    }
    let call_c: Vec<Candidate> = evaluate_all(&call_specs, ctx, eta)
        .iter()
        .map(|c| combine(&slot1_c, c, eta))
        .collect();
    let put_c: Vec<Candidate> = evaluate_all(&put_specs, ctx, eta)
        .iter()
        .map(|c| combine(&slot1_c, c, eta))
        .collect();

    let mut cells = Vec::with_capacity(ra_grid.len() * rb_grid.len());
    for (i, &ra) in ra_grid.iter().enumerate() {
        for (j, &rb) in rb_grid.iter().enumerate() {
            let mut pool: Vec<Candidate> = call_c[j * per_rb..(j + 1) * per_rb].to_vec();
            pool.extend_from_slice(&put_c[i * per_ra..(i + 1) * per_ra]);
            let best = argmin_l1(&pool, s2);
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
