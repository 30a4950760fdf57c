use crate::error::{Error, Result};
use crate::numerics::norm_cdf;

use super::{Family, SINGULARITY_THRESHOLD};

/// Price, Delta and relative sensitivity of a one-asset option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanillaQuote {
    pub price: f64,
    pub delta: f64,
    pub f: f64,
}

fn check_inputs(spot: f64, strike: f64, sigma: f64, ttm: f64) -> Result<()> {
    if !(spot > 0.0) || !spot.is_finite() {
        return Err(Error::param("spot", spot, "must be positive"));
    }
    if !(strike >= 0.0) || !strike.is_finite() {
        return Err(Error::param("strike", strike, "must be non-negative"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", sigma, "must be positive"));
    }
    if !(ttm > 0.0) || !ttm.is_finite() {
        return Err(Error::param("ttm", ttm, "must be positive"));
    }
    Ok(())
}

fn d1_d2(spot: f64, strike: f64, r: f64, sigma: f64, ttm: f64) -> (f64, f64) {
    let vol = sigma * ttm.sqrt();
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * ttm) / vol;
    (d1, d1 - vol)
}

/// Black-Scholes price of a call, put or straddle without any checks.
///
/// A zero strike gives the spot for calls and straddles and zero for puts.
pub fn bs_price(family: Family, spot: f64, strike: f64, r: f64, sigma: f64, ttm: f64) -> f64 {
    if strike == 0.0 {
        return match family {
            Family::Put | Family::BasketPut => 0.0,
            _ => spot,
        };
    }
    let (d1, d2) = d1_d2(spot, strike, r, sigma, ttm);
    let df = (-r * ttm).exp();
    let call = || spot * norm_cdf(d1) - strike * df * norm_cdf(d2);
    let put = || strike * df * norm_cdf(-d2) - spot * norm_cdf(-d1);
    match family {
        Family::Call | Family::BasketCall => call(),
        Family::Put | Family::BasketPut => put(),
        Family::Straddle => call() + put(),
    }
}

/// Closed-form European call or put.
pub fn bs_european(
    spot: f64,
    strike: f64,
    r: f64,
    sigma: f64,
    ttm: f64,
    family: Family,
) -> Result<VanillaQuote> {
    check_inputs(spot, strike, sigma, ttm)?;
    let delta = match family {
        Family::Call if strike == 0.0 => 1.0,
        Family::Call => norm_cdf(d1_d2(spot, strike, r, sigma, ttm).0),
        Family::Put if strike == 0.0 => {
            return Err(Error::ZeroPrice {
                spec: "European put with zero strike".into(),
            })
        }
        Family::Put => -norm_cdf(-d1_d2(spot, strike, r, sigma, ttm).0),
        other => {
            return Err(Error::Unsupported(format!(
                "bs_european prices calls and puts, not {other:?}"
            )))
        }
    };
    let price = bs_price(family, spot, strike, r, sigma, ttm);
    if !(price > 0.0) {
        return Err(Error::ZeroPrice {
            spec: format!("European {family:?} K={strike} on spot {spot}"),
        });
    }
    Ok(VanillaQuote {
        price,
        delta,
        f: delta * spot * sigma / price,
    })
}

/// Closed-form European straddle (call plus put at one strike).
pub fn bs_straddle(spot: f64, strike: f64, r: f64, sigma: f64, ttm: f64) -> Result<VanillaQuote> {
    check_inputs(spot, strike, sigma, ttm)?;
    let delta = if strike == 0.0 {
        1.0
    } else {
        2.0 * norm_cdf(d1_d2(spot, strike, r, sigma, ttm).0) - 1.0
    };
    let price = bs_price(Family::Straddle, spot, strike, r, sigma, ttm);
    let f = delta * spot * sigma / price;
    if f.abs() < SINGULARITY_THRESHOLD {
        return Err(Error::ZeroSensitivity {
            spec: format!("European straddle K={strike} on spot {spot}"),
            f,
        });
    }
    Ok(VanillaQuote { price, delta, f })
}
