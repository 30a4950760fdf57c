//! Option pricing and relative sensitivities `f = Δ·S·σ / O`.
//!
//! European calls, puts and straddles are priced in closed form, American
//! styles on a CRR tree, and Asian or basket payoffs by Monte Carlo with
//! common-random-number central-difference Deltas.

mod black_scholes;
mod monte_carlo;
mod sensitivity;
mod spec;
mod tree;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub use black_scholes::{bs_european, bs_price, bs_straddle, VanillaQuote};
pub use monte_carlo::{mc_price, McEngine};
pub use sensitivity::{sensitivity_matrix, SensitivityMatrix, MAX_CONDITION};
pub use spec::{Family, OptionSpec, Style, Underlying};
pub use tree::{american_exercise_bound, tree_price_american, TreeQuote};

use crate::error::{Error, Result};
use crate::market::{MarketParams, Repricer};

/// `|f|` below this is treated as zero sensitivity.
pub const SINGULARITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    MonteCarlo,
    BinomialTree,
}

/// Early-exercise diagnostics reported by the tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExerciseInfo {
    /// Exercising at the valuation date is optimal.
    pub immediate: bool,
    /// Continuation value minus exercise value at the root; negative means exercise.
    pub hold_margin: f64,
    /// The price is numerically zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceAndGreeks {
    pub price: f64,
    /// `∂O/∂S⁽ᵏ⁾` per underlying.
    pub delta: [f64; 2],
    /// Relative sensitivity `f⁽ᵏ⁾ = ∂O/∂S⁽ᵏ⁾ · S⁽ᵏ⁾σ⁽ᵏ⁾ / O`.
    pub f: [f64; 2],
    pub price_std_err: f64,
    pub delta_std_err: [f64; 2],
    pub method: Method,
    pub exercise: Option<ExerciseInfo>,
}

/// Numerical settings shared by every pricing route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingSettings {
    pub mc_paths: usize,
    pub antithetic: bool,
    pub seed: u64,
    /// Relative spot bump for central-difference Deltas.
    pub fd_bump: f64,
    pub tree_steps: usize,
    pub singular_threshold: f64,
}

impl Default for PricingSettings {
    fn default() -> Self {
        PricingSettings {
            mc_paths: 200_000,
            antithetic: true,
            seed: 20_240_607,
            fd_bump: 1e-3,
            tree_steps: 2000,
            singular_threshold: SINGULARITY_THRESHOLD,
        }
    }
}

impl PricingSettings {
    pub fn validate(&self) -> Result<()> {
        if self.mc_paths < 2 {
            return Err(Error::param("mc_paths", self.mc_paths as f64, "need at least 2 paths"));
        }
        if !(self.fd_bump > 0.0 && self.fd_bump < 0.1) {
            return Err(Error::param("fd_bump", self.fd_bump, "must lie in (0, 0.1)"));
        }
        if self.tree_steps < 2 {
            return Err(Error::param("tree_steps", self.tree_steps as f64, "need at least 2 steps"));
        }
        if !(self.singular_threshold >= 0.0) {
            return Err(Error::param(
                "singular_threshold",
                self.singular_threshold,
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

type EngineKey = (u64, u32);

/// Routes each [`OptionSpec`] to its pricing method and caches Monte-Carlo
/// scenario sets per `(ttm, monitoring)`.
///
/// The cache is keyed on everything that determines a scenario set: the
/// market, the settings (both fixed per context), the time to maturity and
/// the monitoring count. Safe to share across threads.
#[derive(Debug)]
pub struct PricingContext {
    params: MarketParams,
    settings: PricingSettings,
    engines: Mutex<HashMap<EngineKey, Arc<McEngine>>>,
}

impl PricingContext {
    pub fn new(params: MarketParams, settings: PricingSettings) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        Ok(PricingContext {
            params,
            settings,
            engines: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn settings(&self) -> &PricingSettings {
        &self.settings
    }

    /// Scenario set for `(ttm, monitoring)`, simulated on first use.
    pub fn engine(&self, ttm: f64, monitoring: u32) -> Arc<McEngine> {
        let key = (ttm.to_bits(), monitoring);
        if let Some(e) = self.engines.lock().unwrap().get(&key) {
            return Arc::clone(e);
        }
        // built outside the lock: rayon may run other pricing jobs on this thread meanwhile
        let built = Arc::new(McEngine::new(&self.params, ttm, monitoring, &self.settings));
        let mut map = self.engines.lock().unwrap();
        Arc::clone(map.entry(key).or_insert(built))
    }

    /// Price, Deltas and relative sensitivities of `spec` at `spots`.
    pub fn price(&self, spec: &OptionSpec, spots: [f64; 2]) -> Result<PriceAndGreeks> {
        spec.validate()?;
        let p = &self.params;
        match (spec.style, spec.underlying.asset_index()) {
            (Style::European, Some(k)) => {
                let q = match spec.family {
                    Family::Straddle => {
                        bs_straddle(spots[k], spec.strike, p.r, p.sigma[k], spec.ttm)?
                    }
                    fam => bs_european(spots[k], spec.strike, p.r, p.sigma[k], spec.ttm, fam)?,
                };
                Ok(lift(q, k, Method::Analytic, None))
            }
            (Style::American, Some(k)) => {
                let q = tree_price_american(
                    spec,
                    spots[k],
                    p.r,
                    p.sigma[k],
                    self.settings.tree_steps,
                )?;
                let info = ExerciseInfo {
                    immediate: q.immediate_exercise,
                    hold_margin: q.hold_margin,
                    degenerate: q.degenerate,
                };
                Ok(lift(
                    VanillaQuote {
                        price: q.price,
                        delta: q.delta,
                        f: q.f,
                    },
                    k,
                    Method::BinomialTree,
                    Some(info),
                ))
            }
            (Style::American, None) => Err(Error::Unsupported(format!(
                "{spec}: American basket options are not supported"
            ))),
            _ => {
                let m = if spec.style == Style::AsianArithmetic {
                    spec.monitoring
                } else {
                    1
                };
                self.engine(spec.ttm, m).price(spec, spots, &self.settings)
            }
        }
    }
}

fn lift(q: VanillaQuote, k: usize, method: Method, exercise: Option<ExerciseInfo>) -> PriceAndGreeks {
    let mut delta = [0.0; 2];
    let mut f = [0.0; 2];
    delta[k] = q.delta;
    f[k] = q.f;
    PriceAndGreeks {
        price: q.price,
        delta,
        f,
        price_std_err: 0.0,
        delta_std_err: [0.0; 2],
        method,
        exercise,
    }
}

/// Closed-form repricing of European one-asset options along simulated paths.
///
/// Zero-strike calls stand in for the stocks themselves.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticRepricer {
    pub params: MarketParams,
}

impl Repricer for AnalyticRepricer {
    fn price(&self, spec: &OptionSpec, spots: [f64; 2]) -> Result<f64> {
        let k = match (spec.style, spec.underlying.asset_index()) {
            (Style::European, Some(k)) => k,
            _ => {
                return Err(Error::Unsupported(format!(
                    "{spec}: path repricing supports European one-asset options only"
                )))
            }
        };
        let s = spots[k];
        if spec.ttm <= 0.0 {
            let intrinsic = match spec.family {
                Family::Call => (s - spec.strike).max(0.0),
                Family::Put => (spec.strike - s).max(0.0),
                _ => (s - spec.strike).abs(),
            };
            return Ok(intrinsic);
        }
        Ok(bs_price(
            spec.family,
            s,
            spec.strike,
            self.params.r,
            self.params.sigma[k],
            spec.ttm,
        ))
    }
}
