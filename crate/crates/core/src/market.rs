//! Two-asset Black-Scholes market: constants, exact GBM path sampling and the
//! self-financing wealth ledger for discretely rebalanced option portfolios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::pricing::OptionSpec;

/// Market constants of the two-asset model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Volatilities per square-root year.
    pub sigma: [f64; 2],
    /// Market prices of risk of the two Brownian drivers.
    pub lambda: [f64; 2],
    /// Correlation of the Brownian drivers.
    pub rho: f64,
    /// CRRA risk aversion.
    pub gamma: f64,
    /// Investment horizon `T` in years.
    pub horizon: f64,
    /// Option time to maturity `T̂` in years.
    pub maturity: f64,
    /// Initial asset prices.
    pub spot: [f64; 2],
    /// Options are rolled at every rebalance, so `maturity < horizon` is allowed.
    pub rolling: bool,
    /// Accept zero volatilities (deterministic limit).
    pub allow_zero_vol: bool,
}

impl MarketParams {
    /// The reference parameter set used throughout the studies.
    pub fn table1() -> Self {
        MarketParams {
            r: 0.05,
            sigma: [0.13, 0.2],
            lambda: [0.52, 0.6],
            rho: 0.4,
            gamma: 4.0,
            horizon: 1.0,
            maturity: 2.0,
            spot: [40.0, 30.0],
            rolling: true,
            allow_zero_vol: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() {
            return Err(Error::param("r", self.r, "must be finite"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::param("rho", self.rho, "must lie in (-1, 1)"));
        }
        for (i, &s) in self.sigma.iter().enumerate() {
            let name = if i == 0 { "sigma1" } else { "sigma2" };
            let ok = if self.allow_zero_vol { s >= 0.0 } else { s > 0.0 };
            if !ok || !s.is_finite() {
                return Err(Error::param(name, s, "volatility must be positive"));
            }
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !l.is_finite() {
                let name = if i == 0 { "lambda1" } else { "lambda2" };
                return Err(Error::param(name, l, "must be finite"));
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", self.gamma, "CRRA risk aversion must be positive"));
        }
        if self.gamma == 1.0 {
            return Err(Error::param(
                "gamma",
                self.gamma,
                "CRRA risk aversion must differ from 1 (log utility is not supported)",
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::param("horizon", self.horizon, "must be positive"));
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(Error::param("maturity", self.maturity, "must be positive"));
        }
        if self.maturity < self.horizon && !self.rolling {
            return Err(Error::param(
                "maturity",
                self.maturity,
                "options expire before the horizon and rolling is disabled",
            ));
        }
        for (i, &s) in self.spot.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                let name = if i == 0 { "spot1" } else { "spot2" };
                return Err(Error::param(name, s, "spot must be positive"));
            }
        }
        Ok(())
    }

    /// Lower-triangular factor `Φ` with `ΦΦᵀ` the Brownian correlation matrix.
    pub fn phi(&self) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [self.rho, (1.0 - self.rho * self.rho).sqrt()]]
    }

    /// `ΦΦᵀ`.
    pub fn correlation(&self) -> [[f64; 2]; 2] {
        [[1.0, self.rho], [self.rho, 1.0]]
    }

    /// Instantaneous drift of each asset under `measure`.
    pub fn drift(&self, measure: Measure) -> [f64; 2] {
        match measure {
            Measure::Physical => [
                self.r + self.sigma[0] * self.lambda[0],
                self.r + self.sigma[1] * self.lambda[1],
            ],
            Measure::RiskNeutral => [self.r, self.r],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Physical,
    RiskNeutral,
}

impl Measure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::Physical => "physical",
            Measure::RiskNeutral => "risk-neutral",
        }
    }
}

/// Simulated asset-price paths on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub times: Vec<f64>,
    /// `paths[p][k]` is the price pair of path `p` at `times[k]`.
    pub paths: Vec<Vec<[f64; 2]>>,
    pub seed: u64,
    pub measure: Measure,
}

impl PathSet {
    /// Debug export with header `time,path_id,s1,s2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,path_id,s1,s2\n");
        for (p, path) in self.paths.iter().enumerate() {
            for (t, s) in self.times.iter().zip(path) {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(*t),
                    p,
                    fmt_f64(s[0]),
                    fmt_f64(s[1])
                ));
            }
        }
        out
    }
}

/// Exact log-normal sampler. Path `i` draws from its own ChaCha stream, so a
/// path never depends on how many others are simulated alongside it.
#[derive(Debug, Clone)]
pub struct PathSampler {
    spot: [f64; 2],
    log_drift: [f64; 2],
    sigma: [f64; 2],
    rho: f64,
    rho_c: f64,
    times: Vec<f64>,
    seed: u64,
}

impl PathSampler {
    pub fn new(params: &MarketParams, times: Vec<f64>, measure: Measure, seed: u64) -> Self {
        let mu = params.drift(measure);
        PathSampler {
            spot: params.spot,
            log_drift: [
                mu[0] - 0.5 * params.sigma[0] * params.sigma[0],
                mu[1] - 0.5 * params.sigma[1] * params.sigma[1],
            ],
            sigma: params.sigma,
            rho: params.rho,
            rho_c: (1.0 - params.rho * params.rho).sqrt(),
            times,
            seed,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Path from stream `index`; `antithetic` flips every normal draw.
    pub fn path(&self, index: u64, antithetic: bool) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let sign = if antithetic { -1.0 } else { 1.0 };
        let mut out = Vec::with_capacity(self.times.len());
        let mut log_s = [self.spot[0].ln(), self.spot[1].ln()];
        out.push(self.spot);
        for w in self.times.windows(2) {
            let dt = w[1] - w[0];
            let sq = dt.sqrt();
            let z1: f64 = rng.sample::<f64, _>(StandardNormal) * sign;
            let z2: f64 = rng.sample::<f64, _>(StandardNormal) * sign;
            let b1 = z1;
            let b2 = self.rho * z1 + self.rho_c * z2;
            log_s[0] += self.log_drift[0] * dt + self.sigma[0] * sq * b1;
            log_s[1] += self.log_drift[1] * dt + self.sigma[1] * sq * b2;
            out.push([log_s[0].exp(), log_s[1].exp()]);
        }
        out
    }
}

/// Uniform grid of `n_steps` intervals on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps)
        .map(|k| {
            if k == n_steps {
                horizon
            } else {
                horizon * k as f64 / n_steps as f64
            }
        })
        .collect()
}

/// Correlated GBM paths over `[0, T]`, sampled exactly on a uniform grid.
pub fn simulate_paths(
    params: &MarketParams,
    n_paths: usize,
    n_steps: usize,
    measure: Measure,
    seed: u64,
) -> Result<PathSet> {
    params.validate()?;
    if n_paths == 0 {
        return Err(Error::param("n_paths", 0.0, "must be at least 1"));
    }
    if n_steps == 0 {
        return Err(Error::param("n_steps", 0.0, "must be at least 1"));
    }
    let times = uniform_grid(params.horizon, n_steps);
    let sampler = PathSampler::new(params, times.clone(), measure, seed);
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| sampler.path(i, false))
        .collect();
    Ok(PathSet {
        times,
        paths,
        seed,
        measure,
    })
}

/// A position taken at a rebalance date: wealth fraction `weight` in `spec`.
#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub spec: OptionSpec,
    pub weight: f64,
}

/// Supplies the portfolio to hold from a rebalance date onward.
pub trait Rebalancer: Sync {
    fn rebalance(&self, t: f64, spots: [f64; 2]) -> Result<Vec<Position>>;
}

/// Prices a held option on the simulated path.
pub trait Repricer: Sync {
    fn price(&self, spec: &OptionSpec, spots: [f64; 2]) -> Result<f64>;
}

/// Rebalancing schedule on a uniform grid over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    /// Grid intervals over the horizon.
    pub n_steps: usize,
    /// Rebalance at every `rebalance_every`-th grid point, starting at t = 0.
    pub rebalance_every: usize,
}

impl Schedule {
    /// `per_year` rebalances per year on a grid that is exactly the rebalance dates.
    pub fn per_year(horizon: f64, per_year: usize) -> Self {
        let n = ((per_year as f64) * horizon).round().max(1.0) as usize;
        Schedule {
            n_steps: n,
            rebalance_every: 1,
        }
    }

    pub fn is_rebalance(&self, k: usize) -> bool {
        k < self.n_steps && k.is_multiple_of(self.rebalance_every)
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.rebalance_every == 0 {
            return Err(Error::param(
                "schedule",
                self.n_steps as f64,
                "grid and rebalance step must be positive",
            ));
        }
        Ok(())
    }
}

/// Floor applied to wealth, as a fraction of initial wealth.
pub const BANKRUPTCY_FLOOR: f64 = 1e-8;

/// Single-path wealth history.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    /// Wealth at each grid time where it was marked (rebalance dates and `T`).
    pub marks: Vec<(f64, f64)>,
    pub terminal: f64,
    pub bankrupt: bool,
}

struct Holding {
    spec: OptionSpec,
    units: f64,
    bought_at: f64,
}

/// Runs the self-financing ledger along one path starting from unit wealth.
///
/// Between rebalances the option units and the cash balance are held fixed;
/// at each rebalance every option is sold at model price and the new
/// positions are bought with the proceeds.
pub fn run_ledger(
    params: &MarketParams,
    times: &[f64],
    prices: &[[f64; 2]],
    schedule: &Schedule,
    strategy: &dyn Rebalancer,
    pricer: &dyn Repricer,
) -> Result<Ledger> {
    let floor = BANKRUPTCY_FLOOR;
    let mut wealth = 1.0;
    let mut marks = Vec::new();
    let mut holdings: Vec<Holding> = Vec::new();
    let mut cash = 1.0;
    let mut cash_since = 0.0;
    let mut bankrupt = false;
    let last = times.len() - 1;

    for k in 0..=last {
        let t = times[k];
        let rebalance = schedule.is_rebalance(k);
        if !(rebalance || k == last) || bankrupt {
            continue;
        }
        if k > 0 {
            let mut value = cash * (params.r * (t - cash_since)).exp();
            for h in &holdings {
                let spec = h.spec.with_ttm(h.spec.ttm - (t - h.bought_at));
                let p = pricer.price(&spec, prices[k])?;
                if spec.ttm > 0.0 && p <= 0.0 {
                    return Err(Error::CompositionInfeasible {
                        time: t,
                        spec: spec.to_string(),
                        price: p,
                    });
                }
                value += h.units * p;
            }
            wealth = value;
            if wealth <= floor {
                wealth = floor;
                bankrupt = true;
            }
            marks.push((t, wealth));
        } else {
            marks.push((t, wealth));
        }
        if rebalance && !bankrupt {
            let positions = strategy.rebalance(t, prices[k])?;
            holdings.clear();
            let mut invested = 0.0;
            for pos in positions {
                let p = pricer.price(&pos.spec, prices[k])?;
                if !(p > 0.0) {
                    return Err(Error::CompositionInfeasible {
                        time: t,
                        spec: pos.spec.to_string(),
                        price: p,
                    });
                }
                invested += pos.weight * wealth;
                holdings.push(Holding {
                    units: pos.weight * wealth / p,
                    spec: pos.spec,
                    bought_at: t,
                });
            }
            cash = wealth - invested;
            cash_since = t;
        }
    }
    Ok(Ledger {
        marks,
        terminal: wealth,
        bankrupt,
    })
}

/// Terminal wealth sample of a rebalanced strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthSample {
    /// Terminal wealth per path; antithetic partners are adjacent.
    pub terminal: Vec<f64>,
    pub bankrupt: usize,
    pub antithetic: bool,
}

impl WealthSample {
    pub fn bankrupt_fraction(&self) -> f64 {
        self.bankrupt as f64 / self.terminal.len() as f64
    }
}

/// Wealth simulation under the physical measure.
///
/// With `antithetic`, `n_paths` is rounded up to an even count and paths
/// `2j` and `2j + 1` share stream `j` with mirrored draws.
pub fn simulate_wealth(
    params: &MarketParams,
    schedule: &Schedule,
    strategy: &dyn Rebalancer,
    pricer: &dyn Repricer,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<WealthSample> {
    params.validate()?;
    schedule.validate()?;
    if n_paths == 0 {
        return Err(Error::param("n_paths", 0.0, "must be at least 1"));
    }
    let times = uniform_grid(params.horizon, schedule.n_steps);
    let sampler = PathSampler::new(params, times.clone(), Measure::Physical, seed);
    let draws: Vec<(u64, bool)> = if antithetic {
        (0..n_paths.div_ceil(2) as u64)
            .flat_map(|j| [(j, false), (j, true)])
            .collect()
    } else {
        (0..n_paths as u64).map(|j| (j, false)).collect()
    };
    let results: Vec<Result<Ledger>> = draws
        .par_iter()
        .map(|&(j, anti)| {
            let path = sampler.path(j, anti);
            run_ledger(params, &times, &path, schedule, strategy, pricer)
        })
        .collect();
    let mut terminal = Vec::with_capacity(results.len());
    let mut bankrupt = 0;
    for r in results {
        let ledger = r?;
        bankrupt += ledger.bankrupt as usize;
        terminal.push(ledger.terminal);
    }
    Ok(WealthSample {
        terminal,
        bankrupt,
        antithetic,
    })
}
