//! Certainty-equivalent rates of discretely rebalanced option portfolios.
//!
//! All configurations in one study share a single set of simulated paths on
//! a grid fine enough for every requested frequency, so CER differences
//! across frequencies and compositions are paired.

use rayon::prelude::*;

use crate::allocation::{merton_eta, value_function, ExposureTarget};
use crate::csv::{fmt_f64, row};
use crate::error::{Error, Result};
use crate::market::{
    run_ledger, uniform_grid, MarketParams, Measure, PathSampler, Position, Rebalancer, Schedule,
    BANKRUPTCY_FLOOR,
};
use crate::pricing::{bs_european, bs_straddle, AnalyticRepricer, Family, OptionSpec, Style, Underlying};
use crate::selection::euro_straddle_optimum;

/// Bankrupt-path fraction above which a report carries a warning.
pub const BANKRUPTCY_WARNING: f64 = 0.01;

/// What the portfolio holds at every rebalance date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Composition {
    Cash,
    /// The two stocks, held as zero-strike calls.
    Stocks,
    /// European options on asset 1 and asset 2 at fixed strikes, rolled at
    /// each rebalance.
    FixedStrike { families: [Family; 2], strikes: [f64; 2] },
    /// European straddles re-struck at the optimal strike-to-spot ratio at
    /// each rebalance.
    StraddleRatio,
}

impl Composition {
    pub fn call_pair(k1: f64, k2: f64) -> Self {
        Composition::FixedStrike {
            families: [Family::Call, Family::Call],
            strikes: [k1, k2],
        }
    }

    /// Strikes held at t = 0; NaN for cash.
    pub fn initial_strikes(&self, params: &MarketParams) -> Result<[f64; 2]> {
        Ok(match *self {
            Composition::Cash => [f64::NAN; 2],
            Composition::Stocks => [0.0; 2],
            Composition::FixedStrike { strikes, .. } => strikes,
            Composition::StraddleRatio => {
                let mut k = [0.0; 2];
                for (i, ki) in k.iter_mut().enumerate() {
                    let spot = params.spot[i];
                    *ki = euro_straddle_optimum(spot, params.r, params.sigma[i], params.maturity)?.0;
                }
                k
            }
        })
    }

    fn specs(&self, params: &MarketParams) -> Result<Vec<OptionSpec>> {
        let strikes = self.initial_strikes(params)?;
        let family = |i: usize| match *self {
            Composition::Cash => None,
            Composition::Stocks => Some(Family::Call),
            Composition::FixedStrike { families, .. } => Some(families[i]),
            Composition::StraddleRatio => Some(Family::Straddle),
        };
        Ok((0..2)
            .filter_map(|i| {
                family(i).map(|f| OptionSpec::new(f, Style::European, Underlying::asset(i), strikes[i], params.maturity))
            })
            .collect())
    }
}

/// Realized CER of one composition at one rebalancing frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct CerReport {
    pub cer: f64,
    pub std_err: f64,
    pub theoretical: f64,
    pub incomplete: f64,
    /// Rebalances per year.
    pub frequency: usize,
    /// Options held at t = 0.
    pub composition: Vec<OptionSpec>,
    pub bankrupt_fraction: f64,
    pub warning: Option<String>,
}

impl CerReport {
    pub const CSV_HEADER: &'static str = "k1,k2,frequency,cer,stderr,theoretical,incomplete";

    pub fn csv_row(&self) -> String {
        let k = |i: usize| self.composition.get(i).map_or(f64::NAN, |s| s.strike);
        row([
            fmt_f64(k(0)),
            fmt_f64(k(1)),
            self.frequency.to_string(),
            fmt_f64(self.cer),
            fmt_f64(self.std_err),
            fmt_f64(self.theoretical),
            fmt_f64(self.incomplete),
        ])
    }
}

/// Simulation budget for CER studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CerSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for CerSettings {
    fn default() -> Self {
        CerSettings {
            n_paths: 100_000,
            seed: 20240607,
            antithetic: true,
        }
    }
}

/// `c` with `U(W₀e^{cT}) = mean_utility`.
pub fn certainty_equivalent_rate(mean_utility: f64, w0: f64, gamma: f64, horizon: f64) -> f64 {
    let w = ((1.0 - gamma) * mean_utility).powf(1.0 / (1.0 - gamma));
    (w / w0).ln() / horizon
}

/// CER and its delta-method standard error from terminal wealth.
///
/// With `antithetic`, adjacent entries are averaged in utility before the
/// error estimate.
pub fn cer_from_wealth(terminal: &[f64], w0: f64, gamma: f64, horizon: f64, antithetic: bool) -> (f64, f64) {
    let samples = utility_samples(terminal, gamma, antithetic);
    let (mean, se) = crate::numerics::mean_and_std_err(&samples);
    let cer = certainty_equivalent_rate(mean, w0, gamma, horizon);
    (cer, se * cer_slope(mean, gamma, horizon).abs())
}

fn utility_samples(terminal: &[f64], gamma: f64, antithetic: bool) -> Vec<f64> {
    let u = |w: f64| w.powf(1.0 - gamma) / (1.0 - gamma);
    if antithetic {
        terminal.chunks(2).map(|p| p.iter().map(|&w| u(w)).sum::<f64>() / p.len() as f64).collect()
    } else {
        terminal.iter().map(|&w| u(w)).collect()
    }
}

/// d CER / d mean utility.
fn cer_slope(mean_utility: f64, gamma: f64, horizon: f64) -> f64 {
    1.0 / ((1.0 - gamma) * mean_utility * horizon)
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Rebalancing rule for the European compositions.
struct Strategy {
    comp: Composition,
    params: MarketParams,
    eta: ExposureTarget,
    /// Optimal straddle ratios per time to maturity.
    ratios: Vec<(f64, [f64; 2])>,
}

impl Strategy {
    fn new(comp: Composition, params: &MarketParams, rebalance_times: &[f64]) -> Result<Self> {
        let mut ratios = Vec::new();
        if comp == Composition::StraddleRatio {
            for &t in rebalance_times {
                let ttm = Self::ttm_at(params, t);
                if ratios.iter().any(|(m, _)| *m == ttm) {
                    continue;
                }
                let mut r = [0.0; 2];
                for (i, ri) in r.iter_mut().enumerate() {
                    let spot = params.spot[i];
                    *ri = euro_straddle_optimum(spot, params.r, params.sigma[i], ttm)?.0 / spot;
                }
                ratios.push((ttm, r));
            }
        }
        Ok(Strategy {
            comp,
            params: *params,
            eta: merton_eta(params)?,
            ratios,
        })
    }

    fn ttm_at(params: &MarketParams, t: f64) -> f64 {
        if params.rolling {
            params.maturity
        } else {
            params.maturity - t
        }
    }
}

impl Rebalancer for Strategy {
    fn rebalance(&self, t: f64, spots: [f64; 2]) -> Result<Vec<Position>> {
        let p = &self.params;
        let ttm = Self::ttm_at(p, t);
        let mut out = Vec::with_capacity(2);
        for i in 0..2 {
            let s = spots[i];
            let (family, strike) = match self.comp {
                Composition::Cash => return Ok(Vec::new()),
                Composition::Stocks => (Family::Call, 0.0),
                Composition::FixedStrike { families, strikes } => (families[i], strikes[i]),
                Composition::StraddleRatio => {
                    let ratio = self
                        .ratios
                        .iter()
                        .find(|(m, _)| *m == ttm)
                        .map(|(_, r)| r[i])
                        .ok_or_else(|| Error::Unsupported(format!("no straddle ratio for ttm {ttm}")))?;
                    (Family::Straddle, ratio * s)
                }
            };
            let spec = OptionSpec::new(family, Style::European, Underlying::asset(i), strike, ttm);
            let quote = match family {
                Family::Straddle => bs_straddle(s, strike, p.r, p.sigma[i], ttm),
                _ => bs_european(s, strike, p.r, p.sigma[i], ttm, family),
            };
            let quote = quote.map_err(|_| Error::CompositionInfeasible {
                time: t,
                spec: spec.to_string(),
                price: crate::pricing::bs_price(family, s, strike, p.r, p.sigma[i], ttm),
            })?;
            out.push(Position {
                spec,
                weight: self.eta.eta[i] / quote.f,
            });
        }
        Ok(out)
    }
}

/// Outcome of a CER study: one report per configuration, plus the paired
/// terminal wealth needed for cross-configuration comparisons.
#[derive(Debug, Clone)]
pub struct CerStudy {
    pub reports: Vec<Result<CerReport>>,
    terminal: Vec<Vec<f64>>,
    gamma: f64,
    horizon: f64,
    antithetic: bool,
}

impl CerStudy {
    /// `CER_a − CER_b` and its standard error on the shared paths.
    pub fn paired_difference(&self, a: usize, b: usize) -> Option<(f64, f64)> {
        let (ra, rb) = (self.reports.get(a)?.as_ref().ok()?, self.reports.get(b)?.as_ref().ok()?);
        let ua = utility_samples(&self.terminal[a], self.gamma, self.antithetic);
        let ub = utility_samples(&self.terminal[b], self.gamma, self.antithetic);
        let (ma, _) = crate::numerics::mean_and_std_err(&ua);
        let (mb, _) = crate::numerics::mean_and_std_err(&ub);
        let (ga, gb) = (cer_slope(ma, self.gamma, self.horizon), cer_slope(mb, self.gamma, self.horizon));
        let d: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| ga * (x - ma) - gb * (y - mb)).collect();
        let (_, se) = crate::numerics::mean_and_std_err(&d);
        Some((ra.cer - rb.cer, se))
    }

    /// Terminal wealth of configuration `i`, antithetic partners adjacent.
    pub fn terminal_wealth(&self, i: usize) -> &[f64] {
        &self.terminal[i]
    }
}

/// Terminal wealth per configuration and the ledger failures on one path.
type PathOutcome = (Vec<f64>, Vec<(usize, Error)>);

/// Simulates every `(composition, frequency)` pair on common paths.
pub fn run_cer_study(
    configs: &[(Composition, usize)],
    params: &MarketParams,
    settings: &CerSettings,
) -> Result<CerStudy> {
    params.validate()?;
    if configs.is_empty() {
        return Err(Error::param("configs", 0.0, "need at least one configuration"));
    }
    if settings.n_paths == 0 {
        return Err(Error::param("n_paths", 0.0, "must be at least 1"));
    }
    let mut grid_per_year = 1;
    for &(_, f) in configs {
        if f == 0 {
            return Err(Error::param("frequency", 0.0, "must be at least one rebalance per year"));
        }
        grid_per_year = lcm(grid_per_year, f);
    }
    let n_steps_f = grid_per_year as f64 * params.horizon;
    let n_steps = n_steps_f.round() as usize;
    if n_steps == 0 || (n_steps_f - n_steps as f64).abs() > 1e-9 {
        return Err(Error::param(
            "horizon",
            params.horizon,
            "horizon times the rebalancing frequencies must be a whole number of steps",
        ));
    }
    let times = uniform_grid(params.horizon, n_steps);
    let schedules: Vec<Schedule> = configs
        .iter()
        .map(|&(_, f)| Schedule {
            n_steps,
            rebalance_every: grid_per_year / f,
        })
        .collect();
    let strategies: Vec<Strategy> = configs
        .iter()
        .zip(&schedules)
        .map(|(&(c, _), s)| {
            let dates: Vec<f64> = (0..n_steps).filter(|&k| s.is_rebalance(k)).map(|k| times[k]).collect();
            Strategy::new(c, params, &dates)
        })
        .collect::<Result<_>>()?;
    let specs: Vec<Vec<OptionSpec>> = configs.iter().map(|(c, _)| c.specs(params)).collect::<Result<_>>()?;

    let pricer = AnalyticRepricer { params: *params };
    let sampler = PathSampler::new(params, times.clone(), Measure::Physical, settings.seed);
    let draws: Vec<(u64, bool)> = if settings.antithetic {
        (0..settings.n_paths.div_ceil(2) as u64)
            .flat_map(|j| [(j, false), (j, true)])
            .collect()
    } else {
        (0..settings.n_paths as u64).map(|j| (j, false)).collect()
    };
    // per path: terminal wealth per configuration, NaN where the ledger failed
    let per_path: Vec<PathOutcome> = draws
        .par_iter()
        .map(|&(j, anti)| {
            let path = sampler.path(j, anti);
            let mut wealth = Vec::with_capacity(configs.len());
            let mut errors = Vec::new();
            for (c, (s, strat)) in schedules.iter().zip(&strategies).enumerate() {
                match run_ledger(params, &times, &path, s, strat, &pricer) {
                    Ok(l) => wealth.push(l.terminal),
                    Err(e) => {
                        wealth.push(f64::NAN);
                        errors.push((c, e));
                    }
                }
            }
            (wealth, errors)
        })
        .collect();

    let mut terminal = vec![Vec::with_capacity(draws.len()); configs.len()];
    let mut first_error: Vec<Option<Error>> = vec![None; configs.len()];
    for (wealth, errors) in per_path {
        for (c, w) in wealth.into_iter().enumerate() {
            terminal[c].push(w);
        }
        for (c, e) in errors {
            first_error[c].get_or_insert(e);
        }
    }

    let vf = value_function(params, 0.0, 1.0)?;
    let reports = configs
        .iter()
        .enumerate()
        .map(|(c, &(_, frequency))| {
            if let Some(e) = first_error[c].take() {
                return Err(e);
            }
            let w = &terminal[c];
            let (cer, std_err) = cer_from_wealth(w, 1.0, params.gamma, params.horizon, settings.antithetic);
            let bankrupt_fraction = w.iter().filter(|&&x| x <= BANKRUPTCY_FLOOR).count() as f64 / w.len() as f64;
            let warning = (bankrupt_fraction > BANKRUPTCY_WARNING).then(|| {
                format!(
                    "{:.2}% of paths went bankrupt; the CER estimate is unreliable",
                    100.0 * bankrupt_fraction
                )
            });
            Ok(CerReport {
                cer,
                std_err,
                theoretical: vf.cer,
                incomplete: vf.incomplete_cer,
                frequency,
                composition: specs[c].clone(),
                bankrupt_fraction,
                warning,
            })
        })
        .collect();
    Ok(CerStudy {
        reports,
        terminal,
        gamma: params.gamma,
        horizon: params.horizon,
        antithetic: settings.antithetic,
    })
}

/// CER of one composition at one frequency.
pub fn estimate_cer(
    composition: Composition,
    frequency: usize,
    params: &MarketParams,
    settings: &CerSettings,
) -> Result<CerReport> {
    run_cer_study(&[(composition, frequency)], params, settings)?
        .reports
        .pop()
        .expect("one configuration")
}

/// CER over a grid of fixed strikes and frequencies, strike-major with
/// `k1` outermost.
pub fn cer_strike_surface(
    k1_grid: &[f64],
    k2_grid: &[f64],
    families: [Family; 2],
    frequencies: &[usize],
    params: &MarketParams,
    settings: &CerSettings,
) -> Result<CerStudy> {
    let mut configs = Vec::with_capacity(k1_grid.len() * k2_grid.len() * frequencies.len());
    for &k1 in k1_grid {
        for &k2 in k2_grid {
            for &f in frequencies {
                configs.push((
                    Composition::FixedStrike {
                        families,
                        strikes: [k1, k2],
                    },
                    f,
                ));
            }
        }
    }
    run_cer_study(&configs, params, settings)
}

/// CER of the ratio-rolled straddle portfolio per frequency.
pub fn rolling_straddle_cer(frequencies: &[usize], params: &MarketParams, settings: &CerSettings) -> Result<CerStudy> {
    let configs: Vec<_> = frequencies.iter().map(|&f| (Composition::StraddleRatio, f)).collect();
    run_cer_study(&configs, params, settings)
}
