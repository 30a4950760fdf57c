use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::MarketParams;

use super::{Family, Method, OptionSpec, PriceAndGreeks, PricingSettings, Style};

const CHUNK: usize = 4096;

/// Per-path summary of a risk-neutral scenario started from unit spots.
#[derive(Debug, Clone, Copy)]
struct Scenario {
    avg: [f64; 2],
    term: [f64; 2],
}

/// Risk-neutral scenario set for one `(ttm, monitoring)` pair.
///
/// Paths start at unit spots, so any spot vector (and any bumped spot) is a
/// rescaling of the same draws. Deltas therefore use common random numbers
/// by construction.
#[derive(Debug)]
pub struct McEngine {
    ttm: f64,
    monitoring: u32,
    discount: f64,
    sigma: [f64; 2],
    antithetic: bool,
    scenarios: Vec<Scenario>,
}

impl McEngine {
    pub fn new(params: &MarketParams, ttm: f64, monitoring: u32, settings: &PricingSettings) -> Self {
        let m = monitoring.max(1) as usize;
        let dt = ttm / m as f64;
        let sq = dt.sqrt();
        let drift = [
            (params.r - 0.5 * params.sigma[0] * params.sigma[0]) * dt,
            (params.r - 0.5 * params.sigma[1] * params.sigma[1]) * dt,
        ];
        let vol = [params.sigma[0] * sq, params.sigma[1] * sq];
        let rho = params.rho;
        let rho_c = (1.0 - rho * rho).sqrt();
        let seed = settings.seed;

        let simulate = move |stream: u64, anti: bool| -> Scenario {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let sign = if anti { -1.0 } else { 1.0 };
            let mut log_s = [0.0f64; 2];
            let mut sum = [0.0f64; 2];
            for _ in 0..m {
                let z1: f64 = rng.sample::<f64, _>(StandardNormal) * sign;
                let z2: f64 = rng.sample::<f64, _>(StandardNormal) * sign;
                log_s[0] += drift[0] + vol[0] * z1;
                log_s[1] += drift[1] + vol[1] * (rho * z1 + rho_c * z2);
                sum[0] += log_s[0].exp();
                sum[1] += log_s[1].exp();
            }
            Scenario {
                avg: [sum[0] / m as f64, sum[1] / m as f64],
                term: [log_s[0].exp(), log_s[1].exp()],
            }
        };

        let scenarios: Vec<Scenario> = if settings.antithetic {
            let pairs = settings.mc_paths.div_ceil(2) as u64;
            (0..pairs)
                .into_par_iter()
                .flat_map_iter(|j| [simulate(j, false), simulate(j, true)])
                .collect()
        } else {
            (0..settings.mc_paths as u64)
                .into_par_iter()
                .map(|j| simulate(j, false))
                .collect()
        };

        McEngine {
            ttm,
            monitoring: m as u32,
            discount: (-params.r * ttm).exp(),
            sigma: params.sigma,
            antithetic: settings.antithetic,
            scenarios,
        }
    }

    pub fn ttm(&self) -> f64 {
        self.ttm
    }

    pub fn monitoring(&self) -> u32 {
        self.monitoring
    }

    pub fn n_paths(&self) -> usize {
        self.scenarios.len()
    }

    /// Price and central-difference Deltas of `spec` at `spots`.
    pub fn price(
        &self,
        spec: &OptionSpec,
        spots: [f64; 2],
        settings: &PricingSettings,
    ) -> Result<PriceAndGreeks> {
        spec.validate()?;
        if spec.style == Style::American {
            return Err(Error::Unsupported(format!(
                "{spec}: American options are priced on the tree"
            )));
        }
        if (spec.ttm - self.ttm).abs() > 1e-12 * self.ttm.max(1.0) {
            return Err(Error::Unsupported(format!(
                "{spec}: scenario set was simulated for ttm {}",
                self.ttm
            )));
        }
        let asian = spec.style == Style::AsianArithmetic;
        if asian && spec.monitoring != self.monitoring {
            return Err(Error::Unsupported(format!(
                "{spec}: scenario set averages over {} dates",
                self.monitoring
            )));
        }
        let weights: [f64; 2] = match spec.underlying.asset_index() {
            Some(0) => [1.0, 0.0],
            Some(_) => [0.0, 1.0],
            None => [1.0, 1.0],
        };
        let strike = spec.strike;
        let family = spec.family;
        let payoff = move |u: f64| match family {
            Family::Call | Family::BasketCall => (u - strike).max(0.0),
            Family::Put | Family::BasketPut => (strike - u).max(0.0),
            Family::Straddle => (u - strike).abs(),
        };
        let bump = [settings.fd_bump * spots[0], settings.fd_bump * spots[1]];
        let active = [weights[0] != 0.0, weights[1] != 0.0];

        // per path: price sample and the two Delta samples
        let sample = |s: &Scenario| -> [f64; 3] {
            let x = if asian { s.avg } else { s.term };
            let base = weights[0] * spots[0] * x[0] + weights[1] * spots[1] * x[1];
            let mut out = [payoff(base), 0.0, 0.0];
            for k in 0..2 {
                if active[k] {
                    let shift = bump[k] * x[k];
                    out[k + 1] = (payoff(base + shift) - payoff(base - shift)) / (2.0 * bump[k]);
                }
            }
            out
        };

        // antithetic pairs are averaged into one independent sample
        let group = if self.antithetic { 2 } else { 1 };
        let partial: Vec<[f64; 6]> = self
            .scenarios
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = [0.0; 6];
                for g in chunk.chunks(group) {
                    let mut v = [0.0; 3];
                    for s in g {
                        let y = sample(s);
                        for i in 0..3 {
                            v[i] += y[i];
                        }
                    }
                    for i in 0..3 {
                        let m = v[i] / g.len() as f64;
                        acc[i] += m;
                        acc[i + 3] += m * m;
                    }
                }
                acc
            })
            .collect();
        let mut acc = [0.0; 6];
        for p in &partial {
            for i in 0..6 {
                acc[i] += p[i];
            }
        }
        let n = self.scenarios.len().div_ceil(group) as f64;
        let stats = |i: usize| -> (f64, f64) {
            let mean = acc[i] / n;
            let var = ((acc[i + 3] - n * mean * mean) / (n - 1.0)).max(0.0);
            (self.discount * mean, self.discount * (var / n).sqrt())
        };
        let (price, price_std_err) = stats(0);
        let (d1, se1) = stats(1);
        let (d2, se2) = stats(2);
        if price <= 2.0 * price_std_err {
            return Err(Error::NearZeroPrice {
                spec: spec.to_string(),
                price,
                std_err: price_std_err,
            });
        }
        let delta = [d1, d2];
        let f = [
            delta[0] * spots[0] * self.sigma[0] / price,
            delta[1] * spots[1] * self.sigma[1] / price,
        ];
        Ok(PriceAndGreeks {
            price,
            delta,
            f,
            price_std_err,
            delta_std_err: [se1, se2],
            method: Method::MonteCarlo,
            exercise: None,
        })
    }
}

/// One-off Monte-Carlo valuation of `spec`; simulates a fresh scenario set.
pub fn mc_price(
    spec: &OptionSpec,
    spots: [f64; 2],
    params: &MarketParams,
    settings: &PricingSettings,
) -> Result<PriceAndGreeks> {
    params.validate()?;
    settings.validate()?;
    spec.validate()?;
    let m = if spec.style == Style::AsianArithmetic {
        spec.monitoring
    } else {
        1
    };
    McEngine::new(params, spec.ttm, m, settings).price(spec, spots, settings)
}
