//! Optimal exposure, the CRRA value function, and the map from a
//! sensitivity matrix to portfolio weights.

mod lp;

pub use lp::{l1_min_lp, LpSolution};

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::pricing::{SensitivityMatrix, MAX_CONDITION};

/// Target exposures to the two Brownian drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureTarget {
    pub eta: [f64; 2],
}

/// `(ΦΦᵀ)⁻¹Λ / γ` in closed form.
pub fn merton_eta(params: &MarketParams) -> Result<ExposureTarget> {
    params.validate()?;
    let [l1, l2] = params.lambda;
    let rho = params.rho;
    let det = (1.0 - rho * rho) * params.gamma;
    Ok(ExposureTarget {
        eta: [(l1 - rho * l2) / det, (l2 - rho * l1) / det],
    })
}

/// Value function and certainty-equivalent rates at `(t, W)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueFunction {
    pub value: f64,
    /// Certainty-equivalent rate of the optimal strategy.
    pub cer: f64,
    /// Certainty-equivalent rate when only the first Brownian risk is hedgeable.
    pub incomplete_cer: f64,
}

/// CRRA utility `W^{1-γ}/(1-γ)`.
pub fn crra_utility(w: f64, gamma: f64) -> f64 {
    w.powf(1.0 - gamma) / (1.0 - gamma)
}

pub fn value_function(params: &MarketParams, t: f64, wealth: f64) -> Result<ValueFunction> {
    params.validate()?;
    if !(wealth > 0.0) {
        return Err(Error::param("wealth", wealth, "must be positive"));
    }
    if !(0.0..=params.horizon).contains(&t) {
        return Err(Error::param("t", t, "must lie in [0, horizon]"));
    }
    let eta = merton_eta(params)?.eta;
    let gamma = params.gamma;
    // ΛᵀΦΦᵀ⁻¹Λ = γ ηᵀΛ
    let sharpe2 = gamma * (eta[0] * params.lambda[0] + eta[1] * params.lambda[1]);
    let cer = params.r + sharpe2 / (2.0 * gamma);
    let incomplete_cer = params.r + params.lambda[0] * params.lambda[0] / (2.0 * gamma);
    let value = crra_utility(wealth, gamma) * ((1.0 - gamma) * cer * (params.horizon - t)).exp();
    Ok(ValueFunction {
        value,
        cer,
        incomplete_cer,
    })
}

/// Portfolio weights for a composition.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub labels: Vec<String>,
    pub pi: Vec<f64>,
    /// Wealth fraction in the money market.
    pub cash: f64,
    pub l1: f64,
    pub cond: f64,
    /// `max_k |(Σᵀπ)_k − η_k|`.
    pub residual: f64,
}

impl AllocationResult {
    pub(crate) fn new(labels: Vec<String>, pi: Vec<f64>, rows: &[[f64; 2]], eta: [f64; 2], cond: f64) -> Self {
        let l1 = pi.iter().map(|p| p.abs()).sum();
        let cash = 1.0 - pi.iter().sum::<f64>();
        let mut exposure = [0.0; 2];
        for (p, row) in pi.iter().zip(rows) {
            exposure[0] += p * row[0];
            exposure[1] += p * row[1];
        }
        let residual = (exposure[0] - eta[0]).abs().max((exposure[1] - eta[1]).abs());
        AllocationResult {
            labels,
            pi,
            cash,
            l1,
            cond,
            residual,
        }
    }

    pub const CSV_HEADER: &'static str = "spec1,spec2,pi1,pi2,cash,l1,cond";

    /// Row `spec1,spec2,pi1,pi2,cash,l1,cond` for a two-option allocation.
    pub fn csv_row(&self) -> String {
        let label = |i: usize| self.labels.get(i).cloned().unwrap_or_default();
        let pi = |i: usize| self.pi.get(i).copied().unwrap_or(0.0);
        crate::csv::row([
            label(0),
            label(1),
            fmt_f64(pi(0)),
            fmt_f64(pi(1)),
            fmt_f64(self.cash),
            fmt_f64(self.l1),
            fmt_f64(self.cond),
        ])
    }
}

/// Solves `Σᵀπ = η` for a two-option composition.
pub fn solve_allocation(sigma: &SensitivityMatrix, target: &ExposureTarget) -> Result<AllocationResult> {
    if sigma.rows.len() != 2 {
        return Err(Error::Unsupported(format!(
            "solve_allocation needs exactly 2 options, got {}; use l1_min_lp",
            sigma.rows.len()
        )));
    }
    let [a, b] = [sigma.rows[0], sigma.rows[1]];
    for (i, row) in [a, b].iter().enumerate() {
        if row[i] == 0.0 || !row[i].is_finite() {
            let name = sigma.labels.get(i).cloned().unwrap_or_else(|| format!("option {}", i + 1));
            return Err(Error::SingularComposition {
                entry: format!("f[{}{}] of {name}", i + 1, i + 1),
                value: row[i],
            });
        }
    }
    if sigma.cond > MAX_CONDITION {
        return Err(Error::IllConditioned { cond: sigma.cond });
    }
    let eta = target.eta;
    let pi = if a[1] == 0.0 {
        // lower-triangular: slot 1 loads on asset 1 only
        let p2 = eta[1] / b[1];
        vec![(eta[0] - b[0] * p2) / a[0], p2]
    } else {
        // Cramer's rule on [[a0, b0], [a1, b1]] π = η
        let det = a[0] * b[1] - b[0] * a[1];
        vec![(eta[0] * b[1] - b[0] * eta[1]) / det, (a[0] * eta[1] - a[1] * eta[0]) / det]
    };
    Ok(AllocationResult::new(
        sigma.labels.clone(),
        pi,
        &sigma.rows,
        eta,
        sigma.cond,
    ))
}
