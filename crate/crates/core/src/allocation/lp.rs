//! Minimum-ℓ1 allocation over n ≥ 2 options as a linear program.
//!
//! Weights are split as `π = α − β` with `α, β ≥ 0`, giving
//! `min Σ(αᵢ + βᵢ)` subject to `Σᵀ(α − β) = η`. Only two equality rows
//! exist, so every basic feasible solution has at most two non-zero weights.

use super::{AllocationResult, ExposureTarget};
use crate::error::{Error, Result};
use crate::pricing::SensitivityMatrix;

const EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 10_000;

/// Optimal vertex of the split LP.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub allocation: AllocationResult,
    pub nonzeros: usize,
    pub pivots: usize,
    /// Best ℓ1 norm over all two-option sub-compositions, for n ≤ 8.
    pub best_pair_l1: Option<f64>,
}

struct Tableau {
    /// Two constraint rows; the last column holds the right-hand side.
    rows: [Vec<f64>; 2],
    basis: [usize; 2],
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        *self.rows[r].last().unwrap()
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let other = 1 - r;
        let factor = self.rows[other][col];
        if factor != 0.0 {
            let (a, b) = self.rows.split_at_mut(1);
            let (src, dst) = if r == 0 { (&a[0], &mut b[0]) } else { (&b[0], &mut a[0]) };
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d -= factor * s;
            }
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Bland's-rule simplex minimizing `cost` over columns `< n_cols`.
    fn minimize(&mut self, cost: &[f64], n_cols: usize) -> Result<()> {
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Unsupported("simplex did not terminate".into()));
            }
            let cb = [cost[self.basis[0]], cost[self.basis[1]]];
            let entering = (0..n_cols).find(|&j| {
                let reduced = cost[j] - cb[0] * self.rows[0][j] - cb[1] * self.rows[1][j];
                reduced < -EPS
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..2 {
                let a = self.rows[r][col];
                if a > EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        Some((lr, best))
                            if ratio > best + EPS
                                || ((ratio - best).abs() <= EPS && self.basis[r] > self.basis[lr]) =>
                        {
                            Some((lr, best))
                        }
                        _ => Some((r, ratio)),
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                // costs are non-negative, so the objective is bounded below
                None => return Err(Error::Unsupported("simplex found an unbounded ray".into())),
            }
        }
    }
}

/// Minimum-ℓ1 weights with `Σᵀπ = η` over all options in `sigma`.
pub fn l1_min_lp(sigma: &SensitivityMatrix, target: &ExposureTarget) -> Result<LpSolution> {
    let n = sigma.rows.len();
    if n < 2 {
        return Err(Error::param("n_options", n as f64, "need at least 2 options"));
    }
    if sigma.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::param("sensitivity", f64::NAN, "entries must be finite"));
    }
    if sigma.rank < 2 {
        return Err(Error::InfeasibleMarket);
    }
    let eta = target.eta;
    // columns: α_1..α_n, β_1..β_n, artificial_1, artificial_2, rhs
    let width = 2 * n + 3;
    let mut rows = [vec![0.0; width], vec![0.0; width]];
    for k in 0..2 {
        let sign = if eta[k] < 0.0 { -1.0 } else { 1.0 };
        for (i, row) in sigma.rows.iter().enumerate() {
            rows[k][i] = sign * row[k];
            rows[k][n + i] = -sign * row[k];
        }
        rows[k][2 * n + k] = 1.0;
        rows[k][width - 1] = sign * eta[k];
    }
    let mut tab = Tableau {
        rows,
        basis: [2 * n, 2 * n + 1],
        pivots: 0,
    };

    let mut phase1 = vec![0.0; width - 1];
    phase1[2 * n] = 1.0;
    phase1[2 * n + 1] = 1.0;
    tab.minimize(&phase1, 2 * n + 2)?;
    let infeasibility: f64 = (0..2)
        .filter(|&r| tab.basis[r] >= 2 * n)
        .map(|r| tab.rhs(r))
        .sum();
    let scale = eta[0].abs().max(eta[1].abs()).max(1.0);
    if infeasibility > 1e-9 * scale {
        return Err(Error::InfeasibleMarket);
    }
    // drive zero-level artificials out of the basis
    for r in 0..2 {
        if tab.basis[r] >= 2 * n {
            match (0..2 * n).find(|&j| tab.rows[r][j].abs() > EPS && !tab.basis.contains(&j)) {
                Some(j) => tab.pivot(r, j),
                None => return Err(Error::InfeasibleMarket),
            }
        }
    }

    let mut phase2 = vec![1.0; width - 1];
    phase2[2 * n] = 0.0;
    phase2[2 * n + 1] = 0.0;
    tab.minimize(&phase2, 2 * n)?;

    let mut pi = vec![0.0; n];
    for r in 0..2 {
        let col = tab.basis[r];
        let v = tab.rhs(r);
        if col < n {
            pi[col] += v;
        } else if col < 2 * n {
            pi[col - n] -= v;
        }
    }
    let nonzeros = pi.iter().filter(|p| **p != 0.0).count();
    let best_pair_l1 = (n <= 8).then(|| best_pair(&sigma.rows, eta));
    Ok(LpSolution {
        allocation: AllocationResult::new(sigma.labels.clone(), pi, &sigma.rows, eta, sigma.cond),
        nonzeros,
        pivots: tab.pivots,
        best_pair_l1,
    })
}

/// Smallest ℓ1 norm over every non-singular pair of options.
fn best_pair(rows: &[[f64; 2]], eta: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (rows[i], rows[j]);
            let det = a[0] * b[1] - b[0] * a[1];
            let scale = a[0].hypot(a[1]) * b[0].hypot(b[1]);
            if det.abs() <= 1e-12 * scale {
                continue;
            }
            let pi = (eta[0] * b[1] - b[0] * eta[1]) / det;
            let pj = (a[0] * eta[1] - a[1] * eta[0]) / det;
            best = best.min(pi.abs() + pj.abs());
        }
    }
    best
}
