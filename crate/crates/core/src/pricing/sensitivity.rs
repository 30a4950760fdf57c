use crate::error::{Error, Result};

use super::{OptionSpec, PricingContext};

/// Condition numbers above this are rejected.
pub const MAX_CONDITION: f64 = 1e8;

/// Rows of relative sensitivities, one per option: `rows[i][k] = f⁽ⁱᵏ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub rows: Vec<[f64; 2]>,
    pub labels: Vec<String>,
    /// Ratio of largest to smallest singular value.
    pub cond: f64,
    pub rank: usize,
}

impl SensitivityMatrix {
    /// Builds the matrix from raw rows and computes its diagnostics.
    pub fn from_rows(rows: Vec<[f64; 2]>, labels: Vec<String>) -> Self {
        let (smax, smin) = singular_values(&rows);
        let rank = if smax == 0.0 {
            0
        } else if smin <= 1e-14 * smax {
            1
        } else {
            2
        };
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        SensitivityMatrix {
            rows,
            labels,
            cond,
            rank,
        }
    }

    pub fn n_options(&self) -> usize {
        self.rows.len()
    }
}

/// Singular values of an n×2 matrix, largest first.
fn singular_values(rows: &[[f64; 2]]) -> (f64, f64) {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for r in rows {
        a += r[0] * r[0];
        b += r[0] * r[1];
        c += r[1] * r[1];
    }
    let mean = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let hi = mean + disc;
    // det / hi avoids cancellation in mean - disc
    let lo = if hi > 0.0 { ((a * c - b * b) / hi).max(0.0) } else { 0.0 };
    (hi.sqrt(), lo.sqrt())
}

/// Sensitivity matrix of a two-option composition at `spots`.
///
/// Slot 1 loads on asset 1 and slot 2 on asset 2, so the diagonal entries
/// must be non-zero.
pub fn sensitivity_matrix(
    composition: &[OptionSpec; 2],
    spots: [f64; 2],
    ctx: &PricingContext,
) -> Result<SensitivityMatrix> {
    let threshold = ctx.settings().singular_threshold;
    let mut rows = Vec::with_capacity(2);
    for spec in composition {
        rows.push(ctx.price(spec, spots)?.f);
    }
    for (i, spec) in composition.iter().enumerate() {
        let v = rows[i][i];
        if !v.is_finite() || v.abs() < threshold {
            return Err(Error::SingularComposition {
                entry: format!("f[{}{}] of {spec}", i + 1, i + 1),
                value: v,
            });
        }
    }
    let labels = composition.iter().map(OptionSpec::compact).collect();
    let m = SensitivityMatrix::from_rows(rows, labels);
    if m.cond > MAX_CONDITION {
        return Err(Error::IllConditioned { cond: m.cond });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketParams;
    use crate::pricing::{Family, PricingSettings, Style, Underlying};

    fn ctx() -> PricingContext {
        PricingContext::new(
            MarketParams::table1(),
            PricingSettings {
                mc_paths: 40_000,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn stocks_give_the_volatility_diagonal() {
        let c = ctx();
        let comp = [
            OptionSpec::stock(Underlying::Asset1, 2.0),
            OptionSpec::stock(Underlying::Asset2, 2.0),
        ];
        let m = sensitivity_matrix(&comp, c.params().spot, &c).unwrap();
        assert_eq!(m.rows, vec![[0.13, 0.0], [0.0, 0.2]]);
        assert!((m.cond - 0.2 / 0.13).abs() < 1e-12);
        assert_eq!(m.rank, 2);
    }

    #[test]
    fn one_asset_pair_has_zero_off_diagonals() {
        let c = ctx();
        let comp = [
            OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 44.0, 2.0),
            OptionSpec::new(Family::Put, Style::American, Underlying::Asset2, 25.0, 2.0),
        ];
        let m = sensitivity_matrix(&comp, c.params().spot, &c).unwrap();
        assert_eq!(m.rows[0][1], 0.0);
        assert_eq!(m.rows[1][0], 0.0);
        assert!(m.rows[1][1] < 0.0);
    }

    #[test]
    fn basket_slot_loads_on_both_assets() {
        let c = ctx();
        let comp = [
            OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 40.0, 2.0),
            OptionSpec::new(Family::BasketCall, Style::European, Underlying::Basket, 70.0, 2.0),
        ];
        let m = sensitivity_matrix(&comp, c.params().spot, &c).unwrap();
        assert!(m.rows[1][0] > 0.0 && m.rows[1][1] > 0.0);
        assert_eq!(m.rows[0][1], 0.0);
    }

    #[test]
    fn both_slots_on_one_asset_are_singular() {
        let c = ctx();
        let comp = [
            OptionSpec::stock(Underlying::Asset1, 2.0),
            OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 40.0, 2.0),
        ];
        let err = sensitivity_matrix(&comp, c.params().spot, &c).unwrap_err();
        assert!(matches!(err, Error::SingularComposition { .. }));
    }

    #[test]
    fn singular_values_of_known_matrix() {
        let (hi, lo) = singular_values(&[[3.0, 0.0], [0.0, 4.0]]);
        assert!((hi - 4.0).abs() < 1e-14 && (lo - 3.0).abs() < 1e-14);
        let m = SensitivityMatrix::from_rows(vec![[1.0, 2.0], [2.0, 4.0]], vec![]);
        assert_eq!(m.rank, 1);
    }
}
