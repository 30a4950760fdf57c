use optsel_core::allocation::{l1_min_lp, merton_eta, solve_allocation, value_function};
use optsel_core::evaluation::{cer_from_wealth, certainty_equivalent_rate};
use optsel_core::market::{run_ledger, MarketParams, Position, Rebalancer, Schedule};
use optsel_core::pricing::{
    sensitivity_matrix, AnalyticRepricer, Family, OptionSpec, PricingContext, PricingSettings, SensitivityMatrix,
    Style, Underlying,
};
use optsel_core::Result;
use proptest::prelude::*;

struct FixedWeights;

impl Rebalancer for FixedWeights {
    fn rebalance(&self, _t: f64, _spots: [f64; 2]) -> Result<Vec<Position>> {
        Ok(vec![
            Position {
                spec: OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 40.0, 2.0),
                weight: 0.5,
            },
            Position {
                spec: OptionSpec::new(Family::Call, Style::European, Underlying::Asset2, 30.0, 2.0),
                weight: -0.2,
            },
        ])
    }
}

#[test]
fn ledger_matches_hand_computed_wealth() {
    // 40-digit evaluation of the same two-period self-financing trade
    let expected = [1.158_649_377_036_946, 1.401_032_074_782_315];
    let p = MarketParams::table1();
    let times = [0.0, 0.5, 1.0];
    let path = [[40.0, 30.0], [42.0, 28.0], [45.0, 27.0]];
    let schedule = Schedule {
        n_steps: 2,
        rebalance_every: 1,
    };
    let ledger = run_ledger(&p, &times, &path, &schedule, &FixedWeights, &AnalyticRepricer { params: p }).unwrap();
    assert_eq!(ledger.marks.len(), 3);
    for ((_, w), e) in ledger.marks[1..].iter().zip(expected) {
        assert!((w - e).abs() < 1e-12, "{w} vs {e}");
    }
    assert!(!ledger.bankrupt);
}

#[test]
fn stock_pair_allocation_is_eta_over_sigma() {
    let p = MarketParams::table1();
    let ctx = PricingContext::new(p, PricingSettings::default()).unwrap();
    let stocks = [
        OptionSpec::stock(Underlying::Asset1, p.maturity),
        OptionSpec::stock(Underlying::Asset2, p.maturity),
    ];
    let m = sensitivity_matrix(&stocks, p.spot, &ctx).unwrap();
    let a = solve_allocation(&m, &merton_eta(&p).unwrap()).unwrap();
    assert!((a.pi[0] - 0.0833333333333333 / 0.13).abs() < 1e-9);
    assert!((a.pi[1] - 0.1166666666666667 / 0.2).abs() < 1e-9);
    assert!((a.l1 - 1.2243589743589745).abs() < 1e-9);
}

#[test]
fn lp_over_priced_options_never_beats_its_best_pair() {
    let p = MarketParams::table1();
    let ctx = PricingContext::new(
        p,
        PricingSettings {
            mc_paths: 20_000,
            ..Default::default()
        },
    )
    .unwrap();
    let specs = [
        OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 44.0, 2.0),
        OptionSpec::new(Family::Put, Style::European, Underlying::Asset2, 25.0, 2.0),
        OptionSpec::new(Family::BasketCall, Style::European, Underlying::Basket, 80.0, 2.0),
        OptionSpec::new(Family::Call, Style::European, Underlying::Asset2, 36.0, 2.0),
    ];
    let rows: Vec<[f64; 2]> = specs.iter().map(|s| ctx.price(s, p.spot).unwrap().f).collect();
    let m = SensitivityMatrix::from_rows(rows, specs.iter().map(|s| s.compact()).collect());
    let lp = l1_min_lp(&m, &merton_eta(&p).unwrap()).unwrap();
    assert!((lp.allocation.l1 - lp.best_pair_l1.unwrap()).abs() < 1e-10);
    assert!(lp.nonzeros <= 2);
    assert!(lp.allocation.residual < 1e-12);
}

proptest! {
    #[test]
    fn eta_scales_inversely_with_risk_aversion(gamma in 0.2f64..30.0, rho in -0.9f64..0.9) {
        let base = MarketParams { rho, ..MarketParams::table1() };
        prop_assume!((gamma - 1.0).abs() > 1e-3);
        let a = merton_eta(&MarketParams { gamma: 2.0, ..base }).unwrap().eta;
        let b = merton_eta(&MarketParams { gamma, ..base }).unwrap().eta;
        for i in 0..2 {
            prop_assert!((b[i] * gamma - a[i] * 2.0).abs() < 1e-12 * (1.0 + a[i].abs()));
        }
    }

    #[test]
    fn optimal_cer_falls_toward_the_riskless_rate(gamma in 1.5f64..60.0) {
        let p = MarketParams { gamma, ..MarketParams::table1() };
        let lo = value_function(&p, 0.0, 1.0).unwrap();
        let hi = value_function(&MarketParams { gamma: gamma * 1.5, ..p }, 0.0, 1.0).unwrap();
        prop_assert!(hi.cer < lo.cer);
        prop_assert!(hi.cer > p.r);
        prop_assert!(lo.incomplete_cer <= lo.cer);
    }

    #[test]
    fn cer_inversion_round_trips(c in -0.2f64..0.3, gamma in 1.1f64..20.0, t in 0.1f64..5.0, w0 in 0.01f64..1e4) {
        let u = (w0 * (c * t).exp()).powf(1.0 - gamma) / (1.0 - gamma);
        prop_assert!((certainty_equivalent_rate(u, w0, gamma, t) - c).abs() < 1e-12);
        let (cer, _) = cer_from_wealth(&[w0 * (c * t).exp(); 4], w0, gamma, t, true);
        prop_assert!((cer - c).abs() < 1e-12);
    }
}
