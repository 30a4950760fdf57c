use crate::error::{Error, Result};
use crate::numerics::brent_root;

use super::{Family, OptionSpec, Style};

/// Result of a CRR valuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeQuote {
    pub price: f64,
    pub delta: f64,
    pub f: f64,
    /// Exercising now beats holding.
    pub immediate_exercise: bool,
    /// Continuation minus intrinsic value at the root (smallest over legs).
    pub hold_margin: f64,
    /// Price is numerically zero; `f` is reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
enum Leg {
    Call,
    Put,
}

struct LegValue {
    root: f64,
    up: f64,
    down: f64,
    hold_margin: f64,
}

struct Lattice {
    spot: f64,
    u: f64,
    disc: f64,
    p: f64,
    n: usize,
}

impl Lattice {
    fn new(spot: f64, r: f64, sigma: f64, ttm: f64, n: usize) -> Self {
        let dt = ttm / n as f64;
        let u = (sigma * dt.sqrt()).exp();
        let d = 1.0 / u;
        Lattice {
            spot,
            u,
            disc: (-r * dt).exp(),
            p: ((r * dt).exp() - d) / (u - d),
            n,
        }
    }

    fn node(&self, step: usize, ups: usize) -> f64 {
        self.spot * self.u.powi(2 * ups as i32 - step as i32)
    }

    /// Backward induction of one leg; `early` enables exercise before expiry.
    fn value(&self, leg: Leg, strike: f64, early: bool) -> LegValue {
        let intrinsic = |s: f64| match leg {
            Leg::Call => (s - strike).max(0.0),
            Leg::Put => (strike - s).max(0.0),
        };
        let n = self.n;
        let mut v: Vec<f64> = (0..=n).map(|j| intrinsic(self.node(n, j))).collect();
        let (pu, pd) = (self.disc * self.p, self.disc * (1.0 - self.p));
        let mut step1 = (0.0, 0.0);
        let mut root = (0.0, 0.0);
        for step in (0..n).rev() {
            for j in 0..=step {
                let cont = pu * v[j + 1] + pd * v[j];
                v[j] = if early {
                    cont.max(intrinsic(self.node(step, j)))
                } else {
                    cont
                };
                if step == 0 {
                    root = (cont, v[0]);
                }
            }
            if step == 1 {
                step1 = (v[1], v[0]);
            }
        }
        let exercise = intrinsic(self.spot);
        let hold_margin = if early { root.0 - exercise } else { f64::INFINITY };
        LegValue {
            root: root.1,
            up: step1.0,
            down: step1.1,
            hold_margin,
        }
    }
}

/// CRR binomial valuation of a one-asset call, put or straddle.
///
/// A straddle is valued as a call leg plus a put leg, each exercised on its
/// own. Delta comes from the two nodes of the first time step.
pub fn tree_price_american(
    spec: &OptionSpec,
    spot: f64,
    r: f64,
    sigma: f64,
    n_steps: usize,
) -> Result<TreeQuote> {
    spec.validate()?;
    if spec.underlying.asset_index().is_none() {
        return Err(Error::Unsupported(format!("{spec}: the tree prices one-asset options only")));
    }
    if spec.style == Style::AsianArithmetic {
        return Err(Error::Unsupported(format!("{spec}: Asian options have no tree route")));
    }
    if !(spot > 0.0) {
        return Err(Error::param("spot", spot, "must be positive"));
    }
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", sigma, "must be positive"));
    }
    if n_steps < 2 {
        return Err(Error::param("n_steps", n_steps as f64, "need at least 2 steps"));
    }
    let early = spec.style == Style::American;
    let lattice = Lattice::new(spot, r, sigma, spec.ttm, n_steps);
    let legs: &[Leg] = match spec.family {
        Family::Call => &[Leg::Call],
        Family::Put => &[Leg::Put],
        Family::Straddle => &[Leg::Call, Leg::Put],
        other => return Err(Error::Unsupported(format!("tree cannot price {other:?}"))),
    };
    let (mut price, mut up, mut down) = (0.0, 0.0, 0.0);
    let mut hold_margin = f64::INFINITY;
    for &leg in legs {
        let v = lattice.value(leg, spec.strike, early);
        price += v.root;
        up += v.up;
        down += v.down;
        hold_margin = hold_margin.min(v.hold_margin);
    }
    let delta = (up - down) / (lattice.node(1, 1) - lattice.node(1, 0));
    let degenerate = price <= 1e-12 * spot;
    let f = if degenerate { 0.0 } else { delta * spot * sigma / price };
    Ok(TreeQuote {
        price,
        delta,
        f,
        immediate_exercise: hold_margin < -1e-12 * spot,
        hold_margin,
        degenerate,
    })
}

/// Largest American put strike that is not exercised immediately at `spot`.
pub fn american_exercise_bound(spot: f64, r: f64, sigma: f64, ttm: f64, n_steps: usize) -> Result<f64> {
    let lattice = Lattice::new(spot, r, sigma, ttm, n_steps);
    let margin = |k: f64| -> Result<f64> { Ok(lattice.value(Leg::Put, k, true).hold_margin) };
    brent_root("American put hold margin", margin, spot, 10.0 * spot, 1e-6 * spot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{bs_european, bs_straddle, Underlying};

    const R: f64 = 0.05;

    fn amer(family: Family, strike: f64) -> OptionSpec {
        OptionSpec::new(family, Style::American, Underlying::Asset2, strike, 2.0)
    }

    #[test]
    fn american_call_equals_european() {
        for strike in [20.0, 30.0, 40.0] {
            let t = tree_price_american(&amer(Family::Call, strike), 30.0, R, 0.2, 2000).unwrap();
            let e = bs_european(30.0, strike, R, 0.2, 2.0, Family::Call).unwrap();
            assert!((t.price - e.price).abs() < 1e-2);
            assert!((t.delta - e.delta).abs() < 1e-3);
            assert!(!t.immediate_exercise);
        }
    }

    #[test]
    fn european_style_converges_to_closed_form() {
        let spec = OptionSpec::new(Family::Straddle, Style::European, Underlying::Asset2, 30.0, 2.0);
        let t = tree_price_american(&spec, 30.0, R, 0.2, 2000).unwrap();
        let e = bs_straddle(30.0, 30.0, R, 0.2, 2.0).unwrap();
        assert!((t.price - e.price).abs() < 1e-2);
    }

    #[test]
    fn worthless_put_is_degenerate() {
        let t = tree_price_american(&amer(Family::Put, 0.0), 30.0, R, 0.2, 500).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.f, 0.0);
        assert_eq!(t.price, 0.0);
    }

    #[test]
    fn deep_itm_put_is_exercised() {
        let t = tree_price_american(&amer(Family::Put, 60.0), 30.0, R, 0.2, 500).unwrap();
        assert!(t.immediate_exercise);
        assert!((t.price - 30.0).abs() < 1e-9);
        let t = tree_price_american(&amer(Family::Put, 30.0), 30.0, R, 0.2, 500).unwrap();
        assert!(!t.immediate_exercise);
        assert!(t.hold_margin > 0.0);
    }

    #[test]
    fn american_put_dominates_european() {
        let t = tree_price_american(&amer(Family::Put, 33.0), 30.0, R, 0.2, 1000).unwrap();
        let e = bs_european(30.0, 33.0, R, 0.2, 2.0, Family::Put).unwrap();
        assert!(t.price > e.price);
    }

    #[test]
    fn exercise_bound_separates_hold_and_exercise() {
        let b = american_exercise_bound(30.0, R, 0.2, 2.0, 500).unwrap();
        assert!(b > 30.0 && b < 45.0);
        let below = tree_price_american(&amer(Family::Put, b - 0.05), 30.0, R, 0.2, 500).unwrap();
        let above = tree_price_american(&amer(Family::Put, b + 0.05), 30.0, R, 0.2, 500).unwrap();
        assert!(!below.immediate_exercise);
        assert!(above.immediate_exercise);
    }

    #[test]
    fn basket_and_asian_are_rejected() {
        let asian = OptionSpec::new(Family::Put, Style::AsianArithmetic, Underlying::Asset2, 30.0, 2.0);
        assert!(tree_price_american(&asian, 30.0, R, 0.2, 100).is_err());
    }
}
