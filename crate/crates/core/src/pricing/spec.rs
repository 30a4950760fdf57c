use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default number of averaging dates for Asian styles.
pub const DEFAULT_MONITORING: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Call,
    Put,
    Straddle,
    BasketCall,
    BasketPut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Style {
    European,
    AsianArithmetic,
    American,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Underlying {
    Asset1,
    Asset2,
    /// Equal-weight sum `S⁽¹⁾ + S⁽²⁾`.
    Basket,
}

impl Underlying {
    pub fn asset(index: usize) -> Self {
        if index == 0 {
            Underlying::Asset1
        } else {
            Underlying::Asset2
        }
    }

    pub fn asset_index(self) -> Option<usize> {
        match self {
            Underlying::Asset1 => Some(0),
            Underlying::Asset2 => Some(1),
            Underlying::Basket => None,
        }
    }
}

impl Family {
    pub fn is_basket(self) -> bool {
        matches!(self, Family::BasketCall | Family::BasketPut)
    }

    pub fn is_call_like(self) -> bool {
        matches!(self, Family::Call | Family::BasketCall)
    }

    fn token(self) -> &'static str {
        match self {
            Family::Call => "call",
            Family::Put => "put",
            Family::Straddle => "straddle",
            Family::BasketCall => "basket-call",
            Family::BasketPut => "basket-put",
        }
    }
}

impl Style {
    fn token(self) -> &'static str {
        match self {
            Style::European => "european",
            Style::AsianArithmetic => "asian",
            Style::American => "american",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Style::European => "euro",
            Style::AsianArithmetic => "asian",
            Style::American => "amer",
        }
    }
}

impl Underlying {
    fn token(self) -> &'static str {
        match self {
            Underlying::Asset1 => "asset-1",
            Underlying::Asset2 => "asset-2",
            Underlying::Basket => "basket",
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "call" => Family::Call,
            "put" => Family::Put,
            "straddle" => Family::Straddle,
            "basket-call" => Family::BasketCall,
            "basket-put" => Family::BasketPut,
            other => return Err(Error::Parse(format!("unknown family `{other}`"))),
        })
    }
}

impl FromStr for Style {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "european" => Style::European,
            "asian" => Style::AsianArithmetic,
            "american" => Style::American,
            other => return Err(Error::Parse(format!("unknown style `{other}`"))),
        })
    }
}

impl FromStr for Underlying {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "asset-1" => Underlying::Asset1,
            "asset-2" => Underlying::Asset2,
            "basket" => Underlying::Basket,
            other => return Err(Error::Parse(format!("unknown underlying `{other}`"))),
        })
    }
}

/// One derivative contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub family: Family,
    pub style: Style,
    pub underlying: Underlying,
    pub strike: f64,
    /// Time to maturity in years.
    pub ttm: f64,
    /// Equally spaced averaging dates in `(t, t + ttm]`; used by Asian styles only.
    pub monitoring: u32,
}

impl OptionSpec {
    pub fn new(family: Family, style: Style, underlying: Underlying, strike: f64, ttm: f64) -> Self {
        OptionSpec {
            family,
            style,
            underlying,
            strike,
            ttm,
            monitoring: DEFAULT_MONITORING,
        }
    }

    /// The stock itself, represented as a zero-strike European call.
    pub fn stock(underlying: Underlying, ttm: f64) -> Self {
        OptionSpec::new(Family::Call, Style::European, underlying, 0.0, ttm)
    }

    pub fn with_strike(self, strike: f64) -> Self {
        OptionSpec { strike, ..self }
    }

    pub fn with_ttm(self, ttm: f64) -> Self {
        OptionSpec { ttm, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike >= 0.0) || !self.strike.is_finite() {
            return Err(Error::param("strike", self.strike, "must be finite and non-negative"));
        }
        if !(self.ttm > 0.0) || !self.ttm.is_finite() {
            return Err(Error::param("ttm", self.ttm, "must be positive"));
        }
        if self.family.is_basket() != (self.underlying == Underlying::Basket) {
            return Err(Error::Parse(format!(
                "{self}: basket families require the basket underlying and vice versa"
            )));
        }
        if self.family.is_basket() && self.style == Style::American {
            return Err(Error::Unsupported(format!(
                "{self}: American basket options are not supported"
            )));
        }
        if self.style == Style::AsianArithmetic && self.monitoring == 0 {
            return Err(Error::param("monitoring", 0.0, "Asian options need at least one date"));
        }
        Ok(())
    }

    /// Short label such as `asian-call` or `basket-put`, used in region maps.
    pub fn tag(&self) -> String {
        match self.family {
            Family::BasketCall | Family::BasketPut => self.family.token().to_string(),
            f => format!("{}-{}", self.style.short(), f.token()),
        }
    }

    /// Colon-separated form for embedding in a single CSV field.
    pub fn compact(&self) -> String {
        self.to_string().replace(',', ":")
    }
}

/// Record form `family,style,underlying,strike,ttm,monitoring`.
impl fmt::Display for OptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.family.token(),
            self.style.token(),
            self.underlying.token(),
            self.strike,
            self.ttm,
            self.monitoring
        )
    }
}

impl FromStr for OptionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.trim().split([',', ':']).collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!(
                "expected 6 fields `family,style,underlying,strike,ttm,monitoring`, got `{s}`"
            )));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad {name} `{}`", fields[i])))
        };
        let spec = OptionSpec {
            family: fields[0].parse()?,
            style: fields[1].parse()?,
            underlying: fields[2].parse()?,
            strike: num(3, "strike")?,
            ttm: num(4, "ttm")?,
            monitoring: fields[5]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad monitoring `{}`", fields[5])))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_spec() -> impl Strategy<Value = OptionSpec> {
        let one_asset = (
            prop_oneof![Just(Family::Call), Just(Family::Put), Just(Family::Straddle)],
            prop_oneof![
                Just(Style::European),
                Just(Style::AsianArithmetic),
                Just(Style::American)
            ],
            prop_oneof![Just(Underlying::Asset1), Just(Underlying::Asset2)],
        );
        let basket = (
            prop_oneof![Just(Family::BasketCall), Just(Family::BasketPut)],
            prop_oneof![Just(Style::European), Just(Style::AsianArithmetic)],
            Just(Underlying::Basket),
        );
        (prop_oneof![one_asset, basket], 0.0..500.0f64, 0.01..10.0f64, 1u32..400)
            .prop_map(|((family, style, underlying), strike, ttm, monitoring)| OptionSpec {
                family,
                style,
                underlying,
                strike,
                ttm,
                monitoring,
            })
    }

    proptest! {
        #[test]
        fn record_round_trips(spec in arb_spec()) {
            let back: OptionSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
            let compact: OptionSpec = spec.compact().parse().unwrap();
            prop_assert_eq!(compact, spec);
        }
    }

    #[test]
    fn record_layout() {
        let s = OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 40.0, 2.0);
        assert_eq!(s.to_string(), "call,european,asset-1,40,2,50");
        assert_eq!(s.tag(), "euro-call");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = OptionSpec::new(Family::Call, Style::European, Underlying::Asset1, 40.0, 2.0);
        assert!(OptionSpec { strike: -1.0, ..base }.validate().is_err());
        assert!(OptionSpec { ttm: 0.0, ..base }.validate().is_err());
        assert!(OptionSpec { underlying: Underlying::Basket, ..base }.validate().is_err());
        let basket = OptionSpec::new(Family::BasketPut, Style::American, Underlying::Basket, 70.0, 2.0);
        assert!(basket.validate().is_err());
        assert!("call,european,asset-1,40".parse::<OptionSpec>().is_err());
        assert!("swap,european,asset-1,40,2,50".parse::<OptionSpec>().is_err());
    }
}
