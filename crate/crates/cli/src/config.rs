//! Run configuration: a TOML file with one level of sections and scalar
//! values, plus `key=value` overrides.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use optsel_core::market::MarketParams;
use optsel_core::pricing::PricingSettings;
use optsel_core::selection::MaturityRule;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Syntax(String),
    UnknownKey(String),
    MissingKey(String),
    BadValue { key: String, message: String },
    BadOverride(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            ConfigError::Syntax(m) => write!(f, "malformed config: {m}"),
            ConfigError::UnknownKey(k) => write!(f, "unknown key `{k}`"),
            ConfigError::MissingKey(k) => write!(f, "missing required key `{k}`"),
            ConfigError::BadValue { key, message } => write!(f, "invalid value for `{key}`: {message}"),
            ConfigError::BadOverride(o) => write!(f, "override `{o}` is not of the form key=value"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Eta,
    PutcallCurve,
    PutcallRegion,
    Straddle,
    StraddleRoll,
    BasketSurface,
    BasketRegion,
    CerSurface,
}

impl Study {
    pub const ALL: [Study; 8] = [
        Study::Eta,
        Study::PutcallCurve,
        Study::PutcallRegion,
        Study::Straddle,
        Study::StraddleRoll,
        Study::BasketSurface,
        Study::BasketRegion,
        Study::CerSurface,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::Eta => "eta",
            Study::PutcallCurve => "putcall-curve",
            Study::PutcallRegion => "putcall-region",
            Study::Straddle => "straddle",
            Study::StraddleRoll => "straddle-roll",
            Study::BasketSurface => "basket-surface",
            Study::BasketRegion => "basket-region",
            Study::CerSurface => "cer-surface",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Study::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot1 {
    Fixed,
    Optimize,
}

/// Numerical settings shared by all studies.
#[derive(Debug, Clone, PartialEq)]
pub struct Numeric {
    pub seed: u64,
    pub mc_paths: usize,
    pub cer_paths: usize,
    pub antithetic: bool,
    pub fd_bump: f64,
    pub tree_steps: usize,
    pub singular_threshold: f64,
    /// 1-based asset for one-asset studies.
    pub asset: usize,
    pub curve_points: usize,
    pub curve_min: f64,
    pub curve_max: f64,
    pub region_points: usize,
    pub ra_min: f64,
    pub ra_max: f64,
    pub rb_min: f64,
    pub rb_max: f64,
    pub slot1_mode: Slot1,
    pub slot1_strike: f64,
    pub slot1_min: f64,
    pub slot1_max: f64,
    pub slot1_points: usize,
    pub surface_points: usize,
    pub surface_min: f64,
    pub surface_max: f64,
    pub cer_points: usize,
    pub cer_min: f64,
    pub cer_max: f64,
    pub frequencies: Vec<usize>,
    pub maturity_rule: MaturityRule,
    pub roll_points: usize,
}

impl Default for Numeric {
    fn default() -> Self {
        let p = PricingSettings::default();
        Numeric {
            seed: p.seed,
            mc_paths: p.mc_paths,
            cer_paths: 100_000,
            antithetic: p.antithetic,
            fd_bump: p.fd_bump,
            tree_steps: p.tree_steps,
            singular_threshold: p.singular_threshold,
            asset: 2,
            curve_points: 100,
            curve_min: 0.05,
            curve_max: 3.0,
            region_points: 26,
            ra_min: 0.5,
            ra_max: 1.0,
            rb_min: 1.0,
            rb_max: 2.0,
            slot1_mode: Slot1::Fixed,
            slot1_strike: 40.0,
            slot1_min: 40.0,
            slot1_max: 60.0,
            slot1_points: 5,
            surface_points: 16,
            surface_min: 0.5,
            surface_max: 2.0,
            cer_points: 5,
            cer_min: 0.5,
            cer_max: 3.5,
            frequencies: vec![1, 2, 4, 10, 50, 250],
            maturity_rule: MaturityRule::RollingConstant,
            roll_points: 11,
        }
    }
}

impl Numeric {
    pub fn pricing(&self) -> PricingSettings {
        PricingSettings {
            mc_paths: self.mc_paths,
            antithetic: self.antithetic,
            seed: self.seed,
            fd_bump: self.fd_bump,
            tree_steps: self.tree_steps,
            singular_threshold: self.singular_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub study: Study,
    pub market: MarketParams,
    pub numeric: Numeric,
    pub output: PathBuf,
}

const SECTIONS: [&str; 3] = ["market", "numeric", "output"];

/// Reads `path`, applies `overrides` and resolves every setting.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    resolve(table)
}

fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverride(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::BadOverride(spec.into()));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
        }
        Some((section, name)) => {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => {
                    t.insert(name.to_string(), value);
                }
                _ => {
                    return Err(ConfigError::BadValue {
                        key: section.into(),
                        message: "expected a section".into(),
                    })
                }
            }
        }
    }
    Ok(())
}

struct Section {
    name: &'static str,
    table: Table,
}

impl Section {
    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn bad(&self, k: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            key: self.key(k),
            message: message.into(),
        }
    }

    fn f64(&mut self, k: &str, default: f64) -> Result<f64, ConfigError> {
        match self.table.remove(k) {
            None => Ok(default),
            Some(Value::Float(x)) => Ok(x),
            Some(Value::Integer(i)) => Ok(i as f64),
            Some(v) => Err(self.bad(k, format!("expected a number, got {v}"))),
        }
    }

    fn usize(&mut self, k: &str, default: usize, lo: usize, hi: usize) -> Result<usize, ConfigError> {
        let v = match self.table.remove(k) {
            None => return Ok(default),
            Some(Value::Integer(i)) => i,
            Some(v) => return Err(self.bad(k, format!("expected an integer, got {v}"))),
        };
        if v < lo as i64 || v > hi as i64 {
            return Err(self.bad(k, format!("{v} is outside [{lo}, {hi}]")));
        }
        Ok(v as usize)
    }

    fn bool(&mut self, k: &str, default: bool) -> Result<bool, ConfigError> {
        match self.table.remove(k) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(v) => Err(self.bad(k, format!("expected true or false, got {v}"))),
        }
    }

    fn string(&mut self, k: &str) -> Result<Option<String>, ConfigError> {
        match self.table.remove(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.bad(k, format!("expected a string, got {v}"))),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.table.keys().next() {
            Some(k) => Err(ConfigError::UnknownKey(self.key(k))),
            None => Ok(()),
        }
    }
}

fn section(table: &mut Table, name: &'static str) -> Result<Section, ConfigError> {
    match table.remove(name) {
        None => Ok(Section { name, table: Table::new() }),
        Some(Value::Table(t)) => {
            if let Some((k, _)) = t.iter().find(|(_, v)| matches!(v, Value::Table(_) | Value::Array(_))) {
                return Err(ConfigError::BadValue {
                    key: format!("{name}.{k}"),
                    message: "values must be scalars".into(),
                });
            }
            Ok(Section { name, table: t })
        }
        Some(_) => Err(ConfigError::BadValue {
            key: name.into(),
            message: "expected a section".into(),
        }),
    }
}

fn resolve(mut table: Table) -> Result<RunConfig, ConfigError> {
    let study = match table.remove("study") {
        None => return Err(ConfigError::MissingKey("study".into())),
        Some(Value::String(s)) => Study::parse(&s).ok_or_else(|| ConfigError::BadValue {
            key: "study".into(),
            message: format!(
                "`{s}` is not one of {}",
                Study::ALL.map(Study::name).join(", ")
            ),
        })?,
        Some(v) => {
            return Err(ConfigError::BadValue {
                key: "study".into(),
                message: format!("expected a string, got {v}"),
            })
        }
    };
    let mut sections = Vec::new();
    for name in SECTIONS {
        sections.push(section(&mut table, name)?);
    }
    if let Some(k) = table.keys().next() {
        return Err(ConfigError::UnknownKey(k.clone()));
    }
    let [mut m, mut n, mut o]: [Section; 3] = sections.try_into().ok().expect("three sections");

    let d = MarketParams::table1();
    let market = MarketParams {
        r: m.f64("r", d.r)?,
        sigma: [m.f64("sigma1", d.sigma[0])?, m.f64("sigma2", d.sigma[1])?],
        lambda: [m.f64("lambda1", d.lambda[0])?, m.f64("lambda2", d.lambda[1])?],
        rho: m.f64("rho", d.rho)?,
        gamma: m.f64("gamma", d.gamma)?,
        horizon: m.f64("horizon", d.horizon)?,
        maturity: m.f64("maturity", d.maturity)?,
        spot: [m.f64("spot1", d.spot[0])?, m.f64("spot2", d.spot[1])?],
        rolling: m.bool("rolling", d.rolling)?,
        allow_zero_vol: false,
    };
    m.finish()?;
    market.validate().map_err(|e| ConfigError::BadValue {
        key: "market".into(),
        message: e.to_string(),
    })?;

    let d = Numeric::default();
    const BIG: usize = 100_000_000;
    let numeric = Numeric {
        seed: n.usize("seed", d.seed as usize, 0, i64::MAX as usize)? as u64,
        mc_paths: n.usize("mc_paths", d.mc_paths, 100, BIG)?,
        cer_paths: n.usize("cer_paths", d.cer_paths, 100, BIG)?,
        antithetic: n.bool("antithetic", d.antithetic)?,
        fd_bump: n.f64("fd_bump", d.fd_bump)?,
        tree_steps: n.usize("tree_steps", d.tree_steps, 10, 50_000)?,
        singular_threshold: n.f64("singular_threshold", d.singular_threshold)?,
        asset: n.usize("asset", d.asset, 1, 2)?,
        curve_points: n.usize("curve_points", d.curve_points, 2, 10_000)?,
        curve_min: n.f64("curve_min", d.curve_min)?,
        curve_max: n.f64("curve_max", d.curve_max)?,
        region_points: n.usize("region_points", d.region_points, 1, 1_000)?,
        ra_min: n.f64("ra_min", d.ra_min)?,
        ra_max: n.f64("ra_max", d.ra_max)?,
        rb_min: n.f64("rb_min", d.rb_min)?,
        rb_max: n.f64("rb_max", d.rb_max)?,
        slot1_mode: match n.string("slot1_mode")?.as_deref() {
            None | Some("fixed") => Slot1::Fixed,
            Some("optimize") => Slot1::Optimize,
            Some(s) => return Err(n.bad("slot1_mode", format!("`{s}` is not fixed or optimize"))),
        },
        slot1_strike: n.f64("slot1_strike", d.slot1_strike)?,
        slot1_min: n.f64("slot1_min", d.slot1_min)?,
        slot1_max: n.f64("slot1_max", d.slot1_max)?,
        slot1_points: n.usize("slot1_points", d.slot1_points, 1, 1_000)?,
        surface_points: n.usize("surface_points", d.surface_points, 1, 1_000)?,
        surface_min: n.f64("surface_min", d.surface_min)?,
        surface_max: n.f64("surface_max", d.surface_max)?,
        cer_points: n.usize("cer_points", d.cer_points, 1, 100)?,
        cer_min: n.f64("cer_min", d.cer_min)?,
        cer_max: n.f64("cer_max", d.cer_max)?,
        frequencies: match n.string("frequencies")? {
            None => d.frequencies.clone(),
            Some(s) => parse_frequencies(&s).map_err(|m| n.bad("frequencies", m))?,
        },
        maturity_rule: match n.string("maturity_rule")?.as_deref() {
            None | Some("rolling-constant") => MaturityRule::RollingConstant,
            Some("fixed-expiry") => MaturityRule::FixedExpiry,
            Some(s) => {
                return Err(n.bad(
                    "maturity_rule",
                    format!("`{s}` is not rolling-constant or fixed-expiry"),
                ))
            }
        },
        roll_points: n.usize("roll_points", d.roll_points, 1, 10_000)?,
    };
    check_numeric(&n, &numeric)?;
    n.finish()?;

    let output = PathBuf::from(o.string("dir")?.unwrap_or_else(|| "out".into()));
    o.finish()?;

    Ok(RunConfig {
        study,
        market,
        numeric,
        output,
    })
}

fn parse_frequencies(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let f: usize = tok
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a positive integer", tok.trim()))?;
        if f == 0 || f > 10_000 {
            return Err(format!("{f} is outside [1, 10000]"));
        }
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    out.sort_unstable();
    Ok(out)
}

fn check_numeric(sec: &Section, n: &Numeric) -> Result<(), ConfigError> {
    let positive = |k: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(sec.bad(k, format!("{v} must be positive and finite")))
        }
    };
    let ordered = |lo_key: &str, lo: f64, hi: f64| {
        if lo <= hi {
            Ok(())
        } else {
            Err(sec.bad(lo_key, format!("{lo} exceeds the upper bound {hi}")))
        }
    };
    if !(n.fd_bump > 0.0 && n.fd_bump < 0.1) {
        return Err(sec.bad("fd_bump", "must lie in (0, 0.1)"));
    }
    if !(n.singular_threshold > 0.0 && n.singular_threshold < 1.0) {
        return Err(sec.bad("singular_threshold", "must lie in (0, 1)"));
    }
    for (k, v) in [
        ("curve_min", n.curve_min),
        ("curve_max", n.curve_max),
        ("ra_min", n.ra_min),
        ("slot1_strike", n.slot1_strike),
        ("slot1_min", n.slot1_min),
        ("surface_min", n.surface_min),
        ("surface_max", n.surface_max),
        ("cer_min", n.cer_min),
        ("cer_max", n.cer_max),
    ] {
        positive(k, v)?;
    }
    ordered("curve_min", n.curve_min, n.curve_max)?;
    ordered("ra_min", n.ra_min, n.ra_max)?;
    ordered("rb_min", n.rb_min, n.rb_max)?;
    ordered("slot1_min", n.slot1_min, n.slot1_max)?;
    ordered("surface_min", n.surface_min, n.surface_max)?;
    ordered("cer_min", n.cer_min, n.cer_max)?;
    if n.ra_max > 1.0 {
        return Err(sec.bad("ra_max", "put floors are at most the spot (ratio ≤ 1)"));
    }
    if n.rb_min.is_nan() || n.rb_min < 1.0 || !n.rb_max.is_finite() {
        return Err(sec.bad("rb_min", "call caps are at least the spot (ratio ≥ 1)"));
    }
    Ok(())
}

/// Resolved settings as TOML, keys in a fixed order.
pub fn dump(cfg: &RunConfig) -> String {
    let m = &cfg.market;
    let n = &cfg.numeric;
    let mut s = String::new();
    let _ = writeln!(s, "study = \"{}\"", cfg.study.name());
    let _ = writeln!(s, "\n[market]");
    for (k, v) in [
        ("r", m.r),
        ("sigma1", m.sigma[0]),
        ("sigma2", m.sigma[1]),
        ("lambda1", m.lambda[0]),
        ("lambda2", m.lambda[1]),
        ("rho", m.rho),
        ("gamma", m.gamma),
        ("horizon", m.horizon),
        ("maturity", m.maturity),
        ("spot1", m.spot[0]),
        ("spot2", m.spot[1]),
    ] {
        let _ = writeln!(s, "{k} = {v:?}");
    }
    let _ = writeln!(s, "rolling = {}", m.rolling);
    let _ = writeln!(s, "\n[numeric]");
    let ints = [
        ("seed", n.seed as usize),
        ("mc_paths", n.mc_paths),
        ("cer_paths", n.cer_paths),
        ("tree_steps", n.tree_steps),
        ("asset", n.asset),
        ("curve_points", n.curve_points),
        ("region_points", n.region_points),
        ("slot1_points", n.slot1_points),
        ("surface_points", n.surface_points),
        ("cer_points", n.cer_points),
        ("roll_points", n.roll_points),
    ];
    for (k, v) in ints {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "antithetic = {}", n.antithetic);
    for (k, v) in [
        ("fd_bump", n.fd_bump),
        ("singular_threshold", n.singular_threshold),
        ("curve_min", n.curve_min),
        ("curve_max", n.curve_max),
        ("ra_min", n.ra_min),
        ("ra_max", n.ra_max),
        ("rb_min", n.rb_min),
        ("rb_max", n.rb_max),
        ("slot1_strike", n.slot1_strike),
        ("slot1_min", n.slot1_min),
        ("slot1_max", n.slot1_max),
        ("surface_min", n.surface_min),
        ("surface_max", n.surface_max),
        ("cer_min", n.cer_min),
        ("cer_max", n.cer_max),
    ] {
        let _ = writeln!(s, "{k} = {v:?}");
    }
    let mode = match n.slot1_mode {
        Slot1::Fixed => "fixed",
        Slot1::Optimize => "optimize",
    };
    let _ = writeln!(s, "slot1_mode = \"{mode}\"");
    let freqs: Vec<String> = n.frequencies.iter().map(|f| f.to_string()).collect();
    let _ = writeln!(s, "frequencies = \"{}\"", freqs.join(","));
    let rule = match n.maturity_rule {
        MaturityRule::RollingConstant => "rolling-constant",
        MaturityRule::FixedExpiry => "fixed-expiry",
    };
    let _ = writeln!(s, "maturity_rule = \"{rule}\"");
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {:?}", cfg.output.display().to_string());
    s
}
