//! Runs one configured study and renders its artifacts in memory.

use std::fmt;
use std::fmt::Write as _;

use optsel_core::allocation::{merton_eta, value_function};
use optsel_core::csv::{fmt_f64, row};
use optsel_core::evaluation::{cer_strike_surface, rolling_straddle_cer, CerReport, CerSettings, CerStudy};
use optsel_core::numerics::lin_space;
use optsel_core::pricing::{Family, PricingContext, Style};
use optsel_core::selection::{
    basket_l1_surface, basket_region_map, putcall_region_map, select_straddle, straddle_ratio_path,
    strike_curve, BasketSurfacePoint, Candidate, RegionMap, Slot1Mode, StrikeBounds, ONE_ASSET_FAMILIES,
};

use crate::config::{RunConfig, Slot1, Study};

/// Numeric failure inside a study, tagged with the module that raised it.
#[derive(Debug)]
pub struct StudyError {
    pub module: &'static str,
    pub source: optsel_core::Error,
}

impl fmt::Display for StudyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.source)
    }
}

impl std::error::Error for StudyError {}

trait Tag<T> {
    fn tag(self, module: &'static str) -> Result<T, StudyError>;
}

impl<T> Tag<T> for optsel_core::Result<T> {
    fn tag(self, module: &'static str) -> Result<T, StudyError> {
        self.map_err(|source| StudyError { module, source })
    }
}

const PRICING: &str = "pricing_engine";
const ALLOCATION: &str = "allocation_engine";
const SELECTION: &str = "selection_engine";
const EVALUATION: &str = "evaluation";

/// Artifacts of one study: named CSV files and summary lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyOutput {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

impl StudyOutput {
    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) {
        let mut body = String::from(header);
        body.push('\n');
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        self.files.push((name.to_string(), body));
    }

    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }
}

pub fn run_study(cfg: &RunConfig) -> Result<StudyOutput, StudyError> {
    let params = cfg.market;
    let eta = merton_eta(&params).tag(ALLOCATION)?;
    let vf = value_function(&params, 0.0, 1.0).tag(ALLOCATION)?;
    let mut out = StudyOutput::default();
    out.line(format!("study: {}", cfg.study.name()));
    out.line(format!("eta*: ({:.6}, {:.6})", eta.eta[0], eta.eta[1]));
    out.line(format!("theoretical CER*: {:.6}", vf.cer));
    out.line(format!("incomplete-market CER: {:.6}", vf.incomplete_cer));

    let ctx = || PricingContext::new(params, cfg.numeric.pricing()).tag(PRICING);
    let n = &cfg.numeric;
    let asset = n.asset - 1;
    let spot = params.spot[asset];
    match cfg.study {
        Study::Eta => {
            out.csv(
                "eta.csv",
                "eta1,eta2,cer,incomplete_cer",
                [row([fmt_f64(eta.eta[0]), fmt_f64(eta.eta[1]), fmt_f64(vf.cer), fmt_f64(vf.incomplete_cer)])],
            );
        }
        Study::PutcallCurve => {
            let ctx = ctx()?;
            let strikes = lin_space(n.curve_min * spot, n.curve_max * spot, n.curve_points);
            let c = strike_curve(asset, &ONE_ASSET_FAMILIES, &strikes, &ctx, &eta).tag(SELECTION)?;
            summarize_curve(&mut out, &c, asset);
            out.csv("putcall_curve.csv", Candidate::CURVE_HEADER, c.iter().map(|x| x.curve_row(asset)));
        }
        Study::PutcallRegion => {
            let ctx = ctx()?;
            let (ra, rb) = ratio_grids(cfg);
            let map = putcall_region_map(asset, &ra, &rb, &ONE_ASSET_FAMILIES, &ctx, &eta).tag(SELECTION)?;
            summarize_region(&mut out, &map);
            out.files.push(("putcall_region.csv".into(), map.to_csv()));
        }
        Study::Straddle => {
            let ctx = ctx()?;
            let styles = [Style::European, Style::AsianArithmetic, Style::American];
            let mut rows = Vec::new();
            for style in styles {
                let s = select_straddle(asset, style, &ctx, &eta).tag(SELECTION)?;
                let w = &s.outcome;
                out.line(format!(
                    "{} straddle: A = {:.4}, B = {}, optimal K = {:.4} (K/S = {:.4}), l1 = {:.6}",
                    style_name(style),
                    s.exclusion_strike,
                    s.exercise_bound.map_or("none".into(), |b| format!("{b:.4}")),
                    w.winner.strike,
                    w.winner.strike / spot,
                    w.achieved_l1,
                ));
                rows.push(row([
                    style_name(style).to_string(),
                    fmt_f64(s.exclusion_strike),
                    fmt_f64(s.exercise_bound.unwrap_or(f64::NAN)),
                    fmt_f64(s.left.spec.strike),
                    fmt_f64(s.left.f[asset]),
                    fmt_f64(s.right.as_ref().map_or(f64::NAN, |r| r.spec.strike)),
                    fmt_f64(s.right.as_ref().map_or(f64::NAN, |r| r.f[asset])),
                    fmt_f64(w.winner.strike),
                    fmt_f64(w.achieved_l1),
                ]));
            }
            out.csv(
                "straddle.csv",
                "style,exclusion_strike,exercise_bound,left_strike,left_f,right_strike,right_f,winner_strike,l1",
                rows,
            );
            let strikes = lin_space(n.curve_min * spot, n.curve_max * spot, n.curve_points);
            let fams: Vec<(Family, Style)> = styles.iter().map(|&s| (Family::Straddle, s)).collect();
            let c = strike_curve(asset, &fams, &strikes, &ctx, &eta).tag(SELECTION)?;
            out.csv("straddle_curve.csv", Candidate::CURVE_HEADER, c.iter().map(|x| x.curve_row(asset)));
        }
        Study::StraddleRoll => {
            let times = lin_space(0.0, params.horizon, n.roll_points);
            let mut rows = Vec::new();
            for a in 0..2 {
                let path = straddle_ratio_path(a, &params, &times, n.maturity_rule).tag(SELECTION)?;
                out.line(format!(
                    "asset {} optimal K/S: {:.4} at t = 0, {:.4} at t = {}",
                    a + 1,
                    path[0].ratio,
                    path[path.len() - 1].ratio,
                    path[path.len() - 1].t
                ));
                rows.extend(path.iter().map(|p| {
                    row([
                        (a + 1).to_string(),
                        fmt_f64(p.t),
                        fmt_f64(p.ttm),
                        fmt_f64(p.ratio),
                        fmt_f64(p.f),
                    ])
                }));
            }
            out.csv("straddle_ratio.csv", "asset,t,ttm,ratio,f", rows);
            let study = rolling_straddle_cer(&n.frequencies, &params, &cer_settings(cfg)).tag(EVALUATION)?;
            let reports = collect_reports(&study)?;
            for r in &reports {
                out.line(format!("rolling straddle CER at {}/yr: {:.6} ± {:.6}", r.frequency, r.cer, r.std_err));
                warn(&mut out, r);
            }
            out.csv("straddle_cer.csv", CerReport::CSV_HEADER, reports.iter().map(CerReport::csv_row));
        }
        Study::BasketSurface => {
            let ctx = ctx()?;
            let basket = params.spot[0] + params.spot[1];
            let k1 = lin_space(n.surface_min * params.spot[0], n.surface_max * params.spot[0], n.surface_points);
            let k2 = lin_space(n.surface_min * basket, n.surface_max * basket, n.surface_points);
            let mut rows = Vec::new();
            for family in [Family::BasketCall, Family::BasketPut] {
                let s = basket_l1_surface(&k1, &k2, family, Style::European, &ctx, &eta).tag(SELECTION)?;
                if let Some(best) = s.iter().filter(|p| p.l1.is_finite()).min_by(|a, b| a.l1.total_cmp(&b.l1)) {
                    out.line(format!(
                        "{} minimum l1 {:.6} at K1 = {:.4}, K2 = {:.4}",
                        family_name(family),
                        best.l1,
                        best.k1,
                        best.k2
                    ));
                }
                rows.extend(s.iter().map(|p| p.csv_row(family, Style::European)));
            }
            out.csv("basket_surface.csv", BasketSurfacePoint::CSV_HEADER, rows);
        }
        Study::BasketRegion => {
            let ctx = ctx()?;
            let (ra, rb) = ratio_grids(cfg);
            let mode = match n.slot1_mode {
                Slot1::Fixed => Slot1Mode::Fixed(n.slot1_strike),
                Slot1::Optimize => Slot1Mode::Optimize {
                    bounds: StrikeBounds::new(n.slot1_min, n.slot1_max).tag(SELECTION)?,
                    points: n.slot1_points,
                },
            };
            let map = basket_region_map(&ra, &rb, mode, &ctx, &eta).tag(SELECTION)?;
            summarize_region(&mut out, &map);
            out.files.push(("basket_region.csv".into(), map.to_csv()));
        }
        Study::CerSurface => {
            let k1 = lin_space(n.cer_min * params.spot[0], n.cer_max * params.spot[0], n.cer_points);
            let k2 = lin_space(n.cer_min * params.spot[1], n.cer_max * params.spot[1], n.cer_points);
            let study = cer_strike_surface(
                &k1,
                &k2,
                [Family::Call, Family::Call],
                &n.frequencies,
                &params,
                &cer_settings(cfg),
            )
            .tag(EVALUATION)?;
            let reports = collect_reports(&study)?;
            if let Some(best) = reports.iter().max_by(|a, b| a.cer.total_cmp(&b.cer)) {
                out.line(format!(
                    "best CER {:.6} at K = ({:.4}, {:.4}), {}/yr",
                    best.cer, best.composition[0].strike, best.composition[1].strike, best.frequency
                ));
            }
            for r in &reports {
                warn(&mut out, r);
            }
            out.csv("cer_surface.csv", CerReport::CSV_HEADER, reports.iter().map(CerReport::csv_row));
        }
    }
    Ok(out)
}

fn cer_settings(cfg: &RunConfig) -> CerSettings {
    CerSettings {
        n_paths: cfg.numeric.cer_paths,
        seed: cfg.numeric.seed,
        antithetic: cfg.numeric.antithetic,
    }
}

fn collect_reports(study: &CerStudy) -> Result<Vec<CerReport>, StudyError> {
    study.reports.iter().cloned().map(|r| r.tag(EVALUATION)).collect()
}

fn warn(out: &mut StudyOutput, r: &CerReport) {
    if let Some(w) = &r.warning {
        out.line(format!("warning at {}/yr: {w}", r.frequency));
    }
}

fn ratio_grids(cfg: &RunConfig) -> (Vec<f64>, Vec<f64>) {
    let n = &cfg.numeric;
    (
        lin_space(n.ra_min, n.ra_max, n.region_points),
        lin_space(n.rb_min, n.rb_max, n.region_points),
    )
}

fn summarize_curve(out: &mut StudyOutput, c: &[Candidate], asset: usize) {
    for (family, style) in ONE_ASSET_FAMILIES {
        let best = c
            .iter()
            .filter(|x| x.spec.family == family && x.spec.style == style && x.is_admissible())
            .max_by(|a, b| a.f[asset].abs().total_cmp(&b.f[asset].abs()));
        if let Some(b) = best {
            out.line(format!(
                "{} {}: smallest |pi| {:.6} at K = {:.4}",
                style_name(style),
                family_name(family),
                b.pi.abs(),
                b.spec.strike
            ));
        }
    }
}

fn summarize_region(out: &mut StudyOutput, map: &RegionMap) {
    for (winner, count) in map.tally() {
        out.line(format!("winner {winner}: {count} cells"));
    }
}

fn style_name(s: Style) -> &'static str {
    match s {
        Style::European => "european",
        Style::AsianArithmetic => "asian",
        Style::American => "american",
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Call => "call",
        Family::Put => "put",
        Family::Straddle => "straddle",
        Family::BasketCall => "basket-call",
        Family::BasketPut => "basket-put",
    }
}

/// Summary text as written to `summary.txt`.
pub fn summary_text(out: &StudyOutput) -> String {
    let mut s = String::new();
    for l in &out.summary {
        let _ = writeln!(s, "{l}");
    }
    s
}
