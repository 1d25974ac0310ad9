//! Classification of the multiplier `f ↦ e^{iq(x)} f` (degree-`m` real
//! polynomial `q`) and of the propagator `e^{-itp(D)}` on the Gelfand-Shilov
//! spaces `S_θ^s` (Roumieu) and `Σ_θ^s` (Beurling), by exact rational
//! comparisons in the `(θ, s)` quadrant.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use rug::Rational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{format_rational, parse_rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Space {
    Roumieu,
    Beurling,
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "roumieu" => Ok(Space::Roumieu),
            "beurling" => Ok(Space::Beurling),
            _ => Err(Error::InvalidArgument(format!("space `{s}`: expected roumieu or beurling"))),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Roumieu => "roumieu",
            Space::Beurling => "beurling",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    GeneralPolynomial,
    /// `q(x) = c·x^m`.
    PureMonomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Operator {
    Multiplier,
    Propagator,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WedgeQuery {
    pub theta: Rational,
    pub s: Rational,
    pub m: u32,
    pub space: Space,
    /// Only `d = 1` activates the discontinuity rules.
    pub d: u32,
    pub mode: Mode,
    pub operator: Operator,
    /// Propagator only: `false` means `t = 0`.
    pub t_nonzero: bool,
}

impl WedgeQuery {
    /// Multiplier query in dimension one for a general polynomial.
    pub fn new(theta: Rational, s: Rational, m: u32, space: Space) -> Result<Self> {
        if theta <= 0 || s <= 0 {
            return Err(Error::InvalidArgument("θ and s must be positive".into()));
        }
        if m < 2 {
            return Err(Error::DegreeTooSmall(m));
        }
        Ok(WedgeQuery { theta, s, m, space, d: 1, mode: Mode::GeneralPolynomial, operator: Operator::Multiplier, t_nonzero: false })
    }

    pub fn parse(theta: &str, s: &str, m: u32, space: Space) -> Result<Self> {
        Self::new(parse_rational(theta)?, parse_rational(s)?, m, space)
    }

    pub fn dimension(mut self, d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        self.d = d;
        Ok(self)
    }

    pub fn monomial(mut self) -> Self {
        self.mode = Mode::PureMonomial;
        self
    }

    pub fn propagator(mut self, t_nonzero: bool) -> Self {
        self.operator = Operator::Propagator;
        self.t_nonzero = t_nonzero;
        self
    }

    fn swapped(&self) -> Self {
        WedgeQuery { theta: self.s.clone(), s: self.theta.clone(), operator: Operator::Multiplier, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Continuous,
    NotContinuous,
    TrivialSpace,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Continuous => "Continuous",
            Verdict::NotContinuous => "NotContinuous",
            Verdict::TrivialSpace => "TrivialSpace",
            Verdict::Unknown => "Unknown",
        })
    }
}

/// The individual decision rules, in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    TrivialRoumieu,
    TrivialBeurling,
    ContinuityWedge,
    BeurlingExcludedPoint,
    DiscontinuityRoumieu,
    DiscontinuityBeurling,
    MonomialCriterion,
    IdentityPropagator,
}

impl Rule {
    pub fn citation(&self) -> &'static str {
        match self {
            Rule::TrivialRoumieu => "trivial-space-roumieu",
            Rule::TrivialBeurling => "trivial-space-beurling",
            Rule::ContinuityWedge => "continuity-wedge",
            Rule::BeurlingExcludedPoint => "beurling-excluded-point",
            Rule::DiscontinuityRoumieu => "discontinuity-roumieu",
            Rule::DiscontinuityBeurling => "discontinuity-beurling",
            Rule::MonomialCriterion => "monomial-multiplier-criterion",
            Rule::IdentityPropagator => "identity-propagator",
        }
    }

    fn verdict(&self) -> Verdict {
        match self {
            Rule::TrivialRoumieu | Rule::TrivialBeurling => Verdict::TrivialSpace,
            Rule::ContinuityWedge | Rule::IdentityPropagator => Verdict::Continuous,
            Rule::BeurlingExcludedPoint => Verdict::Unknown,
            Rule::DiscontinuityRoumieu | Rule::DiscontinuityBeurling | Rule::MonomialCriterion => Verdict::NotContinuous,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WedgeVerdict {
    pub verdict: Verdict,
    /// Rule identifier; empty when no rule decided the point.
    pub citation: String,
    pub boundary_excluded: bool,
}

impl WedgeVerdict {
    fn from_rule(rule: Option<Rule>) -> Self {
        match rule {
            Some(r) => WedgeVerdict {
                verdict: r.verdict(),
                citation: r.citation().to_string(),
                boundary_excluded: r == Rule::BeurlingExcludedPoint,
            },
            None => WedgeVerdict { verdict: Verdict::Unknown, citation: String::new(), boundary_excluded: false },
        }
    }
}

impl fmt::Display for WedgeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.verdict)?;
        if !self.citation.is_empty() {
            write!(f, " ({})", self.citation)?;
        }
        if self.boundary_excluded {
            f.write_str(" [boundary excluded]")?;
        }
        Ok(())
    }
}

fn max_one(theta: &Rational) -> Rational {
    if *theta > 1 {
        theta.clone()
    } else {
        Rational::from(1)
    }
}

/// Every rule whose predicate holds at the multiplier query, ignoring order.
pub fn rule_hits(q: &WedgeQuery) -> Vec<Rule> {
    let (theta, s, m) = (&q.theta, &q.s, q.m);
    let mut hits = Vec::new();
    let sum = Rational::from(theta + s);
    match q.space {
        Space::Roumieu if sum < 1 => hits.push(Rule::TrivialRoumieu),
        Space::Beurling if sum <= 1 => hits.push(Rule::TrivialBeurling),
        _ => {}
    }
    let wedge_edge = Rational::from(theta * (m - 1));
    if *s >= wedge_edge && wedge_edge >= 1 {
        let excluded = q.space == Space::Beurling && wedge_edge == 1 && *s == 1;
        hits.push(if excluded { Rule::BeurlingExcludedPoint } else { Rule::ContinuityWedge });
    }
    if q.d == 1 {
        let upper = Rational::from(theta * m) - max_one(theta);
        match q.space {
            Space::Roumieu if *s >= 1 && *s < upper && (m != 3 || *theta >= 1) => hits.push(Rule::DiscontinuityRoumieu),
            Space::Beurling if *s > 1 && *s < upper && (m != 3 || *theta > 1) => hits.push(Rule::DiscontinuityBeurling),
            _ => {}
        }
        if q.mode == Mode::PureMonomial && *s > 0 && *s < wedge_edge && Rational::from(theta * m) >= 2 {
            hits.push(Rule::MonomialCriterion);
        }
    }
    hits
}

/// First matching rule in the order: trivial space, continuity wedge (with the
/// excluded Beurling point), discontinuity, monomial criterion; otherwise
/// `Unknown` with an empty citation.
pub fn classify_multiplier(q: &WedgeQuery) -> WedgeVerdict {
    WedgeVerdict::from_rule(rule_hits(q).into_iter().next())
}

/// `t = 0` gives the identity; otherwise the multiplier verdict at `(s, θ)`.
pub fn classify_propagator(q: &WedgeQuery) -> WedgeVerdict {
    if !q.t_nonzero {
        return WedgeVerdict::from_rule(Some(Rule::IdentityPropagator));
    }
    classify_multiplier(&q.swapped())
}

/// Dispatches on `q.operator`.
pub fn classify(q: &WedgeQuery) -> WedgeVerdict {
    match q.operator {
        Operator::Multiplier => classify_multiplier(q),
        Operator::Propagator => classify_propagator(q),
    }
}

fn is_continuity(r: Rule) -> bool {
    matches!(r, Rule::ContinuityWedge | Rule::IdentityPropagator)
}

fn is_discontinuity(r: Rule) -> bool {
    r.verdict() == Verdict::NotContinuous
}

/// Queries where both a continuity and a discontinuity rule hold.
pub fn disjointness_conflicts(queries: &[WedgeQuery]) -> Vec<WedgeQuery> {
    queries
        .par_iter()
        .filter(|q| {
            let hits = rule_hits(q);
            hits.iter().any(|r| is_continuity(*r)) && hits.iter().any(|r| is_discontinuity(*r))
        })
        .cloned()
        .collect()
}

/// Closed rational ranges `lo, lo+step, ... <= hi`, skipping non-positive values.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGrid {
    pub theta_lo: Rational,
    pub theta_hi: Rational,
    pub theta_step: Rational,
    pub s_lo: Rational,
    pub s_hi: Rational,
    pub s_step: Rational,
}

impl RegionGrid {
    /// `(0, 2] × (0, 4]` in steps of `1/20`.
    pub fn standard() -> Self {
        RegionGrid {
            theta_lo: Rational::new(),
            theta_hi: Rational::from(2),
            theta_step: Rational::from((1, 20)),
            s_lo: Rational::new(),
            s_hi: Rational::from(4),
            s_step: Rational::from((1, 20)),
        }
    }

    fn axis(lo: &Rational, hi: &Rational, step: &Rational) -> Result<Vec<Rational>> {
        if *step <= 0 || lo > hi || *hi <= 0 {
            return Err(Error::InvalidArgument("region grid needs positive ranges and steps".into()));
        }
        let mut out = Vec::new();
        let mut v = lo.clone();
        while v <= *hi {
            if v > 0 {
                out.push(v.clone());
            }
            v += step;
        }
        Ok(out)
    }

    pub fn thetas(&self) -> Result<Vec<Rational>> {
        Self::axis(&self.theta_lo, &self.theta_hi, &self.theta_step)
    }

    pub fn ss(&self) -> Result<Vec<Rational>> {
        Self::axis(&self.s_lo, &self.s_hi, &self.s_step)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionCell {
    pub theta: Rational,
    pub s: Rational,
    pub verdict: WedgeVerdict,
}

/// Multiplier verdicts on the grid, θ-major, in increasing order.
pub fn region_cells(m: u32, space: Space, mode: Mode, grid: &RegionGrid) -> Result<Vec<RegionCell>> {
    if m < 2 {
        return Err(Error::DegreeTooSmall(m));
    }
    let thetas = grid.thetas()?;
    let ss = grid.ss()?;
    let pairs: Vec<(Rational, Rational)> =
        thetas.iter().flat_map(|t| ss.iter().map(move |s| (t.clone(), s.clone()))).collect();
    Ok(pairs
        .into_par_iter()
        .map(|(theta, s)| {
            let mut q = WedgeQuery::new(theta.clone(), s.clone(), m, space).expect("positive grid values");
            q.mode = mode;
            let verdict = classify_multiplier(&q);
            RegionCell { theta, s, verdict }
        })
        .collect())
}

pub fn write_region_csv<W: Write>(cells: &[RegionCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "s", "verdict", "citation"])?;
    for c in cells {
        w.write_record([
            format_rational(&c.theta),
            format_rational(&c.s),
            c.verdict.verdict.to_string(),
            c.verdict.citation.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn colour(v: Verdict) -> &'static str {
    match v {
        Verdict::Continuous => "#4caf50",
        Verdict::NotContinuous => "#e53935",
        Verdict::TrivialSpace => "#9e9e9e",
        Verdict::Unknown => "#fff59d",
    }
}

/// Cells as coloured rectangles, the lines `s = (m-1)θ` and `s = mθ - 1`,
/// and an open circle at `(1/(m-1), 1)` for the Beurling space.
pub fn write_region_svg<W: Write>(cells: &[RegionCell], m: u32, space: Space, grid: &RegionGrid, mut out: W) -> Result<()> {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 40.0;
    let tmax = grid.theta_hi.to_f64();
    let smax = grid.s_hi.to_f64();
    let tstep = grid.theta_step.to_f64();
    let sstep = grid.s_step.to_f64();
    let sx = |t: f64| PAD + t / tmax * SIZE;
    let sy = |s: f64| PAD + SIZE - s / smax * SIZE;
    let total = SIZE + 2.0 * PAD;
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total:.0}" height="{total:.0}" viewBox="0 0 {total:.0} {total:.0}">"#)?;
    writeln!(out, r#"<title>m={m} {space}</title>"#)?;
    let (cw, ch) = (tstep / tmax * SIZE, sstep / smax * SIZE);
    for c in cells {
        let (t, s) = (c.theta.to_f64(), c.s.to_f64());
        writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{cw:.3}" height="{ch:.3}" fill="{}"/>"#,
            sx(t - tstep / 2.0),
            sy(s + sstep / 2.0),
            colour(c.verdict.verdict)
        )?;
    }
    let mf = f64::from(m);
    // s = (m-1)θ and s = mθ - 1, clipped to the plotted box.
    for (slope, icpt) in [(mf - 1.0, 0.0), (mf, -1.0)] {
        let t0 = if icpt < 0.0 { -icpt / slope } else { 0.0 };
        let t1 = tmax.min((smax - icpt) / slope);
        writeln!(
            out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="1.5"/>"#,
            sx(t0),
            sy(slope * t0 + icpt),
            sx(t1),
            sy(slope * t1 + icpt)
        )?;
    }
    if space == Space::Beurling {
        writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="5" fill="white" stroke="black" stroke-width="1.5"/>"#,
            sx(1.0 / (mf - 1.0)),
            sy(1.0)
        )?;
    }
    writeln!(out, r#"<rect x="{PAD:.0}" y="{PAD:.0}" width="{SIZE:.0}" height="{SIZE:.0}" fill="none" stroke="black"/>"#)?;
    writeln!(out, r#"<text x="{:.0}" y="{:.0}" text-anchor="middle">θ</text>"#, PAD + SIZE / 2.0, total - 8.0)?;
    writeln!(out, r#"<text x="12" y="{:.0}" text-anchor="middle">s</text>"#, PAD + SIZE / 2.0)?;
    writeln!(out, "</svg>")?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureFormat {
    Csv,
    Svg,
}

impl FromStr for FigureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FigureFormat::Csv),
            "svg" => Ok(FigureFormat::Svg),
            _ => Err(Error::InvalidArgument(format!("format `{s}`: expected csv or svg"))),
        }
    }
}

pub fn emit_region_grid<W: Write>(m: u32, space: Space, mode: Mode, grid: &RegionGrid, format: FigureFormat, out: W) -> Result<()> {
    let cells = region_cells(m, space, mode, grid)?;
    match format {
        FigureFormat::Csv => write_region_csv(&cells, out),
        FigureFormat::Svg => write_region_svg(&cells, m, space, grid, out),
    }
}
