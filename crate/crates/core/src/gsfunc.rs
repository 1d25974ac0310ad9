//! Derivative engines for `⟨x⟩^t = (1+x²)^{t/2}` and `f(x) = exp(-⟨x⟩^{1/θ})`,
//! bound verifiers built on them, and truncated seminorm estimators.
//!
//! All values are computed on outward-rounded enclosures; seminorm estimates
//! take the lower endpoint of every term, so they are certified lower bounds
//! of the true supremum.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rug::float::Round;
use rug::ops::{DivAssignRound, Pow};
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identities::{witness, CheckResult, RationalTheta};
use crate::numeric::{format_float, format_rational, ols_slope, parse_rational, Interval};

/// Smallest working precision accepted by the certified evaluators.
pub const MIN_GS_PRECISION: u32 = 128;
const MAX_RETRY_PRECISION: u32 = 1 << 15;
const RELATIVE_BITS: i32 = 64;

/// `q_k` with `∂^k ⟨x⟩^t = q_k(x)·(1+x²)^{t/2-k}`; `coeffs[i]` multiplies `x^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketDerivPoly {
    t: Rational,
    k: u32,
    coeffs: Vec<Rational>,
}

impl BracketDerivPoly {
    pub fn one(t: &Rational) -> Self {
        BracketDerivPoly { t: t.clone(), k: 0, coeffs: vec![Rational::from(1)] }
    }

    /// `q_{k+1} = q_k'·(1+x²) + (t-2k)·x·q_k`.
    pub fn next(&self) -> Self {
        let d = self.coeffs.len() - 1;
        let mut out = vec![Rational::new(); d + 2];
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            let dc = Rational::from(c * i as u32);
            out[i - 1] += &dc;
            out[i + 1] += dc;
        }
        let factor = Rational::from(&self.t - 2 * self.k);
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + 1] += Rational::from(c * &factor);
        }
        BracketDerivPoly { t: self.t.clone(), k: self.k + 1, coeffs: out }
    }

    pub fn t(&self) -> &Rational {
        &self.t
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_enclosure(&self, x: &Interval) -> Interval {
        let prec = x.prec();
        let mut acc = Interval::zero(prec);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(&Interval::from_rational(prec, c));
        }
        acc
    }

    /// Enclosure of `∂^k ⟨x⟩^t` at `x`.
    pub fn value_enclosure(&self, x: &Interval) -> Interval {
        let prec = x.prec();
        let base = Interval::point(Float::with_val(prec, 1)).add(&x.square());
        let e = Rational::from(&self.t / 2u32) - self.k;
        let weight = base.pow_rational(&e).expect("1 + x² is positive");
        self.eval_enclosure(x).mul(&weight)
    }
}

impl fmt::Display for BracketDerivPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{}", format_rational(c))?,
                1 => write!(f, "({})·x", format_rational(c))?,
                _ => write!(f, "({})·x^{i}", format_rational(c))?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

pub fn bracket_derivative(t: &Rational, k: u32) -> BracketDerivPoly {
    let mut q = BracketDerivPoly::one(t);
    for _ in 0..k {
        q = q.next();
    }
    q
}

/// `q_0, ..., q_{k_max}`.
pub fn bracket_derivatives(t: &Rational, k_max: u32) -> Vec<BracketDerivPoly> {
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(BracketDerivPoly::one(t));
    for k in 0..k_max as usize {
        let next = out[k].next();
        out.push(next);
    }
    out
}

/// Derivatives of `exp(-⟨x⟩^{1/θ})` via the Leibniz recursion
/// `f^{(k+1)} = Σ_i binom(k,i) h^{(i+1)} f^{(k-i)}`, `h = -⟨x⟩^{1/θ}`.
#[derive(Clone, Debug)]
pub struct GsEngine {
    theta: RationalTheta,
    brackets: Vec<BracketDerivPoly>,
}

impl GsEngine {
    pub fn new(theta: RationalTheta, k_max: u32) -> Self {
        let t = Rational::from((theta.q(), theta.p()));
        GsEngine { theta, brackets: bracket_derivatives(&t, k_max + 1) }
    }

    pub fn theta(&self) -> RationalTheta {
        self.theta
    }

    pub fn k_max(&self) -> u32 {
        self.brackets.len() as u32 - 2
    }

    /// Enclosures of `f^{(0)}, ..., f^{(k_max)}` at `x`.
    pub fn enclosures(&self, x: &Interval) -> Vec<Interval> {
        let k_max = self.k_max() as usize;
        let h: Vec<Interval> = self.brackets.iter().map(|q| q.value_enclosure(x).neg()).collect();
        let prec = x.prec();
        let mut f = Vec::with_capacity(k_max + 1);
        f.push(h[0].exp());
        for k in 0..k_max {
            let mut acc = Interval::zero(prec);
            for i in 0..=k {
                let b = Integer::from(Integer::binomial_u(k as u32, i as u32));
                let term = h[i + 1].mul(&f[k - i]);
                acc = acc.add(&term.mul(&Interval::from_integer(prec, &b)));
            }
            f.push(acc);
        }
        f
    }
}

fn certify_all<F>(precision_bits: u32, what: &str, mut eval: F) -> Result<Vec<Float>>
where
    F: FnMut(u32) -> Vec<Interval>,
{
    if precision_bits < MIN_GS_PRECISION {
        return Err(Error::PrecisionTooLow { got: precision_bits, min: MIN_GS_PRECISION });
    }
    let mut prec = precision_bits;
    loop {
        let encl = eval(prec);
        if encl.iter().all(|v| v.certifies_relative(RELATIVE_BITS)) {
            return Ok(encl.iter().map(|v| Float::with_val(precision_bits, v.mid())).collect());
        }
        if prec >= MAX_RETRY_PRECISION {
            return Err(Error::InsufficientPrecision {
                bits: prec,
                detail: format!("{what}: relative error 2^-{RELATIVE_BITS} not certified"),
            });
        }
        prec *= 2;
    }
}

fn point(x: &Float, prec: u32) -> Interval {
    Interval::point(Float::with_val(prec.max(x.prec()), x))
}

/// `f^{(0)}(x), ..., f^{(k_max)}(x)` for `f = exp(-⟨x⟩^{1/θ})`, each with
/// certified relative error below `2^-64`. Precision is doubled until the
/// enclosures certify.
pub fn gs_derivatives(theta: RationalTheta, k_max: u32, x: &Float, precision_bits: u32) -> Result<Vec<Float>> {
    let engine = GsEngine::new(theta, k_max);
    certify_all(precision_bits, "gs derivative", |p| engine.enclosures(&point(x, p)))
}

pub fn gs_derivative(theta: RationalTheta, k: u32, x: &Float, precision_bits: u32) -> Result<Float> {
    Ok(gs_derivatives(theta, k, x, precision_bits)?.pop().expect("k_max + 1 values"))
}

/// `∂^0 ⟨x⟩^t, ..., ∂^{k_max} ⟨x⟩^t` at `x`, certified like [`gs_derivatives`].
pub fn bracket_values(t: &Rational, k_max: u32, x: &Float, precision_bits: u32) -> Result<Vec<Float>> {
    let polys = bracket_derivatives(t, k_max);
    certify_all(precision_bits, "bracket derivative", |p| {
        let xi = point(x, p);
        polys.iter().map(|q| q.value_enclosure(&xi)).collect()
    })
}

/// Either derivative engine, for uniform consistency checks.
#[derive(Clone, Debug)]
pub enum DerivativeEngine {
    Bracket(Rational),
    Gs(RationalTheta),
}

impl DerivativeEngine {
    pub fn values(&self, k_max: u32, x: &Float, precision_bits: u32) -> Result<Vec<Float>> {
        match self {
            DerivativeEngine::Bracket(t) => bracket_values(t, k_max, x, precision_bits),
            DerivativeEngine::Gs(theta) => gs_derivatives(*theta, k_max, x, precision_bits),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DerivativeEngine::Bracket(t) => format!("bracket t={}", format_rational(t)),
            DerivativeEngine::Gs(theta) => format!("gs theta={theta}"),
        }
    }
}

/// Central differences of order-`k` values at step `2^-step_log2` against the
/// order-`k+1` values, for `k < k_max`. Fails when a relative error reaches
/// `tolerance`; the extremal ratio is the largest relative error seen.
pub fn finite_difference_check(
    engine: &DerivativeEngine,
    k_max: u32,
    points: &[Float],
    step_log2: i32,
    tolerance: f64,
    precision_bits: u32,
) -> Result<CheckResult> {
    let prec = precision_bits;
    let mut step = Float::with_val(prec, 1);
    step >>= step_log2;
    let mut res = CheckResult::named(
        "finite-difference",
        format!("{} k_max={k_max} step=2^-{step_log2} points={}", engine.label(), points.len()),
    );
    let per_point: Vec<Result<Vec<(u32, Float)>>> = points
        .par_iter()
        .map(|x| {
            let xp = Float::with_val(prec, x + &step);
            let xm = Float::with_val(prec, x - &step);
            let hi = engine.values(k_max, &xp, prec)?;
            let lo = engine.values(k_max, &xm, prec)?;
            let mid = engine.values(k_max, x, prec)?;
            let mut out = Vec::new();
            for k in 0..k_max as usize {
                let mut fd = Float::with_val(prec, &hi[k] - &lo[k]);
                fd /= &step;
                fd /= 2;
                let err = Float::with_val(prec, &fd - &mid[k + 1]).abs();
                let rel = if mid[k + 1].is_zero() { err } else { err / mid[k + 1].clone().abs() };
                out.push((k as u32, rel));
            }
            Ok(out)
        })
        .collect();
    let mut worst: Option<Float> = None;
    for (x, rows) in points.iter().zip(per_point) {
        for (k, rel) in rows? {
            let ok = rel.to_f64() < tolerance;
            res.record(ok, || {
                witness([("k", k.to_string()), ("x", format_float(x, 20)), ("relative_error", format_float(&rel, 10))])
            });
            if worst.as_ref().is_none_or(|w| rel > *w) {
                worst = Some(rel);
            }
        }
    }
    res.extremal_ratio = worst;
    Ok(res)
}

/// Sample points for sweeps and seminorms.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    /// `n` equally spaced points from `lo` to `hi` inclusive.
    Uniform { lo: Rational, hi: Rational, n: u32 },
    /// `0` followed by `n-1` geometrically spaced points ending at `x_max`.
    Geometric { x_max: Rational, n: u32 },
    Points(Vec<Rational>),
}

impl Grid {
    /// Geometric grid up to `2·k_max^θ`.
    pub fn default_for(theta: RationalTheta, k_max: u32, n: u32) -> Grid {
        let k = Float::with_val(64, k_max.max(1));
        let x = Float::with_val(64, k.pow(Float::with_val(64, &theta.to_rational()))) * 2u32;
        let x_max = x.ceil().to_rational().expect("finite");
        Grid::Geometric { x_max, n }
    }

    pub fn points(&self) -> Vec<Rational> {
        match self {
            Grid::Uniform { lo, hi, n } => {
                if *n <= 1 {
                    return vec![lo.clone()];
                }
                let span = Rational::from(hi - lo);
                (0..*n).map(|i| lo + (&span * Rational::from((i, n - 1)))).collect()
            }
            Grid::Geometric { x_max, n } => {
                let mut out = vec![Rational::new()];
                if *n <= 1 {
                    return out;
                }
                let m = n - 1;
                let x_min = Rational::from((1, 64)).min(x_max.clone());
                let lo = Float::with_val(64, &x_min);
                let ratio = Float::with_val(64, x_max / Rational::from(&x_min));
                for i in 0..m {
                    let frac = if m == 1 { Rational::from(1) } else { Rational::from((i, m - 1)) };
                    let v = if i + 1 == m {
                        x_max.clone()
                    } else {
                        let r = Float::with_val(64, (&ratio).pow(&Float::with_val(64, &frac))) * &lo;
                        r.to_rational().expect("finite")
                    };
                    out.push(v);
                }
                out
            }
            Grid::Points(v) => v.clone(),
        }
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `uniform:LO:HI:N` or `geom:XMAX:N`.
    fn from_str(s: &str) -> Result<Grid> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidArgument(format!("grid spec `{s}`: expected uniform:LO:HI:N or geom:XMAX:N"));
        let count = |t: &str| t.parse::<u32>().ok().filter(|n| *n >= 1).ok_or_else(bad);
        match parts.as_slice() {
            ["uniform", lo, hi, n] => {
                let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
                if lo > hi {
                    return Err(bad());
                }
                Ok(Grid::Uniform { lo, hi, n: count(n)? })
            }
            ["geom", x, n] => {
                let x_max = parse_rational(x)?;
                if x_max <= 0 {
                    return Err(bad());
                }
                Ok(Grid::Geometric { x_max, n: count(n)? })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Uniform { lo, hi, n } => write!(f, "uniform:{}:{}:{n}", format_rational(lo), format_rational(hi)),
            Grid::Geometric { x_max, n } => write!(f, "geom:{}:{n}", format_rational(x_max)),
            Grid::Points(v) => write!(f, "points:{}", v.len()),
        }
    }
}

/// Empirical `C_t = max |∂^k⟨x⟩^t| / (8^k k! ⟨x⟩^{t-k})` over `k <= k_max` and
/// the grid. Passes when every ratio is finite.
pub fn verify_bracket_bound(t: &Rational, k_max: u32, grid: &Grid, precision_bits: u32) -> CheckResult {
    let prec = precision_bits.max(MIN_GS_PRECISION);
    let polys = bracket_derivatives(t, k_max);
    let pts = grid.points();
    let mut res = CheckResult::named("bracket-bound", format!("t={} k_max={k_max} grid={grid}", format_rational(t)));
    let rows: Vec<Vec<Float>> = pts
        .par_iter()
        .map(|x| {
            let xi = Interval::from_rational(prec, x);
            let one = Interval::point(Float::with_val(prec, 1));
            let base = one.add(&xi.square());
            polys
                .iter()
                .map(|q| {
                    let k = q.k();
                    let scale = Integer::from(Integer::u_pow_u(8, k)) * Integer::from(Integer::factorial(k));
                    let den = base
                        .pow_rational(&Rational::from((k, 2)))
                        .expect("positive")
                        .mul(&Interval::from_integer(prec, &scale));
                    let num = q.eval_enclosure(&xi).mag();
                    let mut r = Float::with_val(prec, &num);
                    r.div_assign_round(&den.mig(), Round::Up);
                    r
                })
                .collect()
        })
        .collect();
    let mut worst: Option<Float> = None;
    for (x, row) in pts.iter().zip(rows) {
        for (k, r) in row.into_iter().enumerate() {
            res.record(r.is_finite(), || witness([("k", k.to_string()), ("x", format_rational(x))]));
            if worst.as_ref().is_none_or(|w| r > *w) {
                worst = Some(r);
            }
        }
    }
    res.extremal_ratio = worst;
    res
}

/// Outcome of [`verify_gs_bound`].
#[derive(Clone, Debug, Serialize)]
pub struct GsBoundReport {
    pub check: CheckResult,
    /// `(k, C_emp(k))` for `1 <= k <= k_max`, as decimal strings.
    pub c_emp: Vec<(u32, String)>,
    /// Least-squares slope of `ln C_emp(k)` against `k` over the top half.
    pub tail_slope: String,
}

/// Default ceiling for the tail slope of `ln C_emp` in [`verify_gs_bound`].
///
/// Bounded sequences still approach their limit from below at a rate of about
/// `ln k / k²`, which gives slopes near `5·10^-3` at `k = 30`.
pub const DEFAULT_MAX_TAIL_SLOPE: f64 = 1e-2;

/// `C_emp(k) = max_x (|f^{(k)}| / (k! f ⟨x⟩^{k·max(1/θ-1,0)}))^{1/k}` for
/// `f = exp(-⟨x⟩^{1/θ})`. Passes when every value is finite and the tail
/// slope of `ln C_emp` against `k` is at most `max_tail_slope`.
pub fn verify_gs_bound(
    theta: RationalTheta,
    k_max: u32,
    grid: Option<&Grid>,
    max_tail_slope: f64,
    precision_bits: u32,
) -> Result<GsBoundReport> {
    if k_max < 4 {
        return Err(Error::InvalidArgument("gs bound sweep needs k_max >= 4".into()));
    }
    let prec = precision_bits.max(MIN_GS_PRECISION);
    let grid = grid.cloned().unwrap_or_else(|| Grid::default_for(theta, k_max, 241));
    let pts = grid.points();
    let engine = GsEngine::new(theta, k_max);
    let w = Rational::from((theta.q(), theta.p())) - 1u32;
    let w = if w > 0 { w } else { Rational::new() };

    let per_point: Vec<Vec<Float>> = pts
        .par_iter()
        .map(|x| {
            let xi = Interval::from_rational(prec, x);
            let f = engine.enclosures(&xi);
            let bracket = Interval::point(Float::with_val(prec, 1)).add(&xi.square());
            (1..=k_max)
                .map(|k| {
                    let e = Rational::from(&w * k) / 2u32;
                    let weight = bracket.pow_rational(&e).expect("positive");
                    let fact = Interval::from_integer(prec, &Integer::from(Integer::factorial(k)));
                    let den = weight.mul(&fact).mul(&f[0]);
                    let mut r = f[k as usize].mag();
                    r.div_assign_round(&den.mig(), Round::Up);
                    r
                })
                .collect()
        })
        .collect();

    let mut res = CheckResult::named("gs-bound", format!("theta={theta} k_max={k_max} grid={grid}"));
    let mut c_emp = Vec::new();
    let mut ks = Vec::new();
    let mut logs = Vec::new();
    for k in 1..=k_max {
        let idx = (k - 1) as usize;
        let max = per_point.iter().map(|row| row[idx].clone()).fold(Float::new(prec), |a, b| if b > a { b } else { a });
        let c = if max.is_zero() { max } else { Float::with_val(prec, max.pow(Float::with_val(prec, &Rational::from((1, k))))) };
        res.record(c.is_finite(), || witness([("k", k.to_string()), ("c_emp", format_float(&c, 20))]));
        if k > k_max / 2 && c > 0 {
            ks.push(Float::with_val(prec, k));
            logs.push(Float::with_val(prec, c.ln_ref()));
        }
        c_emp.push((k, format_float(&c, 20)));
    }
    let slope = ols_slope(&ks, &logs, prec);
    res.record(slope.to_f64() <= max_tail_slope, || witness([("tail_slope", format_float(&slope, 20))]));
    res.extremal_ratio = Some(slope.clone());
    Ok(GsBoundReport { check: res, c_emp, tail_slope: format_float(&slope, 20) })
}

/// A function whose derivatives the seminorm estimators can evaluate.
#[derive(Clone, Debug)]
pub enum TestFunction {
    /// `exp(-⟨x⟩^{1/θ})`.
    GsFunction(RationalTheta),
    /// `exp(-x²)`.
    Gaussian,
    /// `g(c·x)` for an inner function `g`.
    Dilated { inner: Box<TestFunction>, scale: Rational },
    /// Tabulated derivative values; only the sampled `(k, x)` pairs are used.
    Sampled(Vec<Sample>),
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub k: u32,
    pub x: Rational,
    pub value: Float,
}

/// `e_k` with `∂^k exp(-x²) = e_k(x)·exp(-x²)`: `e_{k+1} = e_k' - 2x·e_k`.
fn gaussian_polys(k_max: u32) -> Vec<Vec<Integer>> {
    let mut out = vec![vec![Integer::from(1)]];
    for k in 0..k_max as usize {
        let p = &out[k];
        let mut next = vec![Integer::new(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            if i > 0 {
                next[i - 1] += Integer::from(c * i as u32);
            }
            next[i + 1] -= Integer::from(c * 2u32);
        }
        out.push(next);
    }
    out
}

impl TestFunction {
    /// Enclosures of `f^{(0..=k_max)}(x)`.
    pub fn enclosures(&self, k_max: u32, x: &Rational, prec: u32) -> Result<Vec<Interval>> {
        match self {
            TestFunction::GsFunction(theta) => {
                Ok(GsEngine::new(*theta, k_max).enclosures(&Interval::from_rational(prec, x)))
            }
            TestFunction::Gaussian => {
                let xi = Interval::from_rational(prec, x);
                let g = xi.square().neg().exp();
                Ok(gaussian_polys(k_max)
                    .iter()
                    .map(|p| {
                        let mut acc = Interval::zero(prec);
                        for c in p.iter().rev() {
                            acc = acc.mul(&xi).add(&Interval::from_integer(prec, c));
                        }
                        acc.mul(&g)
                    })
                    .collect())
            }
            TestFunction::Dilated { inner, scale } => {
                if *scale <= 0 {
                    return Err(Error::InvalidArgument("dilation scale must be positive".into()));
                }
                let y = Rational::from(x * scale);
                let vals = inner.enclosures(k_max, &y, prec)?;
                let c = Interval::from_rational(prec, scale);
                Ok(vals.into_iter().enumerate().map(|(k, v)| v.mul(&c.pow_u32(k as u32))).collect())
            }
            TestFunction::Sampled(_) => {
                Err(Error::Unsupported("sampled functions only provide their tabulated values".into()))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::GsFunction(theta) => format!("gs(theta={theta})"),
            TestFunction::Gaussian => "gaussian".into(),
            TestFunction::Dilated { inner, scale } => format!("{}(x*{})", inner.label(), format_rational(scale)),
            TestFunction::Sampled(s) => format!("sampled({})", s.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SeminormKind {
    /// `sup e^{a|x|^{1/θ}} β!^{-s} a^β |f^{(β)}(x)|`.
    AFamily,
    /// `sup |x^α f^{(β)}(x)| / (h^{α+β} α!^θ β!^s)`.
    HFamily,
}

impl FromStr for SeminormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "a-family" => Ok(SeminormKind::AFamily),
            "h" | "h-family" => Ok(SeminormKind::HFamily),
            _ => Err(Error::InvalidArgument(format!("seminorm kind `{s}`: expected a or h"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeminormParams {
    pub kind: SeminormKind,
    pub theta: Rational,
    pub s: Rational,
    /// `a` for the a-family, `h` for the h-family.
    pub weight: Rational,
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub beta_max: u32,
    /// Ignored by the a-family.
    pub alpha_max: u32,
    pub grid: Grid,
}

/// Largest term at one `(β, x)`, maximized over `α`.
#[derive(Clone, Debug)]
pub struct SeminormRow {
    pub k: u32,
    pub x: Rational,
    pub value: Float,
}

#[derive(Clone, Debug)]
pub struct SeminormEstimate {
    pub kind: SeminormKind,
    pub theta: Rational,
    pub s: Rational,
    pub weight: Rational,
    pub beta_max: u32,
    pub alpha_max: u32,
    pub grid: String,
    pub value: Float,
    /// `(α, β, x)` of the largest term.
    pub argmax: Option<(u32, u32, Rational)>,
    pub is_lower_bound: bool,
    pub rows: Vec<SeminormRow>,
}

fn abs_enclosure(v: &Interval) -> Interval {
    Interval::new(v.mig(), v.mag())
}

fn rational_power(base: &Interval, e: &Rational, prec: u32) -> Interval {
    if base.is_exact_zero() {
        if *e == 0 {
            Interval::point(Float::with_val(prec, 1))
        } else {
            Interval::zero(prec)
        }
    } else {
        base.pow_rational(e).expect("positive base")
    }
}

/// Terms `(α, β, lower bound)` at one point.
fn point_terms(p: &SeminormParams, trunc: &Trunc, x: &Rational, derivs: &[Interval], prec: u32) -> Vec<(u32, u32, Float)> {
    let ax = Interval::from_rational(prec, &Rational::from(x.abs_ref()));
    let w = Interval::from_rational(prec, &p.weight);
    let mut out = Vec::new();
    for (beta, d) in derivs.iter().enumerate() {
        let beta = beta as u32;
        let abs_d = abs_enclosure(d);
        let bfs = rational_power(&trunc.factorials[beta as usize], &p.s, prec);
        match p.kind {
            SeminormKind::AFamily => {
                let xe = rational_power(&ax, &Rational::from(p.theta.recip_ref()), prec);
                let e = w.mul(&xe).exp();
                let v = e.mul(&w.pow_u32(beta)).mul(&abs_d);
                let mut lo = v.mig();
                lo.div_assign_round(&bfs.mag(), Round::Down);
                out.push((0, beta, lo));
            }
            SeminormKind::HFamily => {
                for alpha in 0..=trunc.alpha_max {
                    let afs = rational_power(&trunc.factorials[alpha as usize], &p.theta, prec);
                    let num = ax.pow_u32(alpha).mul(&abs_d);
                    let den = w.pow_u32(alpha + beta).mul(&afs).mul(&bfs);
                    let mut lo = num.mig();
                    lo.div_assign_round(&den.mag(), Round::Down);
                    out.push((alpha, beta, lo));
                }
            }
        }
    }
    out
}

struct Trunc {
    alpha_max: u32,
    factorials: Vec<Interval>,
}

fn validate(p: &SeminormParams, trunc: &Truncation) -> Result<()> {
    if p.theta <= 0 || p.s <= 0 || p.weight <= 0 {
        return Err(Error::InvalidArgument("seminorm parameters θ, s and the weight must be positive".into()));
    }
    if trunc.beta_max > 200 || trunc.alpha_max > 200 {
        return Err(Error::InvalidArgument("truncation orders above 200 are not supported".into()));
    }
    Ok(())
}

/// Grid point with its `(α, β, term)` values.
type PointTerms = (Rational, Vec<(u32, u32, Float)>);

/// Truncated seminorm: the supremum of the certified lower endpoints of every
/// term with `β <= beta_max`, `α <= alpha_max` and `x` on the grid.
pub fn seminorm(f: &TestFunction, params: &SeminormParams, trunc: &Truncation, precision_bits: u32) -> Result<SeminormEstimate> {
    validate(params, trunc)?;
    let prec = precision_bits.max(MIN_GS_PRECISION);
    let fact_max = trunc.beta_max.max(trunc.alpha_max);
    let tr = Trunc {
        alpha_max: trunc.alpha_max,
        factorials: (0..=fact_max)
            .map(|n| Interval::from_integer(prec, &Integer::from(Integer::factorial(n))))
            .collect(),
    };

    let per_point: Vec<PointTerms> = match f {
        TestFunction::Sampled(samples) => {
            let mut out = Vec::new();
            for smp in samples.iter().filter(|s| s.k <= trunc.beta_max) {
                let mut d = vec![Interval::zero(prec); smp.k as usize + 1];
                d[smp.k as usize] = Interval::point(Float::with_val(prec, &smp.value));
                let terms = point_terms(params, &tr, &smp.x, &d, prec)
                    .into_iter()
                    .filter(|(_, b, _)| *b == smp.k)
                    .collect();
                out.push((smp.x.clone(), terms));
            }
            out
        }
        _ => trunc
            .grid
            .points()
            .into_par_iter()
            .map(|x| {
                let d = f.enclosures(trunc.beta_max, &x, prec)?;
                let terms = point_terms(params, &tr, &x, &d, prec);
                Ok((x, terms))
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let mut best = Float::new(prec);
    let mut argmax = None;
    let mut rows = Vec::new();
    for (x, terms) in per_point {
        let mut by_beta: Vec<Option<Float>> = vec![None; trunc.beta_max as usize + 1];
        for (alpha, beta, v) in terms {
            if argmax.is_none() || v > best {
                best = v.clone();
                argmax = Some((alpha, beta, x.clone()));
            }
            let slot = &mut by_beta[beta as usize];
            if slot.as_ref().is_none_or(|cur| v > *cur) {
                *slot = Some(v);
            }
        }
        for (k, v) in by_beta.into_iter().enumerate() {
            if let Some(value) = v {
                rows.push(SeminormRow { k: k as u32, x: x.clone(), value });
            }
        }
    }
    rows.sort_by(|a, b| a.k.cmp(&b.k).then_with(|| a.x.cmp(&b.x)));
    Ok(SeminormEstimate {
        kind: params.kind,
        theta: params.theta.clone(),
        s: params.s.clone(),
        weight: params.weight.clone(),
        beta_max: trunc.beta_max,
        alpha_max: trunc.alpha_max,
        grid: trunc.grid.to_string(),
        value: best,
        argmax,
        is_lower_bound: true,
        rows,
    })
}

/// One row of the a-family versus h-family comparison for
/// `f = exp(-⟨x⟩^{1/θ})`, with `a = min(1/h, θ h^{-1/θ}/2)` so that the
/// a-family seminorm is expected below `2^θ` times the h-family one.
#[derive(Clone, Debug)]
pub struct PairingRow {
    pub h: Rational,
    pub a: Rational,
    pub a_norm: Float,
    pub h_norm: Float,
    /// `a_norm / h_norm`.
    pub ratio: Float,
    /// `2^θ`.
    pub constant: Float,
}

/// Diagnostic table; callers should only rely on the entries being finite.
pub fn pairing_table(theta: RationalTheta, s: &Rational, hs: &[Rational], trunc: &Truncation, precision_bits: u32) -> Result<Vec<PairingRow>> {
    let prec = precision_bits.max(MIN_GS_PRECISION);
    let f = TestFunction::GsFunction(theta);
    let th = theta.to_rational();
    let mut out = Vec::new();
    for h in hs {
        if *h <= 0 {
            return Err(Error::InvalidArgument("pairing needs positive h".into()));
        }
        let hf = Float::with_val(64, h);
        let inv = Float::with_val(64, hf.recip_ref());
        let mut alt = Float::with_val(64, hf.pow(Float::with_val(64, &Rational::from(th.recip_ref()))).recip());
        alt *= theta.to_f64() / 2.0;
        let a_f = if inv < alt { inv } else { alt };
        let a = a_f.to_rational().expect("finite");
        let an = seminorm(&f, &SeminormParams { kind: SeminormKind::AFamily, theta: th.clone(), s: s.clone(), weight: a.clone() }, trunc, prec)?;
        let hn = seminorm(&f, &SeminormParams { kind: SeminormKind::HFamily, theta: th.clone(), s: s.clone(), weight: h.clone() }, trunc, prec)?;
        let ratio = Float::with_val(prec, &an.value / &hn.value);
        let constant = Float::with_val(prec, Float::with_val(prec, 2).pow(Float::with_val(prec, &th)));
        out.push(PairingRow { h: h.clone(), a, a_norm: an.value, h_norm: hn.value, ratio, constant });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn th(s: &str) -> RationalTheta {
        s.parse().unwrap()
    }

    #[test]
    fn bracket_low_orders() {
        let t = q("5/2");
        let q1 = bracket_derivative(&t, 1);
        assert_eq!(q1.coeffs(), &[Rational::new(), t.clone()]);
        let q2 = bracket_derivative(&t, 2);
        let want = [t.clone(), Rational::new(), (&t * Rational::from(&t - 1u32))];
        assert_eq!(q2.coeffs(), &want);
        // ∂²⟨x⟩² = 2.
        let p = bracket_derivative(&Rational::from(2), 2);
        for x in ["0", "3/7", "-5"] {
            let x = q(x);
            let v = p.eval(&x) / (Rational::from(1) + Rational::from(x.square_ref()));
            assert_eq!(v, 2);
        }
        // ∂³⟨x⟩² = 0 identically.
        assert!(bracket_derivative(&Rational::from(2), 3).coeffs().iter().all(|c| *c == 0));
    }

    #[test]
    fn bracket_matches_exact_powers() {
        // t = 4: ⟨x⟩⁴ = 1 + 2x² + x⁴, so ∂⁴ = 24.
        let p = bracket_derivative(&Rational::from(4), 4);
        let x = q("3/2");
        let base = Rational::from(1) + Rational::from(x.square_ref());
        assert_eq!(p.eval(&x) / Rational::from(base.square_ref()), 24);
    }

    #[test]
    fn gs_values_at_zero() {
        let zero = Float::new(128);
        let v = gs_derivatives(th("1"), 3, &zero, 128).unwrap();
        let e = Float::with_val(128, -1).exp();
        assert_eq!(v[0], e);
        assert!(v[1].is_zero() && v[3].is_zero());
        let diff = Float::with_val(128, &v[2] + &e).abs();
        assert!(diff < Float::with_val(128, 1) >> 100);
        for t in ["1/2", "2", "3/5"] {
            assert!(gs_derivative(th(t), 1, &zero, 128).unwrap().is_zero());
        }
        assert!(matches!(gs_derivative(th("1"), 1, &zero, 64), Err(Error::PrecisionTooLow { .. })));
    }

    #[test]
    fn gs_theta_half_is_scaled_gaussian() {
        // θ = 1/2: f = e^{-1}·e^{-x²}.
        let x = Float::with_val(256, 0.75);
        let gs = gs_derivatives(th("1/2"), 6, &x, 256).unwrap();
        let ga = TestFunction::Gaussian.enclosures(6, &q("3/4"), 256).unwrap();
        let e = Float::with_val(256, -1).exp();
        for (a, b) in gs.iter().zip(ga) {
            let rel = Float::with_val(256, a - Float::with_val(256, b.mid() * &e)).abs() / a.clone().abs();
            assert!(rel < 1e-60, "{rel}");
        }
    }

    #[test]
    fn finite_differences_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Float> = (0..4).map(|_| Float::with_val(256, rng.gen_range(-3.0..3.0))).collect();
        for engine in [DerivativeEngine::Bracket(q("1/3")), DerivativeEngine::Gs(th("1"))] {
            let r = finite_difference_check(&engine, 5, &pts, 20, 1e-4, 256).unwrap();
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn bracket_bound_examples() {
        let grid: Grid = "uniform:-10:10:41".parse().unwrap();
        let r = verify_bracket_bound(&Rational::from(-1), 20, &grid, 128);
        assert!(r.pass);
        assert_eq!(r.extremal_ratio.unwrap(), 1);
        assert!(verify_bracket_bound(&q("5/2"), 20, &grid, 128).pass);
        let single = Grid::Points(vec![Rational::new()]);
        let polys = bracket_derivatives(&Rational::from(1), 1);
        assert_eq!(polys[1].eval(&Rational::new()), 0);
        assert!(verify_bracket_bound(&Rational::from(1), 1, &single, 128).pass);
    }

    #[test]
    fn gs_bound_small() {
        let r = verify_gs_bound(th("1"), 24, None, DEFAULT_MAX_TAIL_SLOPE, 128).unwrap();
        assert!(r.check.pass, "{}", r.check);
        assert_eq!(r.c_emp.len(), 24);
        // f'(0) = 0, and the first order stays below one.
        assert!(r.c_emp[0].1.parse::<f64>().unwrap() <= 1.0);
        assert!(verify_gs_bound(th("1"), 2, None, DEFAULT_MAX_TAIL_SLOPE, 128).is_err());
    }

    #[test]
    fn grid_specs() {
        let g: Grid = "uniform:-1:1:5".parse().unwrap();
        assert_eq!(g.points(), vec![q("-1"), q("-1/2"), q("0"), q("1/2"), q("1")]);
        let g: Grid = "geom:100:10".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], 0);
        assert_eq!(p[1], q("1/64"));
        assert_eq!(p[9], 100);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.to_string(), "geom:100:10");
        for bad in ["", "geom:0:3", "uniform:1:0:3", "uniform:0:1:0", "foo:1:2"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
        assert_eq!(Grid::default_for(th("2"), 30, 5), Grid::Geometric { x_max: Rational::from(1800), n: 5 });
    }

    #[test]
    fn gaussian_a_seminorm_is_one() {
        let params = SeminormParams { kind: SeminormKind::AFamily, theta: q("1/2"), s: q("1"), weight: q("1/2") };
        let trunc = Truncation { beta_max: 0, alpha_max: 0, grid: "uniform:-4:4:81".parse().unwrap() };
        let est = seminorm(&TestFunction::Gaussian, &params, &trunc, 128).unwrap();
        assert!(est.is_lower_bound);
        assert!(est.value <= 1 && est.value > 0.999_999);
        assert_eq!(est.argmax.unwrap().2, 0);
    }

    #[test]
    fn seminorm_monotone_in_truncation() {
        let f = TestFunction::GsFunction(th("1"));
        let params = SeminormParams { kind: SeminormKind::HFamily, theta: q("1"), s: q("1"), weight: q("1") };
        let mut last = Float::new(128);
        for (b, a, n) in [(2, 2, 11), (4, 4, 21), (8, 8, 41)] {
            let trunc = Truncation { beta_max: b, alpha_max: a, grid: Grid::Uniform { lo: q("0"), hi: q("8"), n } };
            let v = seminorm(&f, &params, &trunc, 128).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn dilation_identity_for_values() {
        // sup e^{a|x|}|g(2x)| over G equals sup e^{(a/2)|y|}|g(y)| over 2G.
        let g = TestFunction::GsFunction(th("1"));
        let dil = TestFunction::Dilated { inner: Box::new(g.clone()), scale: Rational::from(2) };
        let pts: Vec<Rational> = (0..20).map(|i| Rational::from((i, 4))).collect();
        let pts2: Vec<Rational> = pts.iter().map(|x| Rational::from(x * 2u32)).collect();
        let p1 = SeminormParams { kind: SeminormKind::AFamily, theta: q("1"), s: q("1"), weight: q("1/2") };
        let p2 = SeminormParams { weight: q("1/4"), ..p1.clone() };
        let t1 = Truncation { beta_max: 0, alpha_max: 0, grid: Grid::Points(pts) };
        let t2 = Truncation { beta_max: 0, alpha_max: 0, grid: Grid::Points(pts2) };
        let a = seminorm(&dil, &p1, &t1, 256).unwrap().value;
        let b = seminorm(&g, &p2, &t2, 256).unwrap().value;
        let rel = Float::with_val(256, &a - &b).abs() / &b;
        assert!(rel < 1e-60);
    }

    #[test]
    fn sampled_and_pairing() {
        let samples = vec![Sample { k: 0, x: Rational::new(), value: Float::with_val(128, 3) }];
        let params = SeminormParams { kind: SeminormKind::AFamily, theta: q("1"), s: q("1"), weight: q("1") };
        let trunc = Truncation { beta_max: 2, alpha_max: 0, grid: Grid::Points(vec![]) };
        assert_eq!(seminorm(&TestFunction::Sampled(samples), &params, &trunc, 128).unwrap().value, 3);

        let trunc = Truncation { beta_max: 6, alpha_max: 6, grid: "uniform:0:6:25".parse().unwrap() };
        let rows = pairing_table(th("1"), &q("1"), &[q("1/2"), q("1")], &trunc, 128).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.ratio.is_finite() && r.a_norm > 0));
    }
}
