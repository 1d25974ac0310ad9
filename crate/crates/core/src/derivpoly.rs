//! Derivative polynomials of exponential monomials.
//!
//! For `g(x) = exp(λ x^m / m)` every derivative factors as
//! `∂^k g = p_k · g` with
//!
//! ```text
//! p_k(x) = Σ_{n=0}^{⌊k(m-1)/m⌋} λ^(k-n) x^((m-1)k - nm) C[k][n]
//! ```
//!
//! The integers `C[k][n]` depend on `m` only, so one [`CoeffTable`] serves
//! every `λ`. `λ` enters at evaluation, where only `λ = ±i·m` is supported.

use std::fmt;
use std::io::Write;

use rug::ops::Pow;
use rug::float::Round;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{check_degree, Error, Result};
use crate::numeric::{neg_infinity, round_to, Interval};

/// Highest index `⌊k(m-1)/m⌋` of row `k`.
pub fn top_index(m: u32, k: u32) -> usize {
    (u64::from(k) * u64::from(m - 1) / u64::from(m)) as usize
}

/// Exact coefficient table `C[k][n]` for `0 <= k <= k_max`.
///
/// Rows are stored back to back; row 0 is the constant polynomial `1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffTable {
    m: u32,
    k_max: u32,
    offsets: Vec<usize>,
    coeffs: Vec<Integer>,
}

/// Builds the table with the unified step
/// `C[k+1][n] = C[k][n] + C[k][n-1]·((m-1)k - m(n-1))`, out-of-range entries
/// read as zero.
pub fn build_coeff_table(m: u32, k_max: u32) -> Result<CoeffTable> {
    CoeffTable::build(m, k_max)
}

impl CoeffTable {
    pub fn build(m: u32, k_max: u32) -> Result<Self> {
        check_degree(m)?;
        if k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        let total: usize = (0..=k_max).map(|k| top_index(m, k) + 1).sum();
        let mut coeffs = Vec::with_capacity(total);
        let mut offsets = Vec::with_capacity(k_max as usize + 2);
        offsets.push(0);
        coeffs.push(Integer::from(1));
        offsets.push(1);
        for k in 0..k_max {
            let start = offsets[k as usize];
            let end = offsets[k as usize + 1];
            let len = top_index(m, k + 1) + 1;
            for n in 0..len {
                let mut c = if start + n < end { coeffs[start + n].clone() } else { Integer::new() };
                if n >= 1 && start + n - 1 < end {
                    let weight = u64::from(m - 1) * u64::from(k) - u64::from(m) * (n as u64 - 1);
                    c += Integer::from(&coeffs[start + n - 1] * weight);
                }
                coeffs.push(c);
            }
            offsets.push(coeffs.len());
        }
        Ok(CoeffTable { m, k_max, offsets, coeffs })
    }

    /// Wraps externally supplied rows `k = 1..=rows.len()`. Only the shape is
    /// validated; values are left for [`crate::oracle::certify`] to judge.
    pub fn from_rows(m: u32, rows: Vec<Vec<Integer>>) -> Result<Self> {
        check_degree(m)?;
        if rows.is_empty() {
            return Err(Error::InvalidArgument("table needs at least one row".into()));
        }
        let mut offsets = vec![0, 1];
        let mut coeffs = vec![Integer::from(1)];
        for (i, row) in rows.into_iter().enumerate() {
            let k = i as u32 + 1;
            let want = top_index(m, k) + 1;
            if row.len() != want {
                return Err(Error::InvalidArgument(format!(
                    "row k={k} has {} entries, expected {want}",
                    row.len()
                )));
            }
            coeffs.extend(row);
            offsets.push(coeffs.len());
        }
        let k_max = offsets.len() as u32 - 2;
        Ok(CoeffTable { m, k_max, offsets, coeffs })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// Row `k` (row 0 is `[1]`).
    pub fn row(&self, k: u32) -> Option<&[Integer]> {
        if k > self.k_max {
            return None;
        }
        let k = k as usize;
        Some(&self.coeffs[self.offsets[k]..self.offsets[k + 1]])
    }

    pub fn get(&self, k: u32, n: usize) -> Option<&Integer> {
        self.row(k).and_then(|r| r.get(n))
    }

    /// Rows `k = 1..=k_max` paired with `k`.
    pub fn rows(&self) -> impl Iterator<Item = (u32, &[Integer])> + '_ {
        (1..=self.k_max).map(move |k| (k, self.row(k).unwrap()))
    }

    pub fn to_json(&self) -> TableJson {
        TableJson {
            m: self.m,
            k_max: self.k_max,
            rows: self.rows().map(|(_, r)| r.iter().map(Integer::to_string).collect()).collect(),
        }
    }

    pub fn from_json(doc: &TableJson) -> Result<Self> {
        let rows = doc
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| {
                        s.parse::<Integer>()
                            .map_err(|_| Error::InvalidArgument(format!("bad coefficient {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let table = CoeffTable::from_rows(doc.m, rows)?;
        if table.k_max != doc.k_max {
            return Err(Error::InvalidArgument(format!(
                "k_max {} disagrees with {} rows",
                doc.k_max, table.k_max
            )));
        }
        Ok(table)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, &self.to_json())?;
        Ok(())
    }
}

/// On-disk table: coefficients as exact decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableJson {
    pub m: u32,
    pub k_max: u32,
    pub rows: Vec<Vec<String>>,
}

/// One monomial `λ^lambda_power · x^x_exponent · coeff` of `p_k`.
#[derive(Clone, Copy, Debug)]
pub struct Term<'a> {
    pub n: usize,
    pub lambda_power: u32,
    pub x_exponent: u32,
    pub coeff: &'a Integer,
}

/// Structured view of `p_k` borrowing row `k` of a table.
#[derive(Clone, Copy, Debug)]
pub struct DerivPoly<'a> {
    m: u32,
    k: u32,
    coeffs: &'a [Integer],
}

pub fn derivative_poly(table: &CoeffTable, k: u32) -> Result<DerivPoly<'_>> {
    let coeffs = table.row(k).ok_or(Error::OrderOutOfRange { k, k_max: table.k_max })?;
    Ok(DerivPoly { m: table.m, k, coeffs })
}

impl<'a> DerivPoly<'a> {
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn coeffs(&self) -> &'a [Integer] {
        self.coeffs
    }

    /// Total degree in `x`, attained by the `n = 0` term.
    pub fn degree(&self) -> u32 {
        (self.m - 1) * self.k
    }

    pub fn terms(&self) -> impl Iterator<Item = Term<'a>> + '_ {
        let (m, k) = (self.m, self.k);
        self.coeffs.iter().enumerate().map(move |(n, coeff)| Term {
            n,
            lambda_power: k - n as u32,
            x_exponent: (m - 1) * k - n as u32 * m,
            coeff,
        })
    }

    /// Exact value at a nonnegative integer `x` for `λ = ±i·m`.
    pub fn eval_gaussian(&self, sign: LambdaSign, x: &Integer) -> GaussianInt {
        self.eval_scaled(sign, x, &Integer::from(1))
    }

    /// `b^deg · p(a/b)`, a Gaussian integer, for `λ = ±i·m`.
    pub fn eval_scaled(&self, sign: LambdaSign, a: &Integer, b: &Integer) -> GaussianInt {
        let mut re = Integer::new();
        let mut im = Integer::new();
        let a_m = Integer::from(a.pow(self.m));
        let b_m = Integer::from(b.pow(self.m));
        // Walk terms from the lowest x-exponent upwards so powers accumulate.
        let last = self.coeffs.len() - 1;
        let low_exp = (self.m - 1) * self.k - last as u32 * self.m;
        let mut a_pow = Integer::from(a.pow(low_exp));
        let mut b_pow = Integer::from(b.pow(last as u32 * self.m));
        let mut m_pow = Integer::from(Integer::u_pow_u(self.m, self.k - last as u32));
        for n in (0..=last).rev() {
            let j = self.k - n as u32;
            let mut term = Integer::from(&self.coeffs[n] * &m_pow);
            term *= &a_pow;
            term *= &b_pow;
            match sign.i_power(j) {
                0 => re += term,
                1 => im += term,
                2 => re -= term,
                _ => im -= term,
            }
            if n > 0 {
                a_pow *= &a_m;
                b_pow = b_pow.div_exact(&b_m);
                m_pow *= self.m;
            }
        }
        GaussianInt { re, im }
    }

    /// Outward-rounded enclosures of the real and imaginary parts at a
    /// nonnegative real `x`.
    fn eval_enclosure(&self, sign: LambdaSign, x: &Float, prec: u32) -> (Interval, Interval) {
        let xi = Interval::point(Float::with_val(prec.max(x.prec()), x));
        let mut re = Interval::zero(prec);
        let mut im = Interval::zero(prec);
        for t in self.terms() {
            let c = Interval::from_integer(prec, t.coeff);
            let mj = Interval::from_integer(prec, &Integer::from(Integer::u_pow_u(self.m, t.lambda_power)));
            let v = c.mul(&mj).mul(&xi.pow_u32(t.x_exponent));
            match sign.i_power(t.lambda_power) {
                0 => re = re.add(&v),
                1 => im = im.add(&v),
                2 => re = re.sub(&v),
                _ => im = im.sub(&v),
            }
        }
        (re, im)
    }
}

impl fmt::Display for DerivPoly<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in self.terms() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let mut parts = Vec::new();
            if *t.coeff != 1 || (t.lambda_power == 0 && t.x_exponent == 0) {
                parts.push(t.coeff.to_string());
            }
            match t.lambda_power {
                0 => {}
                1 => parts.push("λ".into()),
                p => parts.push(format!("λ^{p}")),
            }
            match t.x_exponent {
                0 => {}
                1 => parts.push("x".into()),
                e => parts.push(format!("x^{e}")),
            }
            f.write_str(&parts.join("·"))?;
        }
        Ok(())
    }
}

/// Selects `λ = +i·m` or `λ = -i·m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSign {
    Plus,
    Minus,
}

impl LambdaSign {
    /// Exponent `e` in `(±i)^j = i^e`, reduced mod 4.
    fn i_power(self, j: u32) -> u32 {
        match self {
            LambdaSign::Plus => j % 4,
            LambdaSign::Minus => (4 - j % 4) % 4,
        }
    }
}

impl std::str::FromStr for LambdaSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(LambdaSign::Plus),
            "-" | "minus" => Ok(LambdaSign::Minus),
            _ => Err(Error::InvalidArgument(format!("lambda sign must be + or -, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianInt {
    pub re: Integer,
    pub im: Integer,
}

impl GaussianInt {
    pub fn norm_sqr(&self) -> Integer {
        Integer::from(self.re.square_ref()) + Integer::from(self.im.square_ref())
    }
}

/// Evaluation point for [`eval_log_magnitude`].
#[derive(Clone, Debug)]
pub enum EvalPoint {
    Integer(Integer),
    Rational(Rational),
    Real(Float),
}

impl EvalPoint {
    fn is_negative(&self) -> bool {
        match self {
            EvalPoint::Integer(v) => *v < 0,
            EvalPoint::Rational(v) => *v < 0,
            EvalPoint::Real(v) => *v < 0,
        }
    }
}

/// `ln|p(x)|` with its provenance.
#[derive(Clone, Debug)]
pub struct LogMagnitude {
    pub log_mag: Float,
    pub arg: Option<Float>,
    pub exact: bool,
    pub precision_bits: u32,
}

pub const MIN_EVAL_PRECISION: u32 = 64;

/// Default working precision for `x = k^θ`:
/// `⌈k·(log2 m + θ(m-1)·log2 max(k,2))⌉ + 128` bits.
pub fn default_precision(m: u32, k: u32, theta: f64) -> u32 {
    let kk = f64::from(k.max(2));
    let bits = f64::from(k) * (f64::from(m).log2() + theta * f64::from(m - 1) * kk.log2());
    bits.ceil() as u32 + 128
}

/// `ln|p_{±im,k}(x)|`.
///
/// Integer and rational points are evaluated exactly in Gaussian integers
/// (`exact = true`). Real points are evaluated with outward rounding and the
/// result is returned only if the enclosure certifies absolute error `< 2^-32`.
pub fn eval_log_magnitude(
    poly: &DerivPoly<'_>,
    sign: LambdaSign,
    x: &EvalPoint,
    precision_bits: u32,
) -> Result<LogMagnitude> {
    if precision_bits < MIN_EVAL_PRECISION {
        return Err(Error::PrecisionTooLow { got: precision_bits, min: MIN_EVAL_PRECISION });
    }
    if x.is_negative() {
        return Err(Error::InvalidArgument("evaluation point must be nonnegative".into()));
    }
    let prec = precision_bits;
    match x {
        EvalPoint::Integer(a) => {
            let g = poly.eval_gaussian(sign, a);
            Ok(exact_log(&g, None, poly.degree(), prec))
        }
        EvalPoint::Rational(r) => {
            let g = poly.eval_scaled(sign, r.numer(), r.denom());
            Ok(exact_log(&g, Some(r.denom()), poly.degree(), prec))
        }
        EvalPoint::Real(xf) => {
            let (re, im) = poly.eval_enclosure(sign, xf, prec);
            let norm = re.square().add(&im.square());
            if norm.is_exact_zero() {
                return Ok(LogMagnitude { log_mag: neg_infinity(prec), arg: None, exact: false, precision_bits: prec });
            }
            let mut log = norm.ln()?;
            let half = Interval::from_rational(prec, &Rational::from((1, 2)));
            log = log.mul(&half);
            if !log.certifies_absolute(31) {
                return Err(Error::InsufficientPrecision {
                    bits: prec,
                    detail: format!("ln|p| enclosure width {} exceeds 2^-31", log.width().to_f64()),
                });
            }
            // Receiver is the y coordinate.
            let arg = Float::with_val(prec, im.mid().atan2_ref(&re.mid()));
            Ok(LogMagnitude { log_mag: log.mid(), arg: Some(arg), exact: false, precision_bits: prec })
        }
    }
}

fn exact_log(g: &GaussianInt, denom: Option<&Integer>, degree: u32, prec: u32) -> LogMagnitude {
    let norm = g.norm_sqr();
    if norm == 0 {
        return LogMagnitude { log_mag: neg_infinity(prec), arg: None, exact: true, precision_bits: prec };
    }
    let work = prec + 64;
    let mut log = Float::with_val(work, Float::with_val(work, &norm).ln());
    log /= 2;
    if let Some(b) = denom {
        if *b != 1 {
            let lb = Float::with_val(work, Float::with_val(work, b).ln());
            log -= lb * degree;
        }
    }
    let im = Float::with_val(work, &g.im);
    let re = Float::with_val(work, &g.re);
    let arg = round_to(prec, im.atan2_ref(&re), Round::Nearest);
    LogMagnitude { log_mag: round_to(prec, &log, Round::Nearest), arg: Some(arg), exact: true, precision_bits: prec }
}

/// `k_j` values: the smallest integer in `[4jm/(m-1), (4j+1)m/(m-1)]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KjSequence {
    m: u32,
    entries: Vec<u32>,
}

pub fn kj(m: u32, j: u32) -> u32 {
    let num = 4 * u64::from(j) * u64::from(m);
    let den = u64::from(m - 1);
    num.div_ceil(den) as u32
}

pub fn kj_sequence(m: u32, j_max: u32) -> Result<KjSequence> {
    check_degree(m)?;
    Ok(KjSequence { m, entries: (1..=j_max).map(|j| kj(m, j)).collect() })
}

impl KjSequence {
    pub fn m(&self) -> u32 {
        self.m
    }

    /// `k_j` for `1 <= j <= j_max`.
    pub fn get(&self, j: u32) -> Option<u32> {
        j.checked_sub(1).and_then(|i| self.entries.get(i as usize).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().enumerate().map(|(i, &k)| (i as u32 + 1, k))
    }

    /// Describes every violated invariant; empty when all hold.
    pub fn invariant_violations(&self) -> Vec<String> {
        let m = u64::from(self.m);
        let mut out = Vec::new();
        for (j, k) in self.iter() {
            let (j64, k64) = (u64::from(j), u64::from(k));
            let fl = top_index(self.m, k) as u64;
            if !(4 * j64 <= fl && fl <= 4 * j64 + 1) {
                out.push(format!("j={j}: floor(k_j(m-1)/m)={fl} not in [4j, 4j+1]"));
            }
            if fl / 2 != 2 * j64 {
                out.push(format!("j={j}: floor(floor(k_j(m-1)/m)/2)={} != 2j", fl / 2));
            }
            // interval membership: 4jm <= k(m-1) <= (4j+1)m, and minimality.
            if !(4 * j64 * m <= k64 * (m - 1) && k64 * (m - 1) <= (4 * j64 + 1) * m) {
                out.push(format!("j={j}: k_j={k} outside [4jm/(m-1), (4j+1)m/(m-1)]"));
            }
            if k64 > 0 && (k64 - 1) * (m - 1) >= 4 * j64 * m {
                out.push(format!("j={j}: k_j={k} is not the smallest admissible integer"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[u64]) -> Vec<Integer> {
        v.iter().map(|&x| Integer::from(x)).collect()
    }

    #[test]
    fn known_rows() {
        let t2 = build_coeff_table(2, 4).unwrap();
        assert_eq!(t2.row(2).unwrap(), ints(&[1, 1]).as_slice());
        // Hermite: k!/(2^n n!(k-2n)!) for k=4.
        assert_eq!(t2.row(4).unwrap(), ints(&[1, 6, 3]).as_slice());
        let t3 = build_coeff_table(3, 4).unwrap();
        // ∂^4 e^{λx³/3}: λ⁴x⁸ + 12λ³x⁵ + 20λ²x².
        assert_eq!(t3.row(4).unwrap(), ints(&[1, 12, 20]).as_slice());
        assert_eq!(t3.row(3).unwrap(), ints(&[1, 6, 2]).as_slice());
    }

    #[test]
    fn c21_is_m_minus_one() {
        for m in 2..=9 {
            let t = build_coeff_table(m, 2).unwrap();
            assert_eq!(*t.get(2, 1).unwrap(), m - 1);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(build_coeff_table(1, 5), Err(Error::DegreeTooSmall(1))));
        assert!(build_coeff_table(3, 0).is_err());
        let t = build_coeff_table(3, 5).unwrap();
        assert!(matches!(derivative_poly(&t, 6), Err(Error::OrderOutOfRange { k: 6, k_max: 5 })));
    }

    #[test]
    fn structured_view() {
        let t = build_coeff_table(2, 3).unwrap();
        let p1 = derivative_poly(&t, 1).unwrap();
        assert_eq!(p1.to_string(), "λ·x");
        let p0 = derivative_poly(&t, 0).unwrap();
        assert_eq!(p0.to_string(), "1");
        let t3 = build_coeff_table(3, 3).unwrap();
        let p3 = derivative_poly(&t3, 3).unwrap();
        assert_eq!(p3.to_string(), "λ^3·x^6 + 6·λ^2·x^3 + 2·λ");
        assert_eq!(p3.degree(), 6);
        let exps: Vec<_> = p3.terms().map(|t| t.x_exponent).collect();
        assert_eq!(exps, vec![6, 3, 0]);
    }

    #[test]
    fn exact_evaluations() {
        let t = build_coeff_table(2, 8).unwrap();
        // p1 = λx, |2i·8| = 16.
        let p1 = derivative_poly(&t, 1).unwrap();
        let g = p1.eval_gaussian(LambdaSign::Plus, &Integer::from(8));
        assert_eq!(g, GaussianInt { re: Integer::new(), im: Integer::from(16) });
        // p2 = λ²x² + λ at λ=2i, x=1: -4 + 2i.
        let p2 = derivative_poly(&t, 2).unwrap();
        let g = p2.eval_gaussian(LambdaSign::Plus, &Integer::from(1));
        assert_eq!(g, GaussianInt { re: Integer::from(-4), im: Integer::from(2) });
        let lm = eval_log_magnitude(&p2, LambdaSign::Plus, &EvalPoint::Integer(Integer::from(1)), 128).unwrap();
        assert!(lm.exact);
        let want = 20f64.sqrt().ln();
        assert!((lm.log_mag.to_f64() - want).abs() < 1e-15);
        // Lower bound at k1 = 8, x = 8: |p| >= 2^31.
        let p8 = derivative_poly(&t, 8).unwrap();
        for s in [LambdaSign::Plus, LambdaSign::Minus] {
            let g = p8.eval_gaussian(s, &Integer::from(8));
            assert!(g.norm_sqr() >= Integer::from(Integer::u_pow_u(2, 62)));
        }
    }

    #[test]
    fn rational_point_matches_real_point() {
        let t = build_coeff_table(3, 10).unwrap();
        let p = derivative_poly(&t, 10).unwrap();
        let r = Rational::from((7, 4));
        let exact = eval_log_magnitude(&p, LambdaSign::Minus, &EvalPoint::Rational(r), 256).unwrap();
        let real = eval_log_magnitude(&p, LambdaSign::Minus, &EvalPoint::Real(Float::with_val(64, 1.75)), 256).unwrap();
        assert!(exact.exact && !real.exact);
        let diff = Float::with_val(256, &exact.log_mag - &real.log_mag).abs();
        assert!(diff < Float::with_val(64, 2f64.powi(-32)));
    }

    #[test]
    fn eval_guards() {
        let t = build_coeff_table(2, 3).unwrap();
        let p = derivative_poly(&t, 3).unwrap();
        let x = EvalPoint::Integer(Integer::from(2));
        assert!(matches!(eval_log_magnitude(&p, LambdaSign::Plus, &x, 32), Err(Error::PrecisionTooLow { .. })));
        let neg = EvalPoint::Integer(Integer::from(-1));
        assert!(eval_log_magnitude(&p, LambdaSign::Plus, &neg, 128).is_err());
        // p3(0) = 0 for m = 2: λ³x³ + 3λ²x.
        let zero = eval_log_magnitude(&p, LambdaSign::Plus, &EvalPoint::Integer(Integer::new()), 128).unwrap();
        assert!(zero.log_mag.is_infinite() && zero.log_mag.is_sign_negative());
    }

    #[test]
    fn kj_examples() {
        assert_eq!(kj(2, 1), 8);
        assert_eq!(kj(3, 1), 6);
        assert_eq!(kj(4, 2), 11);
        for m in 2..=12 {
            let seq = kj_sequence(m, 40).unwrap();
            assert!(seq.invariant_violations().is_empty(), "m={m}: {:?}", seq.invariant_violations());
        }
        assert_eq!(kj_sequence(2, 4).unwrap().get(4), Some(32));
    }

    #[test]
    fn json_round_trip_and_shape_check() {
        let t = build_coeff_table(4, 9).unwrap();
        let doc = t.to_json();
        assert_eq!(doc.rows[1], vec!["1".to_string(), "3".to_string()]);
        assert_eq!(CoeffTable::from_json(&doc).unwrap(), t);
        let mut broken = doc.clone();
        broken.rows[3].pop();
        assert!(CoeffTable::from_json(&broken).is_err());
    }
}
