//! Shared numeric plumbing: exact rational parsing/formatting and a
//! directed-rounding interval type over MPFR floats.

use std::cmp::Ordering;

use rug::float::{Round, Special};
use rug::ops::{AssignRound, Pow};
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Parses `p/q`, an integer, or a terminating decimal such as `2.5` into an
/// exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: Integer = num.trim().parse().map_err(|_| bad())?;
        let den: Integer = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(Error::InvalidArgument(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::from((num, den)));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: Integer = digits.parse().map_err(|_| bad())?;
    let den = Integer::from(10).pow(frac_part.len() as u32);
    let r = Rational::from((num, den));
    Ok(if negative { -r } else { r })
}

/// Exact decimal when the denominator divides a power of ten, `p/q` otherwise.
pub fn format_rational(r: &Rational) -> String {
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den.is_divisible_u(2) {
        den /= 2;
        twos += 1;
    }
    while den.is_divisible_u(5) {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    if places == 0 {
        return r.numer().to_string();
    }
    let scaled = (r * Rational::from(Integer::from(10).pow(places))).into_numer_denom().0;
    let negative = scaled < 0;
    let digits = Integer::from(scaled.abs_ref()).to_string();
    let width = places as usize + 1;
    let digits = format!("{digits:0>width$}");
    let (int_part, frac_part) = digits.split_at(digits.len() - places as usize);
    let frac_part = frac_part.trim_end_matches('0');
    let sign = if negative { "-" } else { "" };
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Decimal rendering with a fixed number of significant digits, so outputs
/// are stable across platforms.
pub fn format_float(f: &Float, digits: usize) -> String {
    if f.is_nan() {
        "nan".to_string()
    } else if f.is_infinite() {
        if f.is_sign_negative() { "-inf" } else { "inf" }.to_string()
    } else if f.is_zero() {
        "0".to_string()
    } else {
        f.to_string_radix(10, Some(digits))
    }
}

pub(crate) fn round_to<T>(prec: u32, value: T, round: Round) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, value, round).0
}

fn down<T>(prec: u32, value: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    round_to(prec, value, Round::Down)
}

fn up<T>(prec: u32, value: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    round_to(prec, value, Round::Up)
}

/// Closed interval `[lo, hi]` with endpoints rounded outward at every step.
#[derive(Clone, Debug)]
pub struct Interval {
    lo: Float,
    hi: Float,
}

impl Interval {
    pub fn point(x: Float) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn new(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn from_integer(prec: u32, v: &Integer) -> Self {
        Interval { lo: down(prec, v), hi: up(prec, v) }
    }

    pub fn from_rational(prec: u32, v: &Rational) -> Self {
        Interval { lo: down(prec, v), hi: up(prec, v) }
    }

    pub fn zero(prec: u32) -> Self {
        Interval::point(Float::new(prec))
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn is_exact_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    pub fn add(&self, other: &Interval) -> Interval {
        let p = self.prec().max(other.prec());
        Interval { lo: down(p, &self.lo + &other.lo), hi: up(p, &self.hi + &other.hi) }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        let p = self.prec().max(other.prec());
        Interval { lo: down(p, &self.lo - &other.hi), hi: up(p, &self.hi - &other.lo) }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: Float::with_val(self.hi.prec(), -&self.hi), hi: Float::with_val(self.lo.prec(), -&self.lo) }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let p = self.prec().max(other.prec());
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            // 0 * x is exactly 0; skip MPFR so infinities never meet zeros.
            let (d, u) = if a.is_zero() || b.is_zero() {
                (Float::new(p), Float::new(p))
            } else {
                (down(p, a * b), up(p, a * b))
            };
            lo = Some(match lo {
                Some(cur) if cur <= d => cur,
                _ => d,
            });
            hi = Some(match hi {
                Some(cur) if cur >= u => cur,
                _ => u,
            });
        }
        Interval { lo: lo.unwrap(), hi: hi.unwrap() }
    }

    pub fn square(&self) -> Interval {
        let p = self.prec();
        let a = down(p, self.lo.abs_ref());
        let b = down(p, self.hi.abs_ref());
        let (small, large) = if a <= b { (a, b) } else { (b, a) };
        let lo = if self.contains_zero() { Float::new(p) } else { down(p, small.square_ref()) };
        Interval { lo, hi: up(p, large.square_ref()) }
    }

    /// Integer power of an interval with nonnegative lower endpoint.
    pub fn pow_u32(&self, e: u32) -> Interval {
        debug_assert!(self.lo >= 0);
        let p = self.prec();
        Interval { lo: down(p, (&self.lo).pow(e)), hi: up(p, (&self.hi).pow(e)) }
    }

    pub fn exp(&self) -> Interval {
        let p = self.prec();
        Interval { lo: down(p, self.lo.exp_ref()), hi: up(p, self.hi.exp_ref()) }
    }

    /// Natural log; the interval must lie strictly right of zero.
    pub fn ln(&self) -> Result<Interval> {
        if self.lo <= 0 {
            return Err(Error::InsufficientPrecision {
                bits: self.prec(),
                detail: "logarithm of an enclosure touching zero".into(),
            });
        }
        let p = self.prec();
        Ok(Interval { lo: down(p, self.lo.ln_ref()), hi: up(p, self.hi.ln_ref()) })
    }

    /// `self^r` for a strictly positive base, evaluated as `exp(r ln self)`.
    pub fn pow_rational(&self, r: &Rational) -> Result<Interval> {
        if *r == 0 {
            return Ok(Interval::point(Float::with_val(self.prec(), 1)));
        }
        if *r.denom() == 1 && *r > 0 && self.lo >= 0 {
            if let Some(e) = r.numer().to_u32() {
                return Ok(self.pow_u32(e));
            }
        }
        let exponent = Interval::from_rational(self.prec(), r);
        Ok(exponent.mul(&self.ln()?).exp())
    }

    pub fn mid(&self) -> Float {
        let p = self.prec();
        if self.lo == self.hi {
            return Float::with_val(p, &self.lo);
        }
        let mut s = Float::with_val(p + 1, &self.lo + &self.hi);
        s /= 2;
        Float::with_val(p, s)
    }

    pub fn width(&self) -> Float {
        up(self.prec(), &self.hi - &self.lo)
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> Float {
        let a = Float::with_val(self.prec(), self.lo.abs_ref());
        let b = Float::with_val(self.prec(), self.hi.abs_ref());
        if a >= b {
            a
        } else {
            b
        }
    }

    /// Smallest absolute value in the interval (zero if it straddles zero).
    pub fn mig(&self) -> Float {
        if self.contains_zero() {
            return Float::new(self.prec());
        }
        let a = Float::with_val(self.prec(), self.lo.abs_ref());
        let b = Float::with_val(self.prec(), self.hi.abs_ref());
        if a <= b {
            a
        } else {
            b
        }
    }

    /// `true` when the midpoint carries relative error below `2^-bits`, or the
    /// enclosure is the exact point zero.
    pub fn certifies_relative(&self, bits: i32) -> bool {
        if self.is_exact_zero() {
            return true;
        }
        let mig = self.mig();
        if mig.is_zero() {
            return false;
        }
        // |mid - v| <= width/2 and |v| >= mig.
        let mut bound = Float::with_val(self.prec(), 1);
        bound >>= bits;
        let rel = up(self.prec(), self.width() / &mig);
        rel <= bound
    }

    pub fn certifies_absolute(&self, bits: i32) -> bool {
        let mut bound = Float::with_val(self.prec(), 1);
        bound >>= bits;
        self.width() < bound
    }
}

pub(crate) fn neg_infinity(prec: u32) -> Float {
    Float::with_val(prec, Special::NegInfinity)
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub(crate) fn ols_slope(xs: &[Float], ys: &[Float], prec: u32) -> Float {
    let n = xs.len() as u32;
    let mut sx = Float::new(prec);
    let mut sy = Float::new(prec);
    for (x, y) in xs.iter().zip(ys) {
        sx += x;
        sy += y;
    }
    sx /= n;
    sy /= n;
    let mut sxx = Float::new(prec);
    let mut sxy = Float::new(prec);
    for (x, y) in xs.iter().zip(ys) {
        let dx = Float::with_val(prec, x - &sx);
        let dy = Float::with_val(prec, y - &sy);
        sxy += Float::with_val(prec, &dx * &dy);
        sxx += Float::with_val(prec, dx.square_ref());
    }
    if sxx.is_zero() {
        return Float::new(prec);
    }
    Float::with_val(prec, sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("2/3").unwrap(), Rational::from((2, 3)));
        assert_eq!(parse_rational("2.5").unwrap(), Rational::from((5, 2)));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::from((-1, 4)));
        assert_eq!(parse_rational("7").unwrap(), Rational::from(7));
        assert_eq!(parse_rational("4/6").unwrap(), Rational::from((2, 3)));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn formats_terminating_decimals_exactly() {
        assert_eq!(format_rational(&Rational::from((5, 2))), "2.5");
        assert_eq!(format_rational(&Rational::from((1, 3))), "1/3");
        assert_eq!(format_rational(&Rational::from((-3, 8))), "-0.375");
        assert_eq!(format_rational(&Rational::from((1, 20))), "0.05");
        assert_eq!(format_rational(&Rational::from(4)), "4");
    }

    #[test]
    fn interval_ops_enclose_true_values() {
        let p = 64;
        let third = Interval::from_rational(p, &Rational::from((1, 3)));
        assert!(third.lo() < third.hi());
        let sum = third.add(&third).add(&third);
        assert!(*sum.lo() <= 1 && *sum.hi() >= 1);
        let sq = Interval::new(Float::with_val(p, -2), Float::with_val(p, 3)).square();
        assert_eq!(*sq.lo(), 0);
        assert_eq!(*sq.hi(), 9);
        let e = Interval::point(Float::with_val(p, 1)).exp();
        assert!(*e.lo() < *e.hi());
        assert!(e.certifies_relative(60));
    }

    #[test]
    fn rational_powers_of_positive_base() {
        let p = 128;
        let eight = Interval::point(Float::with_val(p, 8));
        let r = eight.pow_rational(&Rational::from((1, 3))).unwrap();
        assert!(*r.lo() <= 2 && *r.hi() >= 2);
        assert!(r.certifies_relative(100));
    }
}
