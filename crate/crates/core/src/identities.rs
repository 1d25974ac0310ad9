//! Exact verifiers for the identities and bounds satisfied by the
//! coefficient table. Every comparison is done on integers, or on
//! outward-rounded enclosures where a real power is unavoidable, so a pass is
//! a certificate at the tested parameters.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Serialize, Serializer};

use crate::derivpoly::{build_coeff_table, derivative_poly, kj_sequence, top_index, CoeffTable, LambdaSign};
use crate::error::{check_degree, Error, Result};
use crate::numeric::{format_float, parse_rational, Interval};

/// Counterexample fields, rendered as exact decimal strings.
pub type Witness = BTreeMap<String, String>;

const MAX_WITNESSES: usize = 32;
const RATIO_PREC: u32 = 128;

fn ser_opt_float<S: Serializer>(v: &Option<Float>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(f) => s.serialize_some(&format_float(f, 30)),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub params: String,
    pub pass: bool,
    pub checked: u64,
    pub failures: u64,
    /// At most the first 32 failures.
    pub witnesses: Vec<Witness>,
    #[serde(serialize_with = "ser_opt_float")]
    pub extremal_ratio: Option<Float>,
}

impl CheckResult {
    fn new(name: &str, params: String) -> Self {
        CheckResult {
            name: name.to_string(),
            params,
            pass: true,
            checked: 0,
            failures: 0,
            witnesses: Vec::new(),
            extremal_ratio: None,
        }
    }

    pub(crate) fn record(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.checked += 1;
        if !ok {
            self.pass = false;
            self.failures += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }

    pub(crate) fn named(name: &str, params: String) -> Self {
        Self::new(name, params)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {} ({} checked, {} failed)",
            self.name,
            self.params,
            if self.pass { "PASS" } else { "FAIL" },
            self.checked,
            self.failures
        )?;
        if let Some(r) = &self.extremal_ratio {
            write!(f, " extremal ratio {}", format_float(r, 12))?;
        }
        Ok(())
    }
}

pub(crate) fn witness<const N: usize>(fields: [(&str, String); N]) -> Witness {
    fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `θ = p/q` in lowest terms, `p, q >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RationalTheta {
    p: u64,
    q: u64,
}

impl RationalTheta {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidArgument(format!("θ = {p}/{q} must be positive")));
        }
        let g = gcd(p, q);
        Ok(RationalTheta { p: p / g, q: q / g })
    }

    pub fn integer(p: u64) -> Result<Self> {
        Self::new(p, 1)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn to_rational(&self) -> Rational {
        Rational::from((self.p, self.q))
    }

    pub fn to_f64(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// `θ >= 2/m`.
    pub fn at_least_two_over(&self, m: u32) -> bool {
        u128::from(self.p) * u128::from(m) >= 2 * u128::from(self.q)
    }
}

impl std::str::FromStr for RationalTheta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let r = parse_rational(s)?;
        let p = r.numer().to_u64().ok_or_else(|| Error::InvalidArgument(format!("θ = {s} out of range")))?;
        let q = r.denom().to_u64().ok_or_else(|| Error::InvalidArgument(format!("θ = {s} out of range")))?;
        RationalTheta::new(p, q)
    }
}

impl fmt::Display for RationalTheta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q == 1 {
            write!(f, "{}", self.p)
        } else {
            write!(f, "{}/{}", self.p, self.q)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn ratio_float(num: &Integer, den: &Integer) -> Float {
    Float::with_val(RATIO_PREC, &Rational::from((num.clone(), den.clone())))
}

/// `⌊(k+1)(m-1)/m⌋` equals `⌊k(m-1)/m⌋` when `m | k` and exceeds it by one
/// otherwise; also `⌊(k-1)/2⌋ <= ⌊k/2⌋ <= ⌊k(m-1)/m⌋ <= k-1`.
pub fn check_floor_identities(m: u32, k_max: u32) -> Result<CheckResult> {
    check_degree(m)?;
    let mut res = CheckResult::new("floor-identities", format!("m={m} k_max={k_max}"));
    for k in 1..=k_max {
        let now = top_index(m, k);
        let next = top_index(m, k + 1);
        let want = if k % m == 0 { now } else { now + 1 };
        res.record(next == want, || {
            witness([("k", k.to_string()), ("floor_k", now.to_string()), ("floor_k1", next.to_string())])
        });
        let half = (k / 2) as usize;
        let ok = (k as usize - 1) / 2 <= half && half <= now && now < k as usize;
        res.record(ok, || witness([("k", k.to_string()), ("index_bounds", now.to_string())]));
    }
    Ok(res)
}

/// `2·C[k][1] = (m-1)k(k-1)` for `2 <= k <= k_max`.
pub fn check_ck1_closed_form(table: &CoeffTable) -> Result<CheckResult> {
    if table.k_max() < 2 {
        return Err(Error::InvalidArgument("closed form for C[k][1] needs k_max >= 2".into()));
    }
    let m = table.m();
    let mut res = CheckResult::new("ck1-closed-form", format!("m={m} k_max={}", table.k_max()));
    for k in 2..=table.k_max() {
        let c = table.get(k, 1).unwrap();
        let rhs = Integer::from(u64::from(m - 1) * u64::from(k) * u64::from(k - 1));
        let lhs = Integer::from(c * 2u32);
        res.record(lhs == rhs, || {
            witness([("k", k.to_string()), ("c_k1", c.to_string()), ("formula", (rhs.clone() / 2u32).to_string())])
        });
    }
    Ok(res)
}

/// `2·C[k][2] <= m²k⁴` for `4 <= k <= k_max`; the extremal ratio is the
/// largest `2C[k][2]/(m²k⁴)`.
pub fn check_ck2_bound(table: &CoeffTable) -> Result<CheckResult> {
    if table.k_max() < 4 {
        return Err(Error::InvalidArgument("C[k][2] bound needs k_max >= 4".into()));
    }
    let m = table.m();
    let mut res = CheckResult::new("ck2-bound", format!("m={m} k_max={}", table.k_max()));
    let mut worst: Option<Float> = None;
    for k in 4..=table.k_max() {
        let c = table.get(k, 2).unwrap();
        let lhs = Integer::from(c * 2u32);
        let rhs = Integer::from(u64::from(m) * u64::from(m)) * Integer::from(Integer::u_pow_u(k, 4));
        res.record(lhs <= rhs, || witness([("k", k.to_string()), ("c_k2", c.to_string()), ("m2k4", rhs.to_string())]));
        let r = ratio_float(&lhs, &rhs);
        if worst.as_ref().is_none_or(|w| r > *w) {
            worst = Some(r);
        }
    }
    res.extremal_ratio = worst;
    Ok(res)
}

/// Per-`k` pass flags with witnesses, and the row's largest ratio.
type RowOutcome = (Vec<(bool, Witness)>, Option<Float>);

/// `C[k][n+1] <= C[k][n]·m·k^{mθ}` for `θ = p/q >= 2/m`, checked as
/// `C[k][n+1]^q <= C[k][n]^q · m^q · k^{mp}`.
pub fn check_ratio_bound(table: &CoeffTable, theta: RationalTheta) -> Result<CheckResult> {
    let m = table.m();
    if !theta.at_least_two_over(m) {
        return Err(Error::Hypothesis(format!("ratio bound requires θ >= 2/m; got θ={theta}, m={m}")));
    }
    let (p, q) = (theta.p() as u32, theta.q() as u32);
    let mut res = CheckResult::new("ratio-bound", format!("m={m} theta={theta} k_max={}", table.k_max()));
    let m_theta = Rational::from((u64::from(m) * u64::from(p), u64::from(q)));

    let rows: Vec<RowOutcome> = (2..=table.k_max())
        .into_par_iter()
        .map(|k| {
            let row = table.row(k).unwrap();
            let top = top_index(m, k);
            let kp = Integer::from(Integer::u_pow_u(k, m * p));
            let mq = Integer::from(Integer::u_pow_u(m, q));
            let k_pow = Interval::point(Float::with_val(RATIO_PREC, k))
                .pow_rational(&m_theta)
                .expect("k >= 2 is positive")
                .mid();
            let mut out = Vec::with_capacity(top);
            let mut worst: Option<Float> = None;
            for n in 0..top {
                let lhs = Integer::from((&row[n + 1]).pow(q));
                let rhs = Integer::from((&row[n]).pow(q)) * &mq * &kp;
                let ok = lhs <= rhs;
                let w = if ok {
                    Witness::new()
                } else {
                    witness([
                        ("k", k.to_string()),
                        ("n", n.to_string()),
                        ("c_next", row[n + 1].to_string()),
                        ("c", row[n].to_string()),
                    ])
                };
                out.push((ok, w));
                let mut r = ratio_float(&row[n + 1], &row[n]);
                r /= m;
                r /= &k_pow;
                if worst.as_ref().is_none_or(|cur| r > *cur) {
                    worst = Some(r);
                }
            }
            (out, worst)
        })
        .collect();

    let mut worst: Option<Float> = None;
    for (cells, w) in rows {
        for (ok, wit) in cells {
            res.record(ok, || wit);
        }
        if let Some(w) = w {
            if worst.as_ref().is_none_or(|cur| w > *cur) {
                worst = Some(w);
            }
        }
    }
    res.extremal_ratio = worst;
    Ok(res)
}

/// Enclosure of `f(x) = (1+x)^{mθ} - (1 - 1/m) x^{mθ-1} - 1`.
pub fn wedge_fn_enclosure(m: u32, theta: RationalTheta, x: &Rational, prec: u32) -> Interval {
    let a = Rational::from((u64::from(m) * theta.p(), theta.q()));
    let a1 = Rational::from(&a - 1u32);
    let one = Interval::point(Float::with_val(prec, 1));
    let xi = Interval::from_rational(prec, x);
    let lead = one.add(&xi).pow_rational(&a).expect("1 + x >= 1");
    let tail = if *x == 0 {
        Interval::zero(prec)
    } else {
        xi.pow_rational(&a1).expect("x > 0")
    };
    let weight = Interval::from_rational(prec, &Rational::from((m - 1, m)));
    lead.sub(&weight.mul(&tail)).sub(&one)
}

/// `f >= -2^-64` on the grid `i/grid_size`, plus `f(0) = 0` and
/// `f(1) = 2^{mθ} - 2 + 1/m`. The extremal ratio is the smallest certified
/// lower bound of `f` over the grid.
pub fn check_wedge_fn_nonneg(m: u32, theta: RationalTheta, grid_size: u32) -> Result<CheckResult> {
    check_degree(m)?;
    if !theta.at_least_two_over(m) {
        return Err(Error::Hypothesis(format!("auxiliary function bound requires θ >= 2/m; got θ={theta}, m={m}")));
    }
    if grid_size == 0 {
        return Err(Error::InvalidArgument("grid_size must be positive".into()));
    }
    let prec = 192;
    let mut res = CheckResult::new("aux-fn-nonneg", format!("m={m} theta={theta} grid={grid_size}"));
    let tol = Float::with_val(prec, -1) >> 64;

    let lows: Vec<Float> = (0..=grid_size)
        .into_par_iter()
        .map(|i| {
            let x = Rational::from((i, grid_size));
            wedge_fn_enclosure(m, theta, &x, prec).lo().clone()
        })
        .collect();
    let mut worst: Option<Float> = None;
    for (i, lo) in lows.into_iter().enumerate() {
        res.record(lo >= tol, || witness([("x", format!("{i}/{grid_size}")), ("f_lower", format_float(&lo, 20))]));
        if worst.as_ref().is_none_or(|w| lo < *w) {
            worst = Some(lo);
        }
    }

    let f0 = wedge_fn_enclosure(m, theta, &Rational::new(), prec);
    res.record(f0.contains_zero() && f0.certifies_absolute(100), || {
        witness([("endpoint", "0".into()), ("f_lower", format_float(f0.lo(), 20))])
    });

    let f1 = wedge_fn_enclosure(m, theta, &Rational::from(1), prec);
    let a = Rational::from((u64::from(m) * theta.p(), theta.q()));
    let two = Interval::point(Float::with_val(prec, 2));
    let expected = two
        .pow_rational(&a)
        .expect("2 > 0")
        .sub(&two)
        .add(&Interval::from_rational(prec, &Rational::from((1, m))));
    let overlap = f1.lo() <= expected.hi() && expected.lo() <= f1.hi();
    res.record(overlap && f1.certifies_absolute(100) && *f1.lo() > 0, || {
        witness([
            ("endpoint", "1".into()),
            ("f", format_float(&f1.mid(), 30)),
            ("expected", format_float(&expected.mid(), 30)),
        ])
    });
    res.extremal_ratio = worst;
    Ok(res)
}

/// `4|p_{±im,k_j}(k_j^θ)|² >= m^{2k_j} k_j^{2θk_j(m-1)}` for `1 <= j <= j_max`,
/// in Gaussian-integer arithmetic. Also checks the `k_j` invariants.
///
/// The extremal ratio is the smallest `4|p|² / (m^{2k} k^{2θk(m-1)})`.
pub fn check_lower_bound(m: u32, sign: LambdaSign, theta: u32, j_max: u32) -> Result<CheckResult> {
    check_degree(m)?;
    if theta == 0 {
        return Err(Error::Hypothesis("lower bound requires an integer θ >= 2/m, got θ=0".into()));
    }
    let kjs = kj_sequence(m, j_max)?;
    let mut res = CheckResult::new(
        "lower-bound",
        format!("m={m} lambda={} theta={theta} j_max={j_max}", if sign == LambdaSign::Plus { "+im" } else { "-im" }),
    );
    for v in kjs.invariant_violations() {
        res.record(false, || witness([("kj_invariant", v)]));
    }
    let k_top = kjs.iter().map(|(_, k)| k).max().unwrap_or(1);
    let table = build_coeff_table(m, k_top)?;

    let results: Vec<(u32, u32, Integer, Integer)> = kjs
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(j, k)| {
            let poly = derivative_poly(&table, k).expect("k within table");
            let x = Integer::from(Integer::u_pow_u(k, theta));
            let lhs = poly.eval_gaussian(sign, &x).norm_sqr() * 4u32;
            let rhs = Integer::from(Integer::u_pow_u(m, 2 * k))
                * Integer::from(Integer::u_pow_u(k, 2 * theta * k * (m - 1)));
            (j, k, lhs, rhs)
        })
        .collect();

    let mut worst: Option<Float> = None;
    for (j, k, lhs, rhs) in results {
        res.record(lhs >= rhs, || {
            witness([("j", j.to_string()), ("k_j", k.to_string()), ("four_p2", lhs.to_string()), ("bound", rhs.to_string())])
        });
        let r = ratio_float(&lhs, &rhs);
        if worst.as_ref().is_none_or(|w| r < *w) {
            worst = Some(r);
        }
    }
    res.extremal_ratio = worst;
    Ok(res)
}
