//! Growth probe: `|(D^k g)(x_k)·f(x_k)|` for `g = exp(±i x^m)`,
//! `f = exp(-⟨x⟩^{1/ν})` and `x_k = k^θ`, with a least-squares rate estimate
//! and the divergence criterion along the `k_j` sequence.
//!
//! Since `|g(x)| = 1` on the real line, `ln|(D^k g)(x)| = ln|p_{±im,k}(x)|`.

use std::io::Write;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::derivpoly::{
    build_coeff_table, default_precision, derivative_poly, eval_log_magnitude, kj, EvalPoint, LambdaSign,
};
use crate::error::{check_degree, Error, Result};
use crate::identities::{witness, CheckResult, RationalTheta};
use crate::numeric::{format_float, ols_slope, Interval};

/// Precision of the regression and of the decay term.
pub const REGRESSION_PRECISION: u32 = 128;
/// Fewest tail records [`estimate_rate`] accepts. Three is the smallest fit
/// that leaves a residual; the `k_j` sequences are sparse (five terms below 30
/// for `m = 3`), so anything larger rules out fits along them.
pub const MIN_TAIL_RECORDS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KRange {
    /// `lo..=hi`.
    Consecutive { lo: u32, hi: u32 },
    /// Every `k_j` with `k_j <= k_max`.
    KjUpTo(u32),
    Explicit(Vec<u32>),
}

impl KRange {
    pub fn values(&self, m: u32) -> Vec<u32> {
        match self {
            KRange::Consecutive { lo, hi } => (*lo.max(&1)..=*hi).collect(),
            KRange::KjUpTo(k_max) => (1..).map(|j| kj(m, j)).take_while(|k| k <= k_max).collect(),
            KRange::Explicit(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub m: u32,
    pub sign: LambdaSign,
    /// Evaluation exponent: `x_k = k^θ`.
    pub theta: RationalTheta,
    /// Decay exponent of `f`.
    pub nu: RationalTheta,
    pub k_range: KRange,
    /// Working precision for non-integer points; `None` derives it from `k`.
    pub precision_bits: Option<u32>,
}

impl ProbeConfig {
    pub fn new(m: u32, theta: RationalTheta, nu: RationalTheta, k_range: KRange) -> Self {
        ProbeConfig { m, sign: LambdaSign::Plus, theta, nu, k_range, precision_bits: None }
    }

    /// `m >= 2`, `θ >= 2/m`, and `ν > 2/m` whenever `ν < θ`.
    pub fn validate(&self) -> Result<()> {
        check_degree(self.m)?;
        if !self.theta.at_least_two_over(self.m) {
            return Err(Error::Hypothesis(format!("probe requires θ >= 2/m; got θ={}, m={}", self.theta, self.m)));
        }
        let nu_below = u128::from(self.nu.p()) * u128::from(self.theta.q()) < u128::from(self.theta.p()) * u128::from(self.nu.q());
        let nu_above_floor = u128::from(self.nu.p()) * u128::from(self.m) > 2 * u128::from(self.nu.q());
        if nu_below && !nu_above_floor {
            return Err(Error::Hypothesis(format!("probe with ν < θ requires ν > 2/m; got ν={}, m={}", self.nu, self.m)));
        }
        if let KRange::Consecutive { lo, hi } = self.k_range {
            if lo > hi {
                return Err(Error::InvalidArgument(format!("empty k range {lo}..={hi}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ProbeRecord {
    pub k: u32,
    pub x_k: Float,
    /// `ln|p_{±im,k}(x_k)|`.
    pub log_abs_p: Float,
    /// `ln|(D^k g)(x_k)·f(x_k)|`.
    pub log_dkg_f: Float,
    /// `(log_dkg_f + ⟨x_k⟩^{1/ν}) / (k·ln max(k, 2))`.
    pub rate: Float,
    /// `true` when `p` was evaluated in exact arithmetic.
    pub exact: bool,
}

/// `⟨x⟩^{1/ν}` at the regression precision.
fn decay(x: &Float, nu: RationalTheta) -> Float {
    let prec = REGRESSION_PRECISION.max(x.prec());
    let xi = Interval::point(Float::with_val(prec, x));
    let base = Interval::point(Float::with_val(prec, 1)).add(&xi.square());
    let e = Rational::from((nu.q(), 2 * nu.p()));
    base.pow_rational(&e).expect("1 + x² is positive").mid()
}

fn k_log_k(k: u32) -> Float {
    let kf = Float::with_val(REGRESSION_PRECISION, k.max(2));
    Float::with_val(REGRESSION_PRECISION, kf.ln_ref()) * k
}

fn probe_one(cfg: &ProbeConfig, table: &crate::derivpoly::CoeffTable, k: u32) -> Result<ProbeRecord> {
    let poly = derivative_poly(table, k)?;
    let (point, x_k) = if cfg.theta.q() == 1 {
        let x = Integer::from(Integer::u_pow_u(k, cfg.theta.p() as u32));
        let xf = Float::with_val(REGRESSION_PRECISION.max(x.significant_bits()), &x);
        (EvalPoint::Integer(x), xf)
    } else {
        let prec = cfg.precision_bits.unwrap_or_else(|| default_precision(cfg.m, k, cfg.theta.to_f64()));
        let kf = Float::with_val(prec, k);
        let x = Float::with_val(prec, kf.pow(Float::with_val(prec, &cfg.theta.to_rational())));
        (EvalPoint::Real(x.clone()), x)
    };
    let prec = cfg.precision_bits.unwrap_or(REGRESSION_PRECISION).max(REGRESSION_PRECISION);
    let lm = eval_log_magnitude(&poly, cfg.sign, &point, prec)?;
    let log_abs_p = Float::with_val(REGRESSION_PRECISION, &lm.log_mag);
    let d = decay(&x_k, cfg.nu);
    let log_dkg_f = Float::with_val(REGRESSION_PRECISION, &log_abs_p - &d);
    let rate = Float::with_val(REGRESSION_PRECISION, &log_abs_p / &k_log_k(k));
    Ok(ProbeRecord { k, x_k, log_abs_p, log_dkg_f, rate, exact: lm.exact })
}

/// One record per `k` in the configured range, in range order.
pub fn probe_series(cfg: &ProbeConfig) -> Result<Vec<ProbeRecord>> {
    cfg.validate()?;
    let ks = cfg.k_range.values(cfg.m);
    let Some(&k_top) = ks.iter().max() else {
        return Ok(Vec::new());
    };
    let table = build_coeff_table(cfg.m, k_top)?;
    ks.par_iter().map(|&k| probe_one(cfg, &table, k)).collect()
}

/// Least-squares slope of `log_dkg_f + ⟨x_k⟩^{1/ν}` (that is, `ln|p|`)
/// against `k·ln k` over the last `⌈n·tail_fraction⌉` records.
pub fn estimate_rate(records: &[ProbeRecord], tail_fraction: f64) -> Result<Float> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("tail fraction {tail_fraction} outside (0, 1]")));
    }
    let n = records.len();
    let tail = ((n as f64) * tail_fraction).ceil() as usize;
    if tail < MIN_TAIL_RECORDS {
        return Err(Error::TooFewRecords { need: MIN_TAIL_RECORDS, got: tail });
    }
    let recs = &records[n - tail..];
    let xs: Vec<Float> = recs.iter().map(|r| k_log_k(r.k)).collect();
    let ys: Vec<Float> = recs.iter().map(|r| Float::with_val(REGRESSION_PRECISION, &r.log_abs_p)).collect();
    Ok(ols_slope(&xs, &ys, REGRESSION_PRECISION))
}

/// Records along `k = k_j` that break `ln|p| >= ln ½ + k ln m + θ(m-1) k ln k`
/// (only meaningful for integer `θ`).
pub fn lower_bound_violations(cfg: &ProbeConfig, records: &[ProbeRecord]) -> Vec<u32> {
    let prec = REGRESSION_PRECISION;
    let kjs: Vec<u32> = KRange::KjUpTo(records.iter().map(|r| r.k).max().unwrap_or(0)).values(cfg.m);
    let slack = Float::with_val(prec, 1) >> 60;
    records
        .iter()
        .filter(|r| kjs.contains(&r.k))
        .filter(|r| {
            let m = Float::with_val(prec, cfg.m);
            let mut bound = -Float::with_val(prec, Float::with_val(prec, 2).ln());
            bound += Float::with_val(prec, m.ln_ref()) * r.k;
            bound += k_log_k(r.k) * (cfg.theta.to_rational() * (cfg.m - 1));
            Float::with_val(prec, &r.log_abs_p + &slack) < bound
        })
        .map(|r| r.k)
        .collect()
}

pub fn write_probe_csv<W: Write>(records: &[ProbeRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "x", "log_dkg_f", "rate"])?;
    for r in records {
        w.write_record([r.k.to_string(), format_float(&r.x_k, 30), format_float(&r.log_dkg_f, 30), format_float(&r.rate, 30)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub check: CheckResult,
    /// `(j, k_j, Δ(j))` with `Δ(j) = ln|p_{λ,k_j}(k_j^θ)| - s·k_j·ln k_j`.
    pub deltas: Vec<(u32, u32, String)>,
}

/// `Δ(j)` strictly increasing in `j` and `Δ(j_max) - Δ(1) > k_{j_max}`.
/// Requires `0 < s < (m-1)θ`.
pub fn criterion_check(m: u32, theta: u32, s: &Rational, j_max: u32, sign: LambdaSign) -> Result<CriterionReport> {
    check_degree(m)?;
    if theta == 0 || theta * m < 2 {
        return Err(Error::Hypothesis(format!("criterion requires an integer θ >= 2/m; got θ={theta}")));
    }
    if *s <= 0 || *s >= theta * (m - 1) {
        return Err(Error::Hypothesis(format!("criterion requires 0 < s < (m-1)θ = {}", theta * (m - 1))));
    }
    if j_max < 2 {
        return Err(Error::InvalidArgument("criterion needs j_max >= 2".into()));
    }
    let ks: Vec<u32> = (1..=j_max).map(|j| kj(m, j)).collect();
    let cfg = ProbeConfig {
        sign,
        ..ProbeConfig::new(m, RationalTheta::integer(u64::from(theta))?, RationalTheta::integer(u64::from(theta))?, KRange::Explicit(ks.clone()))
    };
    let records = probe_series(&cfg)?;
    let deltas: Vec<Float> = records
        .iter()
        .map(|r| Float::with_val(REGRESSION_PRECISION, &r.log_abs_p - k_log_k(r.k) * s))
        .collect();

    let mut res = CheckResult::named("divergence-criterion", format!("m={m} theta={theta} s={} j_max={j_max}", crate::numeric::format_rational(s)));
    for j in 1..deltas.len() {
        res.record(deltas[j] > deltas[j - 1], || {
            witness([("j", (j + 1).to_string()), ("delta_prev", format_float(&deltas[j - 1], 20)), ("delta", format_float(&deltas[j], 20))])
        });
    }
    let spread = Float::with_val(REGRESSION_PRECISION, &deltas[deltas.len() - 1] - &deltas[0]);
    let k_top = *ks.last().unwrap();
    res.record(spread > k_top, || witness([("spread", format_float(&spread, 20)), ("k_jmax", k_top.to_string())]));
    res.extremal_ratio = Some(Float::with_val(REGRESSION_PRECISION, &spread / k_top));
    let deltas = ks
        .iter()
        .zip(&deltas)
        .enumerate()
        .map(|(i, (k, d))| (i as u32 + 1, *k, format_float(d, 30)))
        .collect();
    Ok(CriterionReport { check: res, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(s: &str) -> RationalTheta {
        s.parse().unwrap()
    }

    #[test]
    fn first_record_m2() {
        let cfg = ProbeConfig::new(2, th("1"), th("1"), KRange::Consecutive { lo: 1, hi: 1 });
        let r = &probe_series(&cfg).unwrap()[0];
        let want = Float::with_val(128, Float::with_val(128, 2).ln()) - Float::with_val(128, 2).sqrt();
        assert!(Float::with_val(128, &r.log_dkg_f - &want).abs() < 1e-30);
        assert!(r.exact && r.rate.is_finite());
    }

    #[test]
    fn k8_lower_bound() {
        let cfg = ProbeConfig::new(2, th("1"), th("1"), KRange::Explicit(vec![8]));
        let recs = probe_series(&cfg).unwrap();
        let r = &recs[0];
        // ln(½·2⁸·8⁸) - ⟨8⟩.
        let bound = Float::with_val(128, Float::with_val(128, 2).ln()) * 31 - Float::with_val(128, 65).sqrt();
        assert!(r.log_dkg_f >= bound);
        assert!(lower_bound_violations(&cfg, &recs).is_empty());
    }

    #[test]
    fn empty_range_and_validation() {
        let cfg = ProbeConfig::new(2, th("1"), th("1"), KRange::Explicit(vec![]));
        assert!(probe_series(&cfg).unwrap().is_empty());
        assert!(ProbeConfig::new(4, th("1/4"), th("1/4"), KRange::KjUpTo(10)).validate().is_err());
        assert!(ProbeConfig::new(2, th("2"), th("3/2"), KRange::KjUpTo(10)).validate().is_ok());
        assert!(ProbeConfig::new(2, th("2"), th("1"), KRange::KjUpTo(10)).validate().is_err());
        assert!(ProbeConfig::new(4, th("1"), th("1/2"), KRange::KjUpTo(10)).validate().is_err());
        assert!(ProbeConfig::new(2, th("1"), th("1"), KRange::Consecutive { lo: 5, hi: 2 }).validate().is_err());
    }

    #[test]
    fn rate_of_constant_records_is_zero() {
        let recs: Vec<ProbeRecord> = (1..=16)
            .map(|k| ProbeRecord {
                k,
                x_k: Float::with_val(128, k),
                log_abs_p: Float::with_val(128, 3),
                log_dkg_f: Float::with_val(128, 3),
                rate: Float::with_val(128, 0),
                exact: true,
            })
            .collect();
        assert_eq!(estimate_rate(&recs, 0.5).unwrap(), 0);
        assert!(matches!(estimate_rate(&recs[..4], 0.5), Err(Error::TooFewRecords { .. })));
    }

    #[test]
    fn non_integer_theta_matches_rational_eval() {
        let cfg = ProbeConfig::new(3, th("3/2"), th("3/2"), KRange::Explicit(vec![4]));
        let r = &probe_series(&cfg).unwrap()[0];
        assert!(!r.exact);
        // x = 8, evaluated exactly.
        let t = build_coeff_table(3, 4).unwrap();
        let exact = eval_log_magnitude(&derivative_poly(&t, 4).unwrap(), LambdaSign::Plus, &EvalPoint::Integer(Integer::from(8)), 128).unwrap();
        assert!(Float::with_val(128, &r.log_abs_p - &exact.log_mag).abs() < 1e-9);
    }

    #[test]
    fn criterion_examples() {
        let r = criterion_check(2, 1, &Rational::from((1, 2)), 4, LambdaSign::Plus).unwrap();
        assert!(r.check.pass, "{}", r.check);
        assert_eq!(r.deltas.len(), 4);
        assert!(criterion_check(3, 1, &Rational::from(1), 4, LambdaSign::Minus).unwrap().check.pass);
        assert!(matches!(criterion_check(2, 1, &Rational::from(3), 4, LambdaSign::Plus), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn csv_is_deterministic() {
        let cfg = ProbeConfig::new(2, th("1"), th("1"), KRange::Consecutive { lo: 1, hi: 12 });
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_probe_csv(&probe_series(&cfg).unwrap(), &mut a).unwrap();
        write_probe_csv(&probe_series(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("k,x,log_dkg_f,rate\n1,"));
    }
}
