//! Independent ground truth for the coefficient table.
//!
//! Three routes, none sharing code with the table's convolution step:
//!
//! * a composition count: `C[k][n] = k!/(m^j j!) · [y^k]((1+y)^m - 1)^j`
//!   with `j = k - n`, from expanding `∂^k exp(λx^m/m)` by Faà di Bruno;
//! * symbolic differentiation of `p_{k+1} = λx^{m-1} p_k + p_k'` on sparse
//!   polynomials in `(λ, x)`;
//! * for `m = 2`, the three-term Hermite recurrence.
//!
//! All arithmetic here is exact.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rug::{Integer, Rational};
use serde::Serialize;

use crate::derivpoly::{top_index, CoeffTable};
use crate::error::{check_degree, Error, Result};

/// Product of two polynomials truncated above degree `deg`.
fn mul_truncated(a: &[Integer], b: &[Integer], deg: usize) -> Vec<Integer> {
    let len = (a.len() + b.len()).saturating_sub(1).min(deg + 1);
    let mut out = vec![Integer::new(); len];
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0 || i > deg {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(deg + 1 - i) {
            if *bj != 0 {
                out[i + j] += Integer::from(ai * bj);
            }
        }
    }
    out
}

/// `[y^k]((1+y)^m - 1)^parts`: the sum over compositions
/// `k_1 + ... + k_parts = k`, `1 <= k_l <= m`, of `Π binom(m, k_l)`.
pub fn composition_sum(m: u32, k: u32, parts: u32) -> Integer {
    let deg = k as usize;
    let base: Vec<Integer> = (0..=m.min(k))
        .map(|i| if i == 0 { Integer::new() } else { Integer::from(Integer::binomial_u(m, i)) })
        .collect();
    let mut acc = vec![Integer::from(1)];
    let mut sq = base;
    let mut e = parts;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_truncated(&acc, &sq, deg);
        }
        e >>= 1;
        if e > 0 {
            sq = mul_truncated(&sq, &sq, deg);
        }
    }
    acc.get(deg).cloned().unwrap_or_default()
}

/// `C[k][n]` from the composition count.
pub fn coeff_oracle(m: u32, k: u32, n: usize) -> Result<Integer> {
    check_degree(m)?;
    if k == 0 {
        return Err(Error::InvalidArgument("coefficient oracle needs k >= 1".into()));
    }
    let max = top_index(m, k);
    if n > max {
        return Err(Error::IndexOutOfRange { k, n, max });
    }
    let parts = k - n as u32;
    let s = composition_sum(m, k, parts);
    let num = Integer::from(Integer::factorial(k)) * s;
    let den = Integer::from(Integer::u_pow_u(m, parts)) * Integer::from(Integer::factorial(parts));
    let q = Rational::from((num, den));
    if *q.denom() != 1 {
        return Err(Error::OracleInvariant(format!("C[{k}][{n}] = {q} is not an integer (m={m})")));
    }
    Ok(q.numer().clone())
}

/// Sparse polynomial in `(λ, x)` keyed by `(λ-power, x-power)`.
type Sparse = BTreeMap<(u32, u32), Integer>;

/// Successive `p_0, p_1, ...` by symbolic differentiation.
#[derive(Clone, Debug)]
pub struct SymbolicRecursion {
    m: u32,
    k: u32,
    poly: Sparse,
}

impl SymbolicRecursion {
    pub fn new(m: u32) -> Result<Self> {
        check_degree(m)?;
        let mut poly = Sparse::new();
        poly.insert((0, 0), Integer::from(1));
        Ok(SymbolicRecursion { m, k: 0, poly })
    }

    /// Advances `p_k -> p_{k+1} = λ x^{m-1} p_k + ∂_x p_k`.
    pub fn step(&mut self) {
        let mut next = Sparse::new();
        for (&(a, b), c) in &self.poly {
            *next.entry((a + 1, b + self.m - 1)).or_default() += c;
            if b > 0 {
                *next.entry((a, b - 1)).or_default() += Integer::from(c * b);
            }
        }
        next.retain(|_, c| *c != 0);
        self.poly = next;
        self.k += 1;
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Current polynomial's coefficients keyed by `n`, after checking that
    /// every monomial is `λ^{k-n} x^{(m-1)k-nm}`.
    pub fn coefficients(&self) -> Result<BTreeMap<usize, Integer>> {
        let (m, k) = (self.m, self.k);
        let mut out = BTreeMap::new();
        for (&(a, b), c) in &self.poly {
            let n = k.checked_sub(a).ok_or_else(|| {
                Error::OracleInvariant(format!("λ-power {a} exceeds k={k}"))
            })?;
            let expected = i64::from((m - 1) * k) - i64::from(n) * i64::from(m);
            if i64::from(b) != expected {
                return Err(Error::OracleInvariant(format!(
                    "stray monomial λ^{a} x^{b} in p_{k} (m={m}), expected x^{expected}"
                )));
            }
            out.insert(n as usize, c.clone());
        }
        Ok(out)
    }
}

/// `p_k` by `k` symbolic recursion steps from `p_0 = 1`.
pub fn symbolic_recursion_oracle(m: u32, k: u32) -> Result<BTreeMap<usize, Integer>> {
    let mut rec = SymbolicRecursion::new(m)?;
    for _ in 0..k {
        rec.step();
    }
    rec.coefficients()
}

/// Physicists' Hermite polynomials `H_0..=H_k_max` as ascending coefficient
/// vectors.
fn hermite_polys(k_max: u32) -> Vec<Vec<Integer>> {
    let mut hs: Vec<Vec<Integer>> = vec![vec![Integer::from(1)]];
    if k_max >= 1 {
        hs.push(vec![Integer::new(), Integer::from(2)]);
    }
    for j in 1..k_max {
        let (prev, cur) = (&hs[j as usize - 1], &hs[j as usize]);
        let mut next = vec![Integer::new(); cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += Integer::from(c * 2u32);
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= Integer::from(c * (2 * j));
        }
        hs.push(next);
    }
    hs
}

fn hermite_to_coeffs(k: u32, h: &[Integer]) -> BTreeMap<usize, Integer> {
    // H_k(x) = Σ (-1)^n 2^{k-n} C[k][n] x^{k-2n}
    (0..=(k / 2) as usize)
        .map(|n| {
            let hc = &h[k as usize - 2 * n];
            let scale = Integer::from(Integer::u_pow_u(2, k - n as u32));
            assert!(hc.is_divisible(&scale), "Hermite coefficient not divisible by 2^(k-n)");
            let mut c = Integer::from(hc.div_exact_ref(&scale));
            if n % 2 == 1 {
                c = -c;
            }
            (n, c)
        })
        .collect()
}

/// `C[k][n] = k!/(2^n n!(k-2n)!)` for `m = 2`, read off `H_k` built by
/// `H_{k+1} = 2x H_k - 2k H_{k-1}`.
pub fn hermite_oracle(k: u32) -> BTreeMap<usize, Integer> {
    let hs = hermite_polys(k);
    hermite_to_coeffs(k, &hs[k as usize])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub k: u32,
    pub n: usize,
    pub table_value: String,
    pub oracle_value: String,
    /// Oracles that disagree with the table at this cell.
    pub oracles: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub m: u32,
    pub k_min: u32,
    pub k_max: u32,
    pub oracles: Vec<String>,
    pub cells_checked: u64,
    pub discrepancies: Vec<Discrepancy>,
}

impl OracleReport {
    pub fn certified(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

const GF: &str = "composition";
const SYMBOLIC: &str = "symbolic";
const HERMITE: &str = "hermite";

/// Compares every table entry against all applicable oracles.
pub fn certify(table: &CoeffTable) -> OracleReport {
    let m = table.m();
    let k_max = table.k_max();

    let symbolic: Vec<std::result::Result<BTreeMap<usize, Integer>, String>> = {
        let mut rec = SymbolicRecursion::new(m).expect("table degree already validated");
        (1..=k_max)
            .map(|_| {
                rec.step();
                rec.coefficients().map_err(|e| e.to_string())
            })
            .collect()
    };
    let hermite: Option<Vec<Vec<Integer>>> = (m == 2).then(|| hermite_polys(k_max));

    let per_k: Vec<(u64, Vec<Discrepancy>)> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let row = table.row(k).unwrap();
            let sym = &symbolic[k as usize - 1];
            let herm = hermite.as_ref().map(|hs| hermite_to_coeffs(k, &hs[k as usize]));
            let width = match sym {
                Ok(map) => map.keys().next_back().map_or(0, |&n| n + 1).max(row.len()),
                Err(_) => row.len(),
            };
            let mut found = Vec::new();
            for n in 0..width {
                let table_value = row.get(n).cloned().unwrap_or_default();
                let mut disagree = Vec::new();
                let mut reference: Option<String> = None;

                let gf = if n <= top_index(m, k) {
                    coeff_oracle(m, k, n).map_err(|e| e.to_string())
                } else {
                    Ok(composition_sum(m, k, k - n as u32))
                };
                match &gf {
                    Ok(v) if *v == table_value => {}
                    Ok(v) => {
                        disagree.push(GF.to_string());
                        reference.get_or_insert_with(|| v.to_string());
                    }
                    Err(e) => {
                        disagree.push(GF.to_string());
                        reference.get_or_insert_with(|| format!("error: {e}"));
                    }
                }
                match sym {
                    Ok(map) => {
                        let v = map.get(&n).cloned().unwrap_or_default();
                        if v != table_value {
                            disagree.push(SYMBOLIC.to_string());
                            reference.get_or_insert_with(|| v.to_string());
                        }
                    }
                    Err(e) => {
                        disagree.push(SYMBOLIC.to_string());
                        reference.get_or_insert_with(|| format!("error: {e}"));
                    }
                }
                if let Some(h) = &herm {
                    let v = h.get(&n).cloned().unwrap_or_default();
                    if v != table_value {
                        disagree.push(HERMITE.to_string());
                        reference.get_or_insert_with(|| v.to_string());
                    }
                }
                if !disagree.is_empty() {
                    found.push(Discrepancy {
                        k,
                        n,
                        table_value: table_value.to_string(),
                        oracle_value: reference.unwrap(),
                        oracles: disagree,
                    });
                }
            }
            (width as u64, found)
        })
        .collect();

    let mut oracles = vec![GF.to_string(), SYMBOLIC.to_string()];
    if m == 2 {
        oracles.push(HERMITE.to_string());
    }
    OracleReport {
        m,
        k_min: 1,
        k_max,
        oracles,
        cells_checked: per_k.iter().map(|(c, _)| c).sum(),
        discrepancies: per_k.into_iter().flat_map(|(_, d)| d).collect(),
    }
}
