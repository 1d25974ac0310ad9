//! The `gsm` command line.
//!
//! Exit status: `0` when every check passes, `1` when a check fails or a
//! computation cannot be certified, `2` on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rug::Rational;
use serde_json::json;

use crate::derivpoly::{build_coeff_table, derivative_poly, LambdaSign};
use crate::error::{Error, Result};
use crate::gsfunc::{
    pairing_table, seminorm, DEFAULT_MAX_TAIL_SLOPE, verify_bracket_bound, verify_gs_bound, Grid, SeminormKind, SeminormParams, TestFunction,
    Truncation,
};
use crate::identities::{
    check_ck1_closed_form, check_ck2_bound, check_floor_identities, check_lower_bound, check_ratio_bound,
    check_wedge_fn_nonneg, CheckResult, RationalTheta,
};
use crate::numeric::{format_float, format_rational, parse_rational};
use crate::oracle::certify;
use crate::probe::{criterion_check, estimate_rate, lower_bound_violations, probe_series, write_probe_csv, KRange, ProbeConfig, MIN_TAIL_RECORDS};
use crate::wedge::{classify, emit_region_grid, FigureFormat, Mode, RegionGrid, Space, WedgeQuery};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_PRECISION: u32 = 256;

#[derive(Debug, Parser)]
#[command(name = "gsm", version, about = "Derivative polynomials of exp(λx^m/m), identity verifiers and Gelfand-Shilov tools")]
pub struct Cli {
    /// Working precision in bits for floating-point evaluations.
    #[arg(long, global = true, env = "GSM_PRECISION_BITS")]
    pub precision_bits: Option<u32>,

    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Print results as JSON.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print or save the coefficient table C[k][n].
    Table(TableArgs),
    /// Check the table and its identities; exits 1 on any failure.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Derivative bounds and seminorms of exp(-<x>^(1/θ)).
    #[command(subcommand)]
    Gs(GsCommand),
    /// Classify multipliers and propagators over (θ, s).
    #[command(subcommand)]
    Wedge(WedgeCommand),
    /// Growth of |D^k g · f| along x_k = k^θ.
    #[command(subcommand)]
    Probe(ProbeCommand),
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub kmax: u32,
    /// Write the table as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print p_k as a polynomial instead of coefficient rows.
    #[arg(long)]
    pub poly: bool,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Compare the table against the independent oracles.
    Coeffs {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        kmax: u32,
    },
    /// Run the exact identity and bound checks.
    Identities {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        kmax: u32,
        /// Exponents for the ratio bound; defaults to 2/m and 1.
        #[arg(long = "theta")]
        thetas: Vec<String>,
        /// Largest j for the lower bound along k_j.
        #[arg(long, default_value_t = 2)]
        jmax: u32,
        /// Grid size for the auxiliary function check.
        #[arg(long, default_value_t = 256)]
        grid: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum GsCommand {
    /// Sweep the derivative bound of exp(-<x>^{1/θ}), or of <x>^t with --bracket-t.
    Bound {
        #[arg(long, default_value = "1")]
        theta: String,
        #[arg(long)]
        kmax: u32,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        bracket_t: Option<String>,
        /// Largest accepted tail slope of ln C_emp against k.
        #[arg(long, default_value_t = DEFAULT_MAX_TAIL_SLOPE)]
        max_slope: f64,
    },
    /// Truncated seminorm estimate (a certified lower bound).
    Seminorm {
        #[arg(long)]
        kind: String,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        s: String,
        #[arg(long)]
        kmax: u32,
        /// Largest power order for the h-family.
        #[arg(long)]
        alpha_max: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// `gs` for exp(-<x>^{1/θ}) or `gaussian` for exp(-x²).
        #[arg(long, default_value = "gs")]
        function: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also print the a-family versus h-family comparison for these h values.
        #[arg(long = "pair-h")]
        pair_h: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum WedgeCommand {
    Classify {
        #[arg(long)]
        theta: String,
        #[arg(long)]
        s: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        space: String,
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long)]
        monomial: bool,
        #[arg(long)]
        propagator: bool,
        #[arg(long, requires = "propagator")]
        t_nonzero: bool,
    },
    /// Emit the (θ, s) region grid.
    Figure {
        #[arg(long)]
        m: u32,
        #[arg(long, default_value = "roumieu")]
        space: String,
        #[arg(long)]
        format: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        monomial: bool,
        #[arg(long, default_value = "2")]
        theta_max: String,
        #[arg(long, default_value = "4")]
        s_max: String,
        #[arg(long, default_value = "1/20")]
        step: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    Run {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        theta: String,
        /// Decay exponent; defaults to θ.
        #[arg(long)]
        nu: Option<String>,
        #[arg(long)]
        kmax: u32,
        /// Only evaluate along the k_j sequence.
        #[arg(long)]
        kj: bool,
        #[arg(long, default_value = "+", allow_hyphen_values = true)]
        sign: String,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Criterion {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        theta: u32,
        #[arg(long)]
        s: String,
        #[arg(long)]
        jmax: u32,
        #[arg(long, default_value = "+", allow_hyphen_values = true)]
        sign: String,
    },
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    json: bool,
    precision: Option<u32>,
    out_dir: Option<PathBuf>,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn create(&self, p: &Path) -> Result<BufWriter<File>> {
        let path = self.path(p);
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    fn prec(&self) -> u32 {
        self.precision.unwrap_or(DEFAULT_PRECISION)
    }

    fn checks(&mut self, results: &[CheckResult]) -> Result<i32> {
        if self.json {
            writeln!(self.out, "{}", serde_json::to_string_pretty(results)?)?;
        } else {
            for r in results {
                writeln!(self.out, "{r}")?;
                for w in &r.witnesses {
                    writeln!(self.out, "  witness: {}", serde_json::to_string(w)?)?;
                }
            }
        }
        Ok(if results.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DegreeTooSmall(_)
        | Error::OrderOutOfRange { .. }
        | Error::IndexOutOfRange { .. }
        | Error::PrecisionTooLow { .. }
        | Error::Hypothesis(_)
        | Error::InvalidArgument(_)
        | Error::TooFewRecords { .. }
        | Error::Unsupported(_) => EXIT_USAGE,
        _ => EXIT_CHECK_FAILED,
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => {
                let mut buf = Vec::new();
                let r = pool.install(|| run(&cli, &mut buf));
                let _ = out.write_all(&buf);
                r
            }
            Err(e) => Err(Error::InvalidArgument(format!("--threads {n}: {e}"))),
        },
        None => run(&cli, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    if let Some(p) = cli.precision_bits {
        if p < 64 {
            return Err(Error::PrecisionTooLow { got: p, min: 64 });
        }
    }
    let mut ctx = Ctx { out, json: cli.json, precision: cli.precision_bits, out_dir: cli.out_dir.clone() };
    match &cli.command {
        Command::Table(a) => run_table(&mut ctx, a),
        Command::Verify(v) => run_verify(&mut ctx, v),
        Command::Gs(g) => run_gs(&mut ctx, g),
        Command::Wedge(w) => run_wedge(&mut ctx, w),
        Command::Probe(p) => run_probe(&mut ctx, p),
    }
}

fn theta_arg(s: &str) -> Result<RationalTheta> {
    s.parse()
}

fn run_table(ctx: &mut Ctx<'_>, a: &TableArgs) -> Result<i32> {
    let table = build_coeff_table(a.m, a.kmax)?;
    if let Some(path) = &a.out {
        table.write_json(ctx.create(path)?)?;
    }
    if ctx.json {
        writeln!(ctx.out, "{}", serde_json::to_string_pretty(&table.to_json())?)?;
    } else if a.poly {
        for k in 0..=a.kmax {
            writeln!(ctx.out, "p_{k} = {}", derivative_poly(&table, k)?)?;
        }
    } else {
        for k in 0..=a.kmax {
            let row: Vec<String> = table.row(k).unwrap().iter().map(|c| c.to_string()).collect();
            writeln!(ctx.out, "{k}: {}", row.join(" "))?;
        }
    }
    Ok(EXIT_OK)
}

fn run_verify(ctx: &mut Ctx<'_>, v: &VerifyCommand) -> Result<i32> {
    match v {
        VerifyCommand::Coeffs { m, kmax } => {
            let table = build_coeff_table(*m, *kmax)?;
            let report = certify(&table);
            if ctx.json {
                writeln!(ctx.out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(
                    ctx.out,
                    "oracle equivalence m={m} k<={kmax} [{}]: {} cells, {} discrepancies: {}",
                    report.oracles.join(", "),
                    report.cells_checked,
                    report.discrepancies.len(),
                    if report.certified() { "PASS" } else { "FAIL" }
                )?;
                for d in &report.discrepancies {
                    writeln!(
                        ctx.out,
                        "  C[{}][{}] table={} oracle={} ({})",
                        d.k,
                        d.n,
                        d.table_value,
                        d.oracle_value,
                        d.oracles.join(", ")
                    )?;
                }
            }
            Ok(if report.certified() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        VerifyCommand::Identities { m, kmax, thetas, jmax, grid } => {
            let table = build_coeff_table(*m, *kmax)?;
            let mut thetas: Vec<RationalTheta> = if thetas.is_empty() {
                vec![RationalTheta::new(2, u64::from(*m))?, RationalTheta::integer(1)?]
            } else {
                thetas.iter().map(|t| theta_arg(t)).collect::<Result<_>>()?
            };
            let mut seen = std::collections::HashSet::new();
            thetas.retain(|t| seen.insert(*t));
            let mut results = vec![check_floor_identities(*m, *kmax)?];
            if *kmax >= 2 {
                results.push(check_ck1_closed_form(&table)?);
            }
            if *kmax >= 4 {
                results.push(check_ck2_bound(&table)?);
            }
            for th in &thetas {
                results.push(check_ratio_bound(&table, *th)?);
                results.push(check_wedge_fn_nonneg(*m, *th, *grid)?);
                if th.q() == 1 && *jmax >= 1 {
                    for sign in [LambdaSign::Plus, LambdaSign::Minus] {
                        results.push(check_lower_bound(*m, sign, th.p() as u32, *jmax)?);
                    }
                }
            }
            ctx.checks(&results)
        }
    }
}

fn run_gs(ctx: &mut Ctx<'_>, g: &GsCommand) -> Result<i32> {
    let prec = ctx.prec();
    match g {
        GsCommand::Bound { theta, kmax, grid, bracket_t, max_slope } => {
            let grid: Option<Grid> = grid.as_deref().map(str::parse).transpose()?;
            if let Some(t) = bracket_t {
                let t = parse_rational(t)?;
                let grid = grid.unwrap_or(Grid::Uniform { lo: Rational::from(-10), hi: Rational::from(10), n: 201 });
                let r = verify_bracket_bound(&t, *kmax, &grid, prec);
                return ctx.checks(&[r]);
            }
            let report = verify_gs_bound(theta_arg(theta)?, *kmax, grid.as_ref(), *max_slope, prec)?;
            if ctx.json {
                writeln!(ctx.out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(ctx.out, "{}", report.check)?;
                for (k, c) in &report.c_emp {
                    writeln!(ctx.out, "  C_emp({k}) = {c}")?;
                }
                writeln!(ctx.out, "  tail slope = {}", report.tail_slope)?;
            }
            Ok(if report.check.pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        GsCommand::Seminorm { kind, a, h, theta, s, kmax, alpha_max, grid, function, csv, pair_h } => {
            let kind: SeminormKind = kind.parse()?;
            let weight = match kind {
                SeminormKind::AFamily => a.as_deref().ok_or_else(|| Error::InvalidArgument("--a is required for kind a".into()))?,
                SeminormKind::HFamily => h.as_deref().ok_or_else(|| Error::InvalidArgument("--h is required for kind h".into()))?,
            };
            let th = theta_arg(theta)?;
            let params = SeminormParams { kind, theta: th.to_rational(), s: parse_rational(s)?, weight: parse_rational(weight)? };
            let trunc = Truncation { beta_max: *kmax, alpha_max: alpha_max.unwrap_or(*kmax), grid: grid.parse()? };
            let f = match function.as_str() {
                "gs" => TestFunction::GsFunction(th),
                "gaussian" => TestFunction::Gaussian,
                other => return Err(Error::Unsupported(format!("function `{other}`: expected gs or gaussian"))),
            };
            let est = seminorm(&f, &params, &trunc, prec)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_writer(ctx.create(path)?);
                w.write_record(["k", "x", "value"])?;
                for r in &est.rows {
                    w.write_record([r.k.to_string(), format_rational(&r.x), format_float(&r.value, 30)])?;
                }
                w.flush()?;
            }
            let (alpha, beta, x) = est.argmax.clone().unwrap_or((0, 0, Rational::new()));
            if ctx.json {
                let doc = json!({
                    "function": f.label(),
                    "kind": est.kind,
                    "theta": format_rational(&est.theta),
                    "s": format_rational(&est.s),
                    "weight": format_rational(&est.weight),
                    "beta_max": est.beta_max,
                    "alpha_max": est.alpha_max,
                    "grid": est.grid,
                    "value": format_float(&est.value, 30),
                    "argmax": {"alpha": alpha, "beta": beta, "x": format_rational(&x)},
                    "is_lower_bound": est.is_lower_bound,
                });
                writeln!(ctx.out, "{}", serde_json::to_string_pretty(&doc)?)?;
            } else {
                writeln!(
                    ctx.out,
                    "seminorm {:?} of {} (lower bound) = {} at alpha={alpha} beta={beta} x={}",
                    est.kind,
                    f.label(),
                    format_float(&est.value, 30),
                    format_rational(&x)
                )?;
            }
            if !pair_h.is_empty() {
                let hs: Vec<Rational> = pair_h.iter().map(|v| parse_rational(v)).collect::<Result<_>>()?;
                let rows = pairing_table(th, &params.s, &hs, &trunc, prec)?;
                writeln!(ctx.out, "h,a,a_norm,h_norm,ratio,constant")?;
                for r in &rows {
                    writeln!(
                        ctx.out,
                        "{},{},{},{},{},{}",
                        format_rational(&r.h),
                        format_rational(&r.a),
                        format_float(&r.a_norm, 20),
                        format_float(&r.h_norm, 20),
                        format_float(&r.ratio, 20),
                        format_float(&r.constant, 20)
                    )?;
                }
                if rows.iter().any(|r| !r.ratio.is_finite()) {
                    return Ok(EXIT_CHECK_FAILED);
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn run_wedge(ctx: &mut Ctx<'_>, w: &WedgeCommand) -> Result<i32> {
    match w {
        WedgeCommand::Classify { theta, s, m, space, d, monomial, propagator, t_nonzero } => {
            let mut q = WedgeQuery::parse(theta, s, *m, space.parse()?)?.dimension(*d)?;
            if *monomial {
                q = q.monomial();
            }
            if *propagator {
                q = q.propagator(*t_nonzero);
            }
            let v = classify(&q);
            if ctx.json {
                writeln!(ctx.out, "{}", serde_json::to_string_pretty(&v)?)?;
            } else {
                writeln!(ctx.out, "{v}")?;
            }
            Ok(EXIT_OK)
        }
        WedgeCommand::Figure { m, space, format, out, monomial, theta_max, s_max, step } => {
            let format: FigureFormat = format.parse()?;
            let space: Space = space.parse()?;
            let step = parse_rational(step)?;
            let grid = RegionGrid {
                theta_lo: Rational::new(),
                theta_hi: parse_rational(theta_max)?,
                theta_step: step.clone(),
                s_lo: Rational::new(),
                s_hi: parse_rational(s_max)?,
                s_step: step,
            };
            let mode = if *monomial { Mode::PureMonomial } else { Mode::GeneralPolynomial };
            let mut file = ctx.create(out)?;
            emit_region_grid(*m, space, mode, &grid, format, &mut file)?;
            file.flush()?;
            writeln!(ctx.out, "wrote {}", ctx.path(out).display())?;
            Ok(EXIT_OK)
        }
    }
}

fn run_probe(ctx: &mut Ctx<'_>, p: &ProbeCommand) -> Result<i32> {
    match p {
        ProbeCommand::Run { m, theta, nu, kmax, kj, sign, tail, csv } => {
            let th = theta_arg(theta)?;
            let nu = nu.as_deref().map(theta_arg).transpose()?.unwrap_or(th);
            let range = if *kj { KRange::KjUpTo(*kmax) } else { KRange::Consecutive { lo: 1, hi: *kmax } };
            let mut cfg = ProbeConfig::new(*m, th, nu, range);
            cfg.sign = sign.parse()?;
            cfg.precision_bits = ctx.precision;
            let records = probe_series(&cfg)?;
            if let Some(path) = csv {
                let mut f = ctx.create(path)?;
                write_probe_csv(&records, &mut f)?;
                f.flush()?;
            }
            let rate = match estimate_rate(&records, *tail) {
                Ok(r) => Some(format_float(&r, 20)),
                Err(Error::TooFewRecords { .. }) => None,
                Err(e) => return Err(e),
            };
            let violations = if th.q() == 1 { lower_bound_violations(&cfg, &records) } else { Vec::new() };
            if ctx.json {
                let doc = json!({
                    "records": records.len(),
                    "rate_estimate": rate,
                    "target": format_rational(&(th.to_rational() * (*m - 1))),
                    "lower_bound_violations": violations,
                });
                writeln!(ctx.out, "{}", serde_json::to_string_pretty(&doc)?)?;
            } else {
                if csv.is_none() {
                    write_probe_csv(&records, &mut *ctx.out)?;
                }
                match &rate {
                    Some(r) => writeln!(ctx.out, "rate estimate = {r} (target {})", format_rational(&(th.to_rational() * (*m - 1))))?,
                    None => writeln!(ctx.out, "rate estimate unavailable: fewer than {MIN_TAIL_RECORDS} tail records")?,
                }
                if !violations.is_empty() {
                    writeln!(ctx.out, "lower bound violated at k = {violations:?}")?;
                }
            }
            Ok(if violations.is_empty() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        ProbeCommand::Criterion { m, theta, s, jmax, sign } => {
            let report = criterion_check(*m, *theta, &parse_rational(s)?, *jmax, sign.parse()?)?;
            if ctx.json {
                writeln!(ctx.out, "{}", serde_json::to_string_pretty(&report)?)?;
                return Ok(if report.check.pass { EXIT_OK } else { EXIT_CHECK_FAILED });
            }
            for (j, k, d) in &report.deltas {
                writeln!(ctx.out, "j={j} k_j={k} delta={d}")?;
            }
            ctx.checks(&[report.check])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("gsm").chain(args.iter().copied());
        let code = dispatch(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_statuses() {
        assert_eq!(run_args(&["verify", "coeffs", "--m", "3", "--kmax", "10"]).0, 0);
        let (code, _, err) = run_args(&["verify", "coeffs", "--m", "1", "--kmax", "10"]);
        assert_eq!(code, 2);
        assert!(err.contains("degree"));
        let (code, _, err) = run_args(&["verify", "coeffs", "--m", "3", "--kmax", "10", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"));
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn wedge_classify_prints_verdict() {
        let (code, out, _) = run_args(&["wedge", "classify", "--theta", "2", "--s", "1", "--m", "2", "--space", "roumieu", "--d", "1"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("NotContinuous"));
    }

    #[test]
    fn table_rows() {
        let (code, out, _) = run_args(&["table", "--m", "3", "--kmax", "3"]);
        assert_eq!(code, 0);
        assert_eq!(out, "0: 1\n1: 1\n2: 1 2\n3: 1 6 2\n");
    }

    #[test]
    fn probe_criterion_rejects_hypothesis() {
        assert_eq!(run_args(&["probe", "criterion", "--m", "2", "--theta", "1", "--s", "3", "--jmax", "4"]).0, 2);
    }
}
