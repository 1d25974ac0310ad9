//! Exact and certified-precision tooling for the derivative polynomials of
//! exponential monomials `exp(λ x^m / m)`, together with the Gelfand-Shilov
//! machinery built on top of them.
//!
//! * [`derivpoly`]: exact coefficient tables and evaluation of `p_k`.
//! * [`oracle`]: independent ground truth for the table.
//! * [`identities`]: exact verifiers for the coefficient identities and bounds.
//! * [`gsfunc`]: derivative engines and truncated seminorm estimators.
//! * [`wedge`]: `(θ, s, m)` classification of multipliers and propagators.
//! * [`probe`]: growth experiment along `x_k = k^θ`.
//! * [`cli`]: the `gsm` command line.

pub mod cli;
pub mod derivpoly;
pub mod error;
pub mod gsfunc;
pub mod identities;
pub mod numeric;
pub mod oracle;
pub mod probe;
pub mod wedge;

pub use derivpoly::{
    build_coeff_table, derivative_poly, eval_log_magnitude, kj_sequence, CoeffTable, DerivPoly, EvalPoint,
    KjSequence, LambdaSign, LogMagnitude,
};
pub use error::{Error, Result};
pub use identities::{CheckResult, RationalTheta};
pub use oracle::{certify, OracleReport};
pub use wedge::{classify_multiplier, classify_propagator, Verdict, WedgeQuery, WedgeVerdict};

pub use rug;
