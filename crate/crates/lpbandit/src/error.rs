use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid exponent p = {0}: dual exponent requires 1 < p < inf")]
    InvalidExponent(f64),

    #[error(
        "inadmissible regime: d = {d} exceeds the admissible bound; \
         proof condition (2nc^2)^(p/2) = {proof_bound}, \
         statement condition (2cn^2)^(p/2) = {statement_bound} \
         (d = {d}, n = {n}, p = {p}, c = {c})"
    )]
    InadmissibleRegime {
        d: usize,
        n: usize,
        p: f64,
        c: f64,
        proof_bound: f64,
        statement_bound: f64,
    },

    #[error("infeasible action at round {round}: |x|_p = {norm} > c = {c}")]
    InfeasibleAction { round: usize, norm: f64, c: f64 },

    #[error("numerical failure in {context}: residual {residual} after {iterations} iterations")]
    NumericalFailure {
        context: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("scaling fit undefined: {0}")]
    FitUndefined(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
