//! Command-line harness for geodesic-lifted embeddings: configuration,
//! the `gen` / `geodesics` / `fit` / `analyze` / `mesh` commands, evaluation
//! reports and the reproduction suites behind `repro`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;
pub mod repro;

pub use config::RunConfig;
pub use report::EvalReport;

/// Raised when a reproduction suite runs to completion but a criterion fails.
#[derive(Debug, thiserror::Error)]
#[error("acceptance failure: {0}")]
pub struct AcceptanceFailure(pub String);

/// Process exit code for an error: 2 for numerical failures, 3 for failed
/// acceptance criteria, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<AcceptanceFailure>().is_some() {
            return 3;
        }
        if let Some(geolift::Error::Diverged { .. }) = cause.downcast_ref::<geolift::Error>() {
            return 2;
        }
    }
    1
}
