//! Library surface of the `cavsolve` command-line tool: configuration,
//! artifact writing, the run driver, the oracle identity suite, and the
//! reference-table replay. The binary in `main.rs` is a thin dispatcher over
//! these modules so integration tests can call them directly.

// same conventions as the core crate: NaN-rejecting comparisons and plain
// index loops over small fixed-size matrices
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod artifacts;
pub mod config;
pub mod oracle_check;
pub mod replay;
pub mod run;
