//! File formats, configuration, parallel Monte-Carlo execution and the
//! `delaybt` command-line tool built on [`delaybt_core`].
//!
//! Systems are stored as a TOML manifest plus one Matrix Market array file
//! per matrix:
//!
//! ```toml
//! kind = "StochasticDelay"
//! d = 2
//! n = 1
//! k = 2
//! m = 1
//!
//! [[delays]]
//! tau = 0.1
//! matrix_file = "sys.N1.mtx"
//!
//! [files]
//! A = "sys.A.mtx"
//! B = "sys.B.mtx"
//! B_in = "sys.B_in.mtx"
//! C = "sys.C.mtx"
//! ```

pub mod config;
pub mod error;
pub mod manifest;
pub mod mtx;
pub mod output;
pub mod parallel;

pub use delaybt_core;
pub use error::FileError;
pub use manifest::{load_system, save_system};
