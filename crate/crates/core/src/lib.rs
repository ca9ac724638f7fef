//! Time-series forecasting benchmark for heart-rate style series.
//!
//! The crate bundles a small reverse-mode autodiff engine ([`tensor`]),
//! series ingestion and blocked cross-validation ([`dataset`]), two
//! statistical forecasters ([`classical`]), six neural forecasters
//! ([`models`]), an Adam training loop ([`train`]), error metrics and the
//! comparison table ([`eval`]), SVG figures ([`plot`]) and the pipeline the
//! `hrbench` binary drives ([`bench`]).

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod classical;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod models;
pub mod plot;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Hex SHA-256 of a configuration's canonical JSON form.
pub fn config_digest<T: serde::Serialize>(cfg: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_string(cfg).expect("configs serialize");
    let d = Sha256::digest(json.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}
