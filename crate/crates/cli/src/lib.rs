//! Library surface of the CLI crate: the JSON configuration schema.

// numeric guards use `!(x > 0.0)` deliberately so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
