//! Command line, bundle files and HTTP service around `saffron-core`.

pub mod api;
pub mod bundle;
pub mod cli;
pub mod ops;
pub mod store;
