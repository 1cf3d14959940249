//! File formats, experiment pipeline and command-line support for `nrx-core`.

pub mod config;
pub mod exec;
pub mod io;
pub mod pipeline;
pub mod profiles;
