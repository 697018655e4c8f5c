//! File formats and the command-line front end for `chroma-core`.

pub mod cli;
pub mod json;
