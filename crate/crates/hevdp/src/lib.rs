//! Configuration, file formats and the `hevdp` command line around
//! `hevdp-core`.

pub mod cli;
pub mod config;
pub mod files;
pub mod plot;
pub mod run;
