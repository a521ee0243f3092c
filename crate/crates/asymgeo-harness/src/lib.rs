//! Data generation, oracle checks, experiments and report plumbing for the
//! `asymgeo` kernels. The `asymgeo` binary is a thin CLI over this crate.

pub mod acceptance;
pub mod datasets;
pub mod experiments;
pub mod formats;
pub mod ops;
pub mod oracles;
pub mod report;
pub mod verify;
