//! Command-line front end: system files, CSV output and command dispatch.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod csvout;
pub mod sysfile;
