//! Exact p-block invariants of small finite groups.
//!
//! Modules build on each other in order: [`perm`] enumerates groups,
//! [`cyclo`] supplies exact cyclotomic values and the reduction to a finite
//! field, [`charfun`] computes character tables and class-function calculus,
//! [`blocks`] and [`fusion`] handle blocks, Brauer pairs and fusion systems,
//! [`tuples`] and [`isotypy`] decide coherence and isotypy conditions, and
//! [`io`] provides the JSON formats and reports used by the CLI.

#![allow(clippy::mutable_key_type, clippy::result_large_err)]

pub mod blocks;
pub mod charfun;
pub mod cyclo;
pub mod fusion;
pub mod io;
pub mod isotypy;
pub mod perm;
pub mod tuples;
