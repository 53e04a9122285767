//! Numerical laboratory for U(2)-invariant Ricci flow on the line bundles
//! `O(-k) -> S^2`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod diagnostics;
pub mod flow;
pub mod blowup;
pub mod certificates;
pub mod ftheta;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod laws;
pub mod poly;
pub mod reference;
pub mod run;
pub mod state;
