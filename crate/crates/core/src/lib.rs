//! Branching fractional Brownian motion: urn approximations on trees, exact
//! Gaussian samplers, maxima, and analytic checks.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching_hs;
pub mod constants;
pub mod linear_hs;
pub mod prediction;
pub mod error;
pub mod extremes;
pub mod gaussian_bfbm;
pub mod identities;
pub mod quad;
pub mod renewal;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tree;
pub mod urn;

pub use constants::HurstParams;
pub use error::{Error, Result};
pub use renewal::RenewalTable;

/// Shortest round-trip decimal form of `x` (at most 17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
