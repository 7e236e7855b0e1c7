//! Conditional squarefreeness and non-squarefullness certificates.
//!
//! A lower bound L on log|conductor| of the quadratic character attached to
//! N, obtained from the Weil explicit formula with a compactly supported test
//! function, bounds any square divisor of N. Combined with a small-prime
//! check this proves N squarefree, assuming GRH for the L-function involved.

pub mod bigint_serde;
pub mod certify;
pub mod error;
pub mod explicit;
pub mod integer;
pub mod lattice;
pub mod lp;
pub mod qform;
pub mod quad;
pub mod rmt;
pub mod special;
pub mod testfn;
pub mod twist;

pub use error::{Error, Result};
