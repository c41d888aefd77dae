//! Recovery of low-rank matrices from independent Gaussian sketches of each
//! column, using alternating exact minimization over the coefficient matrix
//! and projected gradient descent over the column-space basis (AltGDmin).
//!
//! * [`linalg`]: dense primitives (QR, SVD, least squares, subspace distance).
//! * [`model`]: planted instances and sample-split Gaussian sketch sets.
//! * [`solver`]: spectral initialization and the GDmin iterations.
//! * [`federation`]: column-partitioned execution with a message ledger.
//! * [`bench`]: Monte-Carlo grids and empirical checks of the step bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod linalg;
pub mod model;
pub mod solver;
pub mod federation;
pub mod bench;
