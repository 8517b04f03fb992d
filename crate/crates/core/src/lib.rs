//! Geometric view blending for Gaussian asset-return models.
//!
//! The crate combines a prior Gaussian model of asset returns (or of their
//! drift) with investor views expressed on linear combinations of assets.
//! Two families of updates are provided:
//!
//! * the Black-Litterman updates ([`posterior::bl1_update`] on drift views and
//!   [`posterior::bl2_update`] on return views), and
//! * the generalized Wasserstein barycenter update ([`posterior::gwb_core_update`]),
//!   which minimizes `W2²(f_U, f_P) + λ·W2²(P♯f_U, f_V)` over Gaussian `f_U` and is
//!   available in a drift-space and a return-space flavour.
//!
//! Posterior estimates feed a long-only mean-variance optimizer ([`mvo`]); the
//! [`walkforward`] engine strings estimation, view generation and allocation
//! together along a panel of returns.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod mvo;
pub mod oracle;
pub mod posterior;
pub mod sampling;
pub mod stats;
pub mod views;
pub mod walkforward;

pub use error::{Error, Result};
pub use gaussian::GaussianMeasure;
pub use linalg::SymMatrix;
pub use mvo::{MvoProblem, Weights};
pub use posterior::{Method, PosteriorUpdate};
pub use views::{PriorSpec, ViewSet, ViewTarget};

pub use nalgebra::{DMatrix, DVector};
