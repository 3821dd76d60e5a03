//! Nets of smooth functions indexed by a regularization parameter ε, with
//! growth classification against moderate/negligible/ultra scales and
//! Gaussian-damped integral operators.
//!
//! The building blocks:
//!
//! - [`field`]: scalar fields with closed-form or finite-difference
//!   derivatives and Gaussian rate hints;
//! - [`net`]: ε-grids, function nets, and sampling boxes;
//! - [`quadrature`]: Gauss–Hermite and Simpson rules with convergence
//!   estimates;
//! - [`weights`]: weight sequences M_p, their structural conditions, and
//!   associated functions;
//! - [`seminorms`]: polynomial and ultra seminorms plus ε-growth
//!   classification;
//! - [`hermite`]: Hermite functions, expansions, and ultra regularization;
//! - [`operators`]: kernel operators — application, composition, powers,
//!   and truncated exponentials;
//! - [`catalog`]: ready-made nets and kernels used by tests and the CLI.

pub mod catalog;
pub mod error;
pub mod field;
pub mod net;
pub mod hermite;
pub mod operators;
pub mod quadrature;
pub mod seminorms;
pub mod weights;

pub use error::{Error, Result};
