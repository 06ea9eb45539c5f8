//! Front-fixing pricer for American put options.
//!
//! The free boundary is mapped to `x = 0` by `x = ln(S / s_f(tau))`. The value
//! `U` and its `x`-derivatives `W`, `Y`, `Z` are discretized with fourth-order
//! compact differences, the boundary velocity comes from an analytic
//! quadratic built on the intermediate function `Q = sqrt(U - K + e^x s_f)`,
//! and the semi-discrete system is integrated with an adaptive Cash–Karp
//! Runge–Kutta pair or fixed-step RK4.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod cli;
pub mod compact;
pub mod convergence;
pub mod error;
pub mod grid;
pub mod integrators;
pub mod model;
pub mod oracles;
pub mod solver;
pub mod tridiag;

pub use boundary::BoundaryMode;
pub use error::{PricingError, Result};
pub use grid::{Grid, SolverState};
pub use model::{derive_constants, DerivedConstants, MarketParams};
pub use solver::{march, SolveReport, SolverConfig, SystemKind, TimeScheme};
