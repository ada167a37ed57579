//! Solver for finitely repeated zero-sum games with incomplete information
//! on both sides, under general (dependent) priors.
//!
//! The library computes primal and dual game values, runs the dual recursion
//! with its auxiliary per-type weight vector, synthesizes near-optimal
//! Markovian strategies for the player informed of the second coordinate,
//! and certifies them by best-response exploitability. Every approximate
//! quantity carries an explicit error bound.
//!
//! Module map:
//! - [`game`]: game data, beliefs, posteriors, exact payoff evaluation;
//! - [`convex`]: certified piecewise-linear conjugates on the simplex;
//! - [`lp`]: the dense simplex routine backing all linear programs;
//! - [`grid`]: barycentric simplex grids with covering certificates;
//! - [`oracle`]: ground-truth values and best responses at desk scale;
//! - [`dual`]: the dual recursion, non-revealing bound, independent case;
//! - [`synth`]: strategy synthesis from dual minimizers and certification;
//! - [`report`]: game-file grammar, report emission, CLI dispatch.

pub mod convex;
pub mod dual;
pub mod error;
pub mod game;
pub mod grid;
pub mod lp;
pub mod oracle;
pub mod report;
pub mod synth;

/// Library-wide numeric tolerances.
pub mod tol {
    /// Absolute tolerance for probability mass checks.
    pub const PROB: f64 = 1e-12;
    /// Absolute tolerance for exact payoff identities.
    pub const PAYOFF: f64 = 1e-10;
    /// Tolerance of the LP routine and LP-derived values.
    pub const LP: f64 = 1e-9;
}

pub use error::{Result, SolverError};
