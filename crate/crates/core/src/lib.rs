//! Finite model finding for residuated binars.
//!
//! A residuated binar is a lattice `(A, ^, v)` with a binary multiplication `*`
//! and two residuals `\` and `/` such that for all `x, y, z`
//!
//! ```text
//! x * y <= z  <=>  y <= x \ z  <=>  x <= z / y
//! ```
//!
//! The crate searches for finite models that satisfy a chosen set of
//! distributivity identities while violating another one. Searches are
//! compiled to CNF ([`encode`]), decided by a built-in DPLL solver or an
//! external DIMACS solver ([`sat`]), decoded and re-verified independently
//! ([`algebra`]). The [`oracle`] module enumerates small algebras directly
//! and serves as ground truth for the encoder; [`grid`] runs whole
//! experiment grids in parallel with resumable JSONL output; [`report`]
//! renders Cayley tables and Hasse diagrams.

pub mod algebra;
pub mod dsl;
pub mod encode;
pub mod grid;
pub mod oracle;
pub mod report;
pub mod sat;

pub use algebra::{FiniteBinar, Op, OrderRelation, VerificationReport, Violation};
pub use dsl::{Identity, Law, Term};
pub use encode::{CnfInstance, EncodeOptions, SearchTask};
pub use sat::{SolveResult, SolverSpec, Status};
pub use grid::{GridConfig, GridTask, SearchResult};
