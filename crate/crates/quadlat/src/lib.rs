//! Exact arithmetic for quadratic lattices over the p-local integers, their
//! Clifford algebras, and the local models of the associated quadrics.
//!
//! Everything here is exact: rationals are arbitrary-precision, finite fields
//! and truncated Witt rings are carried symbolically, and no floating point
//! appears anywhere. The crate is organised as a library with one thin CLI
//! binary on top; the `examples/` directory is the guided tour, one runnable
//! example per capability:
//!
//! ```text
//! cargo run --example witt_arithmetic      p-locals, F_{p^2}, Witt rings, Hensel roots
//! cargo run --example lattice_invariants   discriminant forms, radicals, maximality
//! cargo run --example clifford_projector   Clifford products, spinor norms, the projector
//! cargo run --example spinor_similitude    symplectic pairings and the similitude law
//! cargo run --example parabolic_filtration cocharacter filtrations on the spin module
//! cargo run --example selfdual_embedding   constructive embedding into a self-dual lattice
//! cargo run --example local_model_points   quadric point counts, charts, smoothness verdicts
//! cargo run --example refined_local_model  the refined model, its charts, and point fibers
//! ```
//!
//! The same functionality is scriptable through the `quadlat` binary
//! (`analyze`, `embed`, `localmodel`, `selftest` subcommands); see the
//! module-level docs in [`cli`].
//!
//! Module map:
//!
//! * [`exact`] - scalar kernels: p-local rationals, `F_{p^2}`, truncated Witt
//!   rings, dense exact matrices, Smith normal form, multivariate polynomials.
//! * [`quadlattice`] - quadratic lattices over `Z_(p)`: diagonalization,
//!   discriminant forms, maximality tests, isometry and Lie-algebra extension.
//! * [`clifford`] - the Clifford algebra of a lattice: grading, the main
//!   anti-involution, spinor norms, the canonical projector, symplectic forms,
//!   parabolic filtrations.
//! * [`embed`] - constructive embedding of a maximal lattice into a self-dual
//!   one of controlled rank.
//! * [`localmodel`] - the quadric of isotropic lines: point enumeration, Witt
//!   normal forms, affine charts, quasi-healthiness classification, and the
//!   refined model.
//! * [`cli`] - document parsing, reports, and the four subcommand entry points.

pub mod cli;
pub mod clifford;
pub mod embed;
mod error;
pub mod exact;
pub mod localmodel;
pub mod quadlattice;
pub mod selftest;

pub use error::{Error, Result};
