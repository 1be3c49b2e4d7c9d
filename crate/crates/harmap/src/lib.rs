//! Discrete harmonic maps from the unit square or cube into spheres.
//!
//! Coefficient fields of Lagrange elements on uniform simplicial meshes are
//! minimized for the Dirichlet energy under a pointwise unit-length constraint,
//! either nodally ([`energy::DiscretizationKind::Nonconforming`]) or through
//! the closest-point projection ([`energy::DiscretizationKind::Projection`]).
//! Two solvers are provided: a tangential gradient flow and a Riemannian
//! trust-region method. [`harness`] runs the benchmark problems of
//! [`problems`] over refinement levels and reports energies, errors and
//! convergence orders.
//!
//! ```no_run
//! use harmap::energy::DiscretizationKind;
//! use harmap::harness::{format_table, run_benchmark, RunConfig};
//! use harmap::problems::ProblemId;
//! use harmap::solvers::SolverKind;
//!
//! let cfg = RunConfig::new(ProblemId::P1, DiscretizationKind::Nonconforming, SolverKind::TrustRegion).levels(1, 6);
//! let report = run_benchmark(&cfg)?;
//! print!("{}", format_table(&report));
//! # Ok::<(), harmap::Error>(())
//! ```

pub mod census;
pub mod energy;
pub mod error;
pub mod harness;
pub mod la;
pub mod mesh;
pub mod multigrid;
pub mod problems;
pub mod quadrature;
pub mod solvers;
pub mod space;
pub mod sphere;
pub mod tangent;
pub mod vtk;

pub use error::{Error, Result};
