//! Numerical laboratory for the degenerate porous medium equation
//! `u_t - (u^m)_xx = 0`, `m > 1`, in one space dimension.
//!
//! The crate provides an implicit mass-conservative solver for the
//! Dirichlet problem (optionally regularized, signed, or with an obstacle),
//! the Barenblatt reference solution, the Schwarz alternating method on
//! finite unions of cylinders, Perron-style perturbation ladders, and
//! classifiers for weak, very weak and comparison-based (m-superporous)
//! supersolutions.

pub mod classify;
pub mod corpus;
pub mod domain;
pub mod exact;
pub mod experiment;
pub mod grid;
pub mod nonlinearity;
pub mod perron;
pub mod quadrature;
pub mod schwarz;
pub mod solver;

pub use domain::{build_cylinder, Cylinder, CylinderUnion, LatticeBox, NodeClass};
pub use grid::GridFunction;
pub use nonlinearity::Exponent;
pub use solver::{solve_bvp, BoundaryData, SolverConfig};
