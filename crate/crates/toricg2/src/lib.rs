//! Construction and numerical verification of toric G2-structures from the
//! Gibbons-Hawking-type ansatz: a symmetric positive matrix field V on an open
//! subset of R^4 determines a G2-structure (phi, *phi, g) on T^3 x U, which is
//! torsion-free exactly when V satisfies a divergence-free constraint and a
//! second-order elliptic system.
//!
//! Module layout:
//! - [`forms`]: exterior-calculus kernel (k-forms, wedge, contraction, Hodge star,
//!   metric recovery from a G2 three-form) over frames of dimension <= 8;
//! - [`g2`]: pointwise G2 algebra (canonical forms, cross product, Lie-algebra
//!   membership and basis extraction);
//! - [`poly`]: polynomials in (nu1, nu2, nu3, mu) shared by the ansatz and solvers;
//! - [`ansatz`]: the matrix field V, the induced forms and metric, torsion
//!   residuals, curvature matrices Z and W, connection potentials, GL(3,R) action;
//! - [`geometry`]: finite-difference Riemannian curvature, holonomy span rank;
//! - [`models`]: explicit models (flat S^1 x C^3 and T^2 x R x C^2, the cone over
//!   S^3 x S^3, Bryant-Salamon) with their multi-moment maps and orbit graphs;
//! - [`pde`]: constructive solvers (potentials for the divergence-free equation,
//!   the diagonal elliptic hierarchy, linear-in-mu families);
//! - [`cli`]: the `toricg2` command-line surface.

pub mod ansatz;
pub mod cli;
pub mod forms;
pub mod g2;
pub mod geometry;
pub mod models;
pub mod pde;
pub mod poly;
