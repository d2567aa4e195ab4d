//! Finite-difference solvers for the p-Laplacian gradient flow
//! `v_t = Delta_p v + lambda g(x, v) |v|^(p-2) v` with zero Dirichlet data
//! on the unit interval or the unit square.

pub mod cli;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod grid;
pub(crate) mod linalg;
pub mod plap;
pub mod quadrature;
pub mod spectral;
pub(crate) mod stencil;

pub use error::{Error, Result};
pub use grid::{norm_l2, norm_lq, norm_sup, seminorm_grad_p, Grid, GridFunction};
pub use plap::{
    apply_p_laplacian, big_f, energy, equilibrium_residual, phi_p, solve_p_poisson,
    solve_p_poisson_from, FrozenWeight, Nonlinearity, PoissonSolution, Reaction, SolverControls,
};
pub use spectral::{
    principal_eigenvalue, rayleigh_quotient, thresholds, EigenResult, Thresholds, Weight,
};
pub use equilibria::{
    solve_equilibrium, trace_branch, verify_uniqueness, BranchResult, BranchSample,
    Classification, EquilibriumResult,
};
pub use dynamics::{
    blowup_probe, classify_asymptotics, compare_evolutions, evolve, step_implicit,
    trivial_instability_probe, Outcome, StepControls, TrajectoryRecord,
};
