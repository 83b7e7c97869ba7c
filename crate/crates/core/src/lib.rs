//! Parabolic nonlinear Wolff potentials for the measure-data equation
//! `u_t - Δ_p u = μ`: cylinder-mass queries, the potential `P_p^μ` and its
//! reductions, rearrangement norms, a desk-scale solver and the level
//! iteration behind the pointwise potential estimate.

pub mod axes;
pub mod geometry;
pub mod kmiter;
pub mod measure;
pub mod norms;
pub mod pde;
pub mod potential;
pub mod quad;
