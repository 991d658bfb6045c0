//! Simulation of Markovian open quantum systems governed by the Lindblad
//! master equation, and reconstruction of the Liouvillian parameters
//! (Hamiltonian coefficients and dissipation strengths) from discrete
//! time-series observations via adjoint-sensitivity gradients.

pub mod adjoint;
pub mod dataset;
pub mod efficiency;
pub mod engine;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod train;
pub mod operators;
