//! Hamiltonians, closed-form control maximizers, measure derivatives, adjoint
//! assembly and the spike-variation equilibrium check.

pub mod adjoint;
pub mod cost;
pub mod hamiltonian;
pub mod measure;
pub mod spike;

pub use adjoint::{adjoint_boundary_rows, adjoint_drifts, assemble_adjoint_steps, AdjointDrifts, AdjointStep, BoundaryRows, StepSlice};
pub use cost::{CoefficientSet, CostArgs, CostEval, CostGradient, CostTerm, CrowdCoefficients, CustomCost, EvalPoint};
pub use hamiltonian::{argmax_control, argmax_rows, eval_hamiltonian, Adjoints, HamiltonianValue};
pub use measure::{mean_derivative_quadratic, MeanForm};
pub use spike::{spike_variation_check, Bump, SpikeCandidate, SpikeConfig, SpikeReport, SpikeTrial};
