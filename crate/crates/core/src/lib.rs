//! Finite-element simulation of the nonlocal Hartree equation
//! `i ψ_t = -Δψ + v ψ + λ (V ∗ |ψ|²) ψ` on a square with homogeneous
//! Dirichlet data, using bilinear elements in space and Crank-Nicolson-type
//! time stepping.

#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod banded;
pub mod fields;
pub mod harness;
pub mod mesh;
pub mod nonlocal;
pub mod observables;
pub mod quadrature;
pub mod steppers;
pub mod system;

pub use assembly::{assemble_mass, assemble_potential, assemble_stiffness, StencilOperator};
pub use fields::{Eigenmode, Field, GaussianPacket};
pub use mesh::{node_coords, node_index, Mesh, MeshError, ReferenceElement};
pub use nonlocal::{convolve, ConvolutionPath, CouplingField, KernelSpec, NonlocalTerm};
pub use steppers::{
    FixedPointConfig, FixedPointMap, SchemeKind, StepDiagnostics, StepError, Stepper, TimeGrid,
    Trajectory,
};
pub use system::GalerkinSystem;
