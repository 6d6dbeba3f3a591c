//! The assembled semi-discrete system on one mesh.

use crate::assembly::{
    assemble_mass, assemble_potential, assemble_stiffness, generalized_spectral_radius,
    AssemblyError, StencilOperator,
};
use crate::banded::{BandedLdl, FactorError};
use crate::mesh::Mesh;
use crate::nonlocal::{NonlocalError, NonlocalTerm};
use crate::observables::{self, ObservableError};
use num_complex::Complex64;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("mass matrix factorization failed: {0}")]
    Factor(#[from] FactorError),
    #[error("nonlinear term was built for a different mesh ({got} dofs, expected {expected})")]
    MeshMismatch { expected: usize, got: usize },
}

/// Mass, stiffness and potential matrices plus the optional nonlinear term.
#[derive(Debug)]
pub struct GalerkinSystem {
    mesh: Mesh,
    mass: StencilOperator,
    stiffness: StencilOperator,
    potential: StencilOperator,
    hamiltonian: StencilOperator,
    mass_factor: BandedLdl<f64>,
    nonlocal: Option<NonlocalTerm>,
    spectral_radius: OnceLock<f64>,
}

impl GalerkinSystem {
    pub fn new<F>(
        mesh: &Mesh,
        potential: F,
        nonlocal: Option<NonlocalTerm>,
    ) -> Result<Self, SystemError>
    where
        F: Fn(f64, f64) -> f64,
    {
        let y = assemble_potential(mesh, potential)?;
        Self::from_potential(mesh, y, nonlocal)
    }

    /// Uses an already assembled potential matrix.
    pub fn from_potential(
        mesh: &Mesh,
        potential: StencilOperator,
        nonlocal: Option<NonlocalTerm>,
    ) -> Result<Self, SystemError> {
        if let Some(term) = &nonlocal {
            if term.mesh().dofs() != mesh.dofs() {
                return Err(SystemError::MeshMismatch {
                    expected: mesh.dofs(),
                    got: term.mesh().dofs(),
                });
            }
        }
        let mass = assemble_mass(mesh);
        let stiffness = assemble_stiffness(mesh);
        let hamiltonian = stiffness.add_scaled(&potential, 1.0);
        let mass_factor = mass.to_banded().factor()?;
        Ok(Self {
            mesh: *mesh,
            mass,
            stiffness,
            potential,
            hamiltonian,
            mass_factor,
            nonlocal,
            spectral_radius: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    pub fn mass_matrix(&self) -> &StencilOperator {
        &self.mass
    }

    pub fn stiffness_matrix(&self) -> &StencilOperator {
        &self.stiffness
    }

    pub fn potential_matrix(&self) -> &StencilOperator {
        &self.potential
    }

    /// `B + Y`.
    pub fn hamiltonian(&self) -> &StencilOperator {
        &self.hamiltonian
    }

    pub fn mass_factor(&self) -> &BandedLdl<f64> {
        &self.mass_factor
    }

    pub fn nonlocal(&self) -> Option<&NonlocalTerm> {
        self.nonlocal.as_ref()
    }

    pub fn mass_of(&self, z: &[Complex64]) -> Result<f64, ObservableError> {
        observables::mass(z, &self.mass)
    }

    pub fn energy_of(&self, z: &[Complex64]) -> Result<f64, ObservableError> {
        observables::energy(z, &self.stiffness, &self.potential, self.nonlocal.as_ref())
    }

    /// `r(z)`; zero without interaction.
    pub fn nonlinear_load(&self, z: &[Complex64]) -> Result<Vec<Complex64>, NonlocalError> {
        match &self.nonlocal {
            Some(term) => term.load(z),
            None => Ok(vec![Complex64::new(0.0, 0.0); z.len()]),
        }
    }

    /// `‖λ‖_∞ ‖V‖_∞`, zero without interaction.
    pub fn interaction_strength(&self) -> f64 {
        self.nonlocal.as_ref().map_or(0.0, NonlocalTerm::strength)
    }

    /// Spectral radius of `A⁻¹(B + Y)`, estimated once by power iteration.
    pub fn spectral_radius(&self) -> f64 {
        *self
            .spectral_radius
            .get_or_init(|| generalized_spectral_radius(&self.mass_factor, &self.hamiltonian, 200))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocal::{CouplingField, KernelSpec};

    #[test]
    fn single_dof_spectral_radius() {
        let mesh = Mesh::with_interior(1.0, 1).unwrap();
        let sys = GalerkinSystem::new(&mesh, |_, _| 0.0, None).unwrap();
        let h = mesh.spacing();
        assert!((sys.spectral_radius() - 6.0 / (h * h)).abs() < 1e-9 / (h * h));
        assert_eq!(sys.interaction_strength(), 0.0);
    }

    #[test]
    fn rejects_foreign_nonlocal_term() {
        let mesh = Mesh::with_interior(1.0, 4).unwrap();
        let other = Mesh::with_interior(1.0, 5).unwrap();
        let term = NonlocalTerm::new(
            &other,
            &KernelSpec::Gaussian {
                sigma: 0.1,
                amplitude: 1.0,
            },
            &CouplingField::Constant(1.0),
        )
        .unwrap();
        assert!(matches!(
            GalerkinSystem::new(&mesh, |_, _| 0.0, Some(term)),
            Err(SystemError::MeshMismatch { .. })
        ));
    }

    #[test]
    fn linear_spectral_radius_below_bound() {
        let mesh = Mesh::with_interior(1.0, 9).unwrap();
        let sys = GalerkinSystem::new(&mesh, |_, _| 0.0, None).unwrap();
        let h = mesh.spacing();
        let rho = sys.spectral_radius();
        // bilinear elements: λ_max(A⁻¹B) < 24/h²
        assert!(rho > 12.0 / (h * h) && rho < 24.0 / (h * h), "{rho}");
    }
}
