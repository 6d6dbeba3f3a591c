//! Discrete mass and energy, norms, Ritz projection and error measurement.

use crate::assembly::StencilOperator;
use crate::banded::{BandedLdl, FactorError};
use crate::fields::{FemFunction, Field};
use crate::mesh::Mesh;
use crate::nonlocal::{NonlocalError, NonlocalTerm};
use crate::quadrature::{shape, shape_grad, GaussRule};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("state has {got} coefficients, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("meshes are not nested: fine mesh with {fine} nodes/side does not refine {coarse} nodes/side on the same square")]
    IncompatibleGrids { fine: usize, coarse: usize },
    #[error("linear solve failed: {0}")]
    Solve(#[from] FactorError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
}

fn check_len(z: &[Complex64], expected: usize) -> Result<(), ObservableError> {
    if z.len() != expected {
        return Err(ObservableError::DimensionMismatch {
            expected,
            got: z.len(),
        });
    }
    Ok(())
}

/// `M[ψ_h] = z† A z`.
pub fn mass(z: &[Complex64], mass_matrix: &StencilOperator) -> Result<f64, ObservableError> {
    check_len(z, mass_matrix.dim())?;
    let q = mass_matrix.quadratic_form(z);
    debug_assert!(q.im.abs() <= 1e-12 * q.re.abs().max(f64::MIN_POSITIVE));
    Ok(q.re)
}

/// `H[ψ_h] = z† B z + z† Y z + ½ (ψ_h, f[ψ_h])`.
pub fn energy(
    z: &[Complex64],
    stiffness: &StencilOperator,
    potential: &StencilOperator,
    nonlocal: Option<&NonlocalTerm>,
) -> Result<f64, ObservableError> {
    check_len(z, stiffness.dim())?;
    let kinetic = stiffness.quadratic_form(z);
    let external = potential.quadratic_form(z);
    debug_assert!(kinetic.im.abs() <= 1e-12 * kinetic.norm().max(f64::MIN_POSITIVE));
    let interaction = match nonlocal {
        Some(term) => term.energy(z)?,
        None => 0.0,
    };
    Ok(kinetic.re + external.re + interaction)
}

/// `sqrt((a-b)† S (a-b))` for an SPD operator `S`.
pub fn weighted_distance(
    a: &[Complex64],
    b: &[Complex64],
    op: &StencilOperator,
) -> Result<f64, ObservableError> {
    check_len(a, op.dim())?;
    check_len(b, op.dim())?;
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(op.quadratic_form(&d).re.max(0.0).sqrt())
}

/// L² distance between two states on the same mesh.
pub fn l2_distance(
    a: &[Complex64],
    b: &[Complex64],
    mass_matrix: &StencilOperator,
) -> Result<f64, ObservableError> {
    weighted_distance(a, b, mass_matrix)
}

/// L² distance between a finite-element state and a closed-form field,
/// with 4×4 Gauss points per cell over the whole square.
pub fn l2_error_to_field(
    mesh: &Mesh,
    z: &[Complex64],
    reference: &dyn Field,
) -> Result<f64, ObservableError> {
    check_len(z, mesh.dofs())?;
    let h = mesh.spacing();
    let mut acc = 0.0;
    for e2 in 0..mesh.cells_per_side() {
        for e1 in 0..mesh.cells_per_side() {
            let vals = mesh
                .cell_dofs(e1, e2)
                .map(|d| d.map_or(Complex64::new(0.0, 0.0), |j| z[j]));
            for (s, t, w) in GaussRule::FOUR.tensor() {
                let n = shape(s, t);
                let uh: Complex64 = vals.iter().zip(n).map(|(v, ni)| v * ni).sum();
                let x = (e1 as f64 + s) * h;
                let y = (e2 as f64 + t) * h;
                acc += w * (reference.value(x, y) - uh).norm_sqr();
            }
        }
    }
    Ok((acc * h * h).sqrt())
}

/// Samples a fine-mesh state at the nodes it shares with a coarser mesh.
pub fn restrict(
    fine: &Mesh,
    fine_state: &[Complex64],
    coarse: &Mesh,
) -> Result<Vec<Complex64>, ObservableError> {
    check_len(fine_state, fine.dofs())?;
    let incompatible = ObservableError::IncompatibleGrids {
        fine: fine.nodes_per_side(),
        coarse: coarse.nodes_per_side(),
    };
    let fc = fine.cells_per_side();
    let cc = coarse.cells_per_side();
    if cc == 0 || !fc.is_multiple_of(cc) || (fine.side() - coarse.side()).abs() > 1e-12 * coarse.side() {
        return Err(incompatible);
    }
    let ratio = fc / cc;
    let mf = fine.interior_per_side();
    Ok((0..coarse.dofs())
        .map(|j| {
            let (c1, c2) = coarse.node_coords(j).expect("index in range");
            let f1 = (c1 + 1) * ratio - 1;
            let f2 = (c2 + 1) * ratio - 1;
            fine_state[f1 + f2 * mf]
        })
        .collect())
}

/// Ritz projection: solves `B z = ((∇φ_i, ∇ψ))_i` with the loads integrated
/// by 4×4 Gauss per cell. `stiffness` is the factored stiffness matrix.
pub fn ritz_project(
    mesh: &Mesh,
    field: &dyn Field,
    stiffness: &BandedLdl<f64>,
) -> Result<Vec<Complex64>, ObservableError> {
    let h = mesh.spacing();
    let mut load = vec![Complex64::new(0.0, 0.0); mesh.dofs()];
    for e2 in 0..mesh.cells_per_side() {
        for e1 in 0..mesh.cells_per_side() {
            let dofs = mesh.cell_dofs(e1, e2);
            if dofs.iter().all(Option::is_none) {
                continue;
            }
            for (s, t, w) in GaussRule::FOUR.tensor() {
                let x = (e1 as f64 + s) * h;
                let y = (e2 as f64 + t) * h;
                let g = field.gradient(x, y);
                let grads = shape_grad(s, t);
                // cell Jacobian: ∇φ = ∇̂N / h, dx = h² ds, so one factor h survives
                for (dof, d) in dofs.iter().zip(grads) {
                    if let Some(i) = dof {
                        load[*i] += (g[0] * d[0] + g[1] * d[1]) * (w * h);
                    }
                }
            }
        }
    }
    stiffness.solve_in_place(&mut load)?;
    Ok(load)
}

/// L² and H¹-seminorm distance of two states at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub l2_error: f64,
    pub h1_seminorm_error: f64,
    pub time: f64,
}

impl NormReport {
    pub fn between(
        a: &[Complex64],
        b: &[Complex64],
        mass_matrix: &StencilOperator,
        stiffness: &StencilOperator,
        time: f64,
    ) -> Result<Self, ObservableError> {
        Ok(Self {
            l2_error: weighted_distance(a, b, mass_matrix)?,
            h1_seminorm_error: weighted_distance(a, b, stiffness)?,
            time,
        })
    }
}

/// The finite-element function of `z` viewed as a [`Field`].
pub fn as_field<'a>(mesh: &'a Mesh, z: &'a [Complex64]) -> FemFunction<'a> {
    FemFunction { mesh, coeffs: z }
}
