//! Galerkin matrices of the bilinear basis: mass `A_ij = (φ_i, φ_j)`,
//! stiffness `B_ij = (∇φ_i, ∇φ_j)` and potential `Y_ij = (φ_i, v φ_j)`.
//!
//! Every operator on the uniform interior lattice couples a node only to
//! itself and its eight neighbours, so it is stored as a dense 3×3 stencil
//! per row. All operators here are real symmetric; they act on complex
//! state vectors.

use crate::banded::BandedSymmetric;
use crate::mesh::Mesh;
use crate::quadrature::{shape, GaussRule};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("potential is not finite at ({x}, {y}): {value}")]
    NonFinitePotential { x: f64, y: f64, value: f64 },
    #[error("nodal field has {got} values, expected {expected}")]
    FieldLength { expected: usize, got: usize },
}

/// 1D element mass matrix on a unit cell.
const MASS_1D: [[f64; 2]; 2] = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
/// 1D element stiffness matrix on a unit cell.
const STIFF_1D: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];

/// `∫₀¹ N_a N_b N_c` for the two 1D linear shape functions.
#[inline]
pub(crate) fn triple_1d(a: usize, b: usize, c: usize) -> f64 {
    if a == b && b == c {
        0.25
    } else {
        1.0 / 12.0
    }
}

/// `∫_cell N_a N_b N_c` on the unit cell, corners numbered `x + 2y`.
pub(crate) fn triple_table() -> [[[f64; 4]; 4]; 4] {
    let mut t = [[[0.0; 4]; 4]; 4];
    for (a, ta) in t.iter_mut().enumerate() {
        for (b, tb) in ta.iter_mut().enumerate() {
            for (c, v) in tb.iter_mut().enumerate() {
                *v = triple_1d(a & 1, b & 1, c & 1) * triple_1d(a >> 1, b >> 1, c >> 1);
            }
        }
    }
    t
}

#[inline]
fn slot(dx: isize, dy: isize) -> usize {
    ((dy + 1) * 3 + (dx + 1)) as usize
}

/// Symmetric operator with a 9-point stencil on the interior lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilOperator {
    m: usize,
    rows: Vec<[f64; 9]>,
}

impl StencilOperator {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            rows: vec![[0.0; 9]; m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn interior_per_side(&self) -> usize {
        self.m
    }

    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let m = self.m as isize;
        let (i1, i2) = ((i % self.m) as isize, (i / self.m) as isize);
        let (j1, j2) = ((j % self.m) as isize, (j / self.m) as isize);
        let (dx, dy) = (j1 - i1, j2 - i2);
        if dx.abs() <= 1 && dy.abs() <= 1 && j1 < m && j2 < m {
            Some(slot(dx, dy))
        } else {
            None
        }
    }

    /// Entry `(i, j)`; zero outside the stencil.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self.offset(i, j) {
            Some(s) => self.rows[i][s],
            None => 0.0,
        }
    }

    fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.offset(i, j).expect("entry outside stencil");
        self.rows[i][s] += value;
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().sum()
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        self.triplets()
            .all(|(i, j, v)| self.entry(j, i).to_bits() == v.to_bits())
    }

    /// Nonzero-pattern triplets `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.m as isize;
        self.rows.iter().enumerate().flat_map(move |(i, row)| {
            let (i1, i2) = ((i as isize) % m, (i as isize) / m);
            (-1..=1isize).flat_map(move |dy| {
                (-1..=1isize).filter_map(move |dx| {
                    let (j1, j2) = (i1 + dx, i2 + dy);
                    if j1 < 0 || j2 < 0 || j1 >= m || j2 >= m {
                        None
                    } else {
                        Some((i, (j1 + j2 * m) as usize, row[slot(dx, dy)]))
                    }
                })
            })
        })
    }

    /// `out = S z`.
    pub fn apply_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        let m = self.m;
        assert_eq!(z.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        for i2 in 0..m {
            for i1 in 0..m {
                let i = i1 + i2 * m;
                let row = &self.rows[i];
                let mut acc = Complex64::new(0.0, 0.0);
                let y0 = i2.saturating_sub(1);
                let y1 = (i2 + 1).min(m - 1);
                let x0 = i1.saturating_sub(1);
                let x1 = (i1 + 1).min(m - 1);
                for j2 in y0..=y1 {
                    let dy = j2 as isize - i2 as isize;
                    for j1 in x0..=x1 {
                        let dx = j1 as isize - i1 as isize;
                        acc += z[j1 + j2 * m] * row[slot(dx, dy)];
                    }
                }
                out[i] = acc;
            }
        }
    }

    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_into(z, &mut out);
        out
    }

    /// `z† S w`.
    pub fn inner(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        let sw = self.apply(w);
        z.iter().zip(&sw).map(|(a, b)| a.conj() * b).sum()
    }

    /// `z† S z`; real for symmetric `S` up to rounding.
    pub fn quadratic_form(&self, z: &[Complex64]) -> Complex64 {
        self.inner(z, z)
    }

    /// `self + scale · other`.
    pub fn add_scaled(&self, other: &StencilOperator, scale: f64) -> StencilOperator {
        assert_eq!(self.m, other.m);
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut r = *a;
                for (x, y) in r.iter_mut().zip(b) {
                    *x += scale * y;
                }
                r
            })
            .collect();
        StencilOperator { m: self.m, rows }
    }

    /// Band storage with bandwidth `m + 1`.
    pub fn to_banded(&self) -> BandedSymmetric<f64> {
        let mut band = BandedSymmetric::zeros(self.dim(), self.m + 1);
        for (i, j, v) in self.triplets() {
            if j <= i {
                band.set(i, j, v);
            }
        }
        band
    }

    /// Dense row-major copy; for small debugging and oracle comparisons.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, j, v) in self.triplets() {
            dense[i][j] = v;
        }
        dense
    }
}

fn assemble_cells<F>(mesh: &Mesh, mut local: F) -> StencilOperator
where
    F: FnMut(usize, usize) -> [[f64; 4]; 4],
{
    let mut op = StencilOperator::zeros(mesh.interior_per_side());
    let cells = mesh.cells_per_side();
    for e2 in 0..cells {
        for e1 in 0..cells {
            let dofs = mesh.cell_dofs(e1, e2);
            if dofs.iter().all(Option::is_none) {
                continue;
            }
            let k = local(e1, e2);
            for (a, da) in dofs.iter().enumerate() {
                let Some(i) = da else { continue };
                for (b, db) in dofs.iter().enumerate() {
                    if let Some(j) = db {
                        op.add(*i, *j, k[a][b]);
                    }
                }
            }
        }
    }
    op
}

fn tensor_local(xs: &[[f64; 2]; 2], ys: &[[f64; 2]; 2], scale: f64) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for (a, row) in k.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = scale * xs[a & 1][b & 1] * ys[a >> 1][b >> 1];
        }
    }
    k
}

/// Mass matrix `A`, exact.
pub fn assemble_mass(mesh: &Mesh) -> StencilOperator {
    let h = mesh.spacing();
    let local = tensor_local(&MASS_1D, &MASS_1D, h * h);
    assemble_cells(mesh, |_, _| local)
}

/// Stiffness matrix `B`, exact. Entries do not depend on `h` in 2D.
pub fn assemble_stiffness(mesh: &Mesh) -> StencilOperator {
    let kx = tensor_local(&STIFF_1D, &MASS_1D, 1.0);
    let ky = tensor_local(&MASS_1D, &STIFF_1D, 1.0);
    let mut local = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            local[a][b] = kx[a][b] + ky[a][b];
        }
    }
    assemble_cells(mesh, |_, _| local)
}

/// Potential matrix `Y` for a real potential, 2×2 Gauss per cell.
pub fn assemble_potential<F>(mesh: &Mesh, potential: F) -> Result<StencilOperator, AssemblyError>
where
    F: Fn(f64, f64) -> f64,
{
    let h = mesh.spacing();
    let mut failure = None;
    let op = assemble_cells(mesh, |e1, e2| {
        let mut k = [[0.0; 4]; 4];
        for (s, t, w) in GaussRule::TWO.tensor() {
            let (x, y) = ((e1 as f64 + s) * h, (e2 as f64 + t) * h);
            let v = potential(x, y);
            if !v.is_finite() && failure.is_none() {
                failure = Some(AssemblyError::NonFinitePotential { x, y, value: v });
            }
            let n = shape(s, t);
            for a in 0..4 {
                for b in 0..4 {
                    k[a][b] += w * h * h * v * (n[a] * n[b]);
                }
            }
        }
        k
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(op),
    }
}

/// Potential matrix for a coefficient given by its values on the full
/// lattice (boundary ring included) and interpolated bilinearly. Exact.
pub fn assemble_nodal_potential(
    mesh: &Mesh,
    lattice_values: &[f64],
) -> Result<StencilOperator, AssemblyError> {
    if lattice_values.len() != mesh.lattice_len() {
        return Err(AssemblyError::FieldLength {
            expected: mesh.lattice_len(),
            got: lattice_values.len(),
        });
    }
    let h2 = mesh.spacing().powi(2);
    let n = mesh.nodes_per_side();
    let table = triple_table();
    Ok(assemble_cells(mesh, |e1, e2| {
        let corners = mesh.cell_corners(e1, e2);
        let mut k = [[0.0; 4]; 4];
        for (c, (i1, i2)) in corners.iter().enumerate() {
            let u = lattice_values[i1 + i2 * n];
            for a in 0..4 {
                for b in 0..4 {
                    k[a][b] += h2 * u * table[a][b][c];
                }
            }
        }
        k
    }))
}

/// Largest-magnitude eigenvalue of `A⁻¹ S` by power iteration. `S` must be
/// symmetric and `A` SPD.
pub fn generalized_spectral_radius(
    mass: &crate::banded::BandedLdl<f64>,
    op: &StencilOperator,
    iterations: usize,
) -> f64 {
    let n = op.dim();
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0))
        .collect();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let mut y = op.apply(&x);
        mass.solve_in_place(&mut y).expect("dimension fixed by operator");
        let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm / xnorm;
        x = y.into_iter().map(|v| v / norm).collect();
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn mass_entries() {
        let mesh = Mesh::with_interior(1.7, 5).unwrap();
        let h = mesh.spacing();
        let a = assemble_mass(&mesh);
        let c = mesh.node_index(2, 2).unwrap();
        assert!(rel(a.entry(c, c), 4.0 * h * h / 9.0) < 1e-14);
        assert!(rel(a.entry(c, c + 1), h * h / 9.0) < 1e-14);
        assert!(rel(a.entry(c, c + 5), h * h / 9.0) < 1e-14);
        assert!(rel(a.entry(c, c + 6), h * h / 36.0) < 1e-14);
        assert!(rel(a.entry(c, c + 4), h * h / 36.0) < 1e-14);
        assert_eq!(a.entry(c, c + 2), 0.0);
        assert!(a.is_symmetric());
    }

    #[test]
    fn stiffness_entries_and_row_sums() {
        let mesh = Mesh::with_interior(3.0, 5).unwrap();
        let b = assemble_stiffness(&mesh);
        let c = mesh.node_index(2, 2).unwrap();
        assert!(rel(b.entry(c, c), 8.0 / 3.0) < 1e-14);
        for j in [c - 6, c - 5, c - 4, c - 1, c + 1, c + 4, c + 5, c + 6] {
            assert!(rel(b.entry(c, j), -1.0 / 3.0) < 1e-14);
        }
        assert!(b.row_sum(c).abs() < 1e-14);
        // boundary-adjacent rows lose neighbours
        assert!(b.row_sum(0) > 0.0);
        assert!(b.is_symmetric());
    }

    #[test]
    fn wrap_around_is_not_a_neighbour() {
        let mesh = Mesh::with_interior(1.0, 4).unwrap();
        let a = assemble_mass(&mesh);
        // (3,0) and (0,1) are flat neighbours 3 and 4 but not lattice neighbours
        assert_eq!(a.entry(3, 4), 0.0);
        assert_eq!(a.entry(3, 8), 0.0);
    }

    #[test]
    fn zero_and_unit_potential() {
        let mesh = Mesh::with_interior(1.0, 4).unwrap();
        let y0 = assemble_potential(&mesh, |_, _| 0.0).unwrap();
        assert!(y0.triplets().all(|(_, _, v)| v == 0.0));
        let y1 = assemble_potential(&mesh, |_, _| 1.0).unwrap();
        let a = assemble_mass(&mesh);
        for (i, j, v) in a.triplets() {
            assert!((y1.entry(i, j) - v).abs() < 1e-15);
        }
    }

    #[test]
    fn nodal_potential_matches_quadrature_for_bilinear_coefficient() {
        let mesh = Mesh::with_interior(1.0, 4).unwrap();
        let n = mesh.nodes_per_side();
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - y + 3.0 * x * y;
        let values: Vec<f64> = (0..n * n)
            .map(|k| {
                let (x, y) = mesh.lattice_position(k % n, k / n);
                f(x, y)
            })
            .collect();
        let nodal = assemble_nodal_potential(&mesh, &values).unwrap();
        let quad = assemble_potential(&mesh, f).unwrap();
        for (i, j, v) in quad.triplets() {
            assert!((nodal.entry(i, j) - v).abs() < 1e-15);
        }
        assert!(assemble_nodal_potential(&mesh, &values[1..]).is_err());
    }

    #[test]
    fn non_finite_potential_rejected() {
        let mesh = Mesh::with_interior(1.0, 3).unwrap();
        assert!(matches!(
            assemble_potential(&mesh, |x, _| if x > 0.5 { f64::NAN } else { 0.0 }),
            Err(AssemblyError::NonFinitePotential { .. })
        ));
    }

    #[test]
    fn banded_copy_matches() {
        let mesh = Mesh::with_interior(1.0, 5).unwrap();
        let b = assemble_stiffness(&mesh);
        let band = b.to_banded();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                assert_eq!(band.get(i, j), b.entry(i, j));
            }
        }
    }

    #[test]
    fn spectral_radius_of_laplacian_pencil() {
        // 1 interior node: A⁻¹B = (8/3)/(4h²/9) = 6/h²
        let mesh = Mesh::with_interior(1.0, 1).unwrap();
        let h = mesh.spacing();
        let a = assemble_mass(&mesh).to_banded().factor().unwrap();
        let b = assemble_stiffness(&mesh);
        let r = generalized_spectral_radius(&a, &b, 5);
        assert!(rel(r, 6.0 / (h * h)) < 1e-13);
    }
}
