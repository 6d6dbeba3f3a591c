//! Uniform square mesh and the bilinear Lagrange basis on it.
//!
//! The domain is the open square `(0, D)²`, divided into `(n-1)²` congruent
//! cells. Only the `m = n - 2` interior nodes per side carry degrees of
//! freedom; boundary values are fixed to zero and never assembled.
//!
//! Two lattices are in use throughout the crate:
//!
//! * the *interior* lattice `{0..m}²`, numbered by [`node_index`]
//!   (`j = m1 + m2·m`), which indexes state vectors and operators;
//! * the *full* lattice `{0..n}²` including the boundary ring, numbered
//!   `i1 + i2·n`, used for nodal coefficient fields such as the effective
//!   nonlocal potential.
//!
//! Interior node `(m1, m2)` sits at full-lattice position `(m1 + 1, m2 + 1)`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh needs at least 3 nodes per side, got {0}")]
    TooFewNodes(usize),
    #[error("side length must be positive and finite, got {0}")]
    InvalidSide(f64),
    #[error("lattice coordinate ({m1}, {m2}) out of range for {m} interior nodes per side")]
    IndexOutOfRange { m1: usize, m2: usize, m: usize },
    #[error("flat index {index} out of range for {len} degrees of freedom")]
    FlatIndexOutOfRange { index: usize, len: usize },
}

/// Flat DOF index of interior lattice coordinate `(m1, m2)`.
pub fn node_index(m1: usize, m2: usize, m: usize) -> Result<usize, MeshError> {
    if m1 >= m || m2 >= m {
        return Err(MeshError::IndexOutOfRange { m1, m2, m });
    }
    Ok(m1 + m2 * m)
}

/// Inverse of [`node_index`].
pub fn node_coords(index: usize, m: usize) -> Result<(usize, usize), MeshError> {
    if index >= m * m {
        return Err(MeshError::FlatIndexOutOfRange { index, len: m * m });
    }
    Ok((index % m, index / m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    side: f64,
    nodes: usize,
}

impl Mesh {
    /// `nodes` counts the nodes per side including both boundary nodes.
    pub fn new(side: f64, nodes: usize) -> Result<Self, MeshError> {
        if !(side.is_finite() && side > 0.0) {
            return Err(MeshError::InvalidSide(side));
        }
        if nodes < 3 {
            return Err(MeshError::TooFewNodes(nodes));
        }
        Ok(Self { side, nodes })
    }

    /// Mesh with `m` interior nodes per side.
    pub fn with_interior(side: f64, m: usize) -> Result<Self, MeshError> {
        Self::new(side, m + 2)
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Nodes per side, boundary included (`n`).
    pub fn nodes_per_side(&self) -> usize {
        self.nodes
    }

    /// Interior nodes per side (`m = n - 2`).
    pub fn interior_per_side(&self) -> usize {
        self.nodes - 2
    }

    /// Number of degrees of freedom `N_h = m²`.
    pub fn dofs(&self) -> usize {
        let m = self.interior_per_side();
        m * m
    }

    /// Lattice spacing `h = D / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        self.side / (self.nodes - 1) as f64
    }

    pub fn cells_per_side(&self) -> usize {
        self.nodes - 1
    }

    pub fn lattice_len(&self) -> usize {
        self.nodes * self.nodes
    }

    pub fn node_index(&self, m1: usize, m2: usize) -> Result<usize, MeshError> {
        node_index(m1, m2, self.interior_per_side())
    }

    pub fn node_coords(&self, index: usize) -> Result<(usize, usize), MeshError> {
        node_coords(index, self.interior_per_side())
    }

    /// Physical position of interior DOF `index`.
    pub fn node_position(&self, index: usize) -> Result<(f64, f64), MeshError> {
        let (m1, m2) = self.node_coords(index)?;
        let h = self.spacing();
        Ok(((m1 + 1) as f64 * h, (m2 + 1) as f64 * h))
    }

    /// Physical position of full-lattice node `(i1, i2)`.
    pub fn lattice_position(&self, i1: usize, i2: usize) -> (f64, f64) {
        let h = self.spacing();
        (i1 as f64 * h, i2 as f64 * h)
    }

    /// DOF index of full-lattice node `(i1, i2)`, or `None` on the boundary.
    #[inline]
    pub fn lattice_to_dof(&self, i1: usize, i2: usize) -> Option<usize> {
        let last = self.nodes - 1;
        if i1 == 0 || i2 == 0 || i1 >= last || i2 >= last {
            None
        } else {
            Some((i1 - 1) + (i2 - 1) * (self.nodes - 2))
        }
    }

    /// Full-lattice node numbers of the four corners of cell `(e1, e2)` in
    /// the order `(0,0), (1,0), (0,1), (1,1)`.
    #[inline]
    pub fn cell_corners(&self, e1: usize, e2: usize) -> [(usize, usize); 4] {
        [(e1, e2), (e1 + 1, e2), (e1, e2 + 1), (e1 + 1, e2 + 1)]
    }

    /// Same corners mapped to DOF indices (`None` for boundary nodes).
    #[inline]
    pub fn cell_dofs(&self, e1: usize, e2: usize) -> [Option<usize>; 4] {
        self.cell_corners(e1, e2)
            .map(|(i1, i2)| self.lattice_to_dof(i1, i2))
    }

    /// Value of basis function `index` at `(x, y)`. Zero outside its support.
    pub fn basis_eval(&self, index: usize, x: f64, y: f64) -> Result<f64, MeshError> {
        let (m1, m2) = self.node_coords(index)?;
        let h = self.spacing();
        let reference = ReferenceElement::new(h);
        Ok(reference.eval(x - m1 as f64 * h, y - m2 as f64 * h))
    }

    /// Evaluates `Σ_j coeffs[j] φ_j(x, y)` using only the cell containing
    /// the point. Points outside the closed square give zero.
    pub fn interpolate<T>(&self, coeffs: &[T], x: f64, y: f64) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let h = self.spacing();
        if !(0.0..=self.side).contains(&x) || !(0.0..=self.side).contains(&y) {
            return T::default();
        }
        let cells = self.cells_per_side();
        let e1 = ((x / h).floor() as usize).min(cells - 1);
        let e2 = ((y / h).floor() as usize).min(cells - 1);
        let s = x / h - e1 as f64;
        let t = y / h - e2 as f64;
        let weights = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
        let mut acc = T::default();
        for (dof, w) in self.cell_dofs(e1, e2).iter().zip(weights) {
            if let Some(j) = dof {
                acc = acc + coeffs[*j] * w;
            }
        }
        acc
    }
}

/// Piecewise-bilinear reference basis function on `[0, 2h]²`, peaking at
/// `(h, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceElement {
    h: f64,
}

impl ReferenceElement {
    pub fn new(h: f64) -> Self {
        Self { h }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let h = self.h;
        let two_h = 2.0 * h;
        if !(0.0..=two_h).contains(&x) || !(0.0..=two_h).contains(&y) {
            return 0.0;
        }
        let scale = 1.0 / (h * h);
        match (x <= h, y <= h) {
            (true, true) => scale * x * y,
            (false, true) => scale * (two_h - x) * y,
            (false, false) => scale * (two_h - x) * (two_h - y),
            (true, false) => scale * x * (two_h - y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_index_examples() {
        assert_eq!(node_index(0, 0, 4).unwrap(), 0);
        assert_eq!(node_index(1, 2, 4).unwrap(), 9);
        assert!(matches!(
            node_index(4, 0, 4),
            Err(MeshError::IndexOutOfRange { .. })
        ));
        assert!(node_index(0, 7, 4).is_err());
    }

    #[test]
    fn node_index_is_bijective_on_5x5() {
        let m = 5;
        let mut seen = vec![false; m * m];
        for a in 0..m {
            for b in 0..m {
                let j = node_index(a, b, m).unwrap();
                assert!(!seen[j]);
                seen[j] = true;
                assert_eq!(node_coords(j, m).unwrap(), (a, b));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(node_coords(25, m).is_err());
    }

    #[test]
    fn mesh_geometry() {
        let mesh = Mesh::new(2.0, 9).unwrap();
        assert_eq!(mesh.interior_per_side(), 7);
        assert_eq!(mesh.dofs(), 49);
        assert!((mesh.spacing() * 8.0 - 2.0).abs() < 1e-15);
        let (x, y) = mesh.node_position(mesh.node_index(2, 3).unwrap()).unwrap();
        assert!((x - 3.0 * 0.25).abs() < 1e-15 && (y - 4.0 * 0.25).abs() < 1e-15);
        assert!(Mesh::new(1.0, 2).is_err());
        assert!(Mesh::new(-1.0, 5).is_err());
    }

    #[test]
    fn reference_values() {
        let h = 0.3;
        let r = ReferenceElement::new(h);
        assert!((r.eval(h, h) - 1.0).abs() < 1e-15);
        assert!((r.eval(h / 2.0, h / 2.0) - 0.25).abs() < 1e-15);
        for s in [0.0, 0.1, 0.35, 0.6] {
            assert_eq!(r.eval(s, 0.0), 0.0);
            assert_eq!(r.eval(0.0, s), 0.0);
            assert!(r.eval(2.0 * h, s).abs() < 1e-15);
            assert!(r.eval(s, 2.0 * h).abs() < 1e-15);
        }
        assert_eq!(r.eval(-0.01, 0.2), 0.0);
        assert_eq!(r.eval(0.2, 0.7), 0.0);
    }

    #[test]
    fn reference_matches_tensor_hat() {
        let h = 0.25;
        let r = ReferenceElement::new(h);
        let hat = |s: f64| (1.0 - (s - h).abs() / h).max(0.0);
        for i in 0..=40 {
            for j in 0..=40 {
                let (x, y) = (i as f64 * 0.0125, j as f64 * 0.0125);
                assert!((r.eval(x, y) - hat(x) * hat(y)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn basis_partition_of_unity_in_hull() {
        let mesh = Mesh::with_interior(1.0, 6).unwrap();
        let h = mesh.spacing();
        // hull of interior nodes is [h, 6h]²
        for i in 0..23 {
            for j in 0..23 {
                let x = h + (5.0 * h) * (i as f64 + 0.5) / 23.0;
                let y = h + (5.0 * h) * (j as f64 + 0.5) / 23.0;
                let sum: f64 = (0..mesh.dofs())
                    .map(|k| mesh.basis_eval(k, x, y).unwrap())
                    .sum();
                assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at ({x},{y})");
            }
        }
    }

    #[test]
    fn basis_piecewise_affine_along_x() {
        let mesh = Mesh::with_interior(1.0, 4).unwrap();
        let h = mesh.spacing();
        let j = mesh.node_index(1, 2).unwrap();
        let y = 2.6 * h;
        // three collinear points inside one cell [2h, 3h] in x
        let xs = [2.1 * h, 2.5 * h, 2.9 * h];
        let v: Vec<f64> = xs.iter().map(|&x| mesh.basis_eval(j, x, y).unwrap()).collect();
        let mid = 0.5 * (v[0] + v[2]);
        assert!((mid - v[1]).abs() < 1e-14);
    }

    #[test]
    fn interpolate_reproduces_nodal_values() {
        let mesh = Mesh::with_interior(1.0, 3).unwrap();
        let coeffs: Vec<f64> = (0..9).map(|k| k as f64 + 1.0).collect();
        for k in 0..9 {
            let (x, y) = mesh.node_position(k).unwrap();
            assert!((mesh.interpolate(&coeffs, x, y) - coeffs[k]).abs() < 1e-14);
        }
        assert_eq!(mesh.interpolate(&coeffs, 0.0, 0.3), 0.0);
        assert_eq!(mesh.interpolate(&coeffs, 1.5, 0.3), 0.0);
    }
}
