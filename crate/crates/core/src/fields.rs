//! Continuous fields on the square: closed-form initial data, exact
//! solutions, and finite-element functions.

use crate::mesh::Mesh;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Complex scalar field on `Ω̄`.
pub trait Field: Sync {
    fn value(&self, x: f64, y: f64) -> Complex64;

    /// Central differences unless overridden.
    fn gradient(&self, x: f64, y: f64) -> [Complex64; 2] {
        let e = 1e-6;
        [
            (self.value(x + e, y) - self.value(x - e, y)) / (2.0 * e),
            (self.value(x, y + e) - self.value(x, y - e)) / (2.0 * e),
        ]
    }
}

/// Wraps a closure as a [`Field`].
pub struct FnField<F>(pub F);

impl<F> Field for FnField<F>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    fn value(&self, x: f64, y: f64) -> Complex64 {
        (self.0)(x, y)
    }
}

/// Dirichlet eigenmode `amplitude · sin(pπx/D) sin(qπy/D) e^{-iEt}`,
/// `E = π²(p² + q²)/D²`. With `v = 0` and no interaction it solves the
/// continuum problem exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenmode {
    pub p: u32,
    pub q: u32,
    pub side: f64,
    pub amplitude: f64,
    pub time: f64,
}

impl Eigenmode {
    pub fn new(p: u32, q: u32, side: f64) -> Self {
        Self {
            p,
            q,
            side,
            amplitude: 1.0,
            time: 0.0,
        }
    }

    pub fn eigenvalue(&self) -> f64 {
        let k = PI / self.side;
        k * k * ((self.p * self.p + self.q * self.q) as f64)
    }

    /// The exact linear evolution at time `t`.
    pub fn at_time(&self, t: f64) -> Self {
        Self { time: t, ..*self }
    }

    fn phase(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, -self.eigenvalue() * self.time)
    }
}

impl Field for Eigenmode {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        let kx = self.p as f64 * PI / self.side;
        let ky = self.q as f64 * PI / self.side;
        self.phase() * ((kx * x).sin() * (ky * y).sin())
    }

    fn gradient(&self, x: f64, y: f64) -> [Complex64; 2] {
        let kx = self.p as f64 * PI / self.side;
        let ky = self.q as f64 * PI / self.side;
        let c = self.phase();
        [
            c * (kx * (kx * x).cos() * (ky * y).sin()),
            c * (ky * (kx * x).sin() * (ky * y).cos()),
        ]
    }
}

/// `amplitude · exp(-|x - c|² / (2w²)) · exp(i k·x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub center: [f64; 2],
    pub width: f64,
    pub momentum: [f64; 2],
    pub amplitude: f64,
}

impl Field for GaussianPacket {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let env = self.amplitude * (-(dx * dx + dy * dy) / (2.0 * self.width * self.width)).exp();
        Complex64::from_polar(env, self.momentum[0] * x + self.momentum[1] * y)
    }

    fn gradient(&self, x: f64, y: f64) -> [Complex64; 2] {
        let v = self.value(x, y);
        let w2 = self.width * self.width;
        [
            v * Complex64::new(-(x - self.center[0]) / w2, self.momentum[0]),
            v * Complex64::new(-(y - self.center[1]) / w2, self.momentum[1]),
        ]
    }
}

/// `ψ_h = Σ_j z_j φ_j` on a given mesh.
#[derive(Debug, Clone, Copy)]
pub struct FemFunction<'a> {
    pub mesh: &'a Mesh,
    pub coeffs: &'a [Complex64],
}

impl Field for FemFunction<'_> {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        self.mesh.interpolate(self.coeffs, x, y)
    }

    fn gradient(&self, x: f64, y: f64) -> [Complex64; 2] {
        let mesh = self.mesh;
        let h = mesh.spacing();
        let cells = mesh.cells_per_side();
        let e1 = ((x / h).floor().max(0.0) as usize).min(cells - 1);
        let e2 = ((y / h).floor().max(0.0) as usize).min(cells - 1);
        let s = x / h - e1 as f64;
        let t = y / h - e2 as f64;
        let grads = crate::quadrature::shape_grad(s, t);
        let mut g = [Complex64::new(0.0, 0.0); 2];
        for (dof, d) in mesh.cell_dofs(e1, e2).iter().zip(grads) {
            if let Some(j) = dof {
                g[0] += self.coeffs[*j] * (d[0] / h);
                g[1] += self.coeffs[*j] * (d[1] / h);
            }
        }
        g
    }
}

/// Nodal interpolant onto the interior DOFs.
pub fn interpolate(mesh: &Mesh, field: &dyn Field) -> Vec<Complex64> {
    (0..mesh.dofs())
        .map(|j| {
            let (x, y) = mesh.node_position(j).expect("index in range");
            field.value(x, y)
        })
        .collect()
}
