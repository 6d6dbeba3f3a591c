#![allow(clippy::needless_range_loop)]

//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hartree_fem::nonlocal::{CouplingField, KernelSpec};
use hartree_fem::{GalerkinSystem, Mesh};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_state(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            Complex64::new(
                scale * rng.gen_range(-1.0..1.0),
                scale * rng.gen_range(-1.0..1.0),
            )
        })
        .collect()
}

/// Dense complex copy of a real stencil operator.
pub fn dense(op: &hartree_fem::StencilOperator) -> DMatrix<Complex64> {
    let n = op.dim();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (i, j, v) in op.triplets() {
        m[(i, j)] = Complex64::new(v, 0.0);
    }
    m
}

/// `(A + iτ/2 L) z_next = (A - iτ/2 L) z_prev` by dense LU.
pub fn linear_cn_step(system: &GalerkinSystem, tau: f64, z_prev: &[Complex64]) -> Vec<Complex64> {
    let a = dense(system.mass_matrix());
    let l = dense(system.hamiltonian());
    let half = Complex64::new(0.0, 0.5 * tau);
    let lhs = &a + &l * half;
    let rhs_m = &a - &l * half;
    let rhs = rhs_m * DVector::from_column_slice(z_prev);
    let sol = lhs.lu().solve(&rhs).expect("nonsingular Crank-Nicolson matrix");
    sol.iter().copied().collect()
}

pub fn a_norm(system: &GalerkinSystem, d: &[Complex64]) -> f64 {
    system.mass_matrix().quadratic_form(d).re.sqrt()
}

/// 4-point Gauss-Legendre on `[0, 1]`.
const G4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

fn hat(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Brute-force evaluator of the discrete nonlinear load by Gauss
/// quadrature on every cell, with no use of the library's tables,
/// convolution or stencils.
pub struct QuadratureOracle {
    pub mesh: Mesh,
    pub kernel: KernelSpec,
    pub coupling: CouplingField,
    points: Vec<(f64, f64, f64)>,
}

impl QuadratureOracle {
    pub fn new(mesh: Mesh, kernel: KernelSpec, coupling: CouplingField) -> Self {
        let h = mesh.spacing();
        let cells = mesh.cells_per_side();
        let mut points = Vec::new();
        for e2 in 0..cells {
            for e1 in 0..cells {
                for (t, wt) in G4 {
                    for (s, ws) in G4 {
                        points.push(((e1 as f64 + s) * h, (e2 as f64 + t) * h, ws * wt * h * h));
                    }
                }
            }
        }
        Self {
            mesh,
            kernel,
            coupling,
            points,
        }
    }

    fn psi(&self, z: &[Complex64], x: f64, y: f64) -> Complex64 {
        let h = self.mesh.spacing();
        let m = self.mesh.interior_per_side();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..m * m {
            let (xj, yj) = self.mesh.node_position(j).unwrap();
            let w = hat((x - xj) / h) * hat((y - yj) / h);
            if w != 0.0 {
                acc += z[j] * w;
            }
        }
        acc
    }

    /// Lattice potential `u_k = λ(x_k) Σ_l V(x_k - x_l) ∫ φ_l ρ` where the
    /// density is `Σ w_s |ψ_s|²`.
    pub fn potential(&self, states: &[(f64, &[Complex64])]) -> Vec<f64> {
        let n = self.mesh.nodes_per_side();
        let h = self.mesh.spacing();
        let rho: Vec<f64> = self
            .points
            .iter()
            .map(|&(x, y, _)| {
                states
                    .iter()
                    .map(|(w, z)| w * self.psi(z, x, y).norm_sqr())
                    .sum()
            })
            .collect();
        // moments over the full lattice (boundary hats included)
        let mut moments = vec![0.0; n * n];
        for (k, mk) in moments.iter_mut().enumerate() {
            let (xk, yk) = ((k % n) as f64 * h, (k / n) as f64 * h);
            *mk = self
                .points
                .iter()
                .zip(&rho)
                .map(|(&(x, y, w), r)| w * r * hat((x - xk) / h) * hat((y - yk) / h))
                .sum();
        }
        let v = |dx: f64, dy: f64| self.kernel.eval(dx, dy).expect("closed-form kernel");
        (0..n * n)
            .map(|k| {
                let (xk, yk) = ((k % n) as f64 * h, (k / n) as f64 * h);
                let conv: f64 = (0..n * n)
                    .map(|l| {
                        let (xl, yl) = ((l % n) as f64 * h, (l / n) as f64 * h);
                        v(xk - xl, yk - yl) * moments[l]
                    })
                    .sum();
                self.coupling.eval(xk, yk, self.mesh.side()) * conv
            })
            .collect()
    }

    /// `r_i = ∫ φ_i u_h ψ_h` with `u_h` the bilinear interpolant of `u`.
    pub fn apply(&self, u: &[f64], z: &[Complex64]) -> Vec<Complex64> {
        let n = self.mesh.nodes_per_side();
        let h = self.mesh.spacing();
        let mut out = vec![Complex64::new(0.0, 0.0); z.len()];
        for &(x, y, w) in &self.points {
            let uh: f64 = (0..n * n)
                .map(|k| u[k] * hat((x - (k % n) as f64 * h) / h) * hat((y - (k / n) as f64 * h) / h))
                .sum();
            let p = self.psi(z, x, y) * (uh * w);
            for (i, o) in out.iter_mut().enumerate() {
                let (xi, yi) = self.mesh.node_position(i).unwrap();
                let phi = hat((x - xi) / h) * hat((y - yi) / h);
                if phi != 0.0 {
                    *o += p * phi;
                }
            }
        }
        out
    }

    pub fn load(&self, z: &[Complex64]) -> Vec<Complex64> {
        let u = self.potential(&[(1.0, z)]);
        self.apply(&u, z)
    }
}
