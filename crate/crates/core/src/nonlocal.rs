//! The nonlocal nonlinearity `f[ψ] = λ (V ∗ |ψ|²) ψ` and its Galerkin load.
//!
//! Discretization, per state `z`:
//!
//! 1. density moments `T_k = ∫ φ_k |ψ_h|²` on every full-lattice node `k`
//!    (boundary hats included), integrated exactly;
//! 2. `w_k = Σ_l V(x_k − x_l) T_l`, a Toeplitz sum evaluated by zero-padded
//!    FFT (or directly, as a cross-check);
//! 3. effective potential `u_k = λ(x_k) w_k`, interpolated bilinearly;
//! 4. load `r = Y[u] z`, again exact.
//!
//! Since `T_k ≈ |ψ(x_k)|² ∫φ_k`, step 2 is the trapezoidal rule for the
//! convolution integral. Using the same moments on both sides makes
//! `z† Y[u(T(a))] z = Σ_k u_k(a) T_k(z)`, so for constant `λ` and even `V`
//! the exchange identity `(b, λ g[|a|²] b) = (a, λ g[|b|²] a)` holds exactly
//! in the discrete setting. That identity is what the incoherent scheme
//! needs for energy conservation.

use crate::assembly::triple_table;
use crate::mesh::Mesh;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlocalError {
    #[error("field has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "interaction kernel is not even: sample at offset ({dx},{dy}) is {forward} but its \
         mirror is {backward}; the interaction must satisfy V(-x) = V(x)"
    )]
    OddKernel {
        dx: isize,
        dy: isize,
        forward: f64,
        backward: f64,
    },
    #[error("kernel sample at offset ({dx},{dy}) is not finite")]
    NonFiniteKernel { dx: isize, dy: isize },
    #[error("kernel table covers offsets up to {have}, grid needs {need}")]
    TableTooSmall { have: usize, need: usize },
    #[error("kernel table has {got} samples, which is not (2k+1)² for any k")]
    TableShape { got: usize },
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
}

/// Even interaction kernel `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `V ≡ 0`.
    None,
    /// `amplitude · exp(-|x|² / (2σ²))`.
    Gaussian { sigma: f64, amplitude: f64 },
    /// `amplitude · ½ (1 - tanh((|x| - radius) / width))`.
    SmoothedIndicator {
        radius: f64,
        width: f64,
        amplitude: f64,
    },
    /// Explicit samples on lattice offsets `-k..=k` per axis, row-major
    /// with the y offset outermost.
    Table { samples: Vec<f64> },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), NonlocalError> {
        match self {
            KernelSpec::None => Ok(()),
            KernelSpec::Gaussian { sigma, amplitude } => {
                positive("kernel sigma", *sigma)?;
                finite("kernel amplitude", *amplitude)
            }
            KernelSpec::SmoothedIndicator {
                radius,
                width,
                amplitude,
            } => {
                positive("kernel radius", *radius)?;
                positive("kernel width", *width)?;
                finite("kernel amplitude", *amplitude)
            }
            KernelSpec::Table { samples } => table_half_width(samples.len()).map(|_| ()),
        }
    }

    /// Point value for the closed-form families.
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        let r2 = x * x + y * y;
        match self {
            KernelSpec::None => Some(0.0),
            KernelSpec::Gaussian { sigma, amplitude } => {
                Some(amplitude * (-r2 / (2.0 * sigma * sigma)).exp())
            }
            KernelSpec::SmoothedIndicator {
                radius,
                width,
                amplitude,
            } => Some(amplitude * 0.5 * (1.0 - ((r2.sqrt() - radius) / width).tanh())),
            KernelSpec::Table { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            KernelSpec::None => true,
            KernelSpec::Gaussian { amplitude, .. }
            | KernelSpec::SmoothedIndicator { amplitude, .. } => *amplitude == 0.0,
            KernelSpec::Table { samples } => samples.iter().all(|&v| v == 0.0),
        }
    }

    /// Samples on the `(2p-1)²` node-difference lattice of a `p × p` grid
    /// with spacing `h`. Evenness is checked.
    pub fn samples(&self, h: f64, p: usize) -> Result<KernelSamples, NonlocalError> {
        self.validate()?;
        let k = p as isize - 1;
        let side = 2 * p - 1;
        let mut data = Vec::with_capacity(side * side);
        match self {
            KernelSpec::Table { samples } => {
                let half = table_half_width(samples.len())?;
                if half < p - 1 {
                    return Err(NonlocalError::TableTooSmall {
                        have: half,
                        need: p - 1,
                    });
                }
                let tside = 2 * half + 1;
                let shift = half as isize;
                for dy in -k..=k {
                    for dx in -k..=k {
                        data.push(samples[(dx + shift) as usize + (dy + shift) as usize * tside]);
                    }
                }
            }
            _ => {
                for dy in -k..=k {
                    for dx in -k..=k {
                        let v = self
                            .eval(dx as f64 * h, dy as f64 * h)
                            .expect("closed-form kernel");
                        data.push(v);
                    }
                }
            }
        }
        let samples = KernelSamples { p, data };
        samples.check()?;
        Ok(samples)
    }
}

fn positive(what: &'static str, value: f64) -> Result<(), NonlocalError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(NonlocalError::InvalidParameter { what, value })
    }
}

fn finite(what: &'static str, value: f64) -> Result<(), NonlocalError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(NonlocalError::InvalidParameter { what, value })
    }
}

fn table_half_width(len: usize) -> Result<usize, NonlocalError> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len || side.is_multiple_of(2) {
        return Err(NonlocalError::TableShape { got: len });
    }
    Ok(side / 2)
}

/// Kernel values `V(dx·h, dy·h)` for `|dx|, |dy| < p`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSamples {
    p: usize,
    data: Vec<f64>,
}

impl KernelSamples {
    pub fn grid(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, dx: isize, dy: isize) -> f64 {
        let k = self.p as isize - 1;
        let side = (2 * self.p - 1) as isize;
        self.data[((dx + k) + (dy + k) * side) as usize]
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check(&self) -> Result<(), NonlocalError> {
        let k = self.p as isize - 1;
        let scale = self.sup_norm();
        for dy in -k..=k {
            for dx in -k..=k {
                let forward = self.get(dx, dy);
                if !forward.is_finite() {
                    return Err(NonlocalError::NonFiniteKernel { dx, dy });
                }
                let backward = self.get(-dx, -dy);
                if (forward - backward).abs() > 1e-14 * scale {
                    return Err(NonlocalError::OddKernel {
                        dx,
                        dy,
                        forward,
                        backward,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Which evaluation route the Toeplitz sum takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    #[default]
    Fft,
    Direct,
}

/// Linear (non-circular) convolution `w_k = Σ_l V(x_k − x_l) ρ_l` on a
/// `p × p` grid.
pub struct Convolver {
    kernel: KernelSamples,
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("grid", &self.kernel.p)
            .field("padded", &self.padded)
            .finish()
    }
}

impl Convolver {
    pub fn new(kernel: KernelSamples) -> Self {
        let p = kernel.p;
        // any size ≥ 2p - 1 avoids wrap-around
        let padded = 2 * p;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let mut kernel_hat = vec![Complex64::new(0.0, 0.0); padded * padded];
        let k = p as isize - 1;
        let wrap = |d: isize| (d.rem_euclid(padded as isize)) as usize;
        for dy in -k..=k {
            for dx in -k..=k {
                kernel_hat[wrap(dx) + wrap(dy) * padded] = Complex64::new(kernel.get(dx, dy), 0.0);
            }
        }
        let mut conv = Self {
            kernel,
            padded,
            forward,
            inverse,
            kernel_hat: Vec::new(),
        };
        conv.transform(&mut kernel_hat, true);
        conv.kernel_hat = kernel_hat;
        conv
    }

    pub fn grid(&self) -> usize {
        self.kernel.p
    }

    pub fn kernel(&self) -> &KernelSamples {
        &self.kernel
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let n = self.padded;
        let plan = if forward { &self.forward } else { &self.inverse };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut scratch);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for (r, v) in column.iter_mut().enumerate() {
                *v = buf[c + r * n];
            }
            plan.process_with_scratch(&mut column, &mut scratch);
            for (r, v) in column.iter().enumerate() {
                buf[c + r * n] = *v;
            }
        }
    }

    fn check_len(&self, values: &[f64]) -> Result<(), NonlocalError> {
        let expected = self.kernel.p * self.kernel.p;
        if values.len() != expected {
            return Err(NonlocalError::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, values: &[f64], path: ConvolutionPath) -> Result<Vec<f64>, NonlocalError> {
        match path {
            ConvolutionPath::Fft => self.apply_fft(values),
            ConvolutionPath::Direct => self.apply_direct(values),
        }
    }

    pub fn apply_fft(&self, values: &[f64]) -> Result<Vec<f64>, NonlocalError> {
        self.check_len(values)?;
        let p = self.kernel.p;
        let n = self.padded;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..p {
            for c in 0..p {
                buf[c + r * n] = Complex64::new(values[c + r * p], 0.0);
            }
        }
        self.transform(&mut buf, true);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, false);
        let norm = 1.0 / (n * n) as f64;
        let mut out = Vec::with_capacity(p * p);
        for r in 0..p {
            for c in 0..p {
                out.push(buf[c + r * n].re * norm);
            }
        }
        Ok(out)
    }

    /// `O(p⁴)` double sum.
    pub fn apply_direct(&self, values: &[f64]) -> Result<Vec<f64>, NonlocalError> {
        self.check_len(values)?;
        let p = self.kernel.p;
        let mut out = vec![0.0; p * p];
        for k2 in 0..p {
            for k1 in 0..p {
                let mut acc = 0.0;
                for l2 in 0..p {
                    for l1 in 0..p {
                        let v = values[l1 + l2 * p];
                        if v != 0.0 {
                            acc += self
                                .kernel
                                .get(k1 as isize - l1 as isize, k2 as isize - l2 as isize)
                                * v;
                        }
                    }
                }
                out[k1 + k2 * p] = acc;
            }
        }
        Ok(out)
    }
}

/// Trapezoidal convolution of an interior nodal density (zero on the
/// boundary): `w_i = h² Σ_j V(x_i − x_j) ρ_j`.
pub fn convolve(
    mesh: &Mesh,
    kernel: &KernelSpec,
    density: &[f64],
    path: ConvolutionPath,
) -> Result<Vec<f64>, NonlocalError> {
    let m = mesh.interior_per_side();
    if density.len() != m * m {
        return Err(NonlocalError::DimensionMismatch {
            expected: m * m,
            got: density.len(),
        });
    }
    let h = mesh.spacing();
    let conv = Convolver::new(kernel.samples(h, m)?);
    let mut w = conv.apply(density, path)?;
    for v in &mut w {
        *v *= h * h;
    }
    Ok(w)
}

/// Smooth coupling `λ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingField {
    Constant(f64),
    /// `value` in the bulk, rising smoothly (C^∞) from zero at distance
    /// `margin` from the boundary to full strength at `2·margin`.
    Plateau { value: f64, margin: f64 },
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

impl CouplingField {
    pub fn validate(&self, side: f64) -> Result<(), NonlocalError> {
        match self {
            CouplingField::Constant(c) => finite("coupling value", *c),
            CouplingField::Plateau { value, margin } => {
                finite("coupling value", *value)?;
                positive("coupling margin", *margin)?;
                if 4.0 * margin >= side {
                    return Err(NonlocalError::InvalidParameter {
                        what: "coupling margin (must be below a quarter of the side)",
                        value: *margin,
                    });
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64, side: f64) -> f64 {
        match self {
            CouplingField::Constant(c) => *c,
            CouplingField::Plateau { value, margin } => {
                let ramp = |s: f64| {
                    let d = s.min(side - s);
                    smooth_step((d - margin) / margin)
                };
                value * ramp(x) * ramp(y)
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            CouplingField::Constant(c) => c.abs(),
            CouplingField::Plateau { value, .. } => value.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm() == 0.0
    }

    /// Values on the full lattice, boundary ring included.
    pub fn lattice_samples(&self, mesh: &Mesh) -> Vec<f64> {
        let n = mesh.nodes_per_side();
        (0..n * n)
            .map(|k| {
                let (x, y) = mesh.lattice_position(k % n, k / n);
                self.eval(x, y, mesh.side())
            })
            .collect()
    }

    /// Values at the interior nodes.
    pub fn interior_samples(&self, mesh: &Mesh) -> Vec<f64> {
        (0..mesh.dofs())
            .map(|j| {
                let (x, y) = mesh.node_position(j).expect("index in range");
                self.eval(x, y, mesh.side())
            })
            .collect()
    }
}

/// Evaluator for the discrete nonlinear term on one mesh.
#[derive(Debug)]
pub struct NonlocalTerm {
    mesh: Mesh,
    convolver: Convolver,
    coupling: Vec<f64>,
    coupling_sup: f64,
    path: ConvolutionPath,
    table: [[[f64; 4]; 4]; 4],
}

impl NonlocalTerm {
    pub fn new(
        mesh: &Mesh,
        kernel: &KernelSpec,
        coupling: &CouplingField,
    ) -> Result<Self, NonlocalError> {
        coupling.validate(mesh.side())?;
        let samples = kernel.samples(mesh.spacing(), mesh.nodes_per_side())?;
        Ok(Self {
            mesh: *mesh,
            convolver: Convolver::new(samples),
            coupling: coupling.lattice_samples(mesh),
            coupling_sup: coupling.sup_norm(),
            path: ConvolutionPath::Fft,
            table: triple_table(),
        })
    }

    pub fn with_path(mut self, path: ConvolutionPath) -> Self {
        self.path = path;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// `‖λ‖_∞ ‖V‖_∞` on the sampled lattice.
    pub fn strength(&self) -> f64 {
        self.coupling_sup * self.convolver.kernel().sup_norm()
    }

    fn check(&self, z: &[Complex64]) -> Result<(), NonlocalError> {
        if z.len() != self.mesh.dofs() {
            return Err(NonlocalError::DimensionMismatch {
                expected: self.mesh.dofs(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// `T_k = ∫ φ_k |ψ_h|²` for every full-lattice node.
    pub fn density_moments(&self, z: &[Complex64]) -> Result<Vec<f64>, NonlocalError> {
        self.check(z)?;
        let mesh = &self.mesh;
        let n = mesh.nodes_per_side();
        let h2 = mesh.spacing().powi(2);
        let mut moments = vec![0.0; n * n];
        for e2 in 0..mesh.cells_per_side() {
            for e1 in 0..mesh.cells_per_side() {
                let vals = mesh
                    .cell_dofs(e1, e2)
                    .map(|d| d.map_or(Complex64::new(0.0, 0.0), |j| z[j]));
                if vals.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                    continue;
                }
                // products Re(conj(z_a) z_b), symmetric in (a, b)
                let mut prod = [[0.0; 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        prod[a][b] = (vals[a].conj() * vals[b]).re;
                    }
                }
                for (c, (i1, i2)) in mesh.cell_corners(e1, e2).iter().enumerate() {
                    let mut acc = 0.0;
                    for a in 0..4 {
                        for b in 0..4 {
                            acc += self.table[a][b][c] * prod[a][b];
                        }
                    }
                    moments[i1 + i2 * n] += h2 * acc;
                }
            }
        }
        Ok(moments)
    }

    /// `u = λ · (V ∗ T)` on the full lattice.
    pub fn potential(&self, moments: &[f64]) -> Result<Vec<f64>, NonlocalError> {
        let mut w = self.convolver.apply(moments, self.path)?;
        for (v, l) in w.iter_mut().zip(&self.coupling) {
            *v *= l;
        }
        Ok(w)
    }

    /// `Y[u] z` for a full-lattice coefficient `u`.
    pub fn apply_potential(
        &self,
        potential: &[f64],
        z: &[Complex64],
    ) -> Result<Vec<Complex64>, NonlocalError> {
        self.check(z)?;
        let mesh = &self.mesh;
        let n = mesh.nodes_per_side();
        if potential.len() != n * n {
            return Err(NonlocalError::DimensionMismatch {
                expected: n * n,
                got: potential.len(),
            });
        }
        let h2 = mesh.spacing().powi(2);
        let mut out = vec![Complex64::new(0.0, 0.0); z.len()];
        for e2 in 0..mesh.cells_per_side() {
            for e1 in 0..mesh.cells_per_side() {
                let dofs = mesh.cell_dofs(e1, e2);
                if dofs.iter().all(Option::is_none) {
                    continue;
                }
                let u = mesh.cell_corners(e1, e2).map(|(i1, i2)| potential[i1 + i2 * n]);
                let vals = dofs.map(|d| d.map_or(Complex64::new(0.0, 0.0), |j| z[j]));
                for (a, da) in dofs.iter().enumerate() {
                    let Some(i) = da else { continue };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..4 {
                        let mut coef = 0.0;
                        for c in 0..4 {
                            coef += self.table[a][b][c] * u[c];
                        }
                        acc += vals[b] * coef;
                    }
                    out[*i] += acc * h2;
                }
            }
        }
        Ok(out)
    }

    /// Load vector `r_i ≈ (φ_i, λ g_V[|ψ_h|²] ψ_h)`.
    pub fn load(&self, z: &[Complex64]) -> Result<Vec<Complex64>, NonlocalError> {
        let u = self.potential(&self.density_moments(z)?)?;
        self.apply_potential(&u, z)
    }

    /// `½ Re z† r(z)`.
    pub fn energy(&self, z: &[Complex64]) -> Result<f64, NonlocalError> {
        let r = self.load(z)?;
        Ok(0.5 * z.iter().zip(&r).map(|(a, b)| (a.conj() * b).re).sum::<f64>())
    }

    /// `(b, λ g_V[|a|²] b)` in the discrete form; complex for generality,
    /// real up to rounding.
    pub fn exchange_form(&self, a: &[Complex64], b: &[Complex64]) -> Result<Complex64, NonlocalError> {
        let u = self.potential(&self.density_moments(a)?)?;
        let r = self.apply_potential(&u, b)?;
        Ok(b.iter().zip(&r).map(|(x, y)| x.conj() * y).sum())
    }
}
