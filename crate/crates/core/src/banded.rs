//! Banded symmetric `L D Lᵀ` factorization without pivoting.
//!
//! Used for the real SPD mass and stiffness matrices and for the complex
//! symmetric Crank-Nicolson matrices `A + iτ/2 (B + Y)`, whose real part is
//! SPD, so elimination without pivoting never meets a zero pivot.
//! Note the transpose is plain, not conjugate: the complex case is
//! symmetric, not Hermitian.

use num_complex::Complex64;
use num_traits::{One, Zero};
use std::ops::{Add, Div, Mul, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub trait Scalar:
    Copy
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
{
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Lower band storage: row `i` holds columns `i - bandwidth ..= i`.
#[derive(Debug, Clone)]
pub struct BandedSymmetric<T> {
    dim: usize,
    bandwidth: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedSymmetric<T> {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        Self {
            dim,
            bandwidth,
            data: vec![T::zero(); dim * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bandwidth);
        i * (self.bandwidth + 1) + (self.bandwidth - (i - j))
    }

    /// Entry `(i, j)`; symmetric, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bandwidth {
            T::zero()
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Sets `(i, j)` and, implicitly, `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bandwidth, "entry ({i}, {j}) outside band");
        let k = self.slot(i, j);
        self.data[k] = value;
    }

    pub fn factor(&self) -> Result<BandedLdl<T>, FactorError> {
        let n = self.dim;
        let bw = self.bandwidth;
        let mut l = self.data.clone();
        let mut d = vec![T::zero(); n];
        let row = |i: usize| i * (bw + 1);
        let scale = self
            .data
            .iter()
            .map(|v| v.magnitude())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            // w_k = L_ik d_k for k < i, computed on the fly
            for j in j0..i {
                let mut acc = l[row(i) + bw - (i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    let lik = l[row(i) + bw - (i - k)];
                    let ljk = l[row(j) + bw - (j - k)];
                    acc = acc - lik * ljk * d[k];
                }
                l[row(i) + bw - (i - j)] = acc / d[j];
            }
            let mut diag = l[row(i) + bw];
            for k in j0..i {
                let lik = l[row(i) + bw - (i - k)];
                diag = diag - lik * lik * d[k];
            }
            if diag.magnitude() <= 1e-300 * scale {
                return Err(FactorError::ZeroPivot { row: i });
            }
            d[i] = diag;
            l[row(i) + bw] = T::one();
        }
        Ok(BandedLdl {
            dim: n,
            bandwidth: bw,
            lower: l,
            diag: d,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLdl<T> {
    dim: usize,
    bandwidth: usize,
    lower: Vec<T>,
    diag: Vec<T>,
}

impl<T: Scalar> BandedLdl<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Pivots `D` of the factorization.
    pub fn pivots(&self) -> &[T] {
        &self.diag
    }

    /// Solves in place. `V` may be the matrix scalar or a complex vector
    /// over a real matrix.
    pub fn solve_in_place<V>(&self, rhs: &mut [V]) -> Result<(), FactorError>
    where
        V: Copy + Sub<Output = V> + Mul<T, Output = V> + Div<T, Output = V>,
    {
        if rhs.len() != self.dim {
            return Err(FactorError::DimensionMismatch {
                expected: self.dim,
                got: rhs.len(),
            });
        }
        let bw = self.bandwidth;
        let n = self.dim;
        let row = |i: usize| i * (bw + 1);
        for i in 0..n {
            let mut acc = rhs[i];
            for k in i.saturating_sub(bw)..i {
                acc = acc - rhs[k] * self.lower[row(i) + bw - (i - k)];
            }
            rhs[i] = acc;
        }
        for i in 0..n {
            rhs[i] = rhs[i] / self.diag[i];
        }
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                acc = acc - rhs[k] * self.lower[row(k) + bw - (k - i)];
            }
            rhs[i] = acc;
        }
        Ok(())
    }
}
