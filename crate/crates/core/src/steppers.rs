//! Coherent and incoherent Crank-Nicolson steppers.
//!
//! Both schemes advance the midpoint `m = ½(z_n + z_{n-1})` by fixed-point
//! iteration and return `z_n = 2m - z_{n-1}`. They differ only in the
//! density fed to the nonlocal potential: the coherent scheme uses `|m|²`,
//! the incoherent one the average `½(|z_n|² + |z_{n-1}|²)`.

use crate::banded::{BandedLdl, BandedSymmetric, FactorError};
use crate::nonlocal::NonlocalError;
use crate::observables::ObservableError;
use crate::system::GalerkinSystem;
use num_complex::Complex64;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Coherent,
    Incoherent,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Coherent => "coherent",
            SchemeKind::Incoherent => "incoherent",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coherent" => Ok(SchemeKind::Coherent),
            "incoherent" => Ok(SchemeKind::Incoherent),
            other => Err(format!("unknown scheme `{other}` (expected coherent or incoherent)")),
        }
    }
}

/// Uniform time grid `t_n = nτ`, `τ = T/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        Self { horizon, steps }
    }

    /// Zero when `N = 0`.
    pub fn tau(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.horizon / self.steps as f64
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau()
    }
}

/// How one fixed-point iterate is computed from the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointMap {
    /// `(A + iτ/2 (B+Y)) m' = A z - iτ/2 r(m)`; only the nonlinear load is
    /// lagged.
    LinearImplicit,
    /// `A m' = A z - iτ/2 ((B+Y) m + r(m))`; contracts only for
    /// `τ λ_max(A⁻¹(B+Y)) ≲ 1`.
    Banach,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Absolute bound on `‖m^{k+1} - m^k‖_A`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// An iterate "grows" when the increment ratio exceeds this.
    pub guard_ratio: f64,
    pub map: FixedPointMap,
    /// Start from `m⁰ = ½(3z_{n-1} - z_{n-2})` instead of `z_{n-1}`.
    pub extrapolate: bool,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-13,
            max_iterations: 200,
            guard_ratio: 1.0,
            map: FixedPointMap::LinearImplicit,
            extrapolate: false,
        }
    }
}

impl FixedPointConfig {
    /// The default tolerance `1e-13 √M₀`.
    pub fn for_mass(mass: f64) -> Self {
        Self {
            tolerance: 1e-13 * mass.sqrt().max(f64::MIN_POSITIVE),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(StepError::InvalidConfig(format!(
                "fixed-point tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations < 2 {
            return Err(StepError::InvalidConfig(format!(
                "max_iterations must be at least 2, got {}",
                self.max_iterations
            )));
        }
        if self.guard_ratio.is_nan() || self.guard_ratio <= 0.0 {
            return Err(StepError::InvalidConfig(format!(
                "guard ratio must be positive, got {}",
                self.guard_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    /// Last observed increment ratio, if at least two increments were seen.
    pub contraction: Option<f64>,
    pub mass: f64,
    pub energy: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(
        "fixed-point iteration failed to contract at step {step} after {iterations} iterations \
         (residual {residual:.3e}, empirical contraction ratio {ratio:.3}); admissibility guard \
         α̂(√M + 1)τ = {guard:.3} should be ≤ 1, reduce the time step"
    )]
    NonContraction {
        step: usize,
        iterations: usize,
        residual: f64,
        ratio: f64,
        guard: f64,
    },
    #[error("state has {got} coefficients, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid fixed-point configuration: {0}")]
    InvalidConfig(String),
    #[error("step matrix factorization failed: {0}")]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

/// Fixed-step propagator for one system, scheme and `τ`.
#[derive(Debug)]
pub struct Stepper<'a> {
    system: &'a GalerkinSystem,
    scheme: SchemeKind,
    tau: f64,
    config: FixedPointConfig,
    implicit: Option<BandedLdl<Complex64>>,
}

fn a_norm(system: &GalerkinSystem, d: &[Complex64]) -> f64 {
    system.mass_matrix().quadratic_form(d).re.max(0.0).sqrt()
}

impl<'a> Stepper<'a> {
    /// `τ` may be negative to run backwards in time.
    pub fn new(
        system: &'a GalerkinSystem,
        scheme: SchemeKind,
        tau: f64,
        config: FixedPointConfig,
    ) -> Result<Self, StepError> {
        config.validate()?;
        let implicit = match config.map {
            FixedPointMap::LinearImplicit => {
                let a = system.mass_matrix();
                let l = system.hamiltonian();
                let m = a.interior_per_side();
                let mut band = BandedSymmetric::<Complex64>::zeros(a.dim(), m + 1);
                for (i, j, v) in a.triplets() {
                    if j <= i {
                        band.set(i, j, band.get(i, j) + Complex64::new(v, 0.0));
                    }
                }
                for (i, j, v) in l.triplets() {
                    if j <= i {
                        band.set(i, j, band.get(i, j) + Complex64::new(0.0, 0.5 * tau * v));
                    }
                }
                Some(band.factor()?)
            }
            FixedPointMap::Banach => None,
        };
        Ok(Self {
            system,
            scheme,
            tau,
            config,
            implicit,
        })
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn config(&self) -> &FixedPointConfig {
        &self.config
    }

    /// Surrogate contraction constant `α̂`. The implicit map treats
    /// `B + Y` exactly, so only the nonlinear part enters there.
    pub fn alpha(&self, mass: f64) -> f64 {
        let s = mass.max(0.0).sqrt() + 1.0;
        let nonlinear = 4.0 * self.system.interaction_strength() * s * s;
        match self.config.map {
            FixedPointMap::LinearImplicit => nonlinear,
            FixedPointMap::Banach => self.system.spectral_radius() + nonlinear,
        }
    }

    /// `α̂ (√M + 1) |τ|`; the iteration is expected to contract below 1.
    pub fn admissibility(&self, mass: f64) -> f64 {
        self.alpha(mass) * (mass.max(0.0).sqrt() + 1.0) * self.tau.abs()
    }

    fn nonlinear_at(
        &self,
        m: &[Complex64],
        z_prev: &[Complex64],
        prev_moments: Option<&[f64]>,
    ) -> Result<Option<Vec<Complex64>>, StepError> {
        let Some(term) = self.system.nonlocal() else {
            return Ok(None);
        };
        let r = match self.scheme {
            SchemeKind::Coherent => term.load(m)?,
            SchemeKind::Incoherent => {
                let z_next: Vec<Complex64> =
                    m.iter().zip(z_prev).map(|(a, b)| 2.0 * a - b).collect();
                let mut t = term.density_moments(&z_next)?;
                let prev = prev_moments.expect("moments of z_prev precomputed");
                for (a, b) in t.iter_mut().zip(prev) {
                    *a = 0.5 * (*a + b);
                }
                let u = term.potential(&t)?;
                term.apply_potential(&u, m)?
            }
        };
        Ok(Some(r))
    }

    /// Solves for the midpoint. `step` only labels errors.
    fn midpoint(
        &self,
        z_prev: &[Complex64],
        z_prev2: Option<&[Complex64]>,
        step: usize,
    ) -> Result<(Vec<Complex64>, usize, f64, Option<f64>), StepError> {
        let sys = self.system;
        let half = Complex64::new(0.0, 0.5 * self.tau);
        let az = sys.mass_matrix().apply(z_prev);
        let prev_moments = match (self.scheme, sys.nonlocal()) {
            (SchemeKind::Incoherent, Some(term)) => Some(term.density_moments(z_prev)?),
            _ => None,
        };
        let mut m: Vec<Complex64> = match (self.config.extrapolate, z_prev2) {
            (true, Some(pp)) => z_prev.iter().zip(pp).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
            _ => z_prev.to_vec(),
        };

        let linear_only = sys.nonlocal().is_none();
        let mut prev_inc = f64::NAN;
        let mut ratio = None;
        let mut growth = 0;
        let mut residual = f64::INFINITY;
        for k in 1..=self.config.max_iterations {
            let r = self.nonlinear_at(&m, z_prev, prev_moments.as_deref())?;
            let mut next = match (&self.implicit, self.config.map) {
                (Some(factor), _) => {
                    let mut rhs = az.clone();
                    if let Some(r) = &r {
                        for (a, b) in rhs.iter_mut().zip(r) {
                            *a -= half * b;
                        }
                    }
                    factor.solve_in_place(&mut rhs)?;
                    rhs
                }
                (None, _) => {
                    let lm = sys.hamiltonian().apply(&m);
                    let mut rhs = az.clone();
                    for (i, a) in rhs.iter_mut().enumerate() {
                        let nl = r.as_ref().map_or(Complex64::new(0.0, 0.0), |r| r[i]);
                        *a -= half * (lm[i] + nl);
                    }
                    sys.mass_factor().solve_in_place(&mut rhs)?;
                    rhs
                }
            };
            if linear_only && self.implicit.is_some() {
                // the map is constant: one solve lands on the fixed point
                return Ok((next, 1, 0.0, None));
            }
            let diff: Vec<Complex64> = next.iter().zip(&m).map(|(a, b)| a - b).collect();
            let inc = a_norm(sys, &diff);
            std::mem::swap(&mut m, &mut next);
            residual = inc;
            if !inc.is_finite() {
                return Err(self.non_contraction(step, k, inc, f64::INFINITY, z_prev));
            }
            if prev_inc.is_finite() && prev_inc > 0.0 {
                let q = inc / prev_inc;
                ratio = Some(q);
                if q > self.config.guard_ratio {
                    growth += 1;
                } else {
                    growth = 0;
                }
            }
            if inc <= self.config.tolerance {
                return Ok((m, k, inc, ratio));
            }
            if growth >= 3 {
                return Err(self.non_contraction(step, k, inc, ratio.unwrap_or(f64::NAN), z_prev));
            }
            prev_inc = inc;
        }
        Err(self.non_contraction(
            step,
            self.config.max_iterations,
            residual,
            ratio.unwrap_or(f64::NAN),
            z_prev,
        ))
    }

    fn non_contraction(
        &self,
        step: usize,
        iterations: usize,
        residual: f64,
        ratio: f64,
        z_prev: &[Complex64],
    ) -> StepError {
        let mass = self.system.mass_of(z_prev).unwrap_or(f64::NAN);
        StepError::NonContraction {
            step,
            iterations,
            residual,
            ratio,
            guard: self.admissibility(mass),
        }
    }

    fn check(&self, z: &[Complex64]) -> Result<(), StepError> {
        if z.len() != self.system.dofs() {
            return Err(StepError::DimensionMismatch {
                expected: self.system.dofs(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// One step `z_{n-1} ↦ z_n`; `z_prev2` is used only for the
    /// extrapolated initial guess. `step` labels errors.
    pub fn step_from(
        &self,
        z_prev: &[Complex64],
        z_prev2: Option<&[Complex64]>,
        step: usize,
    ) -> Result<(Vec<Complex64>, StepDiagnostics), StepError> {
        self.check(z_prev)?;
        let start = Instant::now();
        let (m, iterations, residual, contraction) = self.midpoint(z_prev, z_prev2, step)?;
        let z_next: Vec<Complex64> = m.iter().zip(z_prev).map(|(a, b)| 2.0 * a - b).collect();
        let diag = StepDiagnostics {
            iterations,
            residual,
            contraction,
            mass: self.system.mass_of(&z_next)?,
            energy: self.system.energy_of(&z_next)?,
            wall_time: start.elapsed(),
        };
        Ok((z_next, diag))
    }

    pub fn step(&self, z_prev: &[Complex64]) -> Result<(Vec<Complex64>, StepDiagnostics), StepError> {
        self.step_from(z_prev, None, 1)
    }

    /// Runs `steps` steps from `z0`, keeping a snapshot every `stride`
    /// steps (`0` keeps only the initial one) and the final state.
    pub fn evolve(
        &self,
        z0: &[Complex64],
        steps: usize,
        stride: usize,
    ) -> Result<Trajectory, StepError> {
        self.evolve_with(z0, steps, stride, |_, _, _| {})
    }

    /// As [`Stepper::evolve`], calling `observer(n, t_n, z_n)` after each
    /// state is produced, including `n = 0`.
    pub fn evolve_with<F>(
        &self,
        z0: &[Complex64],
        steps: usize,
        stride: usize,
        mut observer: F,
    ) -> Result<Trajectory, StepError>
    where
        F: FnMut(usize, f64, &[Complex64]),
    {
        self.check(z0)?;
        let mass0 = self.system.mass_of(z0)?;
        let guard = self.admissibility(mass0);
        if guard > 1.0 && steps > 0 && self.tau != 0.0 {
            log::warn!(
                "admissibility guard α̂(√M + 1)τ = {guard:.3} exceeds 1; the fixed-point \
                 iteration may fail to contract"
            );
        }
        let initial = StepDiagnostics {
            iterations: 0,
            residual: 0.0,
            contraction: None,
            mass: mass0,
            energy: self.system.energy_of(z0)?,
            wall_time: Duration::ZERO,
        };
        let mut records = vec![StepRecord {
            step: 0,
            time: 0.0,
            diagnostics: initial,
        }];
        let mut snapshots = vec![Snapshot {
            step: 0,
            time: 0.0,
            state: z0.to_vec(),
        }];
        observer(0, 0.0, z0);
        let mut current = z0.to_vec();
        let mut previous: Option<Vec<Complex64>> = None;
        let effective = if self.tau == 0.0 { 0 } else { steps };
        for n in 1..=effective {
            let (next, diag) = self.step_from(&current, previous.as_deref(), n)?;
            let t = n as f64 * self.tau;
            observer(n, t, &next);
            records.push(StepRecord {
                step: n,
                time: t,
                diagnostics: diag,
            });
            if stride > 0 && n % stride == 0 {
                snapshots.push(Snapshot {
                    step: n,
                    time: t,
                    state: next.clone(),
                });
            }
            previous = Some(std::mem::replace(&mut current, next));
        }
        Ok(Trajectory {
            tau: self.tau,
            records,
            snapshots,
            final_state: current,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub state: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Vec<Complex64>,
}

impl Trajectory {
    pub fn max_relative_mass_drift(&self) -> f64 {
        self.max_relative_drift(|d| d.mass)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        self.max_relative_drift(|d| d.energy)
    }

    fn max_relative_drift(&self, f: impl Fn(&StepDiagnostics) -> f64) -> f64 {
        let q0 = f(&self.records[0].diagnostics);
        let scale = q0.abs().max(f64::MIN_POSITIVE);
        self.records
            .iter()
            .map(|r| (f(&r.diagnostics) - q0).abs() / scale)
            .fold(0.0, f64::max)
    }
}
