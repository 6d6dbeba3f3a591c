//! Configuration, experiment orchestration and file output.

pub mod config;
pub mod converge;
pub mod run;
pub mod snapshot;

pub use config::{load_config, parse_config, ConfigError, ProblemSpec};
pub use converge::{converge, ConvergenceReport, ConvergenceRow, RefineMode};
pub use run::{run, simulate, RunSummary};

use crate::fields::{interpolate, Eigenmode, Field, GaussianPacket};
use crate::nonlocal::{NonlocalError, NonlocalTerm};
use crate::observables::{ritz_project, ObservableError};
use crate::steppers::{FixedPointConfig, StepError};
use crate::system::{GalerkinSystem, SystemError};
use config::{InitialCondition, Projection};
use num_complex::Complex64;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Overrides the directory that relative output paths resolve against.
pub const OUTPUT_ROOT_ENV: &str = "HFEM_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid problem: {0}")]
    Setup(String),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 configuration, 3 non-contraction, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Setup(_) => 2,
            HarnessError::Step(StepError::NonContraction { .. }) => 3,
            HarnessError::Step(_) => 2,
            HarnessError::Io { .. } => 4,
        }
    }
}

impl From<SystemError> for HarnessError {
    fn from(e: SystemError) -> Self {
        HarnessError::Setup(e.to_string())
    }
}

impl From<NonlocalError> for HarnessError {
    fn from(e: NonlocalError) -> Self {
        HarnessError::Setup(e.to_string())
    }
}

impl From<ObservableError> for HarnessError {
    fn from(e: ObservableError) -> Self {
        HarnessError::Setup(e.to_string())
    }
}

/// Assembles the Galerkin system described by `spec`.
pub fn build_system(spec: &ProblemSpec) -> Result<GalerkinSystem, HarnessError> {
    let mesh = spec.mesh();
    let nonlocal = if spec.has_interaction() {
        Some(
            NonlocalTerm::new(&mesh, &spec.kernel, &spec.coupling)?
                .with_path(spec.solver.convolution),
        )
    } else {
        None
    };
    let side = spec.side;
    let potential = spec.potential.clone();
    Ok(GalerkinSystem::new(
        &mesh,
        move |x, y| potential.eval(x, y, side),
        nonlocal,
    )?)
}

/// The continuous initial datum `ψ₀`.
pub fn initial_field(spec: &ProblemSpec) -> Box<dyn Field> {
    match spec.initial {
        InitialCondition::Eigenmode { p, q, amplitude } => Box::new(Eigenmode {
            amplitude,
            ..Eigenmode::new(p, q, spec.side)
        }),
        InitialCondition::GaussianPacket {
            center,
            width,
            momentum,
            amplitude,
        } => Box::new(GaussianPacket {
            center,
            width,
            momentum,
            amplitude,
        }),
    }
}

/// `ψ_{0h}` by nodal interpolation or Ritz projection.
pub fn initial_state(
    spec: &ProblemSpec,
    system: &GalerkinSystem,
) -> Result<Vec<Complex64>, HarnessError> {
    let field = initial_field(spec);
    match spec.projection {
        Projection::Interpolate => Ok(interpolate(system.mesh(), field.as_ref())),
        Projection::Ritz => {
            let factor = system
                .stiffness_matrix()
                .to_banded()
                .factor()
                .map_err(|e| HarnessError::Setup(e.to_string()))?;
            Ok(ritz_project(system.mesh(), field.as_ref(), &factor)?)
        }
    }
}

pub fn fixed_point_config(spec: &ProblemSpec, mass0: f64) -> FixedPointConfig {
    let s = &spec.solver;
    FixedPointConfig {
        tolerance: s
            .tolerance
            .unwrap_or_else(|| 1e-13 * mass0.sqrt().max(f64::MIN_POSITIVE)),
        max_iterations: s.max_iterations,
        guard_ratio: s.guard_ratio,
        map: s.map,
        extrapolate: s.extrapolate,
    }
}

/// Writes `mass.txt`, `stiffness.txt` and `potential.txt` as
/// `row col real imag` lines into the output directory.
pub fn dump_matrices(spec: &ProblemSpec) -> Result<Vec<PathBuf>, HarnessError> {
    let system = build_system(spec)?;
    std::fs::create_dir_all(&spec.output).map_err(|e| HarnessError::io(&spec.output, e))?;
    let mut written = Vec::new();
    for (name, op) in [
        ("mass.txt", system.mass_matrix()),
        ("stiffness.txt", system.stiffness_matrix()),
        ("potential.txt", system.potential_matrix()),
    ] {
        let path = spec.output.join(name);
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for (i, j, v) in op.triplets() {
            writeln!(w, "{i} {j} {v:.17e} {:.17e}", 0.0).map_err(|e| HarnessError::io(&path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Mesh with the same side and `factor` times as many cells.
pub(crate) fn refined_nodes(nodes: usize, factor: usize) -> usize {
    (nodes - 1) * factor + 1
}
