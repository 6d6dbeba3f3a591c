//! Single-trajectory runs.

use super::{build_system, fixed_point_config, initial_state, snapshot, HarnessError, ProblemSpec};
use crate::steppers::{StepRecord, Stepper, Trajectory};
use crate::system::GalerkinSystem;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// What a finished run wrote and measured.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output: PathBuf,
    pub steps: usize,
    pub snapshots: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub max_iterations: usize,
}

/// Runs the problem in memory, keeping snapshots every `stride` steps.
pub fn simulate(
    spec: &ProblemSpec,
    stride: usize,
) -> Result<(GalerkinSystem, Trajectory), HarnessError> {
    let system = build_system(spec)?;
    let z0 = initial_state(spec, &system)?;
    let mass0 = system.mass_of(&z0)?;
    let stepper = Stepper::new(
        &system,
        spec.scheme,
        spec.tau(),
        fixed_point_config(spec, mass0),
    )?;
    let trajectory = stepper.evolve(&z0, spec.steps, stride)?;
    drop(stepper);
    Ok((system, trajectory))
}

pub fn diagnostics_header() -> &'static str {
    "t,mass,energy,fp_iters,fp_residual"
}

pub fn diagnostics_line(record: &StepRecord) -> String {
    let d = &record.diagnostics;
    format!(
        "{:.17e},{:.17e},{:.17e},{},{:.17e}",
        record.time, d.mass, d.energy, d.iterations, d.residual
    )
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

/// Runs `spec` and writes `diagnostics.csv`, `summary.txt` and snapshots
/// (`snapshots/step_NNNNNNN.bin` every `snapshot_stride` steps plus
/// `final.bin`) under the output directory.
pub fn run(spec: &ProblemSpec) -> Result<RunSummary, HarnessError> {
    let out = &spec.output;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let snap_dir = out.join("snapshots");
    if spec.snapshot_stride > 0 {
        std::fs::create_dir_all(&snap_dir).map_err(io(&snap_dir))?;
    }

    let started = Instant::now();
    let system = build_system(spec)?;
    let z0 = initial_state(spec, &system)?;
    let mass0 = system.mass_of(&z0)?;
    let config = fixed_point_config(spec, mass0);
    let stepper = Stepper::new(&system, spec.scheme, spec.tau(), config)?;
    let mesh = *system.mesh();
    let m = mesh.interior_per_side() as u32;
    let h = mesh.spacing();

    let mut write_error: Option<HarnessError> = None;
    let mut written = 0usize;
    let stride = spec.snapshot_stride;
    let trajectory = stepper.evolve_with(&z0, spec.steps, 0, |n, t, z| {
        if stride == 0 || n % stride != 0 || write_error.is_some() {
            return;
        }
        let path = snap_dir.join(format!("step_{n:07}.bin"));
        match snapshot::save(&path, m, h, t, z) {
            Ok(()) => written += 1,
            Err(e) => write_error = Some(HarnessError::io(&path, e)),
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let trajectory = match trajectory {
        Ok(t) => t,
        Err(e) => {
            let path = out.join("summary.txt");
            let _ = std::fs::write(&path, format!("status: failed\nerror: {e}\n"));
            return Err(e.into());
        }
    };

    let final_time = trajectory.records.last().map_or(0.0, |r| r.time);
    let final_path = out.join("final.bin");
    snapshot::save(&final_path, m, h, final_time, &trajectory.final_state)
        .map_err(io(&final_path))?;

    let csv_path = out.join("diagnostics.csv");
    let mut csv = String::with_capacity(96 * trajectory.records.len());
    csv.push_str(diagnostics_header());
    csv.push('\n');
    for r in &trajectory.records {
        csv.push_str(&diagnostics_line(r));
        csv.push('\n');
    }
    std::fs::write(&csv_path, csv).map_err(io(&csv_path))?;

    let summary = RunSummary {
        output: out.clone(),
        steps: trajectory.records.len() - 1,
        snapshots: written,
        mass_drift: trajectory.max_relative_mass_drift(),
        energy_drift: trajectory.max_relative_energy_drift(),
        max_iterations: trajectory
            .records
            .iter()
            .map(|r| r.diagnostics.iterations)
            .max()
            .unwrap_or(0),
    };
    let first = &trajectory.records[0].diagnostics;
    let last = &trajectory.records.last().expect("initial record").diagnostics;
    let mut text = String::new();
    let _ = writeln!(text, "status: ok");
    let _ = writeln!(text, "scheme: {}", spec.scheme.name());
    let _ = writeln!(text, "interior_nodes_per_side: {m}");
    let _ = writeln!(text, "h: {h:.17e}");
    let _ = writeln!(text, "tau: {:.17e}", spec.tau());
    let _ = writeln!(text, "steps: {}", summary.steps);
    let _ = writeln!(text, "fixed_point_tolerance: {:.6e}", config.tolerance);
    let _ = writeln!(text, "admissibility_guard: {:.6e}", stepper.admissibility(mass0));
    let _ = writeln!(text, "initial_mass: {:.17e}", first.mass);
    let _ = writeln!(text, "final_mass: {:.17e}", last.mass);
    let _ = writeln!(text, "max_relative_mass_drift: {:.6e}", summary.mass_drift);
    let _ = writeln!(text, "initial_energy: {:.17e}", first.energy);
    let _ = writeln!(text, "final_energy: {:.17e}", last.energy);
    let _ = writeln!(text, "max_relative_energy_drift: {:.6e}", summary.energy_drift);
    let _ = writeln!(text, "max_fixed_point_iterations: {}", summary.max_iterations);
    let _ = writeln!(text, "wall_time_s: {:.3}", started.elapsed().as_secs_f64());
    let summary_path = out.join("summary.txt");
    let mut f = std::fs::File::create(&summary_path).map_err(io(&summary_path))?;
    f.write_all(text.as_bytes()).map_err(io(&summary_path))?;
    log::info!(
        "run finished: {} steps, mass drift {:.3e}, energy drift {:.3e}",
        summary.steps,
        summary.mass_drift,
        summary.energy_drift
    );
    Ok(summary)
}
