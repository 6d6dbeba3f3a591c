//! Refinement studies and observed orders.

use super::config::InitialCondition;
use super::{refined_nodes, simulate, HarnessError, ProblemSpec};
use crate::fields::Eigenmode;
use crate::observables::{l2_distance, l2_error_to_field, restrict};
use crate::steppers::Trajectory;
use crate::system::GalerkinSystem;
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    Both,
    TauOnly,
    HOnly,
}

impl RefineMode {
    pub fn name(self) -> &'static str {
        match self {
            RefineMode::Both => "refine-both",
            RefineMode::TauOnly => "refine-tau-only",
            RefineMode::HOnly => "refine-h-only",
        }
    }

    fn refines_h(self) -> bool {
        matches!(self, RefineMode::Both | RefineMode::HOnly)
    }

    fn refines_tau(self) -> bool {
        matches!(self, RefineMode::Both | RefineMode::TauOnly)
    }
}

impl std::str::FromStr for RefineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "refine-both" => Ok(RefineMode::Both),
            "refine-tau-only" => Ok(RefineMode::TauOnly),
            "refine-h-only" => Ok(RefineMode::HOnly),
            other => Err(format!(
                "unknown mode `{other}` (refine-both, refine-tau-only, refine-h-only)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form eigenmode evolution.
    Exact,
    /// One further refinement of the same kind.
    FinerRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    pub nodes: usize,
    pub steps: usize,
    /// Max over the coarsest time grid of the L² error.
    pub error: f64,
    /// `log₂(e_{k-1} / e_k)`; `None` on the first row or when undefined.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub mode: RefineMode,
    pub reference: ReferenceKind,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Ratios `e_{k-1}/e_k` between consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].error / w[1].error)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,tau,nodes,steps,error,order\n");
        for r in &self.rows {
            let order = r
                .order
                .map_or_else(|| "n/a".to_string(), |o| format!("{o:.6}"));
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{},{},{:.17e},{}",
                r.level, r.h, r.tau, r.nodes, r.steps, r.error, order
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        std::fs::write(path, self.to_csv()).map_err(|e| HarnessError::io(path, e))
    }
}

/// `log₂(a / b)` when both are positive and finite.
pub fn observed_order(a: f64, b: f64) -> Option<f64> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Some((a / b).log2())
    } else {
        None
    }
}

fn level_spec(base: &ProblemSpec, mode: RefineMode, level: usize) -> ProblemSpec {
    let factor = 1usize << level;
    let mut spec = base.clone();
    if mode.refines_h() {
        spec.nodes = refined_nodes(base.nodes, factor);
    }
    if mode.refines_tau() {
        spec.steps = base.steps * factor;
    }
    spec
}

struct LevelRun {
    spec: ProblemSpec,
    system: GalerkinSystem,
    /// States at the coarse time points `t_n^{(0)}`.
    states: Vec<(f64, Vec<Complex64>)>,
}

fn run_level(base: &ProblemSpec, mode: RefineMode, level: usize) -> Result<LevelRun, HarnessError> {
    let spec = level_spec(base, mode, level);
    let stride = spec.steps.checked_div(base.steps).unwrap_or(0);
    let (system, trajectory): (GalerkinSystem, Trajectory) = simulate(&spec, stride)?;
    let states = trajectory
        .snapshots
        .into_iter()
        .map(|s| (s.time, s.state))
        .collect();
    Ok(LevelRun {
        spec,
        system,
        states,
    })
}

/// Runs `levels` refinements of `base` and measures errors against the
/// closed-form solution when one exists, otherwise against one further
/// refinement. Levels run concurrently.
pub fn converge(
    base: &ProblemSpec,
    levels: usize,
    mode: RefineMode,
) -> Result<ConvergenceReport, HarnessError> {
    if levels == 0 {
        return Err(HarnessError::Setup("at least one level is required".into()));
    }
    let reference = if base.has_exact_solution() {
        ReferenceKind::Exact
    } else {
        ReferenceKind::FinerRun
    };
    let total = match reference {
        ReferenceKind::Exact => levels,
        ReferenceKind::FinerRun => levels + 1,
    };
    let mut runs: Vec<LevelRun> = (0..total)
        .into_par_iter()
        .map(|k| run_level(base, mode, k))
        .collect::<Result<_, _>>()?;
    let finest = match reference {
        ReferenceKind::FinerRun => runs.pop(),
        ReferenceKind::Exact => None,
    };

    let mut rows = Vec::with_capacity(levels);
    for (k, run) in runs.iter().enumerate() {
        let mesh = run.system.mesh();
        let mut error: f64 = 0.0;
        for (idx, (t, z)) in run.states.iter().enumerate() {
            let e = match &finest {
                None => {
                    let exact = exact_solution(base, *t);
                    l2_error_to_field(mesh, z, &exact)?
                }
                Some(fine) => {
                    let zf = restrict(fine.system.mesh(), &fine.states[idx].1, mesh)?;
                    l2_distance(z, &zf, run.system.mass_matrix())?
                }
            };
            error = error.max(e);
        }
        let order = match rows.last() {
            Some(prev) => {
                let prev: &ConvergenceRow = prev;
                if prev.h == mesh.spacing() && prev.tau == run.spec.tau() {
                    None
                } else {
                    observed_order(prev.error, error)
                }
            }
            None => None,
        };
        rows.push(ConvergenceRow {
            level: k,
            h: mesh.spacing(),
            tau: run.spec.tau(),
            nodes: run.spec.nodes,
            steps: run.spec.steps,
            error,
            order,
        });
    }
    Ok(ConvergenceReport {
        mode,
        reference,
        rows,
    })
}

fn exact_solution(spec: &ProblemSpec, t: f64) -> Eigenmode {
    match spec.initial {
        InitialCondition::Eigenmode { p, q, amplitude } => Eigenmode {
            amplitude,
            ..Eigenmode::new(p, q, spec.side)
        }
        .at_time(t),
        InitialCondition::GaussianPacket { .. } => {
            unreachable!("closed-form reference requires an eigenmode initial condition")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_config;

    fn spec(extra: &str) -> ProblemSpec {
        let text = format!(
            "[domain]\nside = 1\nnodes = 8\n[time]\nhorizon = 0.05\nsteps = 4\n[initial]\nfamily = eigenmode\n{extra}"
        );
        parse_config(&text, Path::new("/tmp")).unwrap()
    }

    #[test]
    fn orders_and_csv() {
        assert_eq!(observed_order(4.0, 1.0), Some(2.0));
        assert_eq!(observed_order(0.0, 1.0), None);
        assert_eq!(observed_order(1.0, f64::NAN), None);
        let report = converge(&spec(""), 2, RefineMode::Both).unwrap();
        assert_eq!(report.reference, ReferenceKind::Exact);
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[1].nodes, 15);
        assert_eq!(report.rows[1].steps, 8);
        assert!(report.rows[0].order.is_none());
        assert!(report.rows[1].order.is_some());
        assert!(report.rows[0].h > report.rows[1].h);
        let csv = report.to_csv();
        assert!(csv.starts_with("level,h,tau,nodes,steps,error,order\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with("n/a"));
    }

    #[test]
    fn single_level_has_no_order() {
        let report = converge(&spec(""), 1, RefineMode::TauOnly).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].order.is_none());
        assert!(converge(&spec(""), 0, RefineMode::Both).is_err());
    }

    #[test]
    fn nonlinear_uses_finer_reference() {
        let s = spec("[kernel]\nfamily = gaussian\nsigma = 0.2\n[coupling]\nvalue = 5\n");
        let report = converge(&s, 2, RefineMode::TauOnly).unwrap();
        assert_eq!(report.reference, ReferenceKind::FinerRun);
        assert!(report.rows.iter().all(|r| r.error > 0.0));
        assert!(report.rows[0].error > report.rows[1].error);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [RefineMode::Both, RefineMode::TauOnly, RefineMode::HOnly] {
            assert_eq!(m.name().parse::<RefineMode>(), Ok(m));
        }
        assert!("refine".parse::<RefineMode>().is_err());
    }
}
