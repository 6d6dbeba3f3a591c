//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use common::{a_norm, linear_cn_step, rng};
use hartree_fem::fields::{interpolate, Eigenmode, GaussianPacket};
use hartree_fem::harness::config::{InitialCondition, PotentialSpec, Projection, SolverSpec};
use hartree_fem::harness::{converge, ProblemSpec, RefineMode};
use hartree_fem::nonlocal::{convolve, ConvolutionPath, CouplingField, KernelSpec, NonlocalTerm};
use hartree_fem::observables::{l2_error_to_field, ritz_project};
use hartree_fem::steppers::{FixedPointConfig, FixedPointMap, SchemeKind, Stepper, Trajectory};
use hartree_fem::{assemble_mass, assemble_stiffness, GalerkinSystem, Mesh};
use num_complex::Complex64;
use rand::Rng;
use std::path::PathBuf;
use std::time::{Duration, Instant};

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

/// Criteria whose stated band excludes the value the method converges to.
const EXPECTED_FAILURES: &[usize] = &[6];

fn report(outcomes: &[Outcome]) {
    for o in outcomes {
        println!(
            "{} criterion {:>2}: {} [{:.2}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    }
}

fn timed(id: usize, title: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    Outcome {
        id,
        title,
        pass,
        detail,
        elapsed: start.elapsed(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn matrix_ground_truth() -> (bool, String) {
    let start = Instant::now();
    let mesh = Mesh::with_interior(1.0, 6).unwrap();
    let h = mesh.spacing();
    let a = assemble_mass(&mesh);
    let b = assemble_stiffness(&mesh);
    let mut worst: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for i in 0..mesh.dofs() {
        let (m1, m2) = mesh.node_coords(i).unwrap();
        worst = worst.max(rel(a.entry(i, i), 4.0 * h * h / 9.0));
        worst = worst.max(rel(b.entry(i, i), 8.0 / 3.0));
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (x, y) = (m1 as isize + dx, m2 as isize + dy);
                if x < 0 || y < 0 || x >= 6 || y >= 6 {
                    continue;
                }
                let j = mesh.node_index(x as usize, y as usize).unwrap();
                let mass = if dx == 0 || dy == 0 {
                    h * h / 9.0
                } else {
                    h * h / 36.0
                };
                worst = worst.max(rel(a.entry(i, j), mass));
                worst = worst.max(rel(b.entry(i, j), -1.0 / 3.0));
            }
        }
        if (1..5).contains(&m1) && (1..5).contains(&m2) {
            worst_sum = worst_sum.max(b.row_sum(i).abs() / (8.0 / 3.0));
        }
    }
    let fast = start.elapsed() < Duration::from_secs(1);
    (
        worst <= 1e-14 && worst_sum <= 1e-14 && fast,
        format!("max relative entry error {worst:.2e}, max |interior row sum|/diag {worst_sum:.2e}"),
    )
}

const TOL: f64 = 1e-13;

/// Shared nonlinear setup for criteria 2 to 4.
fn nonlinear_system(m: usize) -> GalerkinSystem {
    let mesh = Mesh::with_interior(1.0, m).unwrap();
    let term = NonlocalTerm::new(
        &mesh,
        &KernelSpec::Gaussian {
            sigma: 0.1,
            amplitude: 1.0,
        },
        &CouplingField::Constant(COUPLING),
    )
    .unwrap();
    GalerkinSystem::new(&mesh, |_, _| 0.0, Some(term)).unwrap()
}

const COUPLING: f64 = 100.0;
const HORIZON: f64 = 0.02;

fn packet() -> GaussianPacket {
    GaussianPacket {
        center: [0.5, 0.5],
        width: 0.1,
        momentum: [10.0, 0.0],
        amplitude: 5.64,
    }
}

fn conservation_runs() -> (Trajectory, Trajectory, Duration, Duration) {
    let system = nonlinear_system(31);
    let z0 = interpolate(system.mesh(), &packet());
    let run = |scheme| {
        let start = Instant::now();
        let cfg = FixedPointConfig {
            tolerance: TOL,
            ..Default::default()
        };
        let t = Stepper::new(&system, scheme, HORIZON / 200.0, cfg)
            .unwrap()
            .evolve(&z0, 200, 0)
            .unwrap();
        (t, start.elapsed())
    };
    let (c, tc) = run(SchemeKind::Coherent);
    let (i, ti) = run(SchemeKind::Incoherent);
    (c, i, tc, ti)
}

fn eigenmode_spec(nodes: usize, steps: usize, scheme: SchemeKind) -> ProblemSpec {
    ProblemSpec {
        side: 1.0,
        nodes,
        horizon: 0.25,
        steps,
        scheme,
        potential: PotentialSpec::None,
        kernel: KernelSpec::None,
        coupling: CouplingField::Constant(0.0),
        initial: InitialCondition::Eigenmode {
            p: 1,
            q: 1,
            amplitude: 1.0,
        },
        projection: Projection::Interpolate,
        solver: SolverSpec::default(),
        snapshot_stride: 0,
        output: PathBuf::from("unused"),
    }
}

fn linear_order() -> (bool, String) {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for scheme in [SchemeKind::Coherent, SchemeKind::Incoherent] {
        let report = converge(&eigenmode_spec(17, 10, scheme), 4, RefineMode::Both).unwrap();
        let orders: Vec<String> = report
            .rows
            .iter()
            .skip(1)
            .map(|r| format!("{:.3}", r.order.unwrap_or(f64::NAN)))
            .collect();
        let last = report.rows.last().unwrap().order.unwrap_or(f64::NAN);
        pass &= (1.8..=2.2).contains(&last);
        detail.push(format!(
            "{}: errors {:?}, orders [{}]",
            scheme.name(),
            report
                .rows
                .iter()
                .map(|r| format!("{:.3e}", r.error))
                .collect::<Vec<_>>(),
            orders.join(", ")
        ));
    }
    pass &= start.elapsed() < Duration::from_secs(120);
    (pass, detail.join("; "))
}

const BASE_STEPS: usize = 50;

fn nonlinear_tau_order() -> (bool, String) {
    let mut pass = true;
    let mut detail = Vec::new();
    for scheme in [SchemeKind::Coherent, SchemeKind::Incoherent] {
        let spec = ProblemSpec {
            horizon: HORIZON,
            steps: BASE_STEPS,
            nodes: 33,
            kernel: KernelSpec::Gaussian {
                sigma: 0.1,
                amplitude: 1.0,
            },
            coupling: CouplingField::Constant(COUPLING),
            initial: InitialCondition::GaussianPacket {
                center: packet().center,
                width: packet().width,
                momentum: packet().momentum,
                amplitude: packet().amplitude,
            },
            solver: SolverSpec {
                tolerance: Some(TOL),
                ..SolverSpec::default()
            },
            ..eigenmode_spec(33, BASE_STEPS, scheme)
        };
        let report = converge(&spec, 3, RefineMode::TauOnly).unwrap();
        let ratios = report.ratios();
        pass &= ratios.iter().all(|r| (3.4..=4.6).contains(r));
        // e_k ∝ τ_k² - τ_ref² with τ_ref = τ_0/8; rescaling by 64/(64 - 4^k)
        // estimates the error against τ → 0
        let corrected: Vec<f64> = report
            .rows
            .iter()
            .enumerate()
            .map(|(k, r)| r.error * 64.0 / (64.0 - 4f64.powi(k as i32)))
            .collect();
        detail.push(format!(
            "{}: ratios [{}] (pure second order predicts [4.200, 5.000]; reference-corrected [{}])",
            scheme.name(),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", "),
            corrected
                .windows(2)
                .map(|w| format!("{:.3}", w[0] / w[1]))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    (pass, detail.join("; "))
}

fn fft_vs_direct() -> (bool, String) {
    let mut r = rng(2024);
    let kernel = KernelSpec::Gaussian {
        sigma: 0.2,
        amplitude: 1.0,
    };
    let mut worst: f64 = 0.0;
    for m in 3..=16 {
        let mesh = Mesh::with_interior(1.0, m).unwrap();
        for _ in 0..100 {
            let rho: Vec<f64> = (0..m * m).map(|_| r.gen_range(0.0..1.0)).collect();
            let fast = convolve(&mesh, &kernel, &rho, ConvolutionPath::Fft).unwrap();
            let slow = convolve(&mesh, &kernel, &rho, ConvolutionPath::Direct).unwrap();
            let scale = slow.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let dev = fast
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(dev / scale);
        }
    }
    (worst <= 1e-12, format!("max relative deviation {worst:.2e} over m = 3..=16"))
}

fn evenness_identity() -> (bool, String) {
    let mesh = Mesh::with_interior(1.0, 8).unwrap();
    let term = NonlocalTerm::new(
        &mesh,
        &KernelSpec::SmoothedIndicator {
            radius: 0.3,
            width: 0.05,
            amplitude: 2.0,
        },
        &CouplingField::Constant(3.0),
    )
    .unwrap();
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = common::random_state(&mut r, 64, 1.0);
        let b = common::random_state(&mut r, 64, 2.0);
        let lhs = term.exchange_form(&a, &b).unwrap();
        let rhs = term.exchange_form(&b, &a).unwrap();
        worst = worst.max((lhs - rhs).norm() / lhs.norm());
    }
    (worst <= 1e-12, format!("max relative defect {worst:.2e} over 100 pairs"))
}

fn ritz_order() -> (bool, String) {
    let mode = Eigenmode::new(1, 1, 1.0);
    let errors: Vec<f64> = [7, 15, 31, 63]
        .iter()
        .map(|&m| {
            let mesh = Mesh::with_interior(1.0, m).unwrap();
            let f = assemble_stiffness(&mesh).to_banded().factor().unwrap();
            let z = ritz_project(&mesh, &mode, &f).unwrap();
            l2_error_to_field(&mesh, &z, &mode).unwrap()
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    (
        orders.iter().all(|o| (1.8..=2.2).contains(o)),
        format!(
            "errors {:?}, orders {:?}",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn linear_cn_equivalence() -> (bool, String) {
    let mesh = Mesh::with_interior(1.0, 15).unwrap();
    let system = GalerkinSystem::new(&mesh, |x, y| 20.0 * ((x - 0.5).powi(2) + (y - 0.5).powi(2)), None)
        .unwrap();
    let z0 = interpolate(&mesh, &packet());
    let h = mesh.spacing();
    let mut worst: f64 = 0.0;
    for map in [FixedPointMap::LinearImplicit, FixedPointMap::Banach] {
        // the explicit map needs τ well inside its contraction range
        let tau = match map {
            FixedPointMap::LinearImplicit => 2e-3,
            FixedPointMap::Banach => 0.04 * h * h,
        };
        for scheme in [SchemeKind::Coherent, SchemeKind::Incoherent] {
            let cfg = FixedPointConfig {
                tolerance: TOL,
                map,
                ..Default::default()
            };
            let stepper = Stepper::new(&system, scheme, tau, cfg).unwrap();
            let mut z = z0.clone();
            for _ in 0..50 {
                let (next, _) = stepper.step(&z).unwrap();
                let want = linear_cn_step(&system, tau, &z);
                let d: Vec<Complex64> = next.iter().zip(&want).map(|(a, b)| a - b).collect();
                worst = worst.max(a_norm(&system, &d));
                z = next;
            }
        }
    }
    (
        worst <= 10.0 * TOL,
        format!("max per-step A-norm deviation {worst:.2e} (bound {:.1e})", 10.0 * TOL),
    )
}

fn main() {
    let mut outcomes = vec![timed(1, "matrix ground truth", matrix_ground_truth)];

    let start = Instant::now();
    let (coherent, incoherent, tc, ti) = conservation_runs();
    let shared = start.elapsed();
    let cm = coherent.max_relative_mass_drift();
    let im = incoherent.max_relative_mass_drift();
    let ce = coherent.max_relative_energy_drift();
    let ie = incoherent.max_relative_energy_drift();
    outcomes.push(Outcome {
        id: 2,
        title: "coherent mass conservation",
        pass: cm <= 1e-10 && tc < Duration::from_secs(30),
        detail: format!(
            "max relative mass drift {cm:.2e}, max iterations {}",
            coherent.records.iter().map(|r| r.diagnostics.iterations).max().unwrap()
        ),
        elapsed: tc,
    });
    outcomes.push(Outcome {
        id: 3,
        title: "incoherent mass and energy conservation",
        pass: im <= 1e-9 && ie <= 1e-9,
        detail: format!("mass drift {im:.2e}, energy drift {ie:.2e}"),
        elapsed: ti,
    });
    outcomes.push(Outcome {
        id: 4,
        title: "coherent energy is not conserved",
        pass: ce >= 100.0 * ie,
        detail: format!("coherent energy drift {ce:.2e} vs incoherent {ie:.2e}, factor {:.1e}", ce / ie),
        elapsed: shared,
    });

    outcomes.push(timed(5, "order 2 in (h, tau), linear eigenmode", linear_order));
    outcomes.push(timed(6, "order 2 in tau, nonlinear self-convergence", nonlinear_tau_order));
    outcomes.push(timed(7, "FFT convolution equals direct sum", fft_vs_direct));
    outcomes.push(timed(8, "evenness exchange identity", evenness_identity));
    outcomes.push(timed(9, "Ritz projection order", ritz_order));
    outcomes.push(timed(10, "linear Crank-Nicolson equivalence", linear_cn_equivalence));

    report(&outcomes);
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed} of {} criteria passed", outcomes.len());
    let unexpected: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.pass && !EXPECTED_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    for o in outcomes.iter().filter(|o| !o.pass && EXPECTED_FAILURES.contains(&o.id)) {
        println!(
            "note: criterion {} fails as stated: against a τ/8 reference the second error \
             ratio tends to 15/3 = 5, outside its [3.4, 4.6] band",
            o.id
        );
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
