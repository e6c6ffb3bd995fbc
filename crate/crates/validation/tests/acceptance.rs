//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use breathingbox_core::basis::{
    build_basis, normalization, normalization_closed_form, BasisSet, BoxSpec, ModeIndex, PhysicalConstants, Truncation,
};
use breathingbox_core::drive::DriveProfile;
use breathingbox_core::dynamics::{
    block_populations, mean_radius_physical, mean_radius_static, period_amplitudes, period_averages, populations,
    propagate_exact, propagate_first_order, EffectiveHamiltonianModel, StateVector, TimeGrid, Trajectory,
};
use breathingbox_core::operators::{dilation_matrix, position_matrix, OperatorMatrix};
use breathingbox_core::quadrature::QuadratureSpec;
use breathingbox_core::resonance::{
    linear_grid, resonance_scan, transition_frequencies, ScanSettings, COUPLING_THRESHOLD,
};
use breathingbox_core::special::{bessel_j, bessel_zeros};
use breathingbox_validation::{cli_binary, power_fit, workspace_root};

// Criterion 1
const ZERO_RESIDUAL: f64 = 1e-12;
const NORMALIZATION_AGREEMENT: f64 = 1e-9;
// Criterion 2
const HERMITICITY: f64 = 1e-10;
const DIAGONAL: f64 = 1e-10;
// Criterion 3
const NORM_DRIFT: f64 = 1e-10;
const RICHARDSON: (f64, f64) = (3.5, 4.5);
// Criterion 4: C from the leading-order population (ε ω |D₁₂| t / 2)² / ε²
// at t = 5 periods, ≈ 285, rounded up.
const PERTURBATIVE_C: f64 = 400.0;
const EPS_HALVING: (f64, f64) = (3.0, 5.0);
// Criterion 5
const DOMINANCE: f64 = 10.0;
const POWER: (f64, f64) = (1.9, 2.1);
// Criterion 6
const DETUNING: f64 = 0.2;
const SUPPRESSION: f64 = 0.1;
// Criterion 7
const BLOCK_CONSERVATION: f64 = 1e-8;
// Criterion 9: round-off allowance on "non-decreasing"
const MONOTONE_SLACK: f64 = 1e-12;

// Fig. 1 setup, as in configs/fig1_resonant.json.
const EPSILON: f64 = 0.03;
const N_MAX: u32 = 24;
const HORIZON: f64 = 30.0;
const STEPS: usize = 256;

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn setup(m_max: i32, n_max: u32) -> (Arc<BasisSet>, Arc<OperatorMatrix>) {
    let q = QuadratureSpec::default();
    let basis = Arc::new(
        build_basis(
            BoxSpec::disc(1.0).unwrap(),
            PhysicalConstants::natural(),
            Truncation::nonnegative(m_max, n_max),
            &q,
        )
        .unwrap(),
    );
    let v = Arc::new(dilation_matrix(&basis, &q).unwrap());
    (basis, v)
}

fn resonant_omega(basis: &BasisSet) -> f64 {
    let e = |n| basis.modes[basis.position(ModeIndex::new(0, n)).unwrap()].energy;
    (e(2) - e(1)) / basis.constants.hbar
}

fn driven(basis: &Arc<BasisSet>, v: &Arc<OperatorMatrix>, eps: f64, omega: f64) -> EffectiveHamiltonianModel {
    EffectiveHamiltonianModel::new(Arc::clone(basis), Arc::clone(v), DriveProfile::sinusoid(eps, omega).unwrap())
        .unwrap()
}

fn ground(model: &EffectiveHamiltonianModel) -> StateVector {
    StateVector::basis_state(&model.basis, ModeIndex::new(0, 1)).unwrap()
}

fn run_exact(model: &EffectiveHamiltonianModel, periods: f64, steps: usize) -> Trajectory {
    let grid = TimeGrid::in_units(&model.drive, periods, steps).unwrap();
    propagate_exact(&ground(model), model, &grid).unwrap()
}

fn column(traj: &Trajectory, basis: &BasisSet, n: u32) -> Vec<f64> {
    let i = basis.position(ModeIndex::new(0, n)).unwrap();
    populations(traj).unwrap().iter().map(|p| p[i]).collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn bessel_layer() -> Outcome {
    let mut worst_residual = 0.0_f64;
    let mut interlaced = true;
    let mut worst_norm = 0.0_f64;
    let q = QuadratureSpec::default();
    let zeros: Vec<Vec<f64>> = (0..=6).map(|m| bessel_zeros(m, 11).unwrap()).collect();
    for m in 0..=5u32 {
        for n in 0..10usize {
            let a = zeros[m as usize][n];
            worst_residual = worst_residual.max(bessel_j(m, a).abs());
            // a_{m,n} < a_{m+1,n} < a_{m,n+1}
            interlaced &= a < zeros[m as usize + 1][n] && zeros[m as usize + 1][n] < zeros[m as usize][n + 1];
            let box_spec = BoxSpec::disc(1.0).unwrap();
            let quad = normalization(&box_spec, m as i32, n as u32 + 1, &q).unwrap();
            let closed = normalization_closed_form(1.0, m as i32, a);
            worst_norm = worst_norm.max((quad - closed).abs() / closed.abs());
        }
    }
    Outcome {
        pass: worst_residual <= ZERO_RESIDUAL && interlaced && worst_norm <= NORMALIZATION_AGREEMENT,
        detail: format!(
            "max |J_m(a_mn)| = {worst_residual:.2e}, interlacing {interlaced}, normalization rel. diff {worst_norm:.2e}"
        ),
    }
}

fn operator_structure() -> Outcome {
    let (basis, v) = setup(2, 12);
    let herm = v.hermiticity_defect();
    let diag = v.max_abs_diagonal();
    let dense = v.to_dense();
    let mut cross_zero = true;
    for (i, a) in basis.modes.iter().enumerate() {
        for (j, b) in basis.modes.iter().enumerate() {
            if a.index.m != b.index.m && dense[(i, j)] != Complex64::new(0.0, 0.0) {
                cross_zero = false;
            }
        }
    }
    Outcome {
        pass: herm <= HERMITICITY && diag <= DIAGONAL && cross_zero,
        detail: format!("max|V-V†| = {herm:.2e}, max|diag V| = {diag:.2e}, m≠m′ blocks exactly zero: {cross_zero}"),
    }
}

fn unitarity() -> Outcome {
    let (basis, v) = setup(0, N_MAX);
    let model = driven(&basis, &v, EPSILON, resonant_omega(&basis));
    let periods = 50.0;
    let drift = run_exact(&model, periods, STEPS).max_norm_drift();
    let finals: Vec<Vec<f64>> = [64, 128, 256]
        .iter()
        .map(|&s| {
            let grid = TimeGrid::in_units(&model.drive, periods, s).unwrap().sampled_every(usize::MAX);
            let traj = propagate_exact(&ground(&model), &model, &grid).unwrap();
            traj.final_state().unwrap().populations()
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let ratio = diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2]);
    Outcome {
        pass: drift <= NORM_DRIFT && (RICHARDSON.0..=RICHARDSON.1).contains(&ratio),
        detail: format!("max |‖c‖-1| = {drift:.2e} over 50 periods, Richardson ratio (64/128/256 steps) = {ratio:.4}"),
    }
}

fn perturbative_consistency() -> Outcome {
    let (basis, v) = setup(0, N_MAX);
    let omega = resonant_omega(&basis);
    let gap = |eps: f64| {
        let model = driven(&basis, &v, eps, omega);
        let grid = TimeGrid::in_units(&model.drive, 5.0, 512).unwrap();
        let a = populations(&propagate_exact(&ground(&model), &model, &grid).unwrap()).unwrap();
        let b = populations(&propagate_first_order(&ground(&model), &model, &grid).unwrap()).unwrap();
        a.iter()
            .zip(&b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    };
    let eps = 3e-3;
    let full = gap(eps);
    let half = gap(eps / 2.0);
    let ratio = full / half;
    let bound = PERTURBATIVE_C * eps * eps;
    Outcome {
        pass: full <= bound && (EPS_HALVING.0..=EPS_HALVING.1).contains(&ratio),
        detail: format!("max discrepancy {full:.3e} (bound C·ε² = {bound:.3e}, C = {PERTURBATIVE_C}), halving ratio {ratio:.3}"),
    }
}

fn fig1_reproduction() -> Outcome {
    let (basis, v) = setup(0, N_MAX);
    let model = driven(&basis, &v, EPSILON, resonant_omega(&basis));
    let traj = run_exact(&model, HORIZON, STEPS);
    let avg = |n| period_averages(&column(&traj, &basis, n), STEPS);
    let (p2, p3, p4) = (avg(2), avg(3), avg(4));
    let k = p2.len() - 1;
    let window_ratio = max_of(&p2) / max_of(&p3).max(max_of(&p4));
    let final_ratio = p2[k] / p3[k].max(p4[k]);
    // Whole periods cancel the counter-rotating term.
    let p2_raw = column(&traj, &basis, 2);
    let times: Vec<f64> = (1..=4).map(|k| k as f64).collect();
    let values: Vec<f64> = (1..=4).map(|k| p2_raw[k * STEPS]).collect();
    let p = power_fit(&times, &values);
    Outcome {
        pass: window_ratio >= DOMINANCE && final_ratio >= DOMINANCE && (POWER.0..=POWER.1).contains(&p),
        detail: format!(
            "P02/max(P03,P04): peak period averages {window_ratio:.1}, final period {final_ratio:.1} \
             (P02 peak {:.4}, final {:.4}); early-time exponent p = {p:.3}",
            max_of(&p2),
            p2[k]
        ),
    }
}

fn off_resonance() -> Outcome {
    let (basis, v) = setup(0, N_MAX);
    let w0 = resonant_omega(&basis);
    let metrics = |omega: f64| {
        let model = driven(&basis, &v, EPSILON, omega);
        let avg = period_averages(&column(&run_exact(&model, HORIZON, STEPS), &basis, 2), STEPS);
        (max_of(&avg), *avg.last().unwrap())
    };
    let (on_max, on_final) = metrics(w0);
    let (hi_max, hi_final) = metrics(w0 * (1.0 + DETUNING));
    let (lo_max, lo_final) = metrics(w0 * (1.0 - DETUNING));
    let worst = hi_max.max(lo_max) / on_max;
    Outcome {
        pass: worst < SUPPRESSION,
        detail: format!(
            "peak period-averaged P02 over 30 periods: resonant {on_max:.4}, +20% {hi_max:.4}, -20% {lo_max:.4} \
             (worst ratio {worst:.4}); last-period values {on_final:.4}, {hi_final:.4}, {lo_final:.4}"
        ),
    }
}

fn angular_momentum() -> Outcome {
    let (basis, v) = setup(1, N_MAX);
    let model = driven(&basis, &v, EPSILON, resonant_omega(&basis));
    let psi0 = StateVector::superposition(
        &basis,
        &[
            (ModeIndex::new(0, 1), Complex64::new(1.0, 0.0)),
            (ModeIndex::new(1, 1), Complex64::new(0.0, 1.0)),
        ],
    )
    .unwrap();
    let grid = TimeGrid::in_units(&model.drive, HORIZON, STEPS).unwrap();
    let traj = propagate_exact(&psi0, &model, &grid).unwrap();
    let sums = block_populations(&traj, &basis).unwrap();
    let worst = sums
        .iter()
        .flat_map(|row| row.iter().zip(&sums[0]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let leak = populations(&traj).unwrap().last().unwrap()[basis.position(ModeIndex::new(0, 2)).unwrap()];
    Outcome {
        pass: worst <= BLOCK_CONSERVATION,
        detail: format!("max per-m population change {worst:.2e} (P02 at end {leak:.3}, so the drive is active)"),
    }
}

fn resonance_scan_peak() -> Outcome {
    let (basis, v) = setup(0, 12);
    let table = transition_frequencies(&basis, &v, COUPLING_THRESHOLD).unwrap();
    let target = table.frequency(ModeIndex::new(0, 1), ModeIndex::new(0, 2)).unwrap();
    let model = driven(&basis, &v, EPSILON, 12.0);
    let grid = linear_grid(11.0, 14.0, 31).unwrap();
    let spacing = grid[1] - grid[0];
    let settings = ScanSettings { horizon_periods: HORIZON, steps_per_period: 2048, threads: Some(4) };
    let result = resonance_scan(&model, ModeIndex::new(0, 1), &grid, &settings).unwrap();
    let Some(peak) = result.peaks.first() else {
        return Outcome { pass: false, detail: "no peak detected".into() };
    };
    let off = (peak.omega - target).abs();
    Outcome {
        pass: off <= spacing && result.failures.is_empty(),
        detail: format!(
            "peak at {:.5} (height {:.4}), table value {target:.5}, |Δ| = {off:.4} vs spacing {spacing:.3}",
            peak.omega, peak.height
        ),
    }
}

fn fig2_reproduction() -> Outcome {
    let (basis, v) = setup(0, N_MAX);
    let model = driven(&basis, &v, EPSILON, resonant_omega(&basis));
    let r = position_matrix(&basis, &QuadratureSpec::default()).unwrap();
    let exact = run_exact(&model, 10.0, STEPS);
    let grid = TimeGrid::in_units(&model.drive, 10.0, STEPS).unwrap();
    let first = propagate_first_order(&ground(&model), &model, &grid).unwrap();
    let amps = |series: Vec<f64>| period_amplitudes(&series, STEPS);
    let physical = amps(mean_radius_physical(&exact, &r).unwrap());
    let statics = amps(mean_radius_static(&exact, &r).unwrap());
    let perturbative = amps(mean_radius_physical(&first, &r).unwrap());
    let monotone = |a: &[f64]| a.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK);
    let list = |a: &[f64]| a.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: monotone(&physical),
        detail: format!(
            "per-period amplitude of <r>: physical [{}]; static-domain non-decreasing {}; \
             first-order propagator non-decreasing {}",
            list(&physical),
            monotone(&statics),
            monotone(&perturbative)
        ),
    }
}

fn configs_dir() -> PathBuf {
    workspace_root().join("configs")
}

fn determinism() -> Outcome {
    let bin = match cli_binary() {
        Ok(b) => b,
        Err(e) => return Outcome { pass: false, detail: format!("no binary: {e}") },
    };
    let tmp = tempfile::tempdir().unwrap();
    let mut configs: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for cfg in &configs {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let dirs = [tmp.path().join(format!("{stem}-a")), tmp.path().join(format!("{stem}-b"))];
        for d in &dirs {
            let status = Command::new(&bin)
                .args(["run", "--threads", "4", "--config"])
                .arg(cfg)
                .arg("--out")
                .arg(d)
                .output()
                .unwrap();
            if !status.status.success() {
                mismatches.push(format!("{stem}: run failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
        }
        let mut names: Vec<_> = fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            compared += 1;
            let a = fs::read(dirs[0].join(&name)).unwrap();
            let b = fs::read(dirs[1].join(&name)).unwrap_or_default();
            if a != b {
                mismatches.push(format!("{stem}/{}", name.to_string_lossy()));
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty() && configs.len() >= 5,
        detail: if mismatches.is_empty() {
            format!("{} configs, {compared} files byte-identical across two runs", configs.len())
        } else {
            format!("differences: {}", mismatches.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "Bessel layer", Duration::from_secs(1), bessel_layer),
        (2, "operator structure", Duration::from_secs(5), operator_structure),
        (3, "unitarity", Duration::from_secs(30), unitarity),
        (4, "perturbative consistency", Duration::from_secs(60), perturbative_consistency),
        (5, "resonant transition dominance", Duration::from_secs(60), fig1_reproduction),
        (6, "off-resonance suppression", Duration::from_secs(60), off_resonance),
        (7, "angular momentum", Duration::from_secs(60), angular_momentum),
        (8, "resonance scan", Duration::from_secs(300), resonance_scan_peak),
        (9, "mean radius oscillation", Duration::from_secs(60), fig2_reproduction),
        (10, "determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
