//! Time evolution in the static domain under
//! `H(t) = λ⁻² H₀ + (λ̇/λ) V`.
//!
//! Two propagators are provided. [`propagate_exact`] integrates the
//! truncated-basis Schrödinger equation with the exponential midpoint rule
//! (second-order Magnus), diagonalizing each Hermitian `m`-block per step.
//! [`propagate_first_order`] evaluates the first-order perturbative
//! amplitudes in the wall amplitude `ε` in closed form.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::basis::{BasisSet, ModeIndex};
use crate::drive::{DriveProfile, Waveform};
use crate::error::{Error, Result};
use crate::operators::{dilation_radial, OperatorBlock, OperatorKind, OperatorMatrix};

/// Smallest number of steps per relevant period accepted by the exact
/// propagator.
pub const MIN_STEPS_PER_PERIOD: usize = 64;

/// Above this wall amplitude the first-order formula is flagged.
pub const FIRST_ORDER_EPSILON_WARN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coeffs: Vec<Complex64>,
}

impl StateVector {
    pub fn basis_state(basis: &BasisSet, index: ModeIndex) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
        coeffs[basis.require(index)?] = Complex64::new(1.0, 0.0);
        Ok(StateVector { coeffs })
    }

    /// Superposition of basis modes; rescaled to unit norm with a warning
    /// if the weights are not normalized.
    pub fn superposition(basis: &BasisSet, weights: &[(ModeIndex, Complex64)]) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
        for &(index, w) in weights {
            coeffs[basis.require(index)?] += w;
        }
        let mut state = StateVector { coeffs };
        let norm = state.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("dynamics", "initial state has zero norm"));
        }
        if (norm - 1.0).abs() > 1e-12 {
            log::warn!("initial weights have norm {norm}; normalizing");
            for c in state.coeffs.iter_mut() {
                *c /= norm;
            }
        }
        Ok(state)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// How the time-dependent coefficients of `H₀` and `V` are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coefficients {
    /// `λ⁻²` and `λ̇/λ`.
    #[default]
    Exact,
    /// `1 - 2εf` and `εḟ`.
    FirstOrder,
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonianModel {
    pub basis: Arc<BasisSet>,
    pub energies: Vec<f64>,
    pub dilation: Arc<OperatorMatrix>,
    pub drive: DriveProfile,
}

impl EffectiveHamiltonianModel {
    pub fn new(basis: Arc<BasisSet>, dilation: Arc<OperatorMatrix>, drive: DriveProfile) -> Result<Self> {
        if dilation.kind != OperatorKind::Dilation || dilation.dim != basis.len() {
            return Err(Error::invalid(
                "dynamics",
                "dilation matrix does not belong to this basis",
            ));
        }
        Ok(EffectiveHamiltonianModel {
            energies: basis.energies(),
            basis,
            dilation,
            drive,
        })
    }

    /// Same basis and operators, different wall motion.
    pub fn with_drive(&self, drive: DriveProfile) -> Self {
        EffectiveHamiltonianModel {
            drive,
            ..self.clone()
        }
    }

    pub fn hbar(&self) -> f64 {
        self.basis.constants.hbar
    }

    /// Scalars multiplying `H₀` and `V` at time `t`.
    pub fn coefficients(&self, t: f64, variant: Coefficients) -> Result<(f64, f64)> {
        match variant {
            Coefficients::Exact => {
                let (lambda, lambda_dot) = self.drive.lambda(t)?;
                Ok((1.0 / (lambda * lambda), lambda_dot / lambda))
            }
            Coefficients::FirstOrder => {
                let (f, fdot) = self.drive.shape(t)?;
                let eps = self.drive.epsilon;
                Ok((1.0 - 2.0 * eps * f, eps * fdot))
            }
        }
    }

    fn block_hamiltonian(&self, block: &OperatorBlock, kinetic: f64, dilation: f64) -> DMatrix<Complex64> {
        let mut h = block.entries.map(|v| v * dilation);
        for (i, idx) in block.range.clone().enumerate() {
            h[(i, i)] += Complex64::new(kinetic * self.energies[idx], 0.0);
        }
        h
    }
}

/// `H_eff(t)` as a block-diagonal Hermitian matrix.
pub fn h_eff(model: &EffectiveHamiltonianModel, t: f64, variant: Coefficients) -> Result<OperatorMatrix> {
    let (kinetic, dilation) = model.coefficients(t, variant)?;
    let blocks = model
        .dilation
        .blocks
        .iter()
        .map(|b| OperatorBlock {
            m: b.m,
            range: b.range.clone(),
            entries: model.block_hamiltonian(b, kinetic, dilation),
        })
        .collect();
    Ok(OperatorMatrix {
        kind: OperatorKind::Hamiltonian,
        dim: model.dilation.dim,
        blocks,
    })
}

/// Uniform time grid starting at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
    /// Keep every `sample_every`-th step (the final step is always kept).
    pub sample_every: usize,
    pub store_states: bool,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Self {
        TimeGrid {
            dt,
            steps,
            sample_every: 1,
            store_states: true,
        }
    }

    /// `horizon` time units (drive periods for a sinusoid) at
    /// `steps_per_unit` steps each.
    pub fn in_units(drive: &DriveProfile, horizon: f64, steps_per_unit: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || steps_per_unit == 0 {
            return Err(Error::invalid("dynamics", "horizon and steps per period must be positive"));
        }
        let steps = (horizon * steps_per_unit as f64).round() as usize;
        Ok(TimeGrid::new(drive.time_unit() / steps_per_unit as f64, steps.max(1)))
    }

    pub fn sampled_every(mut self, every: usize) -> Self {
        self.sample_every = every.max(1);
        self
    }

    pub fn without_states(mut self) -> Self {
        self.store_states = false;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    fn is_sample(&self, step: usize) -> bool {
        step.is_multiple_of(self.sample_every) || step == self.steps
    }

    fn sample_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.steps).filter(|&k| self.is_sample(k))
    }
}

/// Longest step accepted for `model`: 1/64 of the larger of the drive
/// period and `2πħ/E_max`.
pub fn max_step(model: &EffectiveHamiltonianModel) -> f64 {
    let drive_period = match &model.drive.waveform {
        Waveform::Sinusoid { omega, .. } => 2.0 * PI / omega,
        Waveform::Tabulated(tab) => 2.0 * tab.step(),
    };
    let fastest = 2.0 * PI * model.hbar() / model.basis.max_energy();
    drive_period.max(fastest) / MIN_STEPS_PER_PERIOD as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Absolute sample times, strictly increasing.
    pub times: Vec<f64>,
    /// Unit for reporting times (drive period for a sinusoid).
    pub time_unit: f64,
    pub norms: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub states: Option<Vec<StateVector>>,
}

impl Trajectory {
    fn with_capacity(grid: &TimeGrid, time_unit: f64) -> Self {
        let n = grid.steps / grid.sample_every + 2;
        Trajectory {
            times: Vec::with_capacity(n),
            time_unit,
            norms: Vec::with_capacity(n),
            lambdas: Vec::with_capacity(n),
            states: grid.store_states.then(|| Vec::with_capacity(n)),
        }
    }

    fn record(&mut self, t: f64, lambda: f64, state: &StateVector) {
        self.times.push(t);
        self.norms.push(state.norm());
        self.lambdas.push(lambda);
        if let Some(states) = self.states.as_mut() {
            states.push(state.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample times in reporting units.
    pub fn scaled_times(&self) -> Vec<f64> {
        self.times.iter().map(|t| t / self.time_unit).collect()
    }

    pub fn final_state(&self) -> Option<&StateVector> {
        self.states.as_ref().and_then(|s| s.last())
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    fn states(&self, what: &'static str) -> Result<&[StateVector]> {
        self.states.as_deref().ok_or(Error::MissingStates(what))
    }
}

/// One unitary step `c ← exp(-i H(t + dt/2) dt / ħ) c` per `m`-block. `dt`
/// may be negative.
fn step_exact(
    model: &EffectiveHamiltonianModel,
    state: &mut StateVector,
    t: f64,
    dt: f64,
) -> Result<()> {
    let (kinetic, dilation) = model.coefficients(t + 0.5 * dt, Coefficients::Exact)?;
    let hbar = model.hbar();
    for block in &model.dilation.blocks {
        let h = model.block_hamiltonian(block, kinetic, dilation);
        let eig = SymmetricEigen::try_new(h, 1e-15, 10_000).ok_or_else(|| Error::NonConvergence {
            module: "dynamics",
            what: format!("eigendecomposition of block m={} at t={t}", block.m),
            detail: "iteration limit reached".to_string(),
        })?;
        let c = DVector::from_column_slice(&state.coeffs[block.range.clone()]);
        let mut rotated = eig.eigenvectors.adjoint() * c;
        for (v, &w) in rotated.iter_mut().zip(eig.eigenvalues.iter()) {
            *v *= Complex64::from_polar(1.0, -w * dt / hbar);
        }
        let next = &eig.eigenvectors * rotated;
        state.coeffs[block.range.clone()].copy_from_slice(next.as_slice());
    }
    Ok(())
}

/// Advances `state` by `steps` exponential-midpoint steps of size `dt`
/// from time `start`. Negative `dt` runs backwards.
pub fn evolve(
    state: &StateVector,
    model: &EffectiveHamiltonianModel,
    start: f64,
    dt: f64,
    steps: usize,
) -> Result<StateVector> {
    check_dim(state, model)?;
    let mut current = state.clone();
    for k in 0..steps {
        step_exact(model, &mut current, start + k as f64 * dt, dt)?;
    }
    Ok(current)
}

fn check_dim(state: &StateVector, model: &EffectiveHamiltonianModel) -> Result<()> {
    if state.coeffs.len() != model.basis.len() {
        return Err(Error::invalid(
            "dynamics",
            format!("state has {} coefficients, basis has {}", state.coeffs.len(), model.basis.len()),
        ));
    }
    Ok(())
}

fn check_normalized(state: &StateVector) -> Result<()> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("dynamics", format!("initial state has norm {norm}, expected 1")));
    }
    Ok(())
}

/// Exact (truncated-basis) evolution with the exponential midpoint rule.
pub fn propagate_exact(
    state0: &StateVector,
    model: &EffectiveHamiltonianModel,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_dim(state0, model)?;
    check_normalized(state0)?;
    let limit = max_step(model);
    if !(grid.dt > 0.0) || grid.dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooCoarse {
            dt: grid.dt,
            max_dt: limit,
            reason: format!("{MIN_STEPS_PER_PERIOD} steps per drive period or per 2πħ/E_max, whichever is longer"),
        });
    }
    let mut traj = Trajectory::with_capacity(grid, model.drive.time_unit());
    let mut state = state0.clone();
    traj.record(0.0, model.drive.lambda(0.0)?.0, &state);
    for k in 0..grid.steps {
        let t = k as f64 * grid.dt;
        step_exact(model, &mut state, t, grid.dt)?;
        if grid.is_sample(k + 1) {
            let t_next = (k + 1) as f64 * grid.dt;
            traj.record(t_next, model.drive.lambda(t_next)?.0, &state);
        }
    }
    let drift = traj.max_norm_drift();
    if drift > 1e-10 {
        log::warn!("exact propagation norm drift {drift:e} exceeds 1e-10");
    }
    Ok(traj)
}

/// First-order amplitudes
/// `a_α(t) = e^{-iE_α Θ(t)/ħ} [c_α(0) + ε Σ_β D_αβ ∫₀ᵗ ḟ(u) e^{iω_αβ u} du c_β(0)]`
/// with `Θ(t) = ∫₀ᵗ (1 - 2εf)`, `ω_αβ = (E_α - E_β)/ħ` and `D = V/(iħ)`.
pub fn propagate_first_order(
    state0: &StateVector,
    model: &EffectiveHamiltonianModel,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_dim(state0, model)?;
    if !(grid.dt > 0.0) {
        return Err(Error::invalid("dynamics", "time step must be positive"));
    }
    let eps = model.drive.epsilon;
    if eps > FIRST_ORDER_EPSILON_WARN {
        log::warn!("epsilon = {eps} is large for the first-order propagator");
    }
    let hbar = model.hbar();
    let radial = dilation_radial(&model.dilation, hbar);

    // Couplings (α, β, D_αβ c_β(0), ω_αβ) with nonzero weight.
    let mut couplings = Vec::new();
    for (block, d) in model.dilation.blocks.iter().zip(&radial) {
        for (i, alpha) in block.range.clone().enumerate() {
            for (j, beta) in block.range.clone().enumerate() {
                let c_beta = state0.coeffs[beta];
                if i == j || d[(i, j)] == 0.0 || c_beta.norm_sqr() == 0.0 {
                    continue;
                }
                let omega = (model.energies[alpha] - model.energies[beta]) / hbar;
                couplings.push((alpha, d[(i, j)] * c_beta, omega));
            }
        }
    }

    let analytic = matches!(model.drive.waveform, Waveform::Sinusoid { .. });
    let mut integrals = vec![Complex64::new(0.0, 0.0); couplings.len()];
    let mut last_t = 0.0;

    let mut traj = Trajectory::with_capacity(grid, model.drive.time_unit());
    for k in grid.sample_steps() {
        let t = k as f64 * grid.dt;
        for (acc, &(_, _, omega)) in integrals.iter_mut().zip(&couplings) {
            *acc = if analytic {
                model.drive.velocity_spectrum(t, omega)?
            } else {
                *acc + model.drive.velocity_spectrum_between(last_t, t, omega)?
            };
        }
        last_t = t;
        let clock = model.drive.first_order_clock(t)?;
        let mut coeffs = state0.coeffs.clone();
        for (&(alpha, weight, _), integral) in couplings.iter().zip(&integrals) {
            coeffs[alpha] += weight * integral * eps;
        }
        for (c, &e) in coeffs.iter_mut().zip(&model.energies) {
            *c *= Complex64::from_polar(1.0, -e * clock / hbar);
        }
        traj.record(t, model.drive.lambda(t)?.0, &StateVector { coeffs });
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Populations,
    MeanRadiusStatic,
    MeanRadiusPhysical,
    Norm,
}

/// Time series of an observable; populations come back as one row per
/// sample with one column per basis mode, the rest as single-column rows.
pub fn observables(
    traj: &Trajectory,
    which: Observable,
    position: Option<&OperatorMatrix>,
) -> Result<Vec<Vec<f64>>> {
    match which {
        Observable::Norm => Ok(traj.norms.iter().map(|&n| vec![n]).collect()),
        Observable::Populations => Ok(populations(traj)?),
        Observable::MeanRadiusStatic | Observable::MeanRadiusPhysical => {
            let r = position.ok_or_else(|| Error::invalid("dynamics", "mean radius needs the position matrix"))?;
            let series = if which == Observable::MeanRadiusStatic {
                mean_radius_static(traj, r)?
            } else {
                mean_radius_physical(traj, r)?
            };
            Ok(series.into_iter().map(|v| vec![v]).collect())
        }
    }
}

/// `|c_α(t)|²` per sample.
pub fn populations(traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    Ok(traj.states("populations")?.iter().map(StateVector::populations).collect())
}

/// `Σ_n |c_mn|²` for each `m`-block, per sample.
pub fn block_populations(traj: &Trajectory, basis: &BasisSet) -> Result<Vec<Vec<f64>>> {
    let blocks = basis.m_blocks();
    Ok(traj
        .states("block populations")?
        .iter()
        .map(|s| {
            blocks
                .iter()
                .map(|(_, r)| s.coeffs[r.clone()].iter().map(|c| c.norm_sqr()).sum())
                .collect()
        })
        .collect())
}

/// `⟨r⟩ = c† R c` in the static domain.
pub fn mean_radius_static(traj: &Trajectory, position: &OperatorMatrix) -> Result<Vec<f64>> {
    Ok(traj
        .states("mean_radius_static")?
        .iter()
        .map(|s| position.expectation(&s.coeffs).re)
        .collect())
}

/// `λ(t) ⟨r⟩_static`: the map back to the moving box rescales lengths by λ.
pub fn mean_radius_physical(traj: &Trajectory, position: &OperatorMatrix) -> Result<Vec<f64>> {
    Ok(mean_radius_static(traj, position)?
        .into_iter()
        .zip(&traj.lambdas)
        .map(|(r, l)| r * l)
        .collect())
}

/// Trapezoid average of `series` over each consecutive window of
/// `per_period` intervals; `series[0]` is the value at `t = 0`. A trailing
/// partial window is dropped.
pub fn period_averages(series: &[f64], per_period: usize) -> Vec<f64> {
    if per_period == 0 || series.len() < 2 {
        return Vec::new();
    }
    let periods = (series.len() - 1) / per_period;
    (0..periods)
        .map(|k| {
            let w = &series[k * per_period..=(k + 1) * per_period];
            let inner: f64 = w[1..per_period].iter().sum();
            (inner + 0.5 * (w[0] + w[per_period])) / per_period as f64
        })
        .collect()
}

/// Half the peak-to-peak excursion of `series` within each window of
/// `per_period` intervals.
pub fn period_amplitudes(series: &[f64], per_period: usize) -> Vec<f64> {
    if per_period == 0 || series.len() < 2 {
        return Vec::new();
    }
    let periods = (series.len() - 1) / per_period;
    (0..periods)
        .map(|k| {
            let w = &series[k * per_period..=(k + 1) * per_period];
            let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            0.5 * (hi - lo)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BoxSpec, PhysicalConstants, Truncation};
    use crate::operators::{dilation_matrix, position_matrix};
    use crate::quadrature::QuadratureSpec;
    use approx::assert_abs_diff_eq;

    fn model(m_max: i32, n_max: u32, eps: f64, omega: Option<f64>) -> EffectiveHamiltonianModel {
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
        let resonant = (basis.modes[1].energy - basis.modes[0].energy) / basis.constants.hbar;
        let drive = DriveProfile::sinusoid(eps, omega.unwrap_or(resonant)).unwrap();
        EffectiveHamiltonianModel::new(basis, v, drive).unwrap()
    }

    #[test]
    fn h_eff_trivial_cases() {
        let still = model(1, 4, 0.0, None);
        let h = h_eff(&still, 0.3, Coefficients::Exact).unwrap();
        let dense = h.to_dense();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let want = if i == j { still.energies[i] } else { 0.0 };
                assert_eq!(dense[(i, j)], Complex64::new(want, 0.0));
            }
        }
        let driven = model(1, 4, 0.03, None);
        let omega = match driven.drive.waveform {
            Waveform::Sinusoid { omega, .. } => omega,
            _ => unreachable!(),
        };
        // ḟ vanishes at a quarter period: only the kinetic term survives.
        let t = PI / (2.0 * omega);
        let h = h_eff(&driven, t, Coefficients::Exact).unwrap().to_dense();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i != j {
                    assert!(h[(i, j)].norm() < 1e-12);
                }
            }
            assert_abs_diff_eq!(h[(i, i)].re, driven.energies[i] / 1.03f64.powi(2), epsilon = 1e-9);
        }
        for t in [0.0, 0.17, 1.3] {
            for v in [Coefficients::Exact, Coefficients::FirstOrder] {
                assert!(h_eff(&driven, t, v).unwrap().hermiticity_defect() <= 1e-12);
            }
        }
    }

    #[test]
    fn stationary_state_only_rotates() {
        let m = model(0, 6, 0.0, None);
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let grid = TimeGrid::in_units(&m.drive, 5.0, 128).unwrap();
        let traj = propagate_exact(&psi0, &m, &grid).unwrap();
        let e = m.energies[0];
        for (t, s) in traj.times.iter().zip(traj.states.as_ref().unwrap()) {
            let want = Complex64::from_polar(1.0, -e * t);
            assert!((s.coeffs[0] - want).norm() < 1e-10);
            for c in &s.coeffs[1..] {
                assert!(c.norm() < 1e-14);
            }
        }
        let first = propagate_first_order(&psi0, &m, &grid).unwrap();
        for (a, b) in traj.states.unwrap().iter().zip(first.states.unwrap()) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn forward_then_backward_returns_initial_state() {
        let m = model(1, 8, 0.03, None);
        let psi0 = StateVector::superposition(
            &m.basis,
            &[
                (ModeIndex::new(0, 1), Complex64::new(0.6, 0.0)),
                (ModeIndex::new(1, 2), Complex64::new(0.0, 0.8)),
            ],
        )
        .unwrap();
        let dt = m.drive.period().unwrap() / 256.0;
        let steps = 256 * 10;
        let there = evolve(&psi0, &m, 0.0, dt, steps).unwrap();
        let back = evolve(&there, &m, steps as f64 * dt, -dt, steps).unwrap();
        for (a, b) in back.coeffs.iter().zip(&psi0.coeffs) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_coarse_grid_and_unnormalized_state() {
        let m = model(0, 4, 0.03, None);
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let coarse = TimeGrid::in_units(&m.drive, 2.0, 32).unwrap();
        assert!(matches!(
            propagate_exact(&psi0, &m, &coarse),
            Err(Error::StepTooCoarse { .. })
        ));
        let bad = StateVector { coeffs: psi0.coeffs.iter().map(|c| c * 2.0).collect() };
        let grid = TimeGrid::in_units(&m.drive, 2.0, 64).unwrap();
        assert!(propagate_exact(&bad, &m, &grid).is_err());
    }

    #[test]
    fn superposition_normalizes_weights() {
        let m = model(1, 3, 0.0, None);
        let s = StateVector::superposition(
            &m.basis,
            &[
                (ModeIndex::new(0, 1), Complex64::new(3.0, 0.0)),
                (ModeIndex::new(1, 1), Complex64::new(0.0, 4.0)),
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.coeffs[0].re, 0.6, epsilon = 1e-15);
        assert!(StateVector::superposition(&m.basis, &[(ModeIndex::new(2, 1), Complex64::new(1.0, 0.0))]).is_err());
    }

    #[test]
    fn populations_sum_to_norm_squared() {
        let m = model(1, 6, 0.03, None);
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let grid = TimeGrid::in_units(&m.drive, 3.0, 128).unwrap();
        for traj in [
            propagate_exact(&psi0, &m, &grid).unwrap(),
            propagate_first_order(&psi0, &m, &grid).unwrap(),
        ] {
            let pops = populations(&traj).unwrap();
            for (p, n) in pops.iter().zip(&traj.norms) {
                assert_abs_diff_eq!(p.iter().sum::<f64>(), n * n, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn angular_momentum_blocks_are_conserved() {
        let m = model(2, 6, 0.05, None);
        let psi0 = StateVector::superposition(
            &m.basis,
            &[
                (ModeIndex::new(0, 1), Complex64::new(0.5, 0.0)),
                (ModeIndex::new(1, 1), Complex64::new(0.5, 0.5)),
                (ModeIndex::new(2, 3), Complex64::new(0.0, 0.5)),
            ],
        )
        .unwrap();
        let grid = TimeGrid::in_units(&m.drive, 5.0, 128).unwrap();
        let traj = propagate_exact(&psi0, &m, &grid).unwrap();
        let sums = block_populations(&traj, &m.basis).unwrap();
        for row in &sums {
            for (a, b) in row.iter().zip(&sums[0]) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn resonant_first_order_grows_quadratically() {
        let eps = 1e-3;
        let m = model(0, 6, eps, None);
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let omega = (m.energies[1] - m.energies[0]) / m.hbar();
        let d12 = dilation_radial(&m.dilation, 1.0)[0][(1, 0)];
        let period = m.drive.period().unwrap();
        let grid = TimeGrid::in_units(&m.drive, 6.0, 64).unwrap();
        let traj = propagate_first_order(&psi0, &m, &grid).unwrap();
        let pops = populations(&traj).unwrap();
        // At whole periods the counter-rotating part of the integral vanishes.
        for k in 1..=6 {
            let idx = k * 64;
            let t = k as f64 * period;
            assert_abs_diff_eq!(traj.times[idx], t, epsilon = 1e-12);
            let want = (eps * omega * d12.abs() * t / 2.0).powi(2);
            assert!((pops[idx][1] - want).abs() <= 1e-12 * want.max(1.0), "{} vs {want}", pops[idx][1]);
        }
    }

    #[test]
    fn first_order_tracks_exact_to_second_order() {
        let psi_mode = ModeIndex::new(0, 1);
        let mut gaps = Vec::new();
        for eps in [4e-3, 2e-3] {
            let m = model(0, 8, eps, None);
            let psi0 = StateVector::basis_state(&m.basis, psi_mode).unwrap();
            let grid = TimeGrid::in_units(&m.drive, 3.0, 512).unwrap();
            let a = populations(&propagate_exact(&psi0, &m, &grid).unwrap()).unwrap();
            let b = populations(&propagate_first_order(&psi0, &m, &grid).unwrap()).unwrap();
            let gap = a
                .iter()
                .zip(&b)
                .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
                .fold(0.0, f64::max);
            gaps.push(gap);
        }
        let ratio = gaps[0] / gaps[1];
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn observables_need_states() {
        let m = model(0, 4, 0.01, None);
        let q = QuadratureSpec::default();
        let r = position_matrix(&m.basis, &q).unwrap();
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let grid = TimeGrid::in_units(&m.drive, 1.0, 64).unwrap().without_states();
        let traj = propagate_exact(&psi0, &m, &grid).unwrap();
        assert_eq!(traj.len(), 65);
        assert!(matches!(populations(&traj), Err(Error::MissingStates(_))));
        assert!(observables(&traj, Observable::MeanRadiusStatic, Some(&r)).is_err());
        assert_eq!(observables(&traj, Observable::Norm, None).unwrap().len(), 65);
    }

    #[test]
    fn stationary_mean_radius_is_constant() {
        let m = model(0, 5, 0.0, None);
        let q = QuadratureSpec::default();
        let r = position_matrix(&m.basis, &q).unwrap();
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let grid = TimeGrid::in_units(&m.drive, 2.0, 64).unwrap().sampled_every(16);
        let traj = propagate_exact(&psi0, &m, &grid).unwrap();
        assert_eq!(traj.len(), 9);
        let stat = mean_radius_static(&traj, &r).unwrap();
        let phys = mean_radius_physical(&traj, &r).unwrap();
        for (a, b) in stat.iter().zip(&phys) {
            assert_abs_diff_eq!(*a, stat[0], epsilon = 1e-12);
            assert_abs_diff_eq!(*b, stat[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn physical_radius_scales_with_lambda() {
        let m = model(0, 6, 0.03, None);
        let q = QuadratureSpec::default();
        let r = position_matrix(&m.basis, &q).unwrap();
        let psi0 = StateVector::basis_state(&m.basis, ModeIndex::new(0, 1)).unwrap();
        let grid = TimeGrid::in_units(&m.drive, 1.0, 64).unwrap();
        let traj = propagate_exact(&psi0, &m, &grid).unwrap();
        let stat = mean_radius_static(&traj, &r).unwrap();
        let phys = mean_radius_physical(&traj, &r).unwrap();
        for ((s, p), t) in stat.iter().zip(&phys).zip(&traj.times) {
            assert_abs_diff_eq!(*p, s * m.drive.lambda(*t).unwrap().0, epsilon = 1e-15);
        }
    }

    #[test]
    fn period_helpers_on_known_series() {
        let n = 64;
        let series: Vec<f64> = (0..=3 * n)
            .map(|k| {
                let t = k as f64 / n as f64;
                (2.0 * PI * t).sin().powi(2) * (1.0 + t)
            })
            .collect();
        let avg = period_averages(&series, n);
        assert_eq!(avg.len(), 3);
        for (k, a) in avg.iter().enumerate() {
            // ∫ sin²(2πt)(1+t) over [k, k+1] = (1 + k + 1/2)/2
            assert_abs_diff_eq!(*a, 0.5 * (1.5 + k as f64), epsilon = 1e-3);
        }
        let amp = period_amplitudes(&series, n);
        assert!(amp.windows(2).all(|w| w[1] > w[0]));
        assert!(period_averages(&series[..10], n).is_empty());
    }
}
