//! Natural transition frequencies and frequency sweeps of the wall drive.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisSet, ModeIndex};
use crate::drive::{DriveProfile, Waveform};
use crate::dynamics::{period_averages, propagate_exact, EffectiveHamiltonianModel, StateVector, TimeGrid};
use crate::error::{Error, Result};
use crate::operators::{dilation_radial, OperatorKind, OperatorMatrix};

/// Couplings below this magnitude count as forbidden.
pub const COUPLING_THRESHOLD: f64 = 1e-8;

/// Shortest scan horizon, in drive periods.
pub const MIN_SCAN_PERIODS: f64 = 10.0;

/// Peaks lower than this fraction of the tallest are discarded.
pub const PEAK_RELATIVE_HEIGHT: f64 = 0.05;

/// Maxima at or below this height are round-off, not peaks.
pub const PEAK_ABSOLUTE_FLOOR: f64 = 1e-10;

/// `∫₀ᵗ ḟ(u) e^{iωu} du` for `t > 0`.
pub fn velocity_spectrum(drive: &DriveProfile, t: f64, omega: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::invalid("resonance", format!("spectrum needs t > 0 (got {t})")));
    }
    drive.velocity_spectrum(t, omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Lower-energy mode.
    pub from: ModeIndex,
    /// Higher-energy mode.
    pub to: ModeIndex,
    /// `(E_to - E_from)/ħ > 0`.
    pub omega: f64,
    /// `|D_{to,from}|` with `V = iħD`.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionTable {
    /// Sorted by frequency.
    pub entries: Vec<Transition>,
}

impl TransitionTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Transitions that start or end on `mode`.
    pub fn involving(&self, mode: ModeIndex) -> impl Iterator<Item = &Transition> {
        self.entries.iter().filter(move |t| t.from == mode || t.to == mode)
    }

    /// Frequency of the `from → to` transition, in either direction.
    pub fn frequency(&self, a: ModeIndex, b: ModeIndex) -> Option<f64> {
        self.entries
            .iter()
            .find(|t| (t.from == a && t.to == b) || (t.from == b && t.to == a))
            .map(|t| t.omega)
    }
}

/// All pairs within one `m`-block whose dilation coupling exceeds
/// `threshold`, sorted by transition frequency.
pub fn transition_frequencies(basis: &BasisSet, v: &OperatorMatrix, threshold: f64) -> Result<TransitionTable> {
    if v.kind != OperatorKind::Dilation || v.dim != basis.len() {
        return Err(Error::invalid("resonance", "dilation matrix does not belong to this basis"));
    }
    let hbar = basis.constants.hbar;
    let radial = dilation_radial(v, hbar);
    let mut entries = Vec::new();
    for (block, d) in v.blocks.iter().zip(&radial) {
        for (i, a) in block.range.clone().enumerate() {
            for (j, b) in block.range.clone().enumerate().skip(i + 1) {
                let coupling = d[(i, j)].abs();
                if coupling <= threshold {
                    continue;
                }
                let (lo, hi) = if basis.modes[a].energy <= basis.modes[b].energy { (a, b) } else { (b, a) };
                entries.push(Transition {
                    from: basis.modes[lo].index,
                    to: basis.modes[hi].index,
                    omega: (basis.modes[hi].energy - basis.modes[lo].energy) / hbar,
                    coupling,
                });
            }
        }
    }
    entries.sort_by(|x, y| {
        x.omega
            .total_cmp(&y.omega)
            .then(x.from.cmp(&y.from))
            .then(x.to.cmp(&y.to))
    });
    Ok(TransitionTable { entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Grid index of the sampled maximum.
    pub index: usize,
    /// Vertex of the parabola through the maximum and its neighbours.
    pub omega: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanFailure {
    pub index: usize,
    pub omega: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub omegas: Vec<f64>,
    /// Probability of having left the initial mode, averaged over the last
    /// drive period. NaN where the point failed.
    pub metric_final: Vec<f64>,
    /// Largest period average of the same probability over the horizon.
    pub metric_max: Vec<f64>,
    /// Detected on `metric_max`, tallest first.
    pub peaks: Vec<Peak>,
    pub failures: Vec<ScanFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub horizon_periods: f64,
    pub steps_per_period: usize,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// Evenly spaced grid of `points` frequencies over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("resonance", "grid needs lo < hi and at least two points"));
    }
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|k| if k + 1 == points { hi } else { lo + k as f64 * h }).collect())
}

/// `(final, max)` period-averaged probability of leaving `initial` when the
/// template is driven sinusoidally at `omega`.
pub fn scan_point(
    template: &EffectiveHamiltonianModel,
    initial: ModeIndex,
    omega: f64,
    settings: &ScanSettings,
) -> Result<(f64, f64)> {
    let phase = match template.drive.waveform {
        Waveform::Sinusoid { phase, .. } => phase,
        Waveform::Tabulated(_) => {
            return Err(Error::invalid("resonance", "scans need a sinusoidal drive template"));
        }
    };
    let drive = DriveProfile::new(template.drive.epsilon, Waveform::Sinusoid { omega, phase })?;
    let model = template.with_drive(drive);
    let idx = model.basis.require(initial)?;
    let psi0 = StateVector::basis_state(&model.basis, initial)?;
    let grid = TimeGrid::in_units(&model.drive, settings.horizon_periods, settings.steps_per_period)?;
    let traj = propagate_exact(&psi0, &model, &grid)?;
    let leaving: Vec<f64> = traj
        .states
        .as_ref()
        .ok_or(Error::MissingStates("scan metric"))?
        .iter()
        .map(|s| (1.0 - s.coeffs[idx].norm_sqr()).clamp(0.0, 1.0))
        .collect();
    let averages = period_averages(&leaving, settings.steps_per_period);
    let last = *averages
        .last()
        .ok_or_else(|| Error::invalid("resonance", "horizon shorter than one period"))?;
    let max = averages.iter().copied().fold(0.0, f64::max);
    Ok((last, max))
}

/// Sweeps the drive frequency over `omegas` with the exact propagator.
/// Failed points are recorded and skipped; results keep grid order.
pub fn resonance_scan(
    template: &EffectiveHamiltonianModel,
    initial: ModeIndex,
    omegas: &[f64],
    settings: &ScanSettings,
) -> Result<ScanResult> {
    if omegas.len() < 2 || omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("resonance", "frequency grid must be strictly increasing with >= 2 points"));
    }
    if !(settings.horizon_periods >= MIN_SCAN_PERIODS) {
        return Err(Error::invalid(
            "resonance",
            format!("scan horizon must be at least {MIN_SCAN_PERIODS} periods"),
        ));
    }
    template.basis.require(initial)?;
    let table = transition_frequencies(&template.basis, &template.dilation, COUPLING_THRESHOLD)?;
    let (lo, hi) = (omegas[0], omegas[omegas.len() - 1]);
    if !table.involving(initial).any(|t| t.omega >= lo && t.omega <= hi) {
        log::warn!("no transition from {initial} lies inside the scan range [{lo}, {hi}]");
    }

    let run = || -> Vec<Result<(f64, f64)>> {
        omegas
            .par_iter()
            .map(|&w| scan_point(template, initial, w, settings))
            .collect()
    };
    let outcomes = match settings.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid("resonance", format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut metric_final = Vec::with_capacity(omegas.len());
    let mut metric_max = Vec::with_capacity(omegas.len());
    let mut failures = Vec::new();
    for (index, (outcome, &omega)) in outcomes.into_iter().zip(omegas).enumerate() {
        match outcome {
            Ok((last, max)) => {
                metric_final.push(last);
                metric_max.push(max);
            }
            Err(e) => {
                log::error!("scan point omega={omega} failed: {e}");
                failures.push(ScanFailure { index, omega, message: e.to_string() });
                metric_final.push(f64::NAN);
                metric_max.push(f64::NAN);
            }
        }
    }
    let peaks = find_peaks(omegas, &metric_max, PEAK_RELATIVE_HEIGHT);
    Ok(ScanResult { omegas: omegas.to_vec(), metric_final, metric_max, peaks, failures })
}

/// Interior local maxima of `values` (NaN entries break neighbourhoods),
/// refined by a parabola through three points and filtered to at least
/// `relative` times the tallest; tallest first.
pub fn find_peaks(grid: &[f64], values: &[f64], relative: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || !(b > a && b >= c) {
            continue;
        }
        let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
        let d01 = (b - a) / (x1 - x0);
        let d12 = (c - b) / (x2 - x1);
        let curv = (d12 - d01) / (x2 - x0);
        let (omega, height) = if curv < 0.0 {
            // p(x) = b + d01 (x - x1) + curv (x - x0)(x - x1)
            let xv = (0.5 * (x0 + x1) - d01 / (2.0 * curv)).clamp(x0, x2);
            (xv, b + d01 * (xv - x1) + curv * (xv - x0) * (xv - x1))
        } else {
            (x1, b)
        };
        peaks.push(Peak { index: i, omega, height });
    }
    let tallest = peaks.iter().map(|p| p.height).fold(0.0, f64::max);
    peaks.retain(|p| p.height >= relative * tallest && p.height > PEAK_ABSOLUTE_FLOOR);
    peaks.sort_by(|x, y| y.height.total_cmp(&x.height).then(x.index.cmp(&y.index)));
    peaks
}

/// Distinct frequencies in `table` reachable from `initial` in one step.
pub fn reachable_frequencies(table: &TransitionTable, initial: ModeIndex) -> Vec<f64> {
    let set: BTreeSet<u64> = table.involving(initial).map(|t| t.omega.to_bits()).collect();
    let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
    v.sort_by(f64::total_cmp);
    v
}
