//! JSON run configuration and its resolution into core objects.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use breathingbox_core::basis::{build_basis, BasisSet, BoxSpec, ModeIndex, PhysicalConstants, Truncation};
use breathingbox_core::drive::{DriveProfile, Tabulated, Waveform};
use breathingbox_core::dynamics::{EffectiveHamiltonianModel, StateVector};
use breathingbox_core::operators::{dilation_matrix, OperatorMatrix};
use breathingbox_core::quadrature::QuadratureSpec;

pub const QUAD_TOL_ENV: &str = "BREATHINGBOX_QUAD_TOL";

/// `[m, n]`.
pub type ModeRef = (i32, u32);

fn mode(r: ModeRef) -> ModeIndex {
    ModeIndex::new(r.0, r.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "box")]
    pub domain: BoxConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub truncation: TruncationConfig,
    pub drive: DriveConfig,
    pub initial_state: InitialState,
    #[serde(default = "default_horizon")]
    pub horizon_periods: f64,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub propagator: PropagatorChoice,
    /// Population columns in trajectory output; all modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_modes: Option<Vec<ModeRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureConfig>,
    /// Used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_horizon() -> f64 {
    30.0
}

fn default_steps() -> usize {
    256
}

fn default_sample_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    /// 2 for the disc, 1 for the segment.
    pub dimension: u32,
    /// Radius `r₀` or length `l`.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub hbar: f64,
    pub mu: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { hbar: 1.0, mu: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_min: Option<i32>,
    #[serde(default)]
    pub m_max: i32,
    pub n_max: u32,
    /// Shorthand for `m_min = -m_max`.
    #[serde(default)]
    pub include_negative_m: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub epsilon: f64,
    pub waveform: WaveformConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformConfig {
    Sinusoid {
        omega: Frequency,
        #[serde(default)]
        phase: f64,
    },
    Tabulated {
        step: f64,
        samples: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Frequency {
    Value(f64),
    Transition { transition: TransitionRef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRef {
    pub from: ModeRef,
    pub to: ModeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Mode(ModeRef),
    Superposition(Vec<Weight>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weight {
    pub mode: ModeRef,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorChoice {
    #[default]
    Exact,
    FirstOrder,
    Both,
}

impl PropagatorChoice {
    pub fn exact(self) -> bool {
        matches!(self, PropagatorChoice::Exact | PropagatorChoice::Both)
    }

    pub fn first_order(self) -> bool {
        matches!(self, PropagatorChoice::FirstOrder | PropagatorChoice::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    #[serde(default = "default_horizon")]
    pub horizon_periods: f64,
    /// Falls back to the run's `steps_per_period`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_period: Option<usize>,
    /// Falls back to the initial state when it is a single mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mode: Option<ModeRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn default_nodes() -> usize {
    QuadratureSpec::default().nodes
}

fn default_tolerance() -> f64 {
    QuadratureSpec::default().tolerance
}

fn default_max_nodes() -> usize {
    QuadratureSpec::default().max_nodes
}

/// Reads a config file, or the config echoed inside a run manifest.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("config {}", path.display()))
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let mut value: serde_json::Value = serde_json::from_str(text).context("not valid JSON")?;
    if value.get("version").is_some() {
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
    }
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("{path}: {}", e.into_inner())
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Field-level checks that do not need the basis.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name}: must be positive and finite (got {v})");
            }
            Ok(())
        };
        if !matches!(self.domain.dimension, 1 | 2) {
            bail!("box.dimension: must be 1 or 2 (got {})", self.domain.dimension);
        }
        positive("box.size", self.domain.size)?;
        positive("constants.hbar", self.constants.hbar)?;
        positive("constants.mu", self.constants.mu)?;
        if self.truncation.n_max == 0 {
            bail!("truncation.n_max: must be at least 1");
        }
        if self.truncation.m_max < 0 {
            bail!("truncation.m_max: must be >= 0");
        }
        if self.truncation.include_negative_m && self.truncation.m_min.is_some() {
            bail!("truncation: give either m_min or include_negative_m, not both");
        }
        let t = self.truncation();
        if t.m_min > t.m_max {
            bail!("truncation.m_min: exceeds m_max");
        }
        if !(self.drive.epsilon >= 0.0 && self.drive.epsilon.is_finite()) {
            bail!("drive.epsilon: must be >= 0 (got {})", self.drive.epsilon);
        }
        match &self.drive.waveform {
            WaveformConfig::Sinusoid { omega, phase } => {
                if let Frequency::Value(w) = omega {
                    positive("drive.waveform.sinusoid.omega", *w)?;
                }
                if !phase.is_finite() {
                    bail!("drive.waveform.sinusoid.phase: must be finite");
                }
            }
            WaveformConfig::Tabulated { step, samples } => {
                positive("drive.waveform.tabulated.step", *step)?;
                if samples.len() < 3 || samples.iter().any(|s| !s.is_finite()) {
                    bail!("drive.waveform.tabulated.samples: need at least 3 finite samples");
                }
            }
        }
        positive("horizon_periods", self.horizon_periods)?;
        if self.steps_per_period == 0 {
            bail!("steps_per_period: must be at least 1");
        }
        if self.sample_every == 0 {
            bail!("sample_every: must be at least 1");
        }
        if let InitialState::Superposition(w) = &self.initial_state {
            if w.is_empty() {
                bail!("initial_state: empty superposition");
            }
        }
        if let Some(scan) = &self.scan {
            if !(scan.omega_min > 0.0 && scan.omega_max > scan.omega_min && scan.omega_max.is_finite()) {
                bail!("scan: need 0 < omega_min < omega_max");
            }
            if scan.points < 3 {
                bail!("scan.points: need at least 3");
            }
            if scan.steps_per_period == Some(0) {
                bail!("scan.steps_per_period: must be at least 1");
            }
            if scan.initial_mode.is_none() && !matches!(self.initial_state, InitialState::Mode(_)) {
                bail!("scan.initial_mode: required when initial_state is a superposition");
            }
        }
        if let Some(q) = &self.quadrature {
            self.quadrature_from(q).validate().context("quadrature")?;
        }
        Ok(())
    }

    pub fn truncation(&self) -> Truncation {
        let t = &self.truncation;
        let m_min = if t.include_negative_m { -t.m_max } else { t.m_min.unwrap_or(0) };
        Truncation::new(m_min, t.m_max, t.n_max)
    }

    fn quadrature_from(&self, q: &QuadratureConfig) -> QuadratureSpec {
        QuadratureSpec {
            nodes: q.nodes,
            tolerance: q.tolerance,
            max_nodes: q.max_nodes,
        }
    }

    /// Quadrature settings, with the tolerance overridable from the
    /// environment.
    pub fn quadrature_spec(&self) -> Result<QuadratureSpec> {
        let mut spec = self.quadrature.as_ref().map(|q| self.quadrature_from(q)).unwrap_or_default();
        if let Ok(raw) = std::env::var(QUAD_TOL_ENV) {
            let tol: f64 = raw
                .trim()
                .parse()
                .with_context(|| format!("{QUAD_TOL_ENV}: not a number ({raw:?})"))?;
            spec.tolerance = tol;
        }
        spec.validate().context("quadrature")?;
        Ok(spec)
    }

    pub fn scan_initial_mode(&self) -> Option<ModeIndex> {
        let scan = self.scan.as_ref()?;
        match (scan.initial_mode, &self.initial_state) {
            (Some(m), _) => Some(mode(m)),
            (None, InitialState::Mode(m)) => Some(mode(*m)),
            _ => None,
        }
    }
}

/// Everything a run needs, built once from the config.
pub struct Resolved {
    pub quad: QuadratureSpec,
    pub basis: Arc<BasisSet>,
    pub dilation: Arc<OperatorMatrix>,
    pub model: EffectiveHamiltonianModel,
    pub initial: StateVector,
    pub tracked: Vec<ModeIndex>,
    /// Sinusoid frequency after resolving transition references.
    pub omega: Option<f64>,
}

pub fn resolve_basis(config: &RunConfig, quad: &QuadratureSpec) -> Result<BasisSet> {
    let box_spec = BoxSpec::new(config.domain.dimension, config.domain.size).context("box")?;
    let constants = PhysicalConstants::new(config.constants.hbar, config.constants.mu).context("constants")?;
    Ok(build_basis(box_spec, constants, config.truncation(), quad)?)
}

pub fn resolve(config: &RunConfig) -> Result<Resolved> {
    let quad = config.quadrature_spec()?;
    let basis = Arc::new(resolve_basis(config, &quad)?);
    let require = |field: &str, r: ModeRef| -> Result<ModeIndex> {
        let idx = mode(r);
        basis
            .position(idx)
            .map(|_| idx)
            .ok_or_else(|| anyhow!("{field}: mode {idx} is outside the truncation"))
    };

    let (waveform, omega) = match &config.drive.waveform {
        WaveformConfig::Sinusoid { omega, phase } => {
            let w = match omega {
                Frequency::Value(w) => *w,
                Frequency::Transition { transition } => {
                    let field = "drive.waveform.sinusoid.omega.transition";
                    let a = basis.position(require(field, transition.from)?).unwrap_or_default();
                    let b = basis.position(require(field, transition.to)?).unwrap_or_default();
                    let w = (basis.modes[b].energy - basis.modes[a].energy).abs() / basis.constants.hbar;
                    if !(w > 0.0) {
                        bail!("{field}: modes are degenerate, no transition frequency");
                    }
                    w
                }
            };
            (Waveform::Sinusoid { omega: w, phase: *phase }, Some(w))
        }
        WaveformConfig::Tabulated { step, samples } => (
            Waveform::Tabulated(Tabulated::new(*step, samples.clone()).context("drive.waveform.tabulated")?),
            None,
        ),
    };
    let drive = DriveProfile::new(config.drive.epsilon, waveform).context("drive")?;

    let weights = match &config.initial_state {
        InitialState::Mode(m) => vec![(require("initial_state", *m)?, Complex64::new(1.0, 0.0))],
        InitialState::Superposition(ws) => ws
            .iter()
            .map(|w| Ok((require("initial_state.mode", w.mode)?, Complex64::new(w.re, w.im))))
            .collect::<Result<Vec<_>>>()?,
    };
    let initial = StateVector::superposition(&basis, &weights).context("initial_state")?;

    let tracked = match &config.tracked_modes {
        Some(list) => list
            .iter()
            .map(|&m| require("tracked_modes", m))
            .collect::<Result<Vec<_>>>()?,
        None => basis.modes.iter().map(|m| m.index).collect(),
    };
    if let Some(m) = config.scan_initial_mode() {
        require("scan.initial_mode", (m.m, m.n))?;
    }

    let dilation = Arc::new(dilation_matrix(&basis, &quad)?);
    let model = EffectiveHamiltonianModel::new(Arc::clone(&basis), Arc::clone(&dilation), drive)?;
    Ok(Resolved { quad, basis, dilation, model, initial, tracked, omega })
}
