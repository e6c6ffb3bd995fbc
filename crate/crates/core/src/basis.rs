//! Eigenbasis of the static-domain box.
//!
//! Disc modes are `χ_mn(r, θ) = (2π)^{-1/2} ℵ_mn J_|m|(k_mn r) e^{imθ}` with
//! `k_mn = a_mn / r₀`; segment modes on `[-l/2, l/2]` are
//! `φ_n(x) = √(2/l) sin(nπ(x/l + ½))` and carry `m = 0`, so every later
//! stage can treat both shapes alike.

use std::f64::consts::{PI, SQRT_2};
use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::special::{bessel_j, bessel_zeros};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mu: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mu: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(
                "basis",
                format!("hbar and mu must be positive and finite (got {hbar}, {mu})"),
            ));
        }
        Ok(PhysicalConstants { hbar, mu })
    }

    /// ħ = μ = 1.
    pub fn natural() -> Self {
        PhysicalConstants { hbar: 1.0, mu: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Circle of radius r₀ (2D).
    Disc,
    /// Interval of length l centred on the origin (1D).
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    pub shape: Shape,
    /// r₀ for the disc, l for the segment.
    pub reference_size: f64,
}

impl BoxSpec {
    pub fn new(dimension: u32, reference_size: f64) -> Result<Self> {
        let shape = match dimension {
            1 => Shape::Segment,
            2 => Shape::Disc,
            d => {
                return Err(Error::invalid(
                    "basis",
                    format!("unsupported dimension {d} (only 1 and 2 have an eigenbasis)"),
                ))
            }
        };
        let spec = BoxSpec {
            shape,
            reference_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn disc(radius: f64) -> Result<Self> {
        BoxSpec::new(2, radius)
    }

    pub fn segment(length: f64) -> Result<Self> {
        BoxSpec::new(1, length)
    }

    pub fn dimension(&self) -> u32 {
        match self.shape {
            Shape::Segment => 1,
            Shape::Disc => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_size > 0.0 && self.reference_size.is_finite()) {
            return Err(Error::invalid(
                "basis",
                format!("reference size must be positive (got {})", self.reference_size),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub m: i32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(m: i32, n: u32) -> Self {
        ModeIndex { m, n }
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub index: ModeIndex,
    /// `a_mn` for the disc, `nπ` for the segment.
    pub zero: f64,
    pub wavenumber: f64,
    pub energy: f64,
    pub normalization: f64,
}

/// Inclusive bounds on the retained quantum numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub m_min: i32,
    pub m_max: i32,
    pub n_max: u32,
}

impl Truncation {
    pub fn new(m_min: i32, m_max: i32, n_max: u32) -> Self {
        Truncation { m_min, m_max, n_max }
    }

    /// `m ∈ [0, m_max]`.
    pub fn nonnegative(m_max: i32, n_max: u32) -> Self {
        Truncation::new(0, m_max, n_max)
    }

    /// `m ∈ [-m_max, m_max]`.
    pub fn symmetric(m_max: i32, n_max: u32) -> Self {
        Truncation::new(-m_max, m_max, n_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub box_spec: BoxSpec,
    pub constants: PhysicalConstants,
    /// Sorted by `(m, n)`.
    pub modes: Vec<Mode>,
    pub truncation: Truncation,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn position(&self, index: ModeIndex) -> Option<usize> {
        self.modes.binary_search_by(|md| md.index.cmp(&index)).ok()
    }

    pub fn require(&self, index: ModeIndex) -> Result<usize> {
        self.position(index).ok_or_else(|| {
            Error::invalid("basis", format!("mode {index} is not in the truncated basis"))
        })
    }

    pub fn energies(&self) -> Vec<f64> {
        self.modes.iter().map(|md| md.energy).collect()
    }

    /// Contiguous index ranges sharing one angular quantum number.
    pub fn m_blocks(&self) -> Vec<(i32, Range<usize>)> {
        let mut blocks: Vec<(i32, Range<usize>)> = Vec::new();
        for (i, md) in self.modes.iter().enumerate() {
            match blocks.last_mut() {
                Some((m, range)) if *m == md.index.m => range.end = i + 1,
                _ => blocks.push((md.index.m, i..i + 1)),
            }
        }
        blocks
    }

    pub fn max_energy(&self) -> f64 {
        self.modes.iter().map(|md| md.energy).fold(0.0, f64::max)
    }
}

/// Closed-form `ℵ_mn = √2 / (r₀ |J_{|m|+1}(a_mn)|)`, kept as a cross-check.
pub fn normalization_closed_form(radius: f64, m: i32, zero: f64) -> f64 {
    SQRT_2 / (radius * bessel_j(m.unsigned_abs() + 1, zero).abs())
}

/// `ℵ_mn = (∫₀^{r₀} r J_m(k_mn r)² dr)^{-1/2}` by converged quadrature.
/// For the segment this is the sine normalization `√(2/l)`.
pub fn normalization(box_spec: &BoxSpec, m: i32, n: u32, quad: &QuadratureSpec) -> Result<f64> {
    box_spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("basis", "mode index n must be >= 1"));
    }
    match box_spec.shape {
        Shape::Segment => Ok((2.0 / box_spec.reference_size).sqrt()),
        Shape::Disc => {
            let order = m.unsigned_abs();
            let zero = *bessel_zeros(order, n)?.last().expect("n >= 1");
            disc_normalization(box_spec.reference_size, order, n, zero, quad)
        }
    }
}

fn disc_normalization(radius: f64, order: u32, n: u32, zero: f64, quad: &QuadratureSpec) -> Result<f64> {
    // r = r₀ s turns the integral into r₀² ∫₀¹ s J(a s)² ds.
    let integral = quad.integrate(&format!("normalization of mode ({order},{n})"), 0.0, 1.0, |s| {
        let j = bessel_j(order, zero * s);
        s * j * j
    })?;
    Ok(1.0 / (radius * integral.sqrt()))
}

/// Builds the complete truncated eigenbasis.
pub fn build_basis(
    box_spec: BoxSpec,
    constants: PhysicalConstants,
    truncation: Truncation,
    quad: &QuadratureSpec,
) -> Result<BasisSet> {
    box_spec.validate()?;
    if truncation.n_max == 0 {
        return Err(Error::invalid("basis", "n_max must be >= 1"));
    }
    if truncation.m_min > truncation.m_max {
        return Err(Error::invalid(
            "basis",
            format!("m_min {} exceeds m_max {}", truncation.m_min, truncation.m_max),
        ));
    }
    let size = box_spec.reference_size;
    let energy_scale = constants.hbar * constants.hbar / (2.0 * constants.mu * size * size);
    let mut modes = Vec::new();
    let truncation = match box_spec.shape {
        Shape::Segment => {
            if truncation.m_min != 0 || truncation.m_max != 0 {
                log::warn!("segment basis has m = 0 only; ignoring m range");
            }
            let truncation = Truncation::new(0, 0, truncation.n_max);
            let norm = (2.0 / size).sqrt();
            for n in 1..=truncation.n_max {
                let zero = n as f64 * PI;
                modes.push(Mode {
                    index: ModeIndex::new(0, n),
                    zero,
                    wavenumber: zero / size,
                    energy: energy_scale * zero * zero,
                    normalization: norm,
                });
            }
            truncation
        }
        Shape::Disc => {
            for m in truncation.m_min..=truncation.m_max {
                let order = m.unsigned_abs();
                let zeros = bessel_zeros(order, truncation.n_max)?;
                for (i, &zero) in zeros.iter().enumerate() {
                    let n = i as u32 + 1;
                    modes.push(Mode {
                        index: ModeIndex::new(m, n),
                        zero,
                        wavenumber: zero / size,
                        energy: energy_scale * zero * zero,
                        normalization: disc_normalization(size, order, n, zero, quad)?,
                    });
                }
            }
            truncation
        }
    };
    Ok(BasisSet {
        box_spec,
        constants,
        modes,
        truncation,
    })
}

/// A point of the static domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Polar { r: f64, theta: f64 },
    Line { x: f64 },
}

/// Complex amplitude of `mode` at `point`.
pub fn eval_mode(box_spec: &BoxSpec, mode: &Mode, point: Point) -> Result<Complex64> {
    let size = box_spec.reference_size;
    let slack = 1e-12 * size;
    match (box_spec.shape, point) {
        (Shape::Disc, Point::Polar { r, theta }) => {
            if !(r >= 0.0 && r <= size + slack) || !theta.is_finite() {
                return Err(Error::OutsideDomain {
                    module: "basis",
                    point: format!("(r={r}, θ={theta})"),
                });
            }
            let radial = mode.normalization
                * bessel_j(mode.index.m.unsigned_abs(), mode.wavenumber * r)
                / (2.0 * PI).sqrt();
            Ok(Complex64::from_polar(radial, mode.index.m as f64 * theta))
        }
        (Shape::Segment, Point::Line { x }) => {
            if !(x.abs() <= 0.5 * size + slack) {
                return Err(Error::OutsideDomain {
                    module: "basis",
                    point: format!("(x={x})"),
                });
            }
            let v = mode.normalization * (mode.wavenumber * (x + 0.5 * size)).sin();
            Ok(Complex64::new(v, 0.0))
        }
        (shape, point) => Err(Error::invalid(
            "basis",
            format!("point {point:?} does not match a {shape:?} domain"),
        )),
    }
}
