//! Matrices of the dilation potential and the position operator over a
//! truncated basis.
//!
//! Both operators act on the radial coordinate only, so they are stored as
//! dense blocks per angular quantum number. Entries between different `m`
//! are never computed: they are zero by construction.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{BasisSet, Mode, ModeIndex, Shape};
use crate::error::{Error, Result};
use crate::quadrature::{GaussRule, QuadratureSpec};
use crate::special::{bessel_j_orders, derivative_from_orders};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `V = iħ(1 + r∂ᵣ)` on the disc, `iħ(½ + x∂ₓ)` on the segment.
    Dilation,
    /// `r` on the disc, `|x|` on the segment.
    Position,
    /// Any Hermitian operator assembled elsewhere (e.g. `H_eff(t)`).
    Hamiltonian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBlock {
    pub m: i32,
    pub range: Range<usize>,
    pub entries: DMatrix<Complex64>,
}

/// Hermitian operator that is block diagonal in `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub dim: usize,
    pub blocks: Vec<OperatorBlock>,
}

impl OperatorMatrix {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        for b in &self.blocks {
            if b.range.contains(&row) {
                if b.range.contains(&col) {
                    return b.entries[(row - b.range.start, col - b.range.start)];
                }
                break;
            }
        }
        Complex64::new(0.0, 0.0)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            out.view_mut((b.range.start, b.range.start), (b.range.len(), b.range.len()))
                .copy_from(&b.entries);
        }
        out
    }

    /// `max |A - A†|` over the whole matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.to_dense())
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).norm()).fold(0.0, f64::max)
    }

    /// `c† A c`.
    pub fn expectation(&self, coeffs: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in &self.blocks {
            let c = &coeffs[b.range.clone()];
            for (i, ci) in c.iter().enumerate() {
                let mut row = Complex64::new(0.0, 0.0);
                for (j, cj) in c.iter().enumerate() {
                    row += b.entries[(i, j)] * cj;
                }
                acc += ci.conj() * row;
            }
        }
        acc
    }
}

pub fn hermiticity_defect(a: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Mode profile along the dimensionless radial (or axial) coordinate `s`,
/// with `r = r₀ s` on `[0, 1]` or `x = l s` on `[-½, ½]`.
struct Profile {
    shape: Shape,
    order: u32,
    zero: f64,
    /// Normalization in units of `1/size`, i.e. `ℵ r₀` or `√2`.
    scale: f64,
}

impl Profile {
    fn new(shape: Shape, size: f64, mode: &Mode) -> Self {
        let scale = match shape {
            Shape::Disc => mode.normalization * size,
            Shape::Segment => mode.normalization * size.sqrt(),
        };
        Profile {
            shape,
            order: mode.index.m.unsigned_abs(),
            zero: mode.zero,
            scale,
        }
    }

    /// Value and `d/ds` at `s`.
    fn eval(&self, s: f64) -> (f64, f64) {
        match self.shape {
            Shape::Disc => {
                let j = bessel_j_orders(self.order + 1, self.zero * s);
                (
                    self.scale * j[self.order as usize],
                    self.scale * self.zero * derivative_from_orders(&j, self.order),
                )
            }
            Shape::Segment => {
                let phase = self.zero * (s + 0.5);
                (
                    self.scale * phase.sin(),
                    self.scale * self.zero * phase.cos(),
                )
            }
        }
    }
}

/// Which radial integral to form between two profiles.
#[derive(Debug, Clone, Copy)]
enum Integral {
    /// `∫ u_a (c + s d/ds) u_b dμ` with `c = d/2`.
    Dilation,
    /// `∫ u_a |s| u_b dμ`, in units of the box size.
    Position,
}

fn intervals(shape: Shape) -> &'static [(f64, f64)] {
    match shape {
        Shape::Disc => &[(0.0, 1.0)],
        // |x| has a kink at the centre; split there.
        Shape::Segment => &[(-0.5, 0.0), (0.0, 0.5)],
    }
}

fn integrate_pairs(
    shape: Shape,
    profiles: &[Profile],
    pairs: &[(usize, usize)],
    integral: Integral,
    rule: &GaussRule,
) -> Vec<f64> {
    let (constant, measure_is_radial) = match shape {
        Shape::Disc => (1.0, true),
        Shape::Segment => (0.5, false),
    };
    let mut acc = vec![0.0; pairs.len()];
    let mut values = vec![(0.0, 0.0); profiles.len()];
    for &(a, b) in intervals(shape) {
        for (s, w) in rule.mapped(a, b) {
            for (v, p) in values.iter_mut().zip(profiles) {
                *v = p.eval(s);
            }
            let measure = if measure_is_radial { s * w } else { w };
            for (out, &(i, j)) in acc.iter_mut().zip(pairs) {
                let (ui, _) = values[i];
                let (uj, duj) = values[j];
                let integrand = match integral {
                    Integral::Dilation => ui * (constant * uj + s * duj),
                    Integral::Position => ui * uj * s.abs(),
                };
                *out += measure * integrand;
            }
        }
    }
    acc
}

fn block_modes<'a>(basis: &'a BasisSet, range: &Range<usize>) -> &'a [Mode] {
    &basis.modes[range.clone()]
}

fn radial_block(
    basis: &BasisSet,
    range: &Range<usize>,
    integral: Integral,
    quad: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    let shape = basis.box_spec.shape;
    let size = basis.box_spec.reference_size;
    let modes = block_modes(basis, range);
    let profiles: Vec<Profile> = modes.iter().map(|md| Profile::new(shape, size, md)).collect();
    let k = profiles.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let what = format!("{integral:?} block m={}", modes[0].index.m);
    let values = quad.converge(&what, |rule| {
        integrate_pairs(shape, &profiles, &pairs, integral, rule)
    })?;
    let scale = match integral {
        Integral::Dilation => 1.0,
        Integral::Position => size,
    };
    Ok(DMatrix::from_row_iterator(k, k, values.into_iter().map(|v| v * scale)))
}

/// Real radial matrix element
/// `D_{nn'} = ℵ_n ℵ_n' ∫₀^{r₀} J_m(k_n r)(1 + r d/dr)J_m(k_n' r) r dr`
/// (segment: `∫ φ_n (½ + x d/dx) φ_n' dx`).
pub fn radial_dilation_element(
    basis: &BasisSet,
    m: i32,
    n: u32,
    n_prime: u32,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let shape = basis.box_spec.shape;
    let size = basis.box_spec.reference_size;
    let a = basis.modes[basis.require(ModeIndex::new(m, n))?];
    let b = basis.modes[basis.require(ModeIndex::new(m, n_prime))?];
    let profiles = [Profile::new(shape, size, &a), Profile::new(shape, size, &b)];
    let what = format!("dilation element m={m} ({n},{n_prime})");
    let v = quad.converge(&what, |rule| {
        integrate_pairs(shape, &profiles, &[(0, 1)], Integral::Dilation, rule)
    })?;
    Ok(v[0])
}

fn assemble(
    basis: &BasisSet,
    kind: OperatorKind,
    integral: Integral,
    factor: Complex64,
    quad: &QuadratureSpec,
) -> Result<OperatorMatrix> {
    if basis.is_empty() {
        return Err(Error::invalid("operators", "empty basis"));
    }
    let mut blocks = Vec::new();
    // Blocks with equal |m| share radial integrals.
    let mut cache: Vec<(u32, DMatrix<f64>)> = Vec::new();
    for (m, range) in basis.m_blocks() {
        let order = m.unsigned_abs();
        let radial = match cache.iter().find(|(o, _)| *o == order) {
            Some((_, d)) => d.clone(),
            None => {
                let d = radial_block(basis, &range, integral, quad)?;
                cache.push((order, d.clone()));
                d
            }
        };
        blocks.push(OperatorBlock {
            m,
            range,
            entries: radial.map(|v| factor * v),
        });
    }
    Ok(OperatorMatrix {
        kind,
        dim: basis.len(),
        blocks,
    })
}

/// `V_{mn,m'n'} = iħ δ_{mm'} D_{nn'}`.
pub fn dilation_matrix(basis: &BasisSet, quad: &QuadratureSpec) -> Result<OperatorMatrix> {
    let factor = Complex64::new(0.0, basis.constants.hbar);
    assemble(basis, OperatorKind::Dilation, Integral::Dilation, factor, quad)
}

/// The real antisymmetric `D = V / (iħ)`, block by block.
pub fn dilation_radial(v: &OperatorMatrix, hbar: f64) -> Vec<DMatrix<f64>> {
    v.blocks
        .iter()
        .map(|b| b.entries.map(|z| z.im / hbar))
        .collect()
}

/// Matrix of `r` (disc) or `|x|` (segment) in the static domain.
pub fn position_matrix(basis: &BasisSet, quad: &QuadratureSpec) -> Result<OperatorMatrix> {
    assemble(
        basis,
        OperatorKind::Position,
        Integral::Position,
        Complex64::new(1.0, 0.0),
        quad,
    )
}
