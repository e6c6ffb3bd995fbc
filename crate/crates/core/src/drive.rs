//! Wall motion `λ(t) = 1 + ε f(t)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// `f` sampled on `t_k = k * step`, `k = 0..len`. Between samples `f` is the
/// cubic Hermite interpolant whose nodal slopes are centred differences
/// (second-order one-sided at the ends).
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    step: f64,
    samples: Vec<f64>,
    slopes: Vec<f64>,
}

impl Tabulated {
    pub fn new(step: f64, samples: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("drive", "tabulation step must be positive"));
        }
        if samples.len() < 3 {
            return Err(Error::invalid("drive", "tabulated waveform needs at least 3 samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("drive", "tabulated waveform has non-finite samples"));
        }
        let n = samples.len();
        let mut slopes = vec![0.0; n];
        slopes[0] = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * step);
        slopes[n - 1] = (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * step);
        for k in 1..n - 1 {
            slopes[k] = (samples[k + 1] - samples[k - 1]) / (2.0 * step);
        }
        Ok(Tabulated {
            step,
            samples,
            slopes,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn end(&self) -> f64 {
        self.step * (self.samples.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let end = self.end();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange { t, start: 0.0, end });
        }
        let k = ((t / self.step).floor() as usize).min(self.samples.len() - 2);
        Ok((k, (t - k as f64 * self.step) / self.step))
    }

    fn value(&self, t: f64) -> Result<(f64, f64)> {
        let (k, u) = self.locate(t)?;
        let h = self.step;
        let (p0, p1) = (self.samples[k], self.samples[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let value = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1;
        let deriv = ((6.0 * u2 - 6.0 * u) * p0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * p1
            + (3.0 * u2 - 2.0 * u) * m1)
            / h;
        Ok((value, deriv))
    }

    /// Gauss nodes exact for the piecewise cubic (and accurate for its
    /// product with slowly varying phases) over `[a, b]`.
    fn for_each_node(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let rule = gauss_legendre(8);
        let mut lo = a;
        while lo < b {
            let k = (lo / self.step).floor();
            let mut hi = ((k + 1.0) * self.step).min(b);
            if hi <= lo {
                hi = ((k + 2.0) * self.step).min(b);
            }
            for (x, w) in rule.mapped(lo, hi) {
                visit(x, w);
            }
            lo = hi;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    /// `f(t) = sin(ωt + φ)`.
    Sinusoid { omega: f64, phase: f64 },
    Tabulated(Tabulated),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveProfile {
    pub epsilon: f64,
    pub waveform: Waveform,
}

/// `∫_a^b e^{iκu} du`, stable as `κ → 0`.
fn phase_integral(kappa: f64, a: f64, b: f64) -> Complex64 {
    let half = 0.5 * kappa * (b - a);
    let sinc = if half.abs() < 1e-8 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    Complex64::from_polar((b - a) * sinc, 0.5 * kappa * (a + b))
}

impl DriveProfile {
    pub fn new(epsilon: f64, waveform: Waveform) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("drive", format!("epsilon must be >= 0 (got {epsilon})")));
        }
        let peak = match &waveform {
            Waveform::Sinusoid { omega, phase } => {
                if !(*omega > 0.0 && omega.is_finite()) || !phase.is_finite() {
                    return Err(Error::invalid(
                        "drive",
                        format!("sinusoid needs a positive finite omega (got {omega})"),
                    ));
                }
                1.0
            }
            Waveform::Tabulated(tab) => tab.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        };
        if epsilon * peak >= 1.0 {
            return Err(Error::invalid(
                "drive",
                format!("lambda = 1 + eps f reaches zero (eps * max|f| = {})", epsilon * peak),
            ));
        }
        Ok(DriveProfile { epsilon, waveform })
    }

    pub fn sinusoid(epsilon: f64, omega: f64) -> Result<Self> {
        DriveProfile::new(epsilon, Waveform::Sinusoid { omega, phase: 0.0 })
    }

    /// `2π/ω` for a sinusoid.
    pub fn period(&self) -> Option<f64> {
        match self.waveform {
            Waveform::Sinusoid { omega, .. } => Some(2.0 * PI / omega),
            Waveform::Tabulated(_) => None,
        }
    }

    /// Unit in which horizons and reported times are expressed: the period
    /// of a sinusoid, plain time otherwise.
    pub fn time_unit(&self) -> f64 {
        self.period().unwrap_or(1.0)
    }

    /// `(f(t), ḟ(t))`.
    pub fn shape(&self, t: f64) -> Result<(f64, f64)> {
        match &self.waveform {
            Waveform::Sinusoid { omega, phase } => {
                let arg = omega * t + phase;
                Ok((arg.sin(), omega * arg.cos()))
            }
            Waveform::Tabulated(tab) => tab.value(t),
        }
    }

    /// `(λ(t), λ̇(t))`.
    pub fn lambda(&self, t: f64) -> Result<(f64, f64)> {
        let (f, fdot) = self.shape(t)?;
        Ok((1.0 + self.epsilon * f, self.epsilon * fdot))
    }

    /// `∫₀ᵗ f(s) ds`.
    pub fn shape_integral(&self, t: f64) -> Result<f64> {
        match &self.waveform {
            Waveform::Sinusoid { omega, phase } => Ok((phase.cos() - (omega * t + phase).cos()) / omega),
            Waveform::Tabulated(tab) => {
                tab.locate(t)?;
                let mut acc = 0.0;
                tab.for_each_node(0.0, t, |x, w| {
                    acc += w * tab.value(x).map(|v| v.0).unwrap_or(0.0);
                });
                Ok(acc)
            }
        }
    }

    /// First-order phase clock `Θ(t) = ∫₀ᵗ (1 - 2εf) ds`.
    pub fn first_order_clock(&self, t: f64) -> Result<f64> {
        Ok(t - 2.0 * self.epsilon * self.shape_integral(t)?)
    }

    /// `∫_a^b ḟ(u) e^{iωu} du`.
    pub fn velocity_spectrum_between(&self, a: f64, b: f64, omega: f64) -> Result<Complex64> {
        match &self.waveform {
            Waveform::Sinusoid { omega: w0, phase } => {
                let up = Complex64::from_polar(1.0, *phase) * phase_integral(omega + w0, a, b);
                let down = Complex64::from_polar(1.0, -phase) * phase_integral(omega - w0, a, b);
                Ok((up + down) * (0.5 * w0))
            }
            Waveform::Tabulated(tab) => {
                tab.locate(a)?;
                tab.locate(b)?;
                let mut acc = Complex64::new(0.0, 0.0);
                let mut err = None;
                tab.for_each_node(a, b, |x, w| match tab.value(x) {
                    Ok((_, d)) => acc += Complex64::from_polar(w * d, omega * x),
                    Err(e) => err = Some(e),
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(acc),
                }
            }
        }
    }

    /// `∫₀ᵗ ḟ(u) e^{iωu} du`.
    pub fn velocity_spectrum(&self, t: f64, omega: f64) -> Result<Complex64> {
        self.velocity_spectrum_between(0.0, t, omega)
    }
}
