//! Cylindrical Bessel functions of the first kind and their positive zeros.
//!
//! `J_m(x)` is evaluated with the ascending power series for small
//! arguments and Miller's backward recurrence (normalized by
//! `J_0 + 2 Σ J_2k = 1`) elsewhere. Both routes hold an absolute error
//! around 1e-15 for integer orders up to a few tens and `x` up to a few
//! hundred.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest order accepted by [`bessel_zero`].
pub const M_MAX_SUPPORTED: u32 = 20;
/// Largest zero index accepted by [`bessel_zero`].
pub const N_MAX_SUPPORTED: u32 = 60;

/// Below this argument the power series is summed directly. The largest
/// series term there is ~1e2, so cancellation costs about two digits.
const SERIES_LIMIT: f64 = 8.0;

const RESCALE_AT: f64 = 1e250;

/// Residual accepted for a refined zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// `J_m(x)` for integer order `m`.
pub fn bessel_j(m: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(m, -x);
        return if m.is_multiple_of(2) { v } else { -v };
    }
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT {
        series(m, x)
    } else {
        miller(m as usize, x)[m as usize]
    }
}

/// `J_0(x) ..= J_max_order(x)` in one pass.
pub fn bessel_j_orders(max_order: u32, x: f64) -> Vec<f64> {
    let top = max_order as usize;
    if x < 0.0 {
        let mut v = bessel_j_orders(max_order, -x);
        for (k, val) in v.iter_mut().enumerate() {
            if k % 2 == 1 {
                *val = -*val;
            }
        }
        return v;
    }
    if x == 0.0 {
        let mut v = vec![0.0; top + 1];
        v[0] = 1.0;
        return v;
    }
    if x <= SERIES_LIMIT {
        (0..=max_order).map(|m| series(m, x)).collect()
    } else {
        let mut v = miller(top, x);
        v.truncate(top + 1);
        v
    }
}

/// `dJ_m/dx` from `J_m' = (J_{m-1} - J_{m+1}) / 2`, with `J_0' = -J_1`.
pub fn bessel_j_prime(m: u32, x: f64) -> f64 {
    let j = bessel_j_orders(m + 1, x);
    derivative_from_orders(&j, m)
}

/// Derivative of `J_m` given a slice holding at least `J_0 ..= J_{m+1}`.
pub(crate) fn derivative_from_orders(j: &[f64], m: u32) -> f64 {
    let m = m as usize;
    if m == 0 {
        -j[1]
    } else {
        0.5 * (j[m - 1] - j[m + 1])
    }
}

fn series(m: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = 1.0;
    for k in 1..=m {
        term *= half / k as f64;
    }
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (k + m as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && k > half {
            break;
        }
    }
    sum
}

/// Backward recurrence from an order well above both `top` and `x`;
/// returns `J_0 ..= J_top` (possibly longer).
fn miller(top: usize, x: f64) -> Vec<f64> {
    let span = (top as f64).max(x);
    let mut start = (span + 40.0 + 10.0 * x.cbrt()).ceil() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut out = vec![0.0; top + 1];
    let two_over_x = 2.0 / x;
    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut norm = 0.0_f64;
    for k in (0..=start).rev() {
        if k <= top {
            out[k] = current;
        }
        if k % 2 == 0 {
            norm += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        if current.abs() > RESCALE_AT {
            let s = 1.0 / RESCALE_AT;
            current *= s;
            above *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
    out
}

/// McMahon's large-zero expansion for the `n`-th zero of `J_m`.
pub fn mcmahon_guess(m: u32, n: u32) -> f64 {
    let mu = 4.0 * (m as f64).powi(2);
    let beta = (n as f64 + 0.5 * m as f64 - 0.25) * PI;
    let b8 = 8.0 * beta;
    beta - (mu - 1.0) / b8
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3))
        - 32.0 * (mu - 1.0) * (83.0 * mu * mu - 982.0 * mu + 3779.0) / (15.0 * b8.powi(5))
}

/// The first `count` positive zeros of `J_m`, ascending.
///
/// Zeros are bracketed by a sign-change scan (consecutive zeros of `J_m`
/// are further apart than the scan step), then refined by Newton steps
/// started from the McMahon guess and safeguarded by bisection.
pub fn bessel_zeros(m: u32, count: u32) -> Result<Vec<f64>> {
    if m > M_MAX_SUPPORTED || count > N_MAX_SUPPORTED {
        return Err(Error::invalid(
            "special",
            format!(
                "bessel zero request (m={m}, n<={count}) beyond supported range \
                 m<={M_MAX_SUPPORTED}, n<={N_MAX_SUPPORTED}"
            ),
        ));
    }
    const STEP: f64 = 0.25;
    let mut zeros = Vec::with_capacity(count as usize);
    // J_m has no positive zero below x = m.
    let mut lo = m as f64;
    let mut f_lo = bessel_j(m, lo);
    while (zeros.len() as u32) < count {
        let hi = lo + STEP;
        let f_hi = bessel_j(m, hi);
        if f_hi == 0.0 {
            zeros.push(hi);
            lo = hi + 1e-9;
            f_lo = bessel_j(m, lo);
            continue;
        }
        if f_lo.signum() != f_hi.signum() {
            let n = zeros.len() as u32 + 1;
            zeros.push(refine_zero(m, n, lo, hi, f_lo)?);
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(zeros)
}

/// The `n`-th positive zero `a_{mn}` of `J_m` (`n >= 1`).
pub fn bessel_zero(m: u32, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("special", "zero index n must be >= 1"));
    }
    Ok(*bessel_zeros(m, n)?.last().expect("n >= 1 zeros"))
}

fn refine_zero(m: u32, n: u32, mut lo: f64, mut hi: f64, f_lo: f64) -> Result<f64> {
    let sign_lo = f_lo.signum();
    let guess = mcmahon_guess(m, n);
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let j = bessel_j_orders(m + 1, x);
        let f = j[m as usize];
        if f == 0.0 {
            return Ok(x);
        }
        if f.signum() == sign_lo {
            lo = x;
        } else {
            hi = x;
        }
        let slope = derivative_from_orders(&j, m);
        let newton = x - f / slope;
        let next = if slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let converged = (next - x).abs() <= 4.0 * f64::EPSILON * x;
        x = next;
        if converged || hi - lo <= 4.0 * f64::EPSILON * x {
            break;
        }
    }
    let residual = bessel_j(m, x).abs();
    if residual > ZERO_TOLERANCE {
        return Err(Error::NonConvergence {
            module: "special",
            what: format!("zero a_{{{m},{n}}}"),
            detail: format!("bracket [{lo}, {hi}], |J_m(x)| = {residual:e} at x = {x}"),
        });
    }
    Ok(x)
}
