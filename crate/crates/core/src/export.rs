//! CSV artifacts: 17 significant digits, `.` decimal point, LF endings.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{BasisSet, ModeIndex};
use crate::dynamics::{mean_radius_physical, mean_radius_static, Trajectory};
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;
use crate::resonance::{ScanResult, TransitionTable};

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn write_row<W: Write>(w: &mut W, fields: &[String]) -> Result<()> {
    w.write_all(fields.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_basis<W: Write>(w: &mut W, basis: &BasisSet) -> Result<()> {
    writeln!(w, "m,n,zero,wavenumber,energy,normalization")?;
    for mode in &basis.modes {
        write_row(
            w,
            &[
                mode.index.m.to_string(),
                mode.index.n.to_string(),
                fmt_f64(mode.zero),
                fmt_f64(mode.wavenumber),
                fmt_f64(mode.energy),
                fmt_f64(mode.normalization),
            ],
        )?;
    }
    Ok(())
}

/// Dense matrix, one row per line as `re,im` pairs; no header.
pub fn write_matrix<W: Write>(w: &mut W, op: &OperatorMatrix) -> Result<()> {
    let dense = op.to_dense();
    for i in 0..dense.nrows() {
        let fields: Vec<String> = (0..dense.ncols())
            .flat_map(|j| [fmt_f64(dense[(i, j)].re), fmt_f64(dense[(i, j)].im)])
            .collect();
        write_row(w, &fields)?;
    }
    Ok(())
}

/// Reads back the output of [`write_matrix`].
pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<Complex64>> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedCsv { line: k + 1, detail: e.to_string() })?;
        if values.len() % 2 != 0 {
            return Err(Error::MalformedCsv { line: k + 1, detail: "odd number of fields".into() });
        }
        rows.push(values.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    let n = rows.len();
    if let Some(k) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::MalformedCsv {
            line: k + 1,
            detail: format!("expected {n} entries for a square matrix, found {}", rows[k].len()),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `t,norm,lambda,P_m_n...` plus `r_mean_static,r_mean_physical` when the
/// position matrix is given. Times are in the trajectory's reporting unit.
pub fn write_trajectory<W: Write>(
    w: &mut W,
    traj: &Trajectory,
    basis: &BasisSet,
    tracked: &[ModeIndex],
    position: Option<&OperatorMatrix>,
) -> Result<()> {
    let columns = tracked
        .iter()
        .map(|&idx| basis.require(idx))
        .collect::<Result<Vec<_>>>()?;
    let states = traj.states.as_ref().ok_or(Error::MissingStates("trajectory export"))?;
    let radii = match position {
        Some(r) => Some((mean_radius_static(traj, r)?, mean_radius_physical(traj, r)?)),
        None => None,
    };

    let mut header = vec!["t".to_string(), "norm".into(), "lambda".into()];
    header.extend(tracked.iter().map(|i| format!("P_{}_{}", i.m, i.n)));
    if radii.is_some() {
        header.extend(["r_mean_static".to_string(), "r_mean_physical".into()]);
    }
    write_row(w, &header)?;

    for (k, state) in states.iter().enumerate() {
        let mut row = vec![
            fmt_f64(traj.times[k] / traj.time_unit),
            fmt_f64(traj.norms[k]),
            fmt_f64(traj.lambdas[k]),
        ];
        row.extend(columns.iter().map(|&c| fmt_f64(state.coeffs[c].norm_sqr())));
        if let Some((stat, phys)) = &radii {
            row.push(fmt_f64(stat[k]));
            row.push(fmt_f64(phys[k]));
        }
        write_row(w, &row)?;
    }
    Ok(())
}

pub fn write_spectrum<W: Write>(w: &mut W, table: &TransitionTable) -> Result<()> {
    writeln!(w, "from_m,from_n,to_m,to_n,omega,coupling")?;
    for t in &table.entries {
        write_row(
            w,
            &[
                t.from.m.to_string(),
                t.from.n.to_string(),
                t.to.m.to_string(),
                t.to.n.to_string(),
                fmt_f64(t.omega),
                fmt_f64(t.coupling),
            ],
        )?;
    }
    Ok(())
}

pub fn write_scan<W: Write>(w: &mut W, scan: &ScanResult) -> Result<()> {
    writeln!(w, "omega,metric_final,metric_max")?;
    for k in 0..scan.omegas.len() {
        write_row(
            w,
            &[fmt_f64(scan.omegas[k]), fmt_f64(scan.metric_final[k]), fmt_f64(scan.metric_max[k])],
        )?;
    }
    Ok(())
}

/// Peak list, tallest first, each with the nearest reachable transition.
pub fn write_peaks<W: Write>(w: &mut W, scan: &ScanResult, reachable: &[f64]) -> Result<()> {
    writeln!(w, "# peaks detected on metric_max, tallest first")?;
    writeln!(w, "# omega height grid_index nearest_transition")?;
    for p in &scan.peaks {
        let nearest = reachable
            .iter()
            .copied()
            .min_by(|a, b| (a - p.omega).abs().total_cmp(&(b - p.omega).abs()))
            .map(fmt_f64)
            .unwrap_or_else(|| "none".into());
        writeln!(w, "{} {} {} {}", fmt_f64(p.omega), fmt_f64(p.height), p.index, nearest)?;
    }
    for f in &scan.failures {
        writeln!(w, "# failed omega={} index={}: {}", fmt_f64(f.omega), f.index, f.message)?;
    }
    Ok(())
}
