//! On-disk formats: binary state snapshots and diagnostics CSV.
//!
//! Snapshot layout (all fields little-endian):
//!
//! ```text
//! u64  manifold kind (0 = circle, 1 = 2-torus, 2 = line segment)
//! u64  ndim
//! u64  N_d                  × ndim
//! f64  extent_d             × ndim
//! f64  time
//! f64  re, f64 im           × ∏ N_d   (row-major grid order)
//! ```
//!
//! The metric is run configuration, not state data, so it is not stored;
//! [`read_snapshot`] reconstructs the grid with the unit metric.
//!
//! Diagnostics CSV: header
//! `time,norm,min_rho,ehrenfest_max,fp_residual,boundary_mass[,q_*…][,p_*…][,ehr_*…]`
//! and one row per record, all floats printed at full precision so identical
//! runs produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{DiagnosticsRecord, Probe, ProbeKind};
use crate::manifold::{Grid, ManifoldError, ManifoldKind, ManifoldSpec};
use crate::state::{StateError, WaveFunction};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    State(#[from] StateError),
}

fn kind_code(kind: ManifoldKind) -> u64 {
    match kind {
        ManifoldKind::Circle => 0,
        ManifoldKind::Torus2 => 1,
        ManifoldKind::LineSegment => 2,
    }
}

fn kind_from_code(code: u64) -> Result<ManifoldKind, IoError> {
    match code {
        0 => Ok(ManifoldKind::Circle),
        1 => Ok(ManifoldKind::Torus2),
        2 => Ok(ManifoldKind::LineSegment),
        other => Err(IoError::Format(format!("unknown manifold kind code {other}"))),
    }
}

/// Serialize one state snapshot.
pub fn write_snapshot(path: &Path, psi: &WaveFunction, time: f64) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot_to(&mut w, psi, time)
}

pub fn write_snapshot_to(
    w: &mut impl Write,
    psi: &WaveFunction,
    time: f64,
) -> Result<(), IoError> {
    let grid = psi.grid();
    w.write_all(&kind_code(grid.kind()).to_le_bytes())?;
    w.write_all(&(grid.ndim() as u64).to_le_bytes())?;
    for &n in grid.shape() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &l in grid.spec().extents() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&time.to_le_bytes())?;
    for v in psi.data() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

/// Read a snapshot back; the grid is reconstructed with the unit metric.
pub fn read_snapshot(path: &Path) -> Result<(f64, WaveFunction), IoError> {
    let mut r = BufReader::new(File::open(path)?);
    read_snapshot_from(&mut r)
}

pub fn read_snapshot_from(r: &mut impl Read) -> Result<(f64, WaveFunction), IoError> {
    let mut u = [0u8; 8];
    let mut read_u64 = |r: &mut dyn Read| -> Result<u64, IoError> {
        r.read_exact(&mut u)?;
        Ok(u64::from_le_bytes(u))
    };
    let kind = kind_from_code(read_u64(r)?)?;
    let ndim = read_u64(r)? as usize;
    if ndim != kind.ndim() {
        return Err(IoError::Format(format!(
            "kind {kind:?} expects {} dims, header says {ndim}",
            kind.ndim()
        )));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u64(r)? as usize);
    }
    let mut f = [0u8; 8];
    let mut read_f64 = |r: &mut dyn Read| -> Result<f64, IoError> {
        r.read_exact(&mut f)?;
        Ok(f64::from_le_bytes(f))
    };
    let mut extents = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        extents.push(read_f64(r)?);
    }
    let time = read_f64(r)?;
    let spec = ManifoldSpec::new(kind, extents, vec![1.0; ndim])?;
    let grid = Grid::new(spec, shape)?;
    let mut data = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        data.push(Complex64::new(re, im));
    }
    Ok((time, WaveFunction::new(grid, data)?))
}

/// Column names for a probe set, in CSV order.
pub fn diagnostics_columns(probes: &[Probe]) -> Vec<String> {
    let mut cols = vec![
        "time".to_string(),
        "norm".to_string(),
        "min_rho".to_string(),
        "ehrenfest_max".to_string(),
        "fp_residual".to_string(),
        "boundary_mass".to_string(),
    ];
    for p in probes {
        match p.kind {
            ProbeKind::Position(_) => cols.push(format!("q_{}", p.name)),
            ProbeKind::Momentum(_) => cols.push(format!("p_{}", p.name)),
        }
    }
    for p in probes {
        if matches!(p.kind, ProbeKind::Position(_)) {
            cols.push(format!("ehr_{}", p.name));
        }
    }
    cols
}

/// Write the diagnostics table; fixed full-precision float formatting keeps
/// repeated runs byte-identical.
pub fn write_diagnostics_csv(
    w: &mut impl Write,
    records: &[DiagnosticsRecord],
    probes: &[Probe],
) -> Result<(), IoError> {
    writeln!(w, "{}", diagnostics_columns(probes).join(","))?;
    let fmt = |v: f64| format!("{v:.17e}");
    for rec in records {
        let mut fields = vec![
            fmt(rec.time),
            fmt(rec.norm),
            fmt(rec.min_rho),
            fmt(rec.ehrenfest_max),
            fmt(rec.fp_residual),
            fmt(rec.boundary_mass),
        ];
        for (i, p) in probes.iter().enumerate() {
            match p.kind {
                ProbeKind::Position(_) => fields.push(fmt(rec.q_expect[i])),
                ProbeKind::Momentum(_) => fields.push(fmt(rec.p_expect[i])),
            }
        }
        let mut k = 0usize;
        for p in probes {
            if matches!(p.kind, ProbeKind::Position(_)) {
                fields.push(fmt(*rec.ehrenfest.get(k).unwrap_or(&0.0)));
                k += 1;
            }
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn snapshot_round_trip_preserves_bits() {
        let spec = ManifoldSpec::torus2(TAU, 2.0 * TAU).unwrap();
        let grid = Grid::new(spec, vec![8, 16]).unwrap();
        let psi = WaveFunction::from_fn(&grid, |x| {
            Complex64::new(x[0].cos() + 0.1, (x[1] * 2.0).sin())
        })
        .unwrap();
        let time = 0.625;
        let mut buf = Vec::new();
        write_snapshot_to(&mut buf, &psi, time).unwrap();
        let (t, back) = read_snapshot_from(&mut buf.as_slice()).unwrap();
        assert_eq!(t, time);
        assert_eq!(back.grid().shape(), psi.grid().shape());
        assert_eq!(back.grid().spec().extents(), psi.grid().spec().extents());
        assert_eq!(back.data(), psi.data());
    }

    #[test]
    fn snapshot_header_layout() {
        let grid = Grid::new(ManifoldSpec::circle(TAU).unwrap(), vec![4]).unwrap();
        let psi = WaveFunction::plane_wave(&grid, &[1]).unwrap();
        let mut buf = Vec::new();
        write_snapshot_to(&mut buf, &psi, 1.5).unwrap();
        // kind=0, ndim=1, n=4, extent=2π, time=1.5, then 4 complex samples.
        assert_eq!(buf.len(), 8 * (1 + 1 + 1 + 1 + 1) + 16 * 4);
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 0);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), TAU);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 1.5);
    }

    #[test]
    fn rejects_unknown_kind() {
        let mut bytes = vec![0u8; 16];
        bytes[0] = 9;
        assert!(matches!(
            read_snapshot_from(&mut bytes.as_slice()),
            Err(IoError::Format(_))
        ));
    }

    #[test]
    fn diagnostics_csv_shape() {
        use crate::trig::TrigPoly;
        let probes = vec![
            Probe {
                name: "sin".into(),
                kind: ProbeKind::Position(TrigPoly::axis_harmonic(
                    &[TAU],
                    0,
                    crate::trig::Harmonic::Sin(1),
                    1.0,
                )),
            },
            Probe {
                name: "k".into(),
                kind: ProbeKind::Momentum(crate::kinematics::VectorFieldSpec::axis(&[TAU], 0)),
            },
        ];
        let rec = DiagnosticsRecord {
            time: 0.0,
            norm: 1.0,
            min_rho: 0.1,
            ehrenfest_max: 0.0,
            fp_residual: 0.0,
            boundary_mass: 0.0,
            q_expect: vec![0.5, 0.0],
            p_expect: vec![0.0, 1.3],
            ehrenfest: vec![0.0],
        };
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &[rec], &probes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time,norm,min_rho,ehrenfest_max,fp_residual,boundary_mass,q_sin,p_k,ehr_sin"
        );
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 9);
        assert!(lines.next().is_none());
    }
}
