//! Density snapshots: a CSV matrix (one row per `j`, one column per `i`)
//! plus a JSON sidecar with the grid and diagnostics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::fmt_f64;
use crate::scalar::Real;

use super::{FvDiagnostics, FvState, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
    pub mass: f64,
    pub com: [f64; 2],
    pub m2: f64,
    pub energy: f64,
    /// Matrix file, relative to the sidecar.
    pub matrix: String,
}

impl SnapshotMeta {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            dy: self.dy,
            origin: self.origin,
        }
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_snapshot<T: Real>(dir: &Path, stem: &str, s: &FvState<T>, d: &FvDiagnostics) -> Result<SnapshotMeta> {
    let g = GridSpec::from_grid(&s.grid);
    let matrix = format!("{stem}.csv");
    let path = dir.join(&matrix);
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)?;
    for j in 0..g.ny {
        wtr.write_record((0..g.nx).map(|i| fmt_f64(s.at(i, j).to_f64_lossy())))?;
    }
    wtr.flush().map_err(|e| Error::io(&path, e))?;
    let meta = SnapshotMeta {
        t: s.time.to_f64_lossy(),
        nx: g.nx,
        ny: g.ny,
        dx: g.dx,
        dy: g.dy,
        origin: g.origin,
        mass: d.mass,
        com: d.com,
        m2: d.m2,
        energy: d.energy,
        matrix,
    };
    let side = dir.join(format!("{stem}.json"));
    std::fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(meta)
}

/// Reads a snapshot back from its sidecar path.
pub fn read_snapshot<T: Real>(sidecar: &Path) -> Result<(SnapshotMeta, FvState<T>)> {
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let meta: SnapshotMeta = serde_json::from_str(&text)?;
    let grid = meta.grid().build::<T>()?;
    let path = sidecar.parent().unwrap_or(Path::new(".")).join(&meta.matrix);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(&path)?;
    let mut rho = Vec::with_capacity(grid.len());
    for record in rdr.records() {
        let record = record?;
        if record.len() != grid.nx {
            return Err(Error::GridMismatch(format!(
                "snapshot row has {} values, expected {}",
                record.len(),
                grid.nx
            )));
        }
        for v in record.iter() {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{v}` in snapshot")))?;
            rho.push(T::lit(x));
        }
    }
    // stored values may carry -1e-16 rounding; clamp before validation
    for r in &mut rho {
        if *r < T::zero() {
            *r = T::zero();
        }
    }
    let mut s = FvState::from_density(grid, rho)?;
    s.time = T::lit(meta.t);
    Ok((meta, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv2d::{fv_diagnostics, init_cells, AnalyticDensity, Grid2D, InitialDensity};
    use crate::potentials::Potential;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::<f64>::new(7, 5, 0.2, 0.25, [-0.3, -0.1]).unwrap();
        let d = AnalyticDensity::UniformBox { lo: [0.0, 0.0], hi: [0.7, 0.5] };
        let s = init_cells(&InitialDensity::Analytic(d), &grid).unwrap();
        let diag = fv_diagnostics(&s, &Potential::absolute_value());
        let meta = write_snapshot(dir.path(), "rho_00000", &s, &diag).unwrap();
        let (back_meta, back) = read_snapshot::<f64>(&dir.path().join("rho_00000.json")).unwrap();
        assert_eq!(meta, back_meta);
        assert_eq!(back.rho, s.rho);
        assert!(back.grid.same_as(&s.grid));
        let text = std::fs::read_to_string(dir.path().join("rho_00000.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 7);
    }
}
