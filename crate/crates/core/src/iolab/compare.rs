use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot;

use super::run::{snapshot_measure, RunReport, SnapshotEntry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    pub t: f64,
    pub distance: f64,
}

/// A finished run on disk: its directory and parsed report.
#[derive(Debug, Clone)]
pub struct RunHandle {
    pub dir: PathBuf,
    pub report: RunReport,
}

impl RunHandle {
    /// Accepts either a run directory or the path of its `report.json`.
    pub fn open(path: &Path) -> Result<Self> {
        let (dir, file) = if path.is_dir() {
            (path.to_path_buf(), path.join("report.json"))
        } else {
            (path.parent().unwrap_or(Path::new(".")).to_path_buf(), path.to_path_buf())
        };
        Ok(RunHandle {
            report: RunReport::load(&file)?,
            dir,
        })
    }

    /// Snapshot within half a time step of `t`.
    fn nearest(&self, t: f64) -> Result<&SnapshotEntry> {
        let best = self
            .report
            .snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap())
            .ok_or_else(|| Error::Incompatible(format!("run {} has no snapshots", self.dir.display())))?;
        let tol = 0.5 * self.report.dt * (1.0 + 1e-9);
        if (best.t - t).abs() > tol {
            return Err(Error::Incompatible(format!(
                "run {} has no snapshot within {tol:e} of t = {t} (nearest {})",
                self.dir.display(),
                best.t
            )));
        }
        Ok(best)
    }
}

/// `d_W(a(t), b(t))` at each requested time; an empty list means every
/// snapshot time of `a`.
pub fn compare(a: &RunHandle, b: &RunHandle, times: &[f64]) -> Result<Vec<DistanceSample>> {
    if (a.report.t_end - b.report.t_end).abs() > 1e-12 * a.report.t_end.abs().max(1.0) {
        return Err(Error::Incompatible(format!(
            "runs end at different times ({} and {})",
            a.report.t_end, b.report.t_end
        )));
    }
    let times: Vec<f64> = if times.is_empty() {
        a.report.snapshots.iter().map(|s| s.t).collect()
    } else {
        times.to_vec()
    };
    times
        .iter()
        .map(|&t| {
            let mu = snapshot_measure(&a.dir, a.report.scheme, a.nearest(t)?)?.normalized()?;
            let nu = snapshot_measure(&b.dir, b.report.scheme, b.nearest(t)?)?.normalized()?;
            Ok(DistanceSample {
                t,
                distance: ot::distance(&mu, &nu)?,
            })
        })
        .collect()
}

/// `t,distance` CSV.
pub fn write_distances(path: &Path, rows: &[DistanceSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["t", "distance"])?;
    for r in rows {
        wtr.write_record([crate::measure::fmt_f64(r.t), crate::measure::fmt_f64(r.distance)])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}
