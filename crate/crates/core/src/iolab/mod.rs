//! Run configuration, presets, reports, and comparison drivers.

pub mod compare;
pub mod config;
pub mod contraction;
pub mod presets;
pub mod run;
pub mod sampling;

use std::path::Path;

pub use compare::{compare, DistanceSample, RunHandle};
pub use config::{Expectations, InitialSpec, RunConfig, Scheme, OUTPUT_ROOT_ENV};
pub use contraction::{contraction_test, ContractionParams, ContractionReport};
pub use run::{run, run_in, Check, RunOutput, RunReport};

use crate::error::{Error, Result};

/// Runs a named preset into `dir`, or into its default output directory.
pub fn run_preset(name: &str, dir: Option<&Path>) -> Result<RunOutput> {
    let preset = presets::find(name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{name}`")))?;
    let mut cfg = (preset.config)();
    let dir = dir.map_or_else(|| cfg.resolved_output_dir(), Path::to_path_buf);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (file, contents) in presets::support_files(name) {
        let path = dir.join(file);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        if let InitialSpec::Atoms { path: p } = &mut cfg.initial {
            if p.as_os_str() == file {
                *p = path.clone();
            }
        }
    }
    run_in(&cfg, &dir)
}
