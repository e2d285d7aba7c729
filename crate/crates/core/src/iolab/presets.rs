//! Built-in experiments.

use std::path::PathBuf;

use crate::fv2d::{GridSpec, VelocityAssembly};
use crate::potentials::PotentialSpec;

use super::config::{Expectations, InitialSpec, RunConfig, Scheme};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: fn() -> RunConfig,
}

/// 200 × 200 cells of side 0.01 on `[-0.5, 1.5]²`.
fn three_bump_grid() -> GridSpec {
    GridSpec {
        nx: 200,
        ny: 200,
        dx: 0.01,
        dy: 0.01,
        origin: [-0.5, -0.5],
    }
}

fn fv_three_bump(potential: PotentialSpec, t_end: f64, buffer_tol: Option<f64>, name: &str) -> RunConfig {
    RunConfig {
        scheme: Scheme::Fv2d,
        potential,
        initial: InitialSpec::ThreeBump { cx: 100.0 },
        t_end,
        dt: None,
        cfl_safety: Some(0.9),
        snapshot_every: 200,
        merge_radius: None,
        n_atoms: None,
        grid: Some(three_bump_grid()),
        velocity_assembly: Some(VelocityAssembly::Fft),
        buffer_tol,
        output_dir: PathBuf::from("presets").join(name),
        seed: 0,
        expect: Expectations {
            max_rho_growth_min: Some(50.0),
            support_shrink_min: Some(4.0),
            com_drift_max: Some(1e-3),
            ..Default::default()
        },
    }
}

/// Buffer guard at 1e-6: the numerical-viscosity tail reaches the edge of
/// this box near t = 0.1 and peaks around 5e-8 per cell.
fn three_bump_w1() -> RunConfig {
    fv_three_bump(PotentialSpec::morse(5.0), 3.6, Some(1e-6), "three_bump_w1")
}

fn three_bump_w2() -> RunConfig {
    fv_three_bump(PotentialSpec::abs(), 1.2, None, "three_bump_w2")
}

fn two_particle_abs() -> RunConfig {
    RunConfig {
        scheme: Scheme::Particles,
        potential: PotentialSpec::abs(),
        initial: InitialSpec::Atoms {
            path: PathBuf::from("two_particle_abs.csv"),
        },
        t_end: 1.5,
        dt: Some(1e-4),
        cfl_safety: None,
        snapshot_every: 100,
        merge_radius: None,
        n_atoms: None,
        grid: None,
        velocity_assembly: None,
        buffer_tol: None,
        output_dir: PathBuf::from("presets/two_particle_abs"),
        seed: 0,
        expect: Expectations {
            single_atom_tol: Some(1e-8),
            collapse_time: Some([1.0, 2e-3]),
            ..Default::default()
        },
    }
}

fn collapse_morse_50() -> RunConfig {
    RunConfig {
        scheme: Scheme::Particles,
        potential: PotentialSpec::morse(5.0),
        initial: InitialSpec::ThreeBump { cx: 100.0 },
        t_end: 4.0,
        dt: Some(1e-3),
        cfl_safety: None,
        snapshot_every: 50,
        merge_radius: None,
        n_atoms: Some(50),
        grid: None,
        velocity_assembly: None,
        buffer_tol: None,
        output_dir: PathBuf::from("presets/collapse_morse_50"),
        seed: 1,
        expect: Expectations {
            single_atom_tol: Some(1e-6),
            ..Default::default()
        },
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "three_bump_w1",
        description: "fv2d, W = 1 - exp(-5|x|), three bumps, 200x200 cells, t_end 3.6",
        config: three_bump_w1,
    },
    Preset {
        name: "three_bump_w2",
        description: "fv2d, W = |x|, three bumps, 200x200 cells, t_end 1.2",
        config: three_bump_w2,
    },
    Preset {
        name: "two_particle_abs",
        description: "particles, W = |x|, masses 1/2 at (-1/2, 0) and (1/2, 0); contact at t = 1",
        config: two_particle_abs,
    },
    Preset {
        name: "collapse_morse_50",
        description: "particles, W = 1 - exp(-5|x|), 50 atoms sampled from the three bumps",
        config: collapse_morse_50,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Atom files referenced by presets, written next to the run output.
pub fn support_files(name: &str) -> Vec<(&'static str, &'static str)> {
    match name {
        "two_particle_abs" => vec![("two_particle_abs.csv", "x,y,mass\n-0.5,0.0,0.5\n0.5,0.0,0.5\n")],
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for p in PRESETS {
            let cfg = (p.config)();
            cfg.validate().unwrap();
            let text = cfg.to_json();
            assert_eq!(RunConfig::from_json(&text).unwrap(), cfg, "{}", p.name);
        }
        assert!(find("three_bump_w1").is_some());
        assert!(find("nope").is_none());
    }
}
