//! Empirical Wasserstein contraction between two particle solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::ot;
use crate::particles::simulate_with;
use crate::potentials::Potential;
use crate::scalar::sub;

/// Relative slack allowed on the contraction bounds.
pub const CONTRACTION_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSample {
    pub t: f64,
    pub distance: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub lambda: f64,
    pub n_atoms: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    /// Bound `e^{-2λt} d_W(0)` on independent inputs.
    pub general: Vec<ContractionSample>,
    /// Bound `e^{-λt} d_W(0)` after matching the centers of mass.
    pub recentered: Vec<ContractionSample>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ContractionParams {
    pub t_end: f64,
    pub n_atoms: usize,
    pub seed: u64,
    pub dt: f64,
    pub samples: usize,
}

impl Default for ContractionParams {
    fn default() -> Self {
        ContractionParams {
            t_end: 0.2,
            n_atoms: 20,
            seed: 7,
            dt: 1e-4,
            samples: 20,
        }
    }
}

/// Random atoms in `[-½, ½]²` with random masses.
pub fn random_atoms(rng: &mut impl Rng, n: usize) -> Result<DiscreteMeasure<f64>> {
    let pos = (0..n)
        .map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)])
        .collect();
    let masses = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    DiscreteMeasure::planar(pos, masses)?.normalized()
}

fn distance_series(
    mu: &DiscreteMeasure<f64>,
    nu: &DiscreteMeasure<f64>,
    p: &Potential<f64>,
    prm: &ContractionParams,
    rate: f64,
) -> Result<Vec<ContractionSample>> {
    let n_steps = (prm.t_end / prm.dt - 1e-9).ceil() as usize;
    let every = (n_steps / prm.samples.max(1)).max(1);
    let a = simulate_with(mu, p, prm.t_end, prm.dt, None, every, |_| Ok(()))?;
    let b = simulate_with(nu, p, prm.t_end, prm.dt, None, every, |_| Ok(()))?;
    let d0 = ot::distance(mu, nu)?;
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .skip(1)
        .map(|(x, y)| {
            let distance = ot::distance(&x.measure, &y.measure)?;
            let bound = (rate * x.time).exp() * d0;
            Ok(ContractionSample {
                t: x.time,
                distance,
                bound,
                passed: distance <= bound * (1.0 + CONTRACTION_SLACK) + 1e-14,
            })
        })
        .collect()
}

/// Runs two random particle systems side by side and checks
/// `d_W(t) ≤ e^{-2λt} d_W(0)`, then the same with matched centers of
/// mass against `e^{-λt}`.
pub fn contraction_test(p: &Potential<f64>, prm: &ContractionParams) -> Result<ContractionReport> {
    let lambda = p.lambda();
    if lambda > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "contraction test expects λ ≤ 0, potential has λ = {lambda}"
        )));
    }
    if prm.n_atoms == 0 || !(prm.t_end > 0.0) || !(prm.dt > 0.0) {
        return Err(Error::InvalidArgument("need n_atoms ≥ 1, T > 0 and dt > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(prm.seed);
    let mu = random_atoms(&mut rng, prm.n_atoms)?;
    let nu = random_atoms(&mut rng, prm.n_atoms)?;
    let general = distance_series(&mu, &nu, p, prm, -2.0 * lambda)?;
    let shift = sub(mu.center_of_mass()?, nu.center_of_mass()?);
    let nu_c = nu.translated(shift);
    let recentered = distance_series(&mu, &nu_c, p, prm, -lambda)?;
    let passed = general.iter().chain(&recentered).all(|s| s.passed);
    Ok(ContractionReport {
        lambda,
        n_atoms: prm.n_atoms,
        t_end: prm.t_end,
        dt: prm.dt,
        seed: prm.seed,
        general,
        recentered,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_stay_at_zero() {
        let p = Potential::morse(5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_atoms(&mut rng, 6).unwrap();
        let prm = ContractionParams { t_end: 0.05, dt: 1e-3, samples: 5, ..Default::default() };
        let s = distance_series(&mu, &mu, &p, &prm, 50.0).unwrap();
        assert!(s.iter().all(|x| x.distance == 0.0));
    }

    #[test]
    fn absolute_value_is_nonexpansive() {
        let prm = ContractionParams { t_end: 0.1, dt: 1e-3, n_atoms: 8, samples: 10, seed: 3 };
        let r = contraction_test(&Potential::absolute_value(), &prm).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(r.passed, "{r:?}");
        assert!(r.general.iter().all(|s| s.bound == r.general[0].bound));
    }
}
