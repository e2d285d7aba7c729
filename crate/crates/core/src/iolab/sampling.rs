//! Deterministic atomization of analytic densities.
//!
//! Points come from the additive recurrence `u_k = frac(s + k·(1/g, 1/g²))`
//! with `g` the plastic number, a low-discrepancy sequence in the unit
//! square. The shift `s` is drawn from the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fv2d::AnalyticDensity;
use crate::measure::DiscreteMeasure;
use crate::scalar::Real;

const PLASTIC: f64 = 1.324_717_957_244_746;

fn lattice(n: usize, shift: [f64; 2]) -> impl Iterator<Item = [f64; 2]> {
    let (a1, a2) = (1.0 / PLASTIC, 1.0 / (PLASTIC * PLASTIC));
    (0..n).map(move |k| {
        let k = (k + 1) as f64;
        [(shift[0] + k * a1).fract(), (shift[1] + k * a2).fract()]
    })
}

/// Splits `n` into parts proportional to `weights` (largest remainder).
fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let missing = n - counts.iter().sum::<usize>();
    for &k in order.iter().take(missing) {
        counts[k] += 1;
    }
    counts
}

/// `n` atoms approximating the normalized density.
pub fn atomize<T: Real>(density: &AnalyticDensity, n: usize, seed: u64) -> Result<DiscreteMeasure<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one atom".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    match density {
        AnalyticDensity::GaussianSum(terms) => {
            let weights: Vec<f64> = terms.iter().map(|g| g.weight * std::f64::consts::PI / g.cx).collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::EmptySupport);
            }
            let counts = apportion(n, &weights);
            let normal = Normal::standard();
            for ((g, w), &count) in terms.iter().zip(&weights).zip(&counts) {
                if count == 0 {
                    continue;
                }
                // exp(-cx r²) is a normal law with variance 1 / (2 cx) per axis
                let sigma = (0.5 / g.cx).sqrt();
                let shift = [rng.random::<f64>(), rng.random::<f64>()];
                for u in lattice(count, shift) {
                    let u = [u[0].clamp(1e-12, 1.0 - 1e-12), u[1].clamp(1e-12, 1.0 - 1e-12)];
                    positions.push([
                        T::lit(g.center[0] + sigma * normal.inverse_cdf(u[0])),
                        T::lit(g.center[1] + sigma * normal.inverse_cdf(u[1])),
                    ]);
                    masses.push(T::lit(w / total / count as f64));
                }
            }
        }
        AnalyticDensity::UniformBox { lo, hi } => {
            let shift = [rng.random::<f64>(), rng.random::<f64>()];
            for u in lattice(n, shift) {
                positions.push([
                    T::lit(lo[0] + u[0] * (hi[0] - lo[0])),
                    T::lit(lo[1] + u[1] * (hi[1] - lo[1])),
                ]);
                masses.push(T::one() / T::from_usize(n).unwrap());
            }
        }
    }
    DiscreteMeasure::planar(positions, masses)
}
