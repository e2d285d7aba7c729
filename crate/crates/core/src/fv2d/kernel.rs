//! Cell-pair integrals of the hatted gradient.
//!
//! For target cell `(i, j)` and source cell `(k, l)` the entry is
//! `∫_{C_kl} ∫_{C_ij} ∇Ŵ(x - x') dx dx'`. On a uniform grid it depends only
//! on the offset `(p, q) = (k - i, l - j)`, and the substitution
//! `x - x' = ((τ - p) dx, (σ - q) dy)` turns it into
//!
//! `(dx dy)² ∫∫_{[-1,1]²} (1 - |τ|)(1 - |σ|) ∇Ŵ((τ - p) dx, (σ - q) dy) dτ dσ`.
//!
//! The tent weight is linear on each quadrant of `[-1,1]²`, so each
//! quadrant is one Gauss-Legendre panel. The only point where `∇Ŵ` is not
//! smooth, the origin, sits on a panel corner for `|p|, |q| ≤ 1`; those
//! near-diagonal offsets use subdivided panels.

use rayon::prelude::*;

use crate::potentials::Potential;
use crate::quadrature::tensor_4x4_pair;
use crate::scalar::Real;

use super::Grid2D;

/// Subpanels per axis and quadrant for the near-diagonal offsets.
const NEAR_SUBDIVISION: usize = 4;

/// Offset-indexed cell-pair integrals of `∂_x Ŵ` and `∂_y Ŵ`.
#[derive(Debug, Clone)]
pub struct VelocityKernel<T> {
    pub(crate) grid: Grid2D<T>,
    pub(crate) w_inf: T,
    /// `(2 nx - 1) × (2 ny - 1)`, row-major in the `q` offset.
    pub(crate) dwx: Vec<T>,
    pub(crate) dwy: Vec<T>,
}

impl<T: Real> VelocityKernel<T> {
    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    pub fn w_inf(&self) -> T {
        self.w_inf
    }

    #[inline]
    pub(crate) fn slot(&self, p: isize, q: isize) -> usize {
        let width = 2 * self.grid.nx - 1;
        let pi = (p + self.grid.nx as isize - 1) as usize;
        let qi = (q + self.grid.ny as isize - 1) as usize;
        qi * width + pi
    }

    /// `(D_x, D_y)` for source offset `(p, q) = (k - i, l - j)`.
    #[inline]
    pub fn get(&self, p: isize, q: isize) -> (T, T) {
        let s = self.slot(p, q);
        (self.dwx[s], self.dwy[s])
    }

    /// Offsets covered: `p ∈ [-(nx-1), nx-1]`, `q ∈ [-(ny-1), ny-1]`.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let (nx, ny) = (self.grid.nx as isize, self.grid.ny as isize);
        (-(ny - 1)..ny).flat_map(move |q| (-(nx - 1)..nx).map(move |p| (p, q)))
    }
}

/// Integral over one tent-weighted quadrant `[a0,a1]×[b0,b1]` ⊂ `[-1,1]²`,
/// optionally split into `sub × sub` panels.
fn quadrant<T: Real>(
    potential: &Potential<T>,
    grid: &Grid2D<T>,
    p: T,
    q: T,
    (a0, a1, b0, b1): (T, T, T, T),
    sub: usize,
) -> (T, T) {
    let n = T::from_usize(sub).unwrap();
    let (ha, hb) = ((a1 - a0) / n, (b1 - b0) / n);
    let mut gx = T::zero();
    let mut gy = T::zero();
    for si in 0..sub {
        let ta0 = a0 + T::from_usize(si).unwrap() * ha;
        for sj in 0..sub {
            let tb0 = b0 + T::from_usize(sj).unwrap() * hb;
            let [a, b] = tensor_4x4_pair(ta0, ta0 + ha, tb0, tb0 + hb, |tau, sigma| {
                let w = (T::one() - tau.abs()) * (T::one() - sigma.abs());
                let g = potential.grad_hat([(tau - p) * grid.dx, (sigma - q) * grid.dy]);
                [w * g[0], w * g[1]]
            });
            gx = gx + a;
            gy = gy + b;
        }
    }
    (gx, gy)
}

/// Cell-pair integral for target cell `(i, j)` and source cell `(k, l)`,
/// computed from scratch (no table, no reflection).
pub fn cell_pair_integral<T: Real>(
    potential: &Potential<T>,
    grid: &Grid2D<T>,
    target: (usize, usize),
    source: (usize, usize),
) -> (T, T) {
    let p = source.0 as isize - target.0 as isize;
    let q = source.1 as isize - target.1 as isize;
    offset_integral(potential, grid, p, q)
}

/// Cell-pair integral for source offset `(p, q)`.
pub fn offset_integral<T: Real>(potential: &Potential<T>, grid: &Grid2D<T>, p: isize, q: isize) -> (T, T) {
    if p == 0 && q == 0 {
        return (T::zero(), T::zero());
    }
    let sub = if p.abs() <= 1 && q.abs() <= 1 { NEAR_SUBDIVISION } else { 1 };
    let (pf, qf) = (T::from_isize(p).unwrap(), T::from_isize(q).unwrap());
    let (m1, z, p1) = (-T::one(), T::zero(), T::one());
    let mut gx = T::zero();
    let mut gy = T::zero();
    for quad in [(m1, z, m1, z), (z, p1, m1, z), (m1, z, z, p1), (z, p1, z, p1)] {
        let (a, b) = quadrant(potential, grid, pf, qf, quad, sub);
        gx = gx + a;
        gy = gy + b;
    }
    let area2 = grid.cell_area() * grid.cell_area();
    (gx * area2, gy * area2)
}

/// Tabulates every offset. One half-plane is integrated and the other is
/// filled by oddness, so `D(-p,-q) = -D(p,q)` holds bit for bit.
pub fn build_kernel<T: Real>(potential: &Potential<T>, grid: &Grid2D<T>) -> VelocityKernel<T> {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let width = (2 * nx - 1) as usize;
    let height = (2 * ny - 1) as usize;
    let mut kernel = VelocityKernel {
        grid: *grid,
        w_inf: potential.w_inf(),
        dwx: vec![T::zero(); width * height],
        dwy: vec![T::zero(); width * height],
    };
    // half-plane: q > 0, or q == 0 and p > 0
    let half: Vec<(isize, isize)> = (0..ny)
        .flat_map(|q| {
            let p_start = if q == 0 { 1 } else { -(nx - 1) };
            (p_start..nx).map(move |p| (p, q))
        })
        .collect();
    let values: Vec<(T, T)> = half
        .par_iter()
        .map(|&(p, q)| offset_integral(potential, grid, p, q))
        .collect();
    for (&(p, q), &(gx, gy)) in half.iter().zip(&values) {
        let s = kernel.slot(p, q);
        kernel.dwx[s] = gx;
        kernel.dwy[s] = gy;
        let r = kernel.slot(-p, -q);
        kernel.dwx[r] = -gx;
        kernel.dwy[r] = -gy;
    }
    kernel
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn origin_entry_vanishes_and_table_is_odd() {
        let grid = Grid2D::<f64>::new(7, 5, 0.1, 0.2, [0.0, 0.0]).unwrap();
        for p in [Potential::<f64>::absolute_value(), Potential::morse(5.0).unwrap()] {
            let k = build_kernel(&p, &grid);
            assert_eq!(k.get(0, 0), (0.0, 0.0));
            for (a, b) in k.offsets().collect::<Vec<_>>() {
                let (x, y) = k.get(a, b);
                let (xm, ym) = k.get(-a, -b);
                assert_eq!(x, -xm);
                assert_eq!(y, -ym);
                let bound = p.w_inf() * grid.cell_area() * grid.cell_area();
                assert!(x.abs() <= bound * (1.0 + 1e-14) && y.abs() <= bound * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn table_matches_fresh_integrals() {
        let grid = Grid2D::<f64>::new(6, 6, 0.05, 0.05, [0.0, 0.0]).unwrap();
        let p = Potential::morse(5.0).unwrap();
        let k = build_kernel(&p, &grid);
        for (a, b) in k.offsets().collect::<Vec<_>>() {
            let fresh = offset_integral(&p, &grid, a, b);
            let (x, y) = k.get(a, b);
            assert!((fresh.0 - x).abs() <= 1e-18 && (fresh.1 - y).abs() <= 1e-18);
        }
    }

    /// Far-field offset against a Monte Carlo estimate of the 4D integral.
    #[test]
    fn far_offset_against_monte_carlo() {
        let h = 0.01;
        let grid = Grid2D::<f64>::new(8, 8, h, h, [0.0, 0.0]).unwrap();
        let p = Potential::absolute_value();
        let (dx_w, dy_w) = offset_integral(&p, &grid, 5, 0);
        let area2 = (h * h) * (h * h);
        assert!(dx_w < 0.0);
        assert!((dx_w + area2).abs() <= 0.02 * area2);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = 1_000_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..samples {
            // x in C_00, x' in C_50
            let x = [rng.random::<f64>() * h, rng.random::<f64>() * h];
            let xp = [(5.0 + rng.random::<f64>()) * h, rng.random::<f64>() * h];
            let g = p.grad_hat([x[0] - xp[0], x[1] - xp[1]]);
            sx += g[0];
            sy += g[1];
        }
        let (mc_x, mc_y) = (sx / samples as f64 * area2, sy / samples as f64 * area2);
        // Monte Carlo standard error is well below 1e-3 relative here
        assert!((mc_x - dx_w).abs() <= 1e-3 * area2, "mc {mc_x} quad {dx_w}");
        assert!((mc_y - dy_w).abs() <= 2e-3 * area2);
    }

    /// Near-diagonal entries against a dense midpoint rule on the tent form.
    #[test]
    fn near_offsets_against_dense_midpoint() {
        let grid = Grid2D::<f64>::new(3, 3, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let p = Potential::absolute_value();
        for (a, b) in [(1isize, 0isize), (1, 1), (0, 1), (-1, 1)] {
            let (qx, qy) = offset_integral(&p, &grid, a, b);
            let n = 800;
            let step = 2.0 / n as f64;
            let (mut mx, mut my) = (0.0, 0.0);
            for u in 0..n {
                let tau = -1.0 + (u as f64 + 0.5) * step;
                for v in 0..n {
                    let sigma = -1.0 + (v as f64 + 0.5) * step;
                    let w = (1.0 - tau.abs()) * (1.0 - sigma.abs());
                    let g = p.grad_hat([(tau - a as f64) * 0.1, (sigma - b as f64) * 0.1]);
                    mx += w * g[0];
                    my += w * g[1];
                }
            }
            let area2 = 1e-4;
            let (mx, my) = (mx * step * step * area2, my * step * step * area2);
            assert!((mx - qx).abs() <= 1e-4 * area2, "({a},{b}) {mx} vs {qx}");
            assert!((my - qy).abs() <= 1e-4 * area2);
        }
    }
}
