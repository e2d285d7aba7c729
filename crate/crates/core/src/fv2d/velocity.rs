//! Macroscopic velocity `a_ij = -(1/(dx dy)) Σ_kl ρ_kl D(k-i, l-j)`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::scalar::Real;

use super::kernel::{cell_pair_integral, VelocityKernel};
use super::{FvState, Grid2D};

/// Velocity components on the cell grid, same layout as the density.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField<T> {
    pub ax: Vec<T>,
    pub ay: Vec<T>,
}

impl<T: Real> VelocityField<T> {
    /// `max(|a_x|, |a_y|)` over all cells.
    pub fn max_component(&self) -> T {
        self.ax
            .iter()
            .chain(&self.ay)
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_difference(&self, other: &Self) -> T {
        let d = |a: &[T], b: &[T]| {
            a.iter()
                .zip(b)
                .fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
        };
        d(&self.ax, &other.ax).max(d(&self.ay, &other.ay))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VelocityAssembly {
    Direct,
    #[default]
    Fft,
}

fn check_grid<T: Real>(s: &FvState<T>, g: &Grid2D<T>) -> Result<()> {
    if s.grid.same_as(g) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "state grid {}x{} does not match kernel grid {}x{}",
            s.grid.nx, s.grid.ny, g.nx, g.ny
        )))
    }
}

/// Offset-table cross-correlation, `O(N²)` per cell.
pub fn compute_velocity<T: Real>(s: &FvState<T>, k: &VelocityKernel<T>) -> Result<VelocityField<T>> {
    check_grid(s, &k.grid)?;
    let g = s.grid;
    let scale = -T::one() / g.cell_area();
    let sources: Vec<(usize, usize, T)> = (0..g.ny)
        .flat_map(|l| (0..g.nx).map(move |kk| (kk, l)))
        .filter_map(|(kk, l)| {
            let r = s.rho[g.index(kk, l)];
            (r != T::zero()).then_some((kk, l, r))
        })
        .collect();
    let cells: Vec<(T, T)> = (0..g.len())
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % g.nx, c / g.nx);
            let (mut sx, mut sy) = (T::zero(), T::zero());
            for &(kk, l, r) in &sources {
                let (dx, dy) = k.get(kk as isize - i as isize, l as isize - j as isize);
                sx = sx + r * dx;
                sy = sy + r * dy;
            }
            (scale * sx, scale * sy)
        })
        .collect();
    Ok(split(cells))
}

/// Reference assembly: every cell-pair integral computed afresh from the
/// potential, without the offset table. Quartic cost; small grids only.
pub fn velocity_quadruple_loop<T: Real>(s: &FvState<T>, potential: &Potential<T>) -> VelocityField<T> {
    let g = s.grid;
    let scale = -T::one() / g.cell_area();
    let cells: Vec<(T, T)> = (0..g.len())
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % g.nx, c / g.nx);
            let (mut sx, mut sy) = (T::zero(), T::zero());
            for l in 0..g.ny {
                for kk in 0..g.nx {
                    let r = s.rho[g.index(kk, l)];
                    let (dx, dy) = cell_pair_integral(potential, &g, (i, j), (kk, l));
                    sx = sx + r * dx;
                    sy = sy + r * dy;
                }
            }
            (scale * sx, scale * sy)
        })
        .collect();
    split(cells)
}

fn split<T: Real>(cells: Vec<(T, T)>) -> VelocityField<T> {
    let (ax, ay) = cells.into_iter().unzip();
    VelocityField { ax, ay }
}

/// Linear cross-correlation of a real `nx × ny` array with a complex
/// offset table, evaluated as a circular convolution on a zero-padded
/// `2nx × 2ny` array.
pub struct FftCorrelator<T: Real> {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    /// Spectrum of the reflected table, transposed layout (`px` rows of `py`).
    spectrum: Vec<Complex<T>>,
}

impl<T: Real> FftCorrelator<T> {
    /// `table(p, q)` is the weight of source offset `(p, q) = (k - i, l - j)`.
    pub fn new<F>(nx: usize, ny: usize, table: F) -> Self
    where
        F: Fn(isize, isize) -> Complex<T>,
    {
        let (px, py) = (2 * nx, 2 * ny);
        let mut planner = FftPlanner::new();
        let mut c = FftCorrelator {
            nx,
            ny,
            px,
            py,
            row_fwd: planner.plan_fft_forward(px),
            row_inv: planner.plan_fft_inverse(px),
            col_fwd: planner.plan_fft_forward(py),
            col_inv: planner.plan_fft_inverse(py),
            spectrum: Vec::new(),
        };
        // a[i] = Σ_k ρ[k] K[k - i] = (ρ ⊛ K_r)[i] with K_r[m] = K[-m]
        let norm = T::one() / T::from_usize(px * py).unwrap();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); px * py];
        for q in -(ny as isize - 1)..(ny as isize) {
            for p in -(nx as isize - 1)..(nx as isize) {
                let mi = (-p).rem_euclid(px as isize) as usize;
                let mj = (-q).rem_euclid(py as isize) as usize;
                buf[mj * px + mi] = table(p, q) * norm;
            }
        }
        c.spectrum = c.forward(buf);
        c
    }

    /// Row-major `px × py` buffer in, transposed spectrum out.
    fn forward(&self, mut buf: Vec<Complex<T>>) -> Vec<Complex<T>> {
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.row_fwd.get_inplace_scratch_len()];
        self.row_fwd.process_with_scratch(&mut buf, &mut scratch);
        let mut t = transpose(&buf, self.px, self.py);
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.col_fwd.get_inplace_scratch_len()];
        self.col_fwd.process_with_scratch(&mut t, &mut scratch);
        t
    }

    /// Correlates `rho` (`nx × ny`, row-major by `j`) with the table.
    pub fn apply(&self, rho: &[T]) -> Vec<Complex<T>> {
        let (nx, ny, px, py) = (self.nx, self.ny, self.px, self.py);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); px * py];
        for j in 0..ny {
            for i in 0..nx {
                buf[j * px + i] = Complex::new(rho[j * nx + i], T::zero());
            }
        }
        let mut t = self.forward(buf);
        for (z, k) in t.iter_mut().zip(&self.spectrum) {
            *z = *z * *k;
        }
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.col_inv.get_inplace_scratch_len()];
        self.col_inv.process_with_scratch(&mut t, &mut scratch);
        let mut buf = transpose(&t, py, px);
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.row_inv.get_inplace_scratch_len()];
        self.row_inv.process_with_scratch(&mut buf, &mut scratch);
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            out.extend_from_slice(&buf[j * px..j * px + nx]);
        }
        out
    }
}

/// `rows × cols` row-major (rows of length `cols`) into `cols × rows`.
fn transpose<T: Copy + Send + Sync>(src: &[T], cols: usize, rows: usize) -> Vec<T> {
    let mut dst = Vec::with_capacity(src.len());
    for c in 0..cols {
        dst.extend((0..rows).map(|r| src[r * cols + c]));
    }
    dst
}

/// Velocity evaluation strategy bound to one kernel.
pub enum VelocityAssembler<T: Real> {
    Direct(VelocityKernel<T>),
    Fft {
        kernel: VelocityKernel<T>,
        correlator: FftCorrelator<T>,
    },
}

impl<T: Real> VelocityAssembler<T> {
    pub fn new(kernel: VelocityKernel<T>, mode: VelocityAssembly) -> Self {
        match mode {
            VelocityAssembly::Direct => VelocityAssembler::Direct(kernel),
            VelocityAssembly::Fft => {
                let scale = -T::one() / kernel.grid.cell_area();
                let correlator = FftCorrelator::new(kernel.grid.nx, kernel.grid.ny, |p, q| {
                    let (dx, dy) = kernel.get(p, q);
                    Complex::new(dx * scale, dy * scale)
                });
                VelocityAssembler::Fft { kernel, correlator }
            }
        }
    }

    pub fn kernel(&self) -> &VelocityKernel<T> {
        match self {
            VelocityAssembler::Direct(k) => k,
            VelocityAssembler::Fft { kernel, .. } => kernel,
        }
    }

    pub fn velocity(&self, s: &FvState<T>) -> Result<VelocityField<T>> {
        match self {
            VelocityAssembler::Direct(k) => compute_velocity(s, k),
            VelocityAssembler::Fft { kernel, correlator } => {
                check_grid(s, &kernel.grid)?;
                let z = correlator.apply(&s.rho);
                Ok(VelocityField {
                    ax: z.iter().map(|c| c.re).collect(),
                    ay: z.iter().map(|c| c.im).collect(),
                })
            }
        }
    }
}
