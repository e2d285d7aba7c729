//! Conservative finite-volume scheme on a uniform 2D grid.
//!
//! The update is written in flux form with interface fluxes
//! `F_{i+½} = a_{i+½} ρ_{i+½} - (w∞/2)(ρ_{i+1} - ρ_i)`, interface values
//! being arithmetic means of the neighbouring cells. Fluxes through the
//! outer box faces are zero, so mass is conserved by telescoping.

mod grid;
pub mod kernel;
pub mod snapshot;
pub mod velocity;

pub use grid::{Grid2D, GridSpec};
pub use kernel::{build_kernel, cell_pair_integral, offset_integral, VelocityKernel};
pub use velocity::{
    compute_velocity, velocity_quadruple_loop, FftCorrelator, VelocityAssembler, VelocityAssembly,
    VelocityField,
};

use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, DROP_MASS};
use crate::potentials::Potential;
use crate::quadrature::tensor_4x4;
use crate::scalar::{Point, Real};

/// Cell averages `ρ_ij` at time `t_n = n Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FvState<T> {
    pub grid: Grid2D<T>,
    /// Row-major in `j`: `rho[j * nx + i]`.
    pub rho: Vec<T>,
    pub time: T,
    pub step_count: usize,
    /// Factor applied to the quadrature cell masses to make the total exactly 1.
    pub renormalization: T,
}

impl<T: Real> FvState<T> {
    pub fn from_density(grid: Grid2D<T>, rho: Vec<T>) -> Result<Self> {
        if rho.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "density has {} values, grid has {} cells",
                rho.len(),
                grid.len()
            )));
        }
        if rho.iter().any(|r| !r.is_finite() || *r < T::zero()) {
            return Err(Error::InvalidArgument("cell averages must be finite and nonnegative".into()));
        }
        Ok(FvState {
            grid,
            rho,
            time: T::zero(),
            step_count: 0,
            renormalization: T::one(),
        })
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.rho[self.grid.index(i, j)]
    }

    /// Compensated `Σ ρ_ij dx dy`.
    pub fn mass(&self) -> T {
        neumaier(self.rho.iter().copied()) * self.grid.cell_area()
    }

    /// Mass, center of mass and second moment (cell-center coordinates).
    pub fn moments(&self) -> (T, Point<T>, T) {
        moment_diagnostics(self)
    }

    /// One atom per nonempty cell, placed at the cell center.
    pub fn to_measure(&self) -> Result<DiscreteMeasure<T>> {
        let area = self.grid.cell_area();
        let mut pos = Vec::new();
        let mut masses = Vec::new();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let r = self.at(i, j);
                if r > T::zero() {
                    pos.push(self.grid.center(i, j));
                    masses.push(r * area);
                }
            }
        }
        DiscreteMeasure::planar(pos, masses)
    }

    /// Diameter of the set of cell centers whose value exceeds `frac · max ρ`.
    pub fn support_diameter(&self, frac: T) -> T {
        let max = self.rho.iter().fold(T::zero(), |m, r| m.max(*r));
        if max <= T::zero() {
            return T::zero();
        }
        let cut = frac * max;
        // the diameter is attained on hull vertices, which are row extremes
        let mut pts: Vec<Point<T>> = Vec::new();
        for j in 0..self.grid.ny {
            let row: Vec<usize> = (0..self.grid.nx).filter(|&i| self.at(i, j) > cut).collect();
            if let (Some(&a), Some(&b)) = (row.first(), row.last()) {
                pts.push(self.grid.center(a, j));
                if b != a {
                    pts.push(self.grid.center(b, j));
                }
            }
        }
        let mut d2 = T::zero();
        for (k, a) in pts.iter().enumerate() {
            for b in &pts[k + 1..] {
                d2 = d2.max(crate::scalar::norm2(crate::scalar::sub(*a, *b)));
            }
        }
        d2.sqrt()
    }
}

/// Neumaier-compensated sum.
pub(crate) fn neumaier<T: Real>(values: impl Iterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut c = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c = c + ((sum - t) + v);
        } else {
            c = c + ((v - t) + sum);
        }
        sum = t;
    }
    sum + c
}

/// One term `weight · exp(-cx |x - center|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian {
    pub center: [f64; 2],
    pub weight: f64,
    pub cx: f64,
}

/// Closed-form initial densities (not necessarily normalized).
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticDensity {
    GaussianSum(Vec<Gaussian>),
    /// Uniform on `[lo, hi]` (componentwise box).
    UniformBox { lo: [f64; 2], hi: [f64; 2] },
}

impl AnalyticDensity {
    /// Three-bump profile with width parameter `cx`.
    pub fn three_bump(cx: f64) -> Self {
        AnalyticDensity::GaussianSum(vec![
            Gaussian { center: [0.25, 1.0 / 3.0], weight: 1.0, cx },
            Gaussian { center: [0.8, 0.6], weight: 1.0, cx },
            Gaussian { center: [0.4, 0.6], weight: 0.9, cx },
        ])
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            AnalyticDensity::GaussianSum(g) => g
                .iter()
                .map(|b| {
                    let (u, v) = (x[0] - b.center[0], x[1] - b.center[1]);
                    b.weight * (-b.cx * (u * u + v * v)).exp()
                })
                .sum(),
            AnalyticDensity::UniformBox { lo, hi } => {
                let inside = (lo[0]..=hi[0]).contains(&x[0]) && (lo[1]..=hi[1]).contains(&x[1]);
                if inside {
                    1.0 / ((hi[0] - lo[0]) * (hi[1] - lo[1]))
                } else {
                    0.0
                }
            }
        }
    }

    /// Mass and center of mass over the whole plane.
    pub fn moments(&self) -> (f64, [f64; 2]) {
        match self {
            AnalyticDensity::GaussianSum(g) => {
                let mut total = 0.0;
                let mut c = [0.0, 0.0];
                for b in g {
                    let m = b.weight * std::f64::consts::PI / b.cx;
                    total += m;
                    c[0] += m * b.center[0];
                    c[1] += m * b.center[1];
                }
                (total, [c[0] / total, c[1] / total])
            }
            AnalyticDensity::UniformBox { lo, hi } => {
                (1.0, [(lo[0] + hi[0]) * 0.5, (lo[1] + hi[1]) * 0.5])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AnalyticDensity::GaussianSum(g) => {
                if g.is_empty() {
                    return Err(Error::EmptySupport);
                }
                for b in g {
                    if !(b.cx > 0.0) || !(b.weight >= 0.0) || !b.center.iter().all(|c| c.is_finite()) {
                        return Err(Error::InvalidArgument(format!("invalid gaussian term {b:?}")));
                    }
                }
                Ok(())
            }
            AnalyticDensity::UniformBox { lo, hi } => {
                if hi[0] > lo[0] && hi[1] > lo[1] {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("uniform box needs lo < hi".into()))
                }
            }
        }
    }

    /// Mass of `self` in one cell.
    fn cell_mass(&self, (x0, x1, y0, y1): (f64, f64, f64, f64)) -> f64 {
        match self {
            AnalyticDensity::GaussianSum(_) => tensor_4x4(x0, x1, y0, y1, |x, y| self.eval([x, y])),
            AnalyticDensity::UniformBox { lo, hi } => {
                let ox = (x1.min(hi[0]) - x0.max(lo[0])).max(0.0);
                let oy = (y1.min(hi[1]) - y0.max(lo[1])).max(0.0);
                ox * oy / ((hi[0] - lo[0]) * (hi[1] - lo[1]))
            }
        }
    }
}

/// Initial data for [`init_cells`].
#[derive(Debug, Clone)]
pub enum InitialDensity<T> {
    Analytic(AnalyticDensity),
    Atoms(DiscreteMeasure<T>),
}

/// Cell averages of the initial data, renormalized to unit mass.
pub fn init_cells<T: Real>(density: &InitialDensity<T>, grid: &Grid2D<T>) -> Result<FvState<T>> {
    let area = grid.cell_area();
    let mut masses = vec![T::zero(); grid.len()];
    match density {
        InitialDensity::Analytic(d) => {
            d.validate()?;
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let (x0, x1, y0, y1) = grid.bounds(i, j);
                    let b = (x0.to_f64_lossy(), x1.to_f64_lossy(), y0.to_f64_lossy(), y1.to_f64_lossy());
                    masses[grid.index(i, j)] = T::lit(d.cell_mass(b));
                }
            }
        }
        InitialDensity::Atoms(m) => {
            for (x, w) in m.positions().iter().zip(m.masses()) {
                let (i, j) = grid.locate(*x).ok_or(Error::AtomOutsideGrid {
                    x: x[0].to_f64_lossy(),
                    y: x[1].to_f64_lossy(),
                })?;
                let k = grid.index(i, j);
                masses[k] = masses[k] + *w;
            }
        }
    }
    let total = neumaier(masses.iter().copied());
    if !(total > T::zero()) {
        return Err(Error::EmptySupport);
    }
    let factor = T::one() / total;
    let rho = masses.iter().map(|m| *m * factor / area).collect();
    let mut s = FvState::from_density(*grid, rho)?;
    s.renormalization = factor;
    Ok(s)
}

/// `safety · ½ / (w∞ (1/dx + 1/dy))`, or `max_dt` when `w∞ = 0`.
pub fn cfl_dt<T: Real>(w_inf: T, grid: &Grid2D<T>, safety: T, max_dt: T) -> Result<T> {
    if !(safety > T::zero() && safety <= T::one()) {
        return Err(Error::InvalidArgument(format!("cfl safety must lie in (0, 1], got {safety}")));
    }
    if w_inf == T::zero() {
        return Ok(max_dt);
    }
    Ok(safety * T::lit(0.5) / (w_inf * (T::one() / grid.dx + T::one() / grid.dy)))
}

fn check_cfl<T: Real>(w_inf: T, grid: &Grid2D<T>, dt: T) -> Result<()> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if w_inf == T::zero() {
        return Ok(());
    }
    let max_dt = T::lit(0.5) / (w_inf * (T::one() / grid.dx + T::one() / grid.dy));
    if dt > max_dt * (T::one() + T::lit(8.0) * T::epsilon()) {
        return Err(Error::CflViolation {
            dt: dt.to_f64_lossy(),
            max_dt: max_dt.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Largest cell mass on the outer ring.
pub fn boundary_mass<T: Real>(s: &FvState<T>) -> T {
    let g = &s.grid;
    let ring = (0..g.nx)
        .flat_map(|i| [(i, 0), (i, g.ny - 1)])
        .chain((0..g.ny).flat_map(|j| [(0, j), (g.nx - 1, j)]));
    ring.map(|(i, j)| s.at(i, j)).fold(T::zero(), |a, b| a.max(b)) * g.cell_area()
}

/// Fails if any cell on the outer ring holds more than [`DROP_MASS`].
pub fn check_buffer<T: Real>(s: &FvState<T>) -> Result<()> {
    check_buffer_tol(s, T::lit(DROP_MASS))
}

/// Fails if any cell on the outer ring holds more than `tol`.
pub fn check_buffer_tol<T: Real>(s: &FvState<T>, tol: T) -> Result<()> {
    let g = &s.grid;
    let area = g.cell_area();
    let drop = tol;
    let ring = (0..g.nx)
        .flat_map(|i| [(i, 0), (i, g.ny - 1)])
        .chain((0..g.ny).flat_map(|j| [(0, j), (g.nx - 1, j)]));
    for (i, j) in ring {
        let m = s.at(i, j) * area;
        if m > drop {
            return Err(Error::BoundaryReached {
                i,
                j,
                mass: m.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Explicit update from a given velocity field; no CFL or buffer checks.
pub fn fv_update<T: Real>(s: &FvState<T>, v: &VelocityField<T>, w_inf: T, dt: T) -> FvState<T> {
    let g = s.grid;
    let (nx, ny) = (g.nx, g.ny);
    let half = T::lit(0.5);
    let rho = &s.rho;
    // fx[j * (nx - 1) + i] is the flux through the face between i and i + 1
    let mut fx = vec![T::zero(); (nx - 1) * ny];
    for j in 0..ny {
        for i in 0..nx - 1 {
            let (a, b) = (g.index(i, j), g.index(i + 1, j));
            let am = (v.ax[a] + v.ax[b]) * half;
            let rm = (rho[a] + rho[b]) * half;
            fx[j * (nx - 1) + i] = am * rm - w_inf * half * (rho[b] - rho[a]);
        }
    }
    let mut fy = vec![T::zero(); nx * (ny - 1)];
    for j in 0..ny - 1 {
        for i in 0..nx {
            let (a, b) = (g.index(i, j), g.index(i, j + 1));
            let am = (v.ay[a] + v.ay[b]) * half;
            let rm = (rho[a] + rho[b]) * half;
            fy[j * nx + i] = am * rm - w_inf * half * (rho[b] - rho[a]);
        }
    }
    let (lx, ly) = (dt / g.dx, dt / g.dy);
    let mut out = Vec::with_capacity(rho.len());
    for j in 0..ny {
        for i in 0..nx {
            let east = if i + 1 < nx { fx[j * (nx - 1) + i] } else { T::zero() };
            let west = if i > 0 { fx[j * (nx - 1) + i - 1] } else { T::zero() };
            let north = if j + 1 < ny { fy[j * nx + i] } else { T::zero() };
            let south = if j > 0 { fy[(j - 1) * nx + i] } else { T::zero() };
            out.push(rho[g.index(i, j)] - lx * (east - west) - ly * (north - south));
        }
    }
    FvState {
        grid: g,
        rho: out,
        time: s.time + dt,
        step_count: s.step_count + 1,
        renormalization: s.renormalization,
    }
}

/// One checked step with the offset-table velocity.
pub fn fv_step<T: Real>(s: &FvState<T>, k: &VelocityKernel<T>, dt: T) -> Result<FvState<T>> {
    check_cfl(k.w_inf(), &s.grid, dt)?;
    check_buffer(s)?;
    let v = compute_velocity(s, k)?;
    Ok(fv_update(s, &v, k.w_inf(), dt))
}

/// Conserved and monitored quantities of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FvDiagnostics {
    pub mass: f64,
    pub com: [f64; 2],
    pub m2: f64,
    pub energy: f64,
    pub min_rho: f64,
    pub max_rho: f64,
}

fn moment_diagnostics<T: Real>(s: &FvState<T>) -> (T, Point<T>, T) {
    let g = &s.grid;
    let area = g.cell_area();
    let cells = || (0..g.ny).flat_map(move |j| (0..g.nx).map(move |i| (i, j)));
    let mass = s.mass();
    let cx = neumaier(cells().map(|(i, j)| s.at(i, j) * g.center(i, j)[0])) * area;
    let cy = neumaier(cells().map(|(i, j)| s.at(i, j) * g.center(i, j)[1])) * area;
    let m2 = neumaier(cells().map(|(i, j)| {
        let c = g.center(i, j);
        s.at(i, j) * (c[0] * c[0] + c[1] * c[1])
    })) * area;
    (mass, [cx / mass, cy / mass], m2)
}

/// Interaction energy of the cell-center atomization, by FFT correlation.
pub struct EnergyEvaluator<T: Real> {
    grid: Grid2D<T>,
    correlator: FftCorrelator<T>,
}

impl<T: Real> EnergyEvaluator<T> {
    pub fn new(potential: &Potential<T>, grid: &Grid2D<T>) -> Self {
        let area = grid.cell_area();
        let (dx, dy) = (grid.dx, grid.dy);
        let correlator = FftCorrelator::new(grid.nx, grid.ny, |p, q| {
            let x = [T::from_isize(p).unwrap() * dx, T::from_isize(q).unwrap() * dy];
            Complex::new(potential.eval(x) * area, T::zero())
        });
        EnergyEvaluator { grid: *grid, correlator }
    }

    pub fn energy(&self, s: &FvState<T>) -> Result<T> {
        if !s.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch("energy evaluator built for another grid".into()));
        }
        let c = self.correlator.apply(&s.rho);
        let area = self.grid.cell_area();
        Ok(T::lit(0.5) * area * neumaier(s.rho.iter().zip(&c).map(|(r, z)| *r * z.re)))
    }
}

/// Diagnostics using a prebuilt energy evaluator.
pub fn diagnostics_with<T: Real>(s: &FvState<T>, energy: &EnergyEvaluator<T>) -> Result<FvDiagnostics> {
    let (mass, com, m2) = moment_diagnostics(s);
    let (lo, hi) = s
        .rho
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), r| (a.min(*r), b.max(*r)));
    Ok(FvDiagnostics {
        mass: mass.to_f64_lossy(),
        com: [com[0].to_f64_lossy(), com[1].to_f64_lossy()],
        m2: m2.to_f64_lossy(),
        energy: energy.energy(s)?.to_f64_lossy(),
        min_rho: lo.to_f64_lossy(),
        max_rho: hi.to_f64_lossy(),
    })
}

pub fn fv_diagnostics<T: Real>(s: &FvState<T>, potential: &Potential<T>) -> FvDiagnostics {
    let e = EnergyEvaluator::new(potential, &s.grid);
    diagnostics_with(s, &e).expect("evaluator built for this grid")
}

/// Constant `C = 2w∞ + w∞² + w∞ max(dx, dy)` of the discrete second-moment bound.
pub fn second_moment_constant<T: Real>(w_inf: T, grid: &Grid2D<T>) -> T {
    T::lit(2.0) * w_inf + w_inf * w_inf + w_inf * grid.dx.max(grid.dy)
}

/// `e^{C t}(M₂⁰ + 1) - 1`.
pub fn second_moment_bound<T: Real>(c: T, t: T, m2_0: T) -> T {
    (c * t).exp() * (m2_0 + T::one()) - T::one()
}

/// Scheme bound to one potential and grid: kernel, assembly and energy tables.
pub struct FvSolver<T: Real> {
    potential: Potential<T>,
    assembler: VelocityAssembler<T>,
    energy: EnergyEvaluator<T>,
    buffer_tol: Option<T>,
}

/// State after one step plus the velocity magnitude that drove it.
#[derive(Debug, Clone)]
pub struct StepResult<T> {
    pub state: FvState<T>,
    pub max_velocity: T,
}

impl<T: Real> FvSolver<T> {
    pub fn new(potential: Potential<T>, grid: &Grid2D<T>, mode: VelocityAssembly) -> Self {
        let kernel = build_kernel(&potential, grid);
        FvSolver {
            assembler: VelocityAssembler::new(kernel, mode),
            energy: EnergyEvaluator::new(&potential, grid),
            potential,
            buffer_tol: Some(T::lit(DROP_MASS)),
        }
    }

    /// Outer-ring cell mass that aborts a step; `None` disables the guard.
    pub fn with_buffer_tol(mut self, tol: Option<T>) -> Self {
        self.buffer_tol = tol;
        self
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn grid(&self) -> &Grid2D<T> {
        self.assembler.kernel().grid()
    }

    pub fn kernel(&self) -> &VelocityKernel<T> {
        self.assembler.kernel()
    }

    pub fn velocity(&self, s: &FvState<T>) -> Result<VelocityField<T>> {
        self.assembler.velocity(s)
    }

    pub fn cfl_dt(&self, safety: T, max_dt: T) -> Result<T> {
        cfl_dt(self.potential.w_inf(), self.grid(), safety, max_dt)
    }

    pub fn step(&self, s: &FvState<T>, dt: T) -> Result<StepResult<T>> {
        let w = self.potential.w_inf();
        check_cfl(w, &s.grid, dt)?;
        if let Some(tol) = self.buffer_tol {
            check_buffer_tol(s, tol)?;
        }
        let v = self.velocity(s)?;
        Ok(StepResult {
            state: fv_update(s, &v, w, dt),
            max_velocity: v.max_component(),
        })
    }

    pub fn diagnostics(&self, s: &FvState<T>) -> Result<FvDiagnostics> {
        diagnostics_with(s, &self.energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_bump_state(h: f64) -> FvState<f64> {
        let grid = Grid2D::square_box(-0.5, 1.5, h).unwrap();
        init_cells(&InitialDensity::Analytic(AnalyticDensity::three_bump(100.0)), &grid).unwrap()
    }

    #[test]
    fn uniform_on_one_cell() {
        let grid = Grid2D::<f64>::new(4, 4, 0.25, 0.25, [0.0, 0.0]).unwrap();
        let d = AnalyticDensity::UniformBox { lo: [0.25, 0.5], hi: [0.5, 0.75] };
        let s = init_cells(&InitialDensity::Analytic(d), &grid).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                let expect = if (i, j) == (1, 2) { 16.0 } else { 0.0 };
                assert!((s.at(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dirac_at_center_fills_one_cell() {
        let grid = Grid2D::<f64>::new(5, 5, 0.2, 0.2, [0.0, 0.0]).unwrap();
        let s = init_cells(&InitialDensity::Atoms(DiscreteMeasure::dirac(grid.center(3, 1))), &grid).unwrap();
        assert_eq!(s.rho.iter().filter(|r| **r != 0.0).count(), 1);
        assert!((s.at(3, 1) - 25.0).abs() < 1e-12);
        let outside = DiscreteMeasure::dirac([2.0, 0.5]);
        assert!(matches!(
            init_cells(&InitialDensity::Atoms(outside), &grid),
            Err(Error::AtomOutsideGrid { .. })
        ));
    }

    #[test]
    fn three_bump_moments() {
        let s = three_bump_state(0.02);
        let (_, com) = AnalyticDensity::three_bump(100.0).moments();
        let d = fv_diagnostics(&s, &Potential::morse(5.0).unwrap());
        assert!((d.mass - 1.0).abs() < 1e-13);
        assert!((d.com[0] - com[0]).abs() < 1e-3 && (d.com[1] - com[1]).abs() < 1e-3);
        // renormalization recorded against the analytic mass
        let (total, _) = AnalyticDensity::three_bump(100.0).moments();
        assert!((s.renormalization * total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cfl_examples() {
        let g = Grid2D::<f64>::new(2, 2, 0.01, 0.01, [0.0, 0.0]).unwrap();
        assert!((cfl_dt(1.0, &g, 1.0, 1.0).unwrap() - 0.0025).abs() < 1e-16);
        assert!((cfl_dt(1.0, &g, 0.5, 1.0).unwrap() - 0.00125).abs() < 1e-16);
        assert!((cfl_dt(5.0, &g, 1.0, 1.0).unwrap() - 0.0005).abs() < 1e-16);
        assert_eq!(cfl_dt(0.0, &g, 1.0, 0.3).unwrap(), 0.3);
        assert!(cfl_dt(1.0, &g, 1.5, 1.0).is_err());
    }

    #[test]
    fn cfl_violation_is_rejected_before_stepping() {
        let s = three_bump_state(0.05);
        let k = build_kernel(&Potential::absolute_value(), &s.grid);
        let dt = 2.0 * cfl_dt(1.0, &s.grid, 1.0, 1.0).unwrap();
        match fv_step(&s, &k, dt) {
            Err(Error::CflViolation { max_dt, .. }) => assert!((max_dt - dt / 2.0).abs() < 1e-15),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let grid = Grid2D::<f64>::new(6, 6, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let s = FvState::from_density(grid, vec![0.0; 36]).unwrap();
        let k = build_kernel(&Potential::absolute_value(), &grid);
        let next = fv_step(&s, &k, 0.01).unwrap();
        assert!(next.rho.iter().all(|r| *r == 0.0));
    }

    /// Pointwise form of the update, written independently of the flux form.
    fn reference_update(s: &FvState<f64>, v: &VelocityField<f64>, w: f64, dt: f64) -> Vec<f64> {
        let g = s.grid;
        let get = |a: &[f64], i: isize, j: isize| {
            if i < 0 || j < 0 || i >= g.nx as isize || j >= g.ny as isize {
                None
            } else {
                Some(a[g.index(i as usize, j as usize)])
            }
        };
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny as isize {
            for i in 0..g.nx as isize {
                let r = get(&s.rho, i, j).unwrap();
                let mut acc = r;
                for (di, dj, a, h) in [(1, 0, &v.ax, g.dx), (0, 1, &v.ay, g.dy)] {
                    let own = get(a, i, j).unwrap();
                    let plus = get(&s.rho, i + di, j + dj)
                        .map(|rp| (own + get(a, i + di, j + dj).unwrap()) / 2.0 * (r + rp) / 2.0);
                    let minus = get(&s.rho, i - di, j - dj)
                        .map(|rm| (own + get(a, i - di, j - dj).unwrap()) / 2.0 * (r + rm) / 2.0);
                    acc -= dt / h * (plus.unwrap_or(0.0) - minus.unwrap_or(0.0));
                    let lap = get(&s.rho, i + di, j + dj).map_or(0.0, |x| x - r)
                        + get(&s.rho, i - di, j - dj).map_or(0.0, |x| x - r);
                    acc += dt / (2.0 * h) * w * lap;
                }
                out[g.index(i as usize, j as usize)] = acc;
            }
        }
        out
    }

    #[test]
    fn single_cell_spreads_to_von_neumann_neighbours() {
        let grid = Grid2D::<f64>::new(7, 7, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let mut rho = vec![0.0; 49];
        rho[grid.index(3, 3)] = 100.0;
        let s = FvState::from_density(grid, rho).unwrap();
        let p = Potential::absolute_value();
        let k = build_kernel(&p, &grid);
        let dt = cfl_dt(1.0, &grid, 0.9, 1.0).unwrap();
        let next = fv_step(&s, &k, dt).unwrap();
        let nonzero: Vec<(usize, usize)> = (0..7)
            .flat_map(|j| (0..7).map(move |i| (i, j)))
            .filter(|&(i, j)| next.at(i, j) != 0.0)
            .collect();
        assert_eq!(nonzero, vec![(3, 2), (2, 3), (3, 3), (4, 3), (3, 4)]);
        assert!((next.mass() - 1.0).abs() < 1e-15);
        let v = compute_velocity(&s, &k).unwrap();
        let reference = reference_update(&s, &v, 1.0, dt);
        for (a, b) in next.rho.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-12 * 100.0);
        }
    }

    #[test]
    fn flux_form_matches_pointwise_form() {
        let s = three_bump_state(0.05);
        let p = Potential::morse(5.0).unwrap();
        let k = build_kernel(&p, &s.grid);
        let v = compute_velocity(&s, &k).unwrap();
        let dt = cfl_dt(5.0, &s.grid, 0.9, 1.0).unwrap();
        let a = fv_update(&s, &v, 5.0, dt);
        let b = reference_update(&s, &v, 5.0, dt);
        let scale = s.rho.iter().fold(0.0f64, |m, r| m.max(*r));
        for (x, y) in a.rho.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn buffer_guard_fires() {
        let grid = Grid2D::<f64>::new(5, 5, 0.2, 0.2, [0.0, 0.0]).unwrap();
        let s = init_cells(&InitialDensity::Atoms(DiscreteMeasure::dirac(grid.center(0, 2))), &grid).unwrap();
        let k = build_kernel(&Potential::absolute_value(), &grid);
        assert!(matches!(fv_step(&s, &k, 0.01), Err(Error::BoundaryReached { i: 0, j: 2, .. })));
    }

    #[test]
    fn conservation_and_positivity_short_run() {
        let grid = Grid2D::square_box(-1.5, 2.5, 0.04).unwrap();
        let ini = InitialDensity::Analytic(AnalyticDensity::three_bump(100.0));
        let mut s = init_cells(&ini, &grid).unwrap();
        let p = Potential::morse(5.0).unwrap();
        let solver = FvSolver::new(p, &s.grid, VelocityAssembly::Fft);
        let d0 = solver.diagnostics(&s).unwrap();
        let dt = solver.cfl_dt(0.9, 1.0).unwrap();
        for _ in 0..100 {
            let r = solver.step(&s, dt).unwrap();
            assert!(r.max_velocity <= 5.0 * (1.0 + 1e-12));
            s = r.state;
            assert!(s.rho.iter().all(|r| *r >= -1e-15));
        }
        let d = solver.diagnostics(&s).unwrap();
        assert!((d.mass - d0.mass).abs() <= 1e-12);
        assert!((d.com[0] - d0.com[0]).abs() <= 1e-10 && (d.com[1] - d0.com[1]).abs() <= 1e-10);
        assert!(d.energy.is_finite());
        let c = second_moment_constant(5.0, &s.grid);
        assert!(d.m2 <= second_moment_bound(c, s.time, d0.m2));
    }

    #[test]
    fn diagnostics_agree_with_measure_formulas() {
        let s = three_bump_state(0.05);
        let p = Potential::morse(5.0).unwrap();
        let d = fv_diagnostics(&s, &p);
        let m = s.to_measure().unwrap();
        let com = m.center_of_mass().unwrap();
        assert!((d.com[0] - com[0]).abs() <= 1e-12 && (d.com[1] - com[1]).abs() <= 1e-12);
        assert!((d.m2 - m.second_moment()).abs() <= 1e-12);
        assert!((d.energy - m.interaction_energy(&p)).abs() <= 1e-12);
    }

    #[test]
    fn single_cell_diagnostics() {
        let grid = Grid2D::<f64>::new(3, 3, 0.5, 0.5, [0.0, 0.0]).unwrap();
        let s = init_cells(&InitialDensity::Atoms(DiscreteMeasure::dirac([0.7, 1.2])), &grid).unwrap();
        let d = fv_diagnostics(&s, &Potential::absolute_value());
        let c = grid.center(1, 2);
        assert_eq!(d.com, c);
        assert!((d.m2 - (c[0] * c[0] + c[1] * c[1])).abs() < 1e-15);
        assert!(d.energy.abs() < 1e-15);
    }

    #[test]
    fn support_diameter_of_two_cells() {
        let grid = Grid2D::<f64>::new(10, 10, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let mut rho = vec![0.0; 100];
        rho[grid.index(1, 1)] = 1.0;
        rho[grid.index(4, 5)] = 1.0;
        let s = FvState::from_density(grid, rho).unwrap();
        assert!((s.support_diameter(1e-3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier(v.iter().copied()), 2.0);
    }
}
