//! Weighted atoms in the plane (or on the line) and the functionals the
//! diagnostics are built from.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::scalar::{norm2, sub, Point, Real};

/// Mass threshold below which atoms are dropped by [`DiscreteMeasure::normalized`].
pub const DROP_MASS: f64 = 1e-14;

/// Tolerance on `Σ m_i = 1` for probability measures.
pub const NORMALIZATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn get(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    dim: Dim,
    positions: Vec<Point<T>>,
    masses: Vec<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(dim: Dim, positions: Vec<Point<T>>, masses: Vec<T>) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} positions but {} masses",
                positions.len(),
                masses.len()
            )));
        }
        if let Some(m) = masses.iter().find(|m| !(**m >= T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid atom mass {m}")));
        }
        if positions
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidArgument("non-finite atom position".into()));
        }
        if dim == Dim::One && positions.iter().any(|p| p[1] != T::zero()) {
            return Err(Error::InvalidArgument(
                "one-dimensional atoms must have y = 0".into(),
            ));
        }
        Ok(DiscreteMeasure {
            dim,
            positions,
            masses,
        })
    }

    pub fn planar(positions: Vec<Point<T>>, masses: Vec<T>) -> Result<Self> {
        Self::new(Dim::Two, positions, masses)
    }

    pub fn on_line(xs: &[T], masses: Vec<T>) -> Result<Self> {
        Self::new(
            Dim::One,
            xs.iter().map(|&x| [x, T::zero()]).collect(),
            masses,
        )
    }

    pub fn dirac(x: Point<T>) -> Self {
        DiscreteMeasure {
            dim: Dim::Two,
            positions: vec![x],
            masses: vec![T::one()],
        }
    }

    /// Equal-mass probability measure on the given points.
    pub fn uniform(positions: Vec<Point<T>>) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::EmptySupport);
        }
        let w = T::one() / T::from_usize(n).unwrap();
        Self::planar(positions, vec![w; n])
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn positions(&self) -> &[Point<T>] {
        &self.positions
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn total_mass(&self) -> T {
        self.masses.iter().copied().sum()
    }

    pub fn center_of_mass(&self) -> Result<Point<T>> {
        let total = self.total_mass();
        if !(total > T::zero()) {
            return Err(Error::Degenerate(
                "center of mass of a zero measure".into(),
            ));
        }
        let mut c = [T::zero(), T::zero()];
        for (x, &m) in self.positions.iter().zip(&self.masses) {
            c[0] = c[0] + m * x[0];
            c[1] = c[1] + m * x[1];
        }
        Ok([c[0] / total, c[1] / total])
    }

    /// `Σ m_i |x_i|²`.
    pub fn second_moment(&self) -> T {
        self.positions
            .iter()
            .zip(&self.masses)
            .map(|(&x, &m)| m * norm2(x))
            .sum()
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter(&self) -> T {
        let mut d2 = T::zero();
        for (i, &a) in self.positions.iter().enumerate() {
            for &b in &self.positions[i + 1..] {
                d2 = d2.max(norm2(sub(a, b)));
            }
        }
        d2.sqrt()
    }

    pub fn translated(&self, shift: Point<T>) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            p[0] = p[0] + shift[0];
            if self.dim == Dim::Two {
                p[1] = p[1] + shift[1];
            }
        }
        out
    }

    /// Drops atoms lighter than [`DROP_MASS`] and rescales to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let drop = T::lit(DROP_MASS);
        let mut positions = Vec::with_capacity(self.len());
        let mut masses = Vec::with_capacity(self.len());
        for (&x, &m) in self.positions.iter().zip(&self.masses) {
            if m >= drop {
                positions.push(x);
                masses.push(m);
            }
        }
        if masses.is_empty() {
            return Err(Error::EmptySupport);
        }
        let total: T = masses.iter().copied().sum();
        for m in &mut masses {
            *m = *m / total;
        }
        Self::new(self.dim, positions, masses)
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass() - T::one()).abs().to_f64_lossy() <= NORMALIZATION_TOL
    }

    /// Nonlocal velocity `-Σ_i m_i ∇Ŵ(x - x_i)`; coincident atoms contribute nothing.
    pub fn velocity_at(&self, potential: &Potential<T>, x: Point<T>) -> Point<T> {
        let mut v = [T::zero(), T::zero()];
        for (&y, &m) in self.positions.iter().zip(&self.masses) {
            let g = potential.grad_hat(sub(x, y));
            v[0] = v[0] - m * g[0];
            v[1] = v[1] - m * g[1];
        }
        v
    }

    /// `½ Σ_i Σ_j m_i m_j W(x_i - x_j)`.
    pub fn interaction_energy(&self, potential: &Potential<T>) -> T {
        let rows: Vec<T> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let xi = self.positions[i];
                // W(0) = 0 and W is even, so half the double sum is the upper triangle
                let mut acc = T::zero();
                for j in (i + 1)..self.len() {
                    acc = acc + self.masses[j] * potential.eval(sub(xi, self.positions[j]));
                }
                self.masses[i] * acc
            })
            .collect();
        rows.into_iter().sum()
    }

    /// Reads the atom CSV format: a header line, then `x,mass` or `x,y,mass` rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let ncol = rdr.headers()?.len();
        let dim = match ncol {
            2 => Dim::One,
            3 => Dim::Two,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "atom CSV needs 2 or 3 columns, header has {ncol}"
                )))
            }
        };
        let mut positions = Vec::new();
        let mut masses = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let field = |k: usize| -> Result<T> {
                let s = record.get(k).unwrap_or_default();
                s.parse::<f64>().map(T::lit).map_err(|_| {
                    Error::InvalidArgument(format!("bad number `{s}` in atom CSV"))
                })
            };
            match dim {
                Dim::One => {
                    positions.push([field(0)?, T::zero()]);
                    masses.push(field(1)?);
                }
                Dim::Two => {
                    positions.push([field(0)?, field(1)?]);
                    masses.push(field(2)?);
                }
            }
        }
        Self::new(dim, positions, masses)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        match self.dim {
            Dim::One => wtr.write_record(["x", "mass"])?,
            Dim::Two => wtr.write_record(["x", "y", "mass"])?,
        }
        for (x, m) in self.positions.iter().zip(&self.masses) {
            let (x0, x1, m) = (x[0].to_f64_lossy(), x[1].to_f64_lossy(), m.to_f64_lossy());
            match self.dim {
                Dim::One => wtr.write_record([fmt_f64(x0), fmt_f64(m)])?,
                Dim::Two => wtr.write_record([fmt_f64(x0), fmt_f64(x1), fmt_f64(m)])?,
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest representation that round-trips through `parse::<f64>`.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut impl Rng, n: usize) -> DiscreteMeasure<f64> {
        let pos = (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let masses = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        DiscreteMeasure::planar(pos, masses).unwrap().normalized().unwrap()
    }

    #[test]
    fn moments_examples() {
        let m = DiscreteMeasure::dirac([2.0, 3.0]);
        assert_eq!(m.total_mass(), 1.0);
        assert_eq!(m.center_of_mass().unwrap(), [2.0, 3.0]);
        assert_eq!(m.second_moment(), 13.0);

        let m = DiscreteMeasure::planar(vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.center_of_mass().unwrap(), [0.0, 0.0]);
        assert_eq!(m.second_moment(), 1.0);
    }

    #[test]
    fn zero_measure_has_no_center() {
        let m = DiscreteMeasure::planar(vec![[1.0, 0.0]], vec![0.0]).unwrap();
        assert!(matches!(m.center_of_mass(), Err(Error::Degenerate(_))));
        assert!(matches!(m.normalized(), Err(Error::EmptySupport)));
    }

    #[test]
    fn constructor_validates() {
        assert!(DiscreteMeasure::planar(vec![[0.0, 0.0]], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::planar(vec![[0.0, 0.0]], vec![]).is_err());
        assert!(DiscreteMeasure::new(Dim::One, vec![[0.0, 1.0]], vec![1.0]).is_err());
        assert!(DiscreteMeasure::planar(vec![[f64::NAN, 0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn velocity_examples() {
        let abs = Potential::absolute_value();
        let single = DiscreteMeasure::dirac([0.3, -0.7]);
        assert_eq!(single.velocity_at(&abs, [0.3, -0.7]), [0.0, 0.0]);

        let origin = DiscreteMeasure::dirac([0.0, 0.0]);
        assert_eq!(origin.velocity_at(&abs, [2.0, 0.0]), [-1.0, 0.0]);

        let pair = DiscreteMeasure::planar(vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(pair.velocity_at(&abs, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn energy_examples() {
        let abs = Potential::absolute_value();
        assert_eq!(DiscreteMeasure::dirac([1.0, 1.0]).interaction_energy(&abs), 0.0);
        let pair = DiscreteMeasure::planar(vec![[1.0, 0.0], [-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert_relative_eq!(pair.interaction_energy(&abs), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn energy_matches_double_loop_and_is_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Potential::morse(5.0).unwrap();
        for _ in 0..20 {
            let m = random_measure(&mut rng, 30);
            let mut brute = 0.0;
            for (xi, mi) in m.positions().iter().zip(m.masses()) {
                for (xj, mj) in m.positions().iter().zip(m.masses()) {
                    brute += 0.5 * mi * mj * p.eval([xi[0] - xj[0], xi[1] - xj[1]]);
                }
            }
            let e = m.interaction_energy(&p);
            assert!((e - brute).abs() <= 1e-13);
            let shifted = m.translated([3.7, -1.25]).interaction_energy(&p);
            assert!((e - shifted).abs() <= 1e-12);
        }
    }

    #[test]
    fn velocity_is_bounded_and_one_sided_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in [Potential::morse(5.0).unwrap(), Potential::absolute_value()] {
            for _ in 0..20 {
                let m = random_measure(&mut rng, 12);
                let mass = m.total_mass();
                for k in 0..500 {
                    // include atom locations, where the field jumps
                    let x = if k % 5 == 0 {
                        m.positions()[k % m.len()]
                    } else {
                        [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]
                    };
                    let y = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
                    let (vx, vy) = (m.velocity_at(&p, x), m.velocity_at(&p, y));
                    assert!(crate::scalar::norm(vx) <= p.w_inf() * mass * (1.0 + 1e-14));
                    let d = sub(x, y);
                    let lhs = (vx[0] - vy[0]) * d[0] + (vx[1] - vy[1]) * d[1];
                    assert!(lhs <= -p.lambda() * mass * norm2(d) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = DiscreteMeasure::planar(vec![[0.1, -2.0], [1e-3, 7.25]], vec![0.25, 0.75]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,y,mass\n"));
        assert_eq!(DiscreteMeasure::<f64>::read_csv(&buf[..]).unwrap(), m);

        let line = DiscreteMeasure::on_line(&[0.5, -0.5], vec![0.5, 0.5]).unwrap();
        let mut buf = Vec::new();
        line.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,mass\n"));
        assert_eq!(DiscreteMeasure::<f64>::read_csv(&buf[..]).unwrap(), line);
    }

    #[test]
    fn csv_rejects_bad_shapes() {
        assert!(DiscreteMeasure::<f64>::read_csv("a,b,c,d\n1,2,3,4\n".as_bytes()).is_err());
        assert!(DiscreteMeasure::<f64>::read_csv("x,y,mass\n1,zz,3\n".as_bytes()).is_err());
    }

    #[test]
    fn normalization_drops_dust() {
        let m = DiscreteMeasure::planar(vec![[0.0, 0.0], [1.0, 0.0]], vec![2.0, 1e-15]).unwrap();
        let n = m.normalized().unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n.total_mass(), 1.0);
    }
}
