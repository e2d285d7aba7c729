//! Sticky particles: fixed-step RK4, barycentric gluing on contact.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Dim};
use crate::potentials::Potential;
use crate::scalar::{norm2, sub, Point, Real};

/// Relative merge radius when none is given.
pub const DEFAULT_RELATIVE_MERGE_RADIUS: f64 = 1e-6;

/// Contacts within this step fraction of the earliest one are glued together.
const SIMULTANEOUS: f64 = 1e-9;

/// One gluing event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub time: f64,
    /// Original indices of every atom in the cluster, ascending.
    pub merged: Vec<usize>,
    /// Original index carried by the glued atom (the lowest one).
    pub survivor: usize,
}

#[derive(Debug, Clone)]
pub struct ParticleSystem<T: Real> {
    dim: Dim,
    positions: Vec<Point<T>>,
    masses: Vec<T>,
    /// Original index of each live atom, ascending.
    ids: Vec<usize>,
    time: T,
    potential: Potential<T>,
    merge_radius: T,
    merge_log: Vec<MergeEvent>,
}

/// `x'_i = -Σ_j m_j ∇Ŵ(x_i - x_j)`.
fn velocities<T: Real>(positions: &[Point<T>], masses: &[T], p: &Potential<T>) -> Vec<Point<T>> {
    positions
        .par_iter()
        .map(|&x| {
            let mut v = [T::zero(), T::zero()];
            for (&y, &m) in positions.iter().zip(masses) {
                let g = p.grad_hat(sub(x, y));
                v[0] = v[0] - m * g[0];
                v[1] = v[1] - m * g[1];
            }
            v
        })
        .collect()
}

fn axpy<T: Real>(x: &[Point<T>], k: &[Point<T>], h: T) -> Vec<Point<T>> {
    x.iter()
        .zip(k)
        .map(|(a, b)| [a[0] + h * b[0], a[1] + h * b[1]])
        .collect()
}

/// Velocities of the current atoms.
pub fn particle_rhs<T: Real>(s: &ParticleSystem<T>) -> Vec<Point<T>> {
    velocities(&s.positions, &s.masses, &s.potential)
}

impl<T: Real> ParticleSystem<T> {
    /// `merge_radius = None` selects `1e-6 · diam(ini)` (or `1e-6` for a single point).
    pub fn new(ini: &DiscreteMeasure<T>, potential: Potential<T>, merge_radius: Option<T>) -> Result<Self> {
        if ini.is_empty() {
            return Err(Error::EmptySupport);
        }
        let r = match merge_radius {
            Some(r) if r > T::zero() && r.is_finite() => r,
            Some(r) => {
                return Err(Error::InvalidArgument(format!("merge radius must be positive, got {r}")))
            }
            None => {
                let d = ini.diameter();
                let rel = T::lit(DEFAULT_RELATIVE_MERGE_RADIUS);
                if d > T::zero() {
                    rel * d
                } else {
                    rel
                }
            }
        };
        let mut s = ParticleSystem {
            dim: ini.dim(),
            positions: ini.positions().to_vec(),
            masses: ini.masses().to_vec(),
            ids: (0..ini.len()).collect(),
            time: T::zero(),
            potential,
            merge_radius: r,
            merge_log: Vec::new(),
        };
        s.merge_pass();
        Ok(s)
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point<T>] {
        &self.positions
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn merge_radius(&self) -> T {
        self.merge_radius
    }

    pub fn merge_log(&self) -> &[MergeEvent] {
        &self.merge_log
    }

    pub fn state(&self) -> DiscreteMeasure<T> {
        DiscreteMeasure::new(self.dim, self.positions.clone(), self.masses.clone())
            .expect("particle state stays valid")
    }

    /// RK4 end state and the explicit Euler prediction `x + h k1`.
    fn rk4(&self, h: T) -> (Vec<Point<T>>, Vec<Point<T>>) {
        let p = &self.potential;
        let x = &self.positions;
        let m = &self.masses;
        let half = T::lit(0.5);
        let k1 = velocities(x, m, p);
        let k2 = velocities(&axpy(x, &k1, h * half), m, p);
        let k3 = velocities(&axpy(x, &k2, h * half), m, p);
        let k4 = velocities(&axpy(x, &k3, h), m, p);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        let next = (0..x.len())
            .map(|i| {
                let c = |d: usize| k1[i][d] + two * k2[i][d] + two * k3[i][d] + k4[i][d];
                [x[i][0] + sixth * c(0), x[i][1] + sixth * c(1)]
            })
            .collect();
        (next, axpy(x, &k1, h))
    }

    /// Advances by `dt`. A step whose trial RK4 path brings atoms within the
    /// merge radius is split once at the earliest contact: the colliding
    /// cluster is glued there and the rest of the step is taken with
    /// [`Self::advance`].
    pub fn step(&mut self, dt: T) -> Result<()> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let t0 = self.time;
        let (next, euler) = self.rk4(dt);
        let edges = contact_pairs(&self.positions, &[&next, &euler], self.merge_radius);
        let s0 = edges.iter().map(|e| e.2).fold(T::one(), |a, b| a.min(b));
        if edges.is_empty() || !(s0 > T::zero() && s0 < T::one()) {
            self.accept(next, timed(edges, t0, dt), t0 + dt);
            return Ok(());
        }
        let h = s0 * dt;
        let (mid, _) = self.rk4(h);
        let tc = t0 + h;
        let cut = s0 + T::lit(SIMULTANEOUS);
        let first = edges
            .into_iter()
            .filter(|e| e.2 <= cut)
            .map(|(i, j, _)| (i, j, tc))
            .collect();
        self.accept(mid, first, tc);
        self.advance(dt - h);
        self.time = t0 + dt;
        Ok(())
    }

    /// One RK4 step of length `h` followed by gluing every cluster whose
    /// members came within the merge radius on the RK4 or explicit Euler
    /// path, or sit within it at the end.
    fn advance(&mut self, h: T) {
        let t0 = self.time;
        let (next, euler) = self.rk4(h);
        let edges = contact_pairs(&self.positions, &[&next, &euler], self.merge_radius);
        self.accept(next, timed(edges, t0, h), t0 + h);
    }

    fn accept(&mut self, next: Vec<Point<T>>, edges: Vec<(usize, usize, T)>, t: T) {
        self.positions = next;
        self.time = t;
        self.glue(edges);
        self.merge_pass();
    }

    /// Glues clusters until all pairwise distances exceed the merge radius.
    fn merge_pass(&mut self) {
        loop {
            let x = &self.positions;
            let edges: Vec<_> = contact_pairs(x, &[x], self.merge_radius)
                .into_iter()
                .map(|(i, j, _)| (i, j, self.time))
                .collect();
            if edges.is_empty() {
                return;
            }
            self.glue(edges);
        }
    }

    /// Replaces each connected component of `edges` by one atom at its
    /// barycenter; the log entry carries the earliest contact time.
    fn glue(&mut self, edges: Vec<(usize, usize, T)>) {
        if edges.is_empty() {
            return;
        }
        let n = self.positions.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut first = vec![None::<T>; n];
        for &(i, j, t) in &edges {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            let ta = [first[a], first[b], Some(t)].into_iter().flatten().fold(t, |m, v| m.min(v));
            // the lower slot (lowest original id) becomes the root
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi] = lo;
            first[lo] = Some(ta);
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let root = find(&mut parent, i);
            members[root].push(i);
        }
        let mut positions = Vec::with_capacity(n);
        let mut masses = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for (root, group) in members.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            if group.len() == 1 {
                positions.push(self.positions[root]);
                masses.push(self.masses[root]);
                ids.push(self.ids[root]);
                continue;
            }
            let mass: T = group.iter().map(|&k| self.masses[k]).sum();
            let mut c = [T::zero(), T::zero()];
            for &k in group {
                c[0] = c[0] + self.masses[k] * self.positions[k][0];
                c[1] = c[1] + self.masses[k] * self.positions[k][1];
            }
            positions.push([c[0] / mass, c[1] / mass]);
            masses.push(mass);
            ids.push(self.ids[root]);
            self.merge_log.push(MergeEvent {
                time: first[root].unwrap_or(self.time).to_f64_lossy(),
                merged: group.iter().map(|&k| self.ids[k]).collect(),
                survivor: self.ids[root],
            });
        }
        self.positions = positions;
        self.masses = masses;
        self.ids = ids;
    }
}

/// Contact fractions of a step `[t0, t0 + h]` as times.
fn timed<T: Real>(edges: Vec<(usize, usize, T)>, t0: T, h: T) -> Vec<(usize, usize, T)> {
    edges.into_iter().map(|(i, j, s)| (i, j, t0 + s * h)).collect()
}

/// Earliest fraction `s ∈ [0, 1]` at which `|d0 + s e| ≤ r`, or at which
/// `d0 + s e` crosses the line through the origin normal to `d0` (the pair
/// passes each other), if either happens.
fn segment_contact<T: Real>(d0: Point<T>, e: Point<T>, r: T) -> Option<T> {
    let r2 = r * r;
    let c0 = norm2(d0);
    if c0 <= r2 {
        return Some(T::zero());
    }
    let a = norm2(e);
    if !(a > T::zero()) {
        return None;
    }
    let b = d0[0] * e[0] + d0[1] * e[1];
    let s_min = (-b / a).max(T::zero()).min(T::one());
    if c0 + T::lit(2.0) * s_min * b + s_min * s_min * a <= r2 {
        let disc = (b * b - a * (c0 - r2)).max(T::zero());
        return Some(((-b - disc.sqrt()) / a).max(T::zero()).min(s_min));
    }
    if c0 + b < T::zero() {
        return Some(c0 / -b);
    }
    None
}

/// Pairs `(i, j, s)`, `i < j`, whose relative position, moving linearly
/// from `x` to any of `paths`, comes within `r` or passes through; `s` is
/// the earliest such fraction. Candidates come from a sweep over bounding boxes in `x`.
fn contact_pairs<T: Real>(x: &[Point<T>], paths: &[&[Point<T>]], r: T) -> Vec<(usize, usize, T)> {
    let half = r * T::lit(0.5);
    let boxes: Vec<[T; 4]> = (0..x.len())
        .map(|i| {
            let mut b = [x[i][0], x[i][0], x[i][1], x[i][1]];
            for p in paths {
                b[0] = b[0].min(p[i][0]);
                b[1] = b[1].max(p[i][0]);
                b[2] = b[2].min(p[i][1]);
                b[3] = b[3].max(p[i][1]);
            }
            [b[0] - half, b[1] + half, b[2] - half, b[3] + half]
        })
        .collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| boxes[a][0].partial_cmp(&boxes[b][0]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j][0] > boxes[i][1] {
                break;
            }
            if boxes[j][2] > boxes[i][3] || boxes[i][2] > boxes[j][3] {
                continue;
            }
            let d0 = sub(x[i], x[j]);
            let s = paths
                .iter()
                .filter_map(|p| segment_contact(d0, sub(sub(p[i], p[j]), d0), r))
                .reduce(|a, b| a.min(b));
            if let Some(s) = s {
                out.push((i.min(j), i.max(j), s));
            }
        }
    }
    out
}

/// Snapshot of a particle trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub time: T,
    pub measure: DiscreteMeasure<T>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub snapshots: Vec<Snapshot<T>>,
    pub merge_log: Vec<MergeEvent>,
    pub merge_radius: T,
}

/// One row of the trajectory index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub file: String,
    pub n_atoms: usize,
    pub mass: f64,
    pub com: [f64; 2],
    pub m2: f64,
    pub energy: f64,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &Snapshot<T> {
        self.snapshots.last().expect("trajectory has a snapshot")
    }

    /// Snapshot nearest to `t`.
    pub fn at(&self, t: T) -> &Snapshot<T> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time - t).abs().partial_cmp(&(b.time - t).abs()).unwrap())
            .expect("trajectory has a snapshot")
    }

    /// Writes `snapshot_NNNNN.csv` per snapshot and `index.json`.
    pub fn export(&self, dir: &Path, potential: &Potential<T>) -> Result<Vec<SnapshotRecord>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = Vec::with_capacity(self.snapshots.len());
        for (k, s) in self.snapshots.iter().enumerate() {
            let file = format!("snapshot_{k:05}.csv");
            s.measure.save(&dir.join(&file))?;
            index.push(snapshot_record(s, file, potential));
        }
        let path = dir.join("index.json");
        let json = serde_json::to_string_pretty(&index)?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(index)
    }
}

pub fn snapshot_record<T: Real>(s: &Snapshot<T>, file: String, potential: &Potential<T>) -> SnapshotRecord {
    let com = s.measure.center_of_mass().unwrap_or([T::zero(), T::zero()]);
    SnapshotRecord {
        t: s.time.to_f64_lossy(),
        file,
        n_atoms: s.measure.len(),
        mass: s.measure.total_mass().to_f64_lossy(),
        com: [com[0].to_f64_lossy(), com[1].to_f64_lossy()],
        m2: s.measure.second_moment().to_f64_lossy(),
        energy: s.measure.interaction_energy(potential).to_f64_lossy(),
    }
}

/// `K = 2w∞ + w∞²` of the particle second-moment bound.
pub fn second_moment_constant<T: Real>(w_inf: T) -> T {
    T::lit(2.0) * w_inf + w_inf * w_inf
}

/// Runs to exactly `t_end`, snapshotting every step.
pub fn simulate<T: Real>(
    ini: &DiscreteMeasure<T>,
    potential: &Potential<T>,
    t_end: T,
    dt: T,
    merge_radius: Option<T>,
) -> Result<Trajectory<T>> {
    simulate_with(ini, potential, t_end, dt, merge_radius, 1, |_| Ok(()))
}

/// Runs to exactly `t_end`, snapshotting every `snapshot_every` steps and at
/// the end. `observe` sees the system after every step.
pub fn simulate_with<T: Real, F>(
    ini: &DiscreteMeasure<T>,
    potential: &Potential<T>,
    t_end: T,
    dt: T,
    merge_radius: Option<T>,
    snapshot_every: usize,
    mut observe: F,
) -> Result<Trajectory<T>>
where
    F: FnMut(&ParticleSystem<T>) -> Result<()>,
{
    if !(t_end > T::zero()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {t_end}")));
    }
    if !(dt > T::zero() && dt <= t_end) {
        return Err(Error::InvalidArgument(format!("time step must lie in (0, T], got {dt}")));
    }
    if !ini.is_probability() {
        return Err(Error::NotNormalized {
            total: ini.total_mass().to_f64_lossy(),
        });
    }
    let every = snapshot_every.max(1);
    let mut sys = ParticleSystem::new(ini, *potential, merge_radius)?;
    let n_steps = (t_end / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let mut snapshots = vec![Snapshot {
        time: T::zero(),
        measure: sys.state(),
    }];
    for k in 1..=n_steps {
        let h = if k == n_steps { t_end - sys.time() } else { dt };
        if h > T::zero() {
            sys.step(h)?;
        }
        observe(&sys)?;
        if k % every == 0 || k == n_steps {
            snapshots.push(Snapshot {
                time: if k == n_steps { t_end } else { sys.time() },
                measure: sys.state(),
            });
        }
    }
    Ok(Trajectory {
        snapshots,
        merge_log: sys.merge_log.clone(),
        merge_radius: sys.merge_radius,
    })
}
