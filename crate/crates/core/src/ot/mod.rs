//! Exact quadratic-cost Wasserstein distance between discrete probability measures.

mod network_simplex;

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Dim};
use crate::scalar::{norm2, sub, Real};

/// A coupling between two discrete measures, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    /// `(source index, target index, transported mass)`.
    pub pairs: Vec<(usize, usize, T)>,
    /// `Σ mass · |x_src - x_tgt|²`.
    pub cost: T,
}

impl<T: Real> TransportPlan<T> {
    /// Largest deviation of the plan's row and column sums from the marginals.
    pub fn marginal_error(&self, mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> T {
        let mut rows = vec![T::zero(); mu.len()];
        let mut cols = vec![T::zero(); nu.len()];
        for &(i, j, f) in &self.pairs {
            rows[i] = rows[i] + f;
            cols[j] = cols[j] + f;
        }
        let r = rows
            .iter()
            .zip(mu.masses())
            .fold(T::zero(), |e, (a, b)| e.max((*a - *b).abs()));
        cols.iter()
            .zip(nu.masses())
            .fold(r, |e, (a, b)| e.max((*a - *b).abs()))
    }

    /// Cost of this plan recomputed from the atom positions.
    pub fn cost_against(&self, mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> T {
        self.pairs
            .iter()
            .map(|&(i, j, f)| f * norm2(sub(mu.positions()[i], nu.positions()[j])))
            .sum()
    }
}

fn check_input<T: Real>(m: &DiscreteMeasure<T>) -> Result<()> {
    if m.is_empty() {
        return Err(Error::EmptySupport);
    }
    if !m.is_probability() {
        return Err(Error::NotNormalized {
            total: m.total_mass().to_f64_lossy(),
        });
    }
    Ok(())
}

/// `d_W(mu, nu)` and an optimal plan.
///
/// Measures on a line use the monotone (sorted quantile) coupling; planar
/// measures are solved exactly as a transportation problem. Atoms lighter
/// than [`crate::measure::DROP_MASS`] do not take part in the plan.
pub fn wasserstein2<T: Real>(
    mu: &DiscreteMeasure<T>,
    nu: &DiscreteMeasure<T>,
) -> Result<(T, TransportPlan<T>)> {
    check_input(mu)?;
    check_input(nu)?;
    if mu.dim() == Dim::One && nu.dim() == Dim::One {
        let plan = quantile_coupling(mu, nu);
        return Ok((plan.cost.max(T::zero()).sqrt(), plan));
    }
    let plan = network_plan(mu, nu);
    Ok((plan.cost.max(T::zero()).sqrt(), plan))
}

/// Convenience wrapper returning only the distance.
pub fn distance<T: Real>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> Result<T> {
    wasserstein2(mu, nu).map(|(d, _)| d)
}

fn kept_atoms<T: Real>(m: &DiscreteMeasure<T>) -> (Vec<usize>, Vec<T>) {
    let drop = T::lit(crate::measure::DROP_MASS);
    let idx: Vec<usize> = (0..m.len()).filter(|&i| m.masses()[i] >= drop).collect();
    let mut w: Vec<T> = idx.iter().map(|&i| m.masses()[i]).collect();
    // both sides must carry exactly the same total for the simplex
    let total: T = w.iter().copied().sum();
    for x in &mut w {
        *x = *x / total;
    }
    (idx, w)
}

fn network_plan<T: Real>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> TransportPlan<T> {
    let (src, a) = kept_atoms(mu);
    let (tgt, b) = kept_atoms(nu);
    let n = tgt.len();
    let mut cost = Vec::with_capacity(src.len() * n);
    for &i in &src {
        let x = mu.positions()[i];
        cost.extend(tgt.iter().map(|&j| norm2(sub(x, nu.positions()[j]))));
    }
    let sol = network_simplex::solve(&a, &b, &cost);
    // rescale flows back onto the caller's masses
    let (sa, sb): (T, T) = (
        src.iter().map(|&i| mu.masses()[i]).sum(),
        tgt.iter().map(|&j| nu.masses()[j]).sum(),
    );
    let scale = (sa + sb) * T::lit(0.5);
    let mut pairs: Vec<(usize, usize, T)> = sol
        .flows
        .into_iter()
        .map(|(i, j, f)| (src[i], tgt[j], f * scale))
        .collect();
    pairs.sort_by_key(|x| (x.0, x.1));
    TransportPlan {
        pairs,
        cost: sol.cost * scale,
    }
}

/// North-west corner rule on the sorted supports; optimal in one dimension.
fn quantile_coupling<T: Real>(mu: &DiscreteMeasure<T>, nu: &DiscreteMeasure<T>) -> TransportPlan<T> {
    let order = |m: &DiscreteMeasure<T>| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        // stable sort keeps the lowest index first among coincident atoms
        idx.sort_by(|&i, &j| m.positions()[i][0].partial_cmp(&m.positions()[j][0]).unwrap());
        idx
    };
    let (oi, oj) = (order(mu), order(nu));
    let (mut ra, mut rb) = (mu.masses()[oi[0]], nu.masses()[oj[0]]);
    let (mut p, mut q) = (0usize, 0usize);
    let mut pairs = Vec::new();
    let mut cost = T::zero();
    loop {
        let f = ra.min(rb);
        let (i, j) = (oi[p], oj[q]);
        if f > T::zero() {
            let dx = mu.positions()[i][0] - nu.positions()[j][0];
            pairs.push((i, j, f));
            cost = cost + f * dx * dx;
        }
        ra = ra - f;
        rb = rb - f;
        let adv_p = ra <= rb;
        if adv_p {
            p += 1;
            if p == oi.len() {
                break;
            }
            ra = mu.masses()[oi[p]];
        } else {
            q += 1;
            if q == oj.len() {
                break;
            }
            rb = nu.masses()[oj[q]];
        }
    }
    pairs.sort_by_key(|x| (x.0, x.1));
    TransportPlan { pairs, cost }
}

/// Squared distance of the sorted-quantile formula, evaluated directly
/// from the two cumulative distribution functions.
pub fn quantile_cost_1d<T: Real>(mu: &[(T, T)], nu: &[(T, T)]) -> T {
    let sorted = |v: &[(T, T)]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    // merge the cumulative breakpoints and integrate |F⁻¹ - G⁻¹|² over [0,1]
    let mut breaks: Vec<T> = Vec::new();
    let mut acc = T::zero();
    for &(_, m) in &a {
        acc = acc + m;
        breaks.push(acc);
    }
    acc = T::zero();
    for &(_, m) in &b {
        acc = acc + m;
        breaks.push(acc);
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let inv = |v: &[(T, T)], s: T| {
        let mut acc = T::zero();
        for &(x, m) in v {
            acc = acc + m;
            if s < acc {
                return x;
            }
        }
        v[v.len() - 1].0
    };
    let mut prev = T::zero();
    let mut total = T::zero();
    for &s in &breaks {
        if s > prev {
            let mid = (prev + s) * T::lit(0.5);
            let d = inv(&a, mid) - inv(&b, mid);
            total = total + (s - prev) * d * d;
            prev = s;
        }
    }
    total
}
