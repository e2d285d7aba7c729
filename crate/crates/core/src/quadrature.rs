//! Four-point Gauss-Legendre rule and its tensor products on rectangles.

use crate::scalar::Real;

/// Nodes and weights of the 4-point rule on `[-1, 1]`, symmetric ordering.
pub fn gauss_legendre_4<T: Real>() -> ([T; 4], [T; 4]) {
    let s65 = (6.0f64 / 5.0).sqrt();
    let inner = (3.0 / 7.0 - 2.0 / 7.0 * s65).sqrt();
    let outer = (3.0 / 7.0 + 2.0 / 7.0 * s65).sqrt();
    let s30 = 30.0f64.sqrt();
    let w_inner = (18.0 + s30) / 36.0;
    let w_outer = (18.0 - s30) / 36.0;
    (
        [T::lit(-outer), T::lit(-inner), T::lit(inner), T::lit(outer)],
        [T::lit(w_outer), T::lit(w_inner), T::lit(w_inner), T::lit(w_outer)],
    )
}

/// Tensor 4×4 Gauss-Legendre rule on `[x0, x1] × [y0, y1]`.
pub fn tensor_4x4<T: Real, F>(x0: T, x1: T, y0: T, y1: T, mut f: F) -> T
where
    F: FnMut(T, T) -> T,
{
    let (nodes, weights) = gauss_legendre_4::<T>();
    let half = T::lit(0.5);
    let (cx, hx) = ((x0 + x1) * half, (x1 - x0) * half);
    let (cy, hy) = ((y0 + y1) * half, (y1 - y0) * half);
    let mut acc = T::zero();
    for (xi, wi) in nodes.iter().zip(&weights) {
        let x = cx + hx * *xi;
        let mut row = T::zero();
        for (yj, wj) in nodes.iter().zip(&weights) {
            row = row + *wj * f(x, cy + hy * *yj);
        }
        acc = acc + *wi * row;
    }
    acc * hx * hy
}

/// Same rule for a two-component integrand.
pub fn tensor_4x4_pair<T: Real, F>(x0: T, x1: T, y0: T, y1: T, mut f: F) -> [T; 2]
where
    F: FnMut(T, T) -> [T; 2],
{
    let (nodes, weights) = gauss_legendre_4::<T>();
    let half = T::lit(0.5);
    let (cx, hx) = ((x0 + x1) * half, (x1 - x0) * half);
    let (cy, hy) = ((y0 + y1) * half, (y1 - y0) * half);
    let mut acc = [T::zero(); 2];
    for (xi, wi) in nodes.iter().zip(&weights) {
        let x = cx + hx * *xi;
        let mut row = [T::zero(); 2];
        for (yj, wj) in nodes.iter().zip(&weights) {
            let v = f(x, cy + hy * *yj);
            row[0] = row[0] + *wj * v[0];
            row[1] = row[1] + *wj * v[1];
        }
        acc[0] = acc[0] + *wi * row[0];
        acc[1] = acc[1] + *wi * row[1];
    }
    let jac = hx * hy;
    [acc[0] * jac, acc[1] * jac]
}
