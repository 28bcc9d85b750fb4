//! Fixed-node quadrature.

use std::f64::consts::PI;

/// Node count used for every smooth periodic integrand on `[0, 1]`.
pub const NODES: usize = 4096;

/// Composite trapezoid rule on `[lo, hi]` with `intervals` subintervals.
///
/// Spectrally accurate when the integrand extends to a smooth periodic
/// function, including even extensions about both endpoints.
pub fn trapezoid<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    let h = (hi - lo) / intervals as f64;
    let inner: f64 = (1..intervals).map(|k| f(lo + h * k as f64)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

/// [`trapezoid`] on `[0, 1]` with [`NODES`] intervals.
pub fn unit_trapezoid<F: FnMut(f64) -> f64>(f: F) -> f64 {
    trapezoid(f, 0.0, 1.0, NODES)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(degree: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; degree];
    let mut weights = vec![0.0; degree];
    let nf = degree as f64;
    for i in 0..degree.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(degree, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(degree, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[degree - 1 - i] = x;
        weights[i] = w;
        weights[degree - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_k(x)` and `P_k'(x)` by the three-term recurrence.
fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (1.0, 0.0);
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[0, 1]`: `panels` equal panels of `degree` nodes.
pub fn composite_gauss_unit(panels: usize, degree: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(degree);
    let h = 1.0 / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let mid = (p as f64 + 0.5) * h;
            x.iter().zip(&w).map(move |(&xi, &wi)| (mid + 0.5 * h * xi, 0.5 * h * wi)).collect::<Vec<_>>()
        })
        .collect()
}
