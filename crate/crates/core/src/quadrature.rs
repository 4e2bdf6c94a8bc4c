//! Gauss-Legendre rules and tensor-product helpers.

use crate::scalar::Real;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Newton iteration on the three-term recurrence, started from the Chebyshev-like
/// asymptotic guess.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (
        x.into_iter().map(T::lit).collect(),
        w.into_iter().map(T::lit).collect(),
    )
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (b + a);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `n` points each on `[a, b]`.
pub fn composite_gauss<T: Real>(n: usize, panels: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let panels = panels.max(1);
    let h = (b - a) / T::from_usize(panels).unwrap();
    let mut xs = Vec::with_capacity(n * panels);
    let mut ws = Vec::with_capacity(n * panels);
    for p in 0..panels {
        let lo = a + h * T::from_usize(p).unwrap();
        let (x, w) = gauss_legendre_on(n, lo, lo + h);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

/// Integrate `f` over `[a, b]` with a composite rule.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, n: usize, panels: usize) -> T {
    let (x, w) = composite_gauss(n, panels, a, b);
    x.iter()
        .zip(w.iter())
        .fold(T::zero(), |acc, (&xi, &wi)| acc + wi * f(xi))
}
