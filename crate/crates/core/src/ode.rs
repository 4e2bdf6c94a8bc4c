//! Adaptive Dormand-Prince 5(4) integration for small fixed-size systems.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
    /// Largest step the controller may take.
    pub h_max: T,
    pub max_steps: usize,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances { rtol: T::lit(1e-10), atol: T::lit(1e-12), h_max: T::infinity(), max_steps: 2_000_000 }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn tight(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol: T::lit(rtol), atol: T::lit(atol), ..Default::default() }
    }

    pub fn with_h_max(mut self, h: T) -> Self {
        self.h_max = h;
        self
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error coefficients b - b*
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * T::lit(*c);
        for i in 0..N {
            out[i] = out[i] + hc * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` forward from `t0`, stopping exactly at every point of `stops`.
///
/// `at_stop(i, t, y)` is called at each stop. `after_step(t, y)` runs after every accepted
/// step and may rescale the state in place; it returns `true` when it modified `y`.
pub fn integrate_with<T, const N: usize, F, S, A>(
    mut f: F,
    t0: T,
    y0: [T; N],
    stops: &[T],
    tol: &Tolerances<T>,
    mut at_stop: S,
    mut after_step: A,
) -> Result<[T; N]>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
    S: FnMut(usize, T, &[T; N]),
    A: FnMut(T, &mut [T; N]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let Some(&t_end) = stops.last() else {
        return Ok(y);
    };
    let span = t_end - t0;
    if span < T::zero() {
        return Err(Error::InvalidParameter("integration runs forward only".into()));
    }
    let mut h = initial_step(&mut f, t, &y, &k1, tol).min(tol.h_max).min(span.max(T::epsilon()));
    let tiny = T::lit(64.0) * T::epsilon();
    let mut steps = 0usize;
    for (idx, &stop) in stops.iter().enumerate() {
        while t < stop {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::StepUnderflow { at: t.to_f64_lossy() });
            }
            let remaining = stop - t;
            let last = h >= remaining;
            let hh = if last { remaining } else { h };
            let (y_new, k7, err) = dp_step(&mut f, t, &y, &k1, hh, tol);
            if err <= T::one() || hh <= tiny * (T::one() + t.abs()) {
                if hh <= tiny * (T::one() + t.abs()) && err > T::one() {
                    return Err(Error::StepUnderflow { at: t.to_f64_lossy() });
                }
                t = if last { stop } else { t + hh };
                y = y_new;
                k1 = k7;
                if after_step(t, &mut y) {
                    k1 = f(t, &y);
                }
                let fac = controller(err);
                if !last {
                    h = (hh * fac).min(tol.h_max);
                } else {
                    h = h.max(hh * fac).min(tol.h_max);
                }
            } else {
                let fac = controller(err).min(T::one());
                h = hh * fac;
            }
        }
        at_stop(idx, t, &y);
    }
    Ok(y)
}

/// Integrate from `t0` to `t1` and return the end state.
pub fn integrate<T, const N: usize, F>(f: F, t0: T, y0: [T; N], t1: T, tol: &Tolerances<T>) -> Result<[T; N]>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    integrate_with(f, t0, y0, &[t1], tol, |_, _, _| {}, |_, _| false)
}

fn controller<T: Real>(err: T) -> T {
    if err == T::zero() {
        return T::lit(5.0);
    }
    (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
}

fn error_norm<T: Real, const N: usize>(y: &[T; N], y_new: &[T; N], e: &[T; N], tol: &Tolerances<T>) -> T {
    let mut acc = T::zero();
    for i in 0..N {
        let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        let r = e[i] / sc;
        acc = acc + r * r;
    }
    (acc / T::from_usize(N).unwrap()).sqrt()
}

fn dp_step<T, const N: usize, F>(f: &mut F, t: T, y: &[T; N], k1: &[T; N], h: T, tol: &Tolerances<T>) -> ([T; N], [T; N], T)
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let k2 = f(t + h * T::lit(C2), &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + h * T::lit(C3), &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + h * T::lit(C4), &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + h * T::lit(C5), &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new);
    let mut e = [T::zero(); N];
    for i in 0..N {
        e[i] = h
            * (T::lit(E1) * k1[i] + T::lit(E3) * k3[i] + T::lit(E4) * k4[i] + T::lit(E5) * k5[i] + T::lit(E6) * k6[i]
                + T::lit(E7) * k7[i]);
    }
    let err = error_norm(y, &y_new, &e, tol);
    (y_new, k7, err)
}

fn initial_step<T, const N: usize, F>(f: &mut F, t: T, y: &[T; N], k1: &[T; N], tol: &Tolerances<T>) -> T
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for i in 0..N {
        let sc = tol.atol + tol.rtol * y[i].abs();
        d0 = d0 + (y[i] / sc).powi(2);
        d1 = d1 + (k1[i] / sc).powi(2);
    }
    let n = T::from_usize(N).unwrap();
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    let y1 = axpy(y, h0, &[(1.0, k1)]);
    let k2 = f(t + h0, &y1);
    let mut d2 = T::zero();
    for i in 0..N {
        let sc = tol.atol + tol.rtol * y[i].abs();
        d2 = d2 + ((k2[i] - k1[i]) / sc).powi(2);
    }
    let d2 = (d2 / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / d1.max(d2)).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1)
}

/// Classical fixed-step fourth-order Runge-Kutta on a slice state.
///
/// `f(t, y, dy)` writes the derivative; scratch buffers are reused between steps.
pub struct Rk4<T> {
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

impl<T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>> Rk4<T> {
    pub fn new(n: usize) -> Self {
        Rk4 { k: std::array::from_fn(|_| vec![T::default(); n]), tmp: vec![T::default(); n] }
    }

    pub fn step<F: FnMut(f64, &[T], &mut [T])>(&mut self, f: &mut F, t: f64, h: f64, y: &mut [T]) {
        let n = y.len();
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        f(t, y, k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        f(t + 0.5 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        f(t + 0.5 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        f(t + h, tmp, k4);
        for i in 0..n {
            y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_over_many_periods() {
        let tol = Tolerances::<f64>::tight(1e-12, 1e-14);
        let y = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 100.0, &tol).unwrap();
        assert!((y[0] - 100f64.sin()).abs() < 1e-9, "{}", y[0]);
        assert!((y[1] - 100f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn stops_are_hit_exactly() {
        let stops: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
        let mut seen = Vec::new();
        integrate_with(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            &stops,
            &Tolerances::tight(1e-12, 1e-14),
            |i, t, y| seen.push((i, t, y[0])),
            |_, _| false,
        )
        .unwrap();
        assert_eq!(seen.len(), 10);
        for (i, t, y) in seen {
            assert_eq!(t, stops[i]);
            assert!((y - (-t).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn rescaling_hook_keeps_linear_solution_proportional() {
        let mut scale = 0.0f64;
        let y = integrate_with(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            &[50.0],
            &Tolerances::tight(1e-11, 0.0),
            |_, _, _| {},
            |_, y| {
                if y[0] > 1e10 {
                    scale += y[0].ln();
                    y[0] = 1.0;
                    true
                } else {
                    false
                }
            },
        )
        .unwrap();
        assert!(((scale + y[0].ln()) - 50.0).abs() < 1e-8);
    }

    #[test]
    fn single_precision_instance() {
        let tol = Tolerances::<f32>::tight(1e-5, 1e-6);
        let y = integrate(|_, y: &[f32; 1]| [-2.0 * y[0]], 0.0f32, [1.0], 1.0, &tol).unwrap();
        assert!((y[0] - (-2f32).exp()).abs() < 1e-4);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |n: usize| {
            let mut rk = Rk4::<f64>::new(1);
            let mut y = [1.0];
            let h = 1.0 / n as f64;
            let mut f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = -y[0];
            for i in 0..n {
                rk.step(&mut f, i as f64 * h, h, &mut y);
            }
            (y[0] - (-1f64).exp()).abs()
        };
        let ratio = run(20) / run(40);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }
}
