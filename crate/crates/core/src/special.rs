//! Special functions and the closed-form Purcell series for the parabolic mirror.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `S(u) = int_0^u sin^2(y)/y dy`, accurate to about `1e-12` absolute.
///
/// Composite Gauss-Legendre on unit panels; the integrand is entire once the
/// removable point at `y = 0` is replaced by its limit.
pub fn s_integral<T: Real>(u: T) -> Result<T> {
    if !(u >= T::zero()) || !u.is_finite() {
        return Err(Error::Domain(format!("S(u) needs finite u >= 0, got {u:?}")));
    }
    if u == T::zero() {
        return Ok(T::zero());
    }
    let (nodes, weights) = gauss_legendre::<T>(20);
    let panel = T::one();
    let panels = (u / panel).ceil().to_usize().unwrap_or(1).max(1);
    let h = u / T::from_usize(panels).unwrap();
    let half = T::lit(0.5);
    let mut sum = T::zero();
    for p in 0..panels {
        let a = h * T::from_usize(p).unwrap();
        let mut panel_sum = T::zero();
        for (&x, &w) in nodes.iter().zip(weights.iter()) {
            let y = a + half * h * (x + T::one());
            panel_sum = panel_sum + w * sin2_over(y);
        }
        sum = sum + panel_sum * half * h;
    }
    Ok(sum)
}

#[inline]
fn sin2_over<T: Real>(y: T) -> T {
    if y.abs() < T::lit(1e-4) {
        // sin^2 y / y = y - y^3/3 + 2 y^5/45
        let y2 = y * y;
        y * (T::one() - y2 / T::lit(3.0) + T::lit(2.0 / 45.0) * y2 * y2)
    } else {
        let s = y.sin();
        s * s / y
    }
}

/// Cosine integral `Ci(x) = gamma + ln x + int_0^x (cos t - 1)/t dt` for `x > 0`.
pub fn cosine_integral(x: f64) -> f64 {
    assert!(x > 0.0, "Ci needs x > 0");
    if x <= 4.0 {
        // power series
        let mut sum = 0.0;
        let mut term = 1.0;
        let x2 = x * x;
        for k in 1..60 {
            term *= -x2 / ((2 * k - 1) as f64 * (2 * k) as f64);
            let add = term / (2 * k) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        EULER_GAMMA + x.ln() + sum
    } else {
        // Ci(x) = -Re E1(i x); continued fraction for E1 (Lentz)
        let (re, _im) = e1_imaginary_continued_fraction(x);
        -re
    }
}

/// `E1(i x)` via the continued fraction `e^{-z} / (z + 1/(1 + 1/(z + 2/(1 + ...))))`.
fn e1_imaginary_continued_fraction(x: f64) -> (f64, f64) {
    use num_complex::Complex64 as C;
    let z = C::new(0.0, x);
    // modified Lentz for E1(z) = e^{-z} * 1/(z+1- 1/(z+3- 4/(z+5- ...)))
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = C::new(1.0 / tiny, 0.0);
    let mut d = C::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = C::new(1.0, 0.0) / (d * an + b);
        c = b + C::new(an, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let r = h * (-z).exp();
    (r.re, r.im)
}

/// Result of summing the parabolic Purcell series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurcellSeries<T> {
    pub ratio: T,
    /// Magnitude of the last summand included.
    pub last_term: T,
    pub terms: usize,
}

/// One summand of the parabolic Purcell series (bounce number `m`).
pub fn purcell_parabolic_term<T: Real>(u: T, s: T, m: usize) -> T {
    let two = T::lit(2.0);
    let mm = T::from_usize(m).unwrap();
    let x = two * mm * s;
    let shape = if x < T::lit(1e-3) {
        // (x coth x - 1)/sinh^2 x -> 1/3 - 4 x^2/45
        T::one() / T::lit(3.0) - T::lit(4.0 / 45.0) * x * x
    } else {
        let sh = x.sinh();
        (x / x.tanh() - T::one()) / (sh * sh)
    };
    T::lit(6.0) * (two * mm * (u - T::FRAC_PI_2())).cos() * shape
}

/// `Gamma/Gamma_free` for an atom at the focus of a paraboloid, `u = 2 pi f / lambda_eg`.
///
/// Sums at least `m_max` bounces and keeps adding terms until the last one drops below
/// `1e-10` of the running sum.
pub fn purcell_parabolic_semiclassical<T: Real>(u: T, m_max: usize) -> Result<PurcellSeries<T>> {
    if !(u > T::zero()) {
        return Err(Error::Domain("the parabolic Purcell series needs u > 0".into()));
    }
    if m_max == 0 {
        return Err(Error::InvalidParameter("m_max must be at least 1".into()));
    }
    let s = s_integral(u)?;
    let mut ratio = T::one();
    let mut m = 0;
    let mut last;
    // bounded by e^{-4 M S}; S(u) > 0 for u > 0 so this terminates
    let hard_cap = 1_000_000usize;
    loop {
        m += 1;
        let term = purcell_parabolic_term(u, s, m);
        ratio = ratio + term;
        last = term.abs();
        let envelope = T::lit(6.0) * purcell_envelope(s, m);
        if m >= m_max && envelope < T::lit(1e-10) * ratio.abs() {
            break;
        }
        if m >= hard_cap {
            return Err(Error::NotConverged("Purcell series did not reach its tolerance".into()));
        }
    }
    Ok(PurcellSeries { ratio, last_term: last, terms: m })
}

/// Magnitude of summand `m` without its cosine factor.
fn purcell_envelope<T: Real>(s: T, m: usize) -> T {
    let x = T::lit(2.0) * T::from_usize(m).unwrap() * s;
    if x < T::lit(1e-3) {
        T::one() / T::lit(3.0)
    } else {
        let sh = x.sinh();
        (x / x.tanh() - T::one()) / (sh * sh)
    }
}
