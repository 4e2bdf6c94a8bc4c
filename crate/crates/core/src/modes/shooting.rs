//! Bracketed root refinement and Prüfer-phase shooting for Sturm-Liouville problems.

use crate::error::{Error, Result};

/// Converged root of a mismatch function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Mismatch at `x`.
    pub residual: f64,
    pub evaluations: usize,
}

/// Mismatch tolerance used for eigenvalue refinement.
pub const MISMATCH_TOL: f64 = 1e-10;

/// Illinois (modified regula falsi) refinement of a sign change on `[lo, hi]`.
///
/// Stops when `|f| <= tol` or the bracket has collapsed to a few ulps.
pub fn illinois<F>(mut f: F, lo: f64, hi: f64, f_lo: f64, f_hi: f64, tol: f64) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, f_lo, f_hi);
    if fa == 0.0 {
        return Ok(Root { x: a, residual: 0.0, evaluations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, residual: 0.0, evaluations: 0 });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    let mut side = 0i8;
    let mut evals = 0;
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..200 {
        let mut x = (a * fb - b * fa) / (fb - fa);
        let width = (b - a).abs();
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            return Ok(Root { x: best.0, residual: best.1, evaluations: evals });
        }
        let fx = f(x)?;
        evals += 1;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= tol {
            return Ok(Root { x, residual: fx, evaluations: evals });
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NotConverged(format!("root refinement stalled near {} (mismatch {:e})", best.0, best.1)))
}

/// A one-parameter Sturm-Liouville problem seen through its Prüfer phase at the far end.
///
/// The phase must increase monotonically with the parameter; eigenvalue `index` is where
/// it reaches `target(index)`.
pub trait PhaseProblem {
    fn phase(&self, parameter: f64) -> Result<f64>;
    fn target(&self, index: usize) -> f64;
}

/// Shooting eigensolver: the `index`-th eigenvalue inside `bracket`.
pub fn shoot_eigen<P: PhaseProblem + ?Sized>(problem: &P, index: usize, bracket: (f64, f64)) -> Result<Root> {
    let target = problem.target(index);
    let g = |x: f64| problem.phase(x).map(|p| p - target);
    let (lo, hi) = bracket;
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    illinois(g, lo, hi, g_lo, g_hi, MISMATCH_TOL)
}

/// Grow an upper bound geometrically from `lo` until the phase passes `target`.
pub fn expand_upper<F>(mut g: F, lo: f64, first_step: f64, max_doublings: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut step = first_step.abs().max(1e-8);
    for _ in 0..max_doublings {
        let hi = lo + step;
        let v = g(hi)?;
        if v > 0.0 {
            return Ok((hi, v));
        }
        step *= 2.0;
    }
    Err(Error::NoRootInBracket { lo, hi: lo + step })
}
