//! Shared numerical kernels: bisection, adaptive Simpson quadrature and
//! geometric grids.

use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("bisection bracket [{lo}, {hi}] does not change sign (f(lo)={f_lo}, f(hi)={f_hi})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("quadrature did not converge to tolerance {tol} within depth {depth}")]
    QuadratureDepth { tol: f64, depth: usize },
}

/// Root of `f` on `[lo, hi]` by bisection, to absolute tolerance `tol` on the
/// argument. Requires a sign change on the bracket; endpoints that are already
/// roots are returned directly.
pub fn bisect<T: Real, F: Fn(T) -> T>(
    f: F,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> Result<T, NumericError> {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == T::zero() {
        return Ok(lo);
    }
    if f_hi == T::zero() {
        return Ok(hi);
    }
    if (f_lo > T::zero()) == (f_hi > T::zero()) {
        return Err(NumericError::BracketFailure {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
            f_lo: f_lo.to_f64().unwrap_or(f64::NAN),
            f_hi: f_hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    // 200 halvings reduce any finite bracket below any representable tol.
    for _ in 0..200 {
        let mid = (lo + hi) / real(2.0);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if (f_mid > T::zero()) == (f_lo > T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let _ = f_hi;
    Ok((lo + hi) / real(2.0))
}

/// Adaptive Simpson integral of `f` on `[a, b]` with absolute tolerance
/// `tol`. Subinterval tolerances halve down to a floor of `tol * 1e-3`, so
/// jump discontinuities (step integrands at a kink that was not split out)
/// terminate instead of chasing an error that shrinks exactly as fast as the
/// tolerance does.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> Result<T, NumericError> {
    if a == b {
        return Ok(T::zero());
    }
    let two: T = real(2.0);
    let six: T = real(6.0);
    let m = (a + b) / two;
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / six * (fa + real::<T>(4.0) * fm + fb);
    let floor = tol * real(1e-3);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, floor, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    floor: T,
    depth: usize,
) -> Result<T, NumericError> {
    let two: T = real(2.0);
    let six: T = real(6.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / six * (fa + real::<T>(4.0) * flm + fm);
    let right = (b - m) / six * (fm + real::<T>(4.0) * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= real::<T>(15.0) * tol || m <= a || m >= b {
        return Ok(left + right + delta / real(15.0));
    }
    if depth == 0 {
        // the interval has shrunk to ~machine width; the residual only
        // matters for genuinely singular integrands
        if delta.abs() <= real::<T>(1e6) * floor {
            return Ok(left + right + delta / real(15.0));
        }
        return Err(NumericError::QuadratureDepth {
            tol: tol.to_f64().unwrap_or(f64::NAN),
            depth: 52,
        });
    }
    let child_tol = (tol / two).max(floor);
    let l = simpson_step(f, a, m, fa, flm, fm, left, child_tol, floor, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, child_tol, floor, depth - 1)?;
    Ok(l + r)
}

/// Integral of `f` over `[a, b]` split at the interior points in `kinks`
/// (points outside the interval are ignored).
pub fn integrate_split<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    kinks: &[T],
    tol: T,
) -> Result<T, NumericError> {
    let mut cuts: Vec<T> = kinks.iter().copied().filter(|&k| k > a && k < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut points"));
    cuts.dedup();
    let mut total = T::zero();
    let mut lo = a;
    for k in cuts {
        total = total + integrate(f, lo, k, tol)?;
        lo = k;
    }
    Ok(total + integrate(f, lo, b, tol)?)
}

/// `n` geometrically spaced points on `(0, hi]`, anchored at `hi * span_ratio`.
pub fn geometric_grid<T: Real>(hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "geometric grid needs at least two points");
    let lo = hi * real(1e-5);
    let ratio = (hi / lo).powf(T::one() / real((n - 1) as f64));
    let mut grid = Vec::with_capacity(n);
    let mut t = lo;
    for _ in 0..n - 1 {
        grid.push(t);
        t = t * ratio;
    }
    grid.push(hi);
    grid
}

/// `n` evenly spaced points on the open interval `(lo, hi)`.
pub fn interior_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let step = (hi - lo) / real((n + 1) as f64);
    (1..=n).map(|i| lo + step * real(i as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let root = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((root - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        let err = bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, NumericError::BracketFailure { .. }));
    }

    #[test]
    fn simpson_integrates_exponential() {
        let val = integrate(&|x: f64| (-x).exp(), 0.0, 5.0, 1e-12).unwrap();
        assert!((val - (1.0 - (-5.0f64).exp())).abs() < 1e-11);
    }

    #[test]
    fn split_integration_handles_kinks() {
        let f = |x: f64| x.abs();
        let val = integrate_split(&f, -1.0, 1.0, &[0.0], 1e-12).unwrap();
        assert!((val - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_grid_is_increasing() {
        let g = geometric_grid(90.0f64, 64);
        assert_eq!(g.len(), 64);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!((g[63] - 90.0).abs() < 1e-12);
    }
}
