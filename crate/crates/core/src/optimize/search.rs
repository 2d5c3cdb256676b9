//! One-dimensional maximization on a closed interval.

use crate::scalar::Scalar;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` (or after `max_iter` shrinks).
/// The endpoints are always evaluated, so the returned value is never below
/// `f(lo)` or `f(hi)`.
pub fn golden_section_max<T, F>(mut f: F, lo: T, hi: T, tol: T, max_iter: usize) -> (T, T)
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let (f_lo, f_hi) = (f(lo), f(hi));
    let mut best = if f_hi > f_lo { (hi, f_hi) } else { (lo, f_lo) };
    if hi <= lo {
        return best;
    }
    let r = T::of(INV_PHI);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if !(c > a && d < b && c <= d) {
            // bracket collapsed to adjacent floats
            break;
        }
    }
    for cand in [(c, fc), (d, fd)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Maximization that tolerates several local maxima: a uniform scan with
/// `scan` intervals picks the best grid point, then golden-section search
/// refines inside its two neighbouring intervals.
pub fn scanned_max<T, F>(mut f: F, lo: T, hi: T, tol: T, scan: usize) -> (T, T)
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if hi <= lo {
        return (lo, f(lo));
    }
    let n = scan.max(2);
    let at = |i: usize| {
        if i == n {
            hi
        } else {
            lo + (hi - lo) * T::of(i as f64) / T::of(n as f64)
        }
    };
    let mut best_i = 0;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let s = at(i);
        let v = f(s);
        if v > best.1 {
            best = (s, v);
            best_i = i;
        }
    }
    let a = at(best_i.saturating_sub(1));
    let b = at((best_i + 1).min(n));
    let refined = golden_section_max(&mut f, a, b, tol, 200);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}
