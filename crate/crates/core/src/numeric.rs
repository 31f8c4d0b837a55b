/// Solves `f(t) = target` for a nondecreasing `f` with `f(lo) < target`.
///
/// `hi` is moved away from `lo` by doubling the bracket width until
/// `f(hi) >= target`, then the bracket is halved until its width drops to
/// `abs_tol` or to floating-point resolution. Of the two final endpoints the
/// one with the smaller residual is returned.
pub(crate) fn bisect_increasing<F>(f: F, target: f64, lo: f64, hi: f64, abs_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut lo = lo;
    let mut width = if hi > lo { hi - lo } else { 1.0 };
    let mut hi = lo + width;
    let mut f_hi = f(hi);
    let mut grow = 0;
    while f_hi < target && grow < 2100 {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
        f_hi = f(hi);
        grow += 1;
    }
    let mut f_lo = f(lo);
    for _ in 0..2200 {
        if hi - lo <= abs_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid < target {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if (f_hi - target).abs() <= (target - f_lo).abs() {
        hi
    } else {
        lo
    }
}
