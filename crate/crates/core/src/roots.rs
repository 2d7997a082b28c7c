//! Sign-change scanning and bisection.

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
/// Returns `None` when the bracket is not valid.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return None;
    }
    let lo_sign = flo.signum();
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Locate the switch point of a predicate with `pred(inside) != pred(outside)`.
///
/// The returned point is within `tol` of the switch and is the last point
/// found on the `inside` side.
pub fn bisect_predicate<P>(pred: P, mut inside: f64, mut outside: f64, tol: f64) -> f64
where
    P: Fn(f64) -> bool,
{
    let want = pred(inside);
    debug_assert_ne!(want, pred(outside));
    while (outside - inside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) == want {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Uniform grid over `[lo, hi]` with `points` nodes, endpoints exact.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// All zeros of `f` on `[lo, hi]` found by scanning `points` grid nodes for
/// sign changes and refining each bracket by bisection. Zeros that land on a
/// grid node are reported exactly. The result is sorted ascending.
pub fn scan_zeros<F>(f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let xs = grid(lo, hi, points);
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut zeros = Vec::new();
    for i in 0..xs.len() {
        if ys[i] == 0.0 {
            zeros.push(xs[i]);
            continue;
        }
        if i + 1 < xs.len() && ys[i + 1] != 0.0 && ys[i].signum() != ys[i + 1].signum() {
            if let Some(z) = bisect(&f, xs[i], xs[i + 1], tol) {
                zeros.push(z);
            }
        }
    }
    zeros
}
