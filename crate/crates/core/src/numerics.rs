//! Small numerical kernels shared across modules.

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s = pairwise_sum(&xs.iter().map(|x| (x - max).exp()).collect::<Vec<_>>());
    max + s.ln()
}

/// `ln |1 − e^{−x}|` for any real `x`, accurate for small and large `|x|`.
///
/// Returns `-inf` at `x = 0`.
pub fn log_abs_one_minus_exp_neg(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else if x > 0.0 {
        (-(-x).exp_m1()).ln()
    } else {
        // |1 − e^{|x|}| = e^{|x|}(1 − e^{−|x|})
        -x + (-(x).exp_m1()).ln()
    }
}

/// Pairwise (cascade) summation; result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid == lo || mid == hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Mean of a smooth 1-periodic function over one period.
///
/// Uses the periodic trapezoid rule with doubling until the relative change
/// drops below `rel_tol`; for analytic integrands the convergence is geometric.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, rel_tol: f64, max_points: usize) -> f64 {
    let mut n = 64usize;
    let mut sum: f64 = pairwise_sum(&(0..n).map(|k| f(k as f64 / n as f64)).collect::<Vec<_>>());
    let mut mean = sum / n as f64;
    while n < max_points {
        // New midpoints only.
        let mids: Vec<f64> = (0..n).map(|k| f((k as f64 + 0.5) / n as f64)).collect();
        sum += pairwise_sum(&mids);
        n *= 2;
        let next = sum / n as f64;
        let converged = (next - mean).abs() <= rel_tol * next.abs();
        mean = next;
        if converged {
            break;
        }
    }
    mean
}

/// Ordinary least squares `y ≈ a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}
