//! Small log-space helpers shared by the inference modules.

/// `log(sum(exp(xs)))`, stable for large magnitudes. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Shift `xs` in place so that `logsumexp(xs) == 0`. Returns the removed
/// normalizer.
pub fn log_normalize(xs: &mut [f64]) -> f64 {
    let z = logsumexp(xs);
    if z.is_finite() {
        xs.iter_mut().for_each(|x| *x -= z);
    }
    z
}

/// Index of the largest entry; ties resolve to the lowest index. NaN never
/// wins.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] || xs[best].is_nan() {
            best = i;
        }
    }
    best
}
