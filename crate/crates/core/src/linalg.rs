//! Small dense-vector helpers shared by the clustering and similarity code.
//! All accumulation happens in f64.

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `v / |v|`, or `None` when `|v| < ZERO_NORM`.
///
/// The vector is first divided by its largest absolute component. For an
/// exactly scaled input `λ·v` those quotients are the same real numbers, so
/// the result is bit-identical to normalizing `v` itself.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    if norm(v) < ZERO_NORM {
        return None;
    }
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let scaled: Vec<f64> = v.iter().map(|x| x / peak).collect();
    let n = norm(&scaled);
    Some(scaled.into_iter().map(|x| x / n).collect())
}
