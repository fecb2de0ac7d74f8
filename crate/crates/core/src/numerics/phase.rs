use std::f64::consts::PI;

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Remove `2π` jumps from a sampled phase signal.
///
/// Consecutive differences are wrapped into `(-π, π]`; the first sample is
/// kept as is.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut iter = wrapped.iter();
    let Some(&first) = iter.next() else {
        return out;
    };
    out.push(first);
    let mut prev_raw = first;
    let mut acc = first;
    for &x in iter {
        acc += wrap_angle(x - prev_raw);
        prev_raw = x;
        out.push(acc);
    }
    out
}
