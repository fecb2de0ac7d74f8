//! Bracketed root finding and grid scans for root counting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default refinement tolerance in the scanned variable.
pub const ROOT_TOL: f64 = 1e-10;

/// Brent's method on a sign-changing bracket.
///
/// Returns once the bracket is narrower than `tol` or `g` vanishes exactly.
pub fn find_root_bracketed<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::NoSignChange {
            lo,
            hi,
            g_lo: fa,
            g_hi: fb,
        });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation, or secant when a == c
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = g(b);
    }
    Ok(b)
}

/// Roots found by a uniform-grid scan of a scalar function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootScanReport {
    pub interval: [f64; 2],
    pub grid_points: usize,
    /// Sorted ascending.
    pub roots: Vec<f64>,
    /// No sign change among the sampled forward differences.
    pub is_monotone_on_interval: bool,
}

impl RootScanReport {
    pub fn root_count(&self) -> usize {
        self.roots.len()
    }
}

/// Sample `g` at `grid` uniformly spaced points of `[lo, hi]` (ends
/// included), refine every sign change with [`find_root_bracketed`] and
/// report the roots. Roots of even multiplicity are invisible to the scan.
pub fn count_roots_scan<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, grid: usize) -> Result<RootScanReport> {
    if grid < 2 {
        return Err(Error::InvalidParameter {
            field: "grid",
            constraint: "must be >= 2",
            value: grid.to_string(),
        });
    }
    if !(lo < hi) {
        return Err(Error::Config(format!("empty scan interval [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid)
        .map(|i| if i == grid - 1 { hi } else { lo + i as f64 * step })
        .collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    if let Some(i) = gs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("scanned function not finite at {}", xs[i])));
    }

    let mut roots = Vec::new();
    for i in 0..grid {
        if gs[i] == 0.0 {
            roots.push(xs[i]);
        } else if i + 1 < grid && gs[i] * gs[i + 1] < 0.0 {
            roots.push(find_root_bracketed(&g, xs[i], xs[i + 1], ROOT_TOL)?);
        }
    }

    let mut sign = 0.0;
    let mut is_monotone = true;
    for w in gs.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = d.signum();
        } else if d.signum() != sign {
            is_monotone = false;
            break;
        }
    }

    Ok(RootScanReport {
        interval: [lo, hi],
        grid_points: grid,
        roots,
        is_monotone_on_interval: is_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linear_root() {
        let r = find_root_bracketed(|x| x - 2.0, 0.0, 5.0, ROOT_TOL).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn sine_root_is_pi() {
        let r = find_root_bracketed(f64::sin, 3.0, 4.0, 1e-12).unwrap();
        assert!((r - PI).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change_is_error() {
        let r = find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, ROOT_TOL);
        assert!(matches!(r, Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn scan_identity() {
        let rep = count_roots_scan(|x| x, -1.0, 1.0, 100).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!(rep.roots[0].abs() < 1e-10);
        assert!(rep.is_monotone_on_interval);
    }

    #[test]
    fn scan_cubic_finds_known_roots() {
        let rep = count_roots_scan(|x| (x + 1.5) * (x - 0.2) * (x - 2.0), -3.0, 3.0, 1000).unwrap();
        let expected = [-1.5, 0.2, 2.0];
        assert_eq!(rep.roots.len(), 3);
        for (r, e) in rep.roots.iter().zip(expected) {
            assert!((r - e).abs() < 1e-10);
        }
        assert!(!rep.is_monotone_on_interval);
    }

    #[test]
    fn grid_root_counted_once() {
        let rep = count_roots_scan(|x| x, -1.0, 1.0, 3).unwrap();
        assert_eq!(rep.roots, vec![0.0]);
    }

    #[test]
    fn too_small_grid() {
        assert!(count_roots_scan(|x| x, -1.0, 1.0, 1).is_err());
    }
}
