//! Central finite differences.
//!
//! These are used only as independent oracles for the analytic guidance
//! velocities and phase derivatives, never on the integration path.

use super::ComplexScalar;

/// Default per-component step `max(1e-6, 1e-8 |x|)`.
pub fn default_step(x: f64) -> f64 {
    (1e-8 * x.abs()).max(1e-6)
}

/// Central-difference gradient with a fixed step `h` on every component.
///
/// Component `i` is `(f(x + h e_i) - f(x - h e_i)) / (2h)`; the error is
/// `O(h^2)`. Failures of `f` at a stencil point are propagated.
pub fn finite_diff_gradient<F, E>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
{
    gradient_with(f, x, |_| h)
}

/// Central-difference gradient using [`default_step`] per component.
pub fn finite_diff_gradient_auto<F, E>(f: F, x: &[f64]) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
{
    gradient_with(f, x, default_step)
}

fn gradient_with<F, E, H>(f: F, x: &[f64], step: H) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
    H: Fn(f64) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step(x[i]);
        probe[i] = x[i] + h;
        let fp = f(&probe)?;
        probe[i] = x[i] - h;
        let fm = f(&probe)?;
        probe[i] = x[i];
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// `Im(∇ψ / ψ)` by central differences of a complex field.
///
/// Multiplied by `ħ/m` this is the guidance velocity, computed without ever
/// forming the phase, which makes it a branch-free oracle.
pub fn log_gradient_im<F, E>(psi: F, x: &[f64]) -> Result<Vec<f64>, E>
where
    F: Fn(&[f64]) -> Result<ComplexScalar, E>,
{
    let centre = psi(x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = default_step(x[i]);
        probe[i] = x[i] + h;
        let fp = psi(&probe)?;
        probe[i] = x[i] - h;
        let fm = psi(&probe)?;
        probe[i] = x[i];
        let d = (fp - fm) / (2.0 * h);
        out.push((d / centre).im);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok<T>(v: T) -> Result<T, Infallible> {
        Ok(v)
    }

    #[test]
    fn square_at_three() {
        let g = finite_diff_gradient(|x| ok(x[0] * x[0]), &[3.0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-7);
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let g = finite_diff_gradient_auto(|_| ok(4.25), &[1.0, -2.0, 1e9]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn second_order_convergence() {
        // f = sin(x) exp(y); halving h should shrink the error about 4x
        let f = |x: &[f64]| ok(x[0].sin() * x[1].exp());
        let p = [0.7f64, 0.3];
        let exact = p[0].cos() * p[1].exp();
        let e1 = (finite_diff_gradient(f, &p, 1e-2).unwrap()[0] - exact).abs();
        let e2 = (finite_diff_gradient(f, &p, 5e-3).unwrap()[0] - exact).abs();
        let ratio = e1 / e2;
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn stencil_failure_propagates() {
        let r: Result<Vec<f64>, &str> =
            finite_diff_gradient(|x| if x[0] > 1.0 { Err("node") } else { Ok(x[0]) }, &[1.0], 0.1);
        assert_eq!(r.unwrap_err(), "node");
    }

    #[test]
    fn log_gradient_of_plane_wave_is_wavenumber() {
        let k = 2.5;
        let g = log_gradient_im(|x| ok(ComplexScalar::from_polar(3.0, k * x[0])), &[0.4]).unwrap();
        assert!((g[0] - k).abs() < 1e-8);
    }
}
