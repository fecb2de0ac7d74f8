//! Explicit Runge–Kutta integration of guidance flows.
//!
//! Two methods are provided: classical fixed-step RK4 and the adaptive
//! Dormand–Prince 5(4) pair. Both integrate forwards or backwards in time
//! and land exactly on every requested sample time, so "dense output" is
//! exact to the method's accuracy rather than interpolated.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4,
    /// Dormand–Prince 5(4) with local error control.
    Rk45,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rk45" => Ok(Method::Rk45),
            other => Err(Error::Config(format!(
                "unknown integrator method `{other}` (expected rk4 or rk45)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step for [`Method::Rk4`].
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on attempted steps (accepted and rejected).
    pub max_steps: usize,
}

// With rel_tol = 1e-9 the embedded error estimate of an occasional long
// step nearly vanishes while the true error reaches ~1e-6.
impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            step: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4,
            step,
            ..Self::default()
        }
    }

    pub fn rk45(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            method: Method::Rk45,
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("step", self.step)?;
        check_positive("rel_tol", self.rel_tol)?;
        check_positive("abs_tol", self.abs_tol)?;
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter {
                field: "max_steps",
                constraint: "must be >= 1",
                value: "0".into(),
            });
        }
        Ok(())
    }
}

/// Why an integration stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    MaxSteps { t: f64 },
    /// The right-hand side failed (e.g. a node of the wavefunction).
    Domain { t: f64, reason: String },
}

/// Time-ordered samples of a flow together with the field at each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.termination != Termination::Completed
    }

    /// State recorded at time `t`, if the trajectory was sampled there.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        let scale = 1e-12 * t.abs().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= scale)
            .map(|i| self.states[i].as_slice())
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            next: vec![0.0; n],
        }
    }
}

enum StepOutcome {
    Accepted { err: f64 },
    Rejected { err: f64 },
}

/// Integrate `dy/dt = rhs(t, y)` from `(t0, y0)` to `t_end`.
///
/// The trajectory records `t0`, every entry of `sample_times` lying strictly
/// between `t0` and `t_end`, and `t_end`. Sample times must be ordered in the
/// direction of integration. A failing right-hand side or an exhausted step
/// budget truncates the trajectory; the last state reached is appended and
/// the reason is kept in [`Trajectory::termination`].
pub fn integrate_ode<F>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    sample_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    if !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Config("integration bounds must be finite".into()));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut targets = Vec::with_capacity(sample_times.len() + 1);
    for &s in sample_times {
        if dir * (s - t0) > 0.0 && dir * (t_end - s) > 0.0 {
            if let Some(&prev) = targets.last() {
                if dir * (s - prev) <= 0.0 {
                    return Err(Error::Config(
                        "sample times must be strictly ordered in the integration direction".into(),
                    ));
                }
            }
            targets.push(s);
        }
    }
    if t_end != t0 {
        targets.push(t_end);
    }

    let n = y0.len();
    let mut traj = Trajectory {
        times: Vec::with_capacity(targets.len() + 1),
        states: Vec::with_capacity(targets.len() + 1),
        velocities: Vec::with_capacity(targets.len() + 1),
        termination: Termination::Completed,
    };
    let mut work = Work::new(n);
    let mut y = y0.to_vec();
    let mut t = t0;

    if let Err(e) = rhs(t, &y, &mut work.k[0]) {
        traj.termination = Termination::Domain {
            t,
            reason: e.to_string(),
        };
        return Ok(traj);
    }
    traj.times.push(t);
    traj.states.push(y.clone());
    traj.velocities.push(work.k[0].clone());

    let mut h = match cfg.method {
        Method::Rk4 => cfg.step,
        Method::Rk45 => initial_step(&rhs, t, &y, &mut work, dir, cfg),
    };
    let mut attempts = 0usize;
    let mut last_rejected = false;

    for &target in &targets {
        while dir * (target - t) > 0.0 {
            if attempts >= cfg.max_steps {
                traj.termination = Termination::MaxSteps { t };
                push_last(&mut traj, t, &y, &work.k[0]);
                return Ok(traj);
            }
            attempts += 1;
            let remaining = (target - t).abs();
            let lands = h >= remaining * (1.0 - 1e-12);
            let step = if lands { remaining } else { h };
            let outcome = match cfg.method {
                Method::Rk4 => rk4_step(&rhs, t, &y, dir * step, &mut work).map(|_| StepOutcome::Accepted { err: 0.0 }),
                Method::Rk45 => dopri_step(&rhs, t, &y, dir * step, &mut work, cfg),
            };
            match outcome {
                Ok(StepOutcome::Accepted { err }) => {
                    t = if lands { target } else { t + dir * step };
                    std::mem::swap(&mut y, &mut work.next);
                    if cfg.method == Method::Rk45 {
                        // FSAL: the last stage is the field at the new point.
                        work.k.swap(0, 6);
                        let mut factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                        factor = factor.clamp(0.2, 5.0);
                        if last_rejected {
                            factor = factor.min(1.0);
                        }
                        if !lands || factor < 1.0 {
                            h = step * factor;
                        }
                        last_rejected = false;
                    } else if let Err(e) = rhs(t, &y, &mut work.k[0]) {
                        traj.termination = Termination::Domain {
                            t,
                            reason: e.to_string(),
                        };
                        push_last(&mut traj, t, &y, &[]);
                        return Ok(traj);
                    }
                }
                Ok(StepOutcome::Rejected { err }) => {
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    last_rejected = true;
                }
                Err(e) => {
                    // A stage hit a singular point; retry with a smaller step
                    // before giving up.
                    h = step * 0.25;
                    if cfg.method == Method::Rk4 || h < 1e-12 * t.abs().max(1.0) {
                        traj.termination = Termination::Domain {
                            t,
                            reason: e.to_string(),
                        };
                        push_last(&mut traj, t, &y, &work.k[0]);
                        return Ok(traj);
                    }
                }
            }
        }
        traj.times.push(t);
        traj.states.push(y.clone());
        traj.velocities.push(work.k[0].clone());
    }
    Ok(traj)
}

fn push_last(traj: &mut Trajectory, t: f64, y: &[f64], v: &[f64]) {
    if traj.times.last() != Some(&t) {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        if v.len() == y.len() {
            traj.velocities.push(v.to_vec());
        } else {
            traj.velocities.push(vec![f64::NAN; y.len()]);
        }
    }
}

fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], h: f64, w: &mut Work) -> Result<()>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    // k[0] already holds f(t, y)
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k[0][i];
    }
    rhs(t + 0.5 * h, &w.tmp, &mut w.k[1])?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k[1][i];
    }
    rhs(t + 0.5 * h, &w.tmp, &mut w.k[2])?;
    for i in 0..n {
        w.tmp[i] = y[i] + h * w.k[2][i];
    }
    rhs(t + h, &w.tmp, &mut w.k[3])?;
    for i in 0..n {
        w.next[i] = y[i] + h / 6.0 * (w.k[0][i] + 2.0 * w.k[1][i] + 2.0 * w.k[2][i] + w.k[3][i]);
    }
    Ok(())
}

fn dopri_step<F>(
    rhs: &F,
    t: f64,
    y: &[f64],
    h: f64,
    w: &mut Work,
    cfg: &IntegratorConfig,
) -> Result<StepOutcome>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in A[s][..s].iter().enumerate() {
                acc += a * w.k[j][i];
            }
            w.tmp[i] = y[i] + h * acc;
        }
        rhs(t + C[s] * h, &w.tmp, &mut w.k[s])?;
    }
    // Stage 7 was evaluated at the fifth-order solution.
    w.next.copy_from_slice(&w.tmp);

    let mut sum = 0.0;
    for i in 0..n {
        let mut e = 0.0;
        for (s, c) in E.iter().enumerate() {
            e += c * w.k[s][i];
        }
        let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(w.next[i].abs());
        let r = h * e / scale;
        sum += r * r;
    }
    let err = (sum / n.max(1) as f64).sqrt();
    if !err.is_finite() {
        return Err(Error::Domain(format!("non-finite field near t = {t}")));
    }
    if err <= 1.0 {
        Ok(StepOutcome::Accepted { err })
    } else {
        Ok(StepOutcome::Rejected { err })
    }
}

fn initial_step<F>(rhs: &F, t: f64, y: &[f64], w: &mut Work, dir: f64, cfg: &IntegratorConfig) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len().max(1) as f64;
    let scale = |i: usize| cfg.abs_tol + cfg.rel_tol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (w.k[0].iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    for i in 0..y.len() {
        w.tmp[i] = y[i] + dir * h0 * w.k[0][i];
    }
    if rhs(t + dir * h0, &w.tmp, &mut w.k[1]).is_err() {
        return h0;
    }
    let d2 = (w.k[1]
        .iter()
        .zip(&w.k[0])
        .enumerate()
        .map(|(i, (a, b))| ((a - b) / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_rhs(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = y[0];
        Ok(())
    }

    #[test]
    fn constant_field_is_exact() {
        let c = [1.5, -0.25];
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(0.01)] {
            let traj = integrate_ode(
                |_, _, dy| {
                    dy.copy_from_slice(&c);
                    Ok(())
                },
                0.0,
                &[2.0, 3.0],
                4.0,
                &[],
                &cfg,
            )
            .unwrap();
            let end = traj.last_state().unwrap();
            assert!((end[0] - 8.0).abs() < 1e-12);
            assert!((end[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_within_tolerance() {
        let cfg = IntegratorConfig::default();
        let traj = integrate_ode(exp_rhs, 0.0, &[1.0], 1.0, &[], &cfg).unwrap();
        let end = traj.last_state().unwrap()[0];
        let e = std::f64::consts::E;
        assert!((end - e).abs() / e < 10.0 * cfg.rel_tol, "{end}");
        assert_eq!(traj.termination, Termination::Completed);
    }

    #[test]
    fn rk4_fixed_step_is_fourth_order() {
        let e = std::f64::consts::E;
        let err = |h: f64| {
            let t = integrate_ode(exp_rhs, 0.0, &[1.0], 1.0, &[], &IntegratorConfig::rk4(h)).unwrap();
            (t.last_state().unwrap()[0] - e).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn backward_integration_and_round_trip() {
        let cfg = IntegratorConfig::default();
        let back = integrate_ode(exp_rhs, 1.0, &[1.0], 0.0, &[], &cfg).unwrap();
        let y = back.last_state().unwrap()[0];
        assert!((y - (-1.0f64).exp()).abs() < 1e-8);

        let rot = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
            Ok(())
        };
        let fwd = integrate_ode(rot, 0.0, &[1.0, 0.0], 3.0, &[], &cfg).unwrap();
        let mid = fwd.last_state().unwrap().to_vec();
        let bwd = integrate_ode(rot, 3.0, &mid, 0.0, &[], &cfg).unwrap();
        let end = bwd.last_state().unwrap();
        assert!((end[0] - 1.0).abs() < 100.0 * cfg.rel_tol);
        assert!(end[1].abs() < 100.0 * cfg.rel_tol);
    }

    #[test]
    fn samples_are_hit_exactly() {
        let cfg = IntegratorConfig::default();
        let samples = [0.25, 0.5, 0.75];
        let traj = integrate_ode(exp_rhs, 0.0, &[1.0], 1.0, &samples, &cfg).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s[0] - t.exp()).abs() < 1e-8);
        }
        assert_eq!(traj.velocities[2], traj.states[2]);
        assert!(traj.state_at(0.5).is_some());
        assert!(traj.state_at(0.6).is_none());
    }

    #[test]
    fn unordered_samples_rejected() {
        let r = integrate_ode(exp_rhs, 0.0, &[1.0], 1.0, &[0.5, 0.25], &IntegratorConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn domain_error_truncates() {
        // field undefined beyond y = 2
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            if y[0] >= 2.0 {
                return Err(Error::Domain("wall".into()));
            }
            dy[0] = 1.0;
            Ok(())
        };
        let traj = integrate_ode(rhs, 0.0, &[0.0], 5.0, &[1.0], &IntegratorConfig::default()).unwrap();
        assert!(matches!(traj.termination, Termination::Domain { .. }));
        assert!(traj.is_truncated());
        assert!(traj.last_state().unwrap()[0] < 2.0);
        assert_eq!(traj.times[1], 1.0);
    }

    #[test]
    fn max_steps_truncates() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..IntegratorConfig::rk4(0.01)
        };
        let traj = integrate_ode(exp_rhs, 0.0, &[1.0], 1.0, &[], &cfg).unwrap();
        assert!(matches!(traj.termination, Termination::MaxSteps { .. }));
        assert!((traj.times.last().unwrap() - 0.03).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(integrate_ode(exp_rhs, 0.0, &[1.0], 1.0, &[], &cfg).is_err());
    }
}
