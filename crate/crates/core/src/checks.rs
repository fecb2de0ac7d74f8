//! Randomized cross-checks of the analytic fields against independent
//! finite-difference oracles.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::model::GuidanceModel;
use crate::numerics::{default_step, wrap_angle};
use crate::planewave::PlaneWavePair;
use crate::spherical::{PairState3D, SphericalPair};

/// A configuration and its time.
pub type TimedConfig = (Vec<f64>, f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub states: usize,
    /// States rejected by the model (nodes, slits).
    pub skipped: usize,
    pub max_abs_error: f64,
    pub worst_config: Vec<f64>,
}

impl CheckReport {
    fn new() -> Self {
        Self {
            states: 0,
            skipped: 0,
            max_abs_error: 0.0,
            worst_config: Vec::new(),
        }
    }

    fn record(&mut self, config: &[f64], err: f64) {
        self.states += 1;
        if err.is_nan() || err > self.max_abs_error {
            self.max_abs_error = err;
            self.worst_config = config.to_vec();
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.states > 0 && self.max_abs_error < tol
    }
}

/// Uniform states on the torus with `t ∈ [0, 5)`. Every fourth state is
/// placed within `1e-3` of `θ = π/2`, where the velocity formula has a
/// removable singularity.
pub fn planewave_states(model: &PlaneWavePair, n: usize, seed: u64) -> Vec<TimedConfig> {
    let l = model.box_length();
    let p = *model.params();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let x1 = rng.gen_range(0.0..l);
            let t = rng.gen_range(0.0..5.0);
            let x2 = if i % 4 == 3 {
                let theta = FRAC_PI_2 + rng.gen_range(-1e-3..1e-3);
                x1 - theta * p.hbar / p.p
            } else {
                rng.gen_range(0.0..l)
            };
            (vec![x1, x2], t)
        })
        .collect()
}

/// Uniform states in the sampling box, `t ∈ [0, 1)`, keeping those whose
/// scale-aware node measure exceeds `min_node_measure`.
pub fn spherical_states(model: &SphericalPair, n: usize, seed: u64, min_node_measure: f64) -> Vec<TimedConfig> {
    let bounds = model.sampling_box();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c: Vec<f64> = bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
        let t = rng.gen_range(0.0..1.0);
        let keep = model
            .node_measure_at(&PairState3D::from_config(&c, t))
            .is_ok_and(|m| m > min_node_measure);
        if keep {
            out.push((c, t));
        }
    }
    out
}

/// Analytic velocity against `(ħ/m) Im(∇ψ/ψ)`.
pub fn velocity_oracle<M: GuidanceModel + ?Sized>(model: &M, states: &[TimedConfig]) -> CheckReport {
    let mut report = CheckReport::new();
    let mut v = vec![0.0; model.dim()];
    for (c, t) in states {
        let (Ok(()), Ok(oracle)) = (model.velocity(c, *t, &mut v), model.oracle_velocity(c, *t)) else {
            report.skipped += 1;
            continue;
        };
        let err = v.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.record(c, err);
    }
    report
}

/// Chain-rule `∇S` against central differences of the phase itself. The
/// difference of the two phase values is wrapped, so a branch cut between
/// them does not matter.
pub fn phase_gradient_oracle(model: &SphericalPair, states: &[TimedConfig]) -> CheckReport {
    let hbar = model.params().hbar;
    let mut report = CheckReport::new();
    'states: for (c, t) in states {
        let Ok(g) = model.phase_gradient(&PairState3D::from_config(c, *t)) else {
            report.skipped += 1;
            continue;
        };
        let mut err: f64 = 0.0;
        for i in 0..6 {
            let h = default_step(c[i]);
            let mut xp = c.clone();
            let mut xm = c.clone();
            xp[i] += h;
            xm[i] -= h;
            let (Ok(sp), Ok(sm)) = (
                model.phase3d(&PairState3D::from_config(&xp, *t)),
                model.phase3d(&PairState3D::from_config(&xm, *t)),
            ) else {
                report.skipped += 1;
                continue 'states;
            };
            let fd = hbar * wrap_angle((sp - sm) / hbar) / (2.0 * h);
            err = err.max((g[i] - fd).abs());
        }
        report.record(c, err);
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub states: usize,
    /// Largest `|v(swap s) - swap v(s)|`.
    pub exchange: f64,
    /// Largest `|v(reflect s) - reflect v(s)|`.
    pub reflection: f64,
}

pub fn spherical_symmetries(model: &SphericalPair, states: &[TimedConfig]) -> SymmetryReport {
    let mut rep = SymmetryReport {
        states: 0,
        exchange: 0.0,
        reflection: 0.0,
    };
    let flip = |v: [f64; 3]| [v[0], -v[1], v[2]];
    let gap = |a: [f64; 3], b: [f64; 3]| a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for (c, t) in states {
        let s = PairState3D::from_config(c, *t);
        let (Ok((v1, v2)), Ok((w1, w2)), Ok((u1, u2))) = (
            model.velocities3d(&s),
            model.velocities3d(&s.swapped()),
            model.velocities3d(&s.reflected()),
        ) else {
            continue;
        };
        rep.states += 1;
        rep.exchange = rep.exchange.max(gap(w1, v2)).max(gap(w2, v1));
        rep.reflection = rep.reflection.max(gap(u1, flip(v1))).max(gap(u2, flip(v2)));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planewave::PlaneWaveParams;
    use crate::spherical::SlitParams;

    #[test]
    fn planewave_states_cover_quarter_turn() {
        let m = PlaneWavePair::new(PlaneWaveParams::new(1.0, 0.3)).unwrap();
        let s = planewave_states(&m, 40, 1);
        let near = s.iter().filter(|(c, _)| (m.theta(c[0] - c[1]) - FRAC_PI_2).abs() < 1e-3).count();
        assert_eq!(near, 10);
        assert_eq!(s, planewave_states(&m, 40, 1));
    }

    #[test]
    fn oracle_reports_worst_state() {
        let m = PlaneWavePair::new(PlaneWaveParams::new(1.0, 0.4)).unwrap();
        let rep = velocity_oracle(&m, &planewave_states(&m, 50, 2));
        assert_eq!(rep.states + rep.skipped, 50);
        assert!(rep.within(1e-6), "{rep:?}");
        assert_eq!(rep.worst_config.len(), 2);
    }

    #[test]
    fn node_states_are_skipped() {
        let m = PlaneWavePair::new(PlaneWaveParams::new(1.0, 1.0)).unwrap();
        let rep = velocity_oracle(&m, &[(vec![FRAC_PI_2, 0.0], 0.0)]);
        assert_eq!((rep.states, rep.skipped), (0, 1));
        assert!(!rep.within(1.0));
    }

    #[test]
    fn spherical_checks() {
        let m = SphericalPair::new(SlitParams::new(5.0, 0.5)).unwrap();
        let states = spherical_states(&m, 50, 3, 1e-3);
        assert_eq!(states.len(), 50);
        assert!(phase_gradient_oracle(&m, &states).within(1e-6));
        assert!(velocity_oracle(&m, &states).within(1e-6));
        let sym = spherical_symmetries(&m, &states);
        assert!(sym.exchange < 1e-10);
        assert!(sym.reflection < 1e-10);
    }
}
