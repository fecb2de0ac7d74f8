//! Two particles emitted by two point-like slits as spherical waves.
//!
//! ```text
//! ψ = [e^{ik(r1A + r2B)}/(r1A r2B) + e^{ik(r1B + r2A)}/(r1B r2A)] e^{-iEt/ħ} / N
//! ```
//!
//! Slit A sits at `(0, a, 0)` and slit B at `(0, -a, 0)`; `rij` is the
//! distance of particle `i` from slit `j`. The phase is `ħ atan2(Nval, Dval)`
//! where `Nval`/`Dval` are the imaginary/real parts of the bracket times
//! `r1A r1B r2A r2B`, and the guidance velocities follow by the chain rule
//! through the four distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::model::{GuidanceModel, ModelTag};
use crate::numerics::{unwrap_phase, ComplexScalar, Trajectory};

/// States closer than this to a slit are rejected.
pub const SLIT_EXCLUSION: f64 = 1e-6;

/// Scale-aware node threshold on `|bracket| (r1A r2B + r1B r2A)/2`.
pub const NODE_THRESHOLD: f64 = 1e-12;

const NORM_SAMPLES: usize = 1 << 17;
const NORM_SEED: u64 = 0x05ee_d0f5_1175;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitParams {
    /// Wavenumber.
    pub k: f64,
    /// Half-separation of the slits.
    pub slit_a: f64,
    pub m: f64,
    pub hbar: f64,
    /// Defaults to `ħ²k²/m`; only enters the global time phase.
    pub energy: Option<f64>,
    /// Edge of the cubic sampling box; defaults to `40/k`.
    pub box_length: Option<f64>,
    /// Near face of the sampling box in `x`; defaults to `2 slit_a`.
    pub x_min: Option<f64>,
}

impl SlitParams {
    pub fn new(k: f64, slit_a: f64) -> Self {
        Self {
            k,
            slit_a,
            m: 1.0,
            hbar: 1.0,
            energy: None,
            box_length: None,
            x_min: None,
        }
    }

    pub fn energy(&self) -> f64 {
        self.energy
            .unwrap_or(self.hbar * self.hbar * self.k * self.k / self.m)
    }

    pub fn box_length(&self) -> f64 {
        self.box_length.unwrap_or(40.0 / self.k)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min.unwrap_or(2.0 * self.slit_a)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("k", self.k)?;
        check_positive("slit_a", self.slit_a)?;
        check_positive("m", self.m)?;
        check_positive("hbar", self.hbar)?;
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return Err(Error::InvalidParameter {
                    field: "energy",
                    constraint: "must be finite",
                    value: e.to_string(),
                });
            }
        }
        check_positive("box_length", self.box_length())?;
        check_positive("x_min", self.x_min())?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairState3D {
    pub r1: [f64; 3],
    pub r2: [f64; 3],
    pub t: f64,
}

fn flip_y(r: [f64; 3]) -> [f64; 3] {
    [r[0], -r[1], r[2]]
}

impl PairState3D {
    pub fn new(r1: [f64; 3], r2: [f64; 3], t: f64) -> Self {
        Self { r1, r2, t }
    }

    pub fn from_config(config: &[f64], t: f64) -> Self {
        Self {
            r1: [config[0], config[1], config[2]],
            r2: [config[3], config[4], config[5]],
            t,
        }
    }

    pub fn config(&self) -> [f64; 6] {
        [self.r1[0], self.r1[1], self.r1[2], self.r2[0], self.r2[1], self.r2[2]]
    }

    /// Particle 2 placed at the reflection of particle 1 in the `x` axis.
    pub fn mirrored_pair(r1: [f64; 3], t: f64) -> Self {
        Self::new(r1, flip_y(r1), t)
    }

    /// Exchange the particle labels.
    pub fn swapped(&self) -> Self {
        Self::new(self.r2, self.r1, self.t)
    }

    /// Reflect both particles, `y → -y`.
    pub fn reflected(&self) -> Self {
        Self::new(flip_y(self.r1), flip_y(self.r2), self.t)
    }

    /// Reflection composed with exchange; its fixed points form the mirror
    /// manifold `r2 = (x1, -y1, z1)`.
    pub fn mirrored(&self) -> Self {
        self.reflected().swapped()
    }
}

/// Distances of each particle from each slit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitDistances {
    pub r1a: f64,
    pub r1b: f64,
    pub r2a: f64,
    pub r2b: f64,
}

/// Imaginary and real parts of the bracket scaled by `r1A r1B r2A r2B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseParts {
    pub nval: f64,
    pub dval: f64,
}

/// `∂S/∂r` for the four slit distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPartials {
    pub d_r1a: f64,
    pub d_r1b: f64,
    pub d_r2a: f64,
    pub d_r2b: f64,
}

/// Deviation of a state from the two readings of the integrability
/// constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDeviation {
    /// `max(|r1A - r2B|, |r1B - r2A|)`.
    pub mirror: f64,
    /// `max(|r1A - r2B|, |r2B - r2A|)`.
    pub literal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub samples: usize,
    pub initial: ConstraintDeviation,
    pub max: ConstraintDeviation,
}

/// Two-slit spherical-wave pair. Immutable once built.
#[derive(Clone, Debug)]
pub struct SphericalPair {
    params: SlitParams,
    norm_factor: f64,
    norm_std_error: f64,
}

impl SphericalPair {
    /// Validates `params` and normalizes over the sampling box by seeded
    /// Monte Carlo quadrature.
    pub fn new(params: SlitParams) -> Result<Self> {
        params.validate()?;
        let mut pair = Self {
            params,
            norm_factor: 1.0,
            norm_std_error: 0.0,
        };
        let bounds = pair.sampling_box();
        let volume: f64 = bounds.iter().map(|(lo, hi)| hi - lo).product();
        let mut rng = ChaCha20Rng::seed_from_u64(NORM_SEED);
        let mut config = [0.0; 6];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..NORM_SAMPLES {
            for (c, (lo, hi)) in config.iter_mut().zip(&bounds) {
                *c = rng.gen_range(*lo..*hi);
            }
            let d = pair.distances(&PairState3D::from_config(&config, 0.0))?;
            let v = pair.bracket(&d).norm_sqr();
            sum += v;
            sum_sq += v * v;
        }
        let n = NORM_SAMPLES as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0) / (n - 1.0);
        let integral = volume * mean;
        pair.norm_factor = integral.sqrt();
        pair.norm_std_error = volume * var.sqrt() / (2.0 * pair.norm_factor);
        Ok(pair)
    }

    pub fn params(&self) -> &SlitParams {
        &self.params
    }

    /// `N` such that `∫ |ψ|² = 1` over the sampling box.
    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    /// Monte Carlo standard error of [`Self::norm_factor`].
    pub fn norm_std_error(&self) -> f64 {
        self.norm_std_error
    }

    pub fn slit_a(&self) -> [f64; 3] {
        [0.0, self.params.slit_a, 0.0]
    }

    pub fn slit_b(&self) -> [f64; 3] {
        [0.0, -self.params.slit_a, 0.0]
    }

    pub fn distances(&self, state: &PairState3D) -> Result<SlitDistances> {
        if state.r1[0] < 0.0 || state.r2[0] < 0.0 {
            return Err(Error::Domain(format!(
                "configuration outside the half-space x >= 0: x1 = {}, x2 = {}",
                state.r1[0], state.r2[0]
            )));
        }
        let dist = |r: &[f64; 3], s: [f64; 3]| {
            ((r[0] - s[0]).powi(2) + (r[1] - s[1]).powi(2) + (r[2] - s[2]).powi(2)).sqrt()
        };
        let d = SlitDistances {
            r1a: dist(&state.r1, self.slit_a()),
            r1b: dist(&state.r1, self.slit_b()),
            r2a: dist(&state.r2, self.slit_a()),
            r2b: dist(&state.r2, self.slit_b()),
        };
        if d.r1a.min(d.r1b).min(d.r2a).min(d.r2b) < SLIT_EXCLUSION {
            return Err(Error::Domain("configuration at a slit".into()));
        }
        Ok(d)
    }

    // unnormalized, time-independent superposition
    fn bracket(&self, d: &SlitDistances) -> ComplexScalar {
        let k = self.params.k;
        ComplexScalar::cis(k * (d.r1a + d.r2b)) / (d.r1a * d.r2b)
            + ComplexScalar::cis(k * (d.r1b + d.r2a)) / (d.r1b * d.r2a)
    }

    fn node_measure(&self, d: &SlitDistances) -> f64 {
        self.bracket(d).norm() * 0.5 * (d.r1a * d.r2b + d.r1b * d.r2a)
    }

    /// Scale-aware distance from a node, `|bracket| (r1A r2B + r1B r2A)/2`,
    /// which is 1 when the two terms add in phase at equal weight.
    pub fn node_measure_at(&self, state: &PairState3D) -> Result<f64> {
        Ok(self.node_measure(&self.distances(state)?))
    }

    fn check_node(&self, d: &SlitDistances) -> Result<()> {
        if self.node_measure(d) < NODE_THRESHOLD {
            Err(Error::Domain("node of ψ".into()))
        } else {
            Ok(())
        }
    }

    pub fn psi3d(&self, state: &PairState3D) -> Result<ComplexScalar> {
        let d = self.distances(state)?;
        let temporal = ComplexScalar::cis(-self.params.energy() * state.t / self.params.hbar);
        Ok(self.bracket(&d) * temporal / self.norm_factor)
    }

    pub fn phase_parts(&self, state: &PairState3D) -> Result<PhaseParts> {
        Ok(phase_parts_from(self.params.k, &self.distances(state)?, 1.0))
    }

    /// `ħ atan2(Nval, Dval) - Et`, principal branch of the spatial part.
    pub fn phase3d(&self, state: &PairState3D) -> Result<f64> {
        let d = self.distances(state)?;
        self.check_node(&d)?;
        let parts = phase_parts_from(self.params.k, &d, 1.0);
        Ok(self.params.hbar * parts.nval.atan2(parts.dval) - self.params.energy() * state.t)
    }

    /// Phase along a path of states, unwrapped so that it is continuous.
    pub fn phase3d_along(&self, states: &[PairState3D]) -> Result<Vec<f64>> {
        let hbar = self.params.hbar;
        let e = self.params.energy();
        let spatial = states
            .iter()
            .map(|s| Ok((self.phase3d(s)? + e * s.t) / hbar))
            .collect::<Result<Vec<f64>>>()?;
        Ok(unwrap_phase(&spatial)
            .into_iter()
            .zip(states)
            .map(|(w, s)| hbar * w - e * s.t)
            .collect())
    }

    pub fn ds_dr(&self, state: &PairState3D) -> Result<RadialPartials> {
        let d = self.distances(state)?;
        self.check_node(&d)?;
        Ok(radial_partials(self.params.k, self.params.hbar, &d, 1.0))
    }

    /// Chain rule: `v_i = (1/m) Σ_j ∂S/∂r_ij (r_i - s_j)/r_ij`.
    pub fn velocities3d(&self, state: &PairState3D) -> Result<([f64; 3], [f64; 3])> {
        let g = self.phase_gradient(state)?;
        let inv_m = 1.0 / self.params.m;
        Ok((
            [g[0] * inv_m, g[1] * inv_m, g[2] * inv_m],
            [g[3] * inv_m, g[4] * inv_m, g[5] * inv_m],
        ))
    }

    /// Six-component `∇S` assembled from [`Self::ds_dr`] and the geometric
    /// factors `∂r_ij/∂r_i = (r_i - s_j)/r_ij`.
    pub fn phase_gradient(&self, state: &PairState3D) -> Result<[f64; 6]> {
        let d = self.distances(state)?;
        self.check_node(&d)?;
        let dr = radial_partials(self.params.k, self.params.hbar, &d, 1.0);
        let (a, b) = (self.slit_a(), self.slit_b());
        let mut g = [0.0; 6];
        for c in 0..3 {
            g[c] = dr.d_r1a * (state.r1[c] - a[c]) / d.r1a + dr.d_r1b * (state.r1[c] - b[c]) / d.r1b;
            g[3 + c] = dr.d_r2a * (state.r2[c] - a[c]) / d.r2a + dr.d_r2b * (state.r2[c] - b[c]) / d.r2b;
        }
        Ok(g)
    }

    pub fn constraint_deviation(&self, state: &PairState3D) -> Result<ConstraintDeviation> {
        let d = self.distances(state)?;
        Ok(ConstraintDeviation {
            mirror: (d.r1a - d.r2b).abs().max((d.r1b - d.r2a).abs()),
            literal: (d.r1a - d.r2b).abs().max((d.r2b - d.r2a).abs()),
        })
    }

    /// Both constraint readings evaluated along a trajectory; the maxima
    /// show whether the flow preserves a manifold it starts on.
    pub fn constraint_report(&self, traj: &Trajectory) -> Result<ConstraintReport> {
        let mut initial = None;
        let mut max = ConstraintDeviation {
            mirror: 0.0,
            literal: 0.0,
        };
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let dev = self.constraint_deviation(&PairState3D::from_config(s, *t))?;
            initial.get_or_insert(dev);
            max.mirror = max.mirror.max(dev.mirror);
            max.literal = max.literal.max(dev.literal);
        }
        let initial = initial.ok_or_else(|| Error::Domain("empty trajectory".into()))?;
        Ok(ConstraintReport {
            samples: traj.len(),
            initial,
            max,
        })
    }
}

/// `Nval`, `Dval` with the second term weighted by `second`.
pub(crate) fn phase_parts_from(k: f64, d: &SlitDistances, second: f64) -> PhaseParts {
    let (su, cu) = (k * (d.r1a + d.r2b)).sin_cos();
    let (sw, cw) = (k * (d.r1b + d.r2a)).sin_cos();
    PhaseParts {
        nval: d.r1b * d.r2a * su + second * d.r1a * d.r2b * sw,
        dval: d.r1b * d.r2a * cu + second * d.r1a * d.r2b * cw,
    }
}

/// Quotient rule on `arctan(N/D)` written as `ħ (N'D - ND')/(N² + D²)`,
/// which stays finite where `D = 0`. `second` weights the second term so
/// that the single-wave limit can be probed.
pub(crate) fn radial_partials(k: f64, hbar: f64, d: &SlitDistances, second: f64) -> RadialPartials {
    let (su, cu) = (k * (d.r1a + d.r2b)).sin_cos();
    let (sw, cw) = (k * (d.r1b + d.r2a)).sin_cos();
    let PhaseParts { nval: n, dval: den } = phase_parts_from(k, d, second);
    let norm = n * n + den * den;
    let q = |dn: f64, dd: f64| hbar * (dn * den - n * dd) / norm;
    let w = second;
    RadialPartials {
        d_r1a: q(
            k * d.r1b * d.r2a * cu + w * d.r2b * sw,
            -k * d.r1b * d.r2a * su + w * d.r2b * cw,
        ),
        d_r2b: q(
            k * d.r1b * d.r2a * cu + w * d.r1a * sw,
            -k * d.r1b * d.r2a * su + w * d.r1a * cw,
        ),
        d_r1b: q(
            d.r2a * su + w * k * d.r1a * d.r2b * cw,
            d.r2a * cu - w * k * d.r1a * d.r2b * sw,
        ),
        d_r2a: q(
            d.r1b * su + w * k * d.r1a * d.r2b * cw,
            d.r1b * cu - w * k * d.r1a * d.r2b * sw,
        ),
    }
}

impl GuidanceModel for SphericalPair {
    fn tag(&self) -> ModelTag {
        ModelTag::Spherical
    }

    fn dim(&self) -> usize {
        6
    }

    fn mass(&self) -> f64 {
        self.params.m
    }

    fn hbar(&self) -> f64 {
        self.params.hbar
    }

    fn psi(&self, config: &[f64], t: f64) -> Result<ComplexScalar> {
        self.psi3d(&PairState3D::from_config(config, t))
    }

    fn velocity(&self, config: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let (v1, v2) = self.velocities3d(&PairState3D::from_config(config, t))?;
        out[..3].copy_from_slice(&v1);
        out[3..6].copy_from_slice(&v2);
        Ok(())
    }

    fn sampling_box(&self) -> Vec<(f64, f64)> {
        let l = self.params.box_length();
        let x0 = self.params.x_min();
        let per_particle = [(x0, x0 + l), (-0.5 * l, 0.5 * l), (-0.5 * l, 0.5 * l)];
        per_particle.iter().chain(per_particle.iter()).copied().collect()
    }

    fn density_bound(&self) -> f64 {
        // every slit distance is at least x_min inside the box
        let x0 = self.params.x_min();
        let amp = 2.0 / (x0 * x0);
        (1.0 + 1e-12) * amp * amp / (self.norm_factor * self.norm_factor)
    }
}
