//! Entangled pair of counter-propagating relative plane waves in 1D.
//!
//! ```text
//! ψ(x1, x2, t) = [a e^{iθ} + b e^{-iθ}] e^{-iEt/ħ} / (√N (a + b)),   θ = p (x1 - x2) / ħ
//! ```
//!
//! with `E = p²/m`. The guidance velocities are equal and opposite and
//! depend on `Δ = x1 - x2` only, so the centre of mass is frozen and the
//! relative coordinate obeys a closed-form implicit relation in `(Δ, t)`.
//!
//! The configuration box is the periodic torus `[0, L)²`, with `L` a whole
//! multiple of `πħ/p` so that `|ψ|²` and the velocity field are periodic on
//! it. Trajectories are integrated unwrapped; positions are folded onto the
//! torus only when distributions are compared.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, Error, Result};
use crate::model::{GuidanceModel, ModelTag};
use crate::numerics::quad::Rule;
use crate::numerics::stats::QuadratureCdf;
use crate::numerics::{count_roots_scan, ComplexScalar, RootScanReport, Trajectory};

/// Relative amplitude below which a configuration is treated as a node.
pub const NODE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveParams {
    pub a: f64,
    pub b: f64,
    /// Momentum.
    pub p: f64,
    pub m: f64,
    pub hbar: f64,
    /// Side of the periodic box; `None` selects [`PlaneWaveParams::default_box_length`].
    pub box_length: Option<f64>,
}

impl PlaneWaveParams {
    /// Amplitudes `a`, `b` with `p = m = ħ = 1` and the default box.
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            p: 1.0,
            m: 1.0,
            hbar: 1.0,
            box_length: None,
        }
    }

    /// `6πħ/p`: the whole number of wavelengths `2πħ/p` closest to `20ħ/p`.
    pub fn default_box_length(p: f64, hbar: f64) -> f64 {
        6.0 * PI * hbar / p
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
            .unwrap_or_else(|| Self::default_box_length(self.p, self.hbar))
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("a", self.a)?;
        check_non_negative("b", self.b)?;
        check_positive("p", self.p)?;
        check_positive("m", self.m)?;
        check_positive("hbar", self.hbar)?;
        if !(self.a + self.b > 0.0) {
            return Err(Error::InvalidParameter {
                field: "a",
                constraint: "a + b must be > 0",
                value: format!("a = {}, b = {}", self.a, self.b),
            });
        }
        let l = self.box_length();
        check_positive("box_length", l)?;
        let cells = l * self.p / (PI * self.hbar);
        if cells.round() < 1.0 || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidParameter {
                field: "box_length",
                constraint: "must be a positive whole multiple of πħ/p",
                value: l.to_string(),
            });
        }
        Ok(())
    }

    /// `c = (a - b)/(a + b)`.
    pub fn contrast(&self) -> f64 {
        (self.a - self.b) / (self.a + self.b)
    }

    /// `E = p²/m`.
    pub fn energy(&self) -> f64 {
        self.p * self.p / self.m
    }

    /// `v = p/m`.
    pub fn speed(&self) -> f64 {
        self.p / self.m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairState1D {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
}

impl PairState1D {
    pub fn new(x1: f64, x2: f64, t: f64) -> Self {
        Self { x1, x2, t }
    }

    pub fn delta(&self) -> f64 {
        self.x1 - self.x2
    }

    pub fn config(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }
}

/// Phase `S` together with the branch multiple of `πħ` that was added to
/// the principal `ħ arctan(c tan θ)` to keep `S` continuous in `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseValue {
    pub s: f64,
    pub eta: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDiscrepancy {
    pub max_abs_gap: f64,
    pub theta_at_max: f64,
    pub agree: bool,
}

/// Side-by-side check of the sufficiency conditions and the scanned roots
/// of the implicit relation at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub a: f64,
    pub b: f64,
    pub t: f64,
    pub t0: f64,
    /// `4ab < a² + b²`.
    pub four_ab_below_sum_of_squares: bool,
    /// `b < a/3`.
    pub b_below_a_third: bool,
    pub conditions_agree: bool,
    /// `b/a` (or `a/b`) must stay below `2 - √3` for `4ab < a² + b²`.
    pub ratio_threshold: f64,
    /// Scan of the relation with the Δ coefficient `½(a²+b²)/(a²-b²)`.
    pub printed: RootScanReport,
    /// Scan of the relation actually conserved by the flow, coefficient `(a²+b²)/(a²-b²)`.
    pub conserved: RootScanReport,
}

/// Closed-form evaluator of the plane-wave pair. Immutable once built.
#[derive(Clone, Debug)]
pub struct PlaneWavePair {
    params: PlaneWaveParams,
    box_length: f64,
    norm: f64,
}

impl PlaneWavePair {
    /// Validates `params` and computes the box normalization `N` by
    /// Gauss–Legendre quadrature of the unnormalized density over `[0, L]²`.
    pub fn new(params: PlaneWaveParams) -> Result<Self> {
        params.validate()?;
        let box_length = params.box_length();
        let mut pair = Self {
            params,
            box_length,
            norm: 1.0,
        };
        let cells = (box_length * params.p / (PI * params.hbar)).round() as usize;
        let rule = Rule::new(8);
        pair.norm = rule.integrate_2d(
            |x1, x2| pair.unnormalized_density(x1 - x2),
            (0.0, box_length),
            (0.0, box_length),
            4 * cells,
        );
        Ok(pair)
    }

    pub fn params(&self) -> &PlaneWaveParams {
        &self.params
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Box normalization constant `N`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn theta(&self, delta: f64) -> f64 {
        self.params.p * delta / self.params.hbar
    }

    // (a² + b² + 2ab cos 2θ)/(a + b)²
    fn unnormalized_density(&self, delta: f64) -> f64 {
        let PlaneWaveParams { a, b, .. } = self.params;
        (a * a + b * b + 2.0 * a * b * (2.0 * self.theta(delta)).cos()) / ((a + b) * (a + b))
    }

    /// `|ψ| √N`; zero exactly at nodes.
    fn relative_amplitude(&self, theta: f64) -> f64 {
        let c = self.params.contrast();
        let (s, co) = theta.sin_cos();
        (co * co + c * c * s * s).sqrt()
    }

    fn check_node(&self, theta: f64) -> Result<()> {
        if self.relative_amplitude(theta) < NODE_THRESHOLD {
            Err(Error::Domain(format!("node of ψ at θ = {theta}")))
        } else {
            Ok(())
        }
    }

    pub fn psi(&self, state: &PairState1D) -> ComplexScalar {
        let PlaneWaveParams { a, b, hbar, .. } = self.params;
        let theta = self.theta(state.delta());
        let spatial = a * ComplexScalar::cis(theta) + b * ComplexScalar::cis(-theta);
        let temporal = ComplexScalar::cis(-self.params.energy() * state.t / hbar);
        spatial * temporal / (self.norm.sqrt() * (a + b))
    }

    /// `|ψ|²` from the complex value.
    pub fn density_direct(&self, state: &PairState1D) -> f64 {
        self.psi(state).norm_sqr()
    }

    /// `(a² + b² + 2ab cos θ)/(N (a + b)²)`, with `cos θ` where the modulus
    /// expands to `cos 2θ`. Kept verbatim for the discrepancy report.
    pub fn density_as_printed(&self, state: &PairState1D) -> f64 {
        let PlaneWaveParams { a, b, .. } = self.params;
        let theta = self.theta(state.delta());
        (a * a + b * b + 2.0 * a * b * theta.cos()) / (self.norm * (a + b) * (a + b))
    }

    /// Largest gap between [`Self::density_direct`] and
    /// [`Self::density_as_printed`] over `θ ∈ [0, 2π]`.
    pub fn density_discrepancy(&self, grid: usize) -> DensityDiscrepancy {
        let grid = grid.max(2);
        let mut worst = (0.0, 0.0);
        for i in 0..grid {
            let theta = 2.0 * PI * i as f64 / (grid - 1) as f64;
            let state = PairState1D::new(theta * self.params.hbar / self.params.p, 0.0, 0.0);
            let gap = (self.density_direct(&state) - self.density_as_printed(&state)).abs();
            if gap > worst.0 {
                worst = (gap, theta);
            }
        }
        DensityDiscrepancy {
            max_abs_gap: worst.0,
            theta_at_max: worst.1,
            agree: worst.0 < 1e-12,
        }
    }

    /// `S = ħ arctan(c tan θ) - Et + η πħ`, with the branch chosen so that `S`
    /// is continuous in `θ` on all of ℝ.
    pub fn phase(&self, state: &PairState1D) -> Result<PhaseValue> {
        let theta = self.theta(state.delta());
        self.check_node(theta)?;
        let c = self.params.contrast();
        let cell = (theta / PI + 0.5).floor();
        let reduced = theta - cell * PI;
        // the phase winds backwards when b > a
        let eta = if c < 0.0 { -cell } else { cell } as i64;
        let hbar = self.params.hbar;
        let s = hbar * ((c * reduced.tan()).atan() + eta as f64 * PI) - self.params.energy() * state.t;
        Ok(PhaseValue { s, eta })
    }

    /// Guidance velocities in the form `v1 = (p/m) c / (cos²θ + c² sin²θ)`,
    /// `v2 = -v1`, which has no singularity where `tan θ` diverges.
    pub fn velocities(&self, state: &PairState1D) -> Result<(f64, f64)> {
        let theta = self.theta(state.delta());
        self.check_node(theta)?;
        let v1 = self.relative_velocity_half(theta);
        Ok((v1, -v1))
    }

    fn relative_velocity_half(&self, theta: f64) -> f64 {
        let c = self.params.contrast();
        let (s, co) = theta.sin_cos();
        self.params.speed() * c / (co * co + c * c * s * s)
    }

    /// The velocity written with `f = c tan θ`: `(p/m) c (1 + tan²θ)/(1 + f²)`.
    /// Numerically meaningless near `θ = π/2 + kπ`.
    pub fn velocity_tan_form(&self, state: &PairState1D) -> f64 {
        let c = self.params.contrast();
        let tan = self.theta(state.delta()).tan();
        let f = c * tan;
        self.params.speed() * c * (1.0 + tan * tan) / (1.0 + f * f)
    }

    fn require_distinct_amplitudes(&self) -> Result<()> {
        if self.params.a == self.params.b {
            Err(Error::Degenerate(
                "a = b: the implicit relation divides by a² - b²".into(),
            ))
        } else {
            Ok(())
        }
    }

    /// Left side of the implicit relation conserved by the flow:
    /// `(a²+b²)/(a²-b²) Δ + (ħ/(m v)) ab/(a²-b²) sin 2θ`, equal to `2vt + β`.
    pub fn implicit_lhs(&self, delta: f64) -> Result<f64> {
        self.require_distinct_amplitudes()?;
        Ok(self.lhs_with_slope(delta, 1.0))
    }

    /// Same relation with the Δ coefficient halved, `½(a²+b²)/(a²-b²)`.
    /// This is not conserved along trajectories.
    pub fn implicit_lhs_as_printed(&self, delta: f64) -> Result<f64> {
        self.require_distinct_amplitudes()?;
        Ok(self.lhs_with_slope(delta, 0.5))
    }

    fn lhs_with_slope(&self, delta: f64, slope: f64) -> f64 {
        let PlaneWaveParams { a, b, m, hbar, .. } = self.params;
        let d = a * a - b * b;
        let mv = m * self.params.speed();
        slope * (a * a + b * b) / d * delta
            + hbar / mv * (a * b / d) * (2.0 * self.theta(delta)).sin()
    }

    /// `lhs(Δ) - 2vt - β`.
    pub fn implicit_residual(&self, state: &PairState1D, beta: f64) -> Result<f64> {
        Ok(self.implicit_lhs(state.delta())? - 2.0 * self.params.speed() * state.t - beta)
    }

    pub fn implicit_residual_as_printed(&self, state: &PairState1D, beta: f64) -> Result<f64> {
        Ok(self.implicit_lhs_as_printed(state.delta())? - 2.0 * self.params.speed() * state.t - beta)
    }

    /// The integration constant `β` of the trajectory through `state`.
    pub fn beta_of(&self, state: &PairState1D) -> Result<f64> {
        Ok(self.implicit_lhs(state.delta())? - 2.0 * self.params.speed() * state.t)
    }

    /// Time at which the trajectory through `state` has `Δ = 0`.
    pub fn coincidence_time(&self, state: &PairState1D) -> Result<f64> {
        Ok(state.t - self.implicit_lhs(state.delta())? / (2.0 * self.params.speed()))
    }

    /// Largest `|residual|` along a trajectory, with `β` fixed at its first sample.
    pub fn residual_drift(&self, traj: &Trajectory) -> Result<f64> {
        let Some(first) = traj.states.first() else {
            return Ok(0.0);
        };
        let beta = self.beta_of(&PairState1D::new(first[0], first[1], traj.times[0]))?;
        let mut worst: f64 = 0.0;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let r = self.implicit_residual(&PairState1D::new(s[0], s[1], *t), beta)?;
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    /// Largest `|(x1 + x2) - (x1 + x2)|₀|` along a trajectory.
    pub fn cm_invariant(&self, traj: &Trajectory) -> f64 {
        let Some(first) = traj.states.first() else {
            return 0.0;
        };
        let alpha = first[0] + first[1];
        traj.states
            .iter()
            .map(|s| ((s[0] + s[1]) - alpha).abs())
            .fold(0.0, f64::max)
    }

    /// Count the solutions `Δ` of `lhs(Δ) = 2v(t - t0)` on `interval`, for
    /// both forms of the relation, next to the two sufficiency conditions.
    pub fn uniqueness_analysis(
        &self,
        t: f64,
        t0: f64,
        interval: [f64; 2],
        grid: usize,
    ) -> Result<UniquenessReport> {
        self.require_distinct_amplitudes()?;
        let PlaneWaveParams { a, b, .. } = self.params;
        let rhs = 2.0 * self.params.speed() * (t - t0);
        let printed = count_roots_scan(
            |d| self.lhs_with_slope(d, 0.5) - rhs,
            interval[0],
            interval[1],
            grid,
        )?;
        let conserved = count_roots_scan(
            |d| self.lhs_with_slope(d, 1.0) - rhs,
            interval[0],
            interval[1],
            grid,
        )?;
        let four_ab = 4.0 * a * b < a * a + b * b;
        let third = b < a / 3.0;
        Ok(UniquenessReport {
            a,
            b,
            t,
            t0,
            four_ab_below_sum_of_squares: four_ab,
            b_below_a_third: third,
            conditions_agree: four_ab == third,
            ratio_threshold: 2.0 - 3f64.sqrt(),
            printed,
            conserved,
        })
    }

    /// Fold a relative coordinate onto `[-L/2, L/2)`.
    pub fn wrap_delta(&self, delta: f64) -> f64 {
        let l = self.box_length;
        (delta + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    /// Fold a position onto `[0, L)`.
    pub fn wrap_position(&self, x: f64) -> f64 {
        x.rem_euclid(self.box_length)
    }

    /// Reference distribution of the folded relative coordinate on the torus:
    /// density `∝ |ψ|²(Δ)` on `[-L/2, L/2)`, CDF by quadrature.
    pub fn delta_marginal(&self) -> QuadratureCdf<impl Fn(f64) -> f64 + '_> {
        let half = 0.5 * self.box_length;
        QuadratureCdf::new(move |d| self.unnormalized_density(d), -half, half)
    }

    /// Expected probability of the cell `[x1a, x1b] × [x2a, x2b]` of the torus.
    pub fn cell_probability(&self, (x1a, x1b): (f64, f64), (x2a, x2b): (f64, f64)) -> f64 {
        let width = (x1b - x1a).abs().max((x2b - x2a).abs());
        let panels = (4.0 * width * self.params.p / (PI * self.params.hbar)).ceil().max(1.0) as usize;
        Rule::new(6).integrate_2d(
            |x1, x2| self.unnormalized_density(x1 - x2),
            (x1a, x1b),
            (x2a, x2b),
            panels,
        ) / self.norm
    }
}

impl GuidanceModel for PlaneWavePair {
    fn tag(&self) -> ModelTag {
        ModelTag::Planewave
    }

    fn dim(&self) -> usize {
        2
    }

    fn mass(&self) -> f64 {
        self.params.m
    }

    fn hbar(&self) -> f64 {
        self.params.hbar
    }

    fn psi(&self, config: &[f64], t: f64) -> Result<ComplexScalar> {
        Ok(PlaneWavePair::psi(self, &PairState1D::new(config[0], config[1], t)))
    }

    fn velocity(&self, config: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let (v1, v2) = self.velocities(&PairState1D::new(config[0], config[1], t))?;
        out[0] = v1;
        out[1] = v2;
        Ok(())
    }

    fn density(&self, config: &[f64], t: f64) -> Result<f64> {
        Ok(self.density_direct(&PairState1D::new(config[0], config[1], t)))
    }

    fn sampling_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.box_length); 2]
    }

    fn density_bound(&self) -> f64 {
        // (a² + b² + 2ab cos 2θ) ≤ (a + b)² for a, b ≥ 0
        (1.0 + 1e-12) / self.norm
    }
}
