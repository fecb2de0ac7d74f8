//! Ensembles of trajectories: sampling from `|ψ|²`, evolution under the
//! guidance flow, and distribution comparisons at later times.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GuidanceModel, ModelTag};
use crate::numerics::roots::ROOT_TOL;
use crate::numerics::stats::{
    chi_square, ks_critical_99, ks_statistic, ChiSquareReport, Histogram, ReferenceCdf, WeightedEcdf,
};
use crate::numerics::{find_root_bracketed, integrate_ode, IntegratorConfig, Termination, Trajectory};
use crate::planewave::{PairState1D, PlaneWavePair};
use crate::spherical::SphericalPair;

/// Identifier of the pseudo-random generator, recorded in run metadata.
pub const RNG_ID: &str = "chacha20/rand_chacha-0.3/seed_from_u64";

/// Rejection sampling below this acceptance rate is a configuration error.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Proposals drawn before the acceptance rate is judged.
const ACCEPTANCE_PROBE: u64 = 100_000;

/// Distribution comparisons need at least this many surviving members.
pub const MIN_SURVIVORS: usize = 100;

const HISTOGRAM_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingInfo {
    pub distribution: String,
    pub seed: u64,
    pub rng: String,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub id: usize,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub model: ModelTag,
    pub t0: f64,
    pub sampling: SamplingInfo,
    pub integrator: Option<IntegratorConfig>,
    pub members: Vec<Member>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn truncated(&self) -> usize {
        self.members.iter().filter(|m| m.trajectory.is_truncated()).count()
    }

    /// Fraction of members whose integration completed.
    pub fn survival_fraction(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        1.0 - self.truncated() as f64 / self.members.len() as f64
    }

    pub fn initial_states(&self) -> impl Iterator<Item = &[f64]> {
        self.members.iter().filter_map(|m| m.trajectory.states.first().map(Vec::as_slice))
    }

    /// Configurations of the members that have a sample at `t`.
    pub fn states_at(&self, t: f64) -> Vec<&[f64]> {
        self.members.iter().filter_map(|m| m.trajectory.state_at(t)).collect()
    }

    /// One row per member and sample: `member_id, t, x1, y1, z1, x2, y2, z2,
    /// vx1, vy1, vz1, vx2, vy2, vz2, truncated`. 1D members leave the `y`/`z`
    /// columns empty. Numbers use the shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_trajectories_csv(self.members.iter().map(|m| (m.id, &m.trajectory)), out)
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "member_id", "t", "x1", "y1", "z1", "x2", "y2", "z2", "vx1", "vy1", "vz1", "vx2", "vy2", "vz2",
    "truncated",
];

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// CSV writer shared by ensemble and single-trajectory outputs.
pub fn write_trajectories_csv<'a, W, I>(rows: I, out: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a Trajectory)>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let mut record: Vec<String> = Vec::with_capacity(CSV_HEADER.len());
    for (id, traj) in rows {
        let truncated = traj.is_truncated().to_string();
        for ((t, s), v) in traj.times.iter().zip(&traj.states).zip(&traj.velocities) {
            record.clear();
            record.push(id.to_string());
            record.push(fmt_num(*t));
            match s.len() {
                2 => {
                    for x in [s[0], s[1], v[0], v[1]] {
                        record.extend([fmt_num(x), String::new(), String::new()]);
                    }
                }
                6 => {
                    record.extend(s.iter().map(|&x| fmt_num(x)));
                    record.extend(v.iter().map(|&x| fmt_num(x)));
                }
                n => {
                    return Err(Error::Config(format!(
                        "cannot serialize a {n}-dimensional configuration"
                    )))
                }
            }
            record.push(truncated.clone());
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Draw `n` configurations distributed as `|ψ|²` at `t0` by rejection from
/// a uniform proposal over the model's sampling box.
///
/// The generator is seeded from `seed` alone, so equal seeds give bitwise
/// equal samples.
pub fn sample_initial<M: GuidanceModel + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
    t0: f64,
) -> Result<(Vec<Vec<f64>>, SamplingInfo)> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "n",
            constraint: "must be >= 1",
            value: "0".into(),
        });
    }
    let bounds = model.sampling_box();
    let bound = model.density_bound();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut config = vec![0.0; model.dim()];
    let mut proposals = 0u64;
    while out.len() < n {
        proposals += 1;
        for (c, (lo, hi)) in config.iter_mut().zip(&bounds) {
            *c = rng.gen_range(*lo..*hi);
        }
        let u: f64 = rng.gen();
        if let Ok(d) = model.density(&config, t0) {
            debug_assert!(d <= bound, "density {d} exceeds bound {bound}");
            if u * bound < d {
                out.push(config.clone());
            }
        }
        if proposals == ACCEPTANCE_PROBE {
            let rate = out.len() as f64 / proposals as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::LowAcceptance {
                    rate,
                    min: MIN_ACCEPTANCE,
                });
            }
        }
    }
    let accepted = out.len() as u64;
    Ok((
        out,
        SamplingInfo {
            distribution: "density_direct".into(),
            seed,
            rng: RNG_ID.into(),
            proposals,
            accepted,
            acceptance_rate: accepted as f64 / proposals as f64,
        },
    ))
}

/// Sample an ensemble and attach the field at each initial configuration.
pub fn initial_ensemble<M: GuidanceModel + ?Sized>(model: &M, n: usize, seed: u64, t0: f64) -> Result<Ensemble> {
    let (configs, sampling) = sample_initial(model, n, seed, t0)?;
    let members = configs
        .into_iter()
        .enumerate()
        .map(|(id, c)| {
            let mut v = vec![0.0; c.len()];
            let termination = match model.velocity(&c, t0, &mut v) {
                Ok(()) => Termination::Completed,
                Err(e) => {
                    v.fill(f64::NAN);
                    Termination::Domain {
                        t: t0,
                        reason: e.to_string(),
                    }
                }
            };
            Member {
                id,
                trajectory: Trajectory {
                    times: vec![t0],
                    states: vec![c],
                    velocities: vec![v],
                    termination,
                },
            }
        })
        .collect();
    Ok(Ensemble {
        model: model.tag(),
        t0,
        sampling,
        integrator: None,
        members,
    })
}

/// Integrate every member from its initial configuration to `t_end`,
/// recording `sample_times`. Members run in parallel; each integration is
/// independent, so the result does not depend on scheduling. Members that
/// hit a node are kept with their truncation reason.
pub fn evolve_ensemble<M: GuidanceModel + ?Sized>(
    model: &M,
    ensemble: &Ensemble,
    t_end: f64,
    sample_times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Ensemble> {
    cfg.validate()?;
    let t0 = ensemble.t0;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| model.velocity(y, t, dy);
    let members = ensemble
        .members
        .par_iter()
        .map(|m| {
            let start = &m.trajectory.states[0];
            let trajectory = integrate_ode(rhs, t0, start, t_end, sample_times, cfg)?;
            Ok(Member { id: m.id, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        model: ensemble.model,
        t0,
        sampling: ensemble.sampling.clone(),
        integrator: Some(*cfg),
        members,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub time: f64,
    pub marginal: String,
    pub members: usize,
    pub sample_size: usize,
    pub survival_fraction: f64,
    pub ks_statistic: f64,
    pub ks_critical_99: f64,
    pub below_critical: bool,
    pub histogram: Histogram,
    pub chi_square: Option<ChiSquareReport>,
}

/// KS comparison of a 1D projection of the members at time `t` against a
/// reference distribution.
pub fn compare_distribution<P, R>(
    ensemble: &Ensemble,
    t: f64,
    marginal: &str,
    projection: P,
    reference: &R,
) -> Result<DistributionReport>
where
    P: Fn(&[f64]) -> f64,
    R: ReferenceCdf + ?Sized,
{
    let states = ensemble.states_at(t);
    if states.len() < MIN_SURVIVORS {
        return Err(Error::InsufficientSamples {
            got: states.len(),
            need: MIN_SURVIVORS,
        });
    }
    let values: Vec<f64> = states.iter().map(|s| projection(s)).collect();
    let ks = ks_statistic(&values, reference);
    let crit = ks_critical_99(values.len());
    Ok(DistributionReport {
        time: t,
        marginal: marginal.into(),
        members: ensemble.len(),
        sample_size: values.len(),
        survival_fraction: values.len() as f64 / ensemble.len().max(1) as f64,
        ks_statistic: ks,
        ks_critical_99: crit,
        below_critical: ks < crit,
        histogram: Histogram::build(&values, reference, HISTOGRAM_BINS),
        chi_square: None,
    })
}

/// Plane-wave comparison: KS of the folded relative coordinate against the
/// stationary `|ψ|²` marginal, plus a 64×64 chi-square on the torus.
pub fn compare_planewave(model: &PlaneWavePair, ensemble: &Ensemble, t: f64) -> Result<DistributionReport> {
    let reference = model.delta_marginal();
    let mut report = compare_distribution(
        ensemble,
        t,
        "x1 - x2 (folded onto [-L/2, L/2))",
        |s| model.wrap_delta(s[0] - s[1]),
        &reference,
    )?;
    let bins = HISTOGRAM_BINS;
    let l = model.box_length();
    let w = l / bins as f64;
    let mut observed = vec![0u64; bins * bins];
    let states = ensemble.states_at(t);
    for s in &states {
        let i = ((model.wrap_position(s[0]) / w) as usize).min(bins - 1);
        let j = ((model.wrap_position(s[1]) / w) as usize).min(bins - 1);
        observed[i * bins + j] += 1;
    }
    let n = states.len() as f64;
    let expected: Vec<f64> = (0..bins * bins)
        .map(|c| {
            let (i, j) = ((c / bins) as f64, (c % bins) as f64);
            n * model.cell_probability((i * w, (i + 1.0) * w), (j * w, (j + 1.0) * w))
        })
        .collect();
    report.chi_square = Some(chi_square(&observed, &expected, 5.0));
    Ok(report)
}

/// Spherical comparison along one configuration coordinate (0..6). The
/// reference marginal is estimated by importance-weighted uniform draws
/// over the sampling box; members outside the box at `t` are ignored.
pub fn compare_spherical(
    model: &SphericalPair,
    ensemble: &Ensemble,
    t: f64,
    coordinate: usize,
    reference_draws: usize,
    seed: u64,
) -> Result<DistributionReport> {
    if coordinate >= 6 {
        return Err(Error::Config(format!("coordinate index {coordinate} out of range 0..6")));
    }
    let bounds = model.sampling_box();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut config = [0.0; 6];
    let mut pairs = Vec::with_capacity(reference_draws);
    for _ in 0..reference_draws {
        for (c, (lo, hi)) in config.iter_mut().zip(&bounds) {
            *c = rng.gen_range(*lo..*hi);
        }
        if let Ok(d) = model.density(&config, t) {
            pairs.push((config[coordinate], d));
        }
    }
    let (lo, hi) = bounds[coordinate];
    let reference = WeightedEcdf::new(pairs, lo, hi);
    let inside = |s: &[f64]| s.iter().zip(&bounds).all(|(x, (a, b))| x >= a && x <= b);
    let kept = Ensemble {
        members: ensemble
            .members
            .iter()
            .filter(|m| m.trajectory.state_at(t).is_some_and(inside))
            .cloned()
            .collect(),
        ..ensemble.clone()
    };
    const NAMES: [&str; 6] = ["x1", "y1", "z1", "x2", "y2", "z2"];
    let mut report = compare_distribution(&kept, t, NAMES[coordinate], |s| s[coordinate], &reference)?;
    report.members = ensemble.len();
    report.survival_fraction = report.sample_size as f64 / ensemble.len().max(1) as f64;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        Self {
            count: n,
            min: sorted.first().copied().unwrap_or(f64::NAN),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            mean,
            std_dev: var.sqrt(),
            median: if n == 0 { f64::NAN } else { sorted[n / 2] },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalConstraintReport {
    /// Times at which each member's own trajectory has `x1 = x2`.
    pub per_member_t0: Summary,
    pub common_t0: f64,
    pub common_beta: f64,
    /// Relative coordinates solved at the common time under the common `β`.
    pub global_delta: Summary,
    /// KS distance of those coordinates from the stationary marginal.
    pub global_ks: f64,
    /// `max(F(0), 1 - F(0))`, the KS distance of a point mass at zero.
    pub point_mass_ks: f64,
}

/// Contrast the per-trajectory reading of the integration constant with a
/// single ensemble-wide one.
///
/// Each member's coincidence time follows from its own conserved relation.
/// Under one common `β = -2v t₀`, the relation is solved for every member's
/// relative coordinate at `t₀` by bracketed root finding; the resulting
/// distribution is compared with the `|ψ|²` marginal.
pub fn global_constraint_analysis(
    model: &PlaneWavePair,
    ensemble: &Ensemble,
    common_t0: f64,
) -> Result<GlobalConstraintReport> {
    let params = *model.params();
    if params.a == params.b {
        return Err(Error::Degenerate("a = b: no implicit relation".into()));
    }
    let t0s = ensemble
        .members
        .iter()
        .filter_map(|m| m.trajectory.states.first().map(|s| (m.trajectory.times[0], s)))
        .map(|(t, s)| model.coincidence_time(&PairState1D::new(s[0], s[1], t)))
        .collect::<Result<Vec<f64>>>()?;

    let v = params.speed();
    let beta = -2.0 * v * common_t0;
    let l = model.box_length();
    let deltas = ensemble
        .initial_states()
        .map(|_| {
            find_root_bracketed(
                |d| model.implicit_lhs(d).unwrap_or(f64::NAN) - 2.0 * v * common_t0 - beta,
                -l,
                l,
                ROOT_TOL,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let reference = model.delta_marginal();
    let folded: Vec<f64> = deltas.iter().map(|&d| model.wrap_delta(d)).collect();
    let global_ks = ks_statistic(&folded, &reference);
    let f0 = reference.cdf_sorted(&[0.0])[0];
    Ok(GlobalConstraintReport {
        per_member_t0: Summary::of(&t0s),
        common_t0,
        common_beta: beta,
        global_delta: Summary::of(&deltas),
        global_ks,
        point_mass_ks: f0.max(1.0 - f0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planewave::PlaneWaveParams;

    fn pw(a: f64, b: f64) -> PlaneWavePair {
        PlaneWavePair::new(PlaneWaveParams::new(a, b)).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = pw(1.0, 0.5);
        let a = sample_initial(&m, 500, 9, 0.0).unwrap();
        let b = sample_initial(&m, 500, 9, 0.0).unwrap();
        assert_eq!(a, b);
        let c = sample_initial(&m, 500, 10, 0.0).unwrap();
        assert_ne!(a.0, c.0);
        assert_eq!(a.1.rng, RNG_ID);
    }

    #[test]
    fn zero_members_rejected() {
        assert!(sample_initial(&pw(1.0, 0.0), 0, 1, 0.0).is_err());
    }

    #[test]
    fn flat_density_accepts_everything() {
        let (_, info) = sample_initial(&pw(1.0, 0.0), 1000, 3, 0.0).unwrap();
        assert_eq!(info.proposals, 1000);
    }

    #[test]
    fn node_bins_stay_empty() {
        // a = b: density ∝ 1 + cos 2θ vanishes at θ = ±π/2
        let m = pw(1.0, 1.0);
        let ens = initial_ensemble(&m, 20_000, 5, 0.0).unwrap();
        let near_node = ens
            .initial_states()
            .filter(|s| (m.wrap_delta(s[0] - s[1]).abs() - std::f64::consts::FRAC_PI_2).abs() < 0.01)
            .count();
        // expected fraction ≈ ∫ (1 + cos 2θ) over ±0.01 about the node / total ≈ 2e-7
        assert_eq!(near_node, 0);
    }

    #[test]
    fn low_acceptance_is_configuration_error() {
        let mut p = crate::spherical::SlitParams::new(5.0, 0.5);
        p.x_min = Some(0.01);
        let m = SphericalPair::new(p).unwrap();
        assert!(matches!(sample_initial(&m, 10, 1, 0.0), Err(Error::LowAcceptance { .. })));
    }

    #[test]
    fn free_ensemble_moves_ballistically() {
        let m = pw(1.0, 0.0);
        let ens = initial_ensemble(&m, 50, 2, 0.0).unwrap();
        let out = evolve_ensemble(&m, &ens, 2.0, &[1.0], &IntegratorConfig::default()).unwrap();
        for (a, b) in ens.members.iter().zip(&out.members) {
            let s0 = &a.trajectory.states[0];
            let s1 = b.trajectory.state_at(2.0).unwrap();
            assert!((s1[0] - (s0[0] + 2.0)).abs() < 1e-12);
            assert!((s1[1] - (s0[1] - 2.0)).abs() < 1e-12);
        }
        assert_eq!(out.survival_fraction(), 1.0);
    }

    #[test]
    fn symmetric_ensemble_is_static() {
        let m = pw(1.0, 1.0);
        let ens = initial_ensemble(&m, 50, 2, 0.0).unwrap();
        let out = evolve_ensemble(&m, &ens, 3.0, &[], &IntegratorConfig::default()).unwrap();
        for (a, b) in ens.members.iter().zip(&out.members) {
            assert_eq!(a.trajectory.states[0], *b.trajectory.last_state().unwrap());
        }
    }

    #[test]
    fn too_few_survivors() {
        let m = pw(1.0, 0.5);
        let ens = initial_ensemble(&m, 50, 2, 0.0).unwrap();
        assert!(matches!(
            compare_planewave(&m, &ens, 0.0),
            Err(Error::InsufficientSamples { got: 50, .. })
        ));
    }

    #[test]
    fn coincidence_time_ignores_centre_of_mass() {
        let m = pw(1.0, 0.2);
        let a = m.coincidence_time(&PairState1D::new(1.0, 0.25, 0.0)).unwrap();
        let b = m.coincidence_time(&PairState1D::new(4.0, 3.25, 0.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn global_reading_collapses_to_a_point() {
        let m = pw(1.0, 0.2);
        let ens = initial_ensemble(&m, 1000, 4, 0.0).unwrap();
        let rep = global_constraint_analysis(&m, &ens, 0.0).unwrap();
        assert!(rep.global_delta.min.abs() < 1e-9 && rep.global_delta.max.abs() < 1e-9);
        assert!((rep.global_ks - rep.point_mass_ks).abs() < 1e-6);
        assert!((rep.point_mass_ks - 0.5).abs() < 1e-12);
        assert!(global_constraint_analysis(&pw(1.0, 1.0), &ens, 0.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = pw(1.0, 0.0);
        let ens = initial_ensemble(&m, 2, 1, 0.0).unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 15);
        assert_eq!(row[0], "0");
        assert_eq!(row[3], "");
        assert_eq!(row[8], "1.0");
        assert_eq!(row[11], "-1.0");
        assert_eq!(row[14], "false");
        let x1: f64 = row[2].parse().unwrap();
        assert_eq!(x1, ens.members[0].trajectory.states[0][0]);
    }
}
