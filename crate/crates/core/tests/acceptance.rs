//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its verdict; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use bohm_pair::checks::{phase_gradient_oracle, planewave_states, spherical_states, velocity_oracle};
use bohm_pair::config::validate_config;
use bohm_pair::ensemble::{compare_planewave, evolve_ensemble, global_constraint_analysis, initial_ensemble};
use bohm_pair::model::GuidanceModel;
use bohm_pair::numerics::stats::ks_critical_99;
use bohm_pair::numerics::{integrate_ode, IntegratorConfig};
use bohm_pair::planewave::{PairState1D, PlaneWavePair, PlaneWaveParams};
use bohm_pair::run::{run, Status};
use bohm_pair::spherical::{PairState3D, SlitParams, SphericalPair};

type Verdict = Result<(bool, String), String>;

fn pw(a: f64, b: f64) -> PlaneWavePair {
    PlaneWavePair::new(PlaneWaveParams::new(a, b)).expect("valid parameters")
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn limits() -> Verdict {
    let mut worst_free: f64 = 0.0;
    let mut worst_standing: f64 = 0.0;
    let mut skipped = 0;
    for (p, m) in [(1.0, 1.0), (2.0, 0.5)] {
        let free = PlaneWavePair::new(PlaneWaveParams {
            p,
            m,
            ..PlaneWaveParams::new(1.0, 0.0)
        })
        .map_err(err)?;
        for (c, t) in planewave_states(&free, 1000, 11) {
            let (v1, v2) = free.velocities(&PairState1D::new(c[0], c[1], t)).map_err(err)?;
            worst_free = worst_free.max((v1 - p / m).abs()).max((v2 + p / m).abs());
        }
        let standing = PlaneWavePair::new(PlaneWaveParams {
            p,
            m,
            ..PlaneWaveParams::new(1.0, 1.0)
        })
        .map_err(err)?;
        for (c, t) in planewave_states(&standing, 1000, 12) {
            match standing.velocities(&PairState1D::new(c[0], c[1], t)) {
                Ok((v1, v2)) => worst_standing = worst_standing.max(v1.abs()).max(v2.abs()),
                Err(_) => skipped += 1,
            }
        }
    }
    Ok((
        worst_free < 1e-12 && worst_standing < 1e-12,
        format!("b=0 max |v -/+ p/m| = {worst_free:e}; a=b max |v| = {worst_standing:e} ({skipped} node states)"),
    ))
}

fn oracles() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut states = 0;
    for b in [0.0, 0.2, 0.3, 0.5, 1.0] {
        let m = pw(1.0, b);
        let rep = velocity_oracle(&m, &planewave_states(&m, 1000, 21));
        worst = worst.max(rep.max_abs_error);
        states += rep.states;
    }
    let sph = SphericalPair::new(SlitParams::new(5.0, 0.5)).map_err(err)?;
    let rep = velocity_oracle(&sph, &spherical_states(&sph, 1000, 22, 1e-3));
    Ok((
        worst < 1e-6 && rep.within(1e-6) && rep.states == 1000,
        format!(
            "plane-wave max error {worst:e} over {states} states (1/4 near theta = pi/2); spherical {:e} over {} states",
            rep.max_abs_error, rep.states
        ),
    ))
}

fn conservation() -> Verdict {
    let mut cm: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut count = 0;
    let times: Vec<f64> = (1..50).map(|i| 0.1 * i as f64).collect();
    for (i, b) in [0.1, 0.2, 0.4].into_iter().enumerate() {
        let m = pw(1.0, b);
        let init = initial_ensemble(&m, 100, 30 + i as u64, 0.0).map_err(err)?;
        let ens = evolve_ensemble(&m, &init, 5.0, &times, &IntegratorConfig::default()).map_err(err)?;
        for mem in &ens.members {
            if mem.trajectory.is_truncated() {
                return Ok((false, format!("member {} truncated", mem.id)));
            }
            cm = cm.max(m.cm_invariant(&mem.trajectory));
            drift = drift.max(m.residual_drift(&mem.trajectory).map_err(err)?);
            count += 1;
        }
    }
    Ok((
        cm < 1e-8 && drift < 1e-6,
        format!("{count} trajectories: max |x1+x2-alpha| = {cm:e}, max residual drift = {drift:e}"),
    ))
}

fn uniqueness() -> Verdict {
    let interval = [-4.0 * PI, 4.0 * PI];
    let unique = pw(1.0, 0.2).uniqueness_analysis(0.0, 0.0, interval, 100_000).map_err(err)?;
    let split = pw(1.0, 0.3).uniqueness_analysis(0.0, 0.0, interval, 100_000).map_err(err)?;

    let dir = tempfile::tempdir().map_err(err)?;
    let text = format!(
        r#"{{"model": "planewave", "a": 1, "b": 0.3, "analysis": ["uniqueness"], "out_dir": {:?}}}"#,
        dir.path()
    );
    let outcome = run(&validate_config(&text).map_err(err)?).map_err(err)?;
    let flagged = outcome
        .claims
        .iter()
        .any(|c| c.claim_id == "uniqueness_conditions_agree" && c.status == Status::Fail);

    let ok = unique.four_ab_below_sum_of_squares
        && unique.printed.root_count() == 1
        && unique.conserved.root_count() == 1
        && split.b_below_a_third
        && !split.four_ab_below_sum_of_squares
        && flagged;
    Ok((
        ok,
        format!(
            "(1,0.2): {} root(s); (1,0.3): {} root(s), printed relation monotone = {}, b<a/3 = {}, 4ab<a^2+b^2 = {}, flagged in report = {flagged}",
            unique.printed.root_count(),
            split.printed.root_count(),
            split.printed.is_monotone_on_interval,
            split.b_below_a_third,
            split.four_ab_below_sum_of_squares,
        ),
    ))
}

fn density_discrepancy() -> Verdict {
    let equal = pw(1.0, 1.0).density_discrepancy(100_000);
    let free = pw(1.0, 0.0).density_discrepancy(100_000);
    let verdict = if equal.agree {
        "formulas agree"
    } else {
        "cos(theta) vs cos(2 theta) mismatch confirmed"
    };
    Ok((
        free.agree,
        format!(
            "(1,1): max gap {:e} at theta = {:.6} -> {verdict}; (1,0): max gap {:e}",
            equal.max_abs_gap, equal.theta_at_max, free.max_abs_gap
        ),
    ))
}

fn sampler() -> Verdict {
    let n = 100_000;
    let crit = ks_critical_99(n);
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [(1.0, 0.0), (1.0, 1.0), (1.0, 0.5)] {
        let m = pw(a, b);
        let ens = initial_ensemble(&m, n, 60, 0.0).map_err(err)?;
        let rep = compare_planewave(&m, &ens, 0.0).map_err(err)?;
        ok &= rep.ks_statistic < crit;
        parts.push(format!("({a},{b}) D = {:.5}", rep.ks_statistic));
    }
    Ok((ok, format!("{}; critical {crit:.5}", parts.join(", "))))
}

fn equivariance_measurement() -> Verdict {
    let m = pw(1.0, 0.2);
    let measure = || -> Result<(f64, f64, f64), String> {
        let init = initial_ensemble(&m, 100_000, 70, 0.0).map_err(err)?;
        let ens = evolve_ensemble(&m, &init, 3.0, &[], &IntegratorConfig::default()).map_err(err)?;
        let rep = compare_planewave(&m, &ens, 3.0).map_err(err)?;
        let global = global_constraint_analysis(&m, &init, 0.0).map_err(err)?;
        Ok((rep.ks_statistic, global.global_ks, global.point_mass_ks))
    };
    let first = measure()?;
    let second = measure()?;
    let same = first.0.to_bits() == second.0.to_bits() && first.1.to_bits() == second.1.to_bits();
    Ok((
        same && first.0.is_finite() && first.1.is_finite(),
        format!(
            "KS at t=3: {:e}; global-beta KS: {:e} (point mass at 0: {:e}); bitwise repeatable = {same}",
            first.0, first.1, first.2
        ),
    ))
}

fn mirror_manifold() -> Verdict {
    let m = SphericalPair::new(SlitParams::new(5.0, 0.5)).map_err(err)?;
    let start = PairState3D::mirrored_pair([1.0, 0.3, 0.0], 0.0);
    let times: Vec<f64> = (1..100).map(|i| 0.01 * i as f64).collect();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| m.velocity(y, t, dy);
    let traj = integrate_ode(rhs, 0.0, &start.config(), 1.0, &times, &IntegratorConfig::default()).map_err(err)?;
    let rep = m.constraint_report(&traj).map_err(err)?;
    Ok((
        !traj.is_truncated() && rep.max.mirror < 1e-6,
        format!(
            "{} samples to T=1: max mirror deviation {:e}; literal reading deviation {:.4}",
            rep.samples, rep.max.mirror, rep.max.literal
        ),
    ))
}

fn chain_rule() -> Verdict {
    let m = SphericalPair::new(SlitParams::new(5.0, 0.5)).map_err(err)?;
    let rep = phase_gradient_oracle(&m, &spherical_states(&m, 1000, 90, 1e-3));
    Ok((
        rep.within(1e-6) && rep.states == 1000,
        format!("max |grad S - FD| = {:e} over {} states", rep.max_abs_error, rep.states),
    ))
}

fn reproducibility() -> Verdict {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(err)?;
        let text = format!(
            r#"{{"model": "planewave", "a": 1, "b": 0.2, "analysis": ["equivariance"], "n": 5000, "seed": 7, "t_end": 2, "out_dir": {:?}}}"#,
            dir.path()
        );
        run(&validate_config(&text).map_err(err)?).map_err(err)?;
        outputs.push(std::fs::read(dir.path().join("ensemble.csv")).map_err(err)?);
    }
    let same = outputs[0] == outputs[1];
    Ok((same, format!("ensemble.csv: {} bytes, identical = {same}", outputs[0].len())))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("plane-wave limits", limits),
        ("analytic velocity vs psi oracle", oracles),
        ("conserved quantities along trajectories", conservation),
        ("uniqueness of the coincidence root", uniqueness),
        ("printed density vs |psi|^2", density_discrepancy),
        ("sampler KS", sampler),
        ("equivariance and global-beta measurement", equivariance_measurement),
        ("mirror manifold invariance", mirror_manifold),
        ("chain-rule phase gradient", chain_rule),
        ("byte-identical ensemble output", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!ok);
        println!(
            "[{:>2}/10] {} {name}: {detail} ({:.1}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
