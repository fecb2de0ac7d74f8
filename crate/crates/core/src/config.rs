//! Run configuration: a flat JSON schema, command-line overrides, and
//! validation into a fully default-filled [`RunConfig`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::model::ModelTag;
use crate::numerics::{IntegratorConfig, Method};
use crate::planewave::PlaneWaveParams;
use crate::spherical::SlitParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Trajectories,
    Constraints,
    Uniqueness,
    Equivariance,
    GlobalConstraint,
    OracleCrosscheck,
    DensityDiscrepancy,
}

impl Analysis {
    pub const ALL: [Analysis; 7] = [
        Analysis::Trajectories,
        Analysis::Constraints,
        Analysis::Uniqueness,
        Analysis::Equivariance,
        Analysis::GlobalConstraint,
        Analysis::OracleCrosscheck,
        Analysis::DensityDiscrepancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Trajectories => "trajectories",
            Analysis::Constraints => "constraints",
            Analysis::Uniqueness => "uniqueness",
            Analysis::Equivariance => "equivariance",
            Analysis::GlobalConstraint => "global_constraint",
            Analysis::OracleCrosscheck => "oracle_crosscheck",
            Analysis::DensityDiscrepancy => "density_discrepancy",
        }
    }

    /// Analyses that only make sense for the plane-wave pair.
    pub fn planewave_only(self) -> bool {
        matches!(
            self,
            Analysis::Uniqueness | Analysis::GlobalConstraint | Analysis::DensityDiscrepancy
        )
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown analysis `{s}`")))
    }
}

/// The flat configuration schema. Every key is optional here; missing
/// keys are filled by [`validate`]. The same fields are accepted as
/// `--key value` command-line overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
#[command(rename_all = "snake_case")]
pub struct RawConfig {
    /// planewave | spherical
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelTag>,

    /// Amplitude of the forward relative wave (planewave, required)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Amplitude of the backward relative wave (planewave, required)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Momentum (planewave, default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Root-finding grid for the uniqueness scan (planewave, default 100000)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_grid: Option<usize>,
    /// Half-width of the uniqueness scan in units of πħ/p (planewave, default 4)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_half_width: Option<f64>,

    /// Wavenumber (spherical, required)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Slit half-separation (spherical, required)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slit_a: Option<f64>,
    /// Energy in the global time phase (spherical, default ħ²k²/m)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Near face of the sampling box (spherical, default 2·slit_a)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    /// Particle 1 start of the mirror-manifold trajectory, "x,y,z" (spherical, default 1,0.3,0)
    #[arg(long, value_delimiter = ',', num_args = 1)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<Vec<f64>>,
    /// Coordinate index 0..6 used for the spherical distribution comparison (default 0, x1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_coordinate: Option<usize>,

    /// Mass (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Reduced Planck constant (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    /// Side of the normalization box (planewave default 6πħ/p, spherical default 40/k)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_length: Option<f64>,

    /// rk45 | rk4 (default rk45)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Fixed step for rk4 (default 1e-3)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Relative tolerance for rk45 (default 1e-10)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    /// Absolute tolerance for rk45 (default 1e-12)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    /// Step budget per trajectory (default 1000000)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,

    /// Ensemble size (default 10000)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// PRNG seed (default 0)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of individually written trajectories (default 100)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<usize>,
    /// Random states per oracle cross-check (default 1000)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_states: Option<usize>,

    /// Comma-separated analyses (default trajectories)
    #[arg(long, value_delimiter = ',', num_args = 1)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<Vec<Analysis>>,
    /// Output directory (default "out")
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    /// Start time (default 0)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// End time (planewave default 5, spherical default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Comma-separated output times between t0 and t_end (default: 9 evenly spaced)
    #[arg(long, value_delimiter = ',', num_args = 1)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_times: Option<Vec<f64>>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Keys set in `overrides` replace those in `self`.
    pub fn merge(self, overrides: RawConfig) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        let top = serde_json::to_value(overrides)?;
        if let (Some(b), serde_json::Value::Object(t)) = (base.as_object_mut(), top) {
            b.extend(t);
        }
        Ok(serde_json::from_value(base)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    Planewave {
        params: PlaneWaveParams,
        scan_grid: usize,
        scan_half_width: f64,
    },
    Spherical {
        params: SlitParams,
        r1: [f64; 3],
        ks_coordinate: usize,
    },
}

impl ModelConfig {
    pub fn tag(&self) -> ModelTag {
        match self {
            ModelConfig::Planewave { .. } => ModelTag::Planewave,
            ModelConfig::Spherical { .. } => ModelTag::Spherical,
        }
    }
}

/// A validated configuration with every default made explicit.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub integrator: IntegratorConfig,
    pub n: usize,
    pub seed: u64,
    pub n_trajectories: usize,
    pub oracle_states: usize,
    pub analyses: BTreeSet<Analysis>,
    pub out_dir: PathBuf,
    pub t0: f64,
    pub t_end: f64,
    pub sample_times: Vec<f64>,
}

impl RunConfig {
    /// The flat form; [`validate`] maps it back to `self`.
    pub fn to_raw(&self) -> RawConfig {
        let mut raw = RawConfig {
            model: Some(self.model.tag()),
            method: Some(self.integrator.method),
            step: Some(self.integrator.step),
            rel_tol: Some(self.integrator.rel_tol),
            abs_tol: Some(self.integrator.abs_tol),
            max_steps: Some(self.integrator.max_steps),
            n: Some(self.n),
            seed: Some(self.seed),
            n_trajectories: Some(self.n_trajectories),
            oracle_states: Some(self.oracle_states),
            analysis: Some(self.analyses.iter().copied().collect()),
            out_dir: Some(self.out_dir.clone()),
            t0: Some(self.t0),
            t_end: Some(self.t_end),
            sample_times: Some(self.sample_times.clone()),
            ..RawConfig::default()
        };
        match &self.model {
            ModelConfig::Planewave {
                params,
                scan_grid,
                scan_half_width,
            } => {
                raw.a = Some(params.a);
                raw.b = Some(params.b);
                raw.p = Some(params.p);
                raw.m = Some(params.m);
                raw.hbar = Some(params.hbar);
                raw.box_length = params.box_length;
                raw.scan_grid = Some(*scan_grid);
                raw.scan_half_width = Some(*scan_half_width);
            }
            ModelConfig::Spherical {
                params,
                r1,
                ks_coordinate,
            } => {
                raw.k = Some(params.k);
                raw.slit_a = Some(params.slit_a);
                raw.m = Some(params.m);
                raw.hbar = Some(params.hbar);
                raw.energy = params.energy;
                raw.box_length = params.box_length;
                raw.x_min = params.x_min;
                raw.r1 = Some(r1.to_vec());
                raw.ks_coordinate = Some(*ks_coordinate);
            }
        }
        raw
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_raw())?)
    }
}

/// Parse and validate JSON configuration text.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    validate(RawConfig::from_json(text)?)
}

fn missing(field: &str, model: ModelTag) -> Error {
    Error::Config(format!("missing field `{field}` (required for model {model})"))
}

fn not_applicable(field: &str, model: ModelTag) -> Error {
    Error::Config(format!("field `{field}` does not apply to model {model}"))
}

fn at_least(field: &'static str, value: usize, min: usize, constraint: &'static str) -> Result<usize> {
    if value >= min {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            field,
            constraint,
            value: value.to_string(),
        })
    }
}

pub fn validate(raw: RawConfig) -> Result<RunConfig> {
    let tag = raw
        .model
        .ok_or_else(|| Error::Config("missing field `model`".into()))?;
    let m = raw.m.unwrap_or(1.0);
    let hbar = raw.hbar.unwrap_or(1.0);

    let model = match tag {
        ModelTag::Planewave => {
            for (name, set) in [
                ("k", raw.k.is_some()),
                ("slit_a", raw.slit_a.is_some()),
                ("energy", raw.energy.is_some()),
                ("x_min", raw.x_min.is_some()),
                ("r1", raw.r1.is_some()),
                ("ks_coordinate", raw.ks_coordinate.is_some()),
            ] {
                if set {
                    return Err(not_applicable(name, tag));
                }
            }
            let mut params = PlaneWaveParams {
                a: raw.a.ok_or_else(|| missing("a", tag))?,
                b: raw.b.ok_or_else(|| missing("b", tag))?,
                p: raw.p.unwrap_or(1.0),
                m,
                hbar,
                box_length: raw.box_length,
            };
            params.validate()?;
            params.box_length = Some(params.box_length());
            let scan_half_width = raw.scan_half_width.unwrap_or(4.0);
            check_positive("scan_half_width", scan_half_width)?;
            ModelConfig::Planewave {
                params,
                scan_grid: at_least("scan_grid", raw.scan_grid.unwrap_or(100_000), 2, "must be >= 2")?,
                scan_half_width,
            }
        }
        ModelTag::Spherical => {
            for (name, set) in [
                ("a", raw.a.is_some()),
                ("b", raw.b.is_some()),
                ("p", raw.p.is_some()),
                ("scan_grid", raw.scan_grid.is_some()),
                ("scan_half_width", raw.scan_half_width.is_some()),
            ] {
                if set {
                    return Err(not_applicable(name, tag));
                }
            }
            let mut params = SlitParams {
                k: raw.k.ok_or_else(|| missing("k", tag))?,
                slit_a: raw.slit_a.ok_or_else(|| missing("slit_a", tag))?,
                m,
                hbar,
                energy: raw.energy,
                box_length: raw.box_length,
                x_min: raw.x_min,
            };
            params.validate()?;
            params.energy = Some(params.energy());
            params.box_length = Some(params.box_length());
            params.x_min = Some(params.x_min());
            let r1 = match raw.r1.as_deref() {
                None => [1.0, 0.3, 0.0],
                Some(&[x, y, z]) if [x, y, z].iter().all(|v| v.is_finite()) && x >= 0.0 => [x, y, z],
                Some(v) => {
                    return Err(Error::InvalidParameter {
                        field: "r1",
                        constraint: "must be three finite numbers with x >= 0",
                        value: format!("{v:?}"),
                    })
                }
            };
            let ks_coordinate = raw.ks_coordinate.unwrap_or(0);
            if ks_coordinate >= 6 {
                return Err(Error::InvalidParameter {
                    field: "ks_coordinate",
                    constraint: "must be in 0..6",
                    value: ks_coordinate.to_string(),
                });
            }
            ModelConfig::Spherical {
                params,
                r1,
                ks_coordinate,
            }
        }
    };

    let defaults = IntegratorConfig::default();
    let integrator = IntegratorConfig {
        method: raw.method.unwrap_or(defaults.method),
        step: raw.step.unwrap_or(defaults.step),
        rel_tol: raw.rel_tol.unwrap_or(defaults.rel_tol),
        abs_tol: raw.abs_tol.unwrap_or(defaults.abs_tol),
        max_steps: raw.max_steps.unwrap_or(defaults.max_steps),
    };
    integrator.validate()?;

    let analyses: BTreeSet<Analysis> = raw
        .analysis
        .unwrap_or_else(|| vec![Analysis::Trajectories])
        .into_iter()
        .collect();
    if analyses.is_empty() {
        return Err(Error::InvalidParameter {
            field: "analysis",
            constraint: "must name at least one analysis",
            value: "[]".into(),
        });
    }
    if let ModelConfig::Planewave { params, .. } = &model {
        let needs_distinct = [Analysis::Uniqueness, Analysis::GlobalConstraint];
        if let Some(a) = needs_distinct.iter().find(|a| analyses.contains(a)) {
            if params.a == params.b {
                return Err(Error::Config(format!("analysis `{a}` requires a != b")));
            }
        }
    }
    if tag == ModelTag::Spherical {
        if let Some(a) = analyses.iter().find(|a| a.planewave_only()) {
            return Err(Error::Config(format!(
                "analysis `{a}` requires model planewave (got {tag})"
            )));
        }
    }

    let t0 = raw.t0.unwrap_or(0.0);
    let t_end = raw.t_end.unwrap_or(match tag {
        ModelTag::Planewave => 5.0,
        ModelTag::Spherical => 1.0,
    });
    for (field, v) in [("t0", t0), ("t_end", t_end)] {
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                field,
                constraint: "must be finite",
                value: v.to_string(),
            });
        }
    }
    let sample_times = match raw.sample_times {
        Some(ts) => ts,
        None if t_end == t0 => Vec::new(),
        None => (1..10).map(|i| t0 + (t_end - t0) * i as f64 / 10.0).collect(),
    };
    let (lo, hi) = (t0.min(t_end), t0.max(t_end));
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let ordered = sample_times.windows(2).all(|w| dir * (w[1] - w[0]) > 0.0);
    if !ordered || sample_times.iter().any(|t| !(lo..=hi).contains(t)) {
        return Err(Error::InvalidParameter {
            field: "sample_times",
            constraint: "must lie between t0 and t_end, strictly ordered from t0 towards t_end",
            value: format!("{sample_times:?}"),
        });
    }

    Ok(RunConfig {
        model,
        integrator,
        n: at_least("n", raw.n.unwrap_or(10_000), 1, "must be >= 1")?,
        seed: raw.seed.unwrap_or(0),
        n_trajectories: at_least("n_trajectories", raw.n_trajectories.unwrap_or(100), 1, "must be >= 1")?,
        oracle_states: at_least("oracle_states", raw.oracle_states.unwrap_or(1000), 1, "must be >= 1")?,
        analyses,
        out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        t0,
        t_end,
        sample_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_planewave_gets_defaults() {
        let c = validate_config(r#"{"model": "planewave", "a": 1, "b": 0.5}"#).unwrap();
        let ModelConfig::Planewave { params, scan_grid, .. } = c.model else {
            panic!("wrong model");
        };
        assert_eq!((params.a, params.b, params.p, params.m, params.hbar), (1.0, 0.5, 1.0, 1.0, 1.0));
        assert_eq!(params.box_length, Some(6.0 * std::f64::consts::PI));
        assert_eq!(scan_grid, 100_000);
        assert_eq!(c.integrator.rel_tol, 1e-10);
        assert_eq!(c.sample_times.len(), 9);
        assert!(c.analyses.contains(&Analysis::Trajectories));
    }

    #[test]
    fn negative_amplitude_names_field() {
        let e = validate_config(r#"{"model": "planewave", "a": 1, "b": -0.1}"#).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("`b`") && msg.contains(">= 0"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let e = validate_config(r#"{"model": "planewave", "a": 1, "b": 0, "bogus": 3}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn model_analysis_mismatch() {
        let e = validate_config(r#"{"model": "spherical", "k": 5, "slit_a": 0.5, "analysis": ["uniqueness"]}"#)
            .unwrap_err();
        assert!(e.to_string().contains("uniqueness"));
        let e = validate_config(r#"{"model": "planewave", "a": 1, "b": 0, "k": 5}"#).unwrap_err();
        assert!(e.to_string().contains("`k`"));
    }

    #[test]
    fn missing_required_fields() {
        assert!(validate_config(r#"{"a": 1, "b": 0}"#).unwrap_err().to_string().contains("model"));
        assert!(validate_config(r#"{"model": "planewave", "a": 1}"#).unwrap_err().to_string().contains("`b`"));
        assert!(validate_config(r#"{"model": "spherical", "k": 1}"#).unwrap_err().to_string().contains("slit_a"));
    }

    #[test]
    fn sample_times_checked() {
        let bad = r#"{"model": "planewave", "a": 1, "b": 0, "t_end": 2, "sample_times": [1.5, 0.5]}"#;
        assert!(validate_config(bad).unwrap_err().to_string().contains("sample_times"));
        let back = r#"{"model": "planewave", "a": 1, "b": 0, "t_end": -2, "sample_times": [-0.5, -1.5]}"#;
        assert!(validate_config(back).is_ok());
    }

    #[test]
    fn round_trip() {
        for text in [
            r#"{"model": "planewave", "a": 1, "b": 0.2, "analysis": ["uniqueness", "equivariance"], "n": 500}"#,
            r#"{"model": "spherical", "k": 5, "slit_a": 0.5, "method": "rk4", "step": 0.01}"#,
        ] {
            let c = validate_config(text).unwrap();
            assert_eq!(validate_config(&c.to_json().unwrap()).unwrap(), c);
        }
    }

    #[test]
    fn overrides_replace_keys() {
        let base = RawConfig::from_json(r#"{"model": "planewave", "a": 1, "b": 0.2, "n": 50}"#).unwrap();
        let top = RawConfig {
            b: Some(0.3),
            ..RawConfig::default()
        };
        let merged = base.merge(top).unwrap();
        assert_eq!((merged.b, merged.n), (Some(0.3), Some(50)));
    }

    #[test]
    fn analysis_names() {
        for a in Analysis::ALL {
            assert_eq!(a.name().parse::<Analysis>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{a}\""));
        }
    }
}
