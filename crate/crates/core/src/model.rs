//! Common interface of the two-particle guidance models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_gradient_im, ComplexScalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Planewave,
    Spherical,
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelTag::Planewave => f.write_str("planewave"),
            ModelTag::Spherical => f.write_str("spherical"),
        }
    }
}

impl std::str::FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planewave" => Ok(ModelTag::Planewave),
            "spherical" => Ok(ModelTag::Spherical),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected planewave or spherical)"
            ))),
        }
    }
}

/// A wavefunction on configuration space together with the velocity field
/// `v = (ħ/m) ∇ arg ψ` it defines.
///
/// Configurations are flat slices: `[x1, x2]` for 1D pairs and
/// `[x1, y1, z1, x2, y2, z2]` for 3D pairs.
pub trait GuidanceModel: Sync {
    fn tag(&self) -> ModelTag;

    /// Configuration-space dimension.
    fn dim(&self) -> usize;

    fn mass(&self) -> f64;

    fn hbar(&self) -> f64;

    fn psi(&self, config: &[f64], t: f64) -> Result<ComplexScalar>;

    /// Analytic guidance velocity.
    fn velocity(&self, config: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    /// Normalized `|ψ|²`.
    fn density(&self, config: &[f64], t: f64) -> Result<f64> {
        Ok(self.psi(config, t)?.norm_sqr())
    }

    /// Axis-aligned box used for sampling and normalization.
    fn sampling_box(&self) -> Vec<(f64, f64)>;

    /// Upper bound of [`GuidanceModel::density`] on the sampling box.
    fn density_bound(&self) -> f64;

    /// `(ħ/m) Im(∇ψ/ψ)` by central differences; independent of the phase.
    fn oracle_velocity(&self, config: &[f64], t: f64) -> Result<Vec<f64>> {
        let scale = self.hbar() / self.mass();
        let g = log_gradient_im(|x| self.psi(x, t), config)?;
        Ok(g.into_iter().map(|v| scale * v).collect())
    }
}
