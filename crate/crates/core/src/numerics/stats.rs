//! One-sample Kolmogorov–Smirnov machinery, histograms and binned
//! chi-square.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::quad::Rule;

/// Asymptotic 99% critical value coefficient for the one-sample KS test.
pub const KS_COEFF_99: f64 = 1.63;

/// `1.63 / √n`.
pub fn ks_critical_99(n: usize) -> f64 {
    KS_COEFF_99 / (n as f64).sqrt()
}

/// A reference distribution on a bounded interval.
pub trait ReferenceCdf {
    fn support(&self) -> (f64, f64);

    /// CDF at each point of an ascending slice.
    fn cdf_sorted(&self, sorted: &[f64]) -> Vec<f64>;

    /// Probability density (used for histogram overlays).
    fn density(&self, x: f64) -> f64;
}

/// Sup-distance between the empirical CDF of `samples` and `reference`.
pub fn ks_statistic<R: ReferenceCdf + ?Sized>(samples: &[f64], reference: &R) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cdf = reference.cdf_sorted(&sorted);
    ks_statistic_sorted(&cdf)
}

/// KS statistic given reference CDF values at the sorted sample points.
pub fn ks_statistic_sorted(cdf_at_sorted: &[f64]) -> f64 {
    let n = cdf_at_sorted.len() as f64;
    cdf_at_sorted
        .iter()
        .enumerate()
        .fold(0.0, |acc: f64, (i, &f)| {
            let above = (i as f64 + 1.0) / n - f;
            let below = f - i as f64 / n;
            acc.max(above).max(below)
        })
}

/// CDF of an unnormalized density obtained by Gauss–Legendre quadrature.
///
/// Evaluation on sorted points accumulates the integral gap by gap, so a
/// whole sample costs one pass.
pub struct QuadratureCdf<F> {
    density: F,
    lo: f64,
    hi: f64,
    total: f64,
    max_panel: f64,
    rule: Rule,
}

impl<F: Fn(f64) -> f64> QuadratureCdf<F> {
    pub fn new(density: F, lo: f64, hi: f64) -> Self {
        let rule = Rule::new(8);
        let max_panel = (hi - lo) / 1024.0;
        let total = rule.integrate(&density, lo, hi, 1024);
        Self {
            density,
            lo,
            hi,
            total,
            max_panel,
            rule,
        }
    }

    /// Integral of the unnormalized density over the support.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let panels = ((b - a) / self.max_panel).ceil().max(1.0) as usize;
        self.rule.integrate(&self.density, a, b, panels)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_sorted(&[x])[0]
    }
}

impl<F: Fn(f64) -> f64> ReferenceCdf for QuadratureCdf<F> {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn cdf_sorted(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(sorted.len());
        let mut at = self.lo;
        let mut acc = 0.0;
        for &x in sorted {
            let x = x.clamp(self.lo, self.hi);
            acc += self.mass(at, x);
            at = at.max(x);
            out.push((acc / self.total).clamp(0.0, 1.0));
        }
        out
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            (self.density)(x) / self.total
        }
    }
}

/// Reference CDF given by weighted points (importance-weighted Monte Carlo).
pub struct WeightedEcdf {
    points: Vec<f64>,
    cumulative: Vec<f64>,
    lo: f64,
    hi: f64,
    bins: Vec<f64>,
}

impl WeightedEcdf {
    pub fn new(mut pairs: Vec<(f64, f64)>, lo: f64, hi: f64) -> Self {
        pairs.retain(|(x, w)| *x >= lo && *x <= hi && *w > 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let mut points = Vec::with_capacity(pairs.len());
        let mut cumulative = Vec::with_capacity(pairs.len());
        let nbins = 64;
        let width = (hi - lo) / nbins as f64;
        let mut bins = vec![0.0; nbins];
        for (x, w) in pairs {
            acc += w;
            points.push(x);
            cumulative.push(acc / total);
            let b = (((x - lo) / width) as usize).min(nbins - 1);
            bins[b] += w / (total * width);
        }
        Self {
            points,
            cumulative,
            lo,
            hi,
            bins,
        }
    }
}

impl ReferenceCdf for WeightedEcdf {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn cdf_sorted(&self, sorted: &[f64]) -> Vec<f64> {
        sorted
            .iter()
            .map(|&x| {
                let k = self.points.partition_point(|&p| p <= x);
                if k == 0 {
                    0.0
                } else {
                    self.cumulative[k - 1]
                }
            })
            .collect()
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        let width = (self.hi - self.lo) / self.bins.len() as f64;
        let b = (((x - self.lo) / width) as usize).min(self.bins.len() - 1);
        self.bins[b]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub centers: Vec<f64>,
    /// Reference density at the bin centres.
    pub reference_density: Vec<f64>,
}

impl Histogram {
    pub fn build<R: ReferenceCdf + ?Sized>(samples: &[f64], reference: &R, bins: usize) -> Self {
        let (lo, hi) = reference.support();
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &x in samples {
            if x >= lo && x <= hi {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        let centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
        let reference_density = centers.iter().map(|&c| reference.density(c)).collect();
        Self {
            lo,
            hi,
            counts,
            centers,
            reference_density,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins_used: usize,
}

/// Pearson chi-square of observed counts against expected counts.
///
/// Bins with expected count below `min_expected` are pooled into one.
pub fn chi_square(observed: &[u64], expected: &[f64], min_expected: f64) -> ChiSquareReport {
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e < min_expected {
            pool_o += o as f64;
            pool_e += e;
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        bins += 1;
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        bins += 1;
    }
    let dof = bins.saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| 1.0 - d.cdf(stat))
        .unwrap_or(f64::NAN);
    ChiSquareReport {
        statistic: stat,
        dof,
        p_value,
        bins_used: bins,
    }
}
