use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{PolicyDecision, Rationale};
use crate::agent::Action;
use crate::dsp::MinMaxBounds;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Queries are never sent during the first this-many samples.
pub const DEFAULT_WARMUP: usize = 100;
pub const DEFAULT_GRID: usize = 10;
pub const DEFAULT_QUOTA: u32 = 5;
/// Query probability floor for regions under quota.
pub const PROBABILITY_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub warmup: usize,
    pub grid: usize,
    pub quota: u32,
    pub floor: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            warmup: DEFAULT_WARMUP,
            grid: DEFAULT_GRID,
            quota: DEFAULT_QUOTA,
            floor: PROBABILITY_FLOOR,
        }
    }
}

/// Projection onto the two leading principal axes of min-max scaled
/// warm-up features, followed by a square grid over the projected range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    bounds: Vec<MinMaxBounds>,
    mean: Vec<f64>,
    axes: [Vec<f64>; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    grid: usize,
}

impl Projection {
    pub fn fit(samples: &[Vec<f64>], grid: usize) -> Result<Self> {
        let m = samples.first().map(Vec::len).unwrap_or(0);
        if samples.len() < 2 || m == 0 {
            return Err(Error::Parameter("projection needs at least two non-empty samples".into()));
        }
        let bounds: Vec<MinMaxBounds> = (0..m)
            .map(|j| {
                let (lo, hi) = samples
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[j]), hi.max(s[j])));
                MinMaxBounds {
                    min: lo,
                    max: if hi > lo { hi } else { lo + 1.0 },
                }
            })
            .collect();
        let scaled: Vec<Vec<f64>> = samples.iter().map(|s| scale(&bounds, s)).collect();
        let n = scaled.len() as f64;
        let mean: Vec<f64> = (0..m).map(|j| scaled.iter().map(|s| s[j]).sum::<f64>() / n).collect();
        let mut cov = DMatrix::<f64>::zeros(m, m);
        for s in &scaled {
            for a in 0..m {
                for b in a..m {
                    cov[(a, b)] += (s[a] - mean[a]) * (s[b] - mean[b]) / n;
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                cov[(a, b)] = cov[(b, a)];
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let axis = |k: usize| -> Vec<f64> {
            let Some(&col) = order.get(k) else {
                return vec![0.0; m];
            };
            let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            // Fix the sign so the largest-magnitude entry is positive.
            let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        };
        let mut proj = Self {
            bounds,
            mean,
            axes: [axis(0), axis(1)],
            lo: [0.0; 2],
            hi: [0.0; 2],
            grid: grid.max(1),
        };
        let pts: Vec<[f64; 2]> = scaled.iter().map(|s| proj.project_scaled(s)).collect();
        for k in 0..2 {
            let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            proj.lo[k] = lo;
            proj.hi[k] = if hi > lo { hi } else { lo + 1.0 };
        }
        Ok(proj)
    }

    fn project_scaled(&self, s: &[f64]) -> [f64; 2] {
        let dot = |a: &[f64]| s.iter().zip(&self.mean).zip(a).map(|((x, m), w)| (x - m) * w).sum::<f64>();
        [dot(&self.axes[0]), dot(&self.axes[1])]
    }

    pub fn project(&self, sample: &[f64]) -> [f64; 2] {
        self.project_scaled(&scale(&self.bounds, sample))
    }

    /// Region index in `0..grid²`; points outside the fitted range fall in edge cells.
    pub fn region(&self, sample: &[f64]) -> usize {
        let p = self.project(sample);
        let cell = |k: usize| {
            let f = (p[k] - self.lo[k]) / (self.hi[k] - self.lo[k]);
            ((f * self.grid as f64).floor().max(0.0) as usize).min(self.grid - 1)
        };
        cell(0) * self.grid + cell(1)
    }

    pub fn n_regions(&self) -> usize {
        self.grid * self.grid
    }
}

fn scale(bounds: &[MinMaxBounds], s: &[f64]) -> Vec<f64> {
    s.iter().zip(bounds).map(|(x, b)| (x - b.min) / (b.max - b.min)).collect()
}

/// Per-region sample and label counts for the density-proportional trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTracker {
    config: DensityConfig,
    seen: usize,
    warmup_samples: Vec<Vec<f64>>,
    projection: Option<Projection>,
    unlabeled: Vec<u32>,
    labeled: Vec<u32>,
}

impl DensityTracker {
    pub fn new(config: DensityConfig) -> Result<Self> {
        if config.quota == 0 || config.grid == 0 || config.warmup < 2 || !(0.0..=1.0).contains(&config.floor) {
            return Err(Error::Parameter(format!("invalid density tracker config {config:?}")));
        }
        Ok(Self {
            config,
            seen: 0,
            warmup_samples: Vec::new(),
            projection: None,
            unlabeled: Vec::new(),
            labeled: Vec::new(),
        })
    }

    pub fn config(&self) -> &DensityConfig {
        &self.config
    }

    /// Samples observed so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    pub fn projection(&self) -> Option<&Projection> {
        self.projection.as_ref()
    }

    pub fn unlabeled_counts(&self) -> &[u32] {
        &self.unlabeled
    }

    pub fn labeled_counts(&self) -> &[u32] {
        &self.labeled
    }

    pub fn region(&self, features: &[f64]) -> Option<usize> {
        self.projection.as_ref().map(|p| p.region(features))
    }

    /// Query probability for a sample before it is counted.
    pub fn probability(&self, features: &[f64]) -> Option<f64> {
        let r = self.region(features)?;
        if self.labeled[r] >= self.config.quota {
            return Some(0.0);
        }
        let max = self.unlabeled.iter().copied().max().unwrap_or(0);
        let density = if max == 0 {
            0.0
        } else {
            f64::from(self.unlabeled[r]) / f64::from(max)
        };
        Some(density.max(self.config.floor))
    }

    /// Decide for one sample, then count it.
    pub fn decide(&mut self, features: &[f64], rng: &mut Rng) -> Result<PolicyDecision> {
        let decision = match self.probability(features) {
            None => PolicyDecision::new(Action::NoQuery, 0.0, Rationale::Observation),
            Some(p) if p == 0.0 => PolicyDecision::new(Action::NoQuery, 0.0, Rationale::QuotaReached),
            Some(p) => {
                let trigger = if rng.random::<f64>() < p {
                    Action::Query
                } else {
                    Action::NoQuery
                };
                PolicyDecision::new(trigger, p, Rationale::Density)
            }
        };
        self.observe(features)?;
        Ok(decision)
    }

    fn observe(&mut self, features: &[f64]) -> Result<()> {
        self.seen += 1;
        match &self.projection {
            Some(p) => {
                let r = p.region(features);
                self.unlabeled[r] += 1;
            }
            None => {
                self.warmup_samples.push(features.to_vec());
                if self.warmup_samples.len() == self.config.warmup {
                    let p = Projection::fit(&self.warmup_samples, self.config.grid)?;
                    self.unlabeled = vec![0; p.n_regions()];
                    self.labeled = vec![0; p.n_regions()];
                    for s in std::mem::take(&mut self.warmup_samples) {
                        self.unlabeled[p.region(&s)] += 1;
                    }
                    self.projection = Some(p);
                }
            }
        }
        Ok(())
    }

    /// Move one sample of the region from unlabeled to labeled.
    pub fn record_label(&mut self, features: &[f64]) {
        if let Some(r) = self.region(features) {
            self.unlabeled[r] = self.unlabeled[r].saturating_sub(1);
            self.labeled[r] += 1;
        }
    }
}
