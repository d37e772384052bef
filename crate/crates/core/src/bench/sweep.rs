use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::unbiased_dcorr;
use crate::privacy::{DvarStatistic, Variant};
use crate::protocol::{run_session, NoiseMode, ProtocolConfig, Transport};
use crate::rng::derive_seed;

use super::dataset::{split_features, DataSource, Dataset};

/// How a grid value is turned into per-mechanism budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Allocation {
    /// The grid value is the total ε: the variance release gets
    /// `variance_fraction · ε`; the rest goes to projections, split over K
    /// for the repeated variant.
    Total { variance_fraction: f64 },
    /// The grid value is the per-projection ε; the variance release gets
    /// `variance_fraction · ε`.
    PerProjection { variance_fraction: f64 },
}

impl Default for Allocation {
    fn default() -> Self {
        Allocation::Total {
            variance_fraction: 0.1,
        }
    }
}

impl Allocation {
    /// `(eps_per_projection, eps_variance)` for grid value `eps`.
    pub fn split(&self, eps: f64, variant: Variant, k: usize) -> Result<(f64, f64)> {
        let frac = match *self {
            Allocation::Total { variance_fraction } | Allocation::PerProjection { variance_fraction } => {
                variance_fraction
            }
        };
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::Config(format!(
                "variance fraction must be in (0, 1), got {frac}"
            )));
        }
        Ok(match *self {
            Allocation::Total { .. } => {
                let rest = (1.0 - frac) * eps;
                let per = match variant {
                    Variant::Repeated => rest / k as f64,
                    Variant::Disjoint => rest,
                };
                (per, frac * eps)
            }
            Allocation::PerProjection { .. } => (eps, frac * eps),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    pub k: usize,
    pub variant: Variant,
    pub delta: f64,
    /// Columns `1..=split_index` form X.
    pub split_index: usize,
    pub seed: u64,
    pub normalize: bool,
    #[serde(default)]
    pub allocation: Allocation,
    #[serde(default)]
    pub shuffle_blocks: bool,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub dvar_statistic: DvarStatistic,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.eps_grid.is_empty() {
            return Err(Error::Config("epsilon grid is empty".into()));
        }
        if self.eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::Config("epsilon grid values must be positive".into()));
        }
        if self.eps_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("epsilon grid must be strictly ascending".into()));
        }
        Ok(())
    }

    /// Alice's and Bob's seeds for a trial. Seeds depend on the trial only,
    /// so every grid point sees the same random streams.
    pub fn trial_seeds(&self, trial: usize) -> (u64, u64) {
        let t = derive_seed(self.seed, trial as u64);
        (derive_seed(t, 0), derive_seed(t, 1))
    }

    pub fn protocol_config(&self, eps: f64, alice_seed: u64) -> Result<ProtocolConfig> {
        let (per, var) = self.allocation.split(eps, self.variant, self.k)?;
        let mut cfg = ProtocolConfig::new(self.k, self.variant, per, self.delta, var, alice_seed);
        cfg.shuffle_blocks = self.shuffle_blocks;
        cfg.noise = self.noise;
        cfg.dvar_statistic = self.dvar_statistic;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub trial: usize,
    pub dcorr_private_raw: f64,
    pub dcorr_private_clamped: f64,
    pub dcorr_nonprivate: f64,
    pub l1_error: f64,
    pub total_epsilon: f64,
    pub total_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub epsilon: f64,
    pub trials: usize,
    pub mean_l1: f64,
    /// Sample variance (n - 1 denominator; 0 for a single trial).
    pub var_l1: f64,
    pub min_l1: f64,
    pub max_l1: f64,
}

impl SweepAggregate {
    fn from_records(epsilon: f64, records: &[SweepRecord]) -> Self {
        let n = records.len();
        let l1: Vec<f64> = records.iter().map(|r| r.l1_error).collect();
        let mean = l1.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            l1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            epsilon,
            trials: n,
            mean_l1: mean,
            var_l1: var,
            min_l1: l1.iter().copied().fold(f64::INFINITY, f64::min),
            max_l1: l1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: DataSource,
    pub n: usize,
    pub columns: Vec<String>,
    pub dropped_rows: usize,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub dataset: DatasetInfo,
    pub dcorr_nonprivate: f64,
    pub records: Vec<SweepRecord>,
    pub aggregates: Vec<SweepAggregate>,
    /// Set when a session failed; records cover the grid points before it.
    pub aborted: Option<String>,
}

impl SweepResult {
    pub fn aggregate(&self, epsilon: f64) -> Option<&SweepAggregate> {
        self.aggregates.iter().find(|a| a.epsilon == epsilon)
    }
}

/// Runs `trials` protocol sessions per grid point and records the ℓ1 error
/// against the non-private distance correlation, computed once.
pub fn run_sweep(ds: &Dataset, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let table = if cfg.normalize {
        Dataset {
            table: ds.table.min_max_normalized(),
            ..ds.clone()
        }
    } else {
        ds.clone()
    };
    let (x, y) = split_features(&table, cfg.split_index)?;
    // fail fast on an invalid configuration before any trial runs
    cfg.protocol_config(cfg.eps_grid[0], 0)?.validate(x.n())?;
    let nonprivate = unbiased_dcorr(&x, &y)?;

    let mut records = Vec::with_capacity(cfg.eps_grid.len() * cfg.trials);
    let mut aggregates = Vec::with_capacity(cfg.eps_grid.len());
    let mut aborted = None;
    for &eps in &cfg.eps_grid {
        let point: Result<Vec<SweepRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let (alice_seed, bob_seed) = cfg.trial_seeds(trial);
                let pcfg = cfg.protocol_config(eps, alice_seed)?;
                let r = run_session(&x, &y, &pcfg, bob_seed, Transport::InProcess)?;
                Ok(SweepRecord {
                    epsilon: eps,
                    trial,
                    dcorr_private_raw: r.dcorr_raw,
                    dcorr_private_clamped: r.dcorr_clamped,
                    dcorr_nonprivate: nonprivate,
                    l1_error: (r.dcorr_clamped - nonprivate).abs(),
                    total_epsilon: r.total_epsilon,
                    total_delta: r.total_delta,
                })
            })
            .collect();
        match point {
            Ok(point) => {
                aggregates.push(SweepAggregate::from_records(eps, &point));
                records.extend(point);
            }
            Err(e) => {
                aborted = Some(format!("epsilon {eps}: {e}"));
                break;
            }
        }
    }

    Ok(SweepResult {
        config: cfg.clone(),
        dataset: DatasetInfo {
            source: ds.source.clone(),
            n: ds.table.n(),
            columns: ds.columns.clone(),
            dropped_rows: ds.dropped_rows,
            normalized: cfg.normalize,
        },
        dcorr_nonprivate: nonprivate,
        records,
        aggregates,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::dataset::{synth_dataset, Recipe};
    use crate::privacy::compose_budget;

    fn base(variant: Variant) -> SweepConfig {
        SweepConfig {
            eps_grid: vec![1.0, 4.0],
            trials: 3,
            k: 2,
            variant,
            delta: 1e-5,
            split_index: 1,
            seed: 17,
            normalize: false,
            allocation: Allocation::default(),
            shuffle_blocks: false,
            noise: NoiseMode::Calibrated,
            dvar_statistic: DvarStatistic::Unbiased,
        }
    }

    #[test]
    fn allocation_rule() {
        let a = Allocation::default();
        let (per, var) = a.split(2.0, Variant::Repeated, 4).unwrap();
        assert!((per - 0.45).abs() < 1e-15 && (var - 0.2).abs() < 1e-15);
        let (per, _) = a.split(2.0, Variant::Disjoint, 4).unwrap();
        assert!((per - 1.8).abs() < 1e-15);
        let m = Allocation::PerProjection {
            variance_fraction: 0.1,
        };
        assert_eq!(m.split(2.0, Variant::Repeated, 4).unwrap().0, 2.0);
    }

    #[test]
    fn zero_noise_has_no_error() {
        let ds = synth_dataset(Recipe::Linear, 40, 0.5, 3).unwrap();
        let mut cfg = base(Variant::Repeated);
        cfg.eps_grid = vec![1.0];
        cfg.trials = 1;
        cfg.noise = NoiseMode::Disabled;
        let res = run_sweep(&ds, &cfg).unwrap();
        assert_eq!(res.records.len(), 1);
        assert!(res.records[0].l1_error < 1e-12);
    }

    #[test]
    fn budget_column_matches_ledger() {
        let ds = synth_dataset(Recipe::Sine, 40, 0.2, 1).unwrap();
        for variant in [Variant::Repeated, Variant::Disjoint] {
            let cfg = base(variant);
            let res = run_sweep(&ds, &cfg).unwrap();
            assert_eq!(res.aggregates.len(), 2);
            for r in &res.records {
                let (per, var) = cfg.allocation.split(r.epsilon, variant, cfg.k).unwrap();
                let total = compose_budget(variant, cfg.k, per, cfg.delta, var).unwrap().total();
                assert_eq!((r.total_epsilon, r.total_delta), total);
                assert!(r.l1_error >= 0.0);
                assert_eq!(r.dcorr_nonprivate, res.dcorr_nonprivate);
            }
            for a in &res.aggregates {
                assert_eq!(a.trials, cfg.trials);
            }
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let ds = synth_dataset(Recipe::Linear, 40, 0.5, 3).unwrap();
        let mut cfg = base(Variant::Repeated);
        cfg.eps_grid = vec![2.0, 1.0];
        assert!(run_sweep(&ds, &cfg).is_err());
        let mut cfg = base(Variant::Disjoint);
        cfg.k = 20;
        assert!(matches!(run_sweep(&ds, &cfg), Err(Error::Partition { .. })));
    }
}
