//! One-way two-party protocol. Alice holds `X` and releases noisy random
//! projections plus a private distance variance; Bob holds `Y`, projects his
//! own data and assembles the private distance correlation.

mod alice;
mod bob;
pub mod message;
mod session;

use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MIN_SAMPLES;
use crate::privacy::{DvarStatistic, Variant};
use crate::rng::rng_from_seed;

pub use alice::{alice_emit, alice_prepare};
pub use bob::{bob_compute, BobSession};
pub use message::{
    decode_message, encode_message, Handshake, NoiseParams, Projection, ProtocolMessage, Variance,
    PROTOCOL_VERSION,
};
pub use session::{
    alice_connect, alice_send, bob_accept, bob_receive, run_session, run_stream_session,
    Transport, WireStats,
};

/// Whether mechanisms add noise. `Disabled` is a testing hook that turns the
/// protocol into the non-private estimator composition; it is not private.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    Calibrated,
    Disabled,
}

/// Alice's session parameters. Bob's seed is kept separately and never sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k: usize,
    pub variant: Variant,
    pub eps_per_projection: f64,
    pub delta: f64,
    pub eps_variance: f64,
    pub seed: u64,
    /// Disjoint variant only: permute rows with a public seed before blocking.
    #[serde(default)]
    pub shuffle_blocks: bool,
    #[serde(default)]
    pub noise: NoiseMode,
    #[serde(default)]
    pub dvar_statistic: DvarStatistic,
}

impl ProtocolConfig {
    pub fn new(
        k: usize,
        variant: Variant,
        eps_per_projection: f64,
        delta: f64,
        eps_variance: f64,
        seed: u64,
    ) -> Self {
        Self {
            k,
            variant,
            eps_per_projection,
            delta,
            eps_variance,
            seed,
            shuffle_blocks: false,
            noise: NoiseMode::Calibrated,
            dvar_statistic: DvarStatistic::Unbiased,
        }
    }

    /// Checks the configuration against a sample of `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("projection count K must be >= 1".into()));
        }
        if n < MIN_SAMPLES {
            return Err(Error::SampleSize {
                n,
                min: MIN_SAMPLES,
            });
        }
        if self.variant == Variant::Disjoint {
            partition_rows(n, self.k)?;
        }
        for (name, v) in [
            ("eps_per_projection", self.eps_per_projection),
            ("eps_variance", self.eps_variance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Budget(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Budget(format!(
                "delta must be in (0, 1/2), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Splits `0..n` into `k` contiguous blocks; the first `n mod k` blocks get
/// one extra row. Every block must hold at least 4 rows.
pub fn partition_rows(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k == 0 || n / k < MIN_SAMPLES {
        return Err(Error::Partition { n, k });
    }
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Row blocks each projection uses, as 0-based half-open ranges.
pub(crate) fn blocks_for(variant: Variant, n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    match variant {
        Variant::Repeated => Ok(vec![0..n; k]),
        Variant::Disjoint => partition_rows(n, k),
    }
}

/// Public row permutation both parties apply before blocking.
pub(crate) fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    order
}

/// Bob's assembled private distance correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcorrResult {
    pub dcorr_raw: f64,
    pub dcorr_clamped: f64,
    pub dcov_dp: f64,
    pub dvar_x_dp: f64,
    pub dvar_y: f64,
    pub total_epsilon: f64,
    pub total_delta: f64,
    pub variant: Variant,
    pub k: usize,
    pub sigma: f64,
    pub w2: f64,
    /// `C_p C_q Ω_n` for each projection, in index order.
    pub trace: Vec<f64>,
}

impl DcorrResult {
    pub(crate) fn assemble(
        dcov_dp: f64,
        dvar_x_dp: f64,
        dvar_y: f64,
        total: (f64, f64),
        variant: Variant,
        trace: Vec<f64>,
        noise: &NoiseParams,
    ) -> Self {
        let prod = dvar_x_dp * dvar_y;
        let (raw, clamped) = if prod > 0.0 {
            let raw = dcov_dp / prod.sqrt();
            (raw, raw.clamp(0.0, 1.0))
        } else {
            (0.0, 0.0)
        };
        Self {
            dcorr_raw: raw,
            dcorr_clamped: clamped,
            dcov_dp,
            dvar_x_dp,
            dvar_y,
            total_epsilon: total.0,
            total_delta: total.1,
            variant,
            k: trace.len(),
            sigma: noise.sigma,
            w2: noise.w2,
            trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(n: usize, k: usize) -> Vec<usize> {
        partition_rows(n, k).unwrap().iter().map(Range::len).collect()
    }

    #[test]
    fn partition_examples() {
        assert_eq!(sizes(12, 3), vec![4, 4, 4]);
        assert_eq!(sizes(14, 3), vec![5, 5, 4]);
        assert!(matches!(
            partition_rows(10, 3),
            Err(Error::Partition { n: 10, k: 3 })
        ));
        assert!(partition_rows(10, 0).is_err());
    }

    #[test]
    fn partition_covers_rows() {
        for n in 4..120 {
            for k in 1..=(n / 4) {
                let blocks = partition_rows(n, k).unwrap();
                assert_eq!(blocks.len(), k);
                assert_eq!(blocks[0].start, 0);
                assert_eq!(blocks.last().unwrap().end, n);
                for w in blocks.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                assert!(blocks.iter().all(|b| b.len() >= 4));
            }
        }
    }

    #[test]
    fn config_validation() {
        let cfg = ProtocolConfig::new(3, Variant::Disjoint, 1.0, 1e-5, 0.1, 0);
        assert!(cfg.validate(12).is_ok());
        assert!(matches!(cfg.validate(10), Err(Error::Partition { .. })));
        let mut bad = cfg.clone();
        bad.delta = 0.5;
        assert!(matches!(bad.validate(12), Err(Error::Budget(_))));
        let mut bad = cfg;
        bad.k = 0;
        assert!(matches!(bad.validate(12), Err(Error::Config(_))));
    }
}
