use crate::data::DataMatrix;
use crate::error::Result;
use crate::estimators::sample_unit_projections;
use crate::privacy::{
    gaussian_sigma, hsic_global_sensitivity, l2_sensitivity, privatize_dvar_with_scale,
    privatize_projection, NoiseSpec, PrivacyBudget, Variant,
};
use crate::rng::derive_seed;

use super::message::{Handshake, NoiseParams, Projection, ProtocolMessage, Variance};
use super::{blocks_for, shuffled_order, NoiseMode, ProtocolConfig};

// Child-seed labels for Alice's independent random streams.
const DIRECTIONS: u64 = 1;
const VARIANCE_NOISE: u64 = 2;
const SHUFFLE: u64 = 3;
const PROJECTION_NOISE: u64 = 1000;

/// Runs Alice's side, handing each message to `sink` as soon as it is ready.
/// Returns the mechanism parameters that were used.
pub fn alice_emit<F>(x: &DataMatrix, cfg: &ProtocolConfig, mut sink: F) -> Result<NoiseSpec>
where
    F: FnMut(ProtocolMessage) -> Result<()>,
{
    cfg.validate(x.n())?;
    let n = x.n();

    let shuffle_seed = (cfg.shuffle_blocks && cfg.variant == Variant::Disjoint)
        .then(|| derive_seed(cfg.seed, SHUFFLE));
    let working = match shuffle_seed {
        Some(s) => x.permute_rows(&shuffled_order(n, s))?,
        None => x.clone(),
    };

    let directions = sample_unit_projections(x.d(), cfg.k, derive_seed(cfg.seed, DIRECTIONS))?;
    let w2 = l2_sensitivity(&directions.as_matrix_rows())?;
    let projection_budget = PrivacyBudget::new(cfg.eps_per_projection, cfg.delta)?;
    let variance_budget = PrivacyBudget::pure(cfg.eps_variance)?;
    let (sigma, laplace_scale) = match cfg.noise {
        NoiseMode::Calibrated => (
            gaussian_sigma(w2, projection_budget)?,
            hsic_global_sensitivity(n)? / cfg.eps_variance,
        ),
        NoiseMode::Disabled => (0.0, 0.0),
    };

    sink(ProtocolMessage::Handshake(Handshake {
        n,
        k: cfg.k,
        p: x.d(),
        variant: cfg.variant,
        shuffle_seed,
    }))?;

    let blocks = blocks_for(cfg.variant, n, cfg.k)?;
    for (k, (u, block)) in directions.directions().iter().zip(&blocks).enumerate() {
        let z = working.select_rows(block.clone())?.project(u)?;
        let noisy = privatize_projection(&z, sigma, derive_seed(cfg.seed, PROJECTION_NOISE + k as u64))?;
        sink(ProtocolMessage::Projection(Projection {
            k: k + 1,
            rows: (block.start + 1, block.end),
            values: noisy,
        }))?;
    }

    let dvar = privatize_dvar_with_scale(
        x,
        variance_budget,
        laplace_scale,
        derive_seed(cfg.seed, VARIANCE_NOISE),
        cfg.dvar_statistic,
    )?;
    sink(ProtocolMessage::Variance(Variance {
        value: dvar.value,
        epsilon: cfg.eps_variance,
    }))?;

    sink(ProtocolMessage::NoiseParams(NoiseParams {
        sigma,
        w2,
        epsilon: cfg.eps_per_projection,
        delta: cfg.delta,
    }))?;

    sink(ProtocolMessage::End)?;

    Ok(NoiseSpec {
        gaussian_sigma: sigma,
        laplace_scale,
        w2,
        projection_budget,
        variance_budget,
    })
}

/// Alice's full message sequence: handshake, K projections, variance,
/// noise parameters, end.
pub fn alice_prepare(x: &DataMatrix, cfg: &ProtocolConfig) -> Result<Vec<ProtocolMessage>> {
    let mut out = Vec::with_capacity(cfg.k + 4);
    alice_emit(x, cfg, |m| {
        out.push(m);
        Ok(())
    })?;
    Ok(out)
}
