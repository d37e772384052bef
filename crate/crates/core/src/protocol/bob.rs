use std::ops::Range;

use crate::data::DataMatrix;
use crate::error::{Error, Phase, Result};
use crate::estimators::{
    projection_constant, sample_unit_projections, univariate_dcov, unbiased_dcov, ProjectionSet,
};
use crate::privacy::compose_budget;
use crate::rng::derive_seed;

use super::message::{Handshake, NoiseParams, Projection, ProtocolMessage};
use super::{blocks_for, partition_rows, shuffled_order, DcorrResult};

const DIRECTIONS: u64 = 1;

struct Active {
    handshake: Handshake,
    working: DataMatrix,
    directions: ProjectionSet,
    blocks: Vec<Range<usize>>,
    scale: f64,
    trace: Vec<Option<f64>>,
    received: usize,
    dvar_x: Option<(f64, f64)>,
    noise: Option<NoiseParams>,
}

/// Bob's receiving state machine. Messages must arrive as handshake, K
/// projections (any index order), variance, noise parameters, end.
pub struct BobSession<'a> {
    y: &'a DataMatrix,
    seed: u64,
    phase: Option<Phase>,
    active: Option<Active>,
}

impl<'a> BobSession<'a> {
    pub fn new(y: &'a DataMatrix, seed: u64) -> Self {
        Self {
            y,
            seed,
            phase: None,
            active: None,
        }
    }

    /// Last phase that completed successfully.
    pub fn last_phase(&self) -> Phase {
        self.phase.unwrap_or(Phase::Setup)
    }

    pub fn is_done(&self) -> bool {
        self.phase == Some(Phase::End)
    }

    pub fn accept(&mut self, msg: ProtocolMessage) -> Result<()> {
        match (self.phase, msg) {
            (None, ProtocolMessage::Handshake(h)) => {
                self.active = Some(self.start(h)?);
                self.phase = Some(Phase::Handshake);
            }
            (Some(Phase::Handshake | Phase::Projections), ProtocolMessage::Projection(p)) => {
                let a = self.active.as_mut().expect("active after handshake");
                a.take_projection(p)?;
                self.phase = Some(Phase::Projections);
            }
            (Some(Phase::Projections), ProtocolMessage::Variance(v)) => {
                let a = self.active.as_mut().expect("active after handshake");
                if a.received != a.handshake.k {
                    return Err(Error::Protocol(format!(
                        "variance received after {} of {} projections",
                        a.received, a.handshake.k
                    )));
                }
                if !v.value.is_finite() || v.epsilon.is_nan() || v.epsilon <= 0.0 {
                    return Err(Error::Protocol("invalid variance payload".into()));
                }
                a.dvar_x = Some((v.value, v.epsilon));
                self.phase = Some(Phase::Variance);
            }
            (Some(Phase::Variance), ProtocolMessage::NoiseParams(np)) => {
                let a = self.active.as_mut().expect("active after handshake");
                a.noise = Some(np);
                self.phase = Some(Phase::NoiseParams);
            }
            (Some(Phase::NoiseParams), ProtocolMessage::End) => {
                self.phase = Some(Phase::End);
            }
            (phase, msg) => {
                return Err(Error::Protocol(format!(
                    "unexpected {} message after {}",
                    msg.tag(),
                    phase.map_or("session start".to_string(), |p| p.to_string())
                )));
            }
        }
        Ok(())
    }

    fn start(&self, h: Handshake) -> Result<Active> {
        if h.n != self.y.n() {
            return Err(Error::Handshake(format!(
                "Alice announced {} rows, Bob holds {}",
                h.n,
                self.y.n()
            )));
        }
        if h.k == 0 || h.p == 0 {
            return Err(Error::Handshake("K and p must be >= 1".into()));
        }
        if h.variant == crate::privacy::Variant::Disjoint {
            partition_rows(h.n, h.k).map_err(|e| Error::Handshake(e.to_string()))?;
        }
        let working = match h.shuffle_seed {
            Some(s) => self.y.permute_rows(&shuffled_order(h.n, s))?,
            None => self.y.clone(),
        };
        let directions =
            sample_unit_projections(self.y.d(), h.k, derive_seed(self.seed, DIRECTIONS))?;
        let blocks = blocks_for(h.variant, h.n, h.k)?;
        let scale = projection_constant(h.p)? * projection_constant(self.y.d())?;
        Ok(Active {
            trace: vec![None; h.k],
            handshake: h,
            working,
            directions,
            blocks,
            scale,
            received: 0,
            dvar_x: None,
            noise: None,
        })
    }

    /// Assembles the result once the end message has been accepted.
    pub fn finish(self) -> Result<DcorrResult> {
        if !self.is_done() {
            return Err(Error::Protocol(format!(
                "session incomplete: last phase {}",
                self.last_phase()
            )));
        }
        let a = self.active.expect("active after handshake");
        let trace: Vec<f64> = a.trace.into_iter().map(|t| t.expect("all projections")).collect();
        let k = a.handshake.k;
        let dcov_dp = trace.iter().sum::<f64>() / k as f64;
        let (dvar_x, eps_variance) = a.dvar_x.expect("variance received");
        let noise = a.noise.expect("noise params received");
        let dvar_y = unbiased_dcov(self.y, self.y)?;
        let total = compose_budget(a.handshake.variant, k, noise.epsilon, noise.delta, eps_variance)
            .map_err(|e| Error::Protocol(format!("released budget is invalid: {e}")))?
            .total();
        Ok(DcorrResult::assemble(
            dcov_dp,
            dvar_x,
            dvar_y,
            total,
            a.handshake.variant,
            trace,
            &noise,
        ))
    }
}

impl Active {
    fn take_projection(&mut self, p: Projection) -> Result<()> {
        let k = self.handshake.k;
        if p.k == 0 || p.k > k {
            return Err(Error::Protocol(format!("projection index {} outside 1..={k}", p.k)));
        }
        let slot = p.k - 1;
        if self.trace[slot].is_some() {
            return Err(Error::Protocol(format!("duplicate projection index {}", p.k)));
        }
        let block = &self.blocks[slot];
        if p.rows != (block.start + 1, block.end) {
            return Err(Error::Protocol(format!(
                "projection {} covers rows {:?}, expected [{}, {}]",
                p.k,
                p.rows,
                block.start + 1,
                block.end
            )));
        }
        if p.values.len() != block.len() {
            return Err(Error::Protocol(format!(
                "projection {} carries {} values for a block of {}",
                p.k,
                p.values.len(),
                block.len()
            )));
        }
        if p.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Protocol(format!("projection {} has non-finite values", p.k)));
        }
        let w = self
            .working
            .select_rows(block.clone())?
            .project(self.directions.direction(slot))?;
        self.trace[slot] = Some(self.scale * univariate_dcov(&p.values, &w));
        self.received += 1;
        Ok(())
    }
}

/// Bob's side over a complete message list.
pub fn bob_compute(y: &DataMatrix, messages: &[ProtocolMessage], seed: u64) -> Result<DcorrResult> {
    let mut bob = BobSession::new(y, seed);
    for m in messages {
        if bob.is_done() {
            return Err(Error::Protocol("messages after end".into()));
        }
        bob.accept(m.clone())?;
    }
    bob.finish()
}
