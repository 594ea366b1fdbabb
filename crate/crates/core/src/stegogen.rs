//! Stego generation from a trained chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::advloop::{chain_gradients, increments, select_top_p, ModelChain, OracleConfig, SelectionMask};
use crate::analyzer::{coefficient_gradient, GradientMap};
use crate::coder::{apply_changes, simulate_embedding, stc_embed, ChangeMap, EmbedMode, EmbedRequest, DEFAULT_STC_HEIGHT};
use crate::cost::CostMap;
use crate::error::{Error, Result};
use crate::jpegio::{count_nzac, CoefficientImage};
use crate::juniward::juniward_cost;

/// Per-round additive costs `(tmp⁺, tmp⁻)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporaryCost {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

pub fn temporary_cost(g: &GradientMap, mask: &SelectionMask, alpha: f64) -> Result<TemporaryCost> {
    if alpha.is_nan() || alpha <= 1.0 {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must exceed 1")));
    }
    if (g.width, g.height) != (mask.width, mask.height) {
        return Err(Error::shape((g.width, g.height), (mask.width, mask.height)));
    }
    let n = g.grads.len();
    let mut t = TemporaryCost {
        plus: vec![0.0; n],
        minus: vec![0.0; n],
    };
    for i in (0..n).filter(|&i| mask.selected[i] && g.grads[i] != 0.0) {
        (t.plus[i], t.minus[i]) = increments(g.grads[i], alpha);
    }
    Ok(t)
}

/// `ρ₀ + Σ tmpᵢ`, added round by round; wet directions stay wet.
pub fn compose_cost(rho0: &CostMap, tmps: &[TemporaryCost], rounds: usize) -> Result<CostMap> {
    if tmps.len() != rounds {
        return Err(Error::InvalidArgument(format!(
            "{} temporary costs for a chain of {rounds} rounds",
            tmps.len()
        )));
    }
    let mut out = rho0.clone();
    for t in tmps {
        if t.plus.len() != out.len() || t.minus.len() != out.len() {
            return Err(Error::InvalidArgument(format!(
                "temporary cost has {} cells, expected {}",
                t.plus.len(),
                out.len()
            )));
        }
        for i in 0..out.len() {
            out.add(i, t.plus[i], t.minus[i]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub stego: CoefficientImage,
    pub cost: CostMap,
    pub changes: ChangeMap,
    /// One selection mask per round.
    pub masks: Vec<SelectionMask>,
}

/// Builds the enhanced cost from precomputed per-round gradients.
pub fn enhanced_cost(
    cover: &CoefficientImage,
    gradients: &[GradientMap],
    chain: &ModelChain,
) -> Result<(CostMap, Vec<SelectionMask>)> {
    let rho0 = juniward_cost(cover, chain.sigma)?;
    let mut masks = Vec::with_capacity(gradients.len());
    let mut tmps = Vec::with_capacity(gradients.len());
    for g in gradients {
        if (g.width, g.height) != cover.dims() {
            return Err(Error::shape(cover.dims(), (g.width, g.height)));
        }
        let mask = select_top_p(g, chain.p)?;
        tmps.push(temporary_cost(g, &mask, chain.alpha)?);
        masks.push(mask);
    }
    Ok((compose_cost(&rho0, &tmps, chain.iterations)?, masks))
}

/// Embeds with an arbitrary cost map. STC mode carries a pseudo-random
/// message of `payload · nzAC` bits drawn from the request seed.
pub fn embed_with_cost(
    cover: &CoefficientImage,
    cost: &CostMap,
    req: &EmbedRequest,
    image_id: u64,
) -> Result<(CoefficientImage, ChangeMap)> {
    match req.mode {
        EmbedMode::Simulate => {
            let ch = simulate_embedding(cover, cost, req, image_id)?;
            Ok((apply_changes(cover, &ch)?, ch))
        }
        EmbedMode::Stc => {
            let bits = (req.payload_bpnz * count_nzac(cover) as f64).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
            rng.set_stream(image_id);
            let message: Vec<u8> = (0..bits).map(|_| rng.random_range(0..2u8)).collect();
            let (ch, stego) = stc_embed(cover, cost, &message, req.seed ^ image_id, DEFAULT_STC_HEIGHT)?;
            Ok((stego, ch))
        }
    }
}

pub fn generate_from_gradients(
    cover: &CoefficientImage,
    gradients: &[GradientMap],
    chain: &ModelChain,
    req: &EmbedRequest,
    image_id: u64,
) -> Result<Generated> {
    let (cost, masks) = enhanced_cost(cover, gradients, chain)?;
    let (stego, changes) = embed_with_cost(cover, &cost, req, image_id)?;
    Ok(Generated {
        stego,
        cost,
        changes,
        masks,
    })
}

/// One cover through the chain's built-in models.
pub fn generate_stego(
    cover: &CoefficientImage,
    chain: &ModelChain,
    req: &EmbedRequest,
    image_id: u64,
) -> Result<Generated> {
    chain.validate()?;
    if chain.models.len() != chain.iterations {
        return Err(Error::Model("chain has no built-in models; use an oracle".into()));
    }
    let grads = chain
        .models
        .iter()
        .map(|m| coefficient_gradient(m, cover))
        .collect::<Result<Vec<_>>>()?;
    generate_from_gradients(cover, &grads, chain, req, image_id)
}

/// A batch of covers; image `i` uses RNG stream `i`. Gradients come from the
/// oracle when one is given.
pub fn generate_batch(
    covers: &[CoefficientImage],
    ids: &[String],
    chain: &ModelChain,
    req: &EmbedRequest,
    oracle_cfg: Option<&OracleConfig>,
) -> Result<Vec<Generated>> {
    let grads = chain_gradients(chain, covers, ids, oracle_cfg)?;
    crate::exec::try_map_range(covers.len(), |i| {
        generate_from_gradients(&covers[i], &grads[i], chain, req, i as u64)
    })
}
