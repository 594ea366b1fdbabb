use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lambda::{change_probabilities, solve_lambda, total_entropy_bits};
use super::{ChangeMap, EmbedRequest};
use crate::cost::CostMap;
use crate::error::{Error, Result};
use crate::jpegio::{count_nzac, CoefficientImage};

/// Sample a ternary change pattern at the payload-limited optimum.
///
/// The generator is ChaCha keyed by `req.seed` on stream `image_id`; the
/// `i`-th draw belongs to coefficient `i`, so each image's pattern is
/// independent of the order in which images are processed.
pub fn simulate_embedding(
    cover: &CoefficientImage,
    cost: &CostMap,
    req: &EmbedRequest,
    image_id: u64,
) -> Result<ChangeMap> {
    if cost.dims() != cover.dims() {
        return Err(Error::shape(cover.dims(), cost.dims()));
    }
    let (w, h) = cover.dims();
    let m = req.payload_bpnz * count_nzac(cover) as f64;
    if m <= 0.0 {
        return Ok(ChangeMap::zeros(w, h));
    }
    let lambda = solve_lambda(cost, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    rng.set_stream(image_id);
    let changes = cost
        .plus()
        .iter()
        .zip(cost.minus())
        .map(|(&rp, &rm)| {
            let (pp, pm) = change_probabilities(lambda, rp, rm);
            let u: f64 = rng.random();
            if u < pp {
                1
            } else if u < pp + pm {
                -1
            } else {
                0
            }
        })
        .collect();
    Ok(ChangeMap {
        width: w,
        height: h,
        changes,
        realized_bits: total_entropy_bits(cost, lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::WET_COST;
    use crate::jpegio::QuantTable;

    fn busy_cover() -> CoefficientImage {
        let c: Vec<i16> = (0..32 * 32).map(|i| ((i * 7) % 11) as i16 - 5).collect();
        CoefficientImage::new(32, 32, c, QuantTable::ijg(95).unwrap(), Some(95)).unwrap()
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let cover = busy_cover();
        let cost = CostMap::symmetric(32, 32, (0..1024).map(|i| 1.0 + (i % 13) as f64).collect())
            .unwrap();
        let req = EmbedRequest::simulate(0.4, 9).unwrap();
        let a = simulate_embedding(&cover, &cost, &req, 1).unwrap();
        let b = simulate_embedding(&cover, &cost, &req, 1).unwrap();
        let c = simulate_embedding(&cover, &cost, &req, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.changes, c.changes);
    }

    #[test]
    fn tiny_payload_changes_nothing() {
        let cover = busy_cover();
        let cost = CostMap::symmetric(32, 32, vec![10.0; 1024]).unwrap();
        let req = EmbedRequest::simulate(1e-9, 3).unwrap();
        let m = simulate_embedding(&cover, &cost, &req, 0).unwrap();
        assert_eq!(m.count_changed(), 0);
    }

    #[test]
    fn wet_direction_never_sampled() {
        let cover = busy_cover();
        let mut plus = vec![1.0; 1024];
        let minus = vec![1.0; 1024];
        for p in plus.iter_mut().step_by(2) {
            *p = WET_COST;
        }
        let cost = CostMap::new(32, 32, plus, minus).unwrap();
        let mut total = 0;
        for seed in 0..1000 {
            let req = EmbedRequest::simulate(1.0, seed).unwrap();
            let m = simulate_embedding(&cover, &cost, &req, 0).unwrap();
            for (i, &c) in m.changes.iter().enumerate() {
                if i % 2 == 0 {
                    assert_ne!(c, 1);
                }
            }
            total += m.changes.len();
        }
        assert!(total >= 1_000_000);
    }
}
