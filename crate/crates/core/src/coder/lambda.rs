//! Payload-limited sender: Gibbs change probabilities and the λ search.

use std::f64::consts::LN_2;

use crate::cost::{CostMap, WET_COST};
use crate::error::{Error, Result};

/// Relative tolerance on the embedded entropy.
pub const PAYLOAD_TOLERANCE: f64 = 1e-3;
const MAX_BISECTIONS: usize = 200;

#[inline]
fn weight(lambda: f64, rho: f64) -> f64 {
    if rho >= WET_COST {
        0.0
    } else {
        (-lambda * rho).exp()
    }
}

/// `(p⁺, p⁻)` for one unit at multiplier `lambda`. Wet directions get probability 0.
pub fn change_probabilities(lambda: f64, rho_plus: f64, rho_minus: f64) -> (f64, f64) {
    let ep = weight(lambda, rho_plus);
    let em = weight(lambda, rho_minus);
    let z = 1.0 + ep + em;
    (ep / z, em / z)
}

/// Ternary entropy in bits of `(p⁺, p⁻, 1 − p⁺ − p⁻)`.
pub fn ternary_entropy_bits(p_plus: f64, p_minus: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    h(p_plus) + h(p_minus) + h(1.0 - p_plus - p_minus)
}

/// Entropy of one unit at `lambda`, via `ln Z + λ(ρ⁺p⁺ + ρ⁻p⁻)` to stay stable for large λρ.
#[inline]
fn unit_entropy_bits(lambda: f64, rp: f64, rm: f64) -> f64 {
    let ep = weight(lambda, rp);
    let em = weight(lambda, rm);
    let z = 1.0 + ep + em;
    let mut nats = z.ln();
    if ep > 0.0 {
        nats += lambda * rp * ep / z;
    }
    if em > 0.0 {
        nats += lambda * rm * em / z;
    }
    nats / LN_2
}

/// Σ H₃ over all units at `lambda`.
pub fn total_entropy_bits(cost: &CostMap, lambda: f64) -> f64 {
    cost.plus()
        .iter()
        .zip(cost.minus())
        .map(|(&p, &m)| unit_entropy_bits(lambda, p, m))
        .sum()
}

/// Largest achievable payload: `log2(1 + number of open directions)` per unit.
pub fn capacity_bits(cost: &CostMap) -> f64 {
    cost.plus()
        .iter()
        .zip(cost.minus())
        .map(|(&p, &m)| {
            let open = u32::from(p < WET_COST) + u32::from(m < WET_COST);
            f64::from(1 + open).log2()
        })
        .sum()
}

/// λ > 0 with `|Σ H₃ − m| ≤ 1e-3·m`, found by bisection on log λ.
///
/// Bisection runs until the bracket collapses to machine precision rather than
/// stopping at the tolerance, so λ is a well-defined function of the costs.
pub fn solve_lambda(cost: &CostMap, message_bits: f64) -> Result<f64> {
    let m = message_bits;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("message length {m} bits")));
    }
    let cap = capacity_bits(cost);
    if m > cap {
        return Err(Error::PayloadInfeasible {
            requested: m,
            capacity: cap,
        });
    }
    let h = |l: f64| total_entropy_bits(cost, l);

    let mut lo = 1e-7;
    let mut hi = 1e3;
    while h(lo) < m {
        lo /= 10.0;
        if lo < 1e-300 {
            return Err(Error::PayloadInfeasible {
                requested: m,
                capacity: cap,
            });
        }
    }
    while h(hi) > m {
        hi *= 10.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("cannot bracket λ from above".into()));
        }
    }

    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        if h(mid) > m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (elo, ehi) = (h(lo), h(hi));
    let lambda = if (elo - m).abs() <= (ehi - m).abs() { lo } else { hi };
    let err = (h(lambda) - m).abs() / m;
    if err > PAYLOAD_TOLERANCE {
        return Err(Error::Numerical(format!(
            "λ bisection {} with relative payload error {err:.3e}",
            if converged { "stalled" } else { "did not converge" }
        )));
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_unit_costs() {
        // p = e^{-1} / (1 + 2e^{-1}); H = -(2p log2 p + (1-2p) log2(1-2p))
        let e = (-1.0f64).exp();
        let p = e / (1.0 + 2.0 * e);
        let h = -(2.0 * p * p.log2() + (1.0 - 2.0 * p) * (1.0 - 2.0 * p).log2());
        assert!((p - 0.21194).abs() < 1e-5);
        assert!((h - 1.4071).abs() < 1e-4);
        let (pp, pm) = change_probabilities(1.0, 1.0, 1.0);
        assert!((pp - p).abs() < 1e-15 && (pm - p).abs() < 1e-15);
        assert!((ternary_entropy_bits(pp, pm) - h).abs() < 1e-12);
        assert!((unit_entropy_bits(1.0, 1.0, 1.0) - h).abs() < 1e-12);
    }

    #[test]
    fn max_entropy_limit() {
        let cost = CostMap::symmetric(1, 1, vec![7.3]).unwrap();
        let l = solve_lambda(&cost, 3f64.log2()).unwrap();
        let (pp, pm) = change_probabilities(l, 7.3, 7.3);
        assert!(l < 1e-6);
        assert!((pp - 1.0 / 3.0).abs() < 1e-5 && (pm - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn large_lambda_vanishes() {
        let cost = CostMap::symmetric(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(total_entropy_bits(&cost, 1e3) < 1e-100);
    }

    #[test]
    fn infeasible_payload() {
        let cost = CostMap::new(2, 1, vec![1.0, WET_COST], vec![1.0, WET_COST]).unwrap();
        assert!((capacity_bits(&cost) - 3f64.log2()).abs() < 1e-12);
        assert!(matches!(
            solve_lambda(&cost, 2.0),
            Err(Error::PayloadInfeasible { .. })
        ));
    }

    #[test]
    fn one_sided_wet_unit_caps_at_one_bit() {
        let cost = CostMap::new(1, 1, vec![WET_COST], vec![2.0]).unwrap();
        assert_eq!(capacity_bits(&cost), 1.0);
        let l = solve_lambda(&cost, 0.5).unwrap();
        let (pp, _) = change_probabilities(l, WET_COST, 2.0);
        assert_eq!(pp, 0.0);
    }
}
