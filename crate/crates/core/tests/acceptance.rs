//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a single `criterion N ... PASS|FAIL` line.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use stegadv_core::advloop::{run_training, select_top_p, target_count, update_costs, RunConfig, SelectionMask};
use stegadv_core::analyzer::{coefficient_gradient, GradientMap, PairSet, TrainConfig};
use stegadv_core::coder::stc::{embed_bits, parity_check_matrix};
use stegadv_core::coder::{
    change_probabilities, solve_lambda, stc_embed, stc_extract, ternary_entropy_bits, EmbedRequest,
};
use stegadv_core::jpegio::dct::{forward_dct, inverse_dct};
use stegadv_core::jpegio::{decode_jpeg, encode_jpeg};
use stegadv_core::juniward::{juniward_cost, DEFAULT_SIGMA};
use stegadv_core::metrics::{evaluate_security, modification_frequency_histogram, relative_modification_rate};
use stegadv_core::stegogen::{compose_cost, embed_with_cost, generate_stego, temporary_cost};
use stegadv_core::{CoefficientImage, CostMap, WET_COST};

use common::*;

/// Written to stderr directly so the line survives the test harness's output capture.
fn report(n: u32, name: &str, outcome: Result<String, String>) {
    use std::io::Write;
    let line = match &outcome {
        Ok(detail) => format!("criterion {n} {name} ... PASS ({detail})"),
        Err(why) => format!("criterion {n} {name} ... FAIL ({why})"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(why) = outcome {
        panic!("criterion {n} failed: {why}");
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

#[test]
fn criterion_01_codec_exactness() {
    let run = || -> Result<String, String> {
        let mut images: Vec<CoefficientImage> = Vec::new();
        for (i, qf) in [50u8, 75, 90, 95, 100].iter().enumerate() {
            for size in [32, 64, 96, 128] {
                images.extend(covers(5, size, *qf, 100 + i as u64));
            }
        }
        let start = Instant::now();
        for (i, img) in images.iter().enumerate() {
            let back = decode_jpeg(&encode_jpeg(img).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            check(back.coeffs() == img.coeffs(), || format!("image {i}: coefficients differ"))?;
            check(back.quant_table() == img.quant_table(), || format!("image {i}: table differs"))?;
        }
        let t = start.elapsed();
        check(t < Duration::from_secs(30), || format!("took {t:?}"))?;
        Ok(format!("{} images in {t:.2?}", images.len()))
    };
    report(1, "codec exactness", run());
}

#[test]
fn criterion_02_dct_orthonormality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let block: [f64; 64] = std::array::from_fn(|_| rng.random_range(-128.0..128.0));
        let back = inverse_dct(&forward_dct(&block));
        worst = block.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    report(
        2,
        "DCT orthonormality",
        check(worst <= 1e-10, || format!("max error {worst:e}")).map(|_| format!("max error {worst:.2e}")),
    );
}

#[test]
fn criterion_03_juniward_oracle() {
    let cover = &covers(1, 64, 95, 3)[0];
    let fast = juniward_cost(cover, DEFAULT_SIGMA).unwrap();
    let slow = brute_juniward(cover, DEFAULT_SIGMA);
    let mut worst = 0.0f64;
    for (i, s) in slow.iter().enumerate() {
        for v in [fast.plus()[i], fast.minus()[i]] {
            if v < WET_COST {
                worst = worst.max((v - s).abs() / s.abs());
            }
        }
    }
    report(
        3,
        "J-UNIWARD oracle equivalence",
        check(worst <= 1e-8, || format!("max relative error {worst:e}")).map(|_| format!("max relative error {worst:.2e}")),
    );
}

#[test]
fn criterion_04_gradient_correctness() {
    let start = Instant::now();
    let run = || -> Result<String, String> {
        let (mut worst, mut over, mut over_at_kink, mut worst_fine) = (0.0f64, 0, 0, 0.0f64);
        for seed in 0..5u64 {
            let cover = &covers(1, 32, 90, 40 + seed)[0];
            let model = random_model(4, seed);
            let g = coefficient_gradient(&model, cover).map_err(|e| e.to_string())?;
            let mut order: Vec<usize> = (0..g.grads.len()).collect();
            order.sort_by(|&a, &b| g.grads[b].abs().total_cmp(&g.grads[a].abs()));
            for &i in &order[..100] {
                let (fd, kink) = central_difference(&model, cover, i, 1e-3);
                let rel = (g.grads[i] - fd).abs() / g.grads[i].abs();
                worst = worst.max(rel);
                if rel > 1e-4 {
                    over += 1;
                    over_at_kink += usize::from(kink);
                    let (fine, _) = central_difference(&model, cover, i, 1e-6);
                    worst_fine = worst_fine.max((g.grads[i] - fine).abs() / g.grads[i].abs());
                }
            }
        }
        let t = start.elapsed();
        let detail = format!(
            "max relative error {worst:.2e}; {over}/500 entries above 1e-4, {over_at_kink} of them straddle a ReLU kink, \
             their error at step 1e-6 is {worst_fine:.2e}; {t:.2?}"
        );
        check(worst <= 1e-4, || detail.clone())?;
        check(t < Duration::from_secs(120), || detail.clone())?;
        Ok(detail)
    };
    report(4, "gradient correctness", run());
}

fn random_costs(rng: &mut ChaCha8Rng, n: usize) -> CostMap {
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for _ in 0..n {
        let base = rng.random_range(0.05..20.0);
        plus.push(if rng.random_bool(0.02) { WET_COST } else { base * rng.random_range(1.0..3.0) });
        minus.push(if rng.random_bool(0.02) { WET_COST } else { base * rng.random_range(1.0..3.0) });
    }
    CostMap::new(n, 1, plus, minus).unwrap()
}

#[test]
fn criterion_05_payload_match() {
    let run = || -> Result<String, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut worst_rate, mut worst_scale) = (0.0f64, 0.0f64);
        for _ in 0..50 {
            let n = rng.random_range(500..5000);
            let cost = random_costs(&mut rng, n);
            let m = rng.random_range(0.05..0.6) * n as f64;
            let lambda = solve_lambda(&cost, m).map_err(|e| e.to_string())?;
            let probs: Vec<(f64, f64)> = (0..n)
                .map(|i| change_probabilities(lambda, cost.plus()[i], cost.minus()[i]))
                .collect();
            let h: f64 = probs.iter().map(|&(p, q)| ternary_entropy_bits(p, q)).sum();
            worst_rate = worst_rate.max((h - m).abs() / m);

            let k = rng.random_range(0.1..10.0);
            let scaled = cost.scaled(k);
            let l2 = solve_lambda(&scaled, m).map_err(|e| e.to_string())?;
            for (i, &(p, q)) in probs.iter().enumerate() {
                let (p2, q2) = change_probabilities(l2, scaled.plus()[i], scaled.minus()[i]);
                worst_scale = worst_scale.max((p - p2).abs()).max((q - q2).abs());
            }
        }
        check(worst_rate <= 1e-3, || format!("payload error {worst_rate:e}"))?;
        check(worst_scale <= 1e-9, || format!("scaling difference {worst_scale:e}"))?;
        Ok(format!("payload error {worst_rate:.2e}, scaling difference {worst_scale:.2e}"))
    };
    report(5, "payload match", run());
}

#[test]
fn criterion_06_stc() {
    let run = || -> Result<String, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cover = &covers(1, 16, 90, 6)[0];
        for t in 0..1000 {
            let cost = juniward_cost(cover, DEFAULT_SIGMA).unwrap();
            let len = rng.random_range(1..=128);
            let msg: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
            let key = rng.random();
            let h = 3 + t % 8;
            let (_, stego) = stc_embed(cover, &cost, &msg, key, h).map_err(|e| e.to_string())?;
            let back = stc_extract(&stego, key, len, h).map_err(|e| e.to_string())?;
            check(back == msg, || format!("message {t} not recovered"))?;
        }
        let mut instances = 0;
        for m in 1..=16usize {
            for w in 1..=16 / m {
                let n = m * w;
                let hmat = parity_check_matrix(m, w, 3);
                for _ in 0..4 {
                    let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
                    let costs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
                    let msg: Vec<u8> = (0..m).map(|_| rng.random_range(0..2)).collect();
                    let best = exhaustive_stc(&bits, &costs, &msg, &hmat);
                    let got = embed_bits(&bits, &costs, &msg, 3);
                    match (best, got) {
                        (Some(b), Ok((_, c))) => {
                            check((b - c).abs() <= 1e-9 * b.max(1.0), || format!("n={n} m={m}: {c} vs optimum {b}"))?
                        }
                        (None, Err(_)) => {}
                        (b, g) => return Err(format!("n={n} m={m}: optimum {b:?}, embedder {:?}", g.map(|x| x.1))),
                    }
                    instances += 1;
                }
            }
        }
        Ok(format!("1000 roundtrips, {instances} exhaustive instances"))
    };
    report(6, "STC", run());
}

fn gmap(v: Vec<f64>) -> GradientMap {
    GradientMap {
        width: v.len(),
        height: 1,
        grads: v,
    }
}

#[test]
fn criterion_07_update_arithmetic() {
    let run = || -> Result<String, String> {
        let q = CostMap::symmetric(1, 1, vec![2.0]).unwrap();
        let sel = SelectionMask::from_bools(1, 1, vec![true]).unwrap();
        let out = update_costs(&q, &gmap(vec![-0.7]), &sel, 2.5).unwrap();
        check((out.plus()[0], out.minus()[0]) == (3.0, 4.5), || "g<0 update".into())?;
        let out = update_costs(&q, &gmap(vec![0.7]), &sel, 2.5).unwrap();
        check((out.plus()[0], out.minus()[0]) == (4.5, 3.0), || "g>0 update".into())?;
        let out = update_costs(&q, &gmap(vec![0.7]), &SelectionMask::empty(1, 1), 2.5).unwrap();
        check(out == q, || "unselected update".into())?;
        let t = temporary_cost(&gmap(vec![-0.3]), &sel, 2.5).unwrap();
        check((t.plus[0], t.minus[0]) == (1.0, 2.5), || "g<0 tmp".into())?;
        let t2 = temporary_cost(&gmap(vec![0.3]), &sel, 2.5).unwrap();
        check((t2.plus[0], t2.minus[0]) == (2.5, 1.0), || "g>0 tmp".into())?;
        let t0 = temporary_cost(&gmap(vec![0.3]), &SelectionMask::empty(1, 1), 2.5).unwrap();
        check((t0.plus[0], t0.minus[0]) == (0.0, 0.0), || "unselected tmp".into())?;
        let rho0 = CostMap::symmetric(1, 1, vec![3.0]).unwrap();
        let c = compose_cost(&rho0, &[t, t0], 2).unwrap();
        check((c.plus()[0], c.minus()[0]) == (4.0, 5.5), || "compose example".into())?;

        // both stages on identical selections
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cover = &covers(1, 32, 95, 7)[0];
        let rho0 = juniward_cost(cover, DEFAULT_SIGMA).unwrap();
        for trial in 0..20 {
            let rounds = rng.random_range(2..8);
            let alpha = rng.random_range(1.1..4.0);
            let p = rng.random_range(0.05..1.0);
            let mut q = rho0.clone();
            let mut tmps = Vec::new();
            for _ in 0..rounds {
                let g = GradientMap {
                    width: 32,
                    height: 32,
                    grads: (0..1024)
                        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-1.0..1.0) })
                        .collect(),
                };
                let mask = select_top_p(&g, p).unwrap();
                q = update_costs(&q, &g, &mask, alpha).unwrap();
                tmps.push(temporary_cost(&g, &mask, alpha).unwrap());
            }
            let composed = compose_cost(&rho0, &tmps, rounds).unwrap();
            check(composed == q, || format!("trial {trial}: stages disagree"))?;
        }
        Ok("unit examples and 20 cross-stage trials exact".into())
    };
    report(7, "update arithmetic", run());
}

#[test]
fn criterion_08_structural_invariants() {
    let cover = covers(1, 16, 95, 8).remove(0);
    let rho0 = juniward_cost(&cover, DEFAULT_SIGMA).unwrap();
    let n = rho0.len();
    let strategy = (
        proptest::collection::vec(
            proptest::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], n),
            1..6,
        ),
        0.01..=1.0f64,
        1.01..4.0f64,
    );
    let mut runner = TestRunner::new(Config {
        cases: 64,
        rng_seed: RngSeed::Fixed(8),
        failure_persistence: None,
        ..Config::default()
    });
    let outcome = runner.run(&strategy, |(rounds, p, alpha)| {
        let mut q = rho0.clone();
        for grads in &rounds {
            let g = GradientMap {
                width: 16,
                height: 16,
                grads: grads.clone(),
            };
            let mask = select_top_p(&g, p).unwrap();
            let nonzero = grads.iter().filter(|&&v| v != 0.0).count();
            prop_assert_eq!(mask.selected_count, target_count(n, p).min(nonzero));
            prop_assert_eq!(mask.selected.iter().filter(|&&b| b).count(), mask.selected_count);
            let next = update_costs(&q, &g, &mask, alpha).unwrap();
            for i in 0..n {
                prop_assert!(next.plus()[i] >= q.plus()[i] && next.minus()[i] >= q.minus()[i]);
            }
            let t = temporary_cost(&g, &mask, alpha).unwrap();
            for i in 0..n {
                let pair = (t.plus[i], t.minus[i]);
                prop_assert!(pair == (0.0, 0.0) || pair == (1.0, alpha) || pair == (alpha, 1.0));
            }
            q = next;
        }
        for i in (0..n).filter(|&i| !rho0.is_wet(i)) {
            let k = (q.plus()[i] - q.minus()[i]).abs() / (alpha - 1.0);
            prop_assert!((k - k.round()).abs() < 1e-6, "asymmetry {} not a multiple", k);
        }
        Ok(())
    });
    report(
        8,
        "structural invariants",
        outcome.map(|_| "64 property cases".into()).map_err(|e| e.to_string()),
    );
}

fn ids(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:04}")).collect()
}

#[test]
fn criterion_09_directional_security() {
    let start = Instant::now();
    let run = || -> Result<String, String> {
        let all = covers(256, 64, 95, 9);
        let (chain_covers, held) = all.split_at(128);
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = RunConfig {
            iterations: 4,
            p: 0.5,
            alpha: 2.5,
            payload_bpnz: 0.4,
            seed: 9,
            validation_fraction: 0.25,
            sigma: DEFAULT_SIGMA,
            train: TrainConfig::default(),
        };
        let run = run_training(chain_covers, &ids(128, "c"), &cfg, dir.path(), None).map_err(|e| e.to_string())?;
        let vals: Vec<f64> = run.metrics.iter().filter_map(|r| r.val_acc).collect();
        eprintln!("validation accuracy per iteration: {vals:?} ({:.1?})", start.elapsed());

        let req = EmbedRequest::simulate(0.4, 99).unwrap();
        let baseline: Vec<CoefficientImage> = held
            .iter()
            .enumerate()
            .map(|(i, c)| embed_with_cost(c, &juniward_cost(c, DEFAULT_SIGMA).unwrap(), &req, i as u64).unwrap().0)
            .collect();
        let enhanced: Vec<CoefficientImage> = held
            .iter()
            .enumerate()
            .map(|(i, c)| generate_stego(c, &run.chain, &req, i as u64).unwrap().stego)
            .collect();
        let hp = TrainConfig {
            seed: 1234,
            ..TrainConfig::default()
        };
        let eval = |stegos: &[CoefficientImage]| {
            let (tc, vc) = held.split_at(64);
            let (ts, vs) = stegos.split_at(64);
            evaluate_security(&PairSet::new(tc, ts).unwrap(), &PairSet::new(vc, vs).unwrap(), &hp)
        };
        let base = eval(&baseline).map_err(|e| e.to_string())?;
        let enh = eval(&enhanced).map_err(|e| e.to_string())?;
        let t = start.elapsed();
        let summary = format!(
            "baseline test acc {:.4}, enhanced {:.4}, validation trend {:.4} -> {:.4}, {t:.1?}",
            base.test_acc,
            enh.test_acc,
            vals.first().copied().unwrap_or(f64::NAN),
            vals.last().copied().unwrap_or(f64::NAN),
        );
        check(enh.test_acc <= base.test_acc + 0.02, || format!("enhanced stegos easier to detect: {summary}"))?;
        check(vals.len() == cfg.iterations + 1 && vals.last() <= vals.first(), || {
            format!("validation accuracy did not decrease: {summary}")
        })?;
        check(t <= Duration::from_secs(15 * 60), || format!("too slow: {summary}"))?;
        Ok(summary)
    };
    report(9, "directional security", run());
}

fn dir_checksum(root: &Path) -> String {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut h = Sha256::new();
    for (name, bytes) in files {
        h.update(name.as_bytes());
        h.update(&bytes);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn criterion_10_metrics() {
    let run = || -> Result<String, String> {
        let r0 = CostMap::symmetric(1, 1, vec![2.0]).unwrap();
        check(relative_modification_rate(&r0, &r0).unwrap() == 0.0, || "identity rate".into())?;
        let r = CostMap::new(1, 1, vec![3.0], vec![4.5]).unwrap();
        check(relative_modification_rate(&r0, &r).unwrap() == 0.875, || "single unit rate".into())?;

        let cs = covers(10, 32, 95, 10);
        let cfg = RunConfig {
            iterations: 2,
            p: 0.5,
            alpha: 2.5,
            payload_bpnz: 0.4,
            seed: 10,
            validation_fraction: 0.2,
            sigma: DEFAULT_SIGMA,
            train: TrainConfig {
                epochs: 2,
                batch_size: 4,
                ..TrainConfig::default()
            },
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let run_a = run_training(&cs[..8], &ids(8, "img"), &cfg, a.path(), None).map_err(|e| e.to_string())?;
        run_training(&cs[..8], &ids(8, "img"), &cfg, b.path(), None).map_err(|e| e.to_string())?;
        let (ha, hb) = (dir_checksum(a.path()), dir_checksum(b.path()));
        check(ha == hb, || format!("run directories differ: {ha} vs {hb}"))?;

        let req = EmbedRequest::simulate(0.4, 1).unwrap();
        let audits: Vec<_> = cs[8..]
            .iter()
            .enumerate()
            .map(|(i, c)| generate_stego(c, &run_a.chain, &req, i as u64).unwrap().masks)
            .collect();
        let hist = modification_frequency_histogram(&audits, 2).unwrap();
        let mass: u64 = hist.iter().sum();
        check(mass == 2 * 32 * 32, || format!("histogram mass {mass}"))?;
        Ok(format!("run checksum {}, histogram {hist:?}", &ha[..12]))
    };
    report(10, "metrics", run());
}
