mod common;

use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use stegadv_core::advloop::{run_training, ModelChain, OracleConfig, RunConfig};
use stegadv_core::analyzer::oracle::{read_manifest, serve_with_model, SENTINEL_FILE};
use stegadv_core::analyzer::{AnalyzerModel, TrainConfig};
use stegadv_core::coder::{EmbedMode, EmbedRequest};
use stegadv_core::exec;
use stegadv_core::jpegio::container::write_costs;
use stegadv_core::jpegio::encode_jpeg;
use stegadv_core::stegogen::{generate_batch, generate_stego, Generated};

use common::*;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:02}")).collect()
}

fn tiny_config(seed: u64) -> RunConfig {
    RunConfig {
        iterations: 2,
        seed,
        validation_fraction: 0.25,
        train: TrainConfig {
            epochs: 2,
            batch_size: 4,
            channels: 4,
            ..TrainConfig::default()
        },
        ..RunConfig::for_quality(95)
    }
}

fn train_chain(dir: &Path) -> ModelChain {
    let c = covers(8, 32, 95, 31);
    run_training(&c, &ids(8), &tiny_config(5), dir, None).unwrap().chain
}

/// Answers `dir/round_<r>` requests with the chain's own models until all rounds are served.
fn serve_rounds(dir: &Path, models: Vec<AnalyzerModel>) -> thread::JoinHandle<()> {
    let dir = dir.to_path_buf();
    thread::spawn(move || {
        let deadline = Instant::now() + Duration::from_secs(120);
        for (r, m) in models.iter().enumerate() {
            let rd = dir.join(format!("round_{r}"));
            while read_manifest(&rd).is_err() || rd.join(SENTINEL_FILE).exists() {
                assert!(Instant::now() < deadline, "no request for round {r}");
                thread::sleep(Duration::from_millis(10));
            }
            serve_with_model(&rd, m).unwrap();
        }
    })
}

#[test]
fn external_oracle_reproduces_builtin_generation() {
    let run = tempfile::tempdir().unwrap();
    let chain = train_chain(run.path());
    let fresh = covers(3, 32, 95, 77);
    let req = EmbedRequest::simulate(0.4, 1).unwrap();
    let builtin = generate_batch(&fresh, &ids(3), &chain, &req, None).unwrap();

    let oracle_dir = tempfile::tempdir().unwrap();
    let server = serve_rounds(oracle_dir.path(), chain.models.clone());
    let cfg = OracleConfig {
        dir: oracle_dir.path().to_path_buf(),
        timeout: Duration::from_secs(60),
    };
    let external = generate_batch(&fresh, &ids(3), &chain, &req, Some(&cfg)).unwrap();
    server.join().unwrap();
    assert_eq!(builtin, external);
}

#[test]
fn batch_matches_single_image_generation() {
    let run = tempfile::tempdir().unwrap();
    let chain = train_chain(run.path());
    let fresh = covers(3, 32, 95, 78);
    let req = EmbedRequest::simulate(0.4, 2).unwrap();
    let batch = generate_batch(&fresh, &ids(3), &chain, &req, None).unwrap();
    for (i, cover) in fresh.iter().enumerate() {
        assert_eq!(batch[i], generate_stego(cover, &chain, &req, i as u64).unwrap());
    }
}

#[test]
fn chain_reloads_from_run_directory() {
    let run = tempfile::tempdir().unwrap();
    let chain = train_chain(run.path());
    let back = ModelChain::load(run.path()).unwrap();
    assert_eq!(back.checksum(), chain.checksum());
    assert_eq!(back.models.len(), 2);
}

fn digest(gens: &[Generated]) -> String {
    let mut h = Sha256::new();
    for g in gens {
        h.update(encode_jpeg(&g.stego).unwrap());
        h.update(write_costs(&g.cost).unwrap());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn generation_independent_of_thread_count() {
    let run = tempfile::tempdir().unwrap();
    let chain = train_chain(run.path());
    let fresh = covers(4, 32, 95, 79);
    for mode in [EmbedMode::Simulate, EmbedMode::Stc] {
        let req = EmbedRequest::new(0.3, 3, mode).unwrap();
        let one = exec::with_threads(Some(1), || generate_batch(&fresh, &ids(4), &chain, &req, None).unwrap());
        let many = exec::with_threads(Some(4), || generate_batch(&fresh, &ids(4), &chain, &req, None).unwrap());
        assert_eq!(digest(&one), digest(&many));
    }
}

#[test]
fn training_through_oracle_sends_pairs() {
    let c = covers(4, 16, 95, 80);
    let oracle_dir = tempfile::tempdir().unwrap();
    let run = tempfile::tempdir().unwrap();
    let server = serve_rounds(oracle_dir.path(), vec![random_model(4, 1), random_model(4, 2)]);
    let cfg = OracleConfig {
        dir: oracle_dir.path().to_path_buf(),
        timeout: Duration::from_secs(60),
    };
    let out = run_training(&c, &ids(4), &tiny_config(6), run.path(), Some(&cfg)).unwrap();
    server.join().unwrap();
    assert!(out.chain.models.is_empty());
    assert!(out.chain.provenance.external_oracle);
    let m = read_manifest(&oracle_dir.path().join("round_0")).unwrap();
    assert_eq!(m.entries.len(), 4);
    let with_stego = m.entries.iter().filter(|e| e.stego_file.is_some()).count();
    assert_eq!(with_stego, out.train_indices.len());
}

/// Pinned output of a fixed 64×64 cover through a fixed T=2 chain.
#[test]
fn golden_end_to_end() {
    let run = tempfile::tempdir().unwrap();
    let c = covers(8, 64, 95, 90);
    let cfg = RunConfig {
        iterations: 2,
        seed: 11,
        validation_fraction: 0.25,
        train: TrainConfig {
            epochs: 1,
            batch_size: 4,
            channels: 4,
            ..TrainConfig::default()
        },
        ..RunConfig::for_quality(95)
    };
    let chain = run_training(&c, &ids(8), &cfg, run.path(), None).unwrap().chain;
    let req = EmbedRequest::simulate(0.4, 12).unwrap();
    let g = generate_stego(&c[0], &chain, &req, 0).unwrap();
    let d = digest(std::slice::from_ref(&g));
    println!("golden digest {d} changes {}", g.changes.count_changed());
    assert_eq!(d, GOLDEN_DIGEST);
    assert_eq!(g.changes.count_changed(), GOLDEN_CHANGES);
}

const GOLDEN_DIGEST: &str = "aeed6ae89b1c6c274e2760bdd578bc0056c9a82e7cadd7477a6cf144aa8095f0";
const GOLDEN_CHANGES: usize = 173;
