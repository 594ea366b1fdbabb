//! The adversarial training loop: simulate, train, differentiate, select, update.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::kernels::hex;
use crate::analyzer::oracle::{self, DEFAULT_TIMEOUT_SECS};
use crate::analyzer::{self, persist, AnalyzerModel, GradientMap, PairSet, TrainConfig};
use crate::coder::{apply_changes, simulate_embedding, EmbedRequest};
use crate::cost::CostMap;
use crate::error::{Error, Result};
use crate::exec;
use crate::jpegio::container::{read_costs, write_coefficients, write_costs};
use crate::jpegio::CoefficientImage;
use crate::juniward::{juniward_cost, DEFAULT_SIGMA};

pub const CONFIG_FILE: &str = "config.json";
pub const CHAIN_FILE: &str = "chain.json";
pub const METRICS_FILE: &str = "metrics.csv";
const ITER_METRICS_FILE: &str = "metrics.json";
const COMPLETE_FILE: &str = "complete";

/// Boolean selection grid in plane layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    pub width: usize,
    pub height: usize,
    pub selected: Vec<bool>,
    pub selected_count: usize,
}

impl SelectionMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            selected: vec![false; width * height],
            selected_count: 0,
        }
    }

    pub fn from_bools(width: usize, height: usize, selected: Vec<bool>) -> Result<Self> {
        if selected.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "mask has {} cells, expected {}",
                selected.len(),
                width * height
            )));
        }
        let selected_count = selected.iter().filter(|&&b| b).count();
        Ok(Self {
            width,
            height,
            selected,
            selected_count,
        })
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p = {p} outside (0, 1]")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha = {alpha} must exceed 1")))
    }
}

/// Number of positions `select_top_p` picks out of `n` for fraction `p`.
pub fn target_count(n: usize, p: f64) -> usize {
    ((p * n as f64).round() as usize).min(n)
}

/// Selects the `round(p·N)` largest `|g|`, never a zero gradient; ties go to
/// the earlier raster position.
pub fn select_top_p(g: &GradientMap, p: f64) -> Result<SelectionMask> {
    check_p(p)?;
    let n = g.grads.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| g.grads[i] != 0.0).collect();
    let k = target_count(n, p).min(order.len());
    order.sort_by(|&a, &b| g.grads[b].abs().total_cmp(&g.grads[a].abs()).then(a.cmp(&b)));
    let mut selected = vec![false; n];
    for &i in &order[..k] {
        selected[i] = true;
    }
    Ok(SelectionMask {
        width: g.width,
        height: g.height,
        selected,
        selected_count: k,
    })
}

/// The `(ρ⁺, ρ⁻)` increments for a selected gradient: the direction the
/// gradient says raises detectability gets `alpha`, the other gets 1.
pub fn increments(g: f64, alpha: f64) -> (f64, f64) {
    assert!(g != 0.0, "selected position has a zero gradient");
    if g < 0.0 {
        (1.0, alpha)
    } else {
        (alpha, 1.0)
    }
}

pub fn update_costs(q: &CostMap, g: &GradientMap, mask: &SelectionMask, alpha: f64) -> Result<CostMap> {
    check_alpha(alpha)?;
    if q.dims() != (g.width, g.height) {
        return Err(Error::shape(q.dims(), (g.width, g.height)));
    }
    if q.dims() != (mask.width, mask.height) {
        return Err(Error::shape(q.dims(), (mask.width, mask.height)));
    }
    let mut out = q.clone();
    for (i, _) in mask.selected.iter().enumerate().filter(|(_, &s)| s) {
        let (dp, dm) = increments(g.grads[i], alpha);
        out.add(i, dp, dm);
    }
    Ok(out)
}

/// Paper defaults `(T, p, alpha)` by quality factor; qualities of 85 and
/// above use the QF 95 setting, lower ones the QF 75 setting.
pub fn defaults_for_quality(qf: u8) -> (usize, f64, f64) {
    if qf >= 85 {
        (16, 0.5, 2.5)
    } else {
        (16, 0.6, 3.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub iterations: usize,
    pub p: f64,
    pub alpha: f64,
    pub payload_bpnz: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    pub sigma: f64,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn for_quality(qf: u8) -> Self {
        let (iterations, p, alpha) = defaults_for_quality(qf);
        Self {
            iterations,
            p,
            alpha,
            payload_bpnz: 0.4,
            seed: 0,
            validation_fraction: 0.2,
            sigma: DEFAULT_SIGMA,
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 2 {
            return Err(Error::InvalidArgument(format!(
                "T = {} but T≥2 is required",
                self.iterations
            )));
        }
        check_p(self.p)?;
        check_alpha(self.alpha)?;
        EmbedRequest::simulate(self.payload_bpnz, 0)?;
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction {} outside [0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Where gradients come from when no built-in model is used.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub dir: PathBuf,
    pub timeout: Duration,
}

impl OracleConfig {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS),
        }
    }

    /// Reads `STEGADV_ORACLE_DIR`.
    pub fn from_env() -> Option<Self> {
        std::env::var_os("STEGADV_ORACLE_DIR")
            .filter(|v| !v.is_empty())
            .map(Self::new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub dataset_hash: String,
    pub quality: Option<u8>,
    pub external_oracle: bool,
}

/// The trained analyzers `N_0 … N_{T-1}` and the selection settings used with them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelChain {
    /// Empty when gradients came from an external oracle.
    pub models: Vec<AnalyzerModel>,
    pub iterations: usize,
    pub p: f64,
    pub alpha: f64,
    pub payload_bpnz: f64,
    pub sigma: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainFile {
    iterations: usize,
    p: f64,
    alpha: f64,
    payload_bpnz: f64,
    sigma: f64,
    provenance: Provenance,
    model_checksums: Vec<String>,
}

impl ModelChain {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        check_alpha(self.alpha)?;
        if self.iterations < 2 {
            return Err(Error::InvalidArgument("a chain needs T≥2 rounds".into()));
        }
        if !self.provenance.external_oracle && self.models.len() != self.iterations {
            return Err(Error::Model(format!(
                "chain lists {} rounds but holds {} models",
                self.iterations,
                self.models.len()
            )));
        }
        Ok(())
    }

    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.models {
            h.update(m.checksum().as_bytes());
        }
        h.update(self.p.to_le_bytes());
        h.update(self.alpha.to_le_bytes());
        hex(&h.finalize())
    }

    /// Loads `chain.json` and the per-iteration models from a run directory.
    pub fn load(run_dir: &Path) -> Result<Self> {
        let f: ChainFile = serde_json::from_slice(&std::fs::read(run_dir.join(CHAIN_FILE))?)?;
        let mut models = Vec::new();
        if !f.provenance.external_oracle {
            for i in 0..f.iterations {
                let m = persist::load(&iter_dir(run_dir, i).join("model.bin"))?;
                if f.model_checksums.get(i) != Some(&m.checksum()) {
                    return Err(Error::Model(format!("model {i} does not match {CHAIN_FILE}")));
                }
                models.push(m);
            }
        }
        let chain = Self {
            models,
            iterations: f.iterations,
            p: f.p,
            alpha: f.alpha,
            payload_bpnz: f.payload_bpnz,
            sigma: f.sigma,
            provenance: f.provenance,
        };
        chain.validate()?;
        Ok(chain)
    }

    fn save_manifest(&self, run_dir: &Path) -> Result<()> {
        let f = ChainFile {
            iterations: self.iterations,
            p: self.p,
            alpha: self.alpha,
            payload_bpnz: self.payload_bpnz,
            sigma: self.sigma,
            provenance: self.provenance.clone(),
            model_checksums: self.models.iter().map(AnalyzerModel::checksum).collect(),
        };
        std::fs::write(run_dir.join(CHAIN_FILE), serde_json::to_vec_pretty(&f)?)?;
        Ok(())
    }
}

/// Per-round gradients for every cover, `[cover][round]`.
pub fn chain_gradients(
    chain: &ModelChain,
    covers: &[CoefficientImage],
    ids: &[String],
    oracle_cfg: Option<&OracleConfig>,
) -> Result<Vec<Vec<GradientMap>>> {
    chain.validate()?;
    let mut out: Vec<Vec<GradientMap>> = vec![Vec::with_capacity(chain.iterations); covers.len()];
    for round in 0..chain.iterations {
        let grads = round_gradients(chain.models.get(round), covers, ids, None, round, oracle_cfg)?;
        for (dst, g) in out.iter_mut().zip(grads) {
            dst.push(g);
        }
    }
    Ok(out)
}

fn round_gradients(
    model: Option<&AnalyzerModel>,
    covers: &[CoefficientImage],
    ids: &[String],
    stegos: Option<&[Option<&CoefficientImage>]>,
    round: usize,
    oracle_cfg: Option<&OracleConfig>,
) -> Result<Vec<GradientMap>> {
    match (oracle_cfg, model) {
        (Some(o), _) => oracle::external_oracle_gradient(
            &o.dir.join(format!("round_{round}")),
            ids,
            covers,
            stegos,
            Some(round),
            o.timeout,
        ),
        (None, Some(m)) => exec::try_map_range(covers.len(), |i| analyzer::coefficient_gradient(m, &covers[i])),
        (None, None) => Err(Error::Model(format!("no model for round {round}"))),
    }
}

/// SHA-256 over the SCF1 serialization of every image, in order.
pub fn dataset_hash(images: &[CoefficientImage]) -> Result<String> {
    let mut h = Sha256::new();
    for img in images {
        h.update(write_coefficients(img)?);
    }
    Ok(hex(&h.finalize()))
}

/// SplitMix64 finalizer over `base`, a tag and an index.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_SPLIT: u64 = 1;
const TAG_EMBED: u64 = 2;
const TAG_TRAIN: u64 = 3;

/// Train and validation index lists.
pub fn split_indices(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_SPLIT, 0)));
    let n_val = (validation_fraction * n as f64).round() as usize;
    let mut val = idx.split_off(n - n_val.min(n));
    idx.sort_unstable();
    val.sort_unstable();
    (idx, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub chain: ModelChain,
    /// Rows `0..=T`; row `i` scores an analyzer trained on stegos from `Q_i`.
    pub metrics: Vec<IterationMetrics>,
    /// `Q_T` per cover.
    pub final_costs: Vec<CostMap>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

pub fn iter_dir(run_dir: &Path, i: usize) -> PathBuf {
    run_dir.join(format!("iter_{i}"))
}

fn pick(v: &[CoefficientImage], idx: &[usize]) -> Vec<CoefficientImage> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn simulate_all(covers: &[CoefficientImage], costs: &[CostMap], req: &EmbedRequest) -> Result<Vec<CoefficientImage>> {
    exec::try_map_range(covers.len(), |i| {
        let ch = simulate_embedding(&covers[i], &costs[i], req, i as u64)?;
        apply_changes(&covers[i], &ch)
    })
}

/// Trains on the train split and scores both splits.
fn train_round(
    covers: &[CoefficientImage],
    stegos: &[CoefficientImage],
    train_idx: &[usize],
    val_idx: &[usize],
    hp: &TrainConfig,
) -> Result<AnalyzerModel> {
    let (tc, ts) = (pick(covers, train_idx), pick(stegos, train_idx));
    let (vc, vs) = (pick(covers, val_idx), pick(stegos, val_idx));
    let val = PairSet::new(&vc, &vs)?;
    analyzer::train(&PairSet::new(&tc, &ts)?, Some(&val).filter(|v| !v.is_empty()), hp)
}

fn write_metrics_csv(run_dir: &Path, rows: &[IterationMetrics]) -> Result<()> {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut s = String::from("iteration,train_acc,val_acc\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.iteration, fmt(r.train_acc), fmt(r.val_acc));
    }
    std::fs::write(run_dir.join(METRICS_FILE), s)?;
    Ok(())
}

/// Runs (or resumes) the training loop in `run_dir`.
///
/// Rows `0..T` of the metrics come from the chain's own analyzers; row `T`
/// comes from one extra analyzer, trained only for scoring, on stegos from
/// the final costs. Every finished iteration leaves an `iter_<i>/complete`
/// marker, so an interrupted run restarts after the last complete one.
pub fn run_training(
    covers: &[CoefficientImage],
    ids: &[String],
    cfg: &RunConfig,
    run_dir: &Path,
    oracle_cfg: Option<&OracleConfig>,
) -> Result<TrainingRun> {
    cfg.validate()?;
    if covers.is_empty() || covers.len() != ids.len() {
        return Err(Error::InvalidArgument(format!(
            "{} covers with {} ids",
            covers.len(),
            ids.len()
        )));
    }
    std::fs::create_dir_all(run_dir)?;
    let cfg_path = run_dir.join(CONFIG_FILE);
    let cfg_json = serde_json::to_vec_pretty(cfg)?;
    if cfg_path.exists() {
        let old: RunConfig = serde_json::from_slice(&std::fs::read(&cfg_path)?)?;
        if &old != cfg {
            return Err(Error::InvalidArgument(format!(
                "{} holds a run with a different configuration",
                run_dir.display()
            )));
        }
    } else {
        std::fs::write(&cfg_path, &cfg_json)?;
    }

    let (train_idx, val_idx) = split_indices(covers.len(), cfg.validation_fraction, cfg.seed);
    if train_idx.is_empty() {
        return Err(Error::InvalidArgument("no covers left for training".into()));
    }
    let external = oracle_cfg.is_some();
    let mut costs: Vec<CostMap> = exec::try_map_range(covers.len(), |i| juniward_cost(&covers[i], cfg.sigma))?;
    let mut models = Vec::with_capacity(cfg.iterations);
    let mut rows = Vec::with_capacity(cfg.iterations + 1);

    for i in 0..=cfg.iterations {
        let dir = iter_dir(run_dir, i);
        let last = i == cfg.iterations;
        if dir.join(COMPLETE_FILE).exists() {
            log::info!("iteration {i}: resuming from checkpoint");
            rows.push(serde_json::from_slice(&std::fs::read(dir.join(ITER_METRICS_FILE))?)?);
            if !last {
                if !external {
                    models.push(persist::load(&dir.join("model.bin"))?);
                }
                costs = ids
                    .iter()
                    .map(|id| read_costs(&std::fs::read(dir.join("costs").join(format!("{id}.scf1")))?))
                    .collect::<Result<_>>()?;
            }
            continue;
        }
        std::fs::create_dir_all(&dir)?;
        let req = EmbedRequest::simulate(cfg.payload_bpnz, derive_seed(cfg.seed, TAG_EMBED, i as u64))?;
        let stegos = simulate_all(covers, &costs, &req)?;
        let hp = TrainConfig {
            seed: derive_seed(cfg.seed, TAG_TRAIN, i as u64),
            ..cfg.train
        };

        let mut row = IterationMetrics {
            iteration: i,
            train_acc: None,
            val_acc: None,
            selected: 0,
        };
        let model = if external && !last {
            None
        } else {
            let m = train_round(covers, &stegos, &train_idx, &val_idx, &hp)?;
            row.train_acc = Some(m.metrics.train_accuracy);
            row.val_acc = m.metrics.validation_accuracy;
            Some(m)
        };
        log::info!(
            "iteration {i}: train acc {:?}, validation acc {:?}",
            row.train_acc,
            row.val_acc
        );

        if !last {
            // the oracle trains on the training pairs and answers for every cover
            let mut pairs: Vec<Option<&CoefficientImage>> = vec![None; covers.len()];
            for &k in &train_idx {
                pairs[k] = Some(&stegos[k]);
            }
            let grads = round_gradients(model.as_ref(), covers, ids, Some(&pairs), i, oracle_cfg)?;
            let updated = exec::try_map_range(covers.len(), |k| -> Result<(CostMap, usize)> {
                let mask = select_top_p(&grads[k], cfg.p)?;
                Ok((update_costs(&costs[k], &grads[k], &mask, cfg.alpha)?, mask.selected_count))
            })?;
            let cost_dir = dir.join("costs");
            std::fs::create_dir_all(&cost_dir)?;
            costs = Vec::with_capacity(covers.len());
            for ((c, n), id) in updated.into_iter().zip(ids) {
                row.selected += n;
                std::fs::write(cost_dir.join(format!("{id}.scf1")), write_costs(&c)?)?;
                costs.push(c);
            }
            if let Some(m) = model {
                persist::save(&m, &dir.join("model.bin"))?;
                models.push(m);
            }
        }
        std::fs::write(dir.join(ITER_METRICS_FILE), serde_json::to_vec_pretty(&row)?)?;
        std::fs::write(dir.join(COMPLETE_FILE), b"")?;
        rows.push(row);
        write_metrics_csv(run_dir, &rows)?;
    }
    write_metrics_csv(run_dir, &rows)?;

    let chain = ModelChain {
        models,
        iterations: cfg.iterations,
        p: cfg.p,
        alpha: cfg.alpha,
        payload_bpnz: cfg.payload_bpnz,
        sigma: cfg.sigma,
        provenance: Provenance {
            seed: cfg.seed,
            dataset_hash: dataset_hash(covers)?,
            quality: covers[0].quality(),
            external_oracle: external,
        },
    };
    chain.save_manifest(run_dir)?;
    Ok(TrainingRun {
        chain,
        metrics: rows,
        final_costs: costs,
        train_indices: train_idx,
        validation_indices: val_idx,
    })
}
