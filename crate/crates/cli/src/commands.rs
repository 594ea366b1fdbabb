use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stegadv_core::advloop::{chain_gradients, run_training, split_indices, ModelChain, OracleConfig, RunConfig};
use stegadv_core::analyzer::{persist, PairSet, TrainConfig};
use stegadv_core::coder::{stc_embed, stc_extract, EmbedMode, EmbedRequest};
use stegadv_core::jpegio::container::{self, read_costs, read_masks, write_changes, write_costs, write_masks};
use stegadv_core::jpegio::pgm::{read_pgm, write_pgm};
use stegadv_core::jpegio::{compress_gray, count_nzac, decode_jpeg, encode_jpeg};
use stegadv_core::juniward::{juniward_cost, DEFAULT_SIGMA};
use stegadv_core::metrics::{
    evaluate_security, histogram_csv, modification_frequency_histogram, rates_csv, relative_modification_rate,
    security_csv, selection_overlay, SecurityRow,
};
use stegadv_core::stegogen::{enhanced_cost, generate_batch};
use stegadv_core::{advloop::SelectionMask, Error, ErrorKind};

use crate::config::{resolve, Overrides};
use crate::dataset::{bits_to_bytes, bytes_to_bits, list_files, load_covers, load_jpegs, read_jpeg, sha256_hex, stem};
use crate::{
    CompressArgs, EmbedArgs, EvaluateArgs, ExtractArgs, GenerateArgs, Global, InspectArgs, MetricsArgs, SweepArgs,
    TrainArgs,
};

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    pub fn context(self, path: &Path) -> Self {
        Self {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn oracle() -> Option<OracleConfig> {
    let o = OracleConfig::from_env();
    if let Some(o) = &o {
        log::info!("gradients from external oracle at {}", o.dir.display());
    }
    o
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompressManifest {
    pub quality: u8,
    pub images: Vec<CompressedImage>,
    pub failed: Vec<FailedImage>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompressedImage {
    pub id: String,
    pub source: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FailedImage {
    pub source: String,
    pub error: String,
}

pub fn compress(_g: &Global, a: &CompressArgs) -> Outcome {
    let files = list_files(&a.input, &["pgm"])?;
    fs::create_dir_all(&a.out)?;
    let mut manifest = CompressManifest {
        quality: a.qf,
        images: Vec::new(),
        failed: Vec::new(),
    };
    for f in &files {
        let id = stem(f);
        let result = read_pgm(f)
            .and_then(|gray| compress_gray(&gray, a.qf))
            .and_then(|img| encode_jpeg(&img));
        match result {
            Ok(bytes) => {
                let name = format!("{id}.jpg");
                fs::write(a.out.join(&name), &bytes)?;
                manifest.images.push(CompressedImage {
                    id,
                    source: f.display().to_string(),
                    file: name,
                    sha256: sha256_hex(&bytes),
                });
            }
            Err(e) => {
                log::warn!("{}: {e}", f.display());
                manifest.failed.push(FailedImage {
                    source: f.display().to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    write_json(&a.out.join("manifest.json"), &manifest)?;
    log::info!("compressed {} of {} images at QF {}", manifest.images.len(), files.len(), a.qf);
    if manifest.failed.is_empty() {
        Ok(())
    } else {
        let list: Vec<&str> = manifest.failed.iter().map(|f| f.source.as_str()).collect();
        Err(Failure::data(format!("{} unreadable: {}", list.len(), list.join(", "))))
    }
}

fn print_metrics(run: &stegadv_core::advloop::TrainingRun) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("iteration  train_acc  val_acc  selected");
    for r in &run.metrics {
        println!("{:>9}  {:>9}  {:>7}  {:>8}", r.iteration, fmt(r.train_acc), fmt(r.val_acc), r.selected);
    }
}

pub fn train(g: &Global, a: &TrainArgs) -> Outcome {
    let (covers, ids) = load_covers(&a.covers)?;
    let over = Overrides {
        iterations: a.t,
        p: a.p,
        alpha: a.alpha,
        seed: g.seed,
    };
    let cfg = resolve(&a.common, over, &covers)?;
    log::info!(
        "training T={} p={} alpha={} payload={} on {} covers",
        cfg.iterations,
        cfg.p,
        cfg.alpha,
        cfg.payload_bpnz,
        covers.len()
    );
    let run = run_training(&covers, &ids, &cfg, &a.out, oracle().as_ref())?;
    print_metrics(&run);
    println!("chain checksum {}", run.chain.checksum());
    Ok(())
}

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq)]
struct SweepRow {
    phase: u8,
    setting: String,
    p: f64,
    alpha: f64,
    iteration: usize,
    train_acc: Option<f64>,
    val_acc: Option<f64>,
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    use fmt::Write;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut s = String::from("phase,setting,p,alpha,iteration,train_acc,val_acc\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.phase,
            r.setting,
            r.p,
            r.alpha,
            r.iteration,
            fmt(r.train_acc),
            fmt(r.val_acc)
        );
    }
    s
}

fn check_grid(name: &str, grid: &[f64]) -> Outcome {
    if grid.is_empty() {
        return Err(Failure::usage(format!("{name} grid is empty")));
    }
    Ok(())
}

/// Runs one setting and returns its rows plus its final validation accuracy.
fn sweep_setting(
    covers: &[stegadv_core::CoefficientImage],
    ids: &[String],
    cfg: &RunConfig,
    dir: &Path,
    phase: u8,
    setting: &str,
) -> Result<(SweepRow, Vec<SweepRow>, f64), Failure> {
    let run = run_training(covers, ids, cfg, dir, oracle().as_ref())?;
    let row = |m: &stegadv_core::advloop::IterationMetrics, setting: &str| SweepRow {
        phase,
        setting: setting.to_string(),
        p: cfg.p,
        alpha: cfg.alpha,
        iteration: m.iteration,
        train_acc: m.train_acc,
        val_acc: m.val_acc,
    };
    let baseline = row(&run.metrics[0], "baseline");
    let rows: Vec<SweepRow> = run.metrics[1..].iter().map(|m| row(m, setting)).collect();
    let last = run.metrics.last().expect("metrics has T+1 rows");
    let score = last.val_acc.or(last.train_acc).unwrap_or(f64::INFINITY);
    log::info!("phase {phase} {setting}: final accuracy {score:.4}");
    Ok((baseline, rows, score))
}

fn best(scores: &[(f64, f64)]) -> f64 {
    scores
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, f64)>, (v, s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((v, s)),
        })
        .map(|(v, _)| v)
        .expect("grid is non-empty")
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Outcome {
    check_grid("p", &a.p_grid)?;
    check_grid("alpha", &a.alpha_grid)?;
    let (covers, ids) = load_covers(&a.covers)?;
    fs::create_dir_all(&a.out)?;
    let mut rows = Vec::new();

    let mut scores = Vec::new();
    for (k, &p) in a.p_grid.iter().enumerate() {
        let over = Overrides {
            iterations: Some(a.p_rounds),
            p: Some(p),
            alpha: Some(a.fixed_alpha),
            seed: g.seed,
        };
        let cfg = resolve(&a.common, over, &covers)?;
        let (baseline, r, score) = sweep_setting(&covers, &ids, &cfg, &a.out.join(format!("p_{k}")), 1, &format!("p={p}"))?;
        if k == 0 {
            rows.push(baseline);
        }
        rows.extend(r);
        scores.push((p, score));
    }
    let best_p = best(&scores);
    log::info!("phase 1 picks p={best_p}");

    let mut scores = Vec::new();
    for (k, &alpha) in a.alpha_grid.iter().enumerate() {
        let over = Overrides {
            iterations: Some(a.alpha_rounds),
            p: Some(best_p),
            alpha: Some(alpha),
            seed: g.seed,
        };
        let cfg = resolve(&a.common, over, &covers)?;
        let (baseline, r, score) =
            sweep_setting(&covers, &ids, &cfg, &a.out.join(format!("alpha_{k}")), 2, &format!("alpha={alpha}"))?;
        if k == 0 {
            rows.push(baseline);
        }
        rows.extend(r);
        scores.push((alpha, score));
    }
    let best_alpha = best(&scores);
    fs::write(a.out.join("sweep.csv"), sweep_csv(&rows))?;
    write_json(
        &a.out.join("best.json"),
        &serde_json::json!({ "p": best_p, "alpha": best_alpha }),
    )?;
    println!("best p={best_p} alpha={best_alpha}");
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateManifest {
    pub chain_checksum: String,
    pub iterations: usize,
    pub sigma: f64,
    pub payload_bpnz: f64,
    pub mode: EmbedMode,
    pub seed: u64,
    pub images: Vec<GeneratedImage>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeneratedImage {
    pub id: String,
    pub changed: usize,
    pub realized_bits: f64,
    pub sha256: String,
}

pub const GENERATE_FILE: &str = "generate.json";

pub fn generate(g: &Global, a: &GenerateArgs) -> Outcome {
    let chain = ModelChain::load(&a.chain)?;
    let (covers, ids) = load_covers(&a.covers)?;
    let payload = a.payload.unwrap_or(chain.payload_bpnz);
    let seed = g.seed.unwrap_or(chain.provenance.seed);
    let req = EmbedRequest::new(payload, seed, a.mode.into())?;
    let out = generate_batch(&covers, &ids, &chain, &req, oracle().as_ref())?;

    for sub in ["stegos", "costs", "changes", "audit"] {
        fs::create_dir_all(a.out.join(sub))?;
    }
    let mut images = Vec::with_capacity(out.len());
    for (id, gen) in ids.iter().zip(&out) {
        let jpeg = encode_jpeg(&gen.stego)?;
        fs::write(a.out.join("stegos").join(format!("{id}.jpg")), &jpeg)?;
        fs::write(a.out.join("costs").join(format!("{id}.scf1")), write_costs(&gen.cost)?)?;
        fs::write(a.out.join("changes").join(format!("{id}.scf1")), write_changes(&gen.changes)?)?;
        let (w, h) = gen.cost.dims();
        let masks: Vec<Vec<bool>> = gen.masks.iter().map(|m| m.selected.clone()).collect();
        fs::write(a.out.join("audit").join(format!("{id}.scf1")), write_masks(w, h, &masks)?)?;
        images.push(GeneratedImage {
            id: id.clone(),
            changed: gen.changes.count_changed(),
            realized_bits: gen.changes.realized_bits,
            sha256: sha256_hex(&jpeg),
        });
    }
    write_json(
        &a.out.join(GENERATE_FILE),
        &GenerateManifest {
            chain_checksum: chain.checksum(),
            iterations: chain.iterations,
            sigma: chain.sigma,
            payload_bpnz: payload,
            mode: req.mode,
            seed,
            images,
        },
    )?;
    log::info!("generated {} stegos", out.len());
    Ok(())
}

pub fn embed(_g: &Global, a: &EmbedArgs) -> Outcome {
    let cover = read_jpeg(&a.cover)?;
    let message = fs::read(&a.message)?;
    let cost = match &a.chain {
        None => juniward_cost(&cover, DEFAULT_SIGMA)?,
        Some(dir) => {
            let chain = ModelChain::load(dir)?;
            let ids = [stem(&a.cover)];
            let grads = chain_gradients(&chain, std::slice::from_ref(&cover), &ids, oracle().as_ref())?;
            enhanced_cost(&cover, &grads[0], &chain)?.0
        }
    };
    let bits = bytes_to_bits(&message);
    let (changes, stego) = stc_embed(&cover, &cost, &bits, a.key, a.height)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&a.out, encode_jpeg(&stego)?)?;
    println!(
        "embedded {} bytes, {} coefficients changed, {:.4} bpnz",
        message.len(),
        changes.count_changed(),
        bits.len() as f64 / count_nzac(&cover).max(1) as f64
    );
    Ok(())
}

pub fn extract(_g: &Global, a: &ExtractArgs) -> Outcome {
    let stego = read_jpeg(&a.stego)?;
    let bits = stc_extract(&stego, a.key, a.bytes * 8, a.height)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&a.out, bits_to_bytes(&bits))?;
    Ok(())
}

fn read_plane_file<T>(path: &Path, f: impl FnOnce(&[u8]) -> stegadv_core::Result<T>) -> Result<T, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    f(&bytes).map_err(|e| Failure::from(e).context(path))
}

pub fn metrics(_g: &Global, a: &MetricsArgs) -> Outcome {
    let manifest: GenerateManifest = serde_json::from_slice(&fs::read(a.generated.join(GENERATE_FILE))?)?;
    let (covers, ids) = load_jpegs(&a.covers)?;
    fs::create_dir_all(&a.out)?;
    if !a.no_overlays {
        fs::create_dir_all(a.out.join("overlays"))?;
    }
    let mut rates = Vec::new();
    let mut audits = Vec::new();
    for img in &manifest.images {
        let k = ids
            .iter()
            .position(|i| i == &img.id)
            .ok_or_else(|| Failure::data(format!("no cover for {}", img.id)))?;
        let rho0 = juniward_cost(&covers[k], manifest.sigma)?;
        let rho = read_plane_file(&a.generated.join("costs").join(format!("{}.scf1", img.id)), read_costs)?;
        rates.push((img.id.clone(), relative_modification_rate(&rho0, &rho)?));
        let (w, h, planes) = read_plane_file(&a.generated.join("audit").join(format!("{}.scf1", img.id)), read_masks)?;
        let masks = planes
            .into_iter()
            .map(|m| SelectionMask::from_bools(w, h, m))
            .collect::<stegadv_core::Result<Vec<_>>>()?;
        if !a.no_overlays {
            for (r, m) in masks.iter().enumerate() {
                write_pgm(&a.out.join("overlays").join(format!("{}_round{r}.pgm", img.id)), &selection_overlay(m))?;
            }
        }
        audits.push(masks);
    }
    let hist = modification_frequency_histogram(&audits, manifest.iterations)?;
    fs::write(a.out.join("rates.csv"), rates_csv(&rates))?;
    fs::write(a.out.join("histogram.csv"), histogram_csv(&hist))?;
    if !rates.is_empty() {
        let mean = rates.iter().map(|r| r.1).sum::<f64>() / rates.len() as f64;
        println!("mean relative modification rate {mean:.6} over {} images", rates.len());
    }
    Ok(())
}

pub const SECURITY_FILE: &str = "security.csv";

pub fn evaluate(g: &Global, a: &EvaluateArgs) -> Outcome {
    let (covers, ids) = load_covers(&a.covers)?;
    let (stego_imgs, stego_ids) = load_jpegs(&a.stegos)?;
    let mut stegos = Vec::with_capacity(covers.len());
    for id in &ids {
        let k = stego_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Failure::data(format!("no stego for cover {id}")))?;
        stegos.push(stego_imgs[k].clone());
    }
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(Failure::usage(format!("test fraction {} outside (0, 1)", a.test_fraction)));
    }
    let seed = g.seed.unwrap_or(0);
    let (train_idx, test_idx) = split_indices(covers.len(), a.test_fraction, seed);
    let pick = |v: &[stegadv_core::CoefficientImage], idx: &[usize]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    let (trc, trs) = (pick(&covers, &train_idx), pick(&stegos, &train_idx));
    let (tec, tes) = (pick(&covers, &test_idx), pick(&stegos, &test_idx));
    let mut hp = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(e) = a.epochs {
        hp.epochs = e;
    }
    let report = evaluate_security(&PairSet::new(&trc, &trs)?, &PairSet::new(&tec, &tes)?, &hp)?;
    let row = SecurityRow {
        run_id: a.run_id.clone(),
        iteration: a.iteration,
        train_acc: report.train_acc,
        test_acc: report.test_acc,
    };
    fs::create_dir_all(&a.out)?;
    let path = a.out.join(SECURITY_FILE);
    let csv = security_csv(std::slice::from_ref(&row));
    if path.exists() {
        let body = csv.split_once('\n').map_or("", |(_, rest)| rest);
        let mut old = fs::read_to_string(&path)?;
        old.push_str(body);
        fs::write(&path, old)?;
    } else {
        fs::write(&path, csv)?;
    }
    println!("train_acc {:.4} test_acc {:.4}", report.train_acc, report.test_acc);
    Ok(())
}

pub fn inspect(a: &InspectArgs) -> Outcome {
    let p = &a.path;
    if p.is_dir() {
        for name in ["config.json", "chain.json", "metrics.csv"] {
            let f = p.join(name);
            if f.exists() {
                println!("== {name}");
                print!("{}", fs::read_to_string(&f)?);
                println!();
            }
        }
        return Ok(());
    }
    let bytes = fs::read(p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
    if bytes.starts_with(&container::MAGIC) {
        let h = container::read_header(&bytes)?;
        println!("format   SCF1 v{}", h.version);
        println!("type     {}", h.kind);
        println!("width    {}", h.width);
        println!("height   {}", h.height);
        println!("planes   {}", h.planes);
        println!("aux      {} bytes", h.aux_len);
    } else if bytes.starts_with(b"SAM1") {
        let h = persist::read_header(&bytes)?;
        println!("{}", serde_json::to_string_pretty(&h)?);
    } else if bytes.starts_with(&[0xFF, 0xD8]) {
        let img = decode_jpeg(&bytes)?;
        println!("format   JPEG baseline grayscale");
        println!("width    {}", img.width());
        println!("height   {}", img.height());
        match img.quality() {
            Some(q) => println!("quality  {q}"),
            None => println!("quality  custom table"),
        }
        println!("nzAC     {}", count_nzac(&img));
    } else {
        return Err(Failure::data(format!("{}: unrecognized file type", p.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::InvalidArgument("x".into())).code(), 1);
        assert_eq!(Failure::from(Error::Container("x".into())).code(), 2);
        assert_eq!(Failure::from(Error::Numerical("x".into())).code(), 3);
    }

    #[test]
    fn best_prefers_first_of_ties() {
        assert_eq!(best(&[(0.1, 0.6), (0.2, 0.55), (0.3, 0.55)]), 0.2);
    }

    #[test]
    fn sweep_csv_blank_for_missing_accuracy() {
        let row = SweepRow {
            phase: 1,
            setting: "p=0.5".into(),
            p: 0.5,
            alpha: 2.5,
            iteration: 3,
            train_acc: Some(0.75),
            val_acc: None,
        };
        assert_eq!(
            sweep_csv(&[row]),
            "phase,setting,p,alpha,iteration,train_acc,val_acc\n1,p=0.5,0.5,2.5,3,0.750000,\n"
        );
    }
}
