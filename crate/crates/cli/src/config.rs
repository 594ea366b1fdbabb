use std::path::Path;

use serde::Deserialize;
use stegadv_core::advloop::RunConfig;
use stegadv_core::analyzer::TrainConfig;
use stegadv_core::CoefficientImage;

use crate::commands::Failure;
use crate::LoopArgs;

/// Run settings as they may appear in a `--config` file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub qf: Option<u8>,
    #[serde(alias = "T")]
    pub iterations: Option<usize>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(alias = "payload")]
    pub payload_bpnz: Option<f64>,
    pub seed: Option<u64>,
    pub validation_fraction: Option<f64>,
    pub sigma: Option<f64>,
    pub train: Option<TrainConfig>,
}

impl ConfigFile {
    pub fn read(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let bytes = std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }
}

/// The quality factor every cover shares, recovered from its table.
pub fn covers_quality(covers: &[CoefficientImage]) -> Result<u8, Failure> {
    let mut found = None;
    for c in covers {
        match (c.quality(), found) {
            (None, _) => {
                return Err(Failure::usage("covers use a non-IJG table; pass --qf"));
            }
            (Some(q), Some(f)) if q != f => {
                return Err(Failure::usage(format!("covers mix quality factors {f} and {q}; pass --qf")));
            }
            (Some(q), _) => found = Some(q),
        }
    }
    found.ok_or_else(|| Failure::usage("no covers"))
}

/// Explicit per-run overrides that are not part of [`LoopArgs`].
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub iterations: Option<usize>,
    pub p: Option<f64>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
}

/// Flags over the config file over the defaults for the quality factor.
pub fn resolve(
    args: &LoopArgs,
    over: Overrides,
    covers: &[CoefficientImage],
) -> Result<RunConfig, Failure> {
    let file = ConfigFile::read(args.config.as_deref())?;
    let qf = match args.qf.or(file.qf) {
        Some(q) if (1..=100).contains(&q) => q,
        Some(q) => return Err(Failure::usage(format!("quality factor {q} outside [1, 100]"))),
        None => covers_quality(covers)?,
    };
    let mut cfg = RunConfig::for_quality(qf);
    if let Some(t) = file.train {
        cfg.train = t;
    }
    macro_rules! layer {
        ($($field:ident <- $($src:expr),+;)*) => {
            $( $( if let Some(v) = $src { cfg.$field = v; } )+ )*
        };
    }
    layer! {
        iterations <- file.iterations, over.iterations;
        p <- file.p, over.p;
        alpha <- file.alpha, over.alpha;
        payload_bpnz <- file.payload_bpnz, args.payload;
        seed <- file.seed, over.seed;
        validation_fraction <- file.validation_fraction, args.validation_fraction;
        sigma <- file.sigma;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = args.learning_rate {
        cfg.train.learning_rate = lr;
    }
    cfg.validate()?;
    Ok(cfg)
}
