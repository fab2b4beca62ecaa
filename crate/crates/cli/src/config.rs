//! Config resolution: command-line flags over config-file keys over
//! built-in defaults. The config file is one flat JSON object; every key
//! has a flag twin and unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use washtrade_core::analytics::{AnalysisConfig, DEFAULT_FEE_RATE, DEFAULT_PF_THRESHOLD};
use washtrade_core::mining::DEFAULT_RELATIVE_SUPPORT;
use washtrade_core::model::Address;
use washtrade_core::pipeline::DetectorConfig;

use crate::CliError;

/// Config-file shape: every field optional, flags fill the rest.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct FileConfig {
    pub events: Option<PathBuf>,
    pub block_txns: Option<PathBuf>,
    pub erc_txns: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub canon_timestamps: Option<PathBuf>,
    pub marketplace_contracts: Option<Vec<String>>,
    pub initial_ati_seconds: Option<u64>,
    pub walk_threshold: Option<u128>,
    pub max_cycles: Option<usize>,
    pub eth_window_min: Option<i64>,
    pub erc20_window_min: Option<i64>,
    pub bidirectional: Option<bool>,
    pub hidden_min_len: Option<usize>,
    pub support: Option<Decimal>,
    pub min_count: Option<usize>,
    pub fee_rate: Option<Decimal>,
    pub pf_threshold: Option<Decimal>,
    pub exclude_collection: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Flag twins of every config key. All global, so each subcommand accepts
/// the full set.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct GlobalOpts {
    /// Flat JSON config file; flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Marketplace events CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub events: Option<PathBuf>,

    /// Block transactions CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub block_txns: Option<PathBuf>,

    /// ERC-20 transfers CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub erc_txns: Option<PathBuf>,

    /// Daily USD prices CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub prices: Option<PathBuf>,

    /// Canonical hash-to-timestamp CSV overriding event timestamps.
    #[arg(long, global = true, value_name = "FILE")]
    pub canon_timestamps: Option<PathBuf>,

    /// Marketplace contract address to collapse; repeatable.
    #[arg(long = "marketplace-contract", global = true, value_name = "ADDR")]
    pub marketplace_contracts: Vec<String>,

    /// Initial average time interval for windowing, in seconds.
    #[arg(long = "initial-ati", global = true, value_name = "SECONDS")]
    pub initial_ati_seconds: Option<u64>,

    /// Closed-walk count at which a window is flagged.
    #[arg(long, global = true, value_name = "N")]
    pub walk_threshold: Option<u128>,

    /// Cap on enumerated cycles per window.
    #[arg(long, global = true, value_name = "N")]
    pub max_cycles: Option<usize>,

    /// ETH transfer match window around a sale, in minutes.
    #[arg(long, global = true, value_name = "MINUTES")]
    pub eth_window_min: Option<i64>,

    /// ERC-20 transfer match window around a sale, in minutes.
    #[arg(long, global = true, value_name = "MINUTES")]
    pub erc20_window_min: Option<i64>,

    /// Also match buyer-to-seller transfers.
    #[arg(long, global = true, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub bidirectional: Option<bool>,

    /// Minimum consecutive private sales for a hidden run.
    #[arg(long, global = true, value_name = "N")]
    pub hidden_min_len: Option<usize>,

    /// Relative support for itemset mining, in (0, 1].
    #[arg(long, global = true, value_name = "FRACTION")]
    pub support: Option<Decimal>,

    /// Absolute support count overriding --support.
    #[arg(long, global = true, value_name = "N")]
    pub min_count: Option<usize>,

    /// Marketplace fee rate for profitability accounting.
    #[arg(long, global = true, value_name = "FRACTION")]
    pub fee_rate: Option<Decimal>,

    /// Price fluctuation ratio marking a suspicious sag.
    #[arg(long, global = true, value_name = "RATIO")]
    pub pf_threshold: Option<Decimal>,

    /// Collection slug to drop from trend analytics.
    #[arg(long, global = true, value_name = "SLUG")]
    pub exclude_collection: Option<String>,

    /// Artifact directory shared by all stages.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for per-token stages.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

/// Fully resolved settings, echoed verbatim into every stage manifest.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EffectiveConfig {
    pub events: Option<PathBuf>,
    pub block_txns: Option<PathBuf>,
    pub erc_txns: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub canon_timestamps: Option<PathBuf>,
    pub marketplace_contracts: Vec<String>,
    pub initial_ati_seconds: u64,
    pub walk_threshold: u128,
    pub max_cycles: usize,
    pub eth_window_min: i64,
    pub erc20_window_min: i64,
    pub bidirectional: bool,
    pub hidden_min_len: usize,
    pub support: Decimal,
    pub min_count: Option<usize>,
    pub fee_rate: Decimal,
    pub pf_threshold: Decimal,
    pub exclude_collection: Option<String>,
    pub out: PathBuf,
    pub jobs: Option<usize>,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Merge flags over file keys over defaults, then validate.
pub fn resolve(flags: &GlobalOpts, file: FileConfig) -> Result<EffectiveConfig, CliError> {
    let defaults = DetectorConfig::default();
    let cfg = EffectiveConfig {
        events: flags.events.clone().or(file.events),
        block_txns: flags.block_txns.clone().or(file.block_txns),
        erc_txns: flags.erc_txns.clone().or(file.erc_txns),
        prices: flags.prices.clone().or(file.prices),
        canon_timestamps: flags.canon_timestamps.clone().or(file.canon_timestamps),
        marketplace_contracts: if flags.marketplace_contracts.is_empty() {
            file.marketplace_contracts.unwrap_or_default()
        } else {
            flags.marketplace_contracts.clone()
        },
        initial_ati_seconds: flags
            .initial_ati_seconds
            .or(file.initial_ati_seconds)
            .unwrap_or(defaults.initial_ati_seconds),
        walk_threshold: flags
            .walk_threshold
            .or(file.walk_threshold)
            .unwrap_or(defaults.walk_threshold),
        max_cycles: flags.max_cycles.or(file.max_cycles).unwrap_or(defaults.max_cycles),
        eth_window_min: flags
            .eth_window_min
            .or(file.eth_window_min)
            .unwrap_or(defaults.eth_window_minutes),
        erc20_window_min: flags
            .erc20_window_min
            .or(file.erc20_window_min)
            .unwrap_or(defaults.erc20_window_minutes),
        bidirectional: flags
            .bidirectional
            .or(file.bidirectional)
            .unwrap_or(defaults.bidirectional_transfers),
        hidden_min_len: flags
            .hidden_min_len
            .or(file.hidden_min_len)
            .unwrap_or(defaults.hidden_min_len),
        support: flags
            .support
            .or(file.support)
            .unwrap_or_else(|| Decimal::from_str_exact(DEFAULT_RELATIVE_SUPPORT).unwrap()),
        min_count: flags.min_count.or(file.min_count),
        fee_rate: flags
            .fee_rate
            .or(file.fee_rate)
            .unwrap_or_else(|| Decimal::from_str_exact(DEFAULT_FEE_RATE).unwrap()),
        pf_threshold: flags
            .pf_threshold
            .or(file.pf_threshold)
            .unwrap_or_else(|| Decimal::from_str_exact(DEFAULT_PF_THRESHOLD).unwrap()),
        exclude_collection: flags
            .exclude_collection
            .clone()
            .or(file.exclude_collection),
        out: flags
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("artifacts")),
        jobs: flags.jobs.or(file.jobs),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &EffectiveConfig) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::Validation(msg));
    if cfg.initial_ati_seconds == 0 {
        return bad("initial ATI must be positive".into());
    }
    if cfg.walk_threshold == 0 {
        return bad("walk threshold must be positive".into());
    }
    if cfg.max_cycles == 0 {
        return bad("cycle cap must be positive".into());
    }
    if cfg.eth_window_min <= 0 || cfg.erc20_window_min <= 0 {
        return bad("transfer match windows must be positive".into());
    }
    if cfg.hidden_min_len == 0 {
        return bad("hidden run length must be positive".into());
    }
    if cfg.support <= Decimal::ZERO || cfg.support > Decimal::ONE {
        return bad(format!("support {} outside (0, 1]", cfg.support));
    }
    if cfg.min_count == Some(0) {
        return bad("min count must be positive".into());
    }
    if cfg.fee_rate < Decimal::ZERO || cfg.fee_rate >= Decimal::ONE {
        return bad(format!("fee rate {} outside [0, 1)", cfg.fee_rate));
    }
    if cfg.pf_threshold <= Decimal::ZERO {
        return bad(format!("fluctuation threshold {} must be positive", cfg.pf_threshold));
    }
    if cfg.jobs == Some(0) {
        return bad("jobs must be positive".into());
    }
    Ok(())
}

impl EffectiveConfig {
    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            initial_ati_seconds: self.initial_ati_seconds,
            walk_threshold: self.walk_threshold,
            max_cycles: self.max_cycles,
            eth_window_minutes: self.eth_window_min,
            erc20_window_minutes: self.erc20_window_min,
            bidirectional_transfers: self.bidirectional,
            hidden_min_len: self.hidden_min_len,
        }
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            fee_rate: self.fee_rate,
            pf_threshold: self.pf_threshold,
            exclude_collection: self.exclude_collection.clone(),
            ..AnalysisConfig::default()
        }
    }

    pub fn marketplace_addresses(&self) -> Result<BTreeSet<Address>, CliError> {
        self.marketplace_contracts
            .iter()
            .map(|raw| {
                Address::parse(raw)
                    .map_err(|e| CliError::Validation(format!("marketplace contract {raw}: {e}")))
            })
            .collect()
    }
}
