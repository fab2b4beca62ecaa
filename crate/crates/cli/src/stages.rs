//! The six pipeline stages. Each reads its inputs, writes its artifacts
//! into the shared output directory, and records a manifest; later stages
//! refuse to run before their predecessors' artifacts exist.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use washtrade_core::analytics;
use washtrade_core::model::{BlockTxn, Erc20Transfer, EventSequence, PriceTable};
use washtrade_core::parse;
use washtrade_core::pipeline::{
    self, DetectorConfig, FindingSet, MiningReport, TokenWindows,
};
use washtrade_core::roundtrip;
use washtrade_core::synthgen::{self, ScenarioSpec};

use crate::config::EffectiveConfig;
use crate::CliError;

pub const PREPROCESSED_EVENTS: &str = "preprocessed_events.csv";
pub const CLEAN_REPORT: &str = "clean_report.json";
pub const WINDOWS: &str = "windows.json";
pub const FINDINGS: &str = "findings.json";
pub const PAIRS_GROUPS: &str = "pairs_groups.json";
pub const REPORT: &str = "report.json";

/// Per-stage provenance: effective settings, input digests, outputs. No
/// clocks, so identical runs write identical manifests.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    stage: &'a str,
    tool_version: &'a str,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    effective_config: &'a EffectiveConfig,
}

struct StageRun<'a> {
    stage: &'a str,
    cfg: &'a EffectiveConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl<'a> StageRun<'a> {
    fn new(stage: &'a str, cfg: &'a EffectiveConfig) -> Result<StageRun<'a>, CliError> {
        std::fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
        Ok(StageRun {
            stage,
            cfg,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        self.inputs
            .insert(path.display().to_string(), format!("sha256:{digest:x}"));
        Ok(())
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.cfg.out.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
        body.push('\n');
        self.write_bytes(name, body.as_bytes())
    }

    fn finish(mut self) -> Result<(), CliError> {
        let manifest = Manifest {
            stage: self.stage,
            tool_version: env!("CARGO_PKG_VERSION"),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            effective_config: self.cfg,
        };
        let name = format!("manifest_{}.json", self.stage.replace('-', "_"));
        let mut body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
        body.push('\n');
        let path = self.cfg.out.join(&name);
        std::fs::write(&path, body)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// A later stage asking for an artifact an earlier stage has not written.
fn require_artifact(cfg: &EffectiveConfig, name: &str, producer: &str) -> Result<PathBuf, CliError> {
    let path = cfg.out.join(name);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "stage order: {} not found in {}; run `{producer}` first",
            name,
            cfg.out.display()
        )));
    }
    Ok(path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn require_input<'a>(path: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| {
        CliError::Validation(format!("no {what} input: pass {flag} or set it in the config"))
    })
}

fn check_exists(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "{}: file does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn log_skips(label: &str, skipped: &[parse::RowSkip]) {
    for skip in skipped {
        log::warn!("{label} line {}: {} (row skipped)", skip.line, skip.reason);
    }
}

/// Optional side inputs shared by `detect` and `analyze`.
fn load_side_inputs(
    run: &mut StageRun,
) -> Result<(Vec<BlockTxn>, Vec<Erc20Transfer>, PriceTable), CliError> {
    let mut block_txns = Vec::new();
    let mut erc20_txns = Vec::new();
    let mut prices = PriceTable::new();
    if let Some(path) = run.cfg.block_txns.clone() {
        check_exists(&path)?;
        run.record_input(&path)?;
        let parsed = parse::read_block_txns_path(&path)?;
        log_skips("block transactions", &parsed.skipped);
        block_txns = parsed.value;
    }
    if let Some(path) = run.cfg.erc_txns.clone() {
        check_exists(&path)?;
        run.record_input(&path)?;
        let parsed = parse::read_erc20_txns_path(&path)?;
        log_skips("ERC-20 transfers", &parsed.skipped);
        erc20_txns = parsed.value;
    }
    if let Some(path) = run.cfg.prices.clone() {
        check_exists(&path)?;
        run.record_input(&path)?;
        let parsed = parse::read_prices_path(&path)?;
        log_skips("prices", &parsed.skipped);
        prices = parsed.value;
    }
    for t in &erc20_txns {
        prices.register_symbol(&t.token_symbol, t.token_contract.as_str());
    }
    Ok((block_txns, erc20_txns, prices))
}

/// hash,timestamp rows overriding event timestamps during cleaning.
fn read_canon_csv(path: &Path) -> Result<HashMap<String, DateTime<Utc>>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = raw.lines();
    match lines.next() {
        Some("hash,timestamp") => {}
        _ => {
            return Err(CliError::Validation(format!(
                "{}: expected header `hash,timestamp`",
                path.display()
            )))
        }
    }
    let mut map = HashMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (hash, ts) = line.split_once(',').ok_or_else(|| {
            CliError::Validation(format!("{} line {}: expected 2 fields", path.display(), i + 2))
        })?;
        let ts = parse::parse_timestamp(ts).map_err(|e| {
            CliError::Validation(format!("{} line {}: {e}", path.display(), i + 2))
        })?;
        map.insert(hash.to_string(), ts);
    }
    Ok(map)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct PreprocessReport {
    #[serde(flatten)]
    clean: washtrade_core::preprocess::CleanReport,
    rows_skipped_on_parse: usize,
}

pub fn preprocess(cfg: &EffectiveConfig) -> Result<(), CliError> {
    let mut run = StageRun::new("preprocess", cfg)?;
    let events_path = require_input(&cfg.events, "events", "--events")?.to_path_buf();
    check_exists(&events_path)?;
    run.record_input(&events_path)?;
    let parsed = parse::read_events_path(&events_path)?;
    log_skips("events", &parsed.skipped);

    // Canonical timestamps: an explicit hash,timestamp file wins; otherwise
    // derive them from the raw transaction inputs when present.
    let canon: Option<HashMap<String, DateTime<Utc>>> =
        if let Some(path) = cfg.canon_timestamps.clone() {
            check_exists(&path)?;
            run.record_input(&path)?;
            Some(read_canon_csv(&path)?)
        } else {
            let mut block_txns = Vec::new();
            let mut erc20_txns = Vec::new();
            if let Some(path) = cfg.block_txns.clone() {
                check_exists(&path)?;
                run.record_input(&path)?;
                block_txns = parse::read_block_txns_path(&path)?.value;
            }
            if let Some(path) = cfg.erc_txns.clone() {
                check_exists(&path)?;
                run.record_input(&path)?;
                erc20_txns = parse::read_erc20_txns_path(&path)?.value;
            }
            (!block_txns.is_empty() || !erc20_txns.is_empty())
                .then(|| pipeline::canon_timestamps(&block_txns, &erc20_txns))
        };

    let marketplace = cfg.marketplace_addresses()?;
    let (cleaned, report) = washtrade_core::preprocess::clean_corpus(
        &parsed.value,
        canon.as_ref(),
        &marketplace,
    )?;

    let mut csv = Vec::new();
    parse::write_events(&mut csv, &cleaned)
        .map_err(|e| CliError::Io(format!("{PREPROCESSED_EVENTS}: {e}")))?;
    run.write_bytes(PREPROCESSED_EVENTS, &csv)?;
    run.write_json(
        CLEAN_REPORT,
        &PreprocessReport {
            clean: report,
            rows_skipped_on_parse: parsed.skipped.len(),
        },
    )?;
    run.finish()
}

fn load_preprocessed(run: &mut StageRun) -> Result<Vec<EventSequence>, CliError> {
    let path = require_artifact(run.cfg, PREPROCESSED_EVENTS, "preprocess")?;
    run.record_input(&path)?;
    let parsed = parse::read_events_path(&path)?;
    log_skips("preprocessed events", &parsed.skipped);
    Ok(parsed.value)
}

pub fn detect(cfg: &EffectiveConfig) -> Result<(), CliError> {
    let mut run = StageRun::new("detect", cfg)?;
    let corpus = load_preprocessed(&mut run)?;
    let (block_txns, erc20_txns, prices) = load_side_inputs(&mut run)?;

    let detector: DetectorConfig = cfg.detector_config();
    let windows = pipeline::segment_corpus(&corpus, detector.initial_ati_seconds);
    let findings: FindingSet = pipeline::detect_corpus(
        &corpus,
        &windows,
        &block_txns,
        &erc20_txns,
        &prices,
        &detector,
    )?;
    log::info!(
        "{} round-trip, {} unprofitable, {} hidden findings",
        findings.round_trip.len(),
        findings.unprofitable.len(),
        findings.hidden.len()
    );

    run.write_json(WINDOWS, &windows)?;
    run.write_json(FINDINGS, &findings)?;
    run.finish()
}

pub fn mine(cfg: &EffectiveConfig) -> Result<(), CliError> {
    let mut run = StageRun::new("mine", cfg)?;
    let path = require_artifact(cfg, FINDINGS, "detect")?;
    run.record_input(&path)?;
    let findings: FindingSet = read_json(&path)?;

    let report: MiningReport = pipeline::mine_findings(&findings, cfg.support, cfg.min_count)?;
    log::info!(
        "{} frequent itemsets, {} pairs, {} groups at support count {}",
        report.frequent_itemsets.len(),
        report.pairs.len(),
        report.groups.len(),
        report.min_count
    );
    run.write_json(PAIRS_GROUPS, &report)?;
    run.finish()
}

pub fn analyze(cfg: &EffectiveConfig) -> Result<(), CliError> {
    let mut run = StageRun::new("analyze", cfg)?;
    let corpus = load_preprocessed(&mut run)?;
    let windows_path = require_artifact(cfg, WINDOWS, "detect")?;
    run.record_input(&windows_path)?;
    let windows: Vec<TokenWindows> = read_json(&windows_path)?;
    let findings_path = require_artifact(cfg, FINDINGS, "detect")?;
    run.record_input(&findings_path)?;
    let findings: FindingSet = read_json(&findings_path)?;

    // Pair/group mining refines the report but is not required for it.
    let mining: Option<MiningReport> = {
        let path = cfg.out.join(PAIRS_GROUPS);
        if path.exists() {
            run.record_input(&path)?;
            Some(read_json(&path)?)
        } else {
            None
        }
    };

    let (_, _, prices) = load_side_inputs(&mut run)?;
    let report = analytics::full_report(
        &corpus,
        &windows,
        &findings,
        mining.as_ref(),
        &prices,
        &cfg.analysis_config(),
    );

    run.write_json(REPORT, &report)?;
    run.write_bytes("trend.csv", analytics::trend_csv(&report.trend).as_bytes())?;
    run.write_bytes(
        "histogram.csv",
        analytics::histogram_csv(&report.eth_transfer_histogram).as_bytes(),
    )?;
    run.write_bytes(
        "gain_loss.csv",
        analytics::gain_loss_csv(&report.profitability.cases).as_bytes(),
    )?;
    run.write_bytes(
        "price_deltas.csv",
        analytics::price_deltas_csv(&report.profitability.per_step_price_deltas).as_bytes(),
    )?;
    run.finish()
}

pub fn synth(cfg: &EffectiveConfig, spec_path: &Path) -> Result<(), CliError> {
    let mut run = StageRun::new("synth", cfg)?;
    check_exists(spec_path)?;
    run.record_input(spec_path)?;
    let spec: ScenarioSpec = read_json(spec_path)?;
    let corpus = synthgen::generate(&spec)?;

    let mut events = Vec::new();
    parse::write_events(&mut events, &corpus.sequences)
        .map_err(|e| CliError::Io(format!("events.csv: {e}")))?;
    run.write_bytes("events.csv", &events)?;

    let mut block = Vec::new();
    parse::write_block_txns(&mut block, &corpus.block_txns)
        .map_err(|e| CliError::Io(format!("block_txns.csv: {e}")))?;
    run.write_bytes("block_txns.csv", &block)?;

    let mut erc20 = Vec::new();
    parse::write_erc20_txns(&mut erc20, &corpus.erc20_txns)
        .map_err(|e| CliError::Io(format!("erc20_txns.csv: {e}")))?;
    run.write_bytes("erc20_txns.csv", &erc20)?;

    let mut prices = Vec::new();
    parse::write_prices(&mut prices, &corpus.prices)
        .map_err(|e| CliError::Io(format!("prices.csv: {e}")))?;
    run.write_bytes("prices.csv", &prices)?;

    run.write_json("labels.json", &corpus.labels)?;
    run.finish()
}

fn dot_file_name(finding: &roundtrip::RoundTripFinding) -> String {
    let sanitize = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect()
    };
    format!(
        "graph_{}_{}_w{}.dot",
        sanitize(&finding.token_key.collection),
        sanitize(&finding.token_key.token_id),
        finding.window_index
    )
}

pub fn export_graph(
    cfg: &EffectiveConfig,
    collection: Option<&str>,
    token_id: Option<&str>,
) -> Result<(), CliError> {
    let mut run = StageRun::new("export-graph", cfg)?;
    let corpus = load_preprocessed(&mut run)?;
    let windows_path = require_artifact(cfg, WINDOWS, "detect")?;
    run.record_input(&windows_path)?;
    let windows: Vec<TokenWindows> = read_json(&windows_path)?;
    let findings_path = require_artifact(cfg, FINDINGS, "detect")?;
    run.record_input(&findings_path)?;
    let findings: FindingSet = read_json(&findings_path)?;

    let seq_index: BTreeMap<_, _> = corpus
        .iter()
        .map(|s| (s.token_key(), s))
        .collect();
    let window_index: BTreeMap<_, _> = windows
        .iter()
        .map(|w| (w.token_key.clone(), &w.windows))
        .collect();

    let mut written = 0usize;
    for finding in &findings.round_trip {
        if collection.is_some_and(|c| c != finding.token_key.collection)
            || token_id.is_some_and(|t| t != finding.token_key.token_id)
        {
            continue;
        }
        let seq = seq_index.get(&finding.token_key).ok_or_else(|| {
            CliError::Validation(format!(
                "findings refer to {} which is missing from {PREPROCESSED_EVENTS}",
                finding.token_key
            ))
        })?;
        let window = window_index
            .get(&finding.token_key)
            .and_then(|ws| ws.get(finding.window_index))
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "findings refer to {} window {} which is missing from {WINDOWS}",
                    finding.token_key, finding.window_index
                ))
            })?;
        let graph = roundtrip::build_graph(seq, window);
        run.write_bytes(&dot_file_name(finding), roundtrip::graph_dot(&graph, seq).as_bytes())?;
        written += 1;
    }
    log::info!("wrote {written} graph files");
    run.finish()
}
