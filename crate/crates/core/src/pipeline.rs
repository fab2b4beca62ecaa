//! End-to-end orchestration: one config struct holding every threshold,
//! corpus-level detection across all three detectors, and the mining stage
//! over their findings.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::hidden::{self, HiddenFinding};
use crate::mining::{self, FrequentItemset, TraderGroup, TraderPair};
use crate::model::{BlockTxn, Erc20Transfer, EventSequence, PriceTable, TokenKey};
use crate::roundtrip::{self, RoundTripFinding};
use crate::unprofitable::{self, MatchConfig, UnprofitableFinding};
use crate::windowing::{self, TimeWindow};

/// Every detection threshold in one place. Defaults are the reference
/// configuration; any field can be overridden per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DetectorConfig {
    pub initial_ati_seconds: u64,
    pub walk_threshold: u128,
    pub max_cycles: usize,
    pub eth_window_minutes: i64,
    pub erc20_window_minutes: i64,
    pub bidirectional_transfers: bool,
    pub hidden_min_len: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            initial_ati_seconds: windowing::DEFAULT_INITIAL_ATI_SECS,
            walk_threshold: roundtrip::DEFAULT_WALK_THRESHOLD,
            max_cycles: roundtrip::DEFAULT_MAX_CYCLES,
            eth_window_minutes: unprofitable::DEFAULT_ETH_WINDOW_MINUTES,
            erc20_window_minutes: unprofitable::DEFAULT_ERC20_WINDOW_MINUTES,
            bidirectional_transfers: false,
            hidden_min_len: hidden::DEFAULT_HIDDEN_MIN_LEN,
        }
    }
}

impl DetectorConfig {
    fn match_config(&self) -> MatchConfig {
        MatchConfig {
            eth_window_minutes: self.eth_window_minutes,
            erc20_window_minutes: self.erc20_window_minutes,
            bidirectional: self.bidirectional_transfers,
        }
    }
}

/// Output of all three detectors over one corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FindingSet {
    pub round_trip: Vec<RoundTripFinding>,
    pub unprofitable: Vec<UnprofitableFinding>,
    pub hidden: Vec<HiddenFinding>,
}

impl FindingSet {
    pub fn total(&self) -> usize {
        self.round_trip.len() + self.unprofitable.len() + self.hidden.len()
    }
}

/// A token's window segmentation, kept alongside the findings so analytics
/// can reason about window transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TokenWindows {
    #[serde(flatten)]
    pub token_key: TokenKey,
    pub windows: Vec<TimeWindow>,
}

/// Chain-derived canonical timestamps keyed by transaction hash. Block
/// transactions win over ERC-20 rows for hashes present in both.
pub fn canon_timestamps(
    block_txns: &[BlockTxn],
    erc20_txns: &[Erc20Transfer],
) -> HashMap<String, DateTime<Utc>> {
    let mut map = HashMap::new();
    for t in erc20_txns {
        map.insert(t.hash.clone(), t.timestamp);
    }
    for t in block_txns {
        map.insert(t.hash.clone(), t.timestamp);
    }
    map
}

/// Segment every sequence, ordered as the corpus is.
pub fn segment_corpus(corpus: &[EventSequence], initial_ati_seconds: u64) -> Vec<TokenWindows> {
    corpus
        .par_iter()
        .map(|seq| TokenWindows {
            token_key: TokenKey::new(&seq.collection, &seq.token_id),
            windows: windowing::segment_windows(seq, initial_ati_seconds),
        })
        .collect()
}

/// Run all three detectors. Findings keep corpus order within each type,
/// so identical inputs serialize identically.
pub fn detect_corpus(
    corpus: &[EventSequence],
    windows: &[TokenWindows],
    block_txns: &[BlockTxn],
    erc20_txns: &[Erc20Transfer],
    prices: &PriceTable,
    config: &DetectorConfig,
) -> Result<FindingSet, DataError> {
    if corpus.len() != windows.len() {
        return Err(DataError::Invalid(format!(
            "corpus has {} sequences but {} window sets",
            corpus.len(),
            windows.len()
        )));
    }

    let round_trip: Vec<RoundTripFinding> = corpus
        .par_iter()
        .zip(windows.par_iter())
        .flat_map(|(seq, tw)| {
            roundtrip::detect_roundtrip(
                seq,
                &tw.windows,
                config.walk_threshold,
                config.max_cycles,
                prices,
            )
        })
        .collect();

    let unprofitable = unprofitable::detect_unprofitable(
        corpus,
        block_txns,
        erc20_txns,
        &config.match_config(),
        prices,
    );

    let hidden: Vec<HiddenFinding> = corpus
        .par_iter()
        .flat_map(|seq| hidden::find_private_runs(seq, config.hidden_min_len, prices))
        .collect();

    Ok(FindingSet {
        round_trip,
        unprofitable,
        hidden,
    })
}

/// Mining stage output: the frequent itemsets plus the derived pairs and
/// merged groups, with the thresholds that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MiningReport {
    pub transaction_rows: usize,
    pub min_count: usize,
    pub frequent_itemsets: Vec<FrequentItemset>,
    pub pairs: Vec<TraderPair>,
    pub groups: Vec<TraderGroup>,
}

/// Mine trader pairs and groups from a finding set. `min_count` overrides
/// the relative support when given.
pub fn mine_findings(
    findings: &FindingSet,
    relative_support: Decimal,
    min_count: Option<usize>,
) -> Result<MiningReport, DataError> {
    let rows = mining::build_itemsets(
        &findings.round_trip,
        &findings.unprofitable,
        &findings.hidden,
    );
    if rows.is_empty() {
        return Err(DataError::Invalid(
            "no mineable findings: every finding is empty or single-address".into(),
        ));
    }
    let min_count = match min_count {
        Some(c) => c.max(1),
        None => mining::support_threshold(rows.len(), relative_support)?,
    };
    let frequent_itemsets = mining::fp_growth_min_count(&rows, min_count)?;
    let pairs = mining::derive_pairs(&frequent_itemsets, &rows);
    let groups = mining::merge_groups(&pairs, &rows);
    Ok(MiningReport {
        transaction_rows: rows.len(),
        min_count,
        frequent_itemsets,
        pairs,
        groups,
    })
}
