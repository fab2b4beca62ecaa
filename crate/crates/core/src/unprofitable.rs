//! Unprofitable-trading detection: sale events where the seller moves money
//! to the buyer out of band, before the sale (funding the purchase) or
//! after it (returning the proceeds).
//!
//! Two evidence sources are matched against each sale: plain ETH transfers
//! (block transactions with empty input data) within 20 minutes, and ERC-20
//! transfers within 80 minutes. Both bounds are inclusive and symmetric
//! around the sale timestamp.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{
    sale_usd, Address, BlockTxn, Erc20Transfer, EventRecord, EventSequence, PriceTable, TokenKey,
};

pub const DEFAULT_ETH_WINDOW_MINUTES: i64 = 20;
pub const DEFAULT_ERC20_WINDOW_MINUTES: i64 = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceKind {
    Eth,
    Erc20,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvidenceDirection {
    #[serde(rename = "funding-before")]
    FundingBefore,
    #[serde(rename = "restitution-after")]
    RestitutionAfter,
}

/// One value transfer tied to a sale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evidence {
    pub txn_hash: String,
    pub kind: EvidenceKind,
    pub direction: EvidenceDirection,
    pub timestamp: DateTime<Utc>,
    /// "ETH" for block transfers, the token symbol for ERC-20.
    pub token: String,
    pub amount: Decimal,
    pub usd: Option<Decimal>,
}

/// A sale with at least one matched value transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnprofitableFinding {
    #[serde(flatten)]
    pub token_key: TokenKey,
    /// Index of the sale record in the parent sequence.
    pub sale_index: usize,
    pub seller: Address,
    pub buyer: Address,
    pub sale_timestamp: DateTime<Utc>,
    pub sale_txn_hash: Option<String>,
    pub sale_usd: Option<Decimal>,
    pub evidence: Vec<Evidence>,
    /// Sum of evidence USD values where resolvable.
    pub total_evidence_usd: Decimal,
}

/// Shared knobs for the matchers.
#[derive(Debug, Clone, Copy)]
pub struct MatchConfig {
    pub eth_window_minutes: i64,
    pub erc20_window_minutes: i64,
    /// Accept buyer-to-seller transfers too. Off by default: the pattern
    /// is the seller funding or refunding the buyer.
    pub bidirectional: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            eth_window_minutes: DEFAULT_ETH_WINDOW_MINUTES,
            erc20_window_minutes: DEFAULT_ERC20_WINDOW_MINUTES,
            bidirectional: false,
        }
    }
}

fn address_rule(sale: &EventRecord, from: &Address, to: &Address, bidirectional: bool) -> bool {
    (*from == sale.from && *to == sale.to)
        || (bidirectional && *from == sale.to && *to == sale.from)
}

fn within(sale_ts: DateTime<Utc>, txn_ts: DateTime<Utc>, minutes: i64) -> bool {
    (txn_ts - sale_ts).num_seconds().abs() <= minutes * 60
}

fn direction_of(sale_ts: DateTime<Utc>, txn_ts: DateTime<Utc>) -> EvidenceDirection {
    if txn_ts < sale_ts {
        EvidenceDirection::FundingBefore
    } else {
        EvidenceDirection::RestitutionAfter
    }
}

/// Match plain ETH transfers against one sale. Only transactions with empty
/// input data qualify: anything that invokes a contract is not the direct
/// payment shuffle this detector targets.
pub fn match_eth(
    sale: &EventRecord,
    txns: &[BlockTxn],
    window_minutes: i64,
    bidirectional: bool,
    prices: &PriceTable,
) -> Vec<Evidence> {
    debug_assert!(sale.is_sale());
    txns.iter()
        .filter(|t| t.is_pure_eth_transfer())
        .filter(|t| address_rule(sale, &t.from, &t.to, bidirectional))
        .filter(|t| within(sale.timestamp, t.timestamp, window_minutes))
        .map(|t| {
            let amount = t.value_eth();
            Evidence {
                txn_hash: t.hash.clone(),
                kind: EvidenceKind::Eth,
                direction: direction_of(sale.timestamp, t.timestamp),
                timestamp: t.timestamp,
                token: "ETH".to_string(),
                amount,
                usd: prices.usd_value("ETH", amount, t.timestamp, None),
            }
        })
        .collect()
}

/// Match ERC-20 transfers against one sale. Tokens without price data keep
/// their evidence with the USD value absent.
pub fn match_erc20(
    sale: &EventRecord,
    txns: &[Erc20Transfer],
    window_minutes: i64,
    bidirectional: bool,
    prices: &PriceTable,
) -> Vec<Evidence> {
    debug_assert!(sale.is_sale());
    txns.iter()
        .filter(|t| address_rule(sale, &t.from, &t.to, bidirectional))
        .filter(|t| within(sale.timestamp, t.timestamp, window_minutes))
        .map(|t| Evidence {
            txn_hash: t.hash.clone(),
            kind: EvidenceKind::Erc20,
            direction: direction_of(sale.timestamp, t.timestamp),
            timestamp: t.timestamp,
            token: t.token_symbol.clone(),
            amount: t.amount,
            usd: prices.usd_value(t.token_contract.as_str(), t.amount, t.timestamp, None),
        })
        .collect()
}

/// Pair-keyed, time-sorted view of the transfer corpora so each sale only
/// scans its own candidates.
pub struct TransferIndex<'a> {
    eth: HashMap<(&'a Address, &'a Address), Vec<&'a BlockTxn>>,
    erc20: HashMap<(&'a Address, &'a Address), Vec<&'a Erc20Transfer>>,
}

impl<'a> TransferIndex<'a> {
    pub fn build(block_txns: &'a [BlockTxn], erc20_txns: &'a [Erc20Transfer]) -> Self {
        let mut eth: HashMap<_, Vec<&BlockTxn>> = HashMap::new();
        for t in block_txns.iter().filter(|t| t.is_pure_eth_transfer()) {
            eth.entry((&t.from, &t.to)).or_default().push(t);
        }
        let mut erc20: HashMap<_, Vec<&Erc20Transfer>> = HashMap::new();
        for t in erc20_txns {
            erc20.entry((&t.from, &t.to)).or_default().push(t);
        }
        for list in eth.values_mut() {
            list.sort_by_key(|t| t.timestamp);
        }
        for list in erc20.values_mut() {
            list.sort_by_key(|t| t.timestamp);
        }
        TransferIndex { eth, erc20 }
    }

    fn eth_candidates(&self, from: &Address, to: &Address, around: DateTime<Utc>, minutes: i64) -> Vec<&'a BlockTxn> {
        match self.eth.get(&(from, to)) {
            None => Vec::new(),
            Some(list) => slice_window(list, around, minutes, |t| t.timestamp),
        }
    }

    fn erc20_candidates(&self, from: &Address, to: &Address, around: DateTime<Utc>, minutes: i64) -> Vec<&'a Erc20Transfer> {
        match self.erc20.get(&(from, to)) {
            None => Vec::new(),
            Some(list) => slice_window(list, around, minutes, |t| t.timestamp),
        }
    }
}

fn slice_window<'a, T>(
    sorted: &[&'a T],
    around: DateTime<Utc>,
    minutes: i64,
    ts: impl Fn(&T) -> DateTime<Utc>,
) -> Vec<&'a T> {
    let lo = around - chrono::Duration::minutes(minutes);
    let hi = around + chrono::Duration::minutes(minutes);
    let start = sorted.partition_point(|t| ts(t) < lo);
    let end = sorted.partition_point(|t| ts(t) <= hi);
    sorted[start..end].to_vec()
}

/// Run the detector over every sale of every sequence.
pub fn detect_unprofitable(
    sequences: &[EventSequence],
    block_txns: &[BlockTxn],
    erc20_txns: &[Erc20Transfer],
    cfg: &MatchConfig,
    prices: &PriceTable,
) -> Vec<UnprofitableFinding> {
    let index = TransferIndex::build(block_txns, erc20_txns);
    let mut findings = Vec::new();
    for seq in sequences {
        for (sale_index, record) in seq.records.iter().enumerate() {
            if !record.is_sale() {
                continue;
            }
            if let Some(f) = match_sale(seq, sale_index, record, &index, cfg, prices) {
                findings.push(f);
            }
        }
    }
    findings
}

fn match_sale(
    seq: &EventSequence,
    sale_index: usize,
    sale: &EventRecord,
    index: &TransferIndex,
    cfg: &MatchConfig,
    prices: &PriceTable,
) -> Option<UnprofitableFinding> {
    let mut pairs: Vec<(&Address, &Address)> = vec![(&sale.from, &sale.to)];
    if cfg.bidirectional && sale.from != sale.to {
        pairs.push((&sale.to, &sale.from));
    }

    let mut evidence = Vec::new();
    for (from, to) in pairs {
        for t in index.eth_candidates(from, to, sale.timestamp, cfg.eth_window_minutes) {
            let amount = t.value_eth();
            evidence.push(Evidence {
                txn_hash: t.hash.clone(),
                kind: EvidenceKind::Eth,
                direction: direction_of(sale.timestamp, t.timestamp),
                timestamp: t.timestamp,
                token: "ETH".to_string(),
                amount,
                usd: prices.usd_value("ETH", amount, t.timestamp, None),
            });
        }
        for t in index.erc20_candidates(from, to, sale.timestamp, cfg.erc20_window_minutes) {
            evidence.push(Evidence {
                txn_hash: t.hash.clone(),
                kind: EvidenceKind::Erc20,
                direction: direction_of(sale.timestamp, t.timestamp),
                timestamp: t.timestamp,
                token: t.token_symbol.clone(),
                amount: t.amount,
                usd: prices.usd_value(t.token_contract.as_str(), t.amount, t.timestamp, None),
            });
        }
    }
    if evidence.is_empty() {
        return None;
    }
    evidence.sort_by(|a, b| (a.timestamp, &a.txn_hash).cmp(&(b.timestamp, &b.txn_hash)));

    let total_evidence_usd = evidence.iter().filter_map(|e| e.usd).sum();
    Some(UnprofitableFinding {
        token_key: seq.token_key(),
        sale_index,
        seller: sale.from.clone(),
        buyer: sale.to.clone(),
        sale_timestamp: sale.timestamp,
        sale_txn_hash: sale.txn_hash.clone(),
        sale_usd: sale_usd(sale, prices),
        evidence,
        total_evidence_usd,
    })
}
