//! Hidden-trading detection: runs of consecutive private sales.
//!
//! Private sales are invisible on the public marketplace feed, so three or
//! more of them back to back with no public event in between reads as a
//! price being walked somewhere out of sight. The price trend across each
//! run is classified for the analytics stage.

use std::collections::BTreeSet;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{sale_usd, Address, EventSequence, PriceTable, TokenKey};

pub const DEFAULT_HIDDEN_MIN_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceTrend {
    /// numToken strictly increases across the run.
    #[serde(rename = "all-rising")]
    AllRising,
    /// Last price above the first, but not monotone.
    #[serde(rename = "net-rising")]
    NetRising,
    #[serde(rename = "other")]
    Other,
}

/// One run of consecutive private sales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HiddenFinding {
    #[serde(flatten)]
    pub token_key: TokenKey,
    /// Index of the run's first record in the parent sequence.
    pub start_index: usize,
    pub len: usize,
    pub participants: BTreeSet<Address>,
    pub price_trend: PriceTrend,
    /// The run's common payment token; absent when the run mixes tokens.
    pub pay_token: Option<String>,
    pub usd_value: Decimal,
    pub txn_hashes: BTreeSet<String>,
}

/// Find maximal runs of consecutive private sales of length >= `min_len`.
pub fn find_private_runs(
    seq: &EventSequence,
    min_len: usize,
    prices: &PriceTable,
) -> Vec<HiddenFinding> {
    let mut findings = Vec::new();
    let records = &seq.records;
    let mut i = 0;
    while i < records.len() {
        if !records[i].is_private_sale() {
            i += 1;
            continue;
        }
        let start = i;
        while i < records.len() && records[i].is_private_sale() {
            i += 1;
        }
        let len = i - start;
        if len < min_len.max(1) {
            continue;
        }

        let run = &records[start..i];
        let mut participants = BTreeSet::new();
        let mut txn_hashes = BTreeSet::new();
        let mut usd_value = Decimal::ZERO;
        for r in run {
            participants.insert(r.from.clone());
            participants.insert(r.to.clone());
            if let Some(h) = &r.txn_hash {
                txn_hashes.insert(h.clone());
            }
            if let Some(usd) = sale_usd(r, prices) {
                usd_value += usd;
            }
        }

        findings.push(HiddenFinding {
            token_key: seq.token_key(),
            start_index: start,
            len,
            participants,
            price_trend: classify_trend(seq, run),
            pay_token: common_pay_token(run),
            usd_value,
            txn_hashes,
        });
    }
    findings
}

fn common_pay_token(run: &[crate::model::EventRecord]) -> Option<String> {
    let first = run.first()?.pay_token.clone()?;
    run.iter()
        .all(|r| r.pay_token.as_deref() == Some(first.as_str()))
        .then_some(first)
}

/// Price trend over the run's numToken amounts. Comparing amounts is only
/// meaningful in one common payment token; mixed runs fall to Other.
fn classify_trend(seq: &EventSequence, run: &[crate::model::EventRecord]) -> PriceTrend {
    if common_pay_token(run).is_none() {
        log::warn!(
            "{} #{}: private run mixes payment tokens; price trend not comparable",
            seq.collection,
            seq.token_id
        );
        return PriceTrend::Other;
    }
    let amounts: Vec<Decimal> = run.iter().filter_map(|r| r.num_token).collect();
    if amounts.len() != run.len() || amounts.len() < 2 {
        return PriceTrend::Other;
    }
    if amounts.windows(2).all(|w| w[1] > w[0]) {
        PriceTrend::AllRising
    } else if amounts.last() > amounts.first() {
        PriceTrend::NetRising
    } else {
        PriceTrend::Other
    }
}
