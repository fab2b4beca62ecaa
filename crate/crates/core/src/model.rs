//! Core record types shared by every stage: marketplace events, value-transfer
//! records, and the token price table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Lowercase 0x-prefixed hex account or contract address.
///
/// Lengths are not fixed: upstream exports abbreviate addresses, so any
/// non-empty hex payload is accepted and normalized to lowercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(String);

impl Address {
    pub fn parse(raw: &str) -> Result<Address, String> {
        let s = raw.trim();
        let hex = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or_else(|| format!("address `{s}` missing 0x prefix"))?;
        if hex.is_empty() {
            return Err(format!("address `{s}` has empty hex payload"));
        }
        if !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(format!("address `{s}` contains non-hex characters"));
        }
        Ok(Address(format!("0x{}", hex.to_ascii_lowercase())))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The mint sender: every hex digit zero, any length.
    pub fn is_zero(&self) -> bool {
        self.0[2..].chars().all(|c| c == '0')
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Minted,
    Transfer,
    Sale,
}

impl EventType {
    pub fn parse(s: &str) -> Result<EventType, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minted" => Ok(EventType::Minted),
            "transfer" => Ok(EventType::Transfer),
            "sale" => Ok(EventType::Sale),
            other => Err(format!("unknown event type `{other}`")),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EventType::Minted => "minted",
            EventType::Transfer => "transfer",
            EventType::Sale => "sale",
        }
    }
}

/// Identifies one NFT: (collection, tokenId).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TokenKey {
    pub collection: String,
    pub token_id: String,
}

impl TokenKey {
    pub fn new(collection: impl Into<String>, token_id: impl Into<String>) -> TokenKey {
        TokenKey {
            collection: collection.into(),
            token_id: token_id.into(),
        }
    }
}

impl fmt::Display for TokenKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} #{}", self.collection, self.token_id)
    }
}

/// Stable reference to one record inside a preprocessed event sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordRef {
    pub collection: String,
    pub token_id: String,
    pub index: usize,
}

/// One sale/transfer/minted row of an NFT's event sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub timestamp: DateTime<Utc>,
    pub collection: String,
    pub token_id: String,
    pub from: Address,
    pub to: Address,
    pub event_type: EventType,
    pub is_private: Option<bool>,
    pub pay_token: Option<String>,
    pub num_token: Option<Decimal>,
    pub usd_token: Option<Decimal>,
    pub txn_hash: Option<String>,
}

impl EventRecord {
    /// Mint rows come in two spellings: an explicit `minted` type, or a
    /// `transfer` whose sender is the zero address.
    pub fn is_mint(&self) -> bool {
        self.event_type == EventType::Minted
            || (self.event_type == EventType::Transfer && self.from.is_zero())
    }

    pub fn is_sale(&self) -> bool {
        self.event_type == EventType::Sale
    }

    pub fn is_private_sale(&self) -> bool {
        self.is_sale() && self.is_private == Some(true)
    }
}

/// The time-ordered event history of one NFT since it was minted.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub collection: String,
    pub token_id: String,
    pub records: Vec<EventRecord>,
}

impl EventSequence {
    pub fn token_key(&self) -> TokenKey {
        TokenKey::new(self.collection.clone(), self.token_id.clone())
    }

    pub fn record_ref(&self, index: usize) -> RecordRef {
        RecordRef {
            collection: self.collection.clone(),
            token_id: self.token_id.clone(),
            index,
        }
    }

    /// True when every adjacent pair chains: `from_i == to_{i-1}`.
    pub fn is_consistent(&self) -> bool {
        self.records
            .windows(2)
            .all(|pair| pair[1].from == pair[0].to)
    }
}

/// A block-level transaction: the ETH value transfer evidence source.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTxn {
    pub hash: String,
    pub timestamp: DateTime<Utc>,
    pub from: Address,
    pub to: Address,
    pub value_wei: u128,
    /// Calldata as lowercase hex without the 0x prefix; empty means a pure
    /// ETH transfer with no contract invocation.
    pub input: String,
}

impl BlockTxn {
    pub fn is_pure_eth_transfer(&self) -> bool {
        self.input.is_empty()
    }

    /// Wei rescaled to ETH with 18 fractional digits, exactly.
    pub fn value_eth(&self) -> Decimal {
        // value_wei is validated at parse time to fit Decimal's 96-bit mantissa
        Decimal::from_i128_with_scale(self.value_wei as i128, 18).normalize()
    }
}

/// An ERC-20 token transfer with decimals already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Erc20Transfer {
    pub hash: String,
    pub timestamp: DateTime<Utc>,
    pub token_contract: Address,
    pub token_symbol: String,
    pub from: Address,
    pub to: Address,
    pub amount: Decimal,
}

/// One day's USD reference price for a token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    /// Opaque asset key: a 0x contract address, or a bare symbol for assets
    /// (like native ETH) that have no contract. Stored lowercase.
    pub token_contract: String,
    pub date: NaiveDate,
    pub usd_price: Decimal,
}

/// Daily USD prices keyed by (asset key, date), plus a symbol index built
/// from observed ERC-20 transfers so sale `payToken` symbols can resolve.
#[derive(Debug, Clone, Default)]
pub struct PriceTable {
    points: BTreeMap<(String, NaiveDate), Decimal>,
    symbol_index: BTreeMap<String, BTreeSet<String>>,
}

impl PriceTable {
    pub fn new() -> PriceTable {
        PriceTable::default()
    }

    pub fn insert(&mut self, point: PricePoint) -> Result<(), DataError> {
        let key = (point.token_contract.to_ascii_lowercase(), point.date);
        if self.points.contains_key(&key) {
            return Err(DataError::DuplicatePrice {
                key: key.0,
                date: key.1,
            });
        }
        self.points.insert(key, point.usd_price);
        Ok(())
    }

    /// Record that `symbol` names `contract`, so symbol-based lookups work.
    pub fn register_symbol(&mut self, symbol: &str, contract: &str) {
        self.symbol_index
            .entry(symbol.to_ascii_lowercase())
            .or_default()
            .insert(contract.to_ascii_lowercase());
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// All (assetKey, date) -> USD entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, NaiveDate), &Decimal)> {
        self.points.iter()
    }

    /// Same-day price for an asset key or registered symbol. A symbol that
    /// maps to more than one contract is ambiguous and yields no price.
    pub fn lookup(&self, token: &str, date: NaiveDate) -> Option<Decimal> {
        let key = token.to_ascii_lowercase();
        if let Some(p) = self.points.get(&(key.clone(), date)) {
            return Some(*p);
        }
        let contracts = self.symbol_index.get(&key)?;
        if contracts.len() != 1 {
            return None;
        }
        let contract = contracts.iter().next().unwrap();
        self.points.get(&(contract.clone(), date)).copied()
    }

    /// USD value of `amount` units of `token` at time `at`.
    ///
    /// A sale record's own per-unit USD rate (`event_usd`) always wins over
    /// the table; without either, the value is unknown rather than zero.
    pub fn usd_value(
        &self,
        token: &str,
        amount: Decimal,
        at: DateTime<Utc>,
        event_usd: Option<Decimal>,
    ) -> Option<Decimal> {
        if let Some(rate) = event_usd {
            return Some(rate * amount);
        }
        if amount.is_zero() {
            return Some(Decimal::ZERO);
        }
        let rate = self.lookup(token, at.date_naive())?;
        Some(rate * amount)
    }
}

/// USD value of a sale record: its embedded rate first, the price table as
/// fallback, absent when neither resolves.
pub fn sale_usd(record: &EventRecord, prices: &PriceTable) -> Option<Decimal> {
    if !record.is_sale() {
        return None;
    }
    let amount = record.num_token?;
    let token = record.pay_token.as_deref()?;
    prices.usd_value(token, amount, record.timestamp, record.usd_token)
}
