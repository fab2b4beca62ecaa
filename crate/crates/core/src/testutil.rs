//! Small constructors shared by the unit tests.

use chrono::{DateTime, TimeZone, Utc};
use rust_decimal::Decimal;

use crate::model::{Address, EventRecord, EventSequence, EventType};

/// Base instant for relative test timestamps.
pub fn dt(offset_secs: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap() + chrono::Duration::seconds(offset_secs)
}

pub fn addr(s: &str) -> Address {
    Address::parse(s).unwrap()
}

pub fn dec(s: &str) -> Decimal {
    Decimal::from_str_exact(s).unwrap()
}

/// Bare event row on token `testcoll #1` with no price fields.
pub fn rec(
    from: &str,
    to: &str,
    event_type: EventType,
    timestamp: DateTime<Utc>,
    txn_hash: Option<&str>,
) -> EventRecord {
    EventRecord {
        timestamp,
        collection: "testcoll".into(),
        token_id: "1".into(),
        from: addr(from),
        to: addr(to),
        event_type,
        is_private: None,
        pay_token: None,
        num_token: None,
        usd_token: None,
        txn_hash: txn_hash.map(str::to_owned),
    }
}

/// Sale row with an ETH amount and optional per-unit USD rate.
pub fn sale(
    from: &str,
    to: &str,
    timestamp: DateTime<Utc>,
    num_eth: &str,
    usd_rate: Option<&str>,
    txn_hash: Option<&str>,
) -> EventRecord {
    let mut r = rec(from, to, EventType::Sale, timestamp, txn_hash);
    r.is_private = Some(false);
    r.pay_token = Some("ETH".into());
    r.num_token = Some(dec(num_eth));
    r.usd_token = usd_rate.map(dec);
    r
}

pub fn seq(records: Vec<EventRecord>) -> EventSequence {
    let (collection, token_id) = records
        .first()
        .map(|r| (r.collection.clone(), r.token_id.clone()))
        .unwrap_or_else(|| ("testcoll".into(), "1".into()));
    EventSequence {
        collection,
        token_id,
        records,
    }
}
