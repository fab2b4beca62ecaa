//! CSV readers and writers for the four input table shapes.
//!
//! Missing files and missing required columns are fatal. A malformed row is
//! never fatal: it is skipped and reported with its line number so a long
//! export with a few bad lines still loads.

use std::collections::BTreeMap;
use std::fs::File;
use std::io;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use csv::StringRecord;
use rust_decimal::Decimal;

use crate::error::DataError;
use crate::model::{
    Address, BlockTxn, Erc20Transfer, EventRecord, EventSequence, EventType, PricePoint,
    PriceTable,
};

/// One skipped input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSkip {
    pub line: u64,
    pub reason: String,
}

/// Parse result plus the rows that did not make it.
#[derive(Debug)]
pub struct Parsed<T> {
    pub value: T,
    pub skipped: Vec<RowSkip>,
}

/// Column indices resolved from a header row by name.
struct Columns {
    index: BTreeMap<String, usize>,
}

impl Columns {
    fn resolve(headers: &StringRecord, required: &[&str], label: &str) -> Result<Columns, DataError> {
        let mut index = BTreeMap::new();
        for (i, name) in headers.iter().enumerate() {
            index.entry(name.trim().to_string()).or_insert(i);
        }
        for col in required {
            if !index.contains_key(*col) {
                return Err(DataError::MissingColumn {
                    path: label.to_string(),
                    column: (*col).to_string(),
                });
            }
        }
        Ok(Columns { index })
    }

    /// Cell content, with empty and NaN normalized to absent.
    fn get<'r>(&self, row: &'r StringRecord, name: &str) -> Option<&'r str> {
        let i = *self.index.get(name)?;
        let raw = row.get(i)?.trim();
        if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            return None;
        }
        Some(raw)
    }
}

fn row_line(row: &StringRecord) -> u64 {
    row.position().map(|p| p.line()).unwrap_or(0)
}

/// ISO-8601 timestamp, with or without a trailing zone designator. Naive
/// timestamps are taken as UTC.
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f")
        .map(|t| t.and_utc())
        .map_err(|_| format!("bad timestamp `{raw}`"))
}

fn parse_decimal(raw: &str, what: &str) -> Result<Decimal, String> {
    let d = Decimal::from_str_exact(raw).map_err(|_| format!("bad {what} `{raw}`"))?;
    if d.is_sign_negative() {
        return Err(format!("negative {what} `{raw}`"));
    }
    Ok(d)
}

fn parse_hash(raw: &str) -> Result<String, String> {
    let hex = raw
        .strip_prefix("0x")
        .or_else(|| raw.strip_prefix("0X"))
        .ok_or_else(|| format!("hash `{raw}` missing 0x prefix"))?;
    if hex.is_empty() || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(format!("hash `{raw}` is not hex"));
    }
    Ok(format!("0x{}", hex.to_ascii_lowercase()))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("bad boolean `{other}`")),
    }
}

const EVENT_COLUMNS: [&str; 11] = [
    "timestamp",
    "collection",
    "tokenId",
    "from",
    "to",
    "type",
    "isPrivate",
    "payToken",
    "numToken",
    "usdToken",
    "txnHash",
];

fn event_from_row(cols: &Columns, row: &StringRecord) -> Result<EventRecord, String> {
    let timestamp = parse_timestamp(cols.get(row, "timestamp").ok_or("missing timestamp")?)?;
    let collection = cols.get(row, "collection").ok_or("missing collection")?;
    let token_id = cols.get(row, "tokenId").ok_or("missing tokenId")?;
    let from = Address::parse(cols.get(row, "from").ok_or("missing from")?)?;
    let to = Address::parse(cols.get(row, "to").ok_or("missing to")?)?;
    let event_type = EventType::parse(cols.get(row, "type").ok_or("missing type")?)?;
    let is_private = cols.get(row, "isPrivate").map(parse_bool).transpose()?;
    let pay_token = cols.get(row, "payToken").map(str::to_string);
    let num_token = cols
        .get(row, "numToken")
        .map(|v| parse_decimal(v, "numToken"))
        .transpose()?;
    let usd_token = cols
        .get(row, "usdToken")
        .map(|v| parse_decimal(v, "usdToken"))
        .transpose()?;
    let txn_hash = cols.get(row, "txnHash").map(parse_hash).transpose()?;

    match event_type {
        EventType::Sale => {
            if pay_token.is_none() {
                return Err("sale row missing payToken".into());
            }
            if num_token.is_none() {
                return Err("sale row missing numToken".into());
            }
        }
        EventType::Minted | EventType::Transfer => {
            if pay_token.is_some() || num_token.is_some() || usd_token.is_some() {
                return Err(format!(
                    "{} row carries payment fields",
                    event_type.as_str()
                ));
            }
            if event_type == EventType::Minted && !from.is_zero() {
                return Err("minted row with nonzero sender".into());
            }
        }
    }

    Ok(EventRecord {
        timestamp,
        collection: collection.to_string(),
        token_id: token_id.to_string(),
        from,
        to,
        event_type,
        is_private,
        pay_token,
        num_token,
        usd_token,
        txn_hash,
    })
}

/// Read marketplace events and group them into per-token sequences, each
/// sorted by timestamp. Ties keep input file order.
pub fn read_events(rdr: impl io::Read, label: &str) -> Result<Parsed<Vec<EventSequence>>, DataError> {
    let mut csv_rdr = csv::ReaderBuilder::new().flexible(true).from_reader(rdr);
    let headers = csv_rdr
        .headers()
        .map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?
        .clone();
    let cols = Columns::resolve(&headers, &EVENT_COLUMNS, label)?;

    let mut skipped = Vec::new();
    let mut grouped: BTreeMap<(String, String), Vec<EventRecord>> = BTreeMap::new();
    for row in csv_rdr.records() {
        let row = row.map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?;
        match event_from_row(&cols, &row) {
            Ok(event) => grouped
                .entry((event.collection.clone(), event.token_id.clone()))
                .or_default()
                .push(event),
            Err(reason) => skipped.push(RowSkip {
                line: row_line(&row),
                reason,
            }),
        }
    }

    let sequences = grouped
        .into_iter()
        .map(|((collection, token_id), mut records)| {
            records.sort_by_key(|r| r.timestamp);
            EventSequence {
                collection,
                token_id,
                records,
            }
        })
        .collect();
    Ok(Parsed {
        value: sequences,
        skipped,
    })
}

const BLOCK_COLUMNS: [&str; 6] = ["hash", "timestamp", "from", "to", "valueWei", "input"];

/// Largest wei value that still converts to Decimal ETH exactly.
const MAX_WEI: u128 = 79_228_162_514_264_337_593_543_950_335;

fn block_from_row(cols: &Columns, row: &StringRecord) -> Result<BlockTxn, String> {
    let hash = parse_hash(cols.get(row, "hash").ok_or("missing hash")?)?;
    let timestamp = parse_timestamp(cols.get(row, "timestamp").ok_or("missing timestamp")?)?;
    let from = Address::parse(cols.get(row, "from").ok_or("missing from")?)?;
    let to = Address::parse(cols.get(row, "to").ok_or("missing to")?)?;
    let raw_value = cols.get(row, "valueWei").ok_or("missing valueWei")?;
    let value_wei: u128 = raw_value
        .parse()
        .map_err(|_| format!("bad valueWei `{raw_value}`"))?;
    if value_wei > MAX_WEI {
        return Err(format!("valueWei `{raw_value}` out of range"));
    }
    let input = match cols.get(row, "input") {
        None => String::new(),
        Some(raw) => {
            let hex = raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X")).unwrap_or(raw);
            if !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(format!("input `{raw}` is not hex"));
            }
            hex.to_ascii_lowercase()
        }
    };
    Ok(BlockTxn {
        hash,
        timestamp,
        from,
        to,
        value_wei,
        input,
    })
}

/// Read block-level transactions, sorted by timestamp (ties keep file order).
pub fn read_block_txns(rdr: impl io::Read, label: &str) -> Result<Parsed<Vec<BlockTxn>>, DataError> {
    let mut csv_rdr = csv::ReaderBuilder::new().flexible(true).from_reader(rdr);
    let headers = csv_rdr
        .headers()
        .map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?
        .clone();
    let cols = Columns::resolve(&headers, &BLOCK_COLUMNS, label)?;

    let mut skipped = Vec::new();
    let mut txns = Vec::new();
    for row in csv_rdr.records() {
        let row = row.map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?;
        match block_from_row(&cols, &row) {
            Ok(txn) => txns.push(txn),
            Err(reason) => skipped.push(RowSkip {
                line: row_line(&row),
                reason,
            }),
        }
    }
    txns.sort_by_key(|t| t.timestamp);
    Ok(Parsed {
        value: txns,
        skipped,
    })
}

const ERC20_COLUMNS: [&str; 7] = [
    "hash",
    "timestamp",
    "tokenContract",
    "tokenSymbol",
    "from",
    "to",
    "amount",
];

fn erc20_from_row(cols: &Columns, row: &StringRecord) -> Result<Erc20Transfer, String> {
    let hash = parse_hash(cols.get(row, "hash").ok_or("missing hash")?)?;
    let timestamp = parse_timestamp(cols.get(row, "timestamp").ok_or("missing timestamp")?)?;
    let token_contract = Address::parse(cols.get(row, "tokenContract").ok_or("missing tokenContract")?)?;
    let token_symbol = cols
        .get(row, "tokenSymbol")
        .ok_or("missing tokenSymbol")?
        .to_string();
    let from = Address::parse(cols.get(row, "from").ok_or("missing from")?)?;
    let to = Address::parse(cols.get(row, "to").ok_or("missing to")?)?;
    let amount = parse_decimal(cols.get(row, "amount").ok_or("missing amount")?, "amount")?;
    Ok(Erc20Transfer {
        hash,
        timestamp,
        token_contract,
        token_symbol,
        from,
        to,
        amount,
    })
}

/// Read ERC-20 transfers, sorted by timestamp (ties keep file order).
pub fn read_erc20_txns(
    rdr: impl io::Read,
    label: &str,
) -> Result<Parsed<Vec<Erc20Transfer>>, DataError> {
    let mut csv_rdr = csv::ReaderBuilder::new().flexible(true).from_reader(rdr);
    let headers = csv_rdr
        .headers()
        .map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?
        .clone();
    let cols = Columns::resolve(&headers, &ERC20_COLUMNS, label)?;

    let mut skipped = Vec::new();
    let mut txns = Vec::new();
    for row in csv_rdr.records() {
        let row = row.map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?;
        match erc20_from_row(&cols, &row) {
            Ok(txn) => txns.push(txn),
            Err(reason) => skipped.push(RowSkip {
                line: row_line(&row),
                reason,
            }),
        }
    }
    txns.sort_by_key(|t| t.timestamp);
    Ok(Parsed {
        value: txns,
        skipped,
    })
}

const PRICE_COLUMNS: [&str; 3] = ["tokenContract", "date", "usdPrice"];

/// Read the daily price table. Duplicate (asset, date) rows are fatal: there
/// is no rule for choosing between two same-day prices.
pub fn read_prices(rdr: impl io::Read, label: &str) -> Result<Parsed<PriceTable>, DataError> {
    let mut csv_rdr = csv::ReaderBuilder::new().flexible(true).from_reader(rdr);
    let headers = csv_rdr
        .headers()
        .map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?
        .clone();
    let cols = Columns::resolve(&headers, &PRICE_COLUMNS, label)?;

    let mut skipped = Vec::new();
    let mut table = PriceTable::new();
    for row in csv_rdr.records() {
        let row = row.map_err(|e| DataError::Csv {
            path: label.to_string(),
            source: e,
        })?;
        let parsed = (|| -> Result<PricePoint, String> {
            let token_contract = cols
                .get(&row, "tokenContract")
                .ok_or("missing tokenContract")?
                .to_ascii_lowercase();
            let raw_date = cols.get(&row, "date").ok_or("missing date")?;
            let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
                .map_err(|_| format!("bad date `{raw_date}`"))?;
            let usd_price = parse_decimal(cols.get(&row, "usdPrice").ok_or("missing usdPrice")?, "usdPrice")?;
            Ok(PricePoint {
                token_contract,
                date,
                usd_price,
            })
        })();
        match parsed {
            Ok(point) => table.insert(point)?,
            Err(reason) => skipped.push(RowSkip {
                line: row_line(&row),
                reason,
            }),
        }
    }
    Ok(Parsed {
        value: table,
        skipped,
    })
}

pub fn read_events_path(path: &Path) -> Result<Parsed<Vec<EventSequence>>, DataError> {
    let file = open(path)?;
    read_events(file, &path.display().to_string())
}

pub fn read_block_txns_path(path: &Path) -> Result<Parsed<Vec<BlockTxn>>, DataError> {
    let file = open(path)?;
    read_block_txns(file, &path.display().to_string())
}

pub fn read_erc20_txns_path(path: &Path) -> Result<Parsed<Vec<Erc20Transfer>>, DataError> {
    let file = open(path)?;
    read_erc20_txns(file, &path.display().to_string())
}

pub fn read_prices_path(path: &Path) -> Result<Parsed<PriceTable>, DataError> {
    let file = open(path)?;
    read_prices(file, &path.display().to_string())
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn fmt_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Write event sequences back to the canonical eleven-column CSV. Absent
/// cells are written as NaN, matching the upstream export style.
pub fn write_events(mut w: impl io::Write, sequences: &[EventSequence]) -> io::Result<()> {
    let mut csv_w = csv::Writer::from_writer(&mut w);
    csv_w.write_record(EVENT_COLUMNS)?;
    for seq in sequences {
        for r in &seq.records {
            csv_w.write_record([
                fmt_timestamp(r.timestamp),
                r.collection.clone(),
                r.token_id.clone(),
                r.from.as_str().to_string(),
                r.to.as_str().to_string(),
                r.event_type.as_str().to_string(),
                match r.is_private {
                    Some(true) => "TRUE".to_string(),
                    Some(false) => "FALSE".to_string(),
                    None => "NaN".to_string(),
                },
                r.pay_token.clone().unwrap_or_else(|| "NaN".to_string()),
                r.num_token
                    .map(|d| d.normalize().to_string())
                    .unwrap_or_else(|| "NaN".to_string()),
                r.usd_token
                    .map(|d| d.normalize().to_string())
                    .unwrap_or_else(|| "NaN".to_string()),
                r.txn_hash.clone().unwrap_or_else(|| "NaN".to_string()),
            ])?;
        }
    }
    csv_w.flush()
}

pub fn write_events_path(path: &Path, sequences: &[EventSequence]) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    write_events(file, sequences).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_block_txns(mut w: impl io::Write, txns: &[BlockTxn]) -> io::Result<()> {
    let mut csv_w = csv::Writer::from_writer(&mut w);
    csv_w.write_record(["hash", "timestamp", "from", "to", "valueWei", "input"])?;
    for t in txns {
        csv_w.write_record([
            t.hash.clone(),
            fmt_timestamp(t.timestamp),
            t.from.as_str().to_string(),
            t.to.as_str().to_string(),
            t.value_wei.to_string(),
            format!("0x{}", t.input),
        ])?;
    }
    csv_w.flush()
}

pub fn write_erc20_txns(mut w: impl io::Write, txns: &[Erc20Transfer]) -> io::Result<()> {
    let mut csv_w = csv::Writer::from_writer(&mut w);
    csv_w.write_record([
        "hash",
        "timestamp",
        "tokenContract",
        "tokenSymbol",
        "from",
        "to",
        "amount",
    ])?;
    for t in txns {
        csv_w.write_record([
            t.hash.clone(),
            fmt_timestamp(t.timestamp),
            t.token_contract.as_str().to_string(),
            t.token_symbol.clone(),
            t.from.as_str().to_string(),
            t.to.as_str().to_string(),
            t.amount.normalize().to_string(),
        ])?;
    }
    csv_w.flush()
}

pub fn write_prices(mut w: impl io::Write, prices: &PriceTable) -> io::Result<()> {
    let mut csv_w = csv::Writer::from_writer(&mut w);
    csv_w.write_record(["tokenContract", "date", "usdPrice"])?;
    for ((contract, date), usd) in prices.iter() {
        let (contract, date, usd) = (contract.clone(), *date, *usd);
        csv_w.write_record([contract, date.to_string(), usd.normalize().to_string()])?;
    }
    csv_w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::dec;
    use std::io::Cursor;

    const EVENT_HEADER: &str =
        "timestamp,collection,tokenId,from,to,type,isPrivate,payToken,numToken,usdToken,txnHash";

    fn events_from(body: &str) -> Parsed<Vec<EventSequence>> {
        let csv = format!("{EVENT_HEADER}\n{body}");
        read_events(Cursor::new(csv), "test").unwrap()
    }

    #[test]
    fn reads_sample_rows_with_nan_gaps() {
        // Mirrors the shape of a real export: mint, transfer, sale.
        let parsed = events_from(concat!(
            "2021-03-27T10:36:13,alpha-shark,9,0x000000,0x1c2fd0,minted,NaN,NaN,NaN,NaN,0xaa01\n",
            "2021-03-28T11:02:19,alpha-shark,9,0x1c2fd0,0x9164e3,transfer,NaN,NaN,NaN,NaN,0xaa02\n",
            "2021-04-02T15:10:00,alpha-shark,9,0x9164e3,0x1c2fd0,sale,FALSE,ETH,2.9,1215.68,0xaa03\n",
        ));
        assert!(parsed.skipped.is_empty());
        assert_eq!(parsed.value.len(), 1);
        let seq = &parsed.value[0];
        assert_eq!(seq.collection, "alpha-shark");
        assert_eq!(seq.token_id, "9");
        assert_eq!(seq.records.len(), 3);
        assert!(seq.records[0].is_mint());
        let sale = &seq.records[2];
        assert_eq!(sale.pay_token.as_deref(), Some("ETH"));
        assert_eq!(sale.num_token, Some(dec("2.9")));
        assert_eq!(sale.usd_token, Some(dec("1215.68")));
        assert_eq!(sale.is_private, Some(false));
    }

    #[test]
    fn groups_interleaved_tokens_and_sorts_by_time() {
        let parsed = events_from(concat!(
            "2021-01-02T00:00:00,c,2,0x000000,0xb1,minted,NaN,NaN,NaN,NaN,NaN\n",
            "2021-01-03T00:00:00,c,1,0xa1,0xa2,transfer,NaN,NaN,NaN,NaN,NaN\n",
            "2021-01-01T00:00:00,c,1,0x000000,0xa1,minted,NaN,NaN,NaN,NaN,NaN\n",
        ));
        assert_eq!(parsed.value.len(), 2);
        assert_eq!(parsed.value[0].token_id, "1");
        assert_eq!(parsed.value[0].records[0].event_type, EventType::Minted);
        assert_eq!(parsed.value[0].records[1].event_type, EventType::Transfer);
        assert_eq!(parsed.value[1].token_id, "2");
    }

    #[test]
    fn equal_timestamps_keep_file_order() {
        let parsed = events_from(concat!(
            "2021-01-01T00:00:00,c,1,0x000000,0xa1,minted,NaN,NaN,NaN,NaN,0x01\n",
            "2021-01-01T00:00:00,c,1,0xa1,0xa2,transfer,NaN,NaN,NaN,NaN,0x02\n",
            "2021-01-01T00:00:00,c,1,0xa2,0xa3,transfer,NaN,NaN,NaN,NaN,0x03\n",
        ));
        let hashes: Vec<_> = parsed.value[0]
            .records
            .iter()
            .map(|r| r.txn_hash.clone().unwrap())
            .collect();
        assert_eq!(hashes, ["0x01", "0x02", "0x03"]);
    }

    #[test]
    fn malformed_rows_skip_with_line_numbers() {
        let parsed = events_from(concat!(
            "not-a-time,c,1,0xa1,0xa2,sale,FALSE,ETH,1,NaN,NaN\n",       // line 2
            "2021-01-01T00:00:00,c,1,0xa1,0xa2,sale,FALSE,NaN,1,NaN,NaN\n", // line 3: no payToken
            "2021-01-01T00:00:00,c,1,0xa1,0xa2,sale,FALSE,ETH,1,NaN,NaN\n",
            "2021-01-01T00:00:01,c,1,0xq9,0xa2,transfer,NaN,NaN,NaN,NaN,NaN\n", // line 5: bad address
            "2021-01-01T00:00:02,c,1,0xa1,0xa2,bought,NaN,NaN,NaN,NaN,NaN\n",   // line 6: bad type
            "2021-01-01T00:00:03,c,1,0xa1,0xa2,transfer,NaN,ETH,NaN,NaN,NaN\n", // line 7: payment on transfer
            "2021-01-01T00:00:04,c,1,0xa1,0xa2,minted,NaN,NaN,NaN,NaN,NaN\n",   // line 8: nonzero mint sender
        ));
        assert_eq!(parsed.value[0].records.len(), 1);
        let lines: Vec<u64> = parsed.skipped.iter().map(|s| s.line).collect();
        assert_eq!(lines, [2, 3, 5, 6, 7, 8]);
    }

    #[test]
    fn empty_event_file_gives_empty_corpus() {
        let parsed = events_from("");
        assert!(parsed.value.is_empty());
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn missing_column_is_fatal() {
        let csv = "timestamp,collection,tokenId,from,to,type\n";
        let err = read_events(Cursor::new(csv), "test").unwrap_err();
        assert!(matches!(err, DataError::MissingColumn { ref column, .. } if column == "isPrivate"));
    }

    #[test]
    fn block_txn_parses_wei_and_input() {
        let csv = concat!(
            "hash,timestamp,from,to,valueWei,input\n",
            "0xf1,2021-12-19T01:00:08,0x4ede98,0xe1f14d,960000000000000000,0x\n",
            "0xf2,2021-12-19T01:05:08,0x4ede98,0xe1f14d,1000,0xa9059cbb\n",
        );
        let parsed = read_block_txns(Cursor::new(csv), "test").unwrap();
        assert_eq!(parsed.value.len(), 2);
        assert!(parsed.value[0].is_pure_eth_transfer());
        assert_eq!(parsed.value[0].value_eth(), dec("0.96"));
        assert!(!parsed.value[1].is_pure_eth_transfer());
        assert_eq!(parsed.value[1].input, "a9059cbb");
    }

    #[test]
    fn block_txn_rejects_bad_value() {
        let csv = concat!(
            "hash,timestamp,from,to,valueWei,input\n",
            "0xf1,2021-12-19T01:00:08,0x4ede98,0xe1f14d,-5,\n",
            "0xf2,2021-12-19T01:00:08,0x4ede98,0xe1f14d,99999999999999999999999999999999999999,\n",
        );
        let parsed = read_block_txns(Cursor::new(csv), "test").unwrap();
        assert!(parsed.value.is_empty());
        assert_eq!(parsed.skipped.len(), 2);
    }

    #[test]
    fn erc20_rows_parse() {
        let csv = concat!(
            "hash,timestamp,tokenContract,tokenSymbol,from,to,amount\n",
            "0xe1,2022-01-08T10:00:00,0xc02aaa,WETH,0xaa,0xbb,0.47\n",
        );
        let parsed = read_erc20_txns(Cursor::new(csv), "test").unwrap();
        assert_eq!(parsed.value[0].token_symbol, "WETH");
        assert_eq!(parsed.value[0].amount, dec("0.47"));
    }

    #[test]
    fn duplicate_price_rows_are_fatal() {
        let csv = concat!(
            "tokenContract,date,usdPrice\n",
            "ETH,2021-06-01,2700\n",
            "eth,2021-06-01,2800\n",
        );
        let err = read_prices(Cursor::new(csv), "test").unwrap_err();
        assert!(matches!(err, DataError::DuplicatePrice { .. }));
    }

    #[test]
    fn price_lookup_via_symbol_alias() {
        let csv = concat!(
            "tokenContract,date,usdPrice\n",
            "ETH,2021-06-01,2700\n",
            "0xc02aaa,2021-06-01,2695.5\n",
        );
        let mut table = read_prices(Cursor::new(csv), "test").unwrap().value;
        table.register_symbol("WETH", "0xC02AAA");
        let date = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap();
        assert_eq!(table.lookup("ETH", date), Some(dec("2700")));
        assert_eq!(table.lookup("weth", date), Some(dec("2695.5")));
    }

    #[test]
    fn events_round_trip_through_writer() {
        let parsed = events_from(concat!(
            "2021-03-27T10:36:13,alpha-shark,9,0x000000,0x1c2fd0,minted,NaN,NaN,NaN,NaN,0xaa01\n",
            "2021-04-02T15:10:00,alpha-shark,9,0x1c2fd0,0x9164e3,sale,TRUE,ETH,2.9,1215.68,NaN\n",
        ));
        let mut buf = Vec::new();
        write_events(&mut buf, &parsed.value).unwrap();
        let reparsed = read_events(Cursor::new(&buf), "round-trip").unwrap();
        assert!(reparsed.skipped.is_empty());
        assert_eq!(reparsed.value, parsed.value);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("TRUE"));
        assert!(text.contains("NaN"));
    }
}
