//! Event-sequence repairs: duplicate removal, bad-timestamp filtering, and
//! marketplace-intermediary collapsing, plus the consistency-rate metric
//! that measures how usable a collection's sequences are.
//!
//! Repair order is dedupe, then timestamps, then intermediaries. The
//! consistency rates in [`CleanReport`] bracket the dedupe step: duplicate
//! removal can only mend broken from/to chains, never break an intact one,
//! so `consis_rate_after >= consis_rate_before` holds by construction.

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::model::{Address, EventRecord, EventSequence, EventType};

/// Two hash-absent records within this many seconds of each other (or of a
/// hash-bearing record) are taken to describe the same transaction.
pub const DUPLICATE_WINDOW_SECS: i64 = 300;

/// Counts from one corpus cleaning pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CleanReport {
    pub duplicates_removed: usize,
    pub bad_timestamps_dropped: usize,
    pub intermediaries_collapsed: usize,
    pub dangling_intermediary_hops: usize,
    pub consis_rate_before: f64,
    pub consis_rate_after: f64,
}

/// Remove repeated events that describe the same transaction.
///
/// Within a maximal run of consecutive records identical in
/// (eventType, from, to), records are grouped into transactions: equal
/// present txnHash means the same transaction, and a hash-absent record
/// joins the nearest hash-bearing record within [`DUPLICATE_WINDOW_SECS`].
/// Hash-absent records that match no hash-bearing one chain with each other
/// under the same time bound. Each group keeps one record: the hash-bearing
/// one, else the earliest.
pub fn dedupe_repeated_events(seq: &EventSequence) -> EventSequence {
    let records = &seq.records;
    let mut keep = vec![true; records.len()];

    let mut run_start = 0;
    while run_start < records.len() {
        let mut run_end = run_start + 1;
        while run_end < records.len() && same_shape(&records[run_end], &records[run_start]) {
            run_end += 1;
        }
        mark_run_survivors(&records[run_start..run_end], &mut keep[run_start..run_end]);
        run_start = run_end;
    }

    EventSequence {
        collection: seq.collection.clone(),
        token_id: seq.token_id.clone(),
        records: records
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(r, _)| r.clone())
            .collect(),
    }
}

fn same_shape(a: &EventRecord, b: &EventRecord) -> bool {
    a.event_type == b.event_type && a.from == b.from && a.to == b.to
}

fn mark_run_survivors(run: &[EventRecord], keep: &mut [bool]) {
    if run.len() < 2 {
        return;
    }

    // Group ids per record; same group = same underlying transaction.
    let mut group = vec![usize::MAX; run.len()];
    let mut next_group = 0;

    let mut by_hash: HashMap<&str, usize> = HashMap::new();
    for (i, r) in run.iter().enumerate() {
        if let Some(h) = r.txn_hash.as_deref() {
            let id = *by_hash.entry(h).or_insert_with(|| {
                next_group += 1;
                next_group - 1
            });
            group[i] = id;
        }
    }

    // Hash-absent records duplicate the nearest hash-bearing record when
    // close enough in time; ties go to the earlier one.
    for i in 0..run.len() {
        if group[i] != usize::MAX {
            continue;
        }
        let mut best: Option<(i64, usize)> = None;
        for (j, r) in run.iter().enumerate() {
            if r.txn_hash.is_none() {
                continue;
            }
            let gap = (run[i].timestamp - r.timestamp).num_seconds().abs();
            if gap <= DUPLICATE_WINDOW_SECS && best.map_or(true, |(g, _)| gap < g) {
                best = Some((gap, j));
            }
        }
        if let Some((_, j)) = best {
            group[i] = group[j];
        }
    }

    // Remaining hash-absent records chain among themselves.
    let mut prev_absent: Option<usize> = None;
    for i in 0..run.len() {
        if group[i] != usize::MAX {
            continue;
        }
        match prev_absent {
            Some(p)
                if (run[i].timestamp - run[p].timestamp).num_seconds().abs()
                    <= DUPLICATE_WINDOW_SECS =>
            {
                group[i] = group[p];
            }
            _ => {
                group[i] = next_group;
                next_group += 1;
            }
        }
        prev_absent = Some(i);
    }

    // One survivor per group: hash-bearing first, then earliest position.
    for g in 0..next_group {
        let survivor = (0..run.len())
            .filter(|&i| group[i] == g)
            .min_by_key(|&i| (run[i].txn_hash.is_none(), i));
        if let Some(s) = survivor {
            for i in 0..run.len() {
                keep[i] = keep[i] && (group[i] != g || i == s);
            }
        }
    }
}

/// Drop records whose timestamps are wrong.
///
/// With a canonical map the test is exact: a record whose txnHash has a
/// canonical timestamp is dropped when the two differ. Without one, the
/// fallback drops records that break non-decreasing order relative to the
/// previous kept record.
pub fn filter_bad_timestamps(
    seq: &EventSequence,
    canon: Option<&HashMap<String, DateTime<Utc>>>,
) -> EventSequence {
    let records = match canon {
        Some(map) => seq
            .records
            .iter()
            .filter(|r| {
                r.txn_hash
                    .as_ref()
                    .and_then(|h| map.get(h))
                    .map_or(true, |chain_ts| *chain_ts == r.timestamp)
            })
            .cloned()
            .collect(),
        None => {
            let mut kept: Vec<EventRecord> = Vec::with_capacity(seq.records.len());
            for r in &seq.records {
                if kept.last().map_or(true, |p| r.timestamp >= p.timestamp) {
                    kept.push(r.clone());
                }
            }
            kept
        }
    };
    EventSequence {
        collection: seq.collection.clone(),
        token_id: seq.token_id.clone(),
        records,
    }
}

/// Collapse marketplace routing hops: each adjacent pair A→M, M→B with M in
/// `marketplace` becomes one record A→B. The sale leg's type and payment
/// fields win over a transfer leg's, and the earlier timestamp is kept.
/// Chains through several configured contracts collapse to fixpoint. A
/// dangling hop into a marketplace at the end of the sequence is left
/// intact and logged.
pub fn merge_intermediaries(seq: &EventSequence, marketplace: &BTreeSet<Address>) -> EventSequence {
    let (merged, dangling) = merge_intermediaries_counted(seq, marketplace);
    if dangling > 0 {
        log::warn!(
            "{} #{}: {dangling} dangling marketplace hop(s) left unmerged",
            seq.collection,
            seq.token_id
        );
    }
    merged
}

pub(crate) fn merge_intermediaries_counted(
    seq: &EventSequence,
    marketplace: &BTreeSet<Address>,
) -> (EventSequence, usize) {
    let mut stack: Vec<EventRecord> = Vec::with_capacity(seq.records.len());
    for record in &seq.records {
        let mut current = record.clone();
        // A merged record may itself end at another marketplace contract,
        // so keep folding while the stack top routes into `current`.
        while let Some(top) = stack.last() {
            if marketplace.contains(&top.to) && top.to == current.from {
                let top = stack.pop().unwrap();
                current = merge_pair(&top, &current);
            } else {
                break;
            }
        }
        stack.push(current);
    }

    let dangling = stack
        .last()
        .map_or(0, |r| usize::from(marketplace.contains(&r.to)));

    (
        EventSequence {
            collection: seq.collection.clone(),
            token_id: seq.token_id.clone(),
            records: stack,
        },
        dangling,
    )
}

fn merge_pair(into_market: &EventRecord, out_of_market: &EventRecord) -> EventRecord {
    // Sale beats transfer; two sales keep the first leg's terms.
    let winner = if into_market.event_type != EventType::Sale
        && out_of_market.event_type == EventType::Sale
    {
        out_of_market
    } else {
        into_market
    };
    EventRecord {
        timestamp: into_market.timestamp.min(out_of_market.timestamp),
        collection: into_market.collection.clone(),
        token_id: into_market.token_id.clone(),
        from: into_market.from.clone(),
        to: out_of_market.to.clone(),
        event_type: winner.event_type,
        is_private: winner.is_private,
        pay_token: winner.pay_token.clone(),
        num_token: winner.num_token,
        usd_token: winner.usd_token,
        txn_hash: winner.txn_hash.clone(),
    }
}

/// Share of tokens whose sequence chains correctly (`from_i == to_{i-1}`).
pub fn consistency_rate(collection: &[EventSequence]) -> Result<f64, DataError> {
    if collection.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let valid = collection.iter().filter(|s| s.is_consistent()).count();
    Ok(valid as f64 / collection.len() as f64)
}

/// Run all three repairs over a corpus and report what changed. Tokens left
/// with no records are dropped.
pub fn clean_corpus(
    sequences: &[EventSequence],
    canon: Option<&HashMap<String, DateTime<Utc>>>,
    marketplace: &BTreeSet<Address>,
) -> Result<(Vec<EventSequence>, CleanReport), DataError> {
    let consis_rate_before = consistency_rate(sequences)?;

    let deduped: Vec<EventSequence> = sequences.par_iter().map(dedupe_repeated_events).collect();
    let consis_rate_after = consistency_rate(&deduped)?;
    let duplicates_removed = record_count(sequences) - record_count(&deduped);

    let time_filtered: Vec<EventSequence> = deduped
        .par_iter()
        .map(|s| filter_bad_timestamps(s, canon))
        .collect();
    let bad_timestamps_dropped = record_count(&deduped) - record_count(&time_filtered);

    let merged: Vec<(EventSequence, usize)> = time_filtered
        .par_iter()
        .map(|s| merge_intermediaries_counted(s, marketplace))
        .collect();
    let intermediaries_collapsed =
        record_count(&time_filtered) - merged.iter().map(|(s, _)| s.records.len()).sum::<usize>();
    let dangling_intermediary_hops = merged.iter().map(|(_, d)| *d).sum();

    let cleaned: Vec<EventSequence> = merged
        .into_iter()
        .map(|(s, _)| s)
        .filter(|s| !s.records.is_empty())
        .collect();

    Ok((
        cleaned,
        CleanReport {
            duplicates_removed,
            bad_timestamps_dropped,
            intermediaries_collapsed,
            dangling_intermediary_hops,
            consis_rate_before,
            consis_rate_after,
        },
    ))
}

fn record_count(sequences: &[EventSequence]) -> usize {
    sequences.iter().map(|s| s.records.len()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{addr, dt, rec, sale, seq};
    use chrono::TimeZone;

    fn market() -> BTreeSet<Address> {
        [addr("0x83c8"), addr("0x84d9")].into_iter().collect()
    }

    #[test]
    fn double_mint_keeps_hash_bearing_record() {
        // Two minted events to the same owner 73 s apart, first hash missing.
        let s = seq(vec![
            rec("0x000000", "0x01c9e1", EventType::Minted, dt(0), None),
            rec("0x000000", "0x01c9e1", EventType::Minted, dt(73), Some("0xbeef")),
        ]);
        let out = dedupe_repeated_events(&s);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].txn_hash.as_deref(), Some("0xbeef"));
        assert_eq!(out.records[0].timestamp, dt(73));
    }

    #[test]
    fn distinct_records_pass_through() {
        let s = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), Some("0x01")),
            rec("0xa1", "0xa2", EventType::Transfer, dt(100), Some("0x02")),
            rec("0xa2", "0xa1", EventType::Transfer, dt(200), Some("0x03")),
        ]);
        assert_eq!(dedupe_repeated_events(&s), s);
    }

    #[test]
    fn absent_hashes_fold_into_present_one() {
        let s = seq(vec![
            sale("0xa1", "0xa2", dt(0), "1", None, None),
            sale("0xa1", "0xa2", dt(60), "1", None, Some("0xcc")),
            sale("0xa1", "0xa2", dt(120), "1", None, None),
        ]);
        let out = dedupe_repeated_events(&s);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].txn_hash.as_deref(), Some("0xcc"));
    }

    #[test]
    fn far_apart_absent_hashes_stay_separate() {
        let s = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
            rec("0x000000", "0xa1", EventType::Minted, dt(301), None),
        ]);
        assert_eq!(dedupe_repeated_events(&s).records.len(), 2);
    }

    #[test]
    fn distinct_hashes_both_survive() {
        let s = seq(vec![
            sale("0xa1", "0xa2", dt(0), "1", None, Some("0x0a")),
            sale("0xa1", "0xa2", dt(10), "1", None, Some("0x0b")),
        ]);
        assert_eq!(dedupe_repeated_events(&s).records.len(), 2);
    }

    #[test]
    fn dedupe_is_idempotent() {
        let s = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
            rec("0x000000", "0xa1", EventType::Minted, dt(73), Some("0xbeef")),
            rec("0xa1", "0xa2", EventType::Transfer, dt(500), None),
            rec("0xa1", "0xa2", EventType::Transfer, dt(900), None),
        ]);
        let once = dedupe_repeated_events(&s);
        assert_eq!(dedupe_repeated_events(&once), once);
    }

    #[test]
    fn canon_map_drops_mismatched_timestamp() {
        let chain_ts = Utc.timestamp_opt(1_648_160_556, 0).unwrap();
        let event_ts = Utc.timestamp_opt(1_648_160_557, 0).unwrap();
        let mut r = rec("0xa1", "0xa2", EventType::Transfer, event_ts, Some("0xdd"));
        r.timestamp = event_ts;
        let s = seq(vec![r]);
        let canon: HashMap<String, DateTime<Utc>> = [("0xdd".to_string(), chain_ts)].into();
        assert!(filter_bad_timestamps(&s, Some(&canon)).records.is_empty());

        // Matching timestamp survives.
        let mut ok = rec("0xa1", "0xa2", EventType::Transfer, chain_ts, Some("0xdd"));
        ok.timestamp = chain_ts;
        let s2 = seq(vec![ok]);
        assert_eq!(filter_bad_timestamps(&s2, Some(&canon)).records.len(), 1);
    }

    #[test]
    fn monotone_sequence_unchanged_without_canon() {
        let s = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
            rec("0xa1", "0xa2", EventType::Transfer, dt(10), None),
        ]);
        assert_eq!(filter_bad_timestamps(&s, None), s);
    }

    #[test]
    fn backward_jump_dropped_without_canon() {
        let s = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(10), None),
            rec("0xa1", "0xa2", EventType::Transfer, dt(5), None),
            rec("0xa2", "0xa3", EventType::Transfer, dt(20), None),
        ]);
        let out = filter_bad_timestamps(&s, None);
        let times: Vec<_> = out.records.iter().map(|r| r.timestamp).collect();
        assert_eq!(times, [dt(10), dt(20)]);
    }

    #[test]
    fn sale_through_marketplace_collapses_to_direct_sale() {
        let s = seq(vec![
            sale("0xa1", "0x83c8", dt(0), "1.4", Some("3100"), Some("0x0a")),
            rec("0x83c8", "0xb2", EventType::Transfer, dt(1), Some("0x0a")),
        ]);
        let out = merge_intermediaries(&s, &market());
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.event_type, EventType::Sale);
        assert_eq!(r.from, addr("0xa1"));
        assert_eq!(r.to, addr("0xb2"));
        assert_eq!(r.timestamp, dt(0));
        assert_eq!(r.num_token, Some(crate::testutil::dec("1.4")));
    }

    #[test]
    fn transfer_in_sale_out_keeps_sale_fields() {
        let s = seq(vec![
            rec("0xa1", "0x83c8", EventType::Transfer, dt(0), None),
            sale("0x83c8", "0xb2", dt(2), "0.5", None, Some("0x0b")),
        ]);
        let out = merge_intermediaries(&s, &market());
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].event_type, EventType::Sale);
        assert_eq!(out.records[0].num_token, Some(crate::testutil::dec("0.5")));
        assert_eq!(out.records[0].timestamp, dt(0));
    }

    #[test]
    fn empty_marketplace_set_is_identity() {
        let s = seq(vec![
            sale("0xa1", "0x83c8", dt(0), "1", None, None),
            rec("0x83c8", "0xb2", EventType::Transfer, dt(1), None),
        ]);
        assert_eq!(merge_intermediaries(&s, &BTreeSet::new()), s);
    }

    #[test]
    fn two_hop_chain_collapses_to_fixpoint() {
        let s = seq(vec![
            sale("0xa1", "0x83c8", dt(0), "2", None, None),
            rec("0x83c8", "0x84d9", EventType::Transfer, dt(1), None),
            rec("0x84d9", "0xb2", EventType::Transfer, dt(2), None),
        ]);
        let out = merge_intermediaries(&s, &market());
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].from, addr("0xa1"));
        assert_eq!(out.records[0].to, addr("0xb2"));
        assert_eq!(out.records[0].event_type, EventType::Sale);
    }

    #[test]
    fn dangling_hop_left_intact() {
        let s = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
            sale("0xa1", "0x83c8", dt(10), "1", None, None),
        ]);
        let (out, dangling) = merge_intermediaries_counted(&s, &market());
        assert_eq!(out, s);
        assert_eq!(dangling, 1);
    }

    #[test]
    fn merge_is_idempotent() {
        let s = seq(vec![
            sale("0xa1", "0x83c8", dt(0), "2", None, None),
            rec("0x83c8", "0x84d9", EventType::Transfer, dt(1), None),
            rec("0x84d9", "0xb2", EventType::Transfer, dt(2), None),
            rec("0xb2", "0xc3", EventType::Transfer, dt(50), None),
        ]);
        let once = merge_intermediaries(&s, &market());
        assert_eq!(merge_intermediaries(&once, &market()), once);
    }

    #[test]
    fn consistency_rate_counts_chained_tokens() {
        let good = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
            rec("0xa1", "0xa2", EventType::Transfer, dt(10), None),
        ]);
        let broken = {
            let mut s = seq(vec![
                rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
                rec("0xa9", "0xa2", EventType::Transfer, dt(10), None),
            ]);
            s.token_id = "2".into();
            s
        };
        let mut third = good.clone();
        third.token_id = "3".into();
        let rate = consistency_rate(&[good.clone(), broken, third]).unwrap();
        assert!((rate - 2.0 / 3.0).abs() < 1e-12);

        // Nine consistent tokens of ten give 90%.
        let mut ten: Vec<EventSequence> = (0..9)
            .map(|i| {
                let mut s = good.clone();
                s.token_id = format!("g{i}");
                s
            })
            .collect();
        let mut bad = ten[0].clone();
        bad.token_id = "bad".into();
        bad.records[1].from = addr("0xffff");
        ten.push(bad);
        assert!((consistency_rate(&ten).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn singleton_sequences_are_trivially_consistent() {
        let tokens: Vec<EventSequence> = (0..4)
            .map(|i| {
                let mut s = seq(vec![rec("0x000000", "0xa1", EventType::Minted, dt(0), None)]);
                s.token_id = i.to_string();
                s
            })
            .collect();
        assert_eq!(consistency_rate(&tokens).unwrap(), 1.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            consistency_rate(&[]),
            Err(DataError::EmptyCorpus)
        ));
    }

    #[test]
    fn clean_corpus_reports_each_repair() {
        let token_a = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(0), None),
            rec("0x000000", "0xa1", EventType::Minted, dt(73), Some("0xbeef")),
            sale("0xa1", "0x83c8", dt(1000), "1", None, None),
            rec("0x83c8", "0xb2", EventType::Transfer, dt(1001), None),
        ]);
        let mut token_b = seq(vec![
            rec("0x000000", "0xa1", EventType::Minted, dt(100), None),
            rec("0xa1", "0xa2", EventType::Transfer, dt(50), None),
        ]);
        token_b.token_id = "2".into();

        let (cleaned, report) = clean_corpus(&[token_a, token_b], None, &market()).unwrap();
        assert_eq!(report.duplicates_removed, 1);
        assert_eq!(report.bad_timestamps_dropped, 1);
        assert_eq!(report.intermediaries_collapsed, 1);
        assert_eq!(report.dangling_intermediary_hops, 0);
        // The duplicate mint broke token A's chain; dedupe repairs it.
        assert!(report.consis_rate_after >= report.consis_rate_before);
        assert_eq!(cleaned.len(), 2);
        assert_eq!(cleaned[0].records.len(), 2);
        assert_eq!(cleaned[1].records.len(), 1);
    }
}
