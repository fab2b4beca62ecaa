//! Splits each token's event sequence into non-overlapping activity windows
//! using an adaptive average-time-interval (ATI) rule.
//!
//! A window grows greedily: the next record joins while its gap from the
//! last included record stays within the window's running average interval,
//! or when its receiver is an address already seen inside the window (the
//! NFT coming back to a prior participant is exactly the pattern the
//! detectors need to see whole, no matter how slowly it happens).

use std::collections::BTreeSet;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{Address, EventRecord, EventSequence};

/// Starting average interval for a window that holds a single record, in
/// seconds. Deliberately the working figure tuned on real exports; do not
/// "correct" it to a calendar day.
pub const DEFAULT_INITIAL_ATI_SECS: u64 = 84_400;

/// One contiguous run of records from a token's sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    /// Ordinal within the token's window list, from 0.
    pub index: usize,
    /// Start of the record range in the parent sequence.
    pub start: usize,
    /// End of the record range, exclusive.
    pub end: usize,
    /// Final average interval between adjacent records, in seconds; the
    /// initial ATI when the window holds a single record.
    pub ati_seconds: Decimal,
    /// Every address appearing as a from or to endpoint in the window.
    pub addresses_seen: BTreeSet<Address>,
}

impl TimeWindow {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn records<'a>(&self, seq: &'a EventSequence) -> &'a [EventRecord] {
        &seq.records[self.start..self.end]
    }
}

/// Segment a sorted sequence into windows. An empty sequence yields an
/// empty list.
pub fn segment_windows(seq: &EventSequence, initial_ati_secs: u64) -> Vec<TimeWindow> {
    let records = &seq.records;
    let mut windows: Vec<TimeWindow> = Vec::new();
    if records.is_empty() {
        return windows;
    }

    let mut start = 0usize;
    let mut addresses = endpoint_set(&records[0]);

    for i in 1..records.len() {
        let joins = addresses.contains(&records[i].to)
            || gap_within_ati(records, start, i, initial_ati_secs);
        if joins {
            addresses.insert(records[i].from.clone());
            addresses.insert(records[i].to.clone());
        } else {
            windows.push(close_window(
                records,
                windows.len(),
                start,
                i,
                initial_ati_secs,
                std::mem::take(&mut addresses),
            ));
            start = i;
            addresses = endpoint_set(&records[i]);
        }
    }
    windows.push(close_window(
        records,
        windows.len(),
        start,
        records.len(),
        initial_ati_secs,
        addresses,
    ));
    windows
}

fn endpoint_set(record: &EventRecord) -> BTreeSet<Address> {
    [record.from.clone(), record.to.clone()].into_iter().collect()
}

/// ATI test for records[i] against the window records[start..i], exact in
/// integer seconds: gap <= span/num becomes gap*num <= span. While the
/// window holds one record the running average does not exist yet and the
/// initial ATI stands in.
fn gap_within_ati(records: &[EventRecord], start: usize, i: usize, initial_ati_secs: u64) -> bool {
    let gap = (records[i].timestamp - records[i - 1].timestamp).num_seconds() as i128;
    let num = (i - start - 1) as i128;
    if num == 0 {
        gap <= initial_ati_secs as i128
    } else {
        let span = (records[i - 1].timestamp - records[start].timestamp).num_seconds() as i128;
        gap * num <= span
    }
}

fn close_window(
    records: &[EventRecord],
    index: usize,
    start: usize,
    end: usize,
    initial_ati_secs: u64,
    addresses_seen: BTreeSet<Address>,
) -> TimeWindow {
    let num = end - start - 1;
    let ati_seconds = if num == 0 {
        Decimal::from(initial_ati_secs)
    } else {
        let span = (records[end - 1].timestamp - records[start].timestamp).num_seconds();
        (Decimal::from(span) / Decimal::from(num as u64)).normalize()
    };
    TimeWindow {
        index,
        start,
        end,
        ati_seconds,
        addresses_seen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventType;
    use crate::testutil::{addr, dt, rec, seq};

    /// Records at the given offsets, each hop moving to a fresh address.
    fn chain_at(times: &[i64]) -> crate::model::EventSequence {
        let records = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let from = if i == 0 {
                    "0x000000".to_string()
                } else {
                    format!("0xa{i:03x}")
                };
                let to = format!("0xa{:03x}", i + 1);
                let kind = if i == 0 {
                    EventType::Minted
                } else {
                    EventType::Transfer
                };
                rec(&from, &to, kind, dt(t), None)
            })
            .collect();
        seq(records)
    }

    #[test]
    fn empty_sequence_gives_no_windows() {
        let s = seq(vec![]);
        assert!(segment_windows(&s, DEFAULT_INITIAL_ATI_SECS).is_empty());
    }

    #[test]
    fn single_record_window_carries_initial_ati() {
        let s = chain_at(&[0]);
        let w = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].start, w[0].end), (0, 1));
        assert_eq!(w[0].ati_seconds, Decimal::from(84_400u64));
    }

    #[test]
    fn running_average_shrinks_and_splits() {
        // Gaps 100, 100, 199800: after two inclusions the ATI is 100, so
        // the long gap opens a second window.
        let s = chain_at(&[0, 100, 200, 200_000]);
        let w = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].start, w[0].end), (0, 3));
        assert_eq!((w[1].start, w[1].end), (3, 4));
        assert_eq!(w[0].ati_seconds, Decimal::from(100u64));
        assert_eq!(w[1].ati_seconds, Decimal::from(84_400u64));
    }

    #[test]
    fn returning_receiver_overrides_the_ati() {
        // Same gaps, but the last hop hands the token back to a window-0
        // participant, so it joins regardless of the interval.
        let mut s = chain_at(&[0, 100, 200, 200_000]);
        let back_to = s.records[1].from.clone();
        s.records[3].to = back_to.clone();
        let w = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].start, w[0].end), (0, 4));
        assert!(w[0].addresses_seen.contains(&back_to));
    }

    #[test]
    fn gap_equal_to_ati_still_joins() {
        // Boundary: span 100 over one interval, next gap exactly 100.
        let s = chain_at(&[0, 100, 200]);
        let w = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn fractional_ati_is_tested_exactly() {
        // Window [0, 15, 25]: span 25 over 2 intervals, ATI 12.5. A gap of
        // 12 joins; 13 does not.
        let joins = chain_at(&[0, 15, 25, 37]);
        assert_eq!(segment_windows(&joins, 84_400).len(), 1);
        let splits = chain_at(&[0, 15, 25, 38]);
        assert_eq!(segment_windows(&splits, 84_400).len(), 2);
    }

    #[test]
    fn windows_partition_the_sequence() {
        let s = chain_at(&[0, 50, 90, 1_000_000, 1_000_010, 9_000_000]);
        let w = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(w[0].start, 0);
        for pair in w.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
            assert_eq!(pair[0].index + 1, pair[1].index);
        }
        assert_eq!(w.last().unwrap().end, s.records.len());
    }

    #[test]
    fn addresses_seen_holds_both_endpoints() {
        let s = chain_at(&[0, 10]);
        let w = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        let seen = &w[0].addresses_seen;
        assert!(seen.contains(&addr("0x000000")));
        assert!(seen.contains(&addr("0xa001")));
        assert!(seen.contains(&addr("0xa002")));
    }
}
