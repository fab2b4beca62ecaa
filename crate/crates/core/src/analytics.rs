//! Quantitative measures over detection output: flagged volume, daily
//! trend, window-transition liquidity, wash-exit profitability, evidence
//! correlations, severe price sags, and the volume impact of excluding
//! mined trader pairs.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{sale_usd, Address, EventSequence, EventType, PriceTable, TokenKey};
use crate::pipeline::{FindingSet, MiningReport, TokenWindows};
use crate::roundtrip::RoundTripFinding;
use crate::unprofitable::{EvidenceDirection, EvidenceKind, UnprofitableFinding};
use crate::windowing::TimeWindow;

pub const DEFAULT_FEE_RATE: &str = "0.025";
pub const DEFAULT_PF_THRESHOLD: &str = "1000";
pub const DEFAULT_HISTOGRAM_BIN_SECONDS: i64 = 60;
pub const DEFAULT_HISTOGRAM_SPAN_MINUTES: i64 = 20;
const GAIN_BIN_USD: &str = "100";
const MAX_FOLLOW_STEPS: usize = 7;
const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AnalysisConfig {
    pub fee_rate: Decimal,
    pub pf_threshold: Decimal,
    pub histogram_bin_seconds: i64,
    pub histogram_span_minutes: i64,
    /// Collection left out of the trend series, if any.
    pub exclude_collection: Option<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fee_rate: Decimal::from_str_exact(DEFAULT_FEE_RATE).unwrap(),
            pf_threshold: Decimal::from_str_exact(DEFAULT_PF_THRESHOLD).unwrap(),
            histogram_bin_seconds: DEFAULT_HISTOGRAM_BIN_SECONDS,
            histogram_span_minutes: DEFAULT_HISTOGRAM_SPAN_MINUTES,
            exclude_collection: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VolumeEntry {
    pub usd: Decimal,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrendPoint {
    pub date: NaiveDate,
    pub events: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LiquidityStats {
    pub mean_days_wash_to_next: Option<Decimal>,
    pub mean_days_non_wash_to_next: Option<Decimal>,
    pub wash_transitions: usize,
    pub non_wash_transitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfitCase {
    #[serde(flatten)]
    pub token_key: TokenKey,
    pub window_index: usize,
    pub fees_usd: Decimal,
    pub exit_price_usd: Decimal,
    pub gain_usd: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GainLossBin {
    pub start_usd: Decimal,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepDelta {
    /// Position of the sale after the wash window, 1-based.
    pub step: usize,
    pub samples: usize,
    pub mean_usd: Option<Decimal>,
    pub median_usd: Option<Decimal>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfitabilityStats {
    pub qualifying_windows: usize,
    pub profitable_fraction: Option<Decimal>,
    pub gain_loss_bins: Vec<GainLossBin>,
    pub resale_lower_fraction_wash: Option<Decimal>,
    pub resale_lower_fraction_benign: Option<Decimal>,
    pub per_step_price_deltas: Vec<StepDelta>,
    /// Sum of the positive per-step deltas: what later buyers paid above
    /// the last wash price.
    pub total_user_loss_usd: Decimal,
    pub cases: Vec<ProfitCase>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PearsonStats {
    pub r_funding_vs_price: Option<f64>,
    pub r_restitution_vs_price: Option<f64>,
    pub funding_samples: usize,
    pub restitution_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PriceSagCase {
    #[serde(flatten)]
    pub token_key: TokenKey,
    /// Index of the first sale of the sag triple among the token's sales.
    pub pf_index: usize,
    pub record_indices: [usize; 3],
    pub prices_usd: [Decimal; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistogramBin {
    pub start_seconds: i64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExclusionImpact {
    pub usd_before: Decimal,
    pub usd_after: Decimal,
    pub usd_removed: Decimal,
    pub decrease_fraction: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalyticsReport {
    pub volume_by_type: BTreeMap<String, VolumeEntry>,
    pub trend: Vec<TrendPoint>,
    pub liquidity: LiquidityStats,
    pub profitability: ProfitabilityStats,
    pub pearson: PearsonStats,
    pub price_sag_cases: Vec<PriceSagCase>,
    pub eth_transfer_histogram: Vec<HistogramBin>,
    pub exclusion_impact: BTreeMap<String, ExclusionImpact>,
}

/// USD totals and flagged event counts per detection type.
pub fn volume_summary(findings: &FindingSet) -> BTreeMap<String, VolumeEntry> {
    let mut map = BTreeMap::new();
    map.insert(
        "roundTrip".to_string(),
        VolumeEntry {
            usd: findings.round_trip.iter().map(|f| f.usd_value).sum(),
            events: findings
                .round_trip
                .iter()
                .map(|f| f.flagged_records.len())
                .sum(),
        },
    );
    map.insert(
        "unprofitable".to_string(),
        VolumeEntry {
            usd: findings
                .unprofitable
                .iter()
                .filter_map(|f| f.sale_usd)
                .sum(),
            events: findings.unprofitable.len(),
        },
    );
    map.insert(
        "hidden".to_string(),
        VolumeEntry {
            usd: findings.hidden.iter().map(|f| f.usd_value).sum(),
            events: findings.hidden.iter().map(|f| f.len).sum(),
        },
    );
    map
}

/// Per-day counts of distinct flagged sale and transfer events, optionally
/// leaving one dominant collection out.
pub fn trend_series(
    corpus: &[EventSequence],
    findings: &FindingSet,
    exclude_collection: Option<&str>,
) -> Vec<TrendPoint> {
    let index = token_index(corpus);
    let mut flagged: BTreeMap<usize, std::collections::BTreeSet<usize>> = BTreeMap::new();
    let mut mark = |key: &TokenKey, records: &mut dyn Iterator<Item = usize>| {
        if let Some(&seq_i) = index.get(key) {
            flagged.entry(seq_i).or_default().extend(records);
        }
    };
    for f in &findings.round_trip {
        mark(&f.token_key, &mut f.flagged_records.iter().copied());
    }
    for f in &findings.unprofitable {
        mark(&f.token_key, &mut std::iter::once(f.sale_index));
    }
    for f in &findings.hidden {
        mark(&f.token_key, &mut (f.start_index..f.start_index + f.len));
    }

    let mut buckets: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for (seq_i, records) in &flagged {
        let seq = &corpus[*seq_i];
        if exclude_collection.is_some_and(|c| seq.collection == c) {
            continue;
        }
        for &r in records {
            let record = &seq.records[r];
            if record.event_type == EventType::Minted {
                continue;
            }
            *buckets.entry(record.timestamp.date_naive()).or_default() += 1;
        }
    }
    buckets
        .into_iter()
        .map(|(date, events)| TrendPoint { date, events })
        .collect()
}

/// Mean days from a window's last event to the next window's first event,
/// split by whether the current window is wash-traded. Only transitions
/// into a non-wash-traded window count.
pub fn liquidity_transition(
    corpus: &[EventSequence],
    windows: &[TokenWindows],
    round_trip: &[RoundTripFinding],
) -> LiquidityStats {
    let wash = wash_window_set(round_trip);
    let index = token_index(corpus);
    let mut sums = [Decimal::ZERO, Decimal::ZERO];
    let mut counts = [0usize, 0usize];
    for tw in windows {
        let Some(&seq_i) = index.get(&tw.token_key) else {
            continue;
        };
        let seq = &corpus[seq_i];
        for pair in tw.windows.windows(2) {
            let (cur, next) = (&pair[0], &pair[1]);
            if wash.contains(&(tw.token_key.clone(), next.index)) {
                continue;
            }
            let gap = seq.records[next.start].timestamp - seq.records[cur.end - 1].timestamp;
            let days = Decimal::from(gap.num_seconds()) / Decimal::from(SECONDS_PER_DAY);
            let bucket = usize::from(!wash.contains(&(tw.token_key.clone(), cur.index)));
            sums[bucket] += days;
            counts[bucket] += 1;
        }
    }
    let mean = |i: usize| (counts[i] > 0).then(|| sums[i] / Decimal::from(counts[i] as u64));
    LiquidityStats {
        mean_days_wash_to_next: mean(0),
        mean_days_non_wash_to_next: mean(1),
        wash_transitions: counts[0],
        non_wash_transitions: counts[1],
    }
}

/// Wash-exit profitability: for each wash-traded window followed by a
/// non-wash-traded one, the exit gain is the next window's first sale
/// price minus the wash window's total service fees (intra-pair payments
/// net out between colluders, so fees are the only true cost). Also
/// tracks up to seven follow-on sale prices against the last wash price,
/// and how often resales under-cut the prior window.
pub fn profitability_analysis(
    corpus: &[EventSequence],
    windows: &[TokenWindows],
    round_trip: &[RoundTripFinding],
    prices: &PriceTable,
    fee_rate: Decimal,
) -> ProfitabilityStats {
    let wash = wash_window_set(round_trip);
    let index = token_index(corpus);

    let mut cases = Vec::new();
    let mut step_deltas: Vec<Vec<Decimal>> = vec![Vec::new(); MAX_FOLLOW_STEPS];
    let mut resale_lower = [0usize, 0usize];
    let mut resale_total = [0usize, 0usize];

    for tw in windows {
        let Some(&seq_i) = index.get(&tw.token_key) else {
            continue;
        };
        let seq = &corpus[seq_i];
        for pair in tw.windows.windows(2) {
            let (cur, next) = (&pair[0], &pair[1]);
            if wash.contains(&(tw.token_key.clone(), next.index)) {
                continue;
            }
            let cur_is_wash = wash.contains(&(tw.token_key.clone(), cur.index));
            let last_cur_sale = last_sale_usd(seq, cur, prices);
            let first_next_sale = first_sale_usd(seq, next, prices);

            if let (Some(last), Some(first)) = (&last_cur_sale, &first_next_sale) {
                let bucket = usize::from(!cur_is_wash);
                resale_total[bucket] += 1;
                if first < last {
                    resale_lower[bucket] += 1;
                }
            }

            if !cur_is_wash {
                continue;
            }
            let Some(exit_price) = first_next_sale else {
                continue;
            };
            let fees: Decimal = cur
                .records(seq)
                .iter()
                .filter(|r| r.is_sale())
                .filter_map(|r| sale_usd(r, prices))
                .sum::<Decimal>()
                * fee_rate;
            if fees > exit_price {
                continue;
            }
            cases.push(ProfitCase {
                token_key: tw.token_key.clone(),
                window_index: cur.index,
                fees_usd: fees,
                exit_price_usd: exit_price,
                gain_usd: exit_price - fees,
            });

            if let Some(last_wash) = last_cur_sale {
                let mut step = 0;
                for r in &seq.records[cur.end..] {
                    if step == MAX_FOLLOW_STEPS {
                        break;
                    }
                    if !r.is_sale() {
                        continue;
                    }
                    if let Some(usd) = sale_usd(r, prices) {
                        step_deltas[step].push(usd - last_wash);
                    }
                    step += 1;
                }
            }
        }
    }

    let qualifying_windows = cases.len();
    let profitable = cases.iter().filter(|c| c.gain_usd > Decimal::ZERO).count();
    let gain_bin = Decimal::from_str_exact(GAIN_BIN_USD).unwrap();
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for c in &cases {
        let idx = (c.gain_usd / gain_bin).floor().to_i64().unwrap_or(0);
        *bins.entry(idx).or_default() += 1;
    }

    let total_user_loss_usd = step_deltas
        .iter()
        .flatten()
        .filter(|d| **d > Decimal::ZERO)
        .sum();
    let per_step_price_deltas = step_deltas
        .iter()
        .enumerate()
        .map(|(i, deltas)| {
            let mut sorted = deltas.clone();
            sorted.sort();
            StepDelta {
                step: i + 1,
                samples: sorted.len(),
                mean_usd: mean(&sorted),
                median_usd: median(&sorted),
            }
        })
        .collect();

    let fraction = |num: usize, den: usize| {
        (den > 0).then(|| Decimal::from(num as u64) / Decimal::from(den as u64))
    };
    ProfitabilityStats {
        qualifying_windows,
        profitable_fraction: fraction(profitable, qualifying_windows),
        gain_loss_bins: bins
            .into_iter()
            .map(|(idx, count)| GainLossBin {
                start_usd: Decimal::from(idx) * gain_bin,
                count,
            })
            .collect(),
        resale_lower_fraction_wash: fraction(resale_lower[0], resale_total[0]),
        resale_lower_fraction_benign: fraction(resale_lower[1], resale_total[1]),
        per_step_price_deltas,
        total_user_loss_usd,
        cases,
    }
}

/// Sample Pearson correlation coefficient. None below two points or when
/// either series is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation of evidence-transfer totals against sale prices across the
/// unprofitable findings, split by evidence direction.
pub fn pearson_stats(unprofitable: &[UnprofitableFinding]) -> PearsonStats {
    let mut funding: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut restitution: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for f in unprofitable {
        let Some(price) = f.sale_usd.and_then(|d| d.to_f64()) else {
            continue;
        };
        for (direction, series) in [
            (EvidenceDirection::FundingBefore, &mut funding),
            (EvidenceDirection::RestitutionAfter, &mut restitution),
        ] {
            let total: Decimal = f
                .evidence
                .iter()
                .filter(|e| e.direction == direction)
                .filter_map(|e| e.usd)
                .sum();
            if f.evidence.iter().any(|e| e.direction == direction) {
                if let Some(total) = total.to_f64() {
                    series.0.push(total);
                    series.1.push(price);
                }
            }
        }
    }
    PearsonStats {
        r_funding_vs_price: pearson(&funding.0, &funding.1),
        r_restitution_vs_price: pearson(&restitution.0, &restitution.1),
        funding_samples: funding.0.len(),
        restitution_samples: restitution.0.len(),
    }
}

/// Severe price sags: three consecutive sales where the middle price is
/// more than `threshold` times below both neighbors. Comparisons are
/// multiplicative in USD, so mixed payment tokens and zero prices behave.
pub fn price_sag(
    corpus: &[EventSequence],
    prices: &PriceTable,
    threshold: Decimal,
) -> Vec<PriceSagCase> {
    let mut cases = Vec::new();
    for seq in corpus {
        let sales: Vec<(usize, Option<Decimal>)> = seq
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_sale())
            .map(|(i, r)| (i, sale_usd(r, prices)))
            .collect();
        for (pf_index, triple) in sales.windows(3).enumerate() {
            let (Some(p0), Some(p1), Some(p2)) = (triple[0].1, triple[1].1, triple[2].1) else {
                continue;
            };
            if p0 > threshold * p1 && p2 > threshold * p1 {
                cases.push(PriceSagCase {
                    token_key: seq.token_key(),
                    pf_index,
                    record_indices: [triple[0].0, triple[1].0, triple[2].0],
                    prices_usd: [p0, p1, p2],
                });
            }
        }
    }
    cases
}

/// Signed-offset histogram of ETH evidence transfers around their sales.
/// Bins are fixed and zero-filled over the full span so empty input still
/// renders a complete axis.
pub fn eth_transfer_histogram(
    unprofitable: &[UnprofitableFinding],
    bin_seconds: i64,
    span_minutes: i64,
) -> Vec<HistogramBin> {
    assert!(bin_seconds > 0 && span_minutes > 0);
    let span = span_minutes * 60;
    let mut starts = Vec::new();
    let mut s = -span;
    while s <= span {
        starts.push(s);
        s += bin_seconds;
    }
    let mut counts = vec![0usize; starts.len()];
    for f in unprofitable {
        for e in &f.evidence {
            if e.kind != EvidenceKind::Eth {
                continue;
            }
            let offset = (e.timestamp - f.sale_timestamp).num_seconds();
            let start = offset.div_euclid(bin_seconds) * bin_seconds;
            if start < -span || start > span {
                continue;
            }
            counts[((start + span) / bin_seconds) as usize] += 1;
        }
    }
    starts
        .into_iter()
        .zip(counts)
        .map(|(start_seconds, count)| HistogramBin {
            start_seconds,
            count,
        })
        .collect()
}

/// Every address named by a mined pair or group.
pub fn mined_member_addresses(mining: &MiningReport) -> std::collections::BTreeSet<Address> {
    let mut members: std::collections::BTreeSet<Address> = std::collections::BTreeSet::new();
    for p in &mining.pairs {
        members.extend(p.addresses.iter().cloned());
    }
    for g in &mining.groups {
        members.extend(g.addresses.iter().cloned());
    }
    members
}

/// Volume before and after dropping every finding that involves a mined
/// trader. Removal always drops the whole finding, so a hidden run's full
/// volume disappears with it.
pub fn exclusion_impact(
    findings: &FindingSet,
    members: &std::collections::BTreeSet<Address>,
) -> BTreeMap<String, ExclusionImpact> {
    let rt = split_usd(findings.round_trip.iter().map(|f| {
        let hit = f.cycle_nodes.iter().any(|a| members.contains(a));
        (f.usd_value, hit)
    }));
    let un = split_usd(findings.unprofitable.iter().map(|f| {
        let hit = members.contains(&f.seller) || members.contains(&f.buyer);
        (f.sale_usd.unwrap_or_default(), hit)
    }));
    let hi = split_usd(findings.hidden.iter().map(|f| {
        let hit = f.participants.iter().any(|a| members.contains(a));
        (f.usd_value, hit)
    }));
    [("roundTrip", rt), ("unprofitable", un), ("hidden", hi)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn split_usd(values: impl Iterator<Item = (Decimal, bool)>) -> ExclusionImpact {
    let mut kept = Decimal::ZERO;
    let mut removed = Decimal::ZERO;
    for (usd, hit) in values {
        if hit {
            removed += usd;
        } else {
            kept += usd;
        }
    }
    let before = kept + removed;
    ExclusionImpact {
        usd_before: before,
        usd_after: kept,
        usd_removed: removed,
        decrease_fraction: if before > Decimal::ZERO {
            removed / before
        } else {
            Decimal::ZERO
        },
    }
}

/// Assemble the full report.
pub fn full_report(
    corpus: &[EventSequence],
    windows: &[TokenWindows],
    findings: &FindingSet,
    mining: Option<&MiningReport>,
    prices: &PriceTable,
    cfg: &AnalysisConfig,
) -> AnalyticsReport {
    let members = mining.map(mined_member_addresses).unwrap_or_default();
    AnalyticsReport {
        volume_by_type: volume_summary(findings),
        trend: trend_series(corpus, findings, cfg.exclude_collection.as_deref()),
        liquidity: liquidity_transition(corpus, windows, &findings.round_trip),
        profitability: profitability_analysis(
            corpus,
            windows,
            &findings.round_trip,
            prices,
            cfg.fee_rate,
        ),
        pearson: pearson_stats(&findings.unprofitable),
        price_sag_cases: price_sag(corpus, prices, cfg.pf_threshold),
        eth_transfer_histogram: eth_transfer_histogram(
            &findings.unprofitable,
            cfg.histogram_bin_seconds,
            cfg.histogram_span_minutes,
        ),
        exclusion_impact: exclusion_impact(findings, &members),
    }
}

pub fn trend_csv(trend: &[TrendPoint]) -> String {
    let mut out = String::from("date,events\n");
    for p in trend {
        out.push_str(&format!("{},{}\n", p.date, p.events));
    }
    out
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("binStartSeconds,count\n");
    for b in bins {
        out.push_str(&format!("{},{}\n", b.start_seconds, b.count));
    }
    out
}

pub fn gain_loss_csv(cases: &[ProfitCase]) -> String {
    let mut out = String::from("collection,tokenId,windowIndex,feesUsd,exitPriceUsd,gainUsd\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.token_key.collection,
            c.token_key.token_id,
            c.window_index,
            c.fees_usd.normalize(),
            c.exit_price_usd.normalize(),
            c.gain_usd.normalize()
        ));
    }
    out
}

pub fn price_deltas_csv(steps: &[StepDelta]) -> String {
    let mut out = String::from("step,samples,meanUsd,medianUsd\n");
    for s in steps {
        let fmt = |d: &Option<Decimal>| d.map(|v| v.normalize().to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.step,
            s.samples,
            fmt(&s.mean_usd),
            fmt(&s.median_usd)
        ));
    }
    out
}

fn token_index(corpus: &[EventSequence]) -> BTreeMap<TokenKey, usize> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| (s.token_key(), i))
        .collect()
}

fn wash_window_set(
    round_trip: &[RoundTripFinding],
) -> std::collections::BTreeSet<(TokenKey, usize)> {
    round_trip
        .iter()
        .map(|f| (f.token_key.clone(), f.window_index))
        .collect()
}

fn first_sale_usd(seq: &EventSequence, w: &TimeWindow, prices: &PriceTable) -> Option<Decimal> {
    w.records(seq)
        .iter()
        .find(|r| r.is_sale())
        .and_then(|r| sale_usd(r, prices))
}

fn last_sale_usd(seq: &EventSequence, w: &TimeWindow, prices: &PriceTable) -> Option<Decimal> {
    w.records(seq)
        .iter()
        .rev()
        .find(|r| r.is_sale())
        .and_then(|r| sale_usd(r, prices))
}

fn mean(values: &[Decimal]) -> Option<Decimal> {
    (!values.is_empty())
        .then(|| values.iter().sum::<Decimal>() / Decimal::from(values.len() as u64))
}

/// Median of an already sorted slice; even lengths average the middles.
fn median(sorted: &[Decimal]) -> Option<Decimal> {
    if sorted.is_empty() {
        return None;
    }
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / Decimal::TWO
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventType;
    use crate::pipeline::{detect_corpus, segment_corpus, DetectorConfig};
    use crate::testutil::{addr, dec, dt, rec, sale, seq};

    fn detect(
        corpus: &[EventSequence],
    ) -> (Vec<TokenWindows>, FindingSet, PriceTable, DetectorConfig) {
        let prices = PriceTable::default();
        let config = DetectorConfig::default();
        let windows = segment_corpus(corpus, config.initial_ati_seconds);
        let findings = detect_corpus(corpus, &windows, &[], &[], &prices, &config).unwrap();
        (windows, findings, prices, config)
    }

    /// Six colluder sales totalling 0.4, then an exit sale at 1.0 a day
    /// later; USD rate pinned at 1 so USD equals the quoted price.
    fn wash_exit_corpus() -> Vec<EventSequence> {
        let prices_eth = ["0.06", "0.064", "0.066", "0.068", "0.07", "0.072"];
        let mut records = vec![rec("0x0", "0xa", EventType::Minted, dt(0), Some("0xm"))];
        for (i, p) in prices_eth.iter().enumerate() {
            let (f, t) = if i % 2 == 0 { ("0xa", "0xb") } else { ("0xb", "0xa") };
            records.push(sale(
                f,
                t,
                dt(60 * (i as i64 + 1)),
                p,
                Some("1"),
                Some(&format!("0xs{i}")),
            ));
        }
        records.push(sale("0xa", "0xc", dt(90_000), "1", Some("1"), Some("0xe")));
        vec![seq(records)]
    }

    #[test]
    fn volume_totals_follow_the_table_arithmetic() {
        let f = FindingSet {
            unprofitable: vec![crate::unprofitable::UnprofitableFinding {
                token_key: TokenKey::new("Alpha Shark", "9"),
                sale_index: 2,
                seller: addr("0x9164e3"),
                buyer: addr("0x99264d"),
                sale_timestamp: dt(0),
                sale_txn_hash: None,
                sale_usd: Some(dec("2.9") * dec("1215.68")),
                evidence: vec![],
                total_evidence_usd: Decimal::ZERO,
            }],
            ..FindingSet::default()
        };
        let v = volume_summary(&f);
        assert_eq!(v["unprofitable"].usd, dec("3525.472"));
        assert_eq!(v["unprofitable"].events, 1);
        assert_eq!(v["roundTrip"], VolumeEntry::default());
        assert_eq!(v["hidden"], VolumeEntry::default());
    }

    #[test]
    fn empty_findings_produce_zero_volume() {
        let v = volume_summary(&FindingSet::default());
        assert!(v.values().all(|e| e.usd.is_zero() && e.events == 0));
    }

    #[test]
    fn trend_buckets_by_utc_day_and_honors_exclusion() {
        let corpus = wash_exit_corpus();
        let (_, findings, _, _) = detect(&corpus);
        assert_eq!(findings.round_trip.len(), 1);

        let trend = trend_series(&corpus, &findings, None);
        // All six flagged sales land on one day.
        assert_eq!(trend.len(), 1);
        assert_eq!(trend[0].events, 6);

        let excluded = trend_series(&corpus, &findings, Some("testcoll"));
        assert!(excluded.is_empty());
    }

    #[test]
    fn liquidity_measures_the_window_gap_in_days() {
        let corpus = wash_exit_corpus();
        let (windows, findings, _, _) = detect(&corpus);
        let stats = liquidity_transition(&corpus, &windows, &findings.round_trip);
        assert_eq!(stats.wash_transitions, 1);
        assert_eq!(stats.non_wash_transitions, 0);
        // 90 000 s - 360 s = 89 640 s = 1.0375 days.
        assert_eq!(stats.mean_days_wash_to_next, Some(dec("1.0375")));
        assert_eq!(stats.mean_days_non_wash_to_next, None);
    }

    #[test]
    fn wash_exit_gain_is_exact() {
        let corpus = wash_exit_corpus();
        let (windows, findings, prices, _) = detect(&corpus);
        let stats =
            profitability_analysis(&corpus, &windows, &findings.round_trip, &prices, dec("0.025"));
        assert_eq!(stats.qualifying_windows, 1);
        let case = &stats.cases[0];
        // Fees: 0.025 x 0.4 = 0.01; gain: 1 - 0.01 = 0.99 exactly.
        assert_eq!(case.fees_usd, dec("0.010"));
        assert_eq!(case.gain_usd, dec("0.990"));
        assert_eq!(stats.profitable_fraction, Some(Decimal::ONE));
        // One follow-on sale: 1.0 against the last wash price 0.072.
        assert_eq!(stats.per_step_price_deltas[0].samples, 1);
        assert_eq!(stats.per_step_price_deltas[0].mean_usd, Some(dec("0.928")));
        assert_eq!(stats.per_step_price_deltas[1].samples, 0);
        assert_eq!(stats.total_user_loss_usd, dec("0.928"));
        // The exit price rose, so no under-cutting resale.
        assert_eq!(stats.resale_lower_fraction_wash, Some(Decimal::ZERO));
        assert_eq!(stats.resale_lower_fraction_benign, None);
    }

    #[test]
    fn exit_below_fees_does_not_qualify() {
        let mut corpus = wash_exit_corpus();
        // Exit sale price below the 0.01 fee total.
        let last = corpus[0].records.len() - 1;
        corpus[0].records[last].num_token = Some(dec("0.005"));
        let (windows, findings, prices, _) = detect(&corpus);
        let stats =
            profitability_analysis(&corpus, &windows, &findings.round_trip, &prices, dec("0.025"));
        assert_eq!(stats.qualifying_windows, 0);
        assert_eq!(stats.profitable_fraction, None);
    }

    #[test]
    fn pearson_hits_the_exact_linear_poles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let doubled: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let negated: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &doubled).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &negated).unwrap() + 1.0).abs() < 1e-15);
        // Symmetry and scale invariance.
        let ys = [4.0, 1.0, 3.0, 2.0];
        let r = pearson(&xs, &ys).unwrap();
        assert!((pearson(&ys, &xs).unwrap() - r).abs() < 1e-15);
        let scaled: Vec<f64> = xs.iter().map(|x| 5.0 * x + 7.0).collect();
        assert!((pearson(&scaled, &ys).unwrap() - r).abs() < 1e-12);
        // Degenerate inputs.
        assert_eq!(pearson(&[1.0], &[2.0]), None);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn price_sag_needs_both_ratios_strictly_over_threshold() {
        let mk = |p0: &str, p1: &str, p2: &str| {
            vec![seq(vec![
                sale("0xa", "0xb", dt(0), p0, Some("1"), Some("0x01")),
                sale("0xb", "0xc", dt(1000), p1, Some("1"), Some("0x02")),
                sale("0xc", "0xd", dt(2000), p2, Some("1"), Some("0x03")),
            ])]
        };
        let prices = PriceTable::default();
        let threshold = dec("1000");

        let sag = price_sag(&mk("3000", "0.002", "2.5"), &prices, threshold);
        assert_eq!(sag.len(), 1);
        assert_eq!(sag[0].pf_index, 0);
        assert_eq!(sag[0].record_indices, [0, 1, 2]);

        // Exactly 1000x on one side fails the strict test.
        assert!(price_sag(&mk("2", "0.002", "2.5"), &prices, threshold).is_empty());
        // Monotone prices never sag.
        assert!(price_sag(&mk("1", "2", "3"), &prices, threshold).is_empty());
        // A zero middle price sags when both neighbors are positive.
        assert_eq!(price_sag(&mk("1", "0", "1"), &prices, threshold).len(), 1);
    }

    #[test]
    fn histogram_places_an_early_transfer_in_the_minus_one_bin() {
        use crate::unprofitable::{Evidence, EvidenceDirection, EvidenceKind};
        let finding = crate::unprofitable::UnprofitableFinding {
            token_key: TokenKey::new("c", "1"),
            sale_index: 0,
            seller: addr("0xa"),
            buyer: addr("0xb"),
            sale_timestamp: dt(10_000),
            sale_txn_hash: None,
            sale_usd: None,
            evidence: vec![Evidence {
                txn_hash: "0x01".into(),
                kind: EvidenceKind::Eth,
                direction: EvidenceDirection::FundingBefore,
                timestamp: dt(10_000 - 4),
                token: "ETH".into(),
                amount: dec("0.96"),
                usd: None,
            }],
            total_evidence_usd: Decimal::ZERO,
        };
        let bins = eth_transfer_histogram(&[finding], 60, 20);
        assert_eq!(bins.len(), 41);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 1);
        let hit = bins.iter().find(|b| b.count == 1).unwrap();
        assert_eq!(hit.start_seconds, -60);

        let empty = eth_transfer_histogram(&[], 60, 20);
        assert_eq!(empty.len(), 41);
        assert!(empty.iter().all(|b| b.count == 0));
        assert_eq!(empty[0].start_seconds, -1200);
        assert_eq!(empty[40].start_seconds, 1200);
    }

    #[test]
    fn exclusion_removes_findings_by_member_address_exactly() {
        let rt = |usd: &str, node: &str| crate::roundtrip::RoundTripFinding {
            token_key: TokenKey::new("c", "1"),
            window_index: 0,
            cycle_nodes: vec![addr(node), addr("0xff")],
            walk_count: 100,
            all_sale_walk_exists: false,
            flagged_records: vec![0],
            txn_hashes: Default::default(),
            usd_value: dec(usd),
        };
        let findings = FindingSet {
            round_trip: vec![rt("10", "0xa"), rt("5", "0xb")],
            ..FindingSet::default()
        };

        let none = exclusion_impact(&findings, &Default::default());
        assert_eq!(none["roundTrip"].usd_removed, Decimal::ZERO);
        assert_eq!(none["roundTrip"].decrease_fraction, Decimal::ZERO);

        let members = [addr("0xa")].into();
        let impact = exclusion_impact(&findings, &members);
        let rt_impact = &impact["roundTrip"];
        assert_eq!(rt_impact.usd_before, dec("15"));
        assert_eq!(rt_impact.usd_removed, dec("10"));
        assert_eq!(rt_impact.usd_after + rt_impact.usd_removed, rt_impact.usd_before);
        assert_eq!(rt_impact.decrease_fraction, dec("10") / dec("15"));

        let all = [addr("0xa"), addr("0xb")].into();
        let impact = exclusion_impact(&findings, &all);
        assert_eq!(impact["roundTrip"].decrease_fraction, Decimal::ONE);
        assert_eq!(impact["roundTrip"].usd_after, Decimal::ZERO);
    }

    #[test]
    fn report_assembles_and_serializes_deterministically() {
        let corpus = wash_exit_corpus();
        let (windows, findings, prices, _) = detect(&corpus);
        let cfg = AnalysisConfig::default();
        let a = full_report(&corpus, &windows, &findings, None, &prices, &cfg);
        let b = full_report(&corpus, &windows, &findings, None, &prices, &cfg);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(a.volume_by_type["roundTrip"].usd > Decimal::ZERO);

        let csv = gain_loss_csv(&a.profitability.cases);
        assert!(csv.contains("testcoll,1,0,0.01,1,0.99"));
        assert_eq!(trend_csv(&a.trend).lines().count(), 2);
        assert_eq!(histogram_csv(&a.eth_transfer_histogram).lines().count(), 42);
        assert_eq!(price_deltas_csv(&a.profitability.per_step_price_deltas)
            .lines()
            .count(), 8);
    }

    #[test]
    fn medians_average_the_middle_pair() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[dec("3")]), Some(dec("3")));
        assert_eq!(median(&[dec("1"), dec("2")]), Some(dec("1.5")));
        assert_eq!(median(&[dec("1"), dec("2"), dec("10")]), Some(dec("2")));
    }
}
