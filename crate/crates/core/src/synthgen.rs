//! Labeled synthetic corpora: benign baselines calibrated to stay outside
//! every detection rule, plus injected round-trip, unprofitable, and hidden
//! patterns with sidecar ground-truth labels. Also ships replicas of the
//! four worked examples used by the acceptance suite.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::model::{
    Address, BlockTxn, Erc20Transfer, EventRecord, EventSequence, EventType, PricePoint,
    PriceTable, TokenKey,
};
use crate::pipeline::FindingSet;
use crate::windowing::DEFAULT_INITIAL_ATI_SECS;

/// Canonical wrapped-ETH contract, used as the ERC-20 price key.
pub const WETH_CONTRACT: &str = "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2";
const ETH_KEY: &str = "eth";
const ETH_USD: &str = "2000";
const COLLECTION: &str = "synthetic";
const MILLI: i64 = 1_000;
const WEI_PER_MILLI_ETH: u128 = 1_000_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PatternKind {
    RoundTrip,
    Unprofitable,
    Hidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FundingKind {
    Eth,
    Weth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct InjectionParams {
    /// Sales in each direction of a round-trip ping-pong.
    pub round_trip_length: usize,
    /// Sale price range in 0.001-ETH steps, inclusive.
    pub price_band_milli_eth: [i64; 2],
    /// Evidence transfer offset from the sale; negative is before.
    pub transfer_offset_seconds: i64,
    pub funding_kind: FundingKind,
    pub private_run_length: usize,
}

impl Default for InjectionParams {
    fn default() -> Self {
        InjectionParams {
            round_trip_length: 10,
            price_band_milli_eth: [60, 90],
            transfer_offset_seconds: -180,
            funding_kind: FundingKind::Eth,
            private_run_length: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InjectionSpec {
    pub pattern: PatternKind,
    pub count: usize,
    #[serde(default)]
    pub params: InjectionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ScenarioSpec {
    pub seed: u64,
    /// Total tokens; injections claim theirs from this budget.
    pub n_tokens: usize,
    pub n_addresses: usize,
    /// Fraction of benign non-mint events that are sales.
    pub benign_sale_rate: Decimal,
    pub injections: Vec<InjectionSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 7,
            n_tokens: 20,
            n_addresses: 200,
            benign_sale_rate: Decimal::from_str_exact("0.5").unwrap(),
            injections: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelEntry {
    pub pattern: PatternKind,
    #[serde(flatten)]
    pub token_key: TokenKey,
    /// Indices of the injected records within the token's sequence.
    pub record_indices: Vec<usize>,
    pub addresses: BTreeSet<Address>,
    pub txn_hashes: BTreeSet<String>,
    /// Generator-side USD accounting of the injected sales.
    pub usd_value: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Labels {
    pub entries: Vec<LabelEntry>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub sequences: Vec<EventSequence>,
    pub block_txns: Vec<BlockTxn>,
    pub erc20_txns: Vec<Erc20Transfer>,
    pub prices: PriceTable,
    pub labels: Labels,
}

struct Generator {
    rng: ChaCha8Rng,
    base: DateTime<Utc>,
    wash_counter: usize,
    hash_counter: usize,
    eth_rate: Decimal,
}

impl Generator {
    fn benign_address(i: usize) -> Address {
        Address::parse(&format!("0xaaaa{:036x}", i + 1)).unwrap()
    }

    fn next_wash_address(&mut self) -> Address {
        self.wash_counter += 1;
        Address::parse(&format!("0xbbbb{:036x}", self.wash_counter)).unwrap()
    }

    fn next_hash(&mut self) -> String {
        self.hash_counter += 1;
        format!("0x{:016x}", self.hash_counter)
    }

    fn price_from_band(&mut self, band: [i64; 2]) -> Decimal {
        let milli = self.rng.gen_range(band[0]..=band[1]);
        Decimal::new(milli, 3).normalize()
    }
}

fn zero() -> Address {
    Address::parse("0x0000000000000000000000000000000000000000").unwrap()
}

fn record(
    token_id: &str,
    timestamp: DateTime<Utc>,
    from: Address,
    to: Address,
    event_type: EventType,
    txn_hash: String,
) -> EventRecord {
    EventRecord {
        timestamp,
        collection: COLLECTION.into(),
        token_id: token_id.into(),
        from,
        to,
        event_type,
        is_private: None,
        pay_token: None,
        num_token: None,
        usd_token: None,
        txn_hash: Some(txn_hash),
    }
}

fn sale_record(
    token_id: &str,
    timestamp: DateTime<Utc>,
    from: Address,
    to: Address,
    price_eth: Decimal,
    rate: Decimal,
    private: bool,
    txn_hash: String,
) -> EventRecord {
    let mut r = record(token_id, timestamp, from, to, EventType::Sale, txn_hash);
    r.is_private = Some(private);
    r.pay_token = Some("ETH".into());
    r.num_token = Some(price_eth);
    r.usd_token = Some(rate);
    r
}

/// Generate a corpus for the scenario. Same spec, same bytes.
pub fn generate(spec: &ScenarioSpec) -> Result<SynthCorpus, DataError> {
    let injected: usize = spec.injections.iter().map(|i| i.count).sum();
    if injected > spec.n_tokens {
        return Err(DataError::Invalid(format!(
            "{injected} injections exceed the {}-token budget",
            spec.n_tokens
        )));
    }
    if spec.benign_sale_rate < Decimal::ZERO || spec.benign_sale_rate > Decimal::ONE {
        return Err(DataError::Invalid(format!(
            "benign sale rate {} outside [0, 1]",
            spec.benign_sale_rate
        )));
    }
    if spec.n_addresses < 10 {
        return Err(DataError::Invalid(
            "at least 10 benign addresses required".into(),
        ));
    }
    for inj in &spec.injections {
        if inj.params.round_trip_length == 0 || inj.params.private_run_length == 0 {
            return Err(DataError::Invalid("injection lengths must be positive".into()));
        }
        let [lo, hi] = inj.params.price_band_milli_eth;
        if lo <= 0 || hi < lo {
            return Err(DataError::Invalid(format!(
                "price band [{lo}, {hi}] milli-ETH is not a positive range"
            )));
        }
    }

    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        base: Utc.with_ymd_and_hms(2021, 6, 1, 0, 0, 0).unwrap(),
        wash_counter: 0,
        hash_counter: 0,
        eth_rate: Decimal::from_str_exact(ETH_USD).unwrap(),
    };
    let mut corpus = SynthCorpus {
        sequences: Vec::new(),
        block_txns: Vec::new(),
        erc20_txns: Vec::new(),
        prices: PriceTable::new(),
        labels: Labels::default(),
    };

    let benign = spec.n_tokens - injected;
    for i in 0..benign {
        let seq = benign_sequence(&mut g, spec, i);
        corpus.sequences.push(seq);
    }
    let mut token_no = 0;
    for inj in &spec.injections {
        for _ in 0..inj.count {
            let token_id = format!("w{token_no:04}");
            token_no += 1;
            match inj.pattern {
                PatternKind::RoundTrip => inject_round_trip(&mut g, &mut corpus, &token_id, inj),
                PatternKind::Unprofitable => {
                    inject_unprofitable(&mut g, &mut corpus, &token_id, inj)
                }
                PatternKind::Hidden => inject_hidden(&mut g, &mut corpus, &token_id, inj),
            }
        }
    }

    fill_prices(&mut corpus)?;
    Ok(corpus)
}

/// Benign history: a fresh counterparty for every hop and gaps far above
/// the window-join threshold, so no window ever holds two events.
fn benign_sequence(g: &mut Generator, spec: &ScenarioSpec, i: usize) -> EventSequence {
    let token_id = format!("b{i:04}");
    let n_events = g.rng.gen_range(3..=8usize);
    let owners = sample(&mut g.rng, spec.n_addresses, n_events + 1);
    let mut t = g.base
        + Duration::seconds(g.rng.gen_range(0..30 * 86_400))
        + Duration::seconds(i as i64);

    let sale_per_mille = (spec.benign_sale_rate * Decimal::from(MILLI))
        .trunc()
        .mantissa() as i64;
    let mut records = vec![record(
        &token_id,
        t,
        zero(),
        Generator::benign_address(owners.index(0)),
        EventType::Minted,
        g.next_hash(),
    )];
    for j in 0..n_events {
        let ati = DEFAULT_INITIAL_ATI_SECS as i64;
        t += Duration::seconds(g.rng.gen_range(2 * ati..=10 * ati));
        let from = Generator::benign_address(owners.index(j));
        let to = Generator::benign_address(owners.index(j + 1));
        let hash = g.next_hash();
        let is_sale = g.rng.gen_range(0..MILLI) < sale_per_mille;
        records.push(if is_sale {
            let price = g.price_from_band([50, 5_000]);
            sale_record(&token_id, t, from, to, price, g.eth_rate, false, hash)
        } else {
            record(&token_id, t, from, to, EventType::Transfer, hash)
        });
    }
    EventSequence {
        collection: COLLECTION.into(),
        token_id,
        records,
    }
}

fn inject_start(g: &mut Generator) -> DateTime<Utc> {
    g.base + Duration::seconds(g.rng.gen_range(0..30 * 86_400))
}

fn inject_round_trip(g: &mut Generator, corpus: &mut SynthCorpus, token_id: &str, inj: &InjectionSpec) {
    let a = g.next_wash_address();
    let b = g.next_wash_address();
    let price = g.price_from_band(inj.params.price_band_milli_eth);
    let start = inject_start(g);
    let hops = inj.params.round_trip_length;

    let mut records = vec![record(
        token_id,
        start,
        zero(),
        a.clone(),
        EventType::Minted,
        g.next_hash(),
    )];
    let mut hashes = BTreeSet::new();
    for j in 0..2 * hops {
        let (from, to) = if j % 2 == 0 { (&a, &b) } else { (&b, &a) };
        let hash = g.next_hash();
        hashes.insert(hash.clone());
        records.push(sale_record(
            token_id,
            start + Duration::seconds(60 * (j as i64 + 1)),
            from.clone(),
            to.clone(),
            price,
            g.eth_rate,
            false,
            hash,
        ));
    }
    corpus.labels.entries.push(LabelEntry {
        pattern: PatternKind::RoundTrip,
        token_key: TokenKey::new(COLLECTION, token_id),
        record_indices: (1..=2 * hops).collect(),
        addresses: [a, b].into(),
        txn_hashes: hashes,
        usd_value: price * g.eth_rate * Decimal::from(2 * hops as u64),
    });
    corpus.sequences.push(EventSequence {
        collection: COLLECTION.into(),
        token_id: token_id.into(),
        records,
    });
}

fn inject_unprofitable(
    g: &mut Generator,
    corpus: &mut SynthCorpus,
    token_id: &str,
    inj: &InjectionSpec,
) {
    let seller = g.next_wash_address();
    let buyer = g.next_wash_address();
    let price = g.price_from_band(inj.params.price_band_milli_eth);
    let start = inject_start(g);
    let sale_at = start + Duration::seconds(3_600);
    let sale_hash = g.next_hash();

    let records = vec![
        record(
            token_id,
            start,
            zero(),
            seller.clone(),
            EventType::Minted,
            g.next_hash(),
        ),
        sale_record(
            token_id,
            sale_at,
            seller.clone(),
            buyer.clone(),
            price,
            g.eth_rate,
            false,
            sale_hash.clone(),
        ),
    ];

    let mut hashes: BTreeSet<String> = [sale_hash].into();
    match inj.params.funding_kind {
        FundingKind::Eth => {
            let hash = g.next_hash();
            hashes.insert(hash.clone());
            corpus.block_txns.push(BlockTxn {
                hash,
                timestamp: sale_at + Duration::seconds(inj.params.transfer_offset_seconds),
                from: seller.clone(),
                to: buyer.clone(),
                value_wei: (price * Decimal::from(MILLI)).mantissa() as u128 / 10u128.pow(
                    price.scale(),
                ) * WEI_PER_MILLI_ETH,
                input: String::new(),
            });
        }
        FundingKind::Weth => {
            // The four-transfers-then-offer shape, amounts proportional to
            // the sale price.
            let ratios = ["1", "0.7", "3", "4.7"];
            let offsets = [-720, -540, -480, -360];
            for (ratio, offset) in ratios.iter().zip(offsets) {
                let hash = g.next_hash();
                hashes.insert(hash.clone());
                corpus.erc20_txns.push(Erc20Transfer {
                    hash,
                    timestamp: sale_at + Duration::seconds(offset),
                    token_contract: Address::parse(WETH_CONTRACT).unwrap(),
                    token_symbol: "WETH".into(),
                    from: seller.clone(),
                    to: buyer.clone(),
                    amount: price * Decimal::from_str_exact(ratio).unwrap(),
                });
            }
        }
    }

    corpus.labels.entries.push(LabelEntry {
        pattern: PatternKind::Unprofitable,
        token_key: TokenKey::new(COLLECTION, token_id),
        record_indices: vec![1],
        addresses: [seller, buyer].into(),
        txn_hashes: hashes,
        usd_value: price * g.eth_rate,
    });
    corpus.sequences.push(EventSequence {
        collection: COLLECTION.into(),
        token_id: token_id.into(),
        records,
    });
}

fn inject_hidden(g: &mut Generator, corpus: &mut SynthCorpus, token_id: &str, inj: &InjectionSpec) {
    let run_len = inj.params.private_run_length;
    let start = inject_start(g);
    let base_price_milli = g.rng.gen_range(
        inj.params.price_band_milli_eth[0]..=inj.params.price_band_milli_eth[1],
    );

    let mut owners = vec![g.next_wash_address()];
    let mut records = vec![record(
        token_id,
        start,
        zero(),
        owners[0].clone(),
        EventType::Minted,
        g.next_hash(),
    )];
    let mut hashes = BTreeSet::new();
    let mut usd_value = Decimal::ZERO;
    for j in 0..run_len {
        let next = g.next_wash_address();
        let price = Decimal::new(base_price_milli + 50 * j as i64, 3).normalize();
        let hash = g.next_hash();
        hashes.insert(hash.clone());
        usd_value += price * g.eth_rate;
        records.push(sale_record(
            token_id,
            start + Duration::seconds(3_600 * (j as i64 + 1)),
            owners[j].clone(),
            next.clone(),
            price,
            g.eth_rate,
            true,
            hash,
        ));
        owners.push(next);
    }
    corpus.labels.entries.push(LabelEntry {
        pattern: PatternKind::Hidden,
        token_key: TokenKey::new(COLLECTION, token_id),
        record_indices: (1..=run_len).collect(),
        addresses: owners.into_iter().collect(),
        txn_hashes: hashes,
        usd_value,
    });
    corpus.sequences.push(EventSequence {
        collection: COLLECTION.into(),
        token_id: token_id.into(),
        records,
    });
}

/// Daily ETH and WETH reference prices over the generated span, so table
/// lookups resolve for every event date.
fn fill_prices(corpus: &mut SynthCorpus) -> Result<(), DataError> {
    let mut dates: BTreeSet<NaiveDate> = BTreeSet::new();
    for s in &corpus.sequences {
        dates.extend(s.records.iter().map(|r| r.timestamp.date_naive()));
    }
    dates.extend(corpus.block_txns.iter().map(|t| t.timestamp.date_naive()));
    dates.extend(corpus.erc20_txns.iter().map(|t| t.timestamp.date_naive()));
    let (Some(&first), Some(&last)) = (dates.first(), dates.last()) else {
        return Ok(());
    };
    let rate = Decimal::from_str_exact(ETH_USD).unwrap();
    let mut d = first;
    while d <= last {
        for key in [ETH_KEY, WETH_CONTRACT] {
            corpus.prices.insert(PricePoint {
                token_contract: key.into(),
                date: d,
                usd_price: rate,
            })?;
        }
        d = d.succ_opt().expect("date range stays in bounds");
    }
    corpus.prices.register_symbol("ETH", ETH_KEY);
    corpus.prices.register_symbol("WETH", WETH_CONTRACT);
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TypeScore {
    pub labels: usize,
    pub findings: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: Option<Decimal>,
    pub recall: Option<Decimal>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreReport {
    pub per_type: std::collections::BTreeMap<String, TypeScore>,
}

impl ScoreReport {
    pub fn all_perfect(&self) -> bool {
        self.per_type
            .values()
            .all(|s| s.false_positives == 0 && s.false_negatives == 0)
    }
}

/// Score findings against generator labels. A finding is a true positive
/// when its flagged records line up with a label of its own pattern on the
/// same token; recall asks every label to be hit at least once.
pub fn score_against_labels(findings: &FindingSet, labels: &Labels) -> ScoreReport {
    let entries = |p: PatternKind| labels.entries.iter().filter(move |e| e.pattern == p);

    let rt_matches = |f: &crate::roundtrip::RoundTripFinding, e: &LabelEntry| {
        f.token_key == e.token_key && f.flagged_records == e.record_indices
    };
    let un_matches = |f: &crate::unprofitable::UnprofitableFinding, e: &LabelEntry| {
        f.token_key == e.token_key && e.record_indices.contains(&f.sale_index)
    };
    let hi_matches = |f: &crate::hidden::HiddenFinding, e: &LabelEntry| {
        let run: Vec<usize> = (f.start_index..f.start_index + f.len).collect();
        f.token_key == e.token_key && run == e.record_indices
    };

    let mut per_type = std::collections::BTreeMap::new();
    per_type.insert(
        "roundTrip".to_string(),
        score_type(
            findings.round_trip.iter(),
            entries(PatternKind::RoundTrip),
            rt_matches,
        ),
    );
    per_type.insert(
        "unprofitable".to_string(),
        score_type(
            findings.unprofitable.iter(),
            entries(PatternKind::Unprofitable),
            un_matches,
        ),
    );
    per_type.insert(
        "hidden".to_string(),
        score_type(
            findings.hidden.iter(),
            entries(PatternKind::Hidden),
            hi_matches,
        ),
    );
    ScoreReport { per_type }
}

fn score_type<'a, F: 'a, I, L>(findings: I, labels: L, matches: impl Fn(&F, &LabelEntry) -> bool) -> TypeScore
where
    I: Iterator<Item = &'a F>,
    L: Iterator<Item = &'a LabelEntry> + Clone,
{
    let label_list: Vec<&LabelEntry> = labels.collect();
    let mut hit = vec![false; label_list.len()];
    let mut tp = 0;
    let mut fp = 0;
    let mut n_findings = 0;
    for f in findings {
        n_findings += 1;
        let mut matched = false;
        for (i, e) in label_list.iter().enumerate() {
            if matches(f, e) {
                hit[i] = true;
                matched = true;
            }
        }
        if matched {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let missed = hit.iter().filter(|h| !**h).count();
    let ratio = |num: usize, den: usize| {
        (den > 0).then(|| Decimal::from(num as u64) / Decimal::from(den as u64))
    };
    TypeScore {
        labels: label_list.len(),
        findings: n_findings,
        true_positives: tp,
        false_positives: fp,
        false_negatives: missed,
        precision: ratio(tp, n_findings),
        recall: ratio(label_list.len() - missed, label_list.len()),
    }
}

/// Replicas of four documented wash trading incidents, with their reported
/// addresses, amounts, and offsets.
pub mod replicas {
    use super::*;

    #[derive(Debug, Clone, Default)]
    pub struct ReplicaBundle {
        pub sequences: Vec<EventSequence>,
        pub block_txns: Vec<BlockTxn>,
        pub erc20_txns: Vec<Erc20Transfer>,
        pub prices: PriceTable,
    }

    fn addr(hex6: &str) -> Address {
        Address::parse(&format!("0x{hex6:0<40}")).unwrap()
    }

    fn eth_sale(
        collection: &str,
        token_id: &str,
        t: DateTime<Utc>,
        from: &Address,
        to: &Address,
        price: &str,
        rate: &str,
        private: bool,
        hash: &str,
    ) -> EventRecord {
        EventRecord {
            timestamp: t,
            collection: collection.into(),
            token_id: token_id.into(),
            from: from.clone(),
            to: to.clone(),
            event_type: EventType::Sale,
            is_private: Some(private),
            pay_token: Some("ETH".into()),
            num_token: Some(Decimal::from_str_exact(price).unwrap()),
            usd_token: Some(Decimal::from_str_exact(rate).unwrap()),
            txn_hash: Some(hash.into()),
        }
    }

    /// Two sales with seller-to-buyer ETH transfers three minutes before
    /// the first and four minutes after the second.
    pub fn omnimorph_3980() -> ReplicaBundle {
        let s1 = addr("6149ca");
        let s2 = addr("2beba3");
        let s3 = addr("0f767e");
        let t0 = Utc.with_ymd_and_hms(2021, 10, 2, 12, 0, 0).unwrap();
        let sale2_at = t0 + Duration::minutes(20);
        let mint = EventRecord {
            timestamp: t0 - Duration::days(1),
            collection: "Omnimorphs".into(),
            token_id: "3980".into(),
            from: super::zero(),
            to: s1.clone(),
            event_type: EventType::Minted,
            is_private: None,
            pay_token: None,
            num_token: None,
            usd_token: None,
            txn_hash: Some("0xaa01".into()),
        };
        let sequences = vec![EventSequence {
            collection: "Omnimorphs".into(),
            token_id: "3980".into(),
            records: vec![
                mint,
                eth_sale(
                    "Omnimorphs", "3980", t0, &s1, &s2, "0.22", "3400", false, "0xaa02",
                ),
                eth_sale(
                    "Omnimorphs", "3980", sale2_at, &s2, &s3, "0.2208", "3400", false, "0xaa03",
                ),
            ],
        }];
        let wei = |eth: &str| {
            (Decimal::from_str_exact(eth).unwrap() * Decimal::from(10u64.pow(18)))
                .normalize()
                .to_string()
                .parse::<u128>()
                .unwrap()
        };
        let block_txns = vec![
            BlockTxn {
                hash: "0xaa04".into(),
                timestamp: t0 - Duration::minutes(3),
                from: s1,
                to: s2.clone(),
                value_wei: wei("0.23"),
                input: String::new(),
            },
            BlockTxn {
                hash: "0xaa05".into(),
                timestamp: sale2_at + Duration::minutes(4),
                from: s2,
                to: s3,
                value_wei: wei("0.2098"),
                input: String::new(),
            },
        ];
        ReplicaBundle {
            sequences,
            block_txns,
            ..ReplicaBundle::default()
        }
    }

    /// Four rising private sales: 3.750, 3.780, 4, 7.4 ETH.
    pub fn veefriends_7582() -> ReplicaBundle {
        let prices = ["3.750", "3.780", "4", "7.4"];
        let mut owners = vec![addr("e011a0")];
        let t0 = Utc.with_ymd_and_hms(2021, 9, 10, 9, 0, 0).unwrap();
        let mut records = vec![EventRecord {
            timestamp: t0,
            collection: "VeeFriends".into(),
            token_id: "7582".into(),
            from: super::zero(),
            to: owners[0].clone(),
            event_type: EventType::Minted,
            is_private: None,
            pay_token: None,
            num_token: None,
            usd_token: None,
            txn_hash: Some("0xbb00".into()),
        }];
        for (j, p) in prices.iter().enumerate() {
            let next = addr(&format!("e011a{}", j + 1));
            records.push(eth_sale(
                "VeeFriends",
                "7582",
                t0 + Duration::hours(j as i64 + 1),
                &owners[j],
                &next,
                p,
                "4000",
                true,
                &format!("0xbb0{}", j + 1),
            ));
            owners.push(next);
        }
        ReplicaBundle {
            sequences: vec![EventSequence {
                collection: "VeeFriends".into(),
                token_id: "7582".into(),
                records,
            }],
            ..ReplicaBundle::default()
        }
    }

    /// Four WETH transfers totalling 0.94 before a 0.1 WETH offer is
    /// accepted two minutes after the last one.
    pub fn chibi_dino_5723() -> ReplicaBundle {
        let seller = addr("cf5e38");
        let buyer = addr("e67753");
        let day = |h: u32, m: u32| Utc.with_ymd_and_hms(2021, 8, 26, h, m, 0).unwrap();
        let amounts = [("0.1", day(5, 46)), ("0.07", day(5, 49)), ("0.3", day(5, 50)), ("0.47", day(5, 52))];
        let erc20_txns = amounts
            .iter()
            .enumerate()
            .map(|(i, (amt, at))| Erc20Transfer {
                hash: format!("0xcc0{i}"),
                timestamp: *at,
                token_contract: Address::parse(WETH_CONTRACT).unwrap(),
                token_symbol: "WETH".into(),
                from: seller.clone(),
                to: buyer.clone(),
                amount: Decimal::from_str_exact(amt).unwrap(),
            })
            .collect();

        let mut sale = eth_sale(
            "Chibi Dinos",
            "5723",
            day(5, 58),
            &seller,
            &buyer,
            "0.1",
            "3100",
            false,
            "0xcc04",
        );
        sale.pay_token = Some("WETH".into());
        let mint = EventRecord {
            timestamp: day(1, 0),
            collection: "Chibi Dinos".into(),
            token_id: "5723".into(),
            from: super::zero(),
            to: seller,
            event_type: EventType::Minted,
            is_private: None,
            pay_token: None,
            num_token: None,
            usd_token: None,
            txn_hash: Some("0xcc05".into()),
        };
        let mut prices = PriceTable::new();
        prices
            .insert(PricePoint {
                token_contract: WETH_CONTRACT.into(),
                date: day(0, 1).date_naive(),
                usd_price: Decimal::from_str_exact("3100").unwrap(),
            })
            .unwrap();
        prices.register_symbol("WETH", WETH_CONTRACT);
        ReplicaBundle {
            sequences: vec![EventSequence {
                collection: "Chibi Dinos".into(),
                token_id: "5723".into(),
                records: vec![mint, sale],
            }],
            erc20_txns,
            prices,
            ..ReplicaBundle::default()
        }
    }

    /// Six wash sales between the pair summing 0.4 ETH, then a 1 ETH exit
    /// in the next window. At a pinned rate of 1, fees are 0.01 and the
    /// exit gain is exactly 0.99.
    pub fn og_crystal_895() -> ReplicaBundle {
        let a = addr("89a09c");
        let b = addr("0b7742");
        let exit_buyer = addr("f0f0f0");
        let t0 = Utc.with_ymd_and_hms(2021, 7, 20, 10, 0, 0).unwrap();
        let prices = ["0.06", "0.064", "0.066", "0.068", "0.07", "0.072"];

        let mut records = vec![EventRecord {
            timestamp: t0,
            collection: "OG:Crystals".into(),
            token_id: "895".into(),
            from: super::zero(),
            to: a.clone(),
            event_type: EventType::Minted,
            is_private: None,
            pay_token: None,
            num_token: None,
            usd_token: None,
            txn_hash: Some("0xdd00".into()),
        }];
        for (j, p) in prices.iter().enumerate() {
            let (from, to) = if j % 2 == 0 { (&a, &b) } else { (&b, &a) };
            records.push(eth_sale(
                "OG:Crystals",
                "895",
                t0 + Duration::minutes(j as i64 + 1),
                from,
                to,
                p,
                "1",
                false,
                &format!("0xdd0{}", j + 1),
            ));
        }
        records.push(eth_sale(
            "OG:Crystals",
            "895",
            t0 + Duration::days(2),
            &a,
            &exit_buyer,
            "1",
            "1",
            false,
            "0xdd07",
        ));
        ReplicaBundle {
            sequences: vec![EventSequence {
                collection: "OG:Crystals".into(),
                token_id: "895".into(),
                records,
            }],
            ..ReplicaBundle::default()
        }
    }
}
