//! Frequent wash-trader mining: findings become address itemsets, FP-Growth
//! extracts recurring pairs and larger sets, and pairs merge into trader
//! groups when they share an address or a flagged transaction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::hidden::HiddenFinding;
use crate::model::Address;
use crate::roundtrip::RoundTripFinding;
use crate::unprofitable::UnprofitableFinding;

pub const DEFAULT_RELATIVE_SUPPORT: &str = "0.0005";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FindingKind {
    R,
    U,
    H,
}

/// One row of the mining input: the addresses implicated by one finding.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningTransaction {
    pub kind: FindingKind,
    pub items: BTreeSet<Address>,
    /// Transaction hashes referenced by the source finding, for the
    /// common-TXN group-merge rule.
    pub txn_hashes: BTreeSet<String>,
    /// Index into the source finding list of `kind`.
    pub source_index: usize,
}

/// An itemset meeting the support threshold, with its exact count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequentItemset {
    pub items: Vec<Address>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraderPair {
    pub addresses: [Address; 2],
    pub support_count: usize,
    pub kinds_involved: BTreeSet<FindingKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraderGroup {
    pub addresses: BTreeSet<Address>,
    pub kinds_involved: BTreeSet<FindingKind>,
    pub member_pairs: Vec<TraderPair>,
}

/// Flatten detector output into mining rows: one per finding, in R, U, H
/// block order. Findings that implicate fewer than two distinct addresses
/// (self-loops) carry no pair information and are skipped.
pub fn build_itemsets(
    round_trip: &[RoundTripFinding],
    unprofitable: &[UnprofitableFinding],
    hidden: &[HiddenFinding],
) -> Vec<MiningTransaction> {
    let mut rows = Vec::new();
    for (i, f) in round_trip.iter().enumerate() {
        let items: BTreeSet<Address> = f.cycle_nodes.iter().cloned().collect();
        push_row(&mut rows, FindingKind::R, items, f.txn_hashes.clone(), i);
    }
    for (i, f) in unprofitable.iter().enumerate() {
        let items: BTreeSet<Address> = [f.seller.clone(), f.buyer.clone()].into_iter().collect();
        let mut hashes: BTreeSet<String> = f.sale_txn_hash.iter().cloned().collect();
        hashes.extend(f.evidence.iter().map(|e| e.txn_hash.clone()));
        push_row(&mut rows, FindingKind::U, items, hashes, i);
    }
    for (i, f) in hidden.iter().enumerate() {
        push_row(
            &mut rows,
            FindingKind::H,
            f.participants.clone(),
            f.txn_hashes.clone(),
            i,
        );
    }
    rows
}

fn push_row(
    rows: &mut Vec<MiningTransaction>,
    kind: FindingKind,
    items: BTreeSet<Address>,
    txn_hashes: BTreeSet<String>,
    source_index: usize,
) {
    if items.len() < 2 {
        log::debug!("skipping single-address {kind:?} finding #{source_index} in mining input");
        return;
    }
    rows.push(MiningTransaction {
        kind,
        items,
        txn_hashes,
        source_index,
    });
}

/// Occurrence threshold for a relative support level, rounding up. Exact
/// decimal arithmetic: binary floating point gets ceil(0.05 x 1000) wrong.
pub fn support_threshold(n_transactions: usize, relative_support: Decimal) -> Result<usize, DataError> {
    if relative_support <= Decimal::ZERO || relative_support > Decimal::ONE {
        return Err(DataError::Invalid(format!(
            "relative support must be in (0, 1], got {relative_support}"
        )));
    }
    let raw = (relative_support * Decimal::from(n_transactions as u64)).ceil();
    Ok(raw.to_usize().unwrap_or(usize::MAX).max(1))
}

/// Mine all itemsets of size >= 2 occurring in at least
/// ceil(relative_support x rows) transactions.
pub fn fp_growth(
    transactions: &[MiningTransaction],
    relative_support: Decimal,
) -> Result<Vec<FrequentItemset>, DataError> {
    let min_count = support_threshold(transactions.len(), relative_support)?;
    fp_growth_min_count(transactions, min_count)
}

/// As [`fp_growth`] with an absolute occurrence threshold.
pub fn fp_growth_min_count(
    transactions: &[MiningTransaction],
    min_count: usize,
) -> Result<Vec<FrequentItemset>, DataError> {
    if transactions.is_empty() {
        return Err(DataError::Invalid("no transactions to mine".into()));
    }
    let min_count = min_count.max(1);

    // Stable item universe: lexicographic address order.
    let universe: Vec<&Address> = {
        let set: BTreeSet<&Address> = transactions.iter().flat_map(|t| &t.items).collect();
        set.into_iter().collect()
    };
    let id_of: HashMap<&Address, usize> = universe.iter().enumerate().map(|(i, a)| (*a, i)).collect();

    let mut item_count = vec![0usize; universe.len()];
    for t in transactions {
        for a in &t.items {
            item_count[id_of[a]] += 1;
        }
    }

    // Global insertion order: frequency-descending, address-ascending.
    let mut by_rank: Vec<usize> = (0..universe.len())
        .filter(|&i| item_count[i] >= min_count)
        .collect();
    by_rank.sort_by_key(|&i| (std::cmp::Reverse(item_count[i]), i));
    let mut rank = vec![usize::MAX; universe.len()];
    for (r, &i) in by_rank.iter().enumerate() {
        rank[i] = r;
    }

    let mut tree = FpTree::new(by_rank.len());
    for t in transactions {
        let mut path: Vec<usize> = t
            .items
            .iter()
            .map(|a| id_of[a])
            .filter(|&i| rank[i] != usize::MAX)
            .collect();
        path.sort_by_key(|&i| rank[i]);
        tree.insert(&path, 1);
    }

    let mut found: Vec<(Vec<usize>, usize)> = Vec::new();
    let mut suffix = Vec::new();
    mine(&tree, min_count, &mut suffix, &mut found);

    let mut itemsets: Vec<FrequentItemset> = found
        .into_iter()
        .filter(|(items, _)| items.len() >= 2)
        .map(|(ids, count)| {
            let mut items: Vec<Address> = ids.iter().map(|&i| universe[i].clone()).collect();
            items.sort();
            FrequentItemset { items, count }
        })
        .collect();
    itemsets.sort_by(|a, b| (a.items.len(), &a.items).cmp(&(b.items.len(), &b.items)));
    Ok(itemsets)
}

/// Prefix tree with per-item header links, node 0 the root.
struct FpTree {
    item: Vec<usize>,
    count: Vec<usize>,
    parent: Vec<usize>,
    children: Vec<BTreeMap<usize, usize>>,
    /// Header table: item -> every tree node holding it.
    header: BTreeMap<usize, Vec<usize>>,
    /// Item ranks of this tree's universe, shared by all conditional trees
    /// so paths always descend in one global order.
    n_rank_slots: usize,
}

impl FpTree {
    fn new(n_rank_slots: usize) -> FpTree {
        FpTree {
            item: vec![usize::MAX],
            count: vec![0],
            parent: vec![0],
            children: vec![BTreeMap::new()],
            header: BTreeMap::new(),
            n_rank_slots,
        }
    }

    /// Insert a rank-ordered item path with a weight (conditional trees
    /// carry accumulated counts).
    fn insert(&mut self, path: &[usize], weight: usize) {
        let mut cur = 0usize;
        for &it in path {
            cur = match self.children[cur].get(&it) {
                Some(&child) => {
                    self.count[child] += weight;
                    child
                }
                None => {
                    let node = self.item.len();
                    self.item.push(it);
                    self.count.push(weight);
                    self.parent.push(cur);
                    self.children.push(BTreeMap::new());
                    self.children[cur].insert(it, node);
                    self.header.entry(it).or_default().push(node);
                    node
                }
            };
        }
    }

    /// Path from a node's parent up to the root, returned root-first.
    fn prefix_path(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut p = self.parent[node];
        while p != 0 {
            path.push(self.item[p]);
            p = self.parent[p];
        }
        path.reverse();
        path
    }
}

/// Recursive FP-Growth over one (conditional) tree: each header item joins
/// the suffix, is reported with its support, and spawns a conditional tree
/// from its prefix paths.
fn mine(tree: &FpTree, min_count: usize, suffix: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
    for (&item, nodes) in &tree.header {
        let total: usize = nodes.iter().map(|&n| tree.count[n]).sum();
        if total < min_count {
            continue;
        }
        suffix.push(item);
        out.push((suffix.clone(), total));

        // Conditional pattern base: prefix paths weighted by this item's
        // node counts, pruned to items still frequent within the base.
        let mut cond_count = vec![0usize; tree.n_rank_slots];
        let mut base: Vec<(Vec<usize>, usize)> = Vec::new();
        for &node in nodes {
            let path = tree.prefix_path(node);
            if path.is_empty() {
                continue;
            }
            for &it in &path {
                cond_count[it] += tree.count[node];
            }
            base.push((path, tree.count[node]));
        }
        if !base.is_empty() {
            let mut cond = FpTree::new(tree.n_rank_slots);
            for (path, weight) in &base {
                let pruned: Vec<usize> = path
                    .iter()
                    .copied()
                    .filter(|&it| cond_count[it] >= min_count)
                    .collect();
                cond.insert(&pruned, *weight);
            }
            if !cond.header.is_empty() {
                mine(&cond, min_count, suffix, out);
            }
        }
        suffix.pop();
    }
}

/// The size-2 frequent itemsets as trader pairs, annotated with the kinds
/// of findings they occur in.
pub fn derive_pairs(
    frequent: &[FrequentItemset],
    transactions: &[MiningTransaction],
) -> Vec<TraderPair> {
    frequent
        .iter()
        .filter(|f| f.items.len() == 2)
        .map(|f| {
            let kinds_involved = transactions
                .iter()
                .filter(|t| f.items.iter().all(|a| t.items.contains(a)))
                .map(|t| t.kind)
                .collect();
            TraderPair {
                addresses: [f.items[0].clone(), f.items[1].clone()],
                support_count: f.count,
                kinds_involved,
            }
        })
        .collect()
}

/// Merge pairs into groups: two pairs connect when they share an address,
/// or when findings containing them reference a common transaction hash.
/// Every pair lands in exactly one group; isolated pairs form their own.
pub fn merge_groups(
    pairs: &[TraderPair],
    transactions: &[MiningTransaction],
) -> Vec<TraderGroup> {
    let mut uf = UnionFind::new(pairs.len());

    let mut by_address: BTreeMap<&Address, Vec<usize>> = BTreeMap::new();
    let mut by_hash: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, pair) in pairs.iter().enumerate() {
        for a in &pair.addresses {
            by_address.entry(a).or_default().push(i);
        }
        for t in transactions {
            if pair.addresses.iter().all(|a| t.items.contains(a)) {
                for h in &t.txn_hashes {
                    by_hash.entry(h).or_default().push(i);
                }
            }
        }
    }
    for bucket in by_address.values().chain(by_hash.values()) {
        for w in bucket.windows(2) {
            uf.union(w[0], w[1]);
        }
    }

    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..pairs.len() {
        components.entry(uf.find(i)).or_default().push(i);
    }

    let mut groups: Vec<TraderGroup> = components
        .into_values()
        .map(|members| {
            let mut member_pairs: Vec<TraderPair> =
                members.iter().map(|&i| pairs[i].clone()).collect();
            member_pairs.sort_by(|a, b| a.addresses.cmp(&b.addresses));
            TraderGroup {
                addresses: member_pairs
                    .iter()
                    .flat_map(|p| p.addresses.iter().cloned())
                    .collect(),
                kinds_involved: member_pairs
                    .iter()
                    .flat_map(|p| p.kinds_involved.iter().copied())
                    .collect(),
                member_pairs,
            }
        })
        .collect();
    groups.sort_by(|a, b| a.addresses.cmp(&b.addresses));
    groups
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
