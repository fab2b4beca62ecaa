//! Round-trip trading detection: per-window multigraphs, elementary-cycle
//! enumeration, and repetitive-walk counting.
//!
//! Every record in a window becomes one directed edge, so parallel edges
//! carry trade multiplicity. Cycles are enumerated on the simple digraph of
//! distinct (from, to) pairs; the number of distinct walks around a cycle
//! is then the product of the parallel-edge counts along it. A cycle is
//! flagged when that product reaches the walk threshold, or when some walk
//! around it consists entirely of sale events.

use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{sale_usd, Address, EventSequence, PriceTable, TokenKey};
use crate::windowing::TimeWindow;

pub const DEFAULT_WALK_THRESHOLD: u128 = 100;
pub const DEFAULT_MAX_CYCLES: usize = 10_000;

/// Directed multigraph of one token's trades inside one window.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeGraph {
    pub token_key: TokenKey,
    pub window_index: usize,
    pub nodes: BTreeSet<Address>,
    pub edges: Vec<GraphEdge>,
    /// The dictionary D: distinct (from, to) pair to its parallel edges,
    /// as indices into `edges`.
    pub edge_index: BTreeMap<(Address, Address), Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: Address,
    pub to: Address,
    /// Index of the backing record in the parent sequence.
    pub record_index: usize,
    pub is_sale: bool,
}

/// One confirmed round-trip pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundTripFinding {
    #[serde(flatten)]
    pub token_key: TokenKey,
    pub window_index: usize,
    /// Cycle as an address list starting at its lexicographically smallest
    /// node; a single entry is a self-loop.
    pub cycle_nodes: Vec<Address>,
    pub walk_count: u128,
    pub all_sale_walk_exists: bool,
    /// Indices into the parent sequence of every record on the cycle.
    pub flagged_records: Vec<usize>,
    /// Transaction hashes of the flagged records, where present.
    pub txn_hashes: BTreeSet<String>,
    /// Sum of the flagged sale events' USD values, where resolvable.
    pub usd_value: Decimal,
}

/// Build the window's multigraph: one edge per record, transfers and mints
/// included.
pub fn build_graph(seq: &EventSequence, window: &TimeWindow) -> TradeGraph {
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::with_capacity(window.len());
    let mut edge_index: BTreeMap<(Address, Address), Vec<usize>> = BTreeMap::new();
    for (offset, record) in window.records(seq).iter().enumerate() {
        let record_index = window.start + offset;
        nodes.insert(record.from.clone());
        nodes.insert(record.to.clone());
        let edge_id = edges.len();
        edges.push(GraphEdge {
            from: record.from.clone(),
            to: record.to.clone(),
            record_index,
            is_sale: record.is_sale(),
        });
        edge_index
            .entry((record.from.clone(), record.to.clone()))
            .or_default()
            .push(edge_id);
    }
    TradeGraph {
        token_key: seq.token_key(),
        window_index: window.index,
        nodes,
        edges,
        edge_index,
    }
}

/// All elementary cycles of the simple digraph induced by the edge index,
/// each starting at its lexicographically smallest address. Self-loops are
/// length-1 cycles.
pub fn find_cycles(g: &TradeGraph) -> Vec<Vec<Address>> {
    find_cycles_capped(g, usize::MAX).0
}

/// As [`find_cycles`], stopping after `max_cycles` cycles. The flag reports
/// whether enumeration was cut short.
pub fn find_cycles_capped(g: &TradeGraph, max_cycles: usize) -> (Vec<Vec<Address>>, bool) {
    let nodes: Vec<&Address> = g.nodes.iter().collect();
    let node_id: BTreeMap<&Address, usize> = nodes.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (from, to) in g.edge_index.keys() {
        adj[node_id[from]].push(node_id[to]);
    }

    let mut finder = CycleFinder {
        adj: &adj,
        start: 0,
        blocked: vec![false; nodes.len()],
        block_list: vec![BTreeSet::new(); nodes.len()],
        stack: Vec::new(),
        cycles: Vec::new(),
        max_cycles,
        overflowed: false,
    };

    // Each cycle is discovered exactly once, rooted at its smallest node:
    // pass s only explores nodes >= s.
    for s in 0..nodes.len() {
        if finder.overflowed {
            break;
        }
        finder.start = s;
        for b in finder.blocked.iter_mut().skip(s) {
            *b = false;
        }
        for l in finder.block_list.iter_mut().skip(s) {
            l.clear();
        }
        finder.circuit(s);
    }

    let cycles = finder
        .cycles
        .iter()
        .map(|c| c.iter().map(|&i| nodes[i].clone()).collect())
        .collect();
    (cycles, finder.overflowed)
}

/// Blocked-set cycle search in the style of Johnson's algorithm, restricted
/// to nodes >= start.
struct CycleFinder<'a> {
    adj: &'a [Vec<usize>],
    start: usize,
    blocked: Vec<bool>,
    block_list: Vec<BTreeSet<usize>>,
    stack: Vec<usize>,
    cycles: Vec<Vec<usize>>,
    max_cycles: usize,
    overflowed: bool,
}

impl CycleFinder<'_> {
    fn circuit(&mut self, v: usize) -> bool {
        if self.overflowed {
            return false;
        }
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for i in 0..self.adj[v].len() {
            let w = self.adj[v][i];
            if w < self.start {
                continue;
            }
            if w == self.start {
                if self.cycles.len() >= self.max_cycles {
                    self.overflowed = true;
                    break;
                }
                self.cycles.push(self.stack.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w) {
                found = true;
            }
            if self.overflowed {
                break;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for i in 0..self.adj[v].len() {
                let w = self.adj[v][i];
                if w >= self.start {
                    self.block_list[w].insert(v);
                }
            }
        }
        self.stack.pop();
        found
    }

    fn unblock(&mut self, v: usize) {
        self.blocked[v] = false;
        let waiters = std::mem::take(&mut self.block_list[v]);
        for w in waiters {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }
}

/// Consecutive (from, to) hops around a cycle, wrap included. A length-1
/// cycle is the single self-loop hop.
fn cycle_hops(cycle: &[Address]) -> Vec<(Address, Address)> {
    (0..cycle.len())
        .map(|i| (cycle[i].clone(), cycle[(i + 1) % cycle.len()].clone()))
        .collect()
}

/// Number of distinct walks around the cycle: the product of parallel-edge
/// counts per hop. Saturates rather than overflows on pathological inputs.
pub fn count_walks(cycle: &[Address], g: &TradeGraph) -> u128 {
    cycle_hops(cycle).iter().fold(1u128, |acc, hop| {
        let m = g.edge_index.get(hop).map_or(0, Vec::len) as u128;
        acc.saturating_mul(m)
    })
}

/// Whether some walk around the cycle uses only sale edges. Edge choices
/// are independent per hop, so this holds exactly when every hop offers at
/// least one sale edge.
pub fn all_sale_walk_exists(cycle: &[Address], g: &TradeGraph) -> bool {
    cycle_hops(cycle).iter().all(|hop| {
        g.edge_index
            .get(hop)
            .is_some_and(|edges| edges.iter().any(|&e| g.edges[e].is_sale))
    })
}

/// Apply both confirmation rules to one cycle. On a flag, the finding
/// covers every record along the cycle and sums the sale records' USD.
pub fn confirm_roundtrip(
    cycle: &[Address],
    g: &TradeGraph,
    seq: &EventSequence,
    walk_threshold: u128,
    prices: &PriceTable,
) -> Option<RoundTripFinding> {
    let walk_count = count_walks(cycle, g);
    let all_sale = all_sale_walk_exists(cycle, g);
    if walk_count < walk_threshold && !all_sale {
        return None;
    }

    let mut flagged_records = Vec::new();
    for hop in cycle_hops(cycle) {
        if let Some(edges) = g.edge_index.get(&hop) {
            flagged_records.extend(edges.iter().map(|&e| g.edges[e].record_index));
        }
    }
    flagged_records.sort_unstable();
    flagged_records.dedup();

    let mut txn_hashes = BTreeSet::new();
    let mut usd_value = Decimal::ZERO;
    for &idx in &flagged_records {
        let record = &seq.records[idx];
        if let Some(h) = &record.txn_hash {
            txn_hashes.insert(h.clone());
        }
        if record.is_sale() {
            if let Some(usd) = sale_usd(record, prices) {
                usd_value += usd;
            }
        }
    }

    Some(RoundTripFinding {
        token_key: g.token_key.clone(),
        window_index: g.window_index,
        cycle_nodes: cycle.to_vec(),
        walk_count,
        all_sale_walk_exists: all_sale,
        flagged_records,
        txn_hashes,
        usd_value,
    })
}

/// Run the detector over every window of one sequence.
pub fn detect_roundtrip(
    seq: &EventSequence,
    windows: &[TimeWindow],
    walk_threshold: u128,
    max_cycles: usize,
    prices: &PriceTable,
) -> Vec<RoundTripFinding> {
    let mut findings = Vec::new();
    for window in windows {
        if window.is_empty() {
            continue;
        }
        let g = build_graph(seq, window);
        let (cycles, overflowed) = find_cycles_capped(&g, max_cycles);
        if overflowed {
            log::warn!(
                "{} window {}: cycle enumeration stopped at the {max_cycles}-cycle cap",
                g.token_key,
                window.index
            );
        }
        for cycle in &cycles {
            if let Some(f) = confirm_roundtrip(cycle, &g, seq, walk_threshold, prices) {
                findings.push(f);
            }
        }
    }
    findings
}

/// Render one window graph in DOT form, edges labeled with event type and
/// sale terms. Record order keeps the output stable.
pub fn graph_dot(g: &TradeGraph, seq: &EventSequence) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "digraph \"{} window {}\" {{",
        g.token_key, g.window_index
    );
    for node in &g.nodes {
        let _ = writeln!(out, "  \"{node}\";");
    }
    for edge in &g.edges {
        let record = &seq.records[edge.record_index];
        let label = match (&record.pay_token, record.num_token) {
            (Some(token), Some(amount)) => {
                format!("{} {} {}", record.event_type.as_str(), amount.normalize(), token)
            }
            _ => record.event_type.as_str().to_string(),
        };
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{label}\"];", edge.from, edge.to);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventType;
    use crate::testutil::{addr, dt, rec, sale, seq};
    use crate::windowing::{segment_windows, DEFAULT_INITIAL_ATI_SECS};

    /// One-window graph from (from, to, is_sale) triples, ten seconds apart.
    fn graph_of(edges: &[(&str, &str, bool)]) -> (TradeGraph, EventSequence) {
        let records = edges
            .iter()
            .enumerate()
            .map(|(i, (from, to, is_sale))| {
                if *is_sale {
                    sale(from, to, dt(10 * i as i64), "1", Some("2000"), None)
                } else {
                    rec(from, to, EventType::Transfer, dt(10 * i as i64), None)
                }
            })
            .collect();
        let s = seq(records);
        let windows = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(windows.len(), 1, "fixture must stay in one window");
        let g = build_graph(&s, &windows[0]);
        (g, s)
    }

    fn addrs(names: &[&str]) -> Vec<Address> {
        names.iter().map(|n| addr(n)).collect()
    }

    #[test]
    fn build_graph_collects_parallel_edges() {
        let (g, _) = graph_of(&[("0xa", "0xb", true), ("0xb", "0xa", true), ("0xa", "0xb", false)]);
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.edge_index[&(addr("0xa"), addr("0xb"))], vec![0, 2]);
        assert_eq!(g.edge_index[&(addr("0xb"), addr("0xa"))], vec![1]);
    }

    #[test]
    fn single_record_graph() {
        let (g, _) = graph_of(&[("0xa", "0xb", true)]);
        assert_eq!(g.edge_index.len(), 1);
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn two_node_cycle_found_once() {
        let (g, _) = graph_of(&[("0xa", "0xb", true), ("0xb", "0xa", true)]);
        let cycles = find_cycles(&g);
        assert_eq!(cycles, vec![addrs(&["0xa", "0xb"])]);
    }

    #[test]
    fn three_node_walk_product() {
        // Two parallel edges v1->v2, one v2->v3, two v3->v1: 2*1*2 walks.
        let (g, _) = graph_of(&[
            ("0xd1", "0xd2", true),
            ("0xd1", "0xd2", true),
            ("0xd2", "0xd3", true),
            ("0xd3", "0xd1", true),
            ("0xd3", "0xd1", false),
        ]);
        let cycles = find_cycles(&g);
        assert_eq!(cycles, vec![addrs(&["0xd1", "0xd2", "0xd3"])]);
        assert_eq!(count_walks(&cycles[0], &g), 4);
        assert!(all_sale_walk_exists(&cycles[0], &g));
    }

    #[test]
    fn walk_count_trivia() {
        let (g, _) = graph_of(&[("0xa", "0xb", false), ("0xb", "0xc", false), ("0xc", "0xa", false)]);
        assert_eq!(count_walks(&addrs(&["0xa", "0xb", "0xc"]), &g), 1);
    }

    #[test]
    fn ten_by_ten_hits_the_threshold() {
        let mut edges = Vec::new();
        for _ in 0..10 {
            edges.push(("0xa", "0xb", true));
            edges.push(("0xb", "0xa", true));
        }
        let (g, s) = graph_of(&edges);
        let cycles = find_cycles(&g);
        assert_eq!(cycles.len(), 1);
        assert_eq!(count_walks(&cycles[0], &g), 100);
        let f = confirm_roundtrip(&cycles[0], &g, &s, DEFAULT_WALK_THRESHOLD, &PriceTable::new())
            .expect("flagged");
        assert_eq!(f.walk_count, 100);
        assert!(f.all_sale_walk_exists);
        assert_eq!(f.flagged_records.len(), 20);
    }

    #[test]
    fn transfer_only_hop_blocks_rule_two() {
        // 2*2*1 walks, and the v2->v3 hop has no sale edge, so no all-sale
        // walk exists among the four.
        let (g, s) = graph_of(&[
            ("0xd1", "0xd2", true),
            ("0xd1", "0xd2", false),
            ("0xd2", "0xd3", false),
            ("0xd3", "0xd1", true),
            ("0xd3", "0xd1", true),
        ]);
        let cycles = find_cycles(&g);
        assert_eq!(count_walks(&cycles[0], &g), 4);
        assert!(!all_sale_walk_exists(&cycles[0], &g));
        assert!(confirm_roundtrip(&cycles[0], &g, &s, 100, &PriceTable::new()).is_none());
    }

    #[test]
    fn single_sale_pair_flagged_by_all_sale_rule() {
        let (g, s) = graph_of(&[("0xa", "0xb", true), ("0xb", "0xa", true)]);
        let cycles = find_cycles(&g);
        let f = confirm_roundtrip(&cycles[0], &g, &s, 100, &PriceTable::new()).expect("flagged");
        assert_eq!(f.walk_count, 1);
        assert!(f.all_sale_walk_exists);
        // Two sales at 1 token x 2000 USD each.
        assert_eq!(f.usd_value, Decimal::from(4000));
    }

    #[test]
    fn self_sale_is_a_degenerate_round_trip() {
        let (g, s) = graph_of(&[("0xa", "0xa", true)]);
        let cycles = find_cycles(&g);
        assert_eq!(cycles, vec![addrs(&["0xa"])]);
        let f = confirm_roundtrip(&cycles[0], &g, &s, 100, &PriceTable::new()).expect("flagged");
        assert_eq!(f.walk_count, 1);
        assert!(f.all_sale_walk_exists);
    }

    #[test]
    fn lone_self_transfer_not_flagged() {
        let (g, s) = graph_of(&[("0xa", "0xa", false)]);
        let cycles = find_cycles(&g);
        assert_eq!(cycles.len(), 1);
        assert!(confirm_roundtrip(&cycles[0], &g, &s, 100, &PriceTable::new()).is_none());
    }

    #[test]
    fn cycles_start_at_smallest_address() {
        let (g, _) = graph_of(&[("0xc", "0xb", false), ("0xb", "0xa", false), ("0xa", "0xc", false)]);
        let cycles = find_cycles(&g);
        assert_eq!(cycles, vec![addrs(&["0xa", "0xc", "0xb"])]);
    }

    #[test]
    fn overlapping_cycles_all_enumerated() {
        // a<->b, b<->c, a<->c and the triangles a->b->c->a, a->c->b->a.
        let (g, _) = graph_of(&[
            ("0xa", "0xb", false),
            ("0xb", "0xa", false),
            ("0xb", "0xc", false),
            ("0xc", "0xb", false),
            ("0xa", "0xc", false),
            ("0xc", "0xa", false),
        ]);
        let cycles = find_cycles(&g);
        assert_eq!(cycles.len(), 5);
    }

    #[test]
    fn cycle_cap_reports_overflow() {
        let (g, _) = graph_of(&[
            ("0xa", "0xb", false),
            ("0xb", "0xa", false),
            ("0xb", "0xc", false),
            ("0xc", "0xb", false),
            ("0xa", "0xc", false),
            ("0xc", "0xa", false),
        ]);
        let (cycles, overflowed) = find_cycles_capped(&g, 2);
        assert_eq!(cycles.len(), 2);
        assert!(overflowed);
    }

    #[test]
    fn fourteen_txns_one_window_one_cycle() {
        // Fourteen sales bouncing between two addresses a few minutes
        // apart: one window, one two-node cycle, flagged by the all-sale
        // rule (7*7 = 49 walks).
        let mut records = Vec::new();
        for i in 0..14i64 {
            let (from, to) = if i % 2 == 0 { ("0xa", "0xb") } else { ("0xb", "0xa") };
            records.push(sale(from, to, dt(i * 180), "0.5", Some("2400"), None));
        }
        let s = seq(records);
        let windows = segment_windows(&s, DEFAULT_INITIAL_ATI_SECS);
        assert_eq!(windows.len(), 1);
        let findings = detect_roundtrip(&s, &windows, 100, DEFAULT_MAX_CYCLES, &PriceTable::new());
        assert_eq!(findings.len(), 1);
        let f = &findings[0];
        assert_eq!(f.cycle_nodes, addrs(&["0xa", "0xb"]));
        assert_eq!(f.walk_count, 49);
        assert!(f.all_sale_walk_exists);
        assert_eq!(f.flagged_records.len(), 14);
    }

    #[test]
    fn relabeling_addresses_relabels_findings() {
        let (g, s) = graph_of(&[("0xa", "0xb", true), ("0xb", "0xa", true)]);
        let cycles = find_cycles(&g);
        let f = confirm_roundtrip(&cycles[0], &g, &s, 100, &PriceTable::new()).unwrap();

        let mut renamed = s.clone();
        for r in &mut renamed.records {
            for a in [&mut r.from, &mut r.to] {
                *a = match a.as_str() {
                    "0xa" => addr("0xff1"),
                    "0xb" => addr("0xff2"),
                    other => addr(other),
                };
            }
        }
        let windows = segment_windows(&renamed, DEFAULT_INITIAL_ATI_SECS);
        let g2 = build_graph(&renamed, &windows[0]);
        let cycles2 = find_cycles(&g2);
        let f2 = confirm_roundtrip(&cycles2[0], &g2, &renamed, 100, &PriceTable::new()).unwrap();
        assert_eq!(f2.cycle_nodes, addrs(&["0xff1", "0xff2"]));
        assert_eq!(f2.walk_count, f.walk_count);
        assert_eq!(f2.flagged_records, f.flagged_records);
    }

    #[test]
    fn dot_export_labels_sales() {
        let (g, s) = graph_of(&[("0xa", "0xb", true), ("0xb", "0xa", false)]);
        let dot = graph_dot(&g, &s);
        assert!(dot.contains("digraph"));
        assert!(dot.contains("\"0xa\" -> \"0xb\" [label=\"sale 1 ETH\"];"));
        assert!(dot.contains("\"0xb\" -> \"0xa\" [label=\"transfer\"];"));
    }
}
