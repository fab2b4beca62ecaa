//! Cross-checks the blocked-search cycle enumerator against a naive
//! exponential DFS on random digraphs. The two implementations share no
//! code: the oracle roots every cycle at its smallest node and walks simple
//! paths with a plain visited set.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use washtrade_core::model::{Address, TokenKey};
use washtrade_core::roundtrip::{find_cycles, GraphEdge, TradeGraph};

/// Every elementary cycle of the digraph, as node-id lists starting at the
/// cycle's smallest id. Self-loops come out as single-entry lists.
fn brute_cycles(n: usize, adj: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; n];
    for root in 0..n {
        path.push(root);
        on_path[root] = true;
        extend(root, root, adj, &mut on_path, &mut path, &mut out);
        on_path[root] = false;
        path.pop();
    }
    out
}

fn extend(
    root: usize,
    current: usize,
    adj: &[Vec<usize>],
    on_path: &mut Vec<bool>,
    path: &mut Vec<usize>,
    out: &mut BTreeSet<Vec<usize>>,
) {
    for &next in &adj[current] {
        if next == root {
            out.insert(path.clone());
        } else if next > root && !on_path[next] {
            on_path[next] = true;
            path.push(next);
            extend(root, next, adj, on_path, path, out);
            path.pop();
            on_path[next] = false;
        }
    }
}

fn node_address(i: usize) -> Address {
    Address::parse(&format!("0x{i:040x}")).unwrap()
}

/// Wrap an adjacency list in the graph type the detector consumes. One
/// backing edge per arc is enough; cycle search reads only the arc set.
fn as_trade_graph(n: usize, adj: &[Vec<usize>]) -> TradeGraph {
    let nodes: BTreeSet<Address> = (0..n).map(node_address).collect();
    let mut edges = Vec::new();
    let mut edge_index: BTreeMap<(Address, Address), Vec<usize>> = BTreeMap::new();
    for (from, outs) in adj.iter().enumerate() {
        for &to in outs {
            let key = (node_address(from), node_address(to));
            edges.push(GraphEdge {
                from: key.0.clone(),
                to: key.1.clone(),
                record_index: edges.len(),
                is_sale: false,
            });
            edge_index.entry(key).or_default().push(edges.len() - 1);
        }
    }
    TradeGraph {
        token_key: TokenKey::new("oracle", "0"),
        window_index: 0,
        nodes,
        edges,
        edge_index,
    }
}

fn run_comparison(graphs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..graphs {
        let n = rng.gen_range(1..=8usize);
        let mut adj = vec![Vec::new(); n];
        for from in 0..n {
            for to in 0..n {
                if rng.gen_bool(0.3) {
                    adj[from].push(to);
                }
            }
        }

        let expected = brute_cycles(n, &adj);
        let got: BTreeSet<Vec<usize>> = find_cycles(&as_trade_graph(n, &adj))
            .into_iter()
            .map(|cycle| {
                cycle
                    .iter()
                    .map(|a| usize::from_str_radix(&a.as_str()[2..], 16).unwrap())
                    .collect()
            })
            .collect();
        assert_eq!(got, expected, "graph {case} with {n} nodes: {adj:?}");
    }
}

#[test]
fn matches_naive_enumeration_on_500_random_digraphs() {
    run_comparison(500, 0x5eed);
}

#[test]
fn complete_digraph_on_five_nodes_is_exhausted() {
    // All arcs present, self-loops included. Sanity for the dense extreme:
    // sum over cycle lengths k of C(5,k) * (k-1)! simple cycles.
    let n = 5;
    let adj: Vec<Vec<usize>> = (0..n).map(|_| (0..n).collect()).collect();
    let expected = brute_cycles(n, &adj);
    assert_eq!(expected.len(), 5 + 10 + 20 + 30 + 24);
    let got: BTreeSet<Vec<usize>> = find_cycles(&as_trade_graph(n, &adj))
        .into_iter()
        .map(|cycle| {
            cycle
                .iter()
                .map(|a| usize::from_str_radix(&a.as_str()[2..], 16).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(got, expected);
}
