mod common;

use std::collections::HashSet;

use common::*;
use mkpoe::graph::{build_graph, dedup, process_constraints, process_with, prune_direct_contradictions, ProcessOptions};
use mkpoe::{Comparison, Error};
use proptest::prelude::*;

fn comparisons(max_item: usize, max_len: usize) -> impl Strategy<Value = Vec<Comparison>> {
    prop::collection::vec((0..max_item, 0..max_item, 0..max_item, 0..max_item), 0..max_len).prop_map(|raw| {
        raw.into_iter()
            .map(|(i, j, k, l)| Comparison::new(i, j, k, l))
            .filter(Comparison::is_valid)
            .collect()
    })
}

/// Edge set of a comparison list in pair-index space.
fn pair_edges(comps: &[Comparison]) -> HashSet<(mkpoe::Pair, mkpoe::Pair)> {
    comps.iter().map(|c| c.pairs().unwrap()).collect()
}

/// Longest path (in edges) by brute-force DFS over simple paths.
fn brute_longest(n: usize, edges: &[(usize, usize)]) -> usize {
    fn go(v: usize, adj: &[Vec<usize>], seen: &mut Vec<bool>) -> usize {
        let mut best = 0;
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                best = best.max(1 + go(w, adj, seen));
                seen[w] = false;
            }
        }
        best
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
    }
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            seen[s] = true;
            go(s, &adj, &mut seen)
        })
        .max()
        .unwrap_or(0)
}

proptest! {
    #[test]
    fn processed_output_is_a_reduced_order(comps in comparisons(6, 40), seed in any::<u64>()) {
        let out = process_constraints(&comps, seed).unwrap();
        let g = build_graph(&out).unwrap();
        prop_assert!(g.is_acyclic());
        // no edge implied by a two-step path
        let edges = pair_edges(&out);
        for &(a, b) in &edges {
            for &(c, d) in &edges {
                if b == c {
                    prop_assert!(!edges.contains(&(a, d)));
                }
            }
        }
        // only input edges survive
        let input = pair_edges(&comps);
        prop_assert!(edges.is_subset(&input));
        // already clean input passes through unchanged
        let again = process_constraints(&out, seed).unwrap();
        prop_assert_eq!(pair_edges(&again), edges);
    }

    #[test]
    fn pruning_removes_both_sides(comps in comparisons(5, 30)) {
        let uniq = dedup(&comps).unwrap();
        let kept = prune_direct_contradictions(&uniq);
        let e = pair_edges(&uniq);
        let contradicted = e.iter().filter(|(a, b)| e.contains(&(*b, *a))).count();
        prop_assert_eq!(kept.len(), uniq.len() - contradicted);
        let k = pair_edges(&kept);
        for &(a, b) in &k {
            prop_assert!(!k.contains(&(b, a)));
        }
    }

    #[test]
    fn stage_counts_are_monotone(comps in comparisons(5, 40), seed in any::<u64>()) {
        let (out, r) = process_with(&comps, ProcessOptions::full(seed)).unwrap();
        prop_assert_eq!(r.input, comps.len());
        prop_assert!(r.deduplicated <= r.input);
        prop_assert!(r.after_contradictions <= r.deduplicated);
        prop_assert!(r.after_acyclic <= r.after_contradictions);
        prop_assert!(r.after_reduction <= r.after_acyclic);
        prop_assert_eq!(r.after_reduction, out.len());
    }

    #[test]
    fn cycle_witness_is_a_real_cycle(comps in comparisons(5, 30)) {
        let g = build_graph(&comps).unwrap();
        match g.find_cycle() {
            Some(cycle) => {
                prop_assert!(cycle.len() >= 2);
                for w in 0..cycle.len() {
                    prop_assert!(g.has_edge(cycle[w], cycle[(w + 1) % cycle.len()]));
                }
                prop_assert!(matches!(g.topological_order(), Err(Error::Cyclic(_))));
            }
            None => {
                let order = g.topological_order().unwrap();
                let pos: std::collections::HashMap<_, _> = order.iter().enumerate().map(|(i, p)| (*p, i)).collect();
                for (a, b) in g.edges() {
                    prop_assert!(pos[&a] < pos[&b]);
                }
            }
        }
    }

    #[test]
    fn diameter_matches_longest_path(edges in prop::collection::vec((0usize..7, 0usize..7), 0..14)) {
        let dag: Vec<(usize, usize)> = edges.into_iter().filter(|(u, v)| u < v).collect();
        prop_assume!(!dag.is_empty());
        let g = graph_from_edges(&dag);
        prop_assert_eq!(g.diameter().unwrap(), brute_longest(7, &dag));
        prop_assert_eq!(g.transitive_reduction().unwrap().diameter().unwrap(), brute_longest(7, &dag));
    }

    #[test]
    fn max_acyclic_is_deterministic_and_keeps_dags(edges in prop::collection::vec((0usize..6, 0usize..6), 0..15), seed in any::<u64>()) {
        let edges: Vec<(usize, usize)> = edges.into_iter().filter(|(u, v)| u != v).collect();
        prop_assume!(!edges.is_empty());
        let g = graph_from_edges(&edges);
        let a = graph_edges(&g.max_acyclic_subgraph(seed));
        prop_assert_eq!(&a, &graph_edges(&g.max_acyclic_subgraph(seed)));
        prop_assert!(brute_acyclic(6, &a));
        if brute_acyclic(6, &edges) {
            prop_assert_eq!(a, graph_edges(&g));
        }
    }
}

#[test]
fn reduction_rejects_cycles_with_witness() {
    let comps = edges_to_comparisons(&[(0, 1), (1, 2), (2, 0)]);
    let err = build_graph(&comps).unwrap().transitive_reduction().unwrap_err();
    match err {
        Error::Cyclic(w) => {
            assert_eq!(w.len(), 3);
            assert!(err_text(&Error::Cyclic(w)).contains("->"));
        }
        other => panic!("unexpected {other}"),
    }
}

fn err_text(e: &Error) -> String {
    e.to_string()
}

#[test]
fn closure_of_chain_is_complete() {
    let chain: Vec<(usize, usize)> = (0..6).map(|v| (v, v + 1)).collect();
    let g = graph_from_edges(&chain);
    let closure = graph_edges(&g.transitive_closure());
    assert_eq!(closure.len(), 7 * 6 / 2);
    assert_eq!(g.transitive_closure().transitive_reduction().unwrap().edge_count(), 6);
}
