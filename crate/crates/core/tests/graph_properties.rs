mod common;

use std::collections::HashSet;

use common::*;
use grasp_core::graph::{
    count_connected_subgraphs, decompose_positives, expand_successors, is_isomorphic, is_subgraph,
    sample_random_tree, wl_hash, ColorSpace, ColoredGraph, Modification, WL_ROUNDS,
};
use grasp_core::seed;
use proptest::prelude::*;
use rand::Rng;

fn path(n: usize) -> ColoredGraph {
    ColoredGraph::new(vec![0; n], (1..n).map(|i| (i - 1, i, 0)).collect()).unwrap()
}

fn star(m: usize) -> ColoredGraph {
    ColoredGraph::new(vec![0; m + 1], (1..=m).map(|i| (0, i, 0)).collect()).unwrap()
}

#[test]
fn matcher_agrees_with_brute_force_on_small_graphs() {
    let mut rng = seed::rng(11);
    let mut positives = 0;
    for case in 0..20_000 {
        let hn = rng.gen_range(0..=6);
        let (nc, ec) = (rng.gen_range(1..=3u8), rng.gen_range(1..=2u8));
        let density = rng.gen_range(0.2..0.9);
        let h = random_graph(&mut rng, hn, density, nc, ec);
        // Half of the patterns are carved out of `h` so both outcomes occur.
        let g = if case % 2 == 0 && hn > 0 {
            let subs = all_connected_subgraphs(&h);
            let s = &subs[rng.gen_range(0..subs.len())];
            s.permute(&random_permutation(&mut rng, s.node_count()))
        } else {
            let gn = rng.gen_range(0..=hn.max(1));
            let density = rng.gen_range(0.1..0.7);
            random_graph(&mut rng, gn, density, nc, ec)
        };
        let expected = brute_force_subgraph(&g, &h);
        assert_eq!(is_subgraph(&g, &h), expected, "g={g:?} h={h:?}");
        assert_eq!(is_isomorphic(&g, &h), brute_force_isomorphic(&g, &h), "g={g:?} h={h:?}");
        positives += usize::from(expected);
    }
    assert!(positives > 5_000, "{positives}");
}

#[test]
fn subgraph_reflexive_and_transitive() {
    let mut rng = seed::rng(12);
    for _ in 0..2_000 {
        let n = rng.gen_range(1..=7);
        let c = sample_random_tree(n, ColorSpace::new(2, 2), rng.gen()).unwrap();
        assert!(is_subgraph(&c, &c));
        let subs = all_connected_subgraphs(&c);
        let b = &subs[rng.gen_range(0..subs.len())];
        let b_subs = all_connected_subgraphs(b);
        let a = &b_subs[rng.gen_range(0..b_subs.len())];
        assert!(is_subgraph(a, b) && is_subgraph(b, &c));
        assert!(is_subgraph(a, &c));
    }
}

#[test]
fn decomposition_emits_connected_subgraphs() {
    let mut checked = 0;
    for s in 0..1_500u64 {
        let n = 1 + (s % 9) as usize;
        let colors = ColorSpace::new(1 + (s % 4) as usize, 1 + (s % 3) as usize);
        let target = sample_random_tree(n, colors, s).unwrap();
        let out = decompose_positives(&target, 10, s);
        assert_eq!(out[0], target);
        let digests: HashSet<u64> = out.iter().map(|g| wl_hash(g, WL_ROUNDS)).collect();
        assert_eq!(digests.len(), out.len());
        for g in &out {
            assert!(g.is_connected() && !g.is_empty());
            assert!(is_subgraph(g, &target));
            checked += 1;
        }
    }
    assert!(checked >= 10_000, "{checked}");
}

#[test]
fn decomposition_of_p3_finds_every_connected_subgraph() {
    let target = ColoredGraph::new(vec![0, 1, 2], vec![(0, 1, 0), (1, 2, 0)]).unwrap();
    let expected: HashSet<u64> = all_connected_subgraphs(&target)
        .iter()
        .map(|g| wl_hash(g, WL_ROUNDS))
        .collect();
    // 3 singletons, 2 edges, the path itself.
    assert_eq!(expected.len(), 6);
    for s in 0..20 {
        let got: HashSet<u64> = decompose_positives(&target, 10, s)
            .iter()
            .map(|g| wl_hash(g, WL_ROUNDS))
            .collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn successors_change_exactly_one_element() {
    let mut rng = seed::rng(13);
    for _ in 0..500 {
        let n = rng.gen_range(0..=6);
        let g = if n == 0 {
            ColoredGraph::empty()
        } else {
            let subs = all_connected_subgraphs(&random_graph(&mut rng, n, 0.5, 2, 2));
            subs[rng.gen_range(0..subs.len())].clone()
        };
        let colors = ColorSpace::new(2, 2);
        let succ = expand_successors(&g, colors, 32, &[]);
        assert_eq!(succ.iter().filter(|s| s.modification.is_terminal()).count(), 1);
        assert!(succ.last().unwrap().modification.is_terminal());
        for s in &succ {
            let dn = s.graph.node_count() - g.node_count();
            let dm = s.graph.edge_count() - g.edge_count();
            match s.modification {
                Modification::Terminal => assert_eq!(s.graph, g),
                Modification::AddLeaf { .. } => assert_eq!((dn, dm), (1, 1)),
                Modification::AddEdge { .. } => assert_eq!((dn, dm), (0, 1)),
                Modification::AddNode { .. } => assert_eq!((dn, dm, g.node_count()), (1, 0, 0)),
            }
            assert!(s.graph.is_connected());
        }
        // Leaf count: n * |Cn| * |Ce|; edge count: absent pairs * |Ce|.
        let n = g.node_count();
        let pairs = n * n.saturating_sub(1) / 2 - g.edge_count();
        let expected = if n == 0 { 2 + 1 } else { n * 4 + pairs * 2 + 1 };
        assert_eq!(succ.len(), expected);
    }
}

#[test]
fn counting_matches_closed_forms() {
    for n in 1..=10 {
        assert_eq!(count_connected_subgraphs(&path(n)).unwrap(), (n * (n + 1) / 2) as u64);
    }
    for m in 1..=10 {
        assert_eq!(count_connected_subgraphs(&star(m)).unwrap(), (1u64 << m) + m as u64);
    }
}

#[test]
fn counting_matches_enumeration() {
    let mut rng = seed::rng(14);
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let g = random_graph(&mut rng, n, 0.5, 1, 1);
        let brute = all_connected_subgraphs(&g).len() as u64;
        assert_eq!(count_connected_subgraphs(&g).unwrap(), brute);
    }
}

fn arb_tree() -> impl Strategy<Value = ColoredGraph> {
    (1usize..=9, 1usize..=4, 1usize..=3, any::<u64>())
        .prop_map(|(n, nc, ec, s)| sample_random_tree(n, ColorSpace::new(nc, ec), s).unwrap())
}

proptest! {
    #[test]
    fn wl_hash_is_permutation_invariant(g in arb_tree(), s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let p = g.permute(&random_permutation(&mut rng, g.node_count()));
        prop_assert_eq!(wl_hash(&g, WL_ROUNDS), wl_hash(&p, WL_ROUNDS));
        prop_assert!(is_isomorphic(&g, &p));
    }

    #[test]
    fn random_trees_are_trees(n in 1usize..=12, s in any::<u64>()) {
        let t = sample_random_tree(n, ColorSpace::new(3, 2), s).unwrap();
        prop_assert!(t.is_tree());
        prop_assert_eq!(t.edge_count(), n - 1);
    }
}
