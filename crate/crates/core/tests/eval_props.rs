mod common;

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use slpspan::compute::{compute_relation, compute_relation_with, merge_product, merge_union};
use slpspan::enumerate::{enum_tree_yield, enum_trees, enumerate_relation_with, Steps};
use slpspan::generate::{random_document, random_marker_set, random_status_nfa, CorpusConfig};
use slpspan::matrices::{prepare, EvalOptions, Reach, RelationTables};
use slpspan::oracle::brute_force_relation;
use slpspan::slp::{NtId, Rule};
use slpspan::spanner::{PartialMarkerSet, SpanTuple};
use slpspan::{build_test_slp, EvalError};

fn sorted_list(seed: u64, len: usize, max_pos: u64) -> Vec<PartialMarkerSet> {
    let mut rng = StdRng::seed_from_u64(seed);
    let set: BTreeSet<PartialMarkerSet> = (0..len)
        .map(|_| random_marker_set(&mut rng, max_pos.saturating_sub(1), 2))
        .collect();
    set.into_iter().collect()
}

proptest! {
    #[test]
    fn product_is_sorted_and_complete(a in any::<u64>(), b in any::<u64>(), la in 0usize..12, lb in 0usize..12) {
        // Variables are split so the two sides never share a marker.
        let left = sorted_list(a, la, 6);
        let right: Vec<PartialMarkerSet> = sorted_list(b, lb, 6)
            .into_iter()
            .map(|s| {
                let renamed = s.entries().iter().map(|&(p, m)| {
                    let var = m.var() + 2;
                    (p, slpspan::spanner::Marker::new(var, m.kind()))
                });
                PartialMarkerSet::from_entries(renamed).unwrap()
            })
            .collect();
        let right: Vec<PartialMarkerSet> = right.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let shift = 6;
        let out = merge_product(&left, &right, shift).unwrap();
        prop_assert_eq!(out.len(), left.len() * right.len());
        let mut resorted = out.clone();
        resorted.sort();
        resorted.dedup();
        prop_assert_eq!(out, resorted);
    }

    #[test]
    fn union_matches_set_union(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let lists = [sorted_list(a, 8, 5), sorted_list(b, 8, 5), sorted_list(c, 3, 5)];
        let refs: Vec<&[PartialMarkerSet]> = lists.iter().map(Vec::as_slice).collect();
        let want: Vec<PartialMarkerSet> = lists.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        prop_assert_eq!(merge_union(&refs), want);
    }
}

#[test]
fn nondeterministic_automata_without_determinization() {
    let mut rng = StdRng::seed_from_u64(77);
    let no_det = EvalOptions {
        determinize: false,
        ..EvalOptions::default()
    };
    for round in 0..150 {
        let k = rng.gen_range(0..=2);
        let q = rng.gen_range(1..=8);
        let m = random_status_nfa(&mut rng, &['a', 'b'], k, q);
        let len = rng.gen_range(1..=12);
        let doc = random_document(&mut rng, &['a', 'b'], len);
        let slp = build_test_slp(&doc).unwrap();
        let want = brute_force_relation(&doc, &m, 40).unwrap();
        let got = compute_relation_with(&slp, &m, no_det).unwrap().tuples;
        let got_set: BTreeSet<SpanTuple> = got.iter().cloned().collect();
        assert_eq!(got_set, want.iter().cloned().collect(), "round {round}");
        assert_eq!(got.len(), got_set.len(), "compute output has duplicates");

        let emitted: Vec<SpanTuple> = enumerate_relation_with(&slp, &m, no_det, true)
            .unwrap()
            .map(Result::unwrap)
            .collect();
        let emitted_set: BTreeSet<SpanTuple> = emitted.iter().cloned().collect();
        assert_eq!(emitted_set, got_set, "round {round}");

        let det: Vec<SpanTuple> = enumerate_relation_with(&slp, &m, EvalOptions::default(), false)
            .unwrap()
            .map(Result::unwrap)
            .collect();
        assert_eq!(det.len(), want.len(), "round {round}");
        if !m.without_epsilon().is_deterministic() {
            assert!(matches!(
                enumerate_relation_with(&slp, &m, no_det, false),
                Err(EvalError::NotDeterministic)
            ));
        }
    }
}

#[test]
fn boolean_spanners_match_oracle() {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..80 {
        let q = rng.gen_range(1..=6);
        let m = random_status_nfa(&mut rng, &['a', 'b'], 0, q);
        let len = rng.gen_range(1..=20);
        let doc = random_document(&mut rng, &['a', 'b'], len);
        let slp = build_test_slp(&doc).unwrap();
        let want = brute_force_relation(&doc, &m, 40).unwrap();
        assert!(want.len() <= 1);
        assert_eq!(compute_relation(&slp, &m).unwrap().tuples, want);
        let e: Vec<SpanTuple> = slpspan::enumerate::enumerate_relation(&slp, &m)
            .unwrap()
            .map(Result::unwrap)
            .collect();
        assert_eq!(e, want);
    }
}

#[test]
fn relation_lists_are_strictly_ordered() {
    for inst in common::corpus(0xabc, 60) {
        let r = compute_relation(&inst.slp, &inst.automaton).unwrap();
        assert!(r.marker_sets.windows(2).all(|w| w[0] < w[1]));
        assert!(r.stats.max_list <= r.tuples.len().max(1));
    }
}

#[test]
fn memory_cap_is_reported() {
    let inst = common::corpus(0x77, 40)
        .into_iter()
        .find(|i| i.relation.len() > 10)
        .expect("a corpus instance with a sizeable relation");
    let opts = EvalOptions {
        memory_cap: Some(1),
        ..EvalOptions::default()
    };
    assert!(matches!(
        compute_relation_with(&inst.slp, &inst.automaton, opts),
        Err(EvalError::MemoryCap { cap: 1 })
    ));
}

/// Every tree for `(A, i, k, j)` built recursively from the definition, in
/// the same order as the producers.
fn all_trees(t: &RelationTables, a: NtId, i: usize, k: Option<usize>, j: usize) -> Vec<String> {
    let Some(k) = k else {
        let kind = match (t.rule(a), t.reach(a, i, j)) {
            (Rule::Leaf(_), Reach::Nontrivial) => "T",
            (_, Reach::EmptyOnly) => "E",
            _ => panic!("invalid base entry"),
        };
        return vec![format!("{kind}({a},{i},{j})")];
    };
    let Rule::Pair(b, c) = t.rule(a) else {
        panic!("leaf split")
    };
    let side = |x: Option<Vec<usize>>| x.map_or(vec![None], |v| v.into_iter().map(Some).collect());
    let mut out = Vec::new();
    for kb in side(t.choices(b, i, k)) {
        for kc in side(t.choices(c, k, j)) {
            for l in all_trees(t, b, i, kb, k) {
                for r in all_trees(t, c, k, kc, j) {
                    out.push(format!("N({a},{i},{k},{j};{l};{r})"));
                }
            }
        }
    }
    out
}

fn render(tree: &slpspan::enumerate::MTree) -> String {
    use slpspan::enumerate::NodeLabel;
    match (tree.label(), tree.children()) {
        (NodeLabel::Inner { nt, i, k, j }, Some((l, r, _))) => {
            format!("N({nt},{i},{k},{j};{};{})", render(l), render(r))
        }
        (NodeLabel::Empty { nt, i, j }, None) => format!("E({nt},{i},{j})"),
        (NodeLabel::Terminal { nt, i, j }, None) => format!("T({nt},{i},{j})"),
        _ => unreachable!(),
    }
}

#[test]
fn trees_match_exhaustive_construction() {
    let cfg = CorpusConfig {
        max_doc_len: 14,
        ..CorpusConfig::default()
    };
    let mut rng = StdRng::seed_from_u64(31);
    let mut trees_seen = 0;
    for _ in 0..120 {
        let inst = slpspan::generate::random_instance(&mut rng, &cfg).unwrap();
        let prepared = prepare(&inst.slp, &inst.automaton, EvalOptions::default()).unwrap();
        let tables = Rc::new(prepared.tables);
        let steps = Steps::default();
        let start = tables.start();
        let mut yields: Vec<PartialMarkerSet> = Vec::new();
        for &j in tables.accepting_reachable() {
            let roots = tables
                .choices(start, 0, j)
                .map_or(vec![None], |v| v.into_iter().map(Some).collect());
            for k in roots {
                let produced: Vec<_> = enum_trees(&tables, start, 0, k, j, &steps).collect();
                let rendered: Vec<String> = produced.iter().map(|t| render(t)).collect();
                assert_eq!(rendered, all_trees(&tables, start, 0, k, j));
                let mut counts: HashMap<&String, usize> = HashMap::new();
                for r in &rendered {
                    *counts.entry(r).or_default() += 1;
                }
                assert!(counts.values().all(|&c| c == 1), "duplicate tree");
                for t in &produced {
                    trees_seen += 1;
                    t.validate(&tables).unwrap();
                    let direct = t.yield_sets(&tables);
                    let streamed: Vec<_> = enum_tree_yield(t, &tables, &steps).collect();
                    assert_eq!(streamed, direct);
                    yields.extend(streamed);
                }
            }
        }
        let want: BTreeSet<PartialMarkerSet> = inst
            .relation
            .iter()
            .map(|t| t.to_marker_set().unwrap())
            .collect();
        assert_eq!(yields.len(), want.len(), "yields overlap or miss tuples");
        assert_eq!(yields.into_iter().collect::<BTreeSet<_>>(), want);
    }
    assert!(trees_seen > 100);
}
