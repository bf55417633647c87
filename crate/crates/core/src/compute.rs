//! Materialization of the full relation from sorted marker-set lists.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::rc::Rc;

use crate::error::{EvalError, SpannerError};
use crate::matrices::{prepare, EvalOptions, RelationTables};
use crate::slp::{NtId, Rule, Slp};
use crate::spanner::{PartialMarkerSet, SpanTuple, SpannerAutomaton, Variables};

pub use crate::spanner::compare_marker_sets;

/// All `Λ_B ⊕_s Λ_C` in ⪯ order, by a nested loop without re-sorting.
///
/// Every position of every `Λ_B` must be at most `s`; the outer loop then
/// fixes the prefix up to `s` and the inner loop the remainder, which keeps
/// the output sorted.
pub fn merge_product(
    lb: &[PartialMarkerSet],
    lc: &[PartialMarkerSet],
    s: u64,
) -> Result<Vec<PartialMarkerSet>, SpannerError> {
    let mut out = Vec::with_capacity(lb.len() * lc.len());
    for b in lb {
        for c in lc {
            out.push(b.join(c, s)?);
        }
    }
    debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
    Ok(out)
}

/// k-way merge of sorted lists, dropping duplicates.
pub fn merge_union(lists: &[&[PartialMarkerSet]]) -> Vec<PartialMarkerSet> {
    match lists.len() {
        0 => return Vec::new(),
        1 => return lists[0].to_vec(),
        _ => {}
    }
    let mut heap: BinaryHeap<Reverse<(&PartialMarkerSet, usize, usize)>> = lists
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| Reverse((&l[0], n, 0)))
        .collect();
    let mut out: Vec<PartialMarkerSet> = Vec::new();
    while let Some(Reverse((item, n, pos))) = heap.pop() {
        if out.last() != Some(item) {
            out.push(item.clone());
        }
        if let Some(next) = lists[n].get(pos + 1) {
            heap.push(Reverse((next, n, pos + 1)));
        }
    }
    out
}

/// Size counters of one computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComputeStats {
    /// Memoized `(A, i, j)` entries.
    pub entries: usize,
    /// Longest memoized list.
    pub max_list: usize,
    /// Largest `|M_B[i,k]| · |M_C[k,j]|` over combined pairs.
    pub max_product: usize,
    /// Total number of marker sets held in the memo.
    pub stored_sets: usize,
}

/// The relation of a spanner on a document, in ⪯ order of marker sets.
#[derive(Clone, Debug)]
pub struct Relation {
    pub vars: Variables,
    pub doc_len: u64,
    pub marker_sets: Vec<PartialMarkerSet>,
    pub tuples: Vec<SpanTuple>,
    pub stats: ComputeStats,
}

/// Computes all complete marker sets of the tables' start symbol.
pub fn compute_marker_sets(
    tables: &RelationTables,
    memory_cap: Option<usize>,
) -> Result<(Vec<PartialMarkerSet>, ComputeStats), EvalError> {
    let mut memo: HashMap<(NtId, usize, usize), Rc<Vec<PartialMarkerSet>>> = HashMap::new();
    let mut stats = ComputeStats::default();
    let start = tables.start();
    for &j in tables.accepting_reachable() {
        evaluate(tables, (start, 0, j), &mut memo, &mut stats, memory_cap)?;
    }
    let finals: Vec<&[PartialMarkerSet]> = tables
        .accepting_reachable()
        .iter()
        .map(|&j| memo[&(start, 0, j)].as_slice())
        .collect();
    Ok((merge_union(&finals), stats))
}

/// Memoized evaluation of `M_A[i,j]` with an explicit stack, so deep grammars
/// do not exhaust the call stack. Presence in `memo` is the computed flag.
fn evaluate(
    tables: &RelationTables,
    root: (NtId, usize, usize),
    memo: &mut HashMap<(NtId, usize, usize), Rc<Vec<PartialMarkerSet>>>,
    stats: &mut ComputeStats,
    cap: Option<usize>,
) -> Result<(), EvalError> {
    let mut stack = vec![root];
    while let Some(&(a, i, j)) = stack.last() {
        if memo.contains_key(&(a, i, j)) {
            stack.pop();
            continue;
        }
        let list = match tables.rule(a) {
            Rule::Leaf(_) => tables.leaf_set(a, i, j).to_vec(),
            Rule::Pair(b, c) => {
                let ks = tables.inter(a, i, j);
                let before = stack.len();
                for &k in &ks {
                    if !memo.contains_key(&(b, i, k)) {
                        stack.push((b, i, k));
                    }
                    if !memo.contains_key(&(c, k, j)) {
                        stack.push((c, k, j));
                    }
                }
                if stack.len() > before {
                    continue;
                }
                let shift = tables.length(b);
                let mut parts = Vec::with_capacity(ks.len());
                for &k in &ks {
                    let (lb, lc) = (&memo[&(b, i, k)], &memo[&(c, k, j)]);
                    stats.max_product = stats.max_product.max(lb.len() * lc.len());
                    parts.push(merge_product(lb, lc, shift)?);
                }
                let refs: Vec<&[PartialMarkerSet]> = parts.iter().map(Vec::as_slice).collect();
                merge_union(&refs)
            }
        };
        stack.pop();
        stats.entries += 1;
        stats.max_list = stats.max_list.max(list.len());
        stats.stored_sets += list.len();
        if let Some(cap) = cap {
            if stats.stored_sets > cap {
                return Err(EvalError::MemoryCap { cap });
            }
        }
        memo.insert((a, i, j), Rc::new(list));
    }
    Ok(())
}

/// Converts complete marker sets to tuples, rejecting sets that are not the
/// marker set of any tuple.
pub fn to_tuples(
    sets: &[PartialMarkerSet],
    vars: &Variables,
    doc_len: u64,
) -> Result<Vec<SpanTuple>, EvalError> {
    sets.iter()
        .map(|s| {
            SpanTuple::from_marker_set(s, vars, doc_len)
                .map_err(|e| EvalError::NotSubwordMarked(e.to_string()))
        })
        .collect()
}

/// The relation of `m` on the document of `slp`, with default options.
pub fn compute_relation(slp: &Slp, m: &SpannerAutomaton) -> Result<Relation, EvalError> {
    compute_relation_with(
        slp,
        m,
        EvalOptions {
            determinize: false,
            ..EvalOptions::default()
        },
    )
}

pub fn compute_relation_with(
    slp: &Slp,
    m: &SpannerAutomaton,
    opts: EvalOptions,
) -> Result<Relation, EvalError> {
    let prepared = prepare(slp, m, opts)?;
    let (marker_sets, stats) = compute_marker_sets(&prepared.tables, opts.memory_cap)?;
    let vars = m.vars().clone();
    let tuples = to_tuples(&marker_sets, &vars, prepared.doc_len)?;
    Ok(Relation {
        vars,
        doc_len: prepared.doc_len,
        marker_sets,
        tuples,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slp::build_test_slp;
    use crate::spanner::{compile_spanner_regex, Marker, Span};

    fn pms(entries: &[(u64, Marker)]) -> PartialMarkerSet {
        PartialMarkerSet::from_entries(entries.iter().copied()).unwrap()
    }

    #[test]
    fn intro_relation() {
        let vars = Variables::new(["x", "y"]).unwrap();
        let m = compile_spanner_regex("(b|c)* x{ a }x .* y{ c+ }y .*", &['a', 'b', 'c'], &vars)
            .unwrap();
        let slp = build_test_slp(&"abcca".chars().collect::<Vec<_>>()).unwrap();
        let r = compute_relation(&slp, &m).unwrap();
        let mut got: Vec<String> = r.tuples.iter().map(|t| t.format(&vars)).collect();
        got.sort();
        assert_eq!(
            got,
            vec!["x=[1,2> y=[3,4>", "x=[1,2> y=[3,5>", "x=[1,2> y=[4,5>"]
        );
        assert!(r.marker_sets.windows(2).all(|w| w[0] < w[1]));
        assert!(r.stats.max_list <= r.tuples.len());
    }

    #[test]
    fn boolean_spanner() {
        let vars = Variables::default();
        let m = compile_spanner_regex("a(b|c)*", &['a', 'b', 'c'], &vars).unwrap();
        let yes = build_test_slp(&['a', 'b', 'c']).unwrap();
        let no = build_test_slp(&['b', 'a']).unwrap();
        assert_eq!(
            compute_relation(&yes, &m).unwrap().tuples,
            vec![SpanTuple::new(vec![])]
        );
        assert!(compute_relation(&no, &m).unwrap().tuples.is_empty());
    }

    #[test]
    fn product_and_union() {
        let x = 0;
        let l = vec![
            pms(&[(1, Marker::open(x)), (2, Marker::close(x))]),
            pms(&[]),
        ];
        let shifted = merge_product(&[PartialMarkerSet::new()], &l, 3).unwrap();
        assert_eq!(shifted[0], l[0].shift_right(3).unwrap());
        let p = merge_product(
            &[pms(&[(1, Marker::open(x))])],
            &[pms(&[(1, Marker::close(x))])],
            1,
        )
        .unwrap();
        assert_eq!(p, vec![pms(&[(1, Marker::open(x)), (2, Marker::close(x))])]);
        assert!(merge_product(&[pms(&[(4, Marker::open(x))])], &l, 3).is_err());
        assert_eq!(merge_union(&[&l, &l]), l);
        assert_eq!(merge_union(&[&l, &[]]), l);
        let t = SpanTuple::new(vec![Some(Span::new(1, 2))]);
        assert_eq!(t.to_marker_set().unwrap(), l[0]);
    }
}
