//! Brute-force evaluation on the uncompressed document.
//!
//! Every candidate tuple is turned into its marker set, the markers are
//! inserted into the document and the automaton is run on the result. Nothing
//! here touches the grammar machinery, so it serves as ground truth.

use crate::bits::BitSet;
use crate::error::EvalError;
use crate::spanner::{
    fresh_sentinel, insert_markers, Label, Letter, PartialMarkerSet, Simulator, Span, SpanTuple,
    SpannerAutomaton, Variables,
};

pub const DEFAULT_ORACLE_BOUND: usize = 40;
pub const ORACLE_MAX_VARIABLES: usize = 3;

/// All partial assignments of `var_count` variables to spans of a document of
/// length `n`, each variable being undefined or some `[i,j⟩` with `1 ≤ i ≤ j ≤ n+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateSpace {
    pub doc_len: usize,
    pub var_count: usize,
}

impl CandidateSpace {
    pub fn new(doc_len: usize, var_count: usize) -> Self {
        CandidateSpace { doc_len, var_count }
    }

    /// Choices per variable: the spans plus undefined.
    pub fn choices_per_variable(&self) -> u128 {
        let n = self.doc_len as u128;
        n * (n + 1) / 2 + (n + 1) + 1
    }

    pub fn cardinality(&self) -> u128 {
        self.choices_per_variable().pow(self.var_count as u32)
    }

    pub fn iter(&self) -> CandidateIter {
        let last = self.doc_len as u64 + 1;
        let mut options = vec![None];
        for i in 1..=last {
            for j in i..=last {
                options.push(Some(Span::new(i, j)));
            }
        }
        CandidateIter {
            options,
            index: vec![0; self.var_count],
            done: false,
        }
    }
}

/// Odometer over the candidate space, the last variable changing fastest.
pub struct CandidateIter {
    options: Vec<Option<Span>>,
    index: Vec<usize>,
    done: bool,
}

impl Iterator for CandidateIter {
    type Item = SpanTuple;

    fn next(&mut self) -> Option<SpanTuple> {
        if self.done {
            return None;
        }
        let t = SpanTuple::new(self.index.iter().map(|&i| self.options[i]).collect());
        self.done = true;
        for d in self.index.iter_mut().rev() {
            *d += 1;
            if *d < self.options.len() {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some(t)
    }
}

fn check_bounds(doc: &[char], vars: &Variables, bound: usize) -> Result<(), EvalError> {
    if doc.len() > bound {
        return Err(EvalError::OracleBound {
            length: doc.len(),
            bound,
        });
    }
    if vars.len() > ORACLE_MAX_VARIABLES {
        return Err(EvalError::OracleVariables {
            max: ORACLE_MAX_VARIABLES,
            got: vars.len(),
        });
    }
    Ok(())
}

/// A document with the sentinel appended and an automaton accepting `w#` for
/// each accepted `w`, exactly as the compressed pipelines see them.
fn with_sentinel(
    doc: &[char],
    m: &SpannerAutomaton,
) -> Result<(Vec<char>, SpannerAutomaton), EvalError> {
    let sentinel = fresh_sentinel(m.alphabet().chain(doc.iter().copied()));
    let mut padded = doc.to_vec();
    padded.push(sentinel);
    Ok((padded, m.make_non_tail_spanning(sentinel)?))
}

/// Whether `insert_markers(doc#, [t])` is accepted by the sentinel automaton.
pub fn oracle_accepts(
    doc: &[char],
    m: &SpannerAutomaton,
    t: &SpanTuple,
) -> Result<bool, EvalError> {
    let (padded, m) = with_sentinel(doc, m)?;
    let set = t.to_marker_set()?;
    if set.max_position().is_some_and(|p| p > doc.len() as u64 + 1) {
        return Ok(false);
    }
    Ok(m.accepts(&insert_markers(&padded, &set)?))
}

/// Every tuple accepted by `m` on `doc`, in ⪯ order of marker sets.
///
/// Runs are shared through the unmarked prefix before the first marker set
/// and the unmarked suffix after the last one; in between, the marked word is
/// simulated letter by letter.
pub fn brute_force_relation(
    doc: &[char],
    m: &SpannerAutomaton,
    bound: usize,
) -> Result<Vec<SpanTuple>, EvalError> {
    check_bounds(doc, m.vars(), bound)?;
    let (padded, m) = with_sentinel(doc, &m.without_epsilon())?;
    let sim = Simulator::new(&m);
    let q = m.state_count();
    let len = padded.len();

    // pre[p]: states after chars 1..p-1 (1-based, p in 1..=len).
    let mut pre = vec![sim.initial()];
    for &c in &padded {
        let mut next = BitSet::new(q);
        sim.step_into(pre.last().unwrap(), Label::Char(c), &mut next);
        pre.push(next);
    }
    // post[p]: states from which chars p+1..len lead to acceptance.
    let mut post = vec![BitSet::new(q); len + 1];
    for s in m.accepting_states() {
        post[len].insert(s);
    }
    for p in (0..len).rev() {
        for s in 0..q {
            if m.successors(s, Label::Char(padded[p]))
                .any(|t| post[p + 1].contains(t))
            {
                post[p].insert(s);
            }
        }
    }

    let mut accepted: Vec<PartialMarkerSet> = Vec::new();
    let mut cur = BitSet::new(q);
    let mut next = BitSet::new(q);
    for t in CandidateSpace::new(doc.len(), m.vars().len()).iter() {
        let set = t.to_marker_set()?;
        let groups = set.groups();
        let ok = match groups.first() {
            None => pre[0].intersects(&post[0]),
            Some(&(first, _)) => {
                cur.clear();
                cur.union_with(&pre[first as usize - 1]);
                let mut pos = first as usize;
                let mut alive = true;
                for (gi, &(p, markers)) in groups.iter().enumerate() {
                    let p = p as usize;
                    if gi > 0 {
                        for &c in &padded[pos - 1..p - 1] {
                            sim.step_into(&cur, Label::Char(c), &mut next);
                            std::mem::swap(&mut cur, &mut next);
                        }
                    }
                    sim.step_into(&cur, Label::Markers(markers), &mut next);
                    std::mem::swap(&mut cur, &mut next);
                    pos = p;
                    if cur.is_empty() {
                        alive = false;
                        break;
                    }
                }
                alive && cur.intersects(&post[pos - 1])
            }
        };
        if ok {
            accepted.push(set);
        }
    }
    accepted.sort();
    accepted
        .iter()
        .map(|s| {
            SpanTuple::from_marker_set(s, m.vars(), doc.len() as u64)
                .map_err(|e| EvalError::NotSubwordMarked(e.to_string()))
        })
        .collect()
}

/// The plain definition: one full acceptance test per candidate, on the raw
/// automaton and the document without sentinel. Slow; used to validate
/// [`brute_force_relation`].
pub fn brute_force_relation_plain(
    doc: &[char],
    m: &SpannerAutomaton,
    bound: usize,
) -> Result<Vec<SpanTuple>, EvalError> {
    check_bounds(doc, m.vars(), bound)?;
    let mut accepted = Vec::new();
    for t in CandidateSpace::new(doc.len(), m.vars().len()).iter() {
        let set = t.to_marker_set()?;
        if m.accepts(&insert_markers(doc, &set)?) {
            accepted.push((set, t));
        }
    }
    accepted.sort();
    Ok(accepted.into_iter().map(|(_, t)| t).collect())
}

/// Letters of the marked word for `t` on `doc`, for debugging output.
pub fn marked_letters(doc: &[char], t: &SpanTuple) -> Result<Vec<Letter>, EvalError> {
    Ok(insert_markers(doc, &t.to_marker_set()?)?.letters())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::compile_spanner_regex;

    #[test]
    fn cardinality_matches_iteration() {
        for (n, k) in [(0, 0), (0, 2), (3, 1), (4, 2)] {
            let space = CandidateSpace::new(n, k);
            assert_eq!(space.iter().count() as u128, space.cardinality());
        }
        assert_eq!(CandidateSpace::new(40, 2).choices_per_variable(), 862);
    }

    #[test]
    fn intro_relation() {
        let vars = Variables::new(["x", "y"]).unwrap();
        let m = compile_spanner_regex("(b|c)* x{ a }x .* y{ c+ }y .*", &['a', 'b', 'c'], &vars)
            .unwrap();
        let doc: Vec<char> = "abcca".chars().collect();
        let got: Vec<String> = brute_force_relation(&doc, &m, DEFAULT_ORACLE_BOUND)
            .unwrap()
            .iter()
            .map(|t| t.format(&vars))
            .collect();
        assert_eq!(got.len(), 3);
        for want in ["x=[1,2> y=[3,4>", "x=[1,2> y=[4,5>", "x=[1,2> y=[3,5>"] {
            assert!(got.iter().any(|g| g == want), "{want} missing");
        }
        let plain: Vec<String> = brute_force_relation_plain(&doc, &m, DEFAULT_ORACLE_BOUND)
            .unwrap()
            .iter()
            .map(|t| t.format(&vars))
            .collect();
        assert_eq!(got, plain);
    }

    #[test]
    fn empty_language_and_bounds() {
        let vars = Variables::new(["x"]).unwrap();
        let m = SpannerAutomaton::new(1, vars.clone()).unwrap();
        assert!(brute_force_relation(&['a', 'b'], &m, 40)
            .unwrap()
            .is_empty());
        let long = vec!['a'; 41];
        assert!(matches!(
            brute_force_relation(&long, &m, 40),
            Err(EvalError::OracleBound { .. })
        ));
        let many = Variables::new(["a", "b", "c", "d"]).unwrap();
        let m4 = SpannerAutomaton::new(1, many).unwrap();
        assert!(matches!(
            brute_force_relation(&['a'], &m4, 40),
            Err(EvalError::OracleVariables { .. })
        ));
    }

    #[test]
    fn tail_and_empty_spans() {
        let vars = Variables::new(["x"]).unwrap();
        let m = compile_spanner_regex("a* x{ }x", &['a'], &vars).unwrap();
        let got = brute_force_relation(&['a', 'a'], &m, 40).unwrap();
        assert_eq!(got, vec![SpanTuple::new(vec![Some(Span::new(3, 3))])]);
        assert!(oracle_accepts(&['a', 'a'], &m, &got[0]).unwrap());
        assert_eq!(
            got,
            brute_force_relation_plain(&['a', 'a'], &m, 40).unwrap()
        );
    }
}
