//! Relation tables shared by computation and enumeration.
//!
//! For every nonterminal `A` and states `i, j` the tables classify the set
//! `M_A[i,j]` of partial marker sets that drive `i` to `j` over the derived
//! word as empty (⊥), containing only the empty set (⊘), or nontrivial (◆).
//! The classification is stored as two bit planes per nonterminal, in row and
//! column orientation. Intermediate-state sets `K_A[i,j]` are recovered as the
//! intersection of a row of the left child with a column of the right child.

use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;

use crate::bits::{iter_bits, words_for};
use crate::error::EvalError;
use crate::slp::{NtId, Rule, Slp};
use crate::spanner::{
    fresh_sentinel, Label, Letter, PartialMarkerSet, SpannerAutomaton, Variables,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reach {
    /// No marked word over the derived word leads from `i` to `j`.
    Bottom,
    /// Only the unmarked derived word leads from `i` to `j`.
    EmptyOnly,
    /// Some marked word with at least one marker leads from `i` to `j`.
    Nontrivial,
}

/// Two bit planes (non-⊥ and ◆) in row and column orientation.
#[derive(Clone, Debug)]
struct Planes {
    nonbottom_rows: Vec<u64>,
    diamond_rows: Vec<u64>,
    nonbottom_cols: Vec<u64>,
    diamond_cols: Vec<u64>,
}

impl Planes {
    fn new(q: usize, words: usize) -> Self {
        let z = vec![0u64; q * words];
        Planes {
            nonbottom_rows: z.clone(),
            diamond_rows: z.clone(),
            nonbottom_cols: z.clone(),
            diamond_cols: z,
        }
    }

    fn set(&mut self, words: usize, i: usize, j: usize, r: Reach) {
        let (rw, rb) = (i * words + j / 64, 1u64 << (j % 64));
        let (cw, cb) = (j * words + i / 64, 1u64 << (i % 64));
        if r != Reach::Bottom {
            self.nonbottom_rows[rw] |= rb;
            self.nonbottom_cols[cw] |= cb;
        }
        if r == Reach::Nontrivial {
            self.diamond_rows[rw] |= rb;
            self.diamond_cols[cw] |= cb;
        }
    }
}

/// Counters gathered while building the tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TableStats {
    /// Word-level operations spent on inner rules.
    pub word_ops: u64,
    /// Number of inner rules processed.
    pub inner_rules: usize,
    /// Number of non-⊥ cells over all nonterminals.
    pub reachable_cells: u64,
}

pub struct RelationTables {
    q: usize,
    words: usize,
    rules: Vec<Rule>,
    lengths: Vec<u64>,
    depths: Vec<usize>,
    names: Vec<String>,
    start: NtId,
    vars: Variables,
    planes: Vec<Planes>,
    leaf_sets: HashMap<(NtId, usize, usize), Vec<PartialMarkerSet>>,
    accepting_reachable: Vec<usize>,
    stats: TableStats,
}

impl RelationTables {
    pub fn state_count(&self) -> usize {
        self.q
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn rule(&self, a: NtId) -> Rule {
        self.rules[a]
    }

    pub fn length(&self, a: NtId) -> u64 {
        self.lengths[a]
    }

    pub fn depth(&self, a: NtId) -> usize {
        self.depths[a]
    }

    pub fn vars(&self) -> &Variables {
        &self.vars
    }

    pub fn stats(&self) -> TableStats {
        self.stats
    }

    pub fn reach(&self, a: NtId, i: usize, j: usize) -> Reach {
        let p = &self.planes[a];
        let (w, b) = (i * self.words + j / 64, 1u64 << (j % 64));
        if p.nonbottom_rows[w] & b == 0 {
            Reach::Bottom
        } else if p.diamond_rows[w] & b == 0 {
            Reach::EmptyOnly
        } else {
            Reach::Nontrivial
        }
    }

    /// `K_A[i,j]` as a bit set over states; empty for leaves.
    pub fn inter_bits(&self, a: NtId, i: usize, j: usize) -> Vec<u64> {
        match self.rules[a] {
            Rule::Leaf(_) => vec![0; self.words],
            Rule::Pair(b, c) => {
                let row = &self.planes[b].nonbottom_rows[i * self.words..(i + 1) * self.words];
                let col = &self.planes[c].nonbottom_cols[j * self.words..(j + 1) * self.words];
                row.iter().zip(col).map(|(x, y)| x & y).collect()
            }
        }
    }

    /// `K_A[i,j]` in ascending order.
    pub fn inter(&self, a: NtId, i: usize, j: usize) -> Vec<usize> {
        iter_bits(&self.inter_bits(a, i, j)).collect()
    }

    /// `I_A[i,j]`: `None` stands for the base symbol ▫ (leaf or ⊘ entry).
    pub fn choices(&self, a: NtId, i: usize, j: usize) -> Option<Vec<usize>> {
        match self.rules[a] {
            Rule::Leaf(_) => None,
            Rule::Pair(..) if self.reach(a, i, j) == Reach::EmptyOnly => None,
            Rule::Pair(..) => Some(self.inter(a, i, j)),
        }
    }

    /// The sorted list `M_{T_x}[i,j]` for a leaf nonterminal.
    pub fn leaf_set(&self, a: NtId, i: usize, j: usize) -> &[PartialMarkerSet] {
        self.leaf_sets.get(&(a, i, j)).map_or(&[], Vec::as_slice)
    }

    /// Accepting states `j` with `reach_{S₀}[1,j] ≠ ⊥`, ascending.
    pub fn accepting_reachable(&self) -> &[usize] {
        &self.accepting_reachable
    }

    /// Human-readable listing of all non-⊥ entries.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for a in 0..self.rules.len() {
            for i in 0..self.q {
                for j in 0..self.q {
                    let r = self.reach(a, i, j);
                    if r == Reach::Bottom {
                        continue;
                    }
                    let sym = if r == Reach::EmptyOnly { "⊘" } else { "◆" };
                    let _ = write!(out, "{}[{},{}] = {sym}", self.names[a], i + 1, j + 1);
                    match self.rules[a] {
                        Rule::Pair(..) => {
                            let k: Vec<String> = self
                                .inter(a, i, j)
                                .iter()
                                .map(|k| (k + 1).to_string())
                                .collect();
                            let _ = write!(out, " K={{{}}}", k.join(","));
                        }
                        Rule::Leaf(_) => {
                            let sets: Vec<String> = self
                                .leaf_set(a, i, j)
                                .iter()
                                .map(|s| s.display(&self.vars).to_string())
                                .collect();
                            let _ = write!(out, " M=[{}]", sets.join(", "));
                        }
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Builds the tables for a non-tail-spanning automaton. ε-transitions are
/// removed first; leaves must be terminal characters.
pub fn precompute_tables(slp: &Slp, m: &SpannerAutomaton) -> Result<RelationTables, EvalError> {
    let m = m.without_epsilon();
    let q = m.state_count();
    let words = words_for(q);

    if cfg!(debug_assertions) {
        let tail = (0..q).any(|p| {
            m.transitions(p)
                .iter()
                .any(|&(l, t)| matches!(l, Label::Markers(_)) && m.is_accepting(t))
        });
        if tail {
            warn!("automaton may accept tail-spanning words; apply the sentinel transform first");
        }
    }

    // P_i: (ℓ, Y) with ℓ --Y--> i.
    let mut pred: Vec<Vec<(usize, crate::spanner::MarkerSet)>> = vec![Vec::new(); q];
    for l in 0..q {
        for &(label, i) in m.transitions(l) {
            if let Label::Markers(set) = label {
                pred[i].push((l, set));
            }
        }
    }

    let mut planes: Vec<Planes> = Vec::with_capacity(slp.nonterminal_count());
    let mut leaf_sets = HashMap::new();
    let mut stats = TableStats::default();

    for a in 0..slp.nonterminal_count() {
        let mut p = Planes::new(q, words);
        match slp.rule(a) {
            Rule::Leaf(Letter::Char(x)) => {
                let mut cells: HashMap<(usize, usize), Vec<PartialMarkerSet>> = HashMap::new();
                for (i, preds) in pred.iter().enumerate() {
                    for j in m.successors(i, Label::Char(x)) {
                        cells
                            .entry((i, j))
                            .or_default()
                            .push(PartialMarkerSet::new());
                        for &(l, set) in preds {
                            cells
                                .entry((l, j))
                                .or_default()
                                .push(PartialMarkerSet::at(1, set));
                        }
                    }
                }
                for ((i, j), mut list) in cells {
                    list.sort();
                    list.dedup();
                    let r = if list.len() == 1 && list[0].is_empty() {
                        Reach::EmptyOnly
                    } else {
                        Reach::Nontrivial
                    };
                    p.set(words, i, j, r);
                    stats.reachable_cells += 1;
                    leaf_sets.insert((a, i, j), list);
                }
            }
            Rule::Leaf(Letter::Markers(set)) => {
                return Err(EvalError::MarkerLeaf(format!("{:#x}", set.bits())));
            }
            Rule::Pair(b, c) => {
                stats.inner_rules += 1;
                let (pb, pc) = (&planes[b], &planes[c]);
                for i in 0..q {
                    let nb_row = &pb.nonbottom_rows[i * words..(i + 1) * words];
                    let d_row = &pb.diamond_rows[i * words..(i + 1) * words];
                    for j in 0..q {
                        let nb_col = &pc.nonbottom_cols[j * words..(j + 1) * words];
                        let d_col = &pc.diamond_cols[j * words..(j + 1) * words];
                        // First pass: splits through some k decide ⊥ versus ⊘.
                        let mut any_split = false;
                        for w in 0..words {
                            any_split |= nb_row[w] & nb_col[w] != 0;
                        }
                        stats.word_ops += words as u64;
                        if !any_split {
                            continue;
                        }
                        // Second pass: upgrade to ◆ if, for a split k, either side is ◆.
                        let mut diamond = false;
                        for w in 0..words {
                            let k = nb_row[w] & nb_col[w];
                            diamond |= k & (d_row[w] | d_col[w]) != 0;
                        }
                        stats.word_ops += words as u64;
                        let r = if diamond {
                            Reach::Nontrivial
                        } else {
                            Reach::EmptyOnly
                        };
                        p.set(words, i, j, r);
                        stats.reachable_cells += 1;
                    }
                }
            }
        }
        planes.push(p);
    }

    let mut tables = RelationTables {
        q,
        words,
        rules: slp.rules().to_vec(),
        lengths: slp.derived_lengths().to_vec(),
        depths: (0..slp.nonterminal_count()).map(|a| slp.depth(a)).collect(),
        names: (0..slp.nonterminal_count())
            .map(|a| slp.name(a).to_owned())
            .collect(),
        start: slp.start(),
        vars: m.vars().clone(),
        planes,
        leaf_sets,
        accepting_reachable: Vec::new(),
        stats,
    };
    tables.accepting_reachable = m
        .accepting_states()
        .filter(|&j| tables.reach(tables.start, 0, j) != Reach::Bottom)
        .collect();
    Ok(tables)
}

/// How an automaton is prepared before the tables are built.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Determinize nondeterministic input (required for duplicate-free enumeration).
    pub determinize: bool,
    /// Cap on subset states during determinization.
    pub state_cap: usize,
    /// Cap on the number of marker sets held by the computation.
    pub memory_cap: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            determinize: true,
            state_cap: crate::spanner::DEFAULT_STATE_CAP,
            memory_cap: None,
        }
    }
}

/// Tables for a document together with the data needed to map results back.
pub struct Prepared {
    pub tables: RelationTables,
    /// Length of the original document, without the sentinel.
    pub doc_len: u64,
    /// Whether the automaton behind the tables is deterministic.
    pub deterministic: bool,
    /// The automaton after ε-removal, determinization and the sentinel transform.
    pub automaton: SpannerAutomaton,
    /// The document with the sentinel appended.
    pub slp: Slp,
}

/// Removes ε, optionally determinizes, appends a fresh sentinel to both the
/// document and the automaton, and builds the tables.
pub fn prepare(slp: &Slp, m: &SpannerAutomaton, opts: EvalOptions) -> Result<Prepared, EvalError> {
    let mut m = m.without_epsilon();
    if opts.determinize && !m.is_deterministic() {
        warn!(
            "determinizing a {}-state automaton; this may take exponential time",
            m.state_count()
        );
        m = m.determinize(opts.state_cap)?;
    }
    let sentinel = fresh_sentinel(m.alphabet().chain(slp.terminal_chars()));
    let automaton = m.make_non_tail_spanning(sentinel)?;
    let slp = slp.append_sentinel(sentinel)?;
    let tables = precompute_tables(&slp, &automaton)?;
    Ok(Prepared {
        tables,
        doc_len: slp.len() - 1,
        deterministic: automaton.is_deterministic(),
        automaton,
        slp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::{compile_spanner_regex, Marker};

    pub(crate) const WORKED_DFA: &str = "\
states 6
start 1
accept 6
alphabet a b c
vars x y
trans 1 a 1
trans 1 b 1
trans 1 c 1
trans 1 {open(y)} 2
trans 1 {open(x)} 3
trans 2 c 5
trans 3 a 3
trans 3 b 3
trans 3 c 3
trans 3 {close(x)} 4
trans 5 c 5
trans 5 {close(y)} 4
trans 4 a 6
trans 4 b 6
trans 4 c 6
trans 6 a 6
trans 6 b 6
trans 6 c 6
";

    pub(crate) const WORKED_SLP: &str = "\
start S0
S0 -> A B
A -> C D
B -> C E
C -> E Tb
D -> Tc Tc
E -> Ta Ta
Ta -> 'a'
Tb -> 'b'
Tc -> 'c'
";

    fn id(slp: &Slp, name: &str) -> NtId {
        (0..slp.nonterminal_count())
            .find(|&a| slp.name(a) == name)
            .unwrap()
    }

    #[test]
    fn worked_example_entries() {
        let m = SpannerAutomaton::parse(WORKED_DFA).unwrap();
        assert!(m.is_deterministic());
        let slp = Slp::parse(WORKED_SLP).unwrap();
        let t = precompute_tables(&slp, &m).unwrap();
        let c = id(&slp, "C");
        assert_eq!(t.reach(c, 0, 0), Reach::EmptyOnly);
        let tc = slp.leaf(Letter::Char('c')).unwrap();
        assert_eq!(
            t.leaf_set(tc, 0, 4),
            &[PartialMarkerSet::at(
                1,
                crate::spanner::MarkerSet::singleton(Marker::open(1))
            )]
        );
        assert_eq!(t.reach(tc, 4, 4), Reach::EmptyOnly);
        let s0 = slp.start();
        assert_eq!(t.reach(s0, 0, 5), Reach::Nontrivial);
        assert!(t.inter(s0, 0, 5).contains(&4));
        assert_eq!(t.choices(c, 0, 0), None);
        assert_eq!(t.accepting_reachable(), &[5]);
    }

    #[test]
    fn no_markers_means_no_diamonds() {
        let vars = Variables::default();
        let m = compile_spanner_regex("(ab)*a", &['a', 'b'], &vars).unwrap();
        let slp = crate::slp::build_test_slp(&"ababa".chars().collect::<Vec<_>>()).unwrap();
        let t = precompute_tables(&slp, &m).unwrap();
        for a in 0..slp.nonterminal_count() {
            for i in 0..t.state_count() {
                for j in 0..t.state_count() {
                    assert_ne!(t.reach(a, i, j), Reach::Nontrivial);
                    if let Rule::Leaf(_) = slp.rule(a) {
                        let l = t.leaf_set(a, i, j);
                        assert!(l.is_empty() || l == [PartialMarkerSet::new()]);
                    }
                }
            }
        }
    }

    #[test]
    fn work_is_cubic_per_rule() {
        let vars = Variables::new(["x"]).unwrap();
        let m = compile_spanner_regex(".* x{ a+ }x .*", &['a', 'b'], &vars).unwrap();
        let slp = crate::slp::build_test_slp(&"abaabbaaab".chars().collect::<Vec<_>>()).unwrap();
        let p = prepare(&slp, &m, EvalOptions::default()).unwrap();
        let q = p.tables.state_count() as u64;
        let s = p.tables.stats();
        assert!(s.word_ops <= 2 * s.inner_rules as u64 * q * q * words_for(q as usize) as u64);
    }
}
