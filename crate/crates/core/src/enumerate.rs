//! Enumeration of the relation through trees over the relation tables.
//!
//! A tree's inner nodes `⟨A,i,k,j⟩` fix the state `k` between the two halves
//! of `A → BC`; its leaves are either empty leaves (only the empty marker set)
//! or terminal leaves whose marker sets come from the leaf lists. Every tuple
//! of the relation lies in the yield of exactly one tree when the automaton is
//! deterministic. Producers are resumable cursors; a shared step counter
//! measures the work spent between outputs.

use std::cell::Cell;
use std::rc::Rc;

use crate::error::EvalError;
use crate::matrices::{prepare, EvalOptions, Reach, RelationTables};
use crate::slp::{NtId, Rule, Slp};
use crate::spanner::{Marker, PartialMarkerSet, SpanTuple, SpannerAutomaton, Variables};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeLabel {
    Inner {
        nt: NtId,
        i: usize,
        k: usize,
        j: usize,
    },
    Empty {
        nt: NtId,
        i: usize,
        j: usize,
    },
    Terminal {
        nt: NtId,
        i: usize,
        j: usize,
    },
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct MTree {
    label: NodeLabel,
    /// Children with the right arc's shift `|D(B)|`; the left arc's is 0.
    children: Option<(Rc<MTree>, Rc<MTree>, u64)>,
}

impl MTree {
    fn leaf(label: NodeLabel) -> Rc<MTree> {
        Rc::new(MTree {
            label,
            children: None,
        })
    }

    pub fn label(&self) -> NodeLabel {
        self.label
    }

    pub fn children(&self) -> Option<(&MTree, &MTree, u64)> {
        self.children
            .as_ref()
            .map(|(l, r, s)| (l.as_ref(), r.as_ref(), *s))
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children()
            .map_or(0, |(l, r, _)| l.node_count() + r.node_count())
    }

    pub fn terminal_leaf_count(&self) -> usize {
        match self.children() {
            Some((l, r, _)) => l.terminal_leaf_count() + r.terminal_leaf_count(),
            None => matches!(self.label, NodeLabel::Terminal { .. }) as usize,
        }
    }

    /// Terminal leaves with the sum of arc labels from the root, left to right.
    pub fn terminal_leaves(&self) -> Vec<(u64, NodeLabel)> {
        let mut out = Vec::new();
        let mut stack = vec![(self, 0u64)];
        while let Some((node, shift)) = stack.pop() {
            match node.children() {
                Some((l, r, s)) => {
                    stack.push((r, shift + s));
                    stack.push((l, shift));
                }
                None => {
                    if let NodeLabel::Terminal { .. } = node.label {
                        out.push((shift, node.label));
                    }
                }
            }
        }
        out
    }

    /// The yield computed directly from its recursive definition.
    pub fn yield_sets(&self, tables: &RelationTables) -> Vec<PartialMarkerSet> {
        match (&self.children, self.label) {
            (Some((l, r, s)), _) => {
                let mut out = Vec::new();
                for a in l.yield_sets(tables) {
                    for b in r.yield_sets(tables) {
                        out.push(a.join(&b, *s).expect("tree yields are disjoint"));
                    }
                }
                out
            }
            (None, NodeLabel::Empty { .. }) => vec![PartialMarkerSet::new()],
            (None, NodeLabel::Terminal { nt, i, j }) => tables.leaf_set(nt, i, j).to_vec(),
            (None, NodeLabel::Inner { .. }) => unreachable!("inner nodes have children"),
        }
    }

    /// Checks the labelling constraints against the tables.
    pub fn validate(&self, tables: &RelationTables) -> Result<(), String> {
        match (self.label, self.children()) {
            (NodeLabel::Inner { nt, i, k, j }, Some((l, r, s))) => {
                let Rule::Pair(b, c) = tables.rule(nt) else {
                    return Err(format!("inner node on leaf nonterminal {nt}"));
                };
                if tables.reach(nt, i, j) != Reach::Nontrivial {
                    return Err(format!("inner node {nt},{i},{j} is not ◆"));
                }
                if !tables.inter(nt, i, j).contains(&k) {
                    return Err(format!("{k} is not an intermediate state of {nt},{i},{j}"));
                }
                if s != tables.length(b) {
                    return Err("right arc label differs from the left length".into());
                }
                let (lnt, li, lj) = endpoints(l.label);
                let (rnt, ri, rj) = endpoints(r.label);
                if (lnt, li, lj) != (b, i, k) || (rnt, ri, rj) != (c, k, j) {
                    return Err("children do not match the split".into());
                }
                l.validate(tables)?;
                r.validate(tables)
            }
            (NodeLabel::Empty { nt, i, j }, None) => {
                if tables.reach(nt, i, j) == Reach::EmptyOnly {
                    Ok(())
                } else {
                    Err(format!("empty leaf {nt},{i},{j} is not ⊘"))
                }
            }
            (NodeLabel::Terminal { nt, i, j }, None) => {
                if matches!(tables.rule(nt), Rule::Leaf(_))
                    && tables.reach(nt, i, j) == Reach::Nontrivial
                {
                    Ok(())
                } else {
                    Err(format!("terminal leaf {nt},{i},{j} is invalid"))
                }
            }
            _ => Err("node kind does not match its arity".into()),
        }
    }
}

fn endpoints(l: NodeLabel) -> (NtId, usize, usize) {
    match l {
        NodeLabel::Inner { nt, i, j, .. }
        | NodeLabel::Empty { nt, i, j }
        | NodeLabel::Terminal { nt, i, j } => (nt, i, j),
    }
}

/// A shared counter of producer steps.
#[derive(Clone, Debug, Default)]
pub struct Steps(Rc<Cell<u64>>);

impl Steps {
    pub fn tick(&self) {
        self.0.set(self.0.get() + 1);
    }

    pub fn get(&self) -> u64 {
        self.0.get()
    }
}

enum TreeState {
    Single(Option<Rc<MTree>>),
    Split {
        b: NtId,
        c: NtId,
        k: usize,
        pairs: Vec<(Option<usize>, Option<usize>)>,
        next_pair: usize,
        kc: Option<usize>,
        left: Option<Box<TreeCursor>>,
        current_left: Option<Rc<MTree>>,
        right: Option<Box<TreeCursor>>,
    },
}

/// Producer of every tree with root `⟨A,i,k,j⟩` (or the single leaf when `k` is ▫).
pub struct TreeCursor {
    tables: Rc<RelationTables>,
    steps: Steps,
    a: NtId,
    i: usize,
    j: usize,
    state: TreeState,
    buffer: Option<Rc<MTree>>,
}

/// Starts the producer for `(A, i, k, j)`; `k = None` is the base symbol ▫.
pub fn enum_trees(
    tables: &Rc<RelationTables>,
    a: NtId,
    i: usize,
    k: Option<usize>,
    j: usize,
    steps: &Steps,
) -> TreeCursor {
    let state = match k {
        None => {
            let label = match (tables.rule(a), tables.reach(a, i, j)) {
                (Rule::Leaf(_), Reach::Nontrivial) => NodeLabel::Terminal { nt: a, i, j },
                (_, Reach::EmptyOnly) => NodeLabel::Empty { nt: a, i, j },
                (_, r) => panic!("base symbol requested for a {r:?} entry of {a}"),
            };
            TreeState::Single(Some(MTree::leaf(label)))
        }
        Some(k) => {
            let Rule::Pair(b, c) = tables.rule(a) else {
                panic!("split requested for leaf nonterminal {a}");
            };
            debug_assert_eq!(tables.reach(a, i, j), Reach::Nontrivial);
            let side = |x: Option<Vec<usize>>| -> Vec<Option<usize>> {
                x.map_or_else(|| vec![None], |v| v.into_iter().map(Some).collect())
            };
            let lb = side(tables.choices(b, i, k));
            let lc = side(tables.choices(c, k, j));
            let pairs = lb
                .iter()
                .flat_map(|&x| lc.iter().map(move |&y| (x, y)))
                .collect();
            TreeState::Split {
                b,
                c,
                k,
                pairs,
                next_pair: 0,
                kc: None,
                left: None,
                current_left: None,
                right: None,
            }
        }
    };
    TreeCursor {
        tables: Rc::clone(tables),
        steps: steps.clone(),
        a,
        i,
        j,
        state,
        buffer: None,
    }
}

impl TreeCursor {
    /// The next tree without consuming it.
    pub fn peek(&mut self) -> Option<&Rc<MTree>> {
        if self.buffer.is_none() {
            self.buffer = self.produce();
        }
        self.buffer.as_ref()
    }

    fn produce(&mut self) -> Option<Rc<MTree>> {
        loop {
            self.steps.tick();
            match &mut self.state {
                TreeState::Single(slot) => return slot.take(),
                TreeState::Split {
                    b,
                    c,
                    k,
                    pairs,
                    next_pair,
                    kc,
                    left,
                    current_left,
                    right,
                } => {
                    if let Some(r) = right {
                        if let Some(tc) = r.next() {
                            let tb = current_left.clone().expect("left tree present");
                            let label = NodeLabel::Inner {
                                nt: self.a,
                                i: self.i,
                                k: *k,
                                j: self.j,
                            };
                            let shift = self.tables.length(*b);
                            return Some(Rc::new(MTree {
                                label,
                                children: Some((tb, tc, shift)),
                            }));
                        }
                        *right = None;
                    }
                    if let Some(l) = left {
                        if let Some(tb) = l.next() {
                            *current_left = Some(tb);
                            *right = Some(Box::new(enum_trees(
                                &self.tables,
                                *c,
                                *k,
                                *kc,
                                self.j,
                                &self.steps,
                            )));
                            continue;
                        }
                        *left = None;
                    }
                    if *next_pair == pairs.len() {
                        return None;
                    }
                    let (kb, kc_next) = pairs[*next_pair];
                    *next_pair += 1;
                    *kc = kc_next;
                    *left = Some(Box::new(enum_trees(
                        &self.tables,
                        *b,
                        self.i,
                        kb,
                        *k,
                        &self.steps,
                    )));
                }
            }
        }
    }
}

impl Iterator for TreeCursor {
    type Item = Rc<MTree>;

    fn next(&mut self) -> Option<Rc<MTree>> {
        self.buffer.take().or_else(|| self.produce())
    }
}

/// Producer of the yield of one tree: an odometer over the leaf lists of its
/// terminal leaves, each shifted by the leaf's total arc label.
pub struct YieldCursor {
    tables: Rc<RelationTables>,
    steps: Steps,
    leaves: Vec<(u64, NtId, usize, usize)>,
    index: Vec<usize>,
    done: bool,
}

pub fn enum_tree_yield(tree: &MTree, tables: &Rc<RelationTables>, steps: &Steps) -> YieldCursor {
    let leaves: Vec<(u64, NtId, usize, usize)> = tree
        .terminal_leaves()
        .into_iter()
        .map(|(s, l)| {
            let (nt, i, j) = endpoints(l);
            (s, nt, i, j)
        })
        .collect();
    let done = leaves
        .iter()
        .any(|&(_, nt, i, j)| tables.leaf_set(nt, i, j).is_empty());
    YieldCursor {
        tables: Rc::clone(tables),
        steps: steps.clone(),
        index: vec![0; leaves.len()],
        leaves,
        done,
    }
}

impl Iterator for YieldCursor {
    type Item = PartialMarkerSet;

    fn next(&mut self) -> Option<PartialMarkerSet> {
        if self.done {
            return None;
        }
        let mut entries: Vec<(u64, Marker)> = Vec::new();
        for (r, &(s, nt, i, j)) in self.leaves.iter().enumerate() {
            self.steps.tick();
            let set = &self.tables.leaf_set(nt, i, j)[self.index[r]];
            entries.extend(set.entries().iter().map(|&(p, m)| (p + s, m)));
        }
        // Advance the odometer, last leaf fastest, which keeps ⪯ order.
        self.done = true;
        for r in (0..self.leaves.len()).rev() {
            self.steps.tick();
            let (_, nt, i, j) = self.leaves[r];
            self.index[r] += 1;
            if self.index[r] < self.tables.leaf_set(nt, i, j).len() {
                self.done = false;
                break;
            }
            self.index[r] = 0;
        }
        self.steps.tick();
        Some(PartialMarkerSet::from_sorted(entries))
    }
}

/// Work and shape statistics of an enumeration run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnumStats {
    pub outputs: u64,
    pub trees: u64,
    /// Largest number of steps between two consecutive outputs (or before the first).
    pub max_gap: u64,
    /// Steps from the last output to the end of the enumeration.
    pub tail_gap: u64,
    /// `histogram[b]` counts gaps `g` with `2^b ≤ g+1 < 2^(b+1)`.
    pub histogram: Vec<u64>,
    pub max_tree_nodes: usize,
    pub max_terminal_leaves: usize,
}

type TreeHook = Box<dyn FnMut(&MTree, &RelationTables)>;

/// Producer of the whole relation, tuple by tuple.
pub struct RelationEnumerator {
    tables: Rc<RelationTables>,
    vars: Variables,
    doc_len: u64,
    depth: usize,
    steps: Steps,
    roots: Vec<(usize, Option<usize>)>,
    next_root: usize,
    trees: Option<TreeCursor>,
    yields: Option<YieldCursor>,
    last_mark: u64,
    stats: EnumStats,
    hook: Option<TreeHook>,
}

impl RelationEnumerator {
    /// Roots are accepting states ascending, then split states ascending.
    pub fn from_tables(tables: RelationTables, doc_len: u64) -> Self {
        let tables = Rc::new(tables);
        let start = tables.start();
        let mut roots = Vec::new();
        for &j in tables.accepting_reachable() {
            match tables.choices(start, 0, j) {
                None => roots.push((j, None)),
                Some(ks) => roots.extend(ks.into_iter().map(|k| (j, Some(k)))),
            }
        }
        RelationEnumerator {
            vars: tables.vars().clone(),
            depth: tables.depth(start),
            tables,
            doc_len,
            steps: Steps::default(),
            roots,
            next_root: 0,
            trees: None,
            yields: None,
            last_mark: 0,
            stats: EnumStats::default(),
            hook: None,
        }
    }

    /// Calls `hook` on every tree before its yield is enumerated.
    pub fn with_tree_hook(mut self, hook: impl FnMut(&MTree, &RelationTables) + 'static) -> Self {
        self.hook = Some(Box::new(hook));
        self
    }

    pub fn vars(&self) -> &Variables {
        &self.vars
    }

    pub fn tables(&self) -> &RelationTables {
        &self.tables
    }

    /// Depth of the grammar the trees are built over (sentinel root included).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn stats(&self) -> &EnumStats {
        &self.stats
    }

    pub fn steps(&self) -> u64 {
        self.steps.get()
    }

    fn record_gap(&mut self) -> u64 {
        let now = self.steps.get();
        let gap = now - self.last_mark;
        self.last_mark = now;
        gap
    }

    /// The next complete marker set, or `None` at the end.
    pub fn next_marker_set(&mut self) -> Option<PartialMarkerSet> {
        loop {
            self.steps.tick();
            if let Some(y) = &mut self.yields {
                if let Some(set) = y.next() {
                    let gap = self.record_gap();
                    let s = &mut self.stats;
                    s.outputs += 1;
                    s.max_gap = s.max_gap.max(gap);
                    let bucket = (64 - (gap + 1).leading_zeros() - 1) as usize;
                    if s.histogram.len() <= bucket {
                        s.histogram.resize(bucket + 1, 0);
                    }
                    s.histogram[bucket] += 1;
                    return Some(set);
                }
                self.yields = None;
            }
            if let Some(t) = &mut self.trees {
                if let Some(tree) = t.next() {
                    self.stats.trees += 1;
                    self.stats.max_tree_nodes = self.stats.max_tree_nodes.max(tree.node_count());
                    self.stats.max_terminal_leaves = self
                        .stats
                        .max_terminal_leaves
                        .max(tree.terminal_leaf_count());
                    if let Some(hook) = &mut self.hook {
                        hook(&tree, &self.tables);
                    }
                    self.yields = Some(enum_tree_yield(&tree, &self.tables, &self.steps));
                    continue;
                }
                self.trees = None;
            }
            if self.next_root == self.roots.len() {
                self.stats.tail_gap = self.steps.get() - self.last_mark;
                return None;
            }
            let (j, k) = self.roots[self.next_root];
            self.next_root += 1;
            let start = self.tables.start();
            self.trees = Some(enum_trees(&self.tables, start, 0, k, j, &self.steps));
        }
    }
}

impl Iterator for RelationEnumerator {
    type Item = Result<SpanTuple, EvalError>;

    fn next(&mut self) -> Option<Self::Item> {
        let set = self.next_marker_set()?;
        Some(
            SpanTuple::from_marker_set(&set, &self.vars, self.doc_len)
                .map_err(|e| EvalError::NotSubwordMarked(e.to_string())),
        )
    }
}

/// Enumerates the relation after determinizing `m` if needed.
pub fn enumerate_relation(
    slp: &Slp,
    m: &SpannerAutomaton,
) -> Result<RelationEnumerator, EvalError> {
    enumerate_relation_with(slp, m, EvalOptions::default(), false)
}

/// With `allow_duplicates`, a nondeterministic automaton is used as is and
/// tuples may repeat. Without it, a nondeterministic automaton must be
/// determinized (`opts.determinize`), otherwise this fails.
pub fn enumerate_relation_with(
    slp: &Slp,
    m: &SpannerAutomaton,
    mut opts: EvalOptions,
    allow_duplicates: bool,
) -> Result<RelationEnumerator, EvalError> {
    if allow_duplicates {
        opts.determinize = false;
    }
    let prepared = prepare(slp, m, opts)?;
    if !prepared.deterministic && !allow_duplicates {
        return Err(EvalError::NotDeterministic);
    }
    Ok(RelationEnumerator::from_tables(
        prepared.tables,
        prepared.doc_len,
    ))
}
