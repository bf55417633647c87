//! Spanner automata over terminals and marker-set letters.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::bits::BitSet;
use crate::error::SpannerError;
use crate::spanner::markers::{parse_marker_set, Letter, MarkedWord, MarkerSet, Variables};
use crate::text::{bare_or_quoted, tokenize, Token};

/// Default cap on the number of subset states built by [`SpannerAutomaton::determinize`].
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// A transition label. The derived order sorts ε first, then terminals, then marker sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Eps,
    Char(char),
    Markers(MarkerSet),
}

impl From<Letter> for Label {
    fn from(l: Letter) -> Self {
        match l {
            Letter::Char(c) => Label::Char(c),
            Letter::Markers(s) => Label::Markers(s),
        }
    }
}

/// States are `0..state_count` internally; state 0 is the start state and is
/// printed as `1` in the text format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpannerAutomaton {
    alphabet: BTreeSet<char>,
    vars: Variables,
    accepting: Vec<bool>,
    transitions: Vec<Vec<(Label, usize)>>,
}

impl SpannerAutomaton {
    pub fn new(state_count: usize, vars: Variables) -> Result<Self, SpannerError> {
        if state_count == 0 {
            return Err(SpannerError::NoStates);
        }
        Ok(SpannerAutomaton {
            alphabet: BTreeSet::new(),
            vars,
            accepting: vec![false; state_count],
            transitions: vec![Vec::new(); state_count],
        })
    }

    pub fn state_count(&self) -> usize {
        self.accepting.len()
    }

    pub fn vars(&self) -> &Variables {
        &self.vars
    }

    pub fn alphabet(&self) -> impl Iterator<Item = char> + '_ {
        self.alphabet.iter().copied()
    }

    pub fn in_alphabet(&self, c: char) -> bool {
        self.alphabet.contains(&c)
    }

    pub fn extend_alphabet<I: IntoIterator<Item = char>>(&mut self, chars: I) {
        self.alphabet.extend(chars);
    }

    pub fn add_state(&mut self) -> usize {
        self.accepting.push(false);
        self.transitions.push(Vec::new());
        self.accepting.len() - 1
    }

    /// Adds a transition (idempotent). Terminals join the alphabet.
    pub fn add_transition(&mut self, from: usize, label: Label, to: usize) {
        assert!(from < self.state_count() && to < self.state_count());
        if let Label::Char(c) = label {
            self.alphabet.insert(c);
        }
        if let Label::Markers(set) = label {
            assert!(!set.is_empty(), "marker-set labels must be non-empty");
            debug_assert!(set.max_var().is_none_or(|v| v < self.vars.len()));
        }
        let row = &mut self.transitions[from];
        if let Err(pos) = row.binary_search(&(label, to)) {
            row.insert(pos, (label, to));
        }
    }

    pub fn set_accepting(&mut self, state: usize, accepting: bool) {
        self.accepting[state] = accepting;
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.state_count()).filter(|&s| self.accepting[s])
    }

    /// Outgoing transitions of `state`, sorted by label then target.
    pub fn transitions(&self, state: usize) -> &[(Label, usize)] {
        &self.transitions[state]
    }

    /// Targets of `state` under `label`.
    pub fn successors(&self, state: usize, label: Label) -> impl Iterator<Item = usize> + '_ {
        let row = &self.transitions[state];
        let lo = row.partition_point(|t| t.0 < label);
        row[lo..]
            .iter()
            .take_while(move |t| t.0 == label)
            .map(|t| t.1)
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Size measure: states plus transitions.
    pub fn size(&self) -> usize {
        self.state_count() + self.transition_count()
    }

    pub fn has_epsilon(&self) -> bool {
        self.transitions
            .iter()
            .any(|row| row.first().is_some_and(|t| t.0 == Label::Eps))
    }

    /// No ε-transitions and at most one successor per (state, label).
    pub fn is_deterministic(&self) -> bool {
        self.transitions.iter().all(|row| {
            row.iter().all(|t| t.0 != Label::Eps) && row.windows(2).all(|w| w[0].0 != w[1].0)
        })
    }

    /// Distinct non-ε labels in use, sorted.
    pub fn labels(&self) -> Vec<Label> {
        let set: BTreeSet<Label> = self
            .transitions
            .iter()
            .flatten()
            .map(|t| t.0)
            .filter(|l| *l != Label::Eps)
            .collect();
        set.into_iter().collect()
    }

    /// ε-closure of every state, as bit sets.
    pub fn epsilon_closures(&self) -> Vec<BitSet> {
        let q = self.state_count();
        (0..q)
            .map(|s| {
                let mut seen = BitSet::new(q);
                seen.insert(s);
                let mut stack = vec![s];
                while let Some(p) = stack.pop() {
                    for r in self.successors(p, Label::Eps) {
                        if seen.insert(r) {
                            stack.push(r);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    /// An equivalent automaton without ε-transitions over the same states.
    pub fn without_epsilon(&self) -> SpannerAutomaton {
        if !self.has_epsilon() {
            return self.clone();
        }
        let closures = self.epsilon_closures();
        let mut out = SpannerAutomaton {
            alphabet: self.alphabet.clone(),
            vars: self.vars.clone(),
            accepting: vec![false; self.state_count()],
            transitions: vec![Vec::new(); self.state_count()],
        };
        for (p, closure) in closures.iter().enumerate() {
            let mut row = BTreeSet::new();
            for r in closure.iter() {
                if self.accepting[r] {
                    out.accepting[p] = true;
                }
                for &(label, t) in &self.transitions[r] {
                    if label != Label::Eps {
                        row.insert((label, t));
                    }
                }
            }
            out.transitions[p] = row.into_iter().collect();
        }
        out
    }

    /// Keeps only states reachable from the start that can reach an accepting
    /// state; the start state is always kept.
    pub fn trim(&self) -> SpannerAutomaton {
        let q = self.state_count();
        let mut fwd = BitSet::new(q);
        fwd.insert(0);
        let mut stack = vec![0];
        while let Some(p) = stack.pop() {
            for &(_, t) in &self.transitions[p] {
                if fwd.insert(t) {
                    stack.push(t);
                }
            }
        }
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); q];
        for p in 0..q {
            for &(_, t) in &self.transitions[p] {
                rev[t].push(p);
            }
        }
        let mut bwd = BitSet::new(q);
        let mut stack: Vec<usize> = self.accepting_states().collect();
        for &s in &stack {
            bwd.insert(s);
        }
        while let Some(p) = stack.pop() {
            for &r in &rev[p] {
                if bwd.insert(r) {
                    stack.push(r);
                }
            }
        }
        let keep: Vec<usize> = (0..q)
            .filter(|&s| s == 0 || (fwd.contains(s) && bwd.contains(s)))
            .collect();
        let mut index = vec![usize::MAX; q];
        for (n, &s) in keep.iter().enumerate() {
            index[s] = n;
        }
        let mut out = SpannerAutomaton {
            alphabet: self.alphabet.clone(),
            vars: self.vars.clone(),
            accepting: keep.iter().map(|&s| self.accepting[s]).collect(),
            transitions: vec![Vec::new(); keep.len()],
        };
        for (n, &s) in keep.iter().enumerate() {
            out.transitions[n] = self.transitions[s]
                .iter()
                .filter(|t| index[t.1] != usize::MAX)
                .map(|&(l, t)| (l, index[t]))
                .collect();
        }
        out
    }

    /// Every marker-set transition turned into an ε-transition.
    pub fn with_markers_as_epsilon(&self) -> SpannerAutomaton {
        let mut out = self.clone();
        for row in &mut out.transitions {
            for t in row.iter_mut() {
                if let Label::Markers(_) = t.0 {
                    t.0 = Label::Eps;
                }
            }
            row.sort_unstable();
            row.dedup();
        }
        out
    }

    /// Accepts exactly `w·sentinel` for accepted `w`: a fresh accepting state is
    /// reached by the sentinel from every old accepting state, which is demoted.
    pub fn make_non_tail_spanning(&self, sentinel: char) -> Result<SpannerAutomaton, SpannerError> {
        if self.alphabet.contains(&sentinel) {
            return Err(SpannerError::SentinelCollision(sentinel));
        }
        let mut out = self.clone();
        let fin = out.add_state();
        for s in self.accepting_states() {
            out.add_transition(s, Label::Char(sentinel), fin);
            out.accepting[s] = false;
        }
        out.accepting[fin] = true;
        Ok(out)
    }

    /// Subset construction over the labels in use, after ε-elimination.
    /// States are numbered in breadth-first discovery order; the empty subset is omitted.
    pub fn determinize(&self, cap: usize) -> Result<SpannerAutomaton, SpannerError> {
        let m = self.without_epsilon();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut subsets: Vec<Vec<usize>> = vec![vec![0]];
        index.insert(vec![0], 0);
        let mut rows: Vec<Vec<(Label, usize)>> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            let mut moves: BTreeMap<Label, BTreeSet<usize>> = BTreeMap::new();
            for &s in &subsets[n] {
                for &(label, t) in &m.transitions[s] {
                    moves.entry(label).or_default().insert(t);
                }
            }
            let mut row = Vec::with_capacity(moves.len());
            for (label, targets) in moves {
                let key: Vec<usize> = targets.into_iter().collect();
                let id = match index.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = subsets.len();
                        if id >= cap {
                            return Err(SpannerError::StateCapExceeded { cap });
                        }
                        index.insert(key.clone(), id);
                        subsets.push(key);
                        queue.push_back(id);
                        id
                    }
                };
                row.push((label, id));
            }
            if rows.len() <= n {
                rows.resize(n + 1, Vec::new());
            }
            rows[n] = row;
        }
        rows.resize(subsets.len(), Vec::new());
        let accepting = subsets
            .iter()
            .map(|set| set.iter().any(|&s| m.accepting[s]))
            .collect();
        Ok(SpannerAutomaton {
            alphabet: m.alphabet.clone(),
            vars: m.vars.clone(),
            accepting,
            transitions: rows,
        })
    }

    /// Standard NFA acceptance; each marker set is one letter.
    pub fn accepts(&self, w: &MarkedWord) -> bool {
        self.accepts_letters(&w.letters())
    }

    pub fn accepts_letters(&self, letters: &[Letter]) -> bool {
        let sim = Simulator::new(self);
        let mut cur = sim.initial();
        let mut next = BitSet::new(self.state_count());
        for &l in letters {
            sim.step_into(&cur, Label::from(l), &mut next);
            std::mem::swap(&mut cur, &mut next);
            if cur.is_empty() {
                return false;
            }
        }
        sim.is_accepting(&cur)
    }

    /// Parses the automaton text format.
    pub fn parse(text: &str) -> Result<SpannerAutomaton, SpannerError> {
        parse_automaton(text)
    }

    /// Renders the automaton text format; `parse` inverts it.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// A usable sentinel for `alphabet`: `#` when free, otherwise a private-use character.
pub fn fresh_sentinel<I: IntoIterator<Item = char>>(alphabet: I) -> char {
    let used: BTreeSet<char> = alphabet.into_iter().collect();
    std::iter::once('#')
        .chain((0xE000u32..0xF900).filter_map(char::from_u32))
        .find(|c| !used.contains(c))
        .expect("private-use area exhausted")
}

/// Subset simulation with ε-closures, reusable across many words.
pub struct Simulator<'a> {
    m: &'a SpannerAutomaton,
    closures: Vec<BitSet>,
    accepting: BitSet,
}

impl<'a> Simulator<'a> {
    pub fn new(m: &'a SpannerAutomaton) -> Self {
        let mut accepting = BitSet::new(m.state_count());
        for s in m.accepting_states() {
            accepting.insert(s);
        }
        Simulator {
            m,
            closures: m.epsilon_closures(),
            accepting,
        }
    }

    pub fn state_count(&self) -> usize {
        self.m.state_count()
    }

    pub fn initial(&self) -> BitSet {
        self.closures[0].clone()
    }

    /// `out` becomes the ε-closed successor set of `from` under `label`.
    pub fn step_into(&self, from: &BitSet, label: Label, out: &mut BitSet) {
        out.clear();
        for s in from.iter() {
            for t in self.m.successors(s, label) {
                if !out.contains(t) {
                    out.union_with(&self.closures[t]);
                }
            }
        }
    }

    pub fn is_accepting(&self, set: &BitSet) -> bool {
        set.intersects(&self.accepting)
    }
}

impl fmt::Display for SpannerAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states {}", self.state_count())?;
        writeln!(f, "start 1")?;
        let acc: Vec<String> = self
            .accepting_states()
            .map(|s| (s + 1).to_string())
            .collect();
        if acc.is_empty() {
            writeln!(f, "accept")?;
        } else {
            writeln!(f, "accept {}", acc.join(" "))?;
        }
        if !self.alphabet.is_empty() {
            let letters: Vec<String> = self.alphabet.iter().map(|&c| bare_or_quoted(c)).collect();
            writeln!(f, "alphabet {}", letters.join(" "))?;
        }
        if !self.vars.is_empty() {
            writeln!(f, "vars {}", self.vars.names().join(" "))?;
        }
        for (p, row) in self.transitions.iter().enumerate() {
            for &(label, t) in row {
                let l = match label {
                    Label::Eps => "eps".to_owned(),
                    Label::Char(c) => bare_or_quoted(c),
                    Label::Markers(set) => set.display(&self.vars).to_string(),
                };
                writeln!(f, "trans {} {} {}", p + 1, l, t + 1)?;
            }
        }
        Ok(())
    }
}

fn parse_automaton(text: &str) -> Result<SpannerAutomaton, SpannerError> {
    let err = |line: usize, column: usize, message: String| SpannerError::Syntax {
        line,
        column,
        message,
    };
    let mut states: Option<usize> = None;
    let mut accept: Vec<(usize, usize, usize)> = Vec::new();
    let mut alphabet: Vec<char> = Vec::new();
    let mut vars: Option<Variables> = None;
    let mut trans: Vec<(usize, Vec<(usize, Token)>)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = tokenize(raw).map_err(|(c, m)| err(line_no, c, m))?;
        let (kw_col, keyword) = match &tokens[0] {
            (c, Token::Word(w)) => (*c, w.as_str()),
            (c, _) => return Err(err(line_no, *c, "expected a keyword".into())),
        };
        let rest = &tokens[1..];
        let number = |(c, t): &(usize, Token)| -> Result<usize, SpannerError> {
            match t {
                Token::Word(w) => w
                    .parse::<usize>()
                    .map_err(|_| err(line_no, *c, format!("expected a state number, found `{w}`"))),
                _ => Err(err(line_no, *c, "expected a state number".into())),
            }
        };
        match keyword {
            "states" => {
                if rest.len() != 1 {
                    return Err(err(line_no, kw_col, "usage: states <q>".into()));
                }
                if states.is_some() {
                    return Err(err(line_no, kw_col, "`states` declared twice".into()));
                }
                states = Some(number(&rest[0])?);
            }
            "start" => {
                if rest.len() != 1 {
                    return Err(err(line_no, kw_col, "usage: start 1".into()));
                }
                if number(&rest[0])? != 1 {
                    return Err(SpannerError::StartNotOne);
                }
            }
            "accept" => {
                for tok in rest {
                    accept.push((number(tok)?, line_no, tok.0));
                }
            }
            "alphabet" => {
                for (c, tok) in rest {
                    match tok {
                        Token::Quoted(ch) => alphabet.push(*ch),
                        Token::Word(w) if w.chars().count() == 1 => {
                            alphabet.push(w.chars().next().unwrap())
                        }
                        _ => {
                            return Err(err(
                                line_no,
                                *c,
                                "alphabet entries are single characters".into(),
                            ))
                        }
                    }
                }
            }
            "vars" => {
                let mut names = Vec::new();
                for (c, tok) in rest {
                    match tok {
                        Token::Word(w) => names.push(w.clone()),
                        _ => return Err(err(line_no, *c, "expected a variable name".into())),
                    }
                }
                vars = Some(Variables::new(names)?);
            }
            "trans" => trans.push((line_no, rest.to_vec())),
            other => return Err(err(line_no, kw_col, format!("unknown keyword `{other}`"))),
        }
    }

    let q = states.ok_or_else(|| err(1, 1, "missing `states` declaration".into()))?;
    let vars = vars.unwrap_or_default();
    let mut m = SpannerAutomaton::new(q, vars)?;
    m.extend_alphabet(alphabet);
    let check = |s: usize| {
        if s == 0 || s > q {
            Err(SpannerError::StateOutOfRange { state: s, count: q })
        } else {
            Ok(s - 1)
        }
    };
    for (s, _, _) in accept {
        let s = check(s)?;
        m.set_accepting(s, true);
    }
    for (line_no, toks) in trans {
        if toks.len() != 3 {
            let col = toks.first().map_or(1, |t| t.0);
            return Err(err(line_no, col, "usage: trans <p> <label> <q>".into()));
        }
        let p = check(number_of(&toks[0], line_no)?)?;
        let t = check(number_of(&toks[2], line_no)?)?;
        let (col, tok) = &toks[1];
        let label = match tok {
            Token::Word(w) if w == "eps" => Label::Eps,
            Token::Word(w) if w.chars().count() == 1 => Label::Char(w.chars().next().unwrap()),
            Token::Quoted(c) => Label::Char(*c),
            Token::Braced(b) => {
                let set = parse_marker_set(b, m.vars()).map_err(|msg| {
                    if let Some(name) = msg.strip_prefix("unknown variable `") {
                        SpannerError::UnknownVariable(name.trim_end_matches('`').to_owned())
                    } else {
                        err(line_no, *col, msg)
                    }
                })?;
                Label::Markers(set)
            }
            Token::Word(w) => {
                return Err(err(line_no, *col, format!("invalid label `{w}`")));
            }
        };
        m.add_transition(p, label, t);
    }
    Ok(m)
}

fn number_of((c, t): &(usize, Token), line: usize) -> Result<usize, SpannerError> {
    match t {
        Token::Word(w) => w.parse::<usize>().map_err(|_| SpannerError::Syntax {
            line,
            column: *c,
            message: format!("expected a state number, found `{w}`"),
        }),
        _ => Err(SpannerError::Syntax {
            line,
            column: *c,
            message: "expected a state number".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::markers::{Marker, PartialMarkerSet};

    const SAMPLE: &str = "\
# x captures one a
states 3
start 1
accept 3
alphabet a b
vars x
trans 1 b 1
trans 1 {open(x)} 2
trans 2 a 2
trans 2 {close(x)} 3
trans 3 eps 1
";

    #[test]
    fn parse_print_roundtrip() {
        let m = SpannerAutomaton::parse(SAMPLE).unwrap();
        assert_eq!(m.state_count(), 3);
        assert!(m.has_epsilon());
        let again = SpannerAutomaton::parse(&m.to_text()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            SpannerAutomaton::parse("states 2\nstart 2\n"),
            Err(SpannerError::StartNotOne)
        );
        assert_eq!(
            SpannerAutomaton::parse("states 2\ntrans 1 a 3\n"),
            Err(SpannerError::StateOutOfRange { state: 3, count: 2 })
        );
        assert_eq!(
            SpannerAutomaton::parse("states 2\nvars x\ntrans 1 {open(y)} 2\n"),
            Err(SpannerError::UnknownVariable("y".into()))
        );
        assert!(matches!(
            SpannerAutomaton::parse("states 2\ntrans 1 ab 2\n"),
            Err(SpannerError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn acceptance_with_epsilon() {
        let m = SpannerAutomaton::parse(SAMPLE).unwrap();
        let vars = m.vars().clone();
        let w = MarkedWord::parse("b{open(x)}a{close(x)}", &vars).unwrap();
        assert!(m.accepts(&w));
        assert!(!m.accepts(&MarkedWord::unmarked(&['b'])));
        let e = m.without_epsilon();
        assert!(!e.has_epsilon());
        assert!(e.accepts(&w));
    }

    #[test]
    fn determinize_and_sentinel() {
        let m = SpannerAutomaton::parse(SAMPLE).unwrap();
        let d = m.determinize(DEFAULT_STATE_CAP).unwrap();
        assert!(d.is_deterministic());
        let dd = d.determinize(DEFAULT_STATE_CAP).unwrap();
        assert_eq!(d, dd);
        let s = fresh_sentinel(m.alphabet());
        assert_eq!(s, '#');
        let n = m.make_non_tail_spanning(s).unwrap();
        let w = insert_set("ba", &[(2, Marker::open(0)), (3, Marker::close(0))]);
        assert!(m.accepts(&w));
        let mut letters = w.letters();
        letters.push(Letter::Char('#'));
        assert!(n.accepts_letters(&letters));
        assert!(!n.accepts(&w));
        assert!(m.make_non_tail_spanning('a').is_err());
        assert!(matches!(
            m.determinize(1),
            Err(SpannerError::StateCapExceeded { cap: 1 })
        ));
    }

    fn insert_set(doc: &str, entries: &[(u64, Marker)]) -> MarkedWord {
        let d: Vec<char> = doc.chars().collect();
        crate::spanner::markers::insert_markers(
            &d,
            &PartialMarkerSet::from_entries(entries.iter().copied()).unwrap(),
        )
        .unwrap()
    }
}
