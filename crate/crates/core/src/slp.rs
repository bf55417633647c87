//! Straight-line programs in normal form.
//!
//! Every rule is either a leaf `T_x → x` (one per letter) or a pair `A → BC`.
//! Nonterminals are numbered so that children always precede their parents,
//! which makes index order a valid bottom-up evaluation order.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::SlpError;
use crate::spanner::markers::{Letter, PartialMarkerSet};
use crate::text::{quote_char, tokenize, Token};

pub type NtId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Leaf(Letter),
    Pair(NtId, NtId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slp {
    rules: Vec<Rule>,
    names: Vec<String>,
    lengths: Vec<u64>,
    depths: Vec<usize>,
    leaves: HashMap<Letter, NtId>,
    start: NtId,
}

impl Slp {
    /// Parses the text format and normalizes it.
    pub fn parse(text: &str) -> Result<Slp, SlpError> {
        normalize(&parse_slp(text)?)
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, a: NtId) -> Rule {
        self.rules[a]
    }

    pub fn name(&self, a: NtId) -> &str {
        &self.names[a]
    }

    pub fn nonterminal_count(&self) -> usize {
        self.rules.len()
    }

    /// `|N|` plus the total length of all right-hand sides.
    pub fn size(&self) -> usize {
        self.rules
            .iter()
            .map(|r| match r {
                Rule::Leaf(_) => 2,
                Rule::Pair(..) => 3,
            })
            .sum()
    }

    /// Length of the derived document.
    pub fn len(&self) -> u64 {
        self.lengths[self.start]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self, a: NtId) -> u64 {
        self.lengths[a]
    }

    pub fn derived_lengths(&self) -> &[u64] {
        &self.lengths
    }

    pub fn depth(&self, a: NtId) -> usize {
        self.depths[a]
    }

    pub fn depth_of(&self) -> usize {
        self.depths[self.start]
    }

    pub fn leaf(&self, letter: Letter) -> Option<NtId> {
        self.leaves.get(&letter).copied()
    }

    /// Letters that have a leaf rule, sorted.
    pub fn letters(&self) -> Vec<Letter> {
        let mut v: Vec<Letter> = self.leaves.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Terminal characters with a leaf rule, sorted.
    pub fn terminal_chars(&self) -> Vec<char> {
        self.letters()
            .into_iter()
            .filter_map(|l| match l {
                Letter::Char(c) => Some(c),
                Letter::Markers(_) => None,
            })
            .collect()
    }

    /// The derived letter sequence; fails beyond `limit` letters.
    pub fn expand_letters(&self, limit: u64) -> Result<Vec<Letter>, SlpError> {
        if self.len() > limit {
            return Err(SlpError::LimitExceeded {
                length: self.len(),
                limit,
            });
        }
        let mut out = Vec::with_capacity(self.len() as usize);
        let mut stack = vec![self.start];
        while let Some(a) = stack.pop() {
            match self.rules[a] {
                Rule::Leaf(l) => out.push(l),
                Rule::Pair(b, c) => {
                    stack.push(c);
                    stack.push(b);
                }
            }
        }
        Ok(out)
    }

    /// The derived document's characters (marker-set letters are skipped).
    pub fn expand(&self, limit: u64) -> Result<Vec<char>, SlpError> {
        Ok(self
            .expand_letters(limit)?
            .into_iter()
            .filter_map(|l| match l {
                Letter::Char(c) => Some(c),
                Letter::Markers(_) => None,
            })
            .collect())
    }

    /// The letter at 1-based position `i`, by descent along the lengths.
    pub fn char_at(&self, i: u64) -> Result<Letter, SlpError> {
        if i == 0 || i > self.len() {
            return Err(SlpError::OutOfRange {
                position: i,
                length: self.len(),
            });
        }
        let (mut a, mut p) = (self.start, i);
        loop {
            match self.rules[a] {
                Rule::Leaf(l) => return Ok(l),
                Rule::Pair(b, c) => {
                    if p <= self.lengths[b] {
                        a = b;
                    } else {
                        p -= self.lengths[b];
                        a = c;
                    }
                }
            }
        }
    }

    /// An SLP deriving the marked word of `markers` over this document.
    /// Each marked position copies one root-to-leaf path; tail markers get a new root.
    pub fn insert_markers(&self, markers: &PartialMarkerSet) -> Result<Slp, SlpError> {
        let n = self.len();
        let groups = markers.groups();
        if let Some(&(p, _)) = groups.last() {
            if p > n + 1 {
                return Err(SlpError::IncompatibleMarkers {
                    position: p,
                    length: n,
                });
            }
        }
        let mut b = SlpBuilder::extend(self.clone());
        let mut root = self.start;
        let mut tail = None;
        // Right to left, so earlier positions are not moved by inserted letters.
        for &(pos, set) in groups.iter().rev() {
            if pos == n + 1 {
                tail = Some(set);
                continue;
            }
            let mut path = Vec::new();
            let (mut a, mut p) = (root, pos);
            while let Rule::Pair(l, r) = b.rules[a] {
                if p <= b.lengths[l] {
                    path.push((a, true));
                    a = l;
                } else {
                    p -= b.lengths[l];
                    path.push((a, false));
                    a = r;
                }
            }
            let mark = b.leaf(Letter::Markers(set));
            let mut cur = b.pair(mark, a)?;
            for &(node, left) in path.iter().rev() {
                let Rule::Pair(l, r) = b.rules[node] else {
                    unreachable!()
                };
                cur = if left {
                    b.pair(cur, r)?
                } else {
                    b.pair(l, cur)?
                };
            }
            root = cur;
        }
        if let Some(set) = tail {
            let mark = b.leaf(Letter::Markers(set));
            root = b.pair(root, mark)?;
        }
        Ok(b.finish(root))
    }

    /// A new start `S₀' → S₀ T_s` deriving the document followed by `sentinel`.
    pub fn append_sentinel(&self, sentinel: char) -> Result<Slp, SlpError> {
        if self.leaves.contains_key(&Letter::Char(sentinel)) {
            return Err(SlpError::SentinelCollision(sentinel));
        }
        let mut b = SlpBuilder::extend(self.clone());
        let s = b.leaf(Letter::Char(sentinel));
        let root = b.pair(self.start, s)?;
        Ok(b.finish(root))
    }

    /// Renders the text format. Marker-set leaves have no text form and are
    /// printed as comments.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Slp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {}", self.names[self.start])?;
        for (a, rule) in self.rules.iter().enumerate() {
            match rule {
                Rule::Leaf(Letter::Char(c)) => {
                    writeln!(f, "{} -> {}", self.names[a], quote_char(*c))?
                }
                Rule::Leaf(Letter::Markers(set)) => {
                    writeln!(f, "# {} -> markers {:#x}", self.names[a], set.bits())?
                }
                Rule::Pair(b, c) => writeln!(
                    f,
                    "{} -> {} {}",
                    self.names[a], self.names[*b], self.names[*c]
                )?,
            }
        }
        Ok(())
    }
}

/// Incremental construction of normal-form SLPs.
#[derive(Clone, Debug, Default)]
pub struct SlpBuilder {
    rules: Vec<Rule>,
    names: Vec<String>,
    lengths: Vec<u64>,
    depths: Vec<usize>,
    leaves: HashMap<Letter, NtId>,
    used: HashSet<String>,
}

impl SlpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Continues building on top of an existing SLP; its ids stay valid.
    pub fn extend(slp: Slp) -> Self {
        let used = slp.names.iter().cloned().collect();
        SlpBuilder {
            rules: slp.rules,
            names: slp.names,
            lengths: slp.lengths,
            depths: slp.depths,
            leaves: slp.leaves,
            used,
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        if self.used.insert(base.to_owned()) {
            return base.to_owned();
        }
        let mut k = 1;
        loop {
            let candidate = format!("{base}_{k}");
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
            k += 1;
        }
    }

    /// The unique leaf for `letter`, created on first use.
    pub fn leaf(&mut self, letter: Letter) -> NtId {
        if let Some(&id) = self.leaves.get(&letter) {
            return id;
        }
        let base = match letter {
            Letter::Char(c) if c.is_alphanumeric() => format!("T_{c}"),
            Letter::Char(c) => format!("T_u{:04x}", c as u32),
            Letter::Markers(set) => format!("T_m{:x}", set.bits()),
        };
        let name = self.fresh(&base);
        let id = self.push(Rule::Leaf(letter), name, 1, 1);
        self.leaves.insert(letter, id);
        id
    }

    pub fn pair(&mut self, b: NtId, c: NtId) -> Result<NtId, SlpError> {
        let name = self.fresh(&format!("N{}", self.rules.len()));
        self.pair_named(name, b, c)
    }

    fn pair_named(&mut self, name: String, b: NtId, c: NtId) -> Result<NtId, SlpError> {
        let len = self.lengths[b]
            .checked_add(self.lengths[c])
            .ok_or(SlpError::LengthOverflow)?;
        let depth = 1 + self.depths[b].max(self.depths[c]);
        Ok(self.push(Rule::Pair(b, c), name, len, depth))
    }

    fn push(&mut self, rule: Rule, name: String, len: u64, depth: usize) -> NtId {
        self.rules.push(rule);
        self.names.push(name);
        self.lengths.push(len);
        self.depths.push(depth);
        self.rules.len() - 1
    }

    pub fn length(&self, a: NtId) -> u64 {
        self.lengths[a]
    }

    pub fn finish(self, start: NtId) -> Slp {
        assert!(start < self.rules.len(), "start symbol out of range");
        Slp {
            rules: self.rules,
            names: self.names,
            lengths: self.lengths,
            depths: self.depths,
            leaves: self.leaves,
            start,
        }
    }
}

/// A right-hand-side item of a raw grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Symbol(String),
    Terminal(char),
}

/// A parsed grammar, not necessarily in normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawGrammar {
    pub start: String,
    pub rules: Vec<(String, Vec<Item>)>,
}

impl RawGrammar {
    /// Number of nonterminals plus the total right-hand-side length.
    pub fn size(&self) -> usize {
        self.rules.iter().map(|(_, rhs)| 1 + rhs.len()).sum()
    }
}

/// Parses the SLP text format, checking for duplicates, undefined symbols and cycles.
pub fn parse_slp(text: &str) -> Result<RawGrammar, SlpError> {
    let mut start: Option<String> = None;
    let mut rules: Vec<(String, Vec<Item>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let syntax = |line, column, message: String| SlpError::Syntax {
        line,
        column,
        message,
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = tokenize(raw).map_err(|(c, m)| syntax(line, c, m))?;
        let word = |i: usize| match tokens.get(i) {
            Some((_, Token::Word(w))) => Some(w.as_str()),
            _ => None,
        };
        if word(0) == Some("start") && word(1) != Some("->") {
            if tokens.len() != 2 || word(1).is_none() {
                return Err(syntax(line, tokens[0].0, "usage: start <SYM>".into()));
            }
            if start.is_some() {
                return Err(syntax(line, tokens[0].0, "`start` declared twice".into()));
            }
            start = Some(word(1).unwrap().to_owned());
            continue;
        }
        let lhs = word(0)
            .filter(|w| *w != "->")
            .ok_or_else(|| syntax(line, tokens[0].0, "expected a nonterminal".into()))?;
        if word(1) != Some("->") {
            let column = tokens.get(1).map_or(raw.chars().count() + 1, |t| t.0);
            return Err(syntax(line, column, "expected `->`".into()));
        }
        let mut rhs = Vec::new();
        for (column, tok) in &tokens[2..] {
            rhs.push(match tok {
                Token::Word(w) if w == "->" => {
                    return Err(syntax(line, *column, "unexpected `->`".into()))
                }
                Token::Word(w) => Item::Symbol(w.clone()),
                Token::Quoted(c) => Item::Terminal(*c),
                Token::Braced(_) => return Err(syntax(line, *column, "unexpected `{`".into())),
            });
        }
        if index.insert(lhs.to_owned(), rules.len()).is_some() {
            return Err(SlpError::DuplicateRule(lhs.to_owned()));
        }
        rules.push((lhs.to_owned(), rhs));
    }
    let start = start.ok_or(SlpError::MissingStart)?;
    if !index.contains_key(&start) {
        return Err(SlpError::UndefinedSymbol(start));
    }
    for (_, rhs) in &rules {
        for item in rhs {
            if let Item::Symbol(s) = item {
                if !index.contains_key(s) {
                    return Err(SlpError::UndefinedSymbol(s.clone()));
                }
            }
        }
    }
    // Iterative three-colour depth-first search for cycles.
    let mut colour = vec![0u8; rules.len()];
    for root in 0..rules.len() {
        if colour[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        colour[root] = 1;
        while let Some(&mut (a, ref mut next)) = stack.last_mut() {
            let rhs = &rules[a].1;
            let mut child = None;
            while *next < rhs.len() {
                let item = &rhs[*next];
                *next += 1;
                if let Item::Symbol(s) = item {
                    child = Some(index[s]);
                    break;
                }
            }
            match child {
                Some(b) if colour[b] == 1 => return Err(SlpError::Cyclic(rules[b].0.clone())),
                Some(b) if colour[b] == 0 => {
                    colour[b] = 1;
                    stack.push((b, 0));
                }
                Some(_) => {}
                None => {
                    colour[a] = 2;
                    stack.pop();
                }
            }
        }
    }
    Ok(RawGrammar { start, rules })
}

/// Converts a raw grammar into normal form. Long right-hand sides are
/// binarized left to right; single-item rules become aliases.
/// Only nonterminals reachable from the start are kept.
pub fn normalize(g: &RawGrammar) -> Result<Slp, SlpError> {
    let index: HashMap<&str, usize> = g
        .rules
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (n.as_str(), i))
        .collect();
    let root = *index
        .get(g.start.as_str())
        .ok_or_else(|| SlpError::UndefinedSymbol(g.start.clone()))?;
    let mut b = SlpBuilder::new();
    let mut id: Vec<Option<NtId>> = vec![None; g.rules.len()];
    let mut on_stack = vec![false; g.rules.len()];
    let mut stack = vec![root];
    while let Some(&a) = stack.last() {
        if id[a].is_some() {
            stack.pop();
            continue;
        }
        let (name, rhs) = &g.rules[a];
        if rhs.is_empty() {
            return Err(SlpError::EmptyRule(name.clone()));
        }
        let pending: Vec<usize> = rhs
            .iter()
            .filter_map(|it| match it {
                Item::Symbol(s) => {
                    let c = index
                        .get(s.as_str())
                        .copied()
                        .ok_or_else(|| SlpError::UndefinedSymbol(s.clone()));
                    Some(c)
                }
                Item::Terminal(_) => None,
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|&c| id[c].is_none())
            .collect();
        if !pending.is_empty() {
            if on_stack[a] {
                return Err(SlpError::Cyclic(name.clone()));
            }
            on_stack[a] = true;
            for c in pending {
                if on_stack[c] {
                    return Err(SlpError::Cyclic(g.rules[c].0.clone()));
                }
                stack.push(c);
            }
            continue;
        }
        stack.pop();
        let items: Vec<NtId> = rhs
            .iter()
            .map(|it| match it {
                Item::Symbol(s) => id[index[s.as_str()]].unwrap(),
                Item::Terminal(c) => b.leaf(Letter::Char(*c)),
            })
            .collect();
        let mut cur = items[0];
        for (k, &next) in items.iter().enumerate().skip(1) {
            let nm = if k + 1 == items.len() {
                b.fresh(name)
            } else {
                b.fresh(&format!("{name}_{k}"))
            };
            cur = b.pair_named(nm, cur, next)?;
        }
        id[a] = Some(cur);
    }
    Ok(b.finish(id[root].unwrap()))
}

/// A balanced SLP for `doc`, sharing identical halves.
pub fn build_test_slp(doc: &[char]) -> Result<Slp, SlpError> {
    fn go<'d>(
        s: &'d [char],
        b: &mut SlpBuilder,
        memo: &mut HashMap<&'d [char], NtId>,
    ) -> Result<NtId, SlpError> {
        if let Some(&id) = memo.get(s) {
            return Ok(id);
        }
        let id = if s.len() == 1 {
            b.leaf(Letter::Char(s[0]))
        } else {
            let mid = s.len().div_ceil(2);
            let l = go(&s[..mid], b, memo)?;
            let r = go(&s[mid..], b, memo)?;
            b.pair(l, r)?
        };
        memo.insert(s, id);
        Ok(id)
    }
    if doc.is_empty() {
        return Err(SlpError::EmptyDocument);
    }
    let mut b = SlpBuilder::new();
    let mut memo = HashMap::new();
    let root = go(doc, &mut b, &mut memo)?;
    Ok(b.finish(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::markers::{insert_markers, Marker, Span, SpanTuple, Variables};

    const EXAMPLE: &str = "\
start S0
S0 -> A 'b' 'a' A B 'b'
A -> B 'a' B
B -> 'b' 'a' 'a' 'b'
";

    pub(crate) const NORMAL: &str = "\
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

    fn s(v: Vec<char>) -> String {
        v.into_iter().collect()
    }

    #[test]
    fn worked_example() {
        let g = parse_slp(EXAMPLE).unwrap();
        assert_eq!(g.size(), 16);
        let slp = normalize(&g).unwrap();
        assert_eq!(slp.len(), 25);
        assert_eq!(s(slp.expand(100).unwrap()), "baababaabbabaababaabbaabb");
        let find = |n: &str| {
            (0..slp.nonterminal_count())
                .find(|&a| slp.name(a) == n)
                .unwrap()
        };
        assert_eq!(slp.length(find("B")), 4);
        assert_eq!(slp.length(find("A")), 9);
    }

    #[test]
    fn normal_form_example() {
        let slp = Slp::parse(NORMAL).unwrap();
        assert_eq!(s(slp.expand(100).unwrap()), "aabccaabaa");
        assert_eq!(slp.depth_of(), 5);
        assert_eq!(slp.char_at(4).unwrap(), Letter::Char('c'));
        assert_eq!(slp.nonterminal_count(), 9);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_slp("start A\nA -> A\n"),
            Err(SlpError::Cyclic("A".into()))
        );
        assert_eq!(
            parse_slp("start A\nA -> 'a'\nA -> 'b'\n"),
            Err(SlpError::DuplicateRule("A".into()))
        );
        assert_eq!(
            parse_slp("start A\nA -> B\n"),
            Err(SlpError::UndefinedSymbol("B".into()))
        );
        assert!(matches!(
            parse_slp("start A\nA 'a'\n"),
            Err(SlpError::Syntax {
                line: 2,
                column: 3,
                ..
            })
        ));
        let g = parse_slp("start B\nB -> 'b' 'a' 'a' 'b'").unwrap();
        assert_eq!(g.rules[0].1.len(), 4);
        assert_eq!(
            Slp::parse("start A\nA ->\n"),
            Err(SlpError::EmptyRule("A".into()))
        );
    }

    #[test]
    fn single_terminal_alias() {
        let slp = Slp::parse("start S0\nS0 -> 'a'\n").unwrap();
        assert_eq!(slp.rule(slp.start()), Rule::Leaf(Letter::Char('a')));
        assert_eq!(s(slp.expand(1).unwrap()), "a");
        assert_eq!(slp.depth_of(), 1);
    }

    #[test]
    fn text_roundtrip() {
        let slp = Slp::parse(EXAMPLE).unwrap();
        let again = Slp::parse(&slp.to_text()).unwrap();
        assert_eq!(again.expand(100).unwrap(), slp.expand(100).unwrap());
        let odd = build_test_slp(&[' ', '\'', '\n', 'x']).unwrap();
        let again = Slp::parse(&odd.to_text()).unwrap();
        assert_eq!(again.expand(10).unwrap(), vec![' ', '\'', '\n', 'x']);
    }

    #[test]
    fn powers_and_limits() {
        let mut b = SlpBuilder::new();
        let mut a = b.leaf(Letter::Char('a'));
        for _ in 0..40 {
            a = b.pair(a, a).unwrap();
        }
        let slp = b.finish(a);
        assert_eq!(slp.nonterminal_count(), 41);
        assert_eq!(slp.len(), 1 << 40);
        assert!(matches!(
            slp.expand(1_000_000),
            Err(SlpError::LimitExceeded { .. })
        ));
        assert_eq!(slp.char_at(1 << 39).unwrap(), Letter::Char('a'));
        assert!(slp.char_at((1 << 40) + 1).is_err());

        let doc = vec!['a'; 1 << 20];
        let t = build_test_slp(&doc).unwrap();
        assert!(t.nonterminal_count() <= 25);
        assert_eq!(t.depth_of(), 21);
        let ab = build_test_slp(&['a', 'b']).unwrap();
        assert_eq!(ab.nonterminal_count(), 3);
        assert!(matches!(ab.rule(ab.start()), Rule::Pair(_, _)));
        assert_eq!(build_test_slp(&[]), Err(SlpError::EmptyDocument));
    }

    #[test]
    fn sentinel() {
        let slp = build_test_slp(&"abcca".chars().collect::<Vec<_>>()).unwrap();
        let s2 = slp.append_sentinel('#').unwrap();
        assert_eq!(s(s2.expand(10).unwrap()), "abcca#");
        assert!(s2.depth_of() <= slp.depth_of() + 1);
        assert_eq!(
            slp.append_sentinel('a'),
            Err(SlpError::SentinelCollision('a'))
        );
    }

    #[test]
    fn marker_insertion_example() {
        let vars = Variables::new(["x", "y", "z"]).unwrap();
        let doc: Vec<char> = "aaabcbb".chars().collect();
        let slp = build_test_slp(&doc).unwrap();
        let t = SpanTuple::new(vec![Some(Span::new(6, 8)), None, Some(Span::new(3, 8))]);
        let set = t.to_marker_set().unwrap();
        let marked = slp.insert_markers(&set).unwrap();
        let expected = insert_markers(&doc, &set).unwrap();
        assert_eq!(marked.expand_letters(100).unwrap(), expected.letters());
        assert_eq!(
            expected.display(&vars).to_string(),
            "aa{open(z)}abc{open(x)}bb{close(x),close(z)}"
        );
        // The original program is untouched.
        assert_eq!(s(slp.expand(100).unwrap()), "aaabcbb");
        let too_far = PartialMarkerSet::from_entries([(9, Marker::open(0))]).unwrap();
        assert!(slp.insert_markers(&too_far).is_err());
        let none = slp.insert_markers(&PartialMarkerSet::new()).unwrap();
        assert_eq!(s(none.expand(100).unwrap()), "aaabcbb");
    }
}
