//! Compiler from spanner regular expressions to automata.
//!
//! Syntax: terminals, `|`, `*`, `+`, `?`, parentheses, `.` for any alphabet
//! letter, and captures `x{ … }x`. Whitespace is ignored; `\c` is the literal `c`.

use std::collections::HashSet;

use crate::error::SpannerError;
use crate::spanner::automaton::{Label, SpannerAutomaton};
use crate::spanner::markers::{is_identifier, Marker, MarkerSet, Variables};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Empty,
    Char(char),
    Any,
    Concat(Vec<Node>),
    Alt(Vec<Node>),
    Star(Box<Node>),
    Plus(Box<Node>),
    Opt(Box<Node>),
    Capture(usize, Box<Node>),
}

/// Variables in order of first `name{` occurrence.
pub fn infer_variables(pattern: &str) -> Result<Variables, SpannerError> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut names: Vec<String> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '\\' {
            i += 2;
            continue;
        }
        if chars[i] == '{' {
            let mut start = i;
            while start > 0 && (chars[start - 1].is_alphanumeric() || chars[start - 1] == '_') {
                start -= 1;
            }
            let name: String = chars[start..i].iter().collect();
            if is_identifier(&name) && !names.contains(&name) {
                names.push(name);
            }
        }
        i += 1;
    }
    Variables::new(names)
}

/// Compiles `pattern` over `alphabet` (extended by the pattern's literals).
pub fn compile_spanner_regex(
    pattern: &str,
    alphabet: &[char],
    vars: &Variables,
) -> Result<SpannerAutomaton, SpannerError> {
    let mut parser = Parser {
        chars: pattern.chars().collect(),
        pos: 0,
        vars,
        open: Vec::new(),
    };
    parser.skip_ws();
    if parser.at_end() {
        return Err(SpannerError::EmptyPattern);
    }
    let node = parser.alt()?;
    parser.skip_ws();
    if let Some(c) = parser.peek() {
        return Err(match c {
            ')' => SpannerError::Unbalanced("unmatched `)`".into()),
            '}' => SpannerError::Unbalanced("`}` without an open capture".into()),
            _ => parser.syntax(format!("unexpected `{c}`")),
        });
    }
    check_bindings(&node, vars)?;

    let mut sigma: Vec<char> = alphabet.to_vec();
    collect_literals(&node, &mut sigma);
    sigma.sort_unstable();
    sigma.dedup();

    let mut nfa = SpannerAutomaton::new(1, vars.clone())?;
    nfa.extend_alphabet(sigma.iter().copied());
    let (s, e) = thompson(&node, &mut nfa, &sigma);
    nfa.add_transition(0, Label::Eps, s);
    nfa.set_accepting(e, true);
    Ok(saturate(&nfa.without_epsilon().trim()))
}

/// Adds, for every chain of marker transitions with pairwise disjoint sets,
/// one transition labelled by the union. Existing transitions stay.
fn saturate(m: &SpannerAutomaton) -> SpannerAutomaton {
    let mut out = m.clone();
    for p in 0..m.state_count() {
        let mut seen: HashSet<(usize, MarkerSet)> = HashSet::new();
        let mut stack: Vec<(usize, MarkerSet)> = Vec::new();
        for &(label, r) in m.transitions(p) {
            if let Label::Markers(set) = label {
                if seen.insert((r, set)) {
                    stack.push((r, set));
                }
            }
        }
        while let Some((r, acc)) = stack.pop() {
            for &(label, t) in m.transitions(r) {
                let Label::Markers(set) = label else { continue };
                if !acc.is_disjoint(set) {
                    continue;
                }
                let union = acc.union(set);
                if seen.insert((t, union)) {
                    out.add_transition(p, Label::Markers(union), t);
                    stack.push((t, union));
                }
            }
        }
    }
    out
}

fn thompson(node: &Node, m: &mut SpannerAutomaton, sigma: &[char]) -> (usize, usize) {
    let s = m.add_state();
    let e = m.add_state();
    match node {
        Node::Empty => m.add_transition(s, Label::Eps, e),
        Node::Char(c) => m.add_transition(s, Label::Char(*c), e),
        Node::Any => {
            for &c in sigma {
                m.add_transition(s, Label::Char(c), e);
            }
        }
        Node::Concat(parts) => {
            let mut cur = s;
            for part in parts {
                let (ps, pe) = thompson(part, m, sigma);
                m.add_transition(cur, Label::Eps, ps);
                cur = pe;
            }
            m.add_transition(cur, Label::Eps, e);
        }
        Node::Alt(parts) => {
            for part in parts {
                let (ps, pe) = thompson(part, m, sigma);
                m.add_transition(s, Label::Eps, ps);
                m.add_transition(pe, Label::Eps, e);
            }
        }
        Node::Star(inner) | Node::Plus(inner) | Node::Opt(inner) => {
            let (is, ie) = thompson(inner, m, sigma);
            m.add_transition(s, Label::Eps, is);
            m.add_transition(ie, Label::Eps, e);
            if !matches!(node, Node::Plus(_)) {
                m.add_transition(s, Label::Eps, e);
            }
            if !matches!(node, Node::Opt(_)) {
                m.add_transition(ie, Label::Eps, is);
            }
        }
        Node::Capture(var, inner) => {
            let (is, ie) = thompson(inner, m, sigma);
            m.add_transition(
                s,
                Label::Markers(MarkerSet::singleton(Marker::open(*var))),
                is,
            );
            m.add_transition(
                ie,
                Label::Markers(MarkerSet::singleton(Marker::close(*var))),
                e,
            );
        }
    }
    (s, e)
}

fn collect_literals(node: &Node, out: &mut Vec<char>) {
    match node {
        Node::Char(c) => out.push(*c),
        Node::Concat(v) | Node::Alt(v) => v.iter().for_each(|n| collect_literals(n, out)),
        Node::Star(n) | Node::Plus(n) | Node::Opt(n) | Node::Capture(_, n) => {
            collect_literals(n, out)
        }
        Node::Empty | Node::Any => {}
    }
}

/// Rejects patterns in which some word could bind a variable twice.
fn check_bindings(node: &Node, vars: &Variables) -> Result<u64, SpannerError> {
    let name = |v: usize| vars.name(v).unwrap_or("?").to_owned();
    let first = |mask: u64| name(mask.trailing_zeros() as usize);
    Ok(match node {
        Node::Empty | Node::Char(_) | Node::Any => 0,
        Node::Concat(parts) => {
            let mut acc = 0u64;
            for p in parts {
                let m = check_bindings(p, vars)?;
                if acc & m != 0 {
                    return Err(SpannerError::VariableReuse(first(acc & m)));
                }
                acc |= m;
            }
            acc
        }
        Node::Alt(parts) => {
            let mut acc = 0u64;
            for p in parts {
                acc |= check_bindings(p, vars)?;
            }
            acc
        }
        Node::Star(inner) | Node::Plus(inner) => {
            let m = check_bindings(inner, vars)?;
            if m != 0 {
                return Err(SpannerError::VariableReuse(first(m)));
            }
            0
        }
        Node::Opt(inner) => check_bindings(inner, vars)?,
        Node::Capture(v, inner) => {
            let m = check_bindings(inner, vars)?;
            if m & (1 << v) != 0 {
                return Err(SpannerError::VariableReuse(name(*v)));
            }
            m | (1 << v)
        }
    })
}

struct Parser<'v> {
    chars: Vec<char>,
    pos: usize,
    vars: &'v Variables,
    open: Vec<usize>,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn syntax(&self, message: String) -> SpannerError {
        SpannerError::Syntax {
            line: 1,
            column: self.pos + 1,
            message,
        }
    }

    /// Longest declared variable `v` such that `v{` starts here.
    fn capture_open(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for (v, name) in self.vars.names().iter().enumerate() {
            let n: Vec<char> = name.chars().collect();
            let end = self.pos + n.len();
            if self.chars.get(self.pos..end) == Some(&n[..])
                && self.chars.get(end) == Some(&'{')
                && best.is_none_or(|(_, len)| n.len() > len)
            {
                best = Some((v, n.len()));
            }
        }
        best
    }

    fn alt(&mut self) -> Result<Node, SpannerError> {
        let mut parts = vec![self.concat()?];
        loop {
            self.skip_ws();
            if self.peek() == Some('|') {
                self.pos += 1;
                parts.push(self.concat()?);
            } else {
                break;
            }
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Node::Alt(parts)
        })
    }

    fn concat(&mut self) -> Result<Node, SpannerError> {
        let mut parts = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None | Some('|') | Some(')') | Some('}') => break,
                _ => parts.push(self.repeat()?),
            }
        }
        Ok(match parts.len() {
            0 => Node::Empty,
            1 => parts.pop().unwrap(),
            _ => Node::Concat(parts),
        })
    }

    fn repeat(&mut self) -> Result<Node, SpannerError> {
        let mut node = self.atom()?;
        loop {
            self.skip_ws();
            node = match self.peek() {
                Some('*') => Node::Star(Box::new(node)),
                Some('+') => Node::Plus(Box::new(node)),
                Some('?') => Node::Opt(Box::new(node)),
                _ => return Ok(node),
            };
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> Result<Node, SpannerError> {
        if let Some((var, len)) = self.capture_open() {
            self.pos += len + 1;
            self.open.push(var);
            let inner = self.alt()?;
            self.skip_ws();
            if self.peek() != Some('}') {
                let name = self.vars.name(var).unwrap_or("?");
                return Err(SpannerError::Unbalanced(format!(
                    "`{name}{{` is never closed"
                )));
            }
            self.pos += 1;
            let name: Vec<char> = self.vars.name(var).unwrap_or("").chars().collect();
            let end = self.pos + name.len();
            if self.chars.get(self.pos..end) != Some(&name[..]) {
                let name: String = name.into_iter().collect();
                return Err(SpannerError::Unbalanced(format!(
                    "`{name}{{` must be closed by `}}{name}`"
                )));
            }
            self.pos = end;
            self.open.pop();
            return Ok(Node::Capture(var, Box::new(inner)));
        }
        let c = self.peek().expect("atom called at end");
        self.pos += 1;
        match c {
            '(' => {
                let inner = self.alt()?;
                self.skip_ws();
                if self.peek() != Some(')') {
                    return Err(SpannerError::Unbalanced("unclosed `(`".into()));
                }
                self.pos += 1;
                Ok(inner)
            }
            '.' => Ok(Node::Any),
            '\\' => {
                let lit = self
                    .peek()
                    .ok_or_else(|| self.syntax("dangling `\\`".into()))?;
                self.pos += 1;
                Ok(Node::Char(lit))
            }
            '{' => Err(SpannerError::Unbalanced(
                "`{` must follow a declared variable name".into(),
            )),
            '*' | '+' | '?' => {
                self.pos -= 1;
                Err(self.syntax(format!("`{c}` has nothing to repeat")))
            }
            c => Ok(Node::Char(c)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::markers::MarkedWord;

    fn intro() -> SpannerAutomaton {
        let vars = Variables::new(["x", "y"]).unwrap();
        compile_spanner_regex("(b|c)* x{ a }x .* y{ c+ }y .*", &['a', 'b', 'c'], &vars).unwrap()
    }

    #[test]
    fn intro_accepts_first_tuple() {
        let m = intro();
        let vars = m.vars().clone();
        let w = MarkedWord::parse("{open(x)}a{close(x)}b{open(y)}c{close(y)}ca", &vars).unwrap();
        assert!(m.accepts(&w));
        assert!(!m.accepts(&MarkedWord::unmarked(&['a', 'b', 'c', 'c', 'a'])));
    }

    #[test]
    fn saturation_adds_union() {
        let vars = Variables::new(["x"]).unwrap();
        let m = compile_spanner_regex("x{ }x a", &['a'], &vars).unwrap();
        let both = MarkerSet::from_markers([Marker::open(0), Marker::close(0)]);
        let has_union = (0..m.state_count())
            .any(|s| m.transitions(s).iter().any(|t| t.0 == Label::Markers(both)));
        assert!(has_union);
        let w = MarkedWord::parse("{open(x),close(x)}a", &vars).unwrap();
        assert!(m.accepts(&w));
    }

    #[test]
    fn errors() {
        let vars = Variables::new(["x", "y"]).unwrap();
        let c = |p: &str| compile_spanner_regex(p, &['a'], &vars);
        assert_eq!(c("  "), Err(SpannerError::EmptyPattern));
        assert!(matches!(c("x{ a"), Err(SpannerError::Unbalanced(_))));
        assert!(matches!(c("x{ a }y"), Err(SpannerError::Unbalanced(_))));
        assert!(matches!(c("(a"), Err(SpannerError::Unbalanced(_))));
        assert!(matches!(c("a)"), Err(SpannerError::Unbalanced(_))));
        assert_eq!(
            c("x{a}x x{a}x"),
            Err(SpannerError::VariableReuse("x".into()))
        );
        assert_eq!(c("(x{a}x)*"), Err(SpannerError::VariableReuse("x".into())));
        assert!(c("x{a}x | x{aa}x").is_ok());
        assert!(matches!(c("*a"), Err(SpannerError::Syntax { .. })));
    }

    #[test]
    fn inference_and_escapes() {
        let vars = infer_variables("(b|c)* x{ a }x .* yy{ c+ }yy").unwrap();
        assert_eq!(vars.names(), &["x".to_string(), "yy".to_string()]);
        let m = compile_spanner_regex("\\( \\.", &[], &Variables::default()).unwrap();
        assert!(m.accepts(&MarkedWord::unmarked(&['(', '.'])));
        assert!(!m.accepts(&MarkedWord::unmarked(&['(', 'a'])));
    }
}
