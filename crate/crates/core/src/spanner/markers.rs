//! Markers, marker sets, span tuples and marked words.

use std::cmp::Ordering;
use std::fmt;

use crate::error::SpannerError;

/// Largest supported number of variables (two markers per variable fit a `u64` mask).
pub const MAX_VARIABLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MarkerKind {
    Open,
    Close,
}

/// An opening or closing marker of one variable.
///
/// The derived order is the fixed marker order used throughout the crate:
/// variables in declaration order, the opening marker before the closing one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marker(u8);

impl Marker {
    pub fn new(var: usize, kind: MarkerKind) -> Self {
        assert!(var < MAX_VARIABLES, "variable index {var} out of range");
        let bit = match kind {
            MarkerKind::Open => 0,
            MarkerKind::Close => 1,
        };
        Marker((var * 2 + bit) as u8)
    }

    pub fn open(var: usize) -> Self {
        Self::new(var, MarkerKind::Open)
    }

    pub fn close(var: usize) -> Self {
        Self::new(var, MarkerKind::Close)
    }

    pub fn var(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn kind(self) -> MarkerKind {
        if self.0.is_multiple_of(2) {
            MarkerKind::Open
        } else {
            MarkerKind::Close
        }
    }

    fn from_code(code: u32) -> Self {
        Marker(code as u8)
    }

    fn code(self) -> u32 {
        self.0 as u32
    }

    pub fn display<'a>(self, vars: &'a Variables) -> impl fmt::Display + 'a {
        MarkerDisplay { marker: self, vars }
    }
}

struct MarkerDisplay<'a> {
    marker: Marker,
    vars: &'a Variables,
}

impl fmt::Display for MarkerDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.marker.kind() {
            MarkerKind::Open => "open",
            MarkerKind::Close => "close",
        };
        match self.vars.name(self.marker.var()) {
            Some(name) => write!(f, "{kind}({name})"),
            None => write!(f, "{kind}(#{})", self.marker.var()),
        }
    }
}

/// The ordered, declared set of capture variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Variables {
    names: Vec<String>,
}

impl Variables {
    pub fn new<I, S>(names: I) -> Result<Self, SpannerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for name in names {
            let name = name.into();
            if !is_identifier(&name) {
                return Err(SpannerError::InvalidVariableName(name));
            }
            if out.contains(&name) {
                return Err(SpannerError::DuplicateVariable(name));
            }
            out.push(name);
        }
        if out.len() > MAX_VARIABLES {
            return Err(SpannerError::TooManyVariables {
                max: MAX_VARIABLES,
                got: out.len(),
            });
        }
        Ok(Variables { names: out })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, var: usize) -> Option<&str> {
        self.names.get(var).map(String::as_str)
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Variable indices ordered by name, the order used by the tuple text format.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.names.len()).collect();
        idx.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        idx
    }

    fn describe(&self, var: usize) -> String {
        self.name(var)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{var}"))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// A non-empty-or-empty set of markers, stored as a bit mask. Used as a single
/// letter of marked words and as a transition label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkerSet(u64);

impl MarkerSet {
    pub const EMPTY: MarkerSet = MarkerSet(0);

    pub fn singleton(m: Marker) -> Self {
        MarkerSet(1u64 << m.code())
    }

    pub fn from_markers<I: IntoIterator<Item = Marker>>(markers: I) -> Self {
        markers.into_iter().fold(MarkerSet::EMPTY, |acc, m| {
            acc.union(MarkerSet::singleton(m))
        })
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, m: Marker) -> bool {
        self.0 & (1u64 << m.code()) != 0
    }

    pub fn union(self, other: MarkerSet) -> MarkerSet {
        MarkerSet(self.0 | other.0)
    }

    pub fn is_disjoint(self, other: MarkerSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Markers in ascending marker order.
    pub fn iter(self) -> impl Iterator<Item = Marker> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let code = bits.trailing_zeros();
            bits &= bits - 1;
            Some(Marker::from_code(code))
        })
    }

    /// Highest variable index mentioned, if any.
    pub fn max_var(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(((63 - self.0.leading_zeros()) / 2) as usize)
        }
    }

    pub fn display<'a>(self, vars: &'a Variables) -> impl fmt::Display + 'a {
        SetDisplay { set: self, vars }
    }
}

struct SetDisplay<'a> {
    set: MarkerSet,
    vars: &'a Variables,
}

impl fmt::Display for SetDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, m) in self.set.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", m.display(self.vars))?;
        }
        f.write_str("}")
    }
}

/// Parses `{open(x),close(y)}` (whitespace tolerated). `text` must include the braces.
pub fn parse_marker_set(text: &str, vars: &Variables) -> Result<MarkerSet, String> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| format!("expected `{{...}}`, found `{text}`"))?;
    let mut set = MarkerSet::EMPTY;
    for item in inner.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err("empty marker in set".into());
        }
        let (kind, rest) = if let Some(rest) = item.strip_prefix("open(") {
            (MarkerKind::Open, rest)
        } else if let Some(rest) = item.strip_prefix("close(") {
            (MarkerKind::Close, rest)
        } else {
            return Err(format!("expected open(..) or close(..), found `{item}`"));
        };
        let name = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("missing `)` in `{item}`"))?
            .trim();
        let var = vars
            .index(name)
            .ok_or_else(|| format!("unknown variable `{name}`"))?;
        let m = Marker::new(var, kind);
        if set.contains(m) {
            return Err(format!("marker `{item}` listed twice"));
        }
        set = set.union(MarkerSet::singleton(m));
    }
    Ok(set)
}

/// A letter of a marked word or of an SLP over terminals and marker sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Char(char),
    Markers(MarkerSet),
}

/// A set of (position, marker) pairs, kept sorted by position and then marker.
///
/// `Ord` is the order ⪯: sequences are compared at the leftmost difference
/// and a proper prefix is the larger one.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PartialMarkerSet {
    entries: Vec<(u64, Marker)>,
    mask: u64,
}

impl PartialMarkerSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from arbitrary entries; a marker may occur at most once.
    pub fn from_entries<I>(entries: I) -> Result<Self, SpannerError>
    where
        I: IntoIterator<Item = (u64, Marker)>,
    {
        let mut v: Vec<(u64, Marker)> = entries.into_iter().collect();
        v.sort_unstable();
        let mut mask = 0u64;
        for &(pos, m) in &v {
            if pos == 0 {
                return Err(SpannerError::ZeroPosition);
            }
            let bit = 1u64 << m.code();
            if mask & bit != 0 {
                return Err(SpannerError::DuplicateMarker(format!(
                    "{:?}({})",
                    m.kind(),
                    m.var()
                )));
            }
            mask |= bit;
        }
        Ok(PartialMarkerSet { entries: v, mask })
    }

    /// All markers of `set` at one position.
    pub fn at(position: u64, set: MarkerSet) -> Self {
        debug_assert!(position >= 1 || set.is_empty());
        PartialMarkerSet {
            entries: set.iter().map(|m| (position, m)).collect(),
            mask: set.bits(),
        }
    }

    pub fn entries(&self) -> &[(u64, Marker)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The markers present, regardless of position.
    pub fn markers(&self) -> MarkerSet {
        MarkerSet(self.mask)
    }

    pub fn max_position(&self) -> Option<u64> {
        self.entries.last().map(|e| e.0)
    }

    pub fn position_of(&self, m: Marker) -> Option<u64> {
        self.entries.iter().find(|e| e.1 == m).map(|e| e.0)
    }

    /// Groups the entries by position, ascending.
    pub fn groups(&self) -> Vec<(u64, MarkerSet)> {
        let mut out: Vec<(u64, MarkerSet)> = Vec::new();
        for &(pos, m) in &self.entries {
            match out.last_mut() {
                Some((p, set)) if *p == pos => *set = set.union(MarkerSet::singleton(m)),
                _ => out.push((pos, MarkerSet::singleton(m))),
            }
        }
        out
    }

    pub fn shift_right(&self, shift: u64) -> Result<Self, SpannerError> {
        let entries = self
            .entries
            .iter()
            .map(|&(p, m)| {
                p.checked_add(shift)
                    .map(|p| (p, m))
                    .ok_or(SpannerError::PositionOverflow)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PartialMarkerSet {
            entries,
            mask: self.mask,
        })
    }

    /// `self ∪ shift_right(other, shift)`; every position of `self` must be at most `shift`.
    pub fn join(&self, other: &PartialMarkerSet, shift: u64) -> Result<Self, SpannerError> {
        if let Some(p) = self.max_position() {
            if p > shift {
                return Err(SpannerError::ShiftPrecondition { position: p, shift });
            }
        }
        if self.mask & other.mask != 0 {
            let dup = MarkerSet(self.mask & other.mask).iter().next().unwrap();
            return Err(SpannerError::DuplicateMarker(format!(
                "{:?}({})",
                dup.kind(),
                dup.var()
            )));
        }
        let mut entries = Vec::with_capacity(self.len() + other.len());
        entries.extend_from_slice(&self.entries);
        for &(p, m) in &other.entries {
            entries.push((
                p.checked_add(shift).ok_or(SpannerError::PositionOverflow)?,
                m,
            ));
        }
        Ok(PartialMarkerSet {
            entries,
            mask: self.mask | other.mask,
        })
    }

    /// Inverse of `join`: entries at positions up to `shift`, and the rest shifted back.
    pub fn split(&self, shift: u64) -> (Self, Self) {
        let cut = self.entries.partition_point(|e| e.0 <= shift);
        let left: Vec<_> = self.entries[..cut].to_vec();
        let right: Vec<_> = self.entries[cut..]
            .iter()
            .map(|&(p, m)| (p - shift, m))
            .collect();
        (Self::from_sorted(left), Self::from_sorted(right))
    }

    pub(crate) fn from_sorted(entries: Vec<(u64, Marker)>) -> Self {
        let mask = entries.iter().fold(0u64, |a, e| a | 1u64 << e.1.code());
        debug_assert!(entries.windows(2).all(|w| w[0] < w[1]));
        PartialMarkerSet { entries, mask }
    }

    pub fn display<'a>(&'a self, vars: &'a Variables) -> impl fmt::Display + 'a {
        PmsDisplay { set: self, vars }
    }
}

struct PmsDisplay<'a> {
    set: &'a PartialMarkerSet,
    vars: &'a Variables,
}

impl fmt::Display for PmsDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, &(p, m)) in self.set.entries.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "({},{p})", m.display(self.vars))?;
        }
        f.write_str("}")
    }
}

/// The order ⪯ on partial marker sets.
pub fn compare_marker_sets(a: &PartialMarkerSet, b: &PartialMarkerSet) -> Ordering {
    for (x, y) in a.entries.iter().zip(&b.entries) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    // A proper prefix is the larger sequence.
    b.entries.len().cmp(&a.entries.len())
}

impl Ord for PartialMarkerSet {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_marker_sets(self, other)
    }
}

impl PartialOrd for PartialMarkerSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A span `[start, end⟩` with 1-based positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: u64,
    pub end: u64,
}

impl Span {
    pub fn new(start: u64, end: u64) -> Self {
        Span { start, end }
    }
}

/// A partial assignment of variables to spans; `None` is the undefined value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanTuple {
    spans: Vec<Option<Span>>,
}

impl SpanTuple {
    pub fn undefined(var_count: usize) -> Self {
        SpanTuple {
            spans: vec![None; var_count],
        }
    }

    pub fn new(spans: Vec<Option<Span>>) -> Self {
        SpanTuple { spans }
    }

    pub fn spans(&self) -> &[Option<Span>] {
        &self.spans
    }

    pub fn get(&self, var: usize) -> Option<Span> {
        self.spans.get(var).copied().flatten()
    }

    pub fn set(&mut self, var: usize, span: Option<Span>) {
        self.spans[var] = span;
    }

    pub fn var_count(&self) -> usize {
        self.spans.len()
    }

    pub fn to_marker_set(&self) -> Result<PartialMarkerSet, SpannerError> {
        let mut entries = Vec::new();
        for (var, span) in self.spans.iter().enumerate() {
            if let Some(s) = span {
                if s.start == 0 {
                    return Err(SpannerError::ZeroPosition);
                }
                if s.start > s.end {
                    return Err(SpannerError::IllOrdered(format!("#{var}")));
                }
                entries.push((s.start, Marker::open(var)));
                entries.push((s.end, Marker::close(var)));
            }
        }
        PartialMarkerSet::from_entries(entries)
    }

    /// Converts a complete marker set over `vars` back into a tuple.
    pub fn from_marker_set(
        set: &PartialMarkerSet,
        vars: &Variables,
        doc_len: u64,
    ) -> Result<Self, SpannerError> {
        let mut opens = vec![None; vars.len()];
        let mut closes = vec![None; vars.len()];
        for &(p, m) in set.entries() {
            if m.var() >= vars.len() {
                return Err(SpannerError::UnknownVariable(format!("#{}", m.var())));
            }
            if p > doc_len.saturating_add(1) {
                return Err(SpannerError::IncompatibleMarkers {
                    position: p,
                    length: doc_len,
                });
            }
            match m.kind() {
                MarkerKind::Open => opens[m.var()] = Some(p),
                MarkerKind::Close => closes[m.var()] = Some(p),
            }
        }
        let mut spans = Vec::with_capacity(vars.len());
        for var in 0..vars.len() {
            spans.push(match (opens[var], closes[var]) {
                (None, None) => None,
                (Some(i), Some(j)) if i <= j => Some(Span::new(i, j)),
                (Some(_), Some(_)) => return Err(SpannerError::IllOrdered(vars.describe(var))),
                _ => return Err(SpannerError::IncompleteMarkerSet(vars.describe(var))),
            });
        }
        Ok(SpanTuple { spans })
    }

    /// Tuple text format: `x=[i,j> y=_`, variables sorted by name.
    pub fn format(&self, vars: &Variables) -> String {
        let mut parts = Vec::with_capacity(vars.len());
        for var in vars.sorted_indices() {
            let name = vars.name(var).unwrap_or("?");
            match self.get(var) {
                Some(s) => parts.push(format!("{name}=[{},{}>", s.start, s.end)),
                None => parts.push(format!("{name}=_")),
            }
        }
        parts.join(" ")
    }

    /// Parses the tuple text format; variables not mentioned are undefined.
    pub fn parse(text: &str, vars: &Variables) -> Result<Self, SpannerError> {
        let syntax = |column: usize, message: String| SpannerError::Syntax {
            line: 1,
            column,
            message,
        };
        let mut tuple = SpanTuple::undefined(vars.len());
        let mut seen = vec![false; vars.len()];
        for (column, token) in tokens_with_columns(text) {
            let (name, value) = token
                .split_once('=')
                .ok_or_else(|| syntax(column, format!("expected `name=value`, found `{token}`")))?;
            let var = vars
                .index(name)
                .ok_or_else(|| SpannerError::UnknownVariable(name.to_owned()))?;
            if std::mem::replace(&mut seen[var], true) {
                return Err(syntax(column, format!("variable `{name}` assigned twice")));
            }
            if value == "_" {
                continue;
            }
            let inner = value
                .strip_prefix('[')
                .and_then(|v| v.strip_suffix('>').or_else(|| v.strip_suffix(')')))
                .ok_or_else(|| syntax(column, format!("expected `[i,j>`, found `{value}`")))?;
            let (i, j) = inner
                .split_once(',')
                .ok_or_else(|| syntax(column, format!("expected `[i,j>`, found `{value}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| syntax(column, format!("bad position `{s}`: {e}")))
            };
            let (i, j) = (parse(i)?, parse(j)?);
            if i == 0 {
                return Err(SpannerError::ZeroPosition);
            }
            if i > j {
                return Err(SpannerError::IllOrdered(name.to_owned()));
            }
            tuple.set(var, Some(Span::new(i, j)));
        }
        Ok(tuple)
    }
}

fn tokens_with_columns(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0usize;
    text.split_whitespace().map(move |tok| {
        let start = text[offset..].find(tok).map_or(offset, |i| offset + i);
        offset = start + tok.len();
        (text[..start].chars().count() + 1, tok)
    })
}

/// An alternating word `A₁ b₁ … A_n b_n A_{n+1}`; `sets[i]` precedes `chars[i]`
/// and `sets[n]` is the tail set. Empty sets stand for omitted letters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkedWord {
    chars: Vec<char>,
    sets: Vec<MarkerSet>,
}

impl MarkedWord {
    pub fn unmarked(doc: &[char]) -> Self {
        MarkedWord {
            chars: doc.to_vec(),
            sets: vec![MarkerSet::EMPTY; doc.len() + 1],
        }
    }

    /// Builds a word from a letter sequence; two adjacent marker sets are rejected.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Result<Self, SpannerError> {
        let mut chars = Vec::new();
        let mut sets = vec![MarkerSet::EMPTY];
        for letter in letters {
            match letter {
                Letter::Char(c) => {
                    chars.push(c);
                    sets.push(MarkerSet::EMPTY);
                }
                Letter::Markers(set) if set.is_empty() => {}
                Letter::Markers(set) => {
                    let last = sets.last_mut().unwrap();
                    if !last.is_empty() {
                        return Err(SpannerError::NotAlternating);
                    }
                    *last = set;
                }
            }
        }
        Ok(MarkedWord { chars, sets })
    }

    /// The letters in order, omitting empty sets.
    pub fn letters(&self) -> Vec<Letter> {
        let mut out = Vec::with_capacity(self.chars.len() * 2 + 1);
        for (i, &c) in self.chars.iter().enumerate() {
            if !self.sets[i].is_empty() {
                out.push(Letter::Markers(self.sets[i]));
            }
            out.push(Letter::Char(c));
        }
        let tail = self.sets[self.chars.len()];
        if !tail.is_empty() {
            out.push(Letter::Markers(tail));
        }
        out
    }

    pub fn doc_len(&self) -> usize {
        self.chars.len()
    }

    /// The set in front of position `i` (1-based; `n+1` is the tail).
    pub fn set_at(&self, i: usize) -> MarkerSet {
        self.sets[i - 1]
    }

    pub fn word(&self) -> &[char] {
        &self.chars
    }

    /// Terminal projection of the word.
    pub fn word_of(&self) -> String {
        self.chars.iter().collect()
    }

    /// The pairs (σ, i) with σ in the i-th set.
    pub fn markers_of(&self) -> PartialMarkerSet {
        let mut entries = Vec::new();
        let mut mask = 0u64;
        for (i, set) in self.sets.iter().enumerate() {
            for m in set.iter() {
                entries.push((i as u64 + 1, m));
            }
            mask |= set.bits();
        }
        // Repeated markers collapse in the mask but stay visible as entries.
        PartialMarkerSet { entries, mask }
    }

    pub fn display<'a>(&'a self, vars: &'a Variables) -> impl fmt::Display + 'a {
        WordDisplay { word: self, vars }
    }

    /// Parses the display format, e.g. `{open(x)}ab{close(x)}c`.
    pub fn parse(text: &str, vars: &Variables) -> Result<Self, SpannerError> {
        let mut letters = Vec::new();
        let mut rest = text;
        let mut column = 1;
        while let Some(c) = rest.chars().next() {
            if c == '{' {
                let end = rest.find('}').ok_or_else(|| SpannerError::Syntax {
                    line: 1,
                    column,
                    message: "unterminated marker set".into(),
                })?;
                let set = parse_marker_set(&rest[..=end], vars).map_err(|message| {
                    SpannerError::Syntax {
                        line: 1,
                        column,
                        message,
                    }
                })?;
                letters.push(Letter::Markers(set));
                column += rest[..=end].chars().count();
                rest = &rest[end + 1..];
            } else {
                if !c.is_whitespace() {
                    letters.push(Letter::Char(c));
                }
                column += 1;
                rest = &rest[c.len_utf8()..];
            }
        }
        Self::from_letters(letters)
    }
}

struct WordDisplay<'a> {
    word: &'a MarkedWord,
    vars: &'a Variables,
}

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for letter in self.word.letters() {
            match letter {
                Letter::Char(c) => write!(f, "{c}")?,
                Letter::Markers(set) => write!(f, "{}", set.display(self.vars))?,
            }
        }
        Ok(())
    }
}

/// Places the markers of `set` into `doc`.
pub fn insert_markers(doc: &[char], set: &PartialMarkerSet) -> Result<MarkedWord, SpannerError> {
    let mut word = MarkedWord::unmarked(doc);
    for &(p, m) in set.entries() {
        if p == 0 {
            return Err(SpannerError::ZeroPosition);
        }
        if p > doc.len() as u64 + 1 {
            return Err(SpannerError::IncompatibleMarkers {
                position: p,
                length: doc.len() as u64,
            });
        }
        let slot = &mut word.sets[p as usize - 1];
        *slot = slot.union(MarkerSet::singleton(m));
    }
    Ok(word)
}

/// One failed condition of the subword-marked definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// A marker occurs in more than one set.
    Disjointness(Marker),
    /// A closing marker precedes its opening marker.
    Order(usize),
    /// Exactly one of the two markers of a variable is present.
    Incomplete(usize),
    /// A marker set follows the last terminal.
    TailSpanning,
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Disjointness(_) => "disjointness",
            Violation::Order(_) => "order",
            Violation::Incomplete(_) => "incomplete",
            Violation::TailSpanning => "tail-spanning",
        }
    }
}

/// Checks the subword-marked conditions; optionally also non-tail-spanning.
pub fn validate_subword_marked(word: &MarkedWord, require_non_tail: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut first_pos: [Option<usize>; 2 * MAX_VARIABLES] = [None; 2 * MAX_VARIABLES];
    for (i, set) in word.sets.iter().enumerate() {
        for m in set.iter() {
            let slot = &mut first_pos[m.code() as usize];
            if slot.is_some() {
                if !out.contains(&Violation::Disjointness(m)) {
                    out.push(Violation::Disjointness(m));
                }
            } else {
                *slot = Some(i);
            }
        }
    }
    for var in 0..MAX_VARIABLES {
        match (first_pos[2 * var], first_pos[2 * var + 1]) {
            (Some(i), Some(j)) if i > j => out.push(Violation::Order(var)),
            (Some(_), None) | (None, Some(_)) => out.push(Violation::Incomplete(var)),
            _ => {}
        }
    }
    if require_non_tail && !word.sets[word.chars.len()].is_empty() {
        out.push(Violation::TailSpanning);
    }
    out
}
