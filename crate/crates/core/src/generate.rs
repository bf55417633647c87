//! Seeded random instances for property tests, the acceptance suite and the
//! benchmark command.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::EvalError;
use crate::oracle::brute_force_relation;
use crate::slp::{build_test_slp, Slp, SlpBuilder};
use crate::spanner::{
    compile_spanner_regex, Label, Letter, Marker, MarkerSet, PartialMarkerSet, Span, SpanTuple,
    SpannerAutomaton, Variables,
};

/// Variable names used by generated spanners, in index order.
pub const VAR_NAMES: [&str; 3] = ["x", "y", "z"];

pub fn random_document<R: Rng + ?Sized>(rng: &mut R, alphabet: &[char], len: usize) -> Vec<char> {
    (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

/// A random grammar whose rules combine earlier nonterminals at random.
/// The derived length is capped at `max_len` by falling back to smaller pairs.
pub fn random_slp<R: Rng + ?Sized>(
    rng: &mut R,
    alphabet: &[char],
    pairs: usize,
    max_len: u64,
) -> Slp {
    let mut b = SlpBuilder::new();
    let mut ids: Vec<usize> = alphabet.iter().map(|&c| b.leaf(Letter::Char(c))).collect();
    for _ in 0..pairs {
        let x = *ids.choose(rng).unwrap();
        let y = *ids.choose(rng).unwrap();
        if b.length(x) + b.length(y) <= max_len {
            ids.push(b.pair(x, y).expect("length checked"));
        }
    }
    let start = *ids.iter().max_by_key(|&&a| (b.length(a), a)).unwrap();
    b.finish(start)
}

/// A uniformly random tuple over the candidate space of a document of length `n`.
pub fn random_tuple<R: Rng + ?Sized>(rng: &mut R, n: u64, var_count: usize) -> SpanTuple {
    let spans = (0..var_count)
        .map(|_| {
            if rng.gen_bool(0.2) {
                None
            } else {
                let i = rng.gen_range(1..=n + 1);
                let j = rng.gen_range(i..=n + 1);
                Some(Span::new(i, j))
            }
        })
        .collect();
    SpanTuple::new(spans)
}

/// The marker set of a random tuple: always a valid, complete set.
pub fn random_marker_set<R: Rng + ?Sized>(
    rng: &mut R,
    n: u64,
    var_count: usize,
) -> PartialMarkerSet {
    random_tuple(rng, n, var_count)
        .to_marker_set()
        .expect("random tuples have ordered spans")
}

/// A random spanner regex over `alphabet` with the first `var_count` names of
/// [`VAR_NAMES`]. Captures never sit under a star or plus and are never
/// nested in a concatenation with themselves, so the pattern always compiles.
pub fn random_spanner_regex<R: Rng + ?Sized>(
    rng: &mut R,
    alphabet: &[char],
    var_count: usize,
) -> String {
    let mut vars: Vec<usize> = (0..var_count).collect();
    vars.shuffle(rng);
    // Each variable is placed into one slot of a top-level concatenation.
    let slots = rng.gen_range(var_count.max(1)..=var_count + 3);
    let mut placed: Vec<Vec<usize>> = vec![Vec::new(); slots];
    for v in vars {
        placed[rng.gen_range(0..slots)].push(v);
    }
    placed
        .into_iter()
        .map(|vs| slot(rng, alphabet, &vs, 3))
        .collect::<Vec<_>>()
        .join(" ")
}

fn slot<R: Rng + ?Sized>(rng: &mut R, alphabet: &[char], vars: &[usize], depth: u32) -> String {
    match vars.split_first() {
        None => plain(rng, alphabet, depth),
        Some((&v, rest)) => {
            let name = VAR_NAMES[v];
            let body = if rest.is_empty() || rng.gen_bool(0.5) {
                // Remaining variables follow the capture or nest inside it.
                let inner = if rest.is_empty() {
                    plain(rng, alphabet, depth.saturating_sub(1))
                } else {
                    slot(rng, alphabet, rest, depth.saturating_sub(1))
                };
                format!("{name}{{ {inner} }}{name}")
            } else {
                format!(
                    "{name}{{ {} }}{name} {}",
                    plain(rng, alphabet, depth.saturating_sub(1)),
                    slot(rng, alphabet, rest, depth.saturating_sub(1))
                )
            };
            match rng.gen_range(0..6) {
                0 => format!("({body})?"),
                1 => format!("({body} | {})", plain(rng, alphabet, 1)),
                _ => body,
            }
        }
    }
}

fn plain<R: Rng + ?Sized>(rng: &mut R, alphabet: &[char], depth: u32) -> String {
    let atom = |rng: &mut R| -> String {
        if rng.gen_bool(0.3) {
            ".".to_string()
        } else {
            alphabet.choose(rng).unwrap().to_string()
        }
    };
    if depth == 0 {
        return match rng.gen_range(0..4) {
            0 => String::new(),
            1 => format!("{}*", atom(rng)),
            _ => atom(rng),
        };
    }
    match rng.gen_range(0..7) {
        0 => format!(
            "({} | {})",
            plain(rng, alphabet, depth - 1),
            plain(rng, alphabet, depth - 1)
        ),
        1 | 2 => format!("({})*", plain(rng, alphabet, depth - 1)),
        3 => format!("({})+", plain(rng, alphabet, depth - 1)),
        4 => format!("({})?", plain(rng, alphabet, depth - 1)),
        5 => format!(
            "{} {}",
            plain(rng, alphabet, depth - 1),
            plain(rng, alphabet, depth - 1)
        ),
        _ => atom(rng),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Unopened,
    Open,
    Closed,
}

/// A random nondeterministic automaton whose every accepting run reads a valid
/// subword-marked word: each state tracks a status per variable and whether
/// the last symbol was a marker set.
pub fn random_status_nfa<R: Rng + ?Sized>(
    rng: &mut R,
    alphabet: &[char],
    var_count: usize,
    states: usize,
) -> SpannerAutomaton {
    let names = &VAR_NAMES[..var_count];
    let vars = Variables::new(names.iter().copied()).expect("fixed names are valid");
    let mut m = SpannerAutomaton::new(states.max(1), vars).expect("valid variable count");
    m.extend_alphabet(alphabet.iter().copied());
    let statuses = [Status::Unopened, Status::Open, Status::Closed];
    let mut info: Vec<(Vec<Status>, bool)> = vec![(vec![Status::Unopened; var_count], false)];
    for _ in 1..m.state_count() {
        let st = (0..var_count)
            .map(|_| *statuses.choose(rng).unwrap())
            .collect();
        info.push((st, rng.gen_bool(0.3)));
    }
    let density = rng.gen_range(0.15..0.5);
    for p in 0..m.state_count() {
        for t in 0..m.state_count() {
            let (sp, _) = &info[p];
            let (stt, last_set) = &info[t];
            if !last_set && sp == stt {
                for &c in alphabet {
                    if rng.gen_bool(density) {
                        m.add_transition(p, Label::Char(c), t);
                    }
                }
            }
            if *last_set && !info[p].1 {
                if let Some(set) = marker_step(sp, stt) {
                    if rng.gen_bool(density.max(0.4)) {
                        m.add_transition(p, Label::Markers(set), t);
                    }
                }
            }
        }
        let (st, _) = &info[p];
        if st.iter().all(|&s| s != Status::Open) && rng.gen_bool(0.5) {
            m.set_accepting(p, true);
        }
    }
    m
}

/// The nonempty marker set moving `from` to `to`, if one exists.
fn marker_step(from: &[Status], to: &[Status]) -> Option<MarkerSet> {
    let mut markers = Vec::new();
    for (v, (&a, &b)) in from.iter().zip(to).enumerate() {
        match (a, b) {
            (x, y) if x == y => {}
            (Status::Unopened, Status::Open) => markers.push(Marker::open(v)),
            (Status::Open, Status::Closed) => markers.push(Marker::close(v)),
            (Status::Unopened, Status::Closed) => {
                markers.push(Marker::open(v));
                markers.push(Marker::close(v));
            }
            _ => return None,
        }
    }
    (!markers.is_empty()).then(|| MarkerSet::from_markers(markers))
}

/// How an instance's automaton was produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Regex(String),
    StatusNfa { states: usize },
}

/// A document, its grammar, a deterministic automaton and the reference relation.
#[derive(Clone, Debug)]
pub struct Instance {
    pub doc: Vec<char>,
    pub slp: Slp,
    pub source: Source,
    pub automaton: SpannerAutomaton,
    pub relation: Vec<SpanTuple>,
}

/// Limits for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct CorpusConfig {
    pub max_doc_len: usize,
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_states: usize,
    /// Instances whose reference relation is larger are redrawn.
    pub max_relation: usize,
    /// Probability of keeping an instance with an empty relation; the rest are redrawn.
    pub keep_empty: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            max_doc_len: 40,
            min_vars: 1,
            max_vars: 2,
            max_states: 64,
            max_relation: 1000,
            keep_empty: 0.25,
        }
    }
}

/// Draws instances until one satisfies `cfg`; the automaton is determinized
/// and the relation comes from the brute-force oracle.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &CorpusConfig,
) -> Result<Instance, EvalError> {
    loop {
        let alphabet: &[char] = if rng.gen_bool(0.5) {
            &['a', 'b']
        } else {
            &['a', 'b', 'c']
        };
        let var_count = rng.gen_range(cfg.min_vars..=cfg.max_vars);
        let doc_len = rng.gen_range(1..=cfg.max_doc_len);
        let doc = if rng.gen_bool(0.3) {
            // Repetitive documents exercise shared nonterminals.
            let period = rng.gen_range(1..=3);
            let unit = random_document(rng, alphabet, period);
            (0..doc_len).map(|i| unit[i % period]).collect()
        } else {
            random_document(rng, alphabet, doc_len)
        };
        let (source, nfa) = if rng.gen_bool(0.6) {
            let pattern = random_spanner_regex(rng, alphabet, var_count);
            let vars = Variables::new(VAR_NAMES[..var_count].iter().copied())?;
            let m = compile_spanner_regex(&pattern, alphabet, &vars)?;
            (Source::Regex(pattern), m)
        } else {
            let states = rng.gen_range(1..=8);
            (
                Source::StatusNfa { states },
                random_status_nfa(rng, alphabet, var_count, states),
            )
        };
        let automaton = match nfa.determinize(cfg.max_states) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let relation = brute_force_relation(&doc, &automaton, cfg.max_doc_len.max(doc.len()))?;
        if relation.len() > cfg.max_relation
            || (relation.is_empty() && !rng.gen_bool(cfg.keep_empty))
        {
            continue;
        }
        let slp = build_test_slp(&doc)?;
        return Ok(Instance {
            doc,
            slp,
            source,
            automaton,
            relation,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::validate_subword_marked;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn regexes_compile() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let k = rng.gen_range(0..=3);
            let p = random_spanner_regex(&mut rng, &['a', 'b'], k);
            let vars = Variables::new(VAR_NAMES[..k].iter().copied()).unwrap();
            compile_spanner_regex(&p, &['a', 'b'], &vars).unwrap_or_else(|e| panic!("{p}: {e}"));
        }
    }

    #[test]
    fn status_nfa_runs_are_valid() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_status_nfa(&mut rng, &['a', 'b'], 2, 6);
            let doc = random_document(&mut rng, &['a', 'b'], 4);
            for t in brute_force_relation(&doc, &m, 40).unwrap() {
                let set = t.to_marker_set().unwrap();
                let w = crate::spanner::insert_markers(&doc, &set).unwrap();
                assert!(validate_subword_marked(&w, false).is_empty());
            }
        }
    }

    #[test]
    fn instances_respect_limits() {
        let mut rng = StdRng::seed_from_u64(3);
        let cfg = CorpusConfig {
            max_doc_len: 12,
            ..CorpusConfig::default()
        };
        for _ in 0..20 {
            let inst = random_instance(&mut rng, &cfg).unwrap();
            assert!(inst.doc.len() <= 12);
            assert!(inst.automaton.state_count() <= 64);
            assert!(inst.automaton.is_deterministic());
            assert_eq!(inst.slp.expand(u64::MAX).unwrap(), inst.doc);
        }
    }
}
