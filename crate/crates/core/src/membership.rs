//! Membership, non-emptiness and model checking by Boolean matrix products
//! along the grammar.

use crate::bits::{iter_bits, words_for};
use crate::error::EvalError;
use crate::slp::{Rule, Slp};
use crate::spanner::{Label, Letter, SpanTuple, SpannerAutomaton};

/// A square Boolean matrix with rows packed into 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BoolMatrix {
    pub fn zeros(n: usize) -> Self {
        let words = words_for(n);
        BoolMatrix {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] & (1u64 << (j % 64)) != 0
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1u64 << (j % 64);
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Boolean product: row `i` of the result is the union of rows `k` of
    /// `other` over all `k` with `self[i][k]`.
    pub fn mul(&self, other: &BoolMatrix) -> BoolMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BoolMatrix::zeros(self.n);
        for i in 0..self.n {
            let dst = i * self.words;
            for k in iter_bits(self.row(i)) {
                let src = k * self.words;
                for w in 0..self.words {
                    out.bits[dst + w] |= other.bits[src + w];
                }
            }
        }
        out
    }
}

fn leaf_matrix(m: &SpannerAutomaton, letter: Letter) -> BoolMatrix {
    let q = m.state_count();
    let mut out = BoolMatrix::zeros(q);
    let label = Label::from(letter);
    for p in 0..q {
        for t in m.successors(p, label) {
            out.set(p, t);
        }
    }
    out
}

/// Matrices for nonterminals `from..`, given those below `from`.
fn extend_matrices(slp: &Slp, m: &SpannerAutomaton, mats: &mut Vec<BoolMatrix>) {
    for a in mats.len()..slp.nonterminal_count() {
        let mat = match slp.rule(a) {
            Rule::Leaf(letter) => leaf_matrix(m, letter),
            Rule::Pair(b, c) => mats[b].mul(&mats[c]),
        };
        mats.push(mat);
    }
}

fn accepts_from_start(m: &SpannerAutomaton, mat: &BoolMatrix) -> bool {
    m.accepting_states().any(|f| mat.get(0, f))
}

/// Whether the derived word belongs to `L(M)`. Letters without transitions
/// give all-zero matrices.
pub fn slp_membership(slp: &Slp, m: &SpannerAutomaton) -> bool {
    let m = m.without_epsilon();
    let mut mats = Vec::with_capacity(slp.nonterminal_count());
    extend_matrices(slp, &m, &mut mats);
    accepts_from_start(&m, &mats[slp.start()])
}

/// Whether the spanner extracts at least one tuple from the document.
pub fn check_nonempty(slp: &Slp, m: &SpannerAutomaton) -> bool {
    slp_membership(slp, &m.with_markers_as_epsilon())
}

/// Whether `t` belongs to the relation of `m` on the document.
pub fn model_check(slp: &Slp, m: &SpannerAutomaton, t: &SpanTuple) -> Result<bool, EvalError> {
    ModelChecker::new(slp, m).check(t)
}

/// Model checking for many tuples against one document: matrices of the
/// original grammar are computed once, and each query only evaluates the
/// copied paths.
pub struct ModelChecker<'s> {
    slp: &'s Slp,
    m: SpannerAutomaton,
    base: Vec<BoolMatrix>,
}

impl<'s> ModelChecker<'s> {
    pub fn new(slp: &'s Slp, m: &SpannerAutomaton) -> Self {
        let m = m.without_epsilon();
        let mut base = Vec::with_capacity(slp.nonterminal_count());
        extend_matrices(slp, &m, &mut base);
        ModelChecker { slp, m, base }
    }

    pub fn check(&self, t: &SpanTuple) -> Result<bool, EvalError> {
        let set = t.to_marker_set()?;
        let marked = self.slp.insert_markers(&set)?;
        let offset = self.base.len();
        let mut extra: Vec<BoolMatrix> = Vec::new();
        for a in offset..marked.nonterminal_count() {
            let get = |x: usize| {
                if x < offset {
                    &self.base[x]
                } else {
                    &extra[x - offset]
                }
            };
            let mat = match marked.rule(a) {
                Rule::Leaf(letter) => leaf_matrix(&self.m, letter),
                Rule::Pair(b, c) => get(b).mul(get(c)),
            };
            extra.push(mat);
        }
        let root = marked.start();
        let mat = if root < offset {
            &self.base[root]
        } else {
            &extra[root - offset]
        };
        Ok(accepts_from_start(&self.m, mat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slp::{build_test_slp, SlpBuilder};
    use crate::spanner::{compile_spanner_regex, Span, Variables};

    fn power_of_a(n: u32, extra: bool) -> Slp {
        let mut b = SlpBuilder::new();
        let leaf = b.leaf(Letter::Char('a'));
        let mut a = leaf;
        for _ in 0..n {
            a = b.pair(a, a).unwrap();
        }
        if extra {
            a = b.pair(a, leaf).unwrap();
        }
        b.finish(a)
    }

    #[test]
    fn even_length() {
        let vars = Variables::default();
        let m = compile_spanner_regex("(aa)*", &['a'], &vars).unwrap();
        assert!(slp_membership(&power_of_a(10, false), &m));
        assert!(!slp_membership(&power_of_a(10, true), &m));
    }

    #[test]
    fn intro_decisions() {
        let vars = Variables::new(["x", "y"]).unwrap();
        let m = compile_spanner_regex("(b|c)* x{ a }x .* y{ c+ }y .*", &['a', 'b', 'c'], &vars)
            .unwrap();
        let doc: Vec<char> = "abcca".chars().collect();
        let slp = build_test_slp(&doc).unwrap();
        assert!(check_nonempty(&slp, &m));
        assert!(!check_nonempty(
            &build_test_slp(&['b', 'b', 'b']).unwrap(),
            &m
        ));
        let t = SpanTuple::new(vec![Some(Span::new(1, 2)), Some(Span::new(3, 5))]);
        assert!(model_check(&slp, &m, &t).unwrap());
        let t = SpanTuple::new(vec![Some(Span::new(2, 3)), Some(Span::new(3, 4))]);
        assert!(!model_check(&slp, &m, &t).unwrap());
        let t = SpanTuple::new(vec![Some(Span::new(2, 9)), None]);
        assert!(model_check(&slp, &m, &t).is_err());
    }

    #[test]
    fn matrix_product() {
        let mut a = BoolMatrix::zeros(70);
        a.set(0, 69);
        let mut b = BoolMatrix::zeros(70);
        b.set(69, 3);
        let c = a.mul(&b);
        assert!(c.get(0, 3));
        assert!(!c.get(0, 69));
        assert_eq!(BoolMatrix::identity(70).mul(&a), a);
    }
}
