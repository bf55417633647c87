//! Shared corpus runner for the integration tests and the acceptance target.

#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeSet, HashSet};
use std::rc::Rc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;
use slpspan::compute::compute_relation;
use slpspan::enumerate::enumerate_relation;
use slpspan::generate::{random_instance, random_tuple, CorpusConfig, Instance};
use slpspan::membership::{check_nonempty, ModelChecker};
use slpspan::spanner::SpanTuple;

pub const CORPUS_SEED: u64 = 0x5151_2024;
pub const CORPUS_SIZE: usize = 500;
pub const NON_MEMBERS_PER_INSTANCE: usize = 50;

/// Producer steps allowed per unit of `depth(S₀)·|X|` between two outputs.
///
/// A tree has at most `4|X|·depth` nodes and each node's cursor ticks a
/// bounded number of times (at most four) while the next tree is assembled.
pub const DELAY_CONSTANT: f64 = 16.0;

#[derive(Debug, Default)]
pub struct CorpusOutcome {
    pub instances: usize,
    pub compute_mismatches: Vec<String>,
    pub enum_mismatches: Vec<String>,
    pub duplicate_outputs: usize,
    pub trees: u64,
    pub invalid_trees: Vec<String>,
    pub leaf_violations: Vec<String>,
    pub node_violations: Vec<String>,
    pub nonempty_disagreements: Vec<String>,
    pub model_checks: usize,
    pub model_check_disagreements: Vec<String>,
    /// Largest observed `gap / (depth(S₀)·|X|)`.
    pub measured_c: f64,
    pub delay_violations: Vec<String>,
    pub outputs: u64,
    pub errors: Vec<String>,
    pub elapsed: Duration,
}

/// Invalid trees, terminal-leaf violations and node-count violations.
type Violations = (Vec<String>, Vec<String>, Vec<String>);

pub fn corpus(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = StdRng::seed_from_u64(seed);
    let cfg = CorpusConfig::default();
    (0..count)
        .map(|_| random_instance(&mut rng, &cfg).expect("corpus generation"))
        .collect()
}

fn describe(n: usize, inst: &Instance) -> String {
    format!(
        "instance {n}: doc={} source={:?} states={}",
        inst.doc.iter().collect::<String>(),
        inst.source,
        inst.automaton.state_count()
    )
}

pub fn run_corpus(seed: u64, count: usize) -> CorpusOutcome {
    let started = Instant::now();
    let mut out = CorpusOutcome::default();
    let mut rng = StdRng::seed_from_u64(seed ^ 0xdead_beef);
    for (n, inst) in corpus(seed, count).iter().enumerate() {
        out.instances += 1;
        if let Err(e) = check_instance(n, inst, &mut rng, &mut out) {
            out.errors.push(format!("{}: {e}", describe(n, inst)));
        }
    }
    out.elapsed = started.elapsed();
    out
}

fn check_instance(
    n: usize,
    inst: &Instance,
    rng: &mut StdRng,
    out: &mut CorpusOutcome,
) -> Result<(), slpspan::EvalError> {
    let vars = inst.automaton.vars().clone();
    let expected: BTreeSet<SpanTuple> = inst.relation.iter().cloned().collect();
    let x = vars.len();

    let computed: BTreeSet<SpanTuple> = compute_relation(&inst.slp, &inst.automaton)?
        .tuples
        .into_iter()
        .collect();
    if computed != expected {
        out.compute_mismatches.push(describe(n, inst));
    }

    let violations: Rc<RefCell<Violations>> = Rc::default();
    let sink = Rc::clone(&violations);
    let mut e = enumerate_relation(&inst.slp, &inst.automaton)?;
    let depth = e.depth();
    let tag = describe(n, inst);
    e = e.with_tree_hook(move |tree, tables| {
        let mut v = sink.borrow_mut();
        if let Err(msg) = tree.validate(tables) {
            v.0.push(format!("{tag}: {msg}"));
        }
        let leaves = tree.terminal_leaf_count();
        if leaves > 2 * x {
            v.1.push(format!(
                "{tag}: {leaves} terminal leaves > 2|X| = {}",
                2 * x
            ));
        }
        let nodes = tree.node_count();
        if nodes > 4 * x * depth {
            v.2.push(format!(
                "{tag}: {nodes} nodes > 4|X|·depth = {}",
                4 * x * depth
            ));
        }
    });
    let mut seen = HashSet::new();
    let mut emitted = BTreeSet::new();
    for t in e.by_ref() {
        let t = t?;
        if !seen.insert(t.clone()) {
            out.duplicate_outputs += 1;
        }
        emitted.insert(t);
    }
    if emitted != expected {
        out.enum_mismatches.push(describe(n, inst));
    }
    let stats = e.stats().clone();
    out.trees += stats.trees;
    out.outputs += stats.outputs;
    let (invalid, leaves, nodes) = std::mem::take(&mut *violations.borrow_mut());
    out.invalid_trees.extend(invalid);
    out.leaf_violations.extend(leaves);
    out.node_violations.extend(nodes);

    let unit = (depth * x) as f64;
    let worst = stats
        .max_gap
        .max(if stats.outputs > 0 { stats.tail_gap } else { 0 });
    if stats.outputs > 0 {
        let c = worst as f64 / unit;
        out.measured_c = out.measured_c.max(c);
        if c > DELAY_CONSTANT {
            out.delay_violations.push(format!(
                "{}: gap {worst} > {DELAY_CONSTANT}·{depth}·{x}",
                describe(n, inst)
            ));
        }
    }

    if check_nonempty(&inst.slp, &inst.automaton) == expected.is_empty() {
        out.nonempty_disagreements.push(describe(n, inst));
    }
    let checker = ModelChecker::new(&inst.slp, &inst.automaton);
    for t in &expected {
        out.model_checks += 1;
        if !checker.check(t)? {
            out.model_check_disagreements.push(format!(
                "{}: member {} rejected",
                describe(n, inst),
                t.format(&vars)
            ));
        }
    }
    let doc_len = inst.doc.len() as u64;
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < NON_MEMBERS_PER_INSTANCE && attempts < 100 * NON_MEMBERS_PER_INSTANCE {
        attempts += 1;
        let t = random_tuple(rng, doc_len, x);
        if expected.contains(&t) {
            continue;
        }
        drawn += 1;
        out.model_checks += 1;
        if checker.check(&t)? {
            out.model_check_disagreements.push(format!(
                "{}: non-member {} accepted",
                describe(n, inst),
                t.format(&vars)
            ));
        }
    }
    Ok(())
}
