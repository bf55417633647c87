mod common;

use common::{run_corpus, DELAY_CONSTANT};

#[test]
fn secondary_corpus_agrees_everywhere() {
    let o = run_corpus(0x0bad_cafe, 120);
    assert!(o.errors.is_empty(), "{:?}", o.errors);
    assert!(
        o.compute_mismatches.is_empty(),
        "{:?}",
        o.compute_mismatches
    );
    assert!(o.enum_mismatches.is_empty(), "{:?}", o.enum_mismatches);
    assert_eq!(o.duplicate_outputs, 0);
    assert!(o.invalid_trees.is_empty(), "{:?}", o.invalid_trees);
    assert!(o.leaf_violations.is_empty(), "{:?}", o.leaf_violations);
    assert!(o.node_violations.is_empty(), "{:?}", o.node_violations);
    assert!(
        o.nonempty_disagreements.is_empty(),
        "{:?}",
        o.nonempty_disagreements
    );
    assert!(
        o.model_check_disagreements.is_empty(),
        "{:?}",
        o.model_check_disagreements
    );
    assert!(
        o.measured_c <= DELAY_CONSTANT,
        "measured c = {}",
        o.measured_c
    );
    assert!(o.outputs > 0 && o.trees > 0);
}
