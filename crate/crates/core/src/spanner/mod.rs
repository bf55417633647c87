//! Marked words, span tuples and spanner automata.

pub mod automaton;
pub mod markers;
pub mod regex;

pub use automaton::{fresh_sentinel, Label, Simulator, SpannerAutomaton, DEFAULT_STATE_CAP};
pub use markers::{
    compare_marker_sets, insert_markers, validate_subword_marked, Letter, MarkedWord, Marker,
    MarkerKind, MarkerSet, PartialMarkerSet, Span, SpanTuple, Variables, Violation, MAX_VARIABLES,
};
pub use regex::{compile_spanner_regex, infer_variables};
