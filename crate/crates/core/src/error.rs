use thiserror::Error;

/// Errors raised while building or transforming straight-line programs.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlpError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate rule for nonterminal `{0}`")]
    DuplicateRule(String),
    #[error("undefined symbol `{0}`")]
    UndefinedSymbol(String),
    #[error("cyclic rule graph through `{0}`")]
    Cyclic(String),
    #[error("missing `start` declaration")]
    MissingStart,
    #[error("rule for `{0}` has an empty right-hand side")]
    EmptyRule(String),
    #[error("document is empty")]
    EmptyDocument,
    #[error("derived length overflows 64 bits")]
    LengthOverflow,
    #[error("document length {length} exceeds the expansion limit {limit}")]
    LimitExceeded { length: u64, limit: u64 },
    #[error("position {position} out of range 1..={length}")]
    OutOfRange { position: u64, length: u64 },
    #[error("marker position {position} exceeds document length {length} + 1")]
    IncompatibleMarkers { position: u64, length: u64 },
    #[error("sentinel {0:?} already occurs in the document alphabet")]
    SentinelCollision(char),
}

/// Errors raised by marker sets, span tuples, automata and the regex compiler.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpannerError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidVariableName(String),
    #[error("at most {max} variables are supported, got {got}")]
    TooManyVariables { max: usize, got: usize },
    #[error("state {state} out of range 1..={count}")]
    StateOutOfRange { state: usize, count: usize },
    #[error("the start state must be 1")]
    StartNotOne,
    #[error("automaton needs at least one state")]
    NoStates,
    #[error("marker {0} occurs more than once")]
    DuplicateMarker(String),
    #[error("marker position {position} exceeds document length {length} + 1")]
    IncompatibleMarkers { position: u64, length: u64 },
    #[error("marker position 0 is not allowed")]
    ZeroPosition,
    #[error("variable `{0}` has only one of its two markers")]
    IncompleteMarkerSet(String),
    #[error("variable `{0}` is closed before it is opened")]
    IllOrdered(String),
    #[error("marker position overflows 64 bits")]
    PositionOverflow,
    #[error("join operand has position {position} beyond shift {shift}")]
    ShiftPrecondition { position: u64, shift: u64 },
    #[error("sentinel {0:?} already occurs in the alphabet")]
    SentinelCollision(char),
    #[error("empty pattern")]
    EmptyPattern,
    #[error("unbalanced brackets: {0}")]
    Unbalanced(String),
    #[error("variable `{0}` may be bound more than once")]
    VariableReuse(String),
    #[error("determinization exceeded the cap of {cap} states")]
    StateCapExceeded { cap: usize },
    #[error("marked word is not alternating: two marker sets are adjacent")]
    NotAlternating,
}

/// Errors raised by the evaluation pipelines.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error(transparent)]
    Slp(#[from] SlpError),
    #[error(transparent)]
    Spanner(#[from] SpannerError),
    #[error("memory cap of {cap} stored marker sets exceeded")]
    MemoryCap { cap: usize },
    #[error("automaton accepts a word that is not subword-marked: {0}")]
    NotSubwordMarked(String),
    #[error("automaton must be deterministic for duplicate-free enumeration")]
    NotDeterministic,
    #[error("leaf letter {0} is not a document terminal")]
    MarkerLeaf(String),
    #[error("document length {length} exceeds the oracle bound {bound}")]
    OracleBound { length: usize, bound: usize },
    #[error("oracle supports at most {max} variables, got {got}")]
    OracleVariables { max: usize, got: usize },
}
