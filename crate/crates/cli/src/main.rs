//! `slpspan`: evaluate regular spanners on grammar-compressed documents.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Map, Value};
use slpspan::compute::compute_relation_with;
use slpspan::enumerate::enumerate_relation_with;
use slpspan::matrices::{prepare, EvalOptions};
use slpspan::membership::{check_nonempty, model_check};
use slpspan::oracle::{brute_force_relation, DEFAULT_ORACLE_BOUND};
use slpspan::spanner::{
    compile_spanner_regex, infer_variables, SpanTuple, SpannerAutomaton, Variables,
    DEFAULT_STATE_CAP,
};
use slpspan::{build_test_slp, Slp};

const STACK_SIZE: usize = 256 << 20;
const DEFAULT_EXPAND_LIMIT: u64 = 1 << 28;

#[derive(Parser, Debug)]
#[command(
    name = "slpspan",
    version,
    about = "Regular document spanners on SLP-compressed documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grammar and automaton statistics.
    Stats {
        #[command(flatten)]
        doc: DocArgs,
        #[command(flatten)]
        spanner: OptionalSpannerArgs,
        /// Also build the relation tables and report their counters.
        #[arg(long)]
        tables: bool,
    },
    /// Print the derived document.
    Expand {
        #[command(flatten)]
        doc: DocArgs,
        /// Refuse documents longer than this.
        #[arg(long, default_value_t = DEFAULT_EXPAND_LIMIT)]
        limit: u64,
    },
    /// Build a balanced grammar for a raw text file.
    Compress {
        /// Raw input file.
        #[arg(long)]
        input: PathBuf,
        /// Output file (default: standard output).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Drop one trailing newline from the input.
        #[arg(long)]
        trim_newline: bool,
    },
    /// Does the spanner extract at least one tuple?
    Nonempty(EvalArgs),
    /// Is the given tuple in the relation?
    Check {
        #[command(flatten)]
        eval: EvalArgs,
        /// Tuple such as "x=[2,3> y=_".
        #[arg(long)]
        tuple: String,
    },
    /// Compute the whole relation.
    Compute {
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Enumerate the relation tuple by tuple.
    Enum {
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Stop after this many tuples.
        #[arg(long)]
        limit: Option<u64>,
        /// Print only the number of tuples.
        #[arg(long)]
        count_only: bool,
        /// Report producer-step statistics on standard error.
        #[arg(long)]
        delay_stats: bool,
        /// Run on a nondeterministic automaton as is; tuples may repeat.
        #[arg(long)]
        allow_duplicates: bool,
        /// Do not determinize (fails on nondeterministic input without --allow-duplicates).
        #[arg(long)]
        no_determinize: bool,
    },
    /// Brute-force evaluation on the expanded document, for debugging.
    #[command(hide = true)]
    Oracle {
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Largest document length accepted.
        #[arg(long, default_value_t = DEFAULT_ORACLE_BOUND)]
        bound: usize,
    },
    /// Time compressed evaluation against expand-then-evaluate.
    Bench {
        /// Grammar file; without it a periodic random document is generated.
        #[arg(long)]
        slp: Option<PathBuf>,
        #[command(flatten)]
        spanner: SpannerArgs,
        /// Length of the generated document.
        #[arg(long, default_value_t = 1 << 16)]
        length: u64,
        /// Seed for the generated document.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Repetitions per measurement.
        #[arg(long, default_value_t = 3)]
        repeat: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args, Debug)]
struct DocArgs {
    /// Grammar file.
    #[arg(long)]
    slp: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "spanner_source")]
struct SpannerSource {
    /// Automaton file.
    #[arg(long)]
    automaton: Option<PathBuf>,
    /// Spanner regex, e.g. "(b|c)* x{ a }x .*".
    #[arg(long)]
    regex: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct SpannerArgs {
    #[command(flatten)]
    source: SpannerSource,
    #[command(flatten)]
    extra: RegexArgs,
}

#[derive(Args, Debug, Clone)]
struct OptionalSpannerArgs {
    /// Automaton file.
    #[arg(long, conflicts_with = "regex")]
    automaton: Option<PathBuf>,
    /// Spanner regex.
    #[arg(long)]
    regex: Option<String>,
    #[command(flatten)]
    extra: RegexArgs,
}

#[derive(Args, Debug, Clone)]
struct RegexArgs {
    /// Regex alphabet (default: the document's letters plus the regex literals).
    #[arg(long)]
    alphabet: Option<String>,
    /// Comma-separated variables (default: inferred from the regex).
    #[arg(long)]
    vars: Option<String>,
    /// Cap on automaton states during determinization.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    max_states: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    doc: DocArgs,
    #[command(flatten)]
    spanner: SpannerArgs,
    /// Cap on stored marker sets.
    #[arg(long, env = "SLPSPAN_MEMORY_CAP")]
    memory_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Text,
    Tsv,
    Json,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<bool, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read_slp(path: &Path) -> Result<Slp, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Slp::parse(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn load_spanner(
    automaton: Option<&Path>,
    regex: Option<&str>,
    extra: &RegexArgs,
    slp: Option<&Slp>,
) -> Result<SpannerAutomaton, Failure> {
    match (automaton, regex) {
        (Some(path), None) => {
            if extra.alphabet.is_some() || extra.vars.is_some() {
                return Err(usage("--alphabet and --vars only apply to --regex"));
            }
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(SpannerAutomaton::parse(&text)
                .with_context(|| format!("parsing {}", path.display()))?)
        }
        (None, Some(pattern)) => {
            let vars = match &extra.vars {
                Some(list) => {
                    Variables::new(list.split(',').map(str::trim).filter(|s| !s.is_empty()))
                        .map_err(usage)?
                }
                None => infer_variables(pattern).map_err(usage)?,
            };
            let alphabet: Vec<char> = match &extra.alphabet {
                Some(a) => a.chars().collect(),
                None => slp.map(Slp::terminal_chars).unwrap_or_default(),
            };
            compile_spanner_regex(pattern, &alphabet, &vars).map_err(usage)
        }
        _ => Err(usage("exactly one of --automaton and --regex is required")),
    }
}

fn load_eval(args: &EvalArgs) -> Result<(Slp, SpannerAutomaton), Failure> {
    let slp = read_slp(&args.doc.slp)?;
    let s = &args.spanner;
    let m = load_spanner(
        s.source.automaton.as_deref(),
        s.source.regex.as_deref(),
        &s.extra,
        Some(&slp),
    )?;
    Ok((slp, m))
}

fn options(args: &EvalArgs, determinize: bool) -> Result<EvalOptions, Failure> {
    if args.memory_cap == Some(0) || args.spanner.extra.max_states == 0 {
        return Err(usage("caps must be positive"));
    }
    Ok(EvalOptions {
        determinize,
        state_cap: args.spanner.extra.max_states,
        memory_cap: args.memory_cap,
    })
}

fn render(t: &SpanTuple, vars: &Variables, format: Format) -> String {
    match format {
        Format::Text => t.format(vars),
        Format::Tsv => vars
            .sorted_indices()
            .into_iter()
            .map(|v| match t.get(v) {
                Some(s) => format!("[{},{}>", s.start, s.end),
                None => "_".into(),
            })
            .collect::<Vec<_>>()
            .join("\t"),
        Format::Json => {
            let mut obj = Map::new();
            for v in vars.sorted_indices() {
                let value = match t.get(v) {
                    Some(s) => json!([s.start, s.end]),
                    None => Value::Null,
                };
                obj.insert(vars.name(v).unwrap_or("?").to_owned(), value);
            }
            Value::Object(obj).to_string()
        }
    }
}

fn header(vars: &Variables, format: Format) -> Option<String> {
    (format == Format::Tsv).then(|| {
        vars.sorted_indices()
            .into_iter()
            .map(|v| vars.name(v).unwrap_or("?").to_owned())
            .collect::<Vec<_>>()
            .join("\t")
    })
}

/// Prints sorted lines so that `compute` matches sorted `enum` output.
fn print_relation(tuples: &[SpanTuple], vars: &Variables, format: Format) -> io::Result<()> {
    let mut lines: Vec<String> = tuples.iter().map(|t| render(t, vars, format)).collect();
    lines.sort();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    if let Some(h) = header(vars, format) {
        writeln!(out, "{h}")?;
    }
    for l in lines {
        writeln!(out, "{l}")?;
    }
    out.flush()
}

fn decision(answer: bool) -> Outcome {
    println!("{answer}");
    Ok(answer)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Stats {
            doc,
            spanner,
            tables,
        } => {
            let slp = read_slp(&doc.slp)?;
            println!("nonterminals\t{}", slp.nonterminal_count());
            println!("size\t{}", slp.size());
            println!("depth\t{}", slp.depth_of());
            println!("length\t{}", slp.len());
            if spanner.automaton.is_some() || spanner.regex.is_some() {
                let m = load_spanner(
                    spanner.automaton.as_deref(),
                    spanner.regex.as_deref(),
                    &spanner.extra,
                    Some(&slp),
                )?;
                println!("states\t{}", m.state_count());
                println!("automaton_size\t{}", m.size());
                println!("variables\t{}", m.vars().len());
                println!("deterministic\t{}", m.without_epsilon().is_deterministic());
                if tables {
                    let opts = EvalOptions {
                        state_cap: spanner.extra.max_states,
                        ..EvalOptions::default()
                    };
                    let started = Instant::now();
                    let p = prepare(&slp, &m, opts).map_err(anyhow::Error::from)?;
                    let s = p.tables.stats();
                    println!("table_states\t{}", p.tables.state_count());
                    println!("table_inner_rules\t{}", s.inner_rules);
                    println!("table_word_ops\t{}", s.word_ops);
                    println!("table_reachable_cells\t{}", s.reachable_cells);
                    println!(
                        "table_time_ms\t{:.3}",
                        started.elapsed().as_secs_f64() * 1e3
                    );
                }
            } else if tables {
                return Err(usage("--tables needs --automaton or --regex"));
            }
            Ok(true)
        }
        Command::Expand { doc, limit } => {
            let slp = read_slp(&doc.slp)?;
            let text: String = slp
                .expand(limit)
                .map_err(anyhow::Error::from)?
                .into_iter()
                .collect();
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(true)
        }
        Command::Compress {
            input,
            output,
            trim_newline,
        } => {
            let mut text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            if trim_newline && text.ends_with('\n') {
                text.pop();
            }
            let chars: Vec<char> = text.chars().collect();
            let slp = build_test_slp(&chars).map_err(anyhow::Error::from)?;
            info!(
                "compressed {} characters into {} nonterminals",
                chars.len(),
                slp.nonterminal_count()
            );
            match output {
                Some(p) => fs::write(&p, slp.to_text())
                    .with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", slp.to_text()),
            }
            Ok(true)
        }
        Command::Nonempty(eval) => {
            let (slp, m) = load_eval(&eval)?;
            decision(check_nonempty(&slp, &m))
        }
        Command::Check { eval, tuple } => {
            let (slp, m) = load_eval(&eval)?;
            let t = SpanTuple::parse(&tuple, m.vars()).map_err(usage)?;
            let answer = match model_check(&slp, &m, &t) {
                Ok(a) => a,
                // A tuple outside the document cannot be extracted.
                Err(slpspan::EvalError::Slp(slpspan::SlpError::OutOfRange { .. })) => false,
                Err(e) => return Err(Failure::Runtime(e.into())),
            };
            decision(answer)
        }
        Command::Compute { eval, output } => {
            let (slp, m) = load_eval(&eval)?;
            let r = compute_relation_with(&slp, &m, options(&eval, false)?)
                .map_err(anyhow::Error::from)?;
            info!(
                "{} tuples, {} memo entries, longest list {}",
                r.tuples.len(),
                r.stats.entries,
                r.stats.max_list
            );
            print_relation(&r.tuples, &r.vars, output.format)?;
            Ok(true)
        }
        Command::Enum {
            eval,
            output,
            limit,
            count_only,
            delay_stats,
            allow_duplicates,
            no_determinize,
        } => {
            let (slp, m) = load_eval(&eval)?;
            let opts = options(&eval, !no_determinize)?;
            let mut e = enumerate_relation_with(&slp, &m, opts, allow_duplicates)
                .map_err(anyhow::Error::from)?;
            let vars = e.vars().clone();
            let stdout = io::stdout();
            let mut out = stdout.lock();
            if !count_only {
                if let Some(h) = header(&vars, output.format) {
                    writeln!(out, "{h}")?;
                }
            }
            let mut count = 0u64;
            while limit.is_none_or(|l| count < l) {
                let Some(t) = e.next() else { break };
                let t = t.map_err(anyhow::Error::from)?;
                count += 1;
                if !count_only {
                    writeln!(out, "{}", render(&t, &vars, output.format))?;
                    out.flush()?;
                }
            }
            if count_only {
                writeln!(out, "{count}")?;
            }
            out.flush()?;
            if delay_stats {
                let s = e.stats();
                let depth = e.depth();
                let unit = (depth * vars.len().max(1)) as f64;
                eprintln!("outputs\t{}", s.outputs);
                eprintln!("trees\t{}", s.trees);
                eprintln!("steps\t{}", e.steps());
                eprintln!("depth\t{depth}");
                eprintln!("variables\t{}", vars.len());
                eprintln!("max_gap\t{}", s.max_gap);
                eprintln!("max_gap_per_depth_var\t{:.3}", s.max_gap as f64 / unit);
                eprintln!("max_tree_nodes\t{}", s.max_tree_nodes);
                eprintln!("max_terminal_leaves\t{}", s.max_terminal_leaves);
                for (b, n) in s.histogram.iter().enumerate() {
                    if *n > 0 {
                        eprintln!(
                            "gap_histogram\t[{}, {})\t{n}",
                            (1u64 << b) - 1,
                            (1u64 << (b + 1)) - 1
                        );
                    }
                }
            }
            Ok(true)
        }
        Command::Oracle {
            eval,
            output,
            bound,
        } => {
            let (slp, m) = load_eval(&eval)?;
            if slp.len() > bound as u64 {
                return Err(Failure::Runtime(anyhow!(
                    "document length {} exceeds the oracle bound {bound}",
                    slp.len()
                )));
            }
            let doc = slp.expand(bound as u64).map_err(anyhow::Error::from)?;
            let tuples = brute_force_relation(&doc, &m, bound).map_err(anyhow::Error::from)?;
            print_relation(&tuples, m.vars(), output.format)?;
            Ok(true)
        }
        Command::Bench {
            slp,
            spanner,
            length,
            seed,
            repeat,
            format,
        } => bench(
            slp.as_deref(),
            &spanner,
            length,
            seed,
            repeat.max(1),
            format,
        ),
    }
}

fn bench(
    path: Option<&Path>,
    spanner: &SpannerArgs,
    length: u64,
    seed: u64,
    repeat: u32,
    format: Format,
) -> Outcome {
    let slp = match path {
        Some(p) => read_slp(p)?,
        None => {
            if length == 0 {
                return Err(usage("--length must be positive"));
            }
            let mut rng = StdRng::seed_from_u64(seed);
            let alphabet = ['a', 'b', 'c'];
            let period = rng.gen_range(1..=8);
            let unit: Vec<char> = (0..period)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            let doc: Vec<char> = (0..length as usize).map(|i| unit[i % period]).collect();
            build_test_slp(&doc).map_err(anyhow::Error::from)?
        }
    };
    let m = load_spanner(
        spanner.source.automaton.as_deref(),
        spanner.source.regex.as_deref(),
        &spanner.extra,
        Some(&slp),
    )?;
    let opts = EvalOptions {
        state_cap: spanner.extra.max_states,
        ..EvalOptions::default()
    };
    let time = |f: &mut dyn FnMut() -> anyhow::Result<usize>| -> anyhow::Result<(f64, usize)> {
        let mut best = f64::INFINITY;
        let mut n = 0;
        for _ in 0..repeat {
            let started = Instant::now();
            n = f()?;
            best = best.min(started.elapsed().as_secs_f64() * 1e3);
        }
        Ok((best, n))
    };
    let (compressed_ms, tuples) =
        time(&mut || Ok(compute_relation_with(&slp, &m, opts)?.tuples.len()))?;
    let (enum_ms, _) = time(&mut || Ok(enumerate_relation_with(&slp, &m, opts, false)?.count()))?;
    let (expanded_ms, expanded_tuples) = time(&mut || {
        let doc = slp.expand(DEFAULT_EXPAND_LIMIT)?;
        let plain = build_test_slp(&doc)?;
        Ok(compute_relation_with(&plain, &m, opts)?.tuples.len())
    })?;
    if tuples != expanded_tuples {
        return Err(Failure::Runtime(anyhow!(
            "relation sizes differ: {tuples} compressed vs {expanded_tuples} expanded"
        )));
    }
    let rows = [
        ("length", slp.len().to_string()),
        ("nonterminals", slp.nonterminal_count().to_string()),
        ("depth", slp.depth_of().to_string()),
        ("states", m.state_count().to_string()),
        ("tuples", tuples.to_string()),
        ("compute_ms", format!("{compressed_ms:.3}")),
        ("enum_ms", format!("{enum_ms:.3}")),
        ("expand_then_compute_ms", format!("{expanded_ms:.3}")),
    ];
    match format {
        Format::Json => {
            let obj: Map<String, Value> = rows
                .iter()
                .map(|(k, v)| (k.to_string(), Value::String(v.clone())))
                .collect();
            println!("{}", Value::Object(obj));
        }
        _ => {
            for (k, v) in rows {
                println!("{k}\t{v}");
            }
        }
    }
    Ok(true)
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<io::Error>()
        .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    // Deep grammars recurse through nested producers; give them room.
    let worker = std::thread::Builder::new()
        .stack_size(STACK_SIZE)
        .spawn(move || run(cli));
    let result = match worker {
        Ok(handle) => handle
            .join()
            .unwrap_or_else(|_| Err(Failure::Runtime(anyhow!("worker thread panicked")))),
        Err(e) => Err(Failure::Runtime(e.into())),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
