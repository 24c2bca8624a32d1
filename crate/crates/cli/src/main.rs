use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lifectx::context::classify_context;
use lifectx::manifest::RunManifest;
use lifectx::pipeline::{run, PipelineError, RunOptions};
use lifectx::schema::{parse_schema_unchecked, validate_schema};
use lifectx::sequence::{
    build_sequence, detect_habits, export_sequence, select, sequence_stats, Bucketing, ContextPredicate, HabitParams,
    KeyFn, SequenceError,
};
use lifectx::store::ContextStore;
use lifectx::synth::{write_su_fixture, SuConfig};

const PREDICATE_HELP: &str = "\
Predicate grammar:
  pred   := 'true' | 'false' | atom ('and' atom)*
  atom   := field '=' value | field 'in' '(' value (',' value)* ')'
  field  := location | event | person | class | weekday | slot
  value  := bare word or \"double quoted\" text

Labels compare case-insensitively with whitespace collapsed. person=* matches
any person other than the subject. class is static, dynamic or unlocated.
weekday is mon..sun; slot is the window's position in its day (0-based).";

#[derive(Parser)]
#[command(
    name = "lifectx",
    version,
    about = "Situational-context graphs from personal data streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Schema operations.
    Schema {
        #[command(subcommand)]
        action: SchemaCmd,
    },
    /// Ingest the inputs named by a manifest and write a run directory.
    Run {
        manifest: PathBuf,
        /// Population threads; 1 runs sequentially, 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory, overriding the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Lateness horizon in windows, overriding the manifest.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Print a subject's contexts that satisfy a predicate.
    #[command(after_help = PREDICATE_HELP)]
    Query {
        store: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long = "where", default_value = "true")]
        predicate: String,
        /// Print only the number of matches.
        #[arg(long)]
        count: bool,
        /// Print full contexts as JSON lines.
        #[arg(long, conflicts_with = "count")]
        json: bool,
    },
    /// Report recurring contexts.
    Habits {
        store: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        min_support: u64,
        /// location, event or location-event
        #[arg(long, default_value = "location-event")]
        key: KeyFn,
        /// weekday-slot, day-slot or slot
        #[arg(long, default_value = "weekday-slot")]
        bucket: Bucketing,
    },
    /// Write a subject's life sequence as JSON lines.
    Export {
        store: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-subject summary of a store.
    Stats {
        store: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic two-subject fixture with a ready-to-run manifest.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 28)]
        days: u32,
        #[arg(long, value_delimiter = ',', default_value = "acc01,acc02")]
        subjects: Vec<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SchemaCmd {
    /// Check a schema file; findings go to standard output.
    Validate { file: PathBuf },
}

/// An error message paired with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure {
                code: 0,
                message: String::new(),
            };
        }
        Failure::data(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Schema {
            action: SchemaCmd::Validate { file },
        } => schema_validate(&file),
        Command::Run {
            manifest,
            jobs,
            out,
            horizon,
        } => cmd_run(
            &manifest,
            RunOptions {
                jobs,
                output: out,
                horizon,
            },
        ),
        Command::Query {
            store,
            subject,
            predicate,
            count,
            json,
        } => query(&store, &subject, &predicate, count, json),
        Command::Habits {
            store,
            subject,
            min_support,
            key,
            bucket,
        } => habits(
            &store,
            &subject,
            HabitParams {
                min_support,
                key_fn: key,
                bucketing: bucket,
            },
        ),
        Command::Export { store, subject, out } => export(&store, &subject, &out),
        Command::Stats { store, json } => stats(&store, json),
        Command::Synth {
            dir,
            days,
            subjects,
            seed,
        } => synth(&dir, days, subjects, seed),
    }
}

fn schema_validate(file: &Path) -> Outcome {
    let text = fs::read_to_string(file).map_err(|e| Failure::usage(format!("{}: {e}", file.display())))?;
    let schema = match parse_schema_unchecked(&text) {
        Ok(s) => s,
        Err(e) => {
            println!("syntax {}: {e}", file.display());
            return Ok(1);
        }
    };
    let report = validate_schema(&schema);
    print!("{report}");
    if report.is_clean() {
        println!(
            "ok: {} etypes, {} object properties",
            schema.etypes().len(),
            schema.object_properties().len()
        );
        Ok(0)
    } else {
        Ok(1)
    }
}

fn cmd_run(manifest: &Path, opts: RunOptions) -> Outcome {
    let m = RunManifest::load(manifest).map_err(|e| Failure::usage(e.to_string()))?;
    let summary = run(&m, &opts).map_err(|e| match e {
        PipelineError::Config(_) => Failure::usage(e.to_string()),
        other => Failure::data(other.to_string()),
    })?;
    println!("{summary}");
    Ok(if summary.findings > 0 { 1 } else { 0 })
}

fn load_store(dir: &Path) -> Result<ContextStore, Failure> {
    ContextStore::load(dir).map_err(|e| match e {
        lifectx::store::StoreError::NotAStore(_) => Failure::usage(e.to_string()),
        other => Failure::data(other.to_string()),
    })
}

fn sequence_error(e: SequenceError) -> Failure {
    match e {
        SequenceError::Io(io) => io.into(),
        SequenceError::MinSupport(_) | SequenceError::NotDayAligned { .. } | SequenceError::UnevenDay(_) => {
            Failure::usage(e.to_string())
        }
        other => Failure::data(other.to_string()),
    }
}

fn query(store: &Path, subject: &str, predicate: &str, count: bool, json: bool) -> Outcome {
    let p: ContextPredicate = predicate.parse().map_err(|e: lifectx::sequence::PredicateError| {
        Failure::usage(format!("bad predicate\n{}", e.render(predicate)))
    })?;
    let store = load_store(store)?;
    let seq = build_sequence(store.contexts(subject), subject).map_err(sequence_error)?;
    let hits = select(&seq, &store, &p).map_err(sequence_error)?;
    let mut out = BufWriter::new(io::stdout().lock());
    if count {
        writeln!(out, "{}", hits.len())?;
    } else if json {
        export_sequence(&hits, &store, &mut out).map_err(sequence_error)?;
    } else {
        for r in &hits.refs {
            let c = store.get(subject, r.index).expect("selected context is stored");
            let labels = |it: Vec<&str>| if it.is_empty() { "-".to_string() } else { it.join("|") };
            writeln!(
                out,
                "{}\t{}\t{}\tlocation={}\tevent={}\tperson={}",
                c.id(),
                c.window.start,
                classify_context(c).as_str(),
                labels(c.locations.iter().map(|l| l.label.as_str()).collect()),
                labels(c.events.iter().map(|e| e.label.as_str()).collect()),
                labels(c.others().map(|p| p.label.as_str()).collect()),
            )?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn habits(store: &Path, subject: &str, params: HabitParams) -> Outcome {
    if params.min_support < 2 {
        return Err(sequence_error(SequenceError::MinSupport(params.min_support)));
    }
    let store = load_store(store)?;
    let seq = build_sequence(store.contexts(subject), subject).map_err(sequence_error)?;
    let found = detect_habits(&seq, &store, &params).map_err(sequence_error)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for h in found {
        writeln!(out, "{h}")?;
    }
    out.flush()?;
    Ok(0)
}

fn export(store: &Path, subject: &str, out: &Path) -> Outcome {
    let store = load_store(store)?;
    let seq = build_sequence(store.contexts(subject), subject).map_err(sequence_error)?;
    let file = fs::File::create(out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    let bytes = export_sequence(&seq, &store, &mut w).map_err(sequence_error)?;
    w.flush()?;
    println!("{} contexts, {bytes} bytes -> {}", seq.len(), out.display());
    Ok(0)
}

fn stats(store: &Path, json: bool) -> Outcome {
    let store = load_store(store)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for subject in store.subjects() {
        let s = sequence_stats(store.contexts(subject));
        if json {
            let line = serde_json::json!({ "subject": subject, "stats": s });
            writeln!(out, "{line}")?;
            continue;
        }
        let range = match (s.first_index, s.last_index) {
            (Some(a), Some(b)) => format!("{a}..{b}"),
            _ => "-".into(),
        };
        let classes: Vec<String> = s.classes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(
            out,
            "{subject}\tcontexts={} windows={range} contiguous={} unknown={} {} locations={} events={}",
            s.contexts,
            s.contiguous,
            s.unknown,
            classes.join(" "),
            s.distinct_locations,
            s.distinct_events
        )?;
    }
    out.flush()?;
    Ok(0)
}

fn synth(dir: &Path, days: u32, subjects: Vec<String>, seed: u64) -> Outcome {
    if subjects.is_empty() || days == 0 {
        return Err(Failure::usage("need at least one subject and one day"));
    }
    let cfg = SuConfig {
        subjects,
        days,
        seed,
        ..SuConfig::default()
    };
    let s = write_su_fixture(dir, &cfg).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    println!(
        "gps_rows={} annotation_rows={} windows_per_subject={} manifest={}",
        s.gps_rows,
        s.annotation_rows,
        s.windows_per_subject,
        dir.join("manifest.toml").display()
    );
    Ok(0)
}
