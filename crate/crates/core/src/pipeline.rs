//! End-to-end run: parse inputs, merge them by timestamp, assign windows,
//! populate contexts and write the run directory.
//!
//! Layout of the output directory:
//!
//! ```text
//! contexts/<subject>.jsonl   one context per line, window order
//! registry.json              entity registry
//! coverage.json              per-subject window coverage
//! log.jsonl                  bad rows, quarantines, unmapped records, conflicts, findings
//! summary.json               run counters
//! ```

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::validate_context;
use crate::ingest::{parse_records, window_assign, Assigned, CoverageReport, StreamRecord, WindowSpec};
use crate::manifest::RunManifest;
use crate::populate::{ContextBuilder, EntityRegistry, LogEntry, PopulateError, Populator};
use crate::report::Finding;
use crate::schema::parse_schema;
use crate::store::{subject_file_name, CONTEXTS_DIR};
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad configuration: schema, rules or manifest contents.
    #[error("{0}")]
    Config(String),
    /// Input that cannot be read at all.
    #[error("{path}:{line}: {message}")]
    Fatal { path: String, line: u64, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Populate(#[from] PopulateError),
}

impl PipelineError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
        move |source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// 0 = all cores, 1 = sequential.
    pub jobs: usize,
    pub output: Option<PathBuf>,
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub subjects: u64,
    pub windows: u64,
    pub contexts: u64,
    pub records: u64,
    pub bad_rows: u64,
    pub quarantined: u64,
    pub unmapped: u64,
    pub conflicts: u64,
    pub findings: u64,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "subjects={} windows={} contexts={} records={} bad_rows={} quarantined={} unmapped={} conflicts={} findings={}",
            self.subjects,
            self.windows,
            self.contexts,
            self.records,
            self.bad_rows,
            self.quarantined,
            self.unmapped,
            self.conflicts,
            self.findings
        )
    }
}

#[derive(Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum IngestLog<'a> {
    BadRow {
        file: &'a str,
        line: u64,
        message: String,
    },
    Quarantined {
        subject: &'a str,
        stream: &'a str,
        at: Timestamp,
        reason: String,
    },
}

#[derive(Serialize)]
struct FindingLog<'a> {
    event: &'static str,
    #[serde(flatten)]
    finding: &'a Finding,
}

#[derive(Default)]
struct InputState {
    bad_rows: Vec<(u64, String)>,
    fatal: Option<(u64, String)>,
    good: u64,
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Runs the pipeline described by `manifest`.
pub fn run(manifest: &RunManifest, opts: &RunOptions) -> Result<RunSummary, PipelineError> {
    let schema_text = fs::read_to_string(&manifest.schema).map_err(PipelineError::io(&manifest.schema))?;
    let schema =
        parse_schema(&schema_text).map_err(|e| PipelineError::Config(format!("{}: {e}", manifest.schema.display())))?;
    let descriptors = manifest.descriptor_map();
    let populator = Populator::new(&schema, &manifest.rules, descriptors.clone(), manifest.populate.clone())
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let horizon = opts.horizon.unwrap_or(manifest.horizon);
    let out_dir = opts.output.clone().unwrap_or_else(|| manifest.output.clone());

    let mut states: Vec<Rc<RefCell<InputState>>> = Vec::new();
    let mut sources: Vec<Box<dyn Iterator<Item = StreamRecord>>> = Vec::new();
    for input in &manifest.inputs {
        let file = File::open(&input.path).map_err(PipelineError::io(&input.path))?;
        let desc = descriptors
            .get(&input.stream_id)
            .cloned()
            .ok_or_else(|| PipelineError::Config(format!("undeclared stream {}", input.stream_id)))?;
        let state = Rc::new(RefCell::new(InputState::default()));
        states.push(state.clone());
        let reader = parse_records(
            io::BufReader::with_capacity(1 << 16, file),
            desc,
            input.format,
            input.header,
        );
        sources.push(Box::new(
            reader
                .map_while(move |item| {
                    let mut s = state.borrow_mut();
                    match item {
                        Ok(r) => {
                            s.good += 1;
                            Some(Some(r))
                        }
                        Err(e) if e.is_fatal() => {
                            s.fatal = Some((e.line, e.to_string()));
                            None
                        }
                        Err(e) => {
                            s.bad_rows.push((e.line, e.to_string()));
                            Some(None)
                        }
                    }
                })
                .flatten(),
        ));
    }
    let mut merged = sources
        .into_iter()
        .kmerge_by(|a, b| a.timestamp < b.timestamp)
        .peekable();

    let origin = match (manifest.window.origin, merged.peek()) {
        (Some(o), _) => Some(o),
        (None, Some(first)) => Some(first.timestamp.floor_day()),
        (None, None) => None,
    };

    let contexts_dir = out_dir.join(CONTEXTS_DIR);
    if contexts_dir.exists() {
        fs::remove_dir_all(&contexts_dir).map_err(PipelineError::io(&contexts_dir))?;
    }
    fs::create_dir_all(&contexts_dir).map_err(PipelineError::io(&contexts_dir))?;

    let mut coverage = CoverageReport::default();
    let mut quarantine_log: Vec<(String, String, Timestamp, String)> = Vec::new();
    let mut registry = EntityRegistry::new();
    let mut writers: BTreeMap<String, BufWriter<File>> = BTreeMap::new();
    let mut context_log: Vec<u8> = Vec::new();
    let mut summary = RunSummary::default();
    let mut sink_error: Option<PipelineError> = None;

    if let Some(origin) = origin {
        let spec =
            WindowSpec::new(origin, manifest.window.duration_s).map_err(|e| PipelineError::Config(e.to_string()))?;
        let groups = window_assign(&mut merged, spec, horizon).filter_map(|item| {
            coverage.observe(&item);
            match item {
                Assigned::Group(g) => Some(g),
                Assigned::Quarantined(q) => {
                    quarantine_log.push((
                        q.record.subject_id.clone(),
                        q.record.stream_id.to_string(),
                        q.record.timestamp,
                        q.reason.to_string(),
                    ));
                    None
                }
            }
        });
        let mut builder = ContextBuilder::new(&populator, opts.jobs)?;
        let stats = builder.run(groups, &mut registry, |out| {
            if sink_error.is_some() {
                return;
            }
            let report = validate_context(&out.context, &schema);
            summary.findings += report.len() as u64;
            let mut lines = Vec::new();
            for entry in &out.log {
                lines.push(serde_json::to_string(entry).expect("log entry serializes"));
            }
            for finding in out.findings.iter().chain(&report.findings) {
                lines.push(
                    serde_json::to_string(&FindingLog {
                        event: "finding",
                        finding,
                    })
                    .expect("finding serializes"),
                );
            }
            for line in lines {
                context_log.extend_from_slice(line.as_bytes());
                context_log.push(b'\n');
            }
            let subject = out.context.subject_id.clone();
            let writer = match writers.entry(subject) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    let path = contexts_dir.join(subject_file_name(e.key()));
                    match File::create(&path) {
                        Ok(f) => e.insert(BufWriter::new(f)),
                        Err(source) => {
                            sink_error = Some(PipelineError::Io { path, source });
                            return;
                        }
                    }
                }
            };
            let mut line = serde_json::to_vec(&out.context).expect("context serializes");
            line.push(b'\n');
            if let Err(source) = writer.write_all(&line) {
                sink_error = Some(PipelineError::Io {
                    path: contexts_dir.clone(),
                    source,
                });
            }
        })?;
        if let Some(e) = sink_error {
            return Err(e);
        }
        summary.contexts = stats.contexts;
        summary.unmapped = stats.unmapped;
        summary.conflicts = stats.conflicts;
        summary.findings += stats.findings;
        summary.quarantined = stats.quarantined;
    }
    for (subject, mut w) in writers {
        w.flush()
            .map_err(PipelineError::io(&contexts_dir.join(subject_file_name(&subject))))?;
    }

    for (input, state) in manifest.inputs.iter().zip(&states) {
        if let Some((line, message)) = &state.borrow().fatal {
            return Err(PipelineError::Fatal {
                path: input.path.display().to_string(),
                line: *line,
                message: message.clone(),
            });
        }
    }

    let mut log: Vec<u8> = Vec::new();
    for (input, state) in manifest.inputs.iter().zip(&states) {
        let name = display_name(&input.path);
        let s = state.borrow();
        summary.records += s.good;
        summary.bad_rows += s.bad_rows.len() as u64;
        for (line, message) in &s.bad_rows {
            let entry = IngestLog::BadRow {
                file: &name,
                line: *line,
                message: message.clone(),
            };
            log.extend_from_slice(serde_json::to_string(&entry).expect("serializes").as_bytes());
            log.push(b'\n');
        }
    }
    for (subject, stream, at, reason) in &quarantine_log {
        let entry = IngestLog::Quarantined {
            subject,
            stream,
            at: *at,
            reason: reason.clone(),
        };
        log.extend_from_slice(serde_json::to_string(&entry).expect("serializes").as_bytes());
        log.push(b'\n');
    }
    summary.quarantined += quarantine_log.len() as u64;
    log.extend_from_slice(&context_log);

    let totals = coverage.totals();
    summary.subjects = coverage.subjects.len() as u64;
    summary.windows = totals.total_windows;

    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(PipelineError::io(&path))
    };
    write("registry.json", registry.to_json().as_bytes())?;
    write("coverage.json", json_pretty(&coverage).as_bytes())?;
    write("log.jsonl", &log)?;
    write("summary.json", json_pretty(&summary).as_bytes())?;
    Ok(summary)
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

/// Entries of a run's `log.jsonl` that came from population.
pub fn read_populate_log(dir: &Path) -> io::Result<Vec<LogEntry>> {
    let text = fs::read_to_string(dir.join("log.jsonl"))?;
    Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
}
