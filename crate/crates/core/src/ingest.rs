//! Typed record parsing and fixed-window assignment.
//!
//! Records are read one row at a time from CSV or JSONL. Bad rows become
//! per-row errors and the stream continues; only undecodable input ends it.
//! [`WindowAssigner`] groups records per subject into tumbling windows,
//! tolerating out-of-order arrival up to a lateness horizon counted in
//! windows. Records later than that are quarantined.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::TimeWindow;
use crate::time::Timestamp;
use crate::value::{Datatype, Value};

pub const DEFAULT_WINDOW_S: u64 = 1800;
pub const DEFAULT_LATENESS_WINDOWS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Sensor,
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub name: String,
    pub datatype: Datatype,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDescriptor {
    pub stream_id: String,
    pub kind: StreamKind,
    pub fields: Vec<FieldDef>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("stream {0} declares no payload fields")]
    NoFields(String),
    #[error("stream {0} declares field {1} twice")]
    DuplicateField(String, String),
    #[error("stream {0} uses reserved field name {1}")]
    ReservedField(String, String),
}

const RESERVED: [&str; 3] = ["stream_id", "subject_id", "timestamp"];

impl StreamDescriptor {
    pub fn new(stream_id: &str, kind: StreamKind, fields: &[(&str, Datatype)]) -> Self {
        StreamDescriptor {
            stream_id: stream_id.to_string(),
            kind,
            fields: fields
                .iter()
                .map(|(n, d)| FieldDef {
                    name: n.to_string(),
                    datatype: d.clone(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        if self.fields.is_empty() {
            return Err(DescriptorError::NoFields(self.stream_id.clone()));
        }
        let mut seen = HashSet::new();
        for f in &self.fields {
            if RESERVED.contains(&f.name.as_str()) {
                return Err(DescriptorError::ReservedField(self.stream_id.clone(), f.name.clone()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DescriptorError::DuplicateField(self.stream_id.clone(), f.name.clone()));
            }
        }
        Ok(())
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub stream_id: Arc<str>,
    pub subject_id: String,
    pub timestamp: Timestamp,
    /// One value per descriptor field, in descriptor order.
    pub payload: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordErrorKind {
    BadTimestamp(String),
    Arity {
        expected: usize,
        found: usize,
    },
    MissingField(String),
    UnknownField(String),
    Coercion {
        field: String,
        message: String,
    },
    StreamMismatch(String),
    Malformed(String),
    /// Fatal: the source cannot be decoded and reading stops.
    Undecodable(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: u64,
    pub kind: RecordErrorKind,
}

impl RecordError {
    pub fn is_fatal(&self) -> bool {
        matches!(self.kind, RecordErrorKind::Undecodable(_))
    }
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            RecordErrorKind::BadTimestamp(t) => write!(f, "bad timestamp {t:?}"),
            RecordErrorKind::Arity { expected, found } => {
                write!(f, "expected {expected} columns, found {found}")
            }
            RecordErrorKind::MissingField(n) => write!(f, "missing field {n}"),
            RecordErrorKind::UnknownField(n) => write!(f, "unknown field {n}"),
            RecordErrorKind::Coercion { field, message } => write!(f, "field {field}: {message}"),
            RecordErrorKind::StreamMismatch(s) => write!(f, "record belongs to stream {s}"),
            RecordErrorKind::Malformed(m) => write!(f, "malformed row: {m}"),
            RecordErrorKind::Undecodable(m) => write!(f, "undecodable input: {m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub good: u64,
    pub bad: u64,
}

enum Source<R: Read> {
    Csv {
        reader: csv::Reader<R>,
        row: csv::ByteRecord,
        /// Column of subject, timestamp, then each payload field.
        columns: Option<Vec<usize>>,
        width: usize,
        has_header: bool,
    },
    Jsonl {
        reader: BufReader<R>,
        buf: String,
        line: u64,
    },
}

/// Lazily parsed records from one source.
pub struct RecordReader<R: Read> {
    source: Source<R>,
    descriptor: Arc<StreamDescriptor>,
    stream_id: Arc<str>,
    stats: ParseStats,
    done: bool,
}

pub fn parse_records<R: Read>(
    source: R,
    descriptor: Arc<StreamDescriptor>,
    format: Format,
    has_header: bool,
) -> RecordReader<R> {
    let source = match format {
        Format::Csv => Source::Csv {
            reader: csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_reader(source),
            row: csv::ByteRecord::new(),
            columns: None,
            width: descriptor.fields.len() + 2,
            has_header,
        },
        Format::Jsonl => Source::Jsonl {
            reader: BufReader::new(source),
            buf: String::new(),
            line: 0,
        },
    };
    RecordReader {
        stream_id: Arc::from(descriptor.stream_id.as_str()),
        source,
        descriptor,
        stats: ParseStats::default(),
        done: false,
    }
}

impl<R: Read> RecordReader<R> {
    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    pub fn descriptor(&self) -> &Arc<StreamDescriptor> {
        &self.descriptor
    }

    fn next_csv(&mut self) -> Option<Result<StreamRecord, RecordError>> {
        let Source::Csv {
            reader,
            row,
            columns,
            width,
            has_header,
        } = &mut self.source
        else {
            unreachable!()
        };
        loop {
            let more = match reader.read_byte_record(row) {
                Ok(more) => more,
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Some(Err(RecordError {
                        line,
                        kind: RecordErrorKind::Undecodable(e.to_string()),
                    }));
                }
            };
            if !more {
                return None;
            }
            let line = row.position().map_or(0, |p| p.line());
            let mut fields = Vec::with_capacity(row.len());
            for raw in row.iter() {
                match std::str::from_utf8(raw) {
                    Ok(s) => fields.push(s),
                    Err(e) => {
                        return Some(Err(RecordError {
                            line,
                            kind: RecordErrorKind::Undecodable(e.to_string()),
                        }))
                    }
                }
            }
            if columns.is_none() {
                if *has_header {
                    match header_columns(&fields, &self.descriptor) {
                        Ok((cols, w)) => {
                            *columns = Some(cols);
                            *width = w;
                        }
                        Err(kind) => return Some(Err(RecordError { line, kind })),
                    }
                    continue;
                }
                *columns = Some((0..*width).collect());
            }
            if fields.len() == 1 && fields[0].is_empty() {
                continue;
            }
            if fields.len() != *width {
                return Some(Err(RecordError {
                    line,
                    kind: RecordErrorKind::Arity {
                        expected: *width,
                        found: fields.len(),
                    },
                }));
            }
            let cols = columns.as_ref().unwrap();
            let result = build_record(
                &self.descriptor,
                &self.stream_id,
                fields[cols[0]],
                Timestamp::parse(fields[cols[1]]).map_err(|_| fields[cols[1]].to_string()),
                |i| Ok(FieldText::Text(fields[cols[i + 2]])),
            )
            .map_err(|kind| RecordError { line, kind });
            return Some(result);
        }
    }

    fn next_jsonl(&mut self) -> Option<Result<StreamRecord, RecordError>> {
        let Source::Jsonl { reader, buf, line } = &mut self.source else {
            unreachable!()
        };
        loop {
            buf.clear();
            *line += 1;
            match reader.read_line(buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    return Some(Err(RecordError {
                        line: *line,
                        kind: RecordErrorKind::Undecodable(e.to_string()),
                    }))
                }
            }
            let text = buf.trim();
            if text.is_empty() {
                continue;
            }
            let line = *line;
            let err = |kind| Some(Err(RecordError { line, kind }));
            let mut obj: serde_json::Map<String, serde_json::Value> = match serde_json::from_str(text) {
                Ok(serde_json::Value::Object(m)) => m,
                Ok(_) => return err(RecordErrorKind::Malformed("not a JSON object".into())),
                Err(e) => return err(RecordErrorKind::Malformed(e.to_string())),
            };
            if let Some(sid) = obj.remove("stream_id") {
                if sid.as_str() != Some(&*self.stream_id) {
                    return err(RecordErrorKind::StreamMismatch(sid.to_string()));
                }
            }
            let subject = match obj.remove("subject_id") {
                Some(serde_json::Value::String(s)) => s,
                Some(other) => {
                    return err(RecordErrorKind::Coercion {
                        field: "subject_id".into(),
                        message: format!("expected a string, found {other}"),
                    })
                }
                None => return err(RecordErrorKind::MissingField("subject_id".into())),
            };
            let timestamp = match obj.remove("timestamp") {
                Some(serde_json::Value::String(s)) => Timestamp::parse(&s).map_err(|_| s),
                Some(serde_json::Value::Number(n)) => n.as_i64().map(Timestamp).ok_or_else(|| n.to_string()),
                Some(other) => Err(other.to_string()),
                None => return err(RecordErrorKind::MissingField("timestamp".into())),
            };
            let descriptor = Arc::clone(&self.descriptor);
            let result = build_record(&descriptor, &self.stream_id, &subject, timestamp, |i| {
                let name = &descriptor.fields[i].name;
                obj.remove(name)
                    .map(FieldText::Json)
                    .ok_or_else(|| RecordErrorKind::MissingField(name.clone()))
            })
            .and_then(|rec| match obj.keys().next() {
                Some(extra) => Err(RecordErrorKind::UnknownField(extra.clone())),
                None => Ok(rec),
            })
            .map_err(|kind| RecordError { line, kind });
            return Some(result);
        }
    }
}

fn header_columns(header: &[&str], descriptor: &StreamDescriptor) -> Result<(Vec<usize>, usize), RecordErrorKind> {
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| RecordErrorKind::Undecodable(format!("header lacks column {name}")))
    };
    let mut cols = vec![find("subject_id")?, find("timestamp")?];
    for f in &descriptor.fields {
        cols.push(find(&f.name)?);
    }
    for h in header {
        let h = h.trim();
        if h != "stream_id" && !RESERVED.contains(&h) && descriptor.field_index(h).is_none() {
            return Err(RecordErrorKind::Undecodable(format!("header has unknown column {h}")));
        }
    }
    Ok((cols, header.len()))
}

enum FieldText<'a> {
    Text(&'a str),
    Json(serde_json::Value),
}

fn build_record<'t>(
    descriptor: &StreamDescriptor,
    stream_id: &Arc<str>,
    subject: &str,
    timestamp: Result<Timestamp, String>,
    mut field: impl FnMut(usize) -> Result<FieldText<'t>, RecordErrorKind>,
) -> Result<StreamRecord, RecordErrorKind> {
    let subject = subject.trim();
    if subject.is_empty() {
        return Err(RecordErrorKind::MissingField("subject_id".into()));
    }
    let timestamp = timestamp.map_err(RecordErrorKind::BadTimestamp)?;
    let mut payload = Vec::with_capacity(descriptor.fields.len());
    for (i, def) in descriptor.fields.iter().enumerate() {
        let coerced = match field(i)? {
            FieldText::Text(text) => Value::parse_as(text, &def.datatype),
            FieldText::Json(json) => json_value(json, &def.datatype),
        };
        payload.push(coerced.map_err(|e| RecordErrorKind::Coercion {
            field: def.name.clone(),
            message: e.to_string(),
        })?);
    }
    Ok(StreamRecord {
        stream_id: Arc::clone(stream_id),
        subject_id: subject.to_string(),
        timestamp,
        payload,
    })
}

fn json_value(json: serde_json::Value, datatype: &Datatype) -> Result<Value, crate::value::CoerceError> {
    use serde_json::Value as J;
    let v = match json {
        J::String(s) => return Value::parse_as(&s, datatype),
        J::Bool(b) => Value::Boolean(b),
        J::Number(n) => match n.as_i64() {
            Some(i) => Value::Integer(i),
            None => Value::Decimal(n.as_f64().unwrap_or(f64::NAN)),
        },
        other => {
            return Err(crate::value::CoerceError::Unparseable {
                text: other.to_string(),
                datatype: datatype.to_string(),
            })
        }
    };
    v.coerce(datatype)
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<StreamRecord, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match self.source {
            Source::Csv { .. } => self.next_csv(),
            Source::Jsonl { .. } => self.next_jsonl(),
        };
        match &item {
            None => self.done = true,
            Some(Ok(_)) => self.stats.good += 1,
            Some(Err(e)) => {
                self.stats.bad += 1;
                if e.is_fatal() {
                    self.done = true;
                }
            }
        }
        item
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub origin: Timestamp,
    pub duration_s: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WindowError {
    #[error("window duration must be positive")]
    ZeroDuration,
    #[error("{t} precedes the window origin {origin}")]
    BeforeOrigin { t: Timestamp, origin: Timestamp },
}

impl WindowSpec {
    pub fn new(origin: Timestamp, duration_s: u64) -> Result<Self, WindowError> {
        if duration_s == 0 {
            return Err(WindowError::ZeroDuration);
        }
        Ok(WindowSpec { origin, duration_s })
    }

    /// Half-hour windows starting at midnight UTC of `first`'s day.
    pub fn day_aligned(first: Timestamp) -> Self {
        WindowSpec {
            origin: first.floor_day(),
            duration_s: DEFAULT_WINDOW_S,
        }
    }

    pub fn duration_ms(&self) -> i64 {
        self.duration_s as i64 * 1000
    }

    pub fn window(&self, index: u64) -> TimeWindow {
        TimeWindow {
            start: self.origin.add_millis(index as i64 * self.duration_ms()),
            duration_s: self.duration_s,
            index,
        }
    }
}

/// `i` such that `origin + i·duration <= t < origin + (i+1)·duration`.
pub fn window_index(t: Timestamp, spec: &WindowSpec) -> Result<u64, WindowError> {
    if spec.duration_s == 0 {
        return Err(WindowError::ZeroDuration);
    }
    if t < spec.origin {
        return Err(WindowError::BeforeOrigin { t, origin: spec.origin });
    }
    Ok(((t.0 - spec.origin.0) / spec.duration_ms()) as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowGroup {
    pub subject_id: String,
    pub window: TimeWindow,
    pub records: Vec<StreamRecord>,
}

impl WindowGroup {
    pub fn index(&self) -> u64 {
        self.window.index
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum QuarantineReason {
    BeforeOrigin,
    Late { index: u64, watermark: u64, horizon: u64 },
}

impl fmt::Display for QuarantineReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuarantineReason::BeforeOrigin => f.write_str("before window origin"),
            QuarantineReason::Late {
                index,
                watermark,
                horizon,
            } => write!(
                f,
                "window {index} arrived after window {watermark}, beyond the {horizon}-window lateness horizon"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quarantined {
    pub record: StreamRecord,
    pub reason: QuarantineReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assigned {
    Group(WindowGroup),
    Quarantined(Quarantined),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssignStats {
    pub assigned: u64,
    pub quarantined: u64,
    pub in_flight: usize,
    pub peak_in_flight: usize,
}

#[derive(Default)]
struct SubjectState {
    pending: BTreeMap<u64, Vec<StreamRecord>>,
    watermark: Option<u64>,
    next_emit: Option<u64>,
}

type Observer = Box<dyn FnMut(usize) + Send>;

/// Push-based tumbling-window grouper with bounded lateness.
///
/// Per subject, the watermark is the highest window index seen. A window is
/// emitted once it falls more than `horizon` windows behind the watermark,
/// so at most `horizon + 1` windows per subject are held at any time.
/// Windows between a subject's first and last observed index are emitted
/// even when empty, in strictly increasing order.
pub struct WindowAssigner {
    spec: WindowSpec,
    horizon: u64,
    subjects: BTreeMap<String, SubjectState>,
    out: VecDeque<Assigned>,
    stats: AssignStats,
    observer: Option<Observer>,
}

impl WindowAssigner {
    pub fn new(spec: WindowSpec, horizon: u64) -> Self {
        WindowAssigner {
            spec,
            horizon,
            subjects: BTreeMap::new(),
            out: VecDeque::new(),
            stats: AssignStats::default(),
            observer: None,
        }
    }

    /// Called with the in-flight record count after every push.
    pub fn with_observer(mut self, observer: impl FnMut(usize) + Send + 'static) -> Self {
        self.observer = Some(Box::new(observer));
        self
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn stats(&self) -> AssignStats {
        self.stats
    }

    pub fn push(&mut self, record: StreamRecord) {
        let index = match window_index(record.timestamp, &self.spec) {
            Ok(i) => i,
            Err(_) => {
                self.quarantine(record, QuarantineReason::BeforeOrigin);
                return;
            }
        };
        let subject = record.subject_id.clone();
        let state = self.subjects.entry(subject.clone()).or_default();
        let watermark = state.watermark.map_or(index, |w| w.max(index));
        let threshold = watermark.saturating_sub(self.horizon);
        let late = index < threshold || state.next_emit.is_some_and(|n| index < n);
        if late {
            let reason = QuarantineReason::Late {
                index,
                watermark,
                horizon: self.horizon,
            };
            self.quarantine(record, reason);
            return;
        }
        state.watermark = Some(watermark);
        // Close windows first: the new record always lands at or above the threshold.
        emit_until(&subject, state, threshold, &self.spec, &mut self.out, &mut self.stats);
        state.pending.entry(index).or_default().push(record);
        self.stats.in_flight += 1;
        self.stats.assigned += 1;
        self.stats.peak_in_flight = self.stats.peak_in_flight.max(self.stats.in_flight);
        if let Some(obs) = self.observer.as_mut() {
            obs(self.stats.in_flight);
        }
    }

    fn quarantine(&mut self, record: StreamRecord, reason: QuarantineReason) {
        self.stats.quarantined += 1;
        self.out
            .push_back(Assigned::Quarantined(Quarantined { record, reason }));
    }

    /// Flushes every pending window, subjects in lexicographic order.
    pub fn finish(&mut self) {
        let spec = self.spec;
        for (subject, state) in self.subjects.iter_mut() {
            let Some(watermark) = state.watermark else { continue };
            emit_until(subject, state, watermark + 1, &spec, &mut self.out, &mut self.stats);
        }
    }

    pub fn pop(&mut self) -> Option<Assigned> {
        self.out.pop_front()
    }

    pub fn drain(&mut self) -> impl Iterator<Item = Assigned> + '_ {
        self.out.drain(..)
    }
}

fn emit_until(
    subject: &str,
    state: &mut SubjectState,
    threshold: u64,
    spec: &WindowSpec,
    out: &mut VecDeque<Assigned>,
    stats: &mut AssignStats,
) {
    let Some(mut next) = state.next_emit.or_else(|| state.pending.keys().next().copied()) else {
        return;
    };
    if next >= threshold {
        return;
    }
    while next < threshold {
        let records = state.pending.remove(&next).unwrap_or_default();
        stats.in_flight -= records.len();
        out.push_back(Assigned::Group(WindowGroup {
            subject_id: subject.to_string(),
            window: spec.window(next),
            records,
        }));
        next += 1;
    }
    state.next_emit = Some(next);
}

/// Iterator form of [`WindowAssigner`].
pub struct WindowAssign<I> {
    records: I,
    assigner: WindowAssigner,
    finished: bool,
}

pub fn window_assign<I: Iterator<Item = StreamRecord>>(records: I, spec: WindowSpec, horizon: u64) -> WindowAssign<I> {
    WindowAssign {
        records,
        assigner: WindowAssigner::new(spec, horizon),
        finished: false,
    }
}

impl<I> WindowAssign<I> {
    pub fn with_observer(mut self, observer: impl FnMut(usize) + Send + 'static) -> Self {
        self.assigner = self.assigner.with_observer(observer);
        self
    }

    pub fn stats(&self) -> AssignStats {
        self.assigner.stats()
    }
}

impl<I: Iterator<Item = StreamRecord>> Iterator for WindowAssign<I> {
    type Item = Assigned;

    fn next(&mut self) -> Option<Assigned> {
        loop {
            if let Some(item) = self.assigner.pop() {
                return Some(item);
            }
            if self.finished {
                return None;
            }
            match self.records.next() {
                Some(r) => self.assigner.push(r),
                None => {
                    self.assigner.finish();
                    self.finished = true;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectCoverage {
    pub total_windows: u64,
    pub empty_windows: u64,
    pub records: u64,
    pub quarantined: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub subjects: BTreeMap<String, SubjectCoverage>,
}

impl CoverageReport {
    pub fn observe(&mut self, item: &Assigned) {
        match item {
            Assigned::Group(g) => {
                let c = self.subjects.entry(g.subject_id.clone()).or_default();
                c.total_windows += 1;
                c.records += g.records.len() as u64;
                if g.records.is_empty() {
                    c.empty_windows += 1;
                }
            }
            Assigned::Quarantined(q) => {
                self.subjects
                    .entry(q.record.subject_id.clone())
                    .or_default()
                    .quarantined += 1;
            }
        }
    }

    pub fn totals(&self) -> SubjectCoverage {
        self.subjects
            .values()
            .fold(SubjectCoverage::default(), |a, c| SubjectCoverage {
                total_windows: a.total_windows + c.total_windows,
                empty_windows: a.empty_windows + c.empty_windows,
                records: a.records + c.records,
                quarantined: a.quarantined + c.quarantined,
            })
    }
}

pub fn coverage_report<'a>(items: impl IntoIterator<Item = &'a Assigned>) -> CoverageReport {
    let mut report = CoverageReport::default();
    for item in items {
        report.observe(item);
    }
    report
}
