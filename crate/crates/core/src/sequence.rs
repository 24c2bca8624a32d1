//! Life sequences: ordered context references for one subject, predicate
//! selection over them, and habit detection by calendar-bucket support.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use chrono::Weekday;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{classify_context, ContextClass, ContextInstance};
use crate::populate::normalize_label;
use crate::store::ContextStore;
use crate::time::MS_PER_DAY;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("window index {0} appears twice")]
    DuplicateIndex(u64),
    #[error("window index {index} follows {previous}; input must be in window order")]
    OutOfOrder { index: u64, previous: u64 },
    #[error("context {0} is not in the store")]
    Dangling(String),
    #[error("context {found} does not belong to subject {expected}")]
    SubjectMismatch { expected: String, found: String },
    #[error("min_support must be at least 2, got {0}")]
    MinSupport(u64),
    #[error("window {index} starts {offset_ms} ms into its day; time-of-day slots need day-aligned windows")]
    NotDayAligned { index: u64, offset_ms: i64 },
    #[error("windows of {0} s do not divide a day")]
    UnevenDay(u64),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextRef {
    pub index: u64,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifeSequence {
    pub subject_id: String,
    pub refs: Vec<ContextRef>,
}

impl LifeSequence {
    pub fn empty(subject_id: &str) -> Self {
        LifeSequence {
            subject_id: subject_id.to_string(),
            refs: Vec::new(),
        }
    }

    /// Assumes `contexts` belong to `subject_id` and are in window order.
    pub fn from_contexts(subject_id: &str, contexts: &[ContextInstance]) -> Self {
        LifeSequence {
            subject_id: subject_id.to_string(),
            refs: contexts
                .iter()
                .map(|c| ContextRef {
                    index: c.window.index,
                    id: c.id(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    /// True iff the window indices are consecutive.
    pub fn contiguous(&self) -> bool {
        self.refs.windows(2).all(|w| w[1].index == w[0].index + 1)
    }

    pub fn indices(&self) -> Vec<u64> {
        self.refs.iter().map(|r| r.index).collect()
    }

    fn resolve<'s>(&self, store: &'s ContextStore) -> Result<Vec<&'s ContextInstance>, SequenceError> {
        self.refs
            .iter()
            .map(|r| {
                store
                    .get(&self.subject_id, r.index)
                    .filter(|c| c.id() == r.id)
                    .ok_or_else(|| SequenceError::Dangling(r.id.clone()))
            })
            .collect()
    }
}

/// Builds `subject_id`'s sequence; contexts of other subjects are ignored.
pub fn build_sequence<'a>(
    contexts: impl IntoIterator<Item = &'a ContextInstance>,
    subject_id: &str,
) -> Result<LifeSequence, SequenceError> {
    let mut seq = LifeSequence::empty(subject_id);
    for c in contexts {
        if c.subject_id != subject_id {
            continue;
        }
        let index = c.window.index;
        if let Some(prev) = seq.refs.last() {
            if index == prev.index {
                return Err(SequenceError::DuplicateIndex(index));
            }
            if index < prev.index {
                return Err(SequenceError::OutOfOrder {
                    index,
                    previous: prev.index,
                });
            }
        }
        seq.refs.push(ContextRef { index, id: c.id() });
    }
    Ok(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Location,
    Event,
    Class,
    Person,
    Weekday,
    Slot,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Location,
        Field::Event,
        Field::Class,
        Field::Person,
        Field::Weekday,
        Field::Slot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Location => "location",
            Field::Event => "event",
            Field::Class => "class",
            Field::Person => "person",
            Field::Weekday => "weekday",
            Field::Slot => "slot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    True,
    False,
    /// `field in (values)`; `field=value` is the one-value case. Values are
    /// stored normalized.
    In(Field, BTreeSet<String>),
}

/// A conjunction of atoms; the empty conjunction is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextPredicate {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message} at column {}", .position + 1)]
pub struct PredicateError {
    /// Byte offset into the predicate text.
    pub position: usize,
    pub message: String,
}

impl PredicateError {
    /// The input with a caret under the offending position.
    pub fn render(&self, input: &str) -> String {
        let col = input[..self.position.min(input.len())].chars().count();
        format!("{input}\n{}^ {}", " ".repeat(col), self.message)
    }
}

const WEEKDAYS: [(&str, Weekday); 7] = [
    ("mon", Weekday::Mon),
    ("tue", Weekday::Tue),
    ("wed", Weekday::Wed),
    ("thu", Weekday::Thu),
    ("fri", Weekday::Fri),
    ("sat", Weekday::Sat),
    ("sun", Weekday::Sun),
];

fn weekday_name(d: Weekday) -> &'static str {
    WEEKDAYS[d.num_days_from_monday() as usize].0
}

fn parse_weekday(s: &str) -> Option<&'static str> {
    let s = s.to_ascii_lowercase();
    WEEKDAYS
        .iter()
        .find(|(short, d)| s == *short || s == format!("{d:?}").to_ascii_lowercase() || s == full_name(*d))
        .map(|(short, _)| *short)
}

fn full_name(d: Weekday) -> &'static str {
    match d {
        Weekday::Mon => "monday",
        Weekday::Tue => "tuesday",
        Weekday::Wed => "wednesday",
        Weekday::Thu => "thursday",
        Weekday::Fri => "friday",
        Weekday::Sat => "saturday",
        Weekday::Sun => "sunday",
    }
}

/// Time-of-day slot of a context's window, counted from midnight UTC.
pub fn slot_of(ctx: &ContextInstance) -> u64 {
    (ctx.window.start.ms_of_day() / ctx.window.duration_ms().max(1)) as u64
}

pub fn weekday_of(ctx: &ContextInstance) -> &'static str {
    weekday_name(ctx.window.start.weekday())
}

impl ContextPredicate {
    pub fn always() -> Self {
        ContextPredicate::default()
    }

    pub fn never() -> Self {
        ContextPredicate {
            atoms: vec![Atom::False],
        }
    }

    pub fn and(&self, other: &ContextPredicate) -> ContextPredicate {
        ContextPredicate {
            atoms: self.atoms.iter().chain(&other.atoms).cloned().collect(),
        }
    }

    pub fn eval(&self, ctx: &ContextInstance) -> bool {
        self.atoms.iter().all(|a| eval_atom(a, ctx))
    }
}

fn eval_atom(atom: &Atom, ctx: &ContextInstance) -> bool {
    let any = |mut labels: Box<dyn Iterator<Item = &String> + '_>, set: &BTreeSet<String>| {
        labels.any(|l| set.contains(&normalize_label(l)))
    };
    match atom {
        Atom::True => true,
        Atom::False => false,
        Atom::In(field, set) => match field {
            Field::Location => any(Box::new(ctx.locations.iter().map(|l| &l.label)), set),
            Field::Event => any(Box::new(ctx.events.iter().map(|e| &e.label)), set),
            Field::Person => {
                (set.contains("*") && ctx.others().next().is_some())
                    || any(Box::new(ctx.others().map(|p| &p.label)), set)
            }
            Field::Class => set.contains(classify_context(ctx).as_str()),
            Field::Weekday => set.contains(weekday_of(ctx)),
            Field::Slot => set.contains(&slot_of(ctx).to_string()),
        },
    }
}

impl fmt::Display for ContextPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            match a {
                Atom::True => f.write_str("true")?,
                Atom::False => f.write_str("false")?,
                Atom::In(field, values) => {
                    let quoted: Vec<String> = values.iter().map(|v| quote(v)).collect();
                    if quoted.len() == 1 {
                        write!(f, "{}={}", field.as_str(), quoted[0])?;
                    } else {
                        write!(f, "{} in ({})", field.as_str(), quoted.join(","))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.chars().any(|c| c.is_whitespace() || "=(),\"".contains(c)) {
        format!("\"{}\"", v.replace('"', "\\\""))
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Eq,
    Open,
    Close,
    Comma,
}

fn tokenize(input: &str) -> Result<Vec<(usize, Tok)>, PredicateError> {
    let mut toks = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '=' | '(' | ')' | ',' => {
                chars.next();
                toks.push((
                    pos,
                    match c {
                        '=' => Tok::Eq,
                        '(' => Tok::Open,
                        ')' => Tok::Close,
                        _ => Tok::Comma,
                    },
                ));
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, e)) => s.push(e),
                            None => break,
                        },
                        Some((_, ch)) => s.push(ch),
                        None => {
                            return Err(PredicateError {
                                position: pos,
                                message: "unterminated quoted value".into(),
                            })
                        }
                    }
                }
                toks.push((pos, Tok::Quoted(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_whitespace() || "=(),\"".contains(ch) {
                        break;
                    }
                    s.push(ch);
                    chars.next();
                }
                toks.push((pos, Tok::Word(s)));
            }
        }
    }
    Ok(toks)
}

impl FromStr for ContextPredicate {
    type Err = PredicateError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let toks = tokenize(input)?;
        let end = input.len();
        let mut i = 0;
        let mut atoms = Vec::new();
        let err = |position: usize, message: String| PredicateError { position, message };
        let pos_at = |i: usize| toks.get(i).map_or(end, |t| t.0);
        loop {
            let Some((pos, tok)) = toks.get(i) else {
                return Err(err(end, "expected a condition".into()));
            };
            let Tok::Word(word) = tok else {
                return Err(err(*pos, "expected a field name, true or false".into()));
            };
            i += 1;
            match word.to_ascii_lowercase().as_str() {
                "true" => atoms.push(Atom::True),
                "false" => atoms.push(Atom::False),
                name => {
                    let field = Field::ALL.into_iter().find(|f| f.as_str() == name).ok_or_else(|| {
                        err(
                            *pos,
                            format!(
                                "unknown field {word:?}; expected one of location, event, class, person, weekday, slot"
                            ),
                        )
                    })?;
                    let mut raw: Vec<(usize, String)> = Vec::new();
                    match toks.get(i) {
                        Some((_, Tok::Eq)) => {
                            i += 1;
                            match toks.get(i) {
                                Some((p, Tok::Word(v) | Tok::Quoted(v))) => raw.push((*p, v.clone())),
                                _ => return Err(err(pos_at(i), "expected a value after '='".into())),
                            }
                            i += 1;
                        }
                        Some((_, Tok::Word(w))) if w.eq_ignore_ascii_case("in") => {
                            i += 1;
                            if !matches!(toks.get(i), Some((_, Tok::Open))) {
                                return Err(err(pos_at(i), "expected '(' after 'in'".into()));
                            }
                            i += 1;
                            loop {
                                match toks.get(i) {
                                    Some((p, Tok::Word(v) | Tok::Quoted(v))) => raw.push((*p, v.clone())),
                                    _ => return Err(err(pos_at(i), "expected a value".into())),
                                }
                                i += 1;
                                match toks.get(i) {
                                    Some((_, Tok::Comma)) => i += 1,
                                    Some((_, Tok::Close)) => {
                                        i += 1;
                                        break;
                                    }
                                    _ => return Err(err(pos_at(i), "expected ',' or ')'".into())),
                                }
                            }
                        }
                        _ => return Err(err(pos_at(i), format!("expected '=' or 'in' after {name}"))),
                    }
                    let mut values = BTreeSet::new();
                    for (p, v) in raw {
                        values.insert(normalize_value(field, &v).map_err(|m| err(p, m))?);
                    }
                    atoms.push(Atom::In(field, values));
                }
            }
            match toks.get(i) {
                None => break,
                Some((_, Tok::Word(w))) if w.eq_ignore_ascii_case("and") => i += 1,
                Some((p, _)) => return Err(err(*p, "expected 'and' or end of predicate".into())),
            }
        }
        Ok(ContextPredicate { atoms })
    }
}

fn normalize_value(field: Field, v: &str) -> Result<String, String> {
    match field {
        Field::Location | Field::Event | Field::Person => {
            let n = normalize_label(v);
            if n.is_empty() {
                Err("empty value".into())
            } else {
                Ok(n)
            }
        }
        Field::Class => {
            let n = v.to_ascii_lowercase();
            [ContextClass::Static, ContextClass::Dynamic, ContextClass::Unlocated]
                .iter()
                .find(|c| c.as_str() == n)
                .map(|c| c.as_str().to_string())
                .ok_or_else(|| format!("class must be static, dynamic or unlocated, not {v:?}"))
        }
        Field::Weekday => parse_weekday(v)
            .map(str::to_string)
            .ok_or_else(|| format!("{v:?} is not a weekday (mon..sun)")),
        Field::Slot => v
            .parse::<u64>()
            .map(|n| n.to_string())
            .map_err(|_| format!("slot must be a non-negative integer, not {v:?}")),
    }
}

pub fn select(
    sequence: &LifeSequence,
    store: &ContextStore,
    p: &ContextPredicate,
) -> Result<LifeSequence, SequenceError> {
    let contexts = sequence.resolve(store)?;
    Ok(LifeSequence {
        subject_id: sequence.subject_id.clone(),
        refs: sequence
            .refs
            .iter()
            .zip(contexts)
            .filter(|(_, c)| p.eval(c))
            .map(|(r, _)| r.clone())
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyFn {
    Location,
    Event,
    LocationEvent,
}

impl FromStr for KeyFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "location" => Ok(KeyFn::Location),
            "event" => Ok(KeyFn::Event),
            "location-event" | "location×event" | "location,event" => Ok(KeyFn::LocationEvent),
            _ => Err(format!("unknown key {s:?}; expected location, event or location-event")),
        }
    }
}

/// `WeekdaySlot` splits the week into Monday–Friday and Saturday–Sunday;
/// `DaySlot` keeps each day of the week separate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucketing {
    WeekdaySlot,
    DaySlot,
    Slot,
}

impl FromStr for Bucketing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weekday-slot" | "weekday×slot" => Ok(Bucketing::WeekdaySlot),
            "day-slot" => Ok(Bucketing::DaySlot),
            "slot" | "slot-only" => Ok(Bucketing::Slot),
            _ => Err(format!(
                "unknown bucketing {s:?}; expected weekday-slot, day-slot or slot"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HabitKey {
    pub locations: Vec<String>,
    pub events: Vec<String>,
}

impl fmt::Display for HabitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "location={{{}}} event={{{}}}",
            self.locations.join(","),
            self.events.join(",")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bucket {
    pub weekdays: Vec<String>,
    pub slot: Option<u64>,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "weekdays={{{}}}", self.weekdays.join(","))?;
        match self.slot {
            Some(s) => write!(f, " slot={s}"),
            None => f.write_str(" slot=*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Habit {
    pub key: HabitKey,
    pub bucket: Bucket,
    pub support: u64,
    pub opportunities: u64,
    /// First and last window index where the key matched in the bucket.
    pub span: (u64, u64),
    pub frequency: f64,
}

impl fmt::Display for Habit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "key: {}; bucket: {}; support={} opportunities={} frequency={:.4} span={}..{}",
            self.key, self.bucket, self.support, self.opportunities, self.frequency, self.span.0, self.span.1
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HabitParams {
    pub min_support: u64,
    pub key_fn: KeyFn,
    pub bucketing: Bucketing,
}

fn sorted_labels<'a>(labels: impl Iterator<Item = &'a String>) -> Vec<String> {
    labels
        .map(|l| normalize_label(l))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// The habit key a context exhibits under `key_fn`, if any.
pub fn habit_key(ctx: &ContextInstance, key_fn: KeyFn) -> Option<HabitKey> {
    let locations = sorted_labels(ctx.locations.iter().map(|l| &l.label));
    let events = sorted_labels(ctx.events.iter().map(|e| &e.label));
    let key = match key_fn {
        KeyFn::Location => HabitKey {
            locations,
            events: Vec::new(),
        },
        KeyFn::Event => HabitKey {
            locations: Vec::new(),
            events,
        },
        KeyFn::LocationEvent => HabitKey { locations, events },
    };
    let complete = match key_fn {
        KeyFn::Location => !key.locations.is_empty(),
        KeyFn::Event => !key.events.is_empty(),
        KeyFn::LocationEvent => !key.locations.is_empty() && !key.events.is_empty(),
    };
    complete.then_some(key)
}

/// The calendar bucket of a context; fails unless windows are day-aligned.
pub fn bucket_of(ctx: &ContextInstance, bucketing: Bucketing) -> Result<Bucket, SequenceError> {
    let dur = ctx.window.duration_ms();
    if dur <= 0 || MS_PER_DAY % dur != 0 {
        return Err(SequenceError::UnevenDay(ctx.window.duration_s));
    }
    let offset = ctx.window.start.ms_of_day() % dur;
    if offset != 0 {
        return Err(SequenceError::NotDayAligned {
            index: ctx.window.index,
            offset_ms: offset,
        });
    }
    let day = ctx.window.start.weekday();
    let weekdays: Vec<String> = match bucketing {
        Bucketing::WeekdaySlot => {
            let weekend = matches!(day, Weekday::Sat | Weekday::Sun);
            WEEKDAYS
                .iter()
                .filter(|(_, d)| matches!(d, Weekday::Sat | Weekday::Sun) == weekend)
                .map(|(s, _)| s.to_string())
                .collect()
        }
        Bucketing::DaySlot => vec![weekday_name(day).to_string()],
        Bucketing::Slot => WEEKDAYS.iter().map(|(s, _)| s.to_string()).collect(),
    };
    Ok(Bucket {
        weekdays,
        slot: Some(slot_of(ctx)),
    })
}

pub fn detect_habits(
    sequence: &LifeSequence,
    store: &ContextStore,
    params: &HabitParams,
) -> Result<Vec<Habit>, SequenceError> {
    if params.min_support < 2 {
        return Err(SequenceError::MinSupport(params.min_support));
    }
    let contexts = sequence.resolve(store)?;
    let mut opportunities: HashMap<Bucket, u64> = HashMap::new();
    let mut hits: HashMap<(HabitKey, Bucket), (u64, u64, u64)> = HashMap::new();
    for ctx in contexts {
        let bucket = bucket_of(ctx, params.bucketing)?;
        *opportunities.entry(bucket.clone()).or_default() += 1;
        if let Some(key) = habit_key(ctx, params.key_fn) {
            let idx = ctx.window.index;
            let e = hits.entry((key, bucket)).or_insert((0, idx, idx));
            e.0 += 1;
            e.1 = e.1.min(idx);
            e.2 = e.2.max(idx);
        }
    }
    let mut habits: Vec<Habit> = hits
        .into_iter()
        .filter(|(_, (support, _, _))| *support >= params.min_support)
        .map(|((key, bucket), (support, first, last))| {
            let opp = opportunities[&bucket];
            Habit {
                frequency: support as f64 / opp as f64,
                key,
                bucket,
                support,
                opportunities: opp,
                span: (first, last),
            }
        })
        .collect();
    habits.sort_by(|a, b| {
        b.frequency
            .total_cmp(&a.frequency)
            .then_with(|| a.key.cmp(&b.key))
            .then_with(|| a.bucket.cmp(&b.bucket))
    });
    Ok(habits)
}

/// Writes one JSON object per context, in sequence order. Returns the number
/// of bytes written.
pub fn export_sequence<W: Write>(
    sequence: &LifeSequence,
    store: &ContextStore,
    mut sink: W,
) -> Result<u64, SequenceError> {
    let mut bytes = 0u64;
    for ctx in sequence.resolve(store)? {
        let mut line = serde_json::to_string(ctx).map_err(|e| SequenceError::Io(e.into()))?;
        line.push('\n');
        sink.write_all(line.as_bytes())?;
        bytes += line.len() as u64;
    }
    Ok(bytes)
}

/// Reads contexts written by [`export_sequence`]; blank lines are skipped.
pub fn import_contexts<R: BufRead>(source: R) -> Result<Vec<ContextInstance>, SequenceError> {
    let mut out = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx: ContextInstance = serde_json::from_str(&line).map_err(|e| SequenceError::Parse {
            line: n as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(ctx);
    }
    Ok(out)
}

/// Reads an exported sequence back into a sequence and a store holding its
/// contexts.
pub fn import_sequence<R: BufRead>(source: R) -> Result<(LifeSequence, ContextStore), SequenceError> {
    let contexts = import_contexts(source)?;
    let subject = contexts.first().map(|c| c.subject_id.clone()).unwrap_or_default();
    if let Some(other) = contexts.iter().find(|c| c.subject_id != subject) {
        return Err(SequenceError::SubjectMismatch {
            expected: subject,
            found: other.id(),
        });
    }
    let seq = build_sequence(&contexts, &subject)?;
    let store = ContextStore::from_contexts(contexts).map_err(|e| match e {
        crate::store::StoreError::Duplicate { index, .. } => SequenceError::DuplicateIndex(index),
        other => SequenceError::Io(io::Error::other(other.to_string())),
    })?;
    Ok((seq, store))
}

/// Per-subject summary used by the `stats` command.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceStats {
    pub contexts: u64,
    pub first_index: Option<u64>,
    pub last_index: Option<u64>,
    pub contiguous: bool,
    pub unknown: u64,
    pub classes: BTreeMap<String, u64>,
    pub distinct_locations: u64,
    pub distinct_events: u64,
}

pub fn sequence_stats(contexts: &[ContextInstance]) -> SequenceStats {
    let seq = LifeSequence::from_contexts("", contexts);
    let mut classes: BTreeMap<String, u64> = BTreeMap::new();
    let mut locations = BTreeSet::new();
    let mut events = BTreeSet::new();
    for c in contexts {
        *classes.entry(classify_context(c).as_str().to_string()).or_default() += 1;
        locations.extend(c.locations.iter().map(|l| l.entity_id.to_string()));
        events.extend(c.events.iter().map(|e| normalize_label(&e.label)));
    }
    SequenceStats {
        contexts: contexts.len() as u64,
        first_index: contexts.first().map(|c| c.window.index),
        last_index: contexts.last().map(|c| c.window.index),
        contiguous: seq.contiguous(),
        unknown: contexts.iter().filter(|c| c.is_unknown()).count() as u64,
        classes,
        distinct_locations: locations.len() as u64,
        distinct_events: events.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_text_round_trips() {
        for text in [
            "true",
            "false",
            "event=studying and location=office",
            "location in (home,\"university library\") and weekday in (mon,fri)",
            "class=dynamic and person=* and slot in (18,19)",
        ] {
            let p: ContextPredicate = text.parse().unwrap();
            let again: ContextPredicate = p.to_string().parse().unwrap();
            assert_eq!(p, again, "{text}");
        }
    }

    #[test]
    fn predicate_values_are_normalized() {
        let p: ContextPredicate = "Location=\"  University   LIBRARY\" and weekday=Monday and class=Static"
            .parse()
            .unwrap();
        assert_eq!(
            p.atoms,
            vec![
                Atom::In(Field::Location, ["university library".to_string()].into()),
                Atom::In(Field::Weekday, ["mon".to_string()].into()),
                Atom::In(Field::Class, ["static".to_string()].into()),
            ]
        );
    }

    #[test]
    fn predicate_errors_point_at_the_problem() {
        let cases = [
            ("", 0),
            ("event=", 6),
            ("colour=red", 0),
            ("event=a or location=b", 8),
            ("slot=x", 5),
            ("weekday in (mon,funday)", 16),
            ("location in (a,b", 16),
            ("event=\"open", 6),
            ("class=moving", 6),
            ("and", 0),
        ];
        for (text, pos) in cases {
            let e = text.parse::<ContextPredicate>().unwrap_err();
            assert_eq!(e.position, pos, "{text}: {e}");
        }
        let e = "event=a or b".parse::<ContextPredicate>().unwrap_err();
        assert_eq!(
            e.render("event=a or b"),
            "event=a or b\n        ^ expected 'and' or end of predicate"
        );
    }

    #[test]
    fn key_and_bucket_names_parse() {
        assert_eq!("location-event".parse::<KeyFn>(), Ok(KeyFn::LocationEvent));
        assert_eq!("weekday-slot".parse::<Bucketing>(), Ok(Bucketing::WeekdaySlot));
        assert!("weekly".parse::<Bucketing>().is_err());
    }
}
