//! One situational context: where `me` is, what is happening, who and what
//! is around, and the functions and actions linking them, for one time window.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{Code, Finding, ValidationReport};
use crate::schema::{EtgSchema, Multiplicity, ObjectPropertyKind};
use crate::time::Timestamp;
use crate::value::{CoerceError, Coordinates, Value};

/// Registry identifier of an endurant, `<etype>:<n>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(etype: &str, seq: u64) -> Self {
        EntityId(format!("{etype}:{seq}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Half-open interval `[start, start + duration_s)`; `index` is its position
/// in the subject's window sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Timestamp,
    pub duration_s: u64,
    pub index: u64,
}

impl TimeWindow {
    pub fn end(&self) -> Timestamp {
        self.start.add_millis(self.duration_ms())
    }

    pub fn duration_ms(&self) -> i64 {
        self.duration_s as i64 * 1000
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end()
    }

    pub fn intersects(&self, start: Timestamp, end: Timestamp) -> bool {
        start < self.end() && self.start < end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationNode {
    pub entity_id: EntityId,
    pub etype: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Coordinates>,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventNode {
    pub event_id: String,
    pub label: String,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    /// Only present when an input claimed this event is part of another one,
    /// which sub-events may not be.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Me,
    Person,
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericObjectRef {
    pub entity_id: EntityId,
    pub etype: String,
    pub label: String,
    pub role: Role,
}

/// Directed role `subject` plays towards `object`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionAssertion {
    pub subject: EntityId,
    pub object: EntityId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionAssertion {
    pub subject: EntityId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<EntityId>,
    pub name: String,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyAssertion {
    /// Registry id of an endurant, or the local id of an event.
    pub entity: String,
    pub etype: String,
    pub property: String,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextInstance {
    pub subject_id: String,
    pub window: TimeWindow,
    pub locations: Vec<LocationNode>,
    pub events: Vec<EventNode>,
    /// `me` (role Me) and the persons present.
    pub persons: Vec<GenericObjectRef>,
    pub objects: Vec<GenericObjectRef>,
    pub functions: Vec<FunctionAssertion>,
    pub actions: Vec<ActionAssertion>,
    pub assertions: Vec<PropertyAssertion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextClass {
    Static,
    Dynamic,
    Unlocated,
}

impl ContextClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextClass::Static => "static",
            ContextClass::Dynamic => "dynamic",
            ContextClass::Unlocated => "unlocated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventClass {
    Simple,
    Complex,
    NoEvent,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("function {name}({subject}, {object}) is not asserted in context {context}")]
    FunctionNotInContext {
        name: String,
        subject: EntityId,
        object: EntityId,
        context: String,
    },
}

impl ContextInstance {
    /// A window with no evidence: `me` only, no location, no event.
    pub fn unknown(subject_id: &str, window: TimeWindow, me: GenericObjectRef) -> Self {
        ContextInstance {
            subject_id: subject_id.to_string(),
            window,
            locations: Vec::new(),
            events: Vec::new(),
            persons: vec![me],
            objects: Vec::new(),
            functions: Vec::new(),
            actions: Vec::new(),
            assertions: Vec::new(),
        }
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.subject_id, self.window.index)
    }

    pub fn me(&self) -> Option<&GenericObjectRef> {
        self.persons.iter().find(|p| p.role == Role::Me)
    }

    /// Persons other than `me`.
    pub fn others(&self) -> impl Iterator<Item = &GenericObjectRef> {
        self.persons.iter().filter(|p| p.role != Role::Me)
    }

    pub fn is_unknown(&self) -> bool {
        self.locations.is_empty()
            && self.events.is_empty()
            && self.objects.is_empty()
            && self.others().next().is_none()
            && self.functions.is_empty()
            && self.actions.is_empty()
            && self.assertions.is_empty()
    }
}

pub fn classify_context(ctx: &ContextInstance) -> ContextClass {
    let mut ids = ctx.locations.iter().map(|l| &l.entity_id);
    match ids.next() {
        None => ContextClass::Unlocated,
        Some(first) => {
            if ids.all(|id| id == first) {
                ContextClass::Static
            } else {
                ContextClass::Dynamic
            }
        }
    }
}

/// Simple when every sub-event carries the same label and together they
/// cover one unbroken span; complex otherwise.
pub fn classify_event(ctx: &ContextInstance) -> EventClass {
    let Some(first) = ctx.events.first() else {
        return EventClass::NoEvent;
    };
    if ctx.events.iter().any(|e| e.label != first.label) {
        return EventClass::Complex;
    }
    let mut spans: Vec<(Timestamp, Timestamp)> = ctx.events.iter().map(|e| (e.start_time, e.end_time)).collect();
    spans.sort();
    let mut reach = spans[0].1;
    for &(start, end) in &spans[1..] {
        if start > reach {
            return EventClass::Complex;
        }
        reach = reach.max(end);
    }
    EventClass::Simple
}

/// Actions between the function's subject and object, in time order.
pub fn function_actions<'a>(
    ctx: &'a ContextInstance,
    f: &FunctionAssertion,
) -> Result<Vec<&'a ActionAssertion>, ContextError> {
    if !ctx.functions.contains(f) {
        return Err(ContextError::FunctionNotInContext {
            name: f.name.clone(),
            subject: f.subject.clone(),
            object: f.object.clone(),
            context: ctx.id(),
        });
    }
    let mut actions: Vec<&ActionAssertion> = ctx
        .actions
        .iter()
        .filter(|a| a.subject == f.subject && a.object.as_ref() == Some(&f.object))
        .collect();
    actions.sort_by_key(|a| a.at);
    Ok(actions)
}

pub fn validate_context(ctx: &ContextInstance, schema: &EtgSchema) -> ValidationReport {
    let mut report = ValidationReport::default();
    let cid = ctx.id();
    let mut finding = |code: Code, message: String| report.push(Finding::new(code, cid.clone(), message));

    if ctx.window.duration_s == 0 {
        finding(Code::ZeroDuration, "window has zero duration".into());
    }

    let me_count = ctx
        .persons
        .iter()
        .chain(&ctx.objects)
        .filter(|g| g.role == Role::Me)
        .count();
    match me_count {
        0 => finding(Code::MissingMe, "no generic object with role me".into()),
        1 => {}
        n => finding(Code::DuplicateMe, format!("{n} generic objects with role me")),
    }

    let mut orders: Vec<u32> = ctx.locations.iter().map(|l| l.order).collect();
    orders.sort_unstable();
    if orders.iter().enumerate().any(|(i, &o)| o as usize != i) {
        finding(
            Code::BadLocationOrder,
            format!("sub-location orders {orders:?} are not 0..{}", orders.len()),
        );
    }

    let mut event_ids = HashSet::new();
    for e in &ctx.events {
        if !event_ids.insert(e.event_id.as_str()) {
            finding(Code::DuplicateEventId, format!("event id {} repeated", e.event_id));
        }
        if e.end_time <= e.start_time {
            finding(
                Code::EmptyEventSpan,
                format!(
                    "event {} ends at {} before it starts at {}",
                    e.event_id, e.end_time, e.start_time
                ),
            );
        } else if !ctx.window.intersects(e.start_time, e.end_time) {
            finding(
                Code::EventOutsideWindow,
                format!("event {} lies outside the window", e.event_id),
            );
        }
        if let Some(parent) = &e.parent {
            finding(
                Code::EventNesting,
                format!("event {} declared part of {parent}; sub-events cannot nest", e.event_id),
            );
        }
    }

    let parts: HashSet<&EntityId> = ctx
        .persons
        .iter()
        .chain(&ctx.objects)
        .map(|g| &g.entity_id)
        .chain(ctx.locations.iter().map(|l| &l.entity_id))
        .collect();
    for part in ctx.persons.iter().chain(&ctx.objects) {
        if !schema.contains(&part.etype) {
            finding(
                Code::UnknownEtype,
                format!("{} has undeclared etype {}", part.entity_id, part.etype),
            );
        }
    }
    for l in &ctx.locations {
        if !schema.contains(&l.etype) {
            finding(
                Code::UnknownEtype,
                format!("{} has undeclared etype {}", l.entity_id, l.etype),
            );
        }
    }

    for f in &ctx.functions {
        if f.subject == f.object {
            finding(
                Code::FunctionSelfLoop,
                format!("function {} relates {} to itself", f.name, f.subject),
            );
        }
        for end in [&f.subject, &f.object] {
            if !parts.contains(end) {
                finding(
                    Code::DanglingReference,
                    format!("function {} refers to {end}, which is not part of the context", f.name),
                );
            }
        }
    }

    for a in &ctx.actions {
        if !ctx.window.contains(a.at) {
            finding(
                Code::ActionOutsideWindow,
                format!("action {} at {} is outside the window", a.name, a.at),
            );
        }
        for end in std::iter::once(&a.subject).chain(a.object.as_ref()) {
            if !parts.contains(end) {
                finding(
                    Code::DanglingReference,
                    format!("action {} refers to {end}, which is not part of the context", a.name),
                );
            }
        }
    }

    let mut single_counts: HashMap<(&str, &str), usize> = HashMap::new();
    for pa in &ctx.assertions {
        let known_entity = parts.iter().any(|id| id.as_str() == pa.entity) || event_ids.contains(pa.entity.as_str());
        if !known_entity {
            finding(
                Code::DanglingReference,
                format!(
                    "assertion {} on {}, which is not part of the context",
                    pa.property, pa.entity
                ),
            );
        }
        if !schema.contains(&pa.etype) {
            finding(
                Code::UnknownEtype,
                format!("assertion on undeclared etype {}", pa.etype),
            );
            continue;
        }
        let Some(def) = schema.property(&pa.etype, &pa.property) else {
            finding(
                Code::UnknownProperty,
                format!("{} has no property {}", pa.etype, pa.property),
            );
            continue;
        };
        match pa.value.conforms_to(&def.datatype) {
            Ok(()) => {}
            Err(CoerceError::EnumViolation { value, datatype }) => finding(
                Code::EnumViolation,
                format!("{}.{} = {value:?} is not in {datatype}", pa.etype, pa.property),
            ),
            Err(e) => finding(Code::DatatypeMismatch, format!("{}.{}: {e}", pa.etype, pa.property)),
        }
        if def.multiplicity == Multiplicity::Single {
            *single_counts
                .entry((pa.entity.as_str(), pa.property.as_str()))
                .or_default() += 1;
        }
    }
    let mut over: Vec<_> = single_counts.into_iter().filter(|(_, n)| *n > 1).collect();
    over.sort();
    for ((entity, property), n) in over {
        finding(
            Code::MultiplicityViolation,
            format!("single-valued {property} asserted {n} times on {entity}"),
        );
    }

    if let Some(me) = ctx.me() {
        for (op, count) in link_counts(ctx, schema, &me.etype) {
            if !op.cardinality.admits(count) {
                finding(
                    Code::CardinalityOverflow,
                    format!("{} links {count} entities, cardinality {}", op.name, op.cardinality),
                );
            }
        }
    }

    report
}

/// For each structural object property whose domain admits `me`, the number
/// of distinct context parts its range admits.
pub(crate) fn link_counts<'s>(
    ctx: &ContextInstance,
    schema: &'s EtgSchema,
    me_etype: &str,
) -> Vec<(&'s crate::schema::ObjectPropertyDef, usize)> {
    let sub = |a: &str, b: &str| schema.is_subtype(a, b).unwrap_or(false);
    schema
        .object_properties()
        .iter()
        .filter(|op| op.kind == ObjectPropertyKind::Structural && sub(me_etype, &op.domain))
        .map(|op| {
            let ids: HashSet<&EntityId> = ctx
                .others()
                .chain(&ctx.objects)
                .filter(|g| g.role != Role::Me)
                .map(|g| (&g.entity_id, g.etype.as_str()))
                .chain(ctx.locations.iter().map(|l| (&l.entity_id, l.etype.as_str())))
                .filter(|(_, etype)| sub(etype, &op.range))
                .map(|(id, _)| id)
                .collect();
            (op, ids.len())
        })
        .collect()
}
