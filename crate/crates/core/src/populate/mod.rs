//! Population of one context per (subject, window) group.
//!
//! Population runs in two phases. `Populator::scan` walks a group in
//! timestamp order and resolves every label it will need in the registry;
//! `Populator::populate_resolved` then builds the context against a registry
//! it only reads. Scanning groups in stream order fixes the id assignment, so
//! the second phase can run on many groups at once.

mod registry;
mod rules;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use registry::{normalize_label, resolve_entity, EntityRegistry, RegistryEntry, RegistryError};
pub use rules::{
    validate_questions, validate_rules, FieldRef, LinkRole, MappingRule, Question, QuestionMap, RuleError, TargetKind,
};

use crate::context::{
    ActionAssertion, ContextInstance, EntityId, EventNode, FunctionAssertion, GenericObjectRef, LocationNode,
    PropertyAssertion, Role, TimeWindow,
};
use crate::ingest::{StreamDescriptor, StreamKind, StreamRecord, WindowGroup};
use crate::report::{Code, Finding};
use crate::schema::{DataPropertyDef, EtgSchema, EtypeCategory, Multiplicity, ObjectPropertyKind};
use crate::time::Timestamp;
use crate::value::{CoerceError, Coordinates, Value};

pub const DEFAULT_ME_ETYPE: &str = "Human";

/// The registry label under which a subject's `me` is recorded.
pub fn me_label(subject_id: &str) -> String {
    format!("@{subject_id}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationAnswerSet {
    pub where_: Option<String>,
    pub doing: Option<String>,
    pub with_whom: Option<Vec<String>>,
    pub mood: Option<Value>,
}

impl AnnotationAnswerSet {
    pub fn is_empty(&self) -> bool {
        self.where_.is_none() && self.doing.is_none() && self.with_whom.is_none() && self.mood.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerConflict {
    pub question: Question,
    pub kept: String,
    pub kept_at: Timestamp,
    pub dropped: String,
    pub dropped_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergedAnswers {
    pub answers: AnnotationAnswerSet,
    /// `(record index, question)` pairs overridden by a later answer.
    pub superseded: BTreeSet<(usize, Question)>,
    pub conflicts: Vec<AnswerConflict>,
}

fn split_labels(text: &str) -> Vec<String> {
    text.split(';')
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Keeps the latest answer to each question; a later record wins ties.
pub fn merge_annotations(
    records: &[StreamRecord],
    descriptors: &HashMap<String, Arc<StreamDescriptor>>,
    questions: &QuestionMap,
) -> MergedAnswers {
    let mut merged = MergedAnswers::default();
    let mut best: BTreeMap<Question, (Timestamp, usize, Value)> = BTreeMap::new();
    for q in Question::ALL {
        let Some(fref) = questions.get(q) else { continue };
        let Some(idx) = descriptors
            .get(&fref.stream_id)
            .and_then(|d| d.field_index(&fref.field))
        else {
            continue;
        };
        for (i, rec) in records.iter().enumerate() {
            if *rec.stream_id != *fref.stream_id {
                continue;
            }
            let Some(value) = rec.payload.get(idx) else { continue };
            let candidate = (rec.timestamp, i, value.clone());
            match best.get(&q) {
                Some(cur) if (cur.0, cur.1) > (candidate.0, candidate.1) => {
                    merged.superseded.insert((i, q));
                    note_conflict(&mut merged.conflicts, q, cur, &candidate);
                }
                Some(cur) => {
                    merged.superseded.insert((cur.1, q));
                    note_conflict(&mut merged.conflicts, q, &candidate, cur);
                    best.insert(q, candidate);
                }
                None => {
                    best.insert(q, candidate);
                }
            }
        }
    }
    for (q, (_, _, value)) in best {
        let label = value.as_label().trim().to_string();
        match q {
            Question::Where => merged.answers.where_ = Some(label),
            Question::Doing => merged.answers.doing = Some(label),
            Question::WithWhom => merged.answers.with_whom = Some(split_labels(&label)),
            Question::Mood => merged.answers.mood = Some(value),
        }
    }
    merged
}

fn note_conflict(
    out: &mut Vec<AnswerConflict>,
    q: Question,
    kept: &(Timestamp, usize, Value),
    dropped: &(Timestamp, usize, Value),
) {
    if kept.2 != dropped.2 {
        out.push(AnswerConflict {
            question: q,
            kept: kept.2.as_label(),
            kept_at: kept.0,
            dropped: dropped.2.as_label(),
            dropped_at: dropped.0,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    Unmapped {
        subject: String,
        window: u64,
        stream: String,
        at: Timestamp,
        reason: String,
    },
    Conflict {
        subject: String,
        window: u64,
        #[serde(flatten)]
        conflict: AnswerConflict,
    },
    Quarantined {
        subject: String,
        window: u64,
        stream: String,
        at: Timestamp,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulateOutput {
    pub context: ContextInstance,
    pub findings: Vec<Finding>,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulateConfig {
    #[serde(default = "default_me_etype")]
    pub me_etype: String,
    #[serde(default)]
    pub questions: QuestionMap,
}

fn default_me_etype() -> String {
    DEFAULT_ME_ETYPE.to_string()
}

impl Default for PopulateConfig {
    fn default() -> Self {
        PopulateConfig {
            me_etype: default_me_etype(),
            questions: QuestionMap::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PopulateError {
    #[error("subject {0} has not been scanned into the registry")]
    Unscanned(String),
    #[error("subject {subject}: window {index} arrived after window {last}")]
    OutOfOrder { subject: String, index: u64, last: u64 },
    #[error("registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
struct CompiledRule {
    rule: MappingRule,
    fields: Vec<usize>,
    category: EtypeCategory,
    property: Option<DataPropertyDef>,
    question: Option<Question>,
    skip: HashSet<String>,
}

impl CompiledRule {
    fn skips(&self, label: &str) -> bool {
        self.skip.contains(&normalize_label(label))
    }

    /// Non-empty labels carried by the rule's field in `rec`.
    fn labels(&self, rec: &StreamRecord) -> Vec<String> {
        let Some(v) = rec.payload.get(self.fields[0]) else {
            return Vec::new();
        };
        let text = v.as_label();
        let labels = if self.rule.target_kind == TargetKind::EntityLink {
            split_labels(&text)
        } else {
            let one = text.split_whitespace().collect::<Vec<_>>().join(" ");
            if one.is_empty() {
                Vec::new()
            } else {
                vec![one]
            }
        };
        labels.into_iter().filter(|l| !self.skips(l)).collect()
    }
}

pub struct Populator<'s> {
    schema: &'s EtgSchema,
    rules: Vec<CompiledRule>,
    by_stream: HashMap<String, Vec<usize>>,
    descriptors: HashMap<String, Arc<StreamDescriptor>>,
    config: PopulateConfig,
    structural: Vec<(String, usize, Option<u32>)>,
}

#[derive(Debug, Clone)]
struct Link {
    role: LinkRole,
    id: EntityId,
    etype: String,
    label: String,
    at: Timestamp,
}

#[derive(Debug, Clone)]
enum Contribution {
    Link(Link),
    AnnotationEvent(String),
    SensorSample(usize, Option<String>, Timestamp),
    Property(usize, Value, Timestamp),
    Function(usize, String, Timestamp),
    Action(usize, String, Timestamp),
}

struct Plan {
    order: Vec<usize>,
    merged: MergedAnswers,
}

impl<'s> Populator<'s> {
    pub fn new(
        schema: &'s EtgSchema,
        rules: &[MappingRule],
        descriptors: HashMap<String, Arc<StreamDescriptor>>,
        config: PopulateConfig,
    ) -> Result<Self, RuleError> {
        validate_rules(rules, schema, &descriptors)?;
        validate_questions(&config.questions, &descriptors)?;
        if schema.category(&config.me_etype) != Some(EtypeCategory::Human) {
            return Err(RuleError::MeEtype(config.me_etype.clone()));
        }
        let mut compiled = Vec::with_capacity(rules.len());
        let mut by_stream: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, rule) in rules.iter().enumerate() {
            let desc = &descriptors[&rule.stream_id];
            let fields = rule
                .fields()
                .iter()
                .map(|f| desc.field_index(f).expect("validated"))
                .collect();
            compiled.push(CompiledRule {
                fields,
                category: schema.category(&rule.target_etype).expect("validated"),
                property: rule
                    .target_property
                    .as_deref()
                    .and_then(|p| schema.property(&rule.target_etype, p).cloned()),
                question: config.questions.question_for(&rule.stream_id, &rule.field),
                skip: rule.skip_values.iter().map(|s| normalize_label(s)).collect(),
                rule: rule.clone(),
            });
            by_stream.entry(rule.stream_id.clone()).or_default().push(i);
        }
        let structural = schema
            .object_properties()
            .iter()
            .enumerate()
            .filter(|(_, op)| {
                op.kind == ObjectPropertyKind::Structural
                    && schema.is_subtype(&config.me_etype, &op.domain).unwrap_or(false)
            })
            .map(|(i, op)| (op.range.clone(), i, op.cardinality.max))
            .collect();
        Ok(Populator {
            schema,
            rules: compiled,
            by_stream,
            descriptors,
            config,
            structural,
        })
    }

    pub fn schema(&self) -> &EtgSchema {
        self.schema
    }

    pub fn config(&self) -> &PopulateConfig {
        &self.config
    }

    fn plan(&self, group: &WindowGroup) -> Plan {
        let mut order: Vec<usize> = (0..group.records.len()).collect();
        order.sort_by_key(|&i| group.records[i].timestamp);
        Plan {
            order,
            merged: merge_annotations(&group.records, &self.descriptors, &self.config.questions),
        }
    }

    fn superseded(plan: &Plan, record: usize, rule: &CompiledRule) -> bool {
        match rule.question {
            Some(Question::Where) | None => false,
            Some(q) => plan.merged.superseded.contains(&(record, q)),
        }
    }

    /// First phase: registers `me` and every label the group links to.
    pub fn scan(&self, group: &WindowGroup, registry: &mut EntityRegistry) -> Result<(), PopulateError> {
        registry.resolve(&me_label(&group.subject_id), &self.config.me_etype, group.window.start)?;
        let plan = self.plan(group);
        for &ri in &plan.order {
            let rec = &group.records[ri];
            let Some(rule_ids) = self.by_stream.get(&*rec.stream_id) else {
                continue;
            };
            for &k in rule_ids {
                let rule = &self.rules[k];
                let registers = matches!(rule.rule.target_kind, TargetKind::EntityLink | TargetKind::EventLabel);
                if !registers || Self::superseded(&plan, ri, rule) {
                    continue;
                }
                for label in rule.labels(rec) {
                    registry.resolve(&label, &rule.rule.target_etype, rec.timestamp)?;
                }
            }
        }
        Ok(())
    }

    /// Scans and populates in one step.
    pub fn populate(
        &self,
        group: &WindowGroup,
        registry: &mut EntityRegistry,
    ) -> Result<PopulateOutput, PopulateError> {
        self.scan(group, registry)?;
        self.populate_resolved(group, registry)
    }

    pub fn me_ref(&self, subject_id: &str, registry: &EntityRegistry) -> Result<GenericObjectRef, PopulateError> {
        let label = me_label(subject_id);
        let entry = registry
            .lookup(&label, &self.config.me_etype)
            .ok_or_else(|| PopulateError::Unscanned(subject_id.to_string()))?;
        Ok(GenericObjectRef {
            entity_id: entry.id.clone(),
            etype: self.config.me_etype.clone(),
            label: entry.canonical.clone(),
            role: Role::Me,
        })
    }

    /// Second phase: builds the context; `registry` must already hold every
    /// label `scan` would register for this group.
    pub fn populate_resolved(
        &self,
        group: &WindowGroup,
        registry: &EntityRegistry,
    ) -> Result<PopulateOutput, PopulateError> {
        let subject = group.subject_id.as_str();
        let window = group.window;
        let me = self.me_ref(subject, registry)?;
        let mut out = PopulateOutput {
            context: ContextInstance::unknown(subject, window, me.clone()),
            findings: Vec::new(),
            log: Vec::new(),
        };
        if group.records.is_empty() {
            return Ok(out);
        }
        let plan = self.plan(group);
        for c in &plan.merged.conflicts {
            out.log.push(LogEntry::Conflict {
                subject: subject.to_string(),
                window: window.index,
                conflict: c.clone(),
            });
        }

        let mut contributions = Vec::new();
        for &ri in &plan.order {
            let rec = &group.records[ri];
            let Some(rule_ids) = self.by_stream.get(&*rec.stream_id) else {
                out.log.push(LogEntry::Unmapped {
                    subject: subject.to_string(),
                    window: window.index,
                    stream: rec.stream_id.to_string(),
                    at: rec.timestamp,
                    reason: "no mapping rule for stream".into(),
                });
                continue;
            };
            match self.contributions(&plan, ri, rec, rule_ids, registry, &window, &mut out) {
                Ok(mut c) => contributions.append(&mut c),
                Err(reason) => out.log.push(LogEntry::Quarantined {
                    subject: subject.to_string(),
                    window: window.index,
                    stream: rec.stream_id.to_string(),
                    at: rec.timestamp,
                    reason,
                }),
            }
        }
        self.assemble(contributions, me, &mut out);
        Ok(out)
    }

    /// What one record adds to the context. An `Err` quarantines the whole
    /// record; its findings are already pushed to `out`.
    #[allow(clippy::too_many_arguments)]
    fn contributions(
        &self,
        plan: &Plan,
        ri: usize,
        rec: &StreamRecord,
        rule_ids: &[usize],
        registry: &EntityRegistry,
        window: &TimeWindow,
        out: &mut PopulateOutput,
    ) -> Result<Vec<Contribution>, String> {
        let mut acc = Vec::new();
        let cid = out.context.id();
        for &k in rule_ids {
            let rule = &self.rules[k];
            if Self::superseded(plan, ri, rule) {
                continue;
            }
            let etype = rule.rule.target_etype.as_str();
            let at = rec.timestamp;
            match rule.rule.target_kind {
                TargetKind::EntityLink => {
                    for label in rule.labels(rec) {
                        let Some(entry) = registry.lookup(&label, etype) else {
                            out.log.push(LogEntry::Unmapped {
                                subject: rec.subject_id.clone(),
                                window: window.index,
                                stream: rec.stream_id.to_string(),
                                at,
                                reason: format!("label {label:?} is not registered under {etype}"),
                            });
                            continue;
                        };
                        acc.push(Contribution::Link(Link {
                            role: rule.rule.link_role.expect("validated"),
                            id: entry.id.clone(),
                            etype: etype.to_string(),
                            label: entry.canonical.clone(),
                            at,
                        }));
                    }
                }
                TargetKind::EventLabel => {
                    let labels: Vec<String> = rule
                        .labels(rec)
                        .into_iter()
                        .map(|l| registry.lookup(&l, etype).map_or(l, |e| e.canonical.clone()))
                        .collect();
                    let sensor = self.descriptors[&rule.rule.stream_id].kind == StreamKind::Sensor;
                    if sensor {
                        acc.push(Contribution::SensorSample(k, labels.into_iter().next(), at));
                    } else {
                        acc.extend(labels.into_iter().map(Contribution::AnnotationEvent));
                    }
                }
                TargetKind::FunctionLabel => {
                    acc.extend(rule.labels(rec).into_iter().map(|l| Contribution::Function(k, l, at)));
                }
                TargetKind::ActionLabel => {
                    acc.extend(rule.labels(rec).into_iter().map(|l| Contribution::Action(k, l, at)));
                }
                TargetKind::DataProperty => {
                    let def = rule.property.as_ref().expect("validated");
                    let raw = if rule.fields.len() > 1 {
                        let num = |i: usize| {
                            rule.fields
                                .get(i)
                                .and_then(|&f| rec.payload.get(f))
                                .and_then(Value::as_f64)
                        };
                        match (num(0), num(1)) {
                            (Some(lat), Some(lon)) => Value::Coordinates(Coordinates {
                                lat,
                                lon,
                                accuracy: num(2),
                            }),
                            _ => {
                                let msg =
                                    format!("{}: coordinate fields {} are not numeric", def.name, rule.rule.field);
                                out.findings
                                    .push(Finding::new(Code::DatatypeMismatch, cid.clone(), msg.clone()));
                                return Err(msg);
                            }
                        }
                    } else {
                        match rec.payload.get(rule.fields[0]) {
                            Some(v) => v.clone(),
                            None => continue,
                        }
                    };
                    if rule.skips(&raw.as_label()) {
                        continue;
                    }
                    let value = match raw.coerce(&def.datatype) {
                        Ok(v) => v.conforms_to(&def.datatype).map(|_| v),
                        Err(e) => Err(e),
                    };
                    match value {
                        Ok(v) => acc.push(Contribution::Property(k, v, at)),
                        Err(e) => {
                            let code = match e {
                                CoerceError::EnumViolation { .. } => Code::EnumViolation,
                                _ => Code::DatatypeMismatch,
                            };
                            let msg = format!("{etype}.{}: {e}", def.name);
                            out.findings.push(Finding::new(code, cid.clone(), msg.clone()));
                            return Err(msg);
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    fn assemble(&self, contributions: Vec<Contribution>, me: GenericObjectRef, out: &mut PopulateOutput) {
        let ctx_id = out.context.id();
        let window = out.context.window;
        let sub = |a: &str, b: &str| self.schema.is_subtype(a, b).unwrap_or(false);

        let mut links: Vec<&Link> = contributions
            .iter()
            .filter_map(|c| match c {
                Contribution::Link(l) => Some(l),
                _ => None,
            })
            .collect();
        links.sort_by(|a, b| (a.at, &a.label).cmp(&(b.at, &b.label)));

        // (entity, etype, label, first evidence) per role, earliest first.
        let mut seen: HashSet<&EntityId> = HashSet::new();
        let mut counts = vec![0u32; self.structural.len()];
        let mut admitted: Vec<&Link> = Vec::new();
        for link in links {
            if link.id == me.entity_id || seen.contains(&link.id) {
                continue;
            }
            let applicable: Vec<usize> = self
                .structural
                .iter()
                .enumerate()
                .filter(|(_, (range, _, _))| sub(&link.etype, range))
                .map(|(j, _)| j)
                .collect();
            let full = applicable
                .iter()
                .find(|&&j| self.structural[j].2.is_some_and(|max| counts[j] >= max));
            if let Some(&j) = full {
                let op = &self.schema.object_properties()[self.structural[j].1];
                out.findings.push(Finding::new(
                    Code::CardinalityOverflow,
                    ctx_id.clone(),
                    format!(
                        "{} admits {}; dropped link to {} ({})",
                        op.name, op.cardinality, link.id, link.label
                    ),
                ));
                continue;
            }
            for j in applicable {
                counts[j] += 1;
            }
            seen.insert(&link.id);
            admitted.push(link);
        }

        let mut locations: Vec<(LocationNode, Timestamp)> = Vec::new();
        let mut persons: Vec<(GenericObjectRef, Timestamp)> = Vec::new();
        let mut objects: Vec<(GenericObjectRef, Timestamp)> = Vec::new();
        for link in admitted {
            match link.role {
                LinkRole::Location => locations.push((
                    LocationNode {
                        entity_id: link.id.clone(),
                        etype: link.etype.clone(),
                        label: link.label.clone(),
                        coordinates: None,
                        order: locations.len() as u32,
                    },
                    link.at,
                )),
                LinkRole::Person | LinkRole::Object => {
                    let (list, role) = if link.role == LinkRole::Person {
                        (&mut persons, Role::Person)
                    } else {
                        (&mut objects, Role::Object)
                    };
                    list.push((
                        GenericObjectRef {
                            entity_id: link.id.clone(),
                            etype: link.etype.clone(),
                            label: link.label.clone(),
                            role,
                        },
                        link.at,
                    ));
                }
            }
        }

        let events = self.events(&contributions, &window);

        let mut assertions: Vec<PropertyAssertion> = Vec::new();
        let mut functions: Vec<FunctionAssertion> = Vec::new();
        let mut actions: Vec<ActionAssertion> = Vec::new();
        let unmapped = |out: &mut PopulateOutput, k: usize, at: Timestamp, what: &str| {
            out.log.push(LogEntry::Unmapped {
                subject: out.context.subject_id.clone(),
                window: window.index,
                stream: self.rules[k].rule.stream_id.clone(),
                at,
                reason: format!("no {} in context to carry {what}", self.rules[k].rule.target_etype),
            });
        };
        for c in &contributions {
            match c {
                Contribution::Property(k, value, at) => {
                    let rule = &self.rules[*k];
                    let def = rule.property.as_ref().expect("validated");
                    let target = rule.rule.target_etype.as_str();
                    let anchor: Option<(String, String)> = match rule.category {
                        EtypeCategory::Event => {
                            active_event(&events, *at).map(|e| (e.event_id.clone(), target.to_string()))
                        }
                        EtypeCategory::Location => pick(
                            locations
                                .iter()
                                .filter(|(l, _)| sub(&l.etype, target))
                                .map(|(l, t)| (l, *t)),
                            *at,
                        )
                        .map(|l| (l.entity_id.to_string(), l.etype.clone())),
                        _ if sub(&me.etype, target) => Some((me.entity_id.to_string(), me.etype.clone())),
                        _ => pick(
                            objects
                                .iter()
                                .chain(&persons)
                                .filter(|(g, _)| sub(&g.etype, target))
                                .map(|(g, t)| (g, *t)),
                            *at,
                        )
                        .map(|g| (g.entity_id.to_string(), g.etype.clone())),
                    };
                    let Some((entity, etype)) = anchor else {
                        unmapped(out, *k, *at, &def.name);
                        continue;
                    };
                    if def.multiplicity == Multiplicity::Single {
                        assertions.retain(|a| !(a.entity == entity && a.property == def.name));
                    }
                    assertions.push(PropertyAssertion {
                        entity,
                        etype,
                        property: def.name.clone(),
                        value: value.clone(),
                        at: Some(*at),
                    });
                }
                Contribution::Function(k, name, at) | Contribution::Action(k, name, at) => {
                    let rule = &self.rules[*k];
                    let target = rule.rule.target_etype.as_str();
                    let object = match rule.category {
                        EtypeCategory::Location => pick(
                            locations
                                .iter()
                                .filter(|(l, _)| sub(&l.etype, target))
                                .map(|(l, t)| (&l.entity_id, *t)),
                            *at,
                        ),
                        _ => pick(
                            persons
                                .iter()
                                .chain(&objects)
                                .filter(|(g, _)| sub(&g.etype, target))
                                .map(|(g, t)| (&g.entity_id, *t)),
                            *at,
                        ),
                    };
                    if let Contribution::Action(..) = c {
                        actions.push(ActionAssertion {
                            subject: me.entity_id.clone(),
                            object: object.cloned(),
                            name: name.clone(),
                            at: *at,
                        });
                    } else if let Some(object) = object {
                        let f = FunctionAssertion {
                            subject: me.entity_id.clone(),
                            object: object.clone(),
                            name: name.clone(),
                        };
                        if !functions.contains(&f) {
                            functions.push(f);
                        }
                    } else {
                        unmapped(out, *k, *at, &format!("function {name}"));
                    }
                }
                _ => {}
            }
        }

        let fixes: Vec<(Timestamp, Coordinates)> = assertions
            .iter()
            .filter(|a| a.entity == me.entity_id.as_str())
            .filter_map(|a| match (&a.value, a.at) {
                (Value::Coordinates(c), Some(t)) => Some((t, *c)),
                _ => None,
            })
            .collect();
        for (loc, first) in &mut locations {
            loc.coordinates = fixes.iter().find(|(t, _)| t >= first).or(fixes.last()).map(|(_, c)| *c);
        }

        let ctx = &mut out.context;
        ctx.locations = locations.into_iter().map(|(l, _)| l).collect();
        ctx.persons.extend(persons.into_iter().map(|(g, _)| g));
        ctx.objects = objects.into_iter().map(|(g, _)| g).collect();
        ctx.events = events;
        ctx.functions = functions;
        ctx.actions = actions;
        ctx.assertions = assertions;
    }

    fn events(&self, contributions: &[Contribution], window: &TimeWindow) -> Vec<EventNode> {
        let mut spans: Vec<(Timestamp, Timestamp, String)> = Vec::new();
        let mut annotated: Vec<&String> = Vec::new();
        let mut samples: BTreeMap<usize, Vec<(Timestamp, Option<&String>)>> = BTreeMap::new();
        for c in contributions {
            match c {
                Contribution::AnnotationEvent(label) => {
                    if !annotated.contains(&label) {
                        annotated.push(label);
                    }
                }
                Contribution::SensorSample(k, label, at) => samples.entry(*k).or_default().push((*at, label.as_ref())),
                _ => {}
            }
        }
        for label in annotated {
            spans.push((window.start, window.end(), label.clone()));
        }
        for run in samples.values() {
            let mut current: Option<(Timestamp, &String)> = None;
            for &(at, label) in run {
                match (current, label) {
                    (Some((_, cur)), Some(l)) if cur == l => continue,
                    _ => {}
                }
                if let Some((start, cur)) = current.take() {
                    if start < at {
                        spans.push((start, at, cur.clone()));
                    }
                }
                current = label.map(|l| (at, l));
            }
            if let Some((start, cur)) = current {
                spans.push((start, window.end(), cur.clone()));
            }
        }
        spans.sort();
        spans.dedup();
        spans
            .into_iter()
            .enumerate()
            .map(|(i, (start, end, label))| EventNode {
                event_id: format!("e{i}"),
                label,
                start_time: start,
                end_time: end,
                parent: None,
            })
            .collect()
    }
}

/// The candidate with the latest first evidence at or before `at`, else the
/// earliest one.
fn pick<T>(candidates: impl Iterator<Item = (T, Timestamp)>, at: Timestamp) -> Option<T> {
    let mut before: Option<(T, Timestamp)> = None;
    let mut first: Option<(T, Timestamp)> = None;
    for (c, t) in candidates {
        if t <= at {
            if before.as_ref().is_none_or(|(_, bt)| t >= *bt) {
                before = Some((c, t));
            }
        } else if first.as_ref().is_none_or(|(_, ft)| t < *ft) {
            first = Some((c, t));
        }
    }
    before.or(first).map(|(c, _)| c)
}

fn active_event(events: &[EventNode], at: Timestamp) -> Option<&EventNode> {
    events
        .iter()
        .filter(|e| e.start_time <= at && at < e.end_time)
        .max_by_key(|e| e.start_time)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub contexts: u64,
    pub unknown: u64,
    pub gap_filled: u64,
    pub findings: u64,
    pub unmapped: u64,
    pub conflicts: u64,
    pub quarantined: u64,
}

impl BuildStats {
    fn observe(&mut self, o: &PopulateOutput) {
        self.contexts += 1;
        self.unknown += o.context.is_unknown() as u64;
        self.findings += o.findings.len() as u64;
        for entry in &o.log {
            match entry {
                LogEntry::Unmapped { .. } => self.unmapped += 1,
                LogEntry::Conflict { .. } => self.conflicts += 1,
                LogEntry::Quarantined { .. } => self.quarantined += 1,
            }
        }
    }
}

/// Drives population over a window-ordered group stream, filling index gaps
/// with unknown contexts.
pub struct ContextBuilder<'p, 's> {
    populator: &'p Populator<'s>,
    pool: Option<rayon::ThreadPool>,
    batch: usize,
    last: HashMap<String, u64>,
    stats: BuildStats,
}

impl<'p, 's> ContextBuilder<'p, 's> {
    /// `jobs == 1` runs the single-pass sequential mode; `jobs == 0` uses all
    /// available cores.
    pub fn new(populator: &'p Populator<'s>, jobs: usize) -> Result<Self, PopulateError> {
        let pool = if jobs == 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .map_err(|e| PopulateError::Pool(e.to_string()))?,
            )
        };
        Ok(ContextBuilder {
            populator,
            batch: pool.as_ref().map_or(1, |p| 64 * p.current_num_threads()),
            pool,
            last: HashMap::new(),
            stats: BuildStats::default(),
        })
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    pub fn run(
        &mut self,
        groups: impl IntoIterator<Item = WindowGroup>,
        registry: &mut EntityRegistry,
        mut sink: impl FnMut(PopulateOutput),
    ) -> Result<BuildStats, PopulateError> {
        let mut pending: Vec<WindowGroup> = Vec::with_capacity(self.batch);
        for group in groups {
            self.check_order(&group, &mut pending)?;
            pending.push(group);
            if pending.len() >= self.batch {
                self.flush(&mut pending, registry, &mut sink)?;
            }
        }
        self.flush(&mut pending, registry, &mut sink)?;
        Ok(self.stats)
    }

    /// Records `group`'s index, queueing empty groups for any skipped indices.
    fn check_order(&mut self, group: &WindowGroup, pending: &mut Vec<WindowGroup>) -> Result<(), PopulateError> {
        let index = group.index();
        if let Some(&last) = self.last.get(&group.subject_id) {
            if index <= last {
                return Err(PopulateError::OutOfOrder {
                    subject: group.subject_id.clone(),
                    index,
                    last,
                });
            }
            let step = group.window.duration_ms();
            for gap in last + 1..index {
                let offset = (gap as i64 - index as i64) * step;
                pending.push(WindowGroup {
                    subject_id: group.subject_id.clone(),
                    window: TimeWindow {
                        start: group.window.start.add_millis(offset),
                        duration_s: group.window.duration_s,
                        index: gap,
                    },
                    records: Vec::new(),
                });
                self.stats.gap_filled += 1;
            }
        }
        self.last.insert(group.subject_id.clone(), index);
        Ok(())
    }

    fn flush(
        &mut self,
        pending: &mut Vec<WindowGroup>,
        registry: &mut EntityRegistry,
        sink: &mut impl FnMut(PopulateOutput),
    ) -> Result<(), PopulateError> {
        if pending.is_empty() {
            return Ok(());
        }
        let populator = self.populator;
        let outputs: Vec<PopulateOutput> = match &self.pool {
            None => pending
                .iter()
                .map(|g| populator.populate(g, registry))
                .collect::<Result<_, _>>()?,
            Some(pool) => {
                for g in pending.iter() {
                    populator.scan(g, registry)?;
                }
                let reg: &EntityRegistry = registry;
                pool.install(|| {
                    pending
                        .par_iter()
                        .map(|g| populator.populate_resolved(g, reg))
                        .collect::<Result<_, _>>()
                })?
            }
        };
        pending.clear();
        for o in outputs {
            self.stats.observe(&o);
            sink(o);
        }
        Ok(())
    }
}

/// Populates every group, returning contexts in input order (gaps filled)
/// and the registry state afterwards.
pub fn build_contexts(
    groups: impl IntoIterator<Item = WindowGroup>,
    populator: &Populator<'_>,
    mut registry: EntityRegistry,
    jobs: usize,
) -> Result<(Vec<PopulateOutput>, EntityRegistry, BuildStats), PopulateError> {
    let mut builder = ContextBuilder::new(populator, jobs)?;
    let mut out = Vec::new();
    let stats = builder.run(groups, &mut registry, |o| out.push(o))?;
    Ok((out, registry, stats))
}
