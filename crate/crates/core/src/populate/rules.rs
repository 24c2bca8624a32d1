//! Declarative mapping from stream fields to schema targets.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::StreamDescriptor;
use crate::schema::{EtgSchema, EtypeCategory};
use crate::value::Datatype;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    DataProperty,
    EntityLink,
    EventLabel,
    ActionLabel,
    FunctionLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkRole {
    Location,
    Person,
    Object,
}

impl LinkRole {
    fn admits(self, category: EtypeCategory) -> bool {
        match self {
            LinkRole::Location => category == EtypeCategory::Location,
            LinkRole::Person => category == EtypeCategory::Human,
            LinkRole::Object => matches!(category, EtypeCategory::Object | EtypeCategory::GenericObject),
        }
    }
}

/// `field` names one payload field, or for a coordinates property a
/// comma-separated `lat,lon[,accuracy]` triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingRule {
    pub stream_id: String,
    pub field: String,
    pub target_kind: TargetKind,
    pub target_etype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_role: Option<LinkRole>,
    /// Answers that mean "nothing to link", e.g. `Alone`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skip_values: Vec<String>,
}

impl MappingRule {
    pub fn fields(&self) -> Vec<&str> {
        self.field.split(',').map(str::trim).collect()
    }
}

impl fmt::Display for MappingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} -> {:?} {}",
            self.stream_id, self.field, self.target_kind, self.target_etype
        )?;
        if let Some(p) = &self.target_property {
            write!(f, ".{p}")?;
        }
        Ok(())
    }
}

/// Which stream field carries each of the four per-window questions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionMap {
    #[serde(rename = "where", default, skip_serializing_if = "Option::is_none")]
    pub where_: Option<FieldRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doing: Option<FieldRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_whom: Option<FieldRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mood: Option<FieldRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldRef {
    pub stream_id: String,
    pub field: String,
}

impl FieldRef {
    pub fn new(stream_id: &str, field: &str) -> Self {
        FieldRef {
            stream_id: stream_id.to_string(),
            field: field.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    Where,
    Doing,
    WithWhom,
    Mood,
}

impl Question {
    pub const ALL: [Question; 4] = [Question::Where, Question::Doing, Question::WithWhom, Question::Mood];

    pub fn as_str(self) -> &'static str {
        match self {
            Question::Where => "where",
            Question::Doing => "doing",
            Question::WithWhom => "with_whom",
            Question::Mood => "mood",
        }
    }
}

impl QuestionMap {
    pub fn get(&self, q: Question) -> Option<&FieldRef> {
        match q {
            Question::Where => self.where_.as_ref(),
            Question::Doing => self.doing.as_ref(),
            Question::WithWhom => self.with_whom.as_ref(),
            Question::Mood => self.mood.as_ref(),
        }
    }

    pub fn question_for(&self, stream_id: &str, field: &str) -> Option<Question> {
        Question::ALL.into_iter().find(|&q| {
            self.get(q)
                .is_some_and(|r| r.stream_id == stream_id && r.field == field)
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule {rule}: no stream descriptor {stream}")]
    UnknownStream { rule: String, stream: String },
    #[error("rule {rule}: stream {stream} has no field {field}")]
    UnknownField {
        rule: String,
        stream: String,
        field: String,
    },
    #[error("rule {rule}: etype {etype} is not declared")]
    UnknownEtype { rule: String, etype: String },
    #[error("rule {rule}: data_property rules need a target_property")]
    MissingTargetProperty { rule: String },
    #[error("rule {rule}: {etype} has no property {property}")]
    PropertyNotFound {
        rule: String,
        etype: String,
        property: String,
    },
    #[error("rule {rule}: entity_link rules need a link_role")]
    MissingLinkRole { rule: String },
    #[error("rule {rule}: link role {role:?} cannot target a {category} etype")]
    LinkRoleMismatch {
        rule: String,
        role: LinkRole,
        category: String,
    },
    #[error("rule {rule}: {reason}")]
    Shape { rule: String, reason: String },
    #[error("me etype {0} must be a declared Human etype")]
    MeEtype(String),
    #[error("question {question}: {reason}")]
    Question { question: &'static str, reason: String },
}

/// Checks every rule against the schema and the stream descriptors.
pub fn validate_rules(
    rules: &[MappingRule],
    schema: &EtgSchema,
    descriptors: &HashMap<String, Arc<StreamDescriptor>>,
) -> Result<(), RuleError> {
    for rule in rules {
        let name = rule.to_string();
        let desc = descriptors
            .get(&rule.stream_id)
            .ok_or_else(|| RuleError::UnknownStream {
                rule: name.clone(),
                stream: rule.stream_id.clone(),
            })?;
        let fields = rule.fields();
        for f in &fields {
            if desc.field_index(f).is_none() {
                return Err(RuleError::UnknownField {
                    rule: name.clone(),
                    stream: rule.stream_id.clone(),
                    field: f.to_string(),
                });
            }
        }
        let category = schema
            .category(&rule.target_etype)
            .ok_or_else(|| RuleError::UnknownEtype {
                rule: name.clone(),
                etype: rule.target_etype.clone(),
            })?;
        let shape = |reason: &str| RuleError::Shape {
            rule: name.clone(),
            reason: reason.to_string(),
        };
        match rule.target_kind {
            TargetKind::DataProperty => {
                let property = rule
                    .target_property
                    .as_deref()
                    .ok_or_else(|| RuleError::MissingTargetProperty { rule: name.clone() })?;
                let def = schema
                    .property(&rule.target_etype, property)
                    .ok_or_else(|| RuleError::PropertyNotFound {
                        rule: name.clone(),
                        etype: rule.target_etype.clone(),
                        property: property.to_string(),
                    })?;
                let composite_ok =
                    fields.len() == 1 || def.datatype == Datatype::Coordinates && (2..=3).contains(&fields.len());
                if !composite_ok {
                    return Err(shape(
                        "only coordinates properties read several fields (lat,lon[,accuracy])",
                    ));
                }
            }
            TargetKind::EntityLink => {
                let role = rule
                    .link_role
                    .ok_or_else(|| RuleError::MissingLinkRole { rule: name.clone() })?;
                if !role.admits(category) {
                    return Err(RuleError::LinkRoleMismatch {
                        rule: name.clone(),
                        role,
                        category: category.as_str().to_string(),
                    });
                }
            }
            TargetKind::EventLabel if category != EtypeCategory::Event => {
                return Err(shape("event_label rules must target an Event etype"));
            }
            TargetKind::FunctionLabel | TargetKind::ActionLabel if category == EtypeCategory::Event => {
                return Err(shape(
                    "functions and actions relate generic objects or locations, not events",
                ));
            }
            _ => {}
        }
        if rule.target_kind != TargetKind::DataProperty && fields.len() != 1 {
            return Err(shape("only coordinates data properties read several fields"));
        }
        if rule.target_kind != TargetKind::DataProperty && rule.target_property.is_some() {
            return Err(shape("target_property only applies to data_property rules"));
        }
        if rule.target_kind != TargetKind::EntityLink && rule.link_role.is_some() {
            return Err(shape("link_role only applies to entity_link rules"));
        }
    }
    Ok(())
}

pub fn validate_questions(
    questions: &QuestionMap,
    descriptors: &HashMap<String, Arc<StreamDescriptor>>,
) -> Result<(), RuleError> {
    for q in Question::ALL {
        let Some(r) = questions.get(q) else { continue };
        let desc = descriptors.get(&r.stream_id).ok_or_else(|| RuleError::Question {
            question: q.as_str(),
            reason: format!("no stream descriptor {}", r.stream_id),
        })?;
        if desc.field_index(&r.field).is_none() {
            return Err(RuleError::Question {
                question: q.as_str(),
                reason: format!("stream {} has no field {}", r.stream_id, r.field),
            });
        }
    }
    Ok(())
}
