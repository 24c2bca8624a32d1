//! Entity type graphs: etypes with data properties, object properties with
//! cardinalities, and single-parent inheritance.
//!
//! A schema document is TOML with two top-level arrays, `etypes` and
//! `object_properties`. Each data property is one string of four
//! whitespace-separated fields: `name kind datatype multiplicity`, for
//! example `"Gender External enum(Male|Female) single"`. See
//! `docs/schema-format.md` for the full grammar.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::report::{Code, Finding, ValidationReport};
use crate::value::Datatype;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropertyKind {
    Spatial,
    Temporal,
    Function,
    Action,
    External,
    Internal,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 6] = [
        PropertyKind::Spatial,
        PropertyKind::Temporal,
        PropertyKind::Function,
        PropertyKind::Action,
        PropertyKind::External,
        PropertyKind::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyKind::Spatial => "Spatial",
            PropertyKind::Temporal => "Temporal",
            PropertyKind::Function => "Function",
            PropertyKind::Action => "Action",
            PropertyKind::External => "External",
            PropertyKind::Internal => "Internal",
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PropertyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EtypeCategory {
    Location,
    Event,
    Human,
    Object,
    GenericObject,
}

impl EtypeCategory {
    pub const ALL: [EtypeCategory; 5] = [
        EtypeCategory::Location,
        EtypeCategory::Event,
        EtypeCategory::Human,
        EtypeCategory::Object,
        EtypeCategory::GenericObject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EtypeCategory::Location => "Location",
            EtypeCategory::Event => "Event",
            EtypeCategory::Human => "Human",
            EtypeCategory::Object => "Object",
            EtypeCategory::GenericObject => "GenericObject",
        }
    }

    /// Property kinds an etype of this category may carry. Location has no
    /// temporal, action or internal properties; events are described only by
    /// their span and outward features; internal states belong to humans.
    pub fn allowed_kinds(self) -> &'static [PropertyKind] {
        use PropertyKind::*;
        match self {
            EtypeCategory::Location => &[Spatial, Function, External],
            EtypeCategory::Event => &[Temporal, External],
            EtypeCategory::Human => &[Spatial, Function, Action, External, Internal],
            EtypeCategory::Object | EtypeCategory::GenericObject => &[Spatial, Function, Action, External],
        }
    }

    pub fn allows(self, kind: PropertyKind) -> bool {
        self.allowed_kinds().contains(&kind)
    }
}

impl fmt::Display for EtypeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EtypeCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EtypeCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    Single,
    Multi,
}

impl Multiplicity {
    pub fn as_str(self) -> &'static str {
        match self {
            Multiplicity::Single => "single",
            Multiplicity::Multi => "multi",
        }
    }
}

impl FromStr for Multiplicity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Multiplicity::Single),
            "multi" => Ok(Multiplicity::Multi),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataPropertyDef {
    pub name: String,
    pub kind: PropertyKind,
    pub datatype: Datatype,
    pub multiplicity: Multiplicity,
}

impl DataPropertyDef {
    pub fn new(name: &str, kind: PropertyKind, datatype: Datatype, multiplicity: Multiplicity) -> Self {
        DataPropertyDef {
            name: name.to_string(),
            kind,
            datatype,
            multiplicity,
        }
    }
}

impl fmt::Display for DataPropertyDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.name,
            self.kind,
            self.datatype,
            self.multiplicity.as_str()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectPropertyKind {
    Function,
    Action,
    Structural,
}

impl ObjectPropertyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectPropertyKind::Function => "Function",
            ObjectPropertyKind::Action => "Action",
            ObjectPropertyKind::Structural => "Structural",
        }
    }

    fn property_kind(self) -> Option<PropertyKind> {
        match self {
            ObjectPropertyKind::Function => Some(PropertyKind::Function),
            ObjectPropertyKind::Action => Some(PropertyKind::Action),
            ObjectPropertyKind::Structural => None,
        }
    }
}

impl FromStr for ObjectPropertyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Function" => Ok(ObjectPropertyKind::Function),
            "Action" => Ok(ObjectPropertyKind::Action),
            "Structural" => Ok(ObjectPropertyKind::Structural),
            other => Err(other.to_string()),
        }
    }
}

/// `min..max`; `max == None` is unbounded (`*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cardinality {
    pub min: u32,
    pub max: Option<u32>,
}

impl Cardinality {
    pub const ANY: Cardinality = Cardinality { min: 0, max: None };

    pub fn admits(&self, count: usize) -> bool {
        self.max.is_none_or(|m| count <= m as usize)
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) => write!(f, "{}..{}", self.min, m),
            None => write!(f, "{}..*", self.min),
        }
    }
}

impl FromStr for Cardinality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once("..").ok_or_else(|| s.to_string())?;
        let min = lo.trim().parse().map_err(|_| s.to_string())?;
        let max = match hi.trim() {
            "*" => None,
            n => Some(n.parse().map_err(|_| s.to_string())?),
        };
        Ok(Cardinality { min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectPropertyDef {
    pub name: String,
    pub domain: String,
    pub range: String,
    pub kind: ObjectPropertyKind,
    pub cardinality: Cardinality,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtypeDef {
    pub name: String,
    /// `None` means the category is inherited from the parent.
    pub category: Option<EtypeCategory>,
    pub parent: Option<String>,
    pub properties: Vec<DataPropertyDef>,
}

impl EtypeDef {
    pub fn new(name: &str, category: Option<EtypeCategory>, parent: Option<&str>) -> Self {
        EtypeDef {
            name: name.to_string(),
            category,
            parent: parent.map(str::to_string),
            properties: Vec::new(),
        }
    }

    pub fn with_property(mut self, prop: DataPropertyDef) -> Self {
        self.properties.push(prop);
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown property kind {kind:?} for {etype}.{property} at {line}:{column}")]
    UnknownKind {
        etype: String,
        property: String,
        kind: String,
        line: usize,
        column: usize,
    },
    #[error("unknown etype {0:?}")]
    UnknownEtype(String),
    #[error("schema is invalid:\n{0}")]
    Invalid(ValidationReport),
}

/// Immutable after construction; lookups go through a name index.
#[derive(Debug, Clone, Default)]
pub struct EtgSchema {
    etypes: Vec<EtypeDef>,
    object_properties: Vec<ObjectPropertyDef>,
    index: HashMap<String, usize>,
}

impl PartialEq for EtgSchema {
    fn eq(&self, other: &Self) -> bool {
        self.etypes == other.etypes && self.object_properties == other.object_properties
    }
}

impl EtgSchema {
    pub fn new(etypes: Vec<EtypeDef>, object_properties: Vec<ObjectPropertyDef>) -> Self {
        let mut index = HashMap::with_capacity(etypes.len());
        for (i, e) in etypes.iter().enumerate() {
            index.entry(e.name.clone()).or_insert(i);
        }
        EtgSchema {
            etypes,
            object_properties,
            index,
        }
    }

    pub fn etypes(&self) -> &[EtypeDef] {
        &self.etypes
    }

    pub fn object_properties(&self) -> &[ObjectPropertyDef] {
        &self.object_properties
    }

    pub fn etype(&self, name: &str) -> Option<&EtypeDef> {
        self.index.get(name).map(|&i| &self.etypes[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn require(&self, name: &str) -> Result<&EtypeDef, SchemaError> {
        self.etype(name)
            .ok_or_else(|| SchemaError::UnknownEtype(name.to_string()))
    }

    /// `name` followed by its ancestors, nearest first. Stops at a dangling
    /// parent or when a cycle closes.
    pub fn lineage(&self, name: &str) -> Vec<&EtypeDef> {
        let mut chain = Vec::new();
        let mut seen = HashSet::new();
        let mut cur = self.etype(name);
        while let Some(e) = cur {
            if !seen.insert(e.name.as_str()) {
                break;
            }
            chain.push(e);
            cur = e.parent.as_deref().and_then(|p| self.etype(p));
        }
        chain
    }

    /// Category of `name`, taken from the nearest etype in its lineage that
    /// declares one.
    pub fn category(&self, name: &str) -> Option<EtypeCategory> {
        self.lineage(name).into_iter().find_map(|e| e.category)
    }

    pub fn is_subtype(&self, a: &str, b: &str) -> Result<bool, SchemaError> {
        self.require(a)?;
        self.require(b)?;
        Ok(self.lineage(a).iter().any(|e| e.name == b))
    }

    /// Own plus inherited data properties. A child's declaration shadows an
    /// ancestor's of the same name. Ordered root-first by depth, then by name.
    pub fn effective_properties(&self, etype: &str) -> Result<Vec<DataPropertyDef>, SchemaError> {
        self.require(etype)?;
        let lineage = self.lineage(etype);
        let mut taken: HashSet<&str> = HashSet::new();
        let mut per_level: Vec<Vec<&DataPropertyDef>> = Vec::with_capacity(lineage.len());
        for e in &lineage {
            let mut level: Vec<&DataPropertyDef> = Vec::new();
            for p in &e.properties {
                if taken.insert(p.name.as_str()) {
                    level.push(p);
                }
            }
            level.sort_by(|a, b| a.name.cmp(&b.name));
            per_level.push(level);
        }
        Ok(per_level.into_iter().rev().flatten().cloned().collect())
    }

    /// Nearest declaration of `property` visible from `etype`.
    pub fn property(&self, etype: &str, property: &str) -> Option<&DataPropertyDef> {
        self.lineage(etype)
            .into_iter()
            .find_map(|e| e.properties.iter().find(|p| p.name == property))
    }

    /// Renders the schema as a document that parses back to an equal schema.
    pub fn to_document(&self) -> String {
        let q = |s: &str| toml::Value::String(s.to_string()).to_string();
        let mut out = String::new();
        for e in &self.etypes {
            out.push_str("[[etypes]]\n");
            out.push_str(&format!("name = {}\n", q(&e.name)));
            if let Some(c) = e.category {
                out.push_str(&format!("category = {}\n", q(c.as_str())));
            }
            if let Some(p) = &e.parent {
                out.push_str(&format!("parent = {}\n", q(p)));
            }
            if !e.properties.is_empty() {
                out.push_str("properties = [\n");
                for p in &e.properties {
                    out.push_str(&format!("    {},\n", q(&p.to_string())));
                }
                out.push_str("]\n");
            }
            out.push('\n');
        }
        for op in &self.object_properties {
            out.push_str("[[object_properties]]\n");
            out.push_str(&format!("name = {}\n", q(&op.name)));
            out.push_str(&format!("domain = {}\n", q(&op.domain)));
            out.push_str(&format!("range = {}\n", q(&op.range)));
            out.push_str(&format!("kind = {}\n", q(op.kind.as_str())));
            out.push_str(&format!("cardinality = {}\n", q(&op.cardinality.to_string())));
            out.push('\n');
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    #[serde(default)]
    etypes: Vec<EtypeDoc>,
    #[serde(default)]
    object_properties: Vec<ObjectPropertyDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EtypeDoc {
    name: Spanned<String>,
    #[serde(default)]
    category: Option<Spanned<String>>,
    #[serde(default)]
    parent: Option<Spanned<String>>,
    #[serde(default)]
    properties: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectPropertyDoc {
    name: Spanned<String>,
    domain: Spanned<String>,
    range: Spanned<String>,
    kind: Spanned<String>,
    #[serde(default)]
    cardinality: Option<Spanned<String>>,
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

struct DocParser<'a> {
    text: &'a str,
}

impl DocParser<'_> {
    fn syntax<T>(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> Result<T, SchemaError> {
        let (line, column) = line_col(self.text, span.start);
        Err(SchemaError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn identifier(&self, s: &Spanned<String>, what: &str) -> Result<String, SchemaError> {
        if is_identifier(s.get_ref()) {
            Ok(s.get_ref().clone())
        } else {
            self.syntax(s.span(), format!("{what} {:?} is not an identifier", s.get_ref()))
        }
    }

    fn property(&self, etype: &str, s: &Spanned<String>) -> Result<DataPropertyDef, SchemaError> {
        let text = s.get_ref().trim();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() < 4 {
            return self.syntax(
                s.span(),
                format!("property {text:?} must read `name kind datatype multiplicity`"),
            );
        }
        let name = tokens[0];
        if !is_identifier(name) {
            return self.syntax(s.span(), format!("property name {name:?} is not an identifier"));
        }
        let kind = tokens[1].parse::<PropertyKind>().map_err(|kind| {
            let (line, column) = line_col(self.text, s.span().start);
            SchemaError::UnknownKind {
                etype: etype.to_string(),
                property: name.to_string(),
                kind,
                line,
                column,
            }
        })?;
        let multiplicity = match tokens[tokens.len() - 1].parse::<Multiplicity>() {
            Ok(m) => m,
            Err(m) => return self.syntax(s.span(), format!("unknown multiplicity {m:?} (single|multi)")),
        };
        let datatype_text = tokens[2..tokens.len() - 1].join(" ");
        let datatype = match datatype_text.parse::<Datatype>() {
            Ok(d) => d,
            Err(e) => return self.syntax(s.span(), e.to_string()),
        };
        Ok(DataPropertyDef {
            name: name.to_string(),
            kind,
            datatype,
            multiplicity,
        })
    }

    fn build(&self, doc: SchemaDoc) -> Result<EtgSchema, SchemaError> {
        let mut etypes = Vec::with_capacity(doc.etypes.len());
        for e in &doc.etypes {
            let name = self.identifier(&e.name, "etype name")?;
            let category = match &e.category {
                None => None,
                Some(c) => match c.get_ref().parse::<EtypeCategory>() {
                    Ok(c) => Some(c),
                    Err(text) => {
                        return self.syntax(
                            c_span(e.category.as_ref()),
                            format!("unknown category {text:?} (Location|Event|Human|Object|GenericObject)"),
                        )
                    }
                },
            };
            let parent = e.parent.as_ref().map(|p| self.identifier(p, "parent")).transpose()?;
            let properties = e
                .properties
                .iter()
                .map(|p| self.property(&name, p))
                .collect::<Result<Vec<_>, _>>()?;
            etypes.push(EtypeDef {
                name,
                category,
                parent,
                properties,
            });
        }
        let mut object_properties = Vec::with_capacity(doc.object_properties.len());
        for op in &doc.object_properties {
            let kind = match op.kind.get_ref().parse::<ObjectPropertyKind>() {
                Ok(k) => k,
                Err(k) => {
                    return self.syntax(
                        op.kind.span(),
                        format!("unknown object property kind {k:?} (Function|Action|Structural)"),
                    )
                }
            };
            let cardinality = match &op.cardinality {
                None => Cardinality::ANY,
                Some(c) => match c.get_ref().parse::<Cardinality>() {
                    Ok(c) => c,
                    Err(text) => {
                        return self.syntax(
                            c_span(op.cardinality.as_ref()),
                            format!("bad cardinality {text:?} (expected min..max)"),
                        )
                    }
                },
            };
            object_properties.push(ObjectPropertyDef {
                name: self.identifier(&op.name, "object property name")?,
                domain: self.identifier(&op.domain, "domain")?,
                range: self.identifier(&op.range, "range")?,
                kind,
                cardinality,
            });
        }
        Ok(EtgSchema::new(etypes, object_properties))
    }
}

fn c_span(s: Option<&Spanned<String>>) -> std::ops::Range<usize> {
    s.map_or(0..0, |s| s.span())
}

/// Parses a schema document without checking schema invariants.
pub fn parse_schema_unchecked(text: &str) -> Result<EtgSchema, SchemaError> {
    let doc: SchemaDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = line_col(text, e.span().map_or(0, |s| s.start));
        SchemaError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    DocParser { text }.build(doc)
}

/// Parses a schema document and rejects it if any invariant fails.
pub fn parse_schema(text: &str) -> Result<EtgSchema, SchemaError> {
    let schema = parse_schema_unchecked(text)?;
    let report = validate_schema(&schema);
    if report.is_clean() {
        Ok(schema)
    } else {
        Err(SchemaError::Invalid(report))
    }
}

pub fn validate_schema(schema: &EtgSchema) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = HashSet::new();
    for e in schema.etypes() {
        if !seen.insert(e.name.as_str()) {
            report.push(Finding::new(
                Code::DuplicateEtype,
                &e.name,
                "etype declared more than once",
            ));
        }
    }

    // Parents and cycles. Each cycle is reported once, under its smallest member.
    let mut cycles_reported: BTreeSet<String> = BTreeSet::new();
    for e in schema.etypes() {
        let Some(parent) = &e.parent else { continue };
        if !schema.contains(parent) {
            report.push(Finding::new(
                Code::DanglingEtype,
                &e.name,
                format!("parent {parent:?} is not declared"),
            ));
            continue;
        }
        let mut path = vec![e.name.as_str()];
        let mut cur = schema.etype(parent);
        while let Some(next) = cur {
            if let Some(pos) = path.iter().position(|n| *n == next.name) {
                let cycle: Vec<&str> = path[pos..].to_vec();
                let key = cycle.iter().min().unwrap().to_string();
                if pos == 0 && cycles_reported.insert(key.clone()) {
                    let mut shown = cycle.clone();
                    shown.push(cycle[0]);
                    report.push(Finding::new(
                        Code::InheritanceCycle,
                        key,
                        format!("inheritance cycle {}", shown.join(" -> ")),
                    ));
                }
                break;
            }
            path.push(next.name.as_str());
            cur = next.parent.as_deref().and_then(|p| schema.etype(p));
        }
    }

    for e in schema.etypes() {
        let own = e.category;
        let resolved = schema.category(&e.name);
        match resolved {
            None => report.push(Finding::new(
                Code::MissingCategory,
                &e.name,
                "no category declared on the etype or any ancestor",
            )),
            Some(cat) => {
                if let (Some(own), Some(parent)) = (own, e.parent.as_deref()) {
                    if let Some(pcat) = schema.category(parent) {
                        let specializes = own == pcat
                            || (pcat == EtypeCategory::GenericObject
                                && matches!(own, EtypeCategory::Human | EtypeCategory::Object));
                        if !specializes {
                            report.push(Finding::new(
                                Code::CategoryMismatch,
                                &e.name,
                                format!("category {own} cannot specialize parent {parent} of category {pcat}"),
                            ));
                        }
                    }
                }
                for p in &e.properties {
                    if !cat.allows(p.kind) {
                        report.push(Finding::new(
                            Code::KindNotAllowed,
                            format!("{}.{}", e.name, p.name),
                            format!("{} property not allowed on {} etype {}", p.kind, cat, e.name),
                        ));
                    }
                }
            }
        }
        let mut names = HashSet::new();
        for p in &e.properties {
            if !names.insert(p.name.as_str()) {
                report.push(Finding::new(
                    Code::DuplicateProperty,
                    format!("{}.{}", e.name, p.name),
                    "property declared more than once on the same etype",
                ));
            }
        }
    }

    if ["GenericObject", "Human", "Object"].iter().all(|n| schema.contains(n)) {
        for child in ["Human", "Object"] {
            if !schema.is_subtype(child, "GenericObject").unwrap_or(false) {
                report.push(Finding::new(
                    Code::GenericObjectHierarchy,
                    child,
                    format!("{child} must specialize GenericObject"),
                ));
            }
        }
    }

    let mut op_names = HashSet::new();
    for op in schema.object_properties() {
        if !op_names.insert(op.name.as_str()) {
            report.push(Finding::new(
                Code::DuplicateObjectProperty,
                &op.name,
                "object property declared more than once",
            ));
        }
        for (role, target) in [("domain", &op.domain), ("range", &op.range)] {
            if !schema.contains(target) {
                report.push(Finding::new(
                    Code::DanglingEtype,
                    &op.name,
                    format!("{role} {target:?} is not declared"),
                ));
            }
        }
        if let Some(max) = op.cardinality.max {
            if op.cardinality.min > max {
                report.push(Finding::new(
                    Code::BadCardinality,
                    &op.name,
                    format!("cardinality {} has min > max", op.cardinality),
                ));
            }
        }
        if let (Some(kind), Some(cat)) = (op.kind.property_kind(), schema.category(&op.domain)) {
            if !cat.allows(kind) {
                report.push(Finding::new(
                    Code::KindNotAllowed,
                    &op.name,
                    format!("{kind} object property not allowed with {cat} domain {}", op.domain),
                ));
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
[[etypes]]
name = "GenericObject"
category = "GenericObject"
properties = ["Name External string single", "ID External string single"]

[[etypes]]
name = "Object"
category = "Object"
parent = "GenericObject"

[[etypes]]
name = "Human"
category = "Human"
parent = "GenericObject"
properties = ["Gender External enum(Male|Female) single"]
"#;

    #[test]
    fn parses_generic_object_hierarchy() {
        let schema = parse_schema(FIG1).unwrap();
        assert_eq!(schema.etypes().len(), 3);
        assert_eq!(schema.category("Human"), Some(EtypeCategory::Human));
        let gender = schema.property("Human", "Gender").unwrap();
        assert_eq!(gender.kind, PropertyKind::External);
        assert_eq!(
            gender.datatype,
            Datatype::Enumeration(vec!["Male".into(), "Female".into()])
        );
    }

    #[test]
    fn empty_document_is_an_empty_valid_schema() {
        let schema = parse_schema("").unwrap();
        assert!(schema.etypes().is_empty());
        assert!(validate_schema(&schema).is_clean());
    }

    #[test]
    fn inheritance_cycle_is_rejected() {
        let text = r#"
[[etypes]]
name = "A"
category = "Location"
parent = "B"
[[etypes]]
name = "B"
category = "Location"
parent = "A"
"#;
        match parse_schema(text) {
            Err(SchemaError::Invalid(report)) => {
                assert_eq!(report.codes(), vec![Code::InheritanceCycle]);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn unknown_kind_and_keys_are_rejected_with_position() {
        let text = "[[etypes]]\nname = \"X\"\ncategory = \"Location\"\nproperties = [\"Size Bulk decimal single\"]\n";
        match parse_schema(text) {
            Err(SchemaError::UnknownKind { kind, line, .. }) => {
                assert_eq!(kind, "Bulk");
                assert_eq!(line, 4);
            }
            other => panic!("{other:?}"),
        }
        let text = "[[etypes]]\nname = \"X\"\ncolour = \"red\"\n";
        assert!(matches!(parse_schema(text), Err(SchemaError::Syntax { line: 3, .. })));
        let text = "[[etypes]\nname = 1";
        assert!(matches!(parse_schema(text), Err(SchemaError::Syntax { line: 1, .. })));
    }

    #[test]
    fn dangling_references_are_reported() {
        let text = r#"
[[etypes]]
name = "Room"
parent = "Building"
[[object_properties]]
name = "In"
domain = "Room"
range = "Nowhere"
kind = "Structural"
"#;
        let schema = parse_schema_unchecked(text).unwrap();
        let report = validate_schema(&schema);
        assert!(report.has(Code::DanglingEtype));
        assert!(report.has(Code::MissingCategory));
    }

    #[test]
    fn event_with_spatial_property_is_flagged() {
        let schema = EtgSchema::new(
            vec![
                EtypeDef::new("Event", Some(EtypeCategory::Event), None).with_property(DataPropertyDef::new(
                    "Where",
                    PropertyKind::Spatial,
                    Datatype::Coordinates,
                    Multiplicity::Single,
                )),
            ],
            vec![],
        );
        let report = validate_schema(&schema);
        assert_eq!(report.codes(), vec![Code::KindNotAllowed]);
        assert!(report.findings[0].message.contains("Spatial"));
        assert_eq!(report.findings[0].subject, "Event.Where");
    }

    #[test]
    fn location_with_temporal_property_is_flagged() {
        let schema = EtgSchema::new(
            vec![
                EtypeDef::new("Location", Some(EtypeCategory::Location), None).with_property(DataPropertyDef::new(
                    "Opened",
                    PropertyKind::Temporal,
                    Datatype::Timestamp,
                    Multiplicity::Single,
                )),
            ],
            vec![],
        );
        assert_eq!(validate_schema(&schema).codes(), vec![Code::KindNotAllowed]);
    }

    #[test]
    fn effective_properties_include_inherited() {
        let schema = parse_schema(FIG1).unwrap();
        let names: Vec<String> = schema
            .effective_properties("Human")
            .unwrap()
            .into_iter()
            .map(|p| p.name)
            .collect();
        assert_eq!(names, ["ID", "Name", "Gender"]);
        assert!(schema.effective_properties("Object").unwrap().len() == 2);
        assert!(matches!(
            schema.effective_properties("Nope"),
            Err(SchemaError::UnknownEtype(_))
        ));
    }

    #[test]
    fn bare_etype_has_no_properties() {
        let schema = EtgSchema::new(vec![EtypeDef::new("Lone", Some(EtypeCategory::Object), None)], vec![]);
        assert!(schema.effective_properties("Lone").unwrap().is_empty());
    }

    #[test]
    fn shadowing_follows_nearest_declaration() {
        let p = |name: &str, dt: Datatype| DataPropertyDef::new(name, PropertyKind::External, dt, Multiplicity::Single);
        let schema = EtgSchema::new(
            vec![
                EtypeDef::new("A", Some(EtypeCategory::Object), None)
                    .with_property(p("Color", Datatype::String))
                    .with_property(p("Name", Datatype::String)),
                EtypeDef::new("B", None, Some("A")).with_property(p("Color", Datatype::Integer)),
                EtypeDef::new("C", None, Some("B"))
                    .with_property(p("Name", Datatype::Boolean))
                    .with_property(p("Brand", Datatype::String)),
            ],
            vec![],
        );
        // Hand-resolved: A contributes nothing unshadowed, B contributes Color:integer,
        // C contributes Brand and Name:boolean.
        let expected = vec![
            p("Color", Datatype::Integer),
            p("Brand", Datatype::String),
            p("Name", Datatype::Boolean),
        ];
        assert_eq!(schema.effective_properties("C").unwrap(), expected);
        assert!(validate_schema(&schema).is_clean());
    }

    #[test]
    fn subtype_relation() {
        let schema = parse_schema(FIG1).unwrap();
        assert!(schema.is_subtype("Human", "GenericObject").unwrap());
        assert!(schema.is_subtype("Human", "Human").unwrap());
        assert!(!schema.is_subtype("GenericObject", "Human").unwrap());
        assert!(!schema.is_subtype("Human", "Object").unwrap());
        assert!(schema.is_subtype("Human", "Ghost").is_err());
    }

    #[test]
    fn hierarchy_and_category_rules() {
        let schema = EtgSchema::new(
            vec![
                EtypeDef::new("GenericObject", Some(EtypeCategory::GenericObject), None),
                EtypeDef::new("Human", Some(EtypeCategory::Human), None),
                EtypeDef::new("Object", Some(EtypeCategory::Object), Some("GenericObject")),
                EtypeDef::new("Room", Some(EtypeCategory::Location), Some("Object")),
            ],
            vec![],
        );
        let report = validate_schema(&schema);
        assert!(report.has(Code::GenericObjectHierarchy));
        assert!(report.has(Code::CategoryMismatch));
    }

    #[test]
    fn object_property_checks() {
        let text = r#"
[[etypes]]
name = "Place"
category = "Location"
[[etypes]]
name = "Person"
category = "Human"
[[object_properties]]
name = "Walks"
domain = "Place"
range = "Person"
kind = "Action"
cardinality = "3..1"
"#;
        let schema = parse_schema_unchecked(text).unwrap();
        let report = validate_schema(&schema);
        assert!(report.has(Code::KindNotAllowed));
        assert!(report.has(Code::BadCardinality));
    }

    #[test]
    fn document_round_trip() {
        let schema = parse_schema(FIG1).unwrap();
        let again = parse_schema(&schema.to_document()).unwrap();
        assert_eq!(schema, again);
    }
}
