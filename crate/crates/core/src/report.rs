//! Validation findings. Findings are data: validators never fail, they list
//! what they found.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable diagnostic codes. The kebab-case spelling is part of the CLI output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Code {
    // schema
    KindNotAllowed,
    DanglingEtype,
    InheritanceCycle,
    DuplicateEtype,
    DuplicateProperty,
    DuplicateObjectProperty,
    MissingCategory,
    CategoryMismatch,
    GenericObjectHierarchy,
    BadCardinality,
    // context
    MissingMe,
    DuplicateMe,
    ZeroDuration,
    EmptyEventSpan,
    EventOutsideWindow,
    EventNesting,
    DuplicateEventId,
    BadLocationOrder,
    UnknownEtype,
    UnknownProperty,
    DatatypeMismatch,
    EnumViolation,
    MultiplicityViolation,
    CardinalityOverflow,
    FunctionSelfLoop,
    DanglingReference,
    ActionOutsideWindow,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::KindNotAllowed => "kind-not-allowed",
            Code::DanglingEtype => "dangling-etype",
            Code::InheritanceCycle => "inheritance-cycle",
            Code::DuplicateEtype => "duplicate-etype",
            Code::DuplicateProperty => "duplicate-property",
            Code::DuplicateObjectProperty => "duplicate-object-property",
            Code::MissingCategory => "missing-category",
            Code::CategoryMismatch => "category-mismatch",
            Code::GenericObjectHierarchy => "generic-object-hierarchy",
            Code::BadCardinality => "bad-cardinality",
            Code::MissingMe => "missing-me",
            Code::DuplicateMe => "duplicate-me",
            Code::ZeroDuration => "zero-duration",
            Code::EmptyEventSpan => "empty-event-span",
            Code::EventOutsideWindow => "event-outside-window",
            Code::EventNesting => "event-nesting",
            Code::DuplicateEventId => "duplicate-event-id",
            Code::BadLocationOrder => "bad-location-order",
            Code::UnknownEtype => "unknown-etype",
            Code::UnknownProperty => "unknown-property",
            Code::DatatypeMismatch => "datatype-mismatch",
            Code::EnumViolation => "enum-violation",
            Code::MultiplicityViolation => "multiplicity-violation",
            Code::CardinalityOverflow => "cardinality-overflow",
            Code::FunctionSelfLoop => "function-self-loop",
            Code::DanglingReference => "dangling-reference",
            Code::ActionOutsideWindow => "action-outside-window",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: Code,
    /// What the finding is about, e.g. `Event.Location` or a context id.
    pub subject: String,
    pub message: String,
}

impl Finding {
    pub fn new(code: Code, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Finding {
            code,
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn push(&mut self, finding: Finding) {
        self.findings.push(finding);
    }

    pub fn has(&self, code: Code) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn codes(&self) -> Vec<Code> {
        self.findings.iter().map(|f| f.code).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}
