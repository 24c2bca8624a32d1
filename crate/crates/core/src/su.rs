//! Default schema, streams and mapping rules for four-question time-use
//! annotations (where, doing, with whom, mood) alongside a GPS sensor.

use crate::ingest::{StreamDescriptor, StreamKind};
use crate::populate::{FieldRef, LinkRole, MappingRule, PopulateConfig, QuestionMap, TargetKind};
use crate::schema::{parse_schema, EtgSchema};
use crate::value::Datatype;

pub const SCHEMA_TEXT: &str = include_str!("../data/su_schema.toml");

pub const GPS: &str = "gps";
pub const WHERE: &str = "where";
pub const DOING: &str = "doing";
pub const WITH_WHOM: &str = "withwhom";
pub const MOOD: &str = "mood";
pub const ANSWER: &str = "answer";

pub fn schema() -> EtgSchema {
    parse_schema(SCHEMA_TEXT).expect("bundled schema is valid")
}

pub fn descriptors() -> Vec<StreamDescriptor> {
    let answer = |id: &str, dt: Datatype| StreamDescriptor::new(id, StreamKind::Annotation, &[(ANSWER, dt)]);
    vec![
        StreamDescriptor::new(
            GPS,
            StreamKind::Sensor,
            &[
                ("lat", Datatype::Decimal),
                ("lon", Datatype::Decimal),
                ("accuracy", Datatype::Decimal),
            ],
        ),
        answer(WHERE, Datatype::String),
        answer(DOING, Datatype::String),
        answer(WITH_WHOM, Datatype::String),
        answer(MOOD, Datatype::Integer),
    ]
}

fn rule(stream: &str, field: &str, kind: TargetKind, etype: &str) -> MappingRule {
    MappingRule {
        stream_id: stream.into(),
        field: field.into(),
        target_kind: kind,
        target_etype: etype.into(),
        target_property: None,
        link_role: None,
        skip_values: Vec::new(),
    }
}

pub fn rules() -> Vec<MappingRule> {
    vec![
        MappingRule {
            target_property: Some("GPSLocation".into()),
            ..rule(GPS, "lat,lon,accuracy", TargetKind::DataProperty, "Human")
        },
        MappingRule {
            link_role: Some(LinkRole::Location),
            ..rule(WHERE, ANSWER, TargetKind::EntityLink, "Location")
        },
        rule(DOING, ANSWER, TargetKind::EventLabel, "Event"),
        MappingRule {
            link_role: Some(LinkRole::Person),
            skip_values: vec!["Alone".into()],
            ..rule(WITH_WHOM, ANSWER, TargetKind::EntityLink, "Human")
        },
        MappingRule {
            target_property: Some("InMood".into()),
            ..rule(MOOD, ANSWER, TargetKind::DataProperty, "Human")
        },
    ]
}

pub fn config() -> PopulateConfig {
    PopulateConfig {
        me_etype: "Human".into(),
        questions: QuestionMap {
            where_: Some(FieldRef::new(WHERE, ANSWER)),
            doing: Some(FieldRef::new(DOING, ANSWER)),
            with_whom: Some(FieldRef::new(WITH_WHOM, ANSWER)),
            mood: Some(FieldRef::new(MOOD, ANSWER)),
        },
    }
}
