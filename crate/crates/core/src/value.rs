//! Datatypes shared by schema properties and stream payload fields, and the
//! typed values that inhabit them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Datatype {
    String,
    Integer,
    Decimal,
    Boolean,
    Timestamp,
    /// Latitude and longitude in degrees, accuracy in meters.
    Coordinates,
    Enumeration(Vec<String>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatatypeParseError {
    #[error("unknown datatype {0:?}")]
    Unknown(String),
    #[error("enumeration {0:?} declares no values")]
    EmptyEnum(String),
    #[error("enumeration {0:?} repeats value {1:?}")]
    DuplicateEnumValue(String, String),
}

impl Datatype {
    pub fn name(&self) -> &'static str {
        match self {
            Datatype::String => "string",
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Boolean => "boolean",
            Datatype::Timestamp => "timestamp",
            Datatype::Coordinates => "coordinates",
            Datatype::Enumeration(_) => "enum",
        }
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datatype::Enumeration(values) => write!(f, "enum({})", values.join("|")),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Datatype {
    type Err = DatatypeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "string" => Datatype::String,
            "integer" => Datatype::Integer,
            "decimal" => Datatype::Decimal,
            "boolean" => Datatype::Boolean,
            "timestamp" => Datatype::Timestamp,
            "coordinates" => Datatype::Coordinates,
            _ => {
                let inner = s
                    .strip_prefix("enum(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(|| DatatypeParseError::Unknown(s.to_string()))?;
                let values: Vec<String> = inner
                    .split('|')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(str::to_string)
                    .collect();
                if values.is_empty() {
                    return Err(DatatypeParseError::EmptyEnum(s.to_string()));
                }
                for (i, v) in values.iter().enumerate() {
                    if values[..i].contains(v) {
                        return Err(DatatypeParseError::DuplicateEnumValue(s.to_string(), v.clone()));
                    }
                }
                Datatype::Enumeration(values)
            }
        })
    }
}

impl Serialize for Datatype {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Datatype {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl Coordinates {
    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
            && self.accuracy.is_none_or(|a| a.is_finite() && a >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    String(String),
    Integer(i64),
    Decimal(f64),
    Boolean(bool),
    Timestamp(Timestamp),
    Coordinates(Coordinates),
    Enum(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoerceError {
    #[error("cannot read {text:?} as {datatype}")]
    Unparseable { text: String, datatype: String },
    #[error("{value} is not one of the declared values of {datatype}")]
    EnumViolation { value: String, datatype: String },
    #[error("a {found} value cannot be used as {datatype}")]
    Mismatch { found: &'static str, datatype: String },
    #[error("coordinates out of range: {0:?}")]
    BadCoordinates(Coordinates),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::String(_) => "string",
            Value::Integer(_) => "integer",
            Value::Decimal(_) => "decimal",
            Value::Boolean(_) => "boolean",
            Value::Timestamp(_) => "timestamp",
            Value::Coordinates(_) => "coordinates",
            Value::Enum(_) => "enum",
        }
    }

    /// Textual content used for labels (entity links, event names).
    pub fn as_label(&self) -> String {
        match self {
            Value::String(s) | Value::Enum(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Decimal(d) => d.to_string(),
            Value::Boolean(b) => b.to_string(),
            Value::Timestamp(t) => t.to_string(),
            Value::Coordinates(c) => format!("{};{}", c.lat, c.lon),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    /// Reads raw field text as a value of `datatype`. Coordinates are written
    /// `lat;lon` or `lat;lon;accuracy`.
    pub fn parse_as(text: &str, datatype: &Datatype) -> Result<Value, CoerceError> {
        let unparseable = || CoerceError::Unparseable {
            text: text.to_string(),
            datatype: datatype.to_string(),
        };
        let t = text.trim();
        let value = match datatype {
            Datatype::String => Value::String(text.to_string()),
            Datatype::Integer => Value::Integer(t.parse().map_err(|_| unparseable())?),
            Datatype::Decimal => {
                let d: f64 = t.parse().map_err(|_| unparseable())?;
                if !d.is_finite() {
                    return Err(unparseable());
                }
                Value::Decimal(d)
            }
            Datatype::Boolean => match t.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => Value::Boolean(true),
                "false" | "0" | "no" => Value::Boolean(false),
                _ => return Err(unparseable()),
            },
            Datatype::Timestamp => Value::Timestamp(Timestamp::parse(t).map_err(|_| unparseable())?),
            Datatype::Coordinates => {
                let parts: Vec<&str> = t.split(';').map(str::trim).collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(unparseable());
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| unparseable());
                let c = Coordinates {
                    lat: num(parts[0])?,
                    lon: num(parts[1])?,
                    accuracy: parts.get(2).map(|s| num(s)).transpose()?,
                };
                if !c.is_valid() {
                    return Err(CoerceError::BadCoordinates(c));
                }
                Value::Coordinates(c)
            }
            Datatype::Enumeration(values) => {
                if values.iter().any(|v| v == t) {
                    Value::Enum(t.to_string())
                } else {
                    return Err(CoerceError::EnumViolation {
                        value: t.to_string(),
                        datatype: datatype.to_string(),
                    });
                }
            }
        };
        Ok(value)
    }

    /// Converts this value to `datatype`, widening integers to decimals and
    /// re-reading strings where needed.
    pub fn coerce(self, datatype: &Datatype) -> Result<Value, CoerceError> {
        match (self, datatype) {
            (Value::String(s) | Value::Enum(s), dt) => Value::parse_as(&s, dt),
            (Value::Integer(i), Datatype::Integer) => Ok(Value::Integer(i)),
            (Value::Integer(i), Datatype::Decimal) => Ok(Value::Decimal(i as f64)),
            (Value::Decimal(d), Datatype::Decimal) => Ok(Value::Decimal(d)),
            (Value::Decimal(d), Datatype::Integer) if d.fract() == 0.0 && d.abs() < 9.0e15 => {
                Ok(Value::Integer(d as i64))
            }
            (Value::Boolean(b), Datatype::Boolean) => Ok(Value::Boolean(b)),
            (Value::Timestamp(t), Datatype::Timestamp) => Ok(Value::Timestamp(t)),
            (Value::Coordinates(c), Datatype::Coordinates) => Ok(Value::Coordinates(c)),
            (v, Datatype::String) => Ok(Value::String(v.as_label())),
            (v @ (Value::Integer(_) | Value::Decimal(_) | Value::Boolean(_)), Datatype::Enumeration(_)) => {
                Value::parse_as(&v.as_label(), datatype)
            }
            (v, dt) => Err(CoerceError::Mismatch {
                found: v.type_name(),
                datatype: dt.to_string(),
            }),
        }
    }

    /// Checks that this value already inhabits `datatype` without conversion.
    pub fn conforms_to(&self, datatype: &Datatype) -> Result<(), CoerceError> {
        let ok = match (self, datatype) {
            (Value::String(_), Datatype::String)
            | (Value::Integer(_), Datatype::Integer)
            | (Value::Decimal(_), Datatype::Decimal)
            | (Value::Boolean(_), Datatype::Boolean)
            | (Value::Timestamp(_), Datatype::Timestamp) => true,
            (Value::Coordinates(c), Datatype::Coordinates) => {
                if !c.is_valid() {
                    return Err(CoerceError::BadCoordinates(*c));
                }
                true
            }
            (Value::Enum(v), Datatype::Enumeration(values)) => {
                if !values.contains(v) {
                    return Err(CoerceError::EnumViolation {
                        value: v.clone(),
                        datatype: datatype.to_string(),
                    });
                }
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(CoerceError::Mismatch {
                found: self.type_name(),
                datatype: datatype.to_string(),
            })
        }
    }
}
