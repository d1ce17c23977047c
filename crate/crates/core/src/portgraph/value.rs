//! Property values and records.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ElementId;

/// The signature kind of an attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Bool,
    Int,
    Real,
    Text,
    Ref,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Bool => "bool",
            ValueKind::Int => "int",
            ValueKind::Real => "real",
            ValueKind::Text => "text",
            ValueKind::Ref => "ref",
        };
        f.write_str(s)
    }
}

/// A value stored under an attribute of a record.
///
/// Serialized as `{"kind": "bool|int|real|text|ref", "v": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "v", rename_all = "lowercase")]
pub enum PropertyValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Ref(ElementId),
}

impl PropertyValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            PropertyValue::Bool(_) => ValueKind::Bool,
            PropertyValue::Int(_) => ValueKind::Int,
            PropertyValue::Real(_) => ValueKind::Real,
            PropertyValue::Text(_) => ValueKind::Text,
            PropertyValue::Ref(_) => ValueKind::Ref,
        }
    }

    /// Numeric view of the value; integers are widened to reals.
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            PropertyValue::Int(i) => Some(i as f64),
            PropertyValue::Real(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            PropertyValue::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Converts `self` so it can be stored under an attribute of kind `kind`.
    ///
    /// Only the int-to-real widening is implicit; every other mismatch is `None`.
    pub fn coerce_to(self, kind: ValueKind) -> Option<PropertyValue> {
        match (self, kind) {
            (PropertyValue::Int(i), ValueKind::Real) => Some(PropertyValue::Real(i as f64)),
            (v, k) if v.kind() == k => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Bool(b) => write!(f, "{b}"),
            PropertyValue::Int(i) => write!(f, "{i}"),
            PropertyValue::Real(x) => write!(f, "{x}"),
            PropertyValue::Text(s) => write!(f, "{s:?}"),
            PropertyValue::Ref(id) => write!(f, "#{id}"),
        }
    }
}

impl From<bool> for PropertyValue {
    fn from(b: bool) -> Self {
        PropertyValue::Bool(b)
    }
}

impl From<i64> for PropertyValue {
    fn from(i: i64) -> Self {
        PropertyValue::Int(i)
    }
}

impl From<f64> for PropertyValue {
    fn from(x: f64) -> Self {
        PropertyValue::Real(x)
    }
}

impl From<&str> for PropertyValue {
    fn from(s: &str) -> Self {
        PropertyValue::Text(s.to_owned())
    }
}

impl From<String> for PropertyValue {
    fn from(s: String) -> Self {
        PropertyValue::Text(s)
    }
}

impl From<ElementId> for PropertyValue {
    fn from(id: ElementId) -> Self {
        PropertyValue::Ref(id)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("duplicate attribute `{0}` in record")]
    DuplicateAttribute(String),
    #[error("attribute `{name}` has kind {expected}, cannot assign a {found} value")]
    KindMismatch {
        name: String,
        expected: ValueKind,
        found: ValueKind,
    },
}

/// An ordered set of `(attribute, value)` properties; each attribute occurs once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Record {
    entries: Vec<(String, PropertyValue)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I, K>(entries: I) -> Result<Self, RecordError>
    where
        I: IntoIterator<Item = (K, PropertyValue)>,
        K: Into<String>,
    {
        let mut record = Record::new();
        for (k, v) in entries {
            record.insert(k, v)?;
        }
        Ok(record)
    }

    /// Builder-style `set`; panics on a kind mismatch.
    pub fn with(mut self, name: impl Into<String>, value: impl Into<PropertyValue>) -> Self {
        self.set(name, value.into()).expect("kind-consistent record");
        self
    }

    pub fn get(&self, name: &str) -> Option<&PropertyValue> {
        self.entries.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Adds a new attribute. Fails if the attribute is already present.
    pub fn insert(&mut self, name: impl Into<String>, value: PropertyValue) -> Result<(), RecordError> {
        let name = name.into();
        if self.contains(&name) {
            return Err(RecordError::DuplicateAttribute(name));
        }
        self.entries.push((name, value));
        Ok(())
    }

    /// Assigns an attribute, appending it when absent.
    ///
    /// An existing attribute keeps its position and its kind; an integer
    /// assigned to a real attribute is widened.
    pub fn set(&mut self, name: impl Into<String>, value: PropertyValue) -> Result<Option<PropertyValue>, RecordError> {
        let name = name.into();
        match self.entries.iter_mut().find(|(k, _)| *k == name) {
            Some((_, slot)) => {
                let expected = slot.kind();
                let found = value.kind();
                let value = value.coerce_to(expected).ok_or(RecordError::KindMismatch {
                    name,
                    expected,
                    found,
                })?;
                Ok(Some(std::mem::replace(slot, value)))
            }
            None => {
                self.entries.push((name, value));
                Ok(None)
            }
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<PropertyValue> {
        let pos = self.entries.iter().position(|(k, _)| k == name)?;
        Some(self.entries.remove(pos).1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PropertyValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Serialize for Record {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Record {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RecordVisitor;

        impl<'de> Visitor<'de> for RecordVisitor {
            type Value = Record;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of attribute names to tagged values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Record, A::Error> {
                let mut record = Record::new();
                while let Some((k, v)) = access.next_entry::<String, PropertyValue>()? {
                    record.insert(k, v).map_err(serde::de::Error::custom)?;
                }
                Ok(record)
            }
        }

        deserializer.deserialize_map(RecordVisitor)
    }
}
