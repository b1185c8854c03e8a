use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Quantized magnitude of a size-related attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Medium, SizeClass::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SizeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(SizeClass::Small),
            "medium" => Ok(SizeClass::Medium),
            "large" => Ok(SizeClass::Large),
            other => Err(format!("`{other}` is not a size class")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeValue {
    Structure(String),
    Size(SizeClass),
}

impl AttributeValue {
    pub fn as_size(&self) -> Option<SizeClass> {
        match self {
            AttributeValue::Size(c) => Some(*c),
            AttributeValue::Structure(_) => None,
        }
    }

    pub fn as_structure(&self) -> Option<&str> {
        match self {
            AttributeValue::Structure(s) => Some(s),
            AttributeValue::Size(_) => None,
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Structure(s) => f.write_str(s),
            AttributeValue::Size(c) => c.fmt(f),
        }
    }
}

/// (entity, attribute) address of a single feature assignment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrRef {
    pub entity: String,
    pub attribute: String,
}

impl AttrRef {
    pub fn new(entity: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self { entity: entity.into(), attribute: attribute.into() }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of the {}", self.attribute, self.entity)
    }
}

/// Structure- and size-class assignments of one linking rod, keyed by
/// entity then attribute. An entity is present iff it has an assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkingRodSpec {
    pub entities: BTreeMap<String, BTreeMap<String, AttributeValue>>,
}

impl LinkingRodSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, entity: &str, attribute: &str, value: AttributeValue) -> &mut Self {
        self.entities
            .entry(entity.to_string())
            .or_default()
            .insert(attribute.to_string(), value);
        self
    }

    pub fn with_structure(mut self, entity: &str, attribute: &str, value: &str) -> Self {
        self.set(entity, attribute, AttributeValue::Structure(value.to_string()));
        self
    }

    pub fn with_size(mut self, entity: &str, attribute: &str, class: SizeClass) -> Self {
        self.set(entity, attribute, AttributeValue::Size(class));
        self
    }

    pub fn get(&self, entity: &str, attribute: &str) -> Option<&AttributeValue> {
        self.entities.get(entity)?.get(attribute)
    }

    pub fn structure(&self, entity: &str, attribute: &str) -> Option<&str> {
        self.get(entity, attribute)?.as_structure()
    }

    pub fn size(&self, entity: &str, attribute: &str) -> Option<SizeClass> {
        self.get(entity, attribute)?.as_size()
    }

    pub fn has_entity(&self, entity: &str) -> bool {
        self.entities.get(entity).is_some_and(|m| !m.is_empty())
    }

    pub fn remove(&mut self, entity: &str, attribute: &str) -> Option<AttributeValue> {
        let attrs = self.entities.get_mut(entity)?;
        let old = attrs.remove(attribute);
        if attrs.is_empty() {
            self.entities.remove(entity);
        }
        old
    }

    /// All size assignments in key order.
    pub fn size_assignments(&self) -> impl Iterator<Item = (AttrRef, SizeClass)> + '_ {
        self.entities.iter().flat_map(|(e, attrs)| {
            attrs
                .iter()
                .filter_map(move |(a, v)| v.as_size().map(|c| (AttrRef::new(e.clone(), a.clone()), c)))
        })
    }

    /// Copy with every size assignment removed.
    pub fn structure_only(&self) -> LinkingRodSpec {
        let mut out = LinkingRodSpec::new();
        for (e, attrs) in &self.entities {
            for (a, v) in attrs {
                if let AttributeValue::Structure(_) = v {
                    out.set(e, a, v.clone());
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entities.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_class_total_order() {
        assert!(SizeClass::Small < SizeClass::Medium);
        assert!(SizeClass::Medium < SizeClass::Large);
        assert_eq!("LARGE".parse::<SizeClass>().unwrap(), SizeClass::Large);
        assert!("huge".parse::<SizeClass>().is_err());
    }

    #[test]
    fn removing_last_attribute_drops_entity() {
        let mut s = LinkingRodSpec::new().with_size("shaft", "length", SizeClass::Small);
        assert!(s.has_entity("shaft"));
        s.remove("shaft", "length");
        assert!(!s.has_entity("shaft"));
        assert!(s.is_empty());
    }
}
