//! Feature schema: the entity/attribute tree that describes a part family.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TaxonomyError;

const DEFAULT_SCHEMA: &str = include_str!("../../data/linking_rod_schema.json");

/// Number of feature entities (excluding the root) in the shipped rod schema.
pub const ROD_FEATURE_ENTITIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    /// Enumerated structural class.
    Structure,
    /// Quantized dimension, valued in {small, medium, large}.
    Size,
}

/// Applicability condition: the attribute exists only when a sibling
/// structure attribute takes one of the listed values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub values: Vec<String>,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub when: Option<Condition>,
}

/// A child entity exists only when its parent's attribute holds `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub attribute: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDef {
    pub name: String,
    pub parent: String,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub activated_by: Option<Activation>,
    pub attributes: Vec<AttributeDef>,
}

impl EntityDef {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

/// Pivot-hole naming rules: which link types need exactly two holes, and
/// which entity pair is used for equal vs. distinct inner diameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotHoleRules {
    pub link_attribute: String,
    pub two_hole_link_types: Vec<String>,
    pub equal_pair: [String; 2],
    pub distinct_pair: [String; 2],
    pub distinguishing_attribute: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub version: u32,
    pub root: String,
    pub relation: String,
    pub entities: Vec<EntityDef>,
    #[serde(default)]
    pub pivot_holes: Option<PivotHoleRules>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FeatureSchema {
    /// The shipped linking-rod schema.
    pub fn linking_rod() -> Self {
        Self::from_json(DEFAULT_SCHEMA).expect("shipped schema is well-formed")
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let mut schema: FeatureSchema =
            serde_json::from_str(text).map_err(|e| TaxonomyError::Schema(e.to_string()))?;
        schema.index = schema
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        schema.check()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TaxonomyError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn entity(&self, name: &str) -> Option<&EntityDef> {
        self.index.get(name).map(|&i| &self.entities[i])
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn attribute(&self, entity: &str, attribute: &str) -> Option<&AttributeDef> {
        self.entity(entity).and_then(|e| e.attribute(attribute))
    }

    pub fn children<'a>(&'a self, parent: &'a str) -> impl Iterator<Item = &'a EntityDef> + 'a {
        self.entities.iter().filter(move |e| e.parent == parent)
    }

    /// Entities in pre-order from the root, siblings in declaration order.
    pub fn preorder(&self) -> Vec<&EntityDef> {
        let mut out = Vec::with_capacity(self.entities.len());
        self.visit(&self.root, &mut out);
        out
    }

    fn visit<'a>(&'a self, parent: &'a str, out: &mut Vec<&'a EntityDef>) {
        for child in self.children(parent) {
            out.push(child);
            self.visit(&child.name, out);
        }
    }

    /// Every term that may appear in a rendered description.
    pub fn vocabulary_terms(&self) -> BTreeSet<String> {
        let mut terms = BTreeSet::new();
        for e in &self.entities {
            terms.insert(e.name.clone());
            for a in &e.attributes {
                terms.insert(a.name.clone());
                terms.extend(a.values.iter().cloned());
            }
        }
        terms
    }

    fn check(&self) -> Result<(), TaxonomyError> {
        let bad = |msg: String| Err(TaxonomyError::Schema(msg));
        if self.index.len() != self.entities.len() {
            return bad("duplicate entity name".into());
        }
        if self.index.contains_key(&self.root) {
            return bad(format!("root `{}` must not be a feature entity", self.root));
        }
        for e in &self.entities {
            if e.parent != self.root && !self.index.contains_key(&e.parent) {
                return bad(format!("entity `{}` has unknown parent `{}`", e.name, e.parent));
            }
            let mut seen = BTreeSet::new();
            for a in &e.attributes {
                if !seen.insert(a.name.as_str()) {
                    return bad(format!("attribute `{}` repeated in `{}`", a.name, e.name));
                }
                match a.kind {
                    AttributeKind::Structure if a.values.is_empty() => {
                        return bad(format!("structure attribute `{}.{}` has no values", e.name, a.name))
                    }
                    AttributeKind::Size if !a.values.is_empty() => {
                        return bad(format!(
                            "size attribute `{}.{}` must not list values (fixed to small/medium/large)",
                            e.name, a.name
                        ))
                    }
                    _ => {}
                }
                if let Some(cond) = &a.when {
                    match e.attribute(&cond.attribute) {
                        Some(c) if c.kind == AttributeKind::Structure => {}
                        _ => {
                            return bad(format!(
                                "condition of `{}.{}` refers to unknown structure attribute `{}`",
                                e.name, a.name, cond.attribute
                            ))
                        }
                    }
                }
            }
            if let Some(act) = &e.activated_by {
                let parent = self.entity(&e.parent);
                let ok = parent
                    .and_then(|p| p.attribute(&act.attribute))
                    .is_some_and(|a| a.values.contains(&act.value));
                if !ok {
                    return bad(format!("activation of `{}` does not resolve on its parent", e.name));
                }
            }
        }
        // Acyclic: every entity must be reachable from the root.
        if self.preorder().len() != self.entities.len() {
            return bad("entity tree is not rooted at the schema root (cycle or orphan)".into());
        }
        if let Some(rules) = &self.pivot_holes {
            for name in rules.equal_pair.iter().chain(rules.distinct_pair.iter()) {
                let ok = self
                    .attribute(name, &rules.distinguishing_attribute)
                    .is_some_and(|a| a.kind == AttributeKind::Size);
                if !ok {
                    return bad(format!("pivot-hole rule names `{name}` without a size attribute"));
                }
            }
        }
        Ok(())
    }
}
