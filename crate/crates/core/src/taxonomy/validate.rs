use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, EntityDef, FeatureSchema};
use super::spec::{AttributeValue, LinkingRodSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownEntity,
    UnknownAttribute,
    InvalidValue,
    KindMismatch,
    NotApplicable,
    InactiveEntity,
    MissingAttribute,
    MissingEntity,
    PivotHoleCount,
    PivotHoleNaming,
}

impl ViolationKind {
    /// Violations that make a spec unresolvable against the schema (as
    /// opposed to incomplete or inconsistent).
    pub fn is_resolution(self) -> bool {
        matches!(
            self,
            ViolationKind::UnknownEntity
                | ViolationKind::UnknownAttribute
                | ViolationKind::InvalidValue
                | ViolationKind::KindMismatch
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn is_resolvable(&self) -> bool {
        !self.violations.iter().any(|v| v.kind.is_resolution())
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn condition_holds(spec: &LinkingRodSpec, entity: &EntityDef, cond: &super::schema::Condition) -> bool {
    spec.structure(&entity.name, &cond.attribute)
        .is_some_and(|v| cond.values.iter().any(|c| c == v))
}

fn entity_activated(spec: &LinkingRodSpec, schema: &FeatureSchema, entity: &EntityDef) -> bool {
    match &entity.activated_by {
        None => entity.parent == schema.root || spec.has_entity(&entity.parent),
        Some(act) => spec.structure(&entity.parent, &act.attribute) == Some(act.value.as_str()),
    }
}

/// Checks every assignment against the schema plus the structural
/// co-constraints. Violations are returned as data.
pub fn validate_spec(spec: &LinkingRodSpec, schema: &FeatureSchema) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (entity_name, attrs) in &spec.entities {
        let Some(entity) = schema.entity(entity_name) else {
            report.push(ViolationKind::UnknownEntity, format!("unknown entity `{entity_name}`"));
            continue;
        };
        if !entity_activated(spec, schema, entity) {
            report.push(
                ViolationKind::InactiveEntity,
                format!("entity `{entity_name}` present but not enabled by its parent `{}`", entity.parent),
            );
        }
        for (attr_name, value) in attrs {
            let Some(def) = entity.attribute(attr_name) else {
                report.push(
                    ViolationKind::UnknownAttribute,
                    format!("`{entity_name}` has no attribute `{attr_name}`"),
                );
                continue;
            };
            match (def.kind, value) {
                (AttributeKind::Structure, AttributeValue::Structure(v)) => {
                    if !def.values.contains(v) {
                        report.push(
                            ViolationKind::InvalidValue,
                            format!("`{v}` is not a value of {attr_name} of the {entity_name}"),
                        );
                    }
                }
                (AttributeKind::Size, AttributeValue::Size(_)) => {}
                _ => report.push(
                    ViolationKind::KindMismatch,
                    format!("{attr_name} of the {entity_name} expects a {:?} value", def.kind),
                ),
            }
            if let Some(cond) = &def.when {
                if !condition_holds(spec, entity, cond) {
                    report.push(
                        ViolationKind::NotApplicable,
                        format!(
                            "{attr_name} of the {entity_name} applies only when {} is one of {:?}",
                            cond.attribute, cond.values
                        ),
                    );
                }
            }
        }
    }

    for entity in &schema.entities {
        let present = spec.has_entity(&entity.name);
        let must_exist = entity.required || (entity.activated_by.is_some() && entity_activated(spec, schema, entity));
        if must_exist && !present {
            report.push(ViolationKind::MissingEntity, format!("missing mandatory entity `{}`", entity.name));
        }
        if !present {
            continue;
        }
        for def in entity.attributes.iter().filter(|a| a.required) {
            let applicable = def.when.as_ref().is_none_or(|c| condition_holds(spec, entity, c));
            if applicable && spec.get(&entity.name, &def.name).is_none() {
                report.push(
                    ViolationKind::MissingAttribute,
                    format!("missing mandatory attribute {} of the {}", def.name, entity.name),
                );
            }
        }
    }

    check_pivot_holes(spec, schema, &mut report);
    report
}

fn check_pivot_holes(spec: &LinkingRodSpec, schema: &FeatureSchema, report: &mut ValidationReport) {
    let Some(rules) = &schema.pivot_holes else { return };
    let holes: Vec<&String> = rules.equal_pair.iter().chain(rules.distinct_pair.iter()).collect();
    let present: Vec<&String> = holes.iter().copied().filter(|h| spec.has_entity(h)).collect();

    let two_hole = spec
        .structure("link", &rules.link_attribute)
        .is_some_and(|t| rules.two_hole_link_types.iter().any(|x| x == t));
    if two_hole {
        if present.len() > 2 {
            report.push(
                ViolationKind::PivotHoleCount,
                format!("a two-hole link declares {} pivot holes", present.len()),
            );
        } else {
            let equal_hits = rules.equal_pair.iter().filter(|h| spec.has_entity(h)).count();
            let distinct_hits = rules.distinct_pair.iter().filter(|h| spec.has_entity(h)).count();
            if equal_hits > 0 && distinct_hits > 0 {
                report.push(
                    ViolationKind::PivotHoleNaming,
                    "pivot holes mix first/second and larger/smaller naming".into(),
                );
            } else {
                let pair = if distinct_hits > 0 { &rules.distinct_pair } else { &rules.equal_pair };
                for h in pair.iter().filter(|h| !spec.has_entity(h)) {
                    report.push(ViolationKind::MissingEntity, format!("missing mandatory entity `{h}`"));
                }
            }
        }
    }

    let attr = &rules.distinguishing_attribute;
    let [a, b] = &rules.equal_pair;
    if let (Some(x), Some(y)) = (spec.size(a, attr), spec.size(b, attr)) {
        if x != y {
            report.push(
                ViolationKind::PivotHoleNaming,
                format!("{a} and {b} have different {attr}s; use {} / {}", rules.distinct_pair[0], rules.distinct_pair[1]),
            );
        }
    }
    let [big, small] = &rules.distinct_pair;
    if let (Some(x), Some(y)) = (spec.size(big, attr), spec.size(small, attr)) {
        if x == y {
            report.push(
                ViolationKind::PivotHoleNaming,
                format!("pivot holes have the same {attr}; use {a} / {b}"),
            );
        } else if x < y {
            report.push(ViolationKind::PivotHoleNaming, format!("{big} has a smaller {attr} than the {small}"));
        }
    }
}
