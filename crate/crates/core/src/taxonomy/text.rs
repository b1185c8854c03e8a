//! Triplet and prose forms of a spec.
//!
//! Rendered descriptions are one `the <attribute> of the <entity> is <value>`
//! sentence per assigned attribute, in schema pre-order, joined by `; ` and
//! closed with a period.

use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, FeatureSchema};
use super::spec::{AttributeValue, LinkingRodSpec, SizeClass};
use super::validate::validate_spec;
use super::TaxonomyError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureTriplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl FeatureTriplet {
    fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self { subject: subject.into(), predicate: predicate.into(), object: object.into() }
    }
}

fn ensure_resolvable(spec: &LinkingRodSpec, schema: &FeatureSchema) -> Result<(), TaxonomyError> {
    let report = validate_spec(spec, schema);
    if report.is_resolvable() {
        Ok(())
    } else {
        Err(TaxonomyError::InvalidSpec(report))
    }
}

/// One `structural feature` triplet per present entity followed by one
/// triplet per assigned attribute, in schema pre-order.
pub fn spec_to_triplets(
    spec: &LinkingRodSpec,
    schema: &FeatureSchema,
) -> Result<Vec<FeatureTriplet>, TaxonomyError> {
    ensure_resolvable(spec, schema)?;
    let mut out = Vec::new();
    for entity in schema.preorder() {
        let Some(attrs) = spec.entities.get(&entity.name) else { continue };
        if attrs.is_empty() {
            continue;
        }
        out.push(FeatureTriplet::new(&entity.parent, &schema.relation, &entity.name));
        for def in &entity.attributes {
            if let Some(v) = attrs.get(&def.name) {
                out.push(FeatureTriplet::new(&entity.name, &def.name, &v.to_string()));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`spec_to_triplets`].
pub fn triplets_to_spec(
    triplets: &[FeatureTriplet],
    schema: &FeatureSchema,
) -> Result<LinkingRodSpec, TaxonomyError> {
    let mut spec = LinkingRodSpec::new();
    for t in triplets {
        if t.predicate == schema.relation {
            let resolves = schema
                .entity(&t.object)
                .is_some_and(|e| e.parent == t.subject);
            if !resolves {
                return Err(TaxonomyError::Parse(format!(
                    "`{}` is not a structural feature of `{}`",
                    t.object, t.subject
                )));
            }
            continue;
        }
        let def = schema.attribute(&t.subject, &t.predicate).ok_or_else(|| {
            TaxonomyError::Parse(format!("unknown attribute {} of the {}", t.predicate, t.subject))
        })?;
        let value = match def.kind {
            AttributeKind::Size => AttributeValue::Size(t.object.parse().map_err(TaxonomyError::Parse)?),
            AttributeKind::Structure => AttributeValue::Structure(t.object.clone()),
        };
        spec.set(&t.subject, &t.predicate, value);
    }
    ensure_resolvable(&spec, schema)?;
    Ok(spec)
}

pub fn render_text(spec: &LinkingRodSpec, schema: &FeatureSchema) -> Result<String, TaxonomyError> {
    let sentences: Vec<String> = spec_to_triplets(spec, schema)?
        .into_iter()
        .filter(|t| t.predicate != schema.relation)
        .map(|t| format!("the {} of the {} is {}", t.predicate, t.subject, t.object))
        .collect();
    if sentences.is_empty() {
        return Err(TaxonomyError::Parse("spec has no assignments to render".into()));
    }
    Ok(format!("{}.", sentences.join("; ")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Report unrecognized sentences as warnings instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub spec: LinkingRodSpec,
    pub warnings: Vec<String>,
}

enum Resolved<'a> {
    One(&'a str),
    None,
}

fn resolve<'a>(reference: &str, names: impl Iterator<Item = &'a str> + Clone) -> Result<Resolved<'a>, TaxonomyError> {
    if let Some(exact) = names.clone().find(|n| *n == reference) {
        return Ok(Resolved::One(exact));
    }
    let suffix = format!(" {reference}");
    let candidates: Vec<&str> = names.filter(|n| n.ends_with(&suffix)).collect();
    match candidates.len() {
        0 => Ok(Resolved::None),
        1 => Ok(Resolved::One(candidates[0])),
        _ => Err(TaxonomyError::Ambiguous {
            reference: reference.to_string(),
            candidates: candidates.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Splits `the A of the E is V` into (A, E, V).
fn split_sentence(sentence: &str) -> Option<(&str, &str, &str)> {
    let rest = sentence.strip_prefix("the ")?;
    let (attr, rest) = rest.split_once(" of the ")?;
    let (entity, value) = rest.split_once(" is ")?;
    Some((attr.trim(), entity.trim(), value.trim()))
}

/// Parses schema-terminology prose back into a spec. Matching is
/// case-insensitive; a bare suffix such as `diameter` resolves only if it
/// names a single schema term.
pub fn parse_text(text: &str, schema: &FeatureSchema, options: ParseOptions) -> Result<ParseOutcome, TaxonomyError> {
    let lowered = text.to_lowercase();
    let mut spec = LinkingRodSpec::new();
    let mut warnings = Vec::new();
    let mut recognized = 0usize;

    for raw in lowered.split([';', '.', '\n']) {
        let sentence = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        if sentence.is_empty() {
            continue;
        }
        match parse_sentence(&sentence, schema)? {
            Some((entity, attribute, value)) => {
                if let Some(old) = spec.get(entity, attribute) {
                    if *old != value {
                        warnings.push(format!("`{sentence}` overrides an earlier value `{old}`"));
                    }
                }
                spec.set(entity, attribute, value);
                recognized += 1;
            }
            None if options.lenient => warnings.push(format!("unrecognized sentence `{sentence}`")),
            None => return Err(TaxonomyError::Unrecognized(sentence)),
        }
    }
    if recognized == 0 {
        return Err(TaxonomyError::Parse("no recognizable sentence in description".into()));
    }
    Ok(ParseOutcome { spec, warnings })
}

fn parse_sentence<'s>(
    sentence: &str,
    schema: &'s FeatureSchema,
) -> Result<Option<(&'s str, &'s str, AttributeValue)>, TaxonomyError> {
    let Some((attr_ref, entity_ref, value_ref)) = split_sentence(sentence) else {
        return Ok(None);
    };
    let Resolved::One(entity_name) = resolve(entity_ref, schema.entities.iter().map(|e| e.name.as_str()))? else {
        return Ok(None);
    };
    let entity = schema.entity(entity_name).expect("resolved entity exists");
    let Resolved::One(attr_name) = resolve(attr_ref, entity.attributes.iter().map(|a| a.name.as_str()))? else {
        return Ok(None);
    };
    let def = entity.attribute(attr_name).expect("resolved attribute exists");
    let value = match def.kind {
        AttributeKind::Size => match value_ref.parse::<SizeClass>() {
            Ok(c) => AttributeValue::Size(c),
            Err(_) => return Ok(None),
        },
        AttributeKind::Structure => match def.values.iter().find(|v| v.as_str() == value_ref) {
            Some(v) => AttributeValue::Structure(v.clone()),
            None => return Ok(None),
        },
    };
    Ok(Some((entity_name, attr_name, value)))
}
