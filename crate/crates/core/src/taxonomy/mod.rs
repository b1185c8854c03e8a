//! Linking-rod feature schema, spec validation, and the canonical
//! triplet/text forms used as model input.

mod schema;
mod spec;
mod text;
mod validate;

use rand::Rng;
use thiserror::Error;

pub use schema::{
    Activation, AttributeDef, AttributeKind, Condition, EntityDef, FeatureSchema, PivotHoleRules,
    ROD_FEATURE_ENTITIES,
};
pub use spec::{AttrRef, AttributeValue, LinkingRodSpec, SizeClass};
pub use text::{
    parse_text, render_text, spec_to_triplets, triplets_to_spec, FeatureTriplet, ParseOptions, ParseOutcome,
};
pub use validate::{validate_spec, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(ValidationReport),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unrecognized sentence `{0}`")]
    Unrecognized(String),
    #[error("ambiguous reference `{reference}`, candidates: {}", candidates.join(", "))]
    Ambiguous { reference: String, candidates: Vec<String> },
}

/// Draws a uniformly random schema-valid rod spec (shipped schema only).
pub fn sample_spec<R: Rng + ?Sized>(rng: &mut R) -> LinkingRodSpec {
    let size = |rng: &mut R| SizeClass::ALL[rng.random_range(0..3)];
    let mut spec = LinkingRodSpec::new().with_structure("link", "main structure", "binary link");

    let arc = rng.random_bool(0.5);
    if arc {
        spec = spec
            .with_structure("shaft", "main structure", "arc-shaped vertical slab")
            .with_size("shaft", "radius", size(rng))
            .with_structure("shaft", "cross section", "rectangle");
    } else {
        spec = spec
            .with_structure("shaft", "main structure", "cuboid")
            .with_size("shaft", "width", size(rng));
    }
    spec = spec
        .with_size("shaft", "length", size(rng))
        .with_size("shaft", "thickness", size(rng));
    match rng.random_range(0..3) {
        0 => {}
        1 => {
            spec = spec
                .with_structure("shaft", "additional feature", "inner edge convex")
                .with_size("inner edge convex", "thickness", size(rng));
        }
        _ => {
            let dir = ["x direction", "y direction", "z direction"][rng.random_range(0..3)];
            spec = spec
                .with_structure("shaft", "additional feature", "shaft hole")
                .with_structure("shaft hole", "direction", dir)
                .with_size("shaft hole", "diameter", size(rng));
        }
    }

    let (a, b, id_a, id_b) = if rng.random_bool(0.5) {
        let id = size(rng);
        ("first pivot hole", "second pivot hole", id, id)
    } else {
        let small = rng.random_range(0..2);
        let large = rng.random_range(small + 1..3);
        ("larger pivot hole", "smaller pivot hole", SizeClass::ALL[large], SizeClass::ALL[small])
    };
    for (hole, id) in [(a, id_a), (b, id_b)] {
        if rng.random_bool(0.3) {
            spec = spec.with_structure(hole, "type", "separate type");
        }
        spec = spec
            .with_size(hole, "inner diameter", id)
            .with_size(hole, "outer diameter", size(rng))
            .with_size(hole, "depth", size(rng));
    }
    spec
}
