//! Concrete millimetre values for size classes.
//!
//! A class maps to a band of a reference dimension: Small [0.2, 0.4),
//! Medium [0.4, 0.7), Large [0.7, 1.0]. The band midpoint is used. Some
//! references depend on other concrete values (an inner diameter is relative
//! to its hub's outer diameter) so every class combination stays buildable.

use crate::geometry::SizeMap;
use crate::taxonomy::{AttrRef, LinkingRodSpec, SizeClass};

pub const LENGTH_REF_MM: f64 = 55.0;
pub const OUTER_DIAMETER_REF_MM: f64 = 18.0;
/// Inner diameter reference as a fraction of the hub's outer diameter.
pub const INNER_DIAMETER_RATIO: f64 = 0.9;
pub const DEPTH_REF_MM: f64 = 16.0;
pub const WIDTH_REF_MM: f64 = 12.0;
pub const THICKNESS_REF_MM: f64 = 12.0;
/// Arc radius reference as a multiple of the shaft length.
pub const RADIUS_RATIO: f64 = 2.0;
pub const RIB_REF_MM: f64 = 8.0;

/// Fractional band `[lo, hi)` of the reference dimension (Large is closed).
pub fn band(class: SizeClass) -> (f64, f64) {
    match class {
        SizeClass::Small => (0.2, 0.4),
        SizeClass::Medium => (0.4, 0.7),
        SizeClass::Large => (0.7, 1.0),
    }
}

pub fn midpoint(class: SizeClass) -> f64 {
    let (lo, hi) = band(class);
    (lo + hi) * 0.5
}

/// Resolves every size attribute of `spec` to millimetres. Attributes the
/// spec does not assign are left out.
pub fn concrete_sizes(spec: &LinkingRodSpec) -> SizeMap {
    let mut out = SizeMap::new();
    let mut put = |entity: &str, attribute: &str, value: f64| {
        out.insert(AttrRef::new(entity, attribute), value);
        value
    };
    let frac = |entity: &str, attribute: &str| spec.size(entity, attribute).map(midpoint);

    let length = frac("shaft", "length").map(|f| put("shaft", "length", f * LENGTH_REF_MM));
    if let (Some(f), Some(c)) = (frac("shaft", "radius"), length) {
        put("shaft", "radius", f * RADIUS_RATIO * c);
    }
    let width = frac("shaft", "width").map(|f| put("shaft", "width", f * WIDTH_REF_MM));
    let thickness = frac("shaft", "thickness").map(|f| put("shaft", "thickness", f * THICKNESS_REF_MM));

    let mut depths = Vec::new();
    for hole in ["first pivot hole", "second pivot hole", "larger pivot hole", "smaller pivot hole"] {
        if let Some(f) = frac(hole, "outer diameter") {
            let od = put(hole, "outer diameter", f * OUTER_DIAMETER_REF_MM);
            if let Some(g) = frac(hole, "inner diameter") {
                put(hole, "inner diameter", g * INNER_DIAMETER_RATIO * od);
            }
        }
        if let Some(f) = frac(hole, "depth") {
            depths.push(put(hole, "depth", f * DEPTH_REF_MM));
        }
    }

    if let Some(f) = frac("inner edge convex", "thickness") {
        put("inner edge convex", "thickness", f * RIB_REF_MM);
    }
    if let Some(f) = frac("shaft hole", "diameter") {
        // Relative to the smaller side of the shaft cross-section.
        let second = if spec.structure("shaft", "main structure") == Some("cuboid") {
            width
        } else {
            depths.iter().copied().reduce(f64::min)
        };
        if let (Some(t), Some(s)) = (thickness, second) {
            put("shaft hole", "diameter", f * t.min(s));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoints_sit_inside_their_bands() {
        for c in SizeClass::ALL {
            let (lo, hi) = band(c);
            let m = midpoint(c);
            assert!(lo < m && m < hi);
        }
        assert_eq!(midpoint(SizeClass::Small), 0.30000000000000004);
        assert_eq!(midpoint(SizeClass::Medium), 0.55);
        assert_eq!(midpoint(SizeClass::Large), 0.85);
    }

    #[test]
    fn inner_diameter_follows_outer() {
        let spec = LinkingRodSpec::new()
            .with_size("first pivot hole", "outer diameter", SizeClass::Small)
            .with_size("first pivot hole", "inner diameter", SizeClass::Large);
        let s = concrete_sizes(&spec);
        let od = s[&AttrRef::new("first pivot hole", "outer diameter")];
        let id = s[&AttrRef::new("first pivot hole", "inner diameter")];
        assert!((od - 0.3 * 18.0).abs() < 1e-12);
        assert!((id - 0.85 * 0.9 * od).abs() < 1e-12);
        assert!(id < od);
    }
}
