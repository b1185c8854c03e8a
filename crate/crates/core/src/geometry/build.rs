//! Parametric construction of a rod solid from a spec and concrete sizes.
//!
//! Frame: pivot-hole axes along +Z, the first (or larger) hole at the
//! origin and the second (or smaller) hole at `(length, 0, 0)`.

use std::collections::BTreeMap;

use super::csg::{Axis, CsgSolid, Primitive};
use super::GeometryError;
use crate::taxonomy::{validate_spec, AttrRef, FeatureSchema, LinkingRodSpec};

/// Concrete millimetre value for every size attribute of a spec.
pub type SizeMap = BTreeMap<AttrRef, f64>;

/// Side of the cube every rod must fit into, in mm.
pub const ENVELOPE_MM: f64 = 64.0;

const ARC: &str = "arc-shaped vertical slab";

struct Hub {
    x: f64,
    inner: f64,
    outer: f64,
    depth: f64,
    separate: bool,
    /// +1 when the hub's outside faces +X.
    outward: f64,
}

fn size(sizes: &SizeMap, entity: &str, attribute: &str) -> Result<f64, GeometryError> {
    let key = AttrRef::new(entity, attribute);
    match sizes.get(&key) {
        Some(&v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(&v) => Err(GeometryError::Infeasible {
            constraint: format!("{attribute} of the {entity} must be positive, got {v}"),
        }),
        None => Err(GeometryError::MissingSize(key)),
    }
}

fn infeasible<T>(constraint: impl Into<String>) -> Result<T, GeometryError> {
    Err(GeometryError::Infeasible { constraint: constraint.into() })
}

fn hub(spec: &LinkingRodSpec, sizes: &SizeMap, name: &str, x: f64, outward: f64) -> Result<Hub, GeometryError> {
    let inner = size(sizes, name, "inner diameter")? * 0.5;
    let outer = size(sizes, name, "outer diameter")? * 0.5;
    if inner >= outer {
        return infeasible(format!("inner diameter of the {name} must be smaller than its outer diameter"));
    }
    Ok(Hub {
        x,
        inner,
        outer,
        depth: size(sizes, name, "depth")?,
        separate: spec.structure(name, "type") == Some("separate type"),
        outward,
    })
}

fn bore(h: &Hub) -> CsgSolid {
    Primitive::Cylinder { center: [h.x, 0.0, 0.0], axis: Axis::Z, radius: h.inner, height: h.depth }.into()
}

fn hub_solid(h: &Hub) -> CsgSolid {
    let ring: CsgSolid =
        Primitive::Cylinder { center: [h.x, 0.0, 0.0], axis: Axis::Z, radius: h.outer, height: h.depth }.into();
    let mut parts = vec![ring, bore(h)];
    if h.separate {
        // Split slot from the bore through the outer wall, away from the shaft.
        let len = h.outer - h.inner;
        parts.push(
            Primitive::Cuboid {
                center: [h.x + h.outward * (h.inner + h.outer) * 0.5, 0.0, 0.0],
                size: [len * 1.5, h.inner * 0.5, h.depth],
            }
            .into(),
        );
    }
    CsgSolid::Difference(parts)
}

/// Builds the CSG tree of a rod. Deterministic for fixed inputs.
pub fn build_solid(spec: &LinkingRodSpec, sizes: &SizeMap) -> Result<CsgSolid, GeometryError> {
    let schema = FeatureSchema::linking_rod();
    let report = validate_spec(spec, &schema);
    if !report.is_ok() {
        return Err(GeometryError::InvalidSpec(report.to_string()));
    }

    let (name_a, name_b) = if spec.has_entity("first pivot hole") {
        ("first pivot hole", "second pivot hole")
    } else {
        ("larger pivot hole", "smaller pivot hole")
    };
    let c = size(sizes, "shaft", "length")?;
    let a = hub(spec, sizes, name_a, 0.0, -1.0)?;
    let b = hub(spec, sizes, name_b, c, 1.0)?;
    if c <= a.outer + b.outer {
        return infeasible("shaft length must exceed the sum of hub outer radii");
    }
    let t = size(sizes, "shaft", "thickness")?;
    let mid_x = c * 0.5;

    let mut parts = vec![hub_solid(&a), hub_solid(&b)];
    // Centre of the shaft cross-section at mid-span, and the cross-section sides.
    let (anchor, cross) = if spec.structure("shaft", "main structure") == Some(ARC) {
        let radius = size(sizes, "shaft", "radius")?;
        if radius < mid_x {
            return infeasible("arc radius must be at least half the shaft length");
        }
        if t * 0.5 >= radius {
            return infeasible("arc thickness must be smaller than twice its radius");
        }
        let height = a.depth.min(b.depth);
        let drop = (radius * radius - mid_x * mid_x).sqrt();
        let center = [mid_x, -drop, 0.0];
        let end_b = drop.atan2(mid_x);
        let end_a = drop.atan2(-mid_x);
        let slab = |inner: f64, outer: f64, h: f64, z: f64| -> CsgSolid {
            CsgSolid::Difference(vec![
                Primitive::ArcSlab {
                    center: [center[0], center[1], z],
                    inner_radius: inner,
                    outer_radius: outer,
                    start: end_b,
                    sweep: end_a - end_b,
                    height: h,
                }
                .into(),
                bore(&a),
                bore(&b),
            ])
        };
        parts.push(slab(radius - t * 0.5, radius + t * 0.5, height, 0.0));
        if spec.has_entity("inner edge convex") {
            let rib = size(sizes, "inner edge convex", "thickness")?;
            if rib * 0.5 >= radius - t * 0.5 {
                return infeasible("inner edge convex is thicker than the arc's inner radius allows");
            }
            parts.push(slab(radius - t * 0.5 - rib * 0.5, radius - t * 0.5, height * 0.5, 0.0));
        }
        ([mid_x, radius - drop, 0.0], [t, height])
    } else {
        let w = size(sizes, "shaft", "width")?;
        let span = c - a.inner - b.inner;
        let x0 = a.inner;
        parts.push(Primitive::Cuboid { center: [x0 + span * 0.5, 0.0, 0.0], size: [span, w, t] }.into());
        if spec.has_entity("inner edge convex") {
            let rib = size(sizes, "inner edge convex", "thickness")?;
            let inner_span = c - a.outer - b.outer;
            parts.push(
                Primitive::Cuboid {
                    center: [a.outer + inner_span * 0.5, -(w + rib * 0.5) * 0.5, 0.0],
                    size: [inner_span, rib * 0.5, t * 0.5],
                }
                .into(),
            );
        }
        ([x0 + span * 0.5, 0.0, 0.0], [w, t])
    };

    let mut solid = CsgSolid::Union(parts);
    if spec.has_entity("shaft hole") {
        let d = size(sizes, "shaft hole", "diameter")?;
        if d >= cross[0].min(cross[1]) {
            return infeasible("shaft hole diameter must be smaller than the shaft cross-section");
        }
        let axis = match spec.structure("shaft hole", "direction") {
            Some("x direction") => Axis::X,
            Some("y direction") => Axis::Y,
            _ => Axis::Z,
        };
        let reach = 3.0 * cross[0].max(cross[1]);
        solid = CsgSolid::Difference(vec![
            solid,
            Primitive::Cylinder { center: anchor, axis, radius: d * 0.5, height: reach }.into(),
        ]);
    }

    let ext = solid.aabb().extent();
    if ext.iter().any(|&e| e > ENVELOPE_MM) {
        return infeasible(format!("rod extent {ext:?} mm exceeds the {ENVELOPE_MM} mm cube"));
    }
    Ok(solid)
}
