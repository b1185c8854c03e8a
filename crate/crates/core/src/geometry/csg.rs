//! Constructive solid geometry trees with exact point membership.
//!
//! Boundaries are closed: a point on a primitive's surface is inside it.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Aabb, GeometryError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Cuboid { center: Vec3, size: Vec3 },
    Cylinder { center: Vec3, axis: Axis, radius: f64, height: f64 },
    /// Annular sector around a +Z axis through `center`, spanning
    /// `[start, start + sweep]` radians counter-clockwise.
    ArcSlab { center: Vec3, inner_radius: f64, outer_radius: f64, start: f64, sweep: f64, height: f64 },
    Sphere { center: Vec3, radius: f64 },
}

impl Primitive {
    pub fn contains(&self, p: Vec3) -> bool {
        match *self {
            Primitive::Cuboid { center, size } => {
                (0..3).all(|i| (p[i] - center[i]).abs() <= size[i] * 0.5)
            }
            Primitive::Cylinder { center, axis, radius, height } => {
                let a = axis.index();
                let (u, v) = ((a + 1) % 3, (a + 2) % 3);
                let du = p[u] - center[u];
                let dv = p[v] - center[v];
                (p[a] - center[a]).abs() <= height * 0.5 && du * du + dv * dv <= radius * radius
            }
            Primitive::ArcSlab { center, inner_radius, outer_radius, start, sweep, height } => {
                if (p[2] - center[2]).abs() > height * 0.5 {
                    return false;
                }
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let r2 = dx * dx + dy * dy;
                if r2 < inner_radius * inner_radius || r2 > outer_radius * outer_radius {
                    return false;
                }
                angle_in_sweep(dy.atan2(dx), start, sweep)
            }
            Primitive::Sphere { center, radius } => {
                let d: f64 = (0..3).map(|i| (p[i] - center[i]).powi(2)).sum();
                d <= radius * radius
            }
        }
    }

    pub fn aabb(&self) -> Aabb {
        match *self {
            Primitive::Cuboid { center, size } => Aabb::new(
                [center[0] - size[0] * 0.5, center[1] - size[1] * 0.5, center[2] - size[2] * 0.5],
                [center[0] + size[0] * 0.5, center[1] + size[1] * 0.5, center[2] + size[2] * 0.5],
            ),
            Primitive::Cylinder { center, axis, radius, height } => {
                let mut half = [radius; 3];
                half[axis.index()] = height * 0.5;
                Aabb::new(
                    [center[0] - half[0], center[1] - half[1], center[2] - half[2]],
                    [center[0] + half[0], center[1] + half[1], center[2] + half[2]],
                )
            }
            Primitive::ArcSlab { center, inner_radius, outer_radius, start, sweep, height } => {
                let mut angles = vec![start, start + sweep];
                for k in 0..8 {
                    let a = k as f64 * TAU / 4.0 - TAU;
                    if angle_in_sweep(a, start, sweep) {
                        angles.push(a);
                    }
                }
                let mut min = [f64::INFINITY; 3];
                let mut max = [f64::NEG_INFINITY; 3];
                for a in angles {
                    for r in [inner_radius, outer_radius] {
                        let x = center[0] + r * a.cos();
                        let y = center[1] + r * a.sin();
                        min[0] = min[0].min(x);
                        max[0] = max[0].max(x);
                        min[1] = min[1].min(y);
                        max[1] = max[1].max(y);
                    }
                }
                min[2] = center[2] - height * 0.5;
                max[2] = center[2] + height * 0.5;
                Aabb::new(min, max)
            }
            Primitive::Sphere { center, radius } => Aabb::new(
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
        }
    }

    fn check(&self) -> Result<(), GeometryError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(GeometryError::InvalidSolid(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            Primitive::Cuboid { size, .. } => size.iter().try_for_each(|&s| positive("cuboid size", s)),
            Primitive::Cylinder { radius, height, .. } => {
                positive("cylinder radius", radius)?;
                positive("cylinder height", height)
            }
            Primitive::ArcSlab { inner_radius, outer_radius, sweep, height, .. } => {
                positive("arc outer radius", outer_radius)?;
                positive("arc radial thickness", outer_radius - inner_radius)?;
                positive("arc sweep", sweep)?;
                positive("arc height", height)?;
                if inner_radius < 0.0 {
                    return Err(GeometryError::InvalidSolid("arc inner radius is negative".into()));
                }
                Ok(())
            }
            Primitive::Sphere { radius, .. } => positive("sphere radius", radius),
        }
    }
}

fn angle_in_sweep(angle: f64, start: f64, sweep: f64) -> bool {
    if sweep >= TAU {
        return true;
    }
    let rel = (angle - start).rem_euclid(TAU);
    rel <= sweep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CsgSolid {
    Primitive(Primitive),
    Union(Vec<CsgSolid>),
    /// First child minus every other child.
    Difference(Vec<CsgSolid>),
    Intersection(Vec<CsgSolid>),
}

impl From<Primitive> for CsgSolid {
    fn from(p: Primitive) -> Self {
        CsgSolid::Primitive(p)
    }
}

impl CsgSolid {
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            CsgSolid::Primitive(prim) => prim.contains(p),
            CsgSolid::Union(children) => children.iter().any(|c| c.contains(p)),
            CsgSolid::Difference(children) => {
                children[0].contains(p) && !children[1..].iter().any(|c| c.contains(p))
            }
            CsgSolid::Intersection(children) => children.iter().all(|c| c.contains(p)),
        }
    }

    /// Conservative bounding box: a difference keeps its first child's box.
    pub fn aabb(&self) -> Aabb {
        match self {
            CsgSolid::Primitive(p) => p.aabb(),
            CsgSolid::Union(children) => children
                .iter()
                .map(CsgSolid::aabb)
                .reduce(|a, b| a.union(&b))
                .expect("validated union is non-empty"),
            CsgSolid::Difference(children) => children[0].aabb(),
            CsgSolid::Intersection(children) => children
                .iter()
                .map(CsgSolid::aabb)
                .reduce(|a, b| a.intersection(&b))
                .expect("validated intersection is non-empty"),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            CsgSolid::Primitive(p) => p.check(),
            CsgSolid::Union(children) => {
                if children.is_empty() {
                    return Err(GeometryError::InvalidSolid("union without children".into()));
                }
                children.iter().try_for_each(CsgSolid::validate)
            }
            CsgSolid::Difference(children) | CsgSolid::Intersection(children) => {
                if children.len() < 2 {
                    return Err(GeometryError::InvalidSolid(
                        "difference/intersection needs at least two children".into(),
                    ));
                }
                children.iter().try_for_each(CsgSolid::validate)
            }
        }
    }

    /// Number of primitive leaves.
    pub fn primitive_count(&self) -> usize {
        match self {
            CsgSolid::Primitive(_) => 1,
            CsgSolid::Union(c) | CsgSolid::Difference(c) | CsgSolid::Intersection(c) => {
                c.iter().map(CsgSolid::primitive_count).sum()
            }
        }
    }

    /// Applies `p -> p * scale + offset` to every primitive.
    pub fn scaled_translated(&self, scale: f64, offset: Vec3) -> CsgSolid {
        let mv = |c: Vec3| [c[0] * scale + offset[0], c[1] * scale + offset[1], c[2] * scale + offset[2]];
        match self {
            CsgSolid::Primitive(p) => CsgSolid::Primitive(match *p {
                Primitive::Cuboid { center, size } => {
                    Primitive::Cuboid { center: mv(center), size: size.map(|s| s * scale) }
                }
                Primitive::Cylinder { center, axis, radius, height } => Primitive::Cylinder {
                    center: mv(center),
                    axis,
                    radius: radius * scale,
                    height: height * scale,
                },
                Primitive::ArcSlab { center, inner_radius, outer_radius, start, sweep, height } => {
                    Primitive::ArcSlab {
                        center: mv(center),
                        inner_radius: inner_radius * scale,
                        outer_radius: outer_radius * scale,
                        start,
                        sweep,
                        height: height * scale,
                    }
                }
                Primitive::Sphere { center, radius } => {
                    Primitive::Sphere { center: mv(center), radius: radius * scale }
                }
            }),
            CsgSolid::Union(c) => CsgSolid::Union(c.iter().map(|s| s.scaled_translated(scale, offset)).collect()),
            CsgSolid::Difference(c) => {
                CsgSolid::Difference(c.iter().map(|s| s.scaled_translated(scale, offset)).collect())
            }
            CsgSolid::Intersection(c) => {
                CsgSolid::Intersection(c.iter().map(|s| s.scaled_translated(scale, offset)).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_points_are_inside() {
        let c = Primitive::Cuboid { center: [0.0; 3], size: [2.0, 2.0, 2.0] };
        assert!(c.contains([1.0, 1.0, 1.0]));
        assert!(!c.contains([1.0 + 1e-12, 0.0, 0.0]));
        let s = Primitive::Sphere { center: [0.0; 3], radius: 1.0 };
        assert!(s.contains([1.0, 0.0, 0.0]));
    }

    #[test]
    fn difference_removes_shared_boundary() {
        let outer = Primitive::Cylinder { center: [0.0; 3], axis: Axis::Z, radius: 2.0, height: 1.0 };
        let hole = Primitive::Cylinder { center: [0.0; 3], axis: Axis::Z, radius: 1.0, height: 1.0 };
        let ring = CsgSolid::Difference(vec![outer.into(), hole.into()]);
        assert!(!ring.contains([1.0, 0.0, 0.0]));
        assert!(ring.contains([1.5, 0.0, 0.5]));
        assert!(!ring.contains([0.0, 0.0, 0.0]));
    }

    #[test]
    fn arc_slab_membership_and_box() {
        // Quarter annulus in the first quadrant.
        let arc = Primitive::ArcSlab {
            center: [0.0; 3],
            inner_radius: 1.0,
            outer_radius: 2.0,
            start: 0.0,
            sweep: std::f64::consts::FRAC_PI_2,
            height: 1.0,
        };
        assert!(arc.contains([1.5, 0.1, 0.0]));
        assert!(!arc.contains([1.5, -0.1, 0.0]));
        assert!(!arc.contains([0.5, 0.5, 0.0]));
        let b = arc.aabb();
        assert!((b.min[0] - 0.0).abs() < 1e-12 && (b.max[0] - 2.0).abs() < 1e-12);
        assert!((b.min[1] - 0.0).abs() < 1e-12 && (b.max[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_trees() {
        let bad = Primitive::Cuboid { center: [0.0; 3], size: [1.0, 0.0, 1.0] };
        assert!(CsgSolid::from(bad).validate().is_err());
        let single = CsgSolid::Difference(vec![Primitive::Sphere { center: [0.0; 3], radius: 1.0 }.into()]);
        assert!(single.validate().is_err());
    }
}
