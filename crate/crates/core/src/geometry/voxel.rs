use serde::{Deserialize, Serialize};

use super::csg::CsgSolid;
use super::{Aabb, GeometryError, Vec3};

pub const DEFAULT_RESOLUTION: usize = 16;

/// Uniform similarity mapping world points into the unit cube:
/// `q = (p - center) * scale + 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: Vec3,
    pub scale: f64,
}

impl Normalization {
    /// Scales the longest box side to exactly 1 and centers the box.
    pub fn fit(aabb: &Aabb) -> Result<Self, GeometryError> {
        let ext = aabb.extent();
        if ext.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(GeometryError::DegenerateAabb(*aabb));
        }
        let longest = ext.iter().copied().fold(0.0, f64::max);
        Ok(Self { center: aabb.center(), scale: 1.0 / longest })
    }

    pub fn to_unit(&self, p: Vec3) -> Vec3 {
        [
            (p[0] - self.center[0]) * self.scale + 0.5,
            (p[1] - self.center[1]) * self.scale + 0.5,
            (p[2] - self.center[2]) * self.scale + 0.5,
        ]
    }

    pub fn to_world(&self, q: Vec3) -> Vec3 {
        [
            self.center[0] + (q[0] - 0.5) / self.scale,
            self.center[1] + (q[1] - 0.5) / self.scale,
            self.center[2] + (q[2] - 0.5) / self.scale,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoxelMeta {
    pub source_id: String,
    pub normalization: Option<Normalization>,
}

/// Binary N³ occupancy grid, x fastest then y then z.
///
/// Equality compares resolution and occupancy only; `meta` is provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoxelGrid {
    resolution: usize,
    occupancy: Vec<u8>,
    pub meta: VoxelMeta,
}

impl PartialEq for VoxelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution && self.occupancy == other.occupancy
    }
}

impl Eq for VoxelGrid {}

impl VoxelGrid {
    pub fn empty(resolution: usize) -> Self {
        Self { resolution, occupancy: vec![0; resolution.pow(3)], meta: VoxelMeta::default() }
    }

    pub fn from_occupancy(resolution: usize, occupancy: Vec<u8>) -> Result<Self, GeometryError> {
        if resolution == 0 || occupancy.len() != resolution.pow(3) {
            return Err(GeometryError::InvalidGrid(format!(
                "expected {} cells for resolution {resolution}, got {}",
                resolution.pow(3),
                occupancy.len()
            )));
        }
        if let Some(v) = occupancy.iter().find(|&&v| v > 1) {
            return Err(GeometryError::InvalidGrid(format!("occupancy value {v} is not 0 or 1")));
        }
        Ok(Self { resolution, occupancy, meta: VoxelMeta::default() })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[self.index(i, j, k)] != 0
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.occupancy[idx] = value as u8;
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&v| v != 0).count()
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.meta.source_id = id.into();
        self
    }

    /// Occupancy as 0.0/1.0 reals, same linearization.
    pub fn as_reals<T: From<u8>>(&self) -> Vec<T> {
        self.occupancy.iter().map(|&v| T::from(v)).collect()
    }
}

fn check_resolution(n: usize) -> Result<(), GeometryError> {
    if n < 2 {
        Err(GeometryError::Resolution(n))
    } else {
        Ok(())
    }
}

/// Voxelizes by center-point membership after fitting the solid's box into
/// the unit cube. Interior cells are included by construction.
pub fn voxelize_solid(solid: &CsgSolid, resolution: usize) -> Result<VoxelGrid, GeometryError> {
    solid.validate()?;
    check_resolution(resolution)?;
    let norm = Normalization::fit(&solid.aabb())?;
    voxelize_solid_with(solid, &norm, resolution)
}

/// Same as [`voxelize_solid`] but in a caller-supplied frame, so several
/// solids can be sampled on one lattice.
pub fn voxelize_solid_with(
    solid: &CsgSolid,
    norm: &Normalization,
    resolution: usize,
) -> Result<VoxelGrid, GeometryError> {
    solid.validate()?;
    check_resolution(resolution)?;
    let n = resolution;
    let inv = 1.0 / n as f64;
    let mut grid = VoxelGrid::empty(n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let q = [(i as f64 + 0.5) * inv, (j as f64 + 0.5) * inv, (k as f64 + 0.5) * inv];
                if solid.contains(norm.to_world(q)) {
                    grid.set(i, j, k, true);
                }
            }
        }
    }
    grid.meta.normalization = Some(*norm);
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::super::csg::{Axis, Primitive};
    use super::*;

    #[test]
    fn cube_fills_grid() {
        let cube: CsgSolid = Primitive::Cuboid { center: [3.0, -1.0, 7.0], size: [5.0; 3] }.into();
        let g = voxelize_solid(&cube, 16).unwrap();
        assert_eq!(g.count(), 4096);
    }

    #[test]
    fn flat_solid_is_degenerate() {
        // Two boxes touching in a plane: the intersection box has zero width.
        let s = CsgSolid::Intersection(vec![
            Primitive::Cuboid { center: [0.0; 3], size: [1.0; 3] }.into(),
            Primitive::Cuboid { center: [1.0, 0.0, 0.0], size: [1.0; 3] }.into(),
        ]);
        assert!(matches!(voxelize_solid(&s, 16), Err(GeometryError::DegenerateAabb(_))));
        let cube: CsgSolid = Primitive::Cuboid { center: [0.0; 3], size: [1.0; 3] }.into();
        assert!(matches!(voxelize_solid(&cube, 1), Err(GeometryError::Resolution(1))));
    }

    #[test]
    fn x_fastest_layout() {
        // Unit cube inside an enlarged frame.
        let solid: CsgSolid = CsgSolid::Union(vec![
            Primitive::Cuboid { center: [0.5, 0.5, 0.5], size: [1.0; 3] }.into(),
        ]);
        let norm = Normalization { center: [0.5, 0.5, 0.5], scale: 0.25 };
        // In this frame the unit cube occupies [0.375, 0.625]^3 of the lattice.
        let g = voxelize_solid_with(&solid, &norm, 8).unwrap();
        assert!(g.get(3, 3, 3) && g.get(4, 4, 4));
        assert!(!g.get(2, 3, 3));
        assert_eq!(g.count(), 8);
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 8);
        assert_eq!(g.index(0, 0, 1), 64);
    }

    #[test]
    fn cylinder_matches_disc_count() {
        let cyl: CsgSolid = Primitive::Cylinder { center: [0.0; 3], axis: Axis::Z, radius: 1.0, height: 2.0 }.into();
        let g = voxelize_solid(&cyl, 4).unwrap();
        // 4x4 lattice, centers at ±0.25, ±0.75 of a unit-radius disc (scaled):
        // corner centers (0.75,0.75) have radius 1.06 > 1 -> excluded.
        assert_eq!(g.count(), 12 * 4);
    }
}
