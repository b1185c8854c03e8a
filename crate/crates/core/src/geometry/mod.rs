//! Rod solids, STL meshes, and their voxelization into N³ occupancy grids.

mod build;
mod csg;
mod mesh_voxel;
mod stl;
mod voxel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::AttrRef;

pub use build::{build_solid, SizeMap, ENVELOPE_MM};
pub use csg::{Axis, CsgSolid, Primitive};
pub use mesh_voxel::{mesh_aabb, triangle_box_overlap, voxelize_mesh, FillMode};
pub use stl::{parse_stl, write_stl, StlFormat, Triangle, TriangleMesh};
pub use voxel::{
    voxelize_solid, voxelize_solid_with, Normalization, VoxelGrid, VoxelMeta, DEFAULT_RESOLUTION,
};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: std::array::from_fn(|i| self.min[i].min(other.min[i])),
            max: std::array::from_fn(|i| self.max[i].max(other.max[i])),
        }
    }

    /// May be inverted (min > max) when the boxes are disjoint.
    pub fn intersection(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: std::array::from_fn(|i| self.min[i].max(other.min[i])),
            max: std::array::from_fn(|i| self.max[i].min(other.max[i])),
        }
    }

    pub fn extent(&self) -> Vec3 {
        std::array::from_fn(|i| self.max[i] - self.min[i])
    }

    pub fn center(&self) -> Vec3 {
        std::array::from_fn(|i| (self.min[i] + self.max[i]) * 0.5)
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("truncated STL: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed STL{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Stl { line: Option<usize>, message: String },
    #[error("invalid solid: {0}")]
    InvalidSolid(String),
    #[error("infeasible geometry: {constraint}")]
    Infeasible { constraint: String },
    #[error("no concrete size for the {} of the {}", .0.attribute, .0.entity)]
    MissingSize(AttrRef),
    #[error("degenerate bounding box {0:?}")]
    DegenerateAabb(Aabb),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("mesh is not watertight: open edge near {point:?} (cell {cell:?})")]
    NotWatertight { cell: [usize; 3], point: Vec3 },
    #[error("resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}
