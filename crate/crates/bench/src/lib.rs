//! Benchmark fixtures shared by the criterion targets.

use rodfind_core::dataset::{concrete_sizes, default_bases, size_combinations};
use rodfind_core::geometry::{build_solid, voxelize_solid, CsgSolid, VoxelGrid};
use rodfind_core::FeatureSchema;

/// CSG solid of the first size combination of shipped base `base`.
pub fn rod_solid(base: usize) -> CsgSolid {
    let schema = FeatureSchema::linking_rod();
    let spec = &size_combinations(&default_bases()[base], &schema)[0];
    build_solid(spec, &concrete_sizes(spec)).expect("shipped bases build")
}

pub fn rod_grid(base: usize, resolution: usize) -> VoxelGrid {
    voxelize_solid(&rod_solid(base), resolution).expect("shipped bases voxelize")
}
