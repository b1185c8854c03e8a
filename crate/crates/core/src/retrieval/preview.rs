//! Viewable exports of voxel grids.

use serde::{Deserialize, Serialize};

use crate::geometry::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreviewFormat {
    /// One unwelded unit cube per occupied voxel.
    Obj,
    /// `N` binary PGM images, one per z slice, concatenated.
    PgmSlices,
}

impl PreviewFormat {
    pub fn extension(self) -> &'static str {
        match self {
            PreviewFormat::Obj => "obj",
            PreviewFormat::PgmSlices => "pgm",
        }
    }
}

/// Corners of the unit cube; bit 0 is x, bit 1 is y, bit 2 is z.
const CORNERS: [[usize; 3]; 8] = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]];

/// Outward-facing triangles over [`CORNERS`].
const FACES: [[usize; 3]; 12] = [
    [0, 2, 1],
    [1, 2, 3],
    [4, 5, 6],
    [5, 7, 6],
    [0, 1, 4],
    [1, 5, 4],
    [2, 6, 3],
    [3, 6, 7],
    [0, 4, 2],
    [2, 4, 6],
    [1, 3, 5],
    [3, 7, 5],
];

pub fn export_preview(grid: &VoxelGrid, format: PreviewFormat) -> Vec<u8> {
    match format {
        PreviewFormat::Obj => to_obj(grid).into_bytes(),
        PreviewFormat::PgmSlices => to_pgm_slices(grid),
    }
}

fn to_obj(grid: &VoxelGrid) -> String {
    let n = grid.resolution();
    let mut out = format!("# voxel preview, {n}^3 grid, {} occupied voxels\n", grid.count());
    let mut faces = String::new();
    let mut base = 1;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if !grid.get(i, j, k) {
                    continue;
                }
                for c in CORNERS {
                    out.push_str(&format!("v {} {} {}\n", i + c[0], j + c[1], k + c[2]));
                }
                for f in FACES {
                    faces.push_str(&format!("f {} {} {}\n", base + f[0], base + f[1], base + f[2]));
                }
                base += 8;
            }
        }
    }
    out + &faces
}

/// Slice `k` is an `N×N` image whose row `r` is grid row `j = N−1−r`, so
/// +y points up; occupied voxels are 255.
fn to_pgm_slices(grid: &VoxelGrid) -> Vec<u8> {
    let n = grid.resolution();
    let mut out = Vec::new();
    for k in 0..n {
        out.extend_from_slice(format!("P5\n{n} {n}\n255\n").as_bytes());
        for r in 0..n {
            let j = n - 1 - r;
            out.extend((0..n).map(|i| if grid.get(i, j, k) { 255u8 } else { 0 }));
        }
    }
    out
}
