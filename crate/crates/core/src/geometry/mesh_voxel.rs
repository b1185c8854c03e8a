//! Mesh voxelization: surface cells by separating-axis triangle/box tests,
//! interior by an exterior flood fill that may not cross the surface.

use std::collections::{HashMap, VecDeque};

use super::stl::TriangleMesh;
use super::voxel::{Normalization, VoxelGrid};
use super::{Aabb, GeometryError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillMode {
    /// Surface plus enclosed interior; requires a closed mesh.
    #[default]
    Solid,
    SurfaceOnly,
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Separating-axis test between a triangle and an axis-aligned box.
///
/// With `open` set, the box interior is used: touching contact does not
/// count as overlap. Otherwise the closed box is used. A half-extent may be
/// zero (a face square).
pub fn triangle_box_overlap(center: Vec3, half: Vec3, tri: &[Vec3; 3], open: bool) -> bool {
    let v = [sub(tri[0], center), sub(tri[1], center), sub(tri[2], center)];
    let edges = [sub(v[1], v[0]), sub(v[2], v[1]), sub(v[0], v[2])];

    let separated = |axis: Vec3| -> bool {
        if axis == [0.0; 3] {
            return false;
        }
        let p = [dot(axis, v[0]), dot(axis, v[1]), dot(axis, v[2])];
        let lo = p[0].min(p[1]).min(p[2]);
        let hi = p[0].max(p[1]).max(p[2]);
        let r = half[0] * axis[0].abs() + half[1] * axis[1].abs() + half[2] * axis[2].abs();
        if open {
            lo >= r || hi <= -r
        } else {
            lo > r || hi < -r
        }
    };

    const UNIT: [Vec3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if UNIT.iter().any(|&a| separated(a)) {
        return false;
    }
    if separated(cross(edges[0], edges[1])) {
        return false;
    }
    for u in UNIT {
        for e in edges {
            if separated(cross(u, e)) {
                return false;
            }
        }
    }
    true
}

/// Section of a triangle with the plane `x[axis] = p`, as 2D points in the
/// remaining two axes (in cyclic order). Empty when the plane misses it.
fn plane_section(tri: &[Vec3; 3], axis: usize, p: f64) -> Vec<[f64; 2]> {
    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut out = Vec::with_capacity(3);
    for e in 0..3 {
        let a = tri[e];
        let b = tri[(e + 1) % 3];
        let (da, db) = (a[axis] - p, b[axis] - p);
        if da == 0.0 {
            out.push([a[u], a[w]]);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push([a[u] + t * (b[u] - a[u]), a[w] + t * (b[w] - a[w])]);
        }
    }
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Whether the convex hull of `points` meets the open unit square at
/// `center`. Separating axes: the square's normals plus every pairwise
/// edge normal of the point set.
fn hits_open_square(points: &[[f64; 2]], center: [f64; 2]) -> bool {
    let separated = |axis: [f64; 2]| -> bool {
        if axis == [0.0; 2] {
            return false;
        }
        let r = 0.5 * (axis[0].abs() + axis[1].abs());
        let (lo, hi) = bounds(points.iter().map(|q| axis[0] * (q[0] - center[0]) + axis[1] * (q[1] - center[1])));
        lo >= r || hi <= -r
    };
    if separated([1.0, 0.0]) || separated([0.0, 1.0]) {
        return false;
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = [points[j][0] - points[i][0], points[j][1] - points[i][1]];
            if separated([-d[1], d[0]]) {
                return false;
            }
        }
    }
    true
}

/// Mesh box in f64.
pub fn mesh_aabb(mesh: &TriangleMesh) -> Option<Aabb> {
    let mut it = mesh.triangles.iter().flat_map(|t| t.vertices.iter());
    let first = it.next()?;
    let start = Aabb::new(first.map(f64::from), first.map(f64::from));
    Some(it.fold(start, |b, v| b.union(&Aabb::new(v.map(f64::from), v.map(f64::from)))))
}

/// Edges used by an odd number of triangles, in first-seen order.
fn open_edges(mesh: &TriangleMesh) -> Vec<(Vec3, Vec3)> {
    type Key = ([u32; 3], [u32; 3]);
    let key = |v: [f32; 3]| v.map(f32::to_bits);
    let mut counts: HashMap<Key, (usize, usize)> = HashMap::new();
    let mut order = Vec::new();
    for t in &mesh.triangles {
        for e in 0..3 {
            let (a, b) = (key(t.vertices[e]), key(t.vertices[(e + 1) % 3]));
            let k = if a <= b { (a, b) } else { (b, a) };
            let entry = counts.entry(k).or_insert_with(|| {
                order.push((t.vertices[e], t.vertices[(e + 1) % 3]));
                (order.len() - 1, 0)
            });
            entry.1 += 1;
        }
    }
    let mut odd: Vec<(usize, Vec3, Vec3)> = counts
        .values()
        .filter(|(_, c)| c % 2 == 1)
        .map(|&(i, _)| (i, order[i].0.map(f64::from), order[i].1.map(f64::from)))
        .collect();
    odd.sort_by_key(|e| e.0);
    odd.into_iter().map(|(_, a, b)| (a, b)).collect()
}

/// Voxelizes a triangle mesh into an N³ grid using the same AABB
/// normalization as solid voxelization.
pub fn voxelize_mesh(mesh: &TriangleMesh, resolution: usize, mode: FillMode) -> Result<VoxelGrid, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if resolution < 2 {
        return Err(GeometryError::Resolution(resolution));
    }
    if !mesh.is_finite() {
        return Err(GeometryError::InvalidGrid("mesh has non-finite coordinates".into()));
    }
    let aabb = mesh_aabb(mesh).expect("non-empty mesh");
    let norm = Normalization::fit(&aabb)?;
    let n = resolution;
    let nf = n as f64;
    let to_grid = |p: Vec3| norm.to_unit(p).map(|c| c * nf);

    if mode == FillMode::Solid {
        if let Some((a, b)) = open_edges(mesh).first() {
            let mid = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5, (a[2] + b[2]) * 0.5];
            let g = to_grid(mid);
            let cell = g.map(|c| (c.floor().max(0.0) as usize).min(n - 1));
            return Err(GeometryError::NotWatertight { cell, point: mid });
        }
    }

    let tris: Vec<[Vec3; 3]> = mesh
        .triangles
        .iter()
        .map(|t| [to_grid(t.vertices[0].map(f64::from)), to_grid(t.vertices[1].map(f64::from)), to_grid(t.vertices[2].map(f64::from))])
        .collect();

    let mut grid = VoxelGrid::empty(n);
    let clamp_lo = |x: f64| (x.floor().max(0.0) as usize).min(n - 1);
    let clamp_hi = |x: f64| (x.floor().max(0.0) as usize).min(n - 1);
    for tri in &tris {
        let lo: [usize; 3] = std::array::from_fn(|a| clamp_lo(tri.iter().map(|v| v[a]).fold(f64::INFINITY, f64::min)));
        let hi: [usize; 3] = std::array::from_fn(|a| clamp_hi(tri.iter().map(|v| v[a]).fold(f64::NEG_INFINITY, f64::max)));
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let c = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
                    if !grid.get(i, j, k) && triangle_box_overlap(c, [0.5; 3], tri, true) {
                        grid.set(i, j, k, true);
                    }
                }
            }
        }
    }
    grid.meta.normalization = Some(norm);
    if mode == FillMode::SurfaceOnly {
        return Ok(grid);
    }

    // Padded lattice of (n+2)^3 cells; cell (i,j,k) of the grid sits at
    // (i+1,j+1,k+1). A face between neighbours is blocked when the surface
    // meets the face's relative interior, so the fill cannot leak through
    // faces lying exactly on cell boundaries. Together with the surface
    // cells this blocks every path whose straight segment crosses a triangle.
    let m = n + 2;
    let pidx = |i: usize, j: usize, k: usize| (k * m + j) * m + i;
    // blocked[axis][pidx of the cell on the low side]
    let mut blocked = vec![vec![false; m * m * m]; 3];
    for tri in &tris {
        for axis in 0..3 {
            let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
            let amin = tri.iter().map(|v| v[axis]).fold(f64::INFINITY, f64::min);
            let amax = tri.iter().map(|v| v[axis]).fold(f64::NEG_INFINITY, f64::max);
            // Planes at integer coordinate p in 0..=n.
            let p0 = amin.ceil().max(0.0) as usize;
            let p1 = (amax.floor().min(nf)) as usize;
            if amax < 0.0 || p0 > p1 {
                continue;
            }
            // Face squares span [c, c+1] in u and w, c in -1..=n (padded).
            let span = |lo: f64, hi: f64| {
                let a = (lo.floor() - 1.0).max(-1.0) as i64;
                let b = (hi.floor()).min(nf) as i64;
                a..=b
            };
            for p in p0..=p1 {
                let section = plane_section(tri, axis, p as f64);
                if section.is_empty() {
                    continue;
                }
                let (su0, su1) = bounds(section.iter().map(|q| q[0]));
                let (sw0, sw1) = bounds(section.iter().map(|q| q[1]));
                for cu in span(su0, su1) {
                    for cw in span(sw0, sw1) {
                        let center = [cu as f64 + 0.5, cw as f64 + 0.5];
                        if hits_open_square(&section, center) {
                            // Low-side cell along `axis` has grid index p-1,
                            // padded index p.
                            let mut cell = [0usize; 3];
                            cell[axis] = p;
                            cell[u] = (cu + 1) as usize;
                            cell[w] = (cw + 1) as usize;
                            blocked[axis][pidx(cell[0], cell[1], cell[2])] = true;
                        }
                    }
                }
            }
        }
    }

    let mut exterior = vec![false; m * m * m];
    let mut queue = VecDeque::new();
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                if i == 0 || j == 0 || k == 0 || i == m - 1 || j == m - 1 || k == m - 1 {
                    exterior[pidx(i, j, k)] = true;
                    queue.push_back([i, j, k]);
                }
            }
        }
    }
    let surface = |c: [usize; 3]| -> bool {
        let inside = (0..3).all(|a| c[a] >= 1 && c[a] <= n);
        inside && grid.get(c[0] - 1, c[1] - 1, c[2] - 1)
    };
    while let Some(c) = queue.pop_front() {
        for axis in 0..3 {
            // Step +1 along axis.
            if c[axis] + 1 < m && !blocked[axis][pidx(c[0], c[1], c[2])] {
                let mut nb = c;
                nb[axis] += 1;
                let id = pidx(nb[0], nb[1], nb[2]);
                if !exterior[id] && !surface(nb) {
                    exterior[id] = true;
                    queue.push_back(nb);
                }
            }
            // Step -1 along axis.
            if c[axis] >= 1 {
                let mut nb = c;
                nb[axis] -= 1;
                if !blocked[axis][pidx(nb[0], nb[1], nb[2])] {
                    let id = pidx(nb[0], nb[1], nb[2]);
                    if !exterior[id] && !surface(nb) {
                        exterior[id] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
    }

    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if !exterior[pidx(i + 1, j + 1, k + 1)] {
                    grid.set(i, j, k, true);
                }
            }
        }
    }
    Ok(grid)
}
