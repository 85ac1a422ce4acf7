//! Sphere meshes: a regular polygon on the circle (n = 2) and a subdivided
//! icosahedron on the 2-sphere (n = 3).
//!
//! Cells are arcs or spherical triangles given by vertex indices; triangle
//! orientation is outward (counter-clockwise seen from outside), which the
//! topological-degree computation relies on. Vertex order is deterministic.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("sphere meshes exist only for dimensions 2 and 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("mesh radius must be a positive finite number, got {0}")]
    NonPositiveRadius(f64),
}

/// Triangulated (or arc-divided) sphere of a given radius.
///
/// `vertices` hold length-`n` points with |v| = radius; `cells` hold vertex
/// index pairs (arcs) or triples (triangles); `neighbors` is the symmetric
/// shared-facet relation (shared vertex for arcs, shared edge for triangles).
#[derive(Debug, Clone)]
pub struct SphericalMesh {
    n: usize,
    radius: f64,
    level: u32,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
    cell_fractions: Vec<f64>,
}

pub fn build_mesh(n: usize, radius: f64, level: u32) -> Result<SphericalMesh, MeshError> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(MeshError::NonPositiveRadius(radius));
    }
    match n {
        2 => Ok(build_circle(radius, level)),
        3 => Ok(build_icosphere(radius, level)),
        other => Err(MeshError::UnsupportedDimension(other)),
    }
}

fn build_circle(radius: f64, level: u32) -> SphericalMesh {
    let m = 1usize << (level + 4);
    let mut vertices = Vec::with_capacity(m);
    for k in 0..m {
        let theta = 2.0 * std::f64::consts::PI * (k as f64) / (m as f64);
        // cos(0) = 1 exactly, so vertex 0 sits exactly at angle zero.
        vertices.push(vec![radius * theta.cos(), radius * theta.sin()]);
    }
    let cells: Vec<Vec<usize>> = (0..m).map(|k| vec![k, (k + 1) % m]).collect();
    let neighbors: Vec<Vec<usize>> = (0..m).map(|k| vec![(k + m - 1) % m, (k + 1) % m]).collect();
    let cell_fractions = vec![1.0 / m as f64; m];
    SphericalMesh {
        n: 2,
        radius,
        level,
        vertices,
        cells,
        neighbors,
        cell_fractions,
    }
}

/// Normalizes to the unit sphere, returning exact signed basis vectors for
/// axis-aligned directions so that symmetry axes of the input survive
/// floating-point normalization exactly.
pub(crate) fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let zeros = v.iter().filter(|&&c| c == 0.0).count();
    if zeros == 2 {
        let mut out = [0.0; 3];
        for i in 0..3 {
            if v[i] != 0.0 {
                out[i] = v[i].signum();
            }
        }
        return out;
    }
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / norm, v[1] / norm, v[2] / norm]
}

pub(crate) fn det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Unit icosahedron with outward-oriented faces — the level-0 state of
/// [`build_mesh`] for n = 3. Each refinement level replaces face `i` by its
/// four children `4i..4i+4` (corner at vertex 0, corner at vertex 1, corner
/// at vertex 2, center), so cell indices at any level form a quadtree over
/// these faces; consumers may descend it geometrically.
pub(crate) fn base_icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let unit: Vec<[f64; 3]> = raw.iter().map(|&v| normalize3(v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    // Enforce outward orientation regardless of the seed face listing.
    for f in &mut faces {
        if det3(&unit[f[0]], &unit[f[1]], &unit[f[2]]) < 0.0 {
            f.swap(1, 2);
        }
    }
    (unit, faces)
}

fn build_icosphere(radius: f64, level: u32) -> SphericalMesh {
    let (mut unit, mut faces) = base_icosahedron();
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mid = |cache: &mut HashMap<(usize, usize), usize>,
                       verts: &mut Vec<[f64; 3]>,
                       i: usize,
                       j: usize| {
                let key = (i.min(j), i.max(j));
                *cache.entry(key).or_insert_with(|| {
                    let a = verts[i];
                    let b = verts[j];
                    let m = normalize3([
                        (a[0] + b[0]) / 2.0,
                        (a[1] + b[1]) / 2.0,
                        (a[2] + b[2]) / 2.0,
                    ]);
                    verts.push(m);
                    verts.len() - 1
                })
            };
            let ab = mid(&mut midpoint, &mut unit, f[0], f[1]);
            let bc = mid(&mut midpoint, &mut unit, f[1], f[2]);
            let ca = mid(&mut midpoint, &mut unit, f[2], f[0]);
            next.push([f[0], ab, ca]);
            next.push([ab, f[1], bc]);
            next.push([ca, bc, f[2]]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let vertices: Vec<Vec<f64>> = unit
        .iter()
        .map(|v| vec![v[0] * radius, v[1] * radius, v[2] * radius])
        .collect();
    // Shared-edge adjacency.
    let mut edge_map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (ci, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edge_map.entry((a.min(b), a.max(b))).or_default().push(ci);
        }
    }
    let mut neighbors = vec![Vec::with_capacity(3); faces.len()];
    for cells in edge_map.values() {
        debug_assert_eq!(
            cells.len(),
            2,
            "every edge must bound exactly two triangles"
        );
        neighbors[cells[0]].push(cells[1]);
        neighbors[cells[1]].push(cells[0]);
    }
    let total = 4.0 * std::f64::consts::PI;
    let cell_fractions: Vec<f64> = faces
        .iter()
        .map(|f| {
            spherical_triangle_solid_angle(&unit[f[0]], &unit[f[1]], &unit[f[2]]).abs() / total
        })
        .collect();
    let cells: Vec<Vec<usize>> = faces.iter().map(|f| f.to_vec()).collect();
    SphericalMesh {
        n: 3,
        radius,
        level,
        vertices,
        cells,
        neighbors,
        cell_fractions,
    }
}

impl SphericalMesh {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn refinement_level(&self) -> u32 {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn cell(&self, i: usize) -> &[usize] {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn neighbors(&self, cell: usize) -> &[usize] {
        &self.neighbors[cell]
    }

    /// Spherical measure of the cell as a fraction of the whole sphere.
    pub fn cell_fraction(&self, cell: usize) -> f64 {
        self.cell_fractions[cell]
    }

    /// Vertex positions of a cell, in cell order.
    pub fn cell_vertices(&self, cell: usize) -> Vec<&[f64]> {
        self.cells[cell].iter().map(|&v| self.vertex(v)).collect()
    }

    /// Vertex-to-vertex adjacency along cell edges (used to cluster seed
    /// points of the trajectory census).
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        let push = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
            if !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        };
        for cell in &self.cells {
            for k in 0..cell.len() {
                let (a, b) = (cell[k], cell[(k + 1) % cell.len()]);
                if a != b {
                    push(&mut adj, a, b);
                }
            }
        }
        adj
    }

    /// (V, E, F) of the full complex, for Euler-characteristic checks.
    pub fn euler_counts(&self) -> (usize, usize, usize) {
        let v = self.vertices.len();
        let mut edges = std::collections::HashSet::new();
        for cell in &self.cells {
            for k in 0..cell.len() {
                let (a, b) = (cell[k], cell[(k + 1) % cell.len()]);
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
        (v, edges.len(), self.cells.len())
    }
}

/// Signed solid angle of the spherical triangle with unit-vector vertices
/// `a, b, c`, positive for outward (counter-clockwise) orientation.
pub fn spherical_triangle_solid_angle(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let det = det3(a, b, c);
    let dot_ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let dot_bc = b[0] * c[0] + b[1] * c[1] + b[2] * c[2];
    let dot_ca = c[0] * a[0] + c[1] * a[1] + c[2] * a[2];
    let denom = 1.0 + dot_ab + dot_bc + dot_ca;
    2.0 * det.atan2(denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_counts_match_construction() {
        assert_eq!(build_mesh(2, 1.0, 0).unwrap().num_cells(), 16);
        assert_eq!(build_mesh(3, 1.0, 0).unwrap().num_cells(), 20);
        assert_eq!(build_mesh(3, 1.0, 2).unwrap().num_cells(), 320);
    }

    #[test]
    fn rejects_unsupported_dimension() {
        assert!(build_mesh(4, 1.0, 0).is_err());
        assert!(build_mesh(1, 1.0, 0).is_err());
        assert!(build_mesh(2, 0.0, 0).is_err());
    }

    #[test]
    fn euler_counts_give_sphere_characteristic() {
        for level in 0..4 {
            let m = build_mesh(3, 1.0, level).unwrap();
            let (v, e, f) = m.euler_counts();
            assert_eq!(v as i64 - e as i64 + f as i64, 2, "level {level}");
            let c = build_mesh(2, 1.0, level).unwrap();
            let (v, e, _) = c.euler_counts();
            assert_eq!(v, e, "circle V = E at level {level}");
        }
    }

    #[test]
    fn every_edge_bounds_two_triangles() {
        let m = build_mesh(3, 1.0, 2).unwrap();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for cell in m.cells() {
            for k in 0..3 {
                let (a, b) = (cell[k], cell[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        assert!(edge_count.values().all(|&c| c == 2));
        for (ci, nbrs) in (0..m.num_cells()).map(|c| (c, m.neighbors(c))) {
            assert_eq!(nbrs.len(), 3);
            for &nb in nbrs {
                assert!(m.neighbors(nb).contains(&ci), "adjacency must be symmetric");
            }
        }
    }

    /// Subdividing once puts the six unit-axis points on the mesh exactly:
    /// the icosahedron has edges whose midpoints are axis-aligned, and
    /// normalization maps axis-aligned vectors to exact signed basis vectors.
    #[test]
    fn level_one_contains_exact_axis_vertices() {
        for radius in [1.0, 0.25] {
            let m = build_mesh(3, radius, 1).unwrap();
            for axis in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut target = vec![0.0; 3];
                    target[axis] = sign * radius;
                    assert!(
                        (0..m.num_vertices()).any(|i| m.vertex(i) == target.as_slice()),
                        "missing exact vertex {target:?} at radius {radius}"
                    );
                }
            }
        }
    }

    #[test]
    fn triangles_are_outward_oriented() {
        for level in 0..3 {
            let m = build_mesh(3, 1.0, level).unwrap();
            for i in 0..m.num_cells() {
                let vs = m.cell_vertices(i);
                assert!(
                    det3(vs[0], vs[1], vs[2]) > 0.0,
                    "inward-facing cell {i} at level {level}"
                );
            }
        }
    }

    #[test]
    fn cell_fractions_sum_to_one() {
        for (n, level) in [(2, 3), (3, 0), (3, 2)] {
            let m = build_mesh(n, 1.0, level).unwrap();
            let total: f64 = (0..m.num_cells()).map(|c| m.cell_fraction(c)).sum();
            assert!((total - 1.0).abs() < 1e-9, "n={n} level={level}: {total}");
        }
    }

    #[test]
    fn circle_vertex_zero_is_exact() {
        let m = build_mesh(2, 0.125, 2).unwrap();
        assert_eq!(m.vertex(0), &[0.125, 0.0]);
        for i in 0..m.num_vertices() {
            let v = m.vertex(i);
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!((r - 0.125).abs() < 1e-15);
        }
        for c in 0..m.num_cells() {
            assert_eq!(m.neighbors(c).len(), 2);
        }
    }

    #[test]
    fn vertex_adjacency_degrees() {
        let ico = build_mesh(3, 1.0, 0).unwrap();
        let adj = ico.vertex_adjacency();
        assert!(
            adj.iter().all(|nb| nb.len() == 5),
            "icosahedron vertices have degree 5"
        );
        let circle = build_mesh(2, 1.0, 0).unwrap();
        let adj = circle.vertex_adjacency();
        assert!(adj.iter().all(|nb| nb.len() == 2));
    }

    #[test]
    fn solid_angle_octant() {
        // The first-octant triangle covers 1/8 of the sphere: 4π/8 = π/2.
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 1.0, 0.0];
        let c = [0.0, 0.0, 1.0];
        let omega = spherical_triangle_solid_angle(&a, &b, &c);
        assert!((omega - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        // Reversing orientation flips the sign.
        let rev = spherical_triangle_solid_angle(&a, &c, &b);
        assert!((rev + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
