//! Raw plot-data emission: sign maps as CSV and PPM images, trajectory
//! traces as CSV. No plotting library — the artifacts are plain files any
//! generic reader loads.
//!
//! The n = 3 PPM is an equirectangular projection. Pixel directions are
//! located in the mesh by descending the icosphere quadtree (cell `i` at one
//! level has children `4i..4i+4` at the next, mirroring mesh construction),
//! so rasterization costs O(level) containment tests per pixel instead of a
//! scan over all cells.

use crate::flow::TraceSample;
use crate::mesh::{base_icosahedron, det3, normalize3};
use crate::region::{CellLabel, RegionComplex};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// One labelled trajectory for CSV export.
pub struct TraceSeries<'a> {
    /// Identifier column value (e.g. seed index in the census).
    pub label: String,
    pub samples: &'a [TraceSample],
}

/// Sign map as per-cell rows: cell id, vertex coordinates, label.
pub fn sign_map_csv(rc: &RegionComplex) -> String {
    let mesh = rc.mesh();
    let n = mesh.n();
    let verts_per_cell = if n == 2 { 2 } else { 3 };
    let coords = ["x", "y", "z"];
    let mut out = String::new();
    out.push_str("cell");
    for v in 0..verts_per_cell {
        for c in coords.iter().take(n) {
            let _ = write!(out, ",v{v}_{c}");
        }
    }
    out.push_str(",label\n");
    for (cell, label) in rc.labels().iter().enumerate() {
        let _ = write!(out, "{cell}");
        for &vi in mesh.cell(cell) {
            for &c in mesh.vertex(vi) {
                let _ = write!(out, ",{c}");
            }
        }
        let _ = writeln!(out, ",{label}");
    }
    out
}

/// Trajectory traces: one row per accepted integrator step, columns
/// `trajectory, t, <variables...>, f, radius, ell_running`.
pub fn trajectory_csv(series: &[TraceSeries<'_>], variables: &[String]) -> String {
    let mut out = String::new();
    out.push_str("trajectory,t");
    for v in variables {
        let _ = write!(out, ",{v}");
    }
    out.push_str(",f,radius,ell_running\n");
    for s in series {
        for sample in s.samples {
            let _ = write!(out, "{},{}", s.label, sample.t);
            for c in &sample.x {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                sample.f_value, sample.radius, sample.ell_running
            );
        }
    }
    out
}

const NEG_RGB: [u8; 3] = [59, 76, 192];
const POS_RGB: [u8; 3] = [180, 4, 38];
const UNCERTIFIED_RGB: [u8; 3] = [128, 128, 128];

fn label_rgb(label: CellLabel) -> [u8; 3] {
    match label {
        CellLabel::NegCertified => NEG_RGB,
        CellLabel::PosCertified => POS_RGB,
        CellLabel::Uncertified => UNCERTIFIED_RGB,
    }
}

fn ppm_header(width: usize, height: usize) -> Vec<u8> {
    format!("P6\n{width} {height}\n255\n").into_bytes()
}

/// Binary PPM (P6) rendering of a sign map: an angle strip for n = 2, an
/// equirectangular projection (longitude x latitude) for n = 3.
pub fn sign_map_ppm(rc: &RegionComplex) -> Vec<u8> {
    match rc.mesh().n() {
        2 => circle_strip_ppm(rc, 1024, 64),
        3 => equirectangular_ppm(rc, 720, 360),
        _ => unreachable!("meshes exist only for n = 2, 3"),
    }
}

fn circle_strip_ppm(rc: &RegionComplex, width: usize, height: usize) -> Vec<u8> {
    let m = rc.mesh().num_cells();
    let mut img = ppm_header(width, height);
    let mut row = Vec::with_capacity(width * 3);
    for px in 0..width {
        let theta = 2.0 * PI * (px as f64 + 0.5) / width as f64;
        // Circle cell k spans angles [2πk/m, 2π(k+1)/m).
        let cell = ((theta / (2.0 * PI) * m as f64) as usize).min(m - 1);
        row.extend_from_slice(&label_rgb(rc.labels()[cell]));
    }
    for _ in 0..height {
        img.extend_from_slice(&row);
    }
    img
}

/// Locates the leaf cell containing unit direction `p` by quadtree descent
/// from the base icosahedron. Containment is scored by the minimum signed
/// edge determinant; on boundaries any adjacent cell is acceptable for a
/// raster image.
pub(crate) fn locate_icosphere_cell(p: [f64; 3], level: u32) -> usize {
    let (unit, faces) = base_icosahedron();
    let score = |a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]| -> f64 {
        det3(a, b, &p).min(det3(b, c, &p)).min(det3(c, a, &p))
    };
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    let mut corners = [[0.0; 3]; 3];
    for (i, f) in faces.iter().enumerate() {
        let s = score(&unit[f[0]], &unit[f[1]], &unit[f[2]]);
        if s > best_score {
            best_score = s;
            best = i;
            corners = [unit[f[0]], unit[f[1]], unit[f[2]]];
        }
    }
    let mut index = best;
    for _ in 0..level {
        let [a, b, c] = corners;
        let mid = |u: [f64; 3], v: [f64; 3]| {
            normalize3([
                (u[0] + v[0]) / 2.0,
                (u[1] + v[1]) / 2.0,
                (u[2] + v[2]) / 2.0,
            ])
        };
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        // Children in mesh construction order: corner a, corner b, corner c,
        // center.
        let children = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]];
        let mut child_best = 0usize;
        let mut child_score = f64::NEG_INFINITY;
        for (k, tri) in children.iter().enumerate() {
            let s = score(&tri[0], &tri[1], &tri[2]);
            if s > child_score {
                child_score = s;
                child_best = k;
            }
        }
        corners = children[child_best];
        index = index * 4 + child_best;
    }
    index
}

fn equirectangular_ppm(rc: &RegionComplex, width: usize, height: usize) -> Vec<u8> {
    let mesh = rc.mesh();
    let level = mesh.refinement_level();
    let mut img = ppm_header(width, height);
    for py in 0..height {
        let lat = PI / 2.0 - PI * (py as f64 + 0.5) / height as f64;
        for px in 0..width {
            let lon = 2.0 * PI * (px as f64 + 0.5) / width as f64 - PI;
            let p = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
            let cell = locate_icosphere_cell(p, level);
            img.extend_from_slice(&label_rgb(rc.labels()[cell]));
        }
    }
    img
}
