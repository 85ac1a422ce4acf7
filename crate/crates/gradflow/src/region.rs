//! Certified sign regions of a polynomial on a sphere mesh, and their
//! topology (component counts, Euler characteristic, first Betti number).
//!
//! Every cell gets a sound label: `NEG_CERTIFIED` / `POS_CERTIFIED` carry an
//! interval-arithmetic proof that the polynomial is strictly negative /
//! positive on the whole cell; cells whose sign cannot be pinned down after
//! adaptive subdivision stay `UNCERTIFIED`. Counting conventions follow the
//! set definitions: the negative side is the open set {p < 0} (uncertified
//! cells excluded), the positive side is the closed set {p ≥ 0} (uncertified
//! cells included, since the zero locus belongs to it).

use std::sync::Arc;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{range_on_box, DyInterval, Dyadic};
use crate::mesh::SphericalMesh;
use crate::poly::{Monomial, Polynomial};

pub const DEFAULT_CERTIFIED_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("polynomial has {poly} variables but the mesh is {mesh}-dimensional")]
    DimensionMismatch { poly: usize, mesh: usize },
    #[error("radius sweep needs at least 3 strictly decreasing positive radii")]
    BadRadii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellLabel {
    #[serde(rename = "NEG_CERTIFIED")]
    NegCertified,
    #[serde(rename = "POS_CERTIFIED")]
    PosCertified,
    #[serde(rename = "UNCERTIFIED")]
    Uncertified,
}

impl std::fmt::Display for CellLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CellLabel::NegCertified => "NEG_CERTIFIED",
            CellLabel::PosCertified => "POS_CERTIFIED",
            CellLabel::Uncertified => "UNCERTIFIED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Neg,
    Pos,
}

/// Which of the four analyzed sphere regions a summary describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    /// {f < 0} on the small sphere of radius r.
    #[serde(rename = "S_r")]
    SmallSphereNeg,
    /// {f ≥ 0} on the small sphere of radius r.
    #[serde(rename = "S'_r")]
    SmallSpherePos,
    /// {ω < 0} on the unit sphere, ω the initial form.
    #[serde(rename = "Omega")]
    InitialFormNeg,
    /// {ω ≥ 0} on the unit sphere.
    #[serde(rename = "Omega'")]
    InitialFormPos,
}

/// A sphere mesh with per-cell sign labels for one polynomial.
#[derive(Debug, Clone)]
pub struct RegionComplex {
    mesh: Arc<SphericalMesh>,
    labels: Vec<CellLabel>,
    certified_fraction: f64,
}

/// Topological invariants of one side of a region complex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub region: RegionKind,
    pub b0: usize,
    pub euler: i64,
    pub b1: i64,
    pub certified: bool,
}

impl TopologySummary {
    pub fn invariant_triple(&self) -> (usize, i64, i64) {
        (self.b0, self.euler, self.b1)
    }
}

enum CellClass {
    AllNeg,
    AllPos,
    Mixed,
}

/// Labels every mesh cell with a certified sign of `p`, adaptively splitting
/// sign-indeterminate cells up to `max_extra_levels` before giving up.
pub fn classify_region(
    p: &Polynomial,
    mesh: Arc<SphericalMesh>,
    max_extra_levels: u32,
) -> Result<RegionComplex, RegionError> {
    if p.n_vars() != mesh.n() {
        return Err(RegionError::DimensionMismatch {
            poly: p.n_vars(),
            mesh: mesh.n(),
        });
    }
    let terms = p.integer_scaled_terms();
    let radius = mesh.radius();
    let labels: Vec<CellLabel> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let verts: Vec<Vec<f64>> = mesh
                .cell(c)
                .iter()
                .map(|&v| mesh.vertex(v).to_vec())
                .collect();
            match classify_cell(&terms, &verts, radius, max_extra_levels) {
                CellClass::AllNeg => CellLabel::NegCertified,
                CellClass::AllPos => CellLabel::PosCertified,
                CellClass::Mixed => CellLabel::Uncertified,
            }
        })
        .collect();
    let certified_fraction = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| !matches!(l, CellLabel::Uncertified))
        .map(|(c, _)| mesh.cell_fraction(c))
        .sum();
    Ok(RegionComplex {
        mesh,
        labels,
        certified_fraction,
    })
}

fn classify_cell(
    terms: &[(Monomial, BigInt)],
    verts: &[Vec<f64>],
    radius: f64,
    depth: u32,
) -> CellClass {
    let range = range_on_box(terms, &padded_box(verts, radius));
    if range.is_strictly_negative() {
        return CellClass::AllNeg;
    }
    if range.is_strictly_positive() {
        return CellClass::AllPos;
    }
    if depth == 0 {
        return CellClass::Mixed;
    }
    let mut saw_neg = false;
    let mut saw_pos = false;
    for child in split_cell(verts, radius) {
        match classify_cell(terms, &child, radius, depth - 1) {
            CellClass::AllNeg => saw_neg = true,
            CellClass::AllPos => saw_pos = true,
            CellClass::Mixed => return CellClass::Mixed,
        }
        if saw_neg && saw_pos {
            return CellClass::Mixed;
        }
    }
    if saw_neg {
        CellClass::AllNeg
    } else {
        CellClass::AllPos
    }
}

/// Axis-aligned bounding box of the cell's vertex set, padded outward by an
/// upper bound on the cell circumradius. The spherical cell is the radial
/// projection of the flat vertex hull; the projection displaces points by at
/// most R − sqrt(R² − ρ²) ≤ ρ (ρ the planar circumradius), so this box
/// contains the whole curved cell.
fn padded_box(verts: &[Vec<f64>], radius: f64) -> Vec<DyInterval> {
    let n = verts[0].len();
    let pad = Dyadic::from_f64(circumradius_bound(verts, radius) * (1.0 + 1e-9));
    (0..n)
        .map(|i| {
            let mut lo = verts[0][i];
            let mut hi = verts[0][i];
            for v in &verts[1..] {
                lo = lo.min(v[i]);
                hi = hi.max(v[i]);
            }
            DyInterval::new(
                Dyadic::from_f64(lo).sub(&pad),
                Dyadic::from_f64(hi).add(&pad),
            )
        })
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn circumradius_bound(verts: &[Vec<f64>], radius: f64) -> f64 {
    match verts.len() {
        2 => dist(&verts[0], &verts[1]) / 2.0,
        3 => {
            let a = dist(&verts[1], &verts[2]);
            let b = dist(&verts[0], &verts[2]);
            let c = dist(&verts[0], &verts[1]);
            let u: Vec<f64> = (0..3).map(|i| verts[1][i] - verts[0][i]).collect();
            let w: Vec<f64> = (0..3).map(|i| verts[2][i] - verts[0][i]).collect();
            let cross = [
                u[1] * w[2] - u[2] * w[1],
                u[2] * w[0] - u[0] * w[2],
                u[0] * w[1] - u[1] * w[0],
            ];
            let double_area =
                (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
            if double_area < 1e-300 {
                // Degenerate triangle: fall back to the sphere radius, which
                // bounds the circumradius of any inscribed triangle.
                radius
            } else {
                ((a * b * c) / (2.0 * double_area)).min(radius)
            }
        }
        _ => radius,
    }
}

fn to_sphere(mut v: Vec<f64>, radius: f64) -> Vec<f64> {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    for c in &mut v {
        *c = *c / norm * radius;
    }
    v
}

fn midpoint_on_sphere(a: &[f64], b: &[f64], radius: f64) -> Vec<f64> {
    let m: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
    to_sphere(m, radius)
}

/// Splits an arc into 2 arcs or a spherical triangle into 4 triangles at
/// sphere-projected edge midpoints. The children tile the parent exactly:
/// radial projection depends only on the cone over the flat cell, which the
/// midpoint subdivision preserves.
fn split_cell(verts: &[Vec<f64>], radius: f64) -> Vec<Vec<Vec<f64>>> {
    if verts.len() == 2 {
        let m = midpoint_on_sphere(&verts[0], &verts[1], radius);
        vec![vec![verts[0].clone(), m.clone()], vec![m, verts[1].clone()]]
    } else {
        let ab = midpoint_on_sphere(&verts[0], &verts[1], radius);
        let bc = midpoint_on_sphere(&verts[1], &verts[2], radius);
        let ca = midpoint_on_sphere(&verts[2], &verts[0], radius);
        vec![
            vec![verts[0].clone(), ab.clone(), ca.clone()],
            vec![ab.clone(), verts[1].clone(), bc.clone()],
            vec![ca.clone(), bc.clone(), verts[2].clone()],
            vec![ab, bc, ca],
        ]
    }
}

impl RegionComplex {
    pub fn mesh(&self) -> &SphericalMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<SphericalMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    pub fn certified_fraction(&self) -> f64 {
        self.certified_fraction
    }

    /// Membership mask for a side: the open negative side takes only
    /// certified-negative cells; the closed positive side also absorbs
    /// uncertified cells (it owns the zero locus).
    fn side_mask(&self, side: Side) -> Vec<bool> {
        self.labels
            .iter()
            .map(|l| match side {
                Side::Neg => matches!(l, CellLabel::NegCertified),
                Side::Pos => !matches!(l, CellLabel::NegCertified),
            })
            .collect()
    }

    fn components(&self, mask: &[bool]) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(mask.len());
        for (c, &inside) in mask.iter().enumerate() {
            if !inside {
                continue;
            }
            for &nb in self.mesh.neighbors(c) {
                if mask[nb] {
                    uf.union(c, nb);
                }
            }
        }
        let mut roots = Vec::new();
        for (c, &inside) in mask.iter().enumerate() {
            if inside {
                let r = uf.find(c);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        (roots.len(), (0..mask.len()).map(|c| uf.find(c)).collect())
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Number of connected components of one side (union-find over shared
/// facets).
pub fn count_components(rc: &RegionComplex, side: Side) -> usize {
    rc.components(&rc.side_mask(side)).0
}

/// Euler characteristic V − E + F of the sub-complex spanned by the side's
/// cells (n = 3; for n = 2 the convention is χ = b0, handled by
/// `betti_summary`).
pub fn euler_characteristic(rc: &RegionComplex, side: Side) -> i64 {
    let mask = rc.side_mask(side);
    subcomplex_euler(rc.mesh(), &mask)
}

fn subcomplex_euler(mesh: &SphericalMesh, mask: &[bool]) -> i64 {
    let mut verts = std::collections::HashSet::new();
    let mut edges = std::collections::HashSet::new();
    let mut faces = 0i64;
    for (c, &inc) in mask.iter().enumerate() {
        if !inc {
            continue;
        }
        faces += 1;
        let cell = mesh.cell(c);
        for k in 0..cell.len() {
            verts.insert(cell[k]);
            let (a, b) = (cell[k], cell[(k + 1) % cell.len()]);
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    verts.len() as i64 - edges.len() as i64 + faces
}

/// Full topology of one side: b0, χ, b1 and the certification flag.
///
/// For n = 3, b1 = b0 − χ, valid for open subsurfaces of the 2-sphere (and
/// applied to the cell representative of the closed side); a side covering
/// the whole sphere is the sphere itself, (b0, χ, b1) = (1, 2, 0). For
/// n = 2, χ = b0 and b1 = 0. The certified flag demands certified measure at
/// least `threshold`, no uncertified cell adjacent to two different
/// certified components of the side, and (for an empty side) no uncertified
/// cells at all — an uncertified cell could hide an undetected piece.
pub fn betti_summary(
    rc: &RegionComplex,
    side: Side,
    region: RegionKind,
    threshold: f64,
) -> TopologySummary {
    let mask = rc.side_mask(side);
    let (b0, _) = rc.components(&mask);
    let any_uncertified = rc
        .labels()
        .iter()
        .any(|l| matches!(l, CellLabel::Uncertified));
    let n = rc.mesh().n();
    let (euler, b1) = if b0 == 0 {
        (0, 0)
    } else if n == 2 {
        (b0 as i64, 0)
    } else if mask.iter().all(|&m| m) {
        (2, 0)
    } else {
        let chi = subcomplex_euler(rc.mesh(), &mask);
        (chi, b0 as i64 - chi)
    };
    let certified = rc.certified_fraction() >= threshold
        && !uncertified_bridges_components(rc, side)
        && (b0 > 0 || !any_uncertified);
    TopologySummary {
        region,
        b0,
        euler,
        b1,
        certified,
    }
}

/// True when some uncertified cell is facet-adjacent to two distinct
/// components of the side's certified cells — the component count could then
/// change if that cell's true sign were known.
fn uncertified_bridges_components(rc: &RegionComplex, side: Side) -> bool {
    let certified_label = match side {
        Side::Neg => CellLabel::NegCertified,
        Side::Pos => CellLabel::PosCertified,
    };
    let mask: Vec<bool> = rc.labels().iter().map(|&l| l == certified_label).collect();
    let (_, root_of) = rc.components(&mask);
    for (c, l) in rc.labels().iter().enumerate() {
        if !matches!(l, CellLabel::Uncertified) {
            continue;
        }
        let mut seen: Option<usize> = None;
        for &nb in rc.mesh().neighbors(c) {
            if mask[nb] {
                let r = root_of[nb];
                if let Some(prev) = seen {
                    if prev != r {
                        return true;
                    }
                } else {
                    seen = Some(r);
                }
            }
        }
    }
    false
}

/// Topology of both sides of {p ⋛ 0} at one sphere radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusSummary {
    pub radius: f64,
    pub neg: TopologySummary,
    pub pos: TopologySummary,
    pub certified_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub per_radius: Vec<RadiusSummary>,
    /// True when the last three radii agree on (b0, χ, b1) for both sides.
    pub stabilized: bool,
}

impl SweepResult {
    /// The stabilized invariants (last radius), if the sweep stabilized.
    pub fn stable(&self) -> Option<(&TopologySummary, &TopologySummary)> {
        if self.stabilized {
            let last = self.per_radius.last()?;
            Some((&last.neg, &last.pos))
        } else {
            None
        }
    }
}

/// Classifies `p` on spheres of decreasing radii and reports whether the
/// sign-region topology has stabilized (the small-sphere invariants are only
/// meaningful once the radius is below the scale of every nearby feature).
pub fn radius_sweep(
    p: &Polynomial,
    radii: &[f64],
    level: u32,
    max_extra_levels: u32,
    threshold: f64,
) -> Result<SweepResult, RegionError> {
    if radii.len() < 3
        || radii.iter().any(|&r| !r.is_finite() || r <= 0.0)
        || radii.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(RegionError::BadRadii);
    }
    let mut per_radius = Vec::with_capacity(radii.len());
    for &r in radii {
        let mesh = Arc::new(crate::mesh::build_mesh(p.n_vars(), r, level).map_err(|_| {
            RegionError::DimensionMismatch {
                poly: p.n_vars(),
                mesh: 0,
            }
        })?);
        let rc = classify_region(p, mesh, max_extra_levels)?;
        per_radius.push(RadiusSummary {
            radius: r,
            neg: betti_summary(&rc, Side::Neg, RegionKind::SmallSphereNeg, threshold),
            pos: betti_summary(&rc, Side::Pos, RegionKind::SmallSpherePos, threshold),
            certified_fraction: rc.certified_fraction(),
        });
    }
    let k = per_radius.len();
    let stabilized = per_radius[k - 3..].windows(2).all(|w| {
        w[0].neg.invariant_triple() == w[1].neg.invariant_triple()
            && w[0].pos.invariant_triple() == w[1].pos.invariant_triple()
    });
    Ok(SweepResult {
        per_radius,
        stabilized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::poly::Polynomial;
    use num_rational::BigRational;

    fn poly(n: usize, terms: &[(&[u32], i64)]) -> Polynomial {
        let mut p = Polynomial::zero(n);
        for (exps, c) in terms {
            p.add_term(
                Monomial(exps.to_vec()),
                BigRational::from_integer((*c).into()),
            );
        }
        p
    }

    #[test]
    fn globally_negative_circle_is_all_certified() {
        let p = poly(2, &[(&[2, 0], -1), (&[0, 2], -1)]); // −x² − y²
        let mesh = Arc::new(build_mesh(2, 1.0, 2).unwrap());
        let rc = classify_region(&p, mesh, 3).unwrap();
        assert!(rc.labels().iter().all(|l| *l == CellLabel::NegCertified));
        assert_eq!(rc.certified_fraction(), 1.0);
        let neg = betti_summary(&rc, Side::Neg, RegionKind::InitialFormNeg, 0.9);
        assert_eq!((neg.b0, neg.euler, neg.b1), (1, 1, 0));
        assert!(neg.certified);
        let pos = betti_summary(&rc, Side::Pos, RegionKind::InitialFormPos, 0.9);
        assert_eq!((pos.b0, pos.euler, pos.b1), (0, 0, 0));
        assert!(
            pos.certified,
            "empty side with zero uncertified cells is certified"
        );
    }

    /// −y² on the circle: negative everywhere except the two axis points
    /// (±1, 0), which are mesh vertices; exactly the four arcs touching them
    /// stay uncertified, splitting the negative side into two chains.
    #[test]
    fn neg_y_squared_signs_hug_axis_points() {
        let p = poly(2, &[(&[0, 2], -1)]);
        let level = 4;
        let m = 1usize << (level + 4);
        let mesh = Arc::new(build_mesh(2, 1.0, level).unwrap());
        let rc = classify_region(&p, mesh, 6).unwrap();
        for (c, l) in rc.labels().iter().enumerate() {
            let touches_axis = c == 0 || c == m - 1 || c == m / 2 - 1 || c == m / 2;
            let expect = if touches_axis {
                CellLabel::Uncertified
            } else {
                CellLabel::NegCertified
            };
            assert_eq!(*l, expect, "cell {c}");
        }
        let neg = betti_summary(&rc, Side::Neg, RegionKind::InitialFormNeg, 0.9);
        assert_eq!(neg.b0, 2);
        assert!(neg.certified);
        let pos = betti_summary(&rc, Side::Pos, RegionKind::InitialFormPos, 0.9);
        assert_eq!(pos.b0, 2, "the closed side is the two axis points");
    }

    /// xyz on the 2-sphere: octant pattern, uncertified only along the
    /// coordinate great circles; four components on each side.
    #[test]
    fn xyz_octant_pattern() {
        let p = poly(3, &[(&[1, 1, 1], 1)]);
        let mesh = Arc::new(build_mesh(3, 1.0, 4).unwrap());
        let rc = classify_region(&p, mesh, 6).unwrap();
        let mut counts = [0usize; 3];
        for (c, l) in rc.labels().iter().enumerate() {
            match l {
                CellLabel::NegCertified => counts[0] += 1,
                CellLabel::PosCertified => counts[1] += 1,
                CellLabel::Uncertified => counts[2] += 1,
            }
            if matches!(l, CellLabel::Uncertified) {
                // Uncertified cells must straddle a coordinate plane: some
                // vertex coordinate is small relative to the cell size.
                let near_plane = rc
                    .mesh()
                    .cell(c)
                    .iter()
                    .any(|&v| rc.mesh().vertex(v).iter().any(|&x| x.abs() < 0.15));
                assert!(
                    near_plane,
                    "uncertified cell {c} far from every great circle"
                );
            }
        }
        assert!(counts[0] > 0 && counts[1] > 0 && counts[2] > 0);
        // The coordinate great circles partly coincide with mesh edges, so
        // the cell rows touching them stay honestly uncertified; the
        // certified fraction therefore grows slowly with the level (≈ 0.82
        // at level 4, ≈ 0.91 at level 5).
        assert!(rc.certified_fraction() > 0.8);
        let neg = betti_summary(&rc, Side::Neg, RegionKind::InitialFormNeg, 0.8);
        assert_eq!(neg.b0, 4, "negative octants");
        assert_eq!((neg.euler, neg.b1), (4, 0), "four discs");
        assert!(neg.certified, "no uncertified cell bridges two octants");
        let pos = count_components(&rc, Side::Pos);
        assert_eq!(pos, 1, "closed side is connected through the great circles");
    }

    #[test]
    fn full_sphere_constant_negative() {
        let p = poly(3, &[(&[0, 0, 0], -1)]);
        let mesh = Arc::new(build_mesh(3, 1.0, 1).unwrap());
        let rc = classify_region(&p, mesh, 0).unwrap();
        let neg = betti_summary(&rc, Side::Neg, RegionKind::SmallSphereNeg, 0.9);
        assert_eq!((neg.b0, neg.euler, neg.b1), (1, 2, 0), "whole 2-sphere");
    }

    #[test]
    fn sweep_cusp_like_curve_stabilizes() {
        // x³ − y² near the origin: one negative chain, one closed positive arc.
        let p = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let radii = [0.25, 0.125, 0.0625, 0.03125];
        let sweep = radius_sweep(&p, &radii, 4, 6, 0.9).unwrap();
        assert!(sweep.stabilized);
        let (neg, pos) = sweep.stable().unwrap();
        assert_eq!(neg.b0, 1, "negative side is a single interval");
        assert_eq!(pos.b0, 1, "closed side is a single interval");
        assert!(neg.certified && pos.certified);
    }

    #[test]
    fn sweep_rejects_bad_radii() {
        let p = poly(2, &[(&[2, 0], 1)]);
        assert!(radius_sweep(&p, &[0.25, 0.125], 3, 3, 0.9).is_err());
        assert!(radius_sweep(&p, &[0.25, 0.25, 0.125], 3, 3, 0.9).is_err());
        assert!(radius_sweep(&p, &[0.25, 0.5, 0.125], 3, 3, 0.9).is_err());
    }

    #[test]
    fn classify_rejects_dimension_mismatch() {
        let p = poly(3, &[(&[1, 1, 1], 1)]);
        let mesh = Arc::new(build_mesh(2, 1.0, 2).unwrap());
        assert!(classify_region(&p, mesh, 2).is_err());
    }
}
