//! Local topological degree of −∇f at the origin, and the Euler
//! characteristics of the sphere sign regions that follow from it.
//!
//! n = 2: winding number of the plane curve t ↦ −∇f(r cos t, r sin t),
//! accumulated with adaptive bisection so every step turns less than π/2.
//! n = 3: the Gauss-map image of a recursively subdivided icosahedral sphere
//! is integrated as a sum of signed spherical triangle areas; a domain
//! triangle is subdivided until its image triangle fits well inside a
//! hemisphere (all pairwise dots positive), where geodesic interpolation of
//! the image cannot slip a winding. The total divided by 4π is the degree.
//!
//! Both methods reject spheres where ∇f comes too close to vanishing: the
//! degree only exists when the critical point is isolated, and a gradient
//! zero on the sphere makes the count meaningless. Gradient fields whose
//! Gauss map folds sharply (images swinging by ~π across a thin band) can
//! exhaust the subdivision budget; that is reported as a non-integral
//! outcome, and the caller's documented remedy is to retry with a finer
//! resolution or a deeper adaptive cap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::normalize3;
use crate::poly::Polynomial;

#[derive(Debug, Error)]
pub enum DegreeError {
    #[error(
        "gradient nearly vanishes on the sphere of radius {radius} (relative margin {margin:.3e}); \
         the critical point is not isolated at this scale — try a different radius"
    )]
    DegenerateSphere { radius: f64, margin: f64 },
    #[error("{}", non_integral_message(*.value, *.distance))]
    NonIntegral { value: f64, distance: f64 },
    #[error("topological degree supports 2 or 3 variables, got {0}")]
    UnsupportedDimension(usize),
}

fn non_integral_message(value: f64, distance: f64) -> String {
    if value.is_nan() {
        "image triangles stayed wider than a hemisphere at the subdivision cap; \
         the resolution is too coarse for this gradient field — retry finer"
            .to_string()
    } else {
        format!(
            "accumulated degree {value:.6} is {distance:.3} away from an integer; \
             the resolution is too coarse for this gradient field — retry finer"
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegreeMethod {
    #[serde(rename = "WINDING")]
    Winding,
    #[serde(rename = "SPHERICAL_AREA")]
    SphericalArea,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeResult {
    pub degree: i64,
    pub radius_used: f64,
    pub method: DegreeMethod,
    /// Smallest |∇f| encountered on the sphere during the computation.
    pub regularity_margin: f64,
    /// How far the accumulated (real-valued) degree was from the reported
    /// integer; larger distances than the tolerance are rejected.
    pub distance_to_integer: f64,
}

/// Relative threshold on min |∇f| / max |∇f| below which the sphere is
/// rejected as degenerate.
const REGULARITY_RELATIVE_THRESHOLD: f64 = 1e-12;
/// Maximum accepted distance between the accumulated degree and an integer.
const ROUNDING_TOLERANCE: f64 = 0.1;
/// Conservative default for extra adaptive subdivision levels.
pub const DEFAULT_AREA_SUBDIVISION_CAP: u32 = 4;
/// Bisection depth limit for the planar winding method.
const WINDING_BISECTION_CAP: u32 = 40;

#[derive(Clone, Copy)]
struct MarginTracker {
    min: f64,
    max: f64,
}

impl MarginTracker {
    fn new() -> Self {
        MarginTracker {
            min: f64::INFINITY,
            max: 0.0,
        }
    }

    fn record(&mut self, norm: f64) {
        self.min = self.min.min(norm);
        self.max = self.max.max(norm);
    }

    fn merge(mut self, other: MarginTracker) -> MarginTracker {
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self
    }

    fn relative(&self) -> f64 {
        if self.max == 0.0 {
            0.0
        } else {
            self.min / self.max
        }
    }
}

/// Local topological degree of −∇f on the sphere of the given radius, with
/// the default adaptive budget. `resolution` is the uniform refinement level
/// of the initial sampling (n = 2: 2^(resolution+4) arcs; n = 3:
/// 20·4^resolution triangles).
pub fn local_degree(
    f: &Polynomial,
    radius: f64,
    resolution: u32,
) -> Result<DegreeResult, DegreeError> {
    local_degree_with_cap(f, radius, resolution, DEFAULT_AREA_SUBDIVISION_CAP)
}

/// Like [`local_degree`], with an explicit bound on extra adaptive
/// subdivision levels (n = 3). Sharply folding Gauss maps (nearly antipodal
/// image corners across a thin band) need the deeper budget; the band only
/// occupies a sliver of the sphere, so deep caps stay cheap.
pub fn local_degree_with_cap(
    f: &Polynomial,
    radius: f64,
    resolution: u32,
    extra_cap: u32,
) -> Result<DegreeResult, DegreeError> {
    match f.n_vars() {
        2 => winding_degree(f, radius, resolution),
        3 => spherical_area_degree(f, radius, resolution, extra_cap),
        other => Err(DegreeError::UnsupportedDimension(other)),
    }
}

/// Euler characteristics of the closed and open sphere regions from the
/// degree of −∇f (n = 3): χ(S'_r) = 1 − deg, and χ(S_r) = 2 − χ(S'_r) on the
/// 2-sphere.
pub fn euler_from_degree(deg: &DegreeResult) -> (i64, i64) {
    debug_assert_eq!(deg.method, DegreeMethod::SphericalArea);
    let chi_sprime = 1 - deg.degree;
    let chi_s = 2 - chi_sprime;
    (chi_sprime, chi_s)
}

fn neg_gradient_at(grad: &[Polynomial], point: &[f64], out: &mut [f64]) -> f64 {
    Polynomial::eval_gradient_f64(grad, point, out);
    let mut norm_sq = 0.0;
    for v in out.iter_mut() {
        *v = -*v;
        norm_sq += *v * *v;
    }
    norm_sq.sqrt()
}

enum TurnFailure {
    ZeroVector,
    DepthExhausted,
}

fn winding_degree(
    f: &Polynomial,
    radius: f64,
    resolution: u32,
) -> Result<DegreeResult, DegreeError> {
    let grad = f.gradient();
    let m = 1usize << (resolution + 4);
    let mut tracker = MarginTracker::new();
    let mut angle_at = |t: f64, tracker: &mut MarginTracker| -> Option<f64> {
        let point = [radius * t.cos(), radius * t.sin()];
        let mut g = [0.0; 2];
        let norm = neg_gradient_at(&grad, &point, &mut g);
        tracker.record(norm);
        if norm == 0.0 {
            return None;
        }
        Some(g[1].atan2(g[0]))
    };
    let mut total = 0.0;
    let tau = 2.0 * std::f64::consts::PI;
    for k in 0..m {
        let t0 = tau * (k as f64) / (m as f64);
        let t1 = tau * ((k + 1) as f64) / (m as f64);
        match accumulate_turn(&mut angle_at, &mut tracker, t0, t1, WINDING_BISECTION_CAP) {
            Ok(turn) => total += turn,
            Err(TurnFailure::ZeroVector) => {
                return Err(DegreeError::DegenerateSphere {
                    radius,
                    margin: 0.0,
                });
            }
            Err(TurnFailure::DepthExhausted) => {
                return Err(DegreeError::NonIntegral {
                    value: f64::NAN,
                    distance: f64::NAN,
                });
            }
        }
    }
    let margin = tracker.relative();
    if margin < REGULARITY_RELATIVE_THRESHOLD {
        return Err(DegreeError::DegenerateSphere { radius, margin });
    }
    finish(total / tau, radius, DegreeMethod::Winding, tracker.min)
}

/// Signed turn of the image direction across [t0, t1], bisecting until each
/// step turns less than π/2 (so the wrapped difference is unambiguous).
fn accumulate_turn(
    angle_at: &mut impl FnMut(f64, &mut MarginTracker) -> Option<f64>,
    tracker: &mut MarginTracker,
    t0: f64,
    t1: f64,
    depth: u32,
) -> Result<f64, TurnFailure> {
    let a0 = angle_at(t0, tracker).ok_or(TurnFailure::ZeroVector)?;
    let a1 = angle_at(t1, tracker).ok_or(TurnFailure::ZeroVector)?;
    let mut delta = a1 - a0;
    while delta > std::f64::consts::PI {
        delta -= 2.0 * std::f64::consts::PI;
    }
    while delta < -std::f64::consts::PI {
        delta += 2.0 * std::f64::consts::PI;
    }
    if delta.abs() < std::f64::consts::FRAC_PI_2 {
        return Ok(delta);
    }
    if depth == 0 {
        return Err(TurnFailure::DepthExhausted);
    }
    let mid = (t0 + t1) / 2.0;
    let left = accumulate_turn(angle_at, tracker, t0, mid, depth - 1)?;
    let right = accumulate_turn(angle_at, tracker, mid, t1, depth - 1)?;
    Ok(left + right)
}

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
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

fn icosahedron_vertices(radius: f64) -> Vec<[f64; 3]> {
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
    raw.iter()
        .map(|&v| {
            let u = normalize3(v);
            [u[0] * radius, u[1] * radius, u[2] * radius]
        })
        .collect()
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn mid_on_sphere(a: &[f64; 3], b: &[f64; 3], radius: f64) -> [f64; 3] {
    let m = [
        (a[0] + b[0]) / 2.0,
        (a[1] + b[1]) / 2.0,
        (a[2] + b[2]) / 2.0,
    ];
    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    [m[0] / n * radius, m[1] / n * radius, m[2] / n * radius]
}

fn gauss_image3(
    grad: &[Polynomial],
    point: &[f64; 3],
    tracker: &mut MarginTracker,
) -> Option<[f64; 3]> {
    let mut g = [0.0; 3];
    let norm = neg_gradient_at(grad, point, &mut g);
    tracker.record(norm);
    if norm == 0.0 {
        return None;
    }
    Some([g[0] / norm, g[1] / norm, g[2] / norm])
}

fn spherical_area_degree(
    f: &Polynomial,
    radius: f64,
    resolution: u32,
    extra_cap: u32,
) -> Result<DegreeResult, DegreeError> {
    let grad = f.gradient();
    let verts = icosahedron_vertices(radius);

    // Split the work into outward-oriented top patches (a few uniform levels
    // deep, geometry only), integrate patches in parallel, then reduce with
    // an ordered sequential sum so the result is schedule-independent.
    let pre_split = resolution.min(3);
    let remaining = resolution - pre_split;
    let mut patches: Vec<[[f64; 3]; 3]> = ICOSAHEDRON_FACES
        .iter()
        .map(|fc| {
            let d = [verts[fc[0]], verts[fc[1]], verts[fc[2]]];
            if det3(&d[0], &d[1], &d[2]) < 0.0 {
                [d[0], d[2], d[1]]
            } else {
                d
            }
        })
        .collect();
    for _ in 0..pre_split {
        let mut next = Vec::with_capacity(patches.len() * 4);
        for d in &patches {
            let ab = mid_on_sphere(&d[0], &d[1], radius);
            let bc = mid_on_sphere(&d[1], &d[2], radius);
            let ca = mid_on_sphere(&d[2], &d[0], radius);
            next.push([d[0], ab, ca]);
            next.push([ab, d[1], bc]);
            next.push([ca, bc, d[2]]);
            next.push([ab, bc, ca]);
        }
        patches = next;
    }

    let per_patch: Vec<(Option<f64>, MarginTracker)> = patches
        .par_iter()
        .map(|d| {
            let mut tracker = MarginTracker::new();
            let images = [
                gauss_image3(&grad, &d[0], &mut tracker),
                gauss_image3(&grad, &d[1], &mut tracker),
                gauss_image3(&grad, &d[2], &mut tracker),
            ];
            let area = match images {
                [Some(a), Some(b), Some(c)] => patch_area(
                    &grad,
                    &mut tracker,
                    *d,
                    [a, b, c],
                    radius,
                    remaining,
                    extra_cap,
                ),
                _ => None,
            };
            (area, tracker)
        })
        .collect();

    let mut tracker = MarginTracker::new();
    let mut total = 0.0;
    let mut exhausted = false;
    for (area, t) in per_patch {
        tracker = tracker.merge(t);
        match area {
            Some(a) => total += a,
            None => exhausted = true,
        }
    }
    let margin = tracker.relative();
    if margin < REGULARITY_RELATIVE_THRESHOLD {
        return Err(DegreeError::DegenerateSphere { radius, margin });
    }
    if exhausted {
        return Err(DegreeError::NonIntegral {
            value: f64::NAN,
            distance: f64::NAN,
        });
    }
    finish(
        total / (4.0 * std::f64::consts::PI),
        radius,
        DegreeMethod::SphericalArea,
        tracker.min,
    )
}

/// Signed solid angle swept by the Gauss-map image over one domain triangle:
/// uniform subdivision for `pre` levels, then adaptive subdivision (up to
/// `extra` levels) until the image corners pairwise point into a common
/// hemisphere.
fn patch_area(
    grad: &[Polynomial],
    tracker: &mut MarginTracker,
    domain: [[f64; 3]; 3],
    image: [[f64; 3]; 3],
    radius: f64,
    pre: u32,
    extra: u32,
) -> Option<f64> {
    if pre == 0 {
        let spread_ok = dot3(&image[0], &image[1]) > 0.01
            && dot3(&image[1], &image[2]) > 0.01
            && dot3(&image[2], &image[0]) > 0.01;
        if spread_ok {
            let den = 1.0
                + dot3(&image[0], &image[1])
                + dot3(&image[1], &image[2])
                + dot3(&image[2], &image[0]);
            return Some(2.0 * det3(&image[0], &image[1], &image[2]).atan2(den));
        }
        if extra == 0 {
            return None;
        }
    }
    let ab = mid_on_sphere(&domain[0], &domain[1], radius);
    let bc = mid_on_sphere(&domain[1], &domain[2], radius);
    let ca = mid_on_sphere(&domain[2], &domain[0], radius);
    let im_ab = gauss_image3(grad, &ab, tracker)?;
    let im_bc = gauss_image3(grad, &bc, tracker)?;
    let im_ca = gauss_image3(grad, &ca, tracker)?;
    let (next_pre, next_extra) = if pre > 0 {
        (pre - 1, extra)
    } else {
        (0, extra - 1)
    };
    let children = [
        ([domain[0], ab, ca], [image[0], im_ab, im_ca]),
        ([ab, domain[1], bc], [im_ab, image[1], im_bc]),
        ([ca, bc, domain[2]], [im_ca, im_bc, image[2]]),
        ([ab, bc, ca], [im_ab, im_bc, im_ca]),
    ];
    let mut sum = 0.0;
    for (d, i) in children {
        sum += patch_area(grad, tracker, d, i, radius, next_pre, next_extra)?;
    }
    Some(sum)
}

fn finish(
    value: f64,
    radius: f64,
    method: DegreeMethod,
    margin: f64,
) -> Result<DegreeResult, DegreeError> {
    let rounded = value.round();
    let distance = (value - rounded).abs();
    if distance > ROUNDING_TOLERANCE {
        return Err(DegreeError::NonIntegral { value, distance });
    }
    Ok(DegreeResult {
        degree: rounded as i64,
        radius_used: radius,
        method,
        regularity_margin: margin,
        distance_to_integer: distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;
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

    /// Dense-sampling winding oracle: naive wrapped angle accumulation over
    /// a fine uniform grid, no adaptivity.
    fn winding_oracle(f: &Polynomial, radius: f64, samples: usize) -> f64 {
        let grad = f.gradient();
        let mut total = 0.0;
        let mut prev: Option<f64> = None;
        for k in 0..=samples {
            let t = 2.0 * std::f64::consts::PI * (k as f64) / (samples as f64);
            let p = [radius * t.cos(), radius * t.sin()];
            let mut g = [0.0; 2];
            Polynomial::eval_gradient_f64(&grad, &p, &mut g);
            let a = (-g[1]).atan2(-g[0]);
            if let Some(pv) = prev {
                let mut d = a - pv;
                while d > std::f64::consts::PI {
                    d -= 2.0 * std::f64::consts::PI;
                }
                while d < -std::f64::consts::PI {
                    d += 2.0 * std::f64::consts::PI;
                }
                total += d;
            }
            prev = Some(a);
        }
        total / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn plane_identity_fields_have_degree_one() {
        // −∇(−(x²+y²)) = (2x, 2y) and −∇(x²+y²) = (−2x, −2y): both ±identity,
        // both degree 1 on the circle.
        let neg = poly(2, &[(&[2, 0], -1), (&[0, 2], -1)]);
        let pos = poly(2, &[(&[2, 0], 1), (&[0, 2], 1)]);
        for f in [&neg, &pos] {
            let d = local_degree(f, 0.25, 3).unwrap();
            assert_eq!(d.degree, 1);
            assert_eq!(d.method, DegreeMethod::Winding);
            assert!(d.distance_to_integer < 1e-9);
        }
    }

    #[test]
    fn cusp_curve_degree_zero_matches_oracle() {
        let f = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let d = local_degree(&f, 0.1, 4).unwrap();
        assert_eq!(d.degree, 0);
        let oracle = winding_oracle(&f, 0.1, 200_000);
        assert!((oracle - d.degree as f64).abs() < 1e-3, "oracle {oracle}");
    }

    #[test]
    fn sphere_identity_field_has_degree_one() {
        let f = poly(3, &[(&[2, 0, 0], -1), (&[0, 2, 0], -1), (&[0, 0, 2], -1)]);
        let d = local_degree(&f, 0.25, 2).unwrap();
        assert_eq!(d.degree, 1);
        assert_eq!(d.method, DegreeMethod::SphericalArea);
        assert!(d.distance_to_integer < 1e-6);
        // The antipodal direction field, realized by +|x|²: degree −1 on S².
        let g = poly(3, &[(&[2, 0, 0], 1), (&[0, 2, 0], 1), (&[0, 0, 2], 1)]);
        let d = local_degree(&g, 0.25, 2).unwrap();
        assert_eq!(d.degree, -1);
    }

    /// Mixed cubic–quintic field with an isolated critical point and a
    /// sharply folding Gauss map: the conservative cap must refuse, the
    /// deeper cap must converge to 0, identically at two radii.
    #[test]
    fn mixed_cubic_quintic_degree_zero() {
        let f = poly(
            3,
            &[
                (&[1, 1, 1], 1),
                (&[4, 1, 0], 1),
                (&[0, 4, 1], -2),
                (&[1, 0, 4], 3),
            ],
        );
        assert!(matches!(
            local_degree(&f, 0.25, 3),
            Err(DegreeError::NonIntegral { .. })
        ));
        let d = local_degree_with_cap(&f, 0.25, 6, 8).unwrap();
        assert_eq!(d.degree, 0);
        assert!(d.distance_to_integer < 1e-6);
        let d2 = local_degree_with_cap(&f, 0.125, 6, 18).unwrap();
        assert_eq!(d2.degree, 0, "degree must not depend on the radius");
    }

    /// A gradient vanishing somewhere on the sphere (here: the whole z-axis
    /// is critical) must be rejected, not silently integrated.
    #[test]
    fn non_isolated_critical_axis_is_rejected() {
        let f = poly(3, &[(&[3, 0, 0], 1), (&[2, 0, 1], 1), (&[0, 2, 0], -1)]);
        match local_degree(&f, 0.25, 2) {
            Err(DegreeError::DegenerateSphere { margin, .. }) => {
                assert!(margin < 1e-12);
            }
            other => panic!("expected DegenerateSphere, got {other:?}"),
        }
    }

    #[test]
    fn euler_characteristics_from_degree() {
        for (deg, chi_sprime, chi_s) in [(0i64, 1i64, 1i64), (-1, 2, 0), (1, 0, 2)] {
            let d = DegreeResult {
                degree: deg,
                radius_used: 0.25,
                method: DegreeMethod::SphericalArea,
                regularity_margin: 1.0,
                distance_to_integer: 0.0,
            };
            assert_eq!(euler_from_degree(&d), (chi_sprime, chi_s));
        }
    }

    #[test]
    fn rejects_unsupported_dimension() {
        let f = poly(4, &[(&[2, 0, 0, 0], 1)]);
        assert!(matches!(
            local_degree(&f, 0.25, 2),
            Err(DegreeError::UnsupportedDimension(4))
        ));
    }
}
