//! Critical points of a homogeneous form restricted to the unit sphere.
//!
//! Solves the constrained system ∇ω(x) = λx, |x| = 1 by Newton iteration in
//! (x, λ) from deterministic quasi-random starts, merges duplicates, and
//! classifies each point by the inertia of the tangent Hessian
//! tᵢᵀ(H(ω) − λI)tⱼ. A critical point of ω on {ω < 0} that is *not* a local
//! minimum signals infinitely many converging gradient trajectories; the
//! search is incomplete, so callers must treat results as advisory.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Polynomial, QuadraticSignature};

#[derive(Debug, Error)]
pub enum CriticalError {
    #[error("sphere critical point search needs a homogeneous form")]
    NotHomogeneous,
    #[error("sphere critical point search supports 2 or 3 variables, got {0}")]
    UnsupportedDimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    #[serde(rename = "MIN")]
    Min,
    #[serde(rename = "MAX")]
    Max,
    #[serde(rename = "SADDLE")]
    Saddle,
    #[serde(rename = "DEGENERATE")]
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereCriticalPoint {
    /// Unit vector where ∇ω is radial.
    pub location: Vec<f64>,
    /// ω at the point (negative: the point lies in Ω).
    pub value: f64,
    pub tangent_hessian_signature: QuadraticSignature,
    pub classification: CriticalKind,
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 60;
const DEDUP_DISTANCE: f64 = 1e-7;
/// Points with |ω| below this are on the boundary {ω = 0}, not in Ω.
const OMEGA_NEGATIVE_CUTOFF: f64 = 1e-9;
/// Relative threshold below which a tangent-Hessian eigenvalue counts as
/// zero (the Newton points are numeric; an explicit threshold beats
/// implicit rounding behavior).
const EIGENVALUE_ZERO_THRESHOLD: f64 = 1e-6;

/// Finds critical points of ω|_{sphere} lying in {ω < 0}, from `attempts`
/// deterministic jittered lattice starts. Non-converging starts are dropped;
/// an empty result is valid (and means only that the search found nothing).
pub fn find_sphere_critical_points(
    omega: &Polynomial,
    attempts: usize,
    seed: u64,
) -> Result<Vec<SphereCriticalPoint>, CriticalError> {
    if omega.homogeneous_degree().is_none() {
        return Err(CriticalError::NotHomogeneous);
    }
    let n = omega.n_vars();
    if n != 2 && n != 3 {
        return Err(CriticalError::UnsupportedDimension(n));
    }
    let grad: Vec<Polynomial> = omega.gradient();
    let hessian: Vec<Vec<Polynomial>> = (0..n)
        .map(|i| (0..n).map(|j| grad[i].partial_derivative(j)).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Vec<f64>> = Vec::new();
    for k in 0..attempts {
        let mut x = lattice_start(n, k, attempts);
        for c in &mut x {
            *c += rng.gen_range(-0.05..0.05);
        }
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut x {
            *c /= norm;
        }
        if let Some(p) = newton_solve(&grad, &hessian, x) {
            if !found.iter().any(|q| dist(q, &p) < DEDUP_DISTANCE) {
                found.push(p);
            }
        }
    }
    let mut points: Vec<SphereCriticalPoint> = found
        .into_iter()
        .filter_map(|x| {
            let value = omega.eval_f64(&x).expect("dimension checked above");
            if value >= -OMEGA_NEGATIVE_CUTOFF {
                return None;
            }
            Some(classify_point(&grad, &hessian, x, value))
        })
        .collect();
    points.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .unwrap()
            .then_with(|| a.location.partial_cmp(&b.location).unwrap())
    });
    Ok(points)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Evenly spread unit-sphere starts: roots of unity on the circle, a
/// Fibonacci lattice on the 2-sphere.
fn lattice_start(n: usize, k: usize, total: usize) -> Vec<f64> {
    if n == 2 {
        let theta = 2.0 * std::f64::consts::PI * (k as f64) / (total as f64);
        vec![theta.cos(), theta.sin()]
    } else {
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let z = 1.0 - 2.0 * (k as f64 + 0.5) / (total as f64);
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let phi = 2.0 * std::f64::consts::PI * (k as f64) / golden;
        vec![rho * phi.cos(), rho * phi.sin(), z]
    }
}

/// Newton iteration on F(x, λ) = (∇ω(x) − λx, (|x|² − 1)/2).
fn newton_solve(
    grad: &[Polynomial],
    hessian: &[Vec<Polynomial>],
    mut x: Vec<f64>,
) -> Option<Vec<f64>> {
    let n = x.len();
    let mut g = vec![0.0; n];
    Polynomial::eval_gradient_f64(grad, &x, &mut g);
    let mut lambda: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
    for _ in 0..NEWTON_MAX_ITERS {
        Polynomial::eval_gradient_f64(grad, &x, &mut g);
        let mut residual = vec![0.0; n + 1];
        for i in 0..n {
            residual[i] = g[i] - lambda * x[i];
        }
        residual[n] = (x.iter().map(|c| c * c).sum::<f64>() - 1.0) / 2.0;
        if residual.iter().all(|r| r.abs() < NEWTON_TOL) {
            let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            for c in &mut x {
                *c /= norm;
            }
            return Some(x);
        }
        // Jacobian [[H − λI, −x], [xᵀ, 0]].
        let m = n + 1;
        let mut jac = vec![vec![0.0; m]; m];
        for i in 0..n {
            for j in 0..n {
                jac[i][j] = hessian[i][j].eval_f64(&x).expect("consistent dims");
            }
            jac[i][i] -= lambda;
            jac[i][n] = -x[i];
            jac[n][i] = x[i];
        }
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        let delta = solve_dense(jac, rhs)?;
        for i in 0..n {
            x[i] += delta[i];
        }
        lambda += delta[n];
        if x.iter().map(|c| c * c).sum::<f64>() > 100.0 {
            return None;
        }
    }
    None
}

/// Gaussian elimination with partial pivoting for the tiny Newton systems.
// Index loops: the eliminations alias rows of `a` against each other.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let pivot =
            (col..m).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let s: f64 = (col + 1..m).map(|k| a[col][k] * x[k]).sum();
        x[col] = (b[col] - s) / a[col][col];
    }
    Some(x)
}

fn classify_point(
    grad: &[Polynomial],
    hessian: &[Vec<Polynomial>],
    x: Vec<f64>,
    value: f64,
) -> SphereCriticalPoint {
    let n = x.len();
    let mut g = vec![0.0; n];
    Polynomial::eval_gradient_f64(grad, &x, &mut g);
    let lambda: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
    let h: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| hessian[i][j].eval_f64(&x).expect("consistent dims"))
                .collect()
        })
        .collect();
    let tangent = tangent_basis(&x);
    let dim = tangent.len();
    // M[i][j] = tᵢᵀ (H − λI) tⱼ, the Hessian of ω|_sphere at the point.
    let mut m = vec![vec![0.0; dim]; dim];
    for (i, ti) in tangent.iter().enumerate() {
        for (j, tj) in tangent.iter().enumerate() {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let hab = h[a][b] - if a == b { lambda } else { 0.0 };
                    s += ti[a] * hab * tj[b];
                }
            }
            m[i][j] = s;
        }
    }
    let eigs = symmetric_eigenvalues(&m);
    // Zero-threshold relative to the eigenvalue scale at the point. The
    // ambient Hessian participates: when λ cancels H entirely (ω constant on
    // the sphere) the tangent eigenvalues are pure round-off, and measuring
    // them against themselves would masquerade noise as a definite sign.
    let ambient = h.iter().flatten().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let scale = eigs.iter().fold(ambient, |acc, e| acc.max(e.abs()));
    let thresh = EIGENVALUE_ZERO_THRESHOLD * scale;
    let mut signature = QuadraticSignature {
        positives: 0,
        negatives: 0,
        zeros: 0,
    };
    for e in &eigs {
        if scale == 0.0 || e.abs() <= thresh {
            signature.zeros += 1;
        } else if *e > 0.0 {
            signature.positives += 1;
        } else {
            signature.negatives += 1;
        }
    }
    let classification = if signature.zeros > 0 {
        CriticalKind::Degenerate
    } else if signature.negatives == 0 {
        CriticalKind::Min
    } else if signature.positives == 0 {
        CriticalKind::Max
    } else {
        CriticalKind::Saddle
    };
    SphereCriticalPoint {
        location: x,
        value,
        tangent_hessian_signature: signature,
        classification,
    }
}

/// Orthonormal basis of the tangent space at a unit vector.
fn tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    if x.len() == 2 {
        return vec![vec![-x[1], x[0]]];
    }
    // Cross with the least-aligned coordinate axis, then complete.
    let least = (0..3)
        .min_by(|&i, &j| x[i].abs().partial_cmp(&x[j].abs()).unwrap())
        .unwrap();
    let mut e = vec![0.0; 3];
    e[least] = 1.0;
    let t1 = cross(x, &e);
    let n1 = t1.iter().map(|c| c * c).sum::<f64>().sqrt();
    let t1: Vec<f64> = t1.iter().map(|c| c / n1).collect();
    let t2 = cross(x, &t1);
    vec![t1, t2]
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Eigenvalues of a symmetric 1×1 or 2×2 matrix (all tangent Hessians here).
fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    match m.len() {
        1 => vec![m[0][0]],
        2 => {
            let half_trace = (m[0][0] + m[1][1]) / 2.0;
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let disc = (half_trace * half_trace - det).max(0.0).sqrt();
            vec![half_trace - disc, half_trace + disc]
        }
        _ => unreachable!("tangent spaces here are 1- or 2-dimensional"),
    }
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

    /// x³ + 3xy² on the circle: on {ω < 0}, a local maximum at (−1, 0) with
    /// value −1 flanked by the two minima at angle 3π/4 and 5π/4 with value
    /// −√2 (critical angles solve 3y(x−y)(x+y) = 0).
    #[test]
    fn cubic_with_interior_maximum() {
        let omega = poly(2, &[(&[3, 0], 1), (&[1, 2], 3)]);
        let pts = find_sphere_critical_points(&omega, 64, 7).unwrap();
        assert_eq!(pts.len(), 3, "{pts:?}");
        let maxima: Vec<_> = pts
            .iter()
            .filter(|p| p.classification == CriticalKind::Max)
            .collect();
        assert_eq!(maxima.len(), 1);
        let m = maxima[0];
        assert!((m.location[0] + 1.0).abs() < 1e-9 && m.location[1].abs() < 1e-9);
        assert!((m.value + 1.0).abs() < 1e-9);
        assert_eq!(m.tangent_hessian_signature.negatives, 1);
        let s = 0.5f64.sqrt();
        for p in pts.iter().filter(|p| p.classification == CriticalKind::Min) {
            assert!((p.value + std::f64::consts::SQRT_2).abs() < 1e-9);
            assert!((p.location[0] + s).abs() < 1e-9);
            assert!((p.location[1].abs() - s).abs() < 1e-9);
        }
        assert_eq!(
            pts.iter()
                .filter(|p| p.classification == CriticalKind::Min)
                .count(),
            2
        );
    }

    /// −y² on the circle: the points (±1, 0) are critical but lie on
    /// {ω = 0} and are filtered out; inside {ω < 0} only the two minima at
    /// (0, ±1) remain.
    #[test]
    fn quadratic_ridge_minima_only() {
        let omega = poly(2, &[(&[0, 2], -1)]);
        let pts = find_sphere_critical_points(&omega, 48, 3).unwrap();
        assert_eq!(pts.len(), 2, "{pts:?}");
        for p in &pts {
            assert_eq!(p.classification, CriticalKind::Min);
            assert!((p.value + 1.0).abs() < 1e-9);
            assert!(p.location[0].abs() < 1e-7);
            assert!((p.location[1].abs() - 1.0).abs() < 1e-9);
        }
    }

    /// −(x² + y²) is constant on the circle: every found point is critical
    /// and degenerate.
    #[test]
    fn constant_on_sphere_is_degenerate_everywhere() {
        let omega = poly(2, &[(&[2, 0], -1), (&[0, 2], -1)]);
        let pts = find_sphere_critical_points(&omega, 32, 11).unwrap();
        assert!(!pts.is_empty());
        for p in &pts {
            assert_eq!(p.classification, CriticalKind::Degenerate);
            assert!((p.value + 1.0).abs() < 1e-9);
        }
    }

    /// z(x² + y²) on the 2-sphere: the critical set in {ω < 0} is the whole
    /// circle z = −1/√3 (value −2/(3√3)), degenerate along the circle.
    #[test]
    fn axisymmetric_form_has_critical_circle() {
        let omega = poly(3, &[(&[2, 0, 1], 1), (&[0, 2, 1], 1)]);
        let pts = find_sphere_critical_points(&omega, 64, 5).unwrap();
        assert!(!pts.is_empty());
        let z_expect = -(1.0 / 3f64).sqrt();
        let v_expect = 2.0 * z_expect.powi(3);
        for p in &pts {
            assert!((p.location[2] - z_expect).abs() < 1e-7, "{p:?}");
            assert!((p.value - v_expect).abs() < 1e-9);
            assert_eq!(p.classification, CriticalKind::Degenerate);
        }
    }

    #[test]
    fn rejects_inhomogeneous_and_high_dimension() {
        let mixed = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        assert!(matches!(
            find_sphere_critical_points(&mixed, 8, 0),
            Err(CriticalError::NotHomogeneous)
        ));
        let four = poly(4, &[(&[2, 0, 0, 0], 1), (&[0, 2, 0, 0], 1)]);
        assert!(matches!(
            find_sphere_critical_points(&four, 8, 0),
            Err(CriticalError::UnsupportedDimension(4))
        ));
    }
}
