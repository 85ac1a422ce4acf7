//! Numerical corroboration of the topological verdicts: integrates the
//! gradient flow ẋ = ∇f(x) from seed grids on a small sphere and counts
//! which directions flow into the origin.
//!
//! f increases along trajectories, so only seeds with f < 0 can flow up to
//! the origin with f ↗ 0; the census seeds every mesh vertex of {f < 0},
//! classifies each trajectory (CONVERGED / ESCAPED / STALLED / BUDGET), and
//! clusters the converging directions by mesh adjacency. Along a converged
//! tail the diagnostics ℓ̂ = median of (x·∇f)/f and â = median of f/|x|^ℓ̂
//! estimate the leading asymptotic exponent and coefficient of f along the
//! trajectory (for homogeneous f of degree d, (x·∇f)/f ≡ d exactly).
//!
//! Everything here is heuristic evidence: convergence detection stops at a
//! small ball around the origin, so census results feed advisories only,
//! never a PROVED verdict.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{build_mesh, MeshError, SphericalMesh};
use crate::poly::Polynomial;
use crate::region::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "CONVERGED")]
    Converged,
    #[serde(rename = "ESCAPED")]
    Escaped,
    #[serde(rename = "STALLED")]
    Stalled,
    #[serde(rename = "BUDGET")]
    Budget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: Vec<f64>,
    pub outcome: Outcome,
    pub steps: usize,
    pub final_point: Vec<f64>,
    /// Median of (x·∇f)/f over the converged tail.
    pub ell_estimate: Option<f64>,
    /// Median of f/|x|^ℓ̂ over the converged tail.
    pub a_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusResult {
    pub radius: f64,
    /// Number of seeds integrated (mesh vertices with f < 0).
    pub seeds: usize,
    /// #CONVERGED / (#CONVERGED + #ESCAPED); 0 when no trajectory resolved.
    pub converging_fraction: f64,
    /// Connected groups of converging seeds under mesh vertex adjacency.
    pub cluster_count: usize,
    /// Unresolved trajectories, excluded from the fraction.
    pub stalled: usize,
    pub budget: usize,
    pub records: Vec<TrajectoryRecord>,
}

/// Integration controls. The stopping geometry (stop ball, escape radius,
/// value tolerance at the stop sphere) is derived from the seed sphere's
/// radius by [`FlowParams::for_radius`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowParams {
    /// Radius of the ball around the origin where arrival counts as
    /// convergence.
    pub rho_stop: f64,
    /// Escape radius.
    pub r_out: f64,
    /// |f| scale at the stop sphere: convergence additionally requires
    /// −η < f(x) < 0 there.
    pub eta: f64,
    /// Gradient norm below which the flow counts as stalled (away from the
    /// stop ball).
    pub g_min: f64,
    pub max_steps: usize,
    /// Per-step relative tolerance of the embedded Runge–Kutta pair.
    pub rel_tol: f64,
}

impl FlowParams {
    /// Defaults for seeds on the sphere of the given radius: stop ball at
    /// radius/100, escape at 4·radius, η estimated as max |f| over a coarse
    /// mesh of the stop sphere.
    pub fn for_radius(f: &Polynomial, radius: f64) -> Self {
        Self::for_radius_with_stop(f, radius, radius / 100.0)
    }

    /// Same defaults with an explicit stop-ball radius. A census refined
    /// across grid levels should shrink the stop ball with the grid (e.g.
    /// halve it per level): a genuine open set of converging directions
    /// keeps its fraction, while a lone converging trajectory's fraction
    /// decays with the capture radius.
    pub fn for_radius_with_stop(f: &Polynomial, radius: f64, rho_stop: f64) -> Self {
        let eta = max_abs_on_sphere(f, rho_stop);
        FlowParams {
            rho_stop,
            r_out: 4.0 * radius,
            eta,
            g_min: 1e-14,
            max_steps: 1_000_000,
            rel_tol: 1e-9,
        }
    }
}

fn max_abs_on_sphere(f: &Polynomial, radius: f64) -> f64 {
    let level = if f.n_vars() == 2 { 4 } else { 2 };
    let mesh = build_mesh(f.n_vars(), radius, level).expect("probe mesh");
    (0..mesh.num_vertices())
        .map(|i| f.eval_f64_raw(mesh.vertex(i)).abs())
        .fold(0.0, f64::max)
}

/// One sample of a trajectory trace: time, position, f, |x|, and the
/// running exponent diagnostic (x·∇f)/f.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub f_value: f64,
    pub radius: f64,
    pub ell_running: f64,
}

/// Integrates one trajectory of ẋ = ∇f(x) from the seed. Precondition:
/// f(seed) < 0 (other seeds cannot reach the origin with f increasing).
pub fn integrate_trajectory(f: &Polynomial, seed: &[f64], params: &FlowParams) -> TrajectoryRecord {
    integrate_with_trace(f, seed, params, false).0
}

/// Like [`integrate_trajectory`], additionally returning every accepted
/// step as a trace sample (for CSV export).
pub fn integrate_trajectory_traced(
    f: &Polynomial,
    seed: &[f64],
    params: &FlowParams,
) -> (TrajectoryRecord, Vec<TraceSample>) {
    integrate_with_trace(f, seed, params, true)
}

// Dormand–Prince embedded 4(5) coefficients. The stage-time nodes are not
// materialized: the gradient field is autonomous.
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th- and 4th-order solutions.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// Index loop: `stage` walks the Butcher tableau and the stage buffer together.
#[allow(clippy::needless_range_loop)]
fn integrate_with_trace(
    f: &Polynomial,
    seed: &[f64],
    params: &FlowParams,
    keep_trace: bool,
) -> (TrajectoryRecord, Vec<TraceSample>) {
    let n = f.n_vars();
    let grad = f.gradient();
    let mut x = seed.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    Polynomial::eval_gradient_f64(&grad, &x, &mut k[0]);
    let mut t = 0.0;
    let mut steps = 0usize;
    // History of (ratio (x·∇f)/f, |x|, f) per accepted step, for the tail
    // diagnostics.
    let mut history: Vec<(f64, f64, f64)> = Vec::new();
    let mut trace: Vec<TraceSample> = Vec::new();

    let seed_norm = norm(&x);
    let g0 = norm(&k[0]);
    let mut h = if g0 > 0.0 {
        (0.01 * seed_norm / g0).min(1.0)
    } else {
        1e-3
    };
    let record_sample =
        |x: &[f64], t: f64, f_val: f64, grad_dot: f64, trace: &mut Vec<TraceSample>| {
            let r = norm(x);
            trace.push(TraceSample {
                t,
                x: x.to_vec(),
                f_value: f_val,
                radius: r,
                ell_running: if f_val != 0.0 {
                    grad_dot / f_val
                } else {
                    f64::NAN
                },
            });
        };

    let outcome = loop {
        // Classification uses the current accepted state.
        let r = norm(&x);
        let f_val = f.eval_f64_raw(&x);
        let g_norm = norm(&k[0]);
        if r <= params.rho_stop && -params.eta < f_val && f_val < 0.0 {
            break Outcome::Converged;
        }
        if r >= params.r_out || (f_val >= 0.0 && r > params.rho_stop) {
            break Outcome::Escaped;
        }
        if g_norm < params.g_min && r > params.rho_stop {
            break Outcome::Stalled;
        }
        if steps >= params.max_steps {
            break Outcome::Budget;
        }

        // One adaptive step (first-same-as-last: k[0] is ∇f at x).
        let mut y5 = vec![0.0; n];
        loop {
            for stage in 0..6 {
                let mut xs = x.clone();
                for (j, a) in DP_A[stage].iter().enumerate() {
                    if *a != 0.0 {
                        for d in 0..n {
                            xs[d] += h * a * k[j][d];
                        }
                    }
                }
                let (head, tail) = k.split_at_mut(stage + 1);
                let _ = head;
                Polynomial::eval_gradient_f64(&grad, &xs, &mut tail[0]);
                if stage == 5 {
                    y5 = xs;
                }
            }
            // Error estimate against the 4th-order solution.
            let mut err_sq = 0.0;
            for d in 0..n {
                let mut e = 0.0;
                for (i, w) in DP_E.iter().enumerate() {
                    e += w * k[i][d];
                }
                e *= h;
                let scale = params.rel_tol * (x[d].abs().max(y5[d].abs()) + params.rho_stop);
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / n as f64).sqrt();
            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            if err <= 1.0 {
                t += h;
                x = y5;
                k[0] = k[6].clone(); // FSAL: last stage is ∇f at the new x.
                h *= factor;
                break;
            }
            h *= factor;
        }
        steps += 1;

        let f_new = f.eval_f64_raw(&x);
        let grad_dot: f64 = x.iter().zip(&k[0]).map(|(a, b)| a * b).sum();
        if f_new != 0.0 {
            history.push((grad_dot / f_new, norm(&x), f_new));
        }
        if keep_trace {
            record_sample(&x, t, f_new, grad_dot, &mut trace);
        }
    };

    let (ell, a) = if outcome == Outcome::Converged {
        tail_estimates(&history)
    } else {
        (None, None)
    };
    (
        TrajectoryRecord {
            seed: seed.to_vec(),
            outcome,
            steps,
            final_point: x,
            ell_estimate: ell,
            a_estimate: a,
        },
        trace,
    )
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Medians over the last quartile of the step history: ℓ̂ from the exponent
/// ratios, then â from f/|x|^ℓ̂ using that ℓ̂.
fn tail_estimates(history: &[(f64, f64, f64)]) -> (Option<f64>, Option<f64>) {
    if history.is_empty() {
        return (None, None);
    }
    let start = history.len() - (history.len() / 4).max(1);
    let tail = &history[start..];
    let ell = median(tail.iter().map(|(r, _, _)| *r));
    let a = ell.map(|l| median(tail.iter().map(|(_, xr, fv)| fv / xr.powf(l))).unwrap_or(f64::NAN));
    (ell, a)
}

fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Integrates a trajectory from every mesh vertex of the radius-`radius`
/// sphere where f < 0 and clusters the converging directions. Deterministic:
/// seed order is the mesh's vertex enumeration and results are reduced in
/// that order.
pub fn run_census(
    f: &Polynomial,
    radius: f64,
    grid_level: u32,
    params: &FlowParams,
) -> Result<CensusResult, MeshError> {
    let mesh = build_mesh(f.n_vars(), radius, grid_level)?;
    let seed_ids: Vec<usize> = (0..mesh.num_vertices())
        .filter(|&i| f.eval_f64_raw(mesh.vertex(i)) < 0.0)
        .collect();
    let records: Vec<TrajectoryRecord> = seed_ids
        .par_iter()
        .map(|&i| integrate_trajectory(f, mesh.vertex(i), params))
        .collect();

    let mut converged = 0usize;
    let mut escaped = 0usize;
    let mut stalled = 0usize;
    let mut budget = 0usize;
    for r in &records {
        match r.outcome {
            Outcome::Converged => converged += 1,
            Outcome::Escaped => escaped += 1,
            Outcome::Stalled => stalled += 1,
            Outcome::Budget => budget += 1,
        }
    }
    let resolved = converged + escaped;
    let converging_fraction = if resolved > 0 {
        converged as f64 / resolved as f64
    } else {
        0.0
    };
    let cluster_count = converged_clusters(&mesh, &seed_ids, &records);
    Ok(CensusResult {
        radius,
        seeds: seed_ids.len(),
        converging_fraction,
        cluster_count,
        stalled,
        budget,
        records,
    })
}

fn converged_clusters(
    mesh: &SphericalMesh,
    seed_ids: &[usize],
    records: &[TrajectoryRecord],
) -> usize {
    let converged: std::collections::HashSet<usize> = seed_ids
        .iter()
        .zip(records)
        .filter(|(_, r)| r.outcome == Outcome::Converged)
        .map(|(&i, _)| i)
        .collect();
    if converged.is_empty() {
        return 0;
    }
    let adjacency = mesh.vertex_adjacency();
    let mut uf = UnionFind::new(mesh.num_vertices());
    for &v in &converged {
        for &w in &adjacency[v] {
            if converged.contains(&w) {
                uf.union(v, w);
            }
        }
    }
    let roots: std::collections::HashSet<usize> = converged.iter().map(|&v| uf.find(v)).collect();
    roots.len()
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

    /// Homogeneous cubic along its stable axis: converges, and the Euler
    /// identity forces the exponent diagnostic to the degree exactly.
    #[test]
    fn homogeneous_cubic_axis_converges_with_degree_exponent() {
        let f = poly(2, &[(&[3, 0], 1), (&[1, 2], 3)]);
        let params = FlowParams::for_radius(&f, 0.125);
        let rec = integrate_trajectory(&f, &[-0.125, 0.0], &params);
        assert_eq!(rec.outcome, Outcome::Converged);
        assert!(norm(&rec.final_point) <= params.rho_stop * 1.01);
        let ell = rec.ell_estimate.unwrap();
        assert!((ell - 3.0).abs() < 0.05, "ell = {ell}");
        // On the x-axis f = x³ = −|x|³, so â ≈ −1.
        let a = rec.a_estimate.unwrap();
        assert!((a + 1.0).abs() < 0.05, "a = {a}");
    }

    /// Cusp germ on the negative x-axis: the flow reduces to ẋ = 3x² > 0,
    /// which climbs to the origin (1-D ODE solution x(t) = x₀/(1 − 3x₀t)).
    #[test]
    fn cusp_axis_converges() {
        let f = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let params = FlowParams::for_radius(&f, 0.125);
        let rec = integrate_trajectory(&f, &[-0.125, 0.0], &params);
        assert_eq!(rec.outcome, Outcome::Converged);
    }

    /// f strictly increases along every accepted step (gradient ascent),
    /// within solver tolerance.
    #[test]
    fn f_increases_along_trajectories() {
        let f = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let params = FlowParams::for_radius(&f, 0.125);
        let (rec, trace) = integrate_trajectory_traced(&f, &[-0.125, 0.02], &params);
        assert!(trace.len() > 5);
        let slack = params.rel_tol * 10.0;
        for w in trace.windows(2) {
            assert!(
                w[1].f_value >= w[0].f_value - slack * (1.0 + w[0].f_value.abs()),
                "f decreased: {} -> {} at t={}",
                w[0].f_value,
                w[1].f_value,
                w[1].t
            );
        }
        let _ = rec;
    }

    /// Indefinite quadratic off its stable axis: f reaches 0 and the
    /// trajectory escapes.
    #[test]
    fn saddle_off_axis_escapes() {
        let f = poly(2, &[(&[2, 0], 1), (&[0, 2], -1)]);
        let params = FlowParams::for_radius(&f, 0.125);
        let seed = [0.02, 0.1234];
        assert!(f.eval_f64_raw(&seed) < 0.0);
        let rec = integrate_trajectory(&f, &seed, &params);
        assert_eq!(rec.outcome, Outcome::Escaped);
        assert!(rec.ell_estimate.is_none());
    }

    /// Radial strict maximum: every direction flows straight in.
    #[test]
    fn radial_maximum_census_fully_converges() {
        let f = poly(3, &[(&[2, 0, 0], -1), (&[0, 2, 0], -1), (&[0, 0, 2], -1)]);
        let params = FlowParams::for_radius(&f, 0.125);
        let census = run_census(&f, 0.125, 2, &params).unwrap();
        assert_eq!(census.seeds, 320 / 2 + 2); // all vertices of the level-2 icosphere
        assert!((census.converging_fraction - 1.0).abs() < 1e-12);
        assert_eq!(census.cluster_count, 1);
        assert_eq!(census.stalled + census.budget, 0);
    }

    /// Positive definite f: no seed satisfies f < 0, census is empty.
    #[test]
    fn definite_minimum_census_is_empty() {
        let f = poly(2, &[(&[2, 0], 1), (&[0, 2], 1)]);
        let params = FlowParams::for_radius(&f, 0.125);
        let census = run_census(&f, 0.125, 4, &params).unwrap();
        assert_eq!(census.seeds, 0);
        assert_eq!(census.converging_fraction, 0.0);
        assert_eq!(census.cluster_count, 0);
    }

    /// Cusp census: the converging cluster contains the (−1, 0) direction.
    #[test]
    fn cusp_census_contains_negative_axis_direction() {
        let f = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let radius = 0.125;
        let params = FlowParams::for_radius(&f, radius);
        let census = run_census(&f, radius, 6, &params).unwrap();
        assert!(census.cluster_count >= 1);
        let hit = census.records.iter().any(|r| {
            r.outcome == Outcome::Converged
                && (r.seed[0] + radius).abs() < 1e-12
                && r.seed[1].abs() < 1e-12
        });
        assert!(hit, "the (−radius, 0) seed must converge");
    }
}
