//! Full-run orchestration: parse → initial form → unit-sphere
//! classification → small-sphere radius sweep → optional degree / Milnor /
//! critical-point / census stages → duality conversion → criterion ladder
//! (→ verdict transfer for right-equivalent germs) → report.
//!
//! The orchestrator itself is single-threaded; the stages it delegates to
//! parallelize internally. Every completed run yields a [`Report`]; errors
//! carry an exit-code class so the CLI can distinguish user-input problems
//! from internal inconsistencies.

use crate::criteria::{
    apply_ladder, duality_convert, transfer_equivalence, Advisory, AdvisoryKind, CriteriaError,
    InvariantBundle,
};
use crate::critical::{find_sphere_critical_points, CriticalError};
use crate::degree::{euler_from_degree, local_degree_with_cap, DegreeError};
use crate::flow::{integrate_trajectory_traced, run_census, CensusResult, FlowParams, Outcome};
use crate::mesh::{build_mesh, MeshError};
use crate::milnor::{milnor_number, MilnorError};
use crate::parse::{parse_map, parse_polynomial, ParseError};
use crate::plots;
use crate::poly::{compose, quadratic_signature, PolyError, Polynomial, QuadraticSignature};
use crate::region::{
    betti_summary, classify_region, radius_sweep, RegionComplex, RegionError, RegionKind, Side,
};
use crate::report::{Analysis, ConfigError, EquivalenceReport, Report, RunConfig};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

/// Fixed seed for the deterministic critical-point search lattice jitter.
const CRITICAL_SEED: u64 = 0x5EED;

/// Base uniform refinement for degree computations (n = 2: 512 arcs; n = 3:
/// the pre-split is internally capped, deeper work is adaptive).
const DEGREE_RESOLUTION: u32 = 5;

/// Adaptive-subdivision budgets tried in order at each radius. Sharply
/// folding Gauss maps need deeper budgets at smaller radii, and a deep cap
/// costs almost nothing when unused, so escalation is cheap.
const DEGREE_CAPS: [u32; 6] = [4, 8, 12, 16, 20, 24];

/// Trajectories per outcome class re-integrated with tracing for plot
/// emission.
const TRACES_PER_CLASS: usize = 6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("polynomial operation failed: {0}")]
    Poly(#[from] PolyError),
    #[error(
        "equivalence map has a singular linear part; it is not invertible as a \
         germ, so declaring right-equivalence through it would be unsound"
    )]
    MapNotInvertible,
    #[error("mesh construction failed: {0}")]
    Mesh(#[from] MeshError),
    #[error("region classification failed: {0}")]
    Region(#[from] RegionError),
    #[error("critical point search failed: {0}")]
    Critical(#[from] CriticalError),
    #[error("internal inconsistency: {detail}")]
    Inconsistent {
        detail: String,
        /// Serialized invariant bundle at the moment of the contradiction.
        bundle_dump: String,
    },
    #[error("failed to write run artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code class: 2 for user-input errors (config, grammar,
    /// map problems), 3 for internal inconsistencies between certified
    /// invariants, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_)
            | PipelineError::Parse(_)
            | PipelineError::Poly(_)
            | PipelineError::MapNotInvertible => 2,
            PipelineError::Inconsistent { .. } => 3,
            _ => 1,
        }
    }

    /// The serialized bundle accompanying an internal inconsistency.
    pub fn diagnostic_dump(&self) -> Option<&str> {
        match self {
            PipelineError::Inconsistent { bundle_dump, .. } => Some(bundle_dump),
            _ => None,
        }
    }
}

fn inconsistency(detail: String, bundle: &InvariantBundle) -> PipelineError {
    PipelineError::Inconsistent {
        detail,
        bundle_dump: serde_json::to_string_pretty(bundle)
            .unwrap_or_else(|e| format!("(bundle serialization failed: {e})")),
    }
}

/// Runs the complete analysis described by `config`.
///
/// When `config.equivalence_map` is set, the map φ is applied to the parsed
/// source germ f, the composition g = f ∘ φ becomes the analyzed germ, both
/// germs get a full topological analysis, and f's transferable certified
/// criteria are merged into g's verdict.
pub fn run_pipeline(config: &RunConfig) -> Result<Report, PipelineError> {
    config.validate()?;
    let mut timings = BTreeMap::new();
    let t_total = Instant::now();

    let t = Instant::now();
    let f = parse_polynomial(&config.polynomial_source, &config.variables)?;
    let phi = match &config.equivalence_map {
        Some(text) => {
            let phi = parse_map(text, &config.variables)?;
            if !phi.linear_part_invertible() {
                return Err(PipelineError::MapNotInvertible);
            }
            Some(phi)
        }
        None => None,
    };
    record(&mut timings, "", "parse", t);

    let analysis = match phi {
        None => analyze_germ(&f, config, &mut timings, "", true)?,
        Some(phi) => {
            let g = compose(&f, &phi)?;
            let source = analyze_germ(&f, config, &mut timings, "source.", false)?;
            let mut target = analyze_germ(&g, config, &mut timings, "", true)?;
            let map_text = phi
                .components()
                .iter()
                .map(|c| c.to_text(&config.variables))
                .collect::<Vec<_>>()
                .join(", ");
            target.bundle.equivalence_source = Some(format!(
                "{} under the right-equivalence map ({})",
                source.polynomial, map_text
            ));
            target.verdict = transfer_equivalence(&source.verdict, &target.verdict);
            target.equivalence = Some(EquivalenceReport {
                map: map_text,
                source: Box::new(source),
            });
            target
        }
    };

    record(&mut timings, "", "total", t_total);
    Ok(Report {
        tool: Report::tool_meta(),
        config: config.clone(),
        analysis,
        timings,
    })
}

fn record(timings: &mut BTreeMap<String, f64>, prefix: &str, stage: &str, start: Instant) {
    timings.insert(format!("{prefix}{stage}"), start.elapsed().as_secs_f64());
}

/// Signature of the degree-2 part of `p` (the zero form has signature
/// (0, 0, n)).
fn quadratic_part_signature(p: &Polynomial) -> Result<QuadraticSignature, PolyError> {
    let n = p.n_vars();
    let mut q = Polynomial::zero(n);
    for (mono, c) in p.terms() {
        if mono.total_degree() == 2 {
            q.add_term(mono.clone(), c.clone());
        }
    }
    if q.is_zero() {
        return Ok(QuadraticSignature {
            positives: 0,
            negatives: 0,
            zeros: n,
        });
    }
    quadratic_signature(&q)
}

/// Full single-germ analysis. `primary` gates the census and plot emission
/// (both run on the analysis target only, never on an equivalence source).
fn analyze_germ(
    p: &Polynomial,
    config: &RunConfig,
    timings: &mut BTreeMap<String, f64>,
    prefix: &str,
    primary: bool,
) -> Result<Analysis, PipelineError> {
    let n = p.n_vars();
    let names = &config.variables;
    let mut warnings: Vec<String> = Vec::new();
    let mut bundle = InvariantBundle {
        n,
        ..Default::default()
    };

    let init = p.initial_form()?;
    bundle.initial_degree = init.degree;
    match quadratic_part_signature(p) {
        Ok(sig) => bundle.quad_signature = Some(sig),
        Err(e) => warnings.push(format!("quadratic signature unavailable: {e}")),
    }

    let mesh_supported = n == 2 || n == 3;
    let mut sweep = None;
    let mut omega_complex: Option<RegionComplex> = None;

    if mesh_supported {
        let t = Instant::now();
        let unit_mesh = Arc::new(build_mesh(n, 1.0, config.mesh_level)?);
        let rc = classify_region(&init.form, unit_mesh, config.max_extra_levels)?;
        bundle.omega = Some(betti_summary(
            &rc,
            Side::Neg,
            RegionKind::InitialFormNeg,
            config.certified_threshold,
        ));
        bundle.omega_prime = Some(betti_summary(
            &rc,
            Side::Pos,
            RegionKind::InitialFormPos,
            config.certified_threshold,
        ));
        omega_complex = Some(rc);
        record(timings, prefix, "initial_form_classification", t);

        let t = Instant::now();
        let swept = radius_sweep(
            p,
            &config.radii,
            config.mesh_level,
            config.max_extra_levels,
            config.certified_threshold,
        )?;
        bundle.sweep_stabilized = swept.stabilized;
        let last = swept
            .per_radius
            .last()
            .expect("validated radii are non-empty");
        bundle.s_r = Some(last.neg.clone());
        bundle.s_prime_r = Some(last.pos.clone());
        if !swept.stabilized {
            warnings.push(format!(
                "small-sphere invariants did not stabilize over radii {:?}; \
                 criteria on S_r/S'_r stay uncertified",
                config.radii
            ));
        }
        sweep = Some(swept);
        record(timings, prefix, "radius_sweep", t);

        for summary in [
            &bundle.s_r,
            &bundle.s_prime_r,
            &bundle.omega,
            &bundle.omega_prime,
        ]
        .into_iter()
        .flatten()
        {
            if !summary.certified {
                warnings.push(format!(
                    "{:?} summary is uncertified; criteria consuming it are reported but prove nothing",
                    summary.region
                ));
            }
        }

        let t = Instant::now();
        match find_sphere_critical_points(
            &init.form,
            config.critical_search_attempts,
            CRITICAL_SEED,
        ) {
            Ok(points) => bundle.sphere_criticals = points,
            Err(e) => warnings.push(format!("sphere critical-point search failed: {e}")),
        }
        record(timings, prefix, "critical_points", t);
    } else {
        warnings.push(format!(
            "sphere meshes support n = 2, 3 only; topological classification, degree, \
             critical-point search, census and plots are skipped for n = {n}"
        ));
    }

    if config.degree && mesh_supported {
        let t = Instant::now();
        match degree_with_escalation(p, &config.radii) {
            Ok(result) => bundle.degree = Some(result),
            Err(refusals) => warnings.push(format!(
                "local degree of -grad f refused: {}",
                refusals.join("; ")
            )),
        }
        record(timings, prefix, "degree", t);
    }

    if config.milnor {
        let t = Instant::now();
        match milnor_number(p, config.max_truncation) {
            Ok(result) => bundle.milnor = Some(result),
            Err(e @ MilnorError::NotIsolated { .. }) => {
                warnings.push(format!("Milnor number unavailable: {e}"))
            }
            Err(e @ MilnorError::NotAGerm) => {
                warnings.push(format!("Milnor number unavailable: {e}"))
            }
        }
        record(timings, prefix, "milnor", t);
    }

    // Khimshiashvili cross-check (n = 3): for an isolated critical point the
    // local degree of −∇f pins (χ(S'_r), χ(S_r)) exactly. The sweep can
    // stabilize on coarser values when sign features (thin strips between
    // lobes) are narrower than every swept cell, so a certified degree that
    // contradicts certified, stabilized mesh summaries demotes them to
    // uncertified instead of being ignored; χ-based criteria then rely on
    // the degree-derived values.
    if n == 3 {
        if let (Some(deg), Some(s), Some(sp)) = (&bundle.degree, &bundle.s_r, &bundle.s_prime_r) {
            let (chi_pos, chi_neg) = euler_from_degree(deg);
            if s.b0 > 0 && sp.b0 > 0 && (chi_neg != s.euler || chi_pos != sp.euler) {
                let detail = format!(
                    "degree {} of -grad f gives (chi(S'_r), chi(S_r)) = ({chi_pos}, {chi_neg}) \
                     but the meshes report ({}, {})",
                    deg.degree, sp.euler, s.euler
                );
                if bundle.sweep_stabilized && s.certified && sp.certified {
                    bundle.sweep_stabilized = false;
                    warnings.push(format!(
                        "{detail}; the radius sweep stabilized below the scale the mesh \
                         resolves, so the S_r/S'_r summaries are demoted to uncertified and \
                         chi-based criteria fall back to the degree-derived values"
                    ));
                } else {
                    warnings.push(format!(
                        "{detail} (mesh summaries uncertified; recorded as a warning)"
                    ));
                }
            }
        }
    }

    let mut census: Option<CensusResult> = None;
    let mut census_params: Option<FlowParams> = None;
    if config.census && primary && mesh_supported {
        let t = Instant::now();
        let params = FlowParams::for_radius(p, config.census_radius);
        census = Some(run_census(
            p,
            config.census_radius,
            config.census_grid_level,
            &params,
        )?);
        census_params = Some(params);
        record(timings, prefix, "census", t);
    }

    let t = Instant::now();
    let converted = duality_convert(&bundle).map_err(|e| match &e {
        CriteriaError::InconsistentInvariants { .. } => inconsistency(e.to_string(), &bundle),
    })?;
    let mut verdict = apply_ladder(&converted);
    record(timings, prefix, "duality_and_ladder", t);

    if let Some(c) = &census {
        verdict.advisories.push(Advisory {
            kind: AdvisoryKind::Census,
            detail: format!(
                "radius {}, grid level {}: {} of {} seeds converged (fraction {:.6}), \
                 {} converging clusters, {} stalled, {} budget-exhausted — numerical \
                 evidence only, never a proof",
                c.radius,
                config.census_grid_level,
                (c.converging_fraction * c.seeds as f64).round() as usize,
                c.seeds,
                c.converging_fraction,
                c.cluster_count,
                c.stalled,
                c.budget
            ),
        });
    }

    if primary {
        if let Some(dir) = &config.plot_dir {
            if mesh_supported {
                let t = Instant::now();
                emit_plots(
                    p,
                    config,
                    dir,
                    omega_complex.as_ref().expect("mesh branch ran"),
                    census.as_ref(),
                    census_params.as_ref(),
                    &mut warnings,
                )?;
                record(timings, prefix, "plots", t);
            }
        }
    }

    Ok(Analysis {
        polynomial: p.to_text(names),
        n_variables: n,
        initial_form: init.form.to_text(names),
        initial_degree: init.degree,
        bundle: converted,
        verdict,
        sweep,
        census,
        equivalence: None,
        warnings,
    })
}

/// Tries the subdivision-budget ladder at each configured radius, largest
/// first (Gauss-map folds widen with radius). Returns the first certified
/// integer, or the per-radius refusal trail.
fn degree_with_escalation(
    p: &Polynomial,
    radii: &[f64],
) -> Result<crate::degree::DegreeResult, Vec<String>> {
    let mut refusals = Vec::new();
    for &radius in radii {
        let mut last: Option<DegreeError> = None;
        for &cap in DEGREE_CAPS.iter() {
            match local_degree_with_cap(p, radius, DEGREE_RESOLUTION, cap) {
                Ok(result) => return Ok(result),
                Err(e @ DegreeError::NonIntegral { .. }) => {
                    // A deeper adaptive budget may still separate the fold.
                    last = Some(e);
                }
                Err(e @ DegreeError::DegenerateSphere { .. }) => {
                    // The gradient (nearly) vanishes on this sphere; deeper
                    // subdivision cannot help, but another radius might.
                    last = Some(e);
                    break;
                }
                Err(e @ DegreeError::UnsupportedDimension(_)) => {
                    return Err(vec![e.to_string()]);
                }
            }
        }
        refusals.push(format!(
            "radius {radius}: {}",
            last.map(|e| e.to_string())
                .unwrap_or_else(|| "no attempt".to_string())
        ));
    }
    Err(refusals)
}

fn emit_plots(
    p: &Polynomial,
    config: &RunConfig,
    dir: &Path,
    omega_complex: &RegionComplex,
    census: Option<&CensusResult>,
    census_params: Option<&FlowParams>,
    warnings: &mut Vec<String>,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("sign_map_unit_sphere.csv"),
        plots::sign_map_csv(omega_complex),
    )?;
    std::fs::write(
        dir.join("sign_map_unit_sphere.ppm"),
        plots::sign_map_ppm(omega_complex),
    )?;

    let smallest = *config.radii.last().expect("validated radii are non-empty");
    let mesh = Arc::new(build_mesh(p.n_vars(), smallest, config.mesh_level)?);
    let small_rc = classify_region(p, mesh, config.max_extra_levels)?;
    std::fs::write(
        dir.join("sign_map_small_sphere.csv"),
        plots::sign_map_csv(&small_rc),
    )?;
    std::fs::write(
        dir.join("sign_map_small_sphere.ppm"),
        plots::sign_map_ppm(&small_rc),
    )?;

    match (census, census_params) {
        (Some(census), Some(params)) => {
            let mut picks: Vec<usize> = Vec::new();
            for outcome in [Outcome::Converged, Outcome::Escaped] {
                picks.extend(
                    census
                        .records
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| r.outcome == outcome)
                        .map(|(i, _)| i)
                        .take(TRACES_PER_CLASS),
                );
            }
            let traced: Vec<(usize, Vec<crate::flow::TraceSample>)> = picks
                .iter()
                .map(|&i| {
                    let (_, samples) =
                        integrate_trajectory_traced(p, &census.records[i].seed, params);
                    (i, samples)
                })
                .collect();
            let series: Vec<plots::TraceSeries<'_>> = traced
                .iter()
                .map(|(i, samples)| plots::TraceSeries {
                    label: i.to_string(),
                    samples,
                })
                .collect();
            std::fs::write(
                dir.join("trajectories.csv"),
                plots::trajectory_csv(&series, &config.variables),
            )?;
        }
        _ => warnings
            .push("trajectory traces not emitted (census disabled for this run)".to_string()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{CriterionId, Proof};

    fn config(poly: &str, vars: &[&str]) -> RunConfig {
        RunConfig::new(poly, vars.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn cusp_run_proves_both_claims() {
        let mut c = config("x^3 - y^2", &["x", "y"]);
        c.milnor = true;
        c.degree = true;
        let report = run_pipeline(&c).expect("pipeline completes");
        let v = &report.analysis.verdict;
        assert_eq!(v.t_infinite, Proof::Proved);
        assert_eq!(v.interior_nonempty, Proof::Proved);
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::T1 && f.certified));
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::I3 && f.certified));
        let b = &report.analysis.bundle;
        assert_eq!(b.s_r.as_ref().unwrap().b0, 1);
        assert_eq!(b.omega.as_ref().unwrap().b0, 2);
        assert_eq!(b.milnor.as_ref().unwrap().mu, 2);
        assert!(b.sweep_stabilized);
        assert!(report.analysis.sweep.is_some());
        assert!(report.timings.contains_key("radius_sweep"));
        assert!(report.timings.contains_key("total"));
    }

    #[test]
    fn definite_minimum_reports_empty_negative_region() {
        let c = config("x^2 + y^2", &["x", "y"]);
        let report = run_pipeline(&c).expect("pipeline completes");
        let v = &report.analysis.verdict;
        assert_eq!(v.t_infinite, Proof::Unknown);
        assert_eq!(v.interior_nonempty, Proof::Unknown);
        assert_eq!(report.analysis.bundle.s_r.as_ref().unwrap().b0, 0);
        // Both middle-cohomology ranks resolve directly (complement reads
        // agree): no conversion notes beyond the direct annotations.
        let ranks = &report.analysis.bundle;
        assert_eq!(ranks.rank_h_s.as_ref().unwrap().value, 0);
        assert_eq!(ranks.rank_h_omega.as_ref().unwrap().value, 0);
    }

    #[test]
    fn definite_maximum_fires_empty_positive_region_criterion() {
        let c = config("-x^2 - y^2", &["x", "y"]);
        let report = run_pipeline(&c).expect("pipeline completes");
        let v = &report.analysis.verdict;
        assert_eq!(v.interior_nonempty, Proof::Proved);
        assert_eq!(v.t_infinite, Proof::Proved);
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::I1 && f.certified));
        // The complement of S_r is empty: the component-count relation does
        // not apply, which the bundle records as the strict-max note.
        assert!(
            report
                .analysis
                .bundle
                .duality_notes
                .iter()
                .any(|n| n.contains("strict local maximum")),
            "strict-max note expected, got {:?}",
            report.analysis.bundle.duality_notes
        );
    }

    #[test]
    fn equivalence_run_reports_source_and_transfers() {
        let mut c = config("x^3 - y^2", &["x", "y"]);
        c.equivalence_map = Some("y, x".to_string());
        let report = run_pipeline(&c).expect("pipeline completes");
        let eq = report
            .analysis
            .equivalence
            .as_ref()
            .expect("equivalence block");
        assert_eq!(eq.source.verdict.t_infinite, Proof::Proved);
        assert_eq!(report.analysis.verdict.t_infinite, Proof::Proved);
        // g = f(y, x) = -x^2 + y^3.
        assert_eq!(report.analysis.bundle.n, 2);
        assert!(report
            .analysis
            .bundle
            .equivalence_source
            .as_ref()
            .unwrap()
            .contains("right-equivalence map"));
        assert!(report.timings.contains_key("source.radius_sweep"));
    }

    #[test]
    fn singular_equivalence_map_is_a_user_error() {
        let mut c = config("x^3 - y^2", &["x", "y"]);
        c.equivalence_map = Some("x + y, x + y".to_string());
        let err = run_pipeline(&c).unwrap_err();
        assert!(matches!(err, PipelineError::MapNotInvertible));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_error_exit_code_is_distinct() {
        let c = config("x^3 - y^2 +", &["x", "y"]);
        let err = run_pipeline(&c).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let c2 = config("x^3 - y^2", &["x", "x"]);
        let err2 = run_pipeline(&c2).unwrap_err();
        assert_eq!(err2.exit_code(), 2);
    }

    #[test]
    fn four_variable_run_skips_meshes_and_keeps_algebraic_invariants() {
        let mut c = config("x^2 + y^2 + z^2 + w^2", &["x", "y", "z", "w"]);
        c.milnor = true;
        c.degree = true;
        c.census = true;
        let report = run_pipeline(&c).expect("pipeline completes");
        let b = &report.analysis.bundle;
        assert!(b.omega.is_none() && b.s_r.is_none());
        assert!(b.degree.is_none());
        assert!(report.analysis.census.is_none());
        assert_eq!(b.milnor.as_ref().unwrap().mu, 1);
        assert_eq!(b.quad_signature.as_ref().unwrap().positives, 4);
        assert!(report
            .analysis
            .warnings
            .iter()
            .any(|w| w.contains("skipped for n = 4")));
    }

    #[test]
    fn reports_are_byte_stable_for_a_fixed_config() {
        let mut c = config("x^3 - y^2", &["x", "y"]);
        c.census = true;
        c.census_grid_level = 4;
        let a = run_pipeline(&c).expect("first run");
        let b = run_pipeline(&c).expect("second run");
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert_ne!(a.canonical_json(), "");
    }

    #[test]
    fn plot_emission_writes_all_artifacts() {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut c = config("x^3 - y^2", &["x", "y"]);
        c.census = true;
        c.census_grid_level = 4;
        c.plot_dir = Some(dir.path().to_path_buf());
        let report = run_pipeline(&c).expect("pipeline completes");
        for name in [
            "sign_map_unit_sphere.csv",
            "sign_map_unit_sphere.ppm",
            "sign_map_small_sphere.csv",
            "sign_map_small_sphere.ppm",
            "trajectories.csv",
        ] {
            let path = dir.path().join(name);
            assert!(path.is_file(), "missing artifact {name}");
            assert!(
                std::fs::metadata(&path).unwrap().len() > 0,
                "{name} is empty"
            );
        }
        assert!(report.timings.contains_key("plots"));
        let traces = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
        assert!(traces.lines().count() > 1, "traces should contain samples");
    }
}
