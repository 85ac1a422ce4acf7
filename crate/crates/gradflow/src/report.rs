//! Run configuration and the self-describing analysis report.
//!
//! A run produces exactly one [`Report`]: the configuration echo, the
//! invariant bundle, the verdict, optional census data, warnings, and
//! timings. JSON is the primary artifact; the markdown rendering is derived
//! from the same in-memory data. [`Report::canonical_json`] strips the
//! timing block (the only run-to-run varying part) so that repeated runs at
//! a fixed config and version are byte-identical.

use crate::criteria::{InvariantBundle, Proof, Verdict};
use crate::flow::CensusResult;
use crate::region::SweepResult;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// Rendering selected for the primary output stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    #[serde(rename = "JSON")]
    Json,
    #[serde(rename = "MARKDOWN")]
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!(
                "unknown format '{other}' (expected json or markdown)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("variable list must not be empty")]
    NoVariables,
    #[error("duplicate variable name '{0}'")]
    DuplicateVariable(String),
    #[error("variable name '{0}' must start with a letter or underscore and contain only letters, digits, underscores")]
    BadVariableName(String),
    #[error("radii must be strictly decreasing and positive (need at least 3 for a sweep)")]
    BadRadii,
    #[error("census radius must be positive")]
    BadCensusRadius,
    #[error("mesh level {0} too deep (max {1})")]
    MeshLevelTooDeep(u32, u32),
    #[error("certified threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
}

/// Maximum sphere refinement level accepted from configuration; level 9 is
/// ~5.2 M cells for n = 3, already minutes of exact arithmetic.
pub const MAX_MESH_LEVEL: u32 = 9;

/// Draft-07 JSON schema that every serialized [`Report`] validates against.
/// Shipped both as a repository file and embedded here so consumers can
/// validate without the source tree.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Complete description of one analysis run. Every default is echoed into
/// the report so a report alone reproduces its run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Polynomial text in the tool grammar (already resolved from a file if
    /// the command line pointed at one).
    pub polynomial_source: String,
    /// Ordered variable names; the coordinate order of the germ.
    pub variables: Vec<String>,
    /// Sphere radii for the small-sphere sweep, strictly decreasing.
    pub radii: Vec<f64>,
    /// Icosphere / circle refinement level for region classification.
    pub mesh_level: u32,
    /// Extra adaptive subdivision depth for sign-indeterminate cells.
    pub max_extra_levels: u32,
    /// Certified-measure fraction demanded before a summary is certified.
    pub certified_threshold: f64,
    /// Run the trajectory census.
    pub census: bool,
    /// Seed grid level for the census.
    pub census_grid_level: u32,
    /// Sphere radius the census seeds on.
    pub census_radius: f64,
    /// Compute the Milnor number.
    pub milnor: bool,
    /// Truncation-degree budget for the Milnor computation.
    pub max_truncation: u32,
    /// Compute the local degree of -grad f.
    pub degree: bool,
    /// Newton starts for the sphere critical-point search.
    pub critical_search_attempts: usize,
    /// Optional right-equivalence map text; when given, the analyzed germ is
    /// the composition of the source polynomial with this map, and verdicts
    /// proved for the source transfer where the theory allows.
    pub equivalence_map: Option<String>,
    /// Where the rendered report is written (None: stdout).
    pub output_path: Option<PathBuf>,
    /// Directory for sign-map and trajectory plot data (None: no emission).
    pub plot_dir: Option<PathBuf>,
    /// Primary output rendering.
    pub format: ReportFormat,
}

impl RunConfig {
    /// Defaults resolve the example gallery in seconds per germ; every field
    /// is echoed into the report.
    pub fn new(polynomial_source: impl Into<String>, variables: Vec<String>) -> Self {
        RunConfig {
            polynomial_source: polynomial_source.into(),
            variables,
            radii: vec![0.25, 0.125, 0.0625, 0.03125],
            mesh_level: 5,
            max_extra_levels: 6,
            certified_threshold: crate::region::DEFAULT_CERTIFIED_THRESHOLD,
            census: false,
            census_grid_level: 6,
            census_radius: 0.125,
            milnor: false,
            max_truncation: crate::milnor::DEFAULT_MAX_TRUNCATION,
            degree: false,
            critical_search_attempts: 64,
            equivalence_map: None,
            output_path: None,
            plot_dir: None,
            format: ReportFormat::Json,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.variables.is_empty() {
            return Err(ConfigError::NoVariables);
        }
        for (i, name) in self.variables.iter().enumerate() {
            let mut chars = name.chars();
            let head_ok = chars
                .next()
                .map(|c| c.is_ascii_alphabetic() || c == '_')
                .unwrap_or(false);
            if !head_ok || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::BadVariableName(name.clone()));
            }
            if self.variables[..i].contains(name) {
                return Err(ConfigError::DuplicateVariable(name.clone()));
            }
        }
        if self.radii.len() < 3
            || self.radii.iter().any(|&r| !r.is_finite() || r <= 0.0)
            || self.radii.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(ConfigError::BadRadii);
        }
        if !self.census_radius.is_finite() || self.census_radius <= 0.0 {
            return Err(ConfigError::BadCensusRadius);
        }
        let deepest = self.mesh_level.max(self.census_grid_level);
        if deepest > MAX_MESH_LEVEL {
            return Err(ConfigError::MeshLevelTooDeep(deepest, MAX_MESH_LEVEL));
        }
        if !(self.certified_threshold > 0.0 && self.certified_threshold <= 1.0) {
            return Err(ConfigError::BadThreshold(self.certified_threshold));
        }
        Ok(())
    }
}

/// Everything the pipeline established about one germ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    /// Canonical rendering of the analyzed polynomial.
    pub polynomial: String,
    pub n_variables: usize,
    /// Canonical rendering of the initial form.
    pub initial_form: String,
    pub initial_degree: u32,
    /// All topological and algebraic invariants feeding the verdict.
    pub bundle: InvariantBundle,
    pub verdict: Verdict,
    /// Per-radius small-sphere invariants (n = 2, 3 only).
    pub sweep: Option<SweepResult>,
    /// Trajectory census data when the census ran.
    pub census: Option<CensusResult>,
    /// Present when the analyzed germ was composed from a source germ and a
    /// right-equivalence map.
    pub equivalence: Option<EquivalenceReport>,
    /// Human-readable caveats: uncertified summaries, refused computations,
    /// skipped stages.
    pub warnings: Vec<String>,
}

/// Source-germ analysis backing transferred verdicts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Canonical rendering of the right-equivalence map components.
    pub map: String,
    /// Full analysis of the source germ the map was applied to.
    pub source: Box<Analysis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolMeta {
    pub name: String,
    pub version: String,
}

/// The single self-describing artifact of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolMeta,
    pub config: RunConfig,
    pub analysis: Analysis,
    /// Stage name -> wall-clock seconds. Excluded from the canonical form.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    pub fn tool_meta() -> ToolMeta {
        ToolMeta {
            name: "gradflow".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Full JSON including timings, for file output.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// JSON with the timing block removed: byte-stable across repeated runs
    /// of the same configuration and tool version.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serialization");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("timings");
        }
        let mut s = serde_json::to_string_pretty(&value).expect("report serialization");
        s.push('\n');
        s
    }

    /// Markdown rendering derived from the same data as the JSON.
    pub fn to_markdown(&self) -> String {
        let mut md = MarkdownWriter::new();
        md.line(format!(
            "# {} v{} — gradient-flow convergence analysis",
            self.tool.name, self.tool.version
        ));
        md.blank();
        md.line(format!(
            "- **polynomial**: `{}` in variables {}",
            self.analysis.polynomial,
            self.config.variables.join(", ")
        ));
        md.line(format!(
            "- **initial form**: `{}` (degree {})",
            self.analysis.initial_form, self.analysis.initial_degree
        ));
        if let Some(eq) = &self.analysis.equivalence {
            md.line(format!(
                "- **composed from**: `{}` via right-equivalence map `{}`",
                eq.source.polynomial, eq.map
            ));
        }
        md.blank();
        render_verdict(&mut md, &self.analysis, "##");
        render_invariants(&mut md, &self.analysis, "##");
        if let Some(census) = &self.analysis.census {
            render_census(&mut md, census);
        }
        if let Some(eq) = &self.analysis.equivalence {
            md.line("## Source germ (right-equivalence)");
            md.blank();
            md.line(format!("- **polynomial**: `{}`", eq.source.polynomial));
            md.line(format!("- **map**: `{}`", eq.map));
            md.blank();
            render_verdict(&mut md, &eq.source, "###");
            render_invariants(&mut md, &eq.source, "###");
            render_warnings(&mut md, &eq.source.warnings, "### Source warnings");
        }
        render_warnings(&mut md, &self.analysis.warnings, "## Warnings");
        if !self.timings.is_empty() {
            md.line("## Timings");
            md.blank();
            md.line("| stage | seconds |");
            md.line("| --- | ---: |");
            for (stage, secs) in &self.timings {
                md.line(format!("| {stage} | {secs:.3} |"));
            }
            md.blank();
        }
        md.finish()
    }
}

struct MarkdownWriter {
    buf: String,
}

impl MarkdownWriter {
    fn new() -> Self {
        MarkdownWriter { buf: String::new() }
    }
    fn line(&mut self, s: impl AsRef<str>) {
        self.buf.push_str(s.as_ref());
        self.buf.push('\n');
    }
    fn blank(&mut self) {
        self.buf.push('\n');
    }
    fn finish(self) -> String {
        self.buf
    }
}

fn proof_cell(p: Proof) -> &'static str {
    match p {
        Proof::Proved => "**PROVED**",
        Proof::Unknown => "UNKNOWN",
    }
}

fn render_verdict(md: &mut MarkdownWriter, analysis: &Analysis, h: &str) {
    let v = &analysis.verdict;
    md.line(format!("{h} Verdict"));
    md.blank();
    md.line("| claim | status |");
    md.line("| --- | --- |");
    md.line(format!(
        "| infinitely many converging trajectories (T_INFINITE) | {} |",
        proof_cell(v.t_infinite)
    ));
    md.line(format!(
        "| stable set has non-empty interior (INTERIOR_NONEMPTY) | {} |",
        proof_cell(v.interior_nonempty)
    ));
    md.blank();
    if !v.fired_criteria.is_empty() {
        md.line(format!("{h}# Fired criteria"));
        md.blank();
        md.line("| id | claim | certified | transferred | inputs |");
        md.line("| --- | --- | --- | --- | --- |");
        for fc in &v.fired_criteria {
            md.line(format!(
                "| {} | {:?} | {} | {} | {} |",
                fc.id, fc.claim, fc.certified, fc.transferred, fc.inputs
            ));
        }
        md.blank();
    }
    if !v.advisories.is_empty() {
        md.line(format!("{h}# Advisories (never proofs)"));
        md.blank();
        for a in &v.advisories {
            md.line(format!("- **{:?}**: {}", a.kind, a.detail));
        }
        md.blank();
    }
}

fn fmt_summary_row(s: &crate::region::TopologySummary) -> String {
    format!(
        "| {:?} | {} | {} | {} | {} |",
        s.region, s.b0, s.euler, s.b1, s.certified
    )
}

fn render_invariants(md: &mut MarkdownWriter, analysis: &Analysis, h: &str) {
    let b = &analysis.bundle;
    md.line(format!("{h} Invariants"));
    md.blank();
    let any_region =
        b.s_r.is_some() || b.s_prime_r.is_some() || b.omega.is_some() || b.omega_prime.is_some();
    if any_region {
        md.line("| region | b0 | euler | b1 | certified |");
        md.line("| --- | ---: | ---: | ---: | --- |");
        for s in [&b.s_r, &b.s_prime_r, &b.omega, &b.omega_prime]
            .into_iter()
            .flatten()
        {
            md.line(fmt_summary_row(s));
        }
        md.blank();
        md.line(format!(
            "- small-sphere sweep stabilized: {}",
            b.sweep_stabilized
        ));
    }
    if let Some(sig) = &b.quad_signature {
        md.line(format!(
            "- quadratic-part signature (positives, negatives, zeros): ({}, {}, {})",
            sig.positives, sig.negatives, sig.zeros
        ));
    }
    if let Some(d) = &b.degree {
        md.line(format!(
            "- local degree of -grad f: {} (method {:?}, radius {}, regularity margin {:.3e})",
            d.degree, d.method, d.radius_used, d.regularity_margin
        ));
        if b.n == 3 {
            let (chi_pos, chi_neg) = crate::degree::euler_from_degree(d);
            md.line(format!(
                "- Euler characteristics from the degree: chi(S'_r) = {chi_pos}, chi(S_r) = {chi_neg}"
            ));
        }
    }
    if let Some(m) = &b.milnor {
        md.line(format!(
            "- Milnor number: {} (stabilized at truncation degree {}, certified: {})",
            m.mu, m.truncation_degree, m.certified
        ));
    }
    for (label, rank) in [("S_r", &b.rank_h_s), ("Omega", &b.rank_h_omega)] {
        if let Some(r) = rank {
            md.line(format!(
                "- rank H^(n-2)({label}): {} (certified: {}, via duality: {})",
                r.value, r.certified, r.via_duality
            ));
        }
    }
    for note in &b.duality_notes {
        md.line(format!("- note: {note}"));
    }
    md.blank();
    if !b.sphere_criticals.is_empty() {
        md.line(format!(
            "{h}# Critical points of the initial form on the unit sphere (inside Omega)"
        ));
        md.blank();
        md.line("| location | value | kind | tangent signature (+,-,0) |");
        md.line("| --- | ---: | --- | --- |");
        for cp in &b.sphere_criticals {
            let loc = cp
                .location
                .iter()
                .map(|c| format!("{c:.6}"))
                .collect::<Vec<_>>()
                .join(", ");
            md.line(format!(
                "| ({loc}) | {:.6} | {:?} | ({}, {}, {}) |",
                cp.value,
                cp.classification,
                cp.tangent_hessian_signature.positives,
                cp.tangent_hessian_signature.negatives,
                cp.tangent_hessian_signature.zeros
            ));
        }
        md.blank();
    }
    if let Some(sweep) = &analysis.sweep {
        md.line(format!("{h}# Small-sphere sweep"));
        md.blank();
        md.line("| radius | b0(S_r) | chi(S_r) | b1(S_r) | b0(S'_r) | chi(S'_r) | b1(S'_r) | certified fraction |");
        md.line("| ---: | ---: | ---: | ---: | ---: | ---: | ---: | ---: |");
        for row in &sweep.per_radius {
            md.line(format!(
                "| {} | {} | {} | {} | {} | {} | {} | {:.4} |",
                row.radius,
                row.neg.b0,
                row.neg.euler,
                row.neg.b1,
                row.pos.b0,
                row.pos.euler,
                row.pos.b1,
                row.certified_fraction
            ));
        }
        md.blank();
    }
}

fn render_census(md: &mut MarkdownWriter, census: &CensusResult) {
    md.line("## Trajectory census");
    md.blank();
    md.line(format!("- seed sphere radius: {}", census.radius));
    md.line(format!("- seeds (f < 0 on the grid): {}", census.seeds));
    md.line(format!(
        "- converging fraction: {:.6}",
        census.converging_fraction
    ));
    md.line(format!("- converging clusters: {}", census.cluster_count));
    md.line(format!(
        "- stalled: {}, budget-exhausted: {}",
        census.stalled, census.budget
    ));
    let mut ells: Vec<f64> = census
        .records
        .iter()
        .filter_map(|r| r.ell_estimate)
        .filter(|x| x.is_finite())
        .collect();
    if !ells.is_empty() {
        ells.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = ells[ells.len() / 2];
        md.line(format!(
            "- median characteristic-exponent estimate over converged trajectories: {mid:.4}"
        ));
    }
    md.blank();
}

fn render_warnings(md: &mut MarkdownWriter, warnings: &[String], heading: &str) {
    if warnings.is_empty() {
        return;
    }
    md.line(heading);
    md.blank();
    for w in warnings {
        md.line(format!("- {w}"));
    }
    md.blank();
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_markdown())
    }
}
