//! The decision ladder: turns computed invariants into a verdict about the
//! gradient flow ẋ = ∇f(x) at the origin.
//!
//! Two claims are decided, each PROVED or UNKNOWN (the criteria are
//! sufficient, never necessary — UNKNOWN is a final, honest answer):
//!
//! * `t_infinite`: the set of flow trajectories converging to the origin is
//!   infinite;
//! * `interior_nonempty`: the stable set of the origin has non-empty
//!   interior (which in turn implies `t_infinite`, since an open set of
//!   converging starting points carries infinitely many trajectories).
//!
//! The T-side criteria compare the topology of S_r = {f < 0} on a small
//! sphere with Ω = {ω < 0} on the unit sphere (ω the initial form of f);
//! the I-side criteria work with the complements S'_r = {f ≥ 0},
//! Ω' = {ω ≥ 0}, with the Milnor number, and with the signature of the
//! quadratic initial form. Every criterion is evaluated (no short-circuit)
//! so a report shows each independent proof; only criteria whose inputs are
//! certified can prove anything. Numerical evidence (critical points of
//! ω on Ω, the trajectory census) enters as advisories and never proves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::{CriticalKind, SphereCriticalPoint};
use crate::degree::{euler_from_degree, DegreeResult};
use crate::milnor::MilnorResult;
use crate::poly::QuadraticSignature;
use crate::region::TopologySummary;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(
        "inconsistent invariants for {pair}: directly computed rank {direct} vs rank {dual} \
         via the complement relation, both certified; this signals a mesh-resolution bug"
    )]
    InconsistentInvariants {
        pair: String,
        direct: i64,
        dual: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proof {
    #[serde(rename = "PROVED")]
    Proved,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl std::fmt::Display for Proof {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Proof::Proved => write!(f, "PROVED"),
            Proof::Unknown => write!(f, "UNKNOWN"),
        }
    }
}

/// Which of the two conclusions a criterion establishes when it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Claim {
    #[serde(rename = "T_INFINITE")]
    TInfinite,
    #[serde(rename = "INTERIOR_NONEMPTY")]
    InteriorNonempty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionId {
    T1,
    T2,
    T3,
    T4,
    T5,
    I1,
    I2,
    I3,
    I4,
}

impl CriterionId {
    pub fn claim(self) -> Claim {
        match self {
            CriterionId::T1
            | CriterionId::T2
            | CriterionId::T3
            | CriterionId::T4
            | CriterionId::T5 => Claim::TInfinite,
            CriterionId::I1 | CriterionId::I2 | CriterionId::I3 | CriterionId::I4 => {
                Claim::InteriorNonempty
            }
        }
    }
}

impl std::fmt::Display for CriterionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One criterion whose hypothesis held on the bundle. Only entries with
/// `certified: true` support a PROVED verdict; uncertified hits are kept for
/// the report but prove nothing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiredCriterion {
    pub id: CriterionId,
    pub claim: Claim,
    /// Human-readable account of the inputs that satisfied the hypothesis.
    pub inputs: String,
    pub certified: bool,
    /// True when the hit was transferred from a right-equivalent germ
    /// rather than evaluated on this one.
    pub transferred: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdvisoryKind {
    #[serde(rename = "CRITICAL_POINT_T_INFINITE")]
    CriticalPointInfinite,
    #[serde(rename = "CRITICAL_POINT_INTERIOR")]
    CriticalPointInterior,
    #[serde(rename = "CENSUS")]
    Census,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Advisory {
    pub kind: AdvisoryKind,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub t_infinite: Proof,
    pub interior_nonempty: Proof,
    pub fired_criteria: Vec<FiredCriterion>,
    pub advisories: Vec<Advisory>,
}

/// A rank of the middle cohomology group H^{n−2} of a sphere region, with
/// its provenance: computed directly from the region's own summary, or
/// derived from the complement's component count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedInvariant {
    pub value: i64,
    pub certified: bool,
    pub via_duality: bool,
}

/// Everything the ladder consumes. Summaries may be absent (e.g. when a
/// stage failed or was skipped); absent or uncertified inputs silently
/// disable the criteria that need them.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct InvariantBundle {
    /// Ambient dimension n.
    pub n: usize,
    /// Total degree d of the initial form ω.
    pub initial_degree: u32,
    /// {f < 0} on the smallest stabilized sphere.
    pub s_r: Option<TopologySummary>,
    /// {f ≥ 0} on the same sphere.
    pub s_prime_r: Option<TopologySummary>,
    /// {ω < 0} on the unit sphere.
    pub omega: Option<TopologySummary>,
    /// {ω ≥ 0} on the unit sphere.
    pub omega_prime: Option<TopologySummary>,
    /// Whether the radius sweep stabilized; S-side summaries only count as
    /// certified when it did.
    pub sweep_stabilized: bool,
    /// Signature of ω when d = 2.
    pub quad_signature: Option<QuadraticSignature>,
    pub degree: Option<DegreeResult>,
    pub milnor: Option<MilnorResult>,
    /// Critical points of ω restricted to Ω (advisory evidence only).
    pub sphere_criticals: Vec<SphereCriticalPoint>,
    /// rank H^{n−2}(S_r), filled by [`duality_convert`].
    pub rank_h_s: Option<RankedInvariant>,
    /// rank H^{n−2}(Ω), filled by [`duality_convert`].
    pub rank_h_omega: Option<RankedInvariant>,
    /// Notes recorded by [`duality_convert`] (direction used, skipped cases).
    pub duality_notes: Vec<String>,
    /// Set when this bundle's germ was declared right-equivalent to another
    /// analyzed germ (the transfer source).
    pub equivalence_source: Option<String>,
}

impl InvariantBundle {
    fn s_certified(&self, summary: &TopologySummary) -> bool {
        summary.certified && self.sweep_stabilized
    }
}

/// Middle-cohomology rank read off a region's own summary: rank H¹ = b1 for
/// n = 3; for n = 2 the middle group is reduced H⁰ with rank b0 − 1 (0 for
/// the empty region).
fn direct_rank(n: usize, summary: &TopologySummary) -> i64 {
    if n == 2 {
        (summary.b0 as i64 - 1).max(0)
    } else {
        summary.b1
    }
}

/// Fills the middle-cohomology ranks of S_r and Ω using the complement
/// relation b0(complement) = 1 + rank H^{n−2}(region), valid when the
/// complement is non-empty. A certified direct value is preferred; a
/// certified dual value can stand in when the direct side is uncertified.
/// When both are certified they must agree, otherwise the invariants are
/// inconsistent and the error signals a resolution bug upstream.
pub fn duality_convert(bundle: &InvariantBundle) -> Result<InvariantBundle, CriteriaError> {
    let mut out = bundle.clone();
    out.duality_notes = Vec::new();
    let (rank_s, mut notes_s) = resolve_rank(
        "S_r",
        bundle.n,
        bundle.s_r.as_ref().map(|s| (s, bundle.s_certified(s))),
        bundle
            .s_prime_r
            .as_ref()
            .map(|s| (s, bundle.s_certified(s))),
    )?;
    let (rank_omega, mut notes_omega) = resolve_rank(
        "Omega",
        bundle.n,
        bundle.omega.as_ref().map(|s| (s, s.certified)),
        bundle.omega_prime.as_ref().map(|s| (s, s.certified)),
    )?;
    out.rank_h_s = rank_s;
    out.rank_h_omega = rank_omega;
    out.duality_notes.append(&mut notes_s);
    out.duality_notes.append(&mut notes_omega);
    Ok(out)
}

fn resolve_rank(
    pair: &str,
    n: usize,
    region: Option<(&TopologySummary, bool)>,
    complement: Option<(&TopologySummary, bool)>,
) -> Result<(Option<RankedInvariant>, Vec<String>), CriteriaError> {
    let mut notes = Vec::new();
    let direct = region.map(|(s, cert)| (direct_rank(n, s), cert));
    let dual = match complement {
        Some((c, cert)) => {
            if c.b0 == 0 {
                notes.push(format!(
                    "complement of {pair} is empty; the component-count relation does not apply \
                     (strict local maximum case)"
                ));
                None
            } else {
                Some((c.b0 as i64 - 1, cert))
            }
        }
        None => None,
    };
    if let (Some((dv, true)), Some((uv, true))) = (direct, dual) {
        if dv != uv {
            return Err(CriteriaError::InconsistentInvariants {
                pair: pair.to_string(),
                direct: dv,
                dual: uv,
            });
        }
    }
    let chosen = match (direct, dual) {
        (Some((v, true)), _) => {
            notes.push(format!("rank H^(n-2)({pair}) = {v} read directly"));
            Some(RankedInvariant {
                value: v,
                certified: true,
                via_duality: false,
            })
        }
        (_, Some((v, true))) => {
            notes.push(format!(
                "rank H^(n-2)({pair}) = {v} derived from the complement's component count"
            ));
            Some(RankedInvariant {
                value: v,
                certified: true,
                via_duality: true,
            })
        }
        (Some((v, false)), _) => Some(RankedInvariant {
            value: v,
            certified: false,
            via_duality: false,
        }),
        (None, Some((v, false))) => Some(RankedInvariant {
            value: v,
            certified: false,
            via_duality: true,
        }),
        (None, None) => None,
    };
    Ok((chosen, notes))
}

/// Evaluates the full criterion ladder, in fixed order, recording every
/// criterion whose hypothesis held. PROVED states are derived only from
/// certified hits; interior PROVED also proves t_infinite.
pub fn apply_ladder(bundle: &InvariantBundle) -> Verdict {
    let mut fired: Vec<FiredCriterion> = Vec::new();

    // T1: fewer components of S_r than of Ω.
    if let (Some(s), Some(om)) = (&bundle.s_r, &bundle.omega) {
        if s.b0 < om.b0 {
            fired.push(fire(
                CriterionId::T1,
                format!("b0(S_r) = {} < b0(Omega) = {}", s.b0, om.b0),
                bundle.s_certified(s) && om.certified,
            ));
        }
    }
    // T2: smaller Euler characteristic of S_r than of Ω. χ(S_r) is read
    // from the stabilized mesh when that value is certified; otherwise, for
    // n = 3 with a computed local degree, the Euler relation χ(S_r) = 1 + deg
    // supplies a certified value that does not depend on mesh resolution
    // (sign features thinner than every swept cell hide from the mesh, but
    // not from the degree integral).
    if let Some(om) = &bundle.omega {
        let mesh = bundle
            .s_r
            .as_ref()
            .map(|s| (s.euler, bundle.s_certified(s), "mesh"));
        let from_degree = if bundle.n == 3 {
            bundle.degree.as_ref().map(|d| {
                let (_, chi_s) = euler_from_degree(d);
                (chi_s, true, "Euler relation for the local degree")
            })
        } else {
            None
        };
        let chosen = match (mesh, from_degree) {
            (Some(m @ (_, true, _)), _) => Some(m),
            (_, Some(d)) => Some(d),
            (m, None) => m,
        };
        if let Some((chi_s, certified, source)) = chosen {
            if chi_s < om.euler {
                fired.push(fire(
                    CriterionId::T2,
                    format!("chi(S_r) = {chi_s} ({source}) < chi(Omega) = {}", om.euler),
                    certified && om.certified,
                ));
            }
        }
    }
    // T3: non-empty S_r with non-positive Euler characteristic, or
    // non-trivial first cohomology of S_r.
    if let Some(s) = &bundle.s_r {
        let by_euler = s.b0 > 0 && s.euler <= 0;
        let by_b1 = s.b1 > 0;
        if by_euler || by_b1 {
            let mut parts = Vec::new();
            if by_euler {
                parts.push(format!("S_r non-empty with chi(S_r) = {} <= 0", s.euler));
            }
            if by_b1 {
                parts.push(format!("b1(S_r) = {} > 0", s.b1));
            }
            fired.push(fire(
                CriterionId::T3,
                parts.join("; "),
                bundle.s_certified(s),
            ));
        }
    }
    // T4: same as T3 on Ω.
    if let Some(om) = &bundle.omega {
        let by_euler = om.b0 > 0 && om.euler <= 0;
        let by_b1 = om.b1 > 0;
        if by_euler || by_b1 {
            let mut parts = Vec::new();
            if by_euler {
                parts.push(format!(
                    "Omega non-empty with chi(Omega) = {} <= 0",
                    om.euler
                ));
            }
            if by_b1 {
                parts.push(format!("b1(Omega) = {} > 0", om.b1));
            }
            fired.push(fire(CriterionId::T4, parts.join("; "), om.certified));
        }
    }
    // T5: quadratic initial form with at least two negative squares — the
    // stable manifold through the origin has dimension ≥ 2.
    if bundle.initial_degree == 2 {
        if let Some(sig) = &bundle.quad_signature {
            if sig.negatives >= 2 {
                fired.push(fire(
                    CriterionId::T5,
                    format!(
                        "quadratic initial form signature: {} negatives, {} zeros, {} positives",
                        sig.negatives, sig.zeros, sig.positives
                    ),
                    true,
                ));
            }
        }
    }
    // I1: S'_r empty — the origin is a strict local maximum, so a whole
    // ball flows in.
    if let Some(sp) = &bundle.s_prime_r {
        if sp.b0 == 0 {
            fired.push(fire(
                CriterionId::I1,
                "S'_r is empty (f < 0 on the whole sphere)".to_string(),
                bundle.s_certified(sp),
            ));
        }
    }
    // I2: middle-cohomology rank of S_r strictly below that of Ω.
    if let (Some(rs), Some(ro)) = (&bundle.rank_h_s, &bundle.rank_h_omega) {
        if rs.value < ro.value {
            fired.push(fire(
                CriterionId::I2,
                format!(
                    "rank H^(n-2)(S_r) = {}{} < rank H^(n-2)(Omega) = {}{}",
                    rs.value,
                    if rs.via_duality {
                        " (via complement)"
                    } else {
                        ""
                    },
                    ro.value,
                    if ro.via_duality {
                        " (via complement)"
                    } else {
                        ""
                    },
                ),
                rs.certified && ro.certified,
            ));
        }
    }
    // I3: fewer components of S'_r than of Ω'.
    if let (Some(sp), Some(op)) = (&bundle.s_prime_r, &bundle.omega_prime) {
        if sp.b0 < op.b0 {
            fired.push(fire(
                CriterionId::I3,
                format!("b0(S'_r) = {} < b0(Omega') = {}", sp.b0, op.b0),
                bundle.s_certified(sp) && op.certified,
            ));
        }
    }
    // I4: even Milnor number and quadratic part of signature
    // (n−1 negatives, 1 zero, 0 positives).
    if let (Some(mu), Some(sig)) = (&bundle.milnor, &bundle.quad_signature) {
        if mu.mu % 2 == 0
            && bundle.n >= 1
            && sig.negatives == bundle.n - 1
            && sig.zeros == 1
            && sig.positives == 0
        {
            fired.push(fire(
                CriterionId::I4,
                format!(
                    "mu = {} is even; quadratic part has signature ({} negatives, 1 zero, 0 positives)",
                    mu.mu,
                    bundle.n - 1
                ),
                mu.certified,
            ));
        }
    }

    let advisories = critical_point_advisories(&bundle.sphere_criticals);
    verdict_from(fired, advisories)
}

fn fire(id: CriterionId, inputs: String, certified: bool) -> FiredCriterion {
    FiredCriterion {
        id,
        claim: id.claim(),
        inputs,
        certified,
        transferred: false,
    }
}

/// Recomputes the two PROVED/UNKNOWN states from a fired list, enforcing
/// that only certified hits prove and that interior ⟹ t_infinite.
fn verdict_from(fired: Vec<FiredCriterion>, advisories: Vec<Advisory>) -> Verdict {
    let interior = fired
        .iter()
        .any(|f| f.certified && f.claim == Claim::InteriorNonempty);
    let infinite = interior
        || fired
            .iter()
            .any(|f| f.certified && f.claim == Claim::TInfinite);
    Verdict {
        t_infinite: if infinite {
            Proof::Proved
        } else {
            Proof::Unknown
        },
        interior_nonempty: if interior {
            Proof::Proved
        } else {
            Proof::Unknown
        },
        fired_criteria: fired,
        advisories,
    }
}

/// Numerical evidence from critical points of ω on Ω: a nondegenerate
/// non-minimum suggests infinitely many converging trajectories; a
/// nondegenerate maximum additionally suggests a stable set with interior.
/// Advisory only — the search is incomplete and unverified.
fn critical_point_advisories(criticals: &[SphereCriticalPoint]) -> Vec<Advisory> {
    let mut advisories = Vec::new();
    let non_min: Vec<&SphereCriticalPoint> = criticals
        .iter()
        .filter(|c| matches!(c.classification, CriticalKind::Max | CriticalKind::Saddle))
        .collect();
    if !non_min.is_empty() {
        advisories.push(Advisory {
            kind: AdvisoryKind::CriticalPointInfinite,
            detail: format!(
                "{} nondegenerate non-minimum critical point(s) of the initial form on Omega \
                 ({}); suggests infinitely many converging trajectories",
                non_min.len(),
                describe_criticals(&non_min),
            ),
        });
    }
    let maxima: Vec<&SphereCriticalPoint> = criticals
        .iter()
        .filter(|c| matches!(c.classification, CriticalKind::Max))
        .collect();
    if !maxima.is_empty() {
        advisories.push(Advisory {
            kind: AdvisoryKind::CriticalPointInterior,
            detail: format!(
                "{} nondegenerate local maximum(s) of the initial form on Omega ({}); \
                 suggests a stable set with non-empty interior",
                maxima.len(),
                describe_criticals(&maxima),
            ),
        });
    }
    advisories
}

fn describe_criticals(points: &[&SphereCriticalPoint]) -> String {
    points
        .iter()
        .map(|c| {
            let coords = c
                .location
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ");
            format!(
                "{:?} at ({coords}) with value {:.4}",
                c.classification, c.value
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Merges a verdict computed on a germ g with the verdict of a germ f
/// declared right-equivalent to it (g = f ∘ φ with φ an invertible germ):
/// component-count criteria (T1 and I3) transfer verbatim from f to g; all
/// other criteria hold only as re-evaluated on g itself.
pub fn transfer_equivalence(source: &Verdict, own: &Verdict) -> Verdict {
    let mut fired = own.fired_criteria.clone();
    for f in &source.fired_criteria {
        let transferable = matches!(f.id, CriterionId::T1 | CriterionId::I3);
        if !transferable || !f.certified {
            continue;
        }
        let already = fired.iter().any(|g| g.id == f.id && g.certified);
        if already {
            continue;
        }
        fired.push(FiredCriterion {
            id: f.id,
            claim: f.claim,
            inputs: format!("{} — transferred via right-equivalence of germs", f.inputs),
            certified: f.certified,
            transferred: true,
        });
    }
    verdict_from(fired, own.advisories.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::RegionKind;

    fn summary(
        region: RegionKind,
        b0: usize,
        euler: i64,
        b1: i64,
        certified: bool,
    ) -> TopologySummary {
        TopologySummary {
            region,
            b0,
            euler,
            b1,
            certified,
        }
    }

    fn base_bundle(n: usize) -> InvariantBundle {
        InvariantBundle {
            n,
            sweep_stabilized: true,
            ..Default::default()
        }
    }

    /// Cusp-like bundle: S_r connected, Ω two arcs → T1 proves t_infinite.
    #[test]
    fn component_deficit_proves_infinite() {
        let mut b = base_bundle(2);
        b.initial_degree = 2;
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 1, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 1, 1, 0, true));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 2, 2, 0, true));
        b.omega_prime = Some(summary(RegionKind::InitialFormPos, 2, 2, 0, true));
        let v = apply_ladder(&b);
        assert_eq!(v.t_infinite, Proof::Proved);
        let t1 = v
            .fired_criteria
            .iter()
            .find(|f| f.id == CriterionId::T1)
            .unwrap();
        assert!(t1.certified);
        assert_eq!(t1.claim, Claim::TInfinite);
        // The same bundle's complements also satisfy I3 (1 < 2): both claims.
        assert_eq!(v.interior_nonempty, Proof::Proved);
        // Without complement data, T1 alone proves t_infinite only.
        b.s_prime_r = None;
        b.omega_prime = None;
        let v2 = apply_ladder(&b);
        assert_eq!(v2.t_infinite, Proof::Proved);
        assert_eq!(v2.interior_nonempty, Proof::Unknown);
    }

    /// Disc-plus-two-points bundle: b0(S'_r) = 3 < b0(Ω') = 4 → I3 proves
    /// the interior claim, which in turn proves t_infinite.
    #[test]
    fn complement_component_deficit_proves_interior() {
        let mut b = base_bundle(3);
        b.initial_degree = 3;
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 4, 4, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 3, 3, 0, true));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 4, 4, 0, true));
        b.omega_prime = Some(summary(RegionKind::InitialFormPos, 4, 4, 0, true));
        let v = apply_ladder(&b);
        assert_eq!(v.interior_nonempty, Proof::Proved);
        assert_eq!(v.t_infinite, Proof::Proved, "interior implies infinite");
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::I3 && f.certified));
    }

    /// Positive-definite minimum: S_r empty, Ω empty, complements full — no
    /// criterion fires, both claims stay UNKNOWN.
    #[test]
    fn definite_minimum_stays_unknown() {
        let mut b = base_bundle(3);
        b.initial_degree = 2;
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 0, 0, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 1, 2, 0, true));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 0, 0, 0, true));
        b.omega_prime = Some(summary(RegionKind::InitialFormPos, 1, 2, 0, true));
        b.quad_signature = Some(QuadraticSignature {
            positives: 3,
            negatives: 0,
            zeros: 0,
        });
        let v = apply_ladder(&b);
        assert_eq!(v.t_infinite, Proof::Unknown);
        assert_eq!(v.interior_nonempty, Proof::Unknown);
        assert!(v.fired_criteria.is_empty());
    }

    /// Uncertified inputs are recorded but never prove.
    #[test]
    fn uncertified_hits_do_not_prove() {
        let mut b = base_bundle(2);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 1, 0, false));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 2, 2, 0, true));
        let v = apply_ladder(&b);
        let t1 = v
            .fired_criteria
            .iter()
            .find(|f| f.id == CriterionId::T1)
            .unwrap();
        assert!(!t1.certified);
        assert_eq!(v.t_infinite, Proof::Unknown);
        // Same when the sweep failed to stabilize.
        let mut b2 = base_bundle(2);
        b2.sweep_stabilized = false;
        b2.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 1, 0, true));
        b2.omega = Some(summary(RegionKind::InitialFormNeg, 2, 2, 0, true));
        let v2 = apply_ladder(&b2);
        assert_eq!(v2.t_infinite, Proof::Unknown);
    }

    #[test]
    fn saddle_or_negative_euler_fires_t3_t4() {
        let mut b = base_bundle(3);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 2, 0, 2, true));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 1, -1, 2, true));
        let v = apply_ladder(&b);
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::T3 && f.certified));
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::T4 && f.certified));
        assert_eq!(v.t_infinite, Proof::Proved);
    }

    #[test]
    fn two_negative_squares_fire_t5() {
        let mut b = base_bundle(3);
        b.initial_degree = 2;
        b.quad_signature = Some(QuadraticSignature {
            positives: 1,
            negatives: 2,
            zeros: 0,
        });
        let v = apply_ladder(&b);
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::T5 && f.certified));
        assert_eq!(v.t_infinite, Proof::Proved);
        assert_eq!(v.interior_nonempty, Proof::Unknown);
    }

    #[test]
    fn empty_sublevel_complement_fires_i1() {
        let mut b = base_bundle(3);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 2, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 0, 0, 0, true));
        let v = apply_ladder(&b);
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::I1 && f.certified));
        assert_eq!(v.interior_nonempty, Proof::Proved);
        assert_eq!(v.t_infinite, Proof::Proved);
    }

    #[test]
    fn even_milnor_with_corank_one_negative_form_fires_i4() {
        let mut b = base_bundle(4);
        b.initial_degree = 2;
        b.milnor = Some(MilnorResult {
            mu: 4,
            truncation_degree: 5,
            certified: true,
        });
        b.quad_signature = Some(QuadraticSignature {
            positives: 0,
            negatives: 3,
            zeros: 1,
        });
        let v = apply_ladder(&b);
        assert!(v
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::I4 && f.certified));
        assert_eq!(v.interior_nonempty, Proof::Proved);
        // Odd μ must not fire.
        b.milnor = Some(MilnorResult {
            mu: 3,
            truncation_degree: 5,
            certified: true,
        });
        let v2 = apply_ladder(&b);
        assert!(v2.fired_criteria.iter().all(|f| f.id != CriterionId::I4));
    }

    /// Complement relation: b0 of the complement determines the middle rank.
    #[test]
    fn duality_fills_ranks_from_complements() {
        let mut b = base_bundle(3);
        // S_r known only through its complement: b0(S'_r) = 2 → rank 1.
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 2, 2, 0, true));
        // Ω' with four components → rank H^1(Ω) = 3.
        b.omega_prime = Some(summary(RegionKind::InitialFormPos, 4, 4, 0, true));
        let out = duality_convert(&b).unwrap();
        let rs = out.rank_h_s.unwrap();
        assert_eq!((rs.value, rs.certified, rs.via_duality), (1, true, true));
        let ro = out.rank_h_omega.unwrap();
        assert_eq!((ro.value, ro.certified, ro.via_duality), (3, true, true));
    }

    #[test]
    fn duality_prefers_direct_certified_rank() {
        let mut b = base_bundle(3);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 0, 1, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 2, 2, 0, true));
        let out = duality_convert(&b).unwrap();
        let rs = out.rank_h_s.unwrap();
        assert_eq!((rs.value, rs.certified, rs.via_duality), (1, true, false));
    }

    #[test]
    fn duality_skips_empty_complement_and_flags_strict_max() {
        let mut b = base_bundle(3);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 2, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 0, 0, 0, true));
        let out = duality_convert(&b).unwrap();
        let rs = out.rank_h_s.unwrap();
        assert!(!rs.via_duality);
        assert!(out
            .duality_notes
            .iter()
            .any(|n| n.contains("strict local maximum")));
    }

    #[test]
    fn duality_detects_certified_mismatch() {
        let mut b = base_bundle(3);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 1, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 3, 3, 0, true));
        match duality_convert(&b) {
            Err(CriteriaError::InconsistentInvariants { direct, dual, .. }) => {
                assert_eq!((direct, dual), (0, 2));
            }
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn duality_is_idempotent() {
        let mut b = base_bundle(3);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 0, 1, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 2, 2, 0, true));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 1, -1, 2, false));
        b.omega_prime = Some(summary(RegionKind::InitialFormPos, 3, 3, 0, true));
        let once = duality_convert(&b).unwrap();
        let twice = duality_convert(&once).unwrap();
        assert_eq!(
            serde_json::to_string(&once).unwrap(),
            serde_json::to_string(&twice).unwrap()
        );
    }

    #[test]
    fn n2_reduced_rank_equates_side_counts() {
        // On a circle, alternating arcs: b0(S'_r) = 1 + (b0(S_r) − 1).
        let mut b = base_bundle(2);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 3, 3, 0, true));
        b.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 3, 3, 0, true));
        let out = duality_convert(&b).unwrap();
        assert_eq!(out.rank_h_s.unwrap().value, 2);
    }

    #[test]
    fn transfer_moves_component_criteria_only() {
        let mut source_bundle = base_bundle(2);
        source_bundle.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 1, 0, true));
        source_bundle.s_prime_r = Some(summary(RegionKind::SmallSpherePos, 1, 1, 0, true));
        source_bundle.omega = Some(summary(RegionKind::InitialFormNeg, 2, 2, 0, true));
        source_bundle.omega_prime = Some(summary(RegionKind::InitialFormPos, 2, 2, 0, true));
        let source = apply_ladder(&source_bundle);
        assert_eq!(source.t_infinite, Proof::Proved);
        // T2 also fires on the source (χ 1 < 2) but must NOT transfer.
        assert!(source
            .fired_criteria
            .iter()
            .any(|f| f.id == CriterionId::T2));

        let own = apply_ladder(&base_bundle(2));
        assert_eq!(own.t_infinite, Proof::Unknown);
        let merged = transfer_equivalence(&source, &own);
        assert_eq!(merged.t_infinite, Proof::Proved);
        assert_eq!(merged.interior_nonempty, Proof::Proved);
        // Exactly T1 and I3 transfer; T2 does not despite having fired.
        let mut ids: Vec<CriterionId> = merged
            .fired_criteria
            .iter()
            .filter(|f| f.transferred)
            .map(|f| f.id)
            .collect();
        ids.sort_by_key(|id| format!("{id}"));
        assert_eq!(ids, vec![CriterionId::I3, CriterionId::T1]);
        assert!(merged
            .fired_criteria
            .iter()
            .filter(|f| f.transferred)
            .all(|f| f.inputs.contains("right-equivalence")));
    }

    #[test]
    fn transfer_from_unknown_source_changes_nothing() {
        let source = apply_ladder(&base_bundle(2));
        let own = apply_ladder(&base_bundle(2));
        let merged = transfer_equivalence(&source, &own);
        assert_eq!(merged.t_infinite, Proof::Unknown);
        assert!(merged.fired_criteria.is_empty());
    }

    #[test]
    fn transfer_onto_same_verdict_adds_no_duplicates() {
        let mut b = base_bundle(2);
        b.s_r = Some(summary(RegionKind::SmallSphereNeg, 1, 1, 0, true));
        b.omega = Some(summary(RegionKind::InitialFormNeg, 2, 2, 0, true));
        let v = apply_ladder(&b);
        let merged = transfer_equivalence(&v, &v);
        assert_eq!(merged.fired_criteria.len(), v.fired_criteria.len());
        assert_eq!(merged.t_infinite, v.t_infinite);
    }

    #[test]
    fn critical_point_evidence_is_advisory_only() {
        let mut b = base_bundle(2);
        b.sphere_criticals = vec![SphereCriticalPoint {
            location: vec![-1.0, 0.0],
            value: -1.0,
            tangent_hessian_signature: QuadraticSignature {
                positives: 0,
                negatives: 1,
                zeros: 0,
            },
            classification: CriticalKind::Max,
        }];
        let v = apply_ladder(&b);
        assert_eq!(v.t_infinite, Proof::Unknown);
        assert_eq!(v.interior_nonempty, Proof::Unknown);
        assert_eq!(v.advisories.len(), 2);
        assert!(v
            .advisories
            .iter()
            .any(|a| a.kind == AdvisoryKind::CriticalPointInfinite));
        assert!(v
            .advisories
            .iter()
            .any(|a| a.kind == AdvisoryKind::CriticalPointInterior));
        assert!(v.fired_criteria.is_empty());
    }
}
