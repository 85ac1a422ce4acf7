//! Milnor number μ(g) = dim ℝ[[x₁,…,x_n]]/⟨∂g/∂x₁,…,∂g/∂x_n⟩ via exact
//! rational linear algebra on truncations of the Jacobian ideal.
//!
//! For a truncation degree D, the row space of all monomial multiples
//! x^α·∂g/∂x_i (products truncated to total degree ≤ D) approximates the
//! Jacobian ideal inside the space of polynomials of degree ≤ D. The
//! codimension q_D = #{monomials ≤ D} − rank over-counts μ until D is large
//! enough; the answer is accepted only with a two-part certificate:
//! q_D = q_{D+1}, and every monomial of some single degree k ≤ D reduces to
//! zero against the row space (so the ideal traps all higher-order terms).
//! If no certificate appears up to the truncation bound, the critical point
//! is reported as (possibly) non-isolated: for genuinely non-isolated
//! singularities the quotient dimension grows without bound.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Monomial, Polynomial};

/// Default bound on the truncation degree; covers every pinned example with
/// margin.
pub const DEFAULT_MAX_TRUNCATION: u32 = 12;

#[derive(Debug, Error)]
pub enum MilnorError {
    #[error(
        "quotient dimension did not stabilize with a monomial certificate up to truncation \
         degree {max_truncation} (last codimension {last_q}); the critical point is likely \
         not isolated"
    )]
    NotIsolated { max_truncation: u32, last_q: u64 },
    #[error("input has a nonzero constant or linear part; the origin is not a singular germ")]
    NotAGerm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MilnorResult {
    pub mu: u64,
    /// Truncation degree D at which q_D = q_{D+1} with a monomial
    /// certificate of degree ≤ D.
    pub truncation_degree: u32,
    /// True when the monomial-ideal inclusion certificate was found; this
    /// module only returns certified values (otherwise it errors), so the
    /// flag is part of the serialized record rather than a soft warning.
    pub certified: bool,
}

/// Milnor number of the germ, certified by stabilization of the truncated
/// quotient dimension plus a monomial-ideal inclusion certificate.
pub fn milnor_number(g: &Polynomial, max_truncation: u32) -> Result<MilnorResult, MilnorError> {
    if has_constant_or_linear_part(g) {
        return Err(MilnorError::NotAGerm);
    }
    let partials: Vec<Polynomial> = g.gradient();
    let mut last_q = 0u64;
    let mut next: Option<TruncationStage> = None;
    for d in 1..max_truncation.max(1) {
        let stage_d = match next.take() {
            Some(s) => s,
            None => TruncationStage::build(&partials, g.n_vars(), d),
        };
        let stage_d1 = TruncationStage::build(&partials, g.n_vars(), d + 1);
        last_q = stage_d1.codimension();
        if stage_d.codimension() == stage_d1.codimension() && stage_d.has_monomial_certificate() {
            return Ok(MilnorResult {
                mu: stage_d.codimension(),
                truncation_degree: d,
                certified: true,
            });
        }
        next = Some(stage_d1);
    }
    Err(MilnorError::NotIsolated {
        max_truncation,
        last_q,
    })
}

fn has_constant_or_linear_part(g: &Polynomial) -> bool {
    g.terms().any(|(m, c)| !c.is_zero() && m.total_degree() < 2)
}

/// Monomial basis of polynomials of total degree ≤ D, in graded
/// lexicographic order, with a reverse lookup.
struct MonomialBasis {
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    /// `degree_start[k]` = index of the first monomial of total degree k.
    degree_start: Vec<usize>,
}

impl MonomialBasis {
    fn up_to_degree(n: usize, max_degree: u32) -> Self {
        let mut monomials = Vec::new();
        let mut degree_start = Vec::with_capacity(max_degree as usize + 2);
        for k in 0..=max_degree {
            degree_start.push(monomials.len());
            let mut exps = vec![0u32; n];
            fill_degree(&mut monomials, &mut exps, 0, k);
        }
        degree_start.push(monomials.len());
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        MonomialBasis {
            monomials,
            index,
            degree_start,
        }
    }

    fn len(&self) -> usize {
        self.monomials.len()
    }

    fn degree_range(&self, k: u32) -> std::ops::Range<usize> {
        self.degree_start[k as usize]..self.degree_start[k as usize + 1]
    }
}

fn fill_degree(out: &mut Vec<Monomial>, exps: &mut Vec<u32>, var: usize, remaining: u32) {
    if var + 1 == exps.len() {
        exps[var] = remaining;
        out.push(Monomial(exps.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        exps[var] = e;
        fill_degree(out, exps, var + 1, remaining - e);
    }
    exps[var] = 0;
}

type SparseRow = Vec<(usize, BigRational)>;

/// Echelonized truncated Macaulay matrix at one truncation degree.
struct TruncationStage {
    basis: MonomialBasis,
    /// Pivot rows, each monic at its pivot column, keyed by pivot column.
    pivots: HashMap<usize, SparseRow>,
}

impl TruncationStage {
    fn build(partials: &[Polynomial], n: usize, degree: u32) -> Self {
        let basis = MonomialBasis::up_to_degree(n, degree);
        let mut rows: Vec<SparseRow> = Vec::new();
        let mut shift_exps = vec![0u32; n];
        for p in partials {
            let min_deg = match p
                .terms()
                .filter(|(_, c)| !c.is_zero())
                .map(|(m, _)| m.total_degree())
                .min()
            {
                Some(d) => d,
                None => continue,
            };
            if min_deg > degree {
                continue;
            }
            // Every monomial multiplier x^α with |α| ≤ D − mindeg keeps at
            // least one product term inside the truncation.
            let mut multipliers = Vec::new();
            for k in 0..=(degree - min_deg) {
                fill_degree(&mut multipliers, &mut shift_exps, 0, k);
            }
            for shift in &multipliers {
                let mut row: SparseRow = Vec::new();
                for (m, c) in p.terms() {
                    if c.is_zero() {
                        continue;
                    }
                    let total = m.total_degree() + shift.total_degree();
                    if total > degree {
                        continue;
                    }
                    let prod = Monomial(m.0.iter().zip(&shift.0).map(|(a, b)| a + b).collect());
                    row.push((basis.index[&prod], c.clone()));
                }
                if !row.is_empty() {
                    row.sort_by_key(|(col, _)| *col);
                    rows.push(row);
                }
            }
        }
        let mut stage = TruncationStage {
            basis,
            pivots: HashMap::new(),
        };
        stage.eliminate(rows);
        stage
    }

    /// Column-by-column elimination. For each column the pivot row is chosen
    /// by coefficient size — the candidate whose entry has the smallest
    /// numerator·denominator bit length — which keeps the exact rational
    /// entries from blowing up.
    fn eliminate(&mut self, mut rows: Vec<SparseRow>) {
        for col in 0..self.basis.len() {
            let mut best: Option<(usize, u64)> = None;
            for (i, row) in rows.iter().enumerate() {
                if let Some(c) = row_entry(row, col) {
                    let size = c.numer().bits() + c.denom().bits();
                    if best.is_none_or(|(_, s)| size < s) {
                        best = Some((i, size));
                    }
                }
            }
            let Some((pivot_idx, _)) = best else { continue };
            let mut pivot = rows.swap_remove(pivot_idx);
            let lead = row_entry(&pivot, col).unwrap().clone();
            for (_, c) in pivot.iter_mut() {
                *c /= &lead;
            }
            for row in rows.iter_mut() {
                if let Some(factor) = row_entry(row, col).cloned() {
                    *row = row_subtract_scaled(row, &pivot, &factor);
                }
            }
            rows.retain(|r| !r.is_empty());
            self.pivots.insert(col, pivot);
        }
    }

    fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn codimension(&self) -> u64 {
        (self.basis.len() - self.rank()) as u64
    }

    /// Whether the unit vector of one column reduces to zero against the
    /// pivot rows (i.e. the monomial lies in the truncated ideal).
    fn reduces_to_zero(&self, col: usize) -> bool {
        let mut vec: SparseRow = vec![(col, BigRational::one())];
        let mut scan = 0;
        while scan < vec.len() {
            let (c, coeff) = vec[scan].clone();
            if let Some(pivot) = self.pivots.get(&c) {
                vec = row_subtract_scaled(&vec, pivot, &coeff);
                // Entries below `scan` are at non-pivot columns and stay put;
                // restart the scan from the same position (columns only grow).
            } else {
                scan += 1;
            }
        }
        vec.is_empty()
    }

    /// True when every monomial of some single total degree k (within the
    /// truncation) lies in the truncated ideal.
    fn has_monomial_certificate(&self) -> bool {
        let max_degree = self.basis.degree_start.len() as u32 - 2;
        for k in 1..=max_degree {
            if self
                .basis
                .degree_range(k)
                .all(|col| self.reduces_to_zero(col))
            {
                return true;
            }
        }
        false
    }
}

fn row_entry(row: &SparseRow, col: usize) -> Option<&BigRational> {
    row.binary_search_by_key(&col, |(c, _)| *c)
        .ok()
        .map(|i| &row[i].1)
}

/// row − factor·pivot, merged by column; exact cancellations are dropped.
fn row_subtract_scaled(row: &SparseRow, pivot: &SparseRow, factor: &BigRational) -> SparseRow {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let take_row = j >= pivot.len() || (i < row.len() && row[i].0 < pivot[j].0);
        let take_pivot = i >= row.len() || (j < pivot.len() && pivot[j].0 < row[i].0);
        if take_row {
            out.push(row[i].clone());
            i += 1;
        } else if take_pivot {
            out.push((pivot[j].0, -factor * &pivot[j].1));
            j += 1;
        } else {
            let v = &row[i].1 - factor * &pivot[j].1;
            if !v.is_zero() {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn nondegenerate_quadratic_has_mu_one() {
        // Quotient basis {1}: every degree-1 monomial is a partial.
        for f in [
            poly(2, &[(&[2, 0], 1), (&[0, 2], 1)]),
            poly(2, &[(&[2, 0], -1), (&[0, 2], -1)]),
            poly(
                3,
                &[
                    (&[2, 0, 0], 1),
                    (&[0, 2, 0], -3),
                    (&[0, 0, 2], 5),
                    (&[1, 1, 0], 1),
                ],
            ),
        ] {
            let r = milnor_number(&f, DEFAULT_MAX_TRUNCATION).unwrap();
            assert_eq!(r.mu, 1);
            assert!(r.certified);
        }
    }

    #[test]
    fn cusp_has_mu_two() {
        // Oracle: modulo (3x², −2y) the quotient basis is {1, x} by hand
        // reduction, so μ = 2.
        let f = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let r = milnor_number(&f, DEFAULT_MAX_TRUNCATION).unwrap();
        assert_eq!(r.mu, 2);
        assert!(r.certified);
        assert!(r.truncation_degree <= 4);
    }

    #[test]
    fn three_distinct_lines_cubic_has_mu_four() {
        // x³ + 3xy² = x(x+i√3 y)(x−i√3 y): three distinct complex lines, so
        // μ = (3−1)² = 4 by the homogeneous-with-distinct-roots formula.
        let f = poly(2, &[(&[3, 0], 1), (&[1, 2], 3)]);
        let r = milnor_number(&f, DEFAULT_MAX_TRUNCATION).unwrap();
        assert_eq!(r.mu, 4);
        assert!(r.certified);
    }

    #[test]
    fn quintic_with_degenerate_quadratic_part_has_mu_four() {
        // x⁵ + z⁵ + 2zw − x² − y² − z² − w² − 2xyz − y²z²: the quadratic part
        // is rank-deficient (the zw-block is singular), yet the singularity
        // is isolated with μ = 4.
        let f = poly(
            4,
            &[
                (&[5, 0, 0, 0], 1),
                (&[0, 0, 5, 0], 1),
                (&[0, 0, 1, 1], 2),
                (&[2, 0, 0, 0], -1),
                (&[0, 2, 0, 0], -1),
                (&[0, 0, 2, 0], -1),
                (&[0, 0, 0, 2], -1),
                (&[1, 1, 1, 0], -2),
                (&[0, 2, 2, 0], -1),
            ],
        );
        let r = milnor_number(&f, DEFAULT_MAX_TRUNCATION).unwrap();
        assert_eq!(r.mu, 4);
        assert!(r.certified);
    }

    #[test]
    fn non_isolated_singularities_are_reported() {
        // xyz − z⁴: the gradient vanishes on two coordinate axes.
        let f = poly(3, &[(&[1, 1, 1], 1), (&[0, 0, 4], -1)]);
        assert!(matches!(
            milnor_number(&f, 6),
            Err(MilnorError::NotIsolated { .. })
        ));
        // x³ + x²z − y²: the gradient vanishes on the whole z-axis.
        let g = poly(3, &[(&[3, 0, 0], 1), (&[2, 0, 1], 1), (&[0, 2, 0], -1)]);
        assert!(matches!(
            milnor_number(&g, 6),
            Err(MilnorError::NotIsolated { .. })
        ));
    }

    #[test]
    fn rejects_nonzero_linear_part() {
        let f = poly(2, &[(&[1, 0], 1), (&[0, 2], 1)]);
        assert!(matches!(milnor_number(&f, 8), Err(MilnorError::NotAGerm)));
    }

    /// Once the certificate fires at D, the codimension stays put for every
    /// larger truncation degree up to the bound.
    #[test]
    fn certified_codimension_persists() {
        let f = poly(2, &[(&[3, 0], 1), (&[0, 2], -1)]);
        let partials = f.gradient();
        let r = milnor_number(&f, DEFAULT_MAX_TRUNCATION).unwrap();
        for d in r.truncation_degree..=DEFAULT_MAX_TRUNCATION {
            let stage = TruncationStage::build(&partials, 2, d);
            assert_eq!(stage.codimension(), r.mu, "q changed at degree {d}");
        }
    }
}
