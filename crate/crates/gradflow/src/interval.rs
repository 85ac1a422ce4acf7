//! Exact interval arithmetic over dyadic rationals.
//!
//! Certified sign classification needs interval bounds that are *sound*, so
//! endpoints are exact dyadic rationals `mant * 2^exp` (every `f64` is one,
//! and sums/products of dyadics are dyadics — no rounding ever happens).
//! Polynomials are scaled to integer coefficients before range evaluation,
//! which keeps every intermediate value dyadic.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::poly::Monomial;

/// Exact dyadic rational `mant * 2^exp`, normalized so `mant` is odd or zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            mant: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn from_bigint(m: BigInt) -> Self {
        Dyadic { mant: m, exp: 0 }.normalized()
    }

    /// Exact conversion: every finite `f64` is a dyadic rational.
    ///
    /// Panics on NaN or infinity, which never arise from finite mesh geometry.
    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "cannot represent a non-finite float exactly");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let biased_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased_exp == 0 {
            // subnormal: frac * 2^(-1074)
            (BigInt::from(frac), -1074)
        } else {
            (BigInt::from(frac + (1u64 << 52)), biased_exp - 1075)
        };
        Dyadic {
            mant: mant * sign,
            exp,
        }
        .normalized()
    }

    fn normalized(mut self) -> Self {
        if self.mant.is_zero() {
            self.exp = 0;
        } else if let Some(tz) = self.mant.trailing_zeros() {
            if tz > 0 {
                self.mant >>= tz;
                self.exp += tz as i64;
            }
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mant.is_positive()
    }

    /// Approximate value for reporting; exactness is never needed here.
    pub fn to_f64(&self) -> f64 {
        if self.mant.is_zero() {
            return 0.0;
        }
        // Reduce the mantissa to at most 64 bits, then apply the power of two
        // in two halves so intermediate scaling cannot under- or overflow.
        let bits = self.mant.bits() as i64;
        let shift = (bits - 64).max(0);
        let top = (&self.mant >> shift).to_f64().unwrap_or(f64::NAN);
        let e = (self.exp + shift).clamp(-4000, 4000);
        let h1 = (e / 2) as i32;
        let h2 = (e - h1 as i64) as i32;
        top * 2f64.powi(h1) * 2f64.powi(h2)
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        if self.mant.is_zero() {
            return other.clone();
        }
        if other.mant.is_zero() {
            return self.clone();
        }
        let (lo_exp, a_shift, b_shift) = if self.exp >= other.exp {
            (other.exp, (self.exp - other.exp) as u64, 0u64)
        } else {
            (self.exp, 0u64, (other.exp - self.exp) as u64)
        };
        let mant = (&self.mant << a_shift) + (&other.mant << b_shift);
        Dyadic { mant, exp: lo_exp }.normalized()
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic {
            mant: -&self.mant,
            exp: self.exp,
        }
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic {
            mant: &self.mant * &other.mant,
            exp: self.exp + other.exp,
        }
        .normalized()
    }

    pub fn mul_bigint(&self, c: &BigInt) -> Dyadic {
        Dyadic {
            mant: &self.mant * c,
            exp: self.exp,
        }
        .normalized()
    }

    pub fn pow(&self, k: u32) -> Dyadic {
        if k == 0 {
            return Dyadic::from_bigint(BigInt::from(1));
        }
        Dyadic {
            mant: self.mant.pow(k),
            exp: self.exp * k as i64,
        }
        .normalized()
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let a_sign = self.mant.sign();
        let b_sign = other.mant.sign();
        if a_sign != b_sign {
            return match (a_sign, b_sign) {
                (num_bigint::Sign::Minus, _) => Ordering::Less,
                (_, num_bigint::Sign::Minus) => Ordering::Greater,
                (num_bigint::Sign::NoSign, num_bigint::Sign::Plus) => Ordering::Less,
                (num_bigint::Sign::Plus, num_bigint::Sign::NoSign) => Ordering::Greater,
                _ => Ordering::Equal,
            };
        }
        let diff = self.sub(other);
        if diff.mant.is_negative() {
            Ordering::Less
        } else if diff.mant.is_zero() {
            Ordering::Equal
        } else {
            Ordering::Greater
        }
    }
}

/// Closed interval `[lo, hi]` of dyadic rationals.
#[derive(Debug, Clone)]
pub struct DyInterval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl DyInterval {
    pub fn point(v: Dyadic) -> Self {
        DyInterval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo <= hi, "inverted interval endpoints");
        DyInterval { lo, hi }
    }

    pub fn zero() -> Self {
        Self::point(Dyadic::zero())
    }

    pub fn add(&self, other: &DyInterval) -> DyInterval {
        DyInterval {
            lo: self.lo.add(&other.lo),
            hi: self.hi.add(&other.hi),
        }
    }

    pub fn mul(&self, other: &DyInterval) -> DyInterval {
        let candidates = [
            self.lo.mul(&other.lo),
            self.lo.mul(&other.hi),
            self.hi.mul(&other.lo),
            self.hi.mul(&other.hi),
        ];
        let lo = candidates.iter().min().unwrap().clone();
        let hi = candidates.iter().max().unwrap().clone();
        DyInterval { lo, hi }
    }

    /// Tight image of `x^k` over the interval (monotone for odd `k`,
    /// sign-folded for even `k`).
    pub fn pow(&self, k: u32) -> DyInterval {
        if k == 0 {
            return DyInterval::point(Dyadic::from_bigint(BigInt::from(1)));
        }
        if k % 2 == 1 {
            return DyInterval {
                lo: self.lo.pow(k),
                hi: self.hi.pow(k),
            };
        }
        let lo_p = self.lo.pow(k);
        let hi_p = self.hi.pow(k);
        if !self.lo.is_negative() {
            DyInterval { lo: lo_p, hi: hi_p }
        } else if !self.hi.is_positive() {
            DyInterval { lo: hi_p, hi: lo_p }
        } else {
            DyInterval {
                lo: Dyadic::zero(),
                hi: lo_p.max(hi_p),
            }
        }
    }

    /// Scales by an exact integer, flipping endpoints for negative scalars.
    pub fn scale_bigint(&self, c: &BigInt) -> DyInterval {
        if c.is_negative() {
            DyInterval {
                lo: self.hi.mul_bigint(c),
                hi: self.lo.mul_bigint(c),
            }
        } else {
            DyInterval {
                lo: self.lo.mul_bigint(c),
                hi: self.hi.mul_bigint(c),
            }
        }
    }

    pub fn is_strictly_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.lo.is_positive()
    }
}

/// Sound range of an integer-coefficient polynomial (given as scaled term
/// list) over an axis-aligned box of dyadic intervals.
pub fn range_on_box(terms: &[(Monomial, BigInt)], box_: &[DyInterval]) -> DyInterval {
    let n = box_.len();
    // Per-variable power tables up to the maximum exponent used.
    let mut max_exp = vec![0u32; n];
    for (mono, _) in terms {
        for (i, &e) in mono.0.iter().enumerate() {
            max_exp[i] = max_exp[i].max(e);
        }
    }
    let tables: Vec<Vec<DyInterval>> = (0..n)
        .map(|i| (0..=max_exp[i]).map(|e| box_[i].pow(e)).collect())
        .collect();
    let mut acc = DyInterval::zero();
    for (mono, c) in terms {
        let mut t: Option<DyInterval> = None;
        for (i, &e) in mono.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let p = &tables[i][e as usize];
            t = Some(match t {
                None => p.clone(),
                Some(prev) => prev.mul(p),
            });
        }
        let term_range = match t {
            None => DyInterval::point(Dyadic::from_bigint(c.clone())),
            Some(range) => range.scale_bigint(c),
        };
        acc = acc.add(&term_range);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use num_rational::BigRational;

    #[test]
    fn f64_round_trip_exact() {
        for x in [0.0, 1.0, -2.5, 0.1, 1e-300, -3.7e12, f64::MIN_POSITIVE] {
            let d = Dyadic::from_f64(x);
            assert_eq!(d.to_f64(), x, "exact dyadic representation of {x}");
        }
    }

    #[test]
    fn dyadic_arithmetic_matches_rationals() {
        let a = Dyadic::from_f64(0.75);
        let b = Dyadic::from_f64(-0.1);
        let s = a.add(&b);
        assert_eq!(s.to_f64(), 0.75 + -0.1);
        let p = a.mul(&b);
        assert_eq!(p.to_f64(), 0.75 * -0.1);
        assert_eq!(a.pow(3).to_f64(), 0.75f64.powi(3));
        assert!(b < a);
        assert!(Dyadic::zero() < a);
        assert!(b < Dyadic::zero());
    }

    #[test]
    fn interval_pow_even_contains_zero() {
        let iv = DyInterval::new(Dyadic::from_f64(-2.0), Dyadic::from_f64(1.0));
        let sq = iv.pow(2);
        assert_eq!(sq.lo.to_f64(), 0.0);
        assert_eq!(sq.hi.to_f64(), 4.0);
        let cube = iv.pow(3);
        assert_eq!(cube.lo.to_f64(), -8.0);
        assert_eq!(cube.hi.to_f64(), 1.0);
    }

    /// The interval range must contain every sampled value of the polynomial
    /// over the box (soundness spot check).
    #[test]
    fn range_contains_samples() {
        // p = x^3 - 2xy^2 + y, integer coefficients.
        let mut p = Polynomial::zero(2);
        p.add_term(Monomial(vec![3, 0]), BigRational::from_integer(1.into()));
        p.add_term(Monomial(vec![1, 2]), BigRational::from_integer((-2).into()));
        p.add_term(Monomial(vec![0, 1]), BigRational::from_integer(1.into()));
        let terms = p.integer_scaled_terms();
        let box_ = vec![
            DyInterval::new(Dyadic::from_f64(-0.5), Dyadic::from_f64(0.25)),
            DyInterval::new(Dyadic::from_f64(0.1), Dyadic::from_f64(0.3)),
        ];
        let range = range_on_box(&terms, &box_);
        let (lo, hi) = (range.lo.to_f64(), range.hi.to_f64());
        for i in 0..=10 {
            for j in 0..=10 {
                let x = -0.5 + 0.75 * (i as f64) / 10.0;
                let y = 0.1 + 0.2 * (j as f64) / 10.0;
                let v = p.eval_f64(&[x, y]).unwrap();
                assert!(
                    v >= lo - 1e-12 && v <= hi + 1e-12,
                    "{v} outside [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn strict_sign_predicates() {
        let neg = DyInterval::new(Dyadic::from_f64(-3.0), Dyadic::from_f64(-0.5));
        assert!(neg.is_strictly_negative());
        assert!(!neg.is_strictly_positive());
        let touching = DyInterval::new(Dyadic::from_f64(-1.0), Dyadic::zero());
        assert!(!touching.is_strictly_negative());
        assert!(!touching.is_strictly_positive());
    }
}
