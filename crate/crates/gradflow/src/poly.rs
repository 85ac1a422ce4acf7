//! Exact sparse multivariate polynomials over the rationals.
//!
//! Everything downstream (initial forms, quadratic signatures, certified sign
//! classification, Milnor numbers) depends on this arithmetic being exact, so
//! coefficients are `BigRational` and all ring operations are implemented
//! without rounding.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from polynomial-level operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the zero polynomial has no initial form")]
    ZeroPolynomial,
    #[error("not a homogeneous quadratic form")]
    NotQuadraticForm,
    #[error("map component {index} has a non-zero constant term; a germ map must fix the origin")]
    MapComponentConstantTerm { index: usize },
    #[error("map is not square: {components} components over {vars} variables")]
    MapNotSquare { components: usize, vars: usize },
    #[error("linear part of the map is singular")]
    SingularLinearPart,
    #[error("map component count mismatch: expected {expected}, got {got}")]
    MapComponentCount { expected: usize, got: usize },
}

/// Exponent vector of a single monomial. Ordered lexicographically for
/// storage; display and column orderings sort by total degree first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Graded-lexicographic comparison with earlier variables ranked higher:
    /// total degree first, then higher powers of earlier variables first.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }

    fn mul(&self, other: &Self) -> Self {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Sparse polynomial with exact rational coefficients.
///
/// Invariant: no stored coefficient is zero, and every stored exponent vector
/// has length `n_vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Polynomial {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(Monomial(vec![0; n_vars]), c);
        p
    }

    pub fn one(n_vars: usize) -> Self {
        Self::constant(n_vars, BigRational::one())
    }

    /// The monomial `x_i`.
    pub fn variable(n_vars: usize, i: usize) -> Self {
        assert!(i < n_vars, "variable index out of range");
        let mut expo = vec![0; n_vars];
        expo[i] = 1;
        let mut p = Self::zero(n_vars);
        p.add_term(Monomial(expo), BigRational::one());
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Adds `c * x^mono`, removing the entry if the sum cancels.
    pub fn add_term(&mut self, mono: Monomial, c: BigRational) {
        assert_eq!(mono.0.len(), self.n_vars, "exponent vector length mismatch");
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mono) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn coefficient(&self, mono: &Monomial) -> BigRational {
        self.terms
            .get(mono)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Total degree, or `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::total_degree).max()
    }

    /// Minimal total degree over the support, or `None` for zero.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::total_degree).min()
    }

    /// `Some(d)` if every term has total degree `d`.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let d = self.total_degree()?;
        if self.min_degree() == Some(d) {
            Some(d)
        } else {
            None
        }
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate(&self, x: &[BigRational]) -> Result<BigRational, PolyError> {
        if x.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: x.len(),
            });
        }
        let mut acc = BigRational::zero();
        for (mono, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(&mono.0) {
                for _ in 0..e {
                    t *= xi;
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Floating-point evaluation at a point.
    pub fn eval_f64(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: x.len(),
            });
        }
        Ok(self.eval_f64_raw(x))
    }

    /// Unchecked f64 evaluation for hot loops; callers validate dimensions once.
    pub(crate) fn eval_f64_raw(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (mono, c) in &self.terms {
            let mut t = rational_to_f64(c);
            for (xi, &e) in x.iter().zip(&mono.0) {
                if e > 0 {
                    t *= xi.powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Partial derivative with respect to variable `i`.
    pub fn partial_derivative(&self, i: usize) -> Polynomial {
        assert!(i < self.n_vars, "variable index out of range");
        let mut out = Polynomial::zero(self.n_vars);
        for (mono, c) in &self.terms {
            let e = mono.0[i];
            if e == 0 {
                continue;
            }
            let mut expo = mono.0.clone();
            expo[i] -= 1;
            out.add_term(
                Monomial(expo),
                c * BigRational::from_integer(BigInt::from(e)),
            );
        }
        out
    }

    /// All partial derivatives, in variable order.
    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n_vars)
            .map(|i| self.partial_derivative(i))
            .collect()
    }

    /// Gradient evaluated at a float point; `out` must have length `n_vars`.
    /// Convenience for integrators that do not want to hold `Vec<Polynomial>`.
    pub fn eval_gradient_f64(grad: &[Polynomial], x: &[f64], out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(grad) {
            *o = g.eval_f64_raw(x);
        }
    }

    /// Splits off the lowest-degree homogeneous part.
    pub fn initial_form(&self) -> Result<InitialForm, PolyError> {
        let d = self.min_degree().ok_or(PolyError::ZeroPolynomial)?;
        let mut form = Polynomial::zero(self.n_vars);
        let mut remainder = Polynomial::zero(self.n_vars);
        for (mono, c) in &self.terms {
            if mono.total_degree() == d {
                form.add_term(mono.clone(), c.clone());
            } else {
                remainder.add_term(mono.clone(), c.clone());
            }
        }
        Ok(InitialForm {
            degree: d,
            form,
            remainder,
        })
    }

    /// Substitutes `images[i]` for variable `i`. All images must share a
    /// common variable count, which becomes the result's.
    pub fn substitute(&self, images: &[Polynomial]) -> Result<Polynomial, PolyError> {
        if images.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: images.len(),
            });
        }
        let m = images.first().map_or(self.n_vars, Polynomial::n_vars);
        for g in images {
            if g.n_vars != m {
                return Err(PolyError::DimensionMismatch {
                    expected: m,
                    got: g.n_vars,
                });
            }
        }
        // Progressive per-variable power tables to avoid recomputing powers.
        let mut powers: Vec<Vec<Polynomial>> = images
            .iter()
            .map(|g| vec![Polynomial::one(m), g.clone()])
            .collect();
        let mut acc = Polynomial::zero(m);
        for (mono, c) in &self.terms {
            let mut t = Polynomial::constant(m, c.clone());
            for (i, &e) in mono.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let table = &mut powers[i];
                while table.len() <= e as usize {
                    let next = mul(table.last().unwrap(), &table[1]);
                    table.push(next);
                }
                t = mul(&t, &table[e as usize]);
            }
            acc = add(&acc, &t);
        }
        Ok(acc)
    }

    /// `self^k` by binary exponentiation.
    pub fn pow(&self, k: u32) -> Polynomial {
        let mut result = Polynomial::one(self.n_vars);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = mul(&result, &base);
            }
            base = mul(&base, &base);
            k >>= 1;
        }
        result
    }

    /// Scales away denominators: returns the integer-coefficient term list of
    /// `lcm(denominators) * self`, which has the same sign everywhere.
    pub fn integer_scaled_terms(&self) -> Vec<(Monomial, BigInt)> {
        let mut lcm = BigInt::one();
        for c in self.terms.values() {
            lcm = num_integer::lcm(lcm, c.denom().clone());
        }
        self.terms
            .iter()
            .map(|(m, c)| {
                let scaled = c * BigRational::from_integer(lcm.clone());
                debug_assert!(scaled.denom().is_one());
                (m.clone(), scaled.numer().clone())
            })
            .collect()
    }

    /// Renders with the given variable names using the input grammar
    /// (`c*x^a*y^b` terms joined by `+`/`-`, graded term order).
    pub fn to_text(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.n_vars, "variable name count mismatch");
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut keys: Vec<&Monomial> = self.terms.keys().collect();
        keys.sort_by(|a, b| a.graded_cmp(b));
        let mut out = String::new();
        for (idx, mono) in keys.iter().enumerate() {
            let c = &self.terms[*mono];
            let neg = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut factors: Vec<String> = Vec::new();
            for (i, &e) in mono.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(names[i].clone()),
                    _ => factors.push(format!("{}^{}", names[i], e)),
                }
            }
            if factors.is_empty() {
                out.push_str(&format_rational(&abs));
            } else {
                if !abs.is_one() {
                    out.push_str(&format_rational(&abs));
                    out.push('*');
                }
                out.push_str(&factors.join("*"));
            }
        }
        out
    }

    /// Default variable names: `x, y, z, w` up to four variables, `x0, x1, ...`
    /// beyond that.
    pub fn default_names(n_vars: usize) -> Vec<String> {
        if n_vars <= 4 {
            ["x", "y", "z", "w"][..n_vars]
                .iter()
                .map(|s| s.to_string())
                .collect()
        } else {
            (0..n_vars).map(|i| format!("x{i}")).collect()
        }
    }
}

fn format_rational(c: &BigRational) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text(&Self::default_names(self.n_vars)))
    }
}

/// Lowest-degree homogeneous part of a germ, with what is left over.
#[derive(Debug, Clone)]
pub struct InitialForm {
    /// Total degree of the initial form.
    pub degree: u32,
    /// The initial form itself (homogeneous of `degree`).
    pub form: Polynomial,
    /// `original - form`; every term has strictly higher degree.
    pub remainder: Polynomial,
}

fn check_same_vars(a: &Polynomial, b: &Polynomial) -> usize {
    assert_eq!(
        a.n_vars, b.n_vars,
        "polynomial arithmetic across different variable counts"
    );
    a.n_vars
}

pub(crate) fn add(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let n = check_same_vars(a, b);
    let mut out = Polynomial {
        n_vars: n,
        terms: a.terms.clone(),
    };
    for (m, c) in &b.terms {
        out.add_term(m.clone(), c.clone());
    }
    out
}

pub(crate) fn sub(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let n = check_same_vars(a, b);
    let mut out = Polynomial {
        n_vars: n,
        terms: a.terms.clone(),
    };
    for (m, c) in &b.terms {
        out.add_term(m.clone(), -c.clone());
    }
    out
}

pub(crate) fn mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
    let n = check_same_vars(a, b);
    let mut out = Polynomial::zero(n);
    for (ma, ca) in &a.terms {
        for (mb, cb) in &b.terms {
            out.add_term(ma.mul(mb), ca * cb);
        }
    }
    out
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $func:ident) => {
        impl std::ops::$trait for &Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                $func(self, rhs)
            }
        }
        impl std::ops::$trait for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                $func(&self, &rhs)
            }
        }
    };
}

impl_binop!(Add, add, add);
impl_binop!(Sub, sub, sub);
impl_binop!(Mul, mul, mul);

impl std::ops::Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        let mut out = Polynomial::zero(self.n_vars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl std::ops::Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

/// Inertia of a quadratic form: counts of positive, negative, and zero
/// entries in any diagonalization (well-defined by Sylvester's law).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticSignature {
    pub positives: usize,
    pub negatives: usize,
    pub zeros: usize,
}

/// Computes the signature of a homogeneous quadratic form by exact symmetric
/// congruence reduction (Lagrange reduction with rational pivots).
pub fn quadratic_signature(q: &Polynomial) -> Result<QuadraticSignature, PolyError> {
    if q.homogeneous_degree() != Some(2) {
        return Err(PolyError::NotQuadraticForm);
    }
    let n = q.n_vars;
    // Symmetric coefficient matrix: a_ii = coeff(x_i^2), a_ij = coeff(x_i x_j)/2.
    let mut a = vec![vec![BigRational::zero(); n]; n];
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for (mono, c) in &q.terms {
        let support: Vec<usize> = (0..n).filter(|&i| mono.0[i] > 0).collect();
        match support.as_slice() {
            [i] => a[*i][*i] = c.clone(),
            [i, j] => {
                a[*i][*j] = c * &half;
                a[*j][*i] = a[*i][*j].clone();
            }
            _ => unreachable!("degree-2 monomial involves at most two variables"),
        }
    }
    Ok(signature_of_symmetric(a))
}

/// Inertia of an exact symmetric rational matrix via congruence reduction.
// Index loops: the row/column operations alias `a` against itself.
#[allow(clippy::needless_range_loop)]
pub(crate) fn signature_of_symmetric(mut a: Vec<Vec<BigRational>>) -> QuadraticSignature {
    let n = a.len();
    let mut positives = 0;
    let mut negatives = 0;
    for k in 0..n {
        if a[k][k].is_zero() {
            // Prefer a later non-zero diagonal entry (symmetric swap).
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                a.swap(k, j);
                for row in a.iter_mut() {
                    row.swap(k, j);
                }
            } else if let Some(j) = (k + 1..n).find(|&j| !a[k][j].is_zero()) {
                // All later diagonal entries vanish: fold column j into k so
                // the pivot becomes 2*a[k][j] (the substitution x_k -> x_k + x_j).
                for i in 0..n {
                    let v = a[i][j].clone();
                    a[i][k] += v;
                }
                for j2 in 0..n {
                    let v = a[j][j2].clone();
                    a[k][j2] += v;
                }
            }
        }
        let pivot = a[k][k].clone();
        if pivot.is_zero() {
            continue; // contributes a zero of the signature
        }
        if pivot.is_positive() {
            positives += 1;
        } else {
            negatives += 1;
        }
        // Symmetric elimination below/right of the pivot. With f_i =
        // a[i][k]/pivot, the congruence update is a[i][j] -= f_i * f_j * pivot.
        let factors: Vec<BigRational> = (k + 1..n).map(|i| &a[i][k] / &pivot).collect();
        for i in k + 1..n {
            for j in k + 1..n {
                let delta = &factors[i - k - 1] * &factors[j - k - 1] * &pivot;
                a[i][j] -= delta;
            }
            a[i][k] = BigRational::zero();
            a[k][i] = BigRational::zero();
        }
    }
    QuadraticSignature {
        positives,
        negatives,
        zeros: n - positives - negatives,
    }
}

/// Polynomial map germ `phi: R^n -> R^n` fixing the origin, stored as its
/// component polynomials plus the extracted linear part.
#[derive(Debug, Clone)]
pub struct PolyMapGerm {
    components: Vec<Polynomial>,
    /// Row i, column j: coefficient of `x_j` in component `i`.
    linear_part: Vec<Vec<BigRational>>,
}

impl PolyMapGerm {
    /// Builds a germ map from its components, requiring a square map with all
    /// components vanishing at the origin.
    pub fn new(components: Vec<Polynomial>) -> Result<Self, PolyError> {
        let n = components.len();
        for (index, comp) in components.iter().enumerate() {
            if comp.n_vars != n {
                return Err(PolyError::MapNotSquare {
                    components: n,
                    vars: comp.n_vars,
                });
            }
            let const_mono = Monomial(vec![0; n]);
            if !comp.coefficient(&const_mono).is_zero() {
                return Err(PolyError::MapComponentConstantTerm { index });
            }
        }
        let mut linear_part = vec![vec![BigRational::zero(); n]; n];
        for (i, comp) in components.iter().enumerate() {
            for j in 0..n {
                let mut expo = vec![0; n];
                expo[j] = 1;
                linear_part[i][j] = comp.coefficient(&Monomial(expo));
            }
        }
        Ok(PolyMapGerm {
            components,
            linear_part,
        })
    }

    pub fn identity(n: usize) -> Self {
        let components = (0..n).map(|i| Polynomial::variable(n, i)).collect();
        Self::new(components).expect("identity map is a valid germ map")
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn n_vars(&self) -> usize {
        self.components.len()
    }

    pub fn linear_part(&self) -> &[Vec<BigRational>] {
        &self.linear_part
    }

    /// Exact invertibility of the linear part (local diffeomorphism test).
    pub fn linear_part_invertible(&self) -> bool {
        !determinant(&self.linear_part).is_zero()
    }

    /// True if every component has total degree at most 1.
    pub fn is_linear(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.total_degree().unwrap_or(0) <= 1)
    }

    /// Inverse of a purely linear invertible map, as a map germ.
    pub fn inverse_linear(&self) -> Result<PolyMapGerm, PolyError> {
        if !self.is_linear() {
            return Err(PolyError::SingularLinearPart);
        }
        let inv = invert_matrix(&self.linear_part).ok_or(PolyError::SingularLinearPart)?;
        let n = self.n_vars();
        let components = inv
            .iter()
            .map(|row| {
                let mut p = Polynomial::zero(n);
                for (j, c) in row.iter().enumerate() {
                    let mut expo = vec![0; n];
                    expo[j] = 1;
                    p.add_term(Monomial(expo), c.clone());
                }
                p
            })
            .collect();
        PolyMapGerm::new(components)
    }
}

/// Composes `f` with the map germ: returns `f(phi_1, ..., phi_n)`.
pub fn compose(f: &Polynomial, phi: &PolyMapGerm) -> Result<Polynomial, PolyError> {
    if phi.n_vars() != f.n_vars() {
        return Err(PolyError::MapComponentCount {
            expected: f.n_vars(),
            got: phi.n_vars(),
        });
    }
    f.substitute(phi.components())
}

/// Exact determinant by fraction Gaussian elimination (small matrices).
// Index loops: the eliminations alias rows of `a` against each other.
#[allow(clippy::needless_range_loop)]
pub(crate) fn determinant(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let mut det = BigRational::one();
    for k in 0..n {
        let pivot_row = match (k..n).find(|&i| !a[i][k].is_zero()) {
            Some(r) => r,
            None => return BigRational::zero(),
        };
        if pivot_row != k {
            a.swap(k, pivot_row);
            det = -det;
        }
        let pivot = a[k][k].clone();
        det *= &pivot;
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let factor = &a[i][k] / &pivot;
            for j in k..n {
                let delta = &factor * &a[k][j];
                a[i][j] -= delta;
            }
        }
    }
    det
}

/// Exact inverse by Gauss-Jordan; `None` when singular.
pub(crate) fn invert_matrix(m: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        let pivot_row = (k..n).find(|&i| !a[i][k].is_zero())?;
        a.swap(k, pivot_row);
        inv.swap(k, pivot_row);
        let pivot = a[k][k].clone();
        for j in 0..n {
            a[k][j] /= &pivot;
            inv[k][j] /= &pivot;
        }
        for i in 0..n {
            if i == k || a[i][k].is_zero() {
                continue;
            }
            let factor = a[i][k].clone();
            for j in 0..n {
                let da = &factor * &a[k][j];
                a[i][j] -= da;
                let di = &factor * &inv[k][j];
                inv[i][j] -= di;
            }
        }
    }
    Some(inv)
}
