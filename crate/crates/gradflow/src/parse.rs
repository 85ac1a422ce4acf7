//! Text grammar for input polynomials and polynomial maps.
//!
//! Grammar (whitespace ignored everywhere):
//!
//! ```text
//! polynomial := [sign] term (sign term)*
//! term       := coefficient | coefficient [*] factors | factors
//! factors    := factor (* factor)*
//! factor     := variable [^ exponent]
//! coefficient:= integer | integer / integer
//! sign       := + | -
//! ```
//!
//! Variables are the caller-supplied ordered name list; anything else is an
//! unknown-variable error with its byte position. After parsing, germ gates
//! apply: an analyzed polynomial must vanish to second order at the origin
//! (no constant term, no linear term — otherwise the origin is not a
//! critical point and the analysis does not apply), and must not be
//! identically zero. Components of an equivalence map are gated on the
//! constant term only (linear parts are what make the map invertible).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::poly::{Monomial, PolyError, PolyMapGerm, Polynomial};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("unknown variable `{name}` at byte {position}")]
    UnknownVariable { position: usize, name: String },
    #[error(
        "the origin is not a critical point: the polynomial has a nonzero {kind} term \
         ({detail}); gradient-flow analysis at the origin requires f(0) = 0 and ∇f(0) = 0"
    )]
    NotACriticalPoint { kind: String, detail: String },
    #[error("the zero polynomial has no initial form and defines no flow; provide f ≠ 0")]
    ZeroPolynomial,
    #[error("duplicate variable name `{name}`")]
    DuplicateVariable { name: String },
    #[error("coefficient denominator is zero at byte {position}")]
    ZeroDenominator { position: usize },
    #[error("component {index}: {source}")]
    MapComponent {
        index: usize,
        #[source]
        source: Box<ParseError>,
    },
    #[error("invalid map: {0}")]
    InvalidMap(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Integer(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::Integer(v) => write!(f, "integer `{v}`"),
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Plus => write!(f, "`+`"),
            Token::Minus => write!(f, "`-`"),
            Token::Star => write!(f, "`*`"),
            Token::Slash => write!(f, "`/`"),
            Token::Caret => write!(f, "`^`"),
            Token::End => write!(f, "end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                tokens.push((i, Token::Plus));
                i += 1;
            }
            b'-' => {
                tokens.push((i, Token::Minus));
                i += 1;
            }
            b'*' => {
                tokens.push((i, Token::Star));
                i += 1;
            }
            b'/' => {
                tokens.push((i, Token::Slash));
                i += 1;
            }
            b'^' => {
                tokens.push((i, Token::Caret));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let digits = &text[start..i];
                let value = BigInt::parse_bytes(digits.as_bytes(), 10).expect("digits");
                tokens.push((start, Token::Integer(value)));
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push((start, Token::Ident(text[start..i].to_string())));
            }
            _ => {
                return Err(ParseError::Syntax {
                    position: i,
                    expected: "a term, operator, or variable".to_string(),
                    found: format!("`{}`", &text[i..text.len().min(i + 1)]),
                });
            }
        }
    }
    tokens.push((text.len(), Token::End));
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    variables: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &(usize, Token) {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> (usize, Token) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let (position, found) = self.peek();
        ParseError::Syntax {
            position: *position,
            expected: expected.to_string(),
            found: format!("{found}"),
        }
    }

    fn var_index(&self, name: &str, position: usize) -> Result<usize, ParseError> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ParseError::UnknownVariable {
                position,
                name: name.to_string(),
            })
    }

    /// polynomial := [sign] term (sign term)*
    fn polynomial(&mut self) -> Result<Polynomial, ParseError> {
        let mut poly = Polynomial::zero(self.variables.len());
        let mut sign = match self.peek().1 {
            Token::Minus => {
                self.bump();
                -1
            }
            Token::Plus => {
                self.bump();
                1
            }
            _ => 1,
        };
        loop {
            let (monomial, coeff) = self.term()?;
            let signed = if sign < 0 { -coeff } else { coeff };
            poly.add_term(monomial, signed);
            match self.peek().1 {
                Token::Plus => {
                    self.bump();
                    sign = 1;
                }
                Token::Minus => {
                    self.bump();
                    sign = -1;
                }
                Token::End => break,
                _ => return Err(self.error("`+`, `-`, or end of input")),
            }
        }
        Ok(poly)
    }

    /// term := coefficient [[*] factors] | factors
    fn term(&mut self) -> Result<(Monomial, BigRational), ParseError> {
        let mut coeff = BigRational::from_integer(1.into());
        let mut exponents = vec![0u32; self.variables.len()];
        if let Token::Integer(_) = self.peek().1 {
            coeff = self.coefficient()?;
            match self.peek().1 {
                Token::Star => {
                    self.bump();
                    self.factors(&mut exponents)?;
                }
                Token::Ident(_) => {
                    self.factors(&mut exponents)?;
                }
                _ => {}
            }
        } else {
            self.factors(&mut exponents)?;
        }
        Ok((Monomial(exponents), coeff))
    }

    /// coefficient := integer [/ integer]
    fn coefficient(&mut self) -> Result<BigRational, ParseError> {
        let (_, tok) = self.bump();
        let Token::Integer(numer) = tok else {
            unreachable!("coefficient called on non-integer");
        };
        if self.peek().1 == Token::Slash {
            self.bump();
            let (dpos, dtok) = self.bump();
            let Token::Integer(denom) = dtok else {
                return Err(ParseError::Syntax {
                    position: dpos,
                    expected: "an integer denominator".to_string(),
                    found: format!("{dtok}"),
                });
            };
            if denom.is_zero() {
                return Err(ParseError::ZeroDenominator { position: dpos });
            }
            Ok(BigRational::new(numer, denom))
        } else {
            Ok(BigRational::from_integer(numer))
        }
    }

    /// factors := factor (* factor)*
    fn factors(&mut self, exponents: &mut [u32]) -> Result<(), ParseError> {
        self.factor(exponents)?;
        while self.peek().1 == Token::Star {
            self.bump();
            self.factor(exponents)?;
        }
        Ok(())
    }

    /// factor := variable [^ exponent]
    fn factor(&mut self, exponents: &mut [u32]) -> Result<(), ParseError> {
        let (pos, tok) = self.bump();
        let Token::Ident(name) = tok else {
            return Err(ParseError::Syntax {
                position: pos,
                expected: "a variable name".to_string(),
                found: format!("{tok}"),
            });
        };
        let index = self.var_index(&name, pos)?;
        let mut power: u32 = 1;
        if self.peek().1 == Token::Caret {
            self.bump();
            let (epos, etok) = self.bump();
            let Token::Integer(e) = etok else {
                return Err(ParseError::Syntax {
                    position: epos,
                    expected: "an integer exponent".to_string(),
                    found: format!("{etok}"),
                });
            };
            power = u32::try_from(&e).map_err(|_| ParseError::Syntax {
                position: epos,
                expected: "an exponent that fits in 32 bits".to_string(),
                found: format!("`{e}`"),
            })?;
        }
        exponents[index] =
            exponents[index]
                .checked_add(power)
                .ok_or_else(|| ParseError::Syntax {
                    position: pos,
                    expected: "a smaller total exponent".to_string(),
                    found: "exponent overflow".to_string(),
                })?;
        Ok(())
    }
}

fn check_distinct(variables: &[String]) -> Result<(), ParseError> {
    for (i, v) in variables.iter().enumerate() {
        if variables[..i].contains(v) {
            return Err(ParseError::DuplicateVariable { name: v.clone() });
        }
    }
    Ok(())
}

fn parse_raw(text: &str, variables: &[String]) -> Result<Polynomial, ParseError> {
    check_distinct(variables)?;
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        variables,
    };
    parser.polynomial()
}

/// Parses a polynomial to analyze: full grammar plus the critical-point
/// gates (no constant term, no linear term, not identically zero).
pub fn parse_polynomial(text: &str, variables: &[String]) -> Result<Polynomial, ParseError> {
    let poly = parse_raw(text, variables)?;
    let mut constant_terms = Vec::new();
    let mut linear_terms = Vec::new();
    for (m, c) in poly.terms() {
        if c.is_zero() {
            continue;
        }
        match m.total_degree() {
            0 => constant_terms.push(format!("{c}")),
            1 => {
                let var = m.0.iter().position(|&e| e > 0).unwrap_or(0);
                linear_terms.push(format!("{c}·{}", variables[var]));
            }
            _ => {}
        }
    }
    if !constant_terms.is_empty() {
        return Err(ParseError::NotACriticalPoint {
            kind: "constant".to_string(),
            detail: constant_terms.join(", "),
        });
    }
    if !linear_terms.is_empty() {
        return Err(ParseError::NotACriticalPoint {
            kind: "linear".to_string(),
            detail: linear_terms.join(", "),
        });
    }
    if poly.terms().all(|(_, c)| c.is_zero()) {
        return Err(ParseError::ZeroPolynomial);
    }
    Ok(poly)
}

/// Parses a comma-separated polynomial map (one component per variable).
/// Components must vanish at the origin but may — and for invertibility
/// must — carry linear terms.
pub fn parse_map(text: &str, variables: &[String]) -> Result<PolyMapGerm, ParseError> {
    check_distinct(variables)?;
    let mut components = Vec::new();
    let mut offset = 0usize;
    for (index, chunk) in text.split(',').enumerate() {
        let component = parse_raw(chunk, variables).map_err(|e| ParseError::MapComponent {
            index,
            source: Box::new(offset_error(e, offset)),
        })?;
        components.push(component);
        offset += chunk.len() + 1;
    }
    Ok(PolyMapGerm::new(components)?)
}

/// Shifts byte positions of a component error to the full map text.
fn offset_error(e: ParseError, offset: usize) -> ParseError {
    match e {
        ParseError::Syntax {
            position,
            expected,
            found,
        } => ParseError::Syntax {
            position: position + offset,
            expected,
            found,
        },
        ParseError::UnknownVariable { position, name } => ParseError::UnknownVariable {
            position: position + offset,
            name,
        },
        ParseError::ZeroDenominator { position } => ParseError::ZeroDenominator {
            position: position + offset,
        },
        other => other,
    }
}
