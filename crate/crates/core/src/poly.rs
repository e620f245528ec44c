//! Sparse multivariate polynomials with arbitrary-precision rational
//! coefficients.
//!
//! Terms are kept in a `BTreeMap` keyed by [`MultiIndex`], whose ordering is
//! graded-lexicographic, so printing and serialization are deterministic.
//! Zero coefficients are never stored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Builds a rational from a numerator and a denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational value of a finite binary float.
pub fn rat_from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Prints a rational as `num/den` (denominator always shown).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `num/den`, an integer, or a finite decimal such as `-0.25`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in `{s}`")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in `{s}`")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.trim_start().starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        if !frac_part.chars().all(|c| c.is_ascii_digit())
            || !int_digits.chars().all(|c| c.is_ascii_digit())
        {
            return Err(Error::Parse(format!("bad decimal `{s}`")));
        }
        let digits = format!("{int_digits}{frac_part}");
        let mag: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad decimal `{s}`")))?
        };
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        let r = BigRational::new(mag, den);
        return Ok(if negative { -r } else { r });
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
    Ok(BigRational::from_integer(n))
}

/// Exponent vector, one entry per coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit index `e_i`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|α|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    /// `α!`
    pub fn factorial(&self) -> BigInt {
        let mut acc = BigInt::one();
        for &a in &self.0 {
            for k in 2..=a {
                acc *= BigInt::from(k);
            }
        }
        acc
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// All multi-indices of dimension `dim` and total order `order`, in
    /// descending lexicographic order.
    pub fn all_of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == dim {
                prefix.push(left);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for a in (0..=left).rev() {
                prefix.push(a);
                rec(dim, left - a, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if dim == 0 {
            if order == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        rec(dim, order, &mut Vec::with_capacity(dim), &mut out);
        out
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact polynomial over `dim` coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyQ {
    dim: usize,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl PolyQ {
    pub fn zero(dim: usize) -> Self {
        PolyQ {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        let mut p = Self::zero(dim);
        if !c.is_zero() {
            p.terms.insert(MultiIndex::zero(dim), c);
        }
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        Ok(Self::monomial(MultiIndex::unit(dim, i)))
    }

    /// `x^α` with coefficient one.
    pub fn monomial(alpha: MultiIndex) -> Self {
        let dim = alpha.dim();
        let mut terms = BTreeMap::new();
        terms.insert(alpha, Rational::one());
        PolyQ { dim, terms }
    }

    /// Dual weight `w_α = η^α / α!` for a multi-index supported on the
    /// first `horizontal` coordinates.
    pub fn dual_weight(alpha: &MultiIndex, horizontal: usize) -> Result<Self> {
        if let Some((i, _)) = alpha
            .exponents()
            .iter()
            .enumerate()
            .find(|(i, &a)| *i >= horizontal && a > 0)
        {
            return Err(Error::InvalidParameter(format!(
                "dual weight index touches non-horizontal coordinate {i}"
            )));
        }
        let coeff = BigRational::new(BigInt::one(), alpha.factorial());
        Ok(Self::monomial(alpha.clone()).scale(&coeff))
    }

    pub fn from_terms(
        dim: usize,
        terms: impl IntoIterator<Item = (MultiIndex, Rational)>,
    ) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (m, c) in terms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, m: MultiIndex, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &MultiIndex) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&MultiIndex::zero(self.dim))
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::order).max()
    }

    /// Largest exponent of coordinate `i` appearing in any term.
    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|m| m.get(i)).max().unwrap_or(0)
    }

    fn check_dim(&self, other: &PolyQ) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &PolyQ) -> Result<PolyQ> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &PolyQ) -> Result<PolyQ> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &PolyQ) -> Result<PolyQ> {
        self.check_dim(other)?;
        let mut out = PolyQ::zero(self.dim);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.add(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &Rational) -> PolyQ {
        if s.is_zero() {
            return PolyQ::zero(self.dim);
        }
        PolyQ {
            dim: self.dim,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> PolyQ {
        let mut acc = PolyQ::one(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Exact partial derivative `∂_i`.
    pub fn derive(&self, i: usize) -> Result<PolyQ> {
        if i >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: self.dim,
            });
        }
        let mut out = PolyQ::zero(self.dim);
        for (m, c) in &self.terms {
            let e = m.get(i);
            if e == 0 {
                continue;
            }
            let mut ex = m.exponents().to_vec();
            ex[i] -= 1;
            out.add_term(MultiIndex(ex), c * Rational::from_integer(BigInt::from(e)));
        }
        Ok(out)
    }

    /// `∂^β` applied coordinate by coordinate.
    pub fn derive_multi(&self, beta: &MultiIndex) -> Result<PolyQ> {
        if beta.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: beta.dim(),
            });
        }
        let mut out = self.clone();
        for (i, &b) in beta.exponents().iter().enumerate() {
            for _ in 0..b {
                out = out.derive(i)?;
            }
        }
        Ok(out)
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, p: &[Rational]) -> Result<Rational> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in p.iter().zip(m.exponents()) {
                if e > 0 {
                    t *= num_traits::pow(x.clone(), e as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Floating-point evaluation.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(self.compile().eval(p))
    }

    /// Lowers the polynomial to a binary-float evaluator for hot loops.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let factors = m
                        .exponents()
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(i, &e)| (i, e as i32))
                        .collect();
                    (rat_to_f64(c), factors)
                })
                .collect(),
        }
    }

    /// Substitutes `x_i -> images[i]` for every coordinate.
    pub fn substitute(&self, images: &[PolyQ]) -> Result<PolyQ> {
        if images.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: images.len(),
            });
        }
        let target = images.first().map(PolyQ::dim).unwrap_or(0);
        let mut out = PolyQ::zero(target);
        for (m, c) in &self.terms {
            let mut t = PolyQ::constant(target, c.clone());
            for (img, &e) in images.iter().zip(m.exponents()) {
                if e > 0 {
                    t = t.checked_mul(&img.pow(e))?;
                }
            }
            out = out.checked_add(&t)?;
        }
        Ok(out)
    }

    /// Default coordinate names `x1 .. xn`.
    pub fn default_names(dim: usize) -> Vec<String> {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }

    /// Text form `coeff * x1^a1 x2 ... + ...`, leading (highest graded-lex)
    /// term first, coefficients as `num/den`.
    pub fn to_text(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| {
                let factors: Vec<String> = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| {
                        if e == 1 {
                            names[i].clone()
                        } else {
                            format!("{}^{}", names[i], e)
                        }
                    })
                    .collect();
                if factors.is_empty() {
                    format_rational(c)
                } else {
                    format!("{} * {}", format_rational(c), factors.join(" "))
                }
            })
            .collect();
        parts.join(" + ")
    }

    /// Parses the text form. Also accepts `-` between terms, omitted
    /// coefficients, `*` between factors, and decimal coefficients.
    pub fn parse(text: &str, names: &[String]) -> Result<PolyQ> {
        let dim = names.len();
        let mut out = PolyQ::zero(dim);
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        for (sign, term) in split_terms(text)? {
            let (m, c) = parse_term(term, names)?;
            out.add_term(m, if sign { -c } else { c });
        }
        Ok(out)
    }
}

/// Splits on top-level `+`/`-` separators, returning (negated, term) pairs.
fn split_terms(text: &str) -> Result<Vec<(bool, &str)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut negate = false;
    let mut i = 0usize;
    // A sign directly after `^`, `/`, `*` or at a term start belongs to a number.
    let mut expect_operand = true;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        match ch {
            '+' | '-' if !expect_operand => {
                let term = text[start..i].trim();
                if term.is_empty() {
                    return Err(Error::Parse(format!("empty term in `{text}`")));
                }
                out.push((negate, term));
                negate = ch == '-';
                start = i + 1;
                expect_operand = true;
            }
            '+' | '-' if expect_operand => {
                if text[start..i].trim().is_empty() && ch == '-' {
                    negate = !negate;
                    start = i + 1;
                }
            }
            ' ' | '\t' => {}
            '^' | '/' | '*' => expect_operand = true,
            _ => expect_operand = false,
        }
        i += 1;
    }
    let term = text[start..].trim();
    if term.is_empty() {
        return Err(Error::Parse(format!("dangling operator in `{text}`")));
    }
    out.push((negate, term));
    Ok(out)
}

fn parse_term(term: &str, names: &[String]) -> Result<(MultiIndex, Rational)> {
    let mut coeff = Rational::one();
    let mut ex = vec![0u32; names.len()];
    for tok in term
        .split(|c: char| c == '*' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        let first = tok.chars().next().unwrap_or('0');
        if first.is_ascii_digit() || first == '-' || first == '.' {
            coeff *= parse_rational(tok)?;
            continue;
        }
        let (name, power) = match tok.split_once('^') {
            Some((n, p)) => (
                n,
                p.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad exponent in `{tok}`")))?,
            ),
            None => (tok, 1),
        };
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Parse(format!("unknown variable `{name}`")))?;
        ex[idx] += power;
    }
    Ok((MultiIndex(ex), coeff))
}

impl fmt::Display for PolyQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text(&PolyQ::default_names(self.dim)))
    }
}

impl Add<&PolyQ> for &PolyQ {
    type Output = PolyQ;

    /// Panics on dimension mismatch; use [`PolyQ::checked_add`] otherwise.
    fn add(self, rhs: &PolyQ) -> PolyQ {
        self.checked_add(rhs)
            .expect("polynomial dimension mismatch")
    }
}

impl Sub<&PolyQ> for &PolyQ {
    type Output = PolyQ;

    fn sub(self, rhs: &PolyQ) -> PolyQ {
        self.checked_sub(rhs)
            .expect("polynomial dimension mismatch")
    }
}

impl Mul<&PolyQ> for &PolyQ {
    type Output = PolyQ;

    fn mul(self, rhs: &PolyQ) -> PolyQ {
        self.checked_mul(rhs)
            .expect("polynomial dimension mismatch")
    }
}

impl Neg for &PolyQ {
    type Output = PolyQ;

    fn neg(self) -> PolyQ {
        self.scale(&-Rational::one())
    }
}

/// Binary-float image of a [`PolyQ`].
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    dim: usize,
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(i, e) in factors {
                t *= p[i].powi(e);
            }
            acc += t;
        }
        acc
    }
}

/// Random polynomial with `terms` monomials of total degree at most
/// `max_degree` and small rational coefficients (numerators in `-5..=5`,
/// denominators in `1..=4`).
pub fn random_poly<R: rand::Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_degree: u32,
    terms: usize,
) -> PolyQ {
    let mut p = PolyQ::zero(dim);
    for _ in 0..terms {
        let deg = rng.random_range(0..=max_degree);
        let mut ex = vec![0u32; dim];
        for _ in 0..deg {
            ex[rng.random_range(0..dim)] += 1;
        }
        let num = rng.random_range(-5i64..=5);
        let den = rng.random_range(1i64..=4);
        p.add_term(MultiIndex(ex), rat(num, den));
    }
    p
}

/// `|r|` as a float, for magnitude checks.
pub fn rat_abs_f64(r: &Rational) -> f64 {
    rat_to_f64(&r.abs())
}
