//! Differential operators with polynomial coefficients, kept normal-ordered
//! (every coefficient to the left of every partial derivative).

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::group::CarnotGroup;
use crate::poly::{rat, MultiIndex, PolyQ, Rational};

/// Default ceiling on total derivative order produced by composition.
pub const DEFAULT_ORDER_CAP: usize = 12;

/// `Σ_β c_β(x) ∂^β`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DiffOp {
    dim: usize,
    terms: BTreeMap<MultiIndex, PolyQ>,
}

impl DiffOp {
    pub fn zero(dim: usize) -> Self {
        DiffOp {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::multiplication(PolyQ::one(dim))
    }

    /// Multiplication by `p`.
    pub fn multiplication(p: PolyQ) -> Self {
        let dim = p.dim();
        let mut op = Self::zero(dim);
        op.add_term(MultiIndex::zero(dim), p);
        op
    }

    pub fn partial(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        let mut op = Self::zero(dim);
        op.add_term(MultiIndex::unit(dim, i), PolyQ::one(dim));
        Ok(op)
    }

    /// First-order field `Σ_i c_i ∂_i`.
    pub fn vector_field(coeffs: Vec<PolyQ>) -> Result<Self> {
        let dim = coeffs.len();
        let mut op = Self::zero(dim);
        for (i, c) in coeffs.into_iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
            op.add_term(MultiIndex::unit(dim, i), c);
        }
        Ok(op)
    }

    pub fn from_terms(
        dim: usize,
        terms: impl IntoIterator<Item = (MultiIndex, PolyQ)>,
    ) -> Result<Self> {
        let mut op = Self::zero(dim);
        for (m, c) in terms {
            if m.dim() != dim || c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: if m.dim() != dim { m.dim() } else { c.dim() },
                });
            }
            op.add_term(m, c);
        }
        Ok(op)
    }

    fn add_term(&mut self, m: MultiIndex, c: PolyQ) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = &*o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
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

    /// Highest total derivative order; zero for multiplication operators
    /// and for the zero operator.
    pub fn order(&self) -> usize {
        self.terms
            .keys()
            .map(|m| m.order() as usize)
            .max()
            .unwrap_or(0)
    }

    /// True when no derivative appears.
    pub fn is_multiplication(&self) -> bool {
        self.order() == 0
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &PolyQ)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &MultiIndex) -> PolyQ {
        self.terms
            .get(m)
            .cloned()
            .unwrap_or_else(|| PolyQ::zero(self.dim))
    }

    /// Coefficient of `∂_i` for a first-order operator.
    pub fn field_coeff(&self, i: usize) -> PolyQ {
        self.coeff(&MultiIndex::unit(self.dim, i))
    }

    /// Zeroth-order part.
    pub fn multiplier(&self) -> PolyQ {
        self.coeff(&MultiIndex::zero(self.dim))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim != d {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: d,
            });
        }
        Ok(())
    }

    pub fn apply(&self, f: &PolyQ) -> Result<PolyQ> {
        self.check_dim(f.dim())?;
        let mut out = PolyQ::zero(self.dim);
        for (m, c) in &self.terms {
            let d = f.derive_multi(m)?;
            if !d.is_zero() {
                out = &out + &(c * &d);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &DiffOp) -> Result<DiffOp> {
        self.check_dim(other.dim)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DiffOp) -> Result<DiffOp> {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, s: &Rational) -> DiffOp {
        let mut out = DiffOp::zero(self.dim);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.scale(s));
        }
        out
    }

    /// Left multiplication by a polynomial, `p·A`.
    pub fn left_mul(&self, p: &PolyQ) -> Result<DiffOp> {
        self.check_dim(p.dim())?;
        let mut out = DiffOp::zero(self.dim);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), p * c);
        }
        Ok(out)
    }

    pub fn compose(&self, other: &DiffOp) -> Result<DiffOp> {
        self.compose_capped(other, DEFAULT_ORDER_CAP)
    }

    /// Normal-ordered product `A∘B` via the generalized Leibniz rule
    /// `∂^α b = Σ_{γ≤α} C(α,γ) (∂^γ b) ∂^{α−γ}`.
    pub fn compose_capped(&self, other: &DiffOp, cap: usize) -> Result<DiffOp> {
        self.check_dim(other.dim)?;
        let order = self.order() + other.order();
        if order > cap && !self.is_zero() && !other.is_zero() {
            return Err(Error::OperatorOverflow { order, cap });
        }
        let mut out = DiffOp::zero(self.dim);
        for (alpha, a) in &self.terms {
            for gamma in sub_indices(alpha) {
                let binom = multi_binomial(alpha, &gamma);
                let rest = MultiIndex::new(
                    alpha
                        .exponents()
                        .iter()
                        .zip(gamma.exponents())
                        .map(|(x, y)| x - y)
                        .collect(),
                );
                for (beta, b) in &other.terms {
                    let db = b.derive_multi(&gamma)?;
                    if db.is_zero() {
                        continue;
                    }
                    let c = (a * &db).scale(&Rational::from_integer(binom.clone()));
                    out.add_term(rest.add(beta), c);
                }
            }
        }
        Ok(out)
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &DiffOp) -> Result<DiffOp> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// `{A, B} = AB + BA`.
    pub fn anticommutator(&self, other: &DiffOp) -> Result<DiffOp> {
        self.compose(other)?.add(&other.compose(self)?)
    }

    /// Text form with `D[name]^k` partial markers.
    pub fn to_text(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| {
                let partials: Vec<String> = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| {
                        if e == 1 {
                            format!("D[{}]", names[i])
                        } else {
                            format!("D[{}]^{}", names[i], e)
                        }
                    })
                    .collect();
                let coeff = c.to_text(names);
                if partials.is_empty() {
                    if c.num_terms() > 1 {
                        format!("({coeff})")
                    } else {
                        coeff
                    }
                } else if c.num_terms() > 1 {
                    format!("({coeff}) * {}", partials.join(" "))
                } else {
                    format!("{coeff} * {}", partials.join(" "))
                }
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text(&PolyQ::default_names(self.dim)))
    }
}

fn sub_indices(alpha: &MultiIndex) -> Vec<MultiIndex> {
    let mut out = vec![Vec::with_capacity(alpha.dim())];
    for &a in alpha.exponents() {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for prefix in &out {
            for g in 0..=a {
                let mut p = prefix.clone();
                p.push(g);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(MultiIndex::new).collect()
}

fn multi_binomial(alpha: &MultiIndex, gamma: &MultiIndex) -> BigInt {
    let mut acc = BigInt::one();
    for (&a, &g) in alpha.exponents().iter().zip(gamma.exponents()) {
        acc *= num_integer::binomial(BigInt::from(a), BigInt::from(g));
    }
    acc
}

/// Ordered product of operators, expanded on demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorWord(pub Vec<DiffOp>);

impl OperatorWord {
    /// Left-to-right normal-ordered product; the empty word is the identity.
    pub fn expand(&self, dim: usize) -> Result<DiffOp> {
        let mut acc = DiffOp::identity(dim);
        for f in &self.0 {
            acc = acc.compose(f)?;
        }
        Ok(acc)
    }
}

/// `Δ = Σ X_i²`.
pub fn sub_laplacian(g: &CarnotGroup) -> Result<DiffOp> {
    let mut out = DiffOp::zero(g.dim());
    for x in g.generators() {
        out = out.add(&x.compose(x)?)?;
    }
    Ok(out)
}

/// `V_j = X_j − ½(X_jU)`.
pub fn v_field(g: &CarnotGroup, u: &PolyQ, j: usize) -> Result<DiffOp> {
    let x = g.generator(j)?;
    let xu = x.apply(u)?;
    x.sub(&DiffOp::multiplication(xu.scale(&rat(1, 2))))
}

/// `V_{j,k} = [X_j,X_k] − ½([X_j,X_k]U)`, built from the group structure
/// rather than by commuting the deformed fields.
pub fn v_bracket(g: &CarnotGroup, u: &PolyQ, j: usize, k: usize) -> Result<DiffOp> {
    let c = g.generator(j)?.commutator(g.generator(k)?)?;
    let cu = c.apply(u)?;
    c.sub(&DiffOp::multiplication(cu.scale(&rat(1, 2))))
}

/// `𝔏 = −Σ V_j²`.
pub fn l_operator(g: &CarnotGroup, u: &PolyQ) -> Result<DiffOp> {
    let mut out = DiffOp::zero(g.dim());
    for j in 0..g.horizontal_dim() {
        let v = v_field(g, u, j)?;
        out = out.sub(&v.compose(&v)?)?;
    }
    Ok(out)
}

/// Rockland operator `(−1)^n Σ X_j^{2n}`.
pub fn rockland_op(g: &CarnotGroup, n: u32) -> Result<DiffOp> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "Rockland order must be >= 1".into(),
        ));
    }
    let mut out = DiffOp::zero(g.dim());
    for x in g.generators() {
        let mut p = DiffOp::identity(g.dim());
        for _ in 0..2 * n {
            p = p.compose(x)?;
        }
        out = out.add(&p)?;
    }
    Ok(if n % 2 == 1 {
        out.scale(&-Rational::one())
    } else {
        out
    })
}

/// `ad_L^m(V) = [L, [L, … [L, V]]]` by repeated commutation.
pub fn ad_power(l: &DiffOp, v: &DiffOp, m: u32) -> Result<DiffOp> {
    let mut acc = v.clone();
    for _ in 0..m {
        acc = l.commutator(&acc)?;
    }
    Ok(acc)
}

/// Closed form on step-two groups:
/// `ad_𝔏^m(V_l) = 2^m Σ V_{j_m} V_{j_{m−1} j_m} ⋯ V_{j_1 j_2} V_{l j_1}`.
///
/// Requires the deformed brackets to commute with every deformed field;
/// this is checked and reported as unsupported structure otherwise.
pub fn ad_closed(g: &CarnotGroup, u: &PolyQ, l: usize, m: u32) -> Result<DiffOp> {
    if g.step() > 2 {
        return Err(Error::UnsupportedStructure(format!(
            "closed ad expansion needs step <= 2, group has step {}",
            g.step()
        )));
    }
    let k = g.horizontal_dim();
    if l >= k {
        return Err(Error::IndexOutOfRange { index: l, dim: k });
    }
    let vs: Vec<DiffOp> = (0..k).map(|j| v_field(g, u, j)).collect::<Result<_>>()?;
    if m == 0 {
        return Ok(vs[l].clone());
    }
    let mut vb = vec![vec![DiffOp::zero(g.dim()); k]; k];
    for a in 0..k {
        for b in 0..k {
            vb[a][b] = v_bracket(g, u, a, b)?;
        }
    }
    for row in &vb {
        for c in row {
            for v in &vs {
                if !c.commutator(v)?.is_zero() {
                    return Err(Error::UnsupportedStructure(
                        "deformed brackets do not commute with the deformed fields".into(),
                    ));
                }
            }
        }
    }
    // Suffix sums S_t(l) = Σ_{j_1..j_t} V_{j_{t-1}j_t} ⋯ V_{l j_1}, ending in
    // a bracket factor; the last step prepends V_{j_m}.
    let mut tails: Vec<DiffOp> = (0..k).map(|j| vb[l][j].clone()).collect();
    for _ in 1..m {
        let mut next = vec![DiffOp::zero(g.dim()); k];
        for (jn, slot) in next.iter_mut().enumerate() {
            for (jp, tail) in tails.iter().enumerate() {
                if vb[jp][jn].is_zero() || tail.is_zero() {
                    continue;
                }
                *slot = slot.add(&vb[jp][jn].compose(tail)?)?;
            }
        }
        tails = next;
    }
    let mut out = DiffOp::zero(g.dim());
    for (j, tail) in tails.iter().enumerate() {
        out = out.add(&vs[j].compose(tail)?)?;
    }
    Ok(out.scale(&Rational::from_integer(BigInt::from(1u64 << m))))
}

/// The literal word sum `2^m Σ V_{j_m} V_{j_{m−1}j_m} ⋯ V_{l j_1}`, expanded
/// word by word without reusing partial products.
pub fn ad_closed_words(g: &CarnotGroup, u: &PolyQ, l: usize, m: u32) -> Result<DiffOp> {
    let k = g.horizontal_dim();
    let mut out = DiffOp::zero(g.dim());
    let total = k.pow(m);
    for code in 0..total {
        let mut js = Vec::with_capacity(m as usize);
        let mut c = code;
        for _ in 0..m {
            js.push(c % k);
            c /= k;
        }
        let mut factors = vec![v_field(g, u, js[m as usize - 1])?];
        for t in (1..m as usize).rev() {
            factors.push(v_bracket(g, u, js[t - 1], js[t])?);
        }
        factors.push(v_bracket(g, u, l, js[0])?);
        out = out.add(&OperatorWord(factors).expand(g.dim())?)?;
    }
    Ok(out.scale(&Rational::from_integer(BigInt::from(1u64 << m))))
}

/// Horizontal multi-index derivative `∇^β = X_1^{β_1} ⋯ X_{n_1}^{β_{n_1}}`.
pub fn nabla_multi(g: &CarnotGroup, beta: &[u32]) -> Result<DiffOp> {
    if beta.len() != g.horizontal_dim() {
        return Err(Error::DimensionMismatch {
            expected: g.horizontal_dim(),
            got: beta.len(),
        });
    }
    let mut acc = DiffOp::identity(g.dim());
    for (j, &b) in beta.iter().enumerate() {
        for _ in 0..b {
            acc = acc.compose(g.generator(j)?)?;
        }
    }
    Ok(acc)
}

/// Polynomials of the harmonic library on `ℍⁿ`.
#[derive(Clone, Debug)]
pub struct HarmonicLibrary {
    pub w_plus: PolyQ,
    pub w_minus: PolyQ,
    /// `V_{j,k} = (x_j − x_{j'})(x_k + x_{k'})`, `j' = 2n−j+1`, for `j, k ≤ n`.
    pub v: Vec<Vec<PolyQ>>,
    pub kaplan: PolyQ,
}

/// Outcome of the harmonic identity checks.
#[derive(Clone, Debug)]
pub struct HarmonicCheck {
    pub w_plus_harmonic: bool,
    pub w_minus_harmonic: bool,
    pub v_harmonic: bool,
    /// `W₊² + W₋² + 2 Σ_{j,k} V_{j,k}² − 2K`, which should vanish.
    pub kaplan_residual: PolyQ,
}

impl HarmonicCheck {
    pub fn all_exact(&self) -> bool {
        self.w_plus_harmonic
            && self.w_minus_harmonic
            && self.v_harmonic
            && self.kaplan_residual.is_zero()
    }
}

pub fn harmonic_library(g: &CarnotGroup) -> Result<HarmonicLibrary> {
    let n = g.heisenberg_n().ok_or_else(|| {
        Error::UnsupportedStructure("harmonic library requires a Heisenberg group".into())
    })?;
    let d = g.dim();
    let x = |i: usize| PolyQ::var(d, i).expect("index in range");
    let z = x(2 * n);
    let mut pair = PolyQ::zero(d);
    for j in 0..n {
        pair = &pair + &(&x(j) * &x(2 * n - 1 - j));
    }
    let z4 = z.scale(&rat(4, 1));
    let pair2 = pair.scale(&rat(2, 1));
    let mut v = vec![vec![PolyQ::zero(d); n]; n];
    for (j, row) in v.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            let a = &x(j) - &x(2 * n - 1 - j);
            let b = &x(k) + &x(2 * n - 1 - k);
            *slot = &a * &b;
        }
    }
    Ok(HarmonicLibrary {
        w_plus: &z4 + &pair2,
        w_minus: &z4 - &pair2,
        v,
        kaplan: g.kaplan_quartic_poly()?,
    })
}

pub fn check_harmonic_library(g: &CarnotGroup, lib: &HarmonicLibrary) -> Result<HarmonicCheck> {
    let lap = sub_laplacian(g)?;
    let mut v_harmonic = true;
    let mut vsq = PolyQ::zero(g.dim());
    for row in &lib.v {
        for p in row {
            v_harmonic &= lap.apply(p)?.is_zero();
            vsq = &vsq + &(p * p);
        }
    }
    let two = rat(2, 1);
    let residual = &(&(&(&lib.w_plus * &lib.w_plus) + &(&lib.w_minus * &lib.w_minus))
        + &vsq.scale(&two))
        - &lib.kaplan.scale(&two);
    Ok(HarmonicCheck {
        w_plus_harmonic: lap.apply(&lib.w_plus)?.is_zero(),
        w_minus_harmonic: lap.apply(&lib.w_minus)?.is_zero(),
        v_harmonic,
        kaplan_residual: residual,
    })
}

/// `𝔏(1) = ¼|∇U|² − ½ΔU` as an exact polynomial.
pub fn v_potential_poly(g: &CarnotGroup, u: &PolyQ) -> Result<PolyQ> {
    let mut grad_sq = PolyQ::zero(g.dim());
    for x in g.generators() {
        let xu = x.apply(u)?;
        grad_sq = &grad_sq + &(&xu * &xu);
    }
    let lap = sub_laplacian(g)?.apply(u)?;
    Ok(&grad_sq.scale(&rat(1, 4)) - &lap.scale(&rat(1, 2)))
}
