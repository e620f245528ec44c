//! Stratified groups in exponential coordinates: the Heisenberg groups `ℍⁿ`
//! and flat `ℝⁿ`.
//!
//! Coordinates on `ℍⁿ` are `(x_1, …, x_{2n}, z)`. Indices are zero-based in
//! the API, so the generator `X_i` of the usual one-based notation is
//! `generator(i - 1)`.

use serde::{Deserialize, Serialize};

use crate::diffop::DiffOp;
use crate::error::{Error, Result};
use crate::poly::{rat, rat_int, PolyQ, Rational};

/// Default exclusion radius around the singular point of the Kaplan norm.
pub const DEFAULT_SINGULAR_RADIUS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum GroupKind {
    Heisenberg(usize),
    Euclidean(usize),
}

/// Sign convention for the Heisenberg generators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeisenbergSigns {
    /// `X_i = ∂_{x_i} + ((−1)^i / 2) x_{2n−i+1} ∂_z` (one-based `i`).
    #[default]
    Alternating,
    /// All signs flipped, so that on `ℍ¹` `X = ∂_x + ½y∂_z`,
    /// `Y = ∂_y − ½x∂_z`.
    Flipped,
}

/// A point in exponential coordinates with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "point coordinate {bad} is not finite"
            )));
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarnotGroup {
    kind: GroupKind,
    signs: HeisenbergSigns,
    strata_dims: Vec<usize>,
    generators: Vec<DiffOp>,
    center_fields: Vec<DiffOp>,
    /// `σ_i` in `X_i = ∂_i + σ_i x_{i'} ∂_z`; empty for flat groups.
    sigma: Vec<Rational>,
}

/// Horizontal partner `i' = 2n − i + 1` of a zero-based index.
fn partner(n: usize, i: usize) -> usize {
    2 * n - 1 - i
}

impl CarnotGroup {
    pub fn new(kind: GroupKind) -> Result<Self> {
        Self::with_signs(kind, HeisenbergSigns::Alternating)
    }

    pub fn heisenberg(n: usize) -> Result<Self> {
        Self::new(GroupKind::Heisenberg(n))
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(GroupKind::Euclidean(n))
    }

    pub fn with_signs(kind: GroupKind, signs: HeisenbergSigns) -> Result<Self> {
        match kind {
            GroupKind::Heisenberg(0) | GroupKind::Euclidean(0) => Err(Error::InvalidDimension(
                "group parameter n must be at least 1".into(),
            )),
            GroupKind::Euclidean(n) => Ok(CarnotGroup {
                kind,
                signs,
                strata_dims: vec![n],
                generators: (0..n)
                    .map(|i| DiffOp::partial(n, i))
                    .collect::<Result<_>>()?,
                center_fields: Vec::new(),
                sigma: Vec::new(),
            }),
            GroupKind::Heisenberg(n) => {
                let dim = 2 * n + 1;
                let flip = if signs == HeisenbergSigns::Flipped {
                    -1
                } else {
                    1
                };
                // One-based i: (−1)^i / 2; zero-based i is odd exactly when
                // the one-based index is even.
                let sigma: Vec<Rational> = (0..2 * n)
                    .map(|i| rat(if i % 2 == 1 { flip } else { -flip }, 2))
                    .collect();
                let generators = (0..2 * n)
                    .map(|i| {
                        let mut coeffs = vec![PolyQ::zero(dim); dim];
                        coeffs[i] = PolyQ::one(dim);
                        coeffs[2 * n] = PolyQ::var(dim, partner(n, i))?.scale(&sigma[i]);
                        DiffOp::vector_field(coeffs)
                    })
                    .collect::<Result<_>>()?;
                Ok(CarnotGroup {
                    kind,
                    signs,
                    strata_dims: vec![2 * n, 1],
                    generators,
                    center_fields: vec![DiffOp::partial(dim, 2 * n)?],
                    sigma,
                })
            }
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn signs(&self) -> HeisenbergSigns {
        self.signs
    }

    pub fn name(&self) -> String {
        match self.kind {
            GroupKind::Heisenberg(n) => format!("heisenberg({n})"),
            GroupKind::Euclidean(n) => format!("euclidean({n})"),
        }
    }

    pub fn heisenberg_n(&self) -> Option<usize> {
        match self.kind {
            GroupKind::Heisenberg(n) => Some(n),
            GroupKind::Euclidean(_) => None,
        }
    }

    pub fn strata_dims(&self) -> &[usize] {
        &self.strata_dims
    }

    pub fn dim(&self) -> usize {
        self.strata_dims.iter().sum()
    }

    /// Number of horizontal generators `n₁`.
    pub fn horizontal_dim(&self) -> usize {
        self.strata_dims[0]
    }

    /// Homogeneous dimension `Q = Σ j·n_j`.
    pub fn hom_dim(&self) -> usize {
        self.strata_dims
            .iter()
            .enumerate()
            .map(|(j, &d)| (j + 1) * d)
            .sum()
    }

    /// Hardy constant `n₁ + 2m − 1` with `m` the center dimension; it
    /// coincides with `Q − 1` for both supported kinds.
    pub fn hardy_dimension_constant(&self) -> usize {
        let m: usize = self.strata_dims.iter().skip(1).sum();
        self.horizontal_dim() + 2 * m - 1
    }

    pub fn step(&self) -> usize {
        self.strata_dims.len()
    }

    /// Stratum (1-based degree) of coordinate `i`.
    pub fn weight(&self, i: usize) -> usize {
        let mut acc = 0;
        for (j, &d) in self.strata_dims.iter().enumerate() {
            acc += d;
            if i < acc {
                return j + 1;
            }
        }
        self.step()
    }

    pub fn generators(&self) -> &[DiffOp] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> Result<&DiffOp> {
        self.generators.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            dim: self.generators.len(),
        })
    }

    pub fn center_fields(&self) -> &[DiffOp] {
        &self.center_fields
    }

    /// Coefficient `σ_i` of `x_{i'} ∂_z` in the Heisenberg generator `X_i`.
    pub fn sigma(&self, i: usize) -> f64 {
        crate::poly::rat_to_f64(&self.sigma[i])
    }

    /// Coordinate names `x1..x2n, z` (Heisenberg) or `x1..xn`.
    pub fn var_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.horizontal_dim())
            .map(|i| format!("x{i}"))
            .collect();
        if self.heisenberg_n().is_some() {
            names.push("z".into());
        }
        names
    }

    /// Short names `x, y[, z]` accepted when there are two horizontal
    /// coordinates (or `x` for a single one).
    pub fn alias_names(&self) -> Option<Vec<String>> {
        let mut names: Vec<String> = match self.horizontal_dim() {
            1 => vec!["x".into()],
            2 => vec!["x".into(), "y".into()],
            3 => vec!["x".into(), "y".into(), "z".into()],
            _ => return None,
        };
        if self.heisenberg_n().is_some() {
            if names.len() == 3 {
                return None;
            }
            names.push("z".into());
        }
        Some(names)
    }

    /// Parses a polynomial using the canonical names, falling back to the
    /// short aliases.
    pub fn parse_poly(&self, text: &str) -> Result<PolyQ> {
        match PolyQ::parse(text, &self.var_names()) {
            Ok(p) => Ok(p),
            Err(e) => match self.alias_names() {
                Some(alias) => PolyQ::parse(text, &alias).map_err(|_| e),
                None => Err(e),
            },
        }
    }

    pub fn format_poly(&self, p: &PolyQ) -> String {
        p.to_text(&self.var_names())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// `½⟨Λx, x'⟩` with `Λ_{i,i'} = 2σ_i`.
    fn twist(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = match self.heisenberg_n() {
            Some(n) => n,
            None => return 0.0,
        };
        (0..2 * n)
            .map(|i| self.sigma(i) * x[partner(n, i)] * y[i])
            .sum()
    }

    pub fn product(&self, p: &Point, q: &Point) -> Result<Point> {
        self.check_len(p.dim())?;
        self.check_len(q.dim())?;
        let mut out: Vec<f64> = p.0.iter().zip(&q.0).map(|(a, b)| a + b).collect();
        if let Some(n) = self.heisenberg_n() {
            out[2 * n] += self.twist(&p.0, &q.0);
        }
        Point::new(out)
    }

    pub fn product_exact(&self, p: &[Rational], q: &[Rational]) -> Result<Vec<Rational>> {
        self.check_len(p.len())?;
        self.check_len(q.len())?;
        let mut out: Vec<Rational> = p.iter().zip(q).map(|(a, b)| a + b).collect();
        if let Some(n) = self.heisenberg_n() {
            for i in 0..2 * n {
                out[2 * n] += &self.sigma[i] * &p[partner(n, i)] * &q[i];
            }
        }
        Ok(out)
    }

    /// The group inverse, `−p` in exponential coordinates.
    pub fn inverse(&self, p: &Point) -> Point {
        Point(p.0.iter().map(|c| -c).collect())
    }

    pub fn identity_point(&self) -> Point {
        Point(vec![0.0; self.dim()])
    }

    /// `δ_λ`, scaling stratum `j` by `λ^j`.
    pub fn dilate(&self, lambda: f64, p: &Point) -> Result<Point> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        self.check_len(p.dim())?;
        Point::new(
            p.0.iter()
                .enumerate()
                .map(|(i, c)| c * lambda.powi(self.weight(i) as i32))
                .collect(),
        )
    }

    pub fn dilate_exact(&self, lambda: &Rational, p: &[Rational]) -> Result<Vec<Rational>> {
        if lambda <= &rat_int(0) {
            return Err(Error::InvalidParameter(
                "dilation factor must be positive".into(),
            ));
        }
        self.check_len(p.len())?;
        Ok(p.iter()
            .enumerate()
            .map(|(i, c)| c * num_traits::pow(lambda.clone(), self.weight(i)))
            .collect())
    }

    /// The coordinate function `η_h` (zero-based `h`).
    pub fn eta_functional(&self, h: usize) -> Result<PolyQ> {
        PolyQ::var(self.dim(), h)
    }

    fn require_heisenberg(&self) -> Result<usize> {
        self.heisenberg_n().ok_or_else(|| {
            Error::UnsupportedStructure(format!("Kaplan norm is not defined on {}", self.name()))
        })
    }

    /// `K = |x|⁴ + 16z²` as a polynomial.
    pub fn kaplan_quartic_poly(&self) -> Result<PolyQ> {
        let n = self.require_heisenberg()?;
        let d = self.dim();
        let mut r2 = PolyQ::zero(d);
        for i in 0..2 * n {
            let x = PolyQ::var(d, i)?;
            r2 = &r2 + &(&x * &x);
        }
        let z = PolyQ::var(d, 2 * n)?;
        Ok(&(&r2 * &r2) + &(&z * &z).scale(&rat_int(16)))
    }

    pub fn kaplan_quartic(&self, p: &[f64]) -> Result<f64> {
        let n = self.require_heisenberg()?;
        self.check_len(p.len())?;
        let r2: f64 = p[..2 * n].iter().map(|x| x * x).sum();
        Ok(r2 * r2 + 16.0 * p[2 * n] * p[2 * n])
    }

    pub fn kaplan_quartic_exact(&self, p: &[Rational]) -> Result<Rational> {
        self.kaplan_quartic_poly()?.eval_exact(p)
    }

    pub fn kaplan_norm(&self, p: &[f64]) -> Result<f64> {
        Ok(self.kaplan_quartic(p)?.sqrt().sqrt())
    }

    pub fn kaplan_jet(&self, p: &[f64]) -> Result<HomNormJet> {
        self.kaplan_jet_with_radius(p, DEFAULT_SINGULAR_RADIUS)
    }

    /// Closed-form horizontal jets of `N`.
    ///
    /// With `A_i = |x|²x_i + 8σ_i x_{i'} z`:
    /// `X_iN = A_i/N³` and
    /// `X_jX_iN = (2x_jx_i + |x|²δ_ij + 8σ_i δ_{j,i'} z + 8σ_iσ_j x_{i'}x_{j'})/N³ − 3A_iA_j/N⁷`.
    pub fn kaplan_jet_with_radius(&self, p: &[f64], delta_sing: f64) -> Result<HomNormJet> {
        let n = self.require_heisenberg()?;
        self.check_len(p.len())?;
        let k = self.kaplan_quartic(p)?;
        let norm = k.sqrt().sqrt();
        if !(norm > delta_sing) {
            return Err(Error::SingularPoint(format!(
                "Kaplan norm {norm} at {p:?} is within {delta_sing} of the identity"
            )));
        }
        let m = 2 * n;
        let x = &p[..m];
        let z = p[m];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let n3 = norm * norm * norm;
        let n7 = n3 * n3 * norm;
        let s: Vec<f64> = (0..m).map(|i| self.sigma(i)).collect();
        let a: Vec<f64> = (0..m)
            .map(|i| r2 * x[i] + 8.0 * s[i] * x[partner(n, i)] * z)
            .collect();
        let grad_h: Vec<f64> = a.iter().map(|ai| ai / n3).collect();
        let mut hess_h = vec![vec![0.0; m]; m];
        for (j, row) in hess_h.iter_mut().enumerate() {
            for (i, slot) in row.iter_mut().enumerate() {
                let mut num =
                    2.0 * x[j] * x[i] + 8.0 * s[i] * s[j] * x[partner(n, i)] * x[partner(n, j)];
                if i == j {
                    num += r2;
                }
                if j == partner(n, i) {
                    num += 8.0 * s[i] * z;
                }
                *slot = num / n3 - 3.0 * a[i] * a[j] / n7;
            }
        }
        Ok(HomNormJet {
            value: norm,
            grad_h,
            hess_h,
            z_jet: Some((8.0 * z / n3, 8.0 / n3 - 192.0 * z * z / n7)),
        })
    }
}

/// Jet of the Kaplan norm. `hess_h[j][i]` holds `X_jX_iN`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomNormJet {
    pub value: f64,
    pub grad_h: Vec<f64>,
    pub hess_h: Vec<Vec<f64>>,
    /// `(ZN, Z²N)`.
    pub z_jet: Option<(f64, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_one_generators() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        assert_eq!(g.hom_dim(), 4);
        assert_eq!(
            g.generator(0).unwrap().to_text(&g.var_names()),
            "1/1 * D[x1] + -1/2 * x2 * D[z]"
        );
        assert_eq!(
            g.generator(1).unwrap().to_text(&g.var_names()),
            "1/1 * D[x2] + 1/2 * x1 * D[z]"
        );
        let f =
            CarnotGroup::with_signs(GroupKind::Heisenberg(1), HeisenbergSigns::Flipped).unwrap();
        assert_eq!(
            f.generator(0).unwrap().to_text(&f.var_names()),
            "1/1 * D[x1] + 1/2 * x2 * D[z]"
        );
    }

    #[test]
    fn dimensions() {
        let h2 = CarnotGroup::heisenberg(2).unwrap();
        assert_eq!((h2.dim(), h2.hom_dim(), h2.generators().len()), (5, 6, 4));
        assert_eq!(h2.hardy_dimension_constant(), h2.hom_dim() - 1);
        let e1 = CarnotGroup::euclidean(1).unwrap();
        assert_eq!((e1.dim(), e1.hom_dim()), (1, 1));
        assert!(matches!(
            CarnotGroup::heisenberg(0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn group_law_twist() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let p = Point::new(vec![1.0, 0.0, 0.0]).unwrap();
        let q = Point::new(vec![0.0, 1.0, 0.0]).unwrap();
        // ½⟨Λ(1,0),(0,1)⟩ with Λ = [[0,−1],[1,0]] gives ½.
        assert_eq!(g.product(&p, &q).unwrap().coords(), &[1.0, 1.0, 0.5]);
        let r = Point::new(vec![0.3, -1.2, 2.0]).unwrap();
        assert_eq!(g.product(&r, &g.inverse(&r)).unwrap(), g.identity_point());
        assert_eq!(g.product(&r, &g.identity_point()).unwrap(), r);
    }

    #[test]
    fn dilation_examples() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let p = Point::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.dilate(2.0, &p).unwrap().coords(), &[2.0, 2.0, 4.0]);
        assert_eq!(g.dilate(1.0, &p).unwrap(), p);
        assert!(g.dilate(0.0, &p).is_err());
    }

    #[test]
    fn kaplan_values() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        assert_eq!(g.kaplan_norm(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(g.kaplan_norm(&[0.0, 0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(
            g.kaplan_quartic_exact(&[rat_int(1), rat_int(1), rat(1, 4)])
                .unwrap(),
            rat_int(5)
        );
        assert!(
            (g.kaplan_norm(&[1.0, 1.0, 0.25]).unwrap() - 1.495_348_781_221_220_5).abs() < 1e-12
        );
    }

    #[test]
    fn kaplan_jet_examples() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        let j = g.kaplan_jet(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(j.grad_h, vec![1.0, 0.0]);
        let z = 3.0;
        let j = g.kaplan_jet(&[0.0, 0.0, z]).unwrap();
        let n = j.value;
        assert!(j.grad_h.iter().all(|v| *v == 0.0));
        assert!((j.hess_h[1][0].abs() - 1.0 / n).abs() < 1e-14);
        assert!((j.hess_h[0][1].abs() - 4.0 * z / n.powi(3)).abs() < 1e-14);
        assert!(matches!(
            g.kaplan_jet(&[0.0, 0.0, 0.0]),
            Err(Error::SingularPoint(_))
        ));
    }

    #[test]
    fn eta_functionals() {
        let g = CarnotGroup::heisenberg(1).unwrap();
        assert_eq!(g.format_poly(&g.eta_functional(0).unwrap()), "1/1 * x1");
        assert_eq!(g.format_poly(&g.eta_functional(2).unwrap()), "1/1 * z");
        assert!(g.eta_functional(3).is_err());
    }
}
