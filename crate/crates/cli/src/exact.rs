//! Exact identity suite. Every check compares two independently built
//! symbolic objects by structural equality over the rationals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use carnot_core::diffop::{
    ad_closed, ad_closed_words, ad_power, check_harmonic_library, harmonic_library, l_operator, nabla_multi,
    v_bracket, v_field, DiffOp,
};
use carnot_core::group::CarnotGroup;
use carnot_core::poly::{random_poly, MultiIndex, PolyQ};
use carnot_core::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactBlock {
    pub name: String,
    pub group: String,
    pub checks: usize,
    pub failures: Vec<String>,
    pub exact: bool,
}

impl ExactBlock {
    fn new(name: &str, g: &CarnotGroup) -> Self {
        ExactBlock {
            name: name.into(),
            group: g.name(),
            checks: 0,
            failures: Vec::new(),
            exact: true,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.exact = false;
            self.failures.push(what());
        }
    }
}

/// `ΔW± = 0`, `ΔV_{j,k} = 0` and `W₊² + W₋² + 2ΣV_{j,k}² − 2N⁴ = 0`.
pub fn harmonic_block(n: usize) -> Result<ExactBlock> {
    let g = CarnotGroup::heisenberg(n)?;
    let lib = harmonic_library(&g)?;
    let chk = check_harmonic_library(&g, &lib)?;
    let mut b = ExactBlock::new("harmonic_library", &g);
    b.record(chk.w_plus_harmonic, || "W+ is not harmonic".into());
    b.record(chk.w_minus_harmonic, || "W- is not harmonic".into());
    b.record(chk.v_harmonic, || "some V_jk is not harmonic".into());
    b.record(chk.kaplan_residual.is_zero(), || {
        format!("Kaplan residual {}", g.format_poly(&chk.kaplan_residual))
    });
    Ok(b)
}

/// `∇^β w_α = δ_{αβ}` for horizontal indices with `|α| = |β| ≤ order`.
pub fn dual_block(g: &CarnotGroup, order: u32) -> Result<ExactBlock> {
    let mut b = ExactBlock::new("dual_biorthogonality", g);
    let k = g.horizontal_dim();
    for ord in 0..=order {
        let all = MultiIndex::all_of_order(k, ord);
        for a in &all {
            let mut padded = a.exponents().to_vec();
            padded.resize(g.dim(), 0);
            let w = PolyQ::dual_weight(&MultiIndex::new(padded), k)?;
            for beta in &all {
                let v = nabla_multi(g, beta.exponents())?.apply(&w)?;
                let want = if a == beta { PolyQ::one(g.dim()) } else { PolyQ::zero(g.dim()) };
                b.record(v == want, || format!("grad^{:?} w_{:?} = {}", beta.exponents(), a.exponents(), g.format_poly(&v)));
            }
        }
    }
    Ok(b)
}

/// `[V_j, V_k] = V_{j,k}` for random polynomial potentials.
pub fn bracket_block(g: &CarnotGroup, potentials: usize, seed: u64) -> Result<ExactBlock> {
    let mut b = ExactBlock::new("deformed_brackets", g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = g.horizontal_dim();
    for _ in 0..potentials {
        let u = random_poly(&mut rng, g.dim(), 4, 6);
        let vs: Vec<DiffOp> = (0..k).map(|j| v_field(g, &u, j)).collect::<Result<_>>()?;
        for j in 0..k {
            for l in 0..k {
                let ok = vs[j].commutator(&vs[l])? == v_bracket(g, &u, j, l)?;
                b.record(ok, || format!("[V_{},V_{}] for U = {}", j + 1, l + 1, g.format_poly(&u)));
            }
        }
    }
    Ok(b)
}

/// `[[V_j, V_k], V_l]` is a multiplication operator.
pub fn triple_block(g: &CarnotGroup, potentials: usize, seed: u64) -> Result<ExactBlock> {
    let mut b = ExactBlock::new("triple_brackets", g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = g.horizontal_dim();
    for _ in 0..potentials {
        let u = random_poly(&mut rng, g.dim(), 4, 6);
        let vs: Vec<DiffOp> = (0..k).map(|j| v_field(g, &u, j)).collect::<Result<_>>()?;
        for j in 0..k {
            for l in j + 1..k {
                let c = vs[j].commutator(&vs[l])?;
                for (i, v) in vs.iter().enumerate() {
                    let t = c.commutator(v)?;
                    b.record(t.is_multiplication(), || {
                        format!("[[V_{},V_{}],V_{}] has order {}", j + 1, l + 1, i + 1, t.order())
                    });
                }
            }
        }
    }
    Ok(b)
}

/// Brute-force `ad_𝔏^m(V_l)` against the word-sum closed form and its
/// factored evaluation.
pub fn ad_block(g: &CarnotGroup, potentials: usize, orders: &[u32], seed: u64) -> Result<ExactBlock> {
    let mut b = ExactBlock::new("ad_expansion", g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..potentials {
        let u = random_poly(&mut rng, g.dim(), 4, 6);
        let l = l_operator(g, &u)?;
        for idx in 0..g.horizontal_dim() {
            let v = v_field(g, &u, idx)?;
            let mut acc = v.clone();
            let mut done = 0;
            for &m in orders {
                while done < m {
                    acc = ad_power(&l, &acc, 1)?;
                    done += 1;
                }
                let words = ad_closed_words(g, &u, idx, m)?;
                b.record(acc == words, || format!("m={m}, l={}, U = {}", idx + 1, g.format_poly(&u)));
                let closed = ad_closed(g, &u, idx, m)?;
                b.record(closed == words, || format!("factored form differs: m={m}, l={}", idx + 1));
            }
        }
    }
    Ok(b)
}

pub struct SuiteParams<'a> {
    pub harmonic_groups: &'a [usize],
    pub bracket_groups: &'a [usize],
    pub bracket_potentials: usize,
    pub triple_groups: &'a [usize],
    pub ad_groups: &'a [usize],
    pub ad_potentials: usize,
    pub ad_orders: &'a [u32],
    pub dual_order: u32,
    pub seed: u64,
}

pub fn run_suite(p: &SuiteParams) -> Result<Vec<ExactBlock>> {
    let mut out = Vec::new();
    for &n in p.harmonic_groups {
        out.push(harmonic_block(n)?);
    }
    for &n in p.harmonic_groups {
        out.push(dual_block(&CarnotGroup::heisenberg(n)?, p.dual_order)?);
    }
    for &n in p.bracket_groups {
        out.push(bracket_block(&CarnotGroup::heisenberg(n)?, p.bracket_potentials, p.seed)?);
    }
    for &n in p.triple_groups {
        out.push(triple_block(&CarnotGroup::heisenberg(n)?, p.bracket_potentials.min(5), p.seed ^ 0x7)?);
    }
    let mut orders = p.ad_orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    for &n in p.ad_groups {
        out.push(ad_block(&CarnotGroup::heisenberg(n)?, p.ad_potentials, &orders, p.seed ^ 0xad)?);
    }
    Ok(out)
}
