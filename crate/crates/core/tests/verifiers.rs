use carnot_core::group::CarnotGroup;
use carnot_core::jets::{OuterProfile, PotentialEval, PotentialSpec, RadialNorm};
use carnot_core::poly::{rat, MultiIndex, PolyQ};
use carnot_core::sampler::{Expectation, GridSpec, Integrator, SamplerConfig};
use carnot_core::verifiers::hardy::{improved_weight, minimal_shift, HardyConfig};
use carnot_core::verifiers::poincare::gaussian_expectation;
use carnot_core::verifiers::*;
use carnot_core::Error;

fn gaussian() -> PotentialEval {
    let g = CarnotGroup::euclidean(1).unwrap();
    PotentialEval::new(&g, &PotentialSpec::Polynomial { text: "1/2 * x1^2".into() }).unwrap()
}

fn gauss_grid() -> Integrator {
    Integrator::Grid(GridSpec { radius: 12.0, nodes: 2001 })
}

fn h1() -> CarnotGroup {
    CarnotGroup::heisenberg(1).unwrap()
}

fn quadric1() -> PotentialEval {
    PotentialEval::new(&h1(), &PotentialSpec::QuadricPower { n: 1.0 }).unwrap()
}

fn h1_grid() -> Integrator {
    Integrator::Grid(GridSpec { radius: 10.0, nodes: 101 })
}

fn mc(seed: u64) -> Integrator {
    Integrator::MonteCarlo(SamplerConfig {
        chains: 4,
        steps: 42_000,
        burn_in: 2_000,
        seed,
        ..SamplerConfig::default()
    })
}

fn polys(g: &CarnotGroup, texts: &[&str]) -> Vec<PolyQ> {
    texts.iter().map(|t| g.parse_poly(t).unwrap()).collect()
}

// ---------------------------------------------------------------- Adams

#[test]
fn adams_z_axis_closed_form_and_growth() {
    let eval = PotentialEval::new(&h1(), &PotentialSpec::KaplanPower { kappa: 4.0 }).unwrap();
    let rep = adams_scan(&eval, &ScanPath::ZAxis { shells: vec![100.0] }, 0.0).unwrap();
    let ratio = rep.rows[0].values[0];
    assert!((ratio - 3200.0).abs() <= 1e-9 * 3200.0, "{ratio}");

    let rep = adams_scan(&eval, &ScanPath::ZAxis { shells: ScanPath::decades(1, 4) }, 0.0).unwrap();
    assert_eq!(rep.summary.growth.len(), 3);
    for g in &rep.summary.growth {
        assert!((g - 10.0).abs() < 1e-6, "{g}");
    }
    // z and 100z differ by 100^{(κ−2)/2} = 100
    let rep = adams_scan(&eval, &ScanPath::ZAxis { shells: vec![3.0, 300.0] }, 0.0).unwrap();
    assert!((rep.summary.growth[0] / 100.0 - 1.0).abs() < 1e-6);
}

#[test]
fn adams_radial_axis_stays_bounded() {
    let eval = PotentialEval::new(&h1(), &PotentialSpec::KaplanPower { kappa: 4.0 }).unwrap();
    let rep = adams_scan(&eval, &ScanPath::Radial { shells: ScanPath::decades(1, 4) }, 0.0).unwrap();
    assert!(rep.summary.max < 1.0, "{}", rep.summary.max);
}

#[test]
fn adams_scan_flags_singular_points_and_continues() {
    let eval = PotentialEval::new(&h1(), &PotentialSpec::KaplanPower { kappa: 4.0 }).unwrap();
    let rep = adams_scan(&eval, &ScanPath::ZAxis { shells: vec![0.0, 10.0] }, 0.0).unwrap();
    assert!(rep.rows[0].singular);
    assert!(!rep.rows[1].singular);
    assert_eq!(rep.notices.len(), 1);
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("row,param,singular,p1,p2,p3,ratio,hess_sum,grad_norm,lap,v,growth"));
}

#[test]
fn dual_scan_diverges_on_hyperplane_approach() {
    let spec = PotentialSpec::DualMonomial { alpha: vec![1, 1], outer: OuterProfile::Power { p: 2.0 } };
    let eval = PotentialEval::new(&h1(), &spec).unwrap();
    let ts = [1e-1, 1e-2, 1e-3, 1e-4];
    let rep = adams_dual_scan(&eval, &ts, 0.5).unwrap();
    for g in &rep.summary.growth {
        assert!(*g > 2.0, "{g}");
    }
}

#[test]
fn dual_scan_hessian_row_vanishes_for_single_direction() {
    let spec = PotentialSpec::DualMonomial { alpha: vec![2, 0], outer: OuterProfile::Power { p: 2.0 } };
    let eval = PotentialEval::new(&h1(), &spec).unwrap();
    let rep = adams_dual_scan(&eval, &[1e-1, 1e-2, 1e-3], 0.5).unwrap();
    for name in ["h_2_1", "h_2_2", "h_1_2"] {
        for v in rep.column(name).unwrap() {
            assert_eq!(v, 0.0, "{name}");
        }
    }
}

#[test]
fn dual_scan_linear_outer_is_bounded_on_compacta() {
    let spec = PotentialSpec::DualMonomial { alpha: vec![1, 1], outer: OuterProfile::Linear { slope: 1.0 } };
    let eval = PotentialEval::new(&h1(), &spec).unwrap();
    let rep = adams_scan(&eval, &ScanPath::Box { lo: 0.5, hi: 2.0, nodes: 7 }, 0.5).unwrap();
    assert!(rep.summary.max.is_finite() && rep.summary.max < 10.0);
}

// -------------------------------------------------------------- U-bound

#[test]
fn ubound_gaussian_moments() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &gauss_grid()).unwrap();
    let g = eval.group();
    let x = g.parse_poly("x1").unwrap();
    let r = ubound_defect(&ex, &x, 1e-3).unwrap();
    assert!((r.lhs.mean - 0.25).abs() < 1e-9);
    assert!((r.rhs.mean - 1.0).abs() < 1e-9);
    assert!((r.extra("defect_direct").unwrap() - 0.75).abs() < 1e-9);
    assert_eq!(r.holds, Some(true));

    // exact cross-check: μ(x²𝒱) with Gaussian moments
    let v = carnot_core::diffop::v_potential_poly(g, &g.parse_poly("1/2 * x1^2").unwrap()).unwrap();
    let lhs_exact = gaussian_expectation(&x.checked_mul(&x).unwrap().checked_mul(&v).unwrap());
    assert_eq!(lhs_exact, rat(1, 4));

    let one = PolyQ::one(1);
    let r = ubound_defect(&ex, &one, 1e-3).unwrap();
    assert!((r.lhs.mean + 0.25).abs() < 1e-9);
    assert_eq!(r.rhs.mean, 0.0);
    assert!((r.extra("defect_direct").unwrap() - 0.25).abs() < 1e-9);
}

#[test]
fn ubound_three_way_identity_on_heisenberg() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    for f in polys(eval.group(), &["x", "y", "z", "x*y", "x^2 - y^2"]) {
        let r = ubound_defect(&ex, &f, 1e-3).unwrap();
        assert_eq!(r.holds, Some(true), "{:?}", r);
        assert!(r.extra("identity_gap_rel").unwrap() < 1e-3);
    }
}

#[test]
fn ubound_identity_under_monte_carlo() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &mc(3)).unwrap();
    let x2 = eval.group().parse_poly("x1^2").unwrap();
    let r = ubound_defect(&ex, &x2, 1e-3).unwrap();
    assert_eq!(r.holds, Some(true), "{r:?}");
}

#[test]
fn non_integrable_potential_is_rejected() {
    let g = CarnotGroup::euclidean(1).unwrap();
    let eval = PotentialEval::new(&g, &PotentialSpec::Polynomial { text: "x1^3".into() }).unwrap();
    let ex = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 5.0, nodes: 11 })).unwrap();
    let err = ubound_defect(&ex, &g.parse_poly("x1").unwrap(), 1e-3).unwrap_err();
    assert!(matches!(err, Error::InvalidScenario(_)));
}

#[test]
fn ubound_constant_fit_is_feasible() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    let fam = polys(eval.group(), &["x", "y", "z", "x*y", "1"]);
    let fit = fit_ubound_constants(&ex, &fam, Some(0), WeightChoice::Bracket, 1e-2).unwrap();
    assert!(fit.margin >= -1e-9, "{fit:?}");
    assert!(fit.constant("C").unwrap() >= 0.0 && fit.constant("D").unwrap() >= 0.0);
}

// ------------------------------------------------------------ inductive

#[test]
fn inductive_gaussian_shift_weight() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &gauss_grid()).unwrap();
    let cfg = InductiveConfig {
        n: 2,
        epsilon: 0.1,
        radius: 1.0,
        shells: vec![0.5, 1.0, 2.0, 5.0, 10.0, 100.0],
        directions: 2,
        weight: WeightChoice::Shift { c: 1.5 },
        cap: 1e12,
    };
    let fam = polys(eval.group(), &["x1", "x1^2", "0"]);
    let fit = inductive_bound_pipeline(&ex, &cfg, &fam).unwrap();
    let e = fit.constant("E_eps").unwrap();
    assert!((0.0..=1.0).contains(&e), "{e}");
    assert!(fit.margin >= -1e-12);
    // the zero member holds with margin exactly 0
    assert!(fit.members.iter().filter(|m| m.label.starts_with('0')).all(|m| m.margin == 0.0 && m.skipped));
    assert!(fit.extras["gate"].is_finite());
}

#[test]
fn inductive_quadric_square_has_finite_constants() {
    let eval = PotentialEval::new(&h1(), &PotentialSpec::QuadricPower { n: 2.0 }).unwrap();
    let ex = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 4.0, nodes: 81 })).unwrap();
    let cfg = InductiveConfig {
        n: 1,
        epsilon: 0.5,
        radius: 1.0,
        shells: vec![1.0, 10.0, 100.0, 1000.0],
        directions: 32,
        weight: WeightChoice::Bracket,
        cap: 1e12,
    };
    let fam = polys(eval.group(), &["x", "z"]);
    let fit = inductive_bound_pipeline(&ex, &cfg, &fam).unwrap();
    assert!(fit.constant("E_eps").unwrap().is_finite());
    assert!(fit.constant("a_1").unwrap().is_finite());
}

// ------------------------------------------------------------- Poincaré

#[test]
fn poincare_gaussian_ratios() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &gauss_grid()).unwrap();
    let g = eval.group();
    let fit = poincare_estimate(&ex, &polys(g, &["x1"])).unwrap();
    assert!((fit.constant("C").unwrap() - 1.0).abs() < 1e-9);
    let fit = poincare_estimate(&ex, &polys(g, &["x1^2"])).unwrap();
    assert!((fit.constant("C").unwrap() - 0.5).abs() < 1e-9);
    let fit = poincare_estimate(&ex, &polys(g, &["x1", "x1^2", "3"])).unwrap();
    assert!(fit.notices.iter().any(|n| n.contains("constant member")));
}

#[test]
fn poincare_ratio_is_affine_invariant_on_fixed_samples() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &mc(4)).unwrap();
    let g = eval.group();
    let a = poincare_estimate(&ex, &polys(g, &["x1^3 - x1"])).unwrap();
    let b = poincare_estimate(&ex, &polys(g, &["2 * x1^3 - 2 * x1 + 7"])).unwrap();
    let (ca, cb) = (a.constant("C").unwrap(), b.constant("C").unwrap());
    assert!((ca - cb).abs() <= 1e-12 * ca, "{ca} {cb}");
}

#[test]
fn statpoly_constant_and_dual_weight() {
    let g = CarnotGroup::euclidean(1).unwrap();
    let mut oracle = |p: &PolyQ| Ok((gaussian_expectation(p), 0.0));
    let c = g.parse_poly("5/3").unwrap();
    let (z, rest, _) = statpoly_build_with(&g, &c, 2, &mut oracle).unwrap();
    assert_eq!(z, c);
    assert!(rest.is_zero());
    let w = PolyQ::dual_weight(&MultiIndex::new(vec![2]), 1).unwrap();
    let (z, rest, _) = statpoly_build_with(&g, &w, 3, &mut oracle).unwrap();
    assert_eq!(z, w);
    assert!(rest.is_zero());
}

#[test]
fn statpoly_annihilates_low_span_on_heisenberg() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    let g = eval.group();
    for (m, texts) in [
        (1, vec!["3"]),
        (2, vec!["x", "y - 2", "x + 3*y + 1"]),
        (3, vec!["1/2 * x^2", "x*y", "x^2 - y^2 + x"]),
    ] {
        for f in polys(g, &texts) {
            let (_, r) = statpoly_build(&ex, &f, m).unwrap();
            assert!(r.lhs.mean <= 1e-8, "m={m} f={}: {}", g.format_poly(&f), r.lhs.mean);
        }
    }
}

#[test]
fn statpoly_second_order_chain_on_heisenberg() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    let g = eval.group();
    let f = g.parse_poly("x + x*y").unwrap();
    let (zeta, r) = statpoly_build(&ex, &f, 2).unwrap();
    assert!(zeta.degree().unwrap() <= 1);
    let fam = vec!["x".to_string(), "x*y".to_string(), "y^2".to_string()];
    let c = poincare_estimate(&ex, &polys(g, &["x", "x*y", "y^2"])).unwrap().constant("C").unwrap();
    assert!(r.lhs.mean <= c * c * r.rhs.mean, "{} vs {}", r.lhs.mean, c * c * r.rhs.mean);
    let hp = higher_poincare_check(&ex, &f, 2, &PoincareConstant::Estimated { family: fam }).unwrap();
    assert_eq!(hp.holds, Some(true));
}

#[test]
fn higher_poincare_examples() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &gauss_grid()).unwrap();
    let g = eval.group();
    let r = higher_poincare_check(&ex, &g.parse_poly("x1^3").unwrap(), 2, &PoincareConstant::Fixed { c: 1.0 }).unwrap();
    assert!((r.lhs.mean - 6.0).abs() < 1e-8, "{}", r.lhs.mean);
    assert!((r.rhs.mean - 36.0).abs() < 1e-8);
    assert_eq!(r.holds, Some(true));
    let r = higher_poincare_check(&ex, &g.parse_poly("x1").unwrap(), 2, &PoincareConstant::Fixed { c: 1.0 }).unwrap();
    assert!(r.lhs.mean < 1e-20 && r.rhs.mean == 0.0);
    assert_eq!(r.holds, Some(true));

    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    let fam = vec!["x".into(), "y".into(), "x*y".into()];
    let r = higher_poincare_check(&ex, &eval.group().parse_poly("x*y").unwrap(), 2, &PoincareConstant::Estimated { family: fam }).unwrap();
    assert_eq!(r.holds, Some(true));
    assert!(r.defect >= 0.0);
}

// ------------------------------------------------------------------ LSI

#[test]
fn lsi_examples() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &gauss_grid()).unwrap();
    let g = eval.group();
    let cfg = LsiConfig { beta: 0.5, m: 1, p: 2.0 };
    let r = lsi_defect(&ex, &PolyQ::one(1), &cfg).unwrap();
    assert_eq!(r.lhs.mean, 0.0);

    let r = lsi_defect(&ex, &g.parse_poly("x1").unwrap(), &cfg).unwrap();
    let ratio = r.ratio.unwrap();
    assert!(ratio.is_finite() && ratio > 0.0);
    let fine = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 12.0, nodes: 4001 })).unwrap();
    let r2 = lsi_defect(&fine, &g.parse_poly("x1").unwrap(), &cfg).unwrap();
    assert!((r2.ratio.unwrap() / ratio - 1.0).abs() < 0.01);

    assert!(matches!(
        lsi_defect(&ex, &PolyQ::zero(1), &cfg),
        Err(Error::UndefinedRatio(_))
    ));
}

#[test]
fn lsi_ratio_is_scale_invariant() {
    let eval = gaussian();
    let ex = Expectation::new(&eval, &mc(9)).unwrap();
    let g = eval.group();
    let cfg = LsiConfig { beta: 0.5, m: 2, p: 2.0 };
    let a = lsi_defect(&ex, &g.parse_poly("x1^2 + x1").unwrap(), &cfg).unwrap();
    let b = lsi_defect(&ex, &g.parse_poly("2*x1^2 + 2*x1").unwrap(), &cfg).unwrap();
    assert!((a.ratio.unwrap() - b.ratio.unwrap()).abs() <= 1e-12 * a.ratio.unwrap());
    let (na, nb) = (a.extra("normalized_lhs").unwrap(), b.extra("normalized_lhs").unwrap());
    assert!((na - nb).abs() <= 1e-12 * na);
}

// --------------------------------------------------------------- step 2

#[test]
fn step2_identity_balances_on_heisenberg() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    for f in polys(eval.group(), &["1", "x", "x*y + z"]) {
        let r = step2_identity_check(&ex, &f, 1e-3).unwrap();
        assert_eq!(r.holds, Some(true), "{r:?}");
    }
    let fam = polys(eval.group(), &["1", "x", "z", "x*y"]);
    let r = ibp_check(&ex, &fam, 1e-6).unwrap();
    assert_eq!(r.holds, Some(true), "{r:?}");
}

#[test]
fn step2_flat_case() {
    let g = CarnotGroup::euclidean(2).unwrap();
    let u = g.parse_poly("1/2 * x1^2 + 1/2 * x2^2 + 1/4 * x1^4").unwrap();
    for l in 0..2 {
        for j in 0..2 {
            assert!(carnot_core::diffop::v_bracket(&g, &u, l, j).unwrap().is_zero());
        }
    }
    let eval = PotentialEval::from_poly(&g, &u).unwrap();
    let ex = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 10.0, nodes: 401 })).unwrap();
    let r = step2_identity_check(&ex, &g.parse_poly("x1 * x2 + x1").unwrap(), 1e-3).unwrap();
    assert_eq!(r.holds, Some(true), "{r:?}");
}

#[test]
fn step2_identity_under_monte_carlo() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &mc(5)).unwrap();
    let r = step2_identity_check(&ex, &eval.group().parse_poly("x").unwrap(), 1e-3).unwrap();
    assert_eq!(r.holds, Some(true), "{r:?}");
}

// ---------------------------------------------------------------- Hardy

#[test]
fn hardy_on_kaplan_power() {
    let eval = PotentialEval::new(&h1(), &PotentialSpec::KaplanPower { kappa: 4.0 }).unwrap();
    let ex = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 4.0, nodes: 120 })).unwrap();
    let fam = polys(eval.group(), &["x", "y", "x*z", "x^2 + y", "0", "1"]);
    let rep = hardy_check(&ex, &fam, &HardyConfig { c: Some(1.0), ..HardyConfig::default() }).unwrap();
    assert!(rep.notices.iter().any(|n| n.contains("does not vanish")));
    assert_eq!(rep.members.len(), 5);
    for m in &rep.members {
        assert!(m.lhs.mean.is_finite() && m.rhs.mean.is_finite());
    }
    let zero = &rep.members[4];
    assert_eq!((zero.lhs.mean, zero.rhs.mean), (0.0, 0.0));
    let fit = rep.improved_fit.unwrap();
    assert!(fit.margin >= -1e-9 * fit.members.iter().map(|m| m.lhs).fold(0.0, f64::max));
}

#[test]
fn improved_weight_slope_matches_kappa_minus_two() {
    for kappa in [3.0, 4.0] {
        let eval = PotentialEval::new(&h1(), &PotentialSpec::KaplanPower { kappa }).unwrap();
        let s = improved_weight_slope(&eval, &ScanPath::decades(1, 4), 16).unwrap();
        assert!((s - (kappa - 2.0)).abs() < 0.05, "κ={kappa}: {s}");
    }
}

/// `W − D = 𝒱·N²/|x|²` for radial potentials, by the jet route.
#[test]
fn improved_weight_profile_matches_jet_route() {
    use rand::{Rng, SeedableRng};
    let eval = PotentialEval::new(&h1(), &PotentialSpec::KaplanPower { kappa: 3.0 }).unwrap();
    let d = minimal_shift(&eval).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let g = eval.group();
    for _ in 0..50 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let n = g.kaplan_norm(&p).unwrap();
        let x2 = p[0] * p[0] + p[1] * p[1];
        let via_jet = eval.v_potential(&p).unwrap() * n * n / x2 + d;
        let via_profile = (improved_weight(&eval, d, &p).unwrap() * n).powi(2);
        assert!((via_jet - via_profile).abs() <= 1e-9 * via_jet.abs().max(1.0), "{via_jet} {via_profile}");
    }
}

// ------------------------------------------------------------- examples

#[test]
fn eg2_critical_points_in_growing_shells() {
    let g = CarnotGroup::euclidean(2).unwrap();
    let spec = PotentialSpec::RadialCosine { alpha: 1.0, epsilon: 0.5, omega: 1.0, kappa: 1.0, norm: RadialNorm::Euclidean };
    let eval = PotentialEval::new(&g, &spec).unwrap();
    let rep = eg2_adams_failure(&eval, &Eg2Config { shells: vec![10, 100, 1000], delta: 1e-3, samples: 256, angle: 0.3 }).unwrap();
    assert_eq!(rep.holds, Some(true), "{:?}", rep.notices);
    for r in &rep.rows {
        assert!(r.values[2] < 1e-3);
    }
    // |ΔU| ≈ ε ω² κ² r^{α+2κ−2} = r/2 at the critical points
    let k = 1000.0 * 2.0 * std::f64::consts::PI;
    assert!((rep.extras["shell_1000_pos_min"] / (0.5 * k) - 1.0).abs() < 0.01);
}

#[test]
fn eg3_star_bound_with_configured_constants() {
    let eval = quadric1();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    let cfg = Eg3Config { a: 2.0, c: 1.0, n_tilde: 12.0, d: 1.0 };
    let fit = eg3_star_bound(&ex, &polys(eval.group(), &["x", "0"]), &cfg).unwrap();
    assert!(fit.margin >= 0.0);
    assert_eq!(fit.members[1].margin, 0.0);
    assert!(fit.extras["gate"] > 0.125);
    assert!(fit.extras["D_min"] > 0.0 && fit.extras["D_min"] < 1.0);

    let bad = Eg3Config { n_tilde: 10.0, ..cfg };
    assert!(matches!(eg3_star_bound(&ex, &[], &bad), Err(Error::ConditionFailed(_))));
}

#[test]
fn rockland_terms_fit_is_feasible() {
    let g = h1();
    let eval = PotentialEval::new(&g, &PotentialSpec::Polynomial { text: "1/2*x^2 + 1/2*y^2 + z^2".into() }).unwrap();
    let ex = Expectation::new(&eval, &h1_grid()).unwrap();
    let fit = rockland_terms(&ex, &polys(&g, &["x", "y", "x*y", "x^2", "z"]), 1, None).unwrap();
    for k in ["b_0", "c_0", "b_1", "c_1"] {
        assert!(fit.constant(k).unwrap() >= 0.0);
    }
    assert!(fit.margin >= -1e-9, "{}", fit.margin);
}

// ------------------------------------------------------------------ fit

#[test]
fn two_constant_fit_picks_cheapest_vertex() {
    use carnot_core::verifiers::fit::Constraint;
    let cons = vec![
        Constraint { label: "a".into(), lhs: 1.0, coeffs: vec![1.0, 0.0] },
        Constraint { label: "b".into(), lhs: 2.0, coeffs: vec![1.0, 1.0] },
        Constraint { label: "c".into(), lhs: 0.0, coeffs: vec![0.0, 0.0] },
    ];
    let fit = fit_constants("t", &["C", "D"], cons, 1e-2).unwrap();
    // cheapest: C = 1, D = 1 (objective 1.01) versus C = 2, D = 0 (2)
    assert_eq!(fit.constant("C"), Some(1.0));
    assert_eq!(fit.constant("D"), Some(1.0));
    assert_eq!(fit.margin, 0.0);
    assert!(fit.members[2].skipped);

    let bad = vec![Constraint { label: "x".into(), lhs: 1.0, coeffs: vec![0.0, 0.0] }];
    assert!(fit_constants("t", &["C", "D"], bad, 1e-2).is_err());
}
