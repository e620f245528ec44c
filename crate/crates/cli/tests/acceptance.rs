//! Acceptance suite: one test per criterion, named `criterion_NN_*`, so
//! the harness prints one pass/fail line for each. Run with
//! `cargo test -p carnot-cli --test acceptance -- --nocapture` to see the
//! measured quantities.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carnot_cli::exact::{ad_block, bracket_block, harmonic_block, triple_block};
use carnot_cli::{emit_report, run_scenario_file, Format, RunOptions, Status};
use carnot_core::diffop::{sub_laplacian, v_potential_poly};
use carnot_core::group::{CarnotGroup, Point};
use carnot_core::jets::{fd_jet_fn, jet_rel_error, Jet2, PotentialEval, PotentialSpec, RadialNorm, DEFAULT_FD_STEP};
use carnot_core::poly::{rat, MultiIndex, PolyQ};
use carnot_core::sampler::{estimate_many, grid_quadrature, run_chains, Expectation, GridSpec, Integrator, SamplerConfig};
use carnot_core::verifiers::poincare::gaussian_expectation;
use carnot_core::verifiers::{
    eg2_adams_failure, higher_poincare_check, improved_weight_slope, statpoly_build, step2_identity_check,
    ubound_defect, Eg2Config, PoincareConstant, ScanPath,
};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn h(n: usize) -> CarnotGroup {
    CarnotGroup::heisenberg(n).unwrap()
}

#[test]
fn criterion_01_exact_identity_suite() {
    let t = Instant::now();
    for n in 1..=3 {
        let b = harmonic_block(n).unwrap();
        assert!(b.exact, "H{n}: {:?}", b.failures);
    }
    let g = h(1);
    let v = g.parse_poly("x^2 - y^2").unwrap();
    assert!(sub_laplacian(&g).unwrap().apply(&v).unwrap().is_zero());
    let secs = t.elapsed().as_secs_f64();
    println!("criterion 1: harmonic identities exact on H1..H3 in {secs:.3}s");
    assert!(secs < 5.0, "{secs}s");
}

#[test]
fn criterion_02_deformed_field_algebra() {
    let mut checks = 0;
    for n in 1..=2 {
        let b = bracket_block(&h(n), 20, 100 + n as u64).unwrap();
        assert!(b.exact, "{:?}", b.failures);
        checks += b.checks;
        let t = triple_block(&h(n), 20, 200 + n as u64).unwrap();
        assert!(t.exact, "{:?}", t.failures);
        checks += t.checks;
    }
    let t = triple_block(&h(3), 3, 203).unwrap();
    assert!(t.exact, "{:?}", t.failures);
    checks += t.checks;
    println!("criterion 2: {checks} bracket identities exact");
}

#[test]
fn criterion_03_ad_expansion_oracle() {
    let mut checks = 0;
    for n in 1..=2 {
        let b = ad_block(&h(n), 10, &[1, 2, 3], 300 + n as u64).unwrap();
        assert!(b.exact, "{:?}", b.failures);
        checks += b.checks;
    }
    println!("criterion 3: {checks} ad-expansion equalities exact");
}

#[test]
fn criterion_04_kaplan_jet_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for g in [h(1), h(2)] {
        for _ in 0..100 {
            let raw: Vec<f64> = (0..g.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let target = rng.random_range(0.5..10.0);
            let n0 = g.kaplan_norm(&raw).unwrap();
            let p = g.dilate(target / n0, &Point::new(raw).unwrap()).unwrap().coords().to_vec();
            let closed = g.kaplan_jet(&p).unwrap();
            let norm = |q: &[f64]| g.kaplan_norm(q).unwrap();
            let fd = fd_jet_fn(&g, &norm, &p, DEFAULT_FD_STEP).unwrap();
            let cj = Jet2 {
                u: closed.value,
                grad_h: closed.grad_h.clone(),
                hess_h: closed.hess_h.clone(),
                center: closed.z_jet,
                gradsq: 0.0,
                lap: 0.0,
            };
            let (a, b) = jet_rel_error(&cj, &fd);
            e1 = e1.max(a);
            e2 = e2.max(b);
        }
    }
    println!("criterion 4: max relative error first order {e1:.2e}, second order {e2:.2e}");
    assert!(e1 <= 1e-6 && e2 <= 1e-4);
}

#[test]
fn criterion_05_adams_failure() {
    let rep = run_scenario_file(&fixture("adams.toml"), &RunOptions::default()).unwrap();
    assert_eq!(rep.status, Status::Pass);
    let z = &rep.results[0].tables[0];
    let ratio = z.column("ratio").unwrap();
    let at100 = z.rows.iter().position(|r| r.param == 100.0).unwrap();
    assert!((ratio[at100] - 3200.0).abs() <= 1e-9 * 3200.0, "{}", ratio[at100]);
    for i in 0..ratio.len() - 2 {
        let two = ratio[i + 2] / ratio[i];
        assert!((two / 100.0 - 1.0).abs() <= 0.2, "{two}");
    }
    let radial = rep.results[1].tables[0].column("ratio").unwrap();
    let bound = radial.iter().cloned().fold(0.0, f64::max);
    println!(
        "criterion 5: ratio at (0,0,100) = {}, two-decade growth {:.4}, radial max {bound:.3e}",
        ratio[at100],
        ratio[2] / ratio[0]
    );
    assert!(bound < 1.0);
}

#[test]
fn criterion_06_ubound_defect_identity() {
    // exact Gaussian route: f = x, U = x²/2
    let g1 = CarnotGroup::euclidean(1).unwrap();
    let u = g1.parse_poly("1/2 * x1^2").unwrap();
    let x = g1.parse_poly("x1").unwrap();
    let vpot = v_potential_poly(&g1, &u).unwrap();
    let lhs = gaussian_expectation(&(&(&x * &x) * &vpot));
    let rhs = gaussian_expectation(&PolyQ::one(1));
    // |∇(f e^{−U/2})|² e^{U} = (f' − ½U'f)²
    let w = &PolyQ::one(1) - &(&x * &x).scale(&rat(1, 2));
    let defect = gaussian_expectation(&(&w * &w));
    assert_eq!((lhs.clone(), rhs.clone(), defect.clone()), (rat(1, 4), rat(1, 1), rat(3, 4)));
    assert_eq!(&rhs - &lhs, defect);

    let mut worst = 0.0f64;
    let cases: [(CarnotGroup, PotentialSpec, GridSpec, [&str; 5]); 2] = [
        (
            h(1),
            PotentialSpec::QuadricPower { n: 1.0 },
            GridSpec { radius: 10.0, nodes: 101 },
            ["x", "y", "z", "x*y", "x^2 - y^2"],
        ),
        (
            g1.clone(),
            PotentialSpec::Polynomial { text: "1/2*x1^2".into() },
            GridSpec { radius: 12.0, nodes: 2001 },
            ["x1", "x1^2", "x1^3 - x1", "1", "x1^4"],
        ),
    ];
    for (g, spec, grid, fs) in &cases {
        let eval = PotentialEval::new(g, spec).unwrap();
        let ex = Expectation::new(&eval, &Integrator::Grid(*grid)).unwrap();
        for f in fs {
            let r = ubound_defect(&ex, &g.parse_poly(f).unwrap(), 1e-3).unwrap();
            let gap = r.extra("identity_gap_rel").unwrap();
            worst = worst.max(gap);
            assert!(gap <= 1e-3, "{} f={f}: {gap}", g.name());
        }
        if g.dim() == 1 {
            let r = ubound_defect(&ex, &x, 1e-3).unwrap();
            assert!((r.lhs.mean - 0.25).abs() < 1e-9 && (r.rhs.mean - 1.0).abs() < 1e-9);
            assert!((r.extra("defect_direct").unwrap() - 0.75).abs() < 1e-9);
        }
    }
    println!("criterion 6: exact Gaussian (1/4, 1, 3/4); largest relative identity gap {worst:.2e}");
}

#[test]
fn criterion_07_step2_identity() {
    let g = h(1);
    let scenarios = [
        ("1/2*x^2 + 1/2*y^2 + z^2", ["x", "y", "z", "x*y", "x^2 - y^2"]),
        ("1/4*x^4 + 1/2*x^2*y^2 + 1/4*y^4 + z^2", ["1", "x", "z", "x*y + z", "y^2"]),
    ];
    let mut worst = 0.0f64;
    for (u, fs) in &scenarios {
        let eval = PotentialEval::new(&g, &PotentialSpec::Polynomial { text: u.to_string() }).unwrap();
        let ex = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 10.0, nodes: 101 })).unwrap();
        for f in fs {
            let r = step2_identity_check(&ex, &g.parse_poly(f).unwrap(), 1e-3).unwrap();
            worst = worst.max(r.extra("rel_gap").unwrap());
            assert_eq!(r.holds, Some(true), "U={u}, f={f}: {r:?}");
        }
    }
    let eval = PotentialEval::new(&g, &PotentialSpec::QuadricPower { n: 1.0 }).unwrap();
    let mc = Integrator::MonteCarlo(SamplerConfig {
        chains: 4,
        steps: 42_000,
        burn_in: 2_000,
        seed: 7,
        ..SamplerConfig::default()
    });
    let ex = Expectation::new(&eval, &mc).unwrap();
    let mut sigmas = Vec::new();
    for f in ["x", "x*y"] {
        let r = step2_identity_check(&ex, &g.parse_poly(f).unwrap(), 1e-3).unwrap();
        assert_eq!(r.holds, Some(true), "MC f={f}: {r:?}");
        sigmas.push((r.lhs.mean - r.rhs.mean).abs() / r.defect_err);
    }
    println!("criterion 7: 10 grid scenarios, largest relative gap {worst:.2e}; MC gaps in std_err {sigmas:.2?}");
}

#[test]
fn criterion_08_statistical_polynomial() {
    let g = h(1);
    let eval = PotentialEval::new(&g, &PotentialSpec::QuadricPower { n: 1.0 }).unwrap();
    let ex = Expectation::new(&eval, &Integrator::Grid(GridSpec { radius: 10.0, nodes: 101 })).unwrap();
    let mut worst = 0.0f64;
    let mut count = 0;
    for m in 1..=3u32 {
        let mut span = Vec::new();
        for ord in 0..m {
            for a in MultiIndex::all_of_order(2, ord) {
                let mut e = a.exponents().to_vec();
                e.push(0);
                span.push(PolyQ::dual_weight(&MultiIndex::new(e), 2).unwrap());
            }
        }
        let mut combo = PolyQ::zero(3);
        for (i, w) in span.iter().enumerate() {
            combo = &combo + &w.scale(&rat(i as i64 - 2, 3));
        }
        span.push(combo);
        for f in &span {
            let (_, r) = statpoly_build(&ex, f, m).unwrap();
            worst = worst.max(r.lhs.mean);
            count += 1;
            assert!(r.lhs.mean <= 1e-8, "m={m} f={}: {}", g.format_poly(f), r.lhs.mean);
        }
    }
    let family = [
        "x", "y", "x*y", "x^2", "y^2", "x^2*y", "x*y^2", "x^3", "x + x*y", "x^2 - y^2 + y",
    ];
    let fam: Vec<String> = family.iter().map(|s| s.to_string()).collect();
    let c = PoincareConstant::Estimated { family: fam };
    let mut min_margin = f64::INFINITY;
    for f in family {
        let r = higher_poincare_check(&ex, &g.parse_poly(f).unwrap(), 2, &c).unwrap();
        min_margin = min_margin.min(r.defect);
        assert!(r.defect >= 0.0, "f={f}: {r:?}");
    }
    println!("criterion 8: {count} span members, largest residual {worst:.2e}; chain margin min {min_margin:.3e}");
}

#[test]
fn criterion_09_eg2_no_adams_constant() {
    let g = CarnotGroup::euclidean(2).unwrap();
    let spec = PotentialSpec::RadialCosine {
        alpha: 1.0,
        epsilon: 0.5,
        omega: 1.0,
        kappa: 1.0,
        norm: RadialNorm::Euclidean,
    };
    let eval = PotentialEval::new(&g, &spec).unwrap();
    let rep = eg2_adams_failure(
        &eval,
        &Eg2Config {
            shells: vec![10, 100, 1000],
            delta: 1e-3,
            samples: 256,
            angle: 0.3,
        },
    )
    .unwrap();
    assert_eq!(rep.holds, Some(true), "{:?}", rep.notices);
    for r in &rep.rows {
        assert!(r.values[2] < 1e-3);
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for k in [10, 100, 1000] {
        pos.push(rep.extras[&format!("shell_{k}_pos_min")]);
        neg.push(rep.extras[&format!("shell_{k}_neg_min")]);
        assert!(pos.last().unwrap() > &(k as f64) && neg.last().unwrap() > &(k as f64));
    }
    assert!(pos.windows(2).all(|w| w[1] > w[0]) && neg.windows(2).all(|w| w[1] > w[0]));
    println!("criterion 9: |ΔU| at located critical points, positive {pos:.1?}, negative {neg:.1?}");
}

#[test]
fn criterion_10_hardy_improved_weight_slope() {
    let mut slopes = Vec::new();
    for kappa in [3.0, 4.0] {
        let eval = PotentialEval::new(&h(1), &PotentialSpec::KaplanPower { kappa }).unwrap();
        let s = improved_weight_slope(&eval, &ScanPath::decades(1, 4), 16).unwrap();
        assert!((s - (kappa - 2.0)).abs() <= 0.05, "κ={kappa}: {s}");
        slopes.push(s);
    }
    println!("criterion 10: slopes {slopes:.4?} for κ = 3, 4");
}

#[test]
fn criterion_11_determinism_and_sampler_agreement() {
    let fixtures = [
        "identities.toml",
        "adams.toml",
        "adams_dual.toml",
        "examples.toml",
        "hardy.toml",
        "gaussian_mc.toml",
        "quadric_h1.toml",
        "inductive.toml",
        "violation.toml",
    ];
    let all = [Format::Json, Format::Csv, Format::Summary];
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut files = 0;
    for f in fixtures {
        let a = run_scenario_file(&fixture(f), &RunOptions::default()).unwrap();
        let b = run_scenario_file(&fixture(f), &RunOptions::default()).unwrap();
        let pa = emit_report(&a, &all, d1.path(), "r").unwrap();
        let pb = emit_report(&b, &all, d2.path(), "r").unwrap();
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{f}: {}", x.display());
            files += 1;
        }
    }

    // sampler against quadrature on the standard Gaussian in the plane
    let g = CarnotGroup::euclidean(2).unwrap();
    let eval = PotentialEval::new(&g, &PotentialSpec::Polynomial { text: "1/2*x1^2 + 1/2*x2^2".into() }).unwrap();
    let o1 = |p: &[f64]| p[0];
    let o2 = |p: &[f64]| p[1] * p[1];
    let o3 = |p: &[f64]| p[0] * p[1];
    let o4 = |p: &[f64]| p[0] * p[0] * p[1] * p[1];
    let o5 = |p: &[f64]| p[0].cos();
    let o6 = |p: &[f64]| p[1].abs();
    let obs: [&(dyn Fn(&[f64]) -> f64 + Sync); 6] = [&o1, &o2, &o3, &o4, &o5, &o6];
    let exact = grid_quadrature(&eval, &obs, &GridSpec { radius: 10.0, nodes: 201 }).unwrap();
    let (mut trials_ok, mut pairs_ok) = (0, 0);
    for seed in 0..40u64 {
        let cfg = SamplerConfig {
            chains: 4,
            steps: 10_000,
            burn_in: 1_000,
            seed,
            ..SamplerConfig::default()
        };
        let est = estimate_many(&run_chains(&eval, &cfg).unwrap(), &obs).unwrap();
        let hits = est.iter().zip(&exact).filter(|(e, x)| (e.mean - *x).abs() <= 3.0 * e.std_err).count();
        pairs_ok += hits;
        if hits == obs.len() {
            trials_ok += 1;
        }
    }
    println!(
        "criterion 11: {files} artifacts byte-identical across reruns; {trials_ok}/40 trials with all 6 observables within 3 std_err ({pairs_ok}/240 pairs)"
    );
    assert!(trials_ok >= 38, "{trials_ok}/40");
}
