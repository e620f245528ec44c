use carnot_core::group::CarnotGroup;
use carnot_core::jets::{PotentialEval, PotentialSpec, RadialNorm};
use carnot_core::sampler::{
    estimate, grid_quadrature, run_chains, GridSpec, Integrator, SamplerConfig,
};
use carnot_core::Error;

fn gaussian_1d() -> PotentialEval {
    let g = CarnotGroup::euclidean(1).unwrap();
    PotentialEval::new(
        &g,
        &PotentialSpec::Polynomial {
            text: "1/2 * x1^2".into(),
        },
    )
    .unwrap()
}

fn cfg(seed: u64) -> SamplerConfig {
    SamplerConfig {
        chains: 4,
        steps: 22_000,
        burn_in: 2_000,
        seed,
        ..SamplerConfig::default()
    }
}

#[test]
fn gaussian_moments_within_three_standard_errors() {
    let eval = gaussian_1d();
    let batch = run_chains(&eval, &cfg(7)).unwrap();
    for r in &batch.acceptance_rate {
        assert!((0.0..=1.0).contains(r));
    }
    let m = estimate(&batch, &|p| p[0]).unwrap();
    assert!(m.mean.abs() <= 3.0 * m.std_err, "{m:?}");
    let v = estimate(&batch, &|p| p[0] * p[0]).unwrap();
    assert!((v.mean - 1.0).abs() <= 3.0 * v.std_err, "{v:?}");
    assert!(v.ess > 0.0 && v.ess <= batch.total_samples() as f64);
}

#[test]
fn drift_proposals_also_target_the_gaussian() {
    let eval = gaussian_1d();
    let mut c = cfg(8);
    c.drift = true;
    let batch = run_chains(&eval, &c).unwrap();
    let v = estimate(&batch, &|p| p[0] * p[0]).unwrap();
    assert!((v.mean - 1.0).abs() <= 3.0 * v.std_err, "{v:?}");
}

#[test]
fn same_seed_gives_identical_batches() {
    let eval = gaussian_1d();
    let a = run_chains(&eval, &cfg(11)).unwrap();
    let b = run_chains(&eval, &cfg(11)).unwrap();
    assert_eq!(a, b);
    let c = run_chains(&eval, &cfg(12)).unwrap();
    assert_ne!(a.chains, c.chains);
}

#[test]
fn constant_observable_has_zero_error() {
    let batch = run_chains(&gaussian_1d(), &cfg(1)).unwrap();
    let e = estimate(&batch, &|_| 1.0).unwrap();
    assert_eq!(e.mean, 1.0);
    assert_eq!(e.std_err, 0.0);
}

#[test]
fn estimates_are_linear_on_fixed_samples() {
    let batch = run_chains(&gaussian_1d(), &cfg(2)).unwrap();
    let f = |p: &[f64]| p[0].powi(3) - 0.5;
    let g = |p: &[f64]| (p[0]).cos();
    let ef = estimate(&batch, &f).unwrap();
    let eg = estimate(&batch, &g).unwrap();
    let efg = estimate(&batch, &|p| f(p) + g(p)).unwrap();
    let scale = ef.mean.abs() + eg.mean.abs();
    assert!((efg.mean - ef.mean - eg.mean).abs() <= 1e-12 * scale.max(1.0));
}

#[test]
fn chain_relabeling_changes_no_reported_digit() {
    let batch = run_chains(&gaussian_1d(), &cfg(3)).unwrap();
    let obs = |p: &[f64]| p[0] * p[0] + 0.1 * p[0];
    let base = estimate(&batch, &obs).unwrap();
    for perm in [[1, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]] {
        let e = estimate(&batch.permuted(&perm), &obs).unwrap();
        assert_eq!(e.mean.to_bits(), base.mean.to_bits());
        assert_eq!(e.std_err.to_bits(), base.std_err.to_bits());
        assert_eq!(e.ess.to_bits(), base.ess.to_bits());
    }
}

#[test]
fn non_finite_observable_is_tainted() {
    let batch = run_chains(&gaussian_1d(), &cfg(4)).unwrap();
    let first = batch.point(0, 0)[0];
    let err = estimate(&batch, &|p| if p[0] == first { f64::NAN } else { 0.0 }).unwrap_err();
    match err {
        Error::TaintedEstimate { point, .. } => assert_eq!(point, vec![first]),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn zero_growth_exponent_is_not_a_measure() {
    let g = CarnotGroup::euclidean(2).unwrap();
    let spec = PotentialSpec::RadialCosine {
        alpha: 0.0,
        epsilon: 0.5,
        omega: 1.0,
        kappa: 1.0,
        norm: RadialNorm::Euclidean,
    };
    assert!(matches!(
        PotentialEval::new(&g, &spec),
        Err(Error::InvalidMeasure(_))
    ));
}

#[test]
fn tiny_acceptance_is_reported() {
    let mut c = cfg(5);
    c.proposal_scale = 1e4;
    c.tune = false;
    let batch = run_chains(&gaussian_1d(), &c).unwrap();
    assert!(!batch.warnings.is_empty());
}

#[test]
fn config_invariants_are_enforced() {
    let eval = gaussian_1d();
    let mut c = cfg(0);
    c.burn_in = c.steps;
    assert!(run_chains(&eval, &c).is_err());
    let mut c = cfg(0);
    c.chains = 0;
    assert!(run_chains(&eval, &c).is_err());
}

#[test]
fn csv_export_has_one_row_per_sample() {
    let mut c = cfg(6);
    c.chains = 2;
    c.steps = 200;
    c.burn_in = 100;
    let batch = run_chains(&gaussian_1d(), &c).unwrap();
    let mut buf = Vec::new();
    batch.write_csv(&mut buf, &["x1".to_string()]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "chain,step,x1");
    assert_eq!(lines.len(), 1 + 2 * 100);
}

#[test]
fn quadrature_gaussian_second_moment() {
    let eval = gaussian_1d();
    let spec = GridSpec {
        radius: 12.0,
        nodes: 2001,
    };
    let v = grid_quadrature(&eval, &[&|p: &[f64]| p[0] * p[0], &|p: &[f64]| p[0].powi(3)], &spec)
        .unwrap();
    assert!((v[0] - 1.0).abs() < 1e-6, "{}", v[0]);
    assert!(v[1].abs() < 1e-12);
}

#[test]
fn quadrature_normalization_is_exact() {
    let g = CarnotGroup::heisenberg(1).unwrap();
    let eval = PotentialEval::new(&g, &PotentialSpec::QuadricPower { n: 1.0 }).unwrap();
    let v = grid_quadrature(
        &eval,
        &[&|_: &[f64]| 1.0],
        &GridSpec {
            radius: 8.0,
            nodes: 61,
        },
    )
    .unwrap();
    assert_eq!(v[0], 1.0);
}

#[test]
fn quadrature_rejects_large_dimension_and_short_boxes() {
    let g = CarnotGroup::heisenberg(2).unwrap();
    let eval = PotentialEval::new(&g, &PotentialSpec::KaplanPower { kappa: 2.0 }).unwrap();
    assert!(matches!(
        grid_quadrature(&eval, &[&|_: &[f64]| 1.0], &GridSpec::default()),
        Err(Error::UnsupportedStructure(_))
    ));
    let err = grid_quadrature(
        &gaussian_1d(),
        &[&|_: &[f64]| 1.0],
        &GridSpec {
            radius: 2.0,
            nodes: 101,
        },
    )
    .unwrap_err();
    match err {
        Error::Truncation {
            suggested_radius, ..
        } => assert!(suggested_radius > 2.0),
        e => panic!("unexpected {e}"),
    }
}

/// For `U = N^κ` polar integration gives `μ(N^κ) = Q/κ`.
#[test]
fn kaplan_power_moment_sampler_vs_quadrature() {
    let g = CarnotGroup::heisenberg(1).unwrap();
    let eval = PotentialEval::new(&g, &PotentialSpec::KaplanPower { kappa: 4.0 }).unwrap();
    let n4 = |p: &[f64]| g.kaplan_quartic(p).unwrap();
    let grid = Integrator::Grid(GridSpec {
        radius: 4.0,
        nodes: 121,
    })
    .integrate(&eval, &[&n4])
    .unwrap()[0];
    assert!((grid.mean - 1.0).abs() < 1e-6, "{}", grid.mean);

    let c = SamplerConfig {
        chains: 4,
        steps: 42_000,
        burn_in: 2_000,
        seed: 21,
        ..SamplerConfig::default()
    };
    let batch = run_chains(&eval, &c).unwrap();
    let pooled = estimate(&batch, &n4).unwrap();
    assert!((pooled.mean - grid.mean).abs() <= 3.0 * pooled.std_err, "{pooled:?}");
    for chain in 0..4 {
        let single = estimate(&batch.permuted(&[chain]), &n4).unwrap();
        let tol = 3.0 * (pooled.std_err.powi(2) + single.std_err.powi(2)).sqrt();
        assert!((single.mean - pooled.mean).abs() <= tol, "chain {chain}: {single:?}");
    }
}
