use std::f64::consts::PI;
use std::sync::Arc;

use zakharov::norms::{adapted_norm, Family, NormSettings, NormSpec};
use zakharov::random::{complex_normal, rng_for};
use zakharov::stress::{
    hypotheses, product_estimate, run_stress, stress_bilinear_schrodinger, stress_decomposability,
    stress_energy_inequality, stress_product_estimate, Ensemble, HolderExponents, Inequality,
    StressConfig, StressError,
};
use zakharov::{make_grid, Grid, Repr, SpacetimeField, C64};

fn grid(d: usize, n: usize, nt: usize) -> Arc<Grid> {
    Arc::new(make_grid(d, n, 2.0 * PI, nt, (0.0, PI)).unwrap())
}

fn quick(ineq: Inequality) -> StressConfig {
    let mut c = StressConfig::new(ineq);
    c.samples = 4;
    c.scales.truncate(2);
    c.low.truncate(1);
    c
}

#[test]
fn ratios_are_homogeneous() {
    for ineq in [
        Inequality::EnergySchrodinger,
        Inequality::EnergyWave,
        Inequality::Product,
        Inequality::BilinearSchrodinger,
        Inequality::BilinearWave,
    ] {
        let base = run_stress(&quick(ineq)).unwrap();
        let mut c = quick(ineq);
        c.amplitude = 2.0;
        let doubled = run_stress(&c).unwrap();
        assert_eq!(base.records.len(), doubled.records.len());
        for (x, y) in base.records.iter().zip(&doubled.records) {
            assert!((x.ratio - y.ratio).abs() <= 1e-12 * x.ratio, "{ineq:?}");
            assert!(y.lhs > x.lhs);
        }
    }
}

#[test]
fn energy_ratio_is_finite_and_uniform_for_free_waves() {
    let mut c = StressConfig::new(Inequality::EnergySchrodinger);
    c.scales = vec![4.0, 8.0, 16.0, 32.0, 64.0];
    c.samples = 3;
    let r = stress_energy_inequality(&c).unwrap();
    assert!(r
        .records
        .iter()
        .all(|x| x.ratio.is_finite() && x.ratio > 0.0));
    assert!(r.spread < 8.0, "spread {}", r.spread);
    assert!(r.inside_hypotheses());
}

fn random_field(g: &Arc<Grid>, seed: u64) -> SpacetimeField {
    let mut rng = rng_for(seed, 0);
    let data = (0..g.spacetime_len())
        .map(|_| complex_normal(&mut rng))
        .collect();
    SpacetimeField::from_vec(g, data, Repr::Physical, Repr::Physical).unwrap()
}

#[test]
fn product_with_a_zero_is_hoelder() {
    let g = grid(2, 16, 32);
    let h = HolderExponents::default();
    for seed in 0..10 {
        let v = random_field(&g, seed);
        let u = random_field(&g, seed + 100);
        let (lhs, rhs) = product_estimate(&v, &u, 4.0, 0.0, &h);
        assert!(lhs <= rhs * (1.0 + 1e-10));
    }
    // unimodular v is the equality case
    let v = SpacetimeField::from_fn(&g, |t, x| C64::from_polar(1.0, x[0] + 2.0 * t));
    let u = random_field(&g, 7);
    let (lhs, rhs) = product_estimate(&v, &u, 4.0, 0.0, &h);
    assert!((lhs / rhs - 1.0).abs() < 1e-12);
}

#[test]
fn product_with_time_independent_factor() {
    let g = grid(2, 16, 32);
    let h = HolderExponents::default();
    let v = SpacetimeField::from_fn(&g, |_, x| C64::new(1.0 + 0.5 * x[0].cos(), x[1].sin()));
    for a in [-0.5, 0.5, 1.0] {
        for mu in [1.0, 4.0] {
            let u = random_field(&g, 3);
            let (lhs, rhs) = product_estimate(&v, &u, mu, a, &h);
            assert!(lhs <= rhs * (1.0 + 1e-10), "a {a} μ {mu}: {}", lhs / rhs);
        }
    }
}

#[test]
fn product_ratio_is_uniform_in_mu() {
    for a in [0.5, -0.5] {
        let mut c = StressConfig::new(Inequality::Product);
        c.a = a;
        c.samples = 20;
        let r = stress_product_estimate(&c).unwrap();
        assert!(r.spread < 8.0, "a {a}: {}", r.spread);
    }
}

#[test]
fn gluing_an_interval_to_itself() {
    let g = grid(2, 32, 64);
    let u = zakharov::evolution::propagate::free_schrodinger_spacetime(
        &zakharov::random::gaussian_band(&g, 3.0, 6.0, &mut rng_for(2, 0)),
        &g,
    );
    let spec = NormSpec::new(Family::S {
        s: 0.0,
        a: 0.25,
        b: 0.0,
    })
    .block(4.0);
    let settings = NormSettings::with_margin(2.0);
    let i = (0.5, 2.5);
    let one = adapted_norm(&u, &spec.clone().on(i), &settings)
        .unwrap()
        .value;
    assert!(one / (one + one) <= 1.0 + 1e-10);
}

#[test]
fn decomposability_envelope() {
    let mut c = StressConfig::new(Inequality::Decomposability);
    c.ensemble = Ensemble::FreeWave;
    let r = stress_decomposability(&c).unwrap();
    // free waves extend globally: the constant does not see the overlap
    assert!(r.records.iter().all(|x| (0.25..=2.0).contains(&x.ratio)));
    let c = StressConfig::new(Inequality::Decomposability);
    let r = stress_decomposability(&c).unwrap();
    let a_sharp = c.a.max(0.5);
    assert!(r.envelope_exponent.unwrap() <= a_sharp + 0.2);
}

#[test]
fn zero_inputs_are_skipped() {
    let mut c = quick(Inequality::BilinearSchrodinger);
    c.amplitude = 0.0;
    let r = stress_bilinear_schrodinger(&c).unwrap();
    assert!(r.records.is_empty());
    assert_eq!(r.skipped, c.samples * c.scales.len() * c.low.len());
}

#[test]
fn high_low_cell_is_finite() {
    let mut c = StressConfig::new(Inequality::BilinearSchrodinger);
    c.scales = vec![64.0];
    c.low = vec![4.0];
    c.samples = 1;
    c.ensemble = Ensemble::FreeWave;
    let r = stress_bilinear_schrodinger(&c).unwrap();
    let cell = r.heat_map.unwrap().max_ratio[0][0];
    assert!(cell.is_finite() && cell > 0.0);
}

#[test]
fn points_outside_the_hypotheses_are_refused() {
    let mut c = StressConfig::new(Inequality::BilinearSchrodinger);
    c.s = 5.0;
    assert!(hypotheses(&c).iter().any(|h| !h.holds));
    match run_stress(&c) {
        Err(StressError::Hypothesis(m)) => assert!(m.contains("s - l <= a + 1 - b")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        stress_product_estimate(&StressConfig::new(Inequality::EnergyWave)),
        Err(StressError::Config(_))
    ));
    let mut c = quick(Inequality::Product);
    c.nt = 48;
    assert!(matches!(run_stress(&c), Err(StressError::Config(_))));
}

#[test]
fn reports_are_reproducible() {
    let c = quick(Inequality::EnergyWave);
    let a = run_stress(&c).unwrap();
    let b = run_stress(&c).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.records_csv(), b.records_csv());
    let mut other = c.clone();
    other.seed = 1;
    assert_ne!(c.hash(), other.hash());
    assert_ne!(run_stress(&other).unwrap().records_csv(), a.records_csv());
}
