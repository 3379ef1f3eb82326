use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use zakharov::evolution::propagate::free_schrodinger_spacetime;
use zakharov::multipliers::{
    bump, ratio_weight_apply, temporal_weight_apply, DyadicScale, Frame, MultiplierSymbol,
};
use zakharov::random::{complex_normal, gaussian_band, rng_for};
use zakharov::{make_grid, Field, Grid, Repr, SpacetimeField, C64};

fn grid(d: usize, n: usize, nt: usize, t1: f64) -> Arc<Grid> {
    Arc::new(make_grid(d, n, 2.0 * PI, nt, (0.0, t1)).unwrap())
}

fn p(lam: f64) -> MultiplierSymbol {
    MultiplierSymbol::P(DyadicScale::new(lam).unwrap())
}

fn random_spacetime(g: &Arc<Grid>, seed: u64) -> SpacetimeField {
    let mut rng = rng_for(seed, 0);
    let data = (0..g.spacetime_len())
        .map(|_| complex_normal(&mut rng))
        .collect();
    SpacetimeField::from_vec(g, data, Repr::Physical, Repr::Physical).unwrap()
}

fn max_diff(a: &SpacetimeField, b: &SpacetimeField) -> f64 {
    let b = b.to_repr(a.time_repr(), a.space_repr());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn bump_examples() {
    assert_eq!(bump(0.4), 0.0);
    let sum: f64 = (-20..=20).map(|k| bump(1.37 / 2f64.powi(k))).sum();
    assert!((sum - 1.0).abs() < 1e-12);
    // dense sampling of [1, 2]
    for i in 0..=10_000 {
        let r = 1.0 + i as f64 / 10_000.0;
        assert!((bump(r) + bump(r / 2.0) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn p_lambda_scales_a_pure_mode_by_the_bump() {
    let g = grid(1, 256, 2, 1.0);
    for (lam, k) in [(4.0, 5.0), (16.0, 21.0), (32.0, 40.0)] {
        let f = Field::from_fn(&g, |x| C64::from_polar(1.0, k * x[0]));
        let out = p(lam).apply(&f).unwrap();
        let mut expected = f.clone();
        expected.scale(C64::new(bump(k / lam), 0.0));
        assert!(out.max_abs_diff(&expected) < 1e-12, "λ = {lam}");
    }
}

#[test]
fn p_one_is_inhomogeneous() {
    let g = grid(1, 64, 2, 1.0);
    let one = Field::from_fn(&g, |_| C64::new(1.0, 0.0));
    let out = p(1.0).apply(&one).unwrap();
    assert!(out.max_abs_diff(&one) < 1e-12);
    let two = Field::from_fn(&g, |x| C64::from_polar(1.0, 2.0 * x[0]));
    assert!(p(1.0).apply(&two).unwrap().l2_norm() < 1e-12);
}

#[test]
fn littlewood_paley_pieces_sum_to_band_limited_data() {
    let g = grid(2, 64, 2, 1.0);
    let f = gaussian_band(&g, 0.0, 15.0, &mut rng_for(1, 0));
    let mut acc = Field::zeros(&g, Repr::Spectral);
    for lam in g.dyadic_scales() {
        acc.axpy(C64::new(1.0, 0.0), &p(lam).apply(&f).unwrap())
            .unwrap();
    }
    assert!(acc.max_abs_diff(&f) < 1e-12 * f.l2_norm());
}

#[test]
fn near_and_far_parts_recombine() {
    let g = grid(2, 32, 64, PI);
    let u = random_spacetime(&g, 3);
    for margin in [4.0, 256.0] {
        for lam in [2.0, 4.0, 8.0] {
            let pn = MultiplierSymbol::pn(lam, margin)
                .unwrap()
                .apply_spacetime(&u)
                .unwrap();
            let pf = MultiplierSymbol::pf(lam, margin)
                .unwrap()
                .apply_spacetime(&u)
                .unwrap();
            let pl = p(lam).apply_spacetime(&u).unwrap();
            let mut sum = pn.clone();
            sum.axpy(C64::new(1.0, 0.0), &pf).unwrap();
            assert!(max_diff(&sum, &pl) < 1e-12, "λ = {lam}, margin {margin}");
            assert!(pn.l2_norm() <= u.l2_norm());
        }
    }
}

#[test]
fn distant_blocks_are_orthogonal_on_the_lattice() {
    let g = grid(2, 128, 2, 1.0);
    let f = gaussian_band(&g, 0.0, 63.0, &mut rng_for(2, 0));
    let scales = g.dyadic_scales();
    for &l in &scales {
        for &m in &scales {
            let ratio = l / m;
            if [0.5, 1.0, 2.0].contains(&ratio) {
                continue;
            }
            let out = p(l).apply(&p(m).apply(&f).unwrap()).unwrap();
            assert_eq!(out.l2_norm(), 0.0, "P[{l}] P[{m}]");
        }
    }
}

#[test]
fn temporal_weight_on_single_temporal_mode() {
    let g = grid(1, 16, 64, 2.0 * PI);
    let tau = 5.0;
    let u = SpacetimeField::from_fn(&g, |t, _| C64::from_polar(1.0, tau * t));
    for (a, lam) in [(0.5, 4.0), (-0.5, 2.0), (1.0, 8.0)] {
        let w = temporal_weight_apply(a, lam, &u);
        let mut expected = u.clone();
        expected.scale(C64::new((lam + tau).powf(a), 0.0));
        assert!(max_diff(&w, &expected) < 1e-12, "a = {a}");
        let r = ratio_weight_apply(a, lam, &u);
        let mut expected = u.clone();
        expected.scale(C64::new(((lam + tau) / (lam * lam + tau)).powf(a), 0.0));
        assert!(max_diff(&r, &expected) < 1e-12, "a = {a}");
    }
    assert!(max_diff(&temporal_weight_apply(0.0, 4.0, &u), &u) < 1e-14);
}

#[test]
fn temporal_weight_of_a_free_wave_sits_at_lambda_squared() {
    let g = grid(2, 64, 32, PI);
    for lam in [2.0, 4.0, 8.0, 16.0] {
        // |ξ| = 1.5 λ along an axis
        let k = 1.5 * lam;
        let f = Field::from_fn(&g, |x| C64::from_polar(1.0, k * x[0]));
        let u = free_schrodinger_spacetime(&f, &g);
        for a in [0.25, 0.5, 1.0] {
            let ratio =
                temporal_weight_apply(a, lam, &u).l2_norm() / (lam.powf(2.0 * a) * u.l2_norm());
            let oracle = ((lam + k * k) / (lam * lam)).powf(a);
            assert!((ratio - oracle).abs() < 1e-10 * oracle, "λ {lam} a {a}");
            assert!(ratio >= 2f64.powf(-2.0 * a) && ratio <= 2f64.powf(2.0 * a) * 2.0);
        }
    }
}

#[test]
fn frames_agree_on_resolved_data() {
    // a slow signal is resolved in every frame, so C_μ does not depend on it
    let g = grid(1, 16, 128, 2.0 * PI);
    let u = SpacetimeField::from_fn(&g, |t, x| {
        C64::from_polar(1.0, x[0] - t) + C64::from_polar(0.5, 2.0 * x[0] - 4.0 * t)
    });
    let c = MultiplierSymbol::CLe(DyadicScale::new(2.0).unwrap());
    let lab = c.apply_spacetime_in(&u, Frame::Lab).unwrap();
    let sch = c.apply_spacetime_in(&u, Frame::Schrodinger).unwrap();
    assert!(max_diff(&lab, &sch) < 1e-10);
}

#[test]
fn symbols_are_bounded_and_weights_positive() {
    use MultiplierSymbol::*;
    let s = |e| DyadicScale::pow2(e);
    let projections = [
        P(s(3)),
        PLe(s(2)),
        Pt(s(4)),
        PtLe(s(1)),
        C(s(5)),
        CLe(s(3)),
        CGt(s(3)),
        MultiplierSymbol::pn(8.0, 4.0).unwrap(),
        MultiplierSymbol::pf(8.0, 4.0).unwrap(),
    ];
    for i in 0..200 {
        for j in 0..50 {
            let omega = -300.0 + 3.0 * i as f64;
            let xi = 0.7 * j as f64;
            for p in &projections {
                let v = p.eval(omega, xi);
                assert!((0.0..=1.0).contains(&v), "{p} at ({omega}, {xi}) = {v}");
            }
            assert!(
                TemporalWeight {
                    a: 0.5,
                    lambda: 4.0
                }
                .eval(omega, xi)
                    > 0.0
            );
            assert!(
                RatioWeight {
                    a: -0.5,
                    lambda: 4.0
                }
                .eval(omega, xi)
                    > 0.0
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_of_unity(r in 1e-6f64..1e6) {
        let sum: f64 = (-40..=40).map(|k| bump(r / 2f64.powi(k))).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bump_support(r in 0.0f64..10.0) {
        let v = bump(r);
        prop_assert!((0.0..=1.0).contains(&v));
        if !(r > 0.5 && r < 2.0) {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn projections_never_increase_the_norm(seed in 0u64..1000, e in 0i32..4) {
        let g = grid(1, 64, 16, PI);
        let u = random_spacetime(&g, seed);
        let lam = 2f64.powi(e);
        for sym in [p(lam), MultiplierSymbol::pn(lam, 4.0).unwrap(), MultiplierSymbol::C(DyadicScale::pow2(e))] {
            prop_assert!(sym.apply_spacetime(&u).unwrap().l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
        }
    }
}
