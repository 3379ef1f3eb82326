use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use zakharov::evolution::energy::FirstOrderError;
use zakharov::evolution::ground_state::{ground_state_profile, ground_state_wave};
use zakharov::evolution::picard::{PicardData, PicardError};
use zakharov::evolution::propagate::{free_halfwave_spacetime, free_schrodinger_spacetime};
use zakharov::evolution::{
    duhamel_i0, duhamel_j0, energy, first_order_transform, free_halfwave, free_schrodinger,
    inverse_first_order, mass, picard_solve, scattering_diagnostic, splitstep_evolve,
    static_ground_state, DuhamelOptions, PicardConfig, SplitStepOptions, ZakharovState,
};
use zakharov::random::{gaussian_band, normalized, real_gaussian_band, rng_for};
use zakharov::{make_grid, Field, Grid, Repr, SpacetimeField, C64};

fn grid(d: usize, n: usize, nt: usize, t1: f64) -> Arc<Grid> {
    Arc::new(make_grid(d, n, 2.0 * PI, nt, (0.0, t1)).unwrap())
}

fn st_diff(a: &SpacetimeField, b: &SpacetimeField) -> f64 {
    let b = b.to_repr(a.time_repr(), a.space_repr());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn small_state(g: &Arc<Grid>, seed: u64, amp: f64) -> ZakharovState {
    let u = normalized(gaussian_band(g, 0.0, 4.0, &mut rng_for(seed, 0)), amp);
    let v = normalized(real_gaussian_band(g, 1.0, 4.0, &mut rng_for(seed, 1)), amp);
    let vt = normalized(real_gaussian_band(g, 1.0, 4.0, &mut rng_for(seed, 2)), amp);
    ZakharovState {
        t: 0.0,
        u,
        v: first_order_transform(&v, &vt).unwrap(),
    }
}

#[test]
fn free_flows_on_single_modes() {
    let g = grid(2, 32, 2, 1.0);
    let k = [3.0, -2.0];
    let f = Field::from_fn(&g, |x| C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
    for t in [0.0, 0.3, 1.7] {
        let mut expect = f.clone();
        expect.scale(C64::from_polar(1.0, -t * 13.0));
        assert!(free_schrodinger(&f, t).max_abs_diff(&expect) < 1e-12);
        let mut expect = f.clone();
        expect.scale(C64::from_polar(1.0, t * 13f64.sqrt()));
        assert!(free_halfwave(&f, t).max_abs_diff(&expect) < 1e-12);
    }
    assert!(free_schrodinger(&f, 0.0).max_abs_diff(&f) < 1e-14);
}

#[test]
fn group_property() {
    let g = grid(2, 32, 2, 1.0);
    let f = gaussian_band(&g, 0.0, 15.0, &mut rng_for(4, 0));
    let two = free_schrodinger(&free_schrodinger(&f, 0.37), 1.21);
    assert!(two.max_abs_diff(&free_schrodinger(&f, 1.58)) < 1e-12 * f.l2_norm());
    let two = free_halfwave(&free_halfwave(&f, -0.5), 2.0);
    assert!(two.max_abs_diff(&free_halfwave(&f, 1.5)) < 1e-12 * f.l2_norm());
}

#[test]
fn duhamel_of_a_free_wave_is_linear_in_time() {
    let g = grid(2, 16, 32, 1.0);
    let h = gaussian_band(&g, 0.0, 6.0, &mut rng_for(5, 0));
    let f = free_schrodinger_spacetime(&h, &g);
    let w = duhamel_i0(&f).unwrap();
    let times = g.times();
    let mut expect = f.clone();
    let m = g.spatial_len();
    for (j, t) in times.iter().enumerate() {
        for z in &mut expect.data_mut()[j * m..(j + 1) * m] {
            *z *= C64::new(0.0, -t);
        }
    }
    assert!(st_diff(&w, &expect) < 1e-12 * h.l2_norm());

    let zero = SpacetimeField::zeros(&g, Repr::Physical, Repr::Physical);
    assert_eq!(duhamel_i0(&zero).unwrap().l2_norm(), 0.0);
    assert_eq!(duhamel_j0(&zero).unwrap().l2_norm(), 0.0);
}

/// Composite Simpson on `[0, t]` with `2k` panels.
fn simpson(f: impl Fn(f64) -> C64, t: f64, k: usize) -> C64 {
    if t == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let n = 2 * k;
    let h = t / n as f64;
    let mut acc = f(0.0) + f(t);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

#[test]
fn duhamel_matches_oversampled_quadrature() {
    let nt = 256;
    let g = grid(1, 16, nt, 1.0);
    let k0 = 2.0;
    let c = |s: f64| C64::new((3.0 * s).cos(), (1.3 * s).sin().powi(2));
    let forcing = SpacetimeField::from_fn(&g, |t, x| c(t) * C64::from_polar(1.0, k0 * x[0]));
    let times = g.times();
    let idx = g.index_of(&[2]);
    for (frame_rate, w) in [
        (-k0 * k0, duhamel_i0(&forcing).unwrap()),
        (k0, duhamel_j0(&forcing).unwrap()),
    ] {
        let amp = forcing.to_repr(Repr::Physical, Repr::Spectral).data()[idx] / c(0.0);
        let w = w.to_repr(Repr::Physical, Repr::Spectral);
        for (j, &t) in times.iter().enumerate().step_by(17) {
            // the phase of mode ξ under the flow is e^{i rate (t - s)}
            let oracle = simpson(
                |s| C64::from_polar(1.0, frame_rate * (t - s)) * c(s),
                t,
                8 * j.max(1),
            ) * C64::new(0.0, -1.0)
                * amp;
            let got = w.data()[j * g.spatial_len() + idx];
            assert!((got - oracle).norm() < 1e-8 * amp.norm(), "t = {t}");
        }
    }
}

#[test]
fn duhamel_base_point_must_be_on_the_lattice() {
    let g = Arc::new(make_grid(1, 16, 2.0 * PI, 16, (0.3, 1.3)).unwrap());
    let f = SpacetimeField::zeros(&g, Repr::Physical, Repr::Physical);
    assert!(duhamel_i0(&f).is_err());
    let opts = DuhamelOptions {
        base: zakharov::evolution::BasePoint::Index(0),
        ..Default::default()
    };
    assert!(
        zakharov::evolution::duhamel(&f, zakharov::multipliers::Frame::Schrodinger, opts).is_ok()
    );
}

#[test]
fn picard_on_zero_data() {
    let g = grid(2, 16, 16, 0.5);
    let z = Field::zeros(&g, Repr::Spectral);
    let sol = picard_solve(&z, &z, &g, &PicardConfig::default()).unwrap();
    assert_eq!(sol.iters, 1);
    assert_eq!(sol.u.l2_norm(), 0.0);
    assert_eq!(sol.v.l2_norm(), 0.0);
}

fn hand_correction(f: &Field, g: &Arc<Grid>) -> SpacetimeField {
    let psi = free_schrodinger_spacetime(f, g);
    let phys = psi.to_repr(Repr::Physical, Repr::Physical);
    let dens: Vec<C64> = phys
        .data()
        .iter()
        .map(|z| C64::new(z.norm_sqr(), 0.0))
        .collect();
    let mut dens = SpacetimeField::from_vec(g, dens, Repr::Physical, Repr::Physical)
        .unwrap()
        .into_repr(Repr::Physical, Repr::Spectral);
    let m = g.spatial_len();
    for (i, z) in dens.data_mut().iter_mut().enumerate() {
        *z *= g.xi_sq(i % m).sqrt();
    }
    let j = duhamel_j0(&dens)
        .unwrap()
        .into_repr(Repr::Physical, Repr::Physical);
    let prod: Vec<C64> = j
        .data()
        .iter()
        .zip(phys.data())
        .map(|(v, p)| p * (-v.re))
        .collect();
    let prod = SpacetimeField::from_vec(g, prod, Repr::Physical, Repr::Physical).unwrap();
    duhamel_i0(&prod).unwrap()
}

#[test]
fn first_picard_correction_matches_hand_composition() {
    let g = grid(2, 16, 32, 0.5);
    let zero = Field::zeros(&g, Repr::Spectral);
    let single = Field::from_fn(&g, |x| C64::from_polar(0.01, 2.0 * x[0] + x[1]));
    let pair = {
        let mut p = single.clone();
        p.axpy(
            C64::new(1.0, 0.0),
            &Field::from_fn(&g, |x| C64::from_polar(0.005, -x[0] + 3.0 * x[1])),
        )
        .unwrap();
        p
    };
    for (f, trivial) in [(single, true), (pair, false)] {
        let data = PicardData::new(&f, &zero, &g, DuhamelOptions::default());
        let psi0 = free_schrodinger_spacetime(&f, &g);
        let (next, _) = data.phi(&psi0).unwrap();
        let mut correction = next.clone();
        correction.axpy(C64::new(-1.0, 0.0), &psi0).unwrap();
        let oracle = hand_correction(&f, &g);
        let peak = oracle.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if trivial {
            // |ψ0|² is constant for one mode, so |∇| kills it
            let size = psi0.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(peak < 1e-14 * size);
            continue;
        }
        let err = st_diff(&correction, &oracle);
        assert!(err < 1e-10 * peak, "{err} vs {peak}");
    }
}

#[test]
fn picard_contracts_for_small_data() {
    let g = grid(2, 32, 64, 0.5);
    let f = normalized(gaussian_band(&g, 1.0, 4.0, &mut rng_for(8, 0)), 0.005);
    let gg = normalized(gaussian_band(&g, 1.0, 4.0, &mut rng_for(8, 1)), 0.005);
    let sol = picard_solve(&f, &gg, &g, &PicardConfig::default()).unwrap();
    assert!((sol.gate - 0.01).abs() < 1e-12);
    assert!(sol.contraction_history.iter().all(|&r| r < 0.5));
}

#[test]
fn picard_refuses_large_data_unless_asked() {
    let g = grid(2, 16, 16, 0.5);
    let f = normalized(gaussian_band(&g, 1.0, 4.0, &mut rng_for(1, 0)), 1.0);
    let e = picard_solve(&f, &f, &g, &PicardConfig::default()).unwrap_err();
    assert!(matches!(e, PicardError::Gate { .. }));
}

#[test]
fn splitstep_keeps_zero_and_tracks_free_flows() {
    let g = grid(2, 32, 2, 1.0);
    let z = Field::zeros(&g, Repr::Spectral);
    let st = ZakharovState {
        t: 0.0,
        u: z.clone(),
        v: z,
    };
    let tr = splitstep_evolve(&st, 1e-3, 20, SplitStepOptions::default()).unwrap();
    assert!(tr
        .states
        .iter()
        .all(|s| s.u.l2_norm() == 0.0 && s.v.l2_norm() == 0.0));

    let st = small_state(&g, 2, 1.0);
    let opts = SplitStepOptions {
        nonlinear: false,
        ..Default::default()
    };
    let tr = splitstep_evolve(&st, 1e-2, 50, opts).unwrap();
    let last = tr.states.last().unwrap();
    assert!(last.u.max_abs_diff(&free_schrodinger(&st.u, 0.5)) < 1e-12);
    assert!(last.v.max_abs_diff(&free_halfwave(&st.v, 0.5)) < 1e-12);
}

#[test]
fn splitstep_conserves_mass() {
    let g = grid(2, 64, 2, 1.0);
    let st = small_state(&g, 3, 0.5);
    let tr = splitstep_evolve(
        &st,
        1e-3,
        1000,
        SplitStepOptions {
            sample_every: 100,
            keep_states: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(tr.mass_drift() < 1e-10);
    assert!(!tr.cfl_warning);
}

fn roll(f: &Field, shift: usize) -> Field {
    let g = f.grid();
    let n = g.n();
    let p = f.to_repr(Repr::Physical);
    let mut out = p.clone();
    for (i, z) in out.data_mut().iter_mut().enumerate() {
        // last axis is contiguous
        let (row, col) = (i / n, i % n);
        *z = p.data()[row * n + (col + n - shift) % n];
    }
    out
}

#[test]
fn splitstep_is_translation_and_gauge_equivariant() {
    let g = grid(2, 32, 2, 1.0);
    let st = small_state(&g, 6, 1.0);
    let opts = SplitStepOptions {
        sample_every: 100,
        ..Default::default()
    };
    let base = splitstep_evolve(&st, 1e-3, 100, opts).unwrap();
    let shifted = ZakharovState {
        t: 0.0,
        u: roll(&st.u, 5),
        v: roll(&st.v, 5),
    };
    let moved = splitstep_evolve(&shifted, 1e-3, 100, opts).unwrap();
    let (a, b) = (base.states.last().unwrap(), moved.states.last().unwrap());
    assert!(roll(&a.u, 5).max_abs_diff(&b.u) < 1e-12);
    assert!(roll(&a.v, 5).max_abs_diff(&b.v) < 1e-12);

    let mut turned = st.clone();
    turned.u.scale(C64::from_polar(1.0, 0.8));
    let gauge = splitstep_evolve(&turned, 1e-3, 100, opts).unwrap();
    let mut expect = a.u.clone();
    expect.scale(C64::from_polar(1.0, 0.8));
    assert!(gauge.states.last().unwrap().u.max_abs_diff(&expect) < 1e-12);
}

#[test]
fn energy_examples() {
    let g = grid(2, 32, 2, 1.0);
    let z = Field::zeros(&g, Repr::Spectral);
    let e = energy(&z, &z);
    assert_eq!((e.zakharov, e.schrodinger, e.remainder), (0.0, 0.0, 0.0));

    let u = normalized(gaussian_band(&g, 0.0, 6.0, &mut rng_for(7, 0)), 2.0);
    let p = u.to_repr(Repr::Physical);
    let v: Vec<C64> = p
        .data()
        .iter()
        .map(|z| C64::new(-z.norm_sqr(), 0.0))
        .collect();
    let v = Field::from_vec(&g, v, Repr::Physical).unwrap();
    let e = energy(&u, &v);
    assert!(e.remainder.abs() < 1e-14 * e.zakharov.abs().max(1.0));
    assert!((e.zakharov - e.schrodinger).abs() < 1e-12 * e.zakharov.abs().max(1.0));

    for seed in 0..20 {
        let st = small_state(&g, 100 + seed, 3.0);
        assert!(energy(&st.u, &st.v).identity_defect().abs() < 1e-10);
    }
    assert!(mass(&u) > 0.0);
}

#[test]
fn first_order_transform_examples() {
    let g = grid(2, 32, 2, 1.0);
    let v = real_gaussian_band(&g, 1.0, 6.0, &mut rng_for(1, 0));
    let zero = Field::zeros(&g, Repr::Physical);
    let big = first_order_transform(&v, &zero).unwrap();
    assert!(big
        .to_repr(Repr::Physical)
        .data()
        .iter()
        .all(|z| z.im.abs() < 1e-14));
    assert!(big.max_abs_diff(&v) < 1e-12);

    let k = [3.0, 4.0];
    let vt = Field::from_fn(&g, |x| C64::new((k[0] * x[0] + k[1] * x[1]).cos(), 0.0));
    let big = first_order_transform(&zero, &vt)
        .unwrap()
        .into_repr(Repr::Physical);
    for (z, w) in big.data().iter().zip(vt.data()) {
        assert!((z.im + w.re / 5.0).abs() < 1e-12);
    }
    let (v2, vt2) = inverse_first_order(&big);
    assert!(v2.max_abs_diff(&zero) < 1e-12 && vt2.max_abs_diff(&vt) < 1e-12);

    let one = Field::from_fn(&g, |_| C64::new(1.0, 0.0));
    assert!(matches!(
        first_order_transform(&zero, &one),
        Err(FirstOrderError::NonzeroMean(_))
    ));
}

#[test]
fn ground_state_solves_the_profile_equation_at_the_origin() {
    // fourth-order central differences in each of the four axes
    let h = 1e-3;
    let w = |x: f64| ground_state_profile(x.abs(), 4);
    let second =
        (-w(2.0 * h) + 16.0 * w(h) - 30.0 * w(0.0) + 16.0 * w(-h) - w(-2.0 * h)) / (12.0 * h * h);
    let lap = 4.0 * second;
    assert!((lap + w(0.0).powi(3)).abs() < 1e-8);
    // and along the radius, with the radial Laplacian W'' + 3 W'/r
    for r in [0.5, 1.0, 2.0, 5.0] {
        let w = |x: f64| ground_state_profile(x, 4);
        let d1 = (-w(r + 2.0 * h) + 8.0 * w(r + h) - 8.0 * w(r - h) + w(r - 2.0 * h)) / (12.0 * h);
        let d2 = (-w(r + 2.0 * h) + 16.0 * w(r + h) - 30.0 * w(r) + 16.0 * w(r - h)
            - w(r - 2.0 * h))
            / (12.0 * h * h);
        assert!((d2 + 3.0 * d1 / r + w(r).powi(3)).abs() < 1e-7, "r = {r}");
    }
}

#[test]
fn ground_state_is_four_dimensional_and_static() {
    assert!(static_ground_state(&grid(2, 16, 2, 1.0)).is_err());
    let g = Arc::new(
        zakharov::GridBuilder::new(4, 16)
            .box_length(16.0)
            .time(2, (0.0, 1.0))
            .build()
            .unwrap(),
    );
    let gs = static_ground_state(&g).unwrap();
    let st = ZakharovState {
        t: 0.0,
        u: gs.w.clone(),
        v: ground_state_wave(&gs.w),
    };
    let e = energy(&st.u, &st.v);
    assert!(e.remainder.abs() < 1e-12 * e.zakharov.abs());
    let tr = splitstep_evolve(
        &st,
        1e-3,
        20,
        SplitStepOptions {
            sample_every: 20,
            ..Default::default()
        },
    )
    .unwrap();
    let mut change = tr.states.last().unwrap().u.to_repr(Repr::Physical);
    change.axpy(C64::new(-1.0, 0.0), &gs.w).unwrap();
    // i ∂_t u = -(ΔW + W³) at t = 0
    assert!(change.l2_norm() <= 2.0 * 0.02 * gs.residual);
}

#[test]
fn free_waves_have_no_scattering_increments() {
    let g = grid(2, 32, 32, 1.0);
    let f = gaussian_band(&g, 0.0, 10.0, &mut rng_for(3, 0));
    let u = free_schrodinger_spacetime(&f, &g);
    let c = scattering_diagnostic(&u, 1.0).unwrap();
    assert!(c.increments.iter().all(|&x| x < 1e-12 * f.l2_norm()));
    assert!(
        scattering_diagnostic(&free_halfwave_spacetime(&f, &grid(2, 32, 16, 1.0)), 0.0).is_err()
    );
}

#[test]
fn early_forcing_leaves_a_flat_curve() {
    let g = grid(2, 16, 64, 1.0);
    let h = gaussian_band(&g, 0.0, 6.0, &mut rng_for(4, 0));
    let hs = free_schrodinger_spacetime(&h, &g);
    let m = g.spatial_len();
    let mut forcing = hs.clone();
    for (j, t) in g.times().iter().enumerate() {
        let w = if *t < 0.2 {
            (PI * t / 0.2).sin().powi(2)
        } else {
            0.0
        };
        for z in &mut forcing.data_mut()[j * m..(j + 1) * m] {
            *z *= w;
        }
    }
    let u = duhamel_i0(&forcing).unwrap();
    let c = scattering_diagnostic(&u, 0.0).unwrap();
    let first_zero = g.times().iter().position(|&t| t >= 0.2).unwrap();
    for (k, inc) in c.increments.iter().enumerate() {
        if k > first_zero + 2 {
            assert!(*inc < 1e-14 * h.l2_norm(), "increment {k} = {inc}");
        } else if k > 2 && k + 4 < first_zero {
            assert!(*inc > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_identity_on_random_states(seed in 0u64..100_000, amp in 0.01f64..10.0) {
        let g = grid(1, 64, 2, 1.0);
        let st = small_state(&g, seed, amp);
        let e = energy(&st.u, &st.v);
        prop_assert!(e.identity_defect().abs() <= 1e-10 * (1.0 + e.zakharov.abs()));
    }

    #[test]
    fn first_order_round_trip(seed in 0u64..100_000) {
        let g = grid(2, 16, 2, 1.0);
        let v = real_gaussian_band(&g, 0.0, 6.0, &mut rng_for(seed, 0));
        let vt = real_gaussian_band(&g, 1.0, 6.0, &mut rng_for(seed, 1));
        let (v2, vt2) = inverse_first_order(&first_order_transform(&v, &vt).unwrap());
        prop_assert!(v2.max_abs_diff(&v) < 1e-12);
        prop_assert!(vt2.max_abs_diff(&vt) < 1e-12);
    }
}

#[test]
fn small_data_picard_profiles_settle() {
    let g = Arc::new(
        zakharov::GridBuilder::new(2, 64)
            .box_length(32.0)
            .time(64, (0.0, 2.0))
            .build()
            .unwrap(),
    );
    let bump = |x: &[f64]| (-((x[0] - 16.0).powi(2) + (x[1] - 16.0).powi(2)) / 2.0).exp();
    let f = Field::from_fn(&g, |x| C64::new(0.05 * bump(x), 0.0));
    let w = Field::from_fn(&g, |x| C64::new(0.05 * bump(x) * (x[0] - 16.0), 0.0));
    let sol = picard_solve(&f, &w, &g, &PicardConfig::default()).unwrap();
    let c = scattering_diagnostic(&sol.u, 0.0).unwrap();
    assert!(c.decreasing_late(), "trend {}", c.late_trend);
}
