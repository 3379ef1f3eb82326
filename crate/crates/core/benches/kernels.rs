//! Hot kernels on one thread against the full pool.
//!
//! `cargo bench -p zakharov` compares the rayon pool sizes; build with
//! `--no-default-features` to time the sequential fallback itself.

use std::f64::consts::PI;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use zakharov::evolution::propagate::free_schrodinger_spacetime;
use zakharov::evolution::{
    duhamel_i0, first_order_transform, splitstep_evolve, SplitStepOptions, ZakharovState,
};
use zakharov::illposed::{second_iterate_i_modes, ModeSumOptions, RegPoint};
use zakharov::norms::{adapted_norm, Family, NormSettings, NormSpec};
use zakharov::par::{current_threads, with_threads};
use zakharov::random::{gaussian_band, normalized, real_gaussian_band, rng_for};
use zakharov::{make_grid, Repr};

fn pools() -> Vec<usize> {
    let mut v = vec![1];
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    if n > 1 {
        v.push(n);
    }
    v
}

fn kernels(c: &mut Criterion) {
    let g = Arc::new(make_grid(2, 128, 2.0 * PI, 64, (0.0, 1.0)).unwrap());
    let f = gaussian_band(&g, 0.0, 40.0, &mut rng_for(1, 0));
    let u = free_schrodinger_spacetime(&f, &g);
    let spec = NormSpec::new(Family::S {
        s: 0.5,
        a: 0.25,
        b: 0.0,
    });
    let settings = NormSettings::with_margin(4.0);
    let st = ZakharovState {
        t: 0.0,
        u: normalized(f.clone(), 1.0),
        v: first_order_transform(
            &real_gaussian_band(&g, 1.0, 20.0, &mut rng_for(1, 1)),
            &real_gaussian_band(&g, 1.0, 20.0, &mut rng_for(1, 2)),
        )
        .unwrap(),
    };
    let point = RegPoint::new(2, 0.5, -1.5);

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for threads in pools() {
        group.bench_with_input(
            BenchmarkId::new("spacetime_fft", threads),
            &threads,
            |b, &t| b.iter(|| with_threads(t, || u.to_repr(Repr::Spectral, Repr::Spectral))),
        );
        group.bench_with_input(
            BenchmarkId::new("duhamel_i0", threads),
            &threads,
            |b, &t| b.iter(|| with_threads(t, || duhamel_i0(&u).unwrap())),
        );
        group.bench_with_input(BenchmarkId::new("s_norm", threads), &threads, |b, &t| {
            b.iter(|| with_threads(t, || adapted_norm(&u, &spec, &settings).unwrap().value))
        });
        group.bench_with_input(
            BenchmarkId::new("splitstep_100", threads),
            &threads,
            |b, &t| {
                b.iter(|| {
                    with_threads(t, || {
                        splitstep_evolve(&st, 1e-3, 100, SplitStepOptions::default()).unwrap()
                    })
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("mode_sum_i", threads),
            &threads,
            |b, &t| {
                b.iter(|| {
                    with_threads(t, || {
                        second_iterate_i_modes(64.0, point, 1.0, &ModeSumOptions::default())
                            .unwrap()
                            .norm
                    })
                })
            },
        );
    }
    group.finish();
    eprintln!("default pool: {} thread(s)", current_threads());
}

criterion_group!(benches, kernels);
criterion_main!(benches);
