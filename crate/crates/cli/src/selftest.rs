//! Quick checks of the defining identities of every module.

use std::f64::consts::PI;
use std::sync::Arc;

use zakharov::evolution::duhamel_i0;
use zakharov::evolution::energy::{energy, first_order_transform, inverse_first_order};
use zakharov::evolution::picard::picard_solve;
use zakharov::evolution::propagate::{free_schrodinger, free_schrodinger_spacetime};
use zakharov::evolution::{splitstep_evolve, PicardConfig, SplitStepOptions, ZakharovState};
use zakharov::illposed::{classify_region, growth_exponent, RegPoint};
use zakharov::multipliers::{bump, DyadicScale, MultiplierSymbol};
use zakharov::norms::{adapted_norm, sobolev_norm, Family, NormSettings, NormSpec};
use zakharov::random::{gaussian_band, real_gaussian_band, rng_for};
use zakharov::stress::{run_stress, Inequality, StressConfig};
use zakharov::{make_grid, Field, Repr, SpacetimeField, C64};

use crate::commands::Failure;

struct Tally {
    failed: usize,
    total: usize,
}

impl Tally {
    fn check(&mut self, name: &str, ok: bool) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run() -> Result<(), Failure> {
    let mut t = Tally {
        failed: 0,
        total: 0,
    };
    grid_checks(&mut t);
    multiplier_checks(&mut t);
    norm_checks(&mut t);
    evolution_checks(&mut t);
    illposed_checks(&mut t);
    stress_checks(&mut t);
    println!("{}/{} checks passed", t.total - t.failed, t.total);
    if t.failed == 0 {
        Ok(())
    } else {
        Err(Failure::Other(anyhow::anyhow!(
            "{} selftest check(s) failed",
            t.failed
        )))
    }
}

fn grid_checks(t: &mut Tally) {
    let g = make_grid(2, 128, 2.0 * PI, 256, (0.0, 1.0));
    t.check(
        "grid: lambda_max = 32",
        g.map(|g| g.lambda_max() == 32.0).unwrap_or(false),
    );
    t.check(
        "grid: n = 24 rejected",
        make_grid(4, 24, 2.0 * PI, 16, (0.0, 1.0)).is_err(),
    );
    let g = make_grid(1, 4096, 64.0 * PI, 1024, (0.0, 1.0));
    t.check(
        "grid: xi spacing 1/32",
        g.map(|g| (g.xi_step() - 1.0 / 32.0).abs() < 1e-15)
            .unwrap_or(false),
    );
    let g = Arc::new(make_grid(2, 16, 2.0 * PI, 8, (0.0, 1.0)).unwrap());
    let one = Field::from_fn(&g, |_| C64::new(1.0, 0.0)).into_repr(Repr::Spectral);
    let off: f64 = one.data()[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
    t.check("grid: constant field on the zero mode", off < 1e-12);
    let f = gaussian_band(&g, 0.0, 6.0, &mut rng_for(1, 0));
    let back = f.to_repr(Repr::Physical).into_repr(Repr::Spectral);
    t.check(
        "grid: round trip",
        back.max_abs_diff(&f) < 1e-12 * f.l2_norm(),
    );
}

fn multiplier_checks(t: &mut Tally) {
    t.check("multipliers: bump(0.4) = 0", bump(0.4) == 0.0);
    let sum: f64 = (-20..=20).map(|k| bump(1.37 / 2f64.powi(k))).sum();
    t.check("multipliers: partition of unity", (sum - 1.0).abs() < 1e-12);
    let g = Arc::new(make_grid(2, 64, 2.0 * PI, 8, (0.0, 1.0)).unwrap());
    let f = gaussian_band(&g, 0.0, 15.0, &mut rng_for(2, 0));
    let mut acc = Field::zeros(&g, Repr::Spectral);
    let mut lam = 1.0;
    while lam <= g.lambda_max() {
        let p = MultiplierSymbol::P(DyadicScale::new(lam).unwrap())
            .apply(&f)
            .unwrap();
        acc.axpy(C64::new(1.0, 0.0), &p.into_repr(Repr::Spectral))
            .unwrap();
        lam *= 2.0;
    }
    t.check(
        "multipliers: sum of P_lambda",
        acc.max_abs_diff(&f) < 1e-12 * f.l2_norm(),
    );
}

fn norm_checks(t: &mut Tally) {
    let g = Arc::new(make_grid(2, 16, 2.0 * PI, 8, (0.0, 1.0)).unwrap());
    let k = [3.0, 0.0];
    let f = Field::from_fn(&g, |x| C64::from_polar(2.0, k[0] * x[0] + k[1] * x[1]));
    let expected = 2.0 * (1.0f64 + 9.0).powf(0.25) * 2.0 * PI;
    t.check(
        "norms: single-mode H^s",
        rel(sobolev_norm(&f, 0.5), expected) < 1e-12,
    );
    let g = Arc::new(make_grid(2, 32, 2.0 * PI, 32, (0.0, PI)).unwrap());
    let f = Field::from_fn(&g, |x| C64::from_polar(1.0, 4.0 * x[0] + 3.0 * x[1]));
    let u = free_schrodinger_spacetime(&f, &g);
    let spec = NormSpec::new(Family::S {
        s: 0.0,
        a: 0.0,
        b: 0.0,
    })
    .block(4.0);
    let terms = adapted_norm(&u, &spec, &NormSettings::default())
        .ok()
        .and_then(|r| Some((r.term(4.0, 0)?, r.term(4.0, 2)?)));
    t.check(
        "norms: free wave has no modulation term",
        matches!(terms, Some((first, third)) if third <= 1e-12 * first),
    );
    let full = NormSpec::new(Family::S {
        s: 0.0,
        a: 0.0,
        b: 0.0,
    });
    let a = adapted_norm(&u, &full, &NormSettings::default()).map(|r| r.value);
    let b =
        adapted_norm(&u, &full.clone().on(g.t_span()), &NormSettings::default()).map(|r| r.value);
    t.check(
        "norms: restriction to the whole span",
        matches!((a, b), (Ok(a), Ok(b)) if rel(b, a) < 1e-12),
    );
}

fn evolution_checks(t: &mut Tally) {
    let g = Arc::new(make_grid(2, 16, 2.0 * PI, 16, (0.0, 1.0)).unwrap());
    let f = gaussian_band(&g, 0.0, 5.0, &mut rng_for(3, 0));
    t.check(
        "evolution: e^{0 i Delta} = id",
        free_schrodinger(&f, 0.0).max_abs_diff(&f) == 0.0,
    );
    let two = free_schrodinger(&free_schrodinger(&f, 0.3), 0.4);
    t.check(
        "evolution: group property",
        two.max_abs_diff(&free_schrodinger(&f, 0.7)) < 1e-12 * f.l2_norm(),
    );
    let zero = SpacetimeField::zeros(&g, Repr::Physical, Repr::Spectral);
    t.check(
        "evolution: Duhamel of zero",
        duhamel_i0(&zero)
            .map(|w| w.l2_norm() == 0.0)
            .unwrap_or(false),
    );
    let z = Field::zeros(&g, Repr::Spectral);
    let sol = picard_solve(&z, &z, &g, &PicardConfig::default());
    t.check(
        "evolution: Picard on zero data converges in one step",
        matches!(sol, Ok(s) if s.iters == 1 && s.u.l2_norm() == 0.0),
    );
    let state = ZakharovState {
        t: 0.0,
        u: z.clone(),
        v: z.clone(),
    };
    let traj = splitstep_evolve(&state, 1e-3, 10, SplitStepOptions::default());
    t.check(
        "evolution: zero data stays zero",
        matches!(traj, Ok(tr) if tr.states.iter().all(|s| s.u.l2_norm() == 0.0 && s.v.l2_norm() == 0.0)),
    );
    let e = energy(&z, &z);
    t.check(
        "evolution: zero energy",
        e.zakharov == 0.0 && e.schrodinger == 0.0 && e.remainder == 0.0,
    );
    let v = real_gaussian_band(&g, 1.0, 5.0, &mut rng_for(3, 1));
    let vt = real_gaussian_band(&g, 1.0, 5.0, &mut rng_for(3, 2));
    let u = gaussian_band(&g, 0.0, 5.0, &mut rng_for(3, 3));
    let big = first_order_transform(&v, &vt).unwrap();
    t.check(
        "evolution: energy identity",
        energy(&u, &big).identity_defect().abs() < 1e-10,
    );
    let (v2, vt2) = inverse_first_order(&big);
    t.check(
        "evolution: first-order round trip",
        v2.max_abs_diff(&v.to_repr(Repr::Physical)) < 1e-12
            && vt2.max_abs_diff(&vt.to_repr(Repr::Physical)) < 1e-12,
    );
}

fn illposed_checks(t: &mut Tally) {
    let lams = [16.0, 32.0, 64.0, 128.0];
    let sq: Vec<f64> = lams.iter().map(|l| l * l).collect();
    t.check(
        "illposed: slope of lambda^2",
        growth_exponent(&lams, &sq)
            .map(|g| (g.slope - 2.0).abs() < 1e-12)
            .unwrap_or(false),
    );
    t.check(
        "illposed: (4; 1, 0) admissible",
        classify_region(RegPoint::new(4, 1.0, 0.0)).label() == "admissible",
    );
    t.check(
        "illposed: (4; 0.4, 0) inadmissible",
        classify_region(RegPoint::new(4, 0.4, 0.0)).label() == "inadmissible",
    );
}

fn stress_checks(t: &mut Tally) {
    let mut cfg = StressConfig::new(Inequality::Product);
    cfg.a = 0.0;
    cfg.samples = 4;
    cfg.scales = vec![2.0, 4.0];
    let r = run_stress(&cfg);
    t.check(
        "stress: a = 0 product is Hoelder",
        matches!(&r, Ok(r) if r.records.iter().all(|x| x.ratio <= 1.0 + 1e-10)),
    );
    let mut cfg = StressConfig::new(Inequality::EnergySchrodinger);
    cfg.samples = 2;
    cfg.scales = vec![4.0];
    let a = run_stress(&cfg);
    cfg.amplitude = 2.0;
    let b = run_stress(&cfg);
    let same = match (a, b) {
        (Ok(a), Ok(b)) => a
            .records
            .iter()
            .zip(&b.records)
            .all(|(x, y)| rel(y.ratio, x.ratio) < 1e-12 && rel(y.lhs, 2.0 * x.lhs) < 1e-12),
        _ => false,
    };
    t.check("stress: homogeneity", same);
}
