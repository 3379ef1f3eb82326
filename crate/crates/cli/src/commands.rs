use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde_json::{json, Value};
use zakharov::evolution::picard::{GateMode, PicardError};
use zakharov::evolution::propagate::{free_halfwave_spacetime, free_schrodinger_spacetime};
use zakharov::evolution::splitstep::SplitStepError;
use zakharov::evolution::{
    first_order_transform, picard_solve, splitstep_evolve, PicardConfig, SplitStepOptions,
    ZakharovState,
};
use zakharov::illposed::{
    classify_region, default_exponents, growth_exponent, region_map_csv, sweep, sweep_csv, Iterate,
    ModeSumOptions, RegPoint, RegionClass,
};
use zakharov::io::{self, Dtype, Manifest};
use zakharov::multipliers::Frame;
use zakharov::norms::{adapted_norm, Family, FrameChoice, NormSettings, NormSpec};
use zakharov::random::{gaussian_band, normalized, real_gaussian_band, rng_for};
use zakharov::stress::{run_stress, Ensemble, Inequality, StressConfig, StressError};
use zakharov::{par, Field, Grid, GridBuilder, Repr, SpacetimeField};

use crate::config::Params;
use crate::output::Output;
use crate::Common;

const TWO_PI: &str = "6.283185307179586";

/// Command failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or violated precondition (exit 2).
    Validation(anyhow::Error),
    /// Numerical divergence (exit 3).
    Divergence(anyhow::Error),
    /// Anything else, typically I/O (exit 1).
    Other(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Divergence(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "invalid configuration: {e:#}"),
            Failure::Divergence(e) => write!(f, "numerical divergence: {e:#}"),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Other(e.into())
    }
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Validation(e.into())
}

type Outcome = Result<Value, Failure>;

/// Defaults, then the config file, then flags, then `--set` pairs.
fn params<F>(
    common: &Common,
    command: &str,
    defaults: &[(&'static str, &str)],
    flags: F,
) -> Result<Params, Failure>
where
    F: FnOnce(&mut Params) -> anyhow::Result<()>,
{
    let mut p = Params::with_defaults(defaults);
    if let Some(path) = &common.config {
        p.load_ini(path, command).map_err(invalid)?;
    }
    flags(&mut p).map_err(invalid)?;
    p.set_opt("seed", &common.seed).map_err(invalid)?;
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| invalid(anyhow::anyhow!("--set expects KEY=VALUE, got '{kv}'")))?;
        p.set(k, v).map_err(invalid)?;
    }
    Ok(p)
}

/// Run `body` with the output directory set up, then write the manifest
/// (also on failure).
fn execute<F>(
    common: &Common,
    command: &str,
    p: Params,
    default_out: Option<&str>,
    body: F,
) -> Result<(), Failure>
where
    F: FnOnce(&Params, Option<&mut Output>) -> Outcome + Send,
{
    let manifest = Manifest::new(command, p.values().clone());
    let dir: Option<PathBuf> = common
        .out
        .clone()
        .or_else(|| default_out.map(PathBuf::from));
    let mut out = match &dir {
        Some(d) => Some(Output::create(d, manifest)?),
        None => None,
    };
    let run = || body(&p, out.as_mut());
    let result = match common.threads {
        Some(t) => par::with_threads(t, run),
        None => run(),
    };
    if let Some(mut o) = out {
        match &result {
            Ok(summary) => o.manifest.summary = summary.clone(),
            Err(f) => {
                o.manifest.exit_code = f.code() as i32;
                o.manifest.error = Some(f.to_string());
            }
        }
        o.finish()?;
    }
    result.map(|_| ())
}

fn dtype(p: &Params) -> Result<Dtype, Failure> {
    match p.raw("dtype") {
        "complex64" => Ok(Dtype::Complex64),
        "complex128" => Ok(Dtype::Complex128),
        other => Err(invalid(anyhow::anyhow!(
            "dtype '{other}' (complex64 | complex128)"
        ))),
    }
}

fn grid(p: &Params, nt: usize, t_span: (f64, f64)) -> Result<Arc<Grid>, Failure> {
    let g = GridBuilder::new(p.get("d").map_err(invalid)?, p.get("n").map_err(invalid)?)
        .box_length(p.get("box-length").map_err(invalid)?)
        .time(nt, t_span)
        .build()
        .map_err(invalid)?;
    Ok(Arc::new(g))
}

fn input_path(p: &Params, key: &str) -> Option<PathBuf> {
    let raw = p.raw(key);
    (!raw.is_empty()).then(|| PathBuf::from(raw))
}

fn record_input(out: &mut Option<&mut Output>, path: &Path) -> Result<(), Failure> {
    if let Some(o) = out {
        o.manifest.add_input(path)?;
    }
    Ok(())
}

/// Re-home a spatial field on `grid` (same spatial lattice required).
fn rehome(f: Field, grid: &Arc<Grid>) -> Result<Field, Failure> {
    let fg = f.grid();
    if fg.dim() != grid.dim() || fg.n() != grid.n() || fg.box_length() != grid.box_length() {
        return Err(invalid(anyhow::anyhow!(
            "input field lives on (d={}, n={}, L={}), expected (d={}, n={}, L={})",
            fg.dim(),
            fg.n(),
            fg.box_length(),
            grid.dim(),
            grid.n(),
            grid.box_length()
        )));
    }
    let repr = f.repr();
    Ok(Field::from_vec(grid, f.into_data(), repr).expect("same length"))
}

fn fmt17(x: f64) -> String {
    format!("{x:.17e}")
}

// ---------------------------------------------------------------- solve

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    sample_every: Option<usize>,
    /// `false` evolves the free flows.
    #[arg(long)]
    nonlinear: Option<bool>,
    /// `L²` norm of the random Schrödinger datum.
    #[arg(long)]
    amplitude: Option<f64>,
    /// `L²` norm of each random wave datum `v`, `∂_t v`.
    #[arg(long)]
    wave_amplitude: Option<f64>,
    #[arg(long)]
    band_lo: Option<f64>,
    #[arg(long)]
    band_hi: Option<f64>,
    /// Field file for `u(0)` (otherwise random).
    #[arg(long)]
    input_u: Option<PathBuf>,
    /// Field file for `V(0)` (otherwise random).
    #[arg(long)]
    input_v: Option<PathBuf>,
    #[arg(long)]
    dtype: Option<String>,
    #[command(flatten)]
    common: Common,
}

pub fn solve(a: SolveArgs) -> Result<(), Failure> {
    let p = params(
        &a.common,
        "solve",
        &[
            ("d", "2"),
            ("n", "64"),
            ("box-length", TWO_PI),
            ("dt", "0.001"),
            ("steps", "1000"),
            ("sample-every", "10"),
            ("nonlinear", "true"),
            ("amplitude", "0.1"),
            ("wave-amplitude", "0.1"),
            ("band-lo", "1"),
            ("band-hi", "4"),
            ("input-u", ""),
            ("input-v", ""),
            ("dtype", "complex128"),
            ("seed", "0"),
        ],
        |p| {
            p.set_opt("d", &a.d)?;
            p.set_opt("n", &a.n)?;
            p.set_opt("box-length", &a.box_length)?;
            p.set_opt("dt", &a.dt)?;
            p.set_opt("steps", &a.steps)?;
            p.set_opt("sample-every", &a.sample_every)?;
            p.set_opt("nonlinear", &a.nonlinear)?;
            p.set_opt("amplitude", &a.amplitude)?;
            p.set_opt("wave-amplitude", &a.wave_amplitude)?;
            p.set_opt("band-lo", &a.band_lo)?;
            p.set_opt("band-hi", &a.band_hi)?;
            p.set_opt("input-u", &a.input_u.as_ref().map(|x| x.display()))?;
            p.set_opt("input-v", &a.input_v.as_ref().map(|x| x.display()))?;
            p.set_opt("dtype", &a.dtype)
        },
    )?;
    execute(&a.common, "solve", p, Some("zakharov-out"), |p, mut out| {
        let dt: f64 = p.get("dt").map_err(invalid)?;
        let steps: usize = p.get("steps").map_err(invalid)?;
        let every: usize = p.get("sample-every").map_err(invalid)?;
        let nonlinear = p.flag("nonlinear").map_err(invalid)?;
        let dtype = dtype(p)?;
        let seed: u64 = p.get("seed").map_err(invalid)?;
        let (lo, hi): (f64, f64) = (
            p.get("band-lo").map_err(invalid)?,
            p.get("band-hi").map_err(invalid)?,
        );
        if !(dt > 0.0 && dt.is_finite()) || steps == 0 {
            return Err(invalid(anyhow::anyhow!("dt > 0 and steps >= 1 required")));
        }
        let g = grid(p, 2, (0.0, 1.0))?;
        let u = match input_path(p, "input-u") {
            Some(path) => {
                record_input(&mut out, &path)?;
                rehome(io::read_field(&path)?, &g)?
            }
            None => normalized(
                gaussian_band(&g, lo, hi, &mut rng_for(seed, 0)),
                p.get("amplitude").map_err(invalid)?,
            ),
        };
        let v = match input_path(p, "input-v") {
            Some(path) => {
                record_input(&mut out, &path)?;
                rehome(io::read_field(&path)?, &g)?
            }
            None => {
                let w: f64 = p.get("wave-amplitude").map_err(invalid)?;
                let lo = lo.max(1.0);
                let v = normalized(real_gaussian_band(&g, lo, hi, &mut rng_for(seed, 1)), w);
                let vt = normalized(real_gaussian_band(&g, lo, hi, &mut rng_for(seed, 2)), w);
                first_order_transform(&v, &vt).map_err(invalid)?
            }
        };
        let state = ZakharovState { t: 0.0, u, v };
        let opts = SplitStepOptions {
            nonlinear,
            sample_every: every.max(1),
            keep_states: true,
        };
        let traj = splitstep_evolve(&state, dt, steps, opts).map_err(|e| match e {
            SplitStepError::NonFinite { .. } => Failure::Divergence(e.into()),
            other => invalid(other),
        })?;
        let mut csv = String::from("t,mass,energy_zakharov,energy_schrodinger,remainder\n");
        for s in &traj.samples {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt17(s.t),
                fmt17(s.mass),
                fmt17(s.energy.zakharov),
                fmt17(s.energy.schrodinger),
                fmt17(s.energy.remainder)
            ));
        }
        let last = traj.states.last().expect("final state is recorded");
        if let Some(o) = out {
            o.csv("trajectory.csv", &csv)?;
            o.field("u_final.zkf", &last.u.to_repr(Repr::Physical), dtype)?;
            o.field("v_final.zkf", &last.v.to_repr(Repr::Physical), dtype)?;
        }
        Ok(json!({
            "steps": steps,
            "t_final": last.t,
            "mass_drift": traj.mass_drift(),
            "energy_drift": traj.energy_drift(),
            "cfl_warning": traj.cfl_warning,
        }))
    })
}

// ---------------------------------------------------------------- picard

#[derive(Args, Debug)]
pub struct PicardArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
    /// End of the time interval `[0, t1)`.
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gate_s: Option<f64>,
    #[arg(long)]
    gate_l: Option<f64>,
    /// `enforce` or `warn`.
    #[arg(long)]
    gate_mode: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// `L²` norm of each random datum.
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    band_lo: Option<f64>,
    #[arg(long)]
    band_hi: Option<f64>,
    #[arg(long)]
    input_f: Option<PathBuf>,
    #[arg(long)]
    input_g: Option<PathBuf>,
    #[arg(long)]
    dtype: Option<String>,
    #[command(flatten)]
    common: Common,
}

pub fn picard(a: PicardArgs) -> Result<(), Failure> {
    let p = params(
        &a.common,
        "picard",
        &[
            ("d", "2"),
            ("n", "32"),
            ("box-length", TWO_PI),
            ("nt", "64"),
            ("t1", "0.5"),
            ("epsilon", "0.1"),
            ("gate-s", "0"),
            ("gate-l", "0"),
            ("gate-mode", "enforce"),
            ("max-iter", "50"),
            ("tol", "1e-12"),
            ("amplitude", "0.005"),
            ("band-lo", "1"),
            ("band-hi", "4"),
            ("input-f", ""),
            ("input-g", ""),
            ("dtype", "complex128"),
            ("seed", "0"),
        ],
        |p| {
            p.set_opt("d", &a.d)?;
            p.set_opt("n", &a.n)?;
            p.set_opt("box-length", &a.box_length)?;
            p.set_opt("nt", &a.nt)?;
            p.set_opt("t1", &a.t1)?;
            p.set_opt("epsilon", &a.epsilon)?;
            p.set_opt("gate-s", &a.gate_s)?;
            p.set_opt("gate-l", &a.gate_l)?;
            p.set_opt("gate-mode", &a.gate_mode)?;
            p.set_opt("max-iter", &a.max_iter)?;
            p.set_opt("tol", &a.tol)?;
            p.set_opt("amplitude", &a.amplitude)?;
            p.set_opt("band-lo", &a.band_lo)?;
            p.set_opt("band-hi", &a.band_hi)?;
            p.set_opt("input-f", &a.input_f.as_ref().map(|x| x.display()))?;
            p.set_opt("input-g", &a.input_g.as_ref().map(|x| x.display()))?;
            p.set_opt("dtype", &a.dtype)
        },
    )?;
    execute(
        &a.common,
        "picard",
        p,
        Some("zakharov-out"),
        |p, mut out| {
            let nt: usize = p.get("nt").map_err(invalid)?;
            let t1: f64 = p.get("t1").map_err(invalid)?;
            let seed: u64 = p.get("seed").map_err(invalid)?;
            let amp: f64 = p.get("amplitude").map_err(invalid)?;
            let (lo, hi): (f64, f64) = (
                p.get("band-lo").map_err(invalid)?,
                p.get("band-hi").map_err(invalid)?,
            );
            let dtype = dtype(p)?;
            let gate_mode = match p.raw("gate-mode") {
                "enforce" => GateMode::Enforce,
                "warn" => GateMode::Warn,
                other => {
                    return Err(invalid(anyhow::anyhow!(
                        "gate-mode '{other}' (enforce | warn)"
                    )))
                }
            };
            let cfg = PicardConfig {
                max_iter: p.get("max-iter").map_err(invalid)?,
                contraction_tol: p.get("tol").map_err(invalid)?,
                gate_regularity: (
                    p.get("gate-s").map_err(invalid)?,
                    p.get("gate-l").map_err(invalid)?,
                ),
                epsilon: p.get("epsilon").map_err(invalid)?,
                gate_mode,
                ..PicardConfig::default()
            };
            let g = grid(p, nt, (0.0, t1))?;
            let mut datum = |key: &str, stream: u64| -> Result<Field, Failure> {
                match input_path(p, key) {
                    Some(path) => {
                        record_input(&mut out, &path)?;
                        rehome(io::read_field(&path)?, &g)
                    }
                    None => Ok(normalized(
                        gaussian_band(&g, lo, hi, &mut rng_for(seed, stream)),
                        amp,
                    )),
                }
            };
            let f = datum("input-f", 0)?;
            let gw = datum("input-g", 1)?;
            let sol = picard_solve(&f, &gw, &g, &cfg).map_err(|e| match e {
                PicardError::Diverged { .. } | PicardError::NotConverged { .. } => {
                    Failure::Divergence(e.into())
                }
                other => invalid(other),
            })?;
            let mut csv = String::from("iteration,difference,ratio\n");
            for (k, d) in sol.differences.iter().enumerate() {
                let ratio = if k == 0 {
                    String::new()
                } else {
                    fmt17(sol.contraction_history[k - 1])
                };
                csv.push_str(&format!("{},{},{}\n", k + 1, fmt17(*d), ratio));
            }
            if let Some(o) = out {
                o.csv("iterations.csv", &csv)?;
                o.spacetime(
                    "u.zkf",
                    &sol.u.to_repr(Repr::Physical, Repr::Physical),
                    dtype,
                )?;
                o.spacetime(
                    "v.zkf",
                    &sol.v.to_repr(Repr::Physical, Repr::Physical),
                    dtype,
                )?;
            }
            println!("converged in {} iteration(s)", sol.iters);
            Ok(json!({
                "iterations": sol.iters,
                "gate": sol.gate,
                "differences": sol.differences,
                "contraction_history": sol.contraction_history,
            }))
        },
    )
}

// ---------------------------------------------------------------- norms

#[derive(Args, Debug)]
pub struct NormsArgs {
    /// S, N, W, R, sobolev, besov or mixed.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    p_t: Option<f64>,
    #[arg(long)]
    q_x: Option<f64>,
    /// Single dyadic block.
    #[arg(long)]
    block: Option<f64>,
    /// Restriction interval `t0,t1`.
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    modulation_margin: Option<f64>,
    #[arg(long)]
    lowfreq_threshold: Option<f64>,
    /// auto, lab, schrodinger or wave.
    #[arg(long)]
    frame: Option<String>,
    /// Generated input: free-schrodinger, free-wave or noise.
    #[arg(long)]
    data: Option<String>,
    /// Frequency scale of the generated input.
    #[arg(long)]
    lambda: Option<f64>,
    /// Space-time field file (overrides the generated input).
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn norm_family(p: &Params) -> Result<Family, Failure> {
    let v = |k: &str| p.get::<f64>(k).map_err(invalid);
    let s = v("s")?;
    let l = v("l")?;
    let (da, db) = default_exponents(s, l);
    let a = p.opt::<f64>("a").map_err(invalid)?.unwrap_or(da);
    let b = p.opt::<f64>("b").map_err(invalid)?.unwrap_or(db);
    let alpha = p.opt::<f64>("alpha").map_err(invalid)?.unwrap_or(a);
    let beta = p.opt::<f64>("beta").map_err(invalid)?.unwrap_or(b);
    Ok(match p.raw("family") {
        "S" | "s" => Family::S { s, a, b },
        "N" | "n" => Family::N { s, a, b },
        "W" | "w" => Family::W { l, alpha, beta },
        "R" | "r" => Family::R { l, alpha, beta },
        "sobolev" => Family::Sobolev { s },
        "besov" => Family::Besov {
            s,
            q: v("q")?,
            r: v("r")?,
        },
        "mixed" => Family::MixedLp {
            p_t: v("p-t")?,
            q_x: v("q-x")?,
            s,
        },
        other => {
            return Err(invalid(anyhow::anyhow!(
                "family '{other}' (S | N | W | R | sobolev | besov | mixed)"
            )))
        }
    })
}

pub fn norms(a: NormsArgs) -> Result<(), Failure> {
    let p = params(
        &a.common,
        "norms",
        &[
            ("family", "S"),
            ("d", "2"),
            ("n", "32"),
            ("box-length", TWO_PI),
            ("nt", "64"),
            ("t0", "0"),
            ("t1", "3.141592653589793"),
            ("s", "0"),
            ("l", "0"),
            ("a", ""),
            ("b", ""),
            ("alpha", ""),
            ("beta", ""),
            ("q", "2"),
            ("r", "2"),
            ("p-t", "2"),
            ("q-x", "2"),
            ("block", ""),
            ("interval", ""),
            ("modulation-margin", "256"),
            ("lowfreq-threshold", "65536"),
            ("frame", "auto"),
            ("data", "free-schrodinger"),
            ("lambda", "4"),
            ("input", ""),
            ("seed", "0"),
        ],
        |p| {
            p.set_opt("family", &a.family)?;
            p.set_opt("d", &a.d)?;
            p.set_opt("n", &a.n)?;
            p.set_opt("box-length", &a.box_length)?;
            p.set_opt("nt", &a.nt)?;
            p.set_opt("t0", &a.t0)?;
            p.set_opt("t1", &a.t1)?;
            p.set_opt("s", &a.s)?;
            p.set_opt("l", &a.l)?;
            p.set_opt("a", &a.a)?;
            p.set_opt("b", &a.b)?;
            p.set_opt("alpha", &a.alpha)?;
            p.set_opt("beta", &a.beta)?;
            p.set_opt("q", &a.q)?;
            p.set_opt("r", &a.r)?;
            p.set_opt("p-t", &a.p_t)?;
            p.set_opt("q-x", &a.q_x)?;
            p.set_opt("block", &a.block)?;
            p.set_opt("interval", &a.interval)?;
            p.set_opt("modulation-margin", &a.modulation_margin)?;
            p.set_opt("lowfreq-threshold", &a.lowfreq_threshold)?;
            p.set_opt("frame", &a.frame)?;
            p.set_opt("data", &a.data)?;
            p.set_opt("lambda", &a.lambda)?;
            p.set_opt("input", &a.input.as_ref().map(|x| x.display()))
        },
    )?;
    execute(&a.common, "norms", p, Some("zakharov-out"), |p, mut out| {
        let mut spec = NormSpec::new(norm_family(p)?);
        if let Some(b) = p.opt::<f64>("block").map_err(invalid)? {
            spec = spec.block(b);
        }
        let interval = p.list("interval").map_err(invalid)?;
        match interval.as_slice() {
            [] => {}
            [t0, t1] => spec = spec.on((*t0, *t1)),
            _ => return Err(invalid(anyhow::anyhow!("interval expects 't0,t1'"))),
        }
        spec.validate().map_err(invalid)?;
        let settings = NormSettings {
            modulation_margin: p.get("modulation-margin").map_err(invalid)?,
            lowfreq_threshold: p.get("lowfreq-threshold").map_err(invalid)?,
            strichartz: None,
            frame: match p.raw("frame") {
                "auto" => FrameChoice::Auto,
                "lab" => FrameChoice::Fixed(Frame::Lab),
                "schrodinger" => FrameChoice::Fixed(Frame::Schrodinger),
                "wave" => FrameChoice::Fixed(Frame::Wave),
                other => return Err(invalid(anyhow::anyhow!("frame '{other}'"))),
            },
        };
        let u = match input_path(p, "input") {
            Some(path) => {
                record_input(&mut out, &path)?;
                io::read_spacetime(&path)?
            }
            None => {
                let nt: usize = p.get("nt").map_err(invalid)?;
                let t_span = (p.get("t0").map_err(invalid)?, p.get("t1").map_err(invalid)?);
                let g = grid(p, nt, t_span)?;
                let lam: f64 = p.get("lambda").map_err(invalid)?;
                let seed: u64 = p.get("seed").map_err(invalid)?;
                let band = |stream: u64| {
                    normalized(
                        gaussian_band(&g, 0.75 * lam, 1.5 * lam, &mut rng_for(seed, stream)),
                        1.0,
                    )
                };
                match p.raw("data") {
                    "free-schrodinger" => free_schrodinger_spacetime(&band(0), &g),
                    "free-wave" => free_halfwave_spacetime(&band(0), &g),
                    "noise" => {
                        let slices: Vec<Field> = (0..nt as u64).map(band).collect();
                        SpacetimeField::from_slices(&g, &slices).map_err(invalid)?
                    }
                    other => {
                        return Err(invalid(anyhow::anyhow!(
                            "data '{other}' (free-schrodinger | free-wave | noise)"
                        )))
                    }
                }
            }
        };
        let report = adapted_norm(&u, &spec, &settings).map_err(invalid)?;
        if let Some(o) = out {
            o.json("norm.json", &report)?;
            o.csv("norm.csv", &report.to_csv())?;
        }
        println!("{} = {:.12e}", report.family, report.value);
        Ok(json!({ "family": report.family, "value": report.value }))
    })
}

// ---------------------------------------------------------------- illposed-sweep

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    l: Option<f64>,
    /// Scales: `16..512` (dyadic) or a comma list.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    /// `i`, `jab` or `both`.
    #[arg(long)]
    iterate: Option<String>,
    #[arg(long)]
    box_length: Option<f64>,
    /// Output modes are subsampled beyond this many (output, input) pairs.
    #[arg(long)]
    max_pairs: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn illposed_sweep(a: SweepArgs) -> Result<(), Failure> {
    let p = params(
        &a.common,
        "illposed-sweep",
        &[
            ("d", "2"),
            ("s", "0.2"),
            ("l", "-0.8"),
            ("lambda", "16..512"),
            ("t", "1"),
            ("iterate", "i"),
            ("box-length", TWO_PI),
            ("max-pairs", "2e7"),
            ("seed", "0"),
        ],
        |p| {
            p.set_opt("d", &a.d)?;
            p.set_opt("s", &a.s)?;
            p.set_opt("l", &a.l)?;
            p.set_opt("lambda", &a.lambda)?;
            p.set_opt("t", &a.t)?;
            p.set_opt("iterate", &a.iterate)?;
            p.set_opt("box-length", &a.box_length)?;
            p.set_opt("max-pairs", &a.max_pairs)
        },
    )?;
    execute(
        &a.common,
        "illposed-sweep",
        p,
        Some("zakharov-out"),
        |p, out| {
            let point = RegPoint::new(
                p.get("d").map_err(invalid)?,
                p.get("s").map_err(invalid)?,
                p.get("l").map_err(invalid)?,
            );
            let lambdas = p.list("lambda").map_err(invalid)?;
            let t: f64 = p.get("t").map_err(invalid)?;
            let opts = ModeSumOptions {
                box_length: p.get("box-length").map_err(invalid)?,
                max_pairs: p.get("max-pairs").map_err(invalid)?,
                seed: p.get("seed").map_err(invalid)?,
            };
            let which: Vec<(Iterate, &str)> = match p.raw("iterate") {
                "i" => vec![(Iterate::I, "sweep.csv")],
                "jab" => vec![(Iterate::Jab, "sweep.csv")],
                "both" => vec![(Iterate::I, "sweep_i.csv"), (Iterate::Jab, "sweep_jab.csv")],
                other => {
                    return Err(invalid(anyhow::anyhow!(
                        "iterate '{other}' (i | jab | both)"
                    )))
                }
            };
            let mut out = out;
            let mut summary = serde_json::Map::new();
            for (it, file) in which {
                let rows = sweep(it, point, &lambdas, t, &opts).map_err(invalid)?;
                let norms: Vec<f64> = rows.iter().map(|r| r.norm).collect();
                let fit = growth_exponent(&lambdas, &norms).ok();
                if let Some(o) = out.as_deref_mut() {
                    o.csv(file, &sweep_csv(&rows))?;
                }
                let key = if it == Iterate::I { "i" } else { "jab" };
                if let Some(g) = fit {
                    println!("{key}: slope {:.6} (r2 {:.6})", g.slope, g.r2);
                }
                summary.insert(key.into(), json!({ "rows": rows, "growth": fit }));
            }
            Ok(Value::Object(summary))
        },
    )
}

// ---------------------------------------------------------------- region

#[derive(Args, Debug)]
pub struct RegionArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    l: Option<f64>,
    /// Also write a classification map over `s-range` × `l-range`.
    #[arg(long)]
    map: bool,
    #[arg(long, allow_hyphen_values = true)]
    s_range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    l_range: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    common: Common,
}

pub fn region(a: RegionArgs) -> Result<(), Failure> {
    let p = params(
        &a.common,
        "region",
        &[
            ("d", "4"),
            ("s", "1"),
            ("l", "0"),
            ("map", "false"),
            ("s-range", "-1,3"),
            ("l-range", "-2,3"),
            ("steps", "40"),
            ("seed", "0"),
        ],
        |p| {
            p.set_opt("d", &a.d)?;
            p.set_opt("s", &a.s)?;
            p.set_opt("l", &a.l)?;
            if a.map {
                p.set("map", "true")?;
            }
            p.set_opt("s-range", &a.s_range)?;
            p.set_opt("l-range", &a.l_range)?;
            p.set_opt("steps", &a.steps)
        },
    )?;
    execute(&a.common, "region", p, None, |p, out| {
        let d: usize = p.get("d").map_err(invalid)?;
        if !(1..=4).contains(&d) {
            return Err(invalid(anyhow::anyhow!("d = {d} outside 1..=4")));
        }
        let (s, l): (f64, f64) = (p.get("s").map_err(invalid)?, p.get("l").map_err(invalid)?);
        if !(s.is_finite() && l.is_finite()) {
            return Err(invalid(anyhow::anyhow!("s and l must be finite")));
        }
        let class = classify_region(RegPoint::new(d, s, l));
        println!("{}", class.label());
        if let RegionClass::Inadmissible { violated } = &class {
            for c in violated {
                println!("violated: {} [{} witness]", c.describe(), c.witness());
            }
        }
        if let Some(o) = out {
            o.json("region.json", &class)?;
            if p.flag("map").map_err(invalid)? {
                let sr = p.list("s-range").map_err(invalid)?;
                let lr = p.list("l-range").map_err(invalid)?;
                if sr.len() != 2 || lr.len() != 2 {
                    return Err(invalid(anyhow::anyhow!("ranges expect 'lo,hi'")));
                }
                let steps: usize = p.get("steps").map_err(invalid)?;
                o.csv(
                    "region_map.csv",
                    &region_map_csv(d, (sr[0], sr[1]), (lr[0], lr[1]), steps),
                )?;
            }
        }
        Ok(serde_json::to_value(&class).expect("serialisable"))
    })
}

// ---------------------------------------------------------------- stress

#[derive(Args, Debug)]
pub struct StressArgs {
    /// energy_schrodinger, energy_wave, product, decomposability,
    /// bilinear_schrodinger or bilinear_wave.
    #[arg(long)]
    inequality: Option<String>,
    /// gaussian_band, free_wave, near_paraboloid or low_modulation.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Sweep scales (`4..32` or a comma list).
    #[arg(long)]
    scales: Option<String>,
    /// Low frequencies of the bilinear heat map.
    #[arg(long)]
    low: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    box_length: Option<f64>,
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    modulation_margin: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Refuse points outside the hypotheses (default true).
    #[arg(long)]
    enforce: Option<bool>,
    #[command(flatten)]
    common: Common,
}

fn stress_config(p: &Params) -> Result<StressConfig, Failure> {
    let ineq = Inequality::parse(p.raw("inequality")).ok_or_else(|| {
        invalid(anyhow::anyhow!(
            "inequality '{}' is not one of energy_schrodinger, energy_wave, product, \
             decomposability, bilinear_schrodinger, bilinear_wave",
            p.raw("inequality")
        ))
    })?;
    let mut cfg = StressConfig::new(ineq);
    if !p.raw("ensemble").is_empty() {
        cfg.ensemble = Ensemble::parse(p.raw("ensemble"))
            .ok_or_else(|| invalid(anyhow::anyhow!("unknown ensemble '{}'", p.raw("ensemble"))))?;
    }
    macro_rules! over {
        ($field:ident, $key:literal) => {
            if let Some(v) = p.opt($key).map_err(invalid)? {
                cfg.$field = v;
            }
        };
    }
    over!(d, "d");
    over!(samples, "samples");
    over!(s, "s");
    over!(l, "l");
    over!(a, "a");
    over!(b, "b");
    over!(alpha, "alpha");
    over!(beta, "beta");
    over!(box_length, "box-length");
    over!(period, "period");
    over!(nt, "nt");
    over!(modulation_margin, "modulation-margin");
    over!(amplitude, "amplitude");
    over!(seed, "seed");
    if !p.raw("scales").is_empty() {
        cfg.scales = p.list("scales").map_err(invalid)?;
    }
    if !p.raw("low").is_empty() {
        cfg.low = p.list("low").map_err(invalid)?;
    }
    if !p.raw("enforce").is_empty() {
        cfg.enforce_hypotheses = p.flag("enforce").map_err(invalid)?;
    }
    Ok(cfg)
}

pub fn stress(a: StressArgs) -> Result<(), Failure> {
    let p = params(
        &a.common,
        "stress",
        &[
            ("inequality", ""),
            ("ensemble", ""),
            ("d", ""),
            ("samples", ""),
            ("scales", ""),
            ("low", ""),
            ("s", ""),
            ("l", ""),
            ("a", ""),
            ("b", ""),
            ("alpha", ""),
            ("beta", ""),
            ("box-length", ""),
            ("period", ""),
            ("nt", ""),
            ("modulation-margin", ""),
            ("amplitude", ""),
            ("enforce", ""),
            ("seed", "0"),
        ],
        |p| {
            p.set_opt("inequality", &a.inequality)?;
            p.set_opt("ensemble", &a.ensemble)?;
            p.set_opt("d", &a.d)?;
            p.set_opt("samples", &a.samples)?;
            p.set_opt("scales", &a.scales)?;
            p.set_opt("low", &a.low)?;
            p.set_opt("s", &a.s)?;
            p.set_opt("l", &a.l)?;
            p.set_opt("a", &a.a)?;
            p.set_opt("b", &a.b)?;
            p.set_opt("alpha", &a.alpha)?;
            p.set_opt("beta", &a.beta)?;
            p.set_opt("box-length", &a.box_length)?;
            p.set_opt("period", &a.period)?;
            p.set_opt("nt", &a.nt)?;
            p.set_opt("modulation-margin", &a.modulation_margin)?;
            p.set_opt("amplitude", &a.amplitude)?;
            p.set_opt("enforce", &a.enforce)
        },
    )?;
    execute(&a.common, "stress", p, Some("zakharov-out"), |p, out| {
        let cfg = stress_config(p)?;
        let report = run_stress(&cfg).map_err(|e| match e {
            StressError::Hypothesis(_) | StressError::Config(_) => invalid(e),
            other => Failure::Other(other.into()),
        })?;
        if let Some(o) = out {
            o.csv("records.csv", &report.records_csv())?;
            if let Some(h) = &report.heat_map {
                o.csv("heatmap.csv", &h.to_csv())?;
            }
            o.json("report.json", &report)?;
        }
        println!(
            "{} ({}): spread {:.4}, trend {:.4}",
            report.inequality, report.ensemble, report.spread, report.trend
        );
        Ok(json!({
            "stress_config_hash": report.config_hash,
            "per_scale_max": report.per_scale_max,
            "spread": report.spread,
            "trend": report.trend,
            "skipped": report.skipped,
            "envelope_exponent": report.envelope_exponent,
        }))
    })
}
