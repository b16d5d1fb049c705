//! The experiments the binary can run, their parameters and output columns.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use epflow_core::bumpkit::{build_w, SmoothFnHandle, FLATNESS_STEPS};
use epflow_core::diskflow::{
    build_ladder, census, ep_curve, ln_biguint, sphere_census, z1_time, z2_time, CensusOptions, DiskField,
    DiskVariant, LogReal,
};
use epflow_core::flowsim::{
    detect_period, integrate_with, sample_orbits, ChartMetric, FlowField, IntegrateOptions,
};
use epflow_core::suspension::{
    abramov_from_orbits, beta_ladder, estimate_deltas, reparam, segment_seeds, suspend, AbramovParams,
    BaseMap, BaseSampler, FiberBox, SlowDownSpec, Speed, SuspensionSampler,
};
use epflow_core::tearkit::{
    h1_samples, mirror_return, return_ratio, semiconjugacy_residual, EmbeddedDiskFields, RotatedField,
    TearGrid, TearVariant,
};

use crate::config::{key, ConfigError, Key, Params};
use crate::output::{col, Cell, Column, Format, Table};
use crate::CliError;

pub struct Ctx<'a> {
    pub params: &'a Params,
    pub seed: u64,
}

pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [Key],
    pub format: Format,
    pub run: fn(&Ctx) -> Result<Table, CliError>,
}

pub static EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "census",
        about: "periodic-orbit counts of a disk field at the ladder times",
        keys: CENSUS_KEYS,
        format: Format::Csv,
        run: run_census,
    },
    Experiment {
        name: "sphere-census",
        about: "orbit counts after doubling the disk to a sphere",
        keys: DISK_KEYS,
        format: Format::Csv,
        run: run_sphere_census,
    },
    Experiment {
        name: "ep-curve",
        about: "ln(count)/t along the ladder times",
        keys: CENSUS_KEYS,
        format: Format::Csv,
        run: run_ep_curve,
    },
    Experiment {
        name: "orbit-verify",
        about: "integrate ladder circles and compare periods with the analytic ones",
        keys: ORBIT_KEYS,
        format: Format::Csv,
        run: run_orbit_verify,
    },
    Experiment {
        name: "suspension",
        about: "return-map and cocycle checks on a constant-roof suspension",
        keys: SUSPENSION_KEYS,
        format: Format::Jsonl,
        run: run_suspension,
    },
    Experiment {
        name: "abramov",
        about: "separated-set entropy of a base map and of its suspension",
        keys: ABRAMOV_KEYS,
        format: Format::Jsonl,
        run: run_abramov,
    },
    Experiment {
        name: "slowdown",
        about: "return times and occupation under the flat slow-down profile",
        keys: SLOWDOWN_KEYS,
        format: Format::Csv,
        run: run_slowdown,
    },
    Experiment {
        name: "tear-residual",
        about: "semiconjugacy residual of the rotated tear field on test grids",
        keys: TEAR_RESIDUAL_KEYS,
        format: Format::Jsonl,
        run: run_tear_residual,
    },
    Experiment {
        name: "tear-mirror",
        about: "transverse drift and transit-time ratios between the two hyperplanes",
        keys: TEAR_MIRROR_KEYS,
        format: Format::Jsonl,
        run: run_tear_mirror,
    },
    Experiment {
        name: "embed-check",
        about: "embedded disk field against the planar one, trailing components",
        keys: EMBED_KEYS,
        format: Format::Jsonl,
        run: run_embed_check,
    },
    Experiment {
        name: "bump-audit",
        about: "sampled checks of the radial bump and flatness of the 1-d bumps",
        keys: BUMP_KEYS,
        format: Format::Csv,
        run: run_bump_audit,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

fn bad(p: &Params, k: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(p.invalid(k, msg))
}

fn disk_variant(p: &Params, k: &str, choices: &[&str]) -> Result<DiskVariant, ConfigError> {
    Ok(match p.choice(k, choices)? {
        "Z0" => DiskVariant::Z0,
        "Z1" => DiskVariant::Z1,
        _ => DiskVariant::Z2,
    })
}

fn base_map(p: &Params) -> Result<BaseMap, ConfigError> {
    Ok(match p.choice("base", &["rotation", "cat", "identity"])? {
        "rotation" => BaseMap::golden_rotation(),
        "cat" => BaseMap::cat(),
        _ => BaseMap::Identity { dim: 1 },
    })
}

// ---- disk censuses ----

const DISK_KEYS: &[Key] = &[
    key("flow", "Z1", "disk field: Z0, Z1 or Z2"),
    key("tmin-index", "2", "first time index"),
    key("tmax-index", "8", "last time index"),
    key("i-max", "8", "number of ladder strips"),
];

const CENSUS_KEYS: &[Key] = &[
    key("flow", "Z1", "disk field: Z0, Z1 or Z2"),
    key("tmin-index", "2", "first time index"),
    key("tmax-index", "8", "last time index"),
    key("i-max", "8", "number of ladder strips"),
    key("fixed-point", "true", "count the fixed point at the centre"),
    key("boundary-circle", "true", "count the boundary circle"),
];

/// Largest time index; Z2 times are `2π·2^(2^i)`.
const MAX_TIME_INDEX: usize = 60;

struct DiskSetup {
    field: DiskField,
    indices: Vec<usize>,
    times: Vec<LogReal>,
}

fn disk_setup(p: &Params) -> Result<DiskSetup, CliError> {
    let variant = disk_variant(p, "flow", &["Z0", "Z1", "Z2"])?;
    let lo = p.usize("tmin-index")?;
    let hi = p.usize("tmax-index")?;
    if lo == 0 {
        return Err(bad(p, "tmin-index", "must be at least 1"));
    }
    if hi < lo || hi > MAX_TIME_INDEX {
        return Err(bad(
            p,
            "tmax-index",
            format!("must lie in [tmin-index, {MAX_TIME_INDEX}]"),
        ));
    }
    let ladder = build_ladder(p.usize("i-max")?).map_err(|e| bad(p, "i-max", e))?;
    let indices: Vec<usize> = (lo..=hi).collect();
    let times = indices
        .iter()
        .map(|&n| match variant {
            DiskVariant::Z2 => z2_time(n),
            _ => z1_time(n),
        })
        .collect();
    Ok(DiskSetup {
        field: DiskField::new(variant, ladder),
        indices,
        times,
    })
}

fn census_options(p: &Params) -> Result<CensusOptions, ConfigError> {
    Ok(CensusOptions {
        fixed_point: p.bool("fixed-point")?,
        boundary_circle: p.bool("boundary-circle")?,
    })
}

const CENSUS_COLUMNS: &[Column] = &[
    col("index", "time index n"),
    col("t", "time horizon"),
    col("log_t", "ln t"),
    col("count", "periodic orbits with period at most t (exact)"),
    col("log_count", "ln count"),
    col("ep_estimate", "ln(count) / t"),
];

fn run_census(ctx: &Ctx) -> Result<Table, CliError> {
    let s = disk_setup(ctx.params)?;
    let opts = census_options(ctx.params)?;
    let mut t = Table::new(CENSUS_COLUMNS);
    for (n, time) in s.indices.iter().zip(&s.times) {
        let row = census(&s.field, *time, opts);
        t.push(vec![
            (*n).into(),
            time.value().into(),
            time.ln.into(),
            Cell::Big(row.count.to_string()),
            row.log_count.into(),
            row.ep_estimate.into(),
        ]);
    }
    Ok(t)
}

fn run_sphere_census(ctx: &Ctx) -> Result<Table, CliError> {
    let s = disk_setup(ctx.params)?;
    let mut t = Table::new(CENSUS_COLUMNS);
    for (n, time) in s.indices.iter().zip(&s.times) {
        let count = sphere_census(&s.field, *time);
        let log_count = ln_biguint(&count);
        // ln(count)/t formed in log space so huge t does not overflow
        let ep = (log_count.ln() - time.ln).exp();
        t.push(vec![
            (*n).into(),
            time.value().into(),
            time.ln.into(),
            Cell::Big(count.to_string()),
            log_count.into(),
            ep.into(),
        ]);
    }
    Ok(t)
}

const EP_COLUMNS: &[Column] = &[
    col("index", "time index n"),
    col("log_t", "ln t"),
    col("log_count", "ln of the orbit count"),
    col("ep_estimate", "ln(count) / t"),
];

fn run_ep_curve(ctx: &Ctx) -> Result<Table, CliError> {
    let s = disk_setup(ctx.params)?;
    let tab = ep_curve(&s.field, &s.times, census_options(ctx.params)?)?;
    let mut t = Table::new(EP_COLUMNS);
    for (n, row) in s.indices.iter().zip(&tab.rows) {
        t.push(vec![
            (*n).into(),
            row.t.ln.into(),
            row.log_count.into(),
            row.ep_estimate.into(),
        ]);
    }
    Ok(t)
}

// ---- orbit verification ----

const ORBIT_KEYS: &[Key] = &[
    key("flow", "Z1", "disk field: Z0, Z1 or Z2"),
    key("radii", "0.5", "ladder circles to integrate"),
    key("i-max", "6", "number of ladder strips"),
    key("tol", "1e-4", "relative tolerance for closure and period"),
    key("max-period", "1000", "skip circles whose period exceeds this"),
];

const ORBIT_COLUMNS: &[Column] = &[
    col("radius", "circle radius"),
    col("period", "analytic period"),
    col("log_period", "ln of the analytic period"),
    col(
        "numeric_period",
        "period refined on a transverse section (empty if skipped)",
    ),
    col(
        "closure",
        "distance from start after one analytic period, relative to max(1, radius)",
    ),
    col("rel_error", "|numeric - analytic| / analytic"),
    col("confirmed", "closure and rel_error both within tol"),
];

fn run_orbit_verify(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let variant = disk_variant(p, "flow", &["Z0", "Z1", "Z2"])?;
    let ladder = build_ladder(p.usize("i-max")?).map_err(|e| bad(p, "i-max", e))?;
    let field = DiskField::new(variant, ladder);
    let radii = p.f64_list("radii")?;
    let tol = p.f64("tol")?;
    let max_period = p.f64("max-period")?;
    if tol <= 0.0 {
        return Err(bad(p, "tol", "must be positive"));
    }
    let periods = radii
        .iter()
        .map(|&r| field.orbit_period(r).map_err(|e| bad(p, "radii", e)))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Result<Vec<Cell>, CliError>> = radii
        .par_iter()
        .zip(&periods)
        .map(|(&r, lp)| {
            let period = lp.value();
            if period > max_period {
                return Ok(vec![
                    r.into(),
                    period.into(),
                    lp.ln.into(),
                    Cell::Missing,
                    Cell::Missing,
                    Cell::Missing,
                    false.into(),
                ]);
            }
            let x0 = [r, 0.0];
            let opts = IntegrateOptions::new(1e-11).max_step(period / 64.0);
            let tr = integrate_with(&field, &x0, period, opts)?;
            let end = tr.end();
            let closure = (end[0] - x0[0]).hypot(end[1] - x0[1]) / r.abs().max(1.0);
            let est = detect_period(&field, &x0, period * 1.02, tol)?;
            let numeric = est.map(|e| e.period);
            let rel = numeric.map_or(f64::INFINITY, |q| (q - period).abs() / period);
            Ok(vec![
                r.into(),
                period.into(),
                lp.ln.into(),
                numeric.into(),
                closure.into(),
                rel.into(),
                (closure <= tol && rel <= tol).into(),
            ])
        })
        .collect();
    let mut t = Table::new(ORBIT_COLUMNS);
    for row in rows {
        let row = row?;
        t.low_confidence |= row[6] == Cell::Bool(false);
        t.push(row);
    }
    Ok(t)
}

// ---- suspensions ----

const SUSPENSION_KEYS: &[Key] = &[
    key("base", "rotation", "base map: rotation, cat or identity"),
    key("roof", "1", "constant roof height"),
    key("samples", "1000", "random starting points"),
    key("tol", "1e-10", "integrator tolerance"),
];

const SUSPENSION_COLUMNS: &[Column] = &[
    col("samples", "starting points used"),
    col("roof", "roof height, the first-return time to the base"),
    col(
        "max_return_error",
        "max distance between the flow at the roof time and the base map",
    ),
    col(
        "max_cocycle_residual",
        "max |θ(s+t,x) - θ(s,x) - θ(t,φ_s x)| for a = 1 + sin(2π s)/2",
    ),
];

fn run_suspension(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let base = base_map(p)?;
    let roof = p.f64("roof")?;
    if roof <= 0.0 {
        return Err(bad(p, "roof", "must be positive"));
    }
    let n = p.usize("samples")?;
    let tol = p.f64("tol")?;
    let space = suspend(base.clone())?;
    let flow = reparam(space.clone(), Speed::roof(roof))?.with_tol(tol);
    let metric = space.metric();
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let inputs: Vec<(Vec<f64>, f64, f64)> = (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            x[d - 1] = 0.0;
            (x, rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0))
        })
        .collect();
    let a = |q: &[f64]| 1.0 + 0.5 * (2.0 * PI * q[q.len() - 1]).sin();
    let errs: Vec<Result<(f64, f64), CliError>> = inputs
        .par_iter()
        .map(|(x, s, t)| {
            let q = flow.advance(x, roof)?.point;
            let mut want = vec![0.0; d];
            base.apply(&x[..d - 1], &mut want[..d - 1]);
            let ret = metric.dist(&q, &want);
            let whole = flow.theta(&a, x, s + t)?;
            let first = flow.advance_theta(x, *s, &a)?;
            let rest = flow.theta(&a, &first.point, *t)?;
            Ok((ret, (whole - first.theta - rest).abs()))
        })
        .collect();
    let (mut ret, mut coc) = (0.0f64, 0.0f64);
    for e in errs {
        let (r, c) = e?;
        ret = ret.max(r);
        coc = coc.max(c);
    }
    let mut table = Table::new(SUSPENSION_COLUMNS);
    table.push(vec![n.into(), roof.into(), ret.into(), coc.into()]);
    Ok(table)
}

const ABRAMOV_KEYS: &[Key] = &[
    key("base", "cat", "base map: rotation, cat or identity"),
    key("roof", "1", "constant roof height, in [1/4, 4]"),
    key("seeds", "4096", "seed points on a short random segment"),
    key("t1", "2", "short horizon in base iterates"),
    key("t2", "7", "long horizon in base iterates"),
    key("eps", "0.1,0.07,0.05", "separation scales"),
    key("patch", "0.05", "length of the seed segment"),
];

const ABRAMOV_COLUMNS: &[Column] = &[
    col("base", "base map"),
    col("roof", "roof height c"),
    col("h_flow", "entropy estimate of the suspension flow"),
    col("h_base", "entropy estimate of the base map"),
    col("ratio", "h_flow * c / h_base, 1 when the time-change law holds"),
    col("reference_h_base", "exact entropy of the base map"),
    col(
        "low_confidence",
        "a separated set saturated the sample or stayed trivial",
    ),
];

fn run_abramov(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let base = base_map(p)?;
    let roof = p.f64("roof")?;
    if !(0.25..=4.0).contains(&roof) {
        return Err(bad(p, "roof", "must lie in [0.25, 4]"));
    }
    let params = AbramovParams {
        seeds: p.usize("seeds")?,
        t1: p.usize("t1")?,
        t2: p.usize("t2")?,
        eps_grid: p.f64_list("eps")?,
        patch: p.f64("patch")?,
        rng_seed: ctx.seed,
    };
    if params.seeds == 0 {
        return Err(bad(p, "seeds", "must be positive"));
    }
    if params.t2 <= params.t1 {
        return Err(bad(p, "t2", "must exceed t1"));
    }
    if params.eps_grid.is_empty() || params.eps_grid.iter().any(|e| *e <= 0.0) {
        return Err(bad(p, "eps", "needs at least one positive scale"));
    }
    let flow = reparam(suspend(base.clone())?, Speed::roof(roof))?;
    let db = base.dim();
    let seeds = segment_seeds(db, params.seeds, params.patch, params.rng_seed);
    let base_seeds: Vec<Vec<f64>> = seeds.iter().map(|s| s[..db].to_vec()).collect();
    let (_, ft2) = params.flow_horizons(roof);
    let base_sampler = BaseSampler { base: &base };
    let flow_sampler = SuspensionSampler { flow: &flow };
    let chunk = 64;
    let base_orbits = base_seeds
        .par_chunks(chunk)
        .map(|c| sample_orbits(&base_sampler, c, params.t2))
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    let flow_orbits = seeds
        .par_chunks(chunk)
        .map(|c| sample_orbits(&flow_sampler, c, ft2))
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    let rep = abramov_from_orbits(&base, roof, &params, &base_orbits, &flow_orbits)?;
    let reference = match &base {
        BaseMap::Torus { .. } => ((3.0 + 5f64.sqrt()) / 2.0).ln(),
        _ => 0.0,
    };
    let mut t = Table::new(ABRAMOV_COLUMNS);
    t.low_confidence = rep.low_confidence;
    t.push(vec![
        p.str("base").into(),
        roof.into(),
        rep.h_flow.into(),
        rep.h_base.into(),
        rep.ratio.into(),
        reference.into(),
        rep.low_confidence.into(),
    ]);
    Ok(t)
}

const SLOWDOWN_KEYS: &[Key] = &[
    key("i0", "2", "first ladder index"),
    key("levels", "5", "number of ball-frequency levels"),
    key("l", "0.1", "ladder scale"),
    key(
        "orbit-length",
        "100000",
        "base iterates used to estimate ball frequencies",
    ),
    key("scales", "1,0.5,0.25", "factors applied to the whole beta ladder"),
    key("center", "0,0.5", "centre of the slow-down ball (y, s)"),
    key("radius", "0.2", "chart radius of the slow-down ball"),
    key("fibres", "1000", "fibres averaged for the mean return time"),
    key(
        "times",
        "1000,10000,100000",
        "horizons for the occupation fraction",
    ),
    key("y0", "0.1234567", "base point of the occupation orbit"),
    key("box-y", "0.35,0.65", "base interval of the occupation region"),
    key("box-s", "0,1", "fibre interval of the occupation region"),
];

const SLOWDOWN_COLUMNS: &[Column] = &[
    col("quantity", "mean_gamma, mean_lower_bound or occupation_fraction"),
    col("scale", "factor applied to the beta ladder"),
    col("t", "occupation horizon (empty for return times)"),
    col("value", "measured value"),
];

fn pair(p: &Params, k: &str) -> Result<[f64; 2], CliError> {
    match p.f64_list(k)?[..] {
        [a, b] if a <= b || k == "center" => Ok([a, b]),
        _ => Err(bad(p, k, "expected two numbers, lower first")),
    }
}

fn run_slowdown(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let base = BaseMap::golden_rotation();
    let i0 = p.usize("i0")?;
    let deltas = estimate_deltas(&base, i0, p.usize("levels")?, p.usize("orbit-length")?)?;
    let betas = beta_ladder(p.f64("l")?, &deltas, i0)?;
    let center = pair(p, "center")?;
    let radius = p.f64("radius")?;
    let scales = p.f64_list("scales")?;
    if scales.is_empty() || scales.iter().any(|s| *s <= 0.0) {
        return Err(bad(p, "scales", "needs at least one positive factor"));
    }
    let flow_for = |scale: f64| -> Result<_, CliError> {
        let b: Vec<f64> = betas.iter().map(|x| x * scale).collect();
        let w = build_w(&b, 2)?;
        let sd = SlowDownSpec::new(center.to_vec(), w, radius).map_err(|e| bad(p, "radius", e))?;
        Ok(reparam(suspend(base.clone())?, Speed::SlowDown(sd))?)
    };
    let n = p.usize("fibres")?;
    if n == 0 {
        return Err(bad(p, "fibres", "must be positive"));
    }
    let ys: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    let mut t = Table::new(SLOWDOWN_COLUMNS);
    for &s in &scales {
        let flow = flow_for(s)?;
        let (g, lb) = ys
            .par_iter()
            .map(|y| (flow.gamma_return(&[*y]), flow.gamma_lower_bound(&[*y])))
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |(a, b), (g, l)| (a + g, b + l));
        t.push(vec![
            "mean_gamma".into(),
            s.into(),
            Cell::Missing,
            (g / n as f64).into(),
        ]);
        t.push(vec![
            "mean_lower_bound".into(),
            s.into(),
            Cell::Missing,
            (lb / n as f64).into(),
        ]);
    }
    let by = pair(p, "box-y")?;
    let bs = pair(p, "box-s")?;
    let region = FiberBox {
        y_lo: vec![by[0]],
        y_hi: vec![by[1]],
        s_lo: bs[0],
        s_hi: bs[1],
    };
    let times = p.f64_list("times")?;
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|t| *t <= 0.0) {
        return Err(bad(p, "times", "must be positive and increasing"));
    }
    let flow = flow_for(scales[0])?;
    for (time, o) in times
        .iter()
        .zip(flow.occupation_series(&[p.f64("y0")?], &times, &region)?)
    {
        t.push(vec![
            "occupation_fraction".into(),
            scales[0].into(),
            (*time).into(),
            (o.j / o.t_total).into(),
        ]);
    }
    Ok(t)
}

// ---- tear charts ----

fn tear_variant(p: &Params) -> Result<TearVariant, ConfigError> {
    Ok(match p.choice("variant", &["Z", "Z1"])? {
        "Z" => TearVariant::Z,
        _ => TearVariant::Z1,
    })
}

const TEAR_RESIDUAL_KEYS: &[Key] = &[
    key("variant", "Z", "tear field: Z or Z1"),
    key("dim", "5", "ambient dimension"),
    key("points", "21", "points per grid"),
    key("t-max", "5", "comparison horizon"),
    key("tol", "1e-9", "integrator tolerance"),
    key(
        "grids",
        "axis,sigma:0.5,rho:0.5",
        "grids: axis, sigma:<b> or rho:<a>",
    ),
];

const TEAR_RESIDUAL_COLUMNS: &[Column] = &[
    col("grid", "test grid"),
    col("samples", "orbits compared"),
    col("excluded", "orbits that left the chart or stopped early"),
    col(
        "residual",
        "sup distance between the projected orbit and the model flow",
    ),
];

fn parse_grid(s: &str) -> Option<TearGrid> {
    if s == "axis" {
        return Some(TearGrid::Axis);
    }
    let (kind, v) = s.split_once(':')?;
    let v: f64 = v.trim().parse().ok()?;
    match kind.trim() {
        "sigma" if (0.0..2.0).contains(&v) => Some(TearGrid::Sigma(v)),
        "rho" if (0.0..=1.0).contains(&v) => Some(TearGrid::Rho(v)),
        _ => None,
    }
}

fn run_tear_residual(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let dim = p.usize("dim")?;
    let f = RotatedField::new(tear_variant(p)?, dim).map_err(|e| bad(p, "dim", e))?;
    let grids = p
        .list("grids")
        .map(parse_grid)
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| {
            bad(
                p,
                "grids",
                "expected axis, sigma:<b in [0,2)> or rho:<a in [0,1]>",
            )
        })?;
    let n = p.usize("points")?;
    let (t_max, tol) = (p.f64("t-max")?, p.f64("tol")?);
    let reports = grids
        .par_iter()
        .map(|g| semiconjugacy_residual(&f, t_max, &g.points(n, dim), tol))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(TEAR_RESIDUAL_COLUMNS);
    for (g, r) in grids.iter().zip(reports) {
        t.low_confidence |= r.samples == 0;
        t.push(vec![
            g.name().into(),
            r.samples.into(),
            r.excluded.into(),
            r.residual.into(),
        ]);
    }
    Ok(t)
}

const TEAR_MIRROR_KEYS: &[Key] = &[
    key("dim", "5", "ambient dimension"),
    key("samples", "100", "starting points on the entry hyperplane"),
    key("rho-lo", "0.1", "smallest distance from the axis"),
    key("rho-hi", "2.6", "largest distance from the axis"),
    key("t-max", "1e5", "transit time limit"),
    key("tol", "1e-9", "integrator tolerance"),
];

const TEAR_MIRROR_COLUMNS: &[Column] = &[
    col(
        "max_transverse_error",
        "max change of the transverse coordinates across the transit (Z1)",
    ),
    col("arrived", "Z1 orbits reaching the exit hyperplane"),
    col("stagnant", "Z1 orbits that did not arrive"),
    col("min_ratio", "min transit time of Z1 over that of Z"),
    col("max_ratio", "max transit time of Z1 over that of Z"),
    col("used", "samples arriving under both fields"),
    col("excluded", "samples stagnating under either field"),
];

fn run_tear_mirror(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let dim = p.usize("dim")?;
    let z = RotatedField::new(TearVariant::Z, dim).map_err(|e| bad(p, "dim", e))?;
    let z1 = RotatedField::new(TearVariant::Z1, dim).map_err(|e| bad(p, "dim", e))?;
    let (lo, hi) = (p.f64("rho-lo")?, p.f64("rho-hi")?);
    if !(0.0 <= lo && lo <= hi) {
        return Err(bad(p, "rho-hi", "need 0 <= rho-lo <= rho-hi"));
    }
    let samples = h1_samples(p.usize("samples")?, dim, lo, hi, ctx.seed);
    let (t_max, tol) = (p.f64("t-max")?, p.f64("tol")?);
    let parts = samples
        .par_chunks(4)
        .map(|c| {
            Ok((
                mirror_return(&z1, c, t_max, tol)?,
                return_ratio(&z, &z1, c, t_max, tol)?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (mut err, mut arrived, mut stagnant) = (0.0f64, 0, 0);
    let (mut rmin, mut rmax, mut used, mut excluded) = (f64::INFINITY, 0.0f64, 0, 0);
    for (m, r) in parts {
        err = err.max(m.max_transverse_error);
        arrived += m.arrived;
        stagnant += m.stagnant;
        if r.used > 0 {
            rmin = rmin.min(r.min_ratio);
            rmax = rmax.max(r.max_ratio);
        }
        used += r.used;
        excluded += r.excluded;
    }
    let mut t = Table::new(TEAR_MIRROR_COLUMNS);
    t.low_confidence = arrived == 0 || used == 0;
    let ratio = |v: f64| if used > 0 { Cell::Real(v) } else { Cell::Missing };
    t.push(vec![
        err.into(),
        arrived.into(),
        stagnant.into(),
        ratio(rmin),
        ratio(rmax),
        used.into(),
        excluded.into(),
    ]);
    Ok(t)
}

const EMBED_KEYS: &[Key] = &[
    key("flow", "Z1", "disk field: Z1 or Z2"),
    key("dim", "5", "ambient dimension, at least 3"),
    key("samples", "1000", "points drawn in D1 and in D2 minus D1"),
    key("i-max", "6", "number of ladder strips"),
];

const EMBED_COLUMNS: &[Column] = &[
    col("flow", "disk field"),
    col(
        "max_deviation",
        "max difference from the disk field in the first two components on D1",
    ),
    col("trailing_zero", "all trailing components vanish on D1"),
    col(
        "trailing_positive",
        "all trailing components are positive on D2 minus D1",
    ),
];

fn sample_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return v.into_iter().map(|x| x * radius).collect();
        }
    }
}

fn run_embed_check(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let variant = disk_variant(p, "flow", &["Z1", "Z2"])?;
    let dim = p.usize("dim")?;
    let ladder = build_ladder(p.usize("i-max")?).map_err(|e| bad(p, "i-max", e))?;
    let disk = DiskField::new(variant, ladder);
    let e = EmbeddedDiskFields::new(disk.clone(), dim).map_err(|err| bad(p, "dim", err))?;
    let n = p.usize("samples")?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut out = vec![0.0; dim];
    let (mut worst, mut zero, mut positive) = (0.0f64, true, true);
    for _ in 0..n {
        let mut q = sample_ball(&mut rng, 2, 1.0);
        let v = disk.eval([q[0], q[1]])?;
        q.resize(dim, 0.0);
        e.eval(&q, &mut out);
        worst = worst.max((out[0] - v[0]).abs()).max((out[1] - v[1]).abs());
        zero &= out[2..].iter().all(|c| *c == 0.0);
    }
    for _ in 0..n {
        let q = loop {
            let q = sample_ball(&mut rng, dim, 2f64.sqrt());
            if EmbeddedDiskFields::in_d2(&q) && !EmbeddedDiskFields::in_d1(&q) {
                break q;
            }
        };
        e.eval(&q, &mut out);
        positive &= out[2..].iter().all(|c| *c > 0.0);
    }
    let mut t = Table::new(EMBED_COLUMNS);
    t.push(vec![
        p.str("flow").into(),
        worst.into(),
        zero.into(),
        positive.into(),
    ]);
    Ok(t)
}

const BUMP_KEYS: &[Key] = &[
    key("betas", "1,0.5,0.25,0.125", "decreasing positive bounds"),
    key("dim", "5", "dimension of the radial bump"),
    key("samples", "10000", "samples per ball and on the annulus"),
    key("order", "3", "highest derivative order for the flatness reports"),
];

const BUMP_COLUMNS: &[Column] = &[
    col("check", "what is checked"),
    col("pass", "the check holds on every sample"),
    col("value", "worst sampled value"),
    col("bound", "bound it is held to (empty when there is none)"),
];

fn run_bump_audit(ctx: &Ctx) -> Result<Table, CliError> {
    let p = ctx.params;
    let betas = p.f64_list("betas")?;
    let dim = p.usize("dim")?;
    let n = p.usize("samples")?;
    let order = p.usize("order")? as u32;
    let w = build_w(&betas, dim).map_err(|e| bad(p, "betas", e))?;
    let h = SmoothFnHandle::RadialW(w.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut t = Table::new(BUMP_COLUMNS);

    let at0 = h.eval(&vec![0.0; dim])?;
    t.push(vec![
        "w_at_origin".into(),
        (at0 == 0.0).into(),
        at0.into(),
        0.0.into(),
    ]);
    let mut min_pos = f64::INFINITY;
    for i in 0..=betas.len() {
        let bound = w.ball_bound(i).unwrap_or(1.0);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let x = sample_ball(&mut rng, dim, 1.0 / (i as f64 + 1.0));
            let v = h.eval(&x)?;
            worst = worst.max(v);
            if x.iter().any(|c| *c != 0.0) {
                min_pos = min_pos.min(v);
            }
        }
        t.push(vec![
            format!("ball_{i}").into(),
            (worst <= bound).into(),
            worst.into(),
            bound.into(),
        ]);
    }
    t.push(vec![
        "positive_off_origin".into(),
        (min_pos > 0.0).into(),
        min_pos.into(),
        Cell::Missing,
    ]);
    let mut lowest: f64 = 1.0;
    for _ in 0..n {
        let mut x = sample_ball(&mut rng, dim, 1.0);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r == 0.0 {
            continue;
        }
        let target = rng.gen_range(1.0..=2.0);
        x.iter_mut().for_each(|c| *c *= target / r);
        lowest = lowest.min(h.eval(&x)?);
    }
    t.push(vec![
        "one_on_annulus".into(),
        (lowest == 1.0).into(),
        lowest.into(),
        1.0.into(),
    ]);
    for (name, f, x0) in [
        ("gamma0_flat_at_1", SmoothFnHandle::Gamma0, 1.0),
        ("psi_flat_at_0", SmoothFnHandle::Psi, 0.0),
    ] {
        let r = f.flatness_report(&[x0], order, &FLATNESS_STEPS)?;
        let worst = r
            .rows
            .iter()
            .filter_map(|row| row.magnitudes.last())
            .fold(0.0f64, |m, v| m.max(*v));
        t.push(vec![name.into(), r.pass.into(), worst.into(), Cell::Missing]);
    }
    Ok(t)
}
