//! Suspension flows over circle rotations and torus automorphisms.
//!
//! A point of the suspension is `(y, s)` with `y ∈ [0,1)^d` and `s ∈ [0,1)`;
//! `(y, 1)` is glued to `(f(y), 0)`. The unit-speed flow moves `s` at rate 1.
//! A [`Speed`] turns it into the time-changed flow `α·X`, which moves along
//! the same fibres at rate `α`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bumpkit::RadialW;
use crate::flowsim::{
    drive, first_crossing, slope_from_orbits, ChartBounds, ChartMetric, FlatTorus, FlowField,
    IntegrateOptions, OccupancyResult, OrbitSampler, Orientation, SlopeEstimate, Status,
};
use crate::quad::{adaptive_simpson, GaussLegendre};
use crate::{Error, Result};

/// `(√5 - 1)/2`, the default rotation number.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Below this speed an orbit is considered stuck at the marked point.
pub const STAGNATION_ALPHA: f64 = 1e-300;

/// `v mod 1` in `[0, 1)`.
#[inline]
pub fn wrap01(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `v mod 1` in `[-1/2, 1/2)`.
#[inline]
fn wrap_half(v: f64) -> f64 {
    wrap01(v + 0.5) - 0.5
}

fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = wrap_half(x - y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// The base transformation `f`.
#[derive(Clone)]
pub enum BaseMap {
    /// `y ↦ y + angle (mod 1)` on the circle.
    Rotation {
        angle: f64,
    },
    /// `y ↦ A y (mod 1)` on the 2-torus.
    Torus {
        matrix: [[i64; 2]; 2],
    },
    Identity {
        dim: usize,
    },
    Custom {
        name: &'static str,
        dim: usize,
        forward: fn(&[f64], &mut [f64]),
        inverse: fn(&[f64], &mut [f64]),
    },
}

impl fmt::Debug for BaseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseMap::Rotation { angle } => write!(f, "Rotation({angle})"),
            BaseMap::Torus { matrix } => write!(f, "Torus({matrix:?})"),
            BaseMap::Identity { dim } => write!(f, "Identity({dim})"),
            BaseMap::Custom { name, dim, .. } => write!(f, "Custom({name}, {dim})"),
        }
    }
}

impl BaseMap {
    pub fn golden_rotation() -> Self {
        BaseMap::Rotation { angle: GOLDEN }
    }

    /// The cat map `[[2,1],[1,1]]`.
    pub fn cat() -> Self {
        BaseMap::Torus {
            matrix: [[2, 1], [1, 1]],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseMap::Rotation { .. } => 1,
            BaseMap::Torus { .. } => 2,
            BaseMap::Identity { dim } | BaseMap::Custom { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaseMap::Rotation { angle } if !angle.is_finite() => {
                Err(Error::invalid("rotation angle must be finite"))
            }
            BaseMap::Torus { matrix: m } => {
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                if det.abs() != 1 {
                    Err(Error::invalid(alloc::format!(
                        "torus matrix must be unimodular, determinant is {det}"
                    )))
                } else {
                    Ok(())
                }
            }
            BaseMap::Identity { dim: 0 } | BaseMap::Custom { dim: 0, .. } => {
                Err(Error::invalid("base dimension must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        match self {
            BaseMap::Rotation { angle } => out[0] = wrap01(y[0] + angle),
            BaseMap::Torus { matrix: m } => {
                let a = m[0][0] as f64 * y[0] + m[0][1] as f64 * y[1];
                let b = m[1][0] as f64 * y[0] + m[1][1] as f64 * y[1];
                out[0] = wrap01(a);
                out[1] = wrap01(b);
            }
            BaseMap::Identity { .. } => out.copy_from_slice(y),
            BaseMap::Custom { forward, .. } => forward(y, out),
        }
    }

    pub fn apply_inverse(&self, y: &[f64], out: &mut [f64]) {
        match self {
            BaseMap::Rotation { angle } => out[0] = wrap01(y[0] - angle),
            BaseMap::Torus { matrix: m } => {
                let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) as f64;
                let a = det * (m[1][1] as f64 * y[0] - m[0][1] as f64 * y[1]);
                let b = det * (-(m[1][0] as f64) * y[0] + m[0][0] as f64 * y[1]);
                out[0] = wrap01(a);
                out[1] = wrap01(b);
            }
            BaseMap::Identity { .. } => out.copy_from_slice(y),
            BaseMap::Custom { inverse, .. } => inverse(y, out),
        }
    }

    /// `f^n(y)` for any integer `n`.
    pub fn iterate(&self, y: &[f64], n: i64, out: &mut [f64]) {
        out.copy_from_slice(y);
        if let BaseMap::Rotation { angle } = self {
            out[0] = wrap01(y[0] + n as f64 * angle);
            return;
        }
        let mut tmp = out.to_vec();
        for _ in 0..n.unsigned_abs() {
            if n > 0 {
                self.apply(&tmp, out);
            } else {
                self.apply_inverse(&tmp, out);
            }
            tmp.copy_from_slice(out);
        }
    }
}

/// `Ω = M × [0,1] / (y,1) ~ (f(y),0)`.
#[derive(Debug, Clone)]
pub struct SuspensionSpace {
    pub base: BaseMap,
}

pub fn suspend(base: BaseMap) -> Result<SuspensionSpace> {
    base.validate()?;
    Ok(SuspensionSpace { base })
}

impl SuspensionSpace {
    /// Dimension of `Ω`.
    pub fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    /// Unit-speed flow, in closed form.
    pub fn unit_flow(&self, p: &[f64], t: f64) -> Vec<f64> {
        let d = self.base.dim();
        let total = p[d] + t;
        let n = total.floor();
        let mut out = vec![0.0; d + 1];
        self.base.iterate(&p[..d], n as i64, &mut out[..d]);
        out[d] = (total - n).clamp(0.0, 1.0 - f64::EPSILON);
        out
    }

    /// Brings `s` into `[0, 1)` across the seam.
    pub fn canonical(&self, p: &[f64]) -> Vec<f64> {
        let d = self.base.dim();
        let mut q = p.to_vec();
        for v in &mut q[..d] {
            *v = wrap01(*v);
        }
        if (0.0..1.0).contains(&q[d]) {
            return q;
        }
        let n = q[d].floor();
        let y = q[..d].to_vec();
        self.base.iterate(&y, n as i64, &mut q[..d]);
        q[d] -= n;
        q
    }

    pub fn metric(&self) -> SuspensionMetric {
        SuspensionMetric {
            base: self.base.clone(),
        }
    }
}

/// Sup of the flat torus distance and the fibre distance, minimised over
/// the two representatives of a point near the seam.
#[derive(Debug, Clone)]
pub struct SuspensionMetric {
    pub base: BaseMap,
}

impl SuspensionMetric {
    fn direct(ya: &[f64], sa: f64, yb: &[f64], sb: f64) -> f64 {
        torus_dist(ya, yb).max((sa - sb).abs())
    }
}

impl ChartMetric for SuspensionMetric {
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.base.dim();
        let (ya, sa) = (&a[..d], a[d]);
        let (yb, sb) = (&b[..d], b[d]);
        let mut best = Self::direct(ya, sa, yb, sb);
        let mut img = [0.0; 4];
        let img = &mut img[..d];
        // (y, s) is also (f(y), s - 1)
        self.base.apply(ya, img);
        best = best.min(Self::direct(img, sa - 1.0, yb, sb));
        self.base.apply(yb, img);
        best.min(Self::direct(ya, sa, img, sb - 1.0))
    }
}

/// A slow-down `α(q) = w((q - p₀)/R)` around the marked point `p₀`.
///
/// The difference `q - p₀` is taken with wrap-around in the base. The ball
/// of radius `R` must stay clear of the seam, so `R <= s(p₀) <= 1 - R`.
#[derive(Debug, Clone)]
pub struct SlowDownSpec {
    center: Vec<f64>,
    profile: RadialW,
    chart_radius: f64,
}

impl SlowDownSpec {
    pub fn new(center: Vec<f64>, profile: RadialW, chart_radius: f64) -> Result<Self> {
        if profile.dim != center.len() {
            return Err(Error::invalid("profile dimension must match the suspension"));
        }
        if !(chart_radius > 0.0 && chart_radius <= 0.5) {
            return Err(Error::invalid("chart radius must lie in (0, 1/2]"));
        }
        let d = center.len() - 1;
        if center[..d].iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::invalid("marked point base coordinates must lie in [0, 1)"));
        }
        let s = center[d];
        if !(s >= chart_radius && s <= 1.0 - chart_radius) {
            return Err(Error::invalid("the slow-down ball must not meet the seam"));
        }
        Ok(SlowDownSpec {
            center,
            profile,
            chart_radius,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn profile(&self) -> &RadialW {
        &self.profile
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }

    fn base_offset(&self, y: &[f64]) -> f64 {
        let d = self.center.len() - 1;
        torus_dist(y, &self.center[..d])
    }

    fn alpha_split(&self, dy: f64, s: f64) -> f64 {
        let ds = s - self.center[self.center.len() - 1];
        let r = (dy * dy + ds * ds).sqrt() / self.chart_radius;
        self.profile.profile(r)
    }

    pub fn alpha(&self, p: &[f64]) -> f64 {
        let d = self.center.len() - 1;
        self.alpha_split(self.base_offset(&p[..d]), p[d])
    }
}

pub type SpeedFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The factor `α` of the time-changed field `α·X`.
#[derive(Clone)]
pub enum Speed {
    Unit,
    /// Constant speed `c`; the fibre takes time `1/c`.
    Constant(f64),
    SlowDown(SlowDownSpec),
    Custom(SpeedFn),
}

impl fmt::Debug for Speed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speed::Unit => write!(f, "Unit"),
            Speed::Constant(c) => write!(f, "Constant({c})"),
            Speed::SlowDown(s) => write!(f, "SlowDown({s:?})"),
            Speed::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Speed {
    /// A constant roof `c` is the constant speed `1/c`.
    pub fn roof(c: f64) -> Self {
        Speed::Constant(1.0 / c)
    }
}

/// State after following the flow for a while.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FlowPoint {
    pub point: Vec<f64>,
    /// `∫ a` along the orbit when an observable was supplied.
    pub theta: f64,
    /// The orbit reached the stagnation zone of the marked point.
    pub stagnant: bool,
    pub status: Status,
}

/// Default integrator tolerance for time-changed flows.
pub const FLOW_TOL: f64 = 1e-10;

/// The time-changed flow `α·X` on a suspension.
#[derive(Debug, Clone)]
pub struct ReparamFlow {
    pub space: SuspensionSpace,
    pub speed: Speed,
    pub tol: f64,
}

pub fn reparam(space: SuspensionSpace, speed: Speed) -> Result<ReparamFlow> {
    match &speed {
        Speed::Constant(c) if !(*c > 0.0 && c.is_finite()) => {
            return Err(Error::invalid("constant speed must be positive and finite"));
        }
        Speed::SlowDown(s) if s.center.len() != space.dim() => {
            return Err(Error::invalid(
                "slow-down dimension does not match the suspension",
            ));
        }
        Speed::Custom(f) => {
            // sample a grid and reject negative values
            let d = space.dim();
            let n: usize = if d <= 2 { 64 } else { 16 };
            let mut p = vec![0.0; d];
            let total = n.pow(d as u32);
            for k in 0..total {
                let mut idx = k;
                for v in p.iter_mut() {
                    *v = (idx % n) as f64 / n as f64;
                    idx /= n;
                }
                let a = f(&p);
                if !(a >= 0.0) {
                    return Err(Error::Domain {
                        coordinate: d - 1,
                        value: p[d - 1],
                        reason: "speed must be nonnegative",
                    });
                }
            }
        }
        _ => {}
    }
    Ok(ReparamFlow {
        space,
        speed,
        tol: FLOW_TOL,
    })
}

/// Box region `y ∈ [y_lo, y_hi]`, `s ∈ [s_lo, s_hi]` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FiberBox {
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl FiberBox {
    fn contains_base(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.y_lo.iter().zip(&self.y_hi))
            .all(|(v, (l, h))| v >= l && v <= h)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let d = self.y_lo.len();
        self.contains_base(&p[..d]) && p[d] >= self.s_lo && p[d] <= self.s_hi
    }
}

/// Integrand of an additive functional.
type Observable<'a> = &'a dyn Fn(&[f64]) -> f64;

struct Augmented<'a> {
    flow: &'a ReparamFlow,
    observable: Option<Observable<'a>>,
}

impl FlowField for Augmented<'_> {
    fn dim(&self) -> usize {
        self.flow.space.dim() + 1
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.flow.space.dim();
        out.fill(0.0);
        out[d - 1] = self.flow.alpha(&x[..d]);
        if let Some(a) = self.observable {
            out[d] = a(&x[..d]);
        }
    }
    fn bounds(&self) -> ChartBounds {
        let d = self.flow.space.dim();
        let mut lo = vec![0.0; d + 1];
        let mut hi = vec![1.0; d + 1];
        hi[d - 1] = 2.0;
        lo[d] = f64::NEG_INFINITY;
        hi[d] = f64::INFINITY;
        ChartBounds::Box { lo, hi }
    }
}

impl FlowField for ReparamFlow {
    fn dim(&self) -> usize {
        self.space.dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.space.dim();
        out.fill(0.0);
        out[d - 1] = self.alpha(x);
    }
    fn bounds(&self) -> ChartBounds {
        let d = self.space.dim();
        let lo = vec![0.0; d];
        let mut hi = vec![1.0; d];
        hi[d - 1] = 2.0;
        ChartBounds::Box { lo, hi }
    }
}

impl ReparamFlow {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn alpha(&self, p: &[f64]) -> f64 {
        match &self.speed {
            Speed::Unit => 1.0,
            Speed::Constant(c) => *c,
            Speed::SlowDown(s) => s.alpha(p),
            Speed::Custom(f) => f(p),
        }
    }

    fn constant_speed(&self) -> Option<f64> {
        match self.speed {
            Speed::Unit => Some(1.0),
            Speed::Constant(c) => Some(c),
            _ => None,
        }
    }

    /// Follows the flow for time `t`.
    pub fn advance(&self, p: &[f64], t: f64) -> Result<FlowPoint> {
        self.advance_inner(p, t, None)
    }

    /// Follows the flow for time `t` and accumulates `θ(t, p) = ∫_0^t a(φ_s p) ds`.
    pub fn advance_theta(&self, p: &[f64], t: f64, a: &dyn Fn(&[f64]) -> f64) -> Result<FlowPoint> {
        self.advance_inner(p, t, Some(a))
    }

    /// `θ(t, p) = ∫_0^t a(φ_s p) ds`.
    pub fn theta(&self, a: &dyn Fn(&[f64]) -> f64, p: &[f64], t: f64) -> Result<f64> {
        Ok(self.advance_theta(p, t, a)?.theta)
    }

    fn advance_inner(&self, p: &[f64], t: f64, a: Option<Observable>) -> Result<FlowPoint> {
        let d = self.space.dim();
        if p.len() != d {
            return Err(Error::invalid("point dimension does not match the suspension"));
        }
        if !(t >= 0.0) {
            return Err(Error::invalid("flow time must be nonnegative"));
        }
        let start = self.space.canonical(p);
        if let (Some(c), None) = (self.constant_speed(), a) {
            return Ok(FlowPoint {
                point: self.space.unit_flow(&start, c * t),
                theta: 0.0,
                stagnant: false,
                status: Status::Completed,
            });
        }
        let aug = Augmented {
            flow: self,
            observable: a,
        };
        let mut state = start;
        state.push(0.0);
        let mut remaining = t;
        let mut status = Status::Completed;
        let mut stagnant = false;
        let g = |x: &[f64]| x[d - 1] - 1.0;
        // step cap, tightened whenever a single step jumps past the chart box
        let mut max_step = f64::INFINITY;
        while remaining > 0.0 {
            let speed = self.alpha(&state[..d]);
            if speed < STAGNATION_ALPHA {
                stagnant = true;
                break;
            }
            let mut hit = None;
            let opts = IntegrateOptions::new(self.tol).max_step(max_step);
            let summary = drive(&aug, &state, remaining, opts, |st, seg| {
                match first_crossing(st, seg, &g, Orientation::Increasing) {
                    Some(h) => {
                        hit = Some(h);
                        false
                    }
                    None => true,
                }
            });
            match hit {
                Some((tau, x)) => {
                    remaining -= tau;
                    let y = x[..d - 1].to_vec();
                    self.space.base.apply(&y, &mut state[..d - 1]);
                    state[d - 1] = 0.0;
                    state[d] = x[d];
                }
                None if summary.status == Status::ExitedChart => {
                    remaining -= summary.t;
                    state = summary.x;
                    max_step = max_step.min(0.5 / speed) * 0.5;
                }
                None => {
                    state = summary.x;
                    status = summary.status;
                    if status == Status::Completed && self.alpha(&state[..d]) < STAGNATION_ALPHA {
                        stagnant = true;
                    }
                    break;
                }
            }
        }
        let theta = state[d];
        state.truncate(d);
        Ok(FlowPoint {
            point: state,
            theta,
            stagnant,
            status,
        })
    }

    /// `∫_{s0}^{s1} ds / α(y, s)`: the time the flow spends on that part of
    /// the fibre over `y`. Infinite when the fibre runs into the marked point.
    pub fn fiber_time(&self, y: &[f64], s0: f64, s1: f64) -> f64 {
        if s1 <= s0 {
            return 0.0;
        }
        let d = self.space.dim();
        match &self.speed {
            Speed::Unit => s1 - s0,
            Speed::Constant(c) => (s1 - s0) / c,
            Speed::SlowDown(sd) => {
                let dy = sd.base_offset(y);
                let r = sd.chart_radius;
                if dy >= r {
                    return s1 - s0;
                }
                let sc = sd.center[d - 1];
                let lo = (sc - r).max(s0);
                let hi = (sc + r).min(s1);
                let mut total = (s1 - s0) - (hi - lo).max(0.0);
                if hi <= lo {
                    return total;
                }
                let mid = sc.clamp(lo, hi);
                if sd.alpha_split(dy, mid) < STAGNATION_ALPHA {
                    return f64::INFINITY;
                }
                let inv = |s: f64| 1.0 / sd.alpha_split(dy, s);
                total += adaptive_simpson(inv, lo, mid, 1e-10, 60);
                total += adaptive_simpson(inv, mid, hi, 1e-10, 60);
                total
            }
            Speed::Custom(f) => {
                let mut p = y.to_vec();
                p.push(0.0);
                adaptive_simpson(
                    |s| {
                        p[d - 1] = s;
                        1.0 / f(&p)
                    },
                    s0,
                    s1,
                    1e-10,
                    40,
                )
            }
        }
    }

    /// Time to go from `(y, 0)` to `(f(y), 0)`; `inf` when the fibre runs into
    /// the stagnation zone of the marked point.
    pub fn gamma_return(&self, y: &[f64]) -> f64 {
        let t = self.fiber_time(y, 0.0, 1.0);
        if t.is_finite() {
            t
        } else {
            f64::INFINITY
        }
    }

    /// Lower bound `chord_i / β_{i-1}` from the nested balls of radius
    /// `R/(i+1)`, on which the slow-down profile is at most `β_{i-1}`.
    /// Returns 0 when the speed is not a slow-down.
    pub fn gamma_lower_bound(&self, y: &[f64]) -> f64 {
        let Speed::SlowDown(sd) = &self.speed else {
            return 0.0;
        };
        let dy = sd.base_offset(y);
        let g = &sd.profile.gseries;
        let mut best: f64 = 0.0;
        for i in 0..=g.len() {
            let r = sd.chart_radius / (i as f64 + 1.0);
            if dy >= r {
                break;
            }
            let beta = g.beta_before(i).unwrap_or(1.0);
            let chord = 2.0 * (r * r - dy * dy).sqrt();
            best = best.max(chord / beta);
        }
        best
    }

    /// `s` at which the flow started at `(y, 0)` has spent time `tau` on the
    /// fibre (`tau` below the fibre's full return time).
    fn fiber_position(&self, y: &[f64], tau: f64) -> f64 {
        if let Some(c) = self.constant_speed() {
            return (c * tau).min(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.fiber_time(y, 0.0, mid) < tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Time spent in `region` by the orbit of `(y0, 0)`, reported at every
    /// horizon in `ts` (increasing). Fibre traversal times are computed by
    /// quadrature, so long horizons stay cheap.
    pub fn occupation_series(
        &self,
        y0: &[f64],
        ts: &[f64],
        region: &FiberBox,
    ) -> Result<Vec<OccupancyResult>> {
        let db = self.space.base.dim();
        if y0.len() != db || region.y_lo.len() != db || region.y_hi.len() != db {
            return Err(Error::invalid("dimension mismatch in occupation request"));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::invalid("horizons must be nonnegative and increasing"));
        }
        let mut out = Vec::with_capacity(ts.len());
        let mut y = y0.to_vec();
        let mut next = vec![0.0; db];
        let mut elapsed = 0.0;
        let mut j = 0.0;
        let mut k = 0;
        while k < ts.len() {
            let g = self.gamma_return(&y);
            let inside = region.contains_base(&y);
            if elapsed + g <= ts[k] {
                if inside {
                    j += self.fiber_time(&y, region.s_lo, region.s_hi);
                }
                elapsed += g;
                self.space.base.apply(&y, &mut next);
                core::mem::swap(&mut y, &mut next);
                continue;
            }
            // horizon ts[k] falls inside this fibre
            let s_star = self.fiber_position(&y, ts[k] - elapsed);
            let partial = if inside {
                self.fiber_time(&y, region.s_lo, region.s_hi.min(s_star))
            } else {
                0.0
            };
            let j_total = (j + partial).clamp(0.0, ts[k]);
            out.push(OccupancyResult {
                t_total: ts[k],
                j: j_total,
                lambda: None,
                status: Status::Completed,
            });
            k += 1;
        }
        Ok(out)
    }
}

/// Samples the time-changed flow at integer times.
pub struct SuspensionSampler<'a> {
    pub flow: &'a ReparamFlow,
}

impl OrbitSampler for SuspensionSampler<'_> {
    fn dim(&self) -> usize {
        self.flow.space.dim()
    }

    fn sample(&self, x0: &[f64], steps: usize, out: &mut Vec<f64>) -> Result<()> {
        let mut p = self.flow.space.canonical(x0);
        out.extend_from_slice(&p);
        for _ in 0..steps {
            p = self.flow.advance(&p, 1.0)?.point;
            out.extend_from_slice(&p);
        }
        Ok(())
    }
}

/// Samples the base map at integer iterates.
pub struct BaseSampler<'a> {
    pub base: &'a BaseMap,
}

impl OrbitSampler for BaseSampler<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample(&self, x0: &[f64], steps: usize, out: &mut Vec<f64>) -> Result<()> {
        let mut y = x0.to_vec();
        let mut next = y.clone();
        out.extend_from_slice(&y);
        for _ in 0..steps {
            self.base.apply(&y, &mut next);
            core::mem::swap(&mut y, &mut next);
            out.extend_from_slice(&y);
        }
        Ok(())
    }
}

/// Birkhoff estimate of `∫ g dμ̂` normalised by the estimate of `E(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SuspendedAverage {
    pub value: f64,
    /// Time average of `a`.
    pub mean_a: f64,
    /// The orbit is short or its two halves disagree by more than 1%.
    pub low_confidence: bool,
}

/// Orbits shorter than this are always flagged low-confidence.
pub const MIN_AVERAGE_LENGTH: f64 = 100.0;

/// `∫ g·a / ∫ a` along the unit-speed orbit of `p0` over `orbit_length`.
pub fn suspended_average(
    space: &SuspensionSpace,
    a: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    p0: &[f64],
    orbit_length: f64,
) -> Result<SuspendedAverage> {
    let d = space.dim();
    if p0.len() != d {
        return Err(Error::invalid("point dimension does not match the suspension"));
    }
    if !(orbit_length > 0.0) {
        return Err(Error::invalid("orbit length must be positive"));
    }
    let gl = GaussLegendre::new(16);
    let mut p = space.canonical(p0);
    let mut sums = [[0.0f64; 2]; 2]; // [half][a, g·a]
    let mut elapsed = 0.0;
    let mut next = vec![0.0; d - 1];
    while elapsed < orbit_length {
        let s0 = p[d - 1];
        let span = (1.0 - s0).min(orbit_length - elapsed);
        let half = usize::from(elapsed >= 0.5 * orbit_length);
        let mut q = p.clone();
        for (s, w) in gl.points(s0, s0 + span) {
            q[d - 1] = s;
            let av = a(&q);
            sums[half][0] += w * av;
            sums[half][1] += w * av * g(&q);
        }
        elapsed += span;
        if s0 + span >= 1.0 {
            space.base.apply(&p[..d - 1], &mut next);
            p[..d - 1].copy_from_slice(&next);
            p[d - 1] = 0.0;
        } else {
            p[d - 1] = s0 + span;
        }
    }
    let total_a = sums[0][0] + sums[1][0];
    let total_ga = sums[0][1] + sums[1][1];
    if !(total_a > 0.0) {
        return Err(Error::invalid("observable a must be positive along the orbit"));
    }
    let value = total_ga / total_a;
    let halves: [f64; 2] = core::array::from_fn(|h| sums[h][1] / sums[h][0]);
    let spread = (halves[0] - halves[1]).abs();
    let low_confidence = orbit_length < MIN_AVERAGE_LENGTH || !(spread <= 1e-2 * value.abs().max(1e-2));
    Ok(SuspendedAverage {
        value,
        mean_a: total_a / orbit_length,
        low_confidence,
    })
}

/// Minimum over 1000 evenly spaced centres of the fraction of the first
/// `orbit_length` rotation iterates of 0 that land in the closed
/// `eps`-ball around the centre.
pub fn min_ball_frequency(base: &BaseMap, eps: f64, orbit_length: usize) -> Result<f64> {
    let BaseMap::Rotation { angle } = base else {
        return Err(Error::invalid(
            "ball frequencies are defined for circle rotations",
        ));
    };
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::invalid("eps must lie in (0, 1/2]"));
    }
    if orbit_length == 0 {
        return Err(Error::invalid("orbit length must be positive"));
    }
    if eps >= 0.5 {
        return Ok(1.0);
    }
    let mut pts: Vec<f64> = (0..orbit_length).map(|k| wrap01(k as f64 * angle)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let count_in = |lo: f64, hi: f64| {
        // points in [lo, hi] with 0 <= lo <= hi <= 1
        pts.partition_point(|v| *v <= hi) - pts.partition_point(|v| *v < lo)
    };
    const CENTRES: usize = 1000;
    let mut min = f64::INFINITY;
    for j in 0..CENTRES {
        let c = j as f64 / CENTRES as f64;
        let (lo, hi) = (c - eps, c + eps);
        let mut n = count_in(lo.max(0.0), hi.min(1.0));
        if lo < 0.0 {
            n += count_in(lo + 1.0, 1.0);
        }
        if hi > 1.0 {
            n += count_in(0.0, hi - 1.0);
        }
        min = min.min(n as f64 / orbit_length as f64);
    }
    Ok(min)
}

/// `δ(i₀ + i)` for `i = 1..=n`, estimated as ball frequencies at radius
/// `1/(i₀ + i)`.
pub fn estimate_deltas(base: &BaseMap, i0: usize, n: usize, orbit_length: usize) -> Result<Vec<f64>> {
    (1..=n)
        .map(|i| min_ball_frequency(base, 1.0 / (i0 + i) as f64, orbit_length))
        .collect()
}

/// `β_{i-1} = l · δ(i₀+i) / (i₀+i)` for `i = 1..=deltas.len()`, where
/// `deltas[i-1] = δ(i₀+i)`.
pub fn beta_ladder(l: f64, deltas: &[f64], i0: usize) -> Result<Vec<f64>> {
    if !(l > 0.0) {
        return Err(Error::invalid("segment length must be positive"));
    }
    let betas: Vec<f64> = deltas
        .iter()
        .enumerate()
        .map(|(k, d)| l * d / (i0 + k + 1) as f64)
        .collect();
    if betas.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::invalid("every delta must be positive"));
    }
    if betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("beta ladder is not strictly decreasing"));
    }
    Ok(betas)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AbramovParams {
    pub seeds: usize,
    /// Horizons in base iterates; the flow uses `round(c · t)`.
    pub t1: usize,
    pub t2: usize,
    pub eps_grid: Vec<f64>,
    /// Length of the seed segment.
    pub patch: f64,
    pub rng_seed: u64,
}

impl AbramovParams {
    /// Flow horizons `(round(c·t1), round(c·t2))`, kept at least one apart.
    pub fn flow_horizons(&self, roof: f64) -> (usize, usize) {
        let ft1 = ((self.t1 as f64) * roof).round().max(1.0) as usize;
        let ft2 = ((self.t2 as f64) * roof).round().max(ft1 as f64 + 1.0) as usize;
        (ft1, ft2)
    }
}

impl Default for AbramovParams {
    fn default() -> Self {
        AbramovParams {
            seeds: 4096,
            t1: 2,
            t2: 7,
            eps_grid: vec![0.1, 0.07, 0.05],
            patch: 0.05,
            rng_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AbramovRow {
    pub epsilon: f64,
    pub base: SlopeEstimate,
    pub flow: SlopeEstimate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AbramovReport {
    pub roof: f64,
    pub h_flow: f64,
    pub h_base: f64,
    /// `h_flow · c / h_base`; `None` when the base estimate is zero.
    pub ratio: Option<f64>,
    pub low_confidence: bool,
    pub rows: Vec<AbramovRow>,
}

/// Seeds evenly spaced on a segment of length `patch` through a random
/// point, in a random base direction.
pub fn segment_seeds(dim_base: usize, n: usize, patch: f64, rng_seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let centre: Vec<f64> = (0..=dim_base).map(|_| rng.gen::<f64>()).collect();
    let mut dir: Vec<f64> = (0..dim_base).map(|_| rng.gen::<f64>() - 0.5).collect();
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    dir.iter_mut().for_each(|v| *v /= len);
    (0..n)
        .map(|k| {
            let u = ((k as f64 + 0.5) / n as f64 - 0.5) * patch;
            let mut p = centre.clone();
            for (pi, di) in p.iter_mut().zip(&dir) {
                *pi = wrap01(*pi + u * di);
            }
            p
        })
        .collect()
}

/// Separated-set growth of the base map against that of the suspension
/// with constant roof `c`, per `eps`; the reported rates are the maxima
/// over the grid.
pub fn abramov_check(base: &BaseMap, roof: f64, params: &AbramovParams) -> Result<AbramovReport> {
    if !(0.25..=4.0).contains(&roof) {
        return Err(Error::invalid("roof constant must lie in [1/4, 4]"));
    }
    if params.seeds == 0 || params.eps_grid.is_empty() {
        return Err(Error::invalid("need at least one seed and one eps"));
    }
    let space = suspend(base.clone())?;
    let flow = reparam(space.clone(), Speed::roof(roof))?;
    let db = base.dim();
    let seeds = segment_seeds(db, params.seeds, params.patch, params.rng_seed);
    let base_seeds: Vec<Vec<f64>> = seeds.iter().map(|p| p[..db].to_vec()).collect();

    let (_, ft2) = params.flow_horizons(roof);
    let base_orbits = crate::flowsim::sample_orbits(&BaseSampler { base }, &base_seeds, params.t2)?;
    let flow_orbits = crate::flowsim::sample_orbits(&SuspensionSampler { flow: &flow }, &seeds, ft2)?;
    abramov_from_orbits(base, roof, params, &base_orbits, &flow_orbits)
}

/// The reduction step of [`abramov_check`], for callers that sample the
/// orbits themselves (for instance in parallel).
pub fn abramov_from_orbits(
    base: &BaseMap,
    roof: f64,
    params: &AbramovParams,
    base_orbits: &[Vec<f64>],
    flow_orbits: &[Vec<f64>],
) -> Result<AbramovReport> {
    let db = base.dim();
    let (ft1, ft2) = params.flow_horizons(roof);
    let torus = FlatTorus { period: 1.0 };
    let metric = SuspensionMetric { base: base.clone() };
    let mut rows = Vec::new();
    for &eps in &params.eps_grid {
        let b = slope_from_orbits(base_orbits, db, params.t1, params.t2, eps, &torus)?;
        let f = slope_from_orbits(flow_orbits, db + 1, ft1, ft2, eps, &metric)?;
        rows.push(AbramovRow {
            epsilon: eps,
            base: b,
            flow: f,
        });
    }
    let best_base = rows
        .iter()
        .max_by(|a, b| a.base.slope.partial_cmp(&b.base.slope).unwrap())
        .unwrap();
    let best_flow = rows
        .iter()
        .max_by(|a, b| a.flow.slope.partial_cmp(&b.flow.slope).unwrap())
        .unwrap();
    let h_base = best_base.base.slope.max(0.0);
    let h_flow = best_flow.flow.slope.max(0.0);
    let low_confidence = best_base.base.saturated
        || best_flow.flow.saturated
        || best_base.base.card1 < 2
        || best_flow.flow.card1 < 2;
    Ok(AbramovReport {
        roof,
        h_flow,
        h_base,
        ratio: (h_base > 0.0).then(|| h_flow * roof / h_base),
        low_confidence,
        rows,
    })
}
