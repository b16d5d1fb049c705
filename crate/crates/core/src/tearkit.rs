//! The tear chart: a planar flow that opens the stationary segment
//! `F₀ = [-1, 1] × {0}` into the lens under `γ₀`, its rotation about the
//! `x₁`-axis, the projection back to the straight flow, and the embedded
//! disk fields.
//!
//! The chart fields move in the `+x₁` direction, so transits run from the
//! section `x₁ = -3` to `x₁ = +3`. The lower half-plane is the mirror image
//! of the upper one.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bumpkit::{gamma0, gamma0_prime, smooth_step, Eta, VHat0};
use crate::diskflow::DiskField;
use crate::flowsim::{
    first_return, integrate, norm, ChartBounds, FlowField, FnField, Orientation, ReturnOutcome, SectionSpec,
    Status,
};
use crate::{Error, Result};

/// Radius of the ball on which the tear fields live.
pub const TEAR_CHART_RADIUS: f64 = 8.0;
/// Departure section `{x₁ = -3}`.
pub const H1_X1: f64 = -3.0;
/// Arrival section `{x₁ = +3}`.
pub const H2_X1: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Region {
    /// On the curve `ρ_a`, `0 <= a <= 1`.
    U1 {
        a: f64,
    },
    /// On `σ_b`, `0 < b <= 1`.
    V1 {
        b: f64,
    },
    /// On `σ_b`, `1 < b <= 2`.
    W1 {
        b: f64,
    },
    Outside,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::U1 { .. } => "U1",
            Region::V1 { .. } => "V1",
            Region::W1 { .. } => "W1",
            Region::Outside => "outside",
        }
    }
}

/// `ρ_a(s) = (s, a γ₀(s))`.
pub fn rho_curve(a: f64, s: f64) -> [f64; 2] {
    [s, a * gamma0(s)]
}

/// `σ_b(s)`: `γ₀(s) + b` for `b <= 1`, `(2-b)(γ₀(s)+1) + 2(b-1)` above.
pub fn sigma_curve(b: f64, s: f64) -> [f64; 2] {
    let g = gamma0(s);
    if b <= 1.0 {
        [s, g + b]
    } else {
        [s, (2.0 - b) * (g + 1.0) + 2.0 * (b - 1.0)]
    }
}

/// Which curve family a point of the upper half-plane lies on. Points on a
/// boundary between two regions go to the lower one.
pub fn classify(p: [f64; 2]) -> Region {
    let [x1, x2] = p;
    if !(x1 > -2.0 && x1 < 2.0) || !(x2 >= 0.0) {
        return Region::Outside;
    }
    let g = gamma0(x1);
    if x2 <= g {
        let a = if g > 0.0 { x2 / g } else { 0.0 };
        Region::U1 { a }
    } else if x2 <= g + 1.0 {
        Region::V1 { b: x2 - g }
    } else if x2 <= 2.0 {
        Region::W1 {
            b: (x2 - 2.0 * g) / (1.0 - g),
        }
    } else {
        Region::Outside
    }
}

/// The projection `Δ`: `(x₁, 0)` on `ρ_a`, `(x₁, b)` on `σ_b`, the identity
/// elsewhere.
pub fn delta(p: [f64; 2]) -> [f64; 2] {
    let sign = if p[1] < 0.0 { -1.0 } else { 1.0 };
    let q = [p[0], p[1].abs()];
    match classify(q) {
        Region::U1 { .. } => [p[0], 0.0],
        Region::V1 { b } | Region::W1 { b } => [p[0], sign * b],
        Region::Outside => p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum TearVariant {
    /// Piecewise field, `C²` across the region boundaries.
    Z,
    /// `W₁` branch replaced by the `v̂₀` blend.
    Z1,
}

/// The planar tear field.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TearField {
    pub variant: TearVariant,
    pub eta: Eta,
    /// Blend for the `W₁` branch of [`TearVariant::Z1`]: 1 up to the top of
    /// `V₁` (`γ₀ + 1`), 0 from `x₂ = 2` on.
    pub vhat0: VHat0,
}

impl TearField {
    pub fn new(variant: TearVariant) -> Self {
        TearField {
            variant,
            eta: Eta::new(2),
            vhat0: VHat0::shifted(1.0),
        }
    }

    fn eta2(&self, x1: f64, x2: f64) -> f64 {
        self.eta.axisym(x1, x2.abs())
    }

    /// Field value at a planar point.
    pub fn planar(&self, p: [f64; 2]) -> [f64; 2] {
        let sign = if p[1] < 0.0 { -1.0 } else { 1.0 };
        let (x1, x2) = (p[0], p[1].abs());
        let [u, v] = match classify([x1, x2]) {
            Region::U1 { a } => {
                let e = self.eta2(x1, 0.0);
                [e, e * a * gamma0_prime(x1)]
            }
            Region::V1 { b } => {
                let e = self.eta2(x1, b);
                [e, e * gamma0_prime(x1)]
            }
            Region::W1 { b } => match self.variant {
                TearVariant::Z => {
                    let e = self.eta2(x1, b);
                    [e, e * (2.0 - b) * gamma0_prime(x1)]
                }
                TearVariant::Z1 => {
                    let vh = self.vhat0.value(x1, x2);
                    let e = self.eta2(x1, x2 - vh * gamma0(x1));
                    [e, e * vh * gamma0_prime(x1)]
                }
            },
            Region::Outside => [self.eta2(x1, x2), 0.0],
        };
        [u, sign * v]
    }
}

impl FlowField for TearField {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let v = self.planar([x[0], x[1]]);
        out.copy_from_slice(&v);
    }
    fn bounds(&self) -> ChartBounds {
        ChartBounds::Ball {
            radius: TEAR_CHART_RADIUS,
        }
    }
}

fn transverse_radius(x: &[f64]) -> f64 {
    x[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A planar tear field rotated about the `x₁`-axis in `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RotatedField {
    pub planar: TearField,
    pub dim: usize,
}

impl RotatedField {
    /// `dim` is `m + 1`; the usual choice is 5.
    pub fn new(variant: TearVariant, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("rotated fields need dimension at least 2"));
        }
        let mut planar = TearField::new(variant);
        planar.eta = Eta::new(dim);
        Ok(RotatedField { planar, dim })
    }
}

impl FlowField for RotatedField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let rho = transverse_radius(x);
        let [u, v] = self.planar.planar([x[0], rho]);
        out[0] = u;
        if rho == 0.0 {
            // on the axis the radial component is removable and zero
            out[1..].fill(0.0);
        } else {
            for (o, xi) in out[1..].iter_mut().zip(&x[1..]) {
                *o = v * xi / rho;
            }
        }
    }
    fn bounds(&self) -> ChartBounds {
        ChartBounds::Ball {
            radius: TEAR_CHART_RADIUS,
        }
    }
}

/// A tear field together with its projection onto the straight flow.
pub trait TearFlow: FlowField {
    /// `Δ` in the plane, `π̃` after rotation.
    fn project(&self, x: &[f64], out: &mut [f64]);
    /// Speed of the straight comparison flow at `x`.
    fn straight_speed(&self, x: &[f64]) -> f64;
}

impl TearFlow for TearField {
    fn project(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&delta([x[0], x[1]]));
    }
    fn straight_speed(&self, x: &[f64]) -> f64 {
        self.eta2(x[0], x[1])
    }
}

impl TearFlow for RotatedField {
    fn project(&self, x: &[f64], out: &mut [f64]) {
        let rho = transverse_radius(x);
        let [_, b] = delta([x[0], rho]);
        out[0] = x[0];
        if rho == 0.0 {
            out[1..].fill(0.0);
        } else {
            for (o, xi) in out[1..].iter_mut().zip(&x[1..]) {
                *o = b * xi / rho;
            }
        }
    }
    fn straight_speed(&self, x: &[f64]) -> f64 {
        self.planar.eta.value(x)
    }
}

/// Test grids for the semiconjugacy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum TearGrid {
    /// The axis `ρ₀`, `x₁ ∈ [-1.9, 1.9]`.
    Axis,
    /// `σ_b`, `x₁ ∈ [-1.9, 1.9]`.
    Sigma(f64),
    /// `ρ_a` over the lens, `x₁ ∈ [-0.95, 0.95]`.
    Rho(f64),
}

impl TearGrid {
    pub fn name(&self) -> alloc::string::String {
        match self {
            TearGrid::Axis => "axis".into(),
            TearGrid::Sigma(b) => alloc::format!("sigma_{b}"),
            TearGrid::Rho(a) => alloc::format!("rho_{a}"),
        }
    }

    /// `n` points, lifted to `R^dim` along a fixed transverse direction.
    pub fn points(&self, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = match self {
            TearGrid::Rho(_) => (-0.95, 0.95),
            _ => (-1.9, 1.9),
        };
        let dir = transverse_direction(dim);
        (0..n)
            .map(|k| {
                let s = if n == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                };
                let [x1, x2] = match self {
                    TearGrid::Axis => [s, 0.0],
                    TearGrid::Sigma(b) => sigma_curve(*b, s),
                    TearGrid::Rho(a) => rho_curve(*a, s),
                };
                let mut p = vec![x1];
                p.extend(dir.iter().map(|d| d * x2));
                p
            })
            .collect()
    }
}

/// Unit vector `(1, 2, …, dim-1)/|·|` in the transverse coordinates.
fn transverse_direction(dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (1..dim).map(|i| i as f64).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ResidualReport {
    /// Sup of `|Δ(φ(x,t)) - φ₀(Δ(x),t)|` over the retained samples.
    pub residual: f64,
    pub samples: usize,
    /// Samples whose orbit left the chart or stopped early.
    pub excluded: usize,
}

/// Number of comparison times per orbit on `[0, t_max]`.
const RESIDUAL_TIMES: usize = 100;

/// Sup over the grid and `t ∈ [0, t_max]` of the distance between the
/// projected orbit and the straight orbit of the projected start.
pub fn semiconjugacy_residual<F: TearFlow>(
    field: &F,
    t_max: f64,
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<ResidualReport> {
    if !(t_max > 0.0) {
        return Err(Error::invalid("tMax must be positive"));
    }
    let d = field.dim();
    let straight = FnField::new(d, |x: &[f64], o: &mut [f64]| {
        o.fill(0.0);
        o[0] = field.straight_speed(x);
    })
    .with_bounds(field.bounds());
    let mut residual: f64 = 0.0;
    let mut excluded = 0;
    let mut px = vec![0.0; d];
    let mut py = vec![0.0; d];
    for x in grid {
        let a = integrate(field, x, t_max, tol)?;
        field.project(x, &mut px);
        let b = integrate(&straight, &px, t_max, tol)?;
        if a.status != Status::Completed || b.status != Status::Completed {
            excluded += 1;
            continue;
        }
        for k in 0..=RESIDUAL_TIMES {
            let t = t_max * k as f64 / RESIDUAL_TIMES as f64;
            let (Some(ya), Some(yb)) = (a.interpolate(t), b.interpolate(t)) else {
                continue;
            };
            field.project(&ya, &mut py);
            let e = py
                .iter()
                .zip(&yb)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            residual = residual.max(e);
        }
    }
    Ok(ResidualReport {
        residual,
        samples: grid.len() - excluded,
        excluded,
    })
}

/// Result of following a point of `H₁` to `H₂`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Transit {
    Arrived {
        tau: f64,
        point: Vec<f64>,
        /// Max change of the transverse coordinates.
        transverse_error: f64,
    },
    /// No arrival by the time limit: the orbit runs into `F₀`.
    Stagnant,
}

/// Follows `x` (on `H₁`) until it crosses `H₂`.
pub fn transit<F: FlowField + ?Sized>(field: &F, x: &[f64], t_max: f64, tol: f64) -> Result<Transit> {
    let h2 = SectionSpec::coordinate(field.dim(), 0, H2_X1, Orientation::Increasing)?;
    Ok(match first_return(field, x, &h2, t_max, tol)? {
        ReturnOutcome::Crossed { point, tau } => {
            let transverse_error = point[1..]
                .iter()
                .zip(&x[1..])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Transit::Arrived {
                tau,
                point,
                transverse_error,
            }
        }
        _ => Transit::Stagnant,
    })
}

/// Random points of `H₁` with transverse radius in `[rho_lo, rho_hi]`.
pub fn h1_samples(n: usize, dim: usize, rho_lo: f64, rho_hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let dir = loop {
                let v: Vec<f64> = (1..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = norm(&v);
                if r > 0.1 && r <= 1.0 {
                    break v.into_iter().map(|x| x / r).collect::<Vec<f64>>();
                }
            };
            let rho = rng.gen_range(rho_lo..=rho_hi);
            let mut p = vec![H1_X1];
            p.extend(dir.iter().map(|d| d * rho));
            p
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MirrorReport {
    /// Max transverse change over the arrived samples.
    pub max_transverse_error: f64,
    pub arrived: usize,
    pub stagnant: usize,
}

/// Transverse coordinates at `H₂` against those at `H₁`.
pub fn mirror_return<F: FlowField + ?Sized>(
    field: &F,
    samples: &[Vec<f64>],
    t_max: f64,
    tol: f64,
) -> Result<MirrorReport> {
    let mut rep = MirrorReport {
        max_transverse_error: 0.0,
        arrived: 0,
        stagnant: 0,
    };
    for x in samples {
        match transit(field, x, t_max, tol)? {
            Transit::Arrived { transverse_error, .. } => {
                rep.arrived += 1;
                rep.max_transverse_error = rep.max_transverse_error.max(transverse_error);
            }
            Transit::Stagnant => rep.stagnant += 1,
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RatioReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub used: usize,
    /// Samples that stagnate under either field.
    pub excluded: usize,
}

/// Min and max of `τ(B, x) / τ(A, x)`, the `H₁ → H₂` transit times.
pub fn return_ratio<A, B>(a: &A, b: &B, samples: &[Vec<f64>], t_max: f64, tol: f64) -> Result<RatioReport>
where
    A: FlowField + ?Sized,
    B: FlowField + ?Sized,
{
    let mut rep = RatioReport {
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        used: 0,
        excluded: 0,
    };
    for x in samples {
        let ta = transit(a, x, t_max, tol)?;
        let tb = transit(b, x, t_max, tol)?;
        match (ta, tb) {
            (Transit::Arrived { tau: sa, .. }, Transit::Arrived { tau: sb, .. }) => {
                let r = sb / sa;
                rep.min_ratio = rep.min_ratio.min(r);
                rep.max_ratio = rep.max_ratio.max(r);
                rep.used += 1;
            }
            _ => rep.excluded += 1,
        }
    }
    if rep.used == 0 {
        rep.min_ratio = f64::NAN;
        rep.max_ratio = f64::NAN;
    }
    Ok(rep)
}

/// Scale of the flat factors in [`EmbeddedDiskFields::varsigma`].
pub const VARSIGMA_SCALE: f64 = 0.01;

/// Radius of the ball carrying the embedded fields.
pub const EMBED_CHART_RADIUS: f64 = 3.0;

/// A disk field placed on `D₁` (unit disk of the `x₁x₂`-plane) inside
/// `R^dim`, with trailing components pushing everything else in `D₂`
/// (the open ball of radius `√2`) away.
#[derive(Debug, Clone)]
pub struct EmbeddedDiskFields {
    pub disk: DiskField,
    pub dim: usize,
}

impl EmbeddedDiskFields {
    pub fn new(disk: DiskField, dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid("embedding needs at least one trailing coordinate"));
        }
        Ok(EmbeddedDiskFields { disk, dim })
    }

    fn planar_r2(x: &[f64]) -> f64 {
        x[0] * x[0] + x[1] * x[1]
    }

    fn trailing_r2(x: &[f64]) -> f64 {
        x[2..].iter().map(|v| v * v).sum()
    }

    pub fn in_d1(x: &[f64]) -> bool {
        Self::planar_r2(x) <= 1.0 && Self::trailing_r2(x) == 0.0
    }

    pub fn in_d2(x: &[f64]) -> bool {
        Self::planar_r2(x) + Self::trailing_r2(x) < 2.0
    }

    /// 1 on the unit ball, 0 outside `D₂`, smooth in `|x|²` between.
    pub fn cutoff(x: &[f64]) -> f64 {
        let r2 = Self::planar_r2(x) + Self::trailing_r2(x);
        1.0 - smooth_step(r2 - 1.0)
    }

    /// `ς`: zero on `D₁` and off `D₂`, positive in between.
    ///
    /// Built from `e^{-κ/u}` with a small `κ` so that the value stays
    /// representable up to a distance of about `κ/700` from `∂D₂` and `∂D₁`.
    pub fn varsigma(x: &[f64]) -> f64 {
        let flat = |u: f64| if u > 0.0 { (-VARSIGMA_SCALE / u).exp() } else { 0.0 };
        let p2 = Self::planar_r2(x);
        let t2 = Self::trailing_r2(x);
        (t2 + flat(p2 - 1.0)) * flat(2.0 - p2 - t2)
    }

    /// `(ẑ₁, ẑ₂)`: the unscaled disk field on `D₁`, with `α₀` extended by 0
    /// past the unit circle, cut off outside `D₂`.
    pub fn z_hat(&self, x: &[f64]) -> [f64; 2] {
        let c = Self::cutoff(x);
        let r2 = Self::planar_r2(x);
        let al = if r2 < 1.0 {
            self.disk.alpha0().value(r2)
        } else {
            0.0
        };
        [c * (-x[1] + al * x[0]), c * (x[0] + al * x[1])]
    }

    /// `β̂`: the disk speed factor on `D₁`, 1 outside `D₂`.
    pub fn beta_hat(&self, x: &[f64]) -> f64 {
        let c = Self::cutoff(x);
        let beta = self.disk.speed_profile(Self::planar_r2(x).sqrt());
        (1.0 - c) + c * beta
    }
}

impl FlowField for EmbeddedDiskFields {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let b = self.beta_hat(x);
        if Self::in_d1(x) {
            // exactly the disk field, evaluated in the same order
            let v = self.disk.eval_unchecked([x[0], x[1]]);
            out[0] = v[0];
            out[1] = v[1];
            out[2..].fill(0.0);
            return;
        }
        let [z1, z2] = self.z_hat(x);
        let s = Self::varsigma(x);
        out[0] = b * z1;
        out[1] = b * z2;
        out[2..].fill(b * s);
    }
    fn bounds(&self) -> ChartBounds {
        ChartBounds::Ball {
            radius: EMBED_CHART_RADIUS,
        }
    }
}
