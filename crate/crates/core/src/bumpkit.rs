//! Flat bump functions and the smooth profiles built from them.
//!
//! Every profile is an immutable value; evaluation is pure. Values that fall
//! below the smallest positive double are returned as exact `0.0`, which is
//! what `exp` does on its own for the exponents used here.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;

use crate::quad::{adaptive_simpson, GaussLegendre};
use crate::{Error, Result};

/// `e^{-1/t}` for `t > 0`, zero otherwise.
///
/// This is the unrestricted form; [`SmoothFnHandle::Psi`] restricts the domain
/// to `(-1, 1]`.
#[inline]
pub fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `e^{1/(x²-1)}` on `(-1, 1)`, zero outside. Even, flat at `±1`.
#[inline]
pub fn gamma0(x: f64) -> f64 {
    if x > -1.0 && x < 1.0 {
        (-1.0 / ((1.0 - x) * (1.0 + x))).exp()
    } else {
        0.0
    }
}

/// Derivative of [`gamma0`].
#[inline]
pub fn gamma0_prime(x: f64) -> f64 {
    if x > -1.0 && x < 1.0 {
        let d = -((1.0 - x) * (1.0 + x));
        -2.0 * x / (d * d) * (1.0 / d).exp()
    } else {
        0.0
    }
}

/// C^∞ step: 0 for `u <= 0`, 1 for `u >= 1`, flat at both ends.
#[inline]
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = psi(u);
        let b = psi(1.0 - u);
        a / (a + b)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_finite(x: &[f64]) -> Result<()> {
    for (i, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Domain {
                coordinate: i,
                value: *v,
                reason: "coordinate is not finite",
            });
        }
    }
    Ok(())
}

/// The series `g(t) = Σ 2^{-i-1} β_{i-1} Ψ(t - c_i)` truncated at `N` terms.
///
/// `betas[k]` holds `β_k` for `k = 0..N-1` and `cs[k]` holds `c_{k+1}`.
/// A tail term `2^{-N-2} β_{N-1} Ψ(t)` keeps the truncated sum positive on
/// `(0, c_N]`, where every shifted term is still zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GSeries {
    betas: Vec<f64>,
    cs: Vec<f64>,
}

impl GSeries {
    /// Uses the default shifts `c_i = 1/(i+1)`.
    pub fn new(betas: &[f64]) -> Result<Self> {
        let cs: Vec<f64> = (1..=betas.len()).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        Self::with_shifts(betas, &cs)
    }

    pub fn with_shifts(betas: &[f64], cs: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("beta sequence is empty"));
        }
        if betas.len() != cs.len() {
            return Err(Error::invalid("betas and shifts must have equal length"));
        }
        if !(betas[0] > 0.0 && betas[0] <= 1.0) {
            return Err(Error::invalid("beta_0 must lie in (0, 1]"));
        }
        if betas.windows(2).any(|w| !(w[1] > 0.0 && w[1] < w[0])) {
            return Err(Error::invalid("betas must be positive and strictly decreasing"));
        }
        if !(cs[0] > 0.0 && cs[0] < 1.0) || cs.windows(2).any(|w| !(w[1] > 0.0 && w[1] < w[0])) {
            return Err(Error::invalid(
                "shifts must be positive, strictly decreasing and below 1",
            ));
        }
        Ok(GSeries {
            betas: betas.to_vec(),
            cs: cs.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `β_{i-1}` with the convention `β_{-1} = 1`; `None` past the truncation.
    pub fn beta_before(&self, i: usize) -> Option<f64> {
        if i == 0 {
            Some(1.0)
        } else {
            self.betas.get(i - 1).copied()
        }
    }

    /// Sum of the first `n` shifted terms (no tail).
    pub fn partial_sum(&self, t: f64, n: usize) -> f64 {
        let mut scale = 0.25; // 2^{-i-1} for i = 1
        let mut acc = 0.0;
        for (beta, c) in self.betas.iter().zip(&self.cs).take(n) {
            acc += scale * beta * psi(t - c);
            scale *= 0.5;
        }
        acc
    }

    fn tail(&self, t: f64) -> f64 {
        let n = self.betas.len() as i32;
        2f64.powi(-n - 2) * self.betas[self.betas.len() - 1] * psi(t)
    }

    /// Truncated series plus tail.
    pub fn eval(&self, t: f64) -> f64 {
        self.partial_sum(t, self.len()) + self.tail(t)
    }
}

/// Radial profile `w(x) = g(|x|)` on the ball of radius 2.
///
/// On `|x| <= 1/2` the profile is the series itself; on `[1/2, 1]` it is
/// blended into 1 with [`smooth_step`]; beyond 1 it is identically 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RadialW {
    pub gseries: GSeries,
    pub dim: usize,
}

impl RadialW {
    pub fn profile(&self, r: f64) -> f64 {
        if r >= 1.0 {
            1.0
        } else if r <= 0.5 {
            self.gseries.eval(r)
        } else {
            let s = smooth_step((r - 0.5) / 0.5);
            (1.0 - s) * self.gseries.eval(r) + s
        }
    }

    /// `β_{i-1}`, the bound for the ball of radius `1/(i+1)`.
    pub fn ball_bound(&self, i: usize) -> Option<f64> {
        self.gseries.beta_before(i)
    }
}

/// Builds the slow-down profile from a strictly decreasing beta ladder.
pub fn build_w(betas: &[f64], dim: usize) -> Result<RadialW> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    Ok(RadialW {
        gseries: GSeries::new(betas)?,
        dim,
    })
}

/// Flat bump `α₀` on `[0, 1]`, vanishing at 0, at 1 and on each ladder circle.
///
/// `zeros` are squared radii in ascending order. Between consecutive zeros
/// `A < B` the value is `exp(1/((x-A)(x-B)))`. Inside a `frozen` span the
/// zeros are too dense to resolve in double precision; the function is 0
/// there, which is also what the formula underflows to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Alpha0 {
    zeros: Vec<f64>,
    frozen: Vec<(f64, f64)>,
}

impl Alpha0 {
    pub fn new(mut zeros: Vec<f64>, frozen: Vec<(f64, f64)>) -> Result<Self> {
        zeros.push(0.0);
        zeros.push(1.0);
        for &(lo, hi) in &frozen {
            if !(lo <= hi) {
                return Err(Error::invalid("frozen span must satisfy lo <= hi"));
            }
            zeros.push(lo);
            zeros.push(hi);
        }
        if zeros.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(Error::invalid("alpha0 zeros must lie in [0, 1]"));
        }
        zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
        zeros.dedup();
        Ok(Alpha0 { zeros, frozen })
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    /// Evaluation without the domain check; callers guarantee `x ∈ [0, 1]`.
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        if self.frozen.iter().any(|&(lo, hi)| x >= lo && x <= hi) {
            return 0.0;
        }
        let idx = self.zeros.partition_point(|z| *z < x);
        if idx < self.zeros.len() && self.zeros[idx] == x {
            return 0.0;
        }
        let hi = self.zeros[idx];
        let lo = self.zeros[idx - 1];
        (1.0 / ((x - lo) * (x - hi))).exp()
    }
}

/// Which exponent sign the `|x₁| > 1` branch of η uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum EtaBranch {
    /// `e^{-1/(x₁²-1)}`: bounded and flat at `|x₁| = 1`.
    #[default]
    Flat,
    /// `e^{+1/(x₁²-1)}`, which blows up as `|x₁| → 1⁺`.
    AsPrinted,
}

/// The chart speed η on `R^{m+1}`: `ρ³` plus an `x₁` bump inside the ball of
/// radius 2, blended to 1 across `2 <= |x| <= 4`. Here `ρ` is the distance
/// to the `x₁`-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Eta {
    pub dim: usize,
    pub branch: EtaBranch,
}

impl Eta {
    pub fn new(dim: usize) -> Self {
        Eta {
            dim,
            branch: EtaBranch::Flat,
        }
    }

    fn axial(&self, x1: f64) -> f64 {
        let d = x1 * x1 - 1.0;
        if d <= 0.0 {
            return 0.0;
        }
        match self.branch {
            EtaBranch::Flat => (-1.0 / d).exp(),
            EtaBranch::AsPrinted => (1.0 / d).exp(),
        }
    }

    /// η as a function of the axial coordinate and the transverse radius.
    pub fn axisym(&self, x1: f64, rho: f64) -> f64 {
        let r = (x1 * x1 + rho * rho).sqrt();
        if r >= 4.0 {
            return 1.0;
        }
        let core = rho.abs().powi(3) + self.axial(x1);
        if r <= 2.0 {
            core
        } else {
            let s = smooth_step((r - 2.0) / 2.0);
            (1.0 - s) * core + s
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let rho = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        self.axisym(x[0], rho)
    }
}

/// `ω̂₁`: `|x|²` on the ball of radius 1/2, blended to 1 on `[1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OmegaHat1 {
    pub dim: usize,
}

impl OmegaHat1 {
    pub fn profile(&self, r: f64) -> f64 {
        if r <= 0.5 {
            r * r
        } else if r >= 1.0 {
            1.0
        } else {
            let s = smooth_step((r - 0.5) / 0.5);
            (1.0 - s) * r * r + s
        }
    }
}

/// Where the plateau of `v̂₀` ends.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum VHatFloor {
    /// Plateau `|x₂| <= γ₀(x₁)`.
    #[default]
    Gamma0,
    /// Plateau `|x₂| <= γ₀(x₁) + offset`.
    ShiftedGamma0(f64),
}

/// The normalised cumulative integral
/// `v̂₀(x₁, x₂) = ∫_{x₂²}^4 v₀ / ∫_{ℓ²}^4 v₀` with
/// `v₀(s) = exp(1/(ℓ² - s) + 1/(s - 4))` on `(ℓ², 4)` and `ℓ` the floor curve.
///
/// Equal to 1 for `|x₂| <= ℓ(x₁)` and 0 for `|x₂| >= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VHat0 {
    pub floor: VHatFloor,
    pub rel_tol: f64,
}

impl Default for VHat0 {
    fn default() -> Self {
        VHat0 {
            floor: VHatFloor::Gamma0,
            rel_tol: 1e-8,
        }
    }
}

impl VHat0 {
    pub fn shifted(offset: f64) -> Self {
        VHat0 {
            floor: VHatFloor::ShiftedGamma0(offset),
            ..VHat0::default()
        }
    }

    pub fn floor_at(&self, x1: f64) -> f64 {
        match self.floor {
            VHatFloor::Gamma0 => gamma0(x1),
            VHatFloor::ShiftedGamma0(off) => gamma0(x1) + off,
        }
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        let l = self.floor_at(x1);
        let lo = l * l;
        let lower = x2 * x2;
        if lower >= 4.0 {
            return 0.0;
        }
        if lower <= lo {
            return 1.0;
        }
        // log-space: shift by the maximum exponent, attained at the midpoint
        let peak = -4.0 / (4.0 - lo);
        let integrand = |s: f64| {
            if s <= lo || s >= 4.0 {
                0.0
            } else {
                (1.0 / (lo - s) + 1.0 / (s - 4.0) - peak).exp()
            }
        };
        let num = adaptive_simpson(integrand, lower, 4.0, self.rel_tol, 48);
        let den = adaptive_simpson(integrand, lo, 4.0, self.rel_tol, 48);
        (num / den).clamp(0.0, 1.0)
    }
}

/// A named smooth scalar function with a declared domain.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum SmoothFnHandle {
    /// `Ψ` on `(-1, 1]`.
    Psi,
    /// `γ₀` on the real line.
    Gamma0,
    /// `α₀` on `[0, 1]`.
    Alpha0(Alpha0),
    Eta(Eta),
    OmegaHat1(OmegaHat1),
    VHat0(VHat0),
    /// The series `g` on `[-1, 1]`.
    GSeries(GSeries),
    RadialW(RadialW),
    /// Any other profile, e.g. a constant or a blend cut-off.
    Custom {
        name: &'static str,
        dim: usize,
        #[cfg_attr(feature = "serde", serde(skip))]
        f: fn(&[f64]) -> f64,
    },
}

/// Finite-difference magnitudes for one derivative order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FlatnessRow {
    pub order: u32,
    pub magnitudes: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FlatnessReport {
    pub steps: Vec<f64>,
    pub rows: Vec<FlatnessRow>,
    pub pass: bool,
}

/// Default steps for [`SmoothFnHandle::flatness_report`].
pub const FLATNESS_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// An order-k difference passes when it is below `FLATNESS_FACTOR * step`.
pub const FLATNESS_FACTOR: f64 = 10.0;

impl SmoothFnHandle {
    pub fn dim(&self) -> usize {
        match self {
            SmoothFnHandle::Psi
            | SmoothFnHandle::Gamma0
            | SmoothFnHandle::Alpha0(_)
            | SmoothFnHandle::GSeries(_) => 1,
            SmoothFnHandle::VHat0(_) => 2,
            SmoothFnHandle::Eta(e) => e.dim,
            SmoothFnHandle::OmegaHat1(o) => o.dim,
            SmoothFnHandle::RadialW(w) => w.dim,
            SmoothFnHandle::Custom { dim, .. } => *dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmoothFnHandle::Psi => "psi",
            SmoothFnHandle::Gamma0 => "gamma0",
            SmoothFnHandle::Alpha0(_) => "alpha0",
            SmoothFnHandle::Eta(_) => "eta",
            SmoothFnHandle::OmegaHat1(_) => "omegaHat1",
            SmoothFnHandle::VHat0(_) => "vhat0",
            SmoothFnHandle::GSeries(_) => "gseries",
            SmoothFnHandle::RadialW(_) => "radialW",
            SmoothFnHandle::Custom { name, .. } => name,
        }
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid("point dimension does not match the function"));
        }
        check_finite(x)?;
        let out = |value: f64, reason| {
            Err(Error::Domain {
                coordinate: 0,
                value,
                reason,
            })
        };
        match self {
            SmoothFnHandle::Psi if !(x[0] > -1.0 && x[0] <= 1.0) => out(x[0], "psi is defined on (-1, 1]"),
            SmoothFnHandle::Alpha0(_) if !(0.0..=1.0).contains(&x[0]) => {
                out(x[0], "alpha0 is defined on [0, 1]")
            }
            SmoothFnHandle::GSeries(_) if !(-1.0..=1.0).contains(&x[0]) => {
                out(x[0], "g is defined on [-1, 1]")
            }
            SmoothFnHandle::RadialW(_) if norm(x) > 2.0 => {
                let (i, v) = x
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                    .map(|(i, v)| (i, *v))
                    .unwrap_or((0, 0.0));
                Err(Error::Domain {
                    coordinate: i,
                    value: v,
                    reason: "w is defined on the closed ball of radius 2",
                })
            }
            _ => Ok(()),
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFnHandle::Psi => psi(x[0]),
            SmoothFnHandle::Gamma0 => gamma0(x[0]),
            SmoothFnHandle::Alpha0(a) => a.value(x[0]),
            SmoothFnHandle::Eta(e) => e.value(x),
            SmoothFnHandle::OmegaHat1(o) => o.profile(norm(x)),
            SmoothFnHandle::VHat0(v) => v.value(x[0], x[1]),
            SmoothFnHandle::GSeries(g) => g.eval(x[0]),
            SmoothFnHandle::RadialW(w) => w.profile(norm(x)),
            SmoothFnHandle::Custom { f, .. } => f(x),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.raw(x))
    }

    /// Central-difference estimate of the `order`-th derivative along the
    /// first coordinate axis.
    pub fn deriv(&self, x: &[f64], order: u32, step: f64) -> Result<f64> {
        let mut dir = alloc::vec![0.0; self.dim()];
        if let Some(d) = dir.first_mut() {
            *d = 1.0;
        }
        self.deriv_along(x, &dir, order, step)
    }

    pub fn deriv_along(&self, x: &[f64], dir: &[f64], order: u32, step: f64) -> Result<f64> {
        if !(1..=4).contains(&order) {
            return Err(Error::invalid("derivative order must be in 1..=4"));
        }
        if !(step > 0.0) {
            return Err(Error::invalid("step must be positive"));
        }
        if dir.len() != x.len() {
            return Err(Error::invalid("direction dimension mismatch"));
        }
        let (offsets, coeffs, denom): (&[f64], &[f64], f64) = match order {
            1 => (&[-1.0, 1.0], &[-1.0, 1.0], 2.0 * step),
            2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0], step * step),
            3 => (
                &[-2.0, -1.0, 1.0, 2.0],
                &[-1.0, 2.0, -2.0, 1.0],
                2.0 * step.powi(3),
            ),
            _ => (
                &[-2.0, -1.0, 0.0, 1.0, 2.0],
                &[1.0, -4.0, 6.0, -4.0, 1.0],
                step.powi(4),
            ),
        };
        let mut p = alloc::vec![0.0; x.len()];
        let mut acc = 0.0;
        for (o, c) in offsets.iter().zip(coeffs) {
            for ((pi, xi), di) in p.iter_mut().zip(x).zip(dir) {
                *pi = xi + o * step * di;
            }
            acc += c * self.eval(&p)?;
        }
        Ok(acc / denom)
    }

    /// Finite-difference magnitudes of orders `1..=max_order` over the given
    /// steps. An order passes when every magnitude is below
    /// [`FLATNESS_FACTOR`]` * step`.
    pub fn flatness_report(&self, x0: &[f64], max_order: u32, steps: &[f64]) -> Result<FlatnessReport> {
        if max_order > 4 {
            return Err(Error::invalid("flatness orders are limited to 4"));
        }
        let mut rows = Vec::with_capacity(max_order as usize);
        for order in 1..=max_order {
            let mut magnitudes = Vec::with_capacity(steps.len());
            for &h in steps {
                magnitudes.push(self.deriv(x0, order, h)?.abs());
            }
            let pass = magnitudes
                .iter()
                .zip(steps)
                .all(|(m, h)| *m < FLATNESS_FACTOR * h);
            rows.push(FlatnessRow {
                order,
                magnitudes,
                pass,
            });
        }
        let pass = rows.iter().all(|r| r.pass);
        Ok(FlatnessReport {
            steps: steps.to_vec(),
            rows,
            pass,
        })
    }

    /// Estimate of `∫_{B(0,R)} 1/f`, or [`Error::Divergent`].
    ///
    /// The function is sampled on the half-plane `(r cos θ, r sin θ, 0, …)`,
    /// which is exact for every handle here because they are all symmetric
    /// about the first axis. Radial and polar panels are dyadically graded
    /// toward the origin and toward the axis; `resolution` is the number of
    /// refinement levels. The contribution of each new level is tracked and a
    /// non-decaying sequence is reported as divergence.
    pub fn integral_reciprocal(&self, ball_radius: f64, resolution: usize) -> Result<f64> {
        if !(ball_radius > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        if resolution < 4 {
            return Err(Error::invalid("resolution must be at least 4 levels"));
        }
        let dim = self.dim();
        let gl = GaussLegendre::new(12);
        let levels = resolution;
        let mut contrib = alloc::vec![0.0f64; levels];
        let mut point = alloc::vec![0.0; dim];
        let recip = |this: &Self, p: &[f64]| -> f64 {
            let v = this.raw(p);
            if v > 0.0 {
                1.0 / v
            } else {
                f64::INFINITY
            }
        };
        let radial = |k: usize| {
            (
                ball_radius / 2f64.powi(k as i32 + 1),
                ball_radius / 2f64.powi(k as i32),
            )
        };

        if dim == 1 {
            for (k, c) in contrib.iter_mut().enumerate() {
                let (a, b) = radial(k);
                for sign in [-1.0, 1.0] {
                    *c += gl.integrate(a, b, |r| {
                        point[0] = sign * r;
                        recip(self, &point)
                    });
                }
            }
        } else if dim == 2 {
            for (k, c) in contrib.iter_mut().enumerate() {
                let (a, b) = radial(k);
                for panel in 0..8 {
                    let t0 = 2.0 * PI * panel as f64 / 8.0;
                    let t1 = t0 + 2.0 * PI / 8.0;
                    for (r, wr) in gl.points(a, b) {
                        for (th, wt) in gl.points(t0, t1) {
                            point[0] = r * th.cos();
                            point[1] = r * th.sin();
                            *c += wr * wt * r * recip(self, &point);
                        }
                    }
                }
            }
        } else {
            let sphere = sphere_area(dim - 2);
            let polar = |j: usize| (PI / 2f64.powi(j as i32 + 2), PI / 2f64.powi(j as i32 + 1));
            for k in 0..levels {
                for j in 0..levels {
                    let level = k.max(j);
                    let (a, b) = radial(k);
                    let (t0, t1) = polar(j);
                    let mut acc = 0.0;
                    for (r, wr) in gl.points(a, b) {
                        let rw = wr * r.powi(dim as i32 - 1);
                        for (th0, wt) in gl.points(t0, t1) {
                            let jac = th0.sin().powi(dim as i32 - 2) * wt;
                            for th in [th0, PI - th0] {
                                point[0] = r * th.cos();
                                point[1] = r * th.sin();
                                acc += rw * jac * recip(self, &point);
                            }
                        }
                    }
                    contrib[level] += sphere * acc;
                }
            }
        }

        let total: f64 = contrib.iter().sum();
        if !total.is_finite() {
            return Err(Error::Divergent { ratio: f64::INFINITY });
        }
        let last = contrib[levels - 1];
        let prev = contrib[levels - 2];
        let ratio = if prev > 0.0 { last / prev } else { 0.0 };
        if ratio > 0.7 && last > 1e-9 * total {
            return Err(Error::Divergent { ratio });
        }
        let tail = if ratio > 0.0 && ratio < 1.0 {
            last * ratio / (1.0 - ratio)
        } else {
            0.0
        };
        Ok(total + tail)
    }
}

/// Surface area of the unit `k`-sphere in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

/// Volume of the ball of radius `r` in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    sphere_area(d - 1) * r.powi(d as i32) / d as f64
}
